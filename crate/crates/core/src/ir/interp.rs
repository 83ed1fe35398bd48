//! Deterministic interpreter for lowered components.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::image::{decode_image, encode_image, RecordValue};
use super::{
    BinOp, Function, FunctionSet, GlobalType, InstrRef, Instruction, IrProgram, Op, Operand,
    ScalarType, SinkKind, UnOp,
};

pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;

const MAX_CALL_DEPTH: usize = 256;
const TRAP_EXIT: i32 = 134;
const TIMEOUT_EXIT: i32 = 124;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Str(String),
    Record(RecordValue),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Str(s) => s.clone(),
            Value::Record(r) => format!("<{}>", r.record),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Trapped,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
    pub image_after: Option<RecordValue>,
    pub steps_executed: u64,
    pub outcome: Outcome,
    /// Instruction that ended the run, if it ended on an explicit exit,
    /// error sink or trap.
    pub exit_site: Option<InstrRef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecConfig {
    pub step_budget: u64,
    /// Textual defaults for parameters absent from argv.
    pub defaults: BTreeMap<String, String>,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            step_budget: DEFAULT_STEP_BUDGET,
            defaults: BTreeMap::new(),
        }
    }
}

enum Stop {
    Exit(i32, Option<InstrRef>),
    Trap(String, Option<InstrRef>),
    Timeout,
}

struct Machine<'a> {
    prog: &'a IrProgram,
    component: &'a str,
    fs: &'a FunctionSet,
    argv: BTreeMap<&'a str, &'a str>,
    workdir: &'a Path,
    config: &'a ExecConfig,
    globals: BTreeMap<String, Value>,
    stdout: String,
    stderr: String,
    image_after: Option<RecordValue>,
    steps: u64,
    depth: usize,
}

struct Frame {
    vars: BTreeMap<String, Value>,
    temps: BTreeMap<u32, Value>,
}

/// Run `component`'s `main` (or its first function) with `argv`.
///
/// Images are read from and written to `workdir` only.
pub fn execute(
    prog: &IrProgram,
    component: &str,
    argv: &[(String, String)],
    workdir: &Path,
    config: &ExecConfig,
) -> ExecutionResult {
    let Some(fs) = prog.components.get(component) else {
        return ExecutionResult {
            exit_code: TRAP_EXIT,
            stdout: String::new(),
            stderr: format!("{component}: trap: unknown component\n"),
            image_after: None,
            steps_executed: 0,
            outcome: Outcome::Trapped,
            exit_site: None,
        };
    };
    let mut m = Machine {
        prog,
        component,
        fs,
        argv: argv.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect(),
        workdir,
        config,
        globals: BTreeMap::new(),
        stdout: String::new(),
        stderr: String::new(),
        image_after: None,
        steps: 0,
        depth: 0,
    };
    let stop = m.init_globals().and_then(|_| {
        let entry = fs
            .function("main")
            .or_else(|| fs.functions.first())
            .ok_or_else(|| Stop::Trap("no entry function".into(), None))?;
        m.call(entry, Vec::new()).map(|_| ())
    });
    let (exit_code, outcome, exit_site) = match stop {
        Ok(()) => (0, Outcome::Completed, None),
        Err(Stop::Exit(c, site)) => (c, Outcome::Completed, site),
        Err(Stop::Trap(reason, site)) => {
            let at = site
                .as_ref()
                .and_then(|s| s.resolve(prog))
                .map(|i| format!(" at {}", i.loc))
                .unwrap_or_default();
            m.stderr
                .push_str(&format!("{component}: trap: {reason}{at}\n"));
            (TRAP_EXIT, Outcome::Trapped, site)
        }
        Err(Stop::Timeout) => {
            m.stderr
                .push_str(&format!("{component}: step budget exhausted\n"));
            (TIMEOUT_EXIT, Outcome::TimedOut, None)
        }
    };
    ExecutionResult {
        exit_code,
        stdout: m.stdout,
        stderr: m.stderr,
        image_after: m.image_after,
        steps_executed: m.steps,
        outcome,
        exit_site,
    }
}

fn parse_int(s: &str) -> Option<i64> {
    let t = s.trim();
    if let Some(h) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        return i64::from_str_radix(h, 16).ok();
    }
    t.parse().ok()
}

fn parse_flag(s: &str) -> Option<i64> {
    match s.trim().to_ascii_lowercase().as_str() {
        "on" | "1" | "true" | "yes" => Some(1),
        "off" | "0" | "false" | "no" => Some(0),
        _ => None,
    }
}

impl<'a> Machine<'a> {
    fn init_globals(&mut self) -> Result<(), Stop> {
        for g in &self.fs.globals {
            let v = match (&g.ty, &g.init) {
                (_, Some(Operand::Int(i))) => Value::Int(*i),
                (_, Some(Operand::Str(s))) => Value::Str(s.clone()),
                (GlobalType::Scalar(ScalarType::String), _) => Value::Str(String::new()),
                (GlobalType::Scalar(_), _) => Value::Int(0),
                (GlobalType::Record(r), _) => {
                    let rt = self
                        .prog
                        .record(r)
                        .ok_or_else(|| Stop::Trap(format!("unknown record {r}"), None))?;
                    Value::Record(RecordValue::zeroed(rt))
                }
            };
            self.globals.insert(g.name.clone(), v);
        }
        Ok(())
    }

    fn site(&self, f: &Function, i: &Instruction) -> InstrRef {
        InstrRef {
            component: self.component.to_string(),
            function: f.name.clone(),
            block: i.block,
            index: i.index,
        }
    }

    fn read(&self, frame: &Frame, o: &Operand) -> Result<Value, String> {
        match o {
            Operand::Int(i) => Ok(Value::Int(*i)),
            Operand::Str(s) => Ok(Value::Str(s.clone())),
            Operand::Temp(t) => frame
                .temps
                .get(t)
                .cloned()
                .ok_or_else(|| format!("undefined temp %{t}")),
            Operand::Var(v) => frame
                .vars
                .get(v)
                .or_else(|| self.globals.get(v))
                .cloned()
                .ok_or_else(|| format!("undefined variable {v}")),
            Operand::Global(g) => self
                .globals
                .get(g)
                .cloned()
                .ok_or_else(|| format!("undefined global {g}")),
        }
    }

    fn write(&mut self, frame: &mut Frame, o: &Operand, v: Value) {
        match o {
            Operand::Temp(t) => {
                frame.temps.insert(*t, v);
            }
            Operand::Global(g) => {
                self.globals.insert(g.clone(), v);
            }
            Operand::Var(name)
                if !frame.vars.contains_key(name) && self.globals.contains_key(name) =>
            {
                self.globals.insert(name.clone(), v);
            }
            Operand::Var(name) => {
                frame.vars.insert(name.clone(), v);
            }
            Operand::Int(_) | Operand::Str(_) => {}
        }
    }

    fn call(&mut self, f: &'a Function, args: Vec<Value>) -> Result<Value, Stop> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Stop::Trap("call depth exceeded".into(), None));
        }
        self.depth += 1;
        let mut frame = Frame {
            vars: f.params.iter().cloned().zip(args).collect(),
            temps: BTreeMap::new(),
        };
        let mut block = 0u32;
        let ret = 'outer: loop {
            let Some(b) = f.blocks.get(block as usize) else {
                break Err(Stop::Trap(format!("jump to missing block bb{block}"), None));
            };
            for ins in &b.instrs {
                if self.steps >= self.config.step_budget {
                    break 'outer Err(Stop::Timeout);
                }
                self.steps += 1;
                match self.step(&mut frame, ins) {
                    Ok(Flow::Next) => {}
                    Ok(Flow::Goto(t)) => {
                        block = t;
                        continue 'outer;
                    }
                    Ok(Flow::Return(v)) => break 'outer Ok(v),
                    Err(Fault::Stop(s)) => break 'outer Err(s),
                    Err(Fault::Trap(msg)) => {
                        break 'outer Err(Stop::Trap(msg, Some(self.site(f, ins))))
                    }
                    Err(Fault::Exit(c)) => {
                        break 'outer Err(Stop::Exit(c, Some(self.site(f, ins))))
                    }
                }
            }
            break Ok(Value::Int(0));
        };
        self.depth -= 1;
        ret
    }

    fn step(&mut self, frame: &mut Frame, ins: &Instruction) -> Result<Flow, Fault> {
        let ops = ins
            .operands
            .iter()
            .map(|o| self.read(frame, o))
            .collect::<Result<Vec<_>, _>>()
            .map_err(Fault::Trap)?;
        let result = match &ins.op {
            Op::Const | Op::Copy => Some(ops[0].clone()),
            Op::Binop { op } => Some(binop(*op, &ops[0], &ops[1])?),
            Op::Unop { op } => {
                let a = int(&ops[0])?;
                Some(Value::Int(match op {
                    UnOp::Not => (a == 0) as i64,
                    UnOp::BitNot => !a,
                    UnOp::Neg => a.wrapping_neg(),
                }))
            }
            Op::LoadField { field } => match &ops[0] {
                Value::Record(r) => Some(
                    r.get(field)
                        .cloned()
                        .ok_or_else(|| Fault::Trap(format!("no field {field}")))?,
                ),
                _ => return Err(Fault::Trap(format!("field {field} read from a non-record"))),
            },
            Op::StoreField { field } => {
                let Value::Record(mut r) = ops[0].clone() else {
                    return Err(Fault::Trap(format!(
                        "field {field} written to a non-record"
                    )));
                };
                *r.get_mut(field)
                    .ok_or_else(|| Fault::Trap(format!("no field {field}")))? = ops[1].clone();
                self.write(frame, &ins.operands[0], Value::Record(r));
                None
            }
            Op::Call { callee } => {
                let g = self
                    .fs
                    .function(callee)
                    .ok_or_else(|| Fault::Trap(format!("unknown function {callee}")))?;
                Some(self.call(g, ops).map_err(Fault::Stop)?)
            }
            Op::Builtin { name } => self.builtin(name, &ops)?,
            Op::BrCond {
                then_block,
                else_block,
            } => {
                let c = int(&ops[0])?;
                return Ok(Flow::Goto(if c != 0 { *then_block } else { *else_block }));
            }
            Op::Jump { target } => return Ok(Flow::Goto(*target)),
            Op::Ret => {
                return Ok(Flow::Return(
                    ops.into_iter().next().unwrap_or(Value::Int(0)),
                ))
            }
            Op::ErrorSink { sink } => {
                let msg = join(&ops);
                match sink {
                    SinkKind::Error => {
                        self.stderr.push_str(&msg);
                        self.stderr.push('\n');
                        return Err(Fault::Exit(1));
                    }
                    SinkKind::Exit(c) => return Err(Fault::Exit(*c as i32)),
                }
            }
        };
        if let (Some(dst), Some(v)) = (&ins.result, result) {
            self.write(frame, dst, v);
        }
        Ok(Flow::Next)
    }

    fn param_text(&self, name: &str) -> Option<&str> {
        self.argv
            .get(name)
            .copied()
            .or_else(|| self.config.defaults.get(name).map(String::as_str))
    }

    fn builtin(&mut self, name: &str, ops: &[Value]) -> Result<Option<Value>, Fault> {
        let s = |i: usize| -> Result<String, Fault> {
            match ops.get(i) {
                Some(Value::Str(s)) => Ok(s.clone()),
                Some(v) => Ok(v.render()),
                None => Err(Fault::Trap(format!("{name}: missing argument"))),
            }
        };
        Ok(Some(match name {
            "param_int" => {
                let p = s(0)?;
                match self.param_text(&p) {
                    None => Value::Int(0),
                    Some(t) => match parse_int(t) {
                        Some(v) => Value::Int(v),
                        None => {
                            self.stderr.push_str(&format!(
                                "{}: invalid integer value '{t}' for parameter {p}\n",
                                self.component
                            ));
                            return Err(Fault::Exit(1));
                        }
                    },
                }
            }
            "param_flag" => {
                let p = s(0)?;
                match self.param_text(&p) {
                    None => Value::Int(0),
                    Some(t) => match parse_flag(t) {
                        Some(v) => Value::Int(v),
                        None => {
                            self.stderr.push_str(&format!(
                                "{}: invalid flag value '{t}' for parameter {p}\n",
                                self.component
                            ));
                            return Err(Fault::Exit(1));
                        }
                    },
                }
            }
            "param_str" => {
                let p = s(0)?;
                Value::Str(self.param_text(&p).unwrap_or("").to_string())
            }
            "print" => {
                self.stdout.push_str(&join(ops));
                self.stdout.push('\n');
                return Ok(None);
            }
            "warn" => {
                self.stderr.push_str(&join(ops));
                self.stderr.push('\n');
                return Ok(None);
            }
            "exit" => {
                return Err(Fault::Exit(
                    int(ops.first().unwrap_or(&Value::Int(0)))? as i32
                ))
            }
            "streq" => Value::Int((s(0)? == s(1)?) as i64),
            "strint" => {
                let t = s(0)?;
                Value::Int(
                    parse_int(&t)
                        .ok_or_else(|| Fault::Trap(format!("strint: not an integer: {t}")))?,
                )
            }
            "load_image" => {
                let path = self.image_path(&s(0)?)?;
                let rt = self
                    .prog
                    .superblock_record()
                    .ok_or_else(|| Fault::Trap("no superblock record".into()))?;
                let bytes =
                    std::fs::read(&path).map_err(|_| Fault::Trap("missing image".into()))?;
                let rec = decode_image(&bytes, rt)
                    .map_err(|e| Fault::Trap(format!("corrupt image: {e}")))?;
                Value::Record(rec)
            }
            "store_image" => {
                let path = self.image_path(&s(0)?)?;
                let Some(Value::Record(rec)) = ops.get(1) else {
                    return Err(Fault::Trap(
                        "store_image: second argument is not a record".into(),
                    ));
                };
                let rt = self
                    .prog
                    .record(&rec.record)
                    .ok_or_else(|| Fault::Trap(format!("unknown record {}", rec.record)))?;
                let bytes = encode_image(rec, rt).map_err(|e| Fault::Trap(e.to_string()))?;
                std::fs::write(&path, bytes)
                    .map_err(|e| Fault::Trap(format!("cannot write image: {e}")))?;
                self.image_after = Some(rec.clone());
                return Ok(None);
            }
            other => return Err(Fault::Trap(format!("unknown builtin {other}"))),
        }))
    }

    fn image_path(&self, name: &str) -> Result<std::path::PathBuf, Fault> {
        let p = Path::new(name);
        let plain = p.components().count() == 1
            && matches!(p.components().next(), Some(std::path::Component::Normal(_)));
        if !plain {
            return Err(Fault::Trap(format!(
                "image path {name} escapes the working directory"
            )));
        }
        Ok(self.workdir.join(p))
    }
}

enum Flow {
    Next,
    Goto(u32),
    Return(Value),
}

enum Fault {
    Trap(String),
    Exit(i32),
    Stop(Stop),
}

fn join(ops: &[Value]) -> String {
    ops.iter().map(Value::render).collect::<Vec<_>>().join(" ")
}

fn int(v: &Value) -> Result<i64, Fault> {
    match v {
        Value::Int(i) => Ok(*i),
        other => Err(Fault::Trap(format!("expected an integer, found {other}"))),
    }
}

fn binop(op: BinOp, a: &Value, b: &Value) -> Result<Value, Fault> {
    if let (Value::Str(x), Value::Str(y)) = (a, b) {
        return match op {
            BinOp::Eq => Ok(Value::Int((x == y) as i64)),
            BinOp::Ne => Ok(Value::Int((x != y) as i64)),
            BinOp::Add => Ok(Value::Str(format!("{x}{y}"))),
            _ => Err(Fault::Trap(format!("operator {} on strings", op.symbol()))),
        };
    }
    let (x, y) = (int(a)?, int(b)?);
    Ok(Value::Int(match op {
        BinOp::Add => x.wrapping_add(y),
        BinOp::Sub => x.wrapping_sub(y),
        BinOp::Mul => x.wrapping_mul(y),
        BinOp::Div | BinOp::Rem if y == 0 => return Err(Fault::Trap("division by zero".into())),
        BinOp::Div => x.wrapping_div(y),
        BinOp::Rem => x.wrapping_rem(y),
        BinOp::And => x & y,
        BinOp::Or => x | y,
        BinOp::Xor => x ^ y,
        BinOp::Shl => x.wrapping_shl(y as u32),
        BinOp::Shr => x.wrapping_shr(y as u32),
        BinOp::Eq => (x == y) as i64,
        BinOp::Ne => (x != y) as i64,
        BinOp::Lt => (x < y) as i64,
        BinOp::Le => (x <= y) as i64,
        BinOp::Gt => (x > y) as i64,
        BinOp::Ge => (x >= y) as i64,
        BinOp::LogicAnd => (x != 0 && y != 0) as i64,
        BinOp::LogicOr => (x != 0 || y != 0) as i64,
    }))
}
