mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "confdep",
    version,
    about = "Configuration dependency extraction for file-system ecosystems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Following,
    Violating,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Replace,
    Append,
}

#[derive(Subcommand)]
pub enum Command {
    /// Compile the ecosystem and extract its dependencies.
    Extract {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        src: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the taint traces as JSON.
        #[arg(long)]
        dump_traces: Option<PathBuf>,
        /// Call-string length for the taint analysis.
        #[arg(long, default_value_t = 8)]
        context_depth: usize,
        /// Keep data_type dependencies of flag parameters.
        #[arg(long)]
        flag_data_types: bool,
    },
    /// Generate configuration states from a dependency document.
    GenStates {
        #[arg(short, long)]
        deps: PathBuf,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "following")]
        policy: PolicyArg,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Seed parameters, as `name` or `component.name`.
        #[arg(long, value_delimiter = ',')]
        params: Vec<String>,
        /// Dependency levels to honor: SD, CPD, CCD.
        #[arg(long, value_delimiter = ',')]
        dep_kinds: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Print the command lines of every state.
        #[arg(long)]
        render: bool,
        /// Also report the dependency-agnostic baseline over the seeds.
        #[arg(long)]
        naive: bool,
    },
    /// Check parameter documentation against the dependencies.
    CheckSpec {
        #[arg(short, long)]
        deps: PathBuf,
        #[arg(long)]
        docs: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run violating states and classify how the ecosystem reacts.
    CheckHandling {
        #[arg(short, long)]
        deps: PathBuf,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        src: PathBuf,
        /// Violating states; generated with default options when absent.
        #[arg(long)]
        states: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Rewrite regression scripts with generated states.
    RewriteTests {
        #[arg(long)]
        tests: PathBuf,
        #[arg(long)]
        states: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        deps: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Execute sources and rewrites against the compiled components and
        /// report failures the rewrite introduced.
        #[arg(long)]
        verify_src: Option<PathBuf>,
    },
    /// Read dependencies from a declarative configuration table.
    ExtractDecl {
        #[arg(short, long)]
        table: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run one component on the interpreter.
    Run {
        #[arg(short, long)]
        src: PathBuf,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        component: String,
        /// Working directory holding the image.
        #[arg(short, long, default_value = ".")]
        workdir: PathBuf,
        #[arg(last = true)]
        args: Vec<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("confdep: {e:#}");
            ExitCode::from(2)
        }
    }
}
