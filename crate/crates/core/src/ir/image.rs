//! Binary superblock image.
//!
//! Layout: a little-endian `u32` payload length followed by the payload, which
//! holds the record's fields in declaration order. `int` and `flagword`
//! fields take 8 bytes (little-endian two's complement); `string` fields are a
//! little-endian `u32` byte length followed by UTF-8 bytes.

use serde::{Deserialize, Serialize};

use super::interp::Value;
use super::{RecordType, ScalarType};

/// A by-value record instance with named fields in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RecordValue {
    pub record: String,
    pub fields: Vec<(String, Value)>,
}

impl RecordValue {
    /// All-zero instance of `rt`.
    pub fn zeroed(rt: &RecordType) -> Self {
        Self {
            record: rt.name.clone(),
            fields: rt
                .fields
                .iter()
                .map(|f| {
                    let v = match f.ty {
                        ScalarType::String => Value::Str(String::new()),
                        _ => Value::Int(0),
                    };
                    (f.name.clone(), v)
                })
                .collect(),
        }
    }

    pub fn get(&self, field: &str) -> Option<&Value> {
        self.fields.iter().find(|(n, _)| n == field).map(|(_, v)| v)
    }

    pub fn get_mut(&mut self, field: &str) -> Option<&mut Value> {
        self.fields
            .iter_mut()
            .find(|(n, _)| n == field)
            .map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ImageError {
    #[error("image truncated")]
    Truncated,
    #[error("image payload length {declared} does not match {actual} bytes present")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("image field {0} is not valid UTF-8")]
    BadString(String),
    #[error("record value does not match type {0}")]
    WrongShape(String),
    #[error("cannot compare records of type {0} and {1}")]
    TypeMismatch(String, String),
}

pub fn encode_image(value: &RecordValue, rt: &RecordType) -> Result<Vec<u8>, ImageError> {
    if value.record != rt.name || value.fields.len() != rt.fields.len() {
        return Err(ImageError::WrongShape(rt.name.clone()));
    }
    let mut payload = Vec::new();
    for (decl, (name, v)) in rt.fields.iter().zip(&value.fields) {
        if &decl.name != name {
            return Err(ImageError::WrongShape(rt.name.clone()));
        }
        match (decl.ty, v) {
            (ScalarType::Int | ScalarType::Flagword, Value::Int(i)) => {
                payload.extend_from_slice(&i.to_le_bytes())
            }
            (ScalarType::String, Value::Str(s)) => {
                payload.extend_from_slice(&(s.len() as u32).to_le_bytes());
                payload.extend_from_slice(s.as_bytes());
            }
            _ => return Err(ImageError::WrongShape(rt.name.clone())),
        }
    }
    let mut out = Vec::with_capacity(payload.len() + 4);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_image(bytes: &[u8], rt: &RecordType) -> Result<RecordValue, ImageError> {
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], ImageError> {
        let s = bytes.get(*pos..*pos + n).ok_or(ImageError::Truncated)?;
        *pos += n;
        Ok(s)
    };
    let mut pos = 0;
    let declared = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    if declared != bytes.len() - 4 {
        return Err(ImageError::LengthMismatch {
            declared,
            actual: bytes.len() - 4,
        });
    }
    let mut fields = Vec::with_capacity(rt.fields.len());
    for f in &rt.fields {
        let v = match f.ty {
            ScalarType::Int | ScalarType::Flagword => {
                Value::Int(i64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()))
            }
            ScalarType::String => {
                let len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
                let raw = take(&mut pos, len)?;
                Value::Str(
                    String::from_utf8(raw.to_vec())
                        .map_err(|_| ImageError::BadString(f.name.clone()))?,
                )
            }
        };
        fields.push((f.name.clone(), v));
    }
    if pos != bytes.len() {
        return Err(ImageError::LengthMismatch {
            declared,
            actual: pos - 4,
        });
    }
    Ok(RecordValue {
        record: rt.name.clone(),
        fields,
    })
}

/// Fields whose values differ, in declaration order.
pub fn diff_images(
    a: &RecordValue,
    b: &RecordValue,
) -> Result<Vec<(String, Value, Value)>, ImageError> {
    let same_shape = a.record == b.record
        && a.fields.len() == b.fields.len()
        && a.fields.iter().zip(&b.fields).all(|(x, y)| x.0 == y.0);
    if !same_shape {
        return Err(ImageError::TypeMismatch(a.record.clone(), b.record.clone()));
    }
    Ok(a.fields
        .iter()
        .zip(&b.fields)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, y)| (x.0.clone(), x.1.clone(), y.1.clone()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::FieldType;
    use proptest::prelude::*;

    fn rt() -> RecordType {
        RecordType {
            name: "Superblock".into(),
            fields: vec![
                FieldType {
                    name: "s_log_block_size".into(),
                    ty: ScalarType::Int,
                },
                FieldType {
                    name: "s_feature_flags".into(),
                    ty: ScalarType::Flagword,
                },
                FieldType {
                    name: "s_volume_name".into(),
                    ty: ScalarType::String,
                },
            ],
        }
    }

    #[test]
    fn layout_is_bit_exact() {
        let mut v = RecordValue::zeroed(&rt());
        *v.get_mut("s_log_block_size").unwrap() = Value::Int(2);
        *v.get_mut("s_feature_flags").unwrap() = Value::Int(-1);
        *v.get_mut("s_volume_name").unwrap() = Value::Str("ab".into());
        let bytes = encode_image(&v, &rt()).unwrap();
        let mut expected = vec![22, 0, 0, 0];
        expected.extend_from_slice(&[2, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&[0xff; 8]);
        expected.extend_from_slice(&[2, 0, 0, 0, b'a', b'b']);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn identical_images_have_no_diff() {
        let v = RecordValue::zeroed(&rt());
        assert!(diff_images(&v, &v).unwrap().is_empty());
    }

    #[test]
    fn single_bit_difference() {
        let a = RecordValue::zeroed(&rt());
        let mut b = a.clone();
        *b.get_mut("s_feature_flags").unwrap() = Value::Int(1 << 3);
        let d = diff_images(&a, &b).unwrap();
        assert_eq!(
            d,
            vec![("s_feature_flags".to_string(), Value::Int(0), Value::Int(8))]
        );
    }

    #[test]
    fn different_record_types_do_not_compare() {
        let a = RecordValue::zeroed(&rt());
        let b = RecordValue {
            record: "Other".into(),
            fields: vec![],
        };
        assert!(matches!(
            diff_images(&a, &b),
            Err(ImageError::TypeMismatch(..))
        ));
    }

    #[test]
    fn truncated_image_is_rejected() {
        let bytes = encode_image(&RecordValue::zeroed(&rt()), &rt()).unwrap();
        assert!(decode_image(&bytes[..bytes.len() - 1], &rt()).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(a in any::<i64>(), b in any::<i64>(), s in "[a-z0-9 ]{0,16}") {
            let v = RecordValue {
                record: "Superblock".into(),
                fields: vec![
                    ("s_log_block_size".into(), Value::Int(a)),
                    ("s_feature_flags".into(), Value::Int(b)),
                    ("s_volume_name".into(), Value::Str(s)),
                ],
            };
            let bytes = encode_image(&v, &rt()).unwrap();
            prop_assert_eq!(decode_image(&bytes, &rt()).unwrap(), v);
        }
    }
}
