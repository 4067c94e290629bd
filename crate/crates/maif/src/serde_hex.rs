//! Serialize fixed byte arrays as lowercase hex in JSON outputs.

use serde::Serializer;

pub fn hash<S: Serializer>(value: &[u8; 32], ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_str(&hex::encode(value))
}

pub fn agent<S: Serializer>(value: &[u8; 16], ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_str(&hex::encode(value))
}

pub fn opt_agent<S: Serializer>(value: &Option<[u8; 16]>, ser: S) -> Result<S::Ok, S::Error> {
    match value {
        Some(v) => ser.serialize_some(&hex::encode(v)),
        None => ser.serialize_none(),
    }
}
