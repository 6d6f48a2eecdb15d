//! Fixed 17-significant-digit number output.
//!
//! Seventeen significant digits round-trip every `f64`, and a fixed format
//! keeps reports byte-identical across runs.

use serde::Serializer;
use serde_json::value::RawValue;

/// Formats `x` with 17 significant digits in scientific notation.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn raw(x: f64) -> Box<RawValue> {
    // JSON has no representation for non-finite values.
    let text = if x.is_finite() { fmt17(x) } else { "null".to_string() };
    RawValue::from_string(text).expect("formatted number is valid JSON")
}

pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&raw(*x), s)
}

pub fn ser_opt_f64<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_f64(v, s),
        None => s.serialize_none(),
    }
}

pub fn ser_f64_slice<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&raw(*x))?;
    }
    seq.end()
}
