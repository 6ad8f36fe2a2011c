//! Number rendering shared by the CSV and JSON writers.

use serde_json::Value;

/// Shortest round-trip text; infinities as "+inf"/"-inf".
pub fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:?}")
    }
}

/// JSON number for finite values, the [`num`] string otherwise.
pub fn num_json(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(num(x)), Value::Number)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders() {
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(2.0), "2.0");
        assert_eq!(num(-f64::INFINITY), "-inf");
        assert_eq!(num_json(f64::INFINITY), Value::String("+inf".into()));
        assert_eq!(num_json(1.5), serde_json::json!(1.5));
    }
}
