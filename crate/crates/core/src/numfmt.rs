//! Fixed-significance number formatting for reports and CSV output.
//!
//! All emitted floating-point text carries six significant digits, which
//! keeps files byte-reproducible across runs and platforms.

/// Format with six significant digits, plain decimal notation.
pub fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (5 - exponent).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // trim trailing zeros in the fraction, then a dangling point
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        t.to_string()
    } else {
        s
    }
}

/// Round to six significant digits (via the decimal representation, so the
/// result re-parses to exactly what `sig6` prints).
pub fn round_sig6(v: f64) -> f64 {
    sig6(v).parse().unwrap_or(v)
}

/// Recursively round every float in a JSON value to six significant digits.
pub fn round_json_floats(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_f64() {
                    if let Some(rounded) = serde_json::Number::from_f64(round_sig6(f)) {
                        *n = rounded;
                    }
                }
            }
        }
        serde_json::Value::Array(items) => {
            for item in items {
                round_json_floats(item);
            }
        }
        serde_json::Value::Object(map) => {
            for (_, item) in map.iter_mut() {
                round_json_floats(item);
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(2.16), "2.16");
        assert_eq!(sig6(-0.5457), "-0.5457");
        assert_eq!(sig6(1234.56789), "1234.57");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(307200.0), "307200");
        assert_eq!(sig6(69.77), "69.77");
    }

    #[test]
    fn rounding_is_stable_under_reformat() {
        for v in [std::f64::consts::PI, 1.0 / 3.0, 123456.789, 1e-7] {
            let r = round_sig6(v);
            assert_eq!(sig6(r), sig6(v));
            assert_eq!(round_sig6(r), r);
        }
    }

    #[test]
    fn json_floats_rounded_everywhere() {
        let mut v = serde_json::json!({
            "a": 0.123456789,
            "b": [1.23456789e-3, {"c": 9.87654321}],
            "n": 42,
            "s": "text"
        });
        round_json_floats(&mut v);
        assert_eq!(v["a"], serde_json::json!(0.123457));
        assert_eq!(v["b"][0], serde_json::json!(0.00123457));
        assert_eq!(v["b"][1]["c"], serde_json::json!(9.87654));
        assert_eq!(v["n"], serde_json::json!(42));
    }
}
