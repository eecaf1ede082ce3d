//! Kubernetes resource quantities (`250m`, `1.5Gi`, `2e3`).

use serde_yaml::Value;

const BINARY_SUFFIXES: [(&str, f64); 6] = [
    ("Ki", 1024.0),
    ("Mi", 1_048_576.0),
    ("Gi", 1_073_741_824.0),
    ("Ti", 1_099_511_627_776.0),
    ("Pi", 1_125_899_906_842_624.0),
    ("Ei", 1_152_921_504_606_846_976.0),
];

const DECIMAL_SUFFIXES: [(&str, f64); 10] = [
    ("n", 1e-9),
    ("u", 1e-6),
    ("m", 1e-3),
    ("", 1.0),
    ("k", 1e3),
    ("M", 1e6),
    ("G", 1e9),
    ("T", 1e12),
    ("P", 1e15),
    ("E", 1e18),
];

/// Parses a quantity string into base units (bytes or cores).
pub fn parse_quantity(text: &str) -> Option<f64> {
    let s = text.trim();
    let (sign, rest) = match s.as_bytes().first()? {
        b'-' => (-1.0, &s[1..]),
        b'+' => (1.0, &s[1..]),
        _ => (1.0, s),
    };
    let split = rest
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(rest.len());
    let (number, suffix) = rest.split_at(split);
    if number.is_empty() || number == "." || number.matches('.').count() > 1 {
        return None;
    }
    let base: f64 = number.parse().ok()?;

    let multiplier = if let Some((_, m)) = BINARY_SUFFIXES.iter().find(|(s, _)| *s == suffix) {
        *m
    } else if let Some((_, m)) = DECIMAL_SUFFIXES.iter().find(|(s, _)| *s == suffix) {
        *m
    } else {
        let exp = suffix.strip_prefix(['e', 'E'])?;
        let digits = exp.strip_prefix(['+', '-']).unwrap_or(exp);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        10f64.powi(exp.parse().ok()?)
    };
    let value = sign * base * multiplier;
    value.is_finite().then_some(value)
}

/// State of one `resources.{requests,limits}.{cpu,memory}` field.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantityState {
    Missing,
    Invalid(String),
    Valid(f64),
}

/// Classifies a YAML value against `(0, ceiling]`.
pub fn check_quantity(value: Option<&Value>, ceiling: f64) -> QuantityState {
    let parsed = match value {
        None | Some(Value::Null) => return QuantityState::Missing,
        Some(Value::Number(n)) => n.as_f64(),
        Some(Value::String(s)) => parse_quantity(s),
        Some(_) => None,
    };
    let shown = || match value {
        Some(Value::String(s)) => s.clone(),
        Some(v) => serde_yaml::to_string(v).unwrap_or_default().trim().to_string(),
        None => String::new(),
    };
    match parsed {
        None => QuantityState::Invalid(format!("{:?} is not a quantity", shown())),
        Some(v) if v <= 0.0 => QuantityState::Invalid(format!("{:?} is not positive", shown())),
        Some(v) if v > ceiling => QuantityState::Invalid(format!("{:?} exceeds the ceiling", shown())),
        Some(v) => QuantityState::Valid(v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_suffixes() {
        assert_eq!(parse_quantity("250m"), Some(0.25));
        assert_eq!(parse_quantity("250Mi"), Some(250.0 * 1_048_576.0));
        assert_eq!(parse_quantity("1Ti"), Some(1_099_511_627_776.0));
        assert_eq!(parse_quantity("2"), Some(2.0));
        assert_eq!(parse_quantity("1.5G"), Some(1.5e9));
        assert_eq!(parse_quantity("2e3"), Some(2000.0));
        assert_eq!(parse_quantity("12E"), Some(12e18));
        assert_eq!(parse_quantity(".5"), Some(0.5));
        assert_eq!(parse_quantity("-1"), Some(-1.0));
    }

    #[test]
    fn rejects_garbage() {
        for s in ["john", "", "Mi", "1.2.3", "1Kb", "1e", "1e+", "10 Mi", "."] {
            assert_eq!(parse_quantity(s), None, "{s}");
        }
    }

    #[test]
    fn checks_bounds() {
        let ceiling = 64.0;
        let v = |s: &str| serde_yaml::from_str::<Value>(s).unwrap();
        assert_eq!(check_quantity(None, ceiling), QuantityState::Missing);
        assert_eq!(check_quantity(Some(&Value::Null), ceiling), QuantityState::Missing);
        assert_eq!(check_quantity(Some(&v("500m")), ceiling), QuantityState::Valid(0.5));
        assert_eq!(check_quantity(Some(&v("2")), ceiling), QuantityState::Valid(2.0));
        for bad in ["0", "'0'", "john", "-1", "65", "[1]"] {
            assert!(
                matches!(check_quantity(Some(&v(bad)), ceiling), QuantityState::Invalid(_)),
                "{bad}"
            );
        }
    }
}
