//! Report rendering shared by the library and the command line.

use serde::Serializer;

/// Non-finite floats as strings: JSON has no infinity, and `null` would
/// lose the sign.
pub fn ser_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_none()
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn ser_opt_f64<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => ser_f64(x, s),
        None => s.serialize_none(),
    }
}

pub fn ser_f64_map<S: Serializer>(
    v: &std::collections::BTreeMap<String, f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut m = s.serialize_map(Some(v.len()))?;
    for (k, x) in v {
        m.serialize_entry(k, &Num(*x))?;
    }
    m.end()
}

/// A float that serializes through [`ser_f64`].
#[derive(Debug, Clone, Copy)]
pub struct Num(pub f64);

impl serde::Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ser_f64(&self.0, s)
    }
}

/// Report as a JSON tree, with non-finite floats already encoded.
pub fn to_value<T: serde::Serialize>(report: &T) -> serde_json::Value {
    serde_json::to_value(report).expect("reports always serialize")
}

pub fn render_json(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports always serialize");
    s.push('\n');
    s
}

/// One `path = value` line per leaf. Numbers print exactly as in
/// [`render_json`], so both formats carry the same digits.
pub fn render_text(v: &serde_json::Value) -> String {
    let mut out = String::new();
    for (k, x) in flatten(v) {
        out.push_str(&k);
        out.push_str(" = ");
        out.push_str(&x);
        out.push('\n');
    }
    out
}

/// Leaves of a JSON tree keyed by dotted path; strings unquoted, `null`
/// as `none`.
pub fn flatten(v: &serde_json::Value) -> Vec<(String, String)> {
    fn walk(v: &serde_json::Value, path: String, out: &mut Vec<(String, String)>) {
        use serde_json::Value;
        let join = |k: &str| if path.is_empty() { k.to_string() } else { format!("{path}.{k}") };
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    walk(x, join(k), out);
                }
            }
            Value::Array(a) => {
                if a.is_empty() {
                    out.push((path.clone(), "[]".into()));
                }
                for (i, x) in a.iter().enumerate() {
                    walk(x, join(&i.to_string()), out);
                }
            }
            Value::Null => out.push((path, "none".into())),
            Value::String(s) => out.push((path, s.clone())),
            other => out.push((path, other.to_string())),
        }
    }
    let mut out = Vec::new();
    walk(v, String::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(serde::Serialize)]
    struct R {
        #[serde(serialize_with = "ser_f64")]
        a: f64,
        #[serde(serialize_with = "ser_f64")]
        b: f64,
        #[serde(serialize_with = "ser_opt_f64")]
        c: Option<f64>,
        inner: Vec<Num>,
    }

    #[test]
    fn infinities_keep_their_sign() {
        let v = to_value(&R { a: f64::INFINITY, b: f64::NEG_INFINITY, c: None, inner: vec![] });
        assert_eq!(v["a"], "inf");
        assert_eq!(v["b"], "-inf");
        assert!(v["c"].is_null());
    }

    #[test]
    fn text_lines_follow_json_paths() {
        let v = to_value(&R { a: 1e-5, b: 0.1 + 0.2, c: Some(2.0), inner: vec![Num(3.5), Num(f64::NAN)] });
        let t = render_text(&v);
        assert_eq!(t, "a = 0.00001\nb = 0.30000000000000004\nc = 2.0\ninner.0 = 3.5\ninner.1 = none\n");
        assert!(render_json(&v).contains("0.30000000000000004"));
    }
}
