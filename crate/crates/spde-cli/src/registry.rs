//! Short `name:key=value,...` syntax for registry selections on the command
//! line. Lists use `;` (`value=0.5;0.2`); a leading `{` means raw JSON.

use serde::de::DeserializeOwned;
use serde_json::{Map, Number, Value};

fn scalar(s: &str) -> Value {
    if let Ok(b) = s.parse::<bool>() {
        return Value::Bool(b);
    }
    if let Ok(i) = s.parse::<u64>() {
        return Value::Number(i.into());
    }
    match s.parse::<f64>().ok().and_then(Number::from_f64) {
        Some(n) => Value::Number(n),
        None => Value::String(s.into()),
    }
}

/// Parses a selection into the JSON tree of a serde-tagged registry enum.
pub fn to_value(text: &str, tag: &str) -> Result<Value, String> {
    let text = text.trim();
    if text.starts_with('{') {
        return serde_json::from_str(text).map_err(|e| format!("invalid JSON '{text}': {e}"));
    }
    let (name, rest) = text.split_once(':').unwrap_or((text, ""));
    let mut obj = Map::new();
    obj.insert(tag.into(), Value::String(name.into()));
    for kv in rest.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("expected key=value, got '{kv}' in '{text}'"))?;
        let v = if v.contains(';') {
            Value::Array(v.split(';').map(|x| scalar(x.trim())).collect())
        } else if k == "value" && tag == "law" {
            Value::Array(vec![scalar(v.trim())])
        } else {
            scalar(v.trim())
        };
        obj.insert(k.trim().into(), v);
    }
    Ok(Value::Object(obj))
}

pub fn parse<T: DeserializeOwned>(text: &str, tag: &str) -> Result<T, String> {
    let v = to_value(text, tag)?;
    serde_json::from_value(v).map_err(|e| format!("'{text}': {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use spde_core::initial::InitialLaw;
    use spde_core::profile::Profile;
    use spde_core::sectorial::OperatorSpec;

    #[test]
    fn short_forms() {
        let p: Profile = parse("sine:amplitude=1,frequency=3", "profile").unwrap();
        assert_eq!(
            p,
            Profile::Sine {
                amplitude: 1.0,
                frequency: 3.0
            }
        );
        let o: OperatorSpec = parse("dirichlet_laplacian1d:d=3", "kind").unwrap();
        assert_eq!(o, OperatorSpec::DirichletLaplacian1d { d: 3, scale: 1.0 });
        let i: InitialLaw = parse("deterministic:value=0.5;0.25", "law").unwrap();
        assert_eq!(i, InitialLaw::Deterministic { value: vec![0.5, 0.25] });
        let one: InitialLaw = parse("deterministic:value=2", "law").unwrap();
        assert_eq!(one, InitialLaw::Deterministic { value: vec![2.0] });
        let z: Profile = parse(r#"{"profile": "zero"}"#, "profile").unwrap();
        assert_eq!(z, Profile::Zero);
    }

    #[test]
    fn bad_pair_is_reported() {
        assert!(parse::<Profile>("constant:value", "profile").unwrap_err().contains("key=value"));
    }
}
