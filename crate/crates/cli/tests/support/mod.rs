//! Validator for the subset of JSON Schema used by the files in `schemas/v1`:
//! `type`, `const`, `enum`, `required`, `properties`, `additionalProperties: false`,
//! `items`, `minItems`, `maxItems`, `minimum` and `oneOf`.

use std::path::PathBuf;

use serde_json::Value;

pub fn load_schema(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas/v1")
        .join(format!("{name}.schema.json"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}

fn type_matches(ty: &str, v: &Value) -> bool {
    match ty {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64(),
        other => panic!("unsupported type {other}"),
    }
}

pub fn validate(schema: &Value, v: &Value, at: &str) -> Result<(), String> {
    let s = schema.as_object().expect("schema is an object");
    for key in s.keys() {
        let known = [
            "$schema",
            "$id",
            "title",
            "description",
            "type",
            "const",
            "enum",
            "required",
            "properties",
            "additionalProperties",
            "items",
            "minItems",
            "maxItems",
            "minimum",
            "oneOf",
        ];
        assert!(
            known.contains(&key.as_str()),
            "validator does not support keyword {key}"
        );
    }
    if let Some(ty) = s.get("type") {
        let ok = match ty {
            Value::String(t) => type_matches(t, v),
            Value::Array(ts) => ts.iter().any(|t| type_matches(t.as_str().unwrap(), v)),
            _ => panic!("bad type keyword"),
        };
        if !ok {
            return Err(format!("{at}: expected type {ty}, got {v}"));
        }
    }
    if let Some(c) = s.get("const") {
        if c != v {
            return Err(format!("{at}: expected {c}, got {v}"));
        }
    }
    if let Some(Value::Array(options)) = s.get("enum") {
        if !options.contains(v) {
            return Err(format!("{at}: {v} not in {options:?}"));
        }
    }
    if let (Some(min), Some(x)) = (s.get("minimum").and_then(Value::as_f64), v.as_f64()) {
        if x < min {
            return Err(format!("{at}: {x} below minimum {min}"));
        }
    }
    if let Some(Value::Array(options)) = s.get("oneOf") {
        let matches = options.iter().filter(|o| validate(o, v, at).is_ok()).count();
        if matches != 1 {
            return Err(format!("{at}: {v} matches {matches} oneOf branches"));
        }
    }
    if let Value::Object(map) = v {
        if let Some(Value::Array(req)) = s.get("required") {
            for key in req {
                if !map.contains_key(key.as_str().unwrap()) {
                    return Err(format!("{at}: missing {key}"));
                }
            }
        }
        let props = s.get("properties").and_then(Value::as_object);
        for (key, value) in map {
            match props.and_then(|p| p.get(key)) {
                Some(sub) => validate(sub, value, &format!("{at}.{key}"))?,
                None if s.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    return Err(format!("{at}: unexpected property {key}"))
                }
                None => {}
            }
        }
    }
    if let Value::Array(items) = v {
        if let Some(min) = s.get("minItems").and_then(Value::as_u64) {
            if (items.len() as u64) < min {
                return Err(format!("{at}: fewer than {min} items"));
            }
        }
        if let Some(max) = s.get("maxItems").and_then(Value::as_u64) {
            if items.len() as u64 > max {
                return Err(format!("{at}: more than {max} items"));
            }
        }
        if let Some(sub) = s.get("items") {
            for (i, item) in items.iter().enumerate() {
                validate(sub, item, &format!("{at}[{i}]"))?;
            }
        }
    }
    Ok(())
}

pub fn assert_valid(name: &str, v: &Value) {
    if let Err(e) = validate(&load_schema(name), v, name) {
        panic!("{e}\n{v:#}");
    }
}
