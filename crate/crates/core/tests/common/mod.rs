//! Helpers shared by the integration tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::Value;

pub fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn load_schema(name: &str) -> Value {
    let path = schema_dir().join(format!("{name}.schema.json"));
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

/// Checks `value` against the subset of JSON Schema the shipped schemas use.
/// Returns every violation as `path: message`. Unknown keywords are reported
/// as violations so the subset cannot silently drift.
pub fn schema_errors(schema: &Value, value: &Value) -> Vec<String> {
    let mut errors = Vec::new();
    check(schema, schema, value, "$", &mut errors);
    errors
}

const ANNOTATIONS: [&str; 5] = ["$schema", "$id", "$defs", "title", "x-schema-version"];
// string patterns are checked by dedicated assertions where they matter
const SKIPPED: [&str; 1] = ["pattern"];

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.as_i64().is_some() || v.as_u64().is_some(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        other => panic!("unknown type {other}"),
    }
}

fn check(root: &Value, schema: &Value, v: &Value, at: &str, errors: &mut Vec<String>) {
    let Some(s) = schema.as_object() else {
        errors.push(format!("{at}: schema is not an object"));
        return;
    };
    if let Some(r) = s.get("$ref").and_then(Value::as_str) {
        let name = r.strip_prefix("#/$defs/").expect("only local refs");
        check(root, &root["$defs"][name], v, at, errors);
        return;
    }
    for (key, arg) in s {
        match key.as_str() {
            k if ANNOTATIONS.contains(&k) || SKIPPED.contains(&k) => {}
            "type" => {
                let ok = match arg {
                    Value::String(t) => type_matches(t, v),
                    Value::Array(ts) => ts.iter().any(|t| type_matches(t.as_str().unwrap(), v)),
                    _ => false,
                };
                if !ok {
                    errors.push(format!("{at}: expected type {arg}, got {v}"));
                    return;
                }
            }
            "const" => {
                if arg != v {
                    errors.push(format!("{at}: expected {arg}"));
                }
            }
            "enum" => {
                if !arg.as_array().unwrap().contains(v) {
                    errors.push(format!("{at}: {v} not in {arg}"));
                }
            }
            "minimum" | "maximum" | "exclusiveMinimum" => {
                if let (Some(x), Some(b)) = (v.as_f64(), arg.as_f64()) {
                    let ok = match key.as_str() {
                        "minimum" => x >= b,
                        "maximum" => x <= b,
                        _ => x > b,
                    };
                    if !ok {
                        errors.push(format!("{at}: {x} violates {key} {b}"));
                    }
                }
            }
            "minItems" | "maxItems" => {
                if let Some(a) = v.as_array() {
                    let b = arg.as_u64().unwrap() as usize;
                    if (key == "minItems" && a.len() < b) || (key == "maxItems" && a.len() > b) {
                        errors.push(format!("{at}: {} items violates {key} {b}", a.len()));
                    }
                }
            }
            "items" => {
                if let Some(a) = v.as_array() {
                    for (k, item) in a.iter().enumerate() {
                        check(root, arg, item, &format!("{at}[{k}]"), errors);
                    }
                }
            }
            "required" => {
                if let Some(o) = v.as_object() {
                    for name in arg.as_array().unwrap() {
                        let name = name.as_str().unwrap();
                        if !o.contains_key(name) {
                            errors.push(format!("{at}: missing {name}"));
                        }
                    }
                }
            }
            "properties" => {
                if let Some(o) = v.as_object() {
                    for (name, sub) in arg.as_object().unwrap() {
                        if let Some(child) = o.get(name) {
                            check(root, sub, child, &format!("{at}.{name}"), errors);
                        }
                    }
                }
            }
            "additionalProperties" => {
                if arg == &Value::Bool(false) {
                    if let Some(o) = v.as_object() {
                        let known = s.get("properties").and_then(Value::as_object);
                        for name in o.keys() {
                            if !known.is_some_and(|k| k.contains_key(name)) {
                                errors.push(format!("{at}: unexpected property {name}"));
                            }
                        }
                    }
                }
            }
            other => errors.push(format!("{at}: unsupported schema keyword {other}")),
        }
    }
}

/// Validates every line of a JSON Lines file: the first against `header`,
/// the rest against `line`.
pub fn jsonl_schema_errors(path: &Path, header: &str, line: &str) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let (hs, ls) = (load_schema(header), load_schema(line));
    let mut errors = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let v: Value = serde_json::from_str(raw).unwrap();
        let s = if k == 0 { &hs } else { &ls };
        errors.extend(schema_errors(s, &v).into_iter().map(|e| format!("line {}: {e}", k + 1)));
    }
    errors
}

#[test]
fn checker_rejects_what_it_should() {
    let schema = serde_json::json!({
        "type": "object",
        "properties": {"a": {"type": "integer", "minimum": 0}, "b": {"type": ["string", "null"]}},
        "required": ["a"],
        "additionalProperties": false
    });
    assert!(schema_errors(&schema, &serde_json::json!({"a": 1, "b": null})).is_empty());
    assert_eq!(schema_errors(&schema, &serde_json::json!({"a": -1})).len(), 1);
    assert_eq!(schema_errors(&schema, &serde_json::json!({"b": 3})).len(), 2);
    assert_eq!(schema_errors(&schema, &serde_json::json!({"a": 1, "c": 0})).len(), 1);
    assert_eq!(schema_errors(&serde_json::json!({"oneOf": []}), &Value::Null).len(), 1);
}
