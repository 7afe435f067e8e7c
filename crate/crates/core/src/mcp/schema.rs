//! Validation for the JSON Schema subset the tool descriptors use:
//! `type` (a name or a list of names), `properties`, `required`,
//! `additionalProperties: false`, `items`, `enum`, `const`, `anyOf`,
//! `minLength`, `minItems` and `minimum`.

use serde_json::Value;

/// First violation found, as `(path, message)`. Paths use `$` for the root.
pub fn validate(schema: &Value, value: &Value) -> Result<(), (String, String)> {
    check(schema, value, "$")
}

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        _ => false,
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn check(schema: &Value, v: &Value, path: &str) -> Result<(), (String, String)> {
    let fail = |msg: String| Err((path.to_string(), msg));
    match schema.get("type") {
        Some(Value::String(t)) if !type_matches(t, v) => return fail(format!("expected {t}, found {}", kind(v))),
        Some(Value::Array(ts)) if !ts.iter().filter_map(Value::as_str).any(|t| type_matches(t, v)) => {
            let names: Vec<&str> = ts.iter().filter_map(Value::as_str).collect();
            return fail(format!("expected one of {}, found {}", names.join("|"), kind(v)));
        }
        _ => {}
    }
    if let Some(c) = schema.get("const") {
        if c != v {
            return fail(format!("expected {c}"));
        }
    }
    if let Some(Value::Array(options)) = schema.get("enum") {
        if !options.contains(v) {
            let names: Vec<String> = options.iter().map(Value::to_string).collect();
            return fail(format!("expected one of {}", names.join(", ")));
        }
    }
    if let Some(Value::Array(alternatives)) = schema.get("anyOf") {
        if !alternatives.iter().any(|s| check(s, v, path).is_ok()) {
            return fail("matches none of the allowed forms".into());
        }
    }
    if let (Some(min), Some(s)) = (schema.get("minLength").and_then(Value::as_u64), v.as_str()) {
        if (s.chars().count() as u64) < min {
            return fail(format!("shorter than {min} characters"));
        }
    }
    if let (Some(min), Some(x)) = (schema.get("minimum").and_then(Value::as_f64), v.as_f64()) {
        if x < min {
            return fail(format!("less than {min}"));
        }
    }
    if let Value::Array(items) = v {
        if let Some(min) = schema.get("minItems").and_then(Value::as_u64) {
            if (items.len() as u64) < min {
                return fail(format!("fewer than {min} items"));
            }
        }
        if let Some(item_schema) = schema.get("items") {
            for (i, item) in items.iter().enumerate() {
                check(item_schema, item, &format!("{path}[{i}]"))?;
            }
        }
    }
    if let Value::Object(map) = v {
        let props = schema.get("properties").and_then(Value::as_object);
        if let Some(Value::Array(required)) = schema.get("required") {
            for key in required.iter().filter_map(Value::as_str) {
                if !map.contains_key(key) {
                    return fail(format!("missing required field '{key}'"));
                }
            }
        }
        for (key, child) in map {
            let sub = format!("{path}.{key}");
            match props.and_then(|p| p.get(key)) {
                Some(s) => check(s, child, &sub)?,
                None => match schema.get("additionalProperties") {
                    Some(Value::Bool(false)) => return Err((sub, "unexpected field".into())),
                    Some(s @ Value::Object(_)) => check(s, child, &sub)?,
                    _ => {}
                },
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn nested_paths_are_reported() {
        let schema = json!({
            "type": "object",
            "required": ["mods"],
            "properties": {"mods": {"type": "array", "items": {"type": "object", "required": ["file"], "properties": {"file": {"type": "string"}}}}}
        });
        assert!(validate(&schema, &json!({"mods": [{"file": "U"}]})).is_ok());
        let (path, msg) = validate(&schema, &json!({"mods": [{"file": "U"}, {}]})).unwrap_err();
        assert_eq!(path, "$.mods[1]");
        assert!(msg.contains("'file'"));
        assert_eq!(validate(&schema, &json!({"mods": [{"file": 3}]})).unwrap_err().0, "$.mods[0].file");
    }

    #[test]
    fn any_of_const_and_number() {
        let schema = json!({"anyOf": [{"const": "latest"}, {"type": "number"}]});
        assert!(validate(&schema, &json!("latest")).is_ok());
        assert!(validate(&schema, &json!(0.5)).is_ok());
        assert!(validate(&schema, &json!("earliest")).is_err());
    }

    #[test]
    fn closed_objects_and_type_lists() {
        let schema = json!({"type": "object", "properties": {"a": {"type": ["string", "object"]}}, "additionalProperties": false});
        assert!(validate(&schema, &json!({"a": {}})).is_ok());
        assert!(validate(&schema, &json!({"a": 1})).is_err());
        assert_eq!(validate(&schema, &json!({"b": 1})).unwrap_err().0, "$.b");
        let strings = json!({"type": "object", "additionalProperties": {"type": "string"}});
        assert!(validate(&strings, &json!({"log.icoFoam": "x"})).is_ok());
        assert!(validate(&strings, &json!({"log.icoFoam": 1})).is_err());
    }
}
