use serde_json::Value;

/// Flattens a report into `key: value` lines; arrays of scalars and of
/// configurations stay on one line.
pub fn human(v: &Value) -> String {
    let mut out = String::new();
    walk(v, "", &mut out);
    out
}

fn is_flat(v: &Value) -> bool {
    match v {
        Value::Object(_) => false,
        Value::Array(items) => items.iter().all(|x| !x.is_object() && is_flat(x)),
        _ => true,
    }
}

fn walk(v: &Value, path: &str, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                walk(x, &key, out);
            }
        }
        Value::Array(items) if !is_flat(v) => {
            for (i, x) in items.iter().enumerate() {
                walk(x, &format!("{path}[{i}]"), out);
            }
        }
        Value::String(s) => out.push_str(&format!("{path}: {s}\n")),
        _ => out.push_str(&format!("{path}: {v}\n")),
    }
}
