//! Parameter references inside composite templates.

use serde_json::{Map, Value};

use super::{ModuleError, ParamValue, Params};

/// Replace `"$name"` with the parent's value and evaluate strings such as
/// `"$depth-1"` as integer expressions. Arrays are substituted elementwise.
pub(crate) fn substitute(
    values: &Map<String, Value>,
    parent: &Params,
) -> Result<Map<String, Value>, ModuleError> {
    values
        .iter()
        .map(|(k, v)| Ok((k.clone(), substitute_value(v, parent)?)))
        .collect()
}

fn substitute_value(v: &Value, parent: &Params) -> Result<Value, ModuleError> {
    match v {
        Value::String(s) if s.starts_with('$') => {
            let name = &s[1..];
            if let Some(p) = parent.get(name) {
                return Ok(p.to_json());
            }
            Ok(Value::from(eval_int(s, parent)?))
        }
        Value::Array(items) => Ok(Value::Array(
            items
                .iter()
                .map(|x| substitute_value(x, parent))
                .collect::<Result<_, _>>()?,
        )),
        other => Ok(other.clone()),
    }
}

/// Evaluate `term (('+' | '-' | '*') term)*` left to right, where a term is
/// an integer literal or `$param` naming an int parameter.
pub(crate) fn eval_int(expr: &str, params: &Params) -> Result<i64, ModuleError> {
    let bad = |msg: &str| ModuleError::InvalidParams(format!("expression `{expr}`: {msg}"));
    let chars: Vec<char> = expr.chars().filter(|c| !c.is_whitespace()).collect();
    let mut pos = 0;
    let term = |pos: &mut usize| -> Result<i64, ModuleError> {
        let is_param = chars.get(*pos) == Some(&'$');
        if is_param {
            *pos += 1;
        }
        let start = *pos;
        while chars
            .get(*pos)
            .is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_')
        {
            *pos += 1;
        }
        let tok: String = chars[start..*pos].iter().collect();
        if tok.is_empty() {
            return Err(bad("expected a term"));
        }
        if is_param {
            match params.get(&tok) {
                Some(ParamValue::Int(v)) => Ok(*v),
                _ => Err(bad(&format!("`{tok}` is not an int parameter"))),
            }
        } else {
            tok.parse()
                .map_err(|_| bad(&format!("`{tok}` is not an integer")))
        }
    };
    let mut acc = term(&mut pos)?;
    while let Some(&op) = chars.get(pos) {
        pos += 1;
        let rhs = term(&mut pos)?;
        acc = match op {
            '+' => acc + rhs,
            '-' => acc - rhs,
            '*' => acc * rhs,
            _ => return Err(bad(&format!("unexpected `{op}`"))),
        };
    }
    Ok(acc)
}
