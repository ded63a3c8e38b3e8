//! Flat `key = value` configuration files.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Keys mirror the command-line flags (see the README for the schema).
//! Command-line flags override file values.

use std::collections::HashMap;

pub fn parse_config(text: &str) -> Result<HashMap<String, String>, String> {
    let mut out = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected 'key = value', got '{raw}'", lineno + 1))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(format!("line {}: empty key or value", lineno + 1));
        }
        out.insert(key.to_string(), value.to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_assignments_comments_and_blanks() {
        let text = "# run settings\nproblem = analytic-1d\n\nseed= 7 # inline\n";
        let map = parse_config(text).unwrap();
        assert_eq!(map["problem"], "analytic-1d");
        assert_eq!(map["seed"], "7");
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(parse_config("no equals sign").is_err());
        assert!(parse_config("key =").is_err());
    }
}
