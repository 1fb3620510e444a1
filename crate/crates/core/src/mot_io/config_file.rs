use std::path::Path;

use crate::error::{Error, Result};

/// One `key = value` assignment together with the line it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyValue {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// trailing `# ...` comments after a value are stripped.
pub fn parse_key_values(text: &str, path: &Path) -> Result<Vec<KeyValue>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: "empty key".into(),
            });
        }
        out.push(KeyValue {
            key: key.to_string(),
            value: value.trim().to_string(),
            line: line_no,
        });
    }
    Ok(out)
}

pub fn read_key_values(path: &Path) -> Result<Vec<KeyValue>> {
    let text = super::read_to_string(path)?;
    parse_key_values(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blanks() {
        let text = "# header\n\nnsa = true  # inline\nlambda=0.98\n";
        let kv = parse_key_values(text, Path::new("cfg")).unwrap();
        assert_eq!(kv.len(), 2);
        assert_eq!(kv[0].key, "nsa");
        assert_eq!(kv[0].value, "true");
        assert_eq!(kv[0].line, 3);
        assert_eq!(kv[1].value, "0.98");
    }

    #[test]
    fn missing_equals_is_error() {
        let err = parse_key_values("nsa true\n", Path::new("cfg")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
