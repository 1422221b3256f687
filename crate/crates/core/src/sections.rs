//! Line-oriented `[section]` / `key = value` files shared by problem and family files.
//!
//! Values may be wrapped in double quotes. `#` starts a comment outside quotes.
//! LF and CRLF line endings are accepted; a leading UTF-8 BOM is skipped.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct SectionError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SectionFile {
    pub sections: Vec<Section>,
}

impl SectionFile {
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(value: &str, line: usize) -> Result<String, SectionError> {
    let v = value.trim();
    if let Some(rest) = v.strip_prefix('"') {
        let inner = rest.strip_suffix('"').ok_or_else(|| SectionError {
            line,
            message: "unterminated quoted value".into(),
        })?;
        Ok(inner.to_string())
    } else {
        Ok(v.to_string())
    }
}

pub fn parse_sections(text: &str) -> Result<SectionFile, SectionError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut file = SectionFile::default();
    for (idx, raw) in text.split('\n').enumerate() {
        let line = idx + 1;
        let content = strip_comment(raw.trim_end_matches('\r')).trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| SectionError {
                line,
                message: format!("malformed section header '{content}'"),
            })?;
            let name = name.trim().to_string();
            if file.section(&name).is_some() {
                return Err(SectionError { line, message: format!("duplicate section [{name}]") });
            }
            file.sections.push(Section { name, line, entries: Vec::new() });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| SectionError {
            line,
            message: format!("expected 'key = value', found '{content}'"),
        })?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(SectionError { line, message: "empty key".into() });
        }
        let section = file.sections.last_mut().ok_or_else(|| SectionError {
            line,
            message: "key outside of any [section]".into(),
        })?;
        if section.get(&key).is_some() {
            return Err(SectionError { line, message: format!("duplicate key '{key}'") });
        }
        section.entries.push(Entry { key, value: unquote(value, line)?, line });
    }
    Ok(file)
}

/// Quotes a value for writing.
pub fn quoted(value: &str) -> String {
    format!("\"{value}\"")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_quoted_values_comments_and_crlf() {
        let text = "# header\r\n[problem]\r\nname = quad # trailing\r\n[lagrangian]\r\nL = \"u1^2 # not a comment\"\r\n";
        let f = parse_sections(text).unwrap();
        assert_eq!(f.section("problem").unwrap().get("name").unwrap().value, "quad");
        assert_eq!(f.section("lagrangian").unwrap().get("L").unwrap().value, "u1^2 # not a comment");
    }

    #[test]
    fn rejects_orphan_keys_and_duplicates() {
        assert_eq!(parse_sections("a = 1").unwrap_err().line, 1);
        assert!(parse_sections("[a]\nx=1\nx=2").is_err());
        assert!(parse_sections("[a]\n[a]").is_err());
        assert!(parse_sections("[a\n").is_err());
    }
}
