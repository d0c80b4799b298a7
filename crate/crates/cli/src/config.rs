//! Flat `key=value` config files. Lines starting with `#` are comments;
//! values given on the command line override values from the file.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key=value`, got {raw:?}", lineno + 1);
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Error on keys outside the allowed set, so typos are caught loudly.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for key in self.entries.keys() {
            if !allowed.contains(&key.as_str()) {
                bail!(
                    "unknown config key `{key}` (valid keys: {})",
                    allowed.join(", ")
                );
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.typed(key, "a number")
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.typed(key, "a non-negative integer")
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.typed(key, "a non-negative integer")
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some("true") | Some("1") | Some("yes") => Ok(Some(true)),
            Some("false") | Some("0") | Some("no") => Ok(Some(false)),
            Some(other) => bail!("config key `{key}`: expected true/false, got {other:?}"),
        }
    }

    fn typed<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| anyhow::anyhow!("config key `{key}`: expected {what}, got {raw:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let kv = KeyValues::parse("# a comment\nthreshold = 0.3\n\nseed=9\n").unwrap();
        assert_eq!(kv.get_f64("threshold").unwrap(), Some(0.3));
        assert_eq!(kv.get_u64("seed").unwrap(), Some(9));
        assert_eq!(kv.get("missing"), None);
    }

    #[test]
    fn rejects_malformed_lines_and_unknown_keys() {
        assert!(KeyValues::parse("threshold 0.3").is_err());
        let kv = KeyValues::parse("thresold=0.3").unwrap();
        assert!(kv.check_keys(&["threshold"]).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let kv = KeyValues::parse("trials=five").unwrap();
        assert!(kv.get_usize("trials").is_err());
        let kv = KeyValues::parse("bounce=maybe").unwrap();
        assert!(kv.get_bool("bounce").is_err());
    }
}
