//! `key = value` config files. Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::path::Path;

use super::{parse_error, read_text};
use crate::error::Result;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigFile {
    pub entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        parse_config(&text, &path.display().to_string())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

pub fn parse_config(text: &str, origin: &str) -> Result<ConfigFile> {
    let mut entries = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_error(origin, n + 1, format!("expected `key = value`, got `{line}`")))?;
        let k = k.trim().replace('_', "-");
        if k.is_empty() {
            return Err(parse_error(origin, n + 1, "empty key"));
        }
        if entries.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(parse_error(origin, n + 1, format!("duplicate key `{k}`")));
        }
    }
    Ok(ConfigFile { entries })
}
