//! Flat `key=value` configuration files.
//!
//! A config file supplies defaults; explicit command-line flags override
//! file values, and built-in defaults fill whatever remains. Lines starting
//! with `#` and blank lines are ignored.

use std::collections::HashMap;
use std::path::Path;

pub type ConfigMap = HashMap<String, String>;

pub fn load_config(path: &Path) -> Result<ConfigMap, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn parse_config(text: &str) -> Result<ConfigMap, String> {
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value, got: {raw}", lineno + 1))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(format!("line {}: empty key", lineno + 1));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Flag value if given, else config-file value (parsed), else default.
pub fn pick<T: std::str::FromStr>(
    flag: Option<T>,
    cfg: &ConfigMap,
    key: &str,
    default: T,
) -> Result<T, String> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match cfg.get(key) {
        Some(raw) => raw
            .parse()
            .map_err(|_| format!("config key {key}: cannot parse {raw:?}")),
        None => Ok(default),
    }
}

/// Like [`pick`] but with no default: the value must come from somewhere.
pub fn pick_required<T: std::str::FromStr>(
    flag: Option<T>,
    cfg: &ConfigMap,
    key: &str,
) -> Result<T, String> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match cfg.get(key) {
        Some(raw) => raw
            .parse()
            .map_err(|_| format!("config key {key}: cannot parse {raw:?}")),
        None => Err(format!("missing required option: --{} (or config key {key})", key.replace('_', "-"))),
    }
}

/// Optional value: flag, else config, else None.
pub fn pick_optional<T: std::str::FromStr>(
    flag: Option<T>,
    cfg: &ConfigMap,
    key: &str,
) -> Result<Option<T>, String> {
    if let Some(v) = flag {
        return Ok(Some(v));
    }
    match cfg.get(key) {
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|_| format!("config key {key}: cannot parse {raw:?}")),
        None => Ok(None),
    }
}
