//! Flag parsing with optional config-file defaults.
//!
//! Every subcommand accepts `--config FILE` holding `key = value` lines
//! (comments with `#`, lists comma-separated). Flags given on the command
//! line override config values.

use std::collections::HashMap;

pub struct Args {
    values: HashMap<String, String>,
    used: std::cell::RefCell<Vec<String>>,
}

impl Args {
    /// Parse `--key value` pairs, overlaying them onto config-file entries.
    pub fn parse(argv: &[String]) -> Result<Args, String> {
        let mut cli: HashMap<String, String> = HashMap::new();
        let mut i = 0;
        while i < argv.len() {
            let arg = &argv[i];
            let key = arg
                .strip_prefix("--")
                .ok_or_else(|| format!("expected --flag, got {arg:?}"))?;
            if let Some((k, v)) = key.split_once('=') {
                cli.insert(k.to_string(), v.to_string());
                i += 1;
            } else {
                let val = argv
                    .get(i + 1)
                    .ok_or_else(|| format!("flag --{key} needs a value"))?;
                cli.insert(key.to_string(), val.clone());
                i += 2;
            }
        }

        let mut values = HashMap::new();
        if let Some(path) = cli.get("config") {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {path}: {e}"))?;
            for (n, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| format!("config line {}: expected key = value", n + 1))?;
                values.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        values.extend(cli); // flags win
        Ok(Args { values, used: std::cell::RefCell::new(vec!["config".into()]) })
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.used.borrow_mut().push(key.to_string());
        self.values.get(key).cloned()
    }

    pub fn require(&self, key: &str) -> Result<String, String> {
        self.get(key).ok_or_else(|| format!("missing required flag --{key}"))
    }

    pub fn get_or(&self, key: &str, default: &str) -> String {
        self.get(key).unwrap_or_else(|| default.to_string())
    }

    pub fn parse_f64(&self, key: &str, default: f64) -> Result<f64, String> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| format!("--{key}: bad number {s:?}")),
        }
    }

    pub fn parse_usize(&self, key: &str, default: usize) -> Result<usize, String> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| format!("--{key}: bad integer {s:?}")),
        }
    }

    pub fn parse_u64(&self, key: &str, default: u64) -> Result<u64, String> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| format!("--{key}: bad integer {s:?}")),
        }
    }

    /// Reject unknown keys so typos fail loudly before any work happens.
    pub fn finish(&self) -> Result<(), String> {
        let used = self.used.borrow();
        for key in self.values.keys() {
            if !used.iter().any(|u| u == key) {
                return Err(format!("unknown flag --{key}"));
            }
        }
        Ok(())
    }
}

/// Comma-separated list helper.
pub fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect()
}

pub fn require_path_exists(path: &str, what: &str) -> Result<(), String> {
    if !std::path::Path::new(path).exists() {
        return Err(format!("{what} not found: {path}"));
    }
    Ok(())
}
