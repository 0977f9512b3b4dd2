//! Flat `key = value` config files and value parsers shared by the flags.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

/// Keys recognised in a config file.
pub const KNOWN_KEYS: &[&str] = &[
    "a", "b", "c", "N", "p", "potential", "format", "out", "workers", "c-grid", "b-grid", "intervals",
    "tol", "max-steps", "alpha", "beta", "eps", "translations", "hypothesis", "mc",
];

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected key = value", lineno + 1))?;
            let key = k.trim();
            if !KNOWN_KEYS.contains(&key) {
                bail!("config line {}: unknown key `{key}`", lineno + 1);
            }
            values.insert(key.to_string(), v.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Accepts decimals and fractions such as `14/3`.
pub fn parse_real(text: &str) -> Result<f64> {
    let t = text.trim();
    let value = if let Some((n, d)) = t.split_once('/') {
        let n: f64 = n.trim().parse().map_err(|_| anyhow!("`{t}` is not a number"))?;
        let d: f64 = d.trim().parse().map_err(|_| anyhow!("`{t}` is not a number"))?;
        n / d
    } else {
        t.parse().map_err(|_| anyhow!("`{t}` is not a number"))?
    };
    if !value.is_finite() {
        bail!("`{t}` is not finite");
    }
    Ok(value)
}

/// `lo:hi:n`, log-spaced.
pub fn parse_c_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        bail!("c-grid must look like lo:hi:n, got `{text}`");
    };
    let lo = parse_real(lo)?;
    let hi = parse_real(hi)?;
    let n: usize = n.trim().parse().map_err(|_| anyhow!("c-grid count `{n}` is not an integer"))?;
    if !(lo > 0.0 && hi > lo && n >= 1) {
        bail!("c-grid needs 0 < lo < hi and n >= 1");
    }
    Ok(kirchhoff_core::limit::log_grid(lo, hi, n))
}

/// Comma-separated reals.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(parse_real).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_and_decimals() {
        assert_eq!(parse_real("14/3").unwrap(), 14.0 / 3.0);
        assert_eq!(parse_real(" 2.5 ").unwrap(), 2.5);
        assert!(parse_real("1/0").is_err());
        assert!(parse_real("x").is_err());
    }

    #[test]
    fn grid_spec() {
        let g = parse_c_grid("1:10:50").unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 1.0);
        assert!((g[49] - 10.0).abs() < 1e-12);
        assert!(parse_c_grid("10:1:5").is_err());
        assert!(parse_c_grid("1:10").is_err());
    }

    #[test]
    fn config_parsing() {
        let cfg = ConfigFile::parse("# comment\nN = 3\np=14/3 # trailing\n\nc-grid = 1:2:3\n").unwrap();
        assert_eq!(cfg.get("N"), Some("3"));
        assert_eq!(cfg.get("p"), Some("14/3"));
        assert_eq!(cfg.get("c-grid"), Some("1:2:3"));
        assert!(ConfigFile::parse("bogus = 1").is_err());
        assert!(ConfigFile::parse("novalue").is_err());
    }
}
