//! Flat `key=value` configuration files with `[section]` headers, and the
//! run configuration assembled from file plus CLI overrides.

use crate::error::{Error, Result};
use crate::net::ModelConfig;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Ordered `section.key -> value` map parsed from the flat config format.
/// Lines are `key=value`; `[section]` headers prefix the keys that follow;
/// `#` starts a comment.
#[derive(Debug, Clone, Default)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn parse(text: &str, source_name: &str) -> Result<KvMap> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::format(
                    source_name,
                    line_no,
                    format!("expected `key=value`, got `{line}`"),
                ));
            };
            let full = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            entries.insert(full, value.trim().to_string());
        }
        Ok(KvMap { entries })
    }

    pub fn load(path: &Path) -> Result<KvMap> {
        let name = path.display().to_string();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::format(&name, 0, format!("cannot read: {e}")))?;
        KvMap::parse(&text, &name)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn take_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::usage(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Render grouped by section, sections and keys in sorted order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut current = String::new();
        let mut first = true;
        for (key, value) in &self.entries {
            let (section, bare) = match key.split_once('.') {
                Some((s, k)) => (s.to_string(), k),
                None => (String::new(), key.as_str()),
            };
            if section != current || first {
                if !first {
                    out.push('\n');
                }
                if !section.is_empty() {
                    let _ = writeln!(out, "[{section}]");
                }
                current = section;
                first = false;
            }
            let _ = writeln!(out, "{bare}={value}");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }
}

/// Serialize a model configuration under the `model` and `train` sections.
pub fn model_config_to_kv(cfg: &ModelConfig, kv: &mut KvMap) {
    kv.set("model.n_nodes", cfg.n_nodes);
    kv.set("model.in_features", cfg.in_features);
    kv.set("model.window", cfg.window);
    kv.set("model.horizon", cfg.horizon);
    kv.set("model.layers", cfg.layers);
    kv.set(
        "model.filters",
        format!("{},{},{}", cfg.filters[0], cfg.filters[1], cfg.filters[2]),
    );
    kv.set("model.dilation", cfg.dilation);
    kv.set("model.dilated_channels", cfg.dilated_channels);
    kv.set("model.fc_hidden", cfg.fc_hidden);
    kv.set("model.huber_delta", cfg.huber_delta);
    kv.set("train.learning_rate", cfg.learning_rate);
    kv.set("train.batch_size", cfg.batch_size);
    kv.set("train.max_epochs", cfg.max_epochs);
    kv.set("train.patience", cfg.patience);
    kv.set("train.seed", cfg.seed);
}

/// Apply `model.*`/`train.*` keys over a base configuration.
pub fn model_config_from_kv(kv: &KvMap, base: ModelConfig) -> Result<ModelConfig> {
    let mut cfg = base;
    if let Some(v) = kv.take_parsed("model.n_nodes")? {
        cfg.n_nodes = v;
    }
    if let Some(v) = kv.take_parsed("model.in_features")? {
        cfg.in_features = v;
    }
    if let Some(v) = kv.take_parsed("model.window")? {
        cfg.window = v;
    }
    if let Some(v) = kv.take_parsed("model.horizon")? {
        cfg.horizon = v;
    }
    if let Some(v) = kv.take_parsed("model.layers")? {
        cfg.layers = v;
    }
    if let Some(v) = kv.get("model.filters") {
        let parts: Vec<&str> = v.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::usage(format!("model.filters needs 3 values, got `{v}`")));
        }
        for (slot, p) in cfg.filters.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::usage(format!("bad filter width `{p}`")))?;
        }
    }
    if let Some(v) = kv.take_parsed("model.dilation")? {
        cfg.dilation = v;
    }
    if let Some(v) = kv.take_parsed("model.dilated_channels")? {
        cfg.dilated_channels = v;
    }
    if let Some(v) = kv.take_parsed("model.fc_hidden")? {
        cfg.fc_hidden = v;
    }
    if let Some(v) = kv.take_parsed("model.huber_delta")? {
        cfg.huber_delta = v;
    }
    if let Some(v) = kv.take_parsed("train.learning_rate")? {
        cfg.learning_rate = v;
    }
    if let Some(v) = kv.take_parsed("train.batch_size")? {
        cfg.batch_size = v;
    }
    if let Some(v) = kv.take_parsed("train.max_epochs")? {
        cfg.max_epochs = v;
    }
    if let Some(v) = kv.take_parsed("train.patience")? {
        cfg.patience = v;
    }
    if let Some(v) = kv.take_parsed("train.seed")? {
        cfg.seed = v;
    }
    Ok(cfg)
}

/// Comma-joined float list (used for normalization statistics in
/// manifests); round-trips exactly through `f64` display.
pub fn floats_to_string(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

pub fn floats_from_string(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::usage(format!("bad float `{p}` in list")))
        })
        .collect()
}

/// Paths and knobs for one CLI invocation: values from `--config` overlaid
/// by explicit flags. Referenced input files are checked at load time.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub distances: Option<PathBuf>,
    pub flow: Option<PathBuf>,
    pub aprime: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub kv: KvMap,
}

impl RunConfig {
    pub fn from_kv(kv: KvMap) -> RunConfig {
        let path_of = |key: &str| kv.get(key).map(PathBuf::from);
        RunConfig {
            distances: path_of("paths.distances"),
            flow: path_of("paths.flow"),
            aprime: path_of("paths.aprime"),
            checkpoint: path_of("paths.checkpoint"),
            out_dir: path_of("paths.out"),
            kv,
        }
    }

    /// Fail fast on dangling input paths.
    pub fn validate_inputs(&self) -> Result<()> {
        for (name, p) in [
            ("distances", &self.distances),
            ("flow", &self.flow),
            ("aprime", &self.aprime),
            ("checkpoint", &self.checkpoint),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::usage(format!(
                        "{name} file does not exist: {}",
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_parse_sections_and_comments() {
        let text = "# comment\ntop=1\n[model]\nwindow=12\nfilters = 8,8,8\n\n[train]\nseed=7\n";
        let kv = KvMap::parse(text, "test").unwrap();
        assert_eq!(kv.get("top"), Some("1"));
        assert_eq!(kv.get("model.window"), Some("12"));
        assert_eq!(kv.get("model.filters"), Some("8,8,8"));
        assert_eq!(kv.get("train.seed"), Some("7"));

        let bad = KvMap::parse("nonsense line", "test");
        assert!(bad.is_err());
    }

    #[test]
    fn kv_render_roundtrip() {
        let mut kv = KvMap::default();
        kv.set("model.window", 12);
        kv.set("train.seed", 3);
        kv.set("model.layers", 2);
        let text = kv.render();
        let back = KvMap::parse(&text, "render").unwrap();
        assert_eq!(back.get("model.window"), Some("12"));
        assert_eq!(back.get("model.layers"), Some("2"));
        assert_eq!(back.get("train.seed"), Some("3"));
    }

    #[test]
    fn model_config_kv_roundtrip() {
        let mut cfg = ModelConfig::defaults(12);
        cfg.layers = 2;
        cfg.filters = [16, 16, 16];
        cfg.seed = 42;
        cfg.learning_rate = 0.0125;
        let mut kv = KvMap::default();
        model_config_to_kv(&cfg, &mut kv);
        let back = model_config_from_kv(&kv, ModelConfig::defaults(1)).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn float_list_roundtrip() {
        let xs = vec![1.5, -0.1234567890123, 3e-17, 0.0];
        let s = floats_to_string(&xs);
        assert_eq!(floats_from_string(&s).unwrap(), xs);
    }
}
