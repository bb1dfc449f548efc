//! Flat, sectioned key-value configuration with command-line overrides.
//!
//! Format: `[section]` headers, `key = value` lines, `#` comments. All
//! physical quantities carry their unit in the key name (`length_km`,
//! `t2_us`, `alpha_db_per_km`). Every read is recorded with its effective
//! value so the tool can echo the fully resolved configuration next to the
//! results.

use std::cell::RefCell;
use std::collections::BTreeMap;

use repsim_core::{Error, Result};

/// The scenario a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    RateTable,
    TwoLink,
    Chain,
    Tomography,
}

impl ScenarioKind {
    pub fn label(self) -> &'static str {
        match self {
            ScenarioKind::RateTable => "rate-table",
            ScenarioKind::TwoLink => "two-link",
            ScenarioKind::Chain => "chain",
            ScenarioKind::Tomography => "tomography",
        }
    }

    pub fn is_stochastic(self) -> bool {
        !matches!(self, ScenarioKind::RateTable)
    }
}

/// Parsed configuration plus the access log used for the resolved echo.
#[derive(Debug, Default)]
pub struct ExperimentConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
    resolved: RefCell<BTreeMap<String, BTreeMap<String, String>>>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::from("run");
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim().to_string();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') || line.len() < 3 {
                    return Err(Error::Config(format!(
                        "line {}: malformed section header {line:?}",
                        lineno + 1
                    )));
                }
                current = line[1..line.len() - 1].trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value`, got {line:?}",
                    lineno + 1
                )));
            };
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self {
            sections,
            resolved: RefCell::new(BTreeMap::new()),
        })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies a `--set section.key=value` override.
    pub fn set_override(&mut self, spec: &str) -> Result<()> {
        let Some((path, value)) = spec.split_once('=') else {
            return Err(Error::Config(format!(
                "--set needs section.key=value, got {spec:?}"
            )));
        };
        let Some((section, key)) = path.trim().split_once('.') else {
            return Err(Error::Config(format!(
                "--set key must be section.key, got {path:?}"
            )));
        };
        self.sections
            .entry(section.trim().to_string())
            .or_default()
            .insert(key.trim().to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn scenario(&self) -> Result<ScenarioKind> {
        let kind = self.get_str("run", "kind", None)?;
        match kind.as_str() {
            "rate-table" => Ok(ScenarioKind::RateTable),
            "two-link" | "link-sim" => Ok(ScenarioKind::TwoLink),
            "chain" | "chain-sim" => Ok(ScenarioKind::Chain),
            "tomography" | "tomo" => Ok(ScenarioKind::Tomography),
            other => Err(Error::Config(format!("unknown scenario kind {other:?}"))),
        }
    }

    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(String::as_str)
    }

    fn record(&self, section: &str, key: &str, value: &str) {
        self.resolved
            .borrow_mut()
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.to_string());
    }

    /// String value; `default = None` makes the key required.
    pub fn get_str(&self, section: &str, key: &str, default: Option<&str>) -> Result<String> {
        let value = match (self.raw(section, key), default) {
            (Some(v), _) => v.to_string(),
            (None, Some(d)) => d.to_string(),
            (None, None) => {
                return Err(Error::Config(format!("missing required key {section}.{key}")))
            }
        };
        self.record(section, key, &value);
        Ok(value)
    }

    pub fn get_f64(&self, section: &str, key: &str, default: Option<f64>) -> Result<f64> {
        let text = match (self.raw(section, key), default) {
            (Some(v), _) => v.to_string(),
            (None, Some(d)) => d.to_string(),
            (None, None) => {
                return Err(Error::Config(format!("missing required key {section}.{key}")))
            }
        };
        let value: f64 = parse_f64(&text)
            .ok_or_else(|| Error::Config(format!("{section}.{key}: bad number {text:?}")))?;
        self.record(section, key, &format_num(value));
        Ok(value)
    }

    pub fn get_u64(&self, section: &str, key: &str, default: Option<u64>) -> Result<u64> {
        let text = match (self.raw(section, key), default) {
            (Some(v), _) => v.to_string(),
            (None, Some(d)) => d.to_string(),
            (None, None) => {
                return Err(Error::Config(format!("missing required key {section}.{key}")))
            }
        };
        // Accept scientific notation for round counts (1e6).
        let value = text
            .parse::<u64>()
            .ok()
            .or_else(|| {
                parse_f64(&text).and_then(|f| {
                    (f >= 0.0 && f.fract() == 0.0 && f <= 2f64.powi(63)).then_some(f as u64)
                })
            })
            .ok_or_else(|| Error::Config(format!("{section}.{key}: bad integer {text:?}")))?;
        self.record(section, key, &value.to_string());
        Ok(value)
    }

    pub fn get_bool(&self, section: &str, key: &str, default: Option<bool>) -> Result<bool> {
        let text = match (self.raw(section, key), default) {
            (Some(v), _) => v.to_string(),
            (None, Some(d)) => d.to_string(),
            (None, None) => {
                return Err(Error::Config(format!("missing required key {section}.{key}")))
            }
        };
        let value = match text.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" | "on" => true,
            "false" | "no" | "0" | "off" => false,
            other => {
                return Err(Error::Config(format!(
                    "{section}.{key}: bad boolean {other:?}"
                )))
            }
        };
        self.record(section, key, &value.to_string());
        Ok(value)
    }

    /// Comma-separated list of numbers.
    pub fn get_f64_list(
        &self,
        section: &str,
        key: &str,
        default: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        let text = match (self.raw(section, key), default) {
            (Some(v), _) => v.to_string(),
            (None, Some(d)) => d
                .iter()
                .map(|v| format_num(*v))
                .collect::<Vec<_>>()
                .join(","),
            (None, None) => {
                return Err(Error::Config(format!("missing required key {section}.{key}")))
            }
        };
        let mut out = Vec::new();
        for part in text.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            out.push(
                parse_f64(part)
                    .ok_or_else(|| Error::Config(format!("{section}.{key}: bad number {part:?}")))?,
            );
        }
        if out.is_empty() {
            return Err(Error::Config(format!("{section}.{key}: empty list")));
        }
        self.record(section, key, &text);
        Ok(out)
    }

    /// Optional key: records and returns `None` silently when absent.
    pub fn get_opt_str(&self, section: &str, key: &str) -> Option<String> {
        let value = self.raw(section, key)?.to_string();
        self.record(section, key, &value);
        Some(value)
    }

    /// Snapshot of every key that was actually consumed, defaults included.
    pub fn resolved(&self) -> BTreeMap<String, BTreeMap<String, String>> {
        self.resolved.borrow().clone()
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(idx) => &line[..idx],
        None => line,
    }
}

fn parse_f64(text: &str) -> Option<f64> {
    text.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn format_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
