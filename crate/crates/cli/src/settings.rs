//! Flag/config-file merging and the class grammar.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use frameless_core::SlotClass;

use crate::CliError;

/// Values read from a `--config` file. Keys use the long flag names.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config: cannot read {}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            Self::from_manifest(&text)
        } else {
            Self::parse(&text)
        }
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config: line {} is not key = value", i + 1))
            })?;
            values.insert(normalize(key), value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    /// Reruns from a manifest written by an earlier invocation.
    fn from_manifest(text: &str) -> Result<Self, CliError> {
        let json: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| CliError::Usage(format!("config: bad manifest: {e}")))?;
        let mut values = BTreeMap::new();
        if let Some(obj) = json.get("config").and_then(|c| c.as_object()) {
            for (k, v) in obj {
                let v = match v {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Null => continue,
                    other => other.to_string(),
                };
                values.insert(normalize(k), v);
            }
        }
        if let Some(seed) = json.get("seed").and_then(|s| s.as_u64()) {
            values.insert("seed".into(), seed.to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    /// Flag value if given, else the file value, parsed.
    pub fn pick<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Usage(format!("{key}: cannot parse {v:?}: {e}")))
            })
            .transpose()
    }

    pub fn require<T>(&self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.pick(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("{key}: required (flag --{key} or config key)")))
    }
}

fn normalize(key: &str) -> String {
    key.trim()
        .trim_start_matches("--")
        .replace('_', "-")
        .to_lowercase()
}

/// Parses `SLOTS:BETA[,SLOTS:BETA...]`. A bare `BETA` means one class
/// spanning every slot and needs `slots`.
pub fn parse_classes(spec: &str, slots: Option<usize>) -> Result<Vec<SlotClass>, CliError> {
    let bad = |why: String| CliError::Usage(format!("classes: {why}"));
    let spec = spec.trim();
    if !spec.contains(':') {
        let beta: f64 = spec
            .parse()
            .map_err(|_| bad(format!("cannot parse {spec:?}")))?;
        let m = slots.ok_or_else(|| bad("a bare mean degree needs --slots".into()))?;
        return Ok(vec![SlotClass::new(m, beta)]);
    }
    let mut classes = Vec::new();
    for part in spec.split(',') {
        let (m, b) = part
            .trim()
            .split_once(':')
            .ok_or_else(|| bad(format!("{part:?} is not SLOTS:BETA")))?;
        let m: usize = m
            .trim()
            .parse()
            .map_err(|_| bad(format!("slot count {m:?} in {part:?}")))?;
        let b: f64 = b
            .trim()
            .parse()
            .map_err(|_| bad(format!("mean degree {b:?} in {part:?}")))?;
        if !b.is_finite() {
            return Err(bad(format!("mean degree {b} in {part:?}")));
        }
        classes.push(SlotClass::new(m, b));
    }
    let total: usize = classes.iter().map(|c| c.slot_count).sum();
    if let Some(m) = slots {
        if m != total {
            return Err(CliError::Usage(format!(
                "slots: {m} given but classes sum to {total}"
            )));
        }
    }
    Ok(classes)
}

pub fn format_classes(classes: &[SlotClass]) -> String {
    classes
        .iter()
        .map(|c| format!("{}:{}", c.slot_count, c.mean_degree))
        .collect::<Vec<_>>()
        .join(",")
}

/// `batched`, or comma-separated class indices where `H*N` repeats `H`.
pub fn parse_order(spec: &str, classes: &[SlotClass]) -> Result<Vec<usize>, CliError> {
    let spec = spec.trim();
    if spec == "batched" {
        return Ok(classes
            .iter()
            .enumerate()
            .flat_map(|(h, c)| std::iter::repeat_n(h, c.slot_count))
            .collect());
    }
    let bad = |part: &str| {
        CliError::Usage(format!(
            "order: cannot parse {part:?}; expected batched or H[*N],..."
        ))
    };
    let mut order = Vec::new();
    for part in spec.split(',') {
        let (h, n) = match part.split_once('*') {
            Some((h, n)) => (h, n.trim().parse::<usize>().map_err(|_| bad(part))?),
            None => (part, 1),
        };
        let h: usize = h.trim().parse().map_err(|_| bad(part))?;
        order.extend(std::iter::repeat_n(h, n));
    }
    Ok(order)
}
