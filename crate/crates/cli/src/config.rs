//! Flat `key = value` config files and merging with command-line flags.
//!
//! A flag given on the command line wins over the file, which wins over
//! the built-in default.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ymbvp::shooting::DEFAULT_X_MAX;
use ymbvp::StepControl;

use crate::{CliError, Common, Format};

const KEYS: &[&str] = &[
    "rtol",
    "atol",
    "x_max",
    "out",
    "format",
    "h_init",
    "h_max",
    "max_steps",
    "blowup_bound",
];

#[derive(Debug, Default, Clone)]
pub struct FileConfig(BTreeMap<String, String>);

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::config(format!(
                    "line {}: expected key = value",
                    n + 1
                )));
            };
            let k = k.trim().replace('-', "_");
            if !KEYS.contains(&k.as_str()) {
                return Err(CliError::config(format!(
                    "line {}: unknown key '{k}'",
                    n + 1
                )));
            }
            map.insert(k, v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.0
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::config(format!("bad value for {key}: '{v}'")))
            })
            .transpose()
    }
}

/// Settings shared by every subcommand after merging.
#[derive(Debug, Clone)]
pub struct Settings {
    pub ctrl: StepControl,
    pub x_max: f64,
    pub out: String,
    pub format: Format,
}

pub fn resolve(common: &Common) -> Result<Settings, CliError> {
    let file = match &common.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut ctrl = StepControl::default();
    ctrl.rtol = common.rtol.or(file.get("rtol")?).unwrap_or(ctrl.rtol);
    ctrl.atol = common.atol.or(file.get("atol")?).unwrap_or(ctrl.atol);
    ctrl.h_init = file.get("h_init")?.unwrap_or(ctrl.h_init);
    ctrl.h_max = file.get("h_max")?.unwrap_or(ctrl.h_max);
    ctrl.max_steps = file.get("max_steps")?.unwrap_or(ctrl.max_steps);
    ctrl.blowup_bound = file.get("blowup_bound")?.unwrap_or(ctrl.blowup_bound);
    ctrl.validate()
        .map_err(|e| CliError::config(e.to_string()))?;

    let x_max = common.x_max.or(file.get("x_max")?).unwrap_or(DEFAULT_X_MAX);
    if !(x_max > 0.0) || !x_max.is_finite() {
        return Err(CliError::config(format!(
            "x_max must be positive, got {x_max}"
        )));
    }
    let out = common
        .out
        .clone()
        .or(file.get("out")?)
        .unwrap_or_else(|| "ymbvp".to_string());
    let format = match common.format {
        Some(f) => f,
        None => match file.get::<String>("format")?.as_deref() {
            None | Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            Some(other) => return Err(CliError::config(format!("unknown format '{other}'"))),
        },
    };
    Ok(Settings {
        ctrl,
        x_max,
        out,
        format,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_dashes() {
        let f = FileConfig::parse("# tolerances\nrtol = 1e-9\nx-max=12 # horizon\n\n").unwrap();
        assert_eq!(f.get::<f64>("rtol").unwrap(), Some(1e-9));
        assert_eq!(f.get::<f64>("x_max").unwrap(), Some(12.0));
    }

    #[test]
    fn rejects_unknown_keys_and_garbage() {
        assert!(FileConfig::parse("speed = 3").is_err());
        assert!(FileConfig::parse("rtol").is_err());
        let f = FileConfig::parse("rtol = fast").unwrap();
        assert!(f.get::<f64>("rtol").is_err());
    }
}
