//! JSON configuration with command-line overrides.
//!
//! Every subcommand's flags double as configuration keys (the flag name with
//! `-` replaced by `_`). Values given on the command line win over the file.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use fqcp_core::{AxisAssignment, ChannelVariant, ModelParams, RotationVariant};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

/// Configuration keys accepted in the file but not on the command line.
const FILE_ONLY_KEYS: &[&str] = &["axis_assignment"];

/// Options shared by every subcommand.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CommonArgs {
    /// JSON configuration file; flags override its entries
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available cores)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Replace existing artifacts
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
}

impl CommonArgs {
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn workers(&self, cap: Option<usize>) -> usize {
        let n = self
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        cap.map_or(n, |c| n.min(c)).max(1)
    }
}

fn parse_rotation(s: &str) -> Result<RotationVariant, String> {
    serde_json::from_value(Value::String(s.replace('-', "_")))
        .map_err(|_| format!("expected xy or all_x, got `{s}`"))
}

fn parse_channel(s: &str) -> Result<ChannelVariant, String> {
    serde_json::from_value(Value::String(s.replace('-', "_")))
        .map_err(|_| format!("expected probabilistic_reset or amplitude_damping, got `{s}`"))
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelArgs {
    /// Rotation angle θ in [0, 2π]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Reset probability
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// xy or all_x
    #[arg(long, value_parser = parse_rotation)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotation_variant: Option<RotationVariant>,
    /// probabilistic_reset or amplitude_damping
    #[arg(long, value_parser = parse_channel)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel_variant: Option<ChannelVariant>,
    /// Skip the reset layer of the first step and reweight by 1 − p
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_first_reset_layer: Option<bool>,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis_assignment: Option<AxisAssignment>,
}

impl ModelArgs {
    /// Fill unset fields from `theta` and `p`, recording the result back into `self`.
    pub fn resolve(&mut self, theta: f64, p: f64) -> CliResult<ModelParams> {
        let theta = *self.theta.get_or_insert(theta);
        let p = *self.p.get_or_insert(p);
        let mut params = ModelParams::new(theta, p)?
            .with_variant(*self.rotation_variant.get_or_insert_with(Default::default))
            .with_channel(*self.channel_variant.get_or_insert_with(Default::default))
            .with_skip_first_reset(*self.skip_first_reset_layer.get_or_insert(false));
        params.axis_assignment = *self.axis_assignment.get_or_insert_with(Default::default);
        Ok(params)
    }
}

fn known_keys<A: Args>() -> BTreeSet<String> {
    A::augment_args(clap::Command::new("config"))
        .get_arguments()
        .map(|a| a.get_id().to_string())
        .filter(|id| id != "config" && id != "force")
        .chain(FILE_ONLY_KEYS.iter().map(|k| k.to_string()))
        .collect()
}

fn read_object(path: &Path) -> CliResult<Map<String, Value>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::config(format!("config {} is not a JSON object", path.display()))),
        Err(e) => Err(CliError::config(format!("config {}: {e}", path.display()))),
    }
}

/// Merge the config file (if any) under the flags in `flags`.
pub fn overlay<A>(flags: A, config: Option<&Path>) -> CliResult<A>
where
    A: Args + Serialize + DeserializeOwned,
{
    let Some(path) = config else {
        return Ok(flags);
    };
    let mut merged = read_object(path)?;
    let known = known_keys::<A>();
    if let Some(k) = merged.keys().find(|k| !known.contains(*k)) {
        return Err(CliError::config(format!(
            "unknown key `{k}` in config {}",
            path.display()
        )));
    }
    let Value::Object(set) = serde_json::to_value(&flags).map_err(CliError::internal)? else {
        unreachable!("argument structs serialize to objects")
    };
    for (k, v) in set {
        let empty_list = matches!(&v, Value::Array(a) if a.is_empty());
        if !v.is_null() && !empty_list {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))
}

/// `"none"` or an integer.
pub fn parse_threshold(s: &str) -> Result<Threshold, String> {
    match s {
        "none" | "inf" => Ok(Threshold::Never),
        n => n
            .parse()
            .map(Threshold::At)
            .map_err(|_| format!("expected a qubit count or `none`, got `{s}`")),
    }
}

/// Pool size at which freed qubits start being reused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    Never,
    #[serde(untagged)]
    At(usize),
}

impl Threshold {
    pub fn get(self) -> Option<usize> {
        match self {
            Self::Never => None,
            Self::At(n) => Some(n),
        }
    }
}
