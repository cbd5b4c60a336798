//! Flat `key = value` training configuration.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use attnsense::trainer::TrainConfig;

use crate::CliError;

pub const KEYS: &[&str] = &[
    "epochs",
    "embed_dim",
    "hidden_dim",
    "untied_dims",
    "dropout",
    "max_len",
    "truncation",
    "mode",
    "seed",
    "early_stopping_patience",
    "eval_train",
    "learning_rate",
    "beta1",
    "beta2",
    "epsilon",
    "weight_decay",
    "decay_scope",
    "max_grad_norm",
    "partial_sampling",
    "pair_duplication",
    "batch_size",
    "sampling_seed",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Usage(format!("{key}: cannot parse `{value}`: {e}")))
}

/// `none` or `off` clears an optional setting.
fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    match value {
        "none" | "off" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

/// Sets one key. `seed` seeds both initialization and data order;
/// `sampling_seed` then overrides the latter alone.
pub fn apply(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<(), CliError> {
    let v = value.trim();
    match key.trim() {
        "epochs" => cfg.epochs = parse(key, v)?,
        "embed_dim" => cfg.embed_dim = parse(key, v)?,
        "hidden_dim" => cfg.hidden_dim = parse(key, v)?,
        "untied_dims" => cfg.untied_dims = parse(key, v)?,
        "dropout" => cfg.dropout = parse(key, v)?,
        "max_len" => cfg.encode.max_len = parse(key, v)?,
        "truncation" => cfg.encode.truncation = parse(key, v)?,
        "mode" => cfg.mode = parse(key, v)?,
        "seed" => {
            cfg.seed = parse(key, v)?;
            cfg.sampling.seed = cfg.seed;
        }
        "early_stopping_patience" => cfg.early_stopping_patience = parse_opt(key, v)?,
        "eval_train" => cfg.eval_train = parse(key, v)?,
        "learning_rate" => cfg.optimizer.learning_rate = parse(key, v)?,
        "beta1" => cfg.optimizer.beta1 = parse(key, v)?,
        "beta2" => cfg.optimizer.beta2 = parse(key, v)?,
        "epsilon" => cfg.optimizer.epsilon = parse(key, v)?,
        "weight_decay" => cfg.optimizer.weight_decay = parse(key, v)?,
        "decay_scope" => cfg.optimizer.decay_scope = parse(key, v)?,
        "max_grad_norm" => cfg.optimizer.max_grad_norm = parse_opt(key, v)?,
        "partial_sampling" => cfg.sampling.partial_sampling = parse(key, v)?,
        "pair_duplication" => cfg.sampling.pair_duplication = parse(key, v)?,
        "batch_size" => cfg.sampling.batch_size = parse(key, v)?,
        "sampling_seed" => cfg.sampling.seed = parse(key, v)?,
        other => {
            return Err(CliError::Usage(format!(
                "unknown config key `{other}` (known: {})",
                KEYS.join(", ")
            )))
        }
    }
    Ok(())
}

/// Splits `key=value`.
pub fn split_pair(item: &str) -> Result<(&str, &str), CliError> {
    item.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| CliError::Usage(format!("expected key=value, got `{item}`")))
}

/// Applies a config file's lines in order. Blank lines and `#` comments are skipped.
pub fn apply_text(cfg: &mut TrainConfig, text: &str, origin: &str) -> Result<(), CliError> {
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = split_pair(line).map_err(|e| CliError::Usage(format!("{origin}:{}: {e}", i + 1)))?;
        apply(cfg, k, v).map_err(|e| CliError::Usage(format!("{origin}:{}: {e}", i + 1)))?;
    }
    Ok(())
}

/// Defaults, then the file, then `overrides` (later wins).
pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<TrainConfig, CliError> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        apply_text(&mut cfg, &text, &path.display().to_string())?;
    }
    for item in overrides {
        let (k, v) = split_pair(item)?;
        apply(&mut cfg, k, v)?;
    }
    Ok(cfg)
}

/// The flat form of `cfg`, one `key = value` per line, readable by [`apply_text`].
pub fn to_text(cfg: &TrainConfig) -> String {
    let opt = |o: Option<String>| o.unwrap_or_else(|| "none".into());
    let kebab = |v: serde_json::Value| v.as_str().unwrap_or_default().to_string();
    let pairs: Vec<(&str, String)> = vec![
        ("epochs", cfg.epochs.to_string()),
        ("embed_dim", cfg.embed_dim.to_string()),
        ("hidden_dim", cfg.hidden_dim.to_string()),
        ("untied_dims", cfg.untied_dims.to_string()),
        ("dropout", cfg.dropout.to_string()),
        ("max_len", cfg.encode.max_len.to_string()),
        ("truncation", kebab(serde_json::to_value(cfg.encode.truncation).unwrap_or_default())),
        ("mode", kebab(serde_json::to_value(cfg.mode).unwrap_or_default())),
        ("seed", cfg.seed.to_string()),
        ("early_stopping_patience", opt(cfg.early_stopping_patience.map(|p| p.to_string()))),
        ("eval_train", cfg.eval_train.to_string()),
        ("learning_rate", cfg.optimizer.learning_rate.to_string()),
        ("beta1", cfg.optimizer.beta1.to_string()),
        ("beta2", cfg.optimizer.beta2.to_string()),
        ("epsilon", cfg.optimizer.epsilon.to_string()),
        ("weight_decay", cfg.optimizer.weight_decay.to_string()),
        ("decay_scope", kebab(serde_json::to_value(cfg.optimizer.decay_scope).unwrap_or_default())),
        ("max_grad_norm", opt(cfg.optimizer.max_grad_norm.map(|n| n.to_string()))),
        ("partial_sampling", cfg.sampling.partial_sampling.to_string()),
        ("pair_duplication", cfg.sampling.pair_duplication.to_string()),
        ("batch_size", cfg.sampling.batch_size.to_string()),
        ("sampling_seed", cfg.sampling.seed.to_string()),
    ];
    pairs.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}
