//! Plain-text `key = value` config files with dotted sections. `arch.*`,
//! `stft.*`, `vq.*`, and `mode` go to the codec config; `train.*` to the
//! training config; `eval.streams` picks evaluation stream counts.
//! Unknown keys are rejected by name.

use codec::CodecConfig;
use training::TrainConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    pub codec: CodecConfig,
    pub train: TrainConfig,
    pub eval_streams: Option<Vec<usize>>,
}

pub fn parse(text: &str) -> Result<FileConfig, CliError> {
    let mut out = FileConfig::default();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("line {}: expected key = value", ln + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        apply(&mut out, key, value)
            .map_err(|e| CliError::usage(format!("line {}: {e}", ln + 1)))?;
    }
    out.codec.validate().map_err(|e| CliError::usage(format!("invalid config: {e}")))?;
    out.train.validate().map_err(|e| CliError::usage(format!("invalid config: {e}")))?;
    Ok(out)
}

fn apply(cfg: &mut FileConfig, key: &str, value: &str) -> Result<(), CliError> {
    if let Some(tkey) = key.strip_prefix("train.") {
        if cfg.train.apply(tkey, value)? {
            return Ok(());
        }
        return Err(CliError::usage(format!("unknown config key {key:?}")));
    }
    if key == "eval.streams" {
        let streams: Result<Vec<usize>, _> =
            value.split(',').map(|x| x.trim().parse::<usize>()).collect();
        cfg.eval_streams =
            Some(streams.map_err(|_| CliError::usage(format!("bad value {value:?} for {key}")))?);
        return Ok(());
    }
    if cfg.codec.apply(key, value)? {
        return Ok(());
    }
    Err(CliError::usage(format!("unknown config key {key:?}")))
}
