//! Flat key=value files for engine parameters and tuning grids.
//! Lines starting with `#` and blank lines are ignored.

use rckrmsf::engine::AlnsParams;
use rckrmsf::tuner::{ParamGrids, TunableParam};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParamFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
}

fn kv_lines(path: &Path) -> Result<Vec<(usize, String, String)>, ParamFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ParamFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ParamFileError::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: format!("expected key=value, found {line:?}"),
            });
        };
        out.push((idx + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Applies a parameter file on top of `base`. Unknown keys are errors.
pub fn load_params(path: &Path, mut base: AlnsParams) -> Result<AlnsParams, ParamFileError> {
    let parse_err = |line: usize, msg: String| ParamFileError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    for (line, key, value) in kv_lines(path)? {
        let bad = |what: &str| parse_err(line, format!("bad {what} value {value:?}"));
        match key.as_str() {
            "theta0" => base.theta0 = value.parse().map_err(|_| bad("theta0"))?,
            "epsilon" => base.epsilon = value.parse().map_err(|_| bad("epsilon"))?,
            "lambda" => base.lambda = value.parse().map_err(|_| bad("lambda"))?,
            "eta" => base.eta = value.parse().map_err(|_| bad("eta"))?,
            "zeta1" => base.zeta1 = value.parse().map_err(|_| bad("zeta1"))?,
            "zeta2" => base.zeta2 = value.parse().map_err(|_| bad("zeta2"))?,
            "zeta3" => base.zeta3 = value.parse().map_err(|_| bad("zeta3"))?,
            "phi1" => base.phi1 = value.parse().map_err(|_| bad("phi1"))?,
            "phi2" => base.phi2 = value.parse().map_err(|_| bad("phi2"))?,
            "far_threshold" => {
                base.far_threshold = Some(value.parse().map_err(|_| bad("far_threshold"))?)
            }
            "restarts" => base.restarts = value.parse().map_err(|_| bad("restarts"))?,
            other => {
                return Err(parse_err(line, format!("unknown parameter {other:?}")));
            }
        }
    }
    Ok(base)
}

/// Reads a grid file: one `name=v1,v2,...` line per tuned parameter.
pub fn load_grids(path: &Path) -> Result<ParamGrids, ParamFileError> {
    let parse_err = |line: usize, msg: String| ParamFileError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut grids = ParamGrids::default();
    for (line, key, value) in kv_lines(path)? {
        let param = TunableParam::from_name(&key)
            .ok_or_else(|| parse_err(line, format!("unknown tunable parameter {key:?}")))?;
        let values: Result<Vec<f64>, _> = value.split(',').map(|v| v.trim().parse()).collect();
        let values =
            values.map_err(|_| parse_err(line, format!("bad candidate list {value:?}")))?;
        if values.is_empty() {
            return Err(parse_err(line, "empty candidate list".into()));
        }
        grids.entries.push((param, values));
    }
    Ok(grids)
}
