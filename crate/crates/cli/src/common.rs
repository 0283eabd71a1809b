use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lagcd_core::corpus::{list_instance_files, read_instance, Corpus, SeriesInstance, MANIFEST};
use lagcd_core::stats::{auc_against, DatasetAuc, EvalReport};
use lagcd_core::{par, rng, Error};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::Globals;

/// Reads the `--config` file, if any, into `T`; absent keys keep defaults.
/// Also returns the raw JSON so callers can tell which keys were given.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<(T, Value)> {
    let Some(path) = path else {
        return Ok((T::default(), Value::Null));
    };
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let raw: Value = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::config(format!("{}: not valid JSON: {e}", path.display())))?;
    let cfg = serde_json::from_value(raw.clone()).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok((cfg, raw))
}

/// Picks the run seed: `--seed`, then a `seed` key in the config file, then
/// OS entropy when `--entropy` was passed. Anything else is refused.
pub fn resolve_seed(g: &Globals, raw: &Value) -> CliResult<u64> {
    if let Some(s) = g.seed {
        return Ok(s);
    }
    if let Some(s) = raw.get("seed") {
        return s.as_u64().ok_or_else(|| CliError::config("config \"seed\" must be a non-negative integer"));
    }
    if g.entropy {
        return Ok(rng::entropy_seed());
    }
    Err(CliError::config("this command is randomized: pass --seed N (or --entropy to draw one)"))
}

/// Parses `lo:hi` (or a single value, meaning `lo = hi`).
pub fn parse_range<T: FromStr + PartialOrd + Copy>(s: &str) -> Result<(T, T), String> {
    let parse = |x: &str| x.trim().parse::<T>().map_err(|_| format!("cannot parse {x:?}"));
    let (lo, hi) = match s.split_once(':') {
        Some((a, b)) => (parse(a)?, parse(b)?),
        None => {
            let v = parse(s)?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(format!("empty range {s:?}"));
    }
    Ok((lo, hi))
}

/// Parses `key=value`.
pub fn parse_pair<T: FromStr>(s: &str) -> Result<(String, T), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let v = v.trim().parse::<T>().map_err(|_| format!("cannot parse value in {s:?}"))?;
    Ok((k.trim().to_owned(), v))
}

/// Loads instances from a corpus directory, a directory of `.tci` files or a
/// single instance file.
pub fn load_instances(path: &Path) -> CliResult<Vec<SeriesInstance>> {
    let meta = fs::metadata(path).map_err(|e| CliError::io(path, e))?;
    if meta.is_file() {
        return Ok(vec![read_instance(path)?]);
    }
    if path.join(MANIFEST).exists() {
        return Ok(Corpus::open(path)?.load_all()?);
    }
    let files = list_instance_files(path)?;
    let loaded: Vec<_> = par::map_slice(&files, |p| read_instance(p));
    Ok(loaded.into_iter().collect::<Result<_, _>>()?)
}

pub fn ensure_dir(path: &Path) -> CliResult<()> {
    match fs::metadata(path) {
        Ok(m) if m.is_dir() => Ok(()),
        Ok(_) => Err(CliError::io(path, std::io::Error::other("not a directory"))),
        Err(e) => Err(CliError::io(path, e)),
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(Error::from)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn score_file(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.tcs"))
}

/// Per-instance AUCs; instances whose truth has no positive or no negative
/// cell are listed as skipped.
pub fn report(method: &str, instances: &[SeriesInstance], scores: &[ndarray::Array3<f64>]) -> CliResult<EvalReport> {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (inst, s) in instances.iter().zip(scores) {
        match auc_against(s, &inst.graph) {
            Ok(auc) => rows.push(DatasetAuc { id: inst.id.clone(), auc }),
            Err(Error::Degenerate(_)) => skipped.push(inst.id.clone()),
            Err(e) => return Err(e.into()),
        }
    }
    if rows.is_empty() && !skipped.is_empty() {
        return Err(CliError::Degenerate(format!(
            "no instance has both edges and non-edges ({} skipped)",
            skipped.len()
        )));
    }
    Ok(EvalReport::new(method, rows, skipped))
}

/// Prints `json` under `--json`, otherwise `text`.
pub fn emit(g: &Globals, json: &impl Serialize, text: impl FnOnce() -> String) -> CliResult<()> {
    if g.json {
        let s = serde_json::to_string_pretty(json).map_err(Error::from)?;
        println!("{s}");
    } else {
        print!("{}", text());
    }
    Ok(())
}
