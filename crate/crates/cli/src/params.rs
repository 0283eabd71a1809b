use clap::Args;
use lagcd_core::model::{param_count, ArchConfig, ParamBreakdown};
use serde::Serialize;

use crate::common;
use crate::error::{CliError, CliResult};
use crate::Globals;

/// Defaults are the largest documented configuration at 25 variables.
#[derive(Args, Debug)]
pub struct ParamsArgs {
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub d_ff: Option<usize>,
    /// Convolution kernel size of the token embedding.
    #[arg(long)]
    pub kernel: Option<usize>,
    /// Exclude the correlation-injection inputs of the head.
    #[arg(long)]
    pub no_train_aids: bool,
    /// Exclude the distillation layers.
    #[arg(long)]
    pub no_distil: bool,
    #[arg(long)]
    pub v_max: Option<usize>,
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Advertised model size to check against the computed total.
    #[arg(long)]
    pub nominal: Option<u64>,
}

#[derive(Serialize)]
struct Output<'a> {
    command: &'static str,
    config: &'a ArchConfig,
    breakdown: &'a ParamBreakdown,
}

fn group(n: u64) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (k, c) in s.chars().enumerate() {
        if k > 0 && (s.len() - k) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

pub fn run(g: &Globals, a: ParamsArgs) -> CliResult<()> {
    let (mut cfg, _): (ArchConfig, _) = common::load_config(g.config.as_deref())?;
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value {
                $field = v;
            }
        };
    }
    set!(cfg.blocks, a.blocks);
    set!(cfg.d_model, a.d_model);
    set!(cfg.n_heads, a.heads);
    set!(cfg.d_ff, a.d_ff);
    set!(cfg.kernel, a.kernel);
    set!(cfg.v_max, a.v_max);
    set!(cfg.max_lag, a.max_lag);
    if a.no_train_aids {
        cfg.train_aids = false;
    }
    if a.no_distil {
        cfg.distil = false;
    }
    let mut b = param_count(&cfg).map_err(|e| CliError::config(e.to_string()))?;
    if let Some(n) = a.nominal {
        b.notes.extend(b.nominal_mismatch(n, 0.25));
    }
    common::emit(g, &Output { command: "params", config: &cfg, breakdown: &b }, || {
        let mut s = String::new();
        for (name, v) in [
            ("embedding", b.embedding),
            ("encoder", b.encoder),
            ("distil", b.distil),
            ("head input", b.head_input),
            ("head", b.head),
            ("total", b.total),
        ] {
            s.push_str(&format!("{name:<11} {:>14}\n", group(v)));
        }
        for n in &b.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thousands() {
        assert_eq!(group(1921875), "1,921,875");
        assert_eq!(group(999), "999");
        assert_eq!(group(1000), "1,000");
    }
}
