use hmc_core::analysis::integrated_autocorrelation;
use hmc_core::model::{CanonicalDensity, KineticSpec};
use hmc_core::samplers::{run_chain, ChainRecord, KernelChoice, TrajectoryPlan};
use hmc_core::targets::make_figure_targets;

use crate::config::ExperimentConfig;
use crate::csvout::{num, out_path, CsvFile};
use crate::error::{CliError, Result};

/// Copy of `chain` with the first `burn_in` iterations removed; cumulative
/// gradient counts are re-based so totals cover the kept part only.
fn discard_burn_in(chain: &ChainRecord, burn_in: usize) -> ChainRecord {
    let offset = if burn_in == 0 {
        0
    } else {
        chain.gradient_evals[burn_in - 1]
    };
    ChainRecord {
        dim: chain.dim,
        positions: chain.positions[burn_in..].to_vec(),
        delta_h: chain.delta_h[burn_in..].to_vec(),
        accepted: chain.accepted[burn_in..].to_vec(),
        gradient_evals: chain.gradient_evals[burn_in..]
            .iter()
            .map(|&g| g - offset)
            .collect(),
        divergences: chain.divergences,
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    let target = make_figure_targets(&cfg.target)?;
    let dim = target.dim();
    let canonical = CanonicalDensity::new(target, KineticSpec::unit(dim))?;
    let kernel = KernelChoice::parse(&cfg.kernel)?;
    let mut plan = TrajectoryPlan::new(
        (cfg.epsilon_lo, cfg.epsilon_hi),
        (cfg.steps_lo, cfg.steps_hi),
    )?;
    if cfg.window != 1 {
        plan = plan.with_window(cfg.window)?;
    }
    if cfg.alpha_temp != 1.0 {
        plan = plan.with_alpha_temp(cfg.alpha_temp)?;
    }
    if cfg.alpha_ref != 0.0 {
        plan = plan.with_alpha_ref(cfg.alpha_ref)?;
    }
    let monitored: Vec<usize> = match &cfg.monitor {
        Some(list) => {
            for &i in list {
                if i >= dim {
                    return Err(CliError::Config(format!(
                        "monitored coordinate {i} out of range for {}-dimensional target",
                        dim
                    )));
                }
            }
            list.clone()
        }
        None => (0..dim).collect(),
    };

    let start = vec![0.0; dim];
    let chain = run_chain(&start, &canonical, &plan, kernel, cfg.iters, cfg.seed)?;

    let mut header: Vec<String> = vec!["iteration".into()];
    header.extend(monitored.iter().map(|i| format!("q{i}")));
    header.extend(["delta_h", "accepted", "gradient_evals"].map(String::from));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut trace = CsvFile::create(&out_path(&cfg.out, "trace.csv")?, &header_refs)?;
    for it in 0..chain.len() {
        let mut row: Vec<String> = vec![it.to_string()];
        row.extend(monitored.iter().map(|&i| num(chain.positions[it][i])));
        row.push(num(chain.delta_h[it]));
        row.push((chain.accepted[it] as u8).to_string());
        row.push(chain.gradient_evals[it].to_string());
        trace.row(&row)?;
    }
    trace.finish()?;

    let kept = discard_burn_in(&chain, cfg.burn_in);
    let mut summary = CsvFile::create(
        &out_path(&cfg.out, "summary.csv")?,
        &["key", "coordinate", "value"],
    )?;
    let n = kept.len() as f64;
    let mut moments = Vec::with_capacity(dim);
    for i in 0..dim {
        let xs = kept.coordinate(i);
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        moments.push((mean, var.sqrt()));
    }
    for (i, (mean, _)) in moments.iter().enumerate() {
        summary.row(&["mean".into(), i.to_string(), num(*mean)])?;
    }
    for (i, (_, sd)) in moments.iter().enumerate() {
        summary.row(&["sd".into(), i.to_string(), num(*sd)])?;
    }
    // Autocorrelation times need a reasonably long non-constant series;
    // coordinates where the estimate is unavailable are omitted.
    let taus: Vec<(usize, f64)> = (0..dim)
        .filter_map(|i| {
            integrated_autocorrelation(&kept.coordinate(i))
                .ok()
                .map(|t| (i, t))
        })
        .collect();
    for (i, tau) in &taus {
        summary.row(&["tau".into(), i.to_string(), num(*tau)])?;
    }
    for (i, tau) in &taus {
        summary.row(&["ess".into(), i.to_string(), num(n / tau)])?;
    }
    summary.row(&["rejection_rate".into(), String::new(), num(kept.rejection_rate())])?;
    summary.row(&[
        "total_gradient_evals".into(),
        String::new(),
        kept.total_gradient_evals().to_string(),
    ])?;
    summary.row(&["divergences".into(), String::new(), kept.divergences.to_string()])?;
    summary.finish()?;
    Ok(())
}
