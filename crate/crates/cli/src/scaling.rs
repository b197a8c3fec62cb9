use std::path::Path;

use hmc_core::analysis::{integrated_autocorrelation, optimal_acceptance, ScalingMethod};
use hmc_core::model::{CanonicalDensity, KineticSpec};
use hmc_core::samplers::{chain_seed, run_chain, KernelChoice, TrajectoryPlan};
use hmc_core::targets::replicated_standard_normal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::csvout::{num, out_path, CsvFile};
use crate::error::{CliError, Result};

pub fn parse_method(name: &str) -> Result<(ScalingMethod, KernelChoice)> {
    Ok(match name {
        "hmc" => (ScalingMethod::Hmc, KernelChoice::Hmc),
        "rwm" => (ScalingMethod::Rwm, KernelChoice::Rwm),
        "lmc" => (ScalingMethod::Lmc, KernelChoice::Langevin),
        other => {
            return Err(CliError::Config(format!(
                "unknown scaling method {other:?}; expected hmc, rwm or lmc"
            )))
        }
    })
}

fn plan_for(kernel: KernelChoice, scale: f64) -> TrajectoryPlan {
    // HMC holds the trajectory length eps * L roughly constant so the
    // stepsize alone carries the dimension scaling.
    let steps = match kernel {
        KernelChoice::Hmc => ((1.25 / scale).round() as usize).max(1),
        _ => 1,
    };
    TrajectoryPlan::new((scale, scale), (steps, steps)).expect("positive scale")
}

/// Tune the scale parameter to the target acceptance by bisection on its
/// logarithm; acceptance decreases monotonically in the scale.
fn tune_scale(
    canonical: &CanonicalDensity,
    start: &[f64],
    kernel: KernelChoice,
    target_acc: f64,
    seed: u64,
) -> Result<f64> {
    let probe = |scale: f64, probe_seed: u64| -> Result<f64> {
        let chain = run_chain(start, canonical, &plan_for(kernel, scale), kernel, 400, probe_seed)?;
        Ok(chain.acceptance_rate())
    };
    let (mut lo, mut hi) = (1e-3_f64.ln(), 3.0_f64.ln());
    for i in 0..14 {
        let mid = 0.5 * (lo + hi);
        if probe(mid.exp(), chain_seed(seed, 100 + i))? > target_acc {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

pub fn run(method_name: &str, dims: &[usize], seed: u64, out_dir: &Path) -> Result<()> {
    let (method, kernel) = parse_method(method_name)?;
    if dims.is_empty() {
        return Err(CliError::Config("need at least one dimension".into()));
    }
    if dims.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config("dimensions must be strictly ascending".into()));
    }
    let target_acc = optimal_acceptance(method).acceptance;

    let mut csv = CsvFile::create(
        &out_path(out_dir, &format!("scaling_{method_name}.csv"))?,
        &["d", "scale", "acceptance", "cost"],
    )?;
    for (k, &d) in dims.iter().enumerate() {
        let target = replicated_standard_normal(d)?;
        let canonical = CanonicalDensity::new(target, KineticSpec::unit(d))?;
        let mut rng = ChaCha8Rng::seed_from_u64(chain_seed(seed, k as u64));
        let start: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();

        let scale = tune_scale(&canonical, &start, kernel, target_acc, chain_seed(seed, k as u64))?;
        let chain = run_chain(
            &start,
            &canonical,
            &plan_for(kernel, scale),
            kernel,
            2000,
            chain_seed(seed, 1000 + k as u64),
        )?;
        let tau = integrated_autocorrelation(&chain.coordinate(0))?;
        // Cost per independent sample: work per iteration times the
        // autocorrelation time.  Random-walk Metropolis uses no gradients,
        // so its work is the single potential evaluation per update.
        let evals_per_iter =
            (chain.total_gradient_evals() as f64 / chain.len() as f64).max(1.0);
        csv.row(&[
            d.to_string(),
            num(scale),
            num(chain.acceptance_rate()),
            num(evals_per_iter * tau),
        ])?;
    }
    csv.finish()
}
