use hmc_core::analysis::{optimal_acceptance, ScalingMethod};
use hmc_core::integrators::{leapfrog_trajectory, stability_eigenvalues};
use hmc_core::model::{CanonicalDensity, KineticSpec, PhaseState};
use hmc_core::samplers::{
    lmc_phase_space_acceptance, lmc_proposal_density_acceptance, run_chain, KernelChoice,
    TrajectoryPlan,
};
use hmc_core::targets::make_figure_targets;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CliError, Result};

fn check(name: &str, ok: bool, detail: String) -> Result<()> {
    if ok {
        println!("selftest {name}: ok");
        Ok(())
    } else {
        Err(CliError::Config(format!("selftest {name} failed: {detail}")))
    }
}

/// Fast end-to-end sanity checks; each prints one line and the command
/// fails on the first miss.
pub fn run() -> Result<()> {
    let target = make_figure_targets("gauss2d_95")?;
    let kinetic = KineticSpec::unit(2);
    let start = PhaseState::new(vec![-1.50, -1.55], vec![-1.0, 1.0])?;
    let traj = leapfrog_trajectory(&start, &target, &kinetic, 0.25, 25)?;
    check(
        "trajectory_energy_error",
        (traj.delta_h - 0.41).abs() < 0.02,
        format!("delta H {}", traj.delta_h),
    )?;

    let (_, stable) = stability_eigenvalues(1.0, 1.99)?;
    let (_, unstable) = stability_eigenvalues(1.0, 2.01)?;
    check(
        "stability_boundary",
        stable == 1.0 && unstable > 1.0,
        format!("eigenvalue magnitudes {stable} and {unstable}"),
    )?;

    let opts: Vec<f64> = [ScalingMethod::Rwm, ScalingMethod::Hmc, ScalingMethod::Lmc]
        .into_iter()
        .map(|m| optimal_acceptance(m).acceptance)
        .collect();
    check(
        "optimal_acceptance",
        (opts[0] - 0.23).abs() < 0.01 && (opts[1] - 0.65).abs() < 0.01 && (opts[2] - 0.57).abs() < 0.01,
        format!("optima {opts:?}"),
    )?;

    let gauss1d = make_figure_targets("gauss1d")?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let q = [rng.sample::<f64, _>(StandardNormal)];
        let p_old = [rng.sample::<f64, _>(StandardNormal)];
        let eps = rng.random_range(0.05..0.5);
        // One leapfrog step by hand to get the matching proposal pair.
        let g = gauss1d.gradient(&q);
        let p_half = p_old[0] - 0.5 * eps * g[0];
        let q_star = [q[0] + eps * p_half];
        let g_star = gauss1d.gradient(&q_star);
        let p_new = [p_half - 0.5 * eps * g_star[0]];
        let du = gauss1d.potential(&q_star) - gauss1d.potential(&q);
        let a = lmc_phase_space_acceptance(du, &p_old, &p_new);
        let b = lmc_proposal_density_acceptance(&gauss1d, &q, &q_star, eps);
        worst = worst.max((a - b).abs());
    }
    check(
        "lmc_acceptance_equivalence",
        worst < 1e-12,
        format!("max discrepancy {worst:e}"),
    )?;

    let canonical = CanonicalDensity::new(make_figure_targets("gauss2d_95")?, KineticSpec::unit(2))?;
    let plan = TrajectoryPlan::new((0.1, 0.2), (5, 15))?;
    let windowed = run_chain(&[0.3, 0.1], &canonical, &plan, KernelChoice::WindowedHmc, 200, 13)?;
    let plain = run_chain(&[0.3, 0.1], &canonical, &plan, KernelChoice::Hmc, 200, 13)?;
    check(
        "window_one_equivalence",
        windowed.positions == plain.positions,
        "windowed W=1 diverged from plain HMC".into(),
    )?;

    let again = run_chain(&[0.3, 0.1], &canonical, &plan, KernelChoice::Hmc, 200, 13)?;
    check(
        "determinism",
        plain == again,
        "repeated run with the same seed differed".into(),
    )?;
    Ok(())
}
