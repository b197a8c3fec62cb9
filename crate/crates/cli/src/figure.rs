use std::path::Path;

use hmc_core::integrators::{
    euler_step, leapfrog_path, modified_euler_step, tempered_trajectory,
};
use hmc_core::model::{CanonicalDensity, KineticSpec, PhaseState};
use hmc_core::samplers::{chain_seed, run_chain, ChainRecord, KernelChoice, TrajectoryPlan};
use hmc_core::targets::{gauss100d_sds, make_figure_targets};

use crate::csvout::{num, out_path, CsvFile};
use crate::error::{CliError, Result};

pub const FIGURE_IDS: [&str; 7] = ["fig1", "fig3", "fig4", "fig5", "fig6", "fig7", "fig9"];

pub fn run(figure_id: &str, seed: u64, out_dir: &Path) -> Result<()> {
    match figure_id {
        "fig1" => fig1(out_dir),
        "fig3" => fig3(out_dir),
        "fig4" => fig4(seed, out_dir, 20),
        "fig5" => fig4(seed, out_dir, 200),
        "fig6" => fig100d(seed, out_dir, false),
        "fig7" => fig100d(seed, out_dir, true),
        "fig9" => fig9(out_dir),
        other => Err(CliError::Config(format!(
            "unknown figure id {other:?}; expected one of {FIGURE_IDS:?}"
        ))),
    }
}

/// One-dimensional oscillator `H = q^2/2 + p^2/2` started from `(0, 1)`:
/// Euler, modified Euler and leapfrog at stepsize 0.3, and leapfrog at
/// 1.2, each for 20 steps, next to the exact solution `(sin t, cos t)`.
fn fig1(out_dir: &Path) -> Result<()> {
    let target = make_figure_targets("gauss1d")?;
    let kinetic = KineticSpec::unit(1);
    let start = PhaseState::new(vec![0.0], vec![1.0])?;
    let steps = 20usize;

    let mut euler = start.clone();
    let mut modified = start.clone();
    let leap = leapfrog_path(&start, &target, &kinetic, 0.3, steps)?;
    let leap_big = leapfrog_path(&start, &target, &kinetic, 1.2, steps)?;

    let mut csv = CsvFile::create(
        &out_path(out_dir, "fig1.csv")?,
        &[
            "step",
            "exact_q",
            "exact_p",
            "euler_q",
            "euler_p",
            "modified_euler_q",
            "modified_euler_p",
            "leapfrog_q",
            "leapfrog_p",
            "exact_big_q",
            "exact_big_p",
            "leapfrog_big_q",
            "leapfrog_big_p",
        ],
    )?;
    for step in 0..=steps {
        let t = 0.3 * step as f64;
        let t_big = 1.2 * step as f64;
        csv.row(&[
            step.to_string(),
            num(t.sin()),
            num(t.cos()),
            num(euler.q[0]),
            num(euler.p[0]),
            num(modified.q[0]),
            num(modified.p[0]),
            num(leap[step].0.q[0]),
            num(leap[step].0.p[0]),
            num(t_big.sin()),
            num(t_big.cos()),
            num(leap_big[step].0.q[0]),
            num(leap_big[step].0.p[0]),
        ])?;
        if step < steps {
            euler = euler_step(&euler, &target, &kinetic, 0.3)?.state;
            modified = modified_euler_step(&modified, &target, &kinetic, 0.3)?.state;
        }
    }
    csv.finish()
}

/// Single trajectory on the 2D Gaussian with correlation 0.95: 25
/// leapfrog steps at stepsize 0.25 from `q = (-1.50, -1.55)`,
/// `p = (-1, 1)`.  Rows cover steps 0..=25 so the first and last `h`
/// bracket the whole trajectory.
fn fig3(out_dir: &Path) -> Result<()> {
    let target = make_figure_targets("gauss2d_95")?;
    let kinetic = KineticSpec::unit(2);
    let start = PhaseState::new(vec![-1.50, -1.55], vec![-1.0, 1.0])?;
    let path = leapfrog_path(&start, &target, &kinetic, 0.25, 25)?;
    let mut csv = CsvFile::create(
        &out_path(out_dir, "fig3.csv")?,
        &["step", "q1", "q2", "p1", "p2", "h"],
    )?;
    for (step, (state, h)) in path.iter().enumerate() {
        csv.row(&[
            step.to_string(),
            num(state.q[0]),
            num(state.q[1]),
            num(state.p[0]),
            num(state.p[1]),
            num(*h),
        ])?;
    }
    csv.finish()
}

/// Random-walk Metropolis (20 updates per iteration, proposal sd 0.18)
/// next to HMC (20 leapfrog steps, stepsize 0.18) on the 2D Gaussian with
/// correlation 0.98.  `iterations` = 20 reproduces the short comparison,
/// 200 the long one (which plots only the first coordinate).
fn fig4(seed: u64, out_dir: &Path, iterations: usize) -> Result<()> {
    const UPDATES_PER_ITER: usize = 20;
    let target = make_figure_targets("gauss2d_98")?;
    let canonical = CanonicalDensity::new(target, KineticSpec::unit(2))?;
    let start = vec![0.0; 2];

    let rwm_plan = TrajectoryPlan::new((0.18, 0.18), (1, 1))?;
    let rwm = run_chain(
        &start,
        &canonical,
        &rwm_plan,
        KernelChoice::Rwm,
        iterations * UPDATES_PER_ITER,
        chain_seed(seed, 0),
    )?;
    let hmc_plan = TrajectoryPlan::new((0.18, 0.18), (20, 20))?;
    let hmc = run_chain(
        &start,
        &canonical,
        &hmc_plan,
        KernelChoice::Hmc,
        iterations,
        chain_seed(seed, 1),
    )?;

    let (name, header): (&str, &[&str]) = if iterations == 20 {
        ("fig4.csv", &["iteration", "rwm_q1", "rwm_q2", "hmc_q1", "hmc_q2"])
    } else {
        ("fig5.csv", &["iteration", "rwm_q1", "hmc_q1"])
    };
    let mut csv = CsvFile::create(&out_path(out_dir, name)?, header)?;
    for it in 0..iterations {
        let r = &rwm.positions[(it + 1) * UPDATES_PER_ITER - 1];
        let h = &hmc.positions[it];
        let mut row = vec![(it + 1).to_string(), num(r[0])];
        if iterations == 20 {
            row.push(num(r[1]));
            row.push(num(h[0]));
            row.push(num(h[1]));
        } else {
            row.push(num(h[0]));
        }
        csv.row(&row)?;
    }
    csv.finish()
}

/// The 100-dimensional diagonal Gaussian comparison: HMC with L = 150 and
/// jittered stepsize against random-walk Metropolis with 150 updates per
/// iteration, 1000 iterations each.  The trace variant emits the
/// largest-sd coordinate per iteration; the estimate variant emits
/// per-coordinate means and sds.
fn fig100d(seed: u64, out_dir: &Path, estimates: bool) -> Result<()> {
    const ITERS: usize = 1000;
    const UPDATES_PER_ITER: usize = 150;
    let target = make_figure_targets("gauss100d")?;
    let canonical = CanonicalDensity::new(target, KineticSpec::unit(100))?;
    let start = vec![0.0; 100];

    let rwm_plan = TrajectoryPlan::new((0.0176, 0.0264), (1, 1))?;
    let rwm = run_chain(
        &start,
        &canonical,
        &rwm_plan,
        KernelChoice::Rwm,
        ITERS * UPDATES_PER_ITER,
        chain_seed(seed, 0),
    )?;
    let hmc_plan = TrajectoryPlan::new((0.0104, 0.0156), (150, 150))?;
    let hmc = run_chain(
        &start,
        &canonical,
        &hmc_plan,
        KernelChoice::Hmc,
        ITERS,
        chain_seed(seed, 1),
    )?;

    if !estimates {
        let mut csv = CsvFile::create(
            &out_path(out_dir, "fig6.csv")?,
            &["iteration", "rwm_q100", "hmc_q100"],
        )?;
        for it in 0..ITERS {
            csv.row(&[
                (it + 1).to_string(),
                num(rwm.positions[(it + 1) * UPDATES_PER_ITER - 1][99]),
                num(hmc.positions[it][99]),
            ])?;
        }
        return csv.finish();
    }

    // Estimates discard the usual 10% burn-in.
    let moments = |chain: &ChainRecord, i: usize| {
        let skip = chain.len() / 10;
        let xs: Vec<f64> = chain.positions[skip..].iter().map(|q| q[i]).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let mut csv = CsvFile::create(
        &out_path(out_dir, "fig7.csv")?,
        &["true_sd", "rwm_mean", "rwm_sd", "hmc_mean", "hmc_sd"],
    )?;
    for (i, true_sd) in gauss100d_sds().iter().enumerate() {
        let (rm, rs) = moments(&rwm, i);
        let (hm, hs) = moments(&hmc, i);
        csv.row(&[num(*true_sd), num(rm), num(rs), num(hm), num(hs)])?;
    }
    csv.finish()
}

/// Two tempered trajectories (200 steps, stepsize 0.3, temper factor
/// 1.04) on the two-Gaussian mixture.  The top start crosses to the far
/// mode; the bottom start returns to its own mode.
fn fig9(out_dir: &Path) -> Result<()> {
    let target = make_figure_targets("mixture_fig9")?;
    let kinetic = KineticSpec::unit(2);
    let top_start = PhaseState::new(vec![-0.4, -0.9], vec![0.7, -0.9])?;
    let bottom_start = PhaseState::new(vec![0.1, 1.0], vec![0.5, 0.8])?;
    let top = tempered_trajectory(&top_start, &target, &kinetic, 0.3, 200, 1.04)?;
    let bottom = tempered_trajectory(&bottom_start, &target, &kinetic, 0.3, 200, 1.04)?;

    let mut csv = CsvFile::create(
        &out_path(out_dir, "fig9.csv")?,
        &["step", "top_h", "top_q1", "top_q2", "bottom_h", "bottom_q1", "bottom_q2"],
    )?;
    for step in 0..top.trace.len() {
        let t = &top.trace[step];
        let b = &bottom.trace[step];
        csv.row(&[
            step.to_string(),
            num(t.h),
            num(t.q[0]),
            num(t.q[1]),
            num(b.h),
            num(b.q[0]),
            num(b.q[1]),
        ])?;
    }
    csv.finish()
}
