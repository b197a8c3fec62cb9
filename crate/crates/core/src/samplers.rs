//! MCMC kernels built on the integrators: standard HMC, a random-walk
//! Metropolis baseline, Langevin Monte Carlo, partial-refresh generalized
//! HMC, windowed HMC, tempered HMC and shortcut trajectory wrappers.
//!
//! ## Determinism
//!
//! Every kernel draws from its RNG in a fixed order: momentum refresh
//! first, then the stepsize (only when the range is non-degenerate), then
//! the step count (likewise), then any kernel-specific draws, then the
//! acceptance uniform.  Degenerate ranges consume no draws, so kernels that
//! coincide mathematically (e.g. Langevin and HMC with L = 1) produce
//! identical chains from identical seeds.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::integrators::{
    leapfrog_trajectory, tempered_trajectory, LeapfrogStepper, TrajectoryOutcome,
    DIVERGENCE_GUARD,
};
use crate::model::{CanonicalDensity, PhaseState};

/// Early-termination policy for trajectories.
#[derive(Debug, Clone, PartialEq)]
pub enum Shortcut {
    /// Abort the trajectory (a certain rejection) as soon as the energy
    /// change of any single step exceeds the threshold in magnitude.
    Terminate { threshold: f64 },
    /// Evaluate the trajectory in groups of `group_size` steps.  A group
    /// fails when the standard deviation of its `k + 1` energies falls
    /// outside `[lower, upper]`; the first failure reverses the trajectory
    /// at the group start, the second ends it there.
    Reverse {
        group_size: usize,
        lower: f64,
        upper: f64,
    },
}

/// Per-trajectory tuning: stepsize and step-count jitter ranges plus the
/// parameters of the windowed, tempered and partial-refresh variants.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPlan {
    pub eps_range: (f64, f64),
    pub steps_range: (usize, usize),
    /// Window size `W >= 1`; `W = 1` is plain HMC acceptance.
    pub window: usize,
    /// Momentum multiplier for tempered trajectories; 1 disables tempering.
    pub alpha_temp: f64,
    /// Partial momentum refresh coefficient in `[-1, 1]`; 0 is a full
    /// refresh.
    pub alpha_ref: f64,
    pub shortcut: Option<Shortcut>,
    /// Optional per-position weights for the windows, length `window`,
    /// indexed from the outer end of each window.
    pub window_weights: Option<Vec<f64>>,
}

impl TrajectoryPlan {
    pub fn new(eps_range: (f64, f64), steps_range: (usize, usize)) -> Result<Self> {
        if !(eps_range.0 > 0.0) || !(eps_range.1 >= eps_range.0) || !eps_range.1.is_finite() {
            return Err(Error::InvalidParameter(
                "stepsize range must satisfy 0 < lo <= hi".into(),
            ));
        }
        if steps_range.0 == 0 || steps_range.1 < steps_range.0 {
            return Err(Error::InvalidParameter(
                "step-count range must satisfy 1 <= lo <= hi".into(),
            ));
        }
        Ok(Self {
            eps_range,
            steps_range,
            window: 1,
            alpha_temp: 1.0,
            alpha_ref: 0.0,
            shortcut: None,
            window_weights: None,
        })
    }

    pub fn with_window(mut self, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidParameter("window must be >= 1".into()));
        }
        self.window = window;
        Ok(self)
    }

    pub fn with_window_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.window {
            return Err(Error::DimensionMismatch {
                expected: self.window,
                got: weights.len(),
            });
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidParameter(
                "window weights must be positive".into(),
            ));
        }
        self.window_weights = Some(weights);
        Ok(self)
    }

    pub fn with_alpha_temp(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(
                "temper factor must be positive and finite".into(),
            ));
        }
        self.alpha_temp = alpha;
        Ok(self)
    }

    pub fn with_alpha_ref(mut self, alpha: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(
                "refresh coefficient must lie in [-1, 1]".into(),
            ));
        }
        self.alpha_ref = alpha;
        Ok(self)
    }

    pub fn with_shortcut(mut self, shortcut: Shortcut) -> Result<Self> {
        match &shortcut {
            Shortcut::Terminate { threshold } => {
                if !(*threshold > 0.0) {
                    return Err(Error::InvalidParameter(
                        "terminate threshold must be positive".into(),
                    ));
                }
            }
            Shortcut::Reverse {
                group_size,
                lower,
                upper,
            } => {
                if *group_size == 0 || !(*lower >= 0.0) || !(*upper >= *lower) {
                    return Err(Error::InvalidParameter(
                        "reverse shortcut needs group_size >= 1 and 0 <= lower <= upper".into(),
                    ));
                }
            }
        }
        self.shortcut = Some(shortcut);
        Ok(self)
    }

    /// Stepsize for one trajectory; drawn uniformly once, never per step.
    pub fn draw_eps<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = self.eps_range;
        if lo < hi {
            rng.random_range(lo..hi)
        } else {
            lo
        }
    }

    /// Step count for one trajectory.
    pub fn draw_steps<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let (lo, hi) = self.steps_range;
        if lo < hi {
            rng.random_range(lo..=hi)
        } else {
            lo
        }
    }
}

/// One kernel invocation's result.
#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub state: PhaseState,
    pub accepted: bool,
    pub delta_h: f64,
    pub gradient_evals: u64,
    pub diverged: bool,
}

fn metropolis_accept<R: Rng + ?Sized>(rng: &mut R, delta_h: f64) -> bool {
    let u: f64 = rng.random();
    u < (-delta_h).exp()
}

/// Standard HMC: full momentum refresh, one (possibly shortcut-wrapped)
/// leapfrog trajectory, endpoint momentum negation, Metropolis accept.
pub fn hmc_iteration<R: Rng + ?Sized>(
    state: &PhaseState,
    canonical: &CanonicalDensity,
    plan: &TrajectoryPlan,
    rng: &mut R,
) -> Result<IterationOutcome> {
    let p = canonical.kinetic.sample_momentum(rng);
    let start = PhaseState::new(state.q.clone(), p)?;
    let eps = plan.draw_eps(rng);
    let steps = plan.draw_steps(rng);
    let traj = match &plan.shortcut {
        None => leapfrog_trajectory(&start, &canonical.target, &canonical.kinetic, eps, steps)?,
        Some(s) => shortcut_trajectory(&start, canonical, eps, steps, s)?,
    };
    let accepted = metropolis_accept(rng, traj.delta_h);
    let state = if accepted {
        traj.end.with_negated_momentum()
    } else {
        start
    };
    Ok(IterationOutcome {
        state,
        accepted,
        delta_h: traj.delta_h,
        gradient_evals: traj.gradient_evals,
        diverged: traj.diverged,
    })
}

/// Random-walk Metropolis baseline with a spherical Gaussian proposal; the
/// plan's stepsize range doubles as the proposal-sd range.
pub fn rwm_iteration<R: Rng + ?Sized>(
    state: &PhaseState,
    canonical: &CanonicalDensity,
    plan: &TrajectoryPlan,
    rng: &mut R,
) -> Result<IterationOutcome> {
    let sd = plan.draw_eps(rng);
    let proposal: Vec<f64> = state
        .q
        .iter()
        .map(|&qi| {
            let n: f64 = rng.sample(StandardNormal);
            qi + sd * n
        })
        .collect();
    let du = canonical.target.potential(&proposal) - canonical.target.potential(&state.q);
    let accepted = metropolis_accept(rng, du);
    let q = if accepted { proposal } else { state.q.clone() };
    Ok(IterationOutcome {
        state: PhaseState::new(q, state.p.clone())?,
        accepted,
        delta_h: du,
        gradient_evals: 0,
        diverged: false,
    })
}

/// Langevin Monte Carlo: full momentum refresh and exactly one leapfrog
/// step; a special case of HMC with L = 1.
pub fn langevin_iteration<R: Rng + ?Sized>(
    state: &PhaseState,
    canonical: &CanonicalDensity,
    plan: &TrajectoryPlan,
    rng: &mut R,
) -> Result<IterationOutcome> {
    let p = canonical.kinetic.sample_momentum(rng);
    let start = PhaseState::new(state.q.clone(), p)?;
    let eps = plan.draw_eps(rng);
    let traj = leapfrog_trajectory(&start, &canonical.target, &canonical.kinetic, eps, 1)?;
    let accepted = metropolis_accept(rng, traj.delta_h);
    let state = if accepted {
        traj.end.with_negated_momentum()
    } else {
        start
    };
    Ok(IterationOutcome {
        state,
        accepted,
        delta_h: traj.delta_h,
        gradient_evals: traj.gradient_evals,
        diverged: traj.diverged,
    })
}

/// Langevin acceptance from phase space: `min[1, exp(-(U* - U) -
/// (K* - K))]` with unit masses.
pub fn lmc_phase_space_acceptance(du: f64, p_old: &[f64], p_new: &[f64]) -> f64 {
    let dk: f64 = p_new
        .iter()
        .zip(p_old)
        .map(|(&a, &b)| 0.5 * (a * a - b * b))
        .sum();
    (-du - dk).exp().min(1.0)
}

/// Langevin acceptance as a Metropolis-Hastings ratio with the Gaussian
/// proposal `q* ~ N(q - (eps^2 / 2) grad U(q), eps^2 I)`; must agree with
/// [`lmc_phase_space_acceptance`] for proposals generated by a leapfrog
/// step.
pub fn lmc_proposal_density_acceptance(
    target: &crate::model::TargetDensity,
    q: &[f64],
    q_star: &[f64],
    eps: f64,
) -> f64 {
    let g = target.gradient(q);
    let g_star = target.gradient(q_star);
    let mut log_fwd = 0.0;
    let mut log_bwd = 0.0;
    for i in 0..q.len() {
        let mean_fwd = q[i] - 0.5 * eps * eps * g[i];
        let mean_bwd = q_star[i] - 0.5 * eps * eps * g_star[i];
        log_fwd -= (q_star[i] - mean_fwd).powi(2) / (2.0 * eps * eps);
        log_bwd -= (q[i] - mean_bwd).powi(2) / (2.0 * eps * eps);
    }
    let log_ratio = -target.potential(q_star) + target.potential(q) + log_bwd - log_fwd;
    log_ratio.exp().min(1.0)
}

/// Partial momentum refresh `p' = alpha p + sqrt(1 - alpha^2) n` with
/// `n ~ N(0, M)`; leaves the momentum distribution invariant.
pub fn partial_refresh<R: Rng + ?Sized>(
    p: &[f64],
    alpha_ref: f64,
    kinetic: &crate::model::KineticSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(-1.0..=1.0).contains(&alpha_ref) {
        return Err(Error::InvalidParameter(
            "refresh coefficient must lie in [-1, 1]".into(),
        ));
    }
    if p.len() != kinetic.dim() {
        return Err(Error::DimensionMismatch {
            expected: kinetic.dim(),
            got: p.len(),
        });
    }
    let noise = kinetic.sample_momentum(rng);
    let scale = (1.0 - alpha_ref * alpha_ref).sqrt();
    Ok(p.iter()
        .zip(&noise)
        .map(|(&pi, &ni)| alpha_ref * pi + scale * ni)
        .collect())
}

/// Generalized HMC: partial refresh, HMC-style propose/accept, then an
/// unconditional momentum negation.  On acceptance the proposal's negation
/// and the final one cancel, so motion persists; on rejection the momentum
/// flips and motion reverses.
pub fn ghmc_iteration<R: Rng + ?Sized>(
    state: &PhaseState,
    canonical: &CanonicalDensity,
    plan: &TrajectoryPlan,
    rng: &mut R,
) -> Result<IterationOutcome> {
    let p = partial_refresh(&state.p, plan.alpha_ref, &canonical.kinetic, rng)?;
    let start = PhaseState::new(state.q.clone(), p)?;
    let eps = plan.draw_eps(rng);
    let steps = plan.draw_steps(rng);
    let traj = leapfrog_trajectory(&start, &canonical.target, &canonical.kinetic, eps, steps)?;
    let accepted = metropolis_accept(rng, traj.delta_h);
    let mut state = if accepted {
        traj.end.with_negated_momentum()
    } else {
        start
    };
    state.negate_momentum();
    Ok(IterationOutcome {
        state,
        accepted,
        delta_h: traj.delta_h,
        gradient_evals: traj.gradient_evals,
        diverged: traj.diverged,
    })
}

/// Streaming single-state reservoir: after `n` additions the saved state is
/// state `i` with probability `w_i / sum w`, holding one state at a time.
pub struct WeightedReservoir {
    saved: Option<PhaseState>,
    total: f64,
}

impl WeightedReservoir {
    pub fn new() -> Self {
        Self {
            saved: None,
            total: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Add a state with the given nonnegative weight; it replaces the saved
    /// state with probability `weight / (previous total + weight)`.
    pub fn add<R: Rng + ?Sized>(&mut self, state: &PhaseState, weight: f64, rng: &mut R) {
        if !(weight > 0.0) {
            return;
        }
        self.total += weight;
        if self.saved.is_none() {
            self.saved = Some(state.clone());
            return;
        }
        let u: f64 = rng.random();
        if u < weight / self.total {
            self.saved = Some(state.clone());
        }
    }

    pub fn into_saved(self) -> Option<PhaseState> {
        self.saved
    }
}

impl Default for WeightedReservoir {
    fn default() -> Self {
        Self::new()
    }
}

/// Windowed HMC: the start state is placed at a uniform offset `s` inside
/// the reject window, the trajectory runs `s` steps backward and `L - s`
/// forward, and whole windows accept or reject against each other.  The
/// returned state is drawn within the chosen window with probability
/// proportional to its (optionally weighted) canonical density; only three
/// states are ever held (the start plus one reservoir per window).
pub fn windowed_hmc_iteration<R: Rng + ?Sized>(
    state: &PhaseState,
    canonical: &CanonicalDensity,
    plan: &TrajectoryPlan,
    rng: &mut R,
) -> Result<IterationOutcome> {
    let w = plan.window;
    let steps_hi = plan.steps_range.0;
    if steps_hi + 1 < w {
        return Err(Error::InvalidParameter(
            "window requires L >= W - 1".into(),
        ));
    }
    let p = canonical.kinetic.sample_momentum(rng);
    let start = PhaseState::new(state.q.clone(), p)?;
    let eps = plan.draw_eps(rng);
    let steps = plan.draw_steps(rng);
    if steps + 1 < w {
        return Err(Error::InvalidParameter(
            "window requires L >= W - 1".into(),
        ));
    }
    let offset = if w > 1 { rng.random_range(0..w) } else { 0 };

    let target = &canonical.target;
    let kinetic = &canonical.kinetic;
    let h0 = target.potential(&start.q) + kinetic.energy(&start.p);
    // Position-dependent window weight: index from the outer end of the
    // trajectory so the weighting is invariant under reversal.
    let weight_at = |idx: usize| -> f64 {
        match &plan.window_weights {
            None => 1.0,
            Some(ws) => {
                if idx < w {
                    ws[idx]
                } else {
                    ws[steps - idx]
                }
            }
        }
    };
    let mut reject_res = WeightedReservoir::new();
    let mut accept_res = WeightedReservoir::new();
    let mut evals = 0u64;
    let mut diverged = false;
    let accept_lo = steps + 1 - w;

    // The density weight of state `idx`, already shifted by H0 for
    // numerical range; diverged segments contribute nothing.
    let mut visit = |idx: usize, st: &PhaseState, h: f64, rng: &mut R| {
        let dens = (h0 - h).exp() * weight_at(idx);
        if idx < w {
            reject_res.add(st, dens, rng);
        }
        if idx >= accept_lo {
            accept_res.add(st, dens, rng);
        }
    };

    visit(offset, &start, h0, rng);

    // Backward leg covers indices offset-1 .. 0; stored momenta keep the
    // forward orientation.
    if offset > 0 {
        let mut stepper =
            LeapfrogStepper::new(target, kinetic, eps, start.with_negated_momentum())?;
        for j in 1..=offset {
            stepper.step()?;
            let h = stepper.exact_hamiltonian();
            if !stepper.state().is_finite() || !h.is_finite() || (h - h0).abs() > DIVERGENCE_GUARD
            {
                diverged = true;
                break;
            }
            let st = stepper.state().with_negated_momentum();
            visit(offset - j, &st, h, rng);
        }
        evals += stepper.gradient_evals();
    }

    // Forward leg covers indices offset+1 .. L.
    if offset < steps {
        let mut stepper = LeapfrogStepper::new(target, kinetic, eps, start.clone())?;
        for j in 1..=(steps - offset) {
            stepper.step()?;
            let h = stepper.exact_hamiltonian();
            if !stepper.state().is_finite() || !h.is_finite() || (h - h0).abs() > DIVERGENCE_GUARD
            {
                diverged = true;
                break;
            }
            visit(offset + j, &stepper.state().clone(), h, rng);
        }
        evals += stepper.gradient_evals();
    }

    let ratio = if reject_res.total() > 0.0 {
        accept_res.total() / reject_res.total()
    } else {
        0.0
    };
    let delta_h = -ratio.ln();
    let accepted = metropolis_accept(rng, delta_h);
    let chosen = if accepted {
        accept_res.into_saved()
    } else {
        reject_res.into_saved()
    };
    // The start state always has positive density, so a reject-window
    // selection exists; fall back to it defensively.
    let chosen = chosen.unwrap_or(start);
    Ok(IterationOutcome {
        state: chosen.with_negated_momentum(),
        accepted,
        delta_h,
        gradient_evals: evals,
        diverged,
    })
}

/// Tempered HMC: a full momentum refresh and a tempered trajectory; the
/// tempering map has unit Jacobian, so the standard Metropolis rule
/// applies.
pub fn tempered_hmc_iteration<R: Rng + ?Sized>(
    state: &PhaseState,
    canonical: &CanonicalDensity,
    plan: &TrajectoryPlan,
    rng: &mut R,
) -> Result<IterationOutcome> {
    let p = canonical.kinetic.sample_momentum(rng);
    let start = PhaseState::new(state.q.clone(), p)?;
    let eps = plan.draw_eps(rng);
    let steps = plan.draw_steps(rng);
    let traj = tempered_trajectory(
        &start,
        &canonical.target,
        &canonical.kinetic,
        eps,
        steps,
        plan.alpha_temp,
    )?;
    let accepted = metropolis_accept(rng, traj.delta_h);
    let state = if accepted {
        traj.end.with_negated_momentum()
    } else {
        start
    };
    Ok(IterationOutcome {
        state,
        accepted,
        delta_h: traj.delta_h,
        gradient_evals: traj.gradient_evals,
        diverged: traj.diverged,
    })
}

#[derive(Clone)]
struct CachedPoint {
    state: PhaseState,
    h: f64,
    grad: Vec<f64>,
}

/// Leapfrog trajectory wrapped with an early-termination policy.
///
/// Terminate mode aborts (certain rejection) on the first step whose energy
/// change exceeds the threshold.  Reverse mode runs in groups of `k` steps;
/// a failed group test reverses the trajectory at the group start, replaying
/// already-computed states without new gradient evaluations, and a second
/// failure ends the trajectory at the group start where it occurred.
pub fn shortcut_trajectory(
    start: &PhaseState,
    canonical: &CanonicalDensity,
    eps: f64,
    steps: usize,
    shortcut: &Shortcut,
) -> Result<TrajectoryOutcome> {
    let target = &canonical.target;
    let kinetic = &canonical.kinetic;
    match shortcut {
        Shortcut::Terminate { threshold } => {
            let mut stepper = LeapfrogStepper::new(target, kinetic, eps, start.clone())?;
            let h0 = stepper.exact_hamiltonian();
            let mut h_prev = h0;
            for _ in 0..steps {
                stepper.step()?;
                let h = stepper.exact_hamiltonian();
                if !h.is_finite() || (h - h_prev).abs() > *threshold {
                    return Ok(TrajectoryOutcome {
                        end: stepper.state().clone(),
                        delta_h: f64::INFINITY,
                        gradient_evals: stepper.gradient_evals(),
                        diverged: true,
                    });
                }
                h_prev = h;
            }
            Ok(TrajectoryOutcome {
                delta_h: stepper.exact_hamiltonian() - h0,
                gradient_evals: stepper.gradient_evals(),
                end: stepper.state().clone(),
                diverged: false,
            })
        }
        Shortcut::Reverse {
            group_size,
            lower,
            upper,
        } => {
            let k = *group_size;
            // States on the trajectory line, keyed by signed step index
            // with forward-oriented momentum; the start is index 0.
            let mut cache: HashMap<i64, CachedPoint> = HashMap::new();
            let g0 = (target.simulation_part().gradient)(&start.q);
            let mut evals = 1u64;
            let h0 = target.potential(&start.q) + kinetic.energy(&start.p);
            cache.insert(
                0,
                CachedPoint {
                    state: start.clone(),
                    h: h0,
                    grad: g0,
                },
            );
            let mut cur: i64 = 0;
            let mut dir: i64 = 1;
            let mut failures = 0usize;
            let mut remaining = steps;
            while remaining > 0 {
                let len = remaining.min(k);
                // Materialize the group's states, computing only those not
                // yet cached; new states extend from the cached frontier.
                let group: Vec<i64> = (1..=len as i64).map(|j| cur + dir * j).collect();
                for &idx in &group {
                    if cache.contains_key(&idx) {
                        continue;
                    }
                    let prev = idx - dir;
                    let from = cache.get(&prev).expect("frontier is contiguous").clone();
                    let (seed_state, seed_grad) = if dir > 0 {
                        (from.state.clone(), from.grad.clone())
                    } else {
                        (from.state.with_negated_momentum(), from.grad.clone())
                    };
                    let mut stepper = LeapfrogStepper::with_gradient(
                        target, kinetic, eps, seed_state, seed_grad,
                    )?;
                    stepper.step()?;
                    evals += stepper.gradient_evals();
                    let oriented = if dir > 0 {
                        stepper.state().clone()
                    } else {
                        stepper.state().with_negated_momentum()
                    };
                    let h = stepper.exact_hamiltonian();
                    if !oriented.is_finite() || !h.is_finite() || (h - h0).abs() > DIVERGENCE_GUARD
                    {
                        return Ok(TrajectoryOutcome {
                            end: oriented,
                            delta_h: f64::INFINITY,
                            gradient_evals: evals,
                            diverged: true,
                        });
                    }
                    let grad = stepper.gradient().to_vec();
                    cache.insert(
                        idx,
                        CachedPoint {
                            state: oriented,
                            h,
                            grad,
                        },
                    );
                }
                // Group test over the k+1 energies, start included; the
                // statistic is reversal-invariant by construction.
                let mut hs: Vec<f64> = Vec::with_capacity(len + 1);
                hs.push(cache[&cur].h);
                hs.extend(group.iter().map(|i| cache[i].h));
                let mean = hs.iter().sum::<f64>() / hs.len() as f64;
                let var = hs.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / hs.len() as f64;
                let sd = var.sqrt();
                remaining -= len;
                if sd >= *lower && sd <= *upper {
                    cur += dir * len as i64;
                } else {
                    failures += 1;
                    dir = -dir;
                    if failures == 2 {
                        break;
                    }
                }
            }
            let end_point = &cache[&cur];
            let end = if dir > 0 {
                end_point.state.clone()
            } else {
                end_point.state.with_negated_momentum()
            };
            Ok(TrajectoryOutcome {
                delta_h: end_point.h - h0,
                end,
                gradient_evals: evals,
                diverged: false,
            })
        }
    }
}

/// Kernel selector for [`run_chain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelChoice {
    Hmc,
    Rwm,
    Langevin,
    Ghmc,
    WindowedHmc,
    TemperedHmc,
}

impl KernelChoice {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "hmc" => Self::Hmc,
            "rwm" => Self::Rwm,
            "lmc" | "langevin" => Self::Langevin,
            "ghmc" => Self::Ghmc,
            "windowed" | "windowed_hmc" => Self::WindowedHmc,
            "tempered" | "tempered_hmc" => Self::TemperedHmc,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown kernel: {other}"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Hmc => "hmc",
            Self::Rwm => "rwm",
            Self::Langevin => "lmc",
            Self::Ghmc => "ghmc",
            Self::WindowedHmc => "windowed",
            Self::TemperedHmc => "tempered",
        }
    }
}

/// Full record of a chain run: every position, energy error, accept flag
/// and the cumulative gradient-evaluation count.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRecord {
    pub dim: usize,
    pub positions: Vec<Vec<f64>>,
    pub delta_h: Vec<f64>,
    pub accepted: Vec<bool>,
    pub gradient_evals: Vec<u64>,
    pub divergences: u64,
}

impl ChainRecord {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn rejection_rate(&self) -> f64 {
        if self.accepted.is_empty() {
            return 0.0;
        }
        self.accepted.iter().filter(|&&a| !a).count() as f64 / self.accepted.len() as f64
    }

    pub fn acceptance_rate(&self) -> f64 {
        1.0 - self.rejection_rate()
    }

    /// Time series of one coordinate.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.positions.iter().map(|q| q[i]).collect()
    }

    pub fn total_gradient_evals(&self) -> u64 {
        self.gradient_evals.last().copied().unwrap_or(0)
    }
}

/// Seed for chain `index` derived from a base seed; distinct per index.
pub fn chain_seed(base: u64, index: u64) -> u64 {
    // SplitMix64-style scramble.
    let mut z = base ^ (index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Run one chain for `n_iterations` of the chosen kernel.  Deterministic
/// given the seed; the initial momentum is drawn once so momentum-
/// persistent kernels start in equilibrium.
pub fn run_chain(
    initial_q: &[f64],
    canonical: &CanonicalDensity,
    plan: &TrajectoryPlan,
    kernel: KernelChoice,
    n_iterations: usize,
    rng_seed: u64,
) -> Result<ChainRecord> {
    if n_iterations == 0 {
        return Err(Error::InvalidParameter(
            "need at least one iteration".into(),
        ));
    }
    if !canonical.target.satisfies_constraints(initial_q) {
        return Err(Error::InvalidParameter(
            "initial position violates constraints".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let p0 = canonical.kinetic.sample_momentum(&mut rng);
    let mut state = PhaseState::new(initial_q.to_vec(), p0)?;
    let mut record = ChainRecord {
        dim: state.dim(),
        positions: Vec::with_capacity(n_iterations),
        delta_h: Vec::with_capacity(n_iterations),
        accepted: Vec::with_capacity(n_iterations),
        gradient_evals: Vec::with_capacity(n_iterations),
        divergences: 0,
    };
    let mut evals = 0u64;
    for _ in 0..n_iterations {
        let out = match kernel {
            KernelChoice::Hmc => hmc_iteration(&state, canonical, plan, &mut rng)?,
            KernelChoice::Rwm => rwm_iteration(&state, canonical, plan, &mut rng)?,
            KernelChoice::Langevin => langevin_iteration(&state, canonical, plan, &mut rng)?,
            KernelChoice::Ghmc => ghmc_iteration(&state, canonical, plan, &mut rng)?,
            KernelChoice::WindowedHmc => windowed_hmc_iteration(&state, canonical, plan, &mut rng)?,
            KernelChoice::TemperedHmc => tempered_hmc_iteration(&state, canonical, plan, &mut rng)?,
        };
        state = out.state;
        evals += out.gradient_evals;
        if out.diverged {
            record.divergences += 1;
        }
        record.positions.push(state.q.clone());
        record.delta_h.push(out.delta_h);
        record.accepted.push(out.accepted);
        record.gradient_evals.push(evals);
    }
    Ok(record)
}
