//! Discretizations of Hamiltonian dynamics: Euler variants, the leapfrog
//! method, split-Hamiltonian compositions, constraint-reflecting updates and
//! tempered trajectories.
//!
//! All trajectory integrators fuse the interior momentum half-steps, so a
//! trajectory of `L` leapfrog steps costs `L + 1` gradient evaluations.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Bounds, KineticSpec, PhaseState, TargetDensity};

/// A trajectory is declared divergent once the energy error passes this
/// threshold; HMC treats a divergent trajectory as a certain rejection.
pub const DIVERGENCE_GUARD: f64 = 1000.0;

const MAX_REFLECTIONS: usize = 1_000_000;

/// Result of a single integrator step.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub state: PhaseState,
    pub hamiltonian_value: f64,
    pub gradient_evals: u64,
}

/// Result of a multi-step trajectory.  The endpoint momentum is not negated;
/// samplers apply the negation when forming a Metropolis proposal.
#[derive(Debug, Clone)]
pub struct TrajectoryOutcome {
    pub end: PhaseState,
    pub delta_h: f64,
    pub gradient_evals: u64,
    pub diverged: bool,
}

/// Exact flow map for a tractable sub-Hamiltonian `U0(q) + K(p)`, applied
/// for a given time.
pub type AnalyticFlow = Arc<dyn Fn(&PhaseState, &KineticSpec, f64) -> PhaseState + Send + Sync>;

/// How to compose a split Hamiltonian into a trajectory.
#[derive(Clone)]
pub enum SplitScheme {
    /// `U1/2 , exact flow of U0 + K , U1/2` per step.  Requires
    /// `split_parts = [U0, U1]` on the target.
    AnalyticSubstep { solver: AnalyticFlow },
    /// `U1/2 , M inner leapfrog steps on U0 at stepsize eps/M , U1/2` per
    /// step.  Requires `split_parts = [U0, U1]`.
    NestedCheapExpensive { inner_count: usize },
    /// Sequence of `M` inner leapfrog steps with potentials `M * U_m` at
    /// stepsize `eps/M`.  The split is not symmetrical, so the subset order
    /// is drawn fresh for each trajectory when randomization is on.
    DataSubsets { randomize_order: bool },
}

fn finite_grad(g: &[f64]) -> Result<()> {
    if g.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("gradient"))
    }
}

/// One step of Euler's method: both updates use the state at the start of
/// the step.
pub fn euler_step(
    state: &PhaseState,
    target: &TargetDensity,
    kinetic: &KineticSpec,
    eps: f64,
) -> Result<StepReport> {
    if eps == 0.0 {
        return Err(Error::InvalidParameter("stepsize must be nonzero".into()));
    }
    let g = target.gradient(&state.q);
    finite_grad(&g)?;
    let v = kinetic.velocity(&state.p);
    let p: Vec<f64> = state.p.iter().zip(&g).map(|(&pi, &gi)| pi - eps * gi).collect();
    let q: Vec<f64> = state.q.iter().zip(&v).map(|(&qi, &vi)| qi + eps * vi).collect();
    let next = PhaseState { q, p };
    let h = target.potential(&next.q) + kinetic.energy(&next.p);
    Ok(StepReport {
        state: next,
        hamiltonian_value: h,
        gradient_evals: 1,
    })
}

/// Modified Euler: the position update uses the freshly updated momentum.
/// The composition of the two shears preserves volume exactly.
pub fn modified_euler_step(
    state: &PhaseState,
    target: &TargetDensity,
    kinetic: &KineticSpec,
    eps: f64,
) -> Result<StepReport> {
    if eps == 0.0 {
        return Err(Error::InvalidParameter("stepsize must be nonzero".into()));
    }
    let g = target.gradient(&state.q);
    finite_grad(&g)?;
    let p: Vec<f64> = state.p.iter().zip(&g).map(|(&pi, &gi)| pi - eps * gi).collect();
    let v = kinetic.velocity(&p);
    let q: Vec<f64> = state.q.iter().zip(&v).map(|(&qi, &vi)| qi + eps * vi).collect();
    let next = PhaseState { q, p };
    let h = target.potential(&next.q) + kinetic.energy(&next.p);
    Ok(StepReport {
        state: next,
        hamiltonian_value: h,
        gradient_evals: 1,
    })
}

/// One isolated leapfrog step in the textbook three-substep form:
/// half step for momentum, full step for position, half step for momentum.
pub fn leapfrog_step(
    state: &PhaseState,
    target: &TargetDensity,
    kinetic: &KineticSpec,
    eps: f64,
) -> Result<StepReport> {
    if eps == 0.0 {
        return Err(Error::InvalidParameter("stepsize must be nonzero".into()));
    }
    let g0 = target.gradient(&state.q);
    finite_grad(&g0)?;
    let p_half: Vec<f64> = state
        .p
        .iter()
        .zip(&g0)
        .map(|(&pi, &gi)| pi - 0.5 * eps * gi)
        .collect();
    let half = PhaseState {
        q: state.q.clone(),
        p: p_half,
    };
    let moved = constrained_position_update(&half, kinetic, eps, target.constraints())?;
    let g1 = target.gradient(&moved.q);
    finite_grad(&g1)?;
    let p: Vec<f64> = moved
        .p
        .iter()
        .zip(&g1)
        .map(|(&pi, &gi)| pi - 0.5 * eps * gi)
        .collect();
    let next = PhaseState { q: moved.q, p };
    let h = target.potential(&next.q) + kinetic.energy(&next.p);
    Ok(StepReport {
        state: next,
        hamiltonian_value: h,
        gradient_evals: 2,
    })
}

/// Full position step with reflection off the constraint walls.
///
/// Takes the state after the momentum half-step.  Each coordinate moves by
/// `eps * p_i / m_i` and is folded back into its box, negating the momentum
/// on every bounce; `|p_i|` is unchanged and the final position is feasible.
pub fn constrained_position_update(
    state_after_half_kick: &PhaseState,
    kinetic: &KineticSpec,
    eps: f64,
    constraints: Option<&[Bounds]>,
) -> Result<PhaseState> {
    let mut q = state_after_half_kick.q.clone();
    let mut p = state_after_half_kick.p.clone();
    let masses = kinetic.masses();
    for i in 0..q.len() {
        q[i] += eps * p[i] / masses[i];
        let Some(bounds) = constraints.map(|c| &c[i]) else {
            continue;
        };
        let mut iterations = 0usize;
        loop {
            if let Some(u) = bounds.upper {
                if q[i] > u {
                    q[i] = u - (q[i] - u);
                    p[i] = -p[i];
                    iterations += 1;
                    if iterations > MAX_REFLECTIONS {
                        return Err(Error::ReflectionOverflow(MAX_REFLECTIONS));
                    }
                    continue;
                }
            }
            if let Some(l) = bounds.lower {
                if q[i] < l {
                    q[i] = l + (l - q[i]);
                    p[i] = -p[i];
                    iterations += 1;
                    if iterations > MAX_REFLECTIONS {
                        return Err(Error::ReflectionOverflow(MAX_REFLECTIONS));
                    }
                    continue;
                }
            }
            break;
        }
    }
    Ok(PhaseState { q, p })
}

/// Incremental leapfrog stepper with fused momentum half-steps.
///
/// Holds the gradient at the current position so each `step` costs one new
/// gradient evaluation.  Used by the trajectory integrators and by windowed
/// HMC, which needs the state after every step.
pub struct LeapfrogStepper<'a> {
    target: &'a TargetDensity,
    kinetic: &'a KineticSpec,
    eps: f64,
    state: PhaseState,
    grad: Vec<f64>,
    gradient_evals: u64,
}

impl<'a> LeapfrogStepper<'a> {
    pub fn new(
        target: &'a TargetDensity,
        kinetic: &'a KineticSpec,
        eps: f64,
        state: PhaseState,
    ) -> Result<Self> {
        if eps == 0.0 {
            return Err(Error::InvalidParameter("stepsize must be nonzero".into()));
        }
        if state.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                got: state.dim(),
            });
        }
        let grad = (target.simulation_part().gradient)(&state.q);
        Ok(Self {
            target,
            kinetic,
            eps,
            state,
            grad,
            gradient_evals: 1,
        })
    }

    /// Like [`LeapfrogStepper::new`] but reusing an already-computed
    /// gradient of the simulated potential at `state.q`.
    pub fn with_gradient(
        target: &'a TargetDensity,
        kinetic: &'a KineticSpec,
        eps: f64,
        state: PhaseState,
        grad: Vec<f64>,
    ) -> Result<Self> {
        if eps == 0.0 {
            return Err(Error::InvalidParameter("stepsize must be nonzero".into()));
        }
        if state.dim() != target.dim() || grad.len() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                got: state.dim(),
            });
        }
        Ok(Self {
            target,
            kinetic,
            eps,
            state,
            grad,
            gradient_evals: 0,
        })
    }

    pub fn state(&self) -> &PhaseState {
        &self.state
    }

    /// Gradient of the simulated potential at the current position.
    pub fn gradient(&self) -> &[f64] {
        &self.grad
    }

    pub fn gradient_evals(&self) -> u64 {
        self.gradient_evals
    }

    /// Hamiltonian of the current state under the simulated (possibly
    /// surrogate) potential.
    pub fn sim_hamiltonian(&self) -> f64 {
        let u = match self.target.surrogate() {
            Some(s) => (s.potential)(&self.state.q),
            None => self.target.potential(&self.state.q),
        };
        u + self.kinetic.energy(&self.state.p)
    }

    /// Hamiltonian of the current state under the exact potential.
    pub fn exact_hamiltonian(&self) -> f64 {
        self.target.potential(&self.state.q) + self.kinetic.energy(&self.state.p)
    }

    /// Advance one leapfrog step (one gradient evaluation).
    pub fn step(&mut self) -> Result<()> {
        let eps = self.eps;
        let p_half: Vec<f64> = self
            .state
            .p
            .iter()
            .zip(&self.grad)
            .map(|(&pi, &gi)| pi - 0.5 * eps * gi)
            .collect();
        let half = PhaseState {
            q: std::mem::take(&mut self.state.q),
            p: p_half,
        };
        let moved =
            constrained_position_update(&half, self.kinetic, eps, self.target.constraints())?;
        self.grad = (self.target.simulation_part().gradient)(&moved.q);
        self.gradient_evals += 1;
        let p: Vec<f64> = moved
            .p
            .iter()
            .zip(&self.grad)
            .map(|(&pi, &gi)| pi - 0.5 * eps * gi)
            .collect();
        self.state = PhaseState { q: moved.q, p };
        Ok(())
    }
}

/// `L` fused leapfrog steps.  Returns the endpoint, the exact energy error
/// `H(end) - H(start)`, and the gradient evaluation count (`L + 1` unless
/// the divergence guard stops the trajectory early).
pub fn leapfrog_trajectory(
    state: &PhaseState,
    target: &TargetDensity,
    kinetic: &KineticSpec,
    eps: f64,
    steps: usize,
) -> Result<TrajectoryOutcome> {
    if steps == 0 {
        return Err(Error::InvalidParameter("need at least one step".into()));
    }
    let mut stepper = LeapfrogStepper::new(target, kinetic, eps, state.clone())?;
    let h0_exact = stepper.exact_hamiltonian();
    let h0_sim = stepper.sim_hamiltonian();
    for _ in 0..steps {
        stepper.step()?;
        let h = stepper.sim_hamiltonian();
        if !stepper.state().is_finite() || !h.is_finite() || (h - h0_sim).abs() > DIVERGENCE_GUARD {
            return Ok(TrajectoryOutcome {
                end: stepper.state.clone(),
                delta_h: f64::INFINITY,
                gradient_evals: stepper.gradient_evals,
                diverged: true,
            });
        }
    }
    let delta_h = stepper.exact_hamiltonian() - h0_exact;
    Ok(TrajectoryOutcome {
        end: stepper.state,
        delta_h,
        gradient_evals: stepper.gradient_evals,
        diverged: false,
    })
}

/// Like [`leapfrog_trajectory`] but records every state and its Hamiltonian,
/// starting with the initial state.  Used for figure output.
pub fn leapfrog_path(
    state: &PhaseState,
    target: &TargetDensity,
    kinetic: &KineticSpec,
    eps: f64,
    steps: usize,
) -> Result<Vec<(PhaseState, f64)>> {
    let mut stepper = LeapfrogStepper::new(target, kinetic, eps, state.clone())?;
    let mut path = Vec::with_capacity(steps + 1);
    path.push((stepper.state().clone(), stepper.exact_hamiltonian()));
    for _ in 0..steps {
        stepper.step()?;
        path.push((stepper.state().clone(), stepper.exact_hamiltonian()));
    }
    Ok(path)
}

/// Leapfrog with a different stepsize per coordinate and unit masses; the
/// rescaled-momentum equivalent of per-coordinate masses `1/s_i^2`.
pub fn leapfrog_trajectory_per_coord(
    state: &PhaseState,
    target: &TargetDensity,
    eps: &[f64],
    steps: usize,
) -> Result<TrajectoryOutcome> {
    if steps == 0 {
        return Err(Error::InvalidParameter("need at least one step".into()));
    }
    if eps.len() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: eps.len(),
        });
    }
    if eps.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidParameter("stepsizes must be positive".into()));
    }
    let unit = KineticSpec::unit(state.dim());
    let mut q = state.q.clone();
    let mut p = state.p.clone();
    let h0 = target.potential(&q) + unit.energy(&p);
    let mut grad = target.gradient(&q);
    let mut evals = 1u64;
    for _ in 0..steps {
        for i in 0..q.len() {
            p[i] -= 0.5 * eps[i] * grad[i];
            q[i] += eps[i] * p[i];
        }
        grad = target.gradient(&q);
        evals += 1;
        for i in 0..q.len() {
            p[i] -= 0.5 * eps[i] * grad[i];
        }
    }
    let end = PhaseState { q, p };
    let delta_h = target.potential(&end.q) + unit.energy(&end.p) - h0;
    Ok(TrajectoryOutcome {
        end,
        delta_h,
        gradient_evals: evals,
        diverged: false,
    })
}

/// Exact flow map for a per-coordinate Gaussian potential
/// `U0(q) = sum q_i^2 / (2 sigma_i^2)` together with the diagonal kinetic
/// energy: each `(q_i, p_i)` pair rotates with angular frequency
/// `1 / (sigma_i sqrt(m_i))`.
pub fn gaussian_flow(sigmas: Vec<f64>) -> AnalyticFlow {
    Arc::new(move |state: &PhaseState, kinetic: &KineticSpec, time: f64| {
        let masses = kinetic.masses();
        let mut q = Vec::with_capacity(state.dim());
        let mut p = Vec::with_capacity(state.dim());
        for i in 0..state.dim() {
            let omega = 1.0 / (sigmas[i] * masses[i].sqrt());
            let (s, c) = (omega * time).sin_cos();
            q.push(state.q[i] * c + state.p[i] / (masses[i] * omega) * s);
            p.push(state.p[i] * c - state.q[i] * masses[i] * omega * s);
        }
        PhaseState { q, p }
    })
}

/// Trajectory built from a split Hamiltonian.  Returns the count of
/// expensive gradient evaluations: `U1` gradients for the analytic and
/// nested schemes, per-subset gradients for the data-subset scheme.
pub fn split_trajectory<R: Rng + ?Sized>(
    state: &PhaseState,
    target: &TargetDensity,
    kinetic: &KineticSpec,
    eps: f64,
    steps: usize,
    scheme: &SplitScheme,
    rng: &mut R,
) -> Result<TrajectoryOutcome> {
    if steps == 0 {
        return Err(Error::InvalidParameter("need at least one step".into()));
    }
    if eps == 0.0 {
        return Err(Error::InvalidParameter("stepsize must be nonzero".into()));
    }
    let parts = target.split_parts().ok_or(Error::MissingSplitParts)?;
    let h0 = target.potential(&state.q) + kinetic.energy(&state.p);
    let mut current = state.clone();
    let mut expensive = 0u64;

    match scheme {
        SplitScheme::AnalyticSubstep { solver } => {
            if parts.len() != 2 {
                return Err(Error::InvalidParameter(
                    "analytic split needs exactly [U0, U1] parts".into(),
                ));
            }
            let residual = &parts[1];
            // Fused: gradient of U1 once per step plus one.
            let mut g = (residual.gradient)(&current.q);
            expensive += 1;
            for step in 0..steps {
                for i in 0..current.dim() {
                    current.p[i] -= 0.5 * eps * g[i];
                }
                current = solver(&current, kinetic, eps);
                g = (residual.gradient)(&current.q);
                expensive += 1;
                for i in 0..current.dim() {
                    current.p[i] -= 0.5 * eps * g[i];
                }
                let h = target.potential(&current.q) + kinetic.energy(&current.p);
                if !h.is_finite() || (h - h0).abs() > DIVERGENCE_GUARD {
                    return Ok(divergent(current, expensive, step));
                }
            }
        }
        SplitScheme::NestedCheapExpensive { inner_count } => {
            if parts.len() != 2 {
                return Err(Error::InvalidParameter(
                    "nested split needs exactly [U0, U1] parts".into(),
                ));
            }
            let m = *inner_count;
            if m == 0 {
                return Err(Error::InvalidParameter("inner_count must be >= 1".into()));
            }
            let cheap = &parts[0];
            let residual = &parts[1];
            let inner_eps = eps / m as f64;
            let masses = kinetic.masses();
            let mut g1 = (residual.gradient)(&current.q);
            expensive += 1;
            for step in 0..steps {
                for i in 0..current.dim() {
                    current.p[i] -= 0.5 * eps * g1[i];
                }
                // M fused inner leapfrog steps on U0.
                let mut g0 = (cheap.gradient)(&current.q);
                for _ in 0..m {
                    for i in 0..current.dim() {
                        current.p[i] -= 0.5 * inner_eps * g0[i];
                        current.q[i] += inner_eps * current.p[i] / masses[i];
                    }
                    g0 = (cheap.gradient)(&current.q);
                    for i in 0..current.dim() {
                        current.p[i] -= 0.5 * inner_eps * g0[i];
                    }
                }
                g1 = (residual.gradient)(&current.q);
                expensive += 1;
                for i in 0..current.dim() {
                    current.p[i] -= 0.5 * eps * g1[i];
                }
                let h = target.potential(&current.q) + kinetic.energy(&current.p);
                if !h.is_finite() || (h - h0).abs() > DIVERGENCE_GUARD {
                    return Ok(divergent(current, expensive, step));
                }
            }
        }
        SplitScheme::DataSubsets { randomize_order } => {
            let m = parts.len();
            if m == 0 {
                return Err(Error::MissingSplitParts);
            }
            let mut order: Vec<usize> = (0..m).collect();
            if *randomize_order {
                order.shuffle(rng);
            }
            let inner_eps = eps / m as f64;
            let scale = m as f64;
            let masses = kinetic.masses();
            for step in 0..steps {
                for &idx in &order {
                    let part = &parts[idx];
                    let g = (part.gradient)(&current.q);
                    expensive += 1;
                    for i in 0..current.dim() {
                        current.p[i] -= 0.5 * inner_eps * scale * g[i];
                        current.q[i] += inner_eps * current.p[i] / masses[i];
                    }
                    let g = (part.gradient)(&current.q);
                    expensive += 1;
                    for i in 0..current.dim() {
                        current.p[i] -= 0.5 * inner_eps * scale * g[i];
                    }
                }
                let h = target.potential(&current.q) + kinetic.energy(&current.p);
                if !h.is_finite() || (h - h0).abs() > DIVERGENCE_GUARD {
                    return Ok(divergent(current, expensive, step));
                }
            }
        }
    }

    let delta_h = target.potential(&current.q) + kinetic.energy(&current.p) - h0;
    Ok(TrajectoryOutcome {
        end: current,
        delta_h,
        gradient_evals: expensive,
        diverged: false,
    })
}

fn divergent(state: PhaseState, evals: u64, _step: usize) -> TrajectoryOutcome {
    TrajectoryOutcome {
        end: state,
        delta_h: f64::INFINITY,
        gradient_evals: evals,
        diverged: true,
    }
}

/// One recorded point of a tempered trajectory.
#[derive(Debug, Clone)]
pub struct TracePoint {
    pub h: f64,
    pub q: Vec<f64>,
}

/// Result of a tempered trajectory, including the per-step trace.
#[derive(Debug, Clone)]
pub struct TemperedOutcome {
    pub end: PhaseState,
    pub delta_h: f64,
    pub gradient_evals: u64,
    pub diverged: bool,
    pub trace: Vec<TracePoint>,
}

/// Leapfrog trajectory with momentum tempering: steps in the first half
/// multiply the momentum by `sqrt(alpha)` before the first half-kick and
/// after the second, steps in the second half divide symmetrically, and the
/// middle step of an odd-length trajectory multiplies before and divides
/// after.  Every multiplication is paired with a division, so the map has
/// unit Jacobian determinant.
pub fn tempered_trajectory(
    state: &PhaseState,
    target: &TargetDensity,
    kinetic: &KineticSpec,
    eps: f64,
    steps: usize,
    alpha: f64,
) -> Result<TemperedOutcome> {
    if steps == 0 {
        return Err(Error::InvalidParameter("need at least one step".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter("temper factor must be positive".into()));
    }
    let sqrt_alpha = alpha.sqrt();
    let masses = kinetic.masses();
    let mut q = state.q.clone();
    let mut p = state.p.clone();
    let h0 = target.potential(&q) + kinetic.energy(&p);
    let mut trace = Vec::with_capacity(steps + 1);
    trace.push(TracePoint { h: h0, q: q.clone() });
    let mut evals = 0u64;
    let first_half = |i: usize| i < steps.div_ceil(2);
    let second_half = |i: usize| i >= steps / 2;
    for step in 0..steps {
        let pre = if first_half(step) { sqrt_alpha } else { 1.0 / sqrt_alpha };
        let post = if second_half(step) { 1.0 / sqrt_alpha } else { sqrt_alpha };
        for pi in &mut p {
            *pi *= pre;
        }
        // eps == 0 is allowed here so the multiply/divide cancellation is
        // exercised directly; the kicks and drift are then identities.
        if eps != 0.0 {
            let g = target.gradient(&q);
            evals += 1;
            for i in 0..q.len() {
                p[i] -= 0.5 * eps * g[i];
                q[i] += eps * p[i] / masses[i];
            }
            let g = target.gradient(&q);
            evals += 1;
            for i in 0..q.len() {
                p[i] -= 0.5 * eps * g[i];
            }
        }
        for pi in &mut p {
            *pi *= post;
        }
        let h = target.potential(&q) + kinetic.energy(&p);
        trace.push(TracePoint { h, q: q.clone() });
        if !h.is_finite() || (h - h0).abs() > DIVERGENCE_GUARD {
            return Ok(TemperedOutcome {
                end: PhaseState { q, p },
                delta_h: f64::INFINITY,
                gradient_evals: evals,
                diverged: true,
                trace,
            });
        }
    }
    let end = PhaseState { q, p };
    let delta_h = trace.last().map(|t| t.h).unwrap_or(h0) - h0;
    Ok(TemperedOutcome {
        end,
        delta_h,
        gradient_evals: evals,
        diverged: false,
        trace,
    })
}

/// Eigenvalue magnitudes of the one-step leapfrog map for the Hamiltonian
/// `H = q^2/(2 sigma^2) + p^2/2`, returned in ascending order.  Both are 1
/// exactly when `eps < 2 sigma`.
pub fn stability_eigenvalues(sigma: f64, eps: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidParameter(
            "sigma and eps must be positive".into(),
        ));
    }
    let r = eps / sigma;
    let a = 1.0 - r * r / 2.0;
    let disc = r * r / 4.0 - 1.0;
    if disc <= 0.0 {
        // Complex pair on the unit circle.
        Ok((1.0, 1.0))
    } else {
        let b = r * disc.sqrt();
        let l1 = (a - b).abs();
        let l2 = (a + b).abs();
        Ok((l1.min(l2), l1.max(l2)))
    }
}
