//! Core vocabulary: phase states, target densities, kinetic energies and
//! the Hamiltonian they define.
//!
//! A target density supplies the potential energy `U(q)` (minus the log
//! density of the distribution of interest, up to a constant) together with
//! its gradient.  A kinetic energy `K(p) = sum p_i^2 / 2 m_i` defines the
//! auxiliary momentum distribution.  The Hamiltonian is `H(q,p) = U(q) + K(p)`.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Paired position and momentum vectors of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                got: p.len(),
            });
        }
        Ok(Self { q, p })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// True when every entry of both vectors is finite.
    pub fn is_finite(&self) -> bool {
        self.q.iter().all(|x| x.is_finite()) && self.p.iter().all(|x| x.is_finite())
    }

    pub fn negate_momentum(&mut self) {
        for pi in &mut self.p {
            *pi = -*pi;
        }
    }

    pub fn with_negated_momentum(&self) -> Self {
        let mut s = self.clone();
        s.negate_momentum();
        s
    }
}

/// Optional per-coordinate box bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Bounds {
    pub fn contains(&self, x: f64) -> bool {
        self.lower.map_or(true, |l| x >= l) && self.upper.map_or(true, |u| x <= u)
    }
}

pub type PotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A potential energy term together with its gradient.
#[derive(Clone)]
pub struct PotentialPart {
    pub potential: PotentialFn,
    pub gradient: GradientFn,
}

impl PotentialPart {
    pub fn new<U, G>(potential: U, gradient: G) -> Self
    where
        U: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            potential: Arc::new(potential),
            gradient: Arc::new(gradient),
        }
    }
}

/// The distribution to sample, expressed through its potential energy.
///
/// Gradients are supplied analytically; finite differences are used only to
/// verify them (see [`check_gradient`]).  Points violating the box
/// constraints have infinite potential energy.
#[derive(Clone)]
pub struct TargetDensity {
    dim: usize,
    full: PotentialPart,
    constraints: Option<Vec<Bounds>>,
    split_parts: Option<Vec<PotentialPart>>,
    surrogate: Option<PotentialPart>,
}

impl TargetDensity {
    pub fn new<U, G>(dim: usize, potential: U, gradient: G) -> Result<Self>
    where
        U: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self {
            dim,
            full: PotentialPart::new(potential, gradient),
            constraints: None,
            split_parts: None,
            surrogate: None,
        })
    }

    pub fn with_constraints(mut self, constraints: Vec<Bounds>) -> Result<Self> {
        if constraints.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: constraints.len(),
            });
        }
        for (i, b) in constraints.iter().enumerate() {
            if let (Some(l), Some(u)) = (b.lower, b.upper) {
                if l >= u {
                    return Err(Error::InvalidBounds(i));
                }
            }
        }
        self.constraints = Some(constraints);
        Ok(self)
    }

    /// Attach an ordered additive split of the potential.  The parts must
    /// sum to the full potential.
    pub fn with_split_parts(mut self, parts: Vec<PotentialPart>) -> Self {
        self.split_parts = Some(parts);
        self
    }

    /// Attach a cheaper approximate potential used only for simulating
    /// trajectories; acceptance always uses the exact potential.
    pub fn with_surrogate(mut self, surrogate: PotentialPart) -> Self {
        self.surrogate = Some(surrogate);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraints(&self) -> Option<&[Bounds]> {
        self.constraints.as_deref()
    }

    pub fn split_parts(&self) -> Option<&[PotentialPart]> {
        self.split_parts.as_deref()
    }

    pub fn surrogate(&self) -> Option<&PotentialPart> {
        self.surrogate.as_ref()
    }

    pub fn satisfies_constraints(&self, q: &[f64]) -> bool {
        match &self.constraints {
            None => true,
            Some(bounds) => q.iter().zip(bounds).all(|(&x, b)| b.contains(x)),
        }
    }

    /// Potential energy at `q`; infinite outside the constraint box.
    pub fn potential(&self, q: &[f64]) -> f64 {
        if !self.satisfies_constraints(q) {
            return f64::INFINITY;
        }
        (self.full.potential)(q)
    }

    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        (self.full.gradient)(q)
    }

    /// The part used when simulating dynamics: the surrogate when present,
    /// otherwise the exact potential.
    pub fn simulation_part(&self) -> &PotentialPart {
        self.surrogate.as_ref().unwrap_or(&self.full)
    }
}

/// Diagonal mass matrix defining `K(p) = sum p_i^2 / 2 m_i` and the Gaussian
/// momentum distribution with per-coordinate variance `m_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticSpec {
    masses: Vec<f64>,
}

impl KineticSpec {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if masses.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidParameter("masses must be positive".into()));
        }
        Ok(Self { masses })
    }

    /// Unit masses in `dim` dimensions: `K(p) = p^T p / 2`.
    pub fn unit(dim: usize) -> Self {
        Self {
            masses: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn energy(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(&self.masses)
            .map(|(&pi, &mi)| pi * pi / (2.0 * mi))
            .sum()
    }

    /// dq/dt under this kinetic energy: `p_i / m_i`.
    pub fn velocity(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.masses).map(|(&pi, &mi)| pi / mi).collect()
    }

    /// Draws `p` with independent coordinates `p_i ~ Normal(0, m_i)`.
    pub fn sample_momentum<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.masses
            .iter()
            .map(|&mi| {
                let n: f64 = rng.sample(StandardNormal);
                n * mi.sqrt()
            })
            .collect()
    }
}

/// Joint canonical distribution `P(q,p) ∝ exp(-H(q,p)/T)`.
///
/// All samplers fix `T = 1`; the field exists so the canonical form stays
/// representable.
#[derive(Clone)]
pub struct CanonicalDensity {
    pub target: Arc<TargetDensity>,
    pub kinetic: Arc<KineticSpec>,
    pub temperature: f64,
}

impl CanonicalDensity {
    pub fn new(target: TargetDensity, kinetic: KineticSpec) -> Result<Self> {
        if target.dim() != kinetic.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                got: kinetic.dim(),
            });
        }
        Ok(Self {
            target: Arc::new(target),
            kinetic: Arc::new(kinetic),
            temperature: 1.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// Joint log density up to an additive constant.
    pub fn log_density(&self, state: &PhaseState) -> f64 {
        -(self.target.potential(&state.q) + self.kinetic.energy(&state.p)) / self.temperature
    }
}

/// Total energy `H(q,p) = U(q) + K(p)`.
pub fn hamiltonian(state: &PhaseState, target: &TargetDensity, kinetic: &KineticSpec) -> Result<f64> {
    if state.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: state.dim(),
        });
    }
    Ok(target.potential(&state.q) + kinetic.energy(&state.p))
}

/// Maximum relative discrepancy between the analytic gradient and a central
/// finite difference of the potential, over all coordinates.
///
/// Relative scale is `1 + |analytic|` so the measure stays meaningful near
/// zero gradient.
pub fn check_gradient(target: &TargetDensity, q: &[f64], h: f64) -> Result<f64> {
    if q.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: q.len(),
        });
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("step h must be positive".into()));
    }
    let analytic = target.gradient(q);
    let mut worst = 0.0_f64;
    let mut probe = q.to_vec();
    for i in 0..q.len() {
        probe[i] = q[i] + h;
        let up = target.potential(&probe);
        probe[i] = q[i] - h;
        let down = target.potential(&probe);
        probe[i] = q[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite("potential at finite-difference probe"));
        }
        let numeric = (up - down) / (2.0 * h);
        let rel = (analytic[i] - numeric).abs() / (1.0 + analytic[i].abs());
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn standard_1d() -> TargetDensity {
        TargetDensity::new(1, |q| 0.5 * q[0] * q[0], |q| vec![q[0]]).unwrap()
    }

    #[test]
    fn hamiltonian_unit_kinetic() {
        let target = standard_1d();
        let kinetic = KineticSpec::unit(1);
        let s = PhaseState::new(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(hamiltonian(&s, &target, &kinetic).unwrap(), 0.5);
        let z = PhaseState::new(vec![0.0], vec![0.0]).unwrap();
        assert_eq!(hamiltonian(&z, &target, &kinetic).unwrap(), 0.0);
    }

    #[test]
    fn hamiltonian_correlated_2d() {
        // rho = 0.95 bivariate Gaussian; value by direct evaluation of the
        // quadratic form q^T Sigma^{-1} q / 2 + p^T p / 2.
        let target = crate::targets::correlated_gaussian_2d(0.95).unwrap();
        let kinetic = KineticSpec::unit(2);
        let s = PhaseState::new(vec![-1.50, -1.55], vec![-1.0, 1.0]).unwrap();
        let h = hamiltonian(&s, &target, &kinetic).unwrap();
        // (q1^2 - 2*0.95*q1*q2 + q2^2) / (1 - 0.95^2) / 2 + 1
        let expect = (2.25 - 1.9 * 1.5 * 1.55 + 1.55 * 1.55) / 0.0975 / 2.0 + 1.0;
        assert!((h - expect).abs() < 1e-12, "h = {h}, expect = {expect}");
    }

    #[test]
    fn hamiltonian_dimension_mismatch() {
        let target = standard_1d();
        let kinetic = KineticSpec::unit(2);
        let s = PhaseState::new(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        assert!(hamiltonian(&s, &target, &kinetic).is_err());
    }

    #[test]
    fn momentum_negation_invariance() {
        let target = standard_1d();
        let kinetic = KineticSpec::new(vec![2.5]).unwrap();
        let s = PhaseState::new(vec![0.7], vec![1.3]).unwrap();
        let flipped = s.with_negated_momentum();
        assert_eq!(
            hamiltonian(&s, &target, &kinetic).unwrap(),
            hamiltonian(&flipped, &target, &kinetic).unwrap()
        );
    }

    #[test]
    fn sample_momentum_moments() {
        let kinetic = KineticSpec::new(vec![1.0, 1.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut sum = [0.0; 3];
        let mut sumsq = [0.0; 3];
        for _ in 0..n {
            let p = kinetic.sample_momentum(&mut rng);
            for i in 0..3 {
                sum[i] += p[i];
                sumsq[i] += p[i] * p[i];
            }
        }
        for i in 0..3 {
            let mean = sum[i] / n as f64;
            let var = sumsq[i] / n as f64 - mean * mean;
            assert!(mean.abs() < 0.02, "mean[{i}] = {mean}");
            assert!((var - 1.0).abs() < 0.05, "var[{i}] = {var}");
        }
    }

    #[test]
    fn sample_momentum_heavy_mass() {
        let kinetic = KineticSpec::new(vec![4.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let p = kinetic.sample_momentum(&mut rng);
            sumsq += p[0] * p[0];
        }
        let var = sumsq / n as f64;
        assert!((var - 4.0).abs() < 0.2, "var = {var}");
    }

    #[test]
    fn zero_dimensional_kinetic_rejected() {
        assert!(KineticSpec::new(vec![]).is_err());
    }

    #[test]
    fn check_gradient_quadratic() {
        let target = standard_1d();
        let d = check_gradient(&target, &[1.3], 1e-5).unwrap();
        assert!(d < 1e-8, "discrepancy {d}");
    }

    #[test]
    fn check_gradient_constant_potential() {
        let target = TargetDensity::new(2, |_| 3.0, |_| vec![0.0, 0.0]).unwrap();
        let d = check_gradient(&target, &[0.4, -0.2], 1e-5).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn check_gradient_100d_gaussian() {
        let target = crate::targets::make_figure_targets("gauss100d").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q: Vec<f64> = (0..100)
            .map(|i| {
                let n: f64 = rng.sample(rand_distr::StandardNormal);
                n * 0.01 * (i as f64 + 1.0)
            })
            .collect();
        let d = check_gradient(&target, &q, 1e-6).unwrap();
        assert!(d < 1e-6, "discrepancy {d}");
    }

    #[test]
    fn constraint_violation_gives_infinite_potential() {
        let target = standard_1d()
            .with_constraints(vec![Bounds {
                lower: Some(0.0),
                upper: Some(1.0),
            }])
            .unwrap();
        assert!(target.potential(&[0.5]).is_finite());
        assert_eq!(target.potential(&[1.5]), f64::INFINITY);
    }
}
