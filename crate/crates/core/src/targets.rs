//! Bundled experiment distributions and reparameterization utilities:
//! correlated Gaussians, the 100-D diagonal Gaussian, the bimodal mixture,
//! replicated product targets and linear transformations of targets.
//!
//! Potentials drop additive normalization constants where they are shared
//! across the whole distribution; the mixture keeps per-component
//! determinant terms because they affect the relative weighting.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::TargetDensity;

/// Multivariate Gaussian with precomputed precision matrix.
/// `U(q) = (q - mu)^T Sigma^{-1} (q - mu) / 2`.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    log_det_cov: f64,
}

impl GaussianTarget {
    pub fn new(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::ZeroDimension);
        }
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: covariance.nrows(),
            });
        }
        let asym = (&covariance - covariance.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(Error::InvalidParameter(
                "covariance must be symmetric".into(),
            ));
        }
        let chol = Cholesky::new(covariance).ok_or(Error::SingularMatrix("covariance"))?;
        let log_det_cov = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        Ok(Self {
            mean: DVector::from_vec(mean),
            precision: chol.inverse(),
            log_det_cov,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_det_cov(&self) -> f64 {
        self.log_det_cov
    }

    pub fn potential(&self, q: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(q) - &self.mean;
        0.5 * diff.dot(&(&self.precision * &diff))
    }

    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let diff = DVector::from_column_slice(q) - &self.mean;
        (&self.precision * diff).as_slice().to_vec()
    }

    pub fn into_target(self) -> TargetDensity {
        let dim = self.dim();
        let a = self.clone();
        let b = self;
        TargetDensity::new(dim, move |q| a.potential(q), move |q| b.gradient(q))
            .expect("dim validated at construction")
    }
}

/// Equal- or general-weight Gaussian mixture; potential is the negative log
/// of the weighted density sum, keeping per-component determinant terms.
#[derive(Debug, Clone)]
pub struct MixtureTarget {
    means: Vec<DVector<f64>>,
    precisions: Vec<DMatrix<f64>>,
    /// `ln w_k - ln|Sigma_k| / 2`
    log_norms: Vec<f64>,
}

impl MixtureTarget {
    pub fn new(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || covariances.len() != k {
            return Err(Error::InvalidParameter(
                "weights, means and covariances must have equal nonzero length".into(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("weights must sum to 1".into()));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        let mut precisions = Vec::with_capacity(k);
        let mut log_norms = Vec::with_capacity(k);
        for (m, cov) in means.iter().zip(&covariances) {
            if m.len() != dim || cov.nrows() != dim || cov.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.len(),
                });
            }
            let chol = Cholesky::new(cov.clone()).ok_or(Error::SingularMatrix("covariance"))?;
            let log_det = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
            precisions.push(chol.inverse());
            log_norms.push(-0.5 * log_det);
        }
        for (ln, w) in log_norms.iter_mut().zip(&weights) {
            *ln += w.ln();
        }
        Ok(Self {
            means: means.into_iter().map(DVector::from_vec).collect(),
            precisions,
            log_norms,
        })
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn component_count(&self) -> usize {
        self.means.len()
    }

    /// Per-component log terms `ln w_k - ln|Sigma_k|/2 - quad_k/2`.
    fn log_terms(&self, q: &[f64]) -> Vec<f64> {
        let qv = DVector::from_column_slice(q);
        self.means
            .iter()
            .zip(&self.precisions)
            .zip(&self.log_norms)
            .map(|((mu, prec), &ln)| {
                let diff = &qv - mu;
                ln - 0.5 * diff.dot(&(prec * &diff))
            })
            .collect()
    }

    pub fn potential(&self, q: &[f64]) -> f64 {
        let terms = self.log_terms(q);
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + terms.iter().map(|a| (a - m).exp()).sum::<f64>().ln();
        -lse
    }

    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let terms = self.log_terms(q);
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = terms.iter().map(|a| (a - m).exp()).sum();
        let qv = DVector::from_column_slice(q);
        let mut grad = DVector::zeros(self.dim());
        for ((mu, prec), &term) in self.means.iter().zip(&self.precisions).zip(&terms) {
            let r = (term - m).exp() / denom;
            grad += prec * (&qv - mu) * r;
        }
        grad.as_slice().to_vec()
    }

    /// Index of the component with the nearest mean in Euclidean distance;
    /// ties resolve to the lower index.
    pub fn classify(&self, q: &[f64]) -> usize {
        let qv = DVector::from_column_slice(q);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (k, mu) in self.means.iter().enumerate() {
            let d = (&qv - mu).norm_squared();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    pub fn into_target(self) -> TargetDensity {
        let dim = self.dim();
        let a = self.clone();
        let b = self;
        TargetDensity::new(dim, move |q| a.potential(q), move |q| b.gradient(q))
            .expect("dim validated at construction")
    }
}

/// Product of `d` independent copies of a one-dimensional potential.
#[derive(Clone)]
pub struct ReplicatedTarget {
    base_potential: std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    base_gradient: std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    count: usize,
}

impl ReplicatedTarget {
    pub fn new<U, G>(base_potential: U, base_gradient: G, count: usize) -> Result<Self>
    where
        U: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if count == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self {
            base_potential: std::sync::Arc::new(base_potential),
            base_gradient: std::sync::Arc::new(base_gradient),
            count,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn into_target(self) -> TargetDensity {
        let u = self.base_potential.clone();
        let g = self.base_gradient;
        let count = self.count;
        TargetDensity::new(
            count,
            move |q: &[f64]| q.iter().map(|&x| u(x)).sum(),
            move |q: &[f64]| q.iter().map(|&x| g(x)).collect(),
        )
        .expect("count validated at construction")
    }
}

/// `d` independent standard normal coordinates.
pub fn replicated_standard_normal(d: usize) -> Result<TargetDensity> {
    ReplicatedTarget::new(|x| 0.5 * x * x, |x| x, d).map(ReplicatedTarget::into_target)
}

/// Bivariate Gaussian with zero mean, unit marginals and correlation `rho`.
pub fn correlated_gaussian_2d(rho: f64) -> Result<TargetDensity> {
    if !(-1.0..=1.0).contains(&rho) || rho.abs() == 1.0 {
        return Err(Error::InvalidParameter(
            "correlation must lie strictly inside (-1, 1)".into(),
        ));
    }
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
    Ok(GaussianTarget::new(vec![0.0, 0.0], cov)?.into_target())
}

/// Marginal standard deviations of the 100-D diagonal Gaussian:
/// 0.01, 0.02, ..., 1.00.
pub fn gauss100d_sds() -> Vec<f64> {
    (1..=100).map(|i| i as f64 / 100.0).collect()
}

/// Diagonal zero-mean Gaussian with the given marginal standard deviations.
pub fn diagonal_gaussian(sds: Vec<f64>) -> Result<TargetDensity> {
    if sds.is_empty() {
        return Err(Error::ZeroDimension);
    }
    if sds.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidParameter(
            "standard deviations must be positive".into(),
        ));
    }
    let inv_var: Vec<f64> = sds.iter().map(|s| 1.0 / (s * s)).collect();
    let iv2 = inv_var.clone();
    TargetDensity::new(
        sds.len(),
        move |q: &[f64]| {
            q.iter()
                .zip(&inv_var)
                .map(|(&x, &iv)| 0.5 * x * x * iv)
                .sum()
        },
        move |q: &[f64]| q.iter().zip(&iv2).map(|(&x, &iv)| x * iv).collect(),
    )
}

/// The two-component bimodal mixture: equal weights, means (0,0) and
/// (10,10), covariances I and 2I.
pub fn mixture_fig9() -> MixtureTarget {
    MixtureTarget::new(
        vec![0.5, 0.5],
        vec![vec![0.0, 0.0], vec![10.0, 10.0]],
        vec![
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2) * 2.0,
        ],
    )
    .expect("static construction is valid")
}

/// The named experiment distributions exposed by the CLI.
pub fn make_figure_targets(name: &str) -> Result<TargetDensity> {
    match name {
        "gauss1d" => TargetDensity::new(1, |q: &[f64]| 0.5 * q[0] * q[0], |q: &[f64]| vec![q[0]]),
        "gauss2d_95" => correlated_gaussian_2d(0.95),
        "gauss2d_98" => correlated_gaussian_2d(0.98),
        "gauss100d" => diagonal_gaussian(gauss100d_sds()),
        "mixture_fig9" => Ok(mixture_fig9().into_target()),
        other => Err(Error::UnknownTarget(other.to_string())),
    }
}

/// All names accepted by [`make_figure_targets`].
pub const FIGURE_TARGET_NAMES: [&str; 5] = [
    "gauss1d",
    "gauss2d_95",
    "gauss2d_98",
    "gauss100d",
    "mixture_fig9",
];

/// Reparameterize by `q' = A q`: the new potential is `U(A^{-1} q')` with
/// gradient `(A^{-1})^T grad U(A^{-1} q')`.
pub fn apply_linear_transform(target: &TargetDensity, a: &DMatrix<f64>) -> Result<TargetDensity> {
    let d = target.dim();
    if a.nrows() != d || a.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: a.nrows(),
        });
    }
    let a_inv = a
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMatrix("transform matrix"))?;
    let a_inv_t = a_inv.transpose();
    let t1 = target.clone();
    let t2 = target.clone();
    let inv1 = a_inv.clone();
    TargetDensity::new(
        d,
        move |qp: &[f64]| {
            let q = &inv1 * DVector::from_column_slice(qp);
            t1.potential(q.as_slice())
        },
        move |qp: &[f64]| {
            let q = &a_inv * DVector::from_column_slice(qp);
            let g = DVector::from_vec(t2.gradient(q.as_slice()));
            (&a_inv_t * g).as_slice().to_vec()
        },
    )
}

/// Mass matrix matching the reparameterization `q' = A q`:
/// `M' = (A M^{-1} A^T)^{-1}`.
pub fn transformed_kinetic(m: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != a.nrows() || m.ncols() != a.ncols() || m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: a.nrows(),
        });
    }
    let m_inv = m
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMatrix("mass matrix"))?;
    (a * m_inv * a.transpose())
        .try_inverse()
        .ok_or(Error::SingularMatrix("transform matrix"))
}

/// Per-coordinate stepsizes `eps_i = s_i * eps`, to be used with unit
/// masses; equivalent to stepsize `eps` with masses `1 / s_i^2` and momenta
/// rescaled by `s_i`.
pub fn multiple_stepsize_plan(scales: &[f64], eps: f64) -> Result<Vec<f64>> {
    if scales.is_empty() {
        return Err(Error::ZeroDimension);
    }
    if scales.iter().any(|&s| !(s > 0.0)) || !(eps > 0.0) {
        return Err(Error::InvalidParameter(
            "scales and stepsize must be positive".into(),
        ));
    }
    Ok(scales.iter().map(|&s| s * eps).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::check_gradient;

    #[test]
    fn correlated_precision_by_hand() {
        // Sigma^{-1} = [[1, -rho], [-rho, 1]] / (1 - rho^2)
        let t = correlated_gaussian_2d(0.95).unwrap();
        let q = [1.0, 0.0];
        let u = t.potential(&q);
        let expect = 0.5 / (1.0 - 0.95 * 0.95);
        assert!((u - expect).abs() < 1e-12, "u {u} expect {expect}");
        let g = t.gradient(&[1.0, 1.0]);
        // grad = [ (1 - rho) / (1 - rho^2), same ] = 1 / (1 + rho)
        assert!((g[0] - 1.0 / 1.95).abs() < 1e-12);
        assert!((g[1] - 1.0 / 1.95).abs() < 1e-12);
    }

    #[test]
    fn correlation_bounds_checked() {
        assert!(correlated_gaussian_2d(1.0).is_err());
        assert!(correlated_gaussian_2d(-1.0).is_err());
        assert!(correlated_gaussian_2d(0.0).is_ok());
    }

    #[test]
    fn gauss100d_sds_values() {
        let sds = gauss100d_sds();
        assert_eq!(sds.len(), 100);
        assert!((sds[0] - 0.01).abs() < 1e-15);
        assert!((sds[99] - 1.0).abs() < 1e-15);
        let t = make_figure_targets("gauss100d").unwrap();
        let mut q = vec![0.0; 100];
        q[0] = 0.01;
        q[99] = 1.0;
        // 0.5 * (0.01/0.01)^2 + 0.5 * (1/1)^2 = 1
        assert!((t.potential(&q) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_target_rejected() {
        assert!(matches!(
            make_figure_targets("gauss3d"),
            Err(Error::UnknownTarget(_))
        ));
    }

    #[test]
    fn all_bundled_gradients_pass_check() {
        for name in FIGURE_TARGET_NAMES {
            let t = make_figure_targets(name).unwrap();
            let q: Vec<f64> = (0..t.dim()).map(|i| 0.3 + 0.01 * i as f64).collect();
            let d = check_gradient(&t, &q, 1e-5).unwrap();
            assert!(d < 1e-5, "{name}: discrepancy {d}");
        }
    }

    #[test]
    fn mixture_potential_at_modes() {
        let m = mixture_fig9();
        // At (0,0) the second component is ~e^{-50} of the first:
        // U ~= -ln(0.5) = ln 2.
        let u0 = m.potential(&[0.0, 0.0]);
        assert!((u0 - 2.0_f64.ln()).abs() < 1e-12, "u0 {u0}");
        // At (10,10) only the (w=0.5, |Sigma|=4) component matters:
        // U ~= -ln(0.5 / 2) = ln 4.
        let u1 = m.potential(&[10.0, 10.0]);
        assert!((u1 - 4.0_f64.ln()).abs() < 1e-12, "u1 {u1}");
    }

    #[test]
    fn mixture_gradient_matches_finite_difference() {
        let t = mixture_fig9().into_target();
        for q in [[0.0, 0.0], [5.0, 5.2], [10.0, 9.0], [-1.0, 2.0]] {
            let d = check_gradient(&t, &q, 1e-6).unwrap();
            assert!(d < 1e-6, "at {q:?}: discrepancy {d}");
        }
    }

    #[test]
    fn mixture_classifier_partitions() {
        let m = mixture_fig9();
        assert_eq!(m.classify(&[1.0, 1.0]), 0);
        assert_eq!(m.classify(&[9.0, 9.0]), 1);
        assert_eq!(m.classify(&[4.0, 4.0]), 0);
        assert_eq!(m.classify(&[6.0, 6.0]), 1);
        // Exact midpoint ties to the lower index.
        assert_eq!(m.classify(&[5.0, 5.0]), 0);
    }

    #[test]
    fn replicated_single_copy_equals_base() {
        let rep = ReplicatedTarget::new(|x| 0.5 * x * x, |x| x, 1)
            .unwrap()
            .into_target();
        let base = make_figure_targets("gauss1d").unwrap();
        for q in [-2.0, -0.3, 0.0, 1.7] {
            assert_eq!(rep.potential(&[q]), base.potential(&[q]));
            assert_eq!(rep.gradient(&[q]), base.gradient(&[q]));
        }
    }

    #[test]
    fn replicated_separable() {
        let rep = replicated_standard_normal(3).unwrap();
        let u = rep.potential(&[1.0, 2.0, 3.0]);
        assert!((u - 0.5 * (1.0 + 4.0 + 9.0)).abs() < 1e-12);
        assert_eq!(rep.gradient(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn identity_transform_pointwise_equal() {
        let t = correlated_gaussian_2d(0.98).unwrap();
        let id = DMatrix::identity(2, 2);
        let tt = apply_linear_transform(&t, &id).unwrap();
        for q in [[0.3, -0.2], [1.0, 1.1], [-2.0, -1.9]] {
            assert!((t.potential(&q) - tt.potential(&q)).abs() < 1e-14);
        }
    }

    #[test]
    fn transform_roundtrip_recovers_potential() {
        let t = correlated_gaussian_2d(0.95).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, -0.3, 1.5]);
        let forward = apply_linear_transform(&t, &a).unwrap();
        let back =
            apply_linear_transform(&forward, &a.clone().try_inverse().unwrap()).unwrap();
        for q in [[0.3, -0.2], [1.0, 1.1], [-2.0, -1.9]] {
            assert!(
                (t.potential(&q) - back.potential(&q)).abs() < 1e-10,
                "at {q:?}"
            );
            let g0 = t.gradient(&q);
            let g1 = back.gradient(&q);
            assert!((g0[0] - g1[0]).abs() < 1e-10);
            assert!((g0[1] - g1[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn cholesky_whitening_gives_unit_quadratic() {
        // A = L^{-1} for Sigma = L L^T turns the potential into q^T q / 2.
        let rho: f64 = 0.98;
        let t = correlated_gaussian_2d(rho).unwrap();
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let l = Cholesky::new(cov).unwrap().l().clone_owned();
        let a = l.try_inverse().unwrap();
        let white = apply_linear_transform(&t, &a).unwrap();
        for q in [[0.3, -0.2], [1.0, 1.1], [-2.0, -1.9]] {
            let expect = 0.5 * (q[0] * q[0] + q[1] * q[1]);
            assert!(
                (white.potential(&q) - expect).abs() < 1e-10,
                "at {q:?}: {} vs {expect}",
                white.potential(&q)
            );
        }
    }

    #[test]
    fn singular_transform_rejected() {
        let t = correlated_gaussian_2d(0.95).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            apply_linear_transform(&t, &a),
            Err(Error::SingularMatrix(_))
        ));
    }

    #[test]
    fn transformed_kinetic_identity() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.5]);
        let id = DMatrix::identity(2, 2);
        let mp = transformed_kinetic(&m, &id).unwrap();
        assert!((&mp - &m).abs().max() < 1e-12);
    }

    #[test]
    fn transformed_kinetic_orthogonal_preserves_scalar_mass() {
        let theta = 0.5_f64;
        let (s, c) = theta.sin_cos();
        let a = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let m = DMatrix::identity(2, 2) * 2.5;
        let mp = transformed_kinetic(&m, &a).unwrap();
        assert!((&mp - &m).abs().max() < 1e-12);
    }

    #[test]
    fn transformed_kinetic_diagonal_scaling() {
        let m = DMatrix::identity(2, 2);
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let mp = transformed_kinetic(&m, &a).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 1.0]);
        assert!((&mp - &expect).abs().max() < 1e-12);
    }

    #[test]
    fn stepsize_plan_scaling() {
        let plan = multiple_stepsize_plan(&[1.0, 1.0, 1.0], 0.2).unwrap();
        assert_eq!(plan, vec![0.2, 0.2, 0.2]);
        let plan = multiple_stepsize_plan(&[0.01, 1.0], 0.3).unwrap();
        assert!((plan[0] - 0.003).abs() < 1e-15);
        assert!((plan[1] - 0.3).abs() < 1e-15);
        assert!(multiple_stepsize_plan(&[0.0, 1.0], 0.3).is_err());
    }
}
