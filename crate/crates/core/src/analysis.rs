//! Acceptance-rate scaling theory and chain diagnostics: the a(mu) curve,
//! cost-optimal acceptance rates per method, integrated autocorrelation
//! times and energy-error moment checks.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::samplers::ChainRecord;

/// Method selector for the cost-scaling calculations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingMethod {
    Rwm,
    Hmc,
    Lmc,
}

impl ScalingMethod {
    /// Cost exponent: the per-sample cost is proportional to
    /// `1 / (a(mu) mu^power)`.
    fn mu_power(self) -> f64 {
        match self {
            ScalingMethod::Rwm => 1.0,
            ScalingMethod::Hmc => 0.25,
            ScalingMethod::Lmc => 1.0 / 3.0,
        }
    }
}

/// Scaling summary at a given mean energy error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingResult {
    pub mu: f64,
    pub acceptance: f64,
    pub cost: f64,
    pub method: ScalingMethod,
}

/// Acceptance probability as a function of the mean energy error:
/// `a(mu) = 2 Phi(-sqrt(mu / 2)) = erfc(sqrt(mu) / 2)`.
pub fn acceptance_from_mu(mu: f64) -> Result<f64> {
    if !(mu >= 0.0) {
        return Err(Error::InvalidParameter(
            "mean energy error must be nonnegative".into(),
        ));
    }
    Ok(erfc(mu.sqrt() / 2.0))
}

/// Relative cost per independent sample at mean energy error `mu`.
pub fn scaling_cost(method: ScalingMethod, mu: f64) -> Result<ScalingResult> {
    let acceptance = acceptance_from_mu(mu)?;
    let cost = 1.0 / (acceptance * mu.powf(method.mu_power()));
    Ok(ScalingResult {
        mu,
        acceptance,
        cost,
        method,
    })
}

/// Minimize a unimodal function on `[a, b]` by golden-section search.
fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Cost-minimizing mean energy error and the acceptance rate there.
/// Minimization is over `log mu` on `[-10, 5]` with tolerance 1e-6.
pub fn optimal_acceptance(method: ScalingMethod) -> ScalingResult {
    let log_mu = golden_section(
        |lm| {
            let mu = lm.exp();
            scaling_cost(method, mu).map(|r| r.cost).unwrap_or(f64::INFINITY)
        },
        -10.0,
        5.0,
        1e-6,
    );
    scaling_cost(method, log_mu.exp()).expect("mu > 0 on the search interval")
}

/// Integrated autocorrelation time `tau = 1 + 2 sum rho_k`, truncated at
/// the first lag pair whose summed autocorrelation is non-positive
/// (initial-positive-sequence rule).
pub fn integrated_autocorrelation(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 100 {
        return Err(Error::SeriesTooShort { need: 100, got: n });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return Err(Error::ConstantSeries);
    }
    let rho = |k: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..n - k {
            acc += (series[i] - mean) * (series[i + k] - mean);
        }
        acc / (n as f64 * var)
    };
    let mut tau = 1.0;
    let max_pair = n / 2 - 1;
    let mut m = 0;
    while m < max_pair {
        let pair = rho(2 * m + 1) + rho(2 * m + 2);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    Ok(tau)
}

/// Mean and variance of the energy error over all finite proposals.
/// Divergent proposals (infinite error) are excluded from the moments.
pub fn empirical_delta_stats(chain: &ChainRecord) -> Result<(f64, f64)> {
    let finite: Vec<f64> = chain
        .delta_h
        .iter()
        .copied()
        .filter(|d| d.is_finite())
        .collect();
    if finite.is_empty() {
        return Err(Error::EmptyChain);
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let var = finite.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var))
}

/// Sample mean of `exp(-delta_H)` over all proposals; 1 in equilibrium.
/// Divergent proposals contribute 0, consistent with their certain
/// rejection.
pub fn mean_exp_neg_delta(chain: &ChainRecord) -> Result<f64> {
    if chain.delta_h.is_empty() {
        return Err(Error::EmptyChain);
    }
    let n = chain.delta_h.len() as f64;
    Ok(chain.delta_h.iter().map(|d| (-d).exp()).sum::<f64>() / n)
}

/// Summary statistics of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub rejection_rate: f64,
    /// Integrated autocorrelation time per coordinate.
    pub tau: Vec<f64>,
    /// Effective sample size `N / tau` per coordinate.
    pub ess: Vec<f64>,
    pub total_gradient_evals: u64,
    pub divergences: u64,
}

/// Compute all diagnostics for a chain.  Errors on an empty chain or one
/// whose coordinates are constant (autocorrelation undefined).
pub fn summarize(chain: &ChainRecord) -> Result<DiagnosticsReport> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    let n = chain.len() as f64;
    let mut means = Vec::with_capacity(chain.dim);
    let mut sds = Vec::with_capacity(chain.dim);
    let mut tau = Vec::with_capacity(chain.dim);
    let mut ess = Vec::with_capacity(chain.dim);
    for i in 0..chain.dim {
        let xs = chain.coordinate(i);
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let t = integrated_autocorrelation(&xs)?;
        means.push(mean);
        sds.push(var.sqrt());
        ess.push(n / t.max(1.0));
        tau.push(t);
    }
    Ok(DiagnosticsReport {
        means,
        sds,
        rejection_rate: chain.rejection_rate(),
        tau,
        ess,
        total_gradient_evals: chain.total_gradient_evals(),
        divergences: chain.divergences,
    })
}
