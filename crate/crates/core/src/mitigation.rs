//! Error mitigation on top of noise amplification and leakage heralds.
//!
//! Two-point zero-noise extrapolation assumes the observable decays
//! exponentially with the amplification factor, `O(alpha) = O(0)
//! exp(-zeta alpha)`, where `zeta` is the total entangling error per
//! circuit. Splitting a shot budget between the base point and one
//! amplified point at factor `alpha` gives the relative-variance objective
//!
//! ```text
//! J(alpha, r) = (1+e)^2 exp(2 zeta) / r
//!             + kappa e^2 exp(2 zeta alpha) / (1-r),   e = 1/(alpha-1),
//! ```
//!
//! with `r` the base-point shot fraction and `kappa` the per-shot variance
//! ratio between the amplified and base circuits. Minimizing in closed form
//! gives `alpha* = (1 + gamma + zeta)/zeta` with
//! `gamma = W0(1/(e sqrt(kappa)))`, and the observable decays to the fixed
//! ratio `O(alpha*)/O(1) = exp(-(1+gamma))` independent of `zeta`.
//!
//! Zero-noise regression handles leakage instead: shots are binned by their
//! herald count `m` and the bin means are extrapolated to `m = 0` with a
//! saturating exponential, recovering the leakage-free signal without
//! discarding every heralded shot.

use rand::Rng;

use crate::error::Error;
use crate::fit::{fit_saturating_exponential, Fit};
use crate::real::{cst, Real};
use crate::rng::stream_rng;
use crate::sim::{Estimate, HeraldBin};
use crate::Result;

/// Principal branch of the Lambert W function for `x >= 0`, solved by
/// Halley iteration to the scalar's solver tolerance.
pub fn lambert_w0<T: Real>(x: T) -> Result<T> {
    if !(x >= T::zero()) {
        return Err(Error::config(format!(
            "lambert_w0 expects a non-negative argument, got {x}"
        )));
    }
    if x == T::zero() {
        return Ok(T::zero());
    }
    let e = T::one().exp();
    let mut w = if x > e {
        let lx = x.ln();
        lx - lx.ln()
    } else {
        x / (T::one() + x)
    };
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let denom = ew * (w + T::one())
            - (w + cst::<T>(2.0)) * f / (cst::<T>(2.0) * w + cst::<T>(2.0));
        let step = f / denom;
        w -= step;
        if step.abs() <= T::solver_tol() * w.abs().max(T::one()) {
            let residual = (w * w.exp() - x).abs();
            if residual <= T::solver_tol() * x.max(T::one()) {
                return Ok(w);
            }
        }
    }
    Err(Error::fit(format!("lambert_w0 failed to converge for {x}")))
}

/// Relative-variance objective for a two-point extrapolation at
/// amplification `alpha` with base-point shot fraction `r`.
pub fn variance_objective<T: Real>(alpha: T, r: T, kappa: T, zeta: T) -> T {
    let eps = T::one() / (alpha - T::one());
    let base = (T::one() + eps).powi(2) * (cst::<T>(2.0) * zeta).exp() / r;
    let amp = kappa * eps * eps * (cst::<T>(2.0) * zeta * alpha).exp() / (T::one() - r);
    base + amp
}

/// Shot fraction minimizing [`variance_objective`] at a fixed `alpha`.
pub fn optimal_split<T: Real>(alpha: T, kappa: T, zeta: T) -> T {
    let eps = T::one() / (alpha - T::one());
    let base = (T::one() + eps) * zeta.exp();
    let amp = kappa.sqrt() * eps * (zeta * alpha).exp();
    base / (base + amp)
}

/// Variance-optimal two-point extrapolation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZneParams<T> {
    /// Amplification factor for the second point.
    pub alpha: T,
    /// Fraction of the shot budget spent at the base point.
    pub r: T,
    /// `W0(1/(e sqrt(kappa)))`, the decay exponent `zeta (alpha - 1)` minus 1.
    pub gamma: T,
    /// Whether `alpha` was clamped to the cap before recomputing `r`.
    pub clamped: bool,
}

/// Minimize [`variance_objective`] in closed form. When the unconstrained
/// `alpha` exceeds `alpha_cap` it is clamped and `r` is re-optimized at the
/// cap.
pub fn optimal_zne_params<T: Real>(kappa: T, zeta: T, alpha_cap: T) -> Result<ZneParams<T>> {
    if !(kappa > T::zero()) || !(zeta > T::zero()) {
        return Err(Error::config(format!(
            "optimal_zne_params needs positive kappa and zeta, got {kappa} and {zeta}"
        )));
    }
    if !(alpha_cap > T::one()) {
        return Err(Error::config(format!(
            "amplification cap must exceed 1, got {alpha_cap}"
        )));
    }
    let e = T::one().exp();
    let gamma = lambert_w0(T::one() / (e * kappa.sqrt()))?;
    let mut alpha = (T::one() + gamma + zeta) / zeta;
    let clamped = alpha > alpha_cap;
    if clamped {
        alpha = alpha_cap;
    }
    let r = optimal_split(alpha, kappa, zeta);
    Ok(ZneParams {
        alpha,
        r,
        gamma,
        clamped,
    })
}

/// `O(alpha*)/O(1) = exp(-(1+gamma))` at the unconstrained optimum.
pub fn optimal_observable_ratio<T: Real>(kappa: T) -> Result<T> {
    let e = T::one().exp();
    let gamma = lambert_w0(T::one() / (e * kappa.sqrt()))?;
    Ok((-(T::one() + gamma)).exp())
}

/// Effective amplification when the learned channel under- or over-states
/// the real error rate by the factor `eta`: the planned extra error
/// `(alpha-1)` shrinks to `(alpha-1)/eta` relative to the true base noise.
pub fn rescale_alpha<T: Real>(alpha: T, eta: T) -> Result<T> {
    if !(eta > T::zero()) {
        return Err(Error::config(format!(
            "noise-strength ratio must be positive, got {eta}"
        )));
    }
    Ok((alpha - T::one()) / eta + T::one())
}

/// Spread of the effective amplification induced by the uncertainty of the
/// noise-strength ratio.
pub fn alpha_prime_uncertainty<T: Real>(alpha: T, eta: T, eta_sigma: T) -> T {
    (alpha - T::one()) * eta_sigma / (eta * eta)
}

/// Extrapolated zero-noise value with a propagated uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZneOutput<T> {
    pub value: T,
    pub sigma: T,
    /// Effective amplification the extrapolation used.
    pub alpha_effective: T,
}

fn extrapolate_once<T: Real>(o0: T, s0: T, o1: T, s1: T, alpha: T) -> (T, T) {
    let eps = T::one() / (alpha - T::one());
    let value = o0 * (o0 / o1).powf(eps);
    let d0 = (T::one() + eps) * value / o0;
    let d1 = eps * value / o1;
    let sigma = ((d0 * s0).powi(2) + (d1 * s1).powi(2)).sqrt();
    (value, sigma)
}

/// Two-point extrapolation `O(0) = O(1) (O(1)/O(alpha'))^{1/(alpha'-1)}`.
///
/// `delta_alpha` widens the error bar: the extrapolation is re-evaluated at
/// `alpha' +- delta_alpha` and the reported sigma is the worst case of the
/// propagated sigma plus the shift of the central value.
pub fn zne_extrapolate<T: Real>(
    base: &Estimate<T>,
    amplified: &Estimate<T>,
    alpha_prime: T,
    delta_alpha: T,
) -> Result<ZneOutput<T>> {
    if !(alpha_prime > T::one()) {
        return Err(Error::fit(format!(
            "effective amplification {alpha_prime} leaves nothing to extrapolate"
        )));
    }
    if base.mean == T::zero()
        || amplified.mean == T::zero()
        || (base.mean > T::zero()) != (amplified.mean > T::zero())
    {
        return Err(Error::fit(format!(
            "extrapolation needs same-sign nonzero observables, got {} and {}",
            base.mean, amplified.mean
        )));
    }
    let (value, sigma_center) = extrapolate_once(
        base.mean,
        base.stderr,
        amplified.mean,
        amplified.stderr,
        alpha_prime,
    );
    let mut sigma = sigma_center;
    if delta_alpha > T::zero() {
        for shifted in [alpha_prime - delta_alpha, alpha_prime + delta_alpha] {
            if shifted > T::one() {
                let (v, s) = extrapolate_once(
                    base.mean,
                    base.stderr,
                    amplified.mean,
                    amplified.stderr,
                    shifted,
                );
                sigma = sigma.max(s + (v - value).abs());
            }
        }
    }
    Ok(ZneOutput {
        value,
        sigma,
        alpha_effective: alpha_prime,
    })
}

/// Standard deviation of a statistic over bootstrap resamples of `values`.
pub fn bootstrap_sigma<T: Real>(
    values: &[T],
    resamples: usize,
    seed: u64,
    statistic: impl Fn(&[T]) -> T,
) -> T {
    if values.len() < 2 || resamples < 2 {
        return T::infinity();
    }
    let mut rng = stream_rng(seed, 0);
    let mut stats = Vec::with_capacity(resamples);
    let mut buffer = vec![T::zero(); values.len()];
    for _ in 0..resamples {
        for slot in buffer.iter_mut() {
            *slot = values[rng.gen_range(0..values.len())];
        }
        stats.push(statistic(&buffer));
    }
    let (_, spread) = crate::fit::mean_and_stderr(&stats);
    spread * cst::<T>(stats.len() as f64).sqrt()
}

/// How a zero-noise-regression value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZnrMethod {
    /// Full three-parameter `a exp(-b m) + c` fit over the herald bins.
    ExponentialFit,
    /// Too few usable bins: `c` pinned to the depolarized asymptote `1/n`.
    PinnedAsymptote,
    /// One usable bin, or the fit failed: mean of the smallest-`m` bin.
    SmallestBin,
    /// No bin had enough shots: mean pooled over everything.
    PooledMean,
}

/// Result of extrapolating herald-binned data to zero heralds.
#[derive(Debug, Clone)]
pub struct ZnrResult<T> {
    pub value: T,
    pub sigma: T,
    pub method: ZnrMethod,
    pub bins_used: usize,
    pub fit: Option<Fit<T>>,
}

/// Collect raw `(herald count, value)` observations into ascending bins.
pub fn bin_observations<T: Real>(pairs: &[(u32, T)]) -> Vec<HeraldBin<T>> {
    let max_m = pairs.iter().map(|&(m, _)| m).max().unwrap_or(0);
    let mut bins = Vec::new();
    for m in 0..=max_m {
        let values: Vec<T> = pairs
            .iter()
            .filter(|&&(pm, _)| pm == m)
            .map(|&(_, v)| v)
            .collect();
        if !values.is_empty() {
            bins.push(HeraldBin {
                m,
                estimate: Estimate::from_values(&values),
            });
        }
    }
    bins
}

/// Extrapolate herald-binned estimates to `m = 0`.
///
/// Bins with more than `min_bin_shots` samples enter a weighted
/// `a exp(-b m) + c` fit and the reported value is `a + c`. With fewer
/// than three usable bins the asymptote is pinned to `1/n_sites`; the
/// fallbacks degrade to the smallest-`m` bin mean and finally to the
/// pooled mean when nothing has enough statistics.
pub fn zero_noise_regression<T: Real>(
    bins: &[HeraldBin<T>],
    n_sites: usize,
    min_bin_shots: usize,
) -> Result<ZnrResult<T>> {
    if bins.is_empty() {
        return Err(Error::fit("zero-noise regression got no herald bins"));
    }
    let usable: Vec<&HeraldBin<T>> = bins
        .iter()
        .filter(|b| b.estimate.n > min_bin_shots)
        .collect();

    if usable.is_empty() {
        let mut weighted = T::zero();
        let mut total = T::zero();
        for b in bins {
            let w = cst::<T>(b.estimate.n as f64);
            weighted += b.estimate.mean * w;
            total += w;
        }
        let var: T = bins
            .iter()
            .map(|b| {
                let w = cst::<T>(b.estimate.n as f64);
                (w / total).powi(2) * b.estimate.stderr.powi(2)
            })
            .sum();
        return Ok(ZnrResult {
            value: weighted / total,
            sigma: var.sqrt(),
            method: ZnrMethod::PooledMean,
            bins_used: bins.len(),
            fit: None,
        });
    }

    let smallest = ZnrResult {
        value: usable[0].estimate.mean,
        sigma: usable[0].estimate.stderr,
        method: ZnrMethod::SmallestBin,
        bins_used: 1,
        fit: None,
    };
    if usable.len() == 1 {
        return Ok(smallest);
    }

    let ms: Vec<T> = usable.iter().map(|b| cst::<T>(b.m as f64)).collect();
    let ys: Vec<T> = usable.iter().map(|b| b.estimate.mean).collect();
    let sigmas: Vec<T> = usable.iter().map(|b| b.estimate.stderr).collect();

    if usable.len() < 3 {
        let c = T::one() / cst::<T>(n_sites as f64);
        if let Some(fit) = fit_saturating_exponential(&ms, &ys, Some(&sigmas), Some(c)) {
            let value = fit.params[0] + c;
            let sigma = fit.sigma(0);
            if sigma.is_finite() {
                return Ok(ZnrResult {
                    value,
                    sigma,
                    method: ZnrMethod::PinnedAsymptote,
                    bins_used: usable.len(),
                    fit: Some(fit),
                });
            }
        }
        return Ok(smallest);
    }

    if let Some(fit) = fit_saturating_exponential(&ms, &ys, Some(&sigmas), None) {
        let value = fit.params[0] + fit.params[2];
        let var = fit.cov(0, 0) + fit.cov(2, 2) + cst::<T>(2.0) * fit.cov(0, 2);
        if var.is_finite() && var >= T::zero() {
            return Ok(ZnrResult {
                value,
                sigma: var.sqrt(),
                method: ZnrMethod::ExponentialFit,
                bins_used: usable.len(),
                fit: Some(fit),
            });
        }
    }
    Ok(smallest)
}
