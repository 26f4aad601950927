//! Weighted least-squares fitting.
//!
//! A small Levenberg-Marquardt driver with a numerically differenced
//! Jacobian, plus closed-form weighted linear fits. All routines minimize
//! `sum_i ((y_i - f(p, x_i)) / sigma_i)^2`; omitted sigmas mean unit weights.

use crate::error::Error;
use crate::real::{cst, Real};
use crate::Result;

/// Outcome of a nonlinear fit.
#[derive(Debug, Clone)]
pub struct Fit<T> {
    /// Best-fit parameters.
    pub params: Vec<T>,
    /// Covariance matrix in row-major order, `None` when the normal
    /// equations were singular at the solution.
    pub covariance: Option<Vec<T>>,
    /// Weighted residual sum of squares at the solution.
    pub chi2: T,
    /// Number of data points.
    pub n_points: usize,
    /// Whether the step sequence converged before the iteration cap.
    pub converged: bool,
}

impl<T: Real> Fit<T> {
    /// One-sigma uncertainty of parameter `k`; infinite when the covariance
    /// is unavailable or the diagonal entry is negative.
    pub fn sigma(&self, k: usize) -> T {
        let dim = self.params.len();
        match &self.covariance {
            Some(cov) => {
                let v = cov[k * dim + k];
                if v >= T::zero() {
                    v.sqrt()
                } else {
                    T::infinity()
                }
            }
            None => T::infinity(),
        }
    }

    /// Covariance entry `(i, j)`; infinite when unavailable.
    pub fn cov(&self, i: usize, j: usize) -> T {
        match &self.covariance {
            Some(cov) => cov[i * self.params.len() + j],
            None => T::infinity(),
        }
    }
}

/// Options for [`fit_least_squares`].
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop when the relative chi-square improvement drops below this.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 2000,
            tolerance: 1e-9,
        }
    }
}

/// Levenberg-Marquardt minimization of the weighted residual sum.
///
/// `model(params, x)` evaluates the fit function. Returns an error when the
/// inputs are inconsistent or no step ever improves chi-square from a
/// diverged state.
pub fn fit_least_squares<T: Real>(
    model: impl Fn(&[T], T) -> T,
    xs: &[T],
    ys: &[T],
    sigmas: Option<&[T]>,
    p0: &[T],
    opts: &FitOptions,
) -> Result<Fit<T>> {
    let n = xs.len();
    let k = p0.len();
    if n != ys.len() || sigmas.map_or(false, |s| s.len() != n) {
        return Err(Error::fit("data arrays disagree in length"));
    }
    if k == 0 || n < k {
        return Err(Error::fit(format!(
            "{n} points cannot constrain {k} parameters"
        )));
    }
    let weight = |i: usize| -> T {
        match sigmas {
            Some(s) => {
                let s = s[i].abs().max(T::min_positive_value().sqrt());
                T::one() / s
            }
            None => T::one(),
        }
    };

    let chi2_of = |p: &[T]| -> T {
        (0..n)
            .map(|i| {
                let r = (ys[i] - model(p, xs[i])) * weight(i);
                r * r
            })
            .sum()
    };

    let mut params = p0.to_vec();
    let mut chi2 = chi2_of(&params);
    if !chi2.is_finite() {
        return Err(Error::fit("initial parameters give non-finite residuals"));
    }
    let mut lambda = cst::<T>(1e-3);
    let mut converged = false;

    for _ in 0..opts.max_iterations {
        // Weighted residuals and a central-difference Jacobian.
        let mut jac = vec![T::zero(); n * k];
        let mut res = vec![T::zero(); n];
        for i in 0..n {
            res[i] = (ys[i] - model(&params, xs[i])) * weight(i);
        }
        for j in 0..k {
            let scale = params[j].abs().max(T::one());
            let h = scale * cst::<T>(1e-7);
            let mut plus = params.clone();
            plus[j] += h;
            let mut minus = params.clone();
            minus[j] -= h;
            for i in 0..n {
                let d = (model(&plus, xs[i]) - model(&minus, xs[i]))
                    / (cst::<T>(2.0) * h);
                jac[i * k + j] = d * weight(i);
            }
        }

        let mut jtj = vec![T::zero(); k * k];
        let mut jtr = vec![T::zero(); k];
        for i in 0..n {
            for a in 0..k {
                jtr[a] += jac[i * k + a] * res[i];
                for b in 0..k {
                    jtj[a * k + b] += jac[i * k + a] * jac[i * k + b];
                }
            }
        }

        let mut improved = false;
        for _ in 0..24 {
            let mut damped = jtj.clone();
            for a in 0..k {
                let d = jtj[a * k + a];
                damped[a * k + a] = d + lambda * d.max(T::min_positive_value());
            }
            if let Some(step) = solve(&damped, &jtr, k) {
                let trial: Vec<T> = params
                    .iter()
                    .zip(&step)
                    .map(|(&p, &d)| p + d)
                    .collect();
                let trial_chi2 = chi2_of(&trial);
                if trial_chi2.is_finite() && trial_chi2 <= chi2 {
                    let gain = chi2 - trial_chi2;
                    params = trial;
                    chi2 = trial_chi2;
                    lambda = (lambda / cst::<T>(3.0))
                        .max(cst::<T>(1e-12));
                    improved = true;
                    if gain <= cst::<T>(opts.tolerance) * chi2.max(T::one()) {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= cst::<T>(10.0);
            if lambda > cst::<T>(1e12) {
                break;
            }
        }
        if converged || !improved {
            if !improved {
                converged = true;
            }
            break;
        }
    }

    // Covariance from the undamped normal equations at the solution.
    let mut jac = vec![T::zero(); n * k];
    for j in 0..k {
        let scale = params[j].abs().max(T::one());
        let h = scale * cst::<T>(1e-7);
        let mut plus = params.clone();
        plus[j] += h;
        let mut minus = params.clone();
        minus[j] -= h;
        for i in 0..n {
            jac[i * k + j] = (model(&plus, xs[i]) - model(&minus, xs[i]))
                / (cst::<T>(2.0) * h)
                * weight(i);
        }
    }
    let mut normal = vec![T::zero(); k * k];
    for i in 0..n {
        for a in 0..k {
            for b in 0..k {
                normal[a * k + b] += jac[i * k + a] * jac[i * k + b];
            }
        }
    }
    let covariance = invert(&normal, k);

    Ok(Fit {
        params,
        covariance,
        chi2,
        n_points: n,
        converged,
    })
}

/// Best converged multistart fit of `a exp(-b x) + c`, scanning decay-rate
/// starting points. `pin_c` freezes the plateau instead of fitting it.
/// Returns `None` when no start converges to finite parameters.
pub fn fit_saturating_exponential<T: Real>(
    xs: &[T],
    ys: &[T],
    sigmas: Option<&[T]>,
    pin_c: Option<T>,
) -> Option<Fit<T>> {
    if xs.is_empty() || ys.is_empty() {
        return None;
    }
    let opts = FitOptions::default();
    let mut best: Option<Fit<T>> = None;
    for &b0 in &[0.02, 0.1, 0.3, 1.0] {
        let b0 = cst::<T>(b0);
        let fit = match pin_c {
            None => {
                let c0 = ys.iter().cloned().fold(T::infinity(), T::min);
                let p0 = [ys[0] - c0, b0, c0];
                fit_least_squares(
                    |p, x| p[0] * (-p[1] * x).exp() + p[2],
                    xs,
                    ys,
                    sigmas,
                    &p0,
                    &opts,
                )
            }
            Some(c) => {
                let p0 = [ys[0] - c, b0];
                fit_least_squares(
                    move |p, x| p[0] * (-p[1] * x).exp() + c,
                    xs,
                    ys,
                    sigmas,
                    &p0,
                    &opts,
                )
            }
        };
        if let Ok(f) = fit {
            if f.converged
                && f.params.iter().all(|p| p.is_finite())
                && best.as_ref().map_or(true, |b| f.chi2 < b.chi2)
            {
                best = Some(f);
            }
        }
    }
    best
}

/// Solve `A x = b` for symmetric positive-ish `A` by Gaussian elimination
/// with partial pivoting. Returns `None` on a vanishing pivot.
fn solve<T: Real>(a: &[T], b: &[T], k: usize) -> Option<Vec<T>> {
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..k {
        let mut pivot = col;
        for row in col + 1..k {
            if m[row * k + col].abs() > m[pivot * k + col].abs() {
                pivot = row;
            }
        }
        if m[pivot * k + col].abs() < T::min_positive_value().sqrt() {
            return None;
        }
        if pivot != col {
            for j in 0..k {
                m.swap(col * k + j, pivot * k + j);
            }
            rhs.swap(col, pivot);
        }
        let inv = T::one() / m[col * k + col];
        for row in 0..k {
            if row == col {
                continue;
            }
            let factor = m[row * k + col] * inv;
            for j in col..k {
                let sub = m[col * k + j] * factor;
                m[row * k + j] -= sub;
            }
            let sub = rhs[col] * factor;
            rhs[row] -= sub;
        }
    }
    Some(
        (0..k)
            .map(|i| rhs[i] / m[i * k + i])
            .collect(),
    )
}

/// Invert a symmetric matrix; `None` when singular.
fn invert<T: Real>(a: &[T], k: usize) -> Option<Vec<T>> {
    let mut out = vec![T::zero(); k * k];
    for col in 0..k {
        let mut e = vec![T::zero(); k];
        e[col] = T::one();
        let x = solve(a, &e, k)?;
        for row in 0..k {
            out[row * k + col] = x[row];
        }
    }
    Some(out)
}

/// Weighted straight-line fit `y = a + b x`.
///
/// Returns `(a, b, sigma_a, sigma_b)`.
pub fn fit_weighted_line<T: Real>(
    xs: &[T],
    ys: &[T],
    sigmas: Option<&[T]>,
) -> Result<(T, T, T, T)> {
    let n = xs.len();
    if n < 2 || ys.len() != n || sigmas.map_or(false, |s| s.len() != n) {
        return Err(Error::fit("line fit needs at least two consistent points"));
    }
    let w = |i: usize| -> T {
        match sigmas {
            Some(s) => {
                let s = s[i].abs().max(T::min_positive_value().sqrt());
                T::one() / (s * s)
            }
            None => T::one(),
        }
    };
    let mut sw = T::zero();
    let mut swx = T::zero();
    let mut swy = T::zero();
    let mut swxx = T::zero();
    let mut swxy = T::zero();
    for i in 0..n {
        let wi = w(i);
        sw += wi;
        swx += wi * xs[i];
        swy += wi * ys[i];
        swxx += wi * xs[i] * xs[i];
        swxy += wi * xs[i] * ys[i];
    }
    let det = sw * swxx - swx * swx;
    if det.abs() < T::min_positive_value().sqrt() {
        return Err(Error::fit("degenerate abscissas in line fit"));
    }
    let a = (swxx * swy - swx * swxy) / det;
    let b = (sw * swxy - swx * swy) / det;
    let sigma_a = (swxx / det).sqrt();
    let sigma_b = (sw / det).sqrt();
    Ok((a, b, sigma_a, sigma_b))
}

/// Weighted fit of `y = b x` through the origin. Returns `(b, sigma_b)`.
pub fn fit_weighted_line_through_origin<T: Real>(
    xs: &[T],
    ys: &[T],
    sigmas: Option<&[T]>,
) -> Result<(T, T)> {
    let n = xs.len();
    if n == 0 || ys.len() != n || sigmas.map_or(false, |s| s.len() != n) {
        return Err(Error::fit("proportional fit needs consistent points"));
    }
    let mut num = T::zero();
    let mut den = T::zero();
    for i in 0..n {
        let wi = match sigmas {
            Some(s) => {
                let s = s[i].abs().max(T::min_positive_value().sqrt());
                T::one() / (s * s)
            }
            None => T::one(),
        };
        num += wi * xs[i] * ys[i];
        den += wi * xs[i] * xs[i];
    }
    if den <= T::zero() {
        return Err(Error::fit("no leverage in proportional fit"));
    }
    Ok((num / den, (T::one() / den).sqrt()))
}

/// Mean and standard error of a sample.
pub fn mean_and_stderr<T: Real>(values: &[T]) -> (T, T) {
    let n = values.len();
    if n == 0 {
        return (T::zero(), T::infinity());
    }
    let count = cst::<T>(n as f64);
    let mean = values.iter().copied().sum::<T>() / count;
    if n == 1 {
        return (mean, T::infinity());
    }
    let var = values
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<T>()
        / cst::<T>((n - 1) as f64);
    (mean, (var / count).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn recovers_exponential_parameters() {
        let model = |p: &[f64], x: f64| p[0] * (-p[1] * x).exp() + p[2];
        let truth = [0.8, 0.21, 0.11];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| model(&truth, x) + 1e-4 * (rng.gen::<f64>() - 0.5))
            .collect();
        let fit = fit_least_squares(
            model,
            &xs,
            &ys,
            None,
            &[0.5, 0.1, 0.0],
            &FitOptions::default(),
        )
        .unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.params[0], truth[0], max_relative = 1e-2);
        assert_relative_eq!(fit.params[1], truth[1], max_relative = 1e-2);
        assert_relative_eq!(fit.params[2], truth[2], max_relative = 1e-2);
    }

    #[test]
    fn covariance_matches_known_linear_case() {
        // For y = a + b x with unit sigmas the covariance has a closed form;
        // the LM route must agree with the direct solution.
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 1.5 + 0.25 * x).collect();
        let fit = fit_least_squares(
            |p, x| p[0] + p[1] * x,
            &xs,
            &ys,
            None,
            &[0.0, 0.0],
            &FitOptions::default(),
        )
        .unwrap();
        let (a, b, sa, sb) = fit_weighted_line(&xs, &ys, None).unwrap();
        assert_relative_eq!(fit.params[0], a, epsilon = 1e-8);
        assert_relative_eq!(fit.params[1], b, epsilon = 1e-8);
        assert_relative_eq!(fit.sigma(0), sa, max_relative = 1e-6);
        assert_relative_eq!(fit.sigma(1), sb, max_relative = 1e-6);
    }

    #[test]
    fn weighted_points_dominate() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 1.0, 2.0, 10.0];
        let sigmas = [0.01, 0.01, 0.01, 100.0];
        let (a, b, _, _) = fit_weighted_line(&xs, &ys, Some(&sigmas)).unwrap();
        assert_relative_eq!(a, 0.0, epsilon = 1e-3);
        assert_relative_eq!(b, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn through_origin_slope() {
        let xs = [1.0, 2.0, 4.0];
        let ys = [0.38, 0.76, 1.52];
        let (b, sigma) = fit_weighted_line_through_origin(&xs, &ys, None).unwrap();
        assert_relative_eq!(b, 0.38, epsilon = 1e-12);
        assert!(sigma > 0.0);
    }

    #[test]
    fn rejects_underdetermined_input() {
        let out = fit_least_squares(
            |p, x| p[0] * x + p[1],
            &[1.0f64],
            &[1.0],
            None,
            &[0.0, 0.0],
            &FitOptions::default(),
        );
        assert!(out.is_err());
    }

    #[test]
    fn stderr_shrinks_with_samples() {
        let few = vec![1.0f64, 2.0, 3.0];
        let many: Vec<f64> = (0..300).map(|i| 2.0 + ((i % 3) as f64 - 1.0)).collect();
        let (m1, s1) = mean_and_stderr(&few);
        let (m2, s2) = mean_and_stderr(&many);
        assert_relative_eq!(m1, 2.0);
        assert_relative_eq!(m2, 2.0);
        assert!(s2 < s1);
    }
}
