//! Hydrodynamic relaxation of the exchange-energy density.
//!
//! A quench seeded with a domain wall leaves a long-wavelength imprint on the
//! local ZZ energy. Column-averaging that density and following its Fourier
//! modes over time exposes diffusive behaviour: each mode's power decays as
//! `exp(-Gamma_q s)` with `Gamma_q = D q^2`, while the conserved `q = 0` mode
//! saturates. This module computes the profiles, tracks the modes, and fits
//! the diffusion constant with shot-noise-aware weighting.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::circuit::{build_trotter, QuenchSpec};
use crate::error::Error;
use crate::fit::{
    fit_saturating_exponential, fit_weighted_line, fit_weighted_line_through_origin,
    mean_and_stderr,
};
use crate::lattice::Lattice;
use crate::real::{cst, Real, C};
use crate::rng::stream_rng;
use crate::sim::{run_noisy_trajectory, NoiseConfig, StateVector};
use crate::Result;

/// Exchange energy per site, `(j/4) * sum over neighbors of <Z_i Z_k>`.
///
/// The correlator is supplied as a closure so the same profile code serves
/// exact statevector expectations and single-shot bit readouts.
pub fn site_energy_density<T: Real>(
    lattice: &Lattice,
    j: T,
    zz: impl Fn(usize, usize) -> T,
) -> Vec<T> {
    let quarter = j / cst::<T>(4.0);
    (0..lattice.n())
        .map(|i| {
            let mut acc = T::zero();
            for k in lattice.neighbors(i) {
                acc += zz(i, k);
            }
            acc * quarter
        })
        .collect()
}

/// Average of a per-site quantity over each column's `y` coordinate.
pub fn column_profile<T: Real>(lattice: &Lattice, per_site: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); lattice.nx()];
    for (i, value) in per_site.iter().enumerate() {
        out[lattice.coords(i).0] += *value;
    }
    let ny = cst::<T>(lattice.ny() as f64);
    for column in &mut out {
        *column /= ny;
    }
    out
}

/// Fourier amplitude `(1/sqrt(Lx)) * sum_x exp(i q_n x) * profile(x)` at
/// wavenumber `q_n = 2 pi n / Lx`.
pub fn fourier_mode<T: Real>(profile: &[T], n: usize) -> C<T> {
    let lx = profile.len();
    let q = cst::<T>(2.0) * T::PI() * cst::<T>(n as f64) / cst::<T>(lx as f64);
    let mut acc = C::new(T::zero(), T::zero());
    for (x, value) in profile.iter().enumerate() {
        let phase = q * cst::<T>(x as f64);
        acc += C::new(phase.cos(), phase.sin()) * *value;
    }
    acc / cst::<T>(lx as f64).sqrt()
}

/// Number of nonzero wavenumbers tracked for a row length `lx`.
pub fn tracked_mode_count(lx: usize) -> usize {
    (lx / 2).min(3)
}

/// One Fourier mode followed over the step boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTrack<T> {
    pub n: usize,
    pub q: T,
    /// Mode magnitude `|E~(q)|` per time point.
    pub amps: Vec<T>,
    /// Standard error of the magnitudes; absent for exact data.
    pub sigmas: Option<Vec<T>>,
}

/// Mode histories plus the common time axis, in Trotter-step units.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroData<T> {
    pub times: Vec<T>,
    pub modes: Vec<ModeTrack<T>>,
}

/// Knobs for [`fit_diffusion`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HydroFitOptions<T> {
    /// Points earlier than this time are treated as transient and skipped.
    pub s_min: T,
    /// Modes with fewer usable points than this are skipped.
    pub min_points: usize,
    /// A point is usable only while `|E~|^2` exceeds this multiple of its
    /// shot-noise variance.
    pub snr_factor: T,
}

impl<T: Real> Default for HydroFitOptions<T> {
    fn default() -> Self {
        Self {
            s_min: cst(5.0),
            min_points: 3,
            snr_factor: cst(3.0),
        }
    }
}

/// Fitted decay rate of one mode's power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRate<T> {
    pub n: usize,
    pub q: T,
    pub gamma: T,
    pub sigma: T,
    pub points_used: usize,
}

/// Diffusion constant from the `Gamma_q = D q^2` collapse.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionFit<T> {
    pub diffusion: T,
    pub sigma: T,
    pub mode_rates: Vec<ModeRate<T>>,
    /// Nonzero modes dropped for lack of usable points.
    pub skipped_modes: Vec<usize>,
    /// Decay rate of the conserved mode's transient, with its uncertainty.
    pub zero_mode_rate: Option<(T, T)>,
}

/// Fit every tracked mode's power to a decaying exponential and collapse the
/// nonzero-q rates onto `Gamma_q = D q^2`.
///
/// Nonzero modes use a weighted straight line through `log |E~|^2`; the
/// conserved mode keeps its saturation constant and is reported separately.
pub fn fit_diffusion<T: Real>(
    data: &HydroData<T>,
    opts: &HydroFitOptions<T>,
) -> Result<DiffusionFit<T>> {
    let mut mode_rates = Vec::new();
    let mut skipped_modes = Vec::new();
    let mut zero_mode_rate = None;

    for track in &data.modes {
        if track.amps.len() != data.times.len() {
            return Err(Error::config(format!(
                "mode {} has {} samples on a {}-point time axis",
                track.n,
                track.amps.len(),
                data.times.len()
            )));
        }
        let mut ts = Vec::new();
        let mut powers = Vec::new();
        let mut sig_powers = Vec::new();
        for (k, &time) in data.times.iter().enumerate() {
            if time < opts.s_min {
                continue;
            }
            let amp = track.amps[k];
            if amp <= T::zero() {
                continue;
            }
            let mut power = amp * amp;
            if let Some(sigmas) = &track.sigmas {
                let sigma = sigmas[k];
                if power < opts.snr_factor * sigma * sigma {
                    if track.n != 0 {
                        // A decaying mode never climbs back over the noise
                        // floor; anything after the first dip is a spike.
                        break;
                    }
                    continue;
                }
                // The squared modulus of a noisy mean overshoots the true
                // power by twice the per-component variance; subtracting it
                // keeps faint tail points from flattening the decay.
                power -= cst::<T>(2.0) * sigma * sigma;
                sig_powers.push(cst::<T>(2.0) * amp * sigma);
            }
            ts.push(time);
            powers.push(power);
        }
        let has_sigmas = track.sigmas.is_some();

        if track.n == 0 {
            // The conserved mode keeps its saturation constant, so the power
            // itself is fitted rather than its logarithm.
            let lo = powers.iter().cloned().fold(T::infinity(), T::min);
            let hi = powers.iter().cloned().fold(-T::infinity(), T::max);
            if !powers.is_empty() && hi - lo <= cst::<T>(1e-12) * hi.abs().max(T::one()) {
                // An exactly flat series has no transient; the rate is zero
                // by inspection where the fit would leave it unidentified.
                zero_mode_rate = Some((T::zero(), T::zero()));
            } else {
                zero_mode_rate = fit_saturating_exponential(
                    &ts,
                    &powers,
                    has_sigmas.then_some(sig_powers.as_slice()),
                    None,
                )
                .map(|fit| (fit.params[1], fit.sigma(1)));
            }
            continue;
        }

        if ts.len() < opts.min_points {
            skipped_modes.push(track.n);
            continue;
        }
        let ys: Vec<T> = powers.iter().map(|p| p.ln()).collect();
        let sig_ys: Vec<T> = sig_powers
            .iter()
            .zip(powers.iter())
            .map(|(&s, &p)| s / p)
            .collect();
        let (_, slope, _, sig_slope) =
            fit_weighted_line(&ts, &ys, has_sigmas.then_some(sig_ys.as_slice()))?;
        mode_rates.push(ModeRate {
            n: track.n,
            q: track.q,
            gamma: -slope,
            sigma: sig_slope,
            points_used: ts.len(),
        });
    }

    if mode_rates.is_empty() {
        return Err(Error::fit("no mode kept enough points for a diffusion fit"));
    }
    let qs2: Vec<T> = mode_rates.iter().map(|m| m.q * m.q).collect();
    let gammas: Vec<T> = mode_rates.iter().map(|m| m.gamma).collect();
    let sigmas: Vec<T> = mode_rates.iter().map(|m| m.sigma).collect();
    let weighted = mode_rates.iter().all(|m| m.sigma.is_finite() && m.sigma > T::zero());
    let (diffusion, sigma) =
        fit_weighted_line_through_origin(&qs2, &gammas, weighted.then_some(sigmas.as_slice()))?;
    Ok(DiffusionFit {
        diffusion,
        sigma,
        mode_rates,
        skipped_modes,
        zero_mode_rate,
    })
}

/// Initial tilt pattern with the column at `nx / 2` flipped to the south pole.
pub fn domain_wall_thetas<T: Real>(lattice: &Lattice, background: T) -> Vec<T> {
    let wall = lattice.nx() / 2;
    (0..lattice.n())
        .map(|i| {
            if lattice.coords(i).0 == wall {
                T::PI()
            } else {
                background
            }
        })
        .collect()
}

/// Magnitude of the mean of complex samples, with the standard error of their
/// projections onto the mean's direction.
fn complex_mean_statistics<T: Real>(values: &[C<T>]) -> (T, T) {
    let len = cst::<T>(values.len() as f64);
    let mut mean = C::new(T::zero(), T::zero());
    for v in values {
        mean += *v;
    }
    mean /= len;
    let amp = mean.norm();
    let direction = if amp > T::zero() {
        mean / amp
    } else {
        C::new(T::one(), T::zero())
    };
    let projections: Vec<T> = values
        .iter()
        .map(|v| (*v * direction.conj()).re)
        .collect();
    let (_, stderr) = mean_and_stderr(&projections);
    (amp, stderr)
}

/// Mode histories of a statevector quench.
///
/// With `shots == 0` a single trajectory is run and exact expectation values
/// are recorded, so `sigmas` stays empty. Otherwise each shot evolves its own
/// trajectory under `noise` and reads the spins out once per step boundary;
/// leaked qubits read as 1 like in hardware-style readout.
pub fn run_hydro_statevector(
    spec: &QuenchSpec<f64>,
    noise: &NoiseConfig<f64>,
    shots: usize,
    master_seed: u64,
) -> Result<HydroData<f64>> {
    let mut boundary_spec = spec.clone();
    boundary_spec.merge_x_layers = false;
    let circuit = build_trotter(&boundary_spec)?;
    let init = StateVector::product(&boundary_spec.thetas)?;
    let lattice = &boundary_spec.lattice;
    let count = tracked_mode_count(lattice.nx());
    let boundaries = boundary_spec.steps + 1;
    let times: Vec<f64> = (0..boundaries).map(|s| s as f64).collect();
    let qs: Vec<f64> = (0..=count)
        .map(|n| 2.0 * std::f64::consts::PI * n as f64 / lattice.nx() as f64)
        .collect();

    if shots == 0 {
        let mut amps = vec![Vec::with_capacity(boundaries); count + 1];
        let mut rng = stream_rng(master_seed, 0);
        run_noisy_trajectory(&circuit, &init, noise, &mut rng, |s, state, _| {
            if s >= boundaries {
                return;
            }
            let site =
                site_energy_density(lattice, boundary_spec.j, |a, b| state.zz_expectation(a, b));
            let profile = column_profile(lattice, &site);
            for (n, series) in amps.iter_mut().enumerate() {
                series.push(fourier_mode(&profile, n).norm());
            }
        })?;
        let modes = amps
            .into_iter()
            .enumerate()
            .map(|(n, series)| ModeTrack {
                n,
                q: qs[n],
                amps: series,
                sigmas: None,
            })
            .collect();
        return Ok(HydroData { times, modes });
    }

    let per_shot: Vec<Vec<Vec<C<f64>>>> = (0..shots)
        .into_par_iter()
        .map(|shot| {
            let mut trajectory_rng = stream_rng(master_seed, 2 * shot as u64);
            let mut readout_rng = stream_rng(master_seed, 2 * shot as u64 + 1);
            let mut modes = vec![Vec::new(); boundaries];
            run_noisy_trajectory(&circuit, &init, noise, &mut trajectory_rng, |s, state, leaked| {
                if s >= boundaries {
                    return;
                }
                let bits = state.sample_bits(&mut readout_rng) | leaked;
                let site = site_energy_density(lattice, boundary_spec.j, |a, b| {
                    if ((bits >> a) ^ (bits >> b)) & 1 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                });
                let profile = column_profile(lattice, &site);
                modes[s] = (0..=count).map(|n| fourier_mode(&profile, n)).collect();
            })?;
            Ok(modes)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut modes = Vec::with_capacity(count + 1);
    for (n, &q) in qs.iter().enumerate() {
        let mut amps = Vec::with_capacity(boundaries);
        let mut sigmas = Vec::with_capacity(boundaries);
        for s in 0..boundaries {
            let samples: Vec<C<f64>> = per_shot.iter().map(|shot| shot[s][n]).collect();
            let (amp, sigma) = complex_mean_statistics(&samples);
            amps.push(amp);
            sigmas.push(sigma);
        }
        modes.push(ModeTrack {
            n,
            q,
            amps,
            sigmas: Some(sigmas),
        });
    }
    Ok(HydroData { times, modes })
}

/// Mode histories drawn straight from the diffusive model, for fitter
/// validation and as a bundled dataset.
///
/// Nonzero modes carry power `a_n * exp(-D q^2 s)`; the conserved mode holds
/// a constant level. With `shots > 0` every sample point averages that many
/// per-shot values smeared by complex Gaussian noise of the given scale, and
/// the tracks carry matching standard errors.
pub fn synthetic_hydro_data<T: Real>(
    lx: usize,
    diffusion: T,
    steps: usize,
    shots: usize,
    noise_scale: T,
    seed: u64,
) -> Result<HydroData<T>> {
    if lx < 2 {
        return Err(Error::config(format!("row length {lx} is too short")));
    }
    let count = tracked_mode_count(lx);
    let boundaries = steps + 1;
    let times: Vec<T> = (0..boundaries).map(|s| cst(s as f64)).collect();
    let half = cst::<T>(0.5);

    let mut modes = Vec::with_capacity(count + 1);
    for n in 0..=count {
        let q = cst::<T>(2.0) * T::PI() * cst::<T>(n as f64) / cst::<T>(lx as f64);
        let direction = cst::<T>(0.4) * cst::<T>(n as f64);
        let mut amps = Vec::with_capacity(boundaries);
        let mut sigmas = Vec::with_capacity(boundaries);
        for (s, &time) in times.iter().enumerate() {
            let level = if n == 0 {
                cst::<T>(1.1)
            } else {
                cst::<T>(0.8) / cst::<T>(n as f64) * (-diffusion * q * q * time * half).exp()
            };
            let mean = C::new(direction.cos(), direction.sin()) * level;
            if shots == 0 {
                amps.push(mean.norm());
                continue;
            }
            let mut rng = stream_rng(seed, (n * boundaries + s) as u64);
            let samples: Vec<C<T>> = (0..shots)
                .map(|_| {
                    let re: T = cst::<T>(rng.sample::<f64, _>(StandardNormal));
                    let im: T = cst::<T>(rng.sample::<f64, _>(StandardNormal));
                    mean + C::new(re, im) * noise_scale
                })
                .collect();
            let (amp, sigma) = complex_mean_statistics(&samples);
            amps.push(amp);
            sigmas.push(sigma);
        }
        modes.push(ModeTrack {
            n,
            q,
            amps,
            sigmas: (shots > 0).then_some(sigmas),
        });
    }
    Ok(HydroData { times, modes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn uniform_up_state_saturates_the_energy_density() {
        let lattice = Lattice::new(4, 4).unwrap();
        let site = site_energy_density(&lattice, -1.0_f64, |_, _| 1.0);
        assert!(site.iter().all(|&e| (e + 1.0).abs() < 1e-12));

        let equator = site_energy_density(&lattice, -1.0_f64, |_, _| 0.0);
        assert!(equator.iter().all(|&e| e.abs() < 1e-12));
    }

    #[test]
    fn domain_wall_profile_matches_the_product_state_cosines() {
        let lattice = Lattice::new(6, 3).unwrap();
        let background = 0.5_f64;
        let thetas = domain_wall_thetas(&lattice, background);
        let cos = |i: usize| thetas[i].cos();
        let site = site_energy_density(&lattice, -1.0, |a, b| cos(a) * cos(b));
        let profile = column_profile(&lattice, &site);

        for (x, &value) in profile.iter().enumerate() {
            let c_here = if x == 3 { -1.0 } else { background.cos() };
            let left = if (x + 5) % 6 == 3 { -1.0 } else { background.cos() };
            let right = if (x + 1) % 6 == 3 { -1.0 } else { background.cos() };
            let expected = -0.25 * (c_here * (left + right) + 2.0 * c_here * c_here);
            assert_relative_eq!(value, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn mode_spectrum_satisfies_parseval() {
        let profile = [0.3_f64, -0.7, 0.2, 0.9, -0.1, 0.4, 0.05];
        let lx = profile.len();
        let power: f64 = (0..lx).map(|n| fourier_mode(&profile, n).norm_sqr()).sum();
        let direct: f64 = profile.iter().map(|e| e * e).sum();
        assert_relative_eq!(power, direct, epsilon = 1e-10);
    }

    #[test]
    fn conjugate_modes_mirror_each_other() {
        let profile = [0.3_f64, -0.7, 0.2, 0.9, -0.1, 0.4];
        let lx = profile.len();
        for n in 1..lx {
            let plus = fourier_mode(&profile, n);
            let minus = fourier_mode(&profile, lx - n);
            assert_abs_diff_eq!(plus.re, minus.re, epsilon = 1e-12);
            assert_abs_diff_eq!(plus.im, -minus.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn noiseless_model_data_returns_the_planted_constant() {
        let data = synthetic_hydro_data(14, 0.38_f64, 30, 0, 0.0, 1).unwrap();
        let fit = fit_diffusion(&data, &HydroFitOptions::default()).unwrap();
        assert_abs_diff_eq!(fit.diffusion, 0.38, epsilon = 1e-6);
        assert_eq!(fit.mode_rates.len(), 3);
        assert!(fit.skipped_modes.is_empty());
        for rate in &fit.mode_rates {
            assert_abs_diff_eq!(rate.gamma, 0.38 * rate.q * rate.q, epsilon = 1e-9);
        }
    }

    #[test]
    fn shot_noise_widens_but_does_not_bias_the_fit() {
        let data = synthetic_hydro_data(14, 0.38_f64, 30, 2000, 0.2, 5).unwrap();
        let fit = fit_diffusion(&data, &HydroFitOptions::default()).unwrap();
        assert!(fit.sigma > 0.0);
        assert!(
            (fit.diffusion - 0.38).abs() <= 2.0 * fit.sigma,
            "D = {} +- {}",
            fit.diffusion,
            fit.sigma
        );
        if let Some((gamma0, sigma0)) = fit.zero_mode_rate {
            assert!(gamma0.abs() <= sigma0.max(0.05), "gamma0 = {gamma0} +- {sigma0}");
        }
    }

    #[test]
    fn faint_modes_are_dropped_rather_than_fitted() {
        let mut data = synthetic_hydro_data(14, 0.38_f64, 30, 200, 0.2, 9).unwrap();
        // Bury the steepest mode fully below the noise floor.
        if let Some(track) = data.modes.iter_mut().find(|m| m.n == 3) {
            for amp in &mut track.amps {
                *amp *= 1e-4;
            }
        }
        let fit = fit_diffusion(&data, &HydroFitOptions::default()).unwrap();
        assert_eq!(fit.skipped_modes, vec![3]);
        assert!(fit.mode_rates.iter().all(|m| m.n != 3));
    }

    #[test]
    fn statevector_runner_matches_its_sampled_estimate() {
        let lattice = Lattice::new(4, 2).unwrap();
        let background = -0.5;
        let thetas = domain_wall_thetas(&lattice, background);
        let spec = QuenchSpec {
            lattice,
            j: -1.0,
            h: 2.0,
            dt: 0.25,
            steps: 4,
            thetas,
            merge_x_layers: true,
        };
        let noise = NoiseConfig::default();
        let exact = run_hydro_statevector(&spec, &noise, 0, 7).unwrap();
        let sampled = run_hydro_statevector(&spec, &noise, 400, 7).unwrap();

        assert_eq!(exact.times, sampled.times);
        for (e_track, s_track) in exact.modes.iter().zip(&sampled.modes) {
            assert!(e_track.sigmas.is_none());
            let sigmas = s_track.sigmas.as_ref().unwrap();
            for ((&exact_amp, &amp), &sigma) in
                e_track.amps.iter().zip(&s_track.amps).zip(sigmas)
            {
                assert!(
                    (amp - exact_amp).abs() <= 5.0 * sigma.max(0.02),
                    "mode {} amp {amp} vs exact {exact_amp} (sigma {sigma})",
                    e_track.n
                );
            }
        }
    }
}
