//! Physics analyses built on the simulators: prethermal order parameters,
//! the second-order Floquet-Magnus correction with its eigenphase check,
//! dense thermal references, and hydrodynamic diffusion fits.

pub mod hydro;
pub mod magnus;
pub mod thermal;

use crate::circuit::{build_trotter, QuenchSpec};
use crate::error::Error;
use crate::real::{cst, Real};
use crate::rng::stream_rng;
use crate::sim::{run_noisy_trajectory, NoiseConfig, StateVector};
use crate::spd::PauliSum;
use crate::Result;

/// Dense-matrix routines refuse more sites than this.
pub const MAX_DENSE_SITES: usize = 12;

/// Expectation value of a Hermitian Pauli sum in a statevector.
pub fn statevector_expectation<T: Real>(sum: &PauliSum<T>, state: &StateVector<T>) -> T {
    let mut total = T::zero();
    for (string, coeff) in sum.iter() {
        let mut rotated = state.clone();
        rotated.apply_pauli(string);
        total += *coeff * state.overlap(&rotated).re;
    }
    total
}

/// Centered moving average over `window` samples, shrinking near the ends of
/// the series so every output point averages only real data.
pub fn moving_time_average<T: Real>(values: &[T], window: usize) -> Result<Vec<T>> {
    if window == 0 {
        return Err(Error::config("moving-average window must be at least 1"));
    }
    let len = values.len();
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let lo = i.saturating_sub((window - 1) / 2);
        let hi = (i + window / 2).min(len.saturating_sub(1));
        let count = cst::<T>((hi - lo + 1) as f64);
        out.push(values[lo..=hi].iter().copied().sum::<T>() / count);
    }
    Ok(out)
}

/// Mean of `values[lo..=hi]`.
pub fn time_average<T: Real>(values: &[T], lo: usize, hi: usize) -> Result<T> {
    if lo > hi || hi >= values.len() {
        return Err(Error::config(format!(
            "window {lo}..={hi} outside a series of {} entries",
            values.len()
        )));
    }
    let count = hi - lo + 1;
    Ok(values[lo..=hi].iter().copied().sum::<T>() / crate::real::cst::<T>(count as f64))
}

/// Noiseless `<Z_tot^2>` after 0..=steps Trotter steps of the quench.
pub fn ideal_ztot2_series<T: Real>(spec: &QuenchSpec<T>) -> Result<Vec<T>> {
    let mut boundary_spec = spec.clone();
    boundary_spec.merge_x_layers = false;
    let circuit = build_trotter(&boundary_spec)?;
    let init = StateVector::product(&spec.thetas)?;
    let noise = NoiseConfig::default();
    let mut rng = stream_rng(0, 0);
    let mut values = vec![T::zero(); spec.steps + 1];
    run_noisy_trajectory(&circuit, &init, &noise, &mut rng, |s, state, leaked| {
        if s < values.len() {
            values[s] = state.ztot2_with_leaked(leaked);
        }
    })?;
    Ok(values)
}
