//! Two-qubit Pauli noise: channel representation and cycle benchmarking.
//!
//! The entangling-gate error model is a sixteen-outcome Pauli channel.
//! Probabilities and Pauli fidelities are related by a signed sum over the
//! anticommutation pattern, and that pair of transforms is an involution.
//! Cycle benchmarking estimates the fidelities one Pauli at a time from
//! exponential decays of twirled cycles; [`simulate_cycle_benchmarking`]
//! reproduces the experiment on a two-qubit model with leakage, detection
//! errors, and a sign-correlated coherent over-rotation, and
//! [`fit_cycle_benchmarking`] recovers the channel from the decay data.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fit::{fit_least_squares, FitOptions};
use crate::pauli::{PauliString, SitePauli};
use crate::real::{cst, Real, C};
use crate::rng::stream_rng;
use crate::Result;

/// Labels of the sixteen two-qubit Paulis in index order; the first letter
/// acts on the lower-numbered site of an edge.
pub const TWO_QUBIT_PAULIS: [&str; 16] = [
    "II", "IX", "IY", "IZ", "XI", "XX", "XY", "XZ", "YI", "YX", "YY", "YZ",
    "ZI", "ZX", "ZY", "ZZ",
];

/// Index of the two-qubit Pauli with the given site factors.
pub fn two_qubit_index(first: SitePauli, second: SitePauli) -> usize {
    4 * first.index() + second.index()
}

/// Site factors of a two-qubit Pauli index.
pub fn index_factors(index: usize) -> (SitePauli, SitePauli) {
    (
        SitePauli::from_index(index / 4),
        SitePauli::from_index(index % 4),
    )
}

/// True when two-qubit Paulis `i` and `j` anticommute.
pub fn two_qubit_anticommute(i: usize, j: usize) -> bool {
    let (a1, b1) = index_factors(i);
    let (a2, b2) = index_factors(j);
    let site = |p: SitePauli, q: SitePauli| {
        p != SitePauli::I && q != SitePauli::I && p != q
    };
    site(a1, a2) ^ site(b1, b2)
}

/// True when Pauli `j` anticommutes with ZZ.
pub fn anticommutes_with_zz(j: usize) -> bool {
    two_qubit_anticommute(j, 15)
}

/// Index of `ZZ * P_j` up to phase. Applying it twice is the identity, and
/// the ZZ frame alternates an anticommuting Pauli with its partner.
pub fn zz_partner(j: usize) -> usize {
    let (a, b) = index_factors(j);
    4 * (3 - a.index()) + (3 - b.index())
}

/// The two-qubit Pauli `index` placed on sites `(a, b)`.
pub fn pauli_string_for(index: usize, a: usize, b: usize) -> PauliString {
    let (pa, pb) = index_factors(index);
    PauliString::IDENTITY.with_site(a, pa).with_site(b, pb)
}

/// A sixteen-outcome Pauli channel on a qubit pair. Entry 0 is the identity
/// probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliChannel<T> {
    probs: [T; 16],
}

impl<T: Real> PauliChannel<T> {
    /// Channel from outcome probabilities. They must be nonnegative and sum
    /// to one, both up to the scalar type's working tolerance.
    pub fn new(probs: [T; 16]) -> Result<Self> {
        let tol = T::norm_tol();
        let mut sum = T::zero();
        for (i, &p) in probs.iter().enumerate() {
            if p < -tol {
                return Err(Error::config(format!(
                    "negative probability {p} for {}",
                    TWO_QUBIT_PAULIS[i]
                )));
            }
            sum += p;
        }
        if (sum - T::one()).abs() > cst::<T>(16.0) * tol {
            return Err(Error::config(format!(
                "channel probabilities sum to {sum}, not 1"
            )));
        }
        Ok(PauliChannel { probs })
    }

    /// Channel with total error probability `error` spread uniformly over
    /// the fifteen non-identity Paulis.
    pub fn uniform_depolarizing(error: T) -> Result<Self> {
        if error < T::zero() || error > T::one() {
            return Err(Error::config(format!(
                "error probability {error} outside [0, 1]"
            )));
        }
        let share = error / cst::<T>(15.0);
        let mut probs = [share; 16];
        probs[0] = T::one() - error;
        PauliChannel::new(probs)
    }

    /// Channel from non-identity probabilities, identity filling the rest.
    pub fn from_error_probs(pairs: &[(usize, T)]) -> Result<Self> {
        let mut probs = [T::zero(); 16];
        let mut total = T::zero();
        for &(idx, p) in pairs {
            if idx == 0 || idx > 15 {
                return Err(Error::config(format!(
                    "error outcome index {idx} out of range"
                )));
            }
            probs[idx] += p;
            total += p;
        }
        probs[0] = T::one() - total;
        PauliChannel::new(probs)
    }

    /// Outcome probabilities in index order.
    pub fn probabilities(&self) -> &[T; 16] {
        &self.probs
    }

    /// Probability of any non-identity outcome. For a Pauli channel this
    /// equals the process infidelity.
    pub fn error_probability(&self) -> T {
        T::one() - self.probs[0]
    }

    /// Pauli fidelities `f_i = sum_j (-1)^{<i,j>} p_j` where `<i,j>` is the
    /// anticommutation indicator.
    pub fn fidelities(&self) -> [T; 16] {
        probabilities_to_fidelities(&self.probs)
    }

    /// Draw an outcome index.
    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: T = cst(rng.gen::<f64>());
        let mut acc = T::zero();
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p.max(T::zero());
            if u < acc {
                return i;
            }
        }
        0
    }
}

/// Fidelities from probabilities.
pub fn probabilities_to_fidelities<T: Real>(probs: &[T; 16]) -> [T; 16] {
    let mut f = [T::zero(); 16];
    for i in 0..16 {
        for j in 0..16 {
            if two_qubit_anticommute(i, j) {
                f[i] -= probs[j];
            } else {
                f[i] += probs[j];
            }
        }
    }
    f
}

/// Probabilities from fidelities; inverse of [`probabilities_to_fidelities`].
pub fn fidelities_to_probabilities<T: Real>(fidelities: &[T; 16]) -> [T; 16] {
    let norm = cst::<T>(1.0 / 16.0);
    let mut p = [T::zero(); 16];
    for j in 0..16 {
        for i in 0..16 {
            if two_qubit_anticommute(i, j) {
                p[j] -= fidelities[i];
            } else {
                p[j] += fidelities[i];
            }
        }
        p[j] *= norm;
    }
    p
}

/// Replace each fidelity with the geometric mean over its ZZ-frame pair,
/// `sqrt(f_j * f_u(j))`. Fidelities of Paulis commuting with ZZ are left
/// alone (their partner is themselves up to sign conventions that keep the
/// pair inside the commuting set with equal values only when the channel is
/// symmetric; see the decay model).
pub fn symmetrized_fidelities<T: Real>(fidelities: &[T; 16]) -> [T; 16] {
    let mut out = *fidelities;
    for j in 0..16 {
        if anticommutes_with_zz(j) {
            let u = zz_partner(j);
            out[j] = (fidelities[j] * fidelities[u]).max(T::zero()).sqrt();
        }
    }
    out
}

/// Cycle-benchmarking experiment parameters.
#[derive(Debug, Clone)]
pub struct CbConfig<T> {
    /// Cycle counts of the decay curves.
    pub lengths: Vec<usize>,
    /// Shots per (Pauli, length) point, split evenly over four preparations.
    pub shots_per_point: usize,
    /// Nominal entangling angle of one cycle's ZZ gate.
    pub zz_angle: T,
    /// Sign-correlated coherent over-rotation added to every ZZ gate.
    pub coherent_error: T,
    /// Stochastic error channel drawn after each ZZ gate.
    pub channel: PauliChannel<T>,
    /// Leakage probability per participating qubit per ZZ gate.
    pub leak_probability: T,
    /// Probability a clean qubit is flagged leaked at readout.
    pub detection_false_positive: T,
    /// Probability a leaked qubit escapes the flag.
    pub detection_false_negative: T,
}

impl<T: Real> CbConfig<T> {
    /// Standard settings: lengths 4, 80, 160.
    pub fn standard(zz_angle: T, channel: PauliChannel<T>) -> Self {
        CbConfig {
            lengths: vec![4, 80, 160],
            shots_per_point: 10_000,
            zz_angle,
            coherent_error: T::zero(),
            channel,
            leak_probability: T::zero(),
            detection_false_positive: T::zero(),
            detection_false_negative: T::zero(),
        }
    }
}

/// Measured decay points. `means[k][j]` is the expectation of Pauli `j`
/// after `lengths[k]` cycles; index 0 (identity) is unused and set to one.
#[derive(Debug, Clone)]
pub struct CbData<T> {
    pub lengths: Vec<usize>,
    pub means: Vec<[T; 16]>,
    pub stderrs: Vec<[T; 16]>,
    /// Herald-free shots kept per point.
    pub kept: Vec<[usize; 16]>,
}

/// Channel estimate from cycle-benchmarking decays.
#[derive(Debug, Clone)]
pub struct CbFit<T> {
    /// Estimated Pauli fidelities; anticommuting entries carry the
    /// frame-symmetrized value.
    pub fidelities: [T; 16],
    pub fidelity_sigmas: [T; 16],
    /// Probabilities implied by the fidelities.
    pub probabilities: [T; 16],
    pub probability_sigmas: [T; 16],
    /// SPAM amplitude per decay curve.
    pub amplitudes: [T; 16],
    /// Coherent over-rotation shared by the anticommuting curves.
    pub theta_eps: T,
    pub theta_eps_sigma: T,
    pub converged: bool,
}

impl<T: Real> CbFit<T> {
    /// Channel with negative estimates clamped to zero and the identity
    /// probability absorbing the difference.
    pub fn channel_clamped(&self) -> Result<PauliChannel<T>> {
        let mut probs = [T::zero(); 16];
        let mut total = T::zero();
        for j in 1..16 {
            probs[j] = self.probabilities[j].max(T::zero());
            total += probs[j];
        }
        if total > T::one() {
            return Err(Error::fit("estimated error probabilities exceed 1"));
        }
        probs[0] = T::one() - total;
        PauliChannel::new(probs)
    }
}

const I2: [[C<f64>; 2]; 2] = [
    [C::new(1.0, 0.0), C::new(0.0, 0.0)],
    [C::new(0.0, 0.0), C::new(1.0, 0.0)],
];
const X2: [[C<f64>; 2]; 2] = [
    [C::new(0.0, 0.0), C::new(1.0, 0.0)],
    [C::new(1.0, 0.0), C::new(0.0, 0.0)],
];
const Y2: [[C<f64>; 2]; 2] = [
    [C::new(0.0, 0.0), C::new(0.0, -1.0)],
    [C::new(0.0, 1.0), C::new(0.0, 0.0)],
];
const Z2: [[C<f64>; 2]; 2] = [
    [C::new(1.0, 0.0), C::new(0.0, 0.0)],
    [C::new(0.0, 0.0), C::new(-1.0, 0.0)],
];

fn site_matrix<T: Real>(p: SitePauli) -> [[C<T>; 2]; 2] {
    let m = match p {
        SitePauli::I => I2,
        SitePauli::X => X2,
        SitePauli::Y => Y2,
        SitePauli::Z => Z2,
    };
    m.map(|row| row.map(|e| C::new(cst(e.re), cst(e.im))))
}

/// Basis-change rows mapping the +1/-1 eigenvectors of `p` to |0>, |1>.
fn measurement_rotation<T: Real>(p: SitePauli) -> [[C<T>; 2]; 2] {
    let s = cst::<T>(std::f64::consts::FRAC_1_SQRT_2);
    match p {
        SitePauli::I | SitePauli::Z => site_matrix(SitePauli::I),
        SitePauli::X => [
            [C::new(s, T::zero()), C::new(s, T::zero())],
            [C::new(s, T::zero()), C::new(-s, T::zero())],
        ],
        SitePauli::Y => [
            [C::new(s, T::zero()), C::new(T::zero(), -s)],
            [C::new(s, T::zero()), C::new(T::zero(), s)],
        ],
    }
}

type V4<T> = [C<T>; 4];

fn apply_site<T: Real>(v: &mut V4<T>, site: usize, m: &[[C<T>; 2]; 2]) {
    if site == 0 {
        for b in 0..2 {
            let lo = v[b];
            let hi = v[2 + b];
            v[b] = m[0][0] * lo + m[0][1] * hi;
            v[2 + b] = m[1][0] * lo + m[1][1] * hi;
        }
    } else {
        for a in 0..2 {
            let lo = v[2 * a];
            let hi = v[2 * a + 1];
            v[2 * a] = m[0][0] * lo + m[0][1] * hi;
            v[2 * a + 1] = m[1][0] * lo + m[1][1] * hi;
        }
    }
}

fn apply_pauli_skipping_leaked<T: Real>(v: &mut V4<T>, idx: usize, leaked: [bool; 2]) {
    let (pa, pb) = index_factors(idx);
    if !leaked[0] && pa != SitePauli::I {
        apply_site(v, 0, &site_matrix(pa));
    }
    if !leaked[1] && pb != SitePauli::I {
        apply_site(v, 1, &site_matrix(pb));
    }
}

fn apply_zz_phase<T: Real>(v: &mut V4<T>, angle: T) {
    let half = angle / cst::<T>(2.0);
    let minus = C::from_polar(T::one(), -half);
    let plus = C::from_polar(T::one(), half);
    v[0] *= minus;
    v[1] *= plus;
    v[2] *= plus;
    v[3] *= minus;
}

fn prep_state<T: Real>(p: SitePauli, sign: usize) -> ([C<T>; 2], i32) {
    let s = cst::<T>(std::f64::consts::FRAC_1_SQRT_2);
    let zero = C::new(T::zero(), T::zero());
    let one = C::new(T::one(), T::zero());
    match p {
        SitePauli::I => {
            let v = if sign == 0 { [one, zero] } else { [zero, one] };
            (v, 1)
        }
        SitePauli::Z => {
            let v = if sign == 0 { [one, zero] } else { [zero, one] };
            (v, if sign == 0 { 1 } else { -1 })
        }
        SitePauli::X => {
            let amp = C::new(s, T::zero());
            let second = if sign == 0 { amp } else { -amp };
            ([amp, second], if sign == 0 { 1 } else { -1 })
        }
        SitePauli::Y => {
            let amp = C::new(s, T::zero());
            let second = if sign == 0 {
                C::new(T::zero(), s)
            } else {
                C::new(T::zero(), -s)
            };
            ([amp, second], if sign == 0 { 1 } else { -1 })
        }
    }
}

/// Run the cycle-benchmarking experiment on the two-qubit noise model.
///
/// Each cycle conjugates the ZZ gate with a fresh uniform Pauli twirl; the
/// gate angle sign follows the twirl so the coherent error accumulates
/// across cycles, after which a noiseless frame unwind removes the nominal
/// rotation. Shots with any leakage flag are discarded.
pub fn simulate_cycle_benchmarking<T: Real>(cfg: &CbConfig<T>, seed: u64) -> CbData<T> {
    let n_len = cfg.lengths.len();
    let tasks: Vec<(usize, usize)> = (1..16)
        .flat_map(|j| (0..n_len).map(move |k| (j, k)))
        .collect();

    let results: Vec<((usize, usize), (T, T, usize))> = tasks
        .par_iter()
        .map(|&(j, k)| {
            let mut rng = stream_rng(seed, (j * n_len + k) as u64);
            let l = cfg.lengths[k];
            let (pa, pb) = index_factors(j);
            let mut prep_sums = [T::zero(); 4];
            let mut prep_sq = [T::zero(); 4];
            let mut prep_counts = [0usize; 4];

            for shot in 0..cfg.shots_per_point {
                let prep = shot % 4;
                let (va, wa) = prep_state::<T>(pa, prep >> 1);
                let (vb, wb) = prep_state::<T>(pb, prep & 1);
                let mut state: V4<T> = [
                    va[0] * vb[0],
                    va[0] * vb[1],
                    va[1] * vb[0],
                    va[1] * vb[1],
                ];
                let weight = wa * wb;
                let mut leaked = [false, false];

                for _ in 0..l {
                    let twirl = rng.gen_range(0..16usize);
                    apply_pauli_skipping_leaked(&mut state, twirl, leaked);
                    for q in 0..2 {
                        if !leaked[q]
                            && cst::<T>(rng.gen::<f64>()) < cfg.leak_probability
                        {
                            leaked[q] = true;
                        }
                    }
                    if !leaked[0] && !leaked[1] {
                        let sign = if anticommutes_with_zz(twirl) {
                            -T::one()
                        } else {
                            T::one()
                        };
                        apply_zz_phase(
                            &mut state,
                            sign * (cfg.zz_angle + cfg.coherent_error),
                        );
                        let err = cfg.channel.sample(&mut rng);
                        apply_pauli_skipping_leaked(&mut state, err, leaked);
                    }
                    apply_pauli_skipping_leaked(&mut state, twirl, leaked);
                }

                if !leaked[0] && !leaked[1] {
                    let unwind = -cfg.zz_angle * cst::<T>(l as f64);
                    apply_zz_phase(&mut state, unwind);
                }

                let mut heralds = 0usize;
                for q in 0..2 {
                    let u: T = cst(rng.gen::<f64>());
                    let flagged = if leaked[q] {
                        u >= cfg.detection_false_negative
                    } else {
                        u < cfg.detection_false_positive
                    };
                    if flagged {
                        heralds += 1;
                    }
                }

                // Rotate into the measurement eigenbasis, then sample bits.
                if !leaked[0] {
                    apply_site(&mut state, 0, &measurement_rotation(pa));
                }
                if !leaked[1] {
                    apply_site(&mut state, 1, &measurement_rotation(pb));
                }
                let mut acc = T::zero();
                let u: T = cst(rng.gen::<f64>());
                let mut outcome_idx = 3;
                for (i, amp) in state.iter().enumerate() {
                    acc += amp.norm_sqr();
                    if u < acc {
                        outcome_idx = i;
                        break;
                    }
                }
                let mut bit_a = (outcome_idx >> 1) & 1;
                let mut bit_b = outcome_idx & 1;
                if leaked[0] {
                    bit_a = 1;
                }
                if leaked[1] {
                    bit_b = 1;
                }
                if heralds > 0 {
                    continue;
                }
                let mut sign = 1i32;
                if pa != SitePauli::I && bit_a == 1 {
                    sign = -sign;
                }
                if pb != SitePauli::I && bit_b == 1 {
                    sign = -sign;
                }
                let value = cst::<T>((sign * weight) as f64);
                prep_sums[prep] += value;
                prep_sq[prep] += value * value;
                prep_counts[prep] += 1;
            }

            let mut mean = T::zero();
            let mut var = T::zero();
            let mut kept = 0usize;
            for p in 0..4 {
                let n = prep_counts[p];
                kept += n;
                if n < 2 {
                    var = T::infinity();
                    continue;
                }
                let count = cst::<T>(n as f64);
                let m = prep_sums[p] / count;
                let s2 = (prep_sq[p] / count - m * m).max(T::zero())
                    * count
                    / cst::<T>((n - 1) as f64);
                mean += m / cst::<T>(4.0);
                var += s2 / count / cst::<T>(16.0);
            }
            ((j, k), (mean, var.sqrt(), kept))
        })
        .collect();

    let mut means = vec![[T::one(); 16]; n_len];
    let mut stderrs = vec![[T::zero(); 16]; n_len];
    let mut kept = vec![[0usize; 16]; n_len];
    for ((j, k), (mean, stderr, count)) in results {
        means[k][j] = mean;
        stderrs[k][j] = stderr;
        kept[k][j] = count;
    }
    CbData {
        lengths: cfg.lengths.clone(),
        means,
        stderrs,
        kept,
    }
}

/// Fit decay models to cycle-benchmarking data.
///
/// Paulis commuting with ZZ follow `A f^l` and are fitted independently.
/// The eight anticommuting Paulis follow `A [f]^l cos(theta_eps l)` with a
/// shared over-rotation angle and are fitted jointly.
pub fn fit_cycle_benchmarking<T: Real>(data: &CbData<T>) -> Result<CbFit<T>> {
    let n_len = data.lengths.len();
    if n_len < 2 {
        return Err(Error::fit("need at least two cycle counts"));
    }
    let lengths: Vec<T> = data.lengths.iter().map(|&l| cst(l as f64)).collect();

    let mut fidelities = [T::one(); 16];
    let mut fid_sigmas = [T::zero(); 16];
    let mut amplitudes = [T::one(); 16];
    let mut converged = true;

    let series = |j: usize| -> (Vec<T>, Vec<T>) {
        let ys = (0..n_len).map(|k| data.means[k][j]).collect();
        let ss = (0..n_len).map(|k| data.stderrs[k][j]).collect();
        (ys, ss)
    };

    for j in 1..16 {
        if anticommutes_with_zz(j) {
            continue;
        }
        let (ys, ss) = series(j);
        let ratio = (ys[n_len - 1] / ys[0]).max(cst(1e-12));
        let span = lengths[n_len - 1] - lengths[0];
        let f0 = ratio.powf(T::one() / span).min(T::one()).max(cst(0.5));
        let a0 = ys[0] / f0.powf(lengths[0]);
        let fit = fit_least_squares(
            |p: &[T], x: T| p[0] * p[1].powf(x),
            &lengths,
            &ys,
            Some(&ss),
            &[a0, f0],
            &FitOptions::default(),
        )?;
        converged &= fit.converged;
        amplitudes[j] = fit.params[0];
        fidelities[j] = fit.params[1];
        fid_sigmas[j] = fit.sigma(1);
    }

    let anti: Vec<usize> = (1..16).filter(|&j| anticommutes_with_zz(j)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ss = Vec::new();
    for (si, &j) in anti.iter().enumerate() {
        for k in 0..n_len {
            xs.push(cst::<T>((si * n_len + k) as f64));
            ys.push(data.means[k][j]);
            ss.push(data.stderrs[k][j]);
        }
    }
    let len_table = lengths.clone();
    let n_anti = anti.len();
    let model = move |p: &[T], x: T| {
        let idx = p.len(); // 2 * n_anti + 1 params
        let n_series = (idx - 1) / 2;
        let flat = x.to_f64().unwrap_or(0.0).round() as usize;
        let n_len = len_table.len();
        let si = flat / n_len;
        let l = len_table[flat % n_len];
        let a = p[si];
        let f = p[n_series + si];
        let theta = p[2 * n_series];
        a * f.powf(l) * (theta * l).cos()
    };

    let mut best: Option<crate::fit::Fit<T>> = None;
    for &theta0 in &[0.0, 0.004, 0.01, 0.02, 0.035, 0.06] {
        let mut p0 = vec![T::zero(); 2 * n_anti + 1];
        for (si, &j) in anti.iter().enumerate() {
            let (ysj, _) = series(j);
            let c_first = (cst::<T>(theta0) * lengths[0]).cos();
            let c_last = (cst::<T>(theta0) * lengths[n_len - 1]).cos();
            let r = (ysj[n_len - 1].abs() / ysj[0].abs().max(cst(1e-12)))
                * (c_first / c_last).abs().min(cst(10.0));
            let span = lengths[n_len - 1] - lengths[0];
            let f0 = r
                .max(cst(1e-12))
                .powf(T::one() / span)
                .min(T::one())
                .max(cst(0.5));
            let a0 = if c_first.abs() > cst(0.1) {
                ysj[0] / (f0.powf(lengths[0]) * c_first)
            } else if ysj[0] >= T::zero() {
                T::one()
            } else {
                -T::one()
            };
            p0[si] = a0;
            p0[n_anti + si] = f0;
        }
        p0[2 * n_anti] = cst(theta0);
        if let Ok(fit) = fit_least_squares(
            &model,
            &xs,
            &ys,
            Some(&ss),
            &p0,
            &FitOptions {
                max_iterations: 500,
                ..FitOptions::default()
            },
        ) {
            if best.as_ref().map_or(true, |b| fit.chi2 < b.chi2) {
                best = Some(fit);
            }
        }
    }
    let joint = best.ok_or_else(|| Error::fit("anticommuting decay fit failed"))?;
    converged &= joint.converged;
    for (si, &j) in anti.iter().enumerate() {
        amplitudes[j] = joint.params[si];
        fidelities[j] = joint.params[n_anti + si];
        fid_sigmas[j] = joint.sigma(n_anti + si);
    }
    let theta_eps = joint.params[2 * n_anti].abs();
    let theta_eps_sigma = joint.sigma(2 * n_anti);

    let probabilities = fidelities_to_probabilities(&fidelities);
    let sigma_sq: T = fid_sigmas.iter().map(|&s| s * s).sum();
    let probability_sigmas = [sigma_sq.sqrt() / cst::<T>(16.0); 16];

    Ok(CbFit {
        fidelities,
        fidelity_sigmas: fid_sigmas,
        probabilities,
        probability_sigmas,
        amplitudes,
        theta_eps,
        theta_eps_sigma,
        converged,
    })
}

/// Serialized noise model, the handoff artifact between the learning stage
/// and mitigation runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseModelFile {
    pub format_version: u32,
    pub created_unix: u64,
    pub zz_angle: f64,
    pub theta_eps: f64,
    pub theta_eps_sigma: f64,
    pub total_error: f64,
    pub pauli_probabilities: BTreeMap<String, f64>,
    pub probability_sigmas: BTreeMap<String, f64>,
}

impl NoiseModelFile {
    /// Assemble from a fit.
    pub fn from_fit<T: Real>(fit: &CbFit<T>, zz_angle: T, created_unix: u64) -> Self {
        let to_f = |v: T| v.to_f64().unwrap_or(f64::NAN);
        let mut probs = BTreeMap::new();
        let mut sigmas = BTreeMap::new();
        let mut total = 0.0;
        for j in 1..16 {
            probs.insert(
                TWO_QUBIT_PAULIS[j].to_string(),
                to_f(fit.probabilities[j]),
            );
            sigmas.insert(
                TWO_QUBIT_PAULIS[j].to_string(),
                to_f(fit.probability_sigmas[j]),
            );
            total += to_f(fit.probabilities[j]);
        }
        NoiseModelFile {
            format_version: 1,
            created_unix,
            zz_angle: to_f(zz_angle),
            theta_eps: to_f(fit.theta_eps),
            theta_eps_sigma: to_f(fit.theta_eps_sigma),
            total_error: total,
            pauli_probabilities: probs,
            probability_sigmas: sigmas,
        }
    }

    /// Rebuild the channel, clamping negative estimates to zero.
    pub fn to_channel<T: Real>(&self) -> Result<PauliChannel<T>> {
        let mut probs = [T::zero(); 16];
        let mut total = T::zero();
        for (label, &p) in &self.pauli_probabilities {
            let idx = TWO_QUBIT_PAULIS
                .iter()
                .position(|&l| l == label)
                .ok_or_else(|| Error::parse(format!("unknown Pauli label {label}")))?;
            if idx == 0 {
                return Err(Error::parse("identity listed as an error outcome"));
            }
            probs[idx] = cst::<T>(p).max(T::zero());
            total += probs[idx];
        }
        if total > T::one() {
            return Err(Error::parse("stored error probabilities exceed 1"));
        }
        probs[0] = T::one() - total;
        PauliChannel::new(probs)
    }

    /// Write as pretty JSON.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::parse(format!("noise model serialization: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Read from JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::parse(format!("noise model at {}: {e}", path.display())))
    }
}
