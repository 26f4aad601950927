//! Dense statevector execution, ideal and noisy.
//!
//! The simulator targets desk scale: full amplitude vectors up to
//! [`MAX_QUBITS`] qubits. Noisy execution follows the stochastic-trajectory
//! picture, sampling one realization of every error source per shot:
//!
//! * a Pauli channel draw after each entangling gate;
//! * classical leakage flags, set per participating qubit per entangling
//!   gate; every later gate touching a leaked qubit acts as the identity on
//!   both participants and suppresses its channel draw;
//! * a coherent `exp(-i phi Z)` memory phase on every idle or active qubit
//!   at each physical cycle;
//! * a fixed over-rotation added to every single-qubit gate angle;
//! * readout that samples the surviving amplitudes, forces leaked qubits to
//!   read 1, then flags qubits through an imperfect leakage detector.
//!
//! Heralded (flagged) qubits are scrubbed: their bit is replaced by a fair
//! coin and recorded in [`ShotRecord::replaced_mask`] so estimators can
//! drop the affected terms instead of averaging coin noise.

use rand::Rng;
use rayon::prelude::*;

use crate::circuit::transform::{amplify_noise, apply_randomized_compiling};
use crate::circuit::{Circuit, Gate, Moment, MomentKind};
use crate::error::Error;
use crate::fit::mean_and_stderr;
use crate::noise::PauliChannel;
use crate::pauli::PauliString;
use crate::real::{cst, Real, C};
use crate::rng::stream_rng;
use crate::Result;

/// Amplitude-vector size limit (2^25 complex doubles is half a gigabyte).
pub const MAX_QUBITS: usize = 25;

/// Dense state on `n` qubits; basis index bit `q` is the computational bit
/// of site `q`, matching the [`PauliString`] mask convention.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real = f64> {
    n: usize,
    amps: Vec<C<T>>,
}

impl<T: Real> StateVector<T> {
    /// The all-zeros computational basis state.
    pub fn zero(n: usize) -> Result<Self> {
        Self::check_width(n)?;
        let mut amps = vec![C::new(T::zero(), T::zero()); 1 << n];
        amps[0] = C::new(T::one(), T::zero());
        Ok(StateVector { n, amps })
    }

    /// Product state with per-site polar angles,
    /// `prod_q (cos(theta_q/2)|0> + sin(theta_q/2)|1>)`.
    pub fn product(thetas: &[T]) -> Result<Self> {
        let n = thetas.len();
        Self::check_width(n)?;
        let two = cst::<T>(2.0);
        let cos_half: Vec<T> = thetas.iter().map(|&t| (t / two).cos()).collect();
        let sin_half: Vec<T> = thetas.iter().map(|&t| (t / two).sin()).collect();
        let amps = (0..1usize << n)
            .map(|b| {
                let mut a = T::one();
                for q in 0..n {
                    a *= if b >> q & 1 == 0 {
                        cos_half[q]
                    } else {
                        sin_half[q]
                    };
                }
                C::new(a, T::zero())
            })
            .collect();
        Ok(StateVector { n, amps })
    }

    /// Wrap raw amplitudes; must be normalized.
    pub fn from_amplitudes(n: usize, amps: Vec<C<T>>) -> Result<Self> {
        Self::check_width(n)?;
        if amps.len() != 1 << n {
            return Err(Error::config(format!(
                "amplitude count {} does not match {n} qubits",
                amps.len()
            )));
        }
        let state = StateVector { n, amps };
        state.check_norm()?;
        Ok(state)
    }

    fn check_width(n: usize) -> Result<()> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::resource(format!(
                "{n} qubits outside the dense-statevector range 1..={MAX_QUBITS}"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Error if the squared norm drifted beyond the scalar's tolerance.
    pub fn check_norm(&self) -> Result<()> {
        let drift = (self.norm_sqr() - T::one()).abs();
        if drift > T::norm_tol() {
            return Err(Error::resource(format!(
                "statevector norm drifted by {drift:e}"
            )));
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &StateVector<T>) -> C<T> {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Rotation by `theta` about `cos(phi) X + sin(phi) Y` on qubit `q`.
    pub fn apply_one_q(&mut self, q: usize, theta: T, phi: T) {
        let half = theta / cst::<T>(2.0);
        let c = C::new(half.cos(), T::zero());
        let ms = -half.sin();
        // -i e^{-i phi} sin and -i e^{+i phi} sin off-diagonals.
        let lower = C::new(T::zero(), ms) * C::from_polar(T::one(), -phi);
        let upper = C::new(T::zero(), ms) * C::from_polar(T::one(), phi);
        let bit = 1usize << q;
        for b in 0..self.amps.len() {
            if b & bit == 0 {
                let lo = self.amps[b];
                let hi = self.amps[b | bit];
                self.amps[b] = c * lo + lower * hi;
                self.amps[b | bit] = upper * lo + c * hi;
            }
        }
    }

    /// `exp(-i angle Z_a Z_b / 2)`.
    pub fn apply_zz(&mut self, a: usize, b: usize, angle: T) {
        let half = angle / cst::<T>(2.0);
        let same = C::from_polar(T::one(), -half);
        let diff = C::from_polar(T::one(), half);
        let ba = 1usize << a;
        let bb = 1usize << b;
        for idx in 0..self.amps.len() {
            let parity = (idx & ba != 0) ^ (idx & bb != 0);
            self.amps[idx] *= if parity { diff } else { same };
        }
    }

    /// `exp(-i angle Z_q)` phase on one qubit.
    pub fn apply_z_phase(&mut self, q: usize, angle: T) {
        let minus = C::from_polar(T::one(), -angle);
        let plus = C::from_polar(T::one(), angle);
        let bit = 1usize << q;
        for idx in 0..self.amps.len() {
            self.amps[idx] *= if idx & bit == 0 { minus } else { plus };
        }
    }

    /// Multiply by the Pauli operator, phases included.
    pub fn apply_pauli(&mut self, p: &PauliString) {
        let z = p.z as usize;
        let x = p.x as usize;
        let cy = (p.z & p.x).count_ones() as usize % 4;
        // (-i)^cy global factor.
        let global = [
            C::new(T::one(), T::zero()),
            C::new(T::zero(), -T::one()),
            C::new(-T::one(), T::zero()),
            C::new(T::zero(), T::one()),
        ][cy];
        if x == 0 {
            for b in 0..self.amps.len() {
                let sign = if (b & z).count_ones() % 2 == 1 {
                    -T::one()
                } else {
                    T::one()
                };
                self.amps[b] *= global * sign;
            }
            return;
        }
        let top = 1usize << (usize::BITS - 1 - x.leading_zeros());
        for b in 0..self.amps.len() {
            if b & top != 0 {
                continue;
            }
            let partner = b ^ x;
            let sign_b = if (b & z).count_ones() % 2 == 1 {
                -T::one()
            } else {
                T::one()
            };
            let sign_p = if (partner & z).count_ones() % 2 == 1 {
                -T::one()
            } else {
                T::one()
            };
            let old_b = self.amps[b];
            let old_p = self.amps[partner];
            self.amps[b] = global * sign_b * old_p;
            self.amps[partner] = global * sign_p * old_b;
        }
    }

    /// `<Z_a Z_b>`.
    pub fn zz_expectation(&self, a: usize, b: usize) -> T {
        let ba = 1usize << a;
        let bb = 1usize << b;
        self.amps
            .iter()
            .enumerate()
            .map(|(idx, amp)| {
                let sign = if (idx & ba != 0) ^ (idx & bb != 0) {
                    -T::one()
                } else {
                    T::one()
                };
                amp.norm_sqr() * sign
            })
            .sum()
    }

    /// Squared total magnetization per site pair,
    /// `<(sum_q Z_q)^2> / n^2`, with leaked qubits read as fixed -1.
    pub fn ztot2_with_leaked(&self, leaked: u128) -> T {
        let n = self.n as i64;
        let mask = !(leaked as usize) & ((1usize << self.n) - 1);
        let l = (leaked as usize & ((1usize << self.n) - 1)).count_ones() as i64;
        let mut acc = T::zero();
        for (idx, amp) in self.amps.iter().enumerate() {
            let pop = (idx & mask).count_ones() as i64;
            let z = n - 2 * l - 2 * pop;
            acc += amp.norm_sqr() * cst::<T>((z * z) as f64);
        }
        acc / cst::<T>((n * n) as f64)
    }

    /// `<(sum_q Z_q)^2> / n^2`.
    pub fn ztot2(&self) -> T {
        self.ztot2_with_leaked(0)
    }

    /// Draw a computational basis outcome.
    pub fn sample_bits(&self, rng: &mut impl Rng) -> u128 {
        let u: T = cst(rng.gen::<f64>());
        let mut acc = T::zero();
        for (idx, amp) in self.amps.iter().enumerate() {
            acc += amp.norm_sqr();
            if u < acc {
                return idx as u128;
            }
        }
        (self.amps.len() - 1) as u128
    }
}

/// Apply the logical gates of a circuit to a state. Inserted error Paulis
/// and herald markers are skipped.
pub fn run_ideal<T: Real>(circuit: &Circuit<T>, init: &StateVector<T>) -> Result<StateVector<T>> {
    if circuit.n != init.n() {
        return Err(Error::config(format!(
            "circuit on {} qubits, state on {}",
            circuit.n,
            init.n()
        )));
    }
    let mut state = init.clone();
    for moment in &circuit.moments {
        for gate in &moment.gates {
            match gate {
                Gate::OneQ { q, theta, phi } => state.apply_one_q(*q, *theta, *phi),
                Gate::Zz { a, b, angle } => state.apply_zz(*a, *b, *angle),
                Gate::PauliInsertion { .. } | Gate::Herald { .. } => {}
            }
        }
    }
    state.check_norm()?;
    Ok(state)
}

/// Error-model parameters for noisy execution.
#[derive(Debug, Clone)]
pub struct NoiseConfig<T: Real = f64> {
    /// Stochastic Pauli channel drawn after every entangling gate.
    pub two_qubit_channel: Option<PauliChannel<T>>,
    /// Leakage probability per participating qubit per entangling gate.
    pub leak_prob_2q: T,
    /// Coherent `exp(-i phi Z)` angle applied per qubit per physical cycle.
    pub coherent_memory_angle: T,
    /// Angle added to every single-qubit rotation.
    pub one_q_overrotation: T,
    /// Probability a clean qubit is flagged leaked at readout.
    pub detection_false_positive: T,
    /// Probability a leaked qubit escapes the flag.
    pub detection_false_negative: T,
}

impl<T: Real> Default for NoiseConfig<T> {
    fn default() -> Self {
        NoiseConfig {
            two_qubit_channel: None,
            leak_prob_2q: T::zero(),
            coherent_memory_angle: T::zero(),
            one_q_overrotation: T::zero(),
            detection_false_positive: T::zero(),
            detection_false_negative: T::zero(),
        }
    }
}

/// One measured shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotRecord {
    /// Readout bits, leaked qubits forced to 1, heralded qubits scrubbed.
    pub bits: u128,
    /// Qubits flagged by the leakage detector.
    pub herald_mask: u128,
    /// Qubits whose bit was replaced by a fair coin (equals the heralds).
    pub replaced_mask: u128,
    /// Herald count.
    pub m: u32,
    /// Stream seed the shot was drawn with.
    pub seed: u64,
}

fn memory_slot(kind: MomentKind) -> bool {
    matches!(
        kind,
        MomentKind::SingleQubit { .. } | MomentKind::ZzLayer { .. } | MomentKind::PauliFrame
    )
}

fn apply_noisy_moment<T: Real>(
    state: &mut StateVector<T>,
    moment: &Moment<T>,
    noise: &NoiseConfig<T>,
    leaked: &mut u128,
    rng: &mut impl Rng,
) {
    if noise.coherent_memory_angle != T::zero() && memory_slot(moment.kind) {
        for q in 0..state.n() {
            if *leaked >> q & 1 == 0 {
                state.apply_z_phase(q, noise.coherent_memory_angle);
            }
        }
    }
    for gate in &moment.gates {
        match gate {
            Gate::OneQ { q, theta, phi } => {
                if *leaked >> q & 1 == 0 {
                    state.apply_one_q(*q, *theta + noise.one_q_overrotation, *phi);
                }
            }
            Gate::Zz { a, b, angle } => {
                for &q in &[*a, *b] {
                    if *leaked >> q & 1 == 0
                        && cst::<T>(rng.gen::<f64>()) < noise.leak_prob_2q
                    {
                        *leaked |= 1 << q;
                    }
                }
                if (*leaked >> *a | *leaked >> *b) & 1 == 0 {
                    state.apply_zz(*a, *b, *angle);
                    if let Some(channel) = &noise.two_qubit_channel {
                        let j = channel.sample(rng);
                        if j != 0 {
                            state.apply_pauli(&crate::noise::pauli_string_for(j, *a, *b));
                        }
                    }
                }
            }
            Gate::PauliInsertion { pauli, .. } => {
                if pauli.support() & *leaked == 0 {
                    state.apply_pauli(pauli);
                }
            }
            Gate::Herald { .. } => {}
        }
    }
}

/// Execute one noisy shot. The draw order is fixed (leak checks in gate
/// order, then the channel draw; readout sample; herald draws in herald-gate
/// order; scrub coins in ascending qubit order), so a given `(circuit,
/// noise, rng stream)` triple always produces the same record.
pub fn run_noisy_shot<T: Real>(
    circuit: &Circuit<T>,
    init: &StateVector<T>,
    noise: &NoiseConfig<T>,
    rng: &mut impl Rng,
    seed: u64,
) -> Result<ShotRecord> {
    if circuit.n != init.n() {
        return Err(Error::config(format!(
            "circuit on {} qubits, state on {}",
            circuit.n,
            init.n()
        )));
    }
    let mut state = init.clone();
    let mut leaked = 0u128;
    let mut herald_qubits: Vec<usize> = Vec::new();
    for moment in &circuit.moments {
        apply_noisy_moment(&mut state, moment, noise, &mut leaked, rng);
        for gate in &moment.gates {
            if let Gate::Herald { q } = gate {
                herald_qubits.push(*q);
            }
        }
    }
    state.check_norm()?;

    let mut bits = state.sample_bits(rng);
    bits |= leaked;

    let mut herald_mask = 0u128;
    for &q in &herald_qubits {
        let u: T = cst(rng.gen::<f64>());
        let flagged = if leaked >> q & 1 == 1 {
            u >= noise.detection_false_negative
        } else {
            u < noise.detection_false_positive
        };
        if flagged {
            herald_mask |= 1 << q;
        }
    }

    let replaced = herald_mask;
    let mut scrub = herald_mask;
    while scrub != 0 {
        let q = scrub.trailing_zeros() as usize;
        scrub &= scrub - 1;
        let coin = rng.gen::<bool>();
        bits = (bits & !(1u128 << q)) | ((coin as u128) << q);
    }

    Ok(ShotRecord {
        bits,
        herald_mask,
        replaced_mask: replaced,
        m: herald_mask.count_ones(),
        seed,
    })
}

/// Run a noisy trajectory without readout, reporting the state at every
/// marked Trotter-step boundary: `observe(0, state, 0)` fires before any
/// gate, then `observe(s+1, state, leaked)` after the rotation layer that
/// closes step `s`. Build the circuit with `merge_x_layers` off so every
/// boundary is physical. Readout, heralding, and scrubbing never happen
/// here; leaked qubits are reported through the mask instead.
pub fn run_noisy_trajectory<T: Real>(
    circuit: &Circuit<T>,
    init: &StateVector<T>,
    noise: &NoiseConfig<T>,
    rng: &mut impl Rng,
    mut observe: impl FnMut(usize, &StateVector<T>, u128),
) -> Result<()> {
    let mut state = init.clone();
    let mut leaked = 0u128;
    observe(0, &state, leaked);
    for moment in &circuit.moments {
        apply_noisy_moment(&mut state, moment, noise, &mut leaked, rng);
        if let MomentKind::SingleQubit {
            closes_step: Some(s),
        } = moment.kind
        {
            observe(s + 1, &state, leaked);
        }
    }
    state.check_norm()?;
    Ok(())
}

/// Mean with a standard error and the sample count behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub mean: T,
    pub stderr: T,
    pub n: usize,
}

impl<T: Real> Estimate<T> {
    pub fn from_values(values: &[T]) -> Self {
        let (mean, stderr) = mean_and_stderr(values);
        Estimate {
            mean,
            stderr,
            n: values.len(),
        }
    }
}

/// Per-site squared magnetization from one shot. Diagonal terms contribute
/// exactly; cross terms touching a scrubbed qubit are dropped (the coin
/// carries no signal), the rest come from the measured bits.
pub fn ztot2_from_shot<T: Real>(record: &ShotRecord, n: usize) -> T {
    let usable_mask = !record.replaced_mask & ((1u128 << n) - 1);
    let usable = usable_mask.count_ones() as i64;
    let mut s: i64 = 0;
    for q in 0..n {
        if usable_mask >> q & 1 == 1 {
            s += if record.bits >> q & 1 == 0 { 1 } else { -1 };
        }
    }
    let n_i = n as i64;
    cst::<T>((n_i + s * s - usable) as f64) / cst::<T>((n_i * n_i) as f64)
}

/// `<Z_a Z_b>` from one shot; zero when either qubit was scrubbed.
pub fn zz_from_shot<T: Real>(record: &ShotRecord, a: usize, b: usize) -> T {
    if (record.replaced_mask >> a | record.replaced_mask >> b) & 1 == 1 {
        return T::zero();
    }
    let parity = (record.bits >> a ^ record.bits >> b) & 1;
    if parity == 0 {
        T::one()
    } else {
        -T::one()
    }
}

/// Average [`ztot2_from_shot`] over records.
pub fn estimate_ztot2<T: Real>(records: &[ShotRecord], n: usize) -> Estimate<T> {
    let values: Vec<T> = records.iter().map(|r| ztot2_from_shot(r, n)).collect();
    Estimate::from_values(&values)
}

/// Herald-count bin of an observable.
#[derive(Debug, Clone, Copy)]
pub struct HeraldBin<T> {
    pub m: u32,
    pub estimate: Estimate<T>,
}

/// Group shots by herald count and estimate the observable per bin,
/// ascending in `m`.
pub fn bin_ztot2_by_heralds<T: Real>(records: &[ShotRecord], n: usize) -> Vec<HeraldBin<T>> {
    let max_m = records.iter().map(|r| r.m).max().unwrap_or(0);
    let mut bins = Vec::new();
    for m in 0..=max_m {
        let values: Vec<T> = records
            .iter()
            .filter(|r| r.m == m)
            .map(|r| ztot2_from_shot(r, n))
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

/// A reproducible batch of noisy shots over a fixed logical circuit.
///
/// Per shot, a fresh stream generator is seeded from `(master_seed,
/// stream_offset + index)`; randomized compiling and noise-amplification
/// insertions are redrawn inside that stream, so results are independent of
/// thread scheduling.
#[derive(Clone)]
pub struct ShotPlan<'a, T: Real = f64> {
    pub circuit: &'a Circuit<T>,
    pub init: &'a StateVector<T>,
    pub noise: &'a NoiseConfig<T>,
    /// Redraw a randomized-compiling frame per shot.
    pub rc_per_shot: bool,
    /// Insert amplification draws per shot at this factor.
    pub amplify: Option<(&'a PauliChannel<T>, T)>,
    pub shots: usize,
    pub master_seed: u64,
    pub stream_offset: u64,
}

fn shot_circuit<T: Real>(
    plan: &ShotPlan<'_, T>,
    rng: &mut impl Rng,
) -> Result<Circuit<T>> {
    let mut circuit = None;
    if plan.rc_per_shot {
        circuit = Some(apply_randomized_compiling(plan.circuit, rng)?);
    }
    if let Some((channel, alpha)) = plan.amplify {
        let base = circuit.as_ref().unwrap_or(plan.circuit);
        circuit = Some(amplify_noise(base, channel, alpha, rng)?);
    }
    Ok(circuit.unwrap_or_else(|| plan.circuit.clone()))
}

/// Run the plan in parallel; records are ordered by shot index.
pub fn run_noisy_shots<T: Real>(plan: &ShotPlan<'_, T>) -> Result<Vec<ShotRecord>> {
    (0..plan.shots)
        .into_par_iter()
        .map(|i| {
            let seed = crate::rng::stream_seed(plan.master_seed, plan.stream_offset + i as u64);
            let mut rng = stream_rng(plan.master_seed, plan.stream_offset + i as u64);
            let circuit = shot_circuit(plan, &mut rng)?;
            run_noisy_shot(&circuit, plan.init, plan.noise, &mut rng, seed)
        })
        .collect()
}

/// Trajectory-average `<Z_tot^2>` at every step boundary, 0 through the
/// step count of the plan's circuit. Exact per-trajectory expectations
/// replace readout sampling, so the only variance left is over error draws.
pub fn run_ztot2_trajectories<T: Real>(plan: &ShotPlan<'_, T>) -> Result<Vec<Estimate<T>>> {
    let steps = plan.circuit.meta.steps;
    let per_traj: Vec<Vec<T>> = (0..plan.shots)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(plan.master_seed, plan.stream_offset + i as u64);
            let circuit = shot_circuit(plan, &mut rng)?;
            let mut values = vec![T::zero(); steps + 1];
            run_noisy_trajectory(
                &circuit,
                plan.init,
                plan.noise,
                &mut rng,
                |s, state, leaked| {
                    if s < values.len() {
                        values[s] = state.ztot2_with_leaked(leaked);
                    }
                },
            )?;
            Ok(values)
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(steps + 1);
    for s in 0..=steps {
        let column: Vec<T> = per_traj.iter().map(|v| v[s]).collect();
        out.push(Estimate::from_values(&column));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::transform::apply_dynamical_decoupling;
    use crate::circuit::{build_trotter, QuenchSpec};
    use crate::lattice::Lattice;
    use approx::assert_relative_eq;

    fn spec(nx: usize, ny: usize, steps: usize, merged: bool) -> QuenchSpec<f64> {
        let lattice = Lattice::new(nx, ny).unwrap();
        let mut s = QuenchSpec::uniform(lattice, -1.0, 2.0, 0.25, steps, -0.5);
        s.merge_x_layers = merged;
        s
    }

    #[test]
    fn product_state_magnetization() {
        let theta = 0.7f64;
        let state = StateVector::product(&[theta; 4]).unwrap();
        assert_relative_eq!(state.norm_sqr(), 1.0, epsilon = 1e-12);
        for q in 0..4 {
            let mut z = 0.0;
            for (idx, amp) in state.amplitudes().iter().enumerate() {
                let sign = if idx >> q & 1 == 0 { 1.0 } else { -1.0 };
                z += amp.norm_sqr() * sign;
            }
            assert_relative_eq!(z, theta.cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn ztot2_limits() {
        let zeros = StateVector::<f64>::zero(5).unwrap();
        assert_relative_eq!(zeros.ztot2(), 1.0, epsilon = 1e-12);
        let plus = StateVector::product(&[std::f64::consts::FRAC_PI_2; 5]).unwrap();
        assert_relative_eq!(plus.ztot2(), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn pauli_application_signs() {
        let mut state = StateVector::<f64>::zero(2).unwrap();
        state.apply_pauli(&PauliString::parse("YI").unwrap());
        // Y|0> = i|1>.
        assert_relative_eq!(state.amplitudes()[1].im, 1.0, epsilon = 1e-12);
        state.apply_pauli(&PauliString::parse("YI").unwrap());
        assert_relative_eq!(state.amplitudes()[0].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn one_q_rotation_matches_matrix() {
        let theta = 0.9f64;
        let phi = 2.4f64;
        let mut state = StateVector::<f64>::zero(1).unwrap();
        state.apply_one_q(0, theta, phi);
        let half = theta / 2.0;
        assert_relative_eq!(state.amplitudes()[0].re, half.cos(), epsilon = 1e-12);
        let expect = C::<f64>::new(0.0, -1.0) * C::from_polar(1.0, phi) * half.sin();
        assert_relative_eq!(state.amplitudes()[1].re, expect.re, epsilon = 1e-12);
        assert_relative_eq!(state.amplitudes()[1].im, expect.im, epsilon = 1e-12);
    }

    #[test]
    fn zz_gate_phases() {
        let amps = vec![C::new(0.5, 0.0); 4];
        let mut state = StateVector::from_amplitudes(2, amps).unwrap();
        state.apply_zz(0, 1, 1.0);
        let same = C::<f64>::from_polar(0.5, -0.5);
        let diff = C::<f64>::from_polar(0.5, 0.5);
        for (idx, amp) in state.amplitudes().iter().enumerate() {
            let expect = if idx == 0 || idx == 3 { same } else { diff };
            assert_relative_eq!(amp.re, expect.re, epsilon = 1e-12);
            assert_relative_eq!(amp.im, expect.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn merged_and_unmerged_agree() {
        let init = StateVector::product(&[-0.5f64; 6]).unwrap();
        let merged = run_ideal(&build_trotter(&spec(3, 2, 4, true)).unwrap(), &init).unwrap();
        let unmerged =
            run_ideal(&build_trotter(&spec(3, 2, 4, false)).unwrap(), &init).unwrap();
        assert!((merged.overlap(&unmerged).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transforms_preserve_the_unitary() {
        let init = StateVector::product(&[-0.5f64; 6]).unwrap();
        let base = build_trotter(&spec(2, 3, 3, true)).unwrap();
        let reference = run_ideal(&base, &init).unwrap();
        let dd = apply_dynamical_decoupling(&base).unwrap();
        let dd_state = run_ideal(&dd, &init).unwrap();
        assert!((reference.overlap(&dd_state).norm() - 1.0).abs() < 1e-11);
        for seed in 0..3 {
            let mut rng = stream_rng(seed, 0);
            let rc = apply_randomized_compiling(&dd, &mut rng).unwrap();
            let rc_state = run_ideal(&rc, &init).unwrap();
            assert!((reference.overlap(&rc_state).norm() - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn certain_channel_flips_measurements() {
        let channel = PauliChannel::from_error_probs(&[(5, 1.0f64)]).unwrap(); // XX
        let lattice = Lattice::new(2, 2).unwrap();
        let spec = QuenchSpec::uniform(lattice, -1.0, 0.0, 0.25, 1, 0.0);
        let circuit = build_trotter(&spec).unwrap();
        let init = StateVector::product(&spec.thetas).unwrap();
        let noise = NoiseConfig {
            two_qubit_channel: Some(channel),
            ..NoiseConfig::default()
        };
        let mut rng = stream_rng(0, 0);
        // Starting from |0000> with h = 0, every gate is diagonal except the
        // inserted XX errors; each qubit sees one X per touching gate.
        let record = run_noisy_shot(&circuit, &init, &noise, &mut rng, 0).unwrap();
        // 2x2 torus after dedup: each qubit touches 2 edges, so the X count
        // per qubit is even and the state returns to |0000>.
        assert_eq!(record.bits, 0);
        assert_eq!(record.m, 0);
    }

    #[test]
    fn leakage_forces_heralded_ones() {
        let lattice = Lattice::new(2, 2).unwrap();
        let spec = QuenchSpec::uniform(lattice, -1.0, 2.0, 0.25, 2, 0.3);
        let circuit = build_trotter(&spec).unwrap();
        let init = StateVector::product(&spec.thetas).unwrap();
        let noise = NoiseConfig {
            leak_prob_2q: 1.0,
            ..NoiseConfig::default()
        };
        let mut rng = stream_rng(7, 0);
        let record = run_noisy_shot(&circuit, &init, &noise, &mut rng, 0).unwrap();
        assert_eq!(record.m, 4);
        assert_eq!(record.herald_mask, 0b1111);
        assert_eq!(record.replaced_mask, 0b1111);
        let value: f64 = ztot2_from_shot(&record, 4);
        assert_relative_eq!(value, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn scrubbed_estimator_drops_cross_terms() {
        let record = ShotRecord {
            bits: 0b0110,
            herald_mask: 0b0100,
            replaced_mask: 0b0100,
            m: 1,
            seed: 0,
        };
        // Usable signs: q0 +1, q1 -1, q3 +1 so S = 1; value = (4 + 1 - 3)/16.
        let value: f64 = ztot2_from_shot(&record, 4);
        assert_relative_eq!(value, 2.0 / 16.0, epsilon = 1e-12);
        assert_relative_eq!(zz_from_shot::<f64>(&record, 1, 2), 0.0);
        assert_relative_eq!(zz_from_shot::<f64>(&record, 0, 3), 1.0);
        assert_relative_eq!(zz_from_shot::<f64>(&record, 0, 1), -1.0);
    }

    #[test]
    fn shot_batches_are_thread_count_invariant() {
        let lattice = Lattice::new(3, 3).unwrap();
        let qspec = QuenchSpec::uniform(lattice, -1.0, 2.0, 0.25, 3, -0.5);
        let circuit = build_trotter(&qspec).unwrap();
        let init = StateVector::product(&qspec.thetas).unwrap();
        let noise = NoiseConfig {
            two_qubit_channel: Some(PauliChannel::uniform_depolarizing(0.05).unwrap()),
            leak_prob_2q: 0.01,
            detection_false_positive: 0.01,
            detection_false_negative: 0.1,
            ..NoiseConfig::default()
        };
        let channel = PauliChannel::uniform_depolarizing(0.05).unwrap();
        let plan = ShotPlan {
            circuit: &circuit,
            init: &init,
            noise: &noise,
            rc_per_shot: true,
            amplify: Some((&channel, 3.0)),
            shots: 40,
            master_seed: 123,
            stream_offset: 0,
        };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_noisy_shots(&plan).unwrap());
        let quad = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_noisy_shots(&plan).unwrap());
        assert_eq!(single, quad);
    }

    #[test]
    fn trajectory_mode_matches_ideal_when_noiseless() {
        let qspec = spec(3, 2, 3, false);
        let circuit = build_trotter(&qspec).unwrap();
        let init = StateVector::product(&qspec.thetas).unwrap();
        let noise = NoiseConfig::default();
        let plan = ShotPlan {
            circuit: &circuit,
            init: &init,
            noise: &noise,
            rc_per_shot: false,
            amplify: None,
            shots: 2,
            master_seed: 5,
            stream_offset: 0,
        };
        let series = run_ztot2_trajectories(&plan).unwrap();
        assert_eq!(series.len(), 4);
        assert_relative_eq!(series[0].mean, init.ztot2(), epsilon = 1e-12);
        for s in 1..=3 {
            let partial = build_trotter(&QuenchSpec {
                steps: s,
                ..qspec.clone()
            })
            .unwrap();
            let reference = run_ideal(&partial, &init).unwrap().ztot2();
            assert_relative_eq!(series[s].mean, reference, epsilon = 1e-10);
        }
    }
}
