//! Hardware-motivated circuit transforms.
//!
//! All three transforms preserve the logical unitary of the untransformed
//! circuit (noise amplification does so for the ideal part; its insertions
//! are tagged error gates):
//!
//! * dynamical decoupling inserts an X echo on every qubit before each
//!   entangling layer, squaring off with a compensating echo when a step has
//!   an odd layer count;
//! * randomized compiling twirls each group of two consecutive entangling
//!   layers with a uniform Pauli, pushed through the ZZ gates as an angle
//!   sign flip where it anticommutes;
//! * noise amplification inserts extra channel draws so the effective
//!   entangling error rate scales by a chosen factor.
//!
//! Echo and twirl Paulis landing at the same slot fuse, so each qubit sees
//! at most two physical rotations per insertion point (two only for a net
//! Z, realized as a Y pulse followed by an X pulse). Pulse phases alternate
//! per qubit to cancel accumulated frame phases: an X pulse is emitted with
//! phase `sx * pi`, a Y pulse with `pi/2 + sy * pi`, where the parities
//! update as the basic rule (X flips `sx`; Y flips both) or the extended
//! rule (every pulse flips both).

use rand::{Rng, RngCore};

use super::{Circuit, Gate, Moment, MomentKind};
use crate::error::Error;
use crate::noise::PauliChannel;
use crate::pauli::SitePauli;
use crate::real::{cst, Real};
use crate::Result;

/// Which transforms to apply in one pass.
#[derive(Debug, Clone, Copy, Default)]
pub struct TransformOptions {
    pub dd: bool,
    pub rc: bool,
    /// Use the extended phase rule (every echo pulse flips both parities).
    pub extended_phase_rule: bool,
}

/// Insert dynamical-decoupling echoes (basic phase rule).
pub fn apply_dynamical_decoupling<T: Real>(circuit: &Circuit<T>) -> Result<Circuit<T>> {
    apply_transforms(
        circuit,
        TransformOptions {
            dd: true,
            ..TransformOptions::default()
        },
        None,
    )
}

/// Insert dynamical-decoupling echoes with an explicit phase rule.
pub fn apply_dynamical_decoupling_with_rule<T: Real>(
    circuit: &Circuit<T>,
    extended_phase_rule: bool,
) -> Result<Circuit<T>> {
    apply_transforms(
        circuit,
        TransformOptions {
            dd: true,
            rc: false,
            extended_phase_rule,
        },
        None,
    )
}

/// Twirl the entangling layers with fresh uniform Paulis. Accepts a plain
/// or a DD-transformed circuit; existing echoes are refused into the new
/// frame schedule.
pub fn apply_randomized_compiling<T: Real, R: RngCore>(
    circuit: &Circuit<T>,
    rng: &mut R,
) -> Result<Circuit<T>> {
    apply_transforms(
        circuit,
        TransformOptions {
            dd: circuit.meta.dd,
            rc: true,
            extended_phase_rule: false,
        },
        Some(rng as &mut dyn RngCore),
    )
}

/// Tracks the per-qubit pulse-phase parities across the whole circuit.
struct FrameCompiler {
    pending: Vec<SitePauli>,
    sx: Vec<bool>,
    sy: Vec<bool>,
    extended: bool,
}

impl FrameCompiler {
    fn new(n: usize, extended: bool) -> Self {
        FrameCompiler {
            pending: vec![SitePauli::I; n],
            sx: vec![false; n],
            sy: vec![false; n],
            extended,
        }
    }

    fn multiply(&mut self, q: usize, p: SitePauli) {
        self.pending[q] = product_ignoring_phase(self.pending[q], p);
    }

    fn multiply_all(&mut self, p: SitePauli) {
        for q in 0..self.pending.len() {
            self.multiply(q, p);
        }
    }

    fn emit_x<T: Real>(&mut self, q: usize) -> Gate<T> {
        let phi = if self.sx[q] { T::PI() } else { T::zero() };
        self.sx[q] = !self.sx[q];
        if self.extended {
            self.sy[q] = !self.sy[q];
        }
        Gate::one_q(q, T::PI(), phi)
    }

    fn emit_y<T: Real>(&mut self, q: usize) -> Gate<T> {
        let phi = if self.sy[q] {
            T::PI() + T::FRAC_PI_2()
        } else {
            T::FRAC_PI_2()
        };
        self.sx[q] = !self.sx[q];
        self.sy[q] = !self.sy[q];
        Gate::one_q(q, T::PI(), phi)
    }

    /// Compile pending frames into at most two moments of physical pulses.
    fn flush<T: Real>(&mut self) -> Vec<Moment<T>> {
        let mut first: Vec<Gate<T>> = Vec::new();
        let mut second: Vec<Gate<T>> = Vec::new();
        for q in 0..self.pending.len() {
            match self.pending[q] {
                SitePauli::I => {}
                SitePauli::X => second.push(self.emit_x(q)),
                SitePauli::Y => second.push(self.emit_y(q)),
                SitePauli::Z => {
                    // Z as the operator product X * Y: Y pulse first.
                    first.push(self.emit_y(q));
                    second.push(self.emit_x(q));
                }
            }
            self.pending[q] = SitePauli::I;
        }
        let mut out = Vec::new();
        if !first.is_empty() {
            out.push(Moment {
                kind: MomentKind::PauliFrame,
                gates: first,
            });
        }
        if !second.is_empty() {
            out.push(Moment {
                kind: MomentKind::PauliFrame,
                gates: second,
            });
        }
        out
    }
}

/// Site-wise Pauli product with phases dropped; safe for frame layers,
/// where per-site phases combine into one global phase.
fn product_ignoring_phase(a: SitePauli, b: SitePauli) -> SitePauli {
    let (za, xa) = match a {
        SitePauli::I => (0u8, 0u8),
        SitePauli::X => (0, 1),
        SitePauli::Y => (1, 1),
        SitePauli::Z => (1, 0),
    };
    let (zb, xb) = match b {
        SitePauli::I => (0, 0),
        SitePauli::X => (0, 1),
        SitePauli::Y => (1, 1),
        SitePauli::Z => (1, 0),
    };
    match (za ^ zb, xa ^ xb) {
        (0, 0) => SitePauli::I,
        (0, 1) => SitePauli::X,
        (1, 1) => SitePauli::Y,
        _ => SitePauli::Z,
    }
}

/// Apply DD and/or RC in one pass over a circuit built by
/// [`super::build_trotter`]. A previously DD-transformed circuit is first
/// stripped back to its base schedule; RC-transformed or amplified circuits
/// are refused because their entangling angles are no longer the base ones.
pub fn apply_transforms<T: Real>(
    circuit: &Circuit<T>,
    opts: TransformOptions,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<Circuit<T>> {
    if circuit.meta.rc {
        return Err(Error::config(
            "circuit already carries a randomized-compiling frame",
        ));
    }
    if circuit.meta.amplified {
        return Err(Error::config(
            "noise-amplified circuits cannot be re-transformed",
        ));
    }
    if opts.rc && rng.is_none() {
        return Err(Error::config("randomized compiling needs a generator"));
    }

    let base: Vec<&Moment<T>> = circuit
        .moments
        .iter()
        .filter(|m| m.kind != MomentKind::PauliFrame)
        .collect();

    // Position of each entangling layer within its step.
    let mut step_lens: Vec<usize> = Vec::new();
    for m in &base {
        if let MomentKind::ZzLayer { step, .. } = m.kind {
            if step >= step_lens.len() {
                step_lens.resize(step + 1, 0);
            }
            step_lens[step] += 1;
        }
    }

    let n = circuit.n;
    let mut compiler = FrameCompiler::new(n, opts.extended_phase_rule);
    let mut out: Vec<Moment<T>> = Vec::new();
    let mut pos_in_step = 0usize;
    let mut current_step = usize::MAX;
    let mut twirl: Option<Vec<SitePauli>> = None;

    for moment in &base {
        match moment.kind {
            MomentKind::ZzLayer { step, .. } => {
                if step != current_step {
                    current_step = step;
                    pos_in_step = 0;
                }
                if opts.rc && pos_in_step % 2 == 0 {
                    let r = rng.as_mut().expect("checked above");
                    let fresh: Vec<SitePauli> = (0..n)
                        .map(|_| SitePauli::from_index(r.gen_range(0..4usize)))
                        .collect();
                    for (q, &p) in fresh.iter().enumerate() {
                        compiler.multiply(q, p);
                    }
                    twirl = Some(fresh);
                }
                if opts.dd {
                    compiler.multiply_all(SitePauli::X);
                }
                out.extend(compiler.flush());

                let gates = moment
                    .gates
                    .iter()
                    .map(|g| match (g, &twirl) {
                        (Gate::Zz { a, b, angle }, Some(p)) => {
                            let flip_a = matches!(p[*a], SitePauli::X | SitePauli::Y);
                            let flip_b = matches!(p[*b], SitePauli::X | SitePauli::Y);
                            let angle = if flip_a ^ flip_b { -*angle } else { *angle };
                            Gate::Zz { a: *a, b: *b, angle }
                        }
                        _ => g.clone(),
                    })
                    .collect();
                out.push(Moment {
                    kind: moment.kind,
                    gates,
                });

                let step_len = step_lens[step];
                let group_closes = pos_in_step % 2 == 1 || pos_in_step + 1 == step_len;
                if group_closes {
                    if let Some(p) = twirl.take() {
                        for (q, &f) in p.iter().enumerate() {
                            compiler.multiply(q, f);
                        }
                    }
                }
                if pos_in_step + 1 == step_len && opts.dd && step_len % 2 == 1 {
                    compiler.multiply_all(SitePauli::X);
                }
                pos_in_step += 1;
            }
            _ => {
                out.extend(compiler.flush());
                out.push((*moment).clone());
            }
        }
    }
    out.extend(compiler.flush());

    let mut meta = circuit.meta;
    meta.dd = opts.dd;
    meta.rc = opts.rc;
    Ok(Circuit {
        n,
        moments: out,
        meta,
    })
}

/// Insert extra channel draws before each entangling gate so its stochastic
/// error rate scales by `alpha`. Each non-identity outcome `j` is inserted
/// with probability `(alpha - 1) p_j`; the insertions carry
/// [`super::InsertionTag::NoiseAmplification`] and are skipped by ideal
/// execution.
pub fn amplify_noise<T: Real>(
    circuit: &Circuit<T>,
    channel: &PauliChannel<T>,
    alpha: T,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<Circuit<T>> {
    if circuit.meta.amplified {
        return Err(Error::config("circuit is already noise-amplified"));
    }
    if alpha < T::one() {
        return Err(Error::config(format!(
            "amplification factor {alpha} is below 1"
        )));
    }
    let excess = (alpha - T::one()) * channel.error_probability();
    if excess > T::one() {
        return Err(Error::config(format!(
            "amplification factor {alpha} pushes the insertion probability past 1"
        )));
    }

    let probs = channel.probabilities();
    let scale = alpha - T::one();
    let mut out: Vec<Moment<T>> = Vec::new();
    for moment in &circuit.moments {
        if matches!(moment.kind, MomentKind::ZzLayer { .. }) {
            let mut insertions: Vec<Gate<T>> = Vec::new();
            for gate in &moment.gates {
                if let Gate::Zz { a, b, .. } = gate {
                    let u: T = cst(rng.gen::<f64>());
                    let mut acc = T::zero();
                    for j in 1..16 {
                        acc += scale * probs[j].max(T::zero());
                        if u < acc {
                            insertions.push(Gate::PauliInsertion {
                                pauli: crate::noise::pauli_string_for(j, *a, *b),
                                tag: super::InsertionTag::NoiseAmplification,
                            });
                            break;
                        }
                    }
                }
            }
            if !insertions.is_empty() {
                out.push(Moment {
                    kind: MomentKind::Insertion,
                    gates: insertions,
                });
            }
        }
        out.push(moment.clone());
    }

    let mut meta = circuit.meta;
    meta.amplified = true;
    Ok(Circuit {
        n: circuit.n,
        moments: out,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_trotter, QuenchSpec};
    use crate::lattice::Lattice;
    use crate::rng::stream_rng;

    fn base(nx: usize, ny: usize, steps: usize) -> Circuit<f64> {
        let lattice = Lattice::new(nx, ny).unwrap();
        let spec = QuenchSpec::uniform(lattice, -1.0, 2.0, 0.25, steps, 0.4);
        build_trotter(&spec).unwrap()
    }

    /// Per-qubit product of all frame pulses, phases dropped.
    fn net_frame(circuit: &Circuit<f64>) -> Vec<SitePauli> {
        let mut net = vec![SitePauli::I; circuit.n];
        for moment in &circuit.moments {
            if moment.kind != MomentKind::PauliFrame {
                continue;
            }
            for gate in &moment.gates {
                if let Gate::OneQ { q, theta, phi } = gate {
                    assert!((theta - std::f64::consts::PI).abs() < 1e-12);
                    let frac = (phi / std::f64::consts::FRAC_PI_2).round() as i64 % 4;
                    let p = if frac % 2 == 0 { SitePauli::X } else { SitePauli::Y };
                    net[*q] = product_ignoring_phase(net[*q], p);
                }
            }
        }
        net
    }

    #[test]
    fn dd_echo_count_and_cancellation() {
        // 4x4 has four entangling layers per step: one echo moment per
        // layer, no compensation.
        let circuit = apply_dynamical_decoupling(&base(4, 4, 3)).unwrap();
        assert!(circuit.meta.dd);
        let frames = circuit
            .moments
            .iter()
            .filter(|m| m.kind == MomentKind::PauliFrame)
            .count();
        assert_eq!(frames, 4 * 3);
        assert!(net_frame(&circuit).iter().all(|&p| p == SitePauli::I));
        assert!(circuit.moments_disjoint());

        // 3x3 needs five layers, so each step squares off with an extra echo.
        let circuit = apply_dynamical_decoupling(&base(3, 3, 2)).unwrap();
        let frames = circuit
            .moments
            .iter()
            .filter(|m| m.kind == MomentKind::PauliFrame)
            .count();
        assert_eq!(frames, 6 * 2);
        assert!(net_frame(&circuit).iter().all(|&p| p == SitePauli::I));
    }

    #[test]
    fn dd_pulse_phases_alternate() {
        let circuit = apply_dynamical_decoupling(&base(4, 4, 2)).unwrap();
        let phases: Vec<f64> = circuit
            .moments
            .iter()
            .filter(|m| m.kind == MomentKind::PauliFrame)
            .flat_map(|m| m.gates.iter())
            .filter_map(|g| match g {
                Gate::OneQ { q: 0, phi, .. } => Some(*phi),
                _ => None,
            })
            .collect();
        assert_eq!(phases.len(), 8);
        for (i, phi) in phases.iter().enumerate() {
            let expect = if i % 2 == 0 { 0.0 } else { std::f64::consts::PI };
            assert!((phi - expect).abs() < 1e-12, "pulse {i} has phase {phi}");
        }
    }

    #[test]
    fn rc_flips_signs_and_cancels() {
        let mut rng = stream_rng(5, 0);
        let circuit = apply_randomized_compiling(&base(4, 4, 2), &mut rng).unwrap();
        assert!(circuit.meta.rc);
        let mut flipped = 0;
        let mut kept = 0;
        for moment in &circuit.moments {
            for gate in &moment.gates {
                if let Gate::Zz { angle, .. } = gate {
                    assert!((angle.abs() - 0.5).abs() < 1e-12);
                    if *angle > 0.0 {
                        flipped += 1;
                    } else {
                        kept += 1;
                    }
                }
            }
        }
        assert!(flipped > 0 && kept > 0);
        assert!(net_frame(&circuit).iter().all(|&p| p == SitePauli::I));
    }

    #[test]
    fn rc_over_dd_fuses_frames() {
        let dd = apply_dynamical_decoupling(&base(4, 4, 2)).unwrap();
        let mut rng = stream_rng(9, 0);
        let both = apply_randomized_compiling(&dd, &mut rng).unwrap();
        assert!(both.meta.dd && both.meta.rc);
        assert!(net_frame(&both).iter().all(|&p| p == SitePauli::I));

        // No insertion slot may pulse one qubit more than twice.
        let mut run: Vec<usize> = vec![0; both.n];
        let mut max_per_slot = 0;
        for moment in &both.moments {
            if moment.kind == MomentKind::PauliFrame {
                for gate in &moment.gates {
                    if let Gate::OneQ { q, .. } = gate {
                        run[*q] += 1;
                        max_per_slot = max_per_slot.max(run[*q]);
                    }
                }
            } else {
                run.iter_mut().for_each(|c| *c = 0);
            }
        }
        assert!(max_per_slot <= 2, "{max_per_slot} pulses in one slot");
    }

    #[test]
    fn transform_guards() {
        let mut rng = stream_rng(1, 0);
        let rc = apply_randomized_compiling(&base(3, 3, 1), &mut rng).unwrap();
        assert!(apply_randomized_compiling(&rc, &mut rng).is_err());
        assert!(apply_dynamical_decoupling(&rc).is_err());

        let channel = PauliChannel::uniform_depolarizing(0.3).unwrap();
        let amped = amplify_noise(&base(3, 3, 1), &channel, 2.0, &mut rng).unwrap();
        assert!(apply_dynamical_decoupling(&amped).is_err());
        assert!(amplify_noise(&amped, &channel, 2.0, &mut rng).is_err());
        assert!(amplify_noise(&base(3, 3, 1), &channel, 6.0, &mut rng).is_err());
    }

    #[test]
    fn amplification_inserts_tagged_paulis() {
        let channel = PauliChannel::uniform_depolarizing(0.5).unwrap();
        let mut rng = stream_rng(2, 0);
        let circuit = base(3, 3, 4);
        let amped = amplify_noise(&circuit, &channel, 2.0, &mut rng).unwrap();
        assert!(amped.meta.amplified);
        let inserted = amped.count_gates(|g| matches!(g, Gate::PauliInsertion { .. }));
        // 72 entangling gates, each inserting with probability 0.5.
        assert!(inserted > 15 && inserted < 60, "saw {inserted}");
        assert_eq!(
            amped.count_gates(|g| matches!(g, Gate::Zz { .. })),
            circuit.count_gates(|g| matches!(g, Gate::Zz { .. }))
        );

        let none = amplify_noise(&circuit, &channel, 1.0, &mut rng).unwrap();
        assert_eq!(
            none.count_gates(|g| matches!(g, Gate::PauliInsertion { .. })),
            0
        );
    }
}
