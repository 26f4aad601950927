//! Trotter circuits for the transverse-field Ising model on a torus.
//!
//! A circuit is an ordered list of [`Moment`]s. Gates inside one moment act
//! on pairwise disjoint qubits, so a moment corresponds to one parallel
//! instruction cycle on hardware. [`build_trotter`] produces the second-order
//! product formula for a [`QuenchSpec`]; the [`transform`] submodule adds
//! dynamical decoupling, randomized compiling, and noise-amplification
//! insertions on top of a built circuit.

pub mod text;
pub mod transform;

use crate::error::Error;
use crate::lattice::Lattice;
use crate::pauli::PauliString;
use crate::real::Real;
use crate::Result;

/// Marks why a non-logical Pauli was inserted into the circuit.
///
/// Inserted Paulis are part of the noise model, not the logical unitary, and
/// every ideal execution path skips them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertionTag {
    /// Extra channel draw used to scale the entangling-gate error rate.
    NoiseAmplification,
}

/// One scheduled operation.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate<T> {
    /// `exp(-i angle Z_a Z_b / 2)`.
    Zz { a: usize, b: usize, angle: T },
    /// Rotation by `theta` about the equatorial axis `cos(phi) X + sin(phi) Y`.
    OneQ { q: usize, theta: T, phi: T },
    /// Non-logical Pauli error inserted deliberately (see [`InsertionTag`]).
    PauliInsertion { pauli: PauliString, tag: InsertionTag },
    /// Leakage detection on one qubit at readout time.
    Herald { q: usize },
}

impl<T: Real> Gate<T> {
    /// Single-qubit rotation with the angle pair brought to canonical form:
    /// `theta` in `[0, pi]` and `phi` in `[0, 2*pi)`.
    pub fn one_q(q: usize, theta: T, phi: T) -> Self {
        let (theta, phi) = canonical_angles(theta, phi);
        Gate::OneQ { q, theta, phi }
    }

    /// Qubits the gate touches.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Zz { a, b, .. } => vec![*a, *b],
            Gate::OneQ { q, .. } | Gate::Herald { q } => vec![*q],
            Gate::PauliInsertion { pauli, .. } => {
                let mut qs = Vec::new();
                let mut mask = pauli.support();
                while mask != 0 {
                    qs.push(mask.trailing_zeros() as usize);
                    mask &= mask - 1;
                }
                qs
            }
        }
    }

    /// True for gates that belong to the logical unitary.
    pub fn is_logical(&self) -> bool {
        matches!(self, Gate::Zz { .. } | Gate::OneQ { .. })
    }
}

/// Reduce `(theta, phi)` so that `theta` lands in `[0, pi]` and `phi` in
/// `[0, 2*pi)` without changing the rotation.
pub fn canonical_angles<T: Real>(theta: T, phi: T) -> (T, T) {
    let two_pi = T::TAU();
    let mut theta = theta % two_pi;
    if theta < T::zero() {
        theta += two_pi;
    }
    let mut phi = phi;
    if theta > T::PI() {
        // R(theta, phi) = R(2*pi - theta, phi + pi) up to global phase.
        theta = two_pi - theta;
        phi += T::PI();
    }
    let mut phi = phi % two_pi;
    if phi < T::zero() {
        phi += two_pi;
    }
    (theta, phi)
}

/// Role of a moment within the Trotter schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentKind {
    /// Transverse-field rotation layer. `closes_step` names the Trotter step
    /// whose second half-rotation this layer completes, when it does.
    SingleQubit { closes_step: Option<usize> },
    /// One parallel layer of ZZ gates within a Trotter step.
    ZzLayer { step: usize, layer: usize },
    /// Physical single-qubit gates realizing a Pauli frame change
    /// (dynamical decoupling echoes and randomized-compiling twirls).
    PauliFrame,
    /// Deliberately inserted Pauli errors.
    Insertion,
    /// Readout-time leakage detection flags.
    Heralds,
}

/// A set of gates executed in parallel.
#[derive(Debug, Clone, PartialEq)]
pub struct Moment<T> {
    pub kind: MomentKind,
    pub gates: Vec<Gate<T>>,
}

impl<T: Real> Moment<T> {
    /// True when no two gates share a qubit.
    pub fn qubits_disjoint(&self) -> bool {
        let mut seen = 0u128;
        for gate in &self.gates {
            for q in gate.qubits() {
                let bit = 1u128 << q;
                if seen & bit != 0 {
                    return false;
                }
                seen |= bit;
            }
        }
        true
    }
}

/// Construction metadata carried alongside the moment list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CircuitMeta {
    /// Trotter steps the circuit implements.
    pub steps: usize,
    /// ZZ layers per step (4 on a torus with both extents even).
    pub layers_per_step: usize,
    /// Whether adjacent half-rotations between steps were merged.
    pub merged_x: bool,
    /// Dynamical decoupling applied.
    pub dd: bool,
    /// Randomized compiling applied.
    pub rc: bool,
    /// Noise-amplification insertions present.
    pub amplified: bool,
}

/// An ordered moment list over `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit<T> {
    pub n: usize,
    pub moments: Vec<Moment<T>>,
    pub meta: CircuitMeta,
}

impl<T: Real> Circuit<T> {
    /// Total gate count across all moments.
    pub fn gate_count(&self) -> usize {
        self.moments.iter().map(|m| m.gates.len()).sum()
    }

    /// Count of gates matching a predicate.
    pub fn count_gates(&self, pred: impl Fn(&Gate<T>) -> bool) -> usize {
        self.moments
            .iter()
            .flat_map(|m| m.gates.iter())
            .filter(|g| pred(g))
            .count()
    }

    /// Every moment acts on pairwise disjoint qubits.
    pub fn moments_disjoint(&self) -> bool {
        self.moments.iter().all(Moment::qubits_disjoint)
    }
}

/// Parameters of one quench experiment: the model, the Trotter step, and the
/// initial product state `prod_j (cos(theta_j/2)|0> + sin(theta_j/2)|1>)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuenchSpec<T> {
    pub lattice: Lattice,
    /// Ising coupling on every edge.
    pub j: T,
    /// Transverse-field strength.
    pub h: T,
    /// Trotter step duration.
    pub dt: T,
    /// Number of Trotter steps.
    pub steps: usize,
    /// Initial-state polar angle per site.
    pub thetas: Vec<T>,
    /// Merge the adjacent half-rotations between consecutive steps.
    pub merge_x_layers: bool,
}

impl<T: Real> QuenchSpec<T> {
    /// Spec with the same initial angle on every site.
    pub fn uniform(lattice: Lattice, j: T, h: T, dt: T, steps: usize, theta: T) -> Self {
        let thetas = vec![theta; lattice.n()];
        QuenchSpec {
            lattice,
            j,
            h,
            dt,
            steps,
            thetas,
            merge_x_layers: true,
        }
    }

    /// Check the per-site angle list length.
    pub fn validate(&self) -> Result<()> {
        if self.thetas.len() != self.lattice.n() {
            return Err(Error::config(format!(
                "initial-state angles cover {} sites but the lattice has {}",
                self.thetas.len(),
                self.lattice.n()
            )));
        }
        Ok(())
    }
}

/// Build the second-order Trotter circuit
/// `[X(h dt)] ([ZZ layers] [X(2 h dt)])^(s-1) [ZZ layers] [X(h dt)]`.
///
/// Each ZZ layer applies `exp(-i (2 J dt) Z_a Z_b / 2)` across one parallel
/// edge set from [`Lattice::edge_layers`]. With `merge_x_layers` off, every
/// step carries its own pair of half-rotations. `steps == 0` yields an empty
/// circuit. A trailing [`MomentKind::Heralds`] moment flags every qubit for
/// leakage detection at readout.
pub fn build_trotter<T: Real>(spec: &QuenchSpec<T>) -> Result<Circuit<T>> {
    spec.validate()?;
    let n = spec.lattice.n();
    let layers = spec.lattice.edge_layers();
    let zz_angle = crate::real::cst::<T>(2.0) * spec.j * spec.dt;
    let x_half = spec.h * spec.dt;
    let x_full = crate::real::cst::<T>(2.0) * x_half;

    let mut moments = Vec::new();
    let x_moment = |theta: T, closes_step: Option<usize>| Moment {
        kind: MomentKind::SingleQubit { closes_step },
        gates: (0..n).map(|q| Gate::one_q(q, theta, T::zero())).collect(),
    };

    if spec.steps > 0 {
        moments.push(x_moment(x_half, None));
        for step in 0..spec.steps {
            for (layer, edges) in layers.iter().enumerate() {
                moments.push(Moment {
                    kind: MomentKind::ZzLayer { step, layer },
                    gates: edges
                        .iter()
                        .map(|&(a, b)| Gate::Zz { a, b, angle: zz_angle })
                        .collect(),
                });
            }
            let last = step + 1 == spec.steps;
            if last {
                moments.push(x_moment(x_half, Some(step)));
            } else if spec.merge_x_layers {
                moments.push(x_moment(x_full, None));
            } else {
                moments.push(x_moment(x_half, Some(step)));
                moments.push(x_moment(x_half, None));
            }
        }
    }
    moments.push(Moment {
        kind: MomentKind::Heralds,
        gates: (0..n).map(|q| Gate::Herald { q }).collect(),
    });

    Ok(Circuit {
        n,
        moments,
        meta: CircuitMeta {
            steps: spec.steps,
            layers_per_step: layers.len(),
            merged_x: spec.merge_x_layers,
            ..CircuitMeta::default()
        },
    })
}
