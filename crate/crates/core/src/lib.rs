//! Digitized dynamics of the transverse-field Ising model on a periodic
//! rectangular lattice.
//!
//! The crate covers the full simulation pipeline at desk scale:
//!
//! * [`lattice`]: torus geometry, edge layering, and the 4N-element
//!   space-group used for operator canonicalization.
//! * [`circuit`]: second-order Trotter circuits plus the hardware-motivated
//!   transforms (dynamical decoupling, randomized compiling, stochastic
//!   noise amplification).
//! * [`sim`]: dense statevector execution, ideal and noisy (stochastic Pauli
//!   channels, leakage with heralded readout, coherent control errors).
//! * [`noise`]: Pauli-channel bookkeeping and cycle-benchmarking noise
//!   learning for the two-qubit entangling cycle.
//! * [`mitigation`]: zero-noise extrapolation with variance-optimal
//!   amplification parameters, and zero-noise regression over heralded
//!   leakage counts.
//! * [`spd`]: a sparse Pauli dynamics propagator in the Heisenberg picture
//!   with symmetry-merged canonical terms.
//! * [`analysis`]: order-parameter and energy-transport observables,
//!   effective-Hamiltonian (Magnus) corrections, thermal references, and
//!   hydrodynamic fits.
//!
//! Numeric kernels are generic over the scalar type through [`real::Real`]
//! (`f64` by default, `f32` supported); concrete aliases for the common
//! instantiations are exported at the crate root.

pub mod analysis;
pub mod circuit;
pub mod error;
pub mod fit;
pub mod lattice;
pub mod mitigation;
pub mod noise;
pub mod pauli;
pub mod real;
pub mod rng;
pub mod sim;
pub mod spd;

pub use error::Error;
pub use lattice::Lattice;
pub use pauli::PauliString;
pub use real::Real;

/// Convenient result alias used across the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Library version, for run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Double-precision quench description.
pub type QuenchSpec64 = circuit::QuenchSpec<f64>;
/// Single-precision quench description.
pub type QuenchSpec32 = circuit::QuenchSpec<f32>;
/// Double-precision gate sequence.
pub type Circuit64 = circuit::Circuit<f64>;
/// Single-precision gate sequence.
pub type Circuit32 = circuit::Circuit<f32>;
/// Double-precision dense state.
pub type StateVector64 = sim::StateVector<f64>;
/// Single-precision dense state.
pub type StateVector32 = sim::StateVector<f32>;
/// Double-precision Heisenberg-picture operator.
pub type PauliSum64 = spd::PauliSum<f64>;
/// Single-precision Heisenberg-picture operator.
pub type PauliSum32 = spd::PauliSum<f32>;
