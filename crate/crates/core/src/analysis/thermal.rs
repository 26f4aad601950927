//! Dense canonical references for small lattices.
//!
//! Late-time observables of the quench relax toward thermal expectation
//! values of the effective Hamiltonian at the temperature fixed by the energy
//! of the initial state. On a handful of sites the canonical ensemble is
//! available exactly from the dense spectrum, giving an independent reference
//! for the dynamics without any sampling.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::Error;
use crate::lattice::Lattice;
use crate::spd::{expectation, BlochTable, PauliSum};
use crate::Result;

use super::magnus::{dense_real, effective_hamiltonian};

/// Eigendecomposition of a Hermitian Pauli sum, sorted by energy.
pub struct DenseSpectrum {
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl DenseSpectrum {
    pub fn new(sum: &PauliSum<f64>, n: usize) -> Result<Self> {
        let eigen = SymmetricEigen::new(dense_real(sum, n)?);
        let dim = eigen.eigenvalues.len();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
        let energies = order.iter().map(|&k| eigen.eigenvalues[k]).collect();
        let mut vectors = DMatrix::zeros(dim, dim);
        for (col, &k) in order.iter().enumerate() {
            vectors.set_column(col, &eigen.eigenvectors.column(k));
        }
        Ok(Self { energies, vectors })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Boltzmann weights `exp(-beta E_k)`, rescaled by the dominant one so
    /// no exponential overflows at any sign of `beta`.
    fn weights(&self, beta: f64) -> Vec<f64> {
        let floor = self
            .energies
            .iter()
            .map(|e| beta * e)
            .fold(f64::INFINITY, f64::min);
        self.energies.iter().map(|e| (floor - beta * e).exp()).collect()
    }

    /// Canonical mean energy at inverse temperature `beta`.
    pub fn energy_at(&self, beta: f64) -> f64 {
        let weights = self.weights(beta);
        let z: f64 = weights.iter().sum();
        let e: f64 = weights.iter().zip(&self.energies).map(|(w, e)| w * e).sum();
        e / z
    }

    /// Canonical expectation of an observable that is diagonal in the
    /// computational basis, given its diagonal entries.
    pub fn diagonal_expectation_at(&self, beta: f64, diagonal: &[f64]) -> Result<f64> {
        let dim = self.energies.len();
        if diagonal.len() != dim {
            return Err(Error::config(format!(
                "diagonal has {} entries for a dimension-{dim} spectrum",
                diagonal.len()
            )));
        }
        let weights = self.weights(beta);
        let z: f64 = weights.iter().sum();
        let mut total = 0.0;
        for (k, w) in weights.iter().enumerate() {
            let mut overlap = 0.0;
            for b in 0..dim {
                let v = self.vectors[(b, k)];
                overlap += v * v * diagonal[b];
            }
            total += w * overlap;
        }
        Ok(total / z)
    }

    /// Inverse temperature whose canonical energy matches `target`, found by
    /// bisection on the monotonically decreasing `energy_at`. Negative
    /// temperatures are reached the same way when the target sits above the
    /// infinite-temperature mean.
    pub fn solve_beta(&self, target: f64) -> Result<f64> {
        let e_min = self.energies[0];
        let e_max = *self.energies.last().unwrap();
        let scale = (e_max - e_min).max(1.0);
        if e_max - e_min < 1e-12 {
            return Err(Error::config("spectrum is flat, temperature is undefined"));
        }
        if target <= e_min + 1e-12 * scale || target >= e_max - 1e-12 * scale {
            return Err(Error::config(format!(
                "target energy {target} outside the spectral range ({e_min}, {e_max})"
            )));
        }
        let mean = self.energy_at(0.0);
        if (target - mean).abs() <= 1e-13 * scale {
            return Ok(0.0);
        }

        let positive = target < mean;
        let mut reach = 1.0;
        loop {
            let e = self.energy_at(if positive { reach } else { -reach });
            if (positive && e <= target) || (!positive && e >= target) {
                break;
            }
            reach *= 2.0;
            if reach > 1e18 {
                return Err(Error::config(format!(
                    "no finite inverse temperature reaches energy {target}"
                )));
            }
        }

        let (mut lo, mut hi) = if positive { (0.0, reach) } else { (-reach, 0.0) };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.energy_at(mid) >= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Diagonal of `Z_tot^2 / N^2` in the computational basis over `n` sites.
pub fn ztot2_diagonal(n: usize) -> Vec<f64> {
    let scale = (n * n) as f64;
    (0..1u64 << n)
        .map(|b| {
            let imbalance = n as f64 - 2.0 * b.count_ones() as f64;
            imbalance * imbalance / scale
        })
        .collect()
}

/// Thermal reference matched to a quench: inverse temperature, conserved
/// energy, and the canonical squared magnetization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalReference {
    pub beta: f64,
    pub energy: f64,
    pub ztot2: f64,
}

/// Canonical `<Z_tot^2>` of the effective Hamiltonian at the temperature
/// fixed by the initial product state's energy.
pub fn thermal_ztot2_reference(
    lattice: &Lattice,
    j: f64,
    h: f64,
    dt: f64,
    thetas: &[f64],
) -> Result<ThermalReference> {
    let h_eff = effective_hamiltonian(lattice, j, h, dt);
    let energy = expectation(&h_eff, &BlochTable::product_state(thetas, 0.0));
    let spectrum = DenseSpectrum::new(&h_eff, lattice.n())?;
    let beta = spectrum.solve_beta(energy)?;
    let ztot2 = spectrum.diagonal_expectation_at(beta, &ztot2_diagonal(lattice.n()))?;
    Ok(ThermalReference { beta, energy, ztot2 })
}
