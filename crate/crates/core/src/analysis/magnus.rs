//! Floquet effective Hamiltonian for the driven transverse-field Ising model.
//!
//! A second-order Trotter step at angle `dt` realizes the Floquet unitary of a
//! kicked Ising drive. Its stroboscopic dynamics are governed by an effective
//! Hamiltonian with a Magnus-type expansion in powers of `dt`: the leading term
//! is the static model itself and the first non-vanishing correction enters at
//! `dt^2`. This module builds both as explicit Pauli sums, converts them to
//! dense matrices, and measures how well the effective Hamiltonian reproduces
//! the eigenphases of the exact one-step unitary.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::circuit::{build_trotter, QuenchSpec};
use crate::error::Error;
use crate::lattice::Lattice;
use crate::pauli::{PauliString, SitePauli};
use crate::real::{cst, Real, C};
use crate::sim::{run_ideal, StateVector};
use crate::spd::PauliSum;
use crate::Result;

use super::MAX_DENSE_SITES;

/// Mean-field tilt of the lowest-energy product state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldAngle<T> {
    pub angle: T,
    /// Set when `|h / (z j)| > 1` and the tilt pinned at the equator.
    pub saturated: bool,
}

/// Tilt angle that minimizes the mean-field energy of the ferromagnetic
/// ground state, `asin(h / (z j))` for coordination number `z`.
///
/// Past `|h / (z j)| = 1` the minimum sits at the equator; the angle clamps
/// to the matching `±π/2` and the result is flagged as saturated.
pub fn mean_field_angle<T: Real>(j: T, h: T, coordination: usize) -> Result<MeanFieldAngle<T>> {
    if j == T::zero() || coordination == 0 {
        return Err(Error::config("mean-field angle needs a nonzero coupling"));
    }
    let z = cst::<T>(coordination as f64);
    let ratio = h / (z * j);
    Ok(MeanFieldAngle {
        angle: ratio.max(-T::one()).min(T::one()).asin(),
        saturated: ratio.abs() >= T::one(),
    })
}

/// Static Hamiltonian `j * sum_<jk> Z_j Z_k + h * sum_j X_j` as a Pauli sum.
pub fn static_hamiltonian<T: Real>(lattice: &Lattice, j: T, h: T) -> PauliSum<T> {
    let mut sum = PauliSum::new();
    for &(a, b) in lattice.edges() {
        sum.add(PauliString::single(a, SitePauli::Z).with_site(b, SitePauli::Z), j);
    }
    for site in 0..lattice.n() {
        sum.add(PauliString::single(site, SitePauli::X), h);
    }
    sum
}

/// Second-order Magnus correction to the Floquet Hamiltonian of the
/// symmetric Trotter step, to be scaled by `dt^2`.
///
/// Four families of terms appear: the nearest-neighbour ZZ and YY couplings,
/// a single-site X term weighted by the site's coordination number, and a
/// three-body ZXZ term for every pair of distinct neighbours of a common
/// middle site.
pub fn magnus_correction<T: Real>(lattice: &Lattice, j: T, h: T) -> PauliSum<T> {
    let third = cst::<T>(1.0 / 3.0);
    let c_zz = h * h * j * third;
    let c_yy = -c_zz;
    let c_x = -(j * j * h * third);
    let c_zxz = -(cst::<T>(2.0) * h * j * j * third);

    let mut sum = PauliSum::new();
    for &(a, b) in lattice.edges() {
        sum.add(PauliString::single(a, SitePauli::Z).with_site(b, SitePauli::Z), c_zz);
        sum.add(PauliString::single(a, SitePauli::Y).with_site(b, SitePauli::Y), c_yy);
    }
    for site in 0..lattice.n() {
        let degree = cst::<T>(lattice.degree(site) as f64);
        sum.add(PauliString::single(site, SitePauli::X), c_x * degree);
    }
    for mid in 0..lattice.n() {
        let around = lattice.neighbors(mid);
        for (pos, &a) in around.iter().enumerate() {
            for &b in &around[pos + 1..] {
                sum.add(
                    PauliString::single(a, SitePauli::Z)
                        .with_site(mid, SitePauli::X)
                        .with_site(b, SitePauli::Z),
                    c_zxz,
                );
            }
        }
    }
    sum
}

/// Effective Hamiltonian through second order, `H0 + dt^2 * H2`.
pub fn effective_hamiltonian<T: Real>(lattice: &Lattice, j: T, h: T, dt: T) -> PauliSum<T> {
    let mut sum = static_hamiltonian(lattice, j, h);
    for (string, coeff) in magnus_correction(lattice, j, h).iter() {
        sum.add(*string, dt * dt * *coeff);
    }
    sum
}

/// Dense real matrix of a Pauli sum over `n` sites.
///
/// Every string must carry an even number of Y factors so its matrix is real;
/// a sum built from the Hamiltonians in this module always does. Dimensions
/// grow as `2^n`, so `n` is capped at [`MAX_DENSE_SITES`].
pub fn dense_real<T: Real>(sum: &PauliSum<T>, n: usize) -> Result<DMatrix<f64>> {
    if n > MAX_DENSE_SITES {
        return Err(Error::resource(format!(
            "dense matrix over {n} sites exceeds the {MAX_DENSE_SITES}-site cap"
        )));
    }
    let dim = 1usize << n;
    let mut matrix = DMatrix::zeros(dim, dim);
    for (string, coeff) in sum.iter() {
        let z = string.z;
        let x = string.x;
        let y_count = (z & x).count_ones();
        if y_count % 2 == 1 {
            return Err(Error::config(format!(
                "term {} has an imaginary matrix representation",
                string.label(n)
            )));
        }
        let front = if y_count % 2 == 0 && y_count % 4 != 0 {
            -1.0
        } else {
            1.0
        };
        let c = coeff.to_f64().unwrap() * front;
        for b in 0..dim as u128 {
            let row = (b ^ x) as usize;
            let sign = if (z & (b ^ x)).count_ones() % 2 == 1 {
                -1.0
            } else {
                1.0
            };
            matrix[(row, b as usize)] += c * sign;
        }
    }
    Ok(matrix)
}

/// Dense unitary of one Trotter step, assembled by propagating every
/// computational basis state through the ideal circuit.
pub fn circuit_unitary(spec: &QuenchSpec<f64>) -> Result<DMatrix<C<f64>>> {
    let n = spec.lattice.n();
    if n > MAX_DENSE_SITES {
        return Err(Error::resource(format!(
            "dense unitary over {n} sites exceeds the {MAX_DENSE_SITES}-site cap"
        )));
    }
    let circuit = build_trotter(spec)?;
    let dim = 1usize << n;
    let mut unitary = DMatrix::zeros(dim, dim);
    for b in 0..dim {
        let mut amps = vec![C::<f64>::new(0.0, 0.0); dim];
        amps[b] = C::new(1.0, 0.0);
        let state = run_ideal(&circuit, &StateVector::from_amplitudes(n, amps)?)?;
        for (row, amp) in state.amplitudes().iter().enumerate() {
            unitary[(row, b)] = *amp;
        }
    }
    Ok(unitary)
}

fn wrap_angle(x: f64) -> f64 {
    x.sin().atan2(x.cos())
}

/// Worst-case eigenphase error of the effective Hamiltonian against one exact
/// Trotter step, reported as an energy scale (phase mismatch divided by `dt`).
///
/// The unitary is block-diagonalized in the eigenbasis of the effective
/// Hamiltonian. Within each cluster of (near-)degenerate eigenvalues the
/// unitary may mix eigenvectors, so the block's eigenphases are extracted
/// jointly and compared against the cluster energies after sorting both.
pub fn floquet_eigenphase_mismatch(lattice: &Lattice, j: f64, h: f64, dt: f64) -> Result<f64> {
    let n = lattice.n();
    let spec = QuenchSpec::uniform(lattice.clone(), j, h, dt, 1, 0.0);
    let unitary = circuit_unitary(&spec)?;

    let h_eff = dense_real(&effective_hamiltonian(lattice, j, h, dt), n)?;
    let eigen = SymmetricEigen::new(h_eff);
    let dim = eigen.eigenvalues.len();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
    let energies: Vec<f64> = order.iter().map(|&k| eigen.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(dim, dim);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eigen.eigenvectors.column(k));
    }

    let vectors_c = vectors.map(|v| C::new(v, 0.0));
    let rotated = vectors_c.transpose() * unitary * vectors_c;

    let mut mismatch: f64 = 0.0;
    let mut start = 0;
    while start < dim {
        let mut stop = start + 1;
        while stop < dim && energies[stop] - energies[stop - 1] < 1e-8 {
            stop += 1;
        }
        let block = rotated.view((start, start), (stop - start, stop - start));
        let mut phases: Vec<f64> = small_complex_eigenvalues(&block.into_owned())?
            .iter()
            .map(|lambda| lambda.arg())
            .collect();
        phases.sort_by(f64::total_cmp);
        for (offset, phase) in phases.iter().enumerate() {
            let d = wrap_angle(phase + dt * energies[start + offset]);
            mismatch = mismatch.max(d.abs());
        }
        start = stop;
    }
    Ok(mismatch / dt)
}

/// Change in eigenphase mismatch when the step size is halved.
///
/// A correct `dt^2` correction pushes the residual to order `dt^4`, so halving
/// `dt` should shrink the mismatch by roughly a factor of sixteen.
pub fn mismatch_halving_ratio(lattice: &Lattice, j: f64, h: f64, dt: f64) -> Result<f64> {
    let coarse = floquet_eigenphase_mismatch(lattice, j, h, dt)?;
    let fine = floquet_eigenphase_mismatch(lattice, j, h, dt / 2.0)?;
    if fine == 0.0 {
        return Err(Error::config("mismatch at the halved step vanished"));
    }
    Ok(coarse / fine)
}

const EIG_EPS: f64 = 1e-14;

fn quadratic_eigenvalues(a: C<f64>, b: C<f64>, c: C<f64>, d: C<f64>) -> [C<f64>; 2] {
    let tr = a + d;
    let det = a * d - b * c;
    let half = C::new(0.5, 0.0);
    let disc = (tr * tr - C::new(4.0, 0.0) * det).sqrt();
    [(tr + disc) * half, (tr - disc) * half]
}

/// Complex Givens rotation `[[c, s], [-conj(s), c]]` zeroing `g` against `f`.
fn givens(f: C<f64>, g: C<f64>) -> (f64, C<f64>) {
    if g.norm() == 0.0 {
        return (1.0, C::new(0.0, 0.0));
    }
    if f.norm() == 0.0 {
        return (0.0, g.conj() / g.norm());
    }
    let scale = (f.norm_sqr() + g.norm_sqr()).sqrt();
    let c = f.norm() / scale;
    let phase = f / f.norm();
    (c, phase * g.conj() / scale)
}

fn rotate_rows(m: &mut DMatrix<C<f64>>, i: usize, c: f64, s: C<f64>, lo: usize, hi: usize) {
    for col in lo..=hi {
        let top = m[(i, col)];
        let bottom = m[(i + 1, col)];
        m[(i, col)] = top * c + bottom * s;
        m[(i + 1, col)] = -s.conj() * top + bottom * c;
    }
}

fn rotate_columns(m: &mut DMatrix<C<f64>>, i: usize, c: f64, s: C<f64>, lo: usize, hi: usize) {
    for row in lo..=hi {
        let left = m[(row, i)];
        let right = m[(row, i + 1)];
        m[(row, i)] = left * c + right * s.conj();
        m[(row, i + 1)] = -left * s + right * c;
    }
}

fn reduce_to_hessenberg(m: &mut DMatrix<C<f64>>) {
    let n = m.nrows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let mut x = DVector::zeros(n - k - 1);
        for row in k + 1..n {
            x[row - k - 1] = m[(row, k)];
        }
        let norm = x.norm();
        if norm <= EIG_EPS {
            continue;
        }
        let lead = x[0];
        let alpha = if lead.norm() == 0.0 {
            C::new(-norm, 0.0)
        } else {
            -(lead / lead.norm()) * norm
        };
        let mut u = x;
        u[0] -= alpha;
        let u_norm_sqr = u.norm_squared();
        if u_norm_sqr <= EIG_EPS * EIG_EPS {
            continue;
        }
        let factor = C::new(2.0 / u_norm_sqr, 0.0);
        // Left update on rows k+1..n: M <- M - factor * u (u^H M).
        for col in 0..n {
            let mut dot = C::new(0.0, 0.0);
            for row in k + 1..n {
                dot += u[row - k - 1].conj() * m[(row, col)];
            }
            let scaled = factor * dot;
            for row in k + 1..n {
                let delta = u[row - k - 1] * scaled;
                m[(row, col)] -= delta;
            }
        }
        // Right update on columns k+1..n: M <- M - factor * (M u) u^H.
        for row in 0..n {
            let mut dot = C::new(0.0, 0.0);
            for col in k + 1..n {
                dot += m[(row, col)] * u[col - k - 1];
            }
            let scaled = factor * dot;
            for col in k + 1..n {
                let delta = scaled * u[col - k - 1].conj();
                m[(row, col)] -= delta;
            }
        }
    }
}

/// Eigenvalues of a small dense complex matrix via the shifted QR iteration.
///
/// Intended for the few-by-few degenerate blocks that appear in
/// [`floquet_eigenphase_mismatch`]; the iteration count is capped and overruns
/// surface as an error rather than a wrong answer.
pub fn small_complex_eigenvalues(input: &DMatrix<C<f64>>) -> Result<Vec<C<f64>>> {
    let n = input.nrows();
    if input.ncols() != n {
        return Err(Error::config("eigenvalue problem needs a square matrix"));
    }
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![input[(0, 0)]]),
        2 => {
            return Ok(quadratic_eigenvalues(
                input[(0, 0)],
                input[(0, 1)],
                input[(1, 0)],
                input[(1, 1)],
            )
            .to_vec())
        }
        _ => {}
    }

    let mut m = input.clone();
    reduce_to_hessenberg(&mut m);

    let negligible = |m: &DMatrix<C<f64>>, k: usize| {
        let scale = m[(k - 1, k - 1)].norm() + m[(k, k)].norm();
        m[(k, k - 1)].norm() <= EIG_EPS * scale.max(EIG_EPS)
    };

    let mut hi = n - 1;
    let mut iterations = 0usize;
    let budget = 100 * n;
    while hi > 0 {
        if negligible(&m, hi) {
            m[(hi, hi - 1)] = C::new(0.0, 0.0);
            hi -= 1;
            continue;
        }
        let mut lo = hi;
        while lo > 0 && !negligible(&m, lo) {
            lo -= 1;
        }
        if lo > 0 {
            m[(lo, lo - 1)] = C::new(0.0, 0.0);
        }

        iterations += 1;
        if iterations > budget {
            return Err(Error::config(format!(
                "QR iteration failed to converge within {budget} sweeps"
            )));
        }

        let pair = quadratic_eigenvalues(
            m[(hi - 1, hi - 1)],
            m[(hi - 1, hi)],
            m[(hi, hi - 1)],
            m[(hi, hi)],
        );
        let corner = m[(hi, hi)];
        let shift = if (pair[0] - corner).norm() <= (pair[1] - corner).norm() {
            pair[0]
        } else {
            pair[1]
        };

        for k in lo..=hi {
            m[(k, k)] -= shift;
        }
        let mut rotations = Vec::with_capacity(hi - lo);
        for i in lo..hi {
            let (c, s) = givens(m[(i, i)], m[(i + 1, i)]);
            rotate_rows(&mut m, i, c, s, lo, hi);
            rotations.push((i, c, s));
        }
        for &(i, c, s) in &rotations {
            rotate_columns(&mut m, i, c, s, lo, hi);
        }
        for k in lo..=hi {
            m[(k, k)] += shift;
        }
    }

    Ok((0..n).map(|k| m[(k, k)]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mean_field_angle_reference_points() {
        let tilt = mean_field_angle(-1.0, 2.0, 4).unwrap();
        assert_relative_eq!(tilt.angle, -std::f64::consts::FRAC_PI_6, epsilon = 1e-12);
        assert!(!tilt.saturated);

        let flat = mean_field_angle(-1.0, 0.0, 4).unwrap();
        assert_eq!(flat.angle, 0.0);

        let pinned = mean_field_angle(-1.0, 4.0, 4).unwrap();
        assert_relative_eq!(pinned.angle, -std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        assert!(pinned.saturated);

        let past = mean_field_angle(-1.0, 5.0, 4).unwrap();
        assert_relative_eq!(past.angle, -std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        assert!(past.saturated);

        assert!(mean_field_angle(0.0, 1.0, 4).is_err());
    }

    #[test]
    fn correction_term_census_on_the_three_by_three_torus() {
        let lattice = Lattice::new(3, 3).unwrap();
        let sum = magnus_correction(&lattice, -1.0_f64, 2.0);
        let mut zz = 0;
        let mut yy = 0;
        let mut x = 0;
        let mut zxz = 0;
        for (string, coeff) in sum.iter() {
            let ys = (string.z & string.x).count_ones();
            match (string.weight(), ys) {
                (2, 0) => {
                    zz += 1;
                    assert_relative_eq!(*coeff, -4.0 / 3.0, epsilon = 1e-12);
                }
                (2, 2) => {
                    yy += 1;
                    assert_relative_eq!(*coeff, 4.0 / 3.0, epsilon = 1e-12);
                }
                (1, 0) => {
                    x += 1;
                    assert_relative_eq!(*coeff, -8.0 / 3.0, epsilon = 1e-12);
                }
                (3, 0) => {
                    zxz += 1;
                    assert_relative_eq!(*coeff, -4.0 / 3.0, epsilon = 1e-12);
                }
                other => panic!("unexpected term shape {other:?}"),
            }
        }
        assert_eq!((zz, yy, x, zxz), (18, 18, 9, 54));
    }

    #[test]
    fn correction_term_census_on_the_four_by_four_torus() {
        let lattice = Lattice::new(4, 4).unwrap();
        let sum = magnus_correction(&lattice, -1.0_f64, 2.0);
        let mut counts = [0usize; 4];
        for (string, _) in sum.iter() {
            let ys = (string.z & string.x).count_ones();
            let slot = match (string.weight(), ys) {
                (2, 0) => 0,
                (2, 2) => 1,
                (1, 0) => 2,
                (3, 0) => 3,
                other => panic!("unexpected term shape {other:?}"),
            };
            counts[slot] += 1;
        }
        assert_eq!(counts, [32, 32, 16, 96]);
    }

    fn real_matvec(sum: &PauliSum<f64>, dim: usize, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (string, coeff) in sum.iter() {
            let ys = (string.z & string.x).count_ones();
            assert_eq!(ys % 2, 0);
            let front = if ys % 4 == 2 { -1.0 } else { 1.0 };
            for b in 0..dim {
                let row = b ^ string.x as usize;
                let sign = if (string.z & row as u128).count_ones() % 2 == 1 {
                    -1.0
                } else {
                    1.0
                };
                out[row] += coeff * front * sign * v[b];
            }
        }
        out
    }

    fn dominant_eigenvalue(sum: &PauliSum<f64>, dim: usize, shift: f64, flip: bool) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut lambda = 0.0;
        for _ in 0..300 {
            let mut w = real_matvec(sum, dim, &v);
            for (wk, vk) in w.iter_mut().zip(&v) {
                if flip {
                    *wk = shift * vk - *wk;
                } else {
                    *wk += shift * vk;
                }
            }
            lambda = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            for wk in w.iter_mut() {
                *wk /= lambda;
            }
            v = w;
        }
        if flip {
            shift - lambda
        } else {
            lambda - shift
        }
    }

    #[test]
    fn effective_energy_is_conserved_far_better_than_the_bare_energy() {
        use crate::circuit::build_trotter;
        use crate::sim::{run_noisy_trajectory, NoiseConfig};

        let lattice = Lattice::new(3, 4).unwrap();
        let (j, h, dt) = (-1.0, 2.0, 0.25);
        let theta = mean_field_angle(j, h, 4).unwrap().angle + 2.0 * std::f64::consts::PI / 9.0;
        let mut spec = QuenchSpec::uniform(lattice.clone(), j, h, dt, 30, theta);
        spec.merge_x_layers = false;
        let circuit = build_trotter(&spec).unwrap();
        let init = StateVector::product(&spec.thetas).unwrap();

        let h0 = static_hamiltonian(&lattice, j, h);
        let h_eff = effective_hamiltonian(&lattice, j, h, dt);
        let mut series0 = Vec::new();
        let mut series_eff = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        run_noisy_trajectory(&circuit, &init, &NoiseConfig::default(), &mut rng, |_, state, _| {
            series0.push(super::super::statevector_expectation(&h0, state));
            series_eff.push(super::super::statevector_expectation(&h_eff, state));
        })
        .unwrap();

        let dim = 1usize << lattice.n();
        let bound = h_eff.l1_norm() + 1.0;
        let e_max = dominant_eigenvalue(&h_eff, dim, bound, false);
        let e_min = dominant_eigenvalue(&h_eff, dim, bound, true);
        let width = e_max - e_min;
        assert!(width > 10.0, "implausible spectral width {width}");

        let drift = |series: &[f64]| {
            let start = series[0];
            series.iter().map(|e| (e - start).abs()).fold(0.0, f64::max)
        };
        let drift_eff = drift(&series_eff);
        let drift0 = drift(&series0);
        assert!(
            drift_eff < 0.01 * width,
            "effective energy drifted {drift_eff} against width {width}"
        );
        assert!(drift0 > drift_eff * 2.0, "bare {drift0} vs effective {drift_eff}");
    }

    #[test]
    fn dense_matrix_agrees_with_statevector_pauli_application() {
        let n = 2;
        let mut sum = PauliSum::new();
        sum.add(PauliString::single(0, SitePauli::Z).with_site(1, SitePauli::Z), 0.7_f64);
        sum.add(PauliString::single(0, SitePauli::Y).with_site(1, SitePauli::Y), 0.3);
        sum.add(PauliString::single(0, SitePauli::X), 0.5);
        sum.add(PauliString::single(0, SitePauli::X).with_site(1, SitePauli::X), -0.2);
        let dense = dense_real(&sum, n).unwrap();
        for b in 0..4usize {
            let mut column = vec![C::<f64>::new(0.0, 0.0); 4];
            for (string, coeff) in sum.iter() {
                let mut amps = vec![C::<f64>::new(0.0, 0.0); 4];
                amps[b] = C::new(1.0, 0.0);
                let mut state = StateVector::from_amplitudes(n, amps).unwrap();
                state.apply_pauli(string);
                for (row, amp) in state.amplitudes().iter().enumerate() {
                    column[row] += amp * coeff;
                }
            }
            for (row, entry) in column.iter().enumerate() {
                assert_abs_diff_eq!(dense[(row, b)], entry.re, epsilon = 1e-12);
                assert_abs_diff_eq!(entry.im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn dense_matrix_rejects_odd_y_terms() {
        let mut sum = PauliSum::new();
        sum.add(PauliString::single(0, SitePauli::Y), 1.0_f64);
        assert!(matches!(dense_real(&sum, 1), Err(Error::Config(_))));
    }

    #[test]
    fn qr_eigenvalues_match_a_planted_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [3usize, 4, 5, 6] {
            let mut upper = DMatrix::zeros(n, n);
            let mut planted = Vec::with_capacity(n);
            for i in 0..n {
                for j in i..n {
                    let v = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    upper[(i, j)] = v;
                    if i == j {
                        planted.push(v);
                    }
                }
            }
            // Unitary similarity from QR-factoring a random complex matrix.
            let raw =
                DMatrix::from_fn(n, n, |_, _| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let mut q = DMatrix::<C<f64>>::zeros(n, n);
            for col in 0..n {
                let mut v: DVector<C<f64>> = raw.column(col).into_owned();
                for prev in 0..col {
                    let basis: DVector<C<f64>> = q.column(prev).into_owned();
                    let overlap = basis.dotc(&v);
                    v -= basis * overlap;
                }
                let norm = v.norm();
                q.set_column(col, &(v / C::new(norm, 0.0)));
            }
            let matrix = &q * upper * q.adjoint();

            let mut found = small_complex_eigenvalues(&matrix).unwrap();
            let key = |z: &C<f64>| (z.re, z.im);
            found.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
            planted.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
            for (f, p) in found.iter().zip(&planted) {
                assert_abs_diff_eq!(f.re, p.re, epsilon = 1e-8);
                assert_abs_diff_eq!(f.im, p.im, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn eigenphase_mismatch_reference_values() {
        let lattice = Lattice::new(2, 3).unwrap();
        let coarse = floquet_eigenphase_mismatch(&lattice, -1.0, 2.0, 0.2).unwrap();
        let fine = floquet_eigenphase_mismatch(&lattice, -1.0, 2.0, 0.1).unwrap();
        assert_relative_eq!(coarse, 6.2110e-2, max_relative = 1e-3);
        assert_relative_eq!(fine, 3.7398e-3, max_relative = 1e-3);
        assert_relative_eq!(coarse / fine, 16.61, max_relative = 1e-2);
    }
}
