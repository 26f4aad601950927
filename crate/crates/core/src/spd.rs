//! Sparse Pauli dynamics: Heisenberg-picture propagation of observables.
//!
//! An observable is a real linear combination of Pauli strings. Conjugating
//! through one Trotter step splits every string that anticommutes with a
//! rotation generator into a `cos`/`sin` pair, so the sum grows; branches
//! whose coefficient falls below a threshold are discarded and their
//! absolute weight is tallied, which keeps the propagation independent of
//! the statevector simulator while staying cheap at small thresholds.
//!
//! The merged-layer identity
//!
//! ```text
//! U(t) = U_X(a/2) [U_ZZ U_X(a)]^t U_X(-a/2),    a = 2 h dt,
//! ```
//!
//! moves the boundary half-rotations out of the loop: the observable is
//! conjugated once by `U_X(a/2)`, each step then applies the entangling
//! sweep followed by a full transverse sweep, and the initial product state
//! absorbs `U_X(-a/2)` into its per-site Bloch vectors. Expectation values
//! are products of those Bloch components, summed over the stored strings.
//!
//! On a torus with a uniform initial angle every lattice translation fixes
//! both the dynamics and the state, so strings can be folded onto a
//! canonical orbit representative after each step, shrinking the sum by
//! roughly the group order without changing any expectation value.

use indexmap::IndexMap;
use rayon::prelude::*;

use crate::circuit::QuenchSpec;
use crate::error::Error;
use crate::lattice::SitePermutation;
use crate::pauli::PauliString;
use crate::real::{cst, Real, C};
use crate::Result;

/// Real-weighted sum of Pauli strings with a stable iteration order.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum<T: Real = f64> {
    terms: IndexMap<PauliString, T>,
}

impl<T: Real> Default for PauliSum<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> PauliSum<T> {
    pub fn new() -> Self {
        PauliSum {
            terms: IndexMap::new(),
        }
    }

    /// `(sum_q Z_q)^2 / n^2` expanded into strings: an identity offset of
    /// `1/n` plus every unordered pair `Z_i Z_j` at weight `2/n^2`.
    pub fn ztot2_observable(n: usize) -> Self {
        let mut sum = PauliSum::new();
        let nn = cst::<T>((n * n) as f64);
        sum.add(PauliString::IDENTITY, cst::<T>(n as f64) / nn);
        let pair = cst::<T>(2.0) / nn;
        for i in 0..n {
            for j in (i + 1)..n {
                let p = PauliString::single(i, crate::pauli::SitePauli::Z)
                    .with_site(j, crate::pauli::SitePauli::Z);
                sum.add(p, pair);
            }
        }
        sum
    }

    /// Single-string observable.
    pub fn single(p: PauliString, coeff: T) -> Self {
        let mut sum = PauliSum::new();
        sum.add(p, coeff);
        sum
    }

    /// Accumulate a coefficient onto a string.
    pub fn add(&mut self, p: PauliString, coeff: T) {
        *self.terms.entry(p).or_insert_with(T::zero) += coeff;
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, p: &PauliString) -> T {
        self.terms.get(p).copied().unwrap_or_else(T::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &T)> {
        self.terms.iter()
    }

    /// Sum of absolute coefficients.
    pub fn l1_norm(&self) -> T {
        self.terms.values().map(|c| c.abs()).sum()
    }
}

/// Per-site expectation values `(<X>, <Y>, <Z>)` of a product state.
#[derive(Debug, Clone)]
pub struct BlochTable<T> {
    components: Vec<[T; 4]>,
}

impl<T: Real> BlochTable<T> {
    /// Bloch vectors of `prod_q (cos(theta_q/2)|0> + sin(theta_q/2)|1>)`
    /// after an extra rotation by `x_angle` about X on every site.
    pub fn product_state(thetas: &[T], x_angle: T) -> Self {
        let half = x_angle / cst::<T>(2.0);
        let components = thetas
            .iter()
            .map(|&theta| {
                let u0 = C::new((theta / cst::<T>(2.0)).cos(), T::zero());
                let u1 = C::new((theta / cst::<T>(2.0)).sin(), T::zero());
                let m00 = C::new(half.cos(), T::zero());
                let m01 = C::new(T::zero(), -half.sin());
                let v0 = m00 * u0 + m01 * u1;
                let v1 = m01 * u0 + m00 * u1;
                let cross = v0.conj() * v1;
                [
                    T::one(),
                    cross.re + cross.re,
                    cross.im + cross.im,
                    v0.norm_sqr() - v1.norm_sqr(),
                ]
            })
            .collect();
        BlochTable { components }
    }

    fn component(&self, site: usize, letter: crate::pauli::SitePauli) -> T {
        self.components[site][letter.index()]
    }
}

/// `<psi| sum |psi>` for the product state described by the table.
pub fn expectation<T: Real>(sum: &PauliSum<T>, bloch: &BlochTable<T>) -> T {
    let mut total = T::zero();
    for (p, &coeff) in sum.iter() {
        let mut factor = T::one();
        let mut support = p.support();
        while support != 0 {
            let site = support.trailing_zeros() as usize;
            support &= support - 1;
            factor *= bloch.component(site, p.site(site));
        }
        total += coeff * factor;
    }
    total
}

/// One conjugation generator: the string `g` of a gate `exp(-i theta g/2)`.
#[derive(Debug, Clone, Copy)]
struct Generator<T> {
    g: PauliString,
    cos: T,
    sin: T,
}

/// Propagation controls.
#[derive(Debug, Clone, Copy)]
pub struct SpdOptions<T: Real = f64> {
    /// Branch coefficients below this magnitude are dropped.
    pub delta: T,
    /// Strings acting on more than this many sites are dropped.
    pub max_weight: usize,
    /// Resource guard on the stored string count.
    pub max_terms: usize,
    /// Fold strings onto canonical torus-translation representatives after
    /// every step. Silently turned off when the initial angles differ by
    /// site, since the product state then breaks translation symmetry.
    pub canonicalize: bool,
}

impl<T: Real> Default for SpdOptions<T> {
    fn default() -> Self {
        SpdOptions {
            delta: cst::<T>((2.0f64).powi(-16)),
            max_weight: usize::MAX,
            max_terms: 4_000_000,
            canonicalize: true,
        }
    }
}

const CHUNK: usize = 512;

/// Conjugate every string through a layer of commuting rotations,
/// depth-first per input string, pruning branches below `delta`. Returns
/// the new sum and the absolute weight discarded.
fn conjugate_layer<T: Real>(
    sum: &PauliSum<T>,
    gens: &[Generator<T>],
    delta: T,
    max_weight: usize,
) -> (PauliSum<T>, T) {
    let inputs: Vec<(PauliString, T)> = sum.iter().map(|(p, &c)| (*p, c)).collect();
    let chunks: Vec<(Vec<(PauliString, T)>, T)> = inputs
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len() * 2);
            let mut truncated = T::zero();
            let mut stack: Vec<(PauliString, T, usize)> = Vec::new();
            for &(p, c) in chunk {
                stack.push((p, c, 0));
                while let Some((p, c, idx)) = stack.pop() {
                    match gens.get(idx) {
                        None => out.push((p, c)),
                        Some(gen) => {
                            if p.commutes_with(&gen.g) {
                                stack.push((p, c, idx + 1));
                                continue;
                            }
                            let (q, k) = gen.g.mul(&p);
                            // i^(k+1) is real for anticommuting factors.
                            let sign = if k == 1 { -T::one() } else { T::one() };
                            let keep = c * gen.cos;
                            let branch = sign * c * gen.sin;
                            if keep.abs() >= delta {
                                stack.push((p, keep, idx + 1));
                            } else {
                                truncated += keep.abs();
                            }
                            if branch.abs() >= delta && q.weight() as usize <= max_weight {
                                stack.push((q, branch, idx + 1));
                            } else {
                                truncated += branch.abs();
                            }
                        }
                    }
                }
            }
            (out, truncated)
        })
        .collect();

    let mut merged = PauliSum::new();
    let mut truncated = T::zero();
    for (chunk, t) in chunks {
        truncated += t;
        for (p, c) in chunk {
            merged.add(p, c);
        }
    }
    (merged, truncated)
}

/// Replace every string with the lexicographic minimum of its orbit under
/// the site permutations, merging coefficients.
pub fn canonicalize<T: Real>(sum: &PauliSum<T>, group: &[SitePermutation]) -> PauliSum<T> {
    let inputs: Vec<(PauliString, T)> = sum.iter().map(|(p, &c)| (*p, c)).collect();
    let mapped: Vec<(PauliString, T)> = inputs
        .par_chunks(CHUNK)
        .flat_map_iter(|chunk| {
            chunk
                .iter()
                .map(|&(p, c)| {
                    let canon = group.iter().map(|perm| p.permute(perm)).min().unwrap_or(p);
                    (canon, c)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut out = PauliSum::new();
    for (p, c) in mapped {
        out.add(p, c);
    }
    out
}

/// Growth record of one propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdTelemetry<T> {
    /// Stored string count after each step, index 0 being the prepared
    /// observable.
    pub terms_per_step: Vec<usize>,
    /// Absolute coefficient weight discarded during each step; index 0
    /// covers the preparation sweep.
    pub truncated_per_step: Vec<T>,
    /// Wall-clock milliseconds spent on each step, preparation included.
    pub wall_ms_per_step: Vec<u128>,
    /// Total absolute coefficient weight discarded by pruning.
    pub truncated_mass: T,
    /// Wall-clock milliseconds spent propagating.
    pub wall_ms: u128,
    /// Whether orbit folding was actually in effect for this run.
    pub canonicalized: bool,
}

/// Observable series with its growth record.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdRun<T> {
    /// Expectation value after 0..=steps Trotter steps.
    pub values: Vec<T>,
    pub telemetry: SpdTelemetry<T>,
}

/// Propagate an observable through the quench and evaluate it at every
/// step boundary.
pub fn run_heisenberg<T: Real>(
    spec: &QuenchSpec<T>,
    observable: &PauliSum<T>,
    opts: &SpdOptions<T>,
) -> Result<SpdRun<T>> {
    spec.validate()?;
    let n = spec.lattice.n();
    let uniform = spec.thetas.iter().all(|&t| t == spec.thetas[0]);
    let fold = opts.canonicalize && uniform;
    let a = cst::<T>(2.0) * spec.h * spec.dt;
    let zz_angle = cst::<T>(2.0) * spec.j * spec.dt;
    let group = if fold {
        spec.lattice.symmetry_group()
    } else {
        Vec::new()
    };

    let x_gens = |angle: T| -> Vec<Generator<T>> {
        (0..n)
            .map(|q| Generator {
                g: PauliString::single(q, crate::pauli::SitePauli::X),
                cos: angle.cos(),
                sin: angle.sin(),
            })
            .collect()
    };
    let zz_gens: Vec<Generator<T>> = spec
        .lattice
        .edges()
        .iter()
        .map(|&(a_site, b_site)| Generator {
            g: PauliString::single(a_site, crate::pauli::SitePauli::Z)
                .with_site(b_site, crate::pauli::SitePauli::Z),
            cos: zz_angle.cos(),
            sin: zz_angle.sin(),
        })
        .collect();

    let start = std::time::Instant::now();
    let bloch = BlochTable::product_state(&spec.thetas, -a / cst::<T>(2.0));

    let mut step_start = start;
    let (mut sum, t0) =
        conjugate_layer(observable, &x_gens(a / cst::<T>(2.0)), opts.delta, opts.max_weight);
    let mut truncated = t0;
    if fold {
        sum = canonicalize(&sum, &group);
    }

    let mut values = Vec::with_capacity(spec.steps + 1);
    let mut terms_per_step = Vec::with_capacity(spec.steps + 1);
    let mut truncated_per_step = Vec::with_capacity(spec.steps + 1);
    let mut wall_ms_per_step = Vec::with_capacity(spec.steps + 1);
    values.push(expectation(&sum, &bloch));
    terms_per_step.push(sum.len());
    truncated_per_step.push(t0);
    wall_ms_per_step.push(step_start.elapsed().as_millis());

    let full_x = x_gens(a);
    for _ in 0..spec.steps {
        step_start = std::time::Instant::now();
        let (after_zz, tz) = conjugate_layer(&sum, &zz_gens, opts.delta, opts.max_weight);
        let (after_x, tx) = conjugate_layer(&after_zz, &full_x, opts.delta, opts.max_weight);
        truncated += tz + tx;
        sum = if fold {
            canonicalize(&after_x, &group)
        } else {
            after_x
        };
        if sum.len() > opts.max_terms {
            return Err(Error::resource(format!(
                "string count {} exceeded the cap {}",
                sum.len(),
                opts.max_terms
            )));
        }
        values.push(expectation(&sum, &bloch));
        terms_per_step.push(sum.len());
        truncated_per_step.push(tz + tx);
        wall_ms_per_step.push(step_start.elapsed().as_millis());
    }

    Ok(SpdRun {
        values,
        telemetry: SpdTelemetry {
            terms_per_step,
            truncated_per_step,
            wall_ms_per_step,
            truncated_mass: truncated,
            wall_ms: start.elapsed().as_millis(),
            canonicalized: fold,
        },
    })
}

/// [`run_heisenberg`] for the squared total magnetization.
pub fn run_quench_ztot2<T: Real>(spec: &QuenchSpec<T>, opts: &SpdOptions<T>) -> Result<SpdRun<T>> {
    run_heisenberg(
        spec,
        &PauliSum::ztot2_observable(spec.lattice.n()),
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_trotter;
    use crate::lattice::Lattice;
    use crate::pauli::SitePauli;
    use crate::sim::{run_ideal, StateVector};
    use approx::assert_relative_eq;

    fn uniform_spec(nx: usize, ny: usize, steps: usize) -> QuenchSpec<f64> {
        let lattice = Lattice::new(nx, ny).unwrap();
        QuenchSpec::uniform(lattice, -1.0, 2.0, 0.25, steps, -0.5)
    }

    #[test]
    fn observable_expansion() {
        let sum = PauliSum::<f64>::ztot2_observable(4);
        assert_eq!(sum.len(), 7);
        assert_relative_eq!(sum.coefficient(&PauliString::IDENTITY), 0.25);
        let zz = PauliString::parse("ZZII").unwrap();
        assert_relative_eq!(sum.coefficient(&zz), 0.125);
    }

    #[test]
    fn x_conjugation_rotates_z_into_y() {
        let theta = 0.6f64;
        let z0 = PauliSum::single(PauliString::single(0, SitePauli::Z), 1.0);
        let gens = [Generator {
            g: PauliString::single(0, SitePauli::X),
            cos: theta.cos(),
            sin: theta.sin(),
        }];
        let (out, truncated) = conjugate_layer(&z0, &gens, 0.0, usize::MAX);
        assert_eq!(out.len(), 2);
        assert_relative_eq!(truncated, 0.0);
        assert_relative_eq!(
            out.coefficient(&PauliString::single(0, SitePauli::Z)),
            theta.cos(),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            out.coefficient(&PauliString::single(0, SitePauli::Y)),
            theta.sin(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn unpruned_propagation_matches_the_statevector() {
        let spec = uniform_spec(2, 3, 4);
        let opts = SpdOptions {
            delta: 0.0,
            canonicalize: false,
            ..SpdOptions::default()
        };
        let run = run_quench_ztot2(&spec, &opts).unwrap();
        let init = StateVector::product(&spec.thetas).unwrap();
        assert_relative_eq!(run.values[0], init.ztot2(), epsilon = 1e-12);
        for s in 1..=4 {
            let circuit = build_trotter(&QuenchSpec {
                steps: s,
                ..spec.clone()
            })
            .unwrap();
            let reference = run_ideal(&circuit, &init).unwrap().ztot2();
            assert_relative_eq!(run.values[s], reference, epsilon = 1e-10);
        }
        assert_relative_eq!(run.telemetry.truncated_mass, 0.0);
    }

    #[test]
    fn orbit_folding_changes_nothing_but_the_count() {
        let spec = uniform_spec(2, 3, 4);
        let base = SpdOptions::<f64> {
            delta: 0.0,
            canonicalize: false,
            ..SpdOptions::default()
        };
        let folded = SpdOptions {
            canonicalize: true,
            ..base
        };
        let plain = run_quench_ztot2(&spec, &base).unwrap();
        let compact = run_quench_ztot2(&spec, &folded).unwrap();
        for (a, b) in plain.values.iter().zip(&compact.values) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
        let plain_max = plain.telemetry.terms_per_step.iter().max().unwrap();
        let compact_max = compact.telemetry.terms_per_step.iter().max().unwrap();
        assert!(compact_max * 3 < *plain_max);
    }

    #[test]
    fn pruned_run_tracks_the_statevector() {
        let spec = uniform_spec(3, 3, 5);
        let opts = SpdOptions::<f64>::default();
        let run = run_quench_ztot2(&spec, &opts).unwrap();
        let init = StateVector::product(&spec.thetas).unwrap();
        for s in 1..=5 {
            let circuit = build_trotter(&QuenchSpec {
                steps: s,
                ..spec.clone()
            })
            .unwrap();
            let reference = run_ideal(&circuit, &init).unwrap().ztot2();
            assert!(
                (run.values[s] - reference).abs() < 0.02,
                "step {s}: {} vs {reference}",
                run.values[s]
            );
        }
        assert!(run.telemetry.truncated_mass > 0.0);
    }

    #[test]
    fn term_cap_is_enforced() {
        let spec = uniform_spec(3, 3, 5);
        let opts = SpdOptions {
            max_terms: 50,
            ..SpdOptions::default()
        };
        assert!(matches!(
            run_quench_ztot2(&spec, &opts),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn propagation_is_thread_count_invariant() {
        let spec = uniform_spec(3, 3, 4);
        let opts = SpdOptions::<f64>::default();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_quench_ztot2(&spec, &opts).unwrap());
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_quench_ztot2(&spec, &opts).unwrap());
        assert_eq!(one.values, four.values);
        assert_eq!(one.telemetry.terms_per_step, four.telemetry.terms_per_step);
        assert_eq!(one.telemetry.truncated_mass, four.telemetry.truncated_mass);
    }

    #[test]
    fn weight_cap_only_ever_removes_strings() {
        let spec = uniform_spec(2, 3, 4);
        let mut base = SpdOptions::default();
        base.delta = (2.0f64).powi(-18);
        base.canonicalize = false;
        let uncapped = run_quench_ztot2(&spec, &base).unwrap();

        let mut at_n = base;
        at_n.max_weight = spec.lattice.n();
        let full = run_quench_ztot2(&spec, &at_n).unwrap();
        assert_eq!(uncapped.values, full.values);
        assert_eq!(
            uncapped.telemetry.terms_per_step,
            full.telemetry.terms_per_step
        );

        let mut tight = base;
        tight.max_weight = 2;
        let capped = run_quench_ztot2(&spec, &tight).unwrap();
        for (c, u) in capped
            .telemetry
            .terms_per_step
            .iter()
            .zip(&uncapped.telemetry.terms_per_step)
        {
            assert!(c <= u);
        }
        assert!(capped.telemetry.truncated_mass >= uncapped.telemetry.truncated_mass);
    }

    #[test]
    fn nonuniform_angles_fall_back_to_unfolded_propagation() {
        let lattice = Lattice::new(2, 3).unwrap();
        let mut spec = QuenchSpec::uniform(lattice, -1.0, 2.0, 0.25, 2, -0.5);
        spec.thetas[2] = 1.0;
        let folded = run_quench_ztot2(&spec, &SpdOptions::default()).unwrap();
        assert!(!folded.telemetry.canonicalized);
        let mut opts = SpdOptions::default();
        opts.canonicalize = false;
        let unfolded = run_quench_ztot2(&spec, &opts).unwrap();
        assert_eq!(folded.values, unfolded.values);

        let uniform = QuenchSpec::uniform(Lattice::new(2, 3).unwrap(), -1.0, 2.0, 0.25, 2, -0.5);
        let run = run_quench_ztot2(&uniform, &SpdOptions::default()).unwrap();
        assert!(run.telemetry.canonicalized);
    }
}
