//! Run configuration documents: one JSON file per invocation, with serde
//! defaults for every field so a missing config falls back to a small
//! reference run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use tfim_core::analysis::magnus::mean_field_angle;
use tfim_core::circuit::transform::TransformOptions;
use tfim_core::circuit::QuenchSpec;
use tfim_core::noise::{two_qubit_index, NoiseModelFile, PauliChannel};
use tfim_core::pauli::SitePauli;
use tfim_core::sim::NoiseConfig;
use tfim_core::{Error, Lattice, Result};

/// FNV-1a over the raw config bytes, the run identity in the manifest.
pub fn config_hash(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// Parse a config document, or produce the default when no path was given.
pub fn load<T: for<'de> Deserialize<'de> + Default>(
    path: Option<&Path>,
) -> Result<(T, String)> {
    match path {
        None => Ok((T::default(), "default".to_string())),
        Some(p) => {
            let bytes = fs::read(p)?;
            let parsed = serde_json::from_slice(&bytes)
                .map_err(|e| Error::config(format!("{}: {e}", p.display())))?;
            Ok((parsed, config_hash(&bytes)))
        }
    }
}

/// Lattice, couplings, step size, and initial product state of one quench.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub nx: usize,
    pub ny: usize,
    pub j: f64,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    /// Initial angle offset from the mean-field ground-state angle.
    pub delta_theta: f64,
    /// Explicit per-site angles; overrides `delta_theta` when present.
    pub thetas: Option<Vec<f64>>,
    pub merge_x_layers: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            nx: 3,
            ny: 3,
            j: -1.0,
            h: 2.0,
            dt: 0.25,
            steps: 5,
            delta_theta: 0.0,
            thetas: None,
            merge_x_layers: true,
        }
    }
}

impl ModelConfig {
    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.nx, self.ny)
    }

    pub fn spec(&self) -> Result<QuenchSpec<f64>> {
        let lattice = self.lattice()?;
        let mut spec = match &self.thetas {
            Some(thetas) => {
                let mut s = QuenchSpec::uniform(
                    lattice,
                    self.j,
                    self.h,
                    self.dt,
                    self.steps,
                    0.0,
                );
                s.thetas = thetas.clone();
                s
            }
            None => {
                let base = mean_field_angle(self.j, self.h, lattice.degree(0))?.angle;
                QuenchSpec::uniform(
                    lattice,
                    self.j,
                    self.h,
                    self.dt,
                    self.steps,
                    base + self.delta_theta,
                )
            }
        };
        spec.merge_x_layers = self.merge_x_layers;
        spec.validate()?;
        Ok(spec)
    }
}

/// Error-model document. The entangling-gate channel comes from exactly one
/// of the three sources; everything else is a plain rate.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseDoc {
    /// Uniform depolarizing shortcut: total error probability.
    pub two_qubit_error: Option<f64>,
    /// Explicit per-Pauli error probabilities, keyed by two-letter label.
    pub pauli_probabilities: Option<BTreeMap<String, f64>>,
    /// Learned model written by the cycle-benchmarking command.
    pub noise_model_file: Option<PathBuf>,
    pub leak_prob_2q: f64,
    pub coherent_memory_angle: f64,
    pub one_q_overrotation: f64,
    pub detection_false_positive: f64,
    pub detection_false_negative: f64,
}

fn channel_from_labels(map: &BTreeMap<String, f64>) -> Result<PauliChannel<f64>> {
    let site = |c: char| match c {
        'I' => Ok(SitePauli::I),
        'X' => Ok(SitePauli::X),
        'Y' => Ok(SitePauli::Y),
        'Z' => Ok(SitePauli::Z),
        _ => Err(Error::config(format!("unknown Pauli letter {c}"))),
    };
    let mut pairs = Vec::new();
    for (label, &p) in map {
        let mut chars = label.chars();
        let (a, b) = match (chars.next(), chars.next(), chars.next()) {
            (Some(a), Some(b), None) => (site(a)?, site(b)?),
            _ => {
                return Err(Error::config(format!(
                    "channel label {label} is not two Pauli letters"
                )))
            }
        };
        pairs.push((two_qubit_index(a, b), p));
    }
    PauliChannel::from_error_probs(&pairs)
}

impl NoiseDoc {
    pub fn channel(&self) -> Result<Option<PauliChannel<f64>>> {
        let sources = [
            self.two_qubit_error.is_some(),
            self.pauli_probabilities.is_some(),
            self.noise_model_file.is_some(),
        ]
        .iter()
        .filter(|&&set| set)
        .count();
        if sources > 1 {
            return Err(Error::config(
                "pick one channel source: two_qubit_error, pauli_probabilities, \
                 or noise_model_file",
            ));
        }
        if let Some(path) = &self.noise_model_file {
            return Ok(Some(NoiseModelFile::load(path)?.to_channel()?));
        }
        if let Some(map) = &self.pauli_probabilities {
            return Ok(Some(channel_from_labels(map)?));
        }
        if let Some(e) = self.two_qubit_error {
            return Ok(Some(PauliChannel::uniform_depolarizing(e)?));
        }
        Ok(None)
    }

    pub fn noise_config(&self) -> Result<NoiseConfig<f64>> {
        Ok(NoiseConfig {
            two_qubit_channel: self.channel()?,
            leak_prob_2q: self.leak_prob_2q,
            coherent_memory_angle: self.coherent_memory_angle,
            one_q_overrotation: self.one_q_overrotation,
            detection_false_positive: self.detection_false_positive,
            detection_false_negative: self.detection_false_negative,
        })
    }
}

/// Circuit-transform switches.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformsDoc {
    pub dd: bool,
    pub rc: bool,
    pub extended_phase_rule: bool,
}

impl TransformsDoc {
    pub fn options(&self) -> TransformOptions {
        TransformOptions {
            dd: self.dd,
            rc: self.rc,
            extended_phase_rule: self.extended_phase_rule,
        }
    }
}

/// Two-point extrapolation plan inputs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZnePlanDoc {
    /// Expected exponential decay rate of the observable in the noise
    /// strength, per unit amplification.
    pub zeta: f64,
    pub kappa: f64,
    pub alpha_cap: f64,
    /// Drift ratio between learning and use; 1 in pure simulation.
    pub eta: f64,
    pub eta_sigma: f64,
}

impl Default for ZnePlanDoc {
    fn default() -> Self {
        ZnePlanDoc {
            zeta: 0.3,
            kappa: 1.0,
            alpha_cap: 10.0,
            eta: 1.0,
            eta_sigma: 0.0,
        }
    }
}

/// `quench` command document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuenchConfig {
    pub model: ModelConfig,
    pub noise: NoiseDoc,
    pub transforms: TransformsDoc,
    /// Shots per step count; 0 runs the exact ideal trajectory instead.
    pub shots: usize,
    /// When present, a noise-amplified series is taken alongside the raw
    /// one with the plan's optimal split.
    pub zne: Option<ZnePlanDoc>,
    pub seed: u64,
    pub bootstrap_resamples: usize,
}

impl Default for QuenchConfig {
    fn default() -> Self {
        QuenchConfig {
            model: ModelConfig::default(),
            noise: NoiseDoc::default(),
            transforms: TransformsDoc::default(),
            shots: 0,
            zne: None,
            seed: 0,
            bootstrap_resamples: 100,
        }
    }
}

/// `mitigate` command document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MitigateConfig {
    pub nx: usize,
    pub ny: usize,
    pub raw_archive: PathBuf,
    pub na_archive: Option<PathBuf>,
    pub plan: ZnePlanDoc,
    /// Herald bins need more samples than this to enter the regression.
    pub min_bin_shots: usize,
    pub bootstrap_resamples: usize,
    pub seed: u64,
}

impl Default for MitigateConfig {
    fn default() -> Self {
        MitigateConfig {
            nx: 3,
            ny: 3,
            raw_archive: PathBuf::from("shots_raw.csv"),
            na_archive: None,
            plan: ZnePlanDoc::default(),
            min_bin_shots: 20,
            bootstrap_resamples: 100,
            seed: 0,
        }
    }
}

/// `spd` command document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpdConfig {
    pub model: ModelConfig,
    /// Pruning thresholds as binary exponents: an entry `k` means `2^-k`.
    pub delta_exponents: Vec<u32>,
    pub max_weight: Option<usize>,
    pub max_terms: usize,
    pub canonicalize: bool,
}

impl Default for SpdConfig {
    fn default() -> Self {
        SpdConfig {
            model: ModelConfig::default(),
            delta_exponents: vec![13, 15, 17, 19, 21],
            max_weight: None,
            max_terms: 4_000_000,
            canonicalize: true,
        }
    }
}

/// `cb` command document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CbCommandConfig {
    pub zz_angle: f64,
    pub two_qubit_error: Option<f64>,
    pub pauli_probabilities: Option<BTreeMap<String, f64>>,
    pub lengths: Vec<usize>,
    pub shots_per_point: usize,
    pub coherent_error: f64,
    pub leak_probability: f64,
    pub detection_false_positive: f64,
    pub detection_false_negative: f64,
    pub seed: u64,
}

impl Default for CbCommandConfig {
    fn default() -> Self {
        CbCommandConfig {
            zz_angle: -0.5,
            two_qubit_error: Some(6e-4),
            pauli_probabilities: None,
            lengths: vec![4, 80, 160],
            shots_per_point: 10_000,
            coherent_error: 0.0,
            leak_probability: 0.0,
            detection_false_positive: 0.0,
            detection_false_negative: 0.0,
            seed: 0,
        }
    }
}

impl CbCommandConfig {
    pub fn channel(&self) -> Result<PauliChannel<f64>> {
        match (&self.pauli_probabilities, self.two_qubit_error) {
            (Some(_), Some(_)) => Err(Error::config(
                "pick one channel source: two_qubit_error or pauli_probabilities",
            )),
            (Some(map), None) => channel_from_labels(map),
            (None, Some(e)) => PauliChannel::uniform_depolarizing(e),
            (None, None) => Err(Error::config("the benchmarked channel is missing")),
        }
    }
}

/// `hydro` command document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HydroConfig {
    /// `synthetic` generates model data; `statevector` runs the circuit.
    pub engine: String,
    /// Synthetic engine: ring length and planted diffusion constant.
    pub lx: usize,
    pub diffusion: f64,
    pub noise_scale: f64,
    /// Statevector engine: the quench to run, prepared with a domain wall.
    pub model: ModelConfig,
    pub noise: NoiseDoc,
    /// Background angle offset outside the flipped column.
    pub background_delta_theta: f64,
    pub steps: usize,
    pub shots: usize,
    pub seed: u64,
    pub s_min: f64,
    pub min_points: usize,
    pub snr_factor: f64,
}

impl Default for HydroConfig {
    fn default() -> Self {
        HydroConfig {
            engine: "synthetic".to_string(),
            lx: 14,
            diffusion: 0.38,
            noise_scale: 0.0,
            model: ModelConfig {
                nx: 6,
                ny: 3,
                steps: 20,
                ..ModelConfig::default()
            },
            noise: NoiseDoc::default(),
            background_delta_theta: 0.0,
            steps: 30,
            shots: 0,
            seed: 0,
            s_min: 5.0,
            min_points: 3,
            snr_factor: 3.0,
        }
    }
}

/// `magnus` command document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MagnusConfig {
    pub nx: usize,
    pub ny: usize,
    pub j: f64,
    pub h: f64,
    pub dt: f64,
    /// Diagonalize one Trotter step against the corrected Hamiltonian.
    /// Needs a dense-tractable lattice.
    pub eigenphase: bool,
}

impl Default for MagnusConfig {
    fn default() -> Self {
        MagnusConfig {
            nx: 2,
            ny: 3,
            j: -1.0,
            h: 2.0,
            dt: 0.2,
            eigenphase: true,
        }
    }
}
