//! Cycle benchmarking of the entangling gate: simulate the decay curves,
//! fit the per-Pauli channel, and persist a reusable noise model.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use tfim_core::noise::{
    fit_cycle_benchmarking, simulate_cycle_benchmarking, CbConfig, NoiseModelFile,
    TWO_QUBIT_PAULIS,
};
use tfim_core::{Error, Result};

use crate::config::CbCommandConfig;
use crate::out::{Cell, Sink};

pub const DECAY_COLUMNS: [&str; 5] = ["length", "pauli", "mean", "stderr", "kept"];
pub const FIT_COLUMNS: [&str; 6] = [
    "pauli",
    "fidelity",
    "fidelity_sigma",
    "probability",
    "probability_sigma",
    "amplitude",
];

#[derive(Serialize)]
struct CbSummary {
    theta_eps: f64,
    theta_eps_sigma: f64,
    total_error: f64,
    injected_total_error: f64,
    coverage: usize,
    converged: bool,
}

pub fn run(cfg: &CbCommandConfig, seed: u64, sink: &mut Sink) -> Result<()> {
    let channel = cfg.channel()?;
    let injected = *channel.probabilities();
    let cb = CbConfig {
        lengths: cfg.lengths.clone(),
        shots_per_point: cfg.shots_per_point,
        zz_angle: cfg.zz_angle,
        coherent_error: cfg.coherent_error,
        channel,
        leak_probability: cfg.leak_probability,
        detection_false_positive: cfg.detection_false_positive,
        detection_false_negative: cfg.detection_false_negative,
    };
    let data = simulate_cycle_benchmarking(&cb, seed);
    let fit = fit_cycle_benchmarking(&data)?;

    let mut decay_rows = Vec::new();
    for (k, &length) in data.lengths.iter().enumerate() {
        for j in 1..16 {
            decay_rows.push(vec![
                Cell::U(length as u64),
                Cell::S(TWO_QUBIT_PAULIS[j].to_string()),
                Cell::F(data.means[k][j]),
                Cell::F(data.stderrs[k][j]),
                Cell::U(data.kept[k][j] as u64),
            ]);
        }
    }
    sink.write_table("decays", &DECAY_COLUMNS, &decay_rows)?;

    let fit_rows: Vec<Vec<Cell>> = (1..16)
        .map(|j| {
            vec![
                Cell::S(TWO_QUBIT_PAULIS[j].to_string()),
                Cell::F(fit.fidelities[j]),
                Cell::F(fit.fidelity_sigmas[j]),
                Cell::F(fit.probabilities[j]),
                Cell::F(fit.probability_sigmas[j]),
                Cell::F(fit.amplitudes[j]),
            ]
        })
        .collect();
    sink.write_table("fit", &FIT_COLUMNS, &fit_rows)?;

    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let model = NoiseModelFile::from_fit(&fit, cfg.zz_angle, created);
    sink.write_report("noise_model.json", &model)?;

    let coverage = (1..16)
        .filter(|&j| {
            (fit.probabilities[j] - injected[j]).abs() <= 3.0 * fit.probability_sigmas[j]
        })
        .count();
    let total: f64 = fit.probabilities[1..].iter().map(|p| p.max(0.0)).sum();
    let injected_total: f64 = injected[1..].iter().sum();
    println!("recovered {coverage}/15 error probabilities within 3 sigma");
    sink.write_report(
        "summary.json",
        &CbSummary {
            theta_eps: fit.theta_eps,
            theta_eps_sigma: fit.theta_eps_sigma,
            total_error: total,
            injected_total_error: injected_total,
            coverage,
            converged: fit.converged,
        },
    )?;
    if coverage < 14 {
        return Err(Error::fit(format!(
            "only {coverage}/15 recovered probabilities agree with the injected channel"
        )));
    }
    Ok(())
}
