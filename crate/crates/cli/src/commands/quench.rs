//! Quench pipeline: build the circuit, apply transforms, run shots at each
//! step count, and persist the observable series plus the shot archive.

use serde::Serialize;
use tfim_core::analysis::ideal_ztot2_series;
use tfim_core::circuit::transform::{apply_transforms, TransformOptions};
use tfim_core::circuit::{build_trotter, QuenchSpec};
use tfim_core::mitigation::{bootstrap_sigma, optimal_zne_params};
use tfim_core::noise::PauliChannel;
use tfim_core::sim::{run_noisy_shots, ztot2_from_shot, ShotPlan, StateVector};
use tfim_core::{Error, Result};

use crate::config::QuenchConfig;
use crate::out::{Cell, Sink};

pub const SERIES_COLUMNS: [&str; 6] = ["s", "tag", "alpha", "mean", "stderr", "shots"];
pub const ARCHIVE_COLUMNS: [&str; 8] =
    ["s", "tag", "alpha", "shot", "seed", "bits", "herald_mask", "m"];

/// Separation between the shot-stream blocks of consecutive series so no
/// two shots anywhere in a run share a stream index.
const STREAM_STRIDE: u64 = 1 << 32;

#[derive(Serialize)]
struct PlanReport {
    zeta: f64,
    kappa: f64,
    alpha: f64,
    r: f64,
    gamma: f64,
    clamped: bool,
    shots_raw: usize,
    shots_na: usize,
}

struct SeriesRun {
    tag: &'static str,
    alpha: f64,
    shots: usize,
    stream_slot: u64,
    amplify: bool,
}

pub fn run(cfg: &QuenchConfig, seed: u64, sink: &mut Sink) -> Result<()> {
    let spec = cfg.model.spec()?;
    let n = spec.lattice.n();

    if cfg.shots == 0 {
        let series = ideal_ztot2_series(&spec)?;
        let rows: Vec<Vec<Cell>> = series
            .iter()
            .enumerate()
            .map(|(s, &v)| {
                vec![
                    Cell::U(s as u64),
                    Cell::S("raw".to_string()),
                    Cell::F(1.0),
                    Cell::F(v),
                    Cell::F(0.0),
                    Cell::U(0),
                ]
            })
            .collect();
        sink.write_table("observables", &SERIES_COLUMNS, &rows)?;
        return Ok(());
    }

    let noise = cfg.noise.noise_config()?;
    let mut runs = vec![SeriesRun {
        tag: "raw",
        alpha: 1.0,
        shots: cfg.shots,
        stream_slot: 0,
        amplify: false,
    }];
    if let Some(plan) = &cfg.zne {
        let params = optimal_zne_params(plan.kappa, plan.zeta, plan.alpha_cap)?;
        if noise.two_qubit_channel.is_none() {
            return Err(Error::config(
                "noise amplification needs an entangling-gate channel",
            ));
        }
        if cfg.shots < 2 {
            return Err(Error::config(
                "splitting shots across raw and amplified series needs shots >= 2",
            ));
        }
        let shots_raw =
            ((params.r * cfg.shots as f64).round() as usize).clamp(1, cfg.shots - 1);
        let shots_na = cfg.shots - shots_raw;
        runs[0].shots = shots_raw;
        runs.push(SeriesRun {
            tag: "na",
            alpha: params.alpha,
            shots: shots_na,
            stream_slot: 1,
            amplify: true,
        });
        sink.write_report(
            "plan.json",
            &PlanReport {
                zeta: plan.zeta,
                kappa: plan.kappa,
                alpha: params.alpha,
                r: params.r,
                gamma: params.gamma,
                clamped: params.clamped,
                shots_raw,
                shots_na,
            },
        )?;
    }

    let init = StateVector::product(&spec.thetas)?;
    let build_opts = TransformOptions {
        rc: false,
        ..cfg.transforms.options()
    };

    let mut series_rows = Vec::new();
    let mut archive_raw = Vec::new();
    let mut archive_na = Vec::new();
    for s in 0..=spec.steps {
        let step_spec = QuenchSpec {
            steps: s,
            ..spec.clone()
        };
        let mut circuit = build_trotter(&step_spec)?;
        if build_opts.dd {
            circuit = apply_transforms(&circuit, build_opts, None)?;
        }
        for run in &runs {
            let channel_ref: Option<(&PauliChannel<f64>, f64)> = if run.amplify {
                noise.two_qubit_channel.as_ref().map(|c| (c, run.alpha))
            } else {
                None
            };
            let plan = ShotPlan {
                circuit: &circuit,
                init: &init,
                noise: &noise,
                rc_per_shot: cfg.transforms.rc,
                amplify: channel_ref,
                shots: run.shots,
                master_seed: seed,
                stream_offset: (2 * s as u64 + run.stream_slot) * STREAM_STRIDE,
            };
            let records = run_noisy_shots(&plan)?;
            let values: Vec<f64> = records
                .iter()
                .map(|r| ztot2_from_shot::<f64>(r, n))
                .collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let stderr = bootstrap_sigma(
                &values,
                cfg.bootstrap_resamples,
                seed ^ (2 * s as u64 + run.stream_slot).wrapping_mul(0x9e37_79b9),
                |sample| sample.iter().sum::<f64>() / sample.len() as f64,
            );
            series_rows.push(vec![
                Cell::U(s as u64),
                Cell::S(run.tag.to_string()),
                Cell::F(run.alpha),
                Cell::F(mean),
                Cell::F(stderr),
                Cell::U(run.shots as u64),
            ]);
            let archive = if run.amplify {
                &mut archive_na
            } else {
                &mut archive_raw
            };
            for (shot, record) in records.iter().enumerate() {
                archive.push(vec![
                    Cell::U(s as u64),
                    Cell::S(run.tag.to_string()),
                    Cell::F(run.alpha),
                    Cell::U(shot as u64),
                    Cell::U(record.seed),
                    Cell::S(format!("{:x}", record.bits)),
                    Cell::S(format!("{:x}", record.herald_mask)),
                    Cell::U(record.m as u64),
                ]);
            }
        }
    }
    sink.write_table("observables", &SERIES_COLUMNS, &series_rows)?;
    sink.write_table("shots_raw", &ARCHIVE_COLUMNS, &archive_raw)?;
    if !archive_na.is_empty() {
        sink.write_table("shots_na", &ARCHIVE_COLUMNS, &archive_na)?;
    }
    Ok(())
}
