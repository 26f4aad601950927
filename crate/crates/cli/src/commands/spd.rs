//! Heisenberg-picture propagation of the squared magnetization at a ladder
//! of truncation thresholds, with growth telemetry per step.

use serde::Serialize;
use tfim_core::spd::{run_quench_ztot2, SpdOptions};
use tfim_core::Result;

use crate::config::SpdConfig;
use crate::out::{Cell, Sink};

pub const OBSERVABLE_COLUMNS: [&str; 3] = ["delta_exponent", "s", "value"];
pub const TELEMETRY_COLUMNS: [&str; 6] = [
    "delta_exponent",
    "s",
    "terms",
    "truncated_mass",
    "wall_ms",
    "canonicalized",
];

#[derive(Serialize)]
struct LadderEntry {
    delta_exponent: u32,
    max_terms_reached: usize,
    truncated_mass: f64,
    wall_ms: u128,
    canonicalized: bool,
}

#[derive(Serialize)]
struct SpdReport {
    ladder: Vec<LadderEntry>,
}

pub fn run(cfg: &SpdConfig, sink: &mut Sink) -> Result<()> {
    let spec = cfg.model.spec()?;
    let mut observable_rows = Vec::new();
    let mut telemetry_rows = Vec::new();
    let mut ladder = Vec::new();

    for &exponent in &cfg.delta_exponents {
        let opts = SpdOptions {
            delta: (2.0f64).powi(-(exponent as i32)),
            max_weight: cfg.max_weight.unwrap_or(usize::MAX),
            max_terms: cfg.max_terms,
            canonicalize: cfg.canonicalize,
        };
        let run = run_quench_ztot2(&spec, &opts)?;
        for (s, &value) in run.values.iter().enumerate() {
            observable_rows.push(vec![
                Cell::U(exponent as u64),
                Cell::U(s as u64),
                Cell::F(value),
            ]);
        }
        let t = &run.telemetry;
        for s in 0..t.terms_per_step.len() {
            telemetry_rows.push(vec![
                Cell::U(exponent as u64),
                Cell::U(s as u64),
                Cell::U(t.terms_per_step[s] as u64),
                Cell::F(t.truncated_per_step[s]),
                Cell::U(t.wall_ms_per_step[s] as u64),
                Cell::S(t.canonicalized.to_string()),
            ]);
        }
        let peak = t.terms_per_step.iter().copied().max().unwrap_or(0);
        println!(
            "delta 2^-{exponent}: {peak} strings at peak, {:.3e} mass truncated",
            t.truncated_mass
        );
        ladder.push(LadderEntry {
            delta_exponent: exponent,
            max_terms_reached: peak,
            truncated_mass: t.truncated_mass,
            wall_ms: t.wall_ms,
            canonicalized: t.canonicalized,
        });
    }

    sink.write_table("observables", &OBSERVABLE_COLUMNS, &observable_rows)?;
    sink.write_table("telemetry", &TELEMETRY_COLUMNS, &telemetry_rows)?;
    sink.write_report("spd_report.json", &SpdReport { ladder })?;
    Ok(())
}
