//! Energy-transport fit: follow the Fourier modes of a domain-wall energy
//! profile and collapse their decay rates onto a diffusion constant.

use serde::Serialize;
use tfim_core::analysis::hydro::{
    domain_wall_thetas, fit_diffusion, run_hydro_statevector, synthetic_hydro_data,
    HydroData, HydroFitOptions,
};
use tfim_core::analysis::magnus::mean_field_angle;
use tfim_core::{Error, Result};

use crate::config::HydroConfig;
use crate::out::{Cell, Sink};

pub const MODE_COLUMNS: [&str; 5] = ["s", "n", "q", "amp", "sigma"];
pub const RATE_COLUMNS: [&str; 6] = ["n", "q", "q_squared", "gamma", "sigma", "points_used"];

#[derive(Serialize)]
struct HydroSummary {
    engine: String,
    diffusion: f64,
    sigma: f64,
    zero_mode_rate: Option<[f64; 2]>,
    skipped_modes: Vec<usize>,
}

fn collect(cfg: &HydroConfig, seed: u64) -> Result<HydroData<f64>> {
    match cfg.engine.as_str() {
        "synthetic" => synthetic_hydro_data(
            cfg.lx,
            cfg.diffusion,
            cfg.steps,
            cfg.shots,
            cfg.noise_scale,
            seed,
        ),
        "statevector" => {
            let mut spec = cfg.model.spec()?;
            let background = mean_field_angle(spec.j, spec.h, spec.lattice.degree(0))?
                .angle
                + cfg.background_delta_theta;
            spec.thetas = domain_wall_thetas(&spec.lattice, background);
            spec.steps = cfg.steps;
            let noise = cfg.noise.noise_config()?;
            run_hydro_statevector(&spec, &noise, cfg.shots, seed)
        }
        other => Err(Error::config(format!(
            "unknown transport engine {other:?}; use synthetic or statevector"
        ))),
    }
}

pub fn run(cfg: &HydroConfig, seed: u64, sink: &mut Sink) -> Result<()> {
    let data = collect(cfg, seed)?;

    let mut mode_rows = Vec::new();
    for track in &data.modes {
        for (k, &time) in data.times.iter().enumerate() {
            mode_rows.push(vec![
                Cell::F(time),
                Cell::U(track.n as u64),
                Cell::F(track.q),
                Cell::F(track.amps[k]),
                match &track.sigmas {
                    Some(sigmas) => Cell::F(sigmas[k]),
                    None => Cell::Empty,
                },
            ]);
        }
    }
    sink.write_table("modes", &MODE_COLUMNS, &mode_rows)?;

    let fit = fit_diffusion(
        &data,
        &HydroFitOptions {
            s_min: cfg.s_min,
            min_points: cfg.min_points,
            snr_factor: cfg.snr_factor,
        },
    )?;
    let rate_rows: Vec<Vec<Cell>> = fit
        .mode_rates
        .iter()
        .map(|rate| {
            vec![
                Cell::U(rate.n as u64),
                Cell::F(rate.q),
                Cell::F(rate.q * rate.q),
                Cell::F(rate.gamma),
                Cell::F(rate.sigma),
                Cell::U(rate.points_used as u64),
            ]
        })
        .collect();
    sink.write_table("rates", &RATE_COLUMNS, &rate_rows)?;

    println!("D = {} +- {}", fit.diffusion, fit.sigma);
    sink.write_report(
        "summary.json",
        &HydroSummary {
            engine: cfg.engine.clone(),
            diffusion: fit.diffusion,
            sigma: fit.sigma,
            zero_mode_rate: fit.zero_mode_rate.map(|(g, s)| [g, s]),
            skipped_modes: fit.skipped_modes.clone(),
        },
    )?;
    Ok(())
}
