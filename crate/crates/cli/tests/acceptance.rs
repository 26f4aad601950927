//! End-to-end acceptance checks, one per shipping criterion. Each test
//! prints a single PASS/FAIL line (visible with --nocapture) and asserts.

use std::process::Command;
use std::time::Instant;

use rand_distr::{Binomial, Distribution, StandardNormal};
use tfim_core::analysis::hydro::{fit_diffusion, synthetic_hydro_data, HydroFitOptions};
use tfim_core::analysis::magnus::{
    effective_hamiltonian, mean_field_angle, mismatch_halving_ratio,
};
use tfim_core::analysis::thermal::{ztot2_diagonal, DenseSpectrum};
use tfim_core::analysis::{ideal_ztot2_series, time_average};
use tfim_core::circuit::transform::{apply_transforms, TransformOptions};
use tfim_core::circuit::{build_trotter, QuenchSpec};
use tfim_core::mitigation::{
    bin_observations, optimal_zne_params, variance_objective, zero_noise_regression,
    zne_extrapolate,
};
use tfim_core::noise::{
    fidelities_to_probabilities, fit_cycle_benchmarking, probabilities_to_fidelities,
    simulate_cycle_benchmarking, CbConfig, PauliChannel,
};
use tfim_core::rng::stream_rng;
use tfim_core::sim::{run_ideal, run_ztot2_trajectories, NoiseConfig, ShotPlan, StateVector};
use tfim_core::spd::{run_quench_ztot2, SpdOptions};
use tfim_core::Lattice;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id:02} {name}: {tag} ({detail})");
    assert!(pass, "criterion {id:02} {name}: {detail}");
}

fn uniform_spec(nx: usize, ny: usize, dt: f64, steps: usize, theta: f64) -> QuenchSpec<f64> {
    let lattice = Lattice::new(nx, ny).unwrap();
    QuenchSpec::uniform(lattice, -1.0, 2.0, dt, steps, theta)
}

fn ground_angle(coordination: usize) -> f64 {
    mean_field_angle(-1.0, 2.0, coordination).unwrap().angle
}

#[test]
fn acceptance_01_trivial_limits() {
    let start = Instant::now();
    let n = 9usize;

    let up = ideal_ztot2_series(&uniform_spec(3, 3, 0.25, 0, 0.0)).unwrap()[0];
    let equator = ideal_ztot2_series(&uniform_spec(3, 3, 0.25, 0, std::f64::consts::FRAC_PI_2))
        .unwrap()[0];
    let lattice = Lattice::new(3, 3).unwrap();
    let spectrum =
        DenseSpectrum::new(&effective_hamiltonian(&lattice, -1.0, 2.0, 0.25), n).unwrap();
    let hot = spectrum
        .diagonal_expectation_at(0.0, &ztot2_diagonal(n))
        .unwrap();

    let elapsed = start.elapsed().as_secs_f64();
    let pass = (up - 1.0).abs() <= 1e-12
        && (equator - 1.0 / n as f64).abs() <= 1e-12
        && (hot - 1.0 / n as f64).abs() <= 1e-12
        && elapsed < 1.0;
    report(
        1,
        "trivial limits",
        pass,
        &format!("up={up:.15}, equator={equator:.15}, infinite-T={hot:.15}, {elapsed:.2}s"),
    );
}

#[test]
fn acceptance_02_transform_equivalence() {
    let start = Instant::now();
    let mut min_overlap = f64::INFINITY;
    for &(nx, ny) in &[(3usize, 3usize), (3, 4)] {
        let spec = uniform_spec(nx, ny, 0.25, 5, ground_angle(4));
        let circuit = build_trotter(&spec).unwrap();
        let init = StateVector::product(&spec.thetas).unwrap();
        let base = run_ideal(&circuit, &init).unwrap();

        let mut check = |opts: TransformOptions, seed: Option<u64>| {
            let transformed = match seed {
                None => apply_transforms(&circuit, opts, None).unwrap(),
                Some(s) => {
                    let mut rng = stream_rng(0xACCE97, s);
                    apply_transforms(&circuit, opts, Some(&mut rng)).unwrap()
                }
            };
            let state = run_ideal(&transformed, &init).unwrap();
            min_overlap = min_overlap.min(base.overlap(&state).norm());
        };

        let dd = TransformOptions {
            dd: true,
            rc: false,
            extended_phase_rule: false,
        };
        check(dd, None);
        check(
            TransformOptions {
                extended_phase_rule: true,
                ..dd
            },
            None,
        );
        for k in 0..20 {
            check(
                TransformOptions {
                    dd: false,
                    rc: true,
                    extended_phase_rule: false,
                },
                Some(k),
            );
            check(
                TransformOptions {
                    dd: true,
                    rc: true,
                    extended_phase_rule: false,
                },
                Some(100 + k),
            );
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = min_overlap > 1.0 - 1e-10 && elapsed < 60.0;
    report(
        2,
        "transform equivalence",
        pass,
        &format!("min overlap 1-{:.2e}, {elapsed:.2}s", 1.0 - min_overlap),
    );
}

#[test]
fn acceptance_03_prethermal_vs_heating() {
    let start = Instant::now();
    let theta = ground_angle(4);
    let n = 16.0;

    let slow = ideal_ztot2_series(&uniform_spec(4, 4, 0.25, 30, theta)).unwrap();
    let slow_avg = time_average(&slow, 20, 30).unwrap();
    let fast = ideal_ztot2_series(&uniform_spec(4, 4, 1.0, 30, theta)).unwrap();
    let fast_avg = time_average(&fast, 20, 30).unwrap();

    let elapsed = start.elapsed().as_secs_f64();
    let pass = slow_avg > 5.0 / n
        && fast_avg < 2.0 / n
        && (slow_avg - 0.722889).abs() < 1e-4
        && (fast_avg - 0.102334).abs() < 1e-4
        && elapsed < 600.0;
    report(
        3,
        "prethermal vs heating",
        pass,
        &format!(
            "dt=0.25 avg {slow_avg:.6} > {:.4}, dt=1.0 avg {fast_avg:.6} < {:.4}, {elapsed:.1}s",
            5.0 / n,
            2.0 / n
        ),
    );
}

#[test]
fn acceptance_04_spd_oracle_agreement() {
    let start = Instant::now();
    let theta = ground_angle(4) + 2.0 * std::f64::consts::PI / 9.0;
    let spec = uniform_spec(3, 3, 0.25, 20, theta);

    let exact = ideal_ztot2_series(&spec).unwrap();
    let opts = SpdOptions {
        delta: (2.0f64).powi(-16),
        ..SpdOptions::default()
    };
    let run = run_quench_ztot2(&spec, &opts).unwrap();
    let max_diff = run
        .values
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let max_terms = *run.telemetry.terms_per_step.iter().max().unwrap();

    let elapsed = start.elapsed().as_secs_f64();
    let pass = max_diff <= 0.02 && max_terms <= 4119 && elapsed < 600.0;
    report(
        4,
        "sparse-propagator agreement",
        pass,
        &format!("max |diff| {max_diff:.4} <= 0.02, peak terms {max_terms} <= 4119, {elapsed:.1}s"),
    );
}

#[test]
fn acceptance_05_cycle_benchmarking_round_trip() {
    let start = Instant::now();
    let channel = PauliChannel::<f64>::uniform_depolarizing(6e-4).unwrap();
    let injected = *channel.probabilities();
    let cfg = CbConfig::standard(-0.5, channel);
    let data = simulate_cycle_benchmarking(&cfg, 3);
    let fit = fit_cycle_benchmarking(&data).unwrap();
    let coverage = (1..16)
        .filter(|&j| (fit.probabilities[j] - injected[j]).abs() <= 3.0 * fit.probability_sigmas[j])
        .count();

    let mut asymmetric = [0.0f64; 16];
    asymmetric[0] = 1.0 - 6e-4;
    asymmetric[3] = 2.5e-4;
    asymmetric[5] = 1.5e-4;
    asymmetric[10] = 1.2e-4;
    asymmetric[15] = 0.8e-4;
    let mut involution_err = 0.0f64;
    for probs in [injected, asymmetric] {
        let back = fidelities_to_probabilities(&probabilities_to_fidelities(&probs));
        for j in 0..16 {
            involution_err = involution_err.max((back[j] - probs[j]).abs());
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    let pass = coverage >= 14 && involution_err <= 1e-12 && elapsed < 300.0;
    report(
        5,
        "cycle-benchmarking round trip",
        pass,
        &format!(
            "{coverage}/15 probabilities within 3 sigma, transform involution {involution_err:.1e}, {elapsed:.1}s"
        ),
    );
}

/// Numeric minimum of the two-point variance objective: coarse alpha scan,
/// local refinement, ternary search in the shot split.
fn numeric_zne_minimum(kappa: f64, zeta: f64) -> (f64, f64) {
    let split_minimum = |alpha: f64| {
        let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
        for _ in 0..200 {
            let a = lo + (hi - lo) / 3.0;
            let b = hi - (hi - lo) / 3.0;
            if variance_objective(alpha, a, kappa, zeta)
                < variance_objective(alpha, b, kappa, zeta)
            {
                hi = b;
            } else {
                lo = a;
            }
        }
        (lo + hi) / 2.0
    };
    let scan = |lo: f64, hi: f64, step: f64| {
        let mut best = (f64::INFINITY, lo, 0.5);
        let mut alpha = lo;
        while alpha <= hi {
            let r = split_minimum(alpha);
            let value = variance_objective(alpha, r, kappa, zeta);
            if value < best.0 {
                best = (value, alpha, r);
            }
            alpha += step;
        }
        best
    };
    let coarse = scan(1.01, 60.0, 0.01);
    let fine = scan(coarse.1 - 0.02, coarse.1 + 0.02, 1e-4);
    (fine.1, fine.2)
}

#[test]
fn acceptance_06_zne_parameters_and_bias() {
    let start = Instant::now();

    let p = optimal_zne_params(1.0, 0.3, 1e6).unwrap();
    let (alpha_num, r_num) = numeric_zne_minimum(1.0, 0.3);
    let point_ok = (p.alpha - alpha_num).abs() / alpha_num <= 0.005
        && (p.r - r_num).abs() / r_num <= 0.005;

    let mut grid_err = 0.0f64;
    for &kappa in &[0.25, 1.0, 4.0] {
        for i in 0..25 {
            let zeta = 0.05 * (2.0f64 / 0.05).powf(i as f64 / 24.0);
            let q = optimal_zne_params(kappa, zeta, 1e6).unwrap();
            let (alpha_num, r_num) = numeric_zne_minimum(kappa, zeta);
            grid_err = grid_err
                .max((q.alpha - alpha_num).abs() / alpha_num)
                .max((q.r - r_num).abs() / r_num);
        }
    }

    let spec = uniform_spec(3, 4, 0.25, 20, ground_angle(4));
    let ideal = ideal_ztot2_series(&spec).unwrap();
    let circuit = build_trotter(&spec).unwrap();
    let init = StateVector::product(&spec.thetas).unwrap();
    let channel = PauliChannel::<f64>::uniform_depolarizing(6e-4).unwrap();
    let noise = NoiseConfig {
        two_qubit_channel: Some(channel.clone()),
        ..NoiseConfig::default()
    };
    let trajectories = 1200;
    let base = run_ztot2_trajectories(&ShotPlan {
        circuit: &circuit,
        init: &init,
        noise: &noise,
        rc_per_shot: false,
        amplify: None,
        shots: trajectories,
        master_seed: 0x5eed,
        stream_offset: 0,
    })
    .unwrap();
    let amplified = run_ztot2_trajectories(&ShotPlan {
        circuit: &circuit,
        init: &init,
        noise: &noise,
        rc_per_shot: false,
        amplify: Some((&channel, p.alpha)),
        shots: trajectories,
        master_seed: 0x5eed,
        stream_offset: 1 << 32,
    })
    .unwrap();
    let mut max_bias = 0.0f64;
    for s in 0..=20 {
        let out = zne_extrapolate(&base[s], &amplified[s], p.alpha, 0.0).unwrap();
        max_bias = max_bias.max((out.value - ideal[s]).abs() / ideal[s]);
    }

    let elapsed = start.elapsed().as_secs_f64();
    let pass = point_ok && grid_err <= 0.01 && max_bias <= 0.05 && elapsed < 900.0;
    report(
        6,
        "zero-noise extrapolation",
        pass,
        &format!(
            "closed form ({:.4}, {:.4}) vs numeric ({alpha_num:.4}, {r_num:.4}), grid err {grid_err:.2e}, max bias {:.2}%, {elapsed:.1}s",
            p.alpha,
            p.r,
            100.0 * max_bias
        ),
    );
}

#[test]
fn acceptance_07_znr_toy_model() {
    let start = Instant::now();
    let (a, b, n) = (0.53f64, 0.152f64, 56u64);
    let truth = a + 1.0 / n as f64;
    let per_shot_sigma = 2.0 / (n as f64).sqrt();
    let leak = Binomial::new(n, 6e-4 * 100.0).unwrap();
    let mut rng = stream_rng(0x702, 0);
    let pairs: Vec<(u32, f64)> = (0..10_000)
        .map(|_| {
            let m = leak.sample(&mut rng) as u32;
            let noise: f64 = StandardNormal.sample(&mut rng);
            (
                m,
                a * (-b * m as f64).exp() + 1.0 / n as f64 + per_shot_sigma * noise,
            )
        })
        .collect();
    let mean_m = pairs.iter().map(|&(m, _)| m as f64).sum::<f64>() / pairs.len() as f64;

    let bins = bin_observations(&pairs);
    let result = zero_noise_regression(&bins, n as usize, 20).unwrap();
    let postselect_sigma = bins
        .iter()
        .find(|bin| bin.m == 0)
        .map(|bin| bin.estimate.stderr)
        .unwrap();

    let elapsed = start.elapsed().as_secs_f64();
    let pass = (result.value - truth).abs() <= result.sigma
        && result.sigma < postselect_sigma
        && mean_m >= 2.0
        && elapsed < 60.0;
    report(
        7,
        "leakage regression toy",
        pass,
        &format!(
            "value {:.4} +- {:.4} vs truth {truth:.4}, m=0 sigma {postselect_sigma:.4}, mean m {mean_m:.2}, {elapsed:.1}s",
            result.value, result.sigma
        ),
    );
}

#[test]
fn acceptance_08_magnus_step_scaling() {
    let start = Instant::now();
    let lattice = Lattice::new(2, 3).unwrap();
    let ratio = mismatch_halving_ratio(&lattice, -1.0, 2.0, 0.2).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass =
        ratio >= 7.0 && (ratio - 16.607840771501266).abs() / ratio < 1e-6 && elapsed < 60.0;
    report(
        8,
        "effective-Hamiltonian step scaling",
        pass,
        &format!("mismatch ratio {ratio:.2} >= 7, {elapsed:.2}s"),
    );
}

#[test]
fn acceptance_09_diffusion_recovery() {
    let start = Instant::now();
    let opts = HydroFitOptions::default();

    let clean = synthetic_hydro_data::<f64>(14, 0.38, 30, 0, 0.0, 1).unwrap();
    let clean_fit = fit_diffusion(&clean, &opts).unwrap();
    let (clean_zero, clean_zero_sigma) = clean_fit.zero_mode_rate.unwrap();

    let noisy = synthetic_hydro_data::<f64>(14, 0.38, 30, 2000, 0.2, 5).unwrap();
    let noisy_fit = fit_diffusion(&noisy, &opts).unwrap();
    let (noisy_zero, noisy_zero_sigma) = noisy_fit.zero_mode_rate.unwrap();

    let elapsed = start.elapsed().as_secs_f64();
    let pass = (clean_fit.diffusion - 0.38).abs() <= 1e-6
        && clean_zero.abs() <= clean_zero_sigma
        && (noisy_fit.diffusion - 0.38).abs() <= 2.0 * noisy_fit.sigma
        && noisy_zero.abs() <= noisy_zero_sigma
        && elapsed < 60.0;
    report(
        9,
        "diffusion recovery",
        pass,
        &format!(
            "noiseless D {:.8}, 2000-shot D {:.4} +- {:.4} ({:.1} sigma off), {elapsed:.1}s",
            clean_fit.diffusion,
            noisy_fit.diffusion,
            noisy_fit.sigma,
            (noisy_fit.diffusion - 0.38).abs() / noisy_fit.sigma
        ),
    );
}

#[test]
fn acceptance_10_pipeline_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("quench.json");
    std::fs::write(
        &config,
        r#"{
  "model": {"nx": 3, "ny": 3, "steps": 3, "dt": 0.25},
  "noise": {"two_qubit_error": 0.003, "leak_prob_2q": 0.004},
  "transforms": {"dd": true, "rc": true},
  "shots": 150,
  "zne": {"zeta": 0.3, "kappa": 1.0},
  "seed": 11
}"#,
    )
    .unwrap();
    let mitigate_config = dir.path().join("mitigate.json");

    let run = |args: &[&str]| {
        let output = Command::new(env!("CARGO_BIN_EXE_tfim"))
            .args(args)
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(
            output.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    };
    run(&["quench", "--config", "quench.json", "--out-dir", "a"]);
    run(&["quench", "--config", "quench.json", "--out-dir", "b"]);
    std::fs::write(
        &mitigate_config,
        r#"{
  "nx": 3, "ny": 3,
  "raw_archive": "a/shots_raw.csv",
  "na_archive": "a/shots_na.csv",
  "plan": {"zeta": 0.3, "kappa": 1.0},
  "seed": 11
}"#,
    )
    .unwrap();
    run(&["mitigate", "--config", "mitigate.json", "--out-dir", "ma"]);
    run(&["mitigate", "--config", "mitigate.json", "--out-dir", "mb"]);

    let mut same = true;
    let mut compared = Vec::new();
    for (left, right, name) in [
        ("a", "b", "observables.csv"),
        ("a", "b", "shots_raw.csv"),
        ("a", "b", "shots_na.csv"),
        ("a", "b", "plan.json"),
        ("ma", "mb", "mitigation.csv"),
        ("ma", "mb", "mitigation_report.json"),
    ] {
        let x = std::fs::read(dir.path().join(left).join(name)).unwrap();
        let y = std::fs::read(dir.path().join(right).join(name)).unwrap();
        same &= x == y;
        compared.push(format!("{name} ({} bytes)", x.len()));
    }

    let elapsed = start.elapsed().as_secs_f64();
    let pass = same && elapsed < 300.0;
    report(
        10,
        "pipeline determinism",
        pass,
        &format!("byte-identical: {}, {elapsed:.1}s", compared.join(", ")),
    );
}
