//! End-to-end acceptance checks: exact noiseless regressions for both
//! policies, randomized estimator cross-validation, detection behavior
//! under Bernoulli noise, regret growth across horizons, parameter
//! arithmetic, partition budgets of generated environments, suffix
//! replay isolation, and byte-level output determinism. Each test
//! prints one line with the numbers it measured.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use banditsim_core::{
    emit_csv, emit_json, emit_plot, gen_holder, gen_inflexion, gen_local_poly,
    minimal_significant_partition, params_case_a, params_case_b, params_case_c, params_case_d,
    prudent, run_experiment, selective, switching_from_parts, BoundOverlay, ChannelConfig,
    EnvSource, EpisodeLedger, GeneratorRecipe, HolderConfig, InflexionConfig, LocalPolyConfig,
    NoiseModel, ObservationMode, OutputConfig, PolicyConfig, PrudentParams, QuotaValue,
    ReplayOptions, RunConfig, ScanMode, SelectiveParams, SwitchingConfig, CONFIG_SCHEMA_VERSION,
};

fn noiseless(mode: ObservationMode) -> ChannelConfig {
    ChannelConfig {
        noise: NoiseModel::None,
        mode,
    }
}

fn bernoulli() -> ChannelConfig {
    ChannelConfig {
        noise: NoiseModel::Bernoulli,
        mode: ObservationMode::Mean,
    }
}

#[test]
fn exact_regret_of_the_stationary_quota_run() {
    let env = switching_from_parts(
        100,
        &[1],
        &[vec![0.9, 0.4]],
        noiseless(ObservationMode::Mean),
    )
    .unwrap();
    let trace = prudent::run(&env, &PrudentParams::default(), 0).unwrap();
    assert_eq!(trace.total_regret, 25.0);
    assert!(trace.detections.is_empty());
    assert_eq!(trace.episode_count(), 1);
    println!(
        "PASS stationary quota run: regret {} (want exactly 25.0), {} detections, {} episode",
        trace.total_regret,
        trace.detections.len(),
        trace.episode_count()
    );
}

#[test]
fn exact_regret_of_the_stationary_elimination_run() {
    let env = switching_from_parts(
        100,
        &[1],
        &[vec![0.9, 0.0]],
        noiseless(ObservationMode::Gap),
    )
    .unwrap();
    let trace = selective::run(&env, &SelectiveParams::default(), 0).unwrap();
    let worse_arm_pulls = trace.pulls.iter().filter(|p| p.arm == 1).count();
    assert_eq!(worse_arm_pulls, 16);
    assert_eq!(trace.total_regret, 14.4);
    assert_eq!(trace.rounds, 84);
    assert_eq!(trace.episode_count(), 1);
    println!(
        "PASS stationary elimination run: dominated arm pulled {worse_arm_pulls} times \
         (want 16), regret {} (want exactly 14.4)",
        trace.total_regret
    );
}

/// Direct re-computation of the window estimators from a script of
/// (active set, observations) rounds.
struct Script {
    arms: usize,
    rounds: Vec<(Vec<usize>, Vec<f64>)>,
}

impl Script {
    fn obs_of(&self, r: usize, k: usize) -> Option<f64> {
        let (active, obs) = &self.rounds[r - 1];
        let i = active.iter().position(|&a| a == k)?;
        obs.get(i).copied()
    }

    fn pull_count(&self, k: usize, r1: usize, r2: usize) -> u32 {
        (r1..r2).filter(|&r| self.obs_of(r, k).is_some()).count() as u32
    }

    fn is_persistent(&self, k: usize, r1: usize, r2: usize) -> bool {
        (r1..r2).all(|r| self.rounds[r - 1].0.contains(&k))
    }

    fn persistent_set(&self, r1: usize, r2: usize) -> Vec<usize> {
        (0..self.arms)
            .filter(|&k| self.is_persistent(k, r1, r2))
            .collect()
    }

    fn rel_estimate(&self, k: usize, kp: usize, r1: usize, r2: usize) -> Option<f64> {
        if !self.is_persistent(kp, r1, r2) {
            return None;
        }
        let t_k = self.pull_count(k, r1, r2);
        if t_k == 0 {
            return Some(0.0);
        }
        let mut sum = 0.0;
        if k != kp {
            for r in r1..r2 {
                if let (Some(a), Some(b)) = (self.obs_of(r, k), self.obs_of(r, kp)) {
                    sum += b - a;
                }
            }
        }
        Some(sum / t_k as f64)
    }

    fn estimate(&self, k: usize, r1: usize, r2: usize) -> Option<f64> {
        self.persistent_set(r1, r2)
            .into_iter()
            .map(|kp| self.rel_estimate(k, kp, r1, r2).unwrap())
            .reduce(f64::max)
    }
}

#[test]
fn estimators_match_brute_force_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let tol = 1e-12;
    let mut comparisons = 0u64;
    for _ in 0..1000 {
        let arms = rng.random_range(1..=5usize);
        let n_rounds = rng.random_range(1..=20usize);
        let mut rounds = Vec::with_capacity(n_rounds);
        for r in 0..n_rounds {
            let mut active: Vec<usize> = (0..arms).filter(|_| rng.random_bool(0.7)).collect();
            if active.is_empty() {
                active.push(rng.random_range(0..arms));
            }
            let mut obs: Vec<f64> = active
                .iter()
                .map(|_| rng.random_range(0..=64) as f64 / 64.0)
                .collect();
            if r == n_rounds - 1 && rng.random_bool(0.3) {
                obs.truncate(rng.random_range(0..active.len()));
            }
            rounds.push((active, obs));
        }
        let script = Script { arms, rounds };
        let mut ledger = EpisodeLedger::new(arms).unwrap();
        for (active, obs) in &script.rounds {
            ledger.push_round(active.clone(), obs.clone()).unwrap();
        }
        for r2 in 2..=n_rounds + 1 {
            for r1 in 1..r2 {
                assert_eq!(
                    ledger.persistent_set(r1, r2).unwrap(),
                    script.persistent_set(r1, r2)
                );
                for k in 0..arms {
                    assert_eq!(
                        ledger.pull_count(k, r1, r2).unwrap(),
                        script.pull_count(k, r1, r2)
                    );
                    match (ledger.gap_estimate(k, r1, r2), script.estimate(k, r1, r2)) {
                        (Ok((got, _)), Some(want)) => assert!(
                            (got - want).abs() <= tol,
                            "estimate({k},{r1},{r2}): {got} vs {want}"
                        ),
                        (Err(_), None) => {}
                        (got, want) => panic!("estimate({k},{r1},{r2}): {got:?} vs {want:?}"),
                    }
                    for kp in 0..arms {
                        match (
                            ledger.gap_rel_estimate(k, kp, r1, r2),
                            script.rel_estimate(k, kp, r1, r2),
                        ) {
                            (Ok(got), Some(want)) => assert!(
                                (got - want).abs() <= tol,
                                "rel({k},{kp},{r1},{r2}): {got} vs {want}"
                            ),
                            (Err(_), None) => {}
                            (got, want) => {
                                panic!("rel({k},{kp},{r1},{r2}): {got:?} vs {want:?}")
                            }
                        }
                        comparisons += 1;
                    }
                    comparisons += 2;
                }
                comparisons += 1;
            }
        }
    }
    println!("PASS estimator oracles: 1000 random ledgers, {comparisons} comparisons within 1e-12");
}

#[test]
fn stationary_runs_stay_detection_free() {
    let mut with_detection = 0usize;
    let mut runs = 0usize;
    for means in [vec![0.5, 0.5], vec![0.9, 0.4]] {
        let env = switching_from_parts(2000, &[1], &[means], bernoulli()).unwrap();
        for seed in 0..50u64 {
            let trace = prudent::run(&env, &PrudentParams::default(), seed).unwrap();
            if !trace.detections.is_empty() {
                with_detection += 1;
            }
            runs += 1;
        }
    }
    assert!(
        with_detection <= 5,
        "{with_detection} of {runs} runs detected"
    );
    println!(
        "PASS no false alarms: {with_detection}/{runs} stationary runs with any detection \
         (allowed at most 5)"
    );
}

#[test]
fn gap_jump_detected_within_the_stated_window() {
    let env = switching_from_parts(
        2000,
        &[1, 1001],
        &[vec![0.95, 0.95], vec![0.95, 0.05]],
        bernoulli(),
    )
    .unwrap();
    let params = PrudentParams {
        segments: 2,
        drift_tolerance: 0.0,
        scan: ScanMode::Grid { base: 1.25 },
        quota_value: QuotaValue::LowerBound,
    };
    let mut in_window = 0usize;
    let mut clean_before = 0usize;
    for seed in 0..100u64 {
        let trace = prudent::run(&env, &params, seed).unwrap();
        if trace.detections.iter().all(|d| d.time > 1000) {
            clean_before += 1;
        }
        if trace
            .detections
            .iter()
            .any(|d| d.time > 1000 && d.time <= 1600)
        {
            in_window += 1;
        }
    }
    assert!(
        in_window >= 90,
        "only {in_window}/100 detected in (1000, 1600]"
    );
    assert!(
        clean_before >= 95,
        "only {clean_before}/100 clean before the change"
    );
    println!(
        "PASS jump detection: {in_window}/100 seeds detected within 600 steps of the change \
         (need 90), {clean_before}/100 with no earlier detection (need 95)"
    );
}

#[test]
fn regret_ratio_across_horizons_tracks_square_root_growth() {
    let mut means = Vec::new();
    let mut fitted_c: f64 = 0.0;
    for horizon in [2000u64, 8000] {
        let env = switching_from_parts(
            horizon,
            &[1, horizon / 3 + 1, 2 * horizon / 3 + 1],
            &[vec![0.9, 0.9], vec![0.9, 0.1], vec![0.9, 0.9]],
            bernoulli(),
        )
        .unwrap();
        let params = PrudentParams {
            segments: 3,
            ..PrudentParams::default()
        };
        let mut total = 0.0;
        for seed in 0..50u64 {
            total += prudent::run(&env, &params, seed).unwrap().total_regret;
        }
        let mean = total / 50.0;
        let bound_shape = (horizon as f64).ln() * (2.0 * horizon as f64 * 3.0).sqrt();
        fitted_c = fitted_c.max(mean / bound_shape);
        means.push(mean);
    }
    let ratio = means[1] / means[0];
    assert!((1.2..=3.2).contains(&ratio), "ratio {ratio}");
    assert!(fitted_c <= 30.0, "fitted C {fitted_c}");
    println!(
        "PASS horizon scaling: mean regret {:.2} at T=2000 vs {:.2} at T=8000, ratio {ratio:.3} \
         (want within [1.2, 3.2]), fitted C {fitted_c:.3} (want at most 30)",
        means[0], means[1]
    );
}

#[test]
fn derived_parameters_match_reference_values() {
    let b = params_case_b(2, 1, 3.0, 3, 1024).unwrap();
    assert_eq!(b.segments, 72);
    assert_eq!(b.drift_tolerance, 9.0 / 1024.0);

    let d = params_case_d(3, 0.02, 2, 10_000).unwrap();
    assert_eq!(d.segments, 42);
    assert_eq!(d.drift_tolerance, 0.02);

    let c1 = params_case_c(1, 1.0, 2, 1000).unwrap();
    assert!((c1.drift_tolerance - 0.05757641580227774).abs() <= 1e-9);
    assert_eq!(c1.segments, 36);
    let c2 = params_case_c(2, 0.5, 1, 10_000).unwrap();
    assert!((c2.drift_tolerance - 0.03034854258770293).abs() <= 1e-9);

    let a = params_case_a(5).unwrap();
    assert_eq!((a.segments, a.drift_tolerance), (5, 0.0));

    println!(
        "PASS parameter arithmetic: piecewise-polynomial budget {}, inflexion budget {}, \
         smooth-drift tolerances {:.17} and {:.17} within 1e-9 of reference",
        b.segments, d.segments, c1.drift_tolerance, c2.drift_tolerance
    );
}

#[test]
fn generated_environments_fit_their_partition_budgets() {
    let mut checked = 0usize;

    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let cfg = LocalPolyConfig {
            arms: rng.random_range(2..=3),
            horizon: rng.random_range(500..=1500),
            segments_per_arm: rng.random_range(1..=3),
            max_degree: rng.random_range(0..=3),
            coeff_norm: rng.random_range(0.05..=0.4),
            channel: bernoulli(),
        };
        let env = gen_local_poly(&cfg, &mut rng).unwrap();
        let params = params_case_b(
            cfg.segments_per_arm,
            cfg.max_degree,
            cfg.coeff_norm,
            cfg.arms,
            cfg.horizon,
        )
        .unwrap();
        let report = minimal_significant_partition(&env, params.drift_tolerance).unwrap();
        assert!(
            report.ok && report.interval_count() as u64 <= params.segments,
            "seed {seed}"
        );
        checked += 1;
    }

    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let cfg = HolderConfig {
            arms: rng.random_range(2..=3),
            horizon: rng.random_range(400..=1000),
            segments_per_arm: rng.random_range(1..=3),
            alpha: rng.random_range(0.4..=1.0),
            channel: bernoulli(),
        };
        let env = gen_holder(&cfg, &mut rng).unwrap();
        let params = params_case_c(cfg.segments_per_arm, cfg.alpha, cfg.arms, cfg.horizon).unwrap();
        let report = minimal_significant_partition(&env, params.drift_tolerance).unwrap();
        assert!(
            report.ok && report.interval_count() as u64 <= params.segments,
            "seed {seed}"
        );
        checked += 1;
    }

    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let cfg = InflexionConfig {
            arms: rng.random_range(2..=4),
            horizon: rng.random_range(400..=1600),
            direction_changes: rng.random_range(1..=4),
            drift_tolerance: rng.random_range(0.002..=0.05),
            channel: bernoulli(),
        };
        let env = gen_inflexion(&cfg, &mut rng).unwrap();
        let params = params_case_d(
            cfg.direction_changes,
            cfg.drift_tolerance,
            cfg.arms,
            cfg.horizon,
        )
        .unwrap();
        let report = minimal_significant_partition(&env, params.drift_tolerance).unwrap();
        assert!(
            report.ok && report.interval_count() as u64 <= params.segments,
            "seed {seed}"
        );
        checked += 1;
    }

    println!(
        "PASS partition budgets: {checked}/60 generated environments split into at most \
         their derived interval budget"
    );
}

#[test]
fn post_detection_suffix_replays_identically() {
    let env = switching_from_parts(
        2000,
        &[1, 1001],
        &[vec![0.95, 0.95], vec![0.95, 0.05]],
        bernoulli(),
    )
    .unwrap();
    let params = PrudentParams {
        segments: 2,
        drift_tolerance: 0.0,
        scan: ScanMode::Grid { base: 2.0 },
        quota_value: QuotaValue::LowerBound,
    };
    let mut replayed = 0usize;
    for seed in 0..10u64 {
        let trace = prudent::run(&env, &params, seed).unwrap();
        let Some(det) = trace.detections.first() else {
            continue;
        };
        let episode = trace.episodes.iter().find(|e| e.index == 2).unwrap();
        assert_eq!(episode.start_round, det.round);
        let first_active: Vec<usize> = trace
            .pulls
            .iter()
            .filter(|p| p.round == det.round)
            .map(|p| p.arm)
            .collect();
        let replay = prudent::run_with(
            &env,
            &params,
            seed,
            &ReplayOptions {
                start_time: episode.start_time,
                end_time: None,
                forced_first_active: Some(first_active),
            },
        )
        .unwrap();
        let suffix: Vec<_> = trace
            .pulls
            .iter()
            .filter(|p| p.time >= episode.start_time)
            .map(|p| (p.time, p.arm, p.value, p.gap))
            .collect();
        let replayed_pulls: Vec<_> = replay
            .pulls
            .iter()
            .map(|p| (p.time, p.arm, p.value, p.gap))
            .collect();
        assert_eq!(suffix, replayed_pulls, "seed {seed}");
        let later: Vec<_> = trace
            .detections
            .iter()
            .skip(1)
            .map(|d| (d.time, d.arm))
            .collect();
        let in_replay: Vec<_> = replay.detections.iter().map(|d| (d.time, d.arm)).collect();
        assert_eq!(later, in_replay, "seed {seed}");
        assert_eq!(
            trace.episode_count() - 1,
            replay.episode_count(),
            "seed {seed}"
        );
        replayed += 1;
    }
    assert!(
        replayed >= 5,
        "only {replayed} runs had a detection to replay"
    );
    println!(
        "PASS suffix replay: {replayed}/10 seeds detected a change and replayed the suffix \
         with identical pulls, detections, and episodes"
    );
}

#[test]
fn reports_are_byte_identical_across_executions() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let config = RunConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            environment: EnvSource::Generator {
                seed: 42,
                recipe: GeneratorRecipe::Switching(SwitchingConfig {
                    arms: 2,
                    horizon: 1000,
                    segments: 3,
                    gap_lo: 0.1,
                    gap_hi: 0.5,
                    channel: bernoulli(),
                }),
            },
            policy: PolicyConfig::Prudent(PrudentParams {
                segments: 3,
                ..PrudentParams::default()
            }),
            seeds: (0..12).collect(),
            workers: None,
            csv_max_points: 200,
            bound: Some(BoundOverlay {
                scale: 1.0,
                segments: None,
                drift_tolerance: None,
                scan_constant: None,
            }),
            output: OutputConfig {
                csv: Some(dir.path().join(format!("{tag}.csv"))),
                json: Some(dir.path().join(format!("{tag}.json"))),
                plot: Some(dir.path().join(format!("{tag}.svg"))),
            },
        };
        run_experiment(&config).unwrap()
    };
    let first = run("first");
    let second = run("second");

    assert_eq!(emit_csv(&first), emit_csv(&second));
    assert_eq!(emit_json(&first).unwrap(), emit_json(&second).unwrap());
    assert_eq!(emit_plot(&first), emit_plot(&second));
    let csv_bytes = std::fs::read(dir.path().join("first.csv")).unwrap();
    assert_eq!(
        csv_bytes,
        std::fs::read(dir.path().join("second.csv")).unwrap()
    );
    for ext in ["json", "svg"] {
        assert_eq!(
            std::fs::read(dir.path().join(format!("first.{ext}"))).unwrap(),
            std::fs::read(dir.path().join(format!("second.{ext}"))).unwrap()
        );
    }
    println!(
        "PASS output determinism: two executions wrote byte-identical CSV ({} bytes), JSON, \
         and plot files",
        csv_bytes.len()
    );
}
