//! Batch experiment runner.
//!
//! A [`RunConfig`] names an environment (inline or generated), a
//! policy, and a seed list. [`run_experiment`] materializes the
//! environment once, plays every seed on its own noise stream in
//! parallel, and assembles a [`RunReport`] with per-seed regret
//! trajectories and pooled statistics. Reports can be emitted as CSV,
//! JSON, or a self-contained SVG plot; every emitter is a pure function
//! of the report, so identical configs produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::generate::{
    gen_holder, gen_inflexion, gen_local_poly, gen_switching, HolderConfig, InflexionConfig,
    LocalPolyConfig, SwitchingConfig,
};
use crate::env::model::{EnvironmentSpec, ObservationMode};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::params::{regret_bound_prudent, regret_bound_selective};
use crate::prudent::{self, PrudentParams};
use crate::rng::NoiseStream;
use crate::selective::{self, SelectiveParams};
use crate::trace::{EpisodeSpan, PullRecord, RunTrace};

/// Version stamp required in every config file.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Where the environment comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum EnvSource {
    /// A complete spec embedded in the config.
    Inline { spec: EnvironmentSpec },
    /// A generator family invoked with its own seed.
    Generator { seed: u64, recipe: GeneratorRecipe },
}

/// Generator family plus inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GeneratorRecipe {
    Switching(SwitchingConfig),
    LocalPoly(LocalPolyConfig),
    Holder(HolderConfig),
    Inflexion(InflexionConfig),
}

impl EnvSource {
    /// Produces the concrete environment. Generator sources are
    /// deterministic in their seed.
    pub fn materialize(&self) -> Result<EnvironmentSpec> {
        match self {
            EnvSource::Inline { spec } => {
                spec.validate()?;
                Ok(spec.clone())
            }
            EnvSource::Generator { seed, recipe } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                match recipe {
                    GeneratorRecipe::Switching(cfg) => gen_switching(cfg, &mut rng),
                    GeneratorRecipe::LocalPoly(cfg) => gen_local_poly(cfg, &mut rng),
                    GeneratorRecipe::Holder(cfg) => gen_holder(cfg, &mut rng),
                    GeneratorRecipe::Inflexion(cfg) => gen_inflexion(cfg, &mut rng),
                }
            }
        }
    }
}

/// Which policy plays the environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum PolicyConfig {
    Prudent(PrudentParams),
    Selective(SelectiveParams),
    /// Plays the best arm at every step; zero regret by construction.
    Oracle,
    /// Round-robin over all arms, ignoring observations.
    Uniform,
}

impl PolicyConfig {
    pub fn label(&self) -> &'static str {
        match self {
            PolicyConfig::Prudent(_) => "prudent",
            PolicyConfig::Selective(_) => "selective",
            PolicyConfig::Oracle => "oracle",
            PolicyConfig::Uniform => "uniform",
        }
    }
}

/// Optional reference curve drawn over the regret trajectories.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundOverlay {
    /// Multiplier C on the curve.
    pub scale: f64,
    /// Segment budget M; defaults to the policy's own for the
    /// quota policy and is required for the elimination policy.
    #[serde(default)]
    pub segments: Option<u64>,
    /// Drift tolerance B*; defaults to the policy's own.
    #[serde(default)]
    pub drift_tolerance: Option<f64>,
    /// Constant c of the elimination curve; 16 when omitted.
    #[serde(default)]
    pub scan_constant: Option<f64>,
}

/// Output file destinations; each is written only when set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub json: Option<PathBuf>,
    #[serde(default)]
    pub plot: Option<PathBuf>,
}

fn default_csv_max_points() -> usize {
    1000
}

/// One experiment: an environment, a policy, and a seed batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema_version: u32,
    pub environment: EnvSource,
    pub policy: PolicyConfig,
    pub seeds: Vec<u64>,
    /// Worker threads for the seed batch; library default when omitted.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Trajectory points kept per seed in reports.
    #[serde(default = "default_csv_max_points")]
    pub csv_max_points: usize,
    #[serde(default)]
    pub bound: Option<BoundOverlay>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "config schema version {} unsupported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seed list must be nonempty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::invalid("seed list contains duplicates"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("worker count must be at least 1"));
        }
        if self.csv_max_points < 2 {
            return Err(Error::invalid(
                "csv_max_points must be at least 2 to keep both endpoints",
            ));
        }
        if let Some(b) = &self.bound {
            if !(b.scale.is_finite() && b.scale > 0.0) {
                return Err(Error::invalid(format!(
                    "bound scale must be positive, got {}",
                    b.scale
                )));
            }
            if matches!(self.policy, PolicyConfig::Oracle | PolicyConfig::Uniform) {
                return Err(Error::invalid(
                    "bound overlays apply only to the prudent and selective policies",
                ));
            }
        }
        match &self.policy {
            PolicyConfig::Prudent(p) => p.validate()?,
            PolicyConfig::Selective(p) => p.validate()?,
            _ => {}
        }
        Ok(())
    }
}

/// One seed's downsampled trajectory and event times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSeries {
    pub seed: u64,
    /// (t, cumulative regret) samples; first and last steps always kept.
    pub points: Vec<(u64, f64)>,
    /// Detection times, ascending.
    pub detections: Vec<u64>,
    /// Start times of episodes after the first, ascending.
    pub episode_starts: Vec<u64>,
    pub episode_count: usize,
    pub forced_progress_rounds: u64,
    pub total_regret: f64,
}

/// Pooled statistics over a seed batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub mean_final: f64,
    pub median_final: f64,
    pub q1_final: f64,
    pub q3_final: f64,
    pub min_final: f64,
    pub max_final: f64,
    /// Detections not preceded by a fresh true change.
    pub false_alarms: u64,
    /// Detections matched to a true change.
    pub matched_detections: u64,
    /// Mean of (detection time - matched change time).
    pub mean_detection_delay: Option<f64>,
}

/// Reference curve sampled on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub label: String,
    pub points: Vec<(u64, f64)>,
}

/// Everything an experiment produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub policy: String,
    pub arms: usize,
    pub horizon: u64,
    pub env_hash: u64,
    /// Ground-truth change steps (> 1) when the environment knows them.
    pub true_change_points: Vec<u64>,
    pub series: Vec<SeedSeries>,
    pub aggregates: Aggregates,
    pub bound: Option<BoundCurve>,
}

/// Plays the best arm every step.
fn run_oracle(env: &EnvironmentSpec, seed: u64) -> Result<RunTrace> {
    baseline(env, seed, "oracle", |t, _| {
        let mut best = 0usize;
        let mut best_mean = f64::NEG_INFINITY;
        for k in 0..env.arms {
            let m = env.mean_raw(k, t);
            if m > best_mean {
                best_mean = m;
                best = k;
            }
        }
        best
    })
}

/// Cycles through the arms in index order.
fn run_uniform(env: &EnvironmentSpec, seed: u64) -> Result<RunTrace> {
    baseline(env, seed, "uniform", |t, arms| {
        ((t - 1) % arms as u64) as usize
    })
}

fn baseline(
    env: &EnvironmentSpec,
    seed: u64,
    name: &str,
    pick: impl Fn(u64, usize) -> usize,
) -> Result<RunTrace> {
    env.validate()?;
    let noise = NoiseStream::new(seed);
    let mut regret = CompensatedSum::new();
    let mut pulls = Vec::with_capacity(env.horizon as usize);
    for t in 1..=env.horizon {
        let arm = pick(t, env.arms);
        let gap = env.gap_raw(arm, t);
        regret.add(gap);
        pulls.push(PullRecord {
            time: t,
            round: t as usize,
            arm,
            value: env.sample_raw(arm, t, &noise),
            gap,
        });
    }
    Ok(RunTrace {
        policy: name.into(),
        seed,
        arms: env.arms,
        horizon: env.horizon,
        env_hash: env.content_hash(),
        params: serde_json::json!({}),
        start_time: 1,
        end_time: env.horizon,
        rounds: env.horizon as usize,
        forced_progress_rounds: 0,
        total_regret: regret.value(),
        episodes: vec![EpisodeSpan {
            index: 1,
            start_round: 1,
            start_time: 1,
        }],
        detections: Vec::new(),
        pulls,
    })
}

/// Evenly spaced sample of a trajectory, keeping both endpoints.
fn sample_points(cum: &[(u64, f64)], max_points: usize) -> Vec<(u64, f64)> {
    if cum.len() <= max_points {
        return cum.to_vec();
    }
    let last = cum.len() - 1;
    let mut out = Vec::with_capacity(max_points);
    let mut prev = usize::MAX;
    for j in 0..max_points {
        let idx = j * last / (max_points - 1);
        if idx != prev {
            out.push(cum[idx]);
            prev = idx;
        }
    }
    out
}

fn build_series(trace: &RunTrace, max_points: usize) -> SeedSeries {
    let cum = trace.cumulative_regret();
    SeedSeries {
        seed: trace.seed,
        points: sample_points(&cum, max_points),
        detections: trace.detections.iter().map(|d| d.time).collect(),
        episode_starts: trace.episodes[1..].iter().map(|e| e.start_time).collect(),
        episode_count: trace.episode_count(),
        forced_progress_rounds: trace.forced_progress_rounds,
        total_regret: trace.total_regret,
    }
}

/// Greedy left-to-right matching: a detection is genuine when a true
/// change lies after the previous detection and at or before it;
/// otherwise it is a false alarm. Returns (delays, false alarms).
fn match_detections(detections: &[u64], changes: &[u64]) -> (Vec<u64>, u64) {
    let mut delays = Vec::new();
    let mut false_alarms = 0u64;
    let mut prev = 0u64;
    for &d in detections {
        match changes.iter().copied().rfind(|&c| c > prev && c <= d) {
            Some(c) => delays.push(d - c),
            None => false_alarms += 1,
        }
        prev = d;
    }
    (delays, false_alarms)
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pools a seed batch into summary statistics.
pub fn aggregate(series: &[SeedSeries], true_changes: &[u64]) -> Result<Aggregates> {
    if series.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty seed batch"));
    }
    let mut finals: Vec<f64> = series.iter().map(|s| s.total_regret).collect();
    finals.sort_unstable_by(f64::total_cmp);
    let mut delays = Vec::new();
    let mut false_alarms = 0u64;
    for s in series {
        let (d, f) = match_detections(&s.detections, true_changes);
        delays.extend(d);
        false_alarms += f;
    }
    let mean_delay = if delays.is_empty() {
        None
    } else {
        Some(delays.iter().sum::<u64>() as f64 / delays.len() as f64)
    };
    Ok(Aggregates {
        mean_final: finals.iter().sum::<f64>() / finals.len() as f64,
        median_final: quantile(&finals, 0.5),
        q1_final: quantile(&finals, 0.25),
        q3_final: quantile(&finals, 0.75),
        min_final: finals[0],
        max_final: *finals.last().unwrap(),
        false_alarms,
        matched_detections: delays.len() as u64,
        mean_detection_delay: mean_delay,
    })
}

fn bound_curve(
    config: &RunConfig,
    env: &EnvironmentSpec,
    overlay: &BoundOverlay,
) -> Result<BoundCurve> {
    let grid: Vec<u64> = {
        let n = 200.min(env.horizon as usize);
        let mut ts: Vec<u64> = (1..=n)
            .map(|i| (i as u64 * env.horizon) / n as u64)
            .collect();
        ts.dedup();
        if ts.first() != Some(&1) {
            ts.insert(0, 1);
        }
        ts
    };
    match &config.policy {
        PolicyConfig::Prudent(p) => {
            let m = overlay.segments.unwrap_or(p.segments);
            let b = overlay.drift_tolerance.unwrap_or(p.drift_tolerance);
            let points = grid
                .iter()
                .map(|&t| (t, regret_bound_prudent(m, b, env.arms, t, overlay.scale)))
                .collect();
            Ok(BoundCurve {
                label: format!("C ln(t) sqrt(Ktm) + C t B*, C = {}", overlay.scale),
                points,
            })
        }
        PolicyConfig::Selective(p) => {
            let m = overlay.segments.ok_or_else(|| {
                Error::invalid("elimination bound overlay needs an explicit segment budget")
            })?;
            let b = overlay.drift_tolerance.unwrap_or(p.drift_tolerance);
            let c = overlay.scan_constant.unwrap_or(16.0);
            let points: Result<Vec<_>> = grid
                .iter()
                .map(|&t| {
                    regret_bound_selective(m, b, env.arms, t, c).map(|v| (t, overlay.scale * v))
                })
                .collect();
            Ok(BoundCurve {
                label: format!("elimination bound, c = {c}, scaled by {}", overlay.scale),
                points: points?,
            })
        }
        _ => unreachable!("validate rejects bounds on baseline policies"),
    }
}

/// Runs every seed and assembles the report; writes any configured
/// output files atomically.
pub fn run_experiment(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let env = config.environment.materialize()?;
    match (&config.policy, env.mode) {
        (PolicyConfig::Selective(_), ObservationMode::Mean) => {
            return Err(Error::ModeMismatch(
                "the selective policy needs a gap-mode environment".into(),
            ));
        }
        (PolicyConfig::Prudent(_), ObservationMode::Gap) => {
            return Err(Error::ModeMismatch(
                "the prudent policy needs a mean-mode environment".into(),
            ));
        }
        _ => {}
    }

    let run_one = |&seed: &u64| -> Result<RunTrace> {
        let res = match &config.policy {
            PolicyConfig::Prudent(p) => prudent::run(&env, p, seed),
            PolicyConfig::Selective(p) => selective::run(&env, p, seed),
            PolicyConfig::Oracle => run_oracle(&env, seed),
            PolicyConfig::Uniform => run_uniform(&env, seed),
        };
        res.map_err(|e| Error::invalid(format!("seed {seed} failed: {e}")))
    };
    let results: Vec<Result<RunTrace>> = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("worker pool: {e}")))?
            .install(|| config.seeds.par_iter().map(run_one).collect()),
        None => config.seeds.par_iter().map(run_one).collect(),
    };
    let mut traces = results.into_iter().collect::<Result<Vec<_>>>()?;
    traces.sort_by_key(|t| t.seed);

    let true_change_points: Vec<u64> = env
        .meta
        .as_ref()
        .map(|m| m.change_points.iter().copied().filter(|&c| c > 1).collect())
        .unwrap_or_default();
    let series: Vec<SeedSeries> = traces
        .iter()
        .map(|t| build_series(t, config.csv_max_points))
        .collect();
    let aggregates = aggregate(&series, &true_change_points)?;
    let bound = match &config.bound {
        Some(overlay) => Some(bound_curve(config, &env, overlay)?),
        None => None,
    };
    let report = RunReport {
        schema_version: CONFIG_SCHEMA_VERSION,
        policy: config.policy.label().into(),
        arms: env.arms,
        horizon: env.horizon,
        env_hash: env.content_hash(),
        true_change_points,
        series,
        aggregates,
        bound,
    };

    if let Some(path) = &config.output.csv {
        write_atomic(path, &emit_csv(&report))?;
    }
    if let Some(path) = &config.output.json {
        write_atomic(path, &emit_json(&report)?)?;
    }
    if let Some(path) = &config.output.plot {
        write_atomic(path, &emit_plot(&report))?;
    }
    Ok(report)
}

/// Renders the per-seed trajectories as CSV.
pub fn emit_csv(report: &RunReport) -> String {
    let mut out = String::from("seed,t,cum_regret,episode,detections\n");
    for s in &report.series {
        for &(t, cum) in &s.points {
            let episode = 1 + s.episode_starts.partition_point(|&e| e <= t);
            let det = s.detections.partition_point(|&d| d <= t);
            out.push_str(&format!("{},{t},{cum},{episode},{det}\n", s.seed));
        }
    }
    out
}

/// Renders the full report as pretty JSON.
pub fn emit_json(report: &RunReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Writes through a temp file and renames so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let file_err = |source: std::io::Error| Error::File {
        path: path.to_path_buf(),
        source,
    };
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .ok_or_else(|| file_err(std::io::Error::other("path has no file name")))?;
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    fs::write(&tmp, content).map_err(file_err)?;
    fs::rename(&tmp, path).map_err(file_err)
}

// ---- SVG plot ----

const PLOT_W: f64 = 960.0;
const PLOT_H: f64 = 600.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 46.0;
const MARGIN_B: f64 = 54.0;

fn nice_ceil(v: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    (v / mag).ceil() * mag
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v >= 100.0 {
        format!("{v:.0}")
    } else if v >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

/// Renders regret-versus-time as a self-contained SVG: one translucent
/// line per seed, the mean trajectory when all seeds share a grid,
/// the bound overlay, and dotted verticals at true change points.
pub fn emit_plot(report: &RunReport) -> String {
    let x0 = report
        .series
        .iter()
        .flat_map(|s| s.points.first())
        .map(|p| p.0)
        .min()
        .unwrap_or(1);
    let x1 = report.horizon.max(x0 + 1);
    let mut ymax = report
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(0.0, f64::max);
    if let Some(b) = &report.bound {
        ymax = b.points.iter().map(|p| p.1).fold(ymax, f64::max);
    }
    let ymax = nice_ceil(ymax);
    let sx =
        |t: u64| MARGIN_L + (t - x0) as f64 / (x1 - x0) as f64 * (PLOT_W - MARGIN_L - MARGIN_R);
    let sy = |v: f64| PLOT_H - MARGIN_B - v / ymax * (PLOT_H - MARGIN_T - MARGIN_B);
    let poly = |pts: &[(u64, f64)]| {
        pts.iter()
            .map(|&(t, v)| format!("{:.2},{:.2}", sx(t), sy(v)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {PLOT_W} {PLOT_H}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n\
         <rect width=\"{PLOT_W}\" height=\"{PLOT_H}\" fill=\"white\"/>\n\
         <text x=\"{MARGIN_L}\" y=\"26\" font-size=\"16\">{} on K={}, T={} ({} seeds)</text>\n",
        report.policy,
        report.arms,
        report.horizon,
        report.series.len()
    ));

    for i in 0..=5u32 {
        let v = ymax * i as f64 / 5.0;
        let y = sy(v);
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
             stroke=\"#dddddd\"/>\n<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            PLOT_W - MARGIN_R,
            MARGIN_L - 8.0,
            y + 4.0,
            fmt_tick(v)
        ));
    }
    for i in 0..=5u32 {
        let t = x0 + (x1 - x0) * u64::from(i) / 5;
        let x = sx(t);
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>\n\
             <text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{t}</text>\n",
            MARGIN_T,
            PLOT_H - MARGIN_B,
            PLOT_H - MARGIN_B + 18.0,
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">t</text>\n\
         <text x=\"18\" y=\"{:.2}\" transform=\"rotate(-90 18 {:.2})\" \
         text-anchor=\"middle\">cumulative regret</text>\n",
        (MARGIN_L + PLOT_W - MARGIN_R) / 2.0,
        PLOT_H - 14.0,
        (MARGIN_T + PLOT_H - MARGIN_B) / 2.0,
        (MARGIN_T + PLOT_H - MARGIN_B) / 2.0,
    ));

    for &c in &report.true_change_points {
        let x = sx(c.clamp(x0, x1));
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{MARGIN_T}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
             stroke=\"#bb7722\" stroke-dasharray=\"2 4\"/>\n",
            PLOT_H - MARGIN_B
        ));
    }
    for s in &report.series {
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#7788cc\" \
             stroke-opacity=\"0.45\"/>\n",
            poly(&s.points)
        ));
    }
    let grids_match = report.series.windows(2).all(|w| {
        w[0].points.len() == w[1].points.len()
            && w[0]
                .points
                .iter()
                .zip(&w[1].points)
                .all(|(a, b)| a.0 == b.0)
    });
    if grids_match && !report.series.is_empty() {
        let n = report.series.len() as f64;
        let mean: Vec<(u64, f64)> = (0..report.series[0].points.len())
            .map(|i| {
                let t = report.series[0].points[i].0;
                let v = report.series.iter().map(|s| s.points[i].1).sum::<f64>() / n;
                (t, v)
            })
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#222233\" stroke-width=\"2\"/>\n\
             <text x=\"{:.2}\" y=\"{MARGIN_T}\" fill=\"#222233\">mean</text>\n",
            poly(&mean),
            MARGIN_L + 8.0
        ));
    }
    if let Some(b) = &report.bound {
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#cc3333\" \
             stroke-dasharray=\"6 4\"/>\n<text x=\"{:.2}\" y=\"{MARGIN_T}\" \
             fill=\"#cc3333\">{}</text>\n",
            poly(&b.points),
            MARGIN_L + 80.0,
            b.label
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
