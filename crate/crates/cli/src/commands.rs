use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use bhs_core::analysis::{
    discretize, generator_invariance_test, moment_report, mse_report, quadrature_truth_truncated_mvn,
    standard_suite, MomentReport, MseReport, TestFunction, BURN_IN_FRACTION, QUADRATURE_TOL,
};
use bhs_core::kernels::BounceVariant;
use bhs_core::model::{chain_rng, draw_standard_normal_velocity, ConstraintSet, State, Vector};
use bhs_core::samplers::{
    run_gibbs_truncated_mvn, run_qbhs, Problem, SamplerOutput, SamplerRegistry, Skeleton,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, HistogramSpec, SamplerKind};
use crate::output::{self, fmt_f64, write_json, CsvTable};

/// Feasibility tolerance for reported samples.
const FEASIBILITY_TOL: f64 = 1e-8;

/// Initial state; a missing velocity is drawn on a stream separate from the sampler's.
pub fn initial_state(cfg: &ExperimentConfig, seed: u64) -> State {
    let position = Vector::from_column_slice(&cfg.initial.position);
    let velocity = match &cfg.initial.velocity {
        Some(v) => Vector::from_column_slice(v),
        None => {
            let mut rng = chain_rng(seed);
            rng.set_stream(1);
            draw_standard_normal_velocity(cfg.dim(), &mut rng)
        }
    };
    State::new(position, velocity)
}

pub fn problem(cfg: &ExperimentConfig) -> anyhow::Result<Problem> {
    Ok(Problem {
        target: cfg.gaussian()?.into(),
        constraints: cfg.constraint_set()?,
        qbhs: match cfg.sampler {
            SamplerKind::Qbhs => Some(cfg.qbhs_params()?),
            _ => None,
        },
    })
}

fn burned(xs: &[Vector]) -> &[Vector] {
    let skip = (BURN_IN_FRACTION * xs.len() as f64).floor() as usize;
    &xs[skip..]
}

#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub schema: &'static str,
    pub edges: Vec<f64>,
    /// `counts[i][k]`: samples of coordinate `i` in bin `k`.
    pub counts: Vec<Vec<usize>>,
    pub underflow: Vec<usize>,
    pub overflow: Vec<usize>,
}

fn histogram(spec: &HistogramSpec, xs: &[Vector], d: usize) -> Histogram {
    let edges = spec.edges();
    let mut h = Histogram {
        schema: output::HISTOGRAM_SCHEMA,
        counts: vec![vec![0; spec.bins]; d],
        underflow: vec![0; d],
        overflow: vec![0; d],
        edges,
    };
    let width = (spec.hi - spec.lo) / spec.bins as f64;
    for x in xs {
        for i in 0..d {
            if x[i] < spec.lo {
                h.underflow[i] += 1;
            } else if x[i] >= spec.hi {
                h.overflow[i] += 1;
            } else {
                let k = (((x[i] - spec.lo) / width) as usize).min(spec.bins - 1);
                h.counts[i][k] += 1;
            }
        }
    }
    h
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub schema: &'static str,
    pub sampler: &'static str,
    pub seed: u64,
    pub dim: usize,
    pub t_total: f64,
    pub delta: f64,
    /// Samples written to `samples.csv`.
    pub n_samples: usize,
    pub burn_in_fraction: f64,
    pub event_counts: BTreeMap<String, usize>,
    /// Estimates after burn-in.
    pub moments: MomentReport,
    pub feasible: bool,
    pub runtime_seconds: f64,
}

pub fn skeleton_table(sk: &Skeleton) -> CsvTable {
    let d = sk.dim();
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("x_{i}")));
    header.extend((1..=d).map(|i| format!("v_{i}")));
    header.push("event_kind".into());
    let mut table = CsvTable::new(output::SKELETON_SCHEMA, &header);
    for e in &sk.events {
        let mut row = vec![fmt_f64(e.time)];
        row.extend(e.position.iter().map(|x| fmt_f64(*x)));
        row.extend(e.velocity_after.iter().map(|x| fmt_f64(*x)));
        row.push(e.kind.label());
        table.row(row);
    }
    table
}

fn samples_table(times: &[f64], xs: &[Vector], d: usize, time_col: &str) -> CsvTable {
    let mut header = vec![time_col.to_string()];
    header.extend((1..=d).map(|i| format!("x_{i}")));
    let mut table = CsvTable::new(output::SAMPLES_SCHEMA, &header);
    for (t, x) in times.iter().zip(xs) {
        let mut row = vec![fmt_f64(*t)];
        row.extend(x.iter().map(|v| fmt_f64(*v)));
        table.row(row);
    }
    table
}

fn all_feasible(walls: &ConstraintSet, xs: &[Vector]) -> bool {
    walls.is_empty() || xs.iter().all(|x| walls.min_value(x) >= -FEASIBILITY_TOL)
}

/// `run`: one chain, written as skeleton CSV, samples CSV, optional histogram JSON and summary JSON.
pub fn cmd_run(cfg: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<RunSummary> {
    let start = Instant::now();
    let problem = problem(cfg)?;
    let scfg = cfg.sampler_config(cfg.seed)?;
    let state = initial_state(cfg, cfg.seed);
    let registry = SamplerRegistry::with_defaults();
    let sampler = registry.get(cfg.sampler.name())?;
    let d = cfg.dim();
    let output = sampler.run(&problem, &scfg, &state).context("sampler failed")?;
    let (samples, times, census, skeleton) = match output {
        SamplerOutput::Trajectory(sk) => {
            let chain = discretize(&sk, cfg.delta, false)?;
            let census = sk.event_census().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            (chain.positions, chain.times, census, Some(sk))
        }
        SamplerOutput::Draws(draws) => {
            if draws.is_empty() {
                bail!("gibbs run produced no draws; set n_draws");
            }
            let times = (1..=draws.len()).map(|i| i as f64).collect();
            let census = BTreeMap::from([("sweep".to_string(), draws.len())]);
            (draws, times, census, None)
        }
    };
    let kept = burned(&samples);
    let moments = MomentReport::from_samples(if kept.is_empty() { &samples } else { kept })?;
    let feasible = all_feasible(&problem.constraints, &samples);
    // build every artifact before writing any
    let skeleton_csv = skeleton.as_ref().map(skeleton_table);
    let time_col = if skeleton.is_some() { "t" } else { "sweep" };
    let samples_csv = samples_table(&times, &samples, d, time_col);
    let hist = cfg.output.histogram.as_ref().map(|h| histogram(h, kept, d));
    let summary = RunSummary {
        schema: output::SUMMARY_SCHEMA,
        sampler: cfg.sampler.name(),
        seed: cfg.seed,
        dim: d,
        t_total: cfg.t_total,
        delta: cfg.delta,
        n_samples: samples.len(),
        burn_in_fraction: BURN_IN_FRACTION,
        event_counts: census,
        moments,
        feasible,
        runtime_seconds: start.elapsed().as_secs_f64(),
    };
    if let Some(t) = skeleton_csv {
        t.write(&out_dir.join("skeleton.csv"))?;
    }
    samples_csv.write(&out_dir.join("samples.csv"))?;
    if let Some(h) = hist {
        write_json(&out_dir.join("histogram.json"), &h)?;
    }
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub schema: &'static str,
    pub replications: usize,
    pub gibbs_samples: usize,
    pub qbhs_samples: usize,
    pub qbhs_t_total: f64,
    pub truth: MomentReport,
    pub gibbs: MseReport,
    pub qbhs: MseReport,
    pub runtime_seconds: f64,
}

impl BenchmarkReport {
    /// Rows `MSE(mu_i)` then `MSE(var_i)`, as `(label, gibbs, qbhs)`.
    pub fn rows(&self) -> Vec<(String, f64, f64)> {
        let d = self.truth.dim();
        let mut rows = Vec::new();
        for i in 0..d {
            rows.push((format!("MSE(mu{})", i + 1), self.gibbs.means[i], self.qbhs.means[i]));
        }
        for i in 0..d {
            rows.push((format!("MSE(var{})", i + 1), self.gibbs.variances[i], self.qbhs.variances[i]));
        }
        rows
    }
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    Ok(pool.install(f))
}

/// `benchmark`: QBHS against Gibbs under the matched budget, replicated, scored against quadrature.
pub fn cmd_benchmark(cfg: &ExperimentConfig, out_dir: &Path, jobs: usize) -> anyhow::Result<BenchmarkReport> {
    let start = Instant::now();
    let spec = cfg
        .benchmark
        .as_ref()
        .context("config has no [benchmark] section")?;
    if cfg.replications < 2 {
        bail!("benchmark needs replications ≥ 2, got {}", cfg.replications);
    }
    let target = cfg.gaussian()?;
    let walls = cfg.constraint_set()?;
    let params = cfg.qbhs_params()?;
    let truth = quadrature_truth_truncated_mvn(&target, &walls, spec.quadrature_resolution)?;
    let t_qbhs = spec.qbhs_samples as f64 * cfg.delta;
    let one = |r: usize| -> anyhow::Result<(MomentReport, MomentReport)> {
        let seed_q = cfg.seed.wrapping_add(2 * r as u64);
        let seed_g = seed_q.wrapping_add(1);
        let mut scfg = cfg.sampler_config(seed_q)?;
        scfg.t_total = t_qbhs;
        let sk = run_qbhs(&target, &walls, params.p.clone(), params.a, &scfg, &initial_state(cfg, seed_q))?;
        let chain = discretize(&sk, cfg.delta, false)?.burn_in(BURN_IN_FRACTION);
        let q = moment_report(&chain)?;
        let x0 = Vector::from_column_slice(&cfg.initial.position);
        let draws = run_gibbs_truncated_mvn(&target, &walls, spec.gibbs_samples, seed_g, &x0)?;
        let g = MomentReport::from_samples(burned(&draws))?;
        Ok((g, q))
    };
    let results: Vec<_> = in_pool(jobs, || {
        (0..cfg.replications).into_par_iter().map(one).collect::<Vec<_>>()
    })?;
    let (mut gibbs, mut qbhs) = (Vec::new(), Vec::new());
    for r in results {
        let (g, q) = r?;
        gibbs.push(g);
        qbhs.push(q);
    }
    let report = BenchmarkReport {
        schema: output::BENCHMARK_SCHEMA,
        replications: cfg.replications,
        gibbs_samples: spec.gibbs_samples,
        qbhs_samples: spec.qbhs_samples,
        qbhs_t_total: t_qbhs,
        gibbs: mse_report(&gibbs, &truth)?,
        qbhs: mse_report(&qbhs, &truth)?,
        truth,
        runtime_seconds: start.elapsed().as_secs_f64(),
    };
    let mut table = CsvTable::new(output::MSE_SCHEMA, &["quantity".into(), "gibbs".into(), "qbhs".into()]);
    for (label, g, q) in report.rows() {
        table.row([label, fmt_f64(g), fmt_f64(q)]);
    }
    table.write(&out_dir.join("mse.csv"))?;
    write_json(&out_dir.join("benchmark.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ZScore {
    pub function: String,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GentestReport {
    pub schema: &'static str,
    pub sampler: &'static str,
    pub seed: u64,
    pub t_total: f64,
    pub corrupted_kernel: bool,
    pub threshold: f64,
    pub results: Vec<ZScore>,
    pub max_abs_z: f64,
    pub pass: bool,
}

/// `gentest`: batch-means z-scores of the generator applied to polynomial test functions.
/// `corrupt` swaps in a bounce kernel that leaves the velocity unchanged.
pub fn cmd_gentest(cfg: &ExperimentConfig, out_dir: &Path, corrupt: bool) -> anyhow::Result<GentestReport> {
    if cfg.sampler == SamplerKind::Gibbs {
        bail!("the generator test needs a continuous-time sampler, not gibbs");
    }
    let problem = problem(cfg)?;
    if !problem.constraints.is_empty() {
        bail!("the generator test covers unconstrained runs only");
    }
    let d = cfg.dim();
    let spec = cfg.gentest.clone().unwrap_or(crate::config::GentestSpec {
        functions: None,
        threshold: 5.0,
    });
    let fns = match &spec.functions {
        None => standard_suite(d),
        Some(list) if list.is_empty() => bail!("empty test-function list"),
        Some(list) => list
            .iter()
            .map(|e| TestFunction::parse(d, e))
            .collect::<Result<Vec<_>, _>>()?,
    };
    let mut scfg = cfg.sampler_config(cfg.seed)?;
    if corrupt {
        scfg.bounce_kernel.variant = BounceVariant::Unflipped;
    }
    let registry = SamplerRegistry::with_defaults();
    let out = registry
        .get(cfg.sampler.name())?
        .run(&problem, &scfg, &initial_state(cfg, cfg.seed))?;
    let SamplerOutput::Trajectory(sk) = out else {
        bail!("sampler returned draws, not a trajectory");
    };
    let z = generator_invariance_test(&sk, &problem.target, &fns)?;
    let max_abs_z = z.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let report = GentestReport {
        schema: output::GENTEST_SCHEMA,
        sampler: cfg.sampler.name(),
        seed: cfg.seed,
        t_total: cfg.t_total,
        corrupted_kernel: corrupt,
        threshold: spec.threshold,
        results: fns
            .iter()
            .zip(&z)
            .map(|(f, z)| ZScore {
                function: f.label.clone(),
                z: *z,
            })
            .collect(),
        max_abs_z,
        pass: max_abs_z <= spec.threshold,
    };
    write_json(&out_dir.join("gentest.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct TruthReport {
    pub schema: &'static str,
    pub resolution: usize,
    pub tolerance: f64,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// `truth`: the quadrature oracle on the configured target and constraints.
pub fn cmd_truth(cfg: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<TruthReport> {
    let resolution = cfg.benchmark.as_ref().map_or(8, |b| b.quadrature_resolution);
    let m = quadrature_truth_truncated_mvn(&cfg.gaussian()?, &cfg.constraint_set()?, resolution)?;
    let report = TruthReport {
        schema: output::TRUTH_SCHEMA,
        resolution,
        tolerance: QUADRATURE_TOL,
        means: m.means,
        variances: m.variances,
    };
    write_json(&out_dir.join("truth.json"), &report)?;
    Ok(report)
}
