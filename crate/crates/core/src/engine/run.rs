use super::{EngineError, ExperimentConfig, ExperimentKind};
use crate::allocation::{allocate, jain_fairness};
use crate::association::{association_probability, wilson_interval, ProbeMode};
use crate::metrics::{format_number, summarize, CsvTable, Z_95};
use crate::noma::{build_matrix, mpa_detect, Codebook, Complex64, MpaConfig};
use crate::seed;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "NOMA_HUDN_OUTPUT";

/// `$NOMA_HUDN_OUTPUT`, or `out` when unset.
pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSeed {
    pub index: usize,
    pub value: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub name: String,
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub trials: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub points: Vec<PointSeed>,
    pub files: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub csv: PathBuf,
    pub extra_files: Vec<PathBuf>,
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Runs `config`, writing `<dir>/<name>.csv` (plus any per-trial file) and
/// `<dir>/manifest.json`.
pub fn run_experiment(config: &ExperimentConfig, dir: &Path) -> Result<RunOutput, EngineError> {
    config.validate()?;
    let started = unix_now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| EngineError::Pool(e.to_string()))?;
    let points: Vec<PointSeed> = config
        .sweep
        .values
        .iter()
        .enumerate()
        .map(|(index, &value)| PointSeed { index, value, seed: seed::derive(config.seed, &[index as u64]) })
        .collect();

    let (tables, notes) = pool.install(|| match config.kind {
        ExperimentKind::AssociationSweep => run_association(config, &points),
        ExperimentKind::AllocationSweep => run_allocation(config, &points),
        ExperimentKind::LinkLevel => run_link(config, &points),
    })?;

    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (suffix, table) in &tables {
        let path = dir.join(format!("{}{suffix}.csv", config.name));
        table.write_to(&path)?;
        written.push(path);
    }
    let manifest = RunManifest {
        name: config.name.clone(),
        kind: config.kind,
        config_hash: config.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        trials: config.trials,
        started_unix: started,
        finished_unix: unix_now(),
        points,
        files: written.iter().filter_map(|p| p.file_name()).map(|f| f.to_string_lossy().into_owned()).collect(),
        notes,
    };
    let manifest_path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    std::fs::write(&manifest_path, json + "\n")?;
    let mut files = written.into_iter();
    let csv = files.next().expect("every kind writes a table");
    Ok(RunOutput { csv, extra_files: files.collect(), manifest_path, manifest })
}

type Tables = (Vec<(&'static str, CsvTable)>, Vec<String>);

fn point_error(config: &ExperimentConfig, p: &PointSeed, e: impl std::fmt::Display) -> EngineError {
    EngineError::Point { index: p.index, variable: config.sweep.variable.clone(), value: p.value, message: e.to_string() }
}

fn run_association(config: &ExperimentConfig, points: &[PointSeed]) -> Result<Tables, EngineError> {
    let probe = config.association.as_ref().map(|a| a.probe).unwrap_or(ProbeMode::Uniform);
    let mut table =
        CsvTable::new(["sweep_value", "tier", "probability", "ci_low", "ci_high", "ci_half_width", "trials", "uncovered"]);
    for p in points {
        let deployment = config.deployment(p.value)?;
        let stats = association_probability(&deployment, probe, config.trials, p.seed).map_err(|e| point_error(config, p, e))?;
        for t in &stats.tiers {
            table.push(vec![
                format_number(p.value),
                t.tier.clone(),
                format_number(t.probability),
                format_number(t.ci_low),
                format_number(t.ci_high),
                format_number(t.ci_half_width),
                stats.trials.to_string(),
                stats.uncovered.to_string(),
            ])?;
        }
    }
    let notes = vec![
        "probability: share of probe drops associated with the tier (max average received power)".into(),
        "ci: Wilson score interval at 95%".into(),
    ];
    Ok((vec![("", table)], notes))
}

/// Per trial, per tau, per access: (sum rate, fairness).
type TrialResult = Vec<Vec<(f64, f64)>>;

fn run_allocation(config: &ExperimentConfig, points: &[PointSeed]) -> Result<Tables, EngineError> {
    let section = config.allocation.as_ref().expect("validated");
    let sca = config.sca_config();
    let mut summary = CsvTable::new([
        "n_small_cells",
        "tau",
        "scheme",
        "sum_rate",
        "sum_rate_ci",
        "fairness",
        "fairness_ci",
        "trials",
        "seed",
    ]);
    let mut per_trial = CsvTable::new(["n_small_cells", "tau", "scheme", "trial", "sum_rate", "fairness", "seed"]);
    for p in points {
        let n = p.value as usize;
        let results: Vec<TrialResult> = (0..config.trials as u64)
            .into_par_iter()
            .map(|trial| -> Result<TrialResult, EngineError> {
                // the same instance for every quota and access scheme
                let instance_seed = seed::derive(p.seed, &[trial]);
                let mut per_tau = Vec::with_capacity(section.taus.len());
                for &tau in &section.taus {
                    let mut rng = seed::rng_for(instance_seed, &[]);
                    let instance = section.scenario.generate(n, tau, &mut rng).map_err(|e| point_error(config, p, e))?;
                    let mut per_access = Vec::with_capacity(section.access.len());
                    for &access in &section.access {
                        let out = allocate(&instance, access, &sca).map_err(|e| point_error(config, p, e))?;
                        let fairness = if n == 0 { 1.0 } else { jain_fairness(&out.power.cell_rates).unwrap_or(0.0) };
                        per_access.push((out.power.sum_rate, fairness));
                    }
                    per_tau.push(per_access);
                }
                Ok(per_tau)
            })
            .collect::<Result<_, _>>()?;
        for (ti, &tau) in section.taus.iter().enumerate() {
            for (ai, &access) in section.access.iter().enumerate() {
                let rates: Vec<f64> = results.iter().map(|r| r[ti][ai].0).collect();
                let fair: Vec<f64> = results.iter().map(|r| r[ti][ai].1).collect();
                let rs = summarize(p.value, &rates)?;
                let fs = summarize(p.value, &fair)?;
                summary.push(vec![
                    n.to_string(),
                    tau.to_string(),
                    access.name().to_string(),
                    format_number(rs.mean),
                    format_number(rs.ci_half_width),
                    format_number(fs.mean),
                    format_number(fs.ci_half_width),
                    rs.trials.to_string(),
                    p.seed.to_string(),
                ])?;
                for (trial, r) in results.iter().enumerate() {
                    per_trial.push(vec![
                        n.to_string(),
                        tau.to_string(),
                        access.name().to_string(),
                        trial.to_string(),
                        format_number(r[ti][ai].0),
                        format_number(r[ti][ai].1),
                        seed::derive(p.seed, &[trial as u64]).to_string(),
                    ])?;
                }
            }
        }
    }
    let notes = vec![
        "sum_rate: bits/s/Hz summed over all small cells, mean over trials".into(),
        "fairness: Jain index over per-small-cell rates; cells left without an RB count as rate 0".into(),
        "OMA: each pair time-shares its RB equally, full power to the active user".into(),
        "all quotas and schemes of a trial share one random instance".into(),
    ];
    Ok((vec![("", summary), ("_trials", per_trial)], notes))
}

fn run_link(config: &ExperimentConfig, points: &[PointSeed]) -> Result<Tables, EngineError> {
    let link = config.link.as_ref().expect("validated");
    let params = config.matrix_params()?;
    let mut rng = seed::rng_for(config.seed, &[u64::MAX]);
    let matrix =
        build_matrix(&params, link.rows, link.cols, &mut rng).map_err(|e| EngineError::Config(format!("link: {e}")))?;
    let codebook = Codebook::default_for(&matrix, link.order).map_err(|e| EngineError::Config(format!("link.order: {e}")))?;
    let mpa = MpaConfig { max_iters: link.mpa_iters, ..MpaConfig::default() };
    let layers = matrix.cols();
    let mut table = CsvTable::new(["snr_db", "ser", "ci_low", "ci_high", "symbol_errors", "symbols", "trials"]);
    for p in points {
        // received SNR per RB: N unit-energy layers spread over K RBs
        let noise_var = layers as f64 / matrix.rows() as f64 * 10f64.powf(-p.value / 10.0);
        let errors: Vec<usize> = (0..config.trials as u64)
            .into_par_iter()
            .map(|trial| -> Result<usize, EngineError> {
                let mut rng = seed::rng_for(p.seed, &[trial]);
                let symbols: Vec<usize> = (0..layers).map(|_| rng.random_range(0..link.order)).collect();
                let sigma = (noise_var / 2.0).sqrt();
                let received: Vec<Complex64> = codebook
                    .transmit(&symbols)
                    .into_iter()
                    .map(|x| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        x + Complex64::new(re, im) * sigma
                    })
                    .collect();
                let det = mpa_detect(&received, &matrix, &codebook, noise_var, &mpa).map_err(|e| point_error(config, p, e))?;
                Ok(det.decisions.iter().zip(&symbols).filter(|(a, b)| a != b).count())
            })
            .collect::<Result<_, _>>()?;
        let total: usize = errors.iter().sum();
        let symbols = config.trials * layers;
        let (lo, hi) = wilson_interval(total, symbols, Z_95);
        table.push(vec![
            format_number(p.value),
            format_number(total as f64 / symbols as f64),
            format_number(lo),
            format_number(hi),
            total.to_string(),
            symbols.to_string(),
            config.trials.to_string(),
        ])?;
    }
    let notes = vec![
        format!("matrix ({}x{}):\n{}", matrix.rows(), matrix.cols(), matrix.to_grid()),
        "snr_db: mean received signal power per RB (N/K for unit-energy layers) over complex noise variance".into(),
    ];
    Ok((vec![("", table)], notes))
}
