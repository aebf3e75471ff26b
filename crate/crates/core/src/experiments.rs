//! Monte Carlo experiment runners: dataset generation, the delay-estimation
//! and NMSE sweeps, metrics, and CSV / JSON output.
//!
//! Every trial is a pure function of `(config, master_seed + trial)`, so rows
//! are reproducible bit for bit regardless of thread count.

use std::io::{BufRead, Write};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::hierarchical_search::HSearchConfig;
use crate::linalg;
use crate::opcount::{predicted_selection_mults, OpCounter, Resolution, SelectionMethod};
use crate::recovery::{
    pursue, AtomSelector, HierarchicalSelector, KroneckerDictionary, MultiDimHierarchicalSelector,
    MultiDimSelector, StoppingRule,
};
use crate::signal_model::{
    add_noise, complex_gaussian, seeded_rng, synth_channel, GridSpec, ObservationGrid, Path,
    PathSet, TargetDomain, PARAM_STREAM,
};
use crate::C64;

pub const DEFAULT_SUBCARRIER_SPACING_HZ: f64 = 1.44e6;
pub const DEFAULT_BUDGET: u128 = 1_000_000_000_000;
pub const CSV_HEADER: [&str; 9] = [
    "method",
    "scenario",
    "n",
    "S_or_A",
    "sel_mults",
    "total_mults",
    "metric",
    "trials",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Single-path delay estimation, MAE in seconds.
    Delay1d,
    /// Multipath channel estimation over subcarriers, NMSE.
    Nmse1d,
    /// Multipath channel estimation over subcarriers × two antenna arrays.
    Nmse3d,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Delay1d => "delay1d",
            Scenario::Nmse1d => "nmse1d",
            Scenario::Nmse3d => "nmse3d",
        }
    }

    fn is_one_dimensional(self) -> bool {
        !matches!(self, Scenario::Nmse3d)
    }
}

/// One point of a sweep. `omp` is exhaustive over the full (Kronecker)
/// dictionary; `homp` is 1-D only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum SweepPoint {
    Omp { atoms: Vec<usize> },
    Homp { branching: usize, steps: Vec<usize> },
    Momp { atoms: Vec<usize> },
    Mhomp { branching: usize, steps: Vec<usize> },
}

impl SweepPoint {
    pub fn name(&self) -> &'static str {
        match self {
            SweepPoint::Omp { .. } => "omp",
            SweepPoint::Homp { .. } => "homp",
            SweepPoint::Momp { .. } => "momp",
            SweepPoint::Mhomp { .. } => "mhomp",
        }
    }

    pub fn selection_method(&self, dims: usize) -> SelectionMethod {
        match self {
            SweepPoint::Omp { .. } if dims == 1 => SelectionMethod::Classical1d,
            SweepPoint::Omp { .. } => SelectionMethod::Classical3d,
            SweepPoint::Homp { .. } => SelectionMethod::Hierarchical1d,
            SweepPoint::Momp { .. } => SelectionMethod::MultiDimClassical,
            SweepPoint::Mhomp { .. } => SelectionMethod::MultiDimHierarchical,
        }
    }

    pub fn resolution(&self) -> Resolution {
        match self {
            SweepPoint::Omp { atoms } | SweepPoint::Momp { atoms } => {
                Resolution::Atoms(atoms.clone())
            }
            SweepPoint::Homp { branching, steps } | SweepPoint::Mhomp { branching, steps } => {
                Resolution::Hierarchical {
                    branching: *branching,
                    steps: steps.clone(),
                }
            }
        }
    }

    fn branching(&self) -> Option<usize> {
        match self {
            SweepPoint::Homp { branching, .. } | SweepPoint::Mhomp { branching, .. } => {
                Some(*branching)
            }
            _ => None,
        }
    }

    /// `A` or `S` per dimension, joined with `x`.
    fn label(&self) -> String {
        let v = match self {
            SweepPoint::Omp { atoms } | SweepPoint::Momp { atoms } => atoms,
            SweepPoint::Homp { steps, .. } | SweepPoint::Mhomp { steps, .. } => steps,
        };
        v.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
    }

    fn validate(&self, dims: usize) -> Result<()> {
        let (entries, kind) = match self {
            SweepPoint::Omp { atoms } | SweepPoint::Momp { atoms } => (atoms, "atom count"),
            SweepPoint::Homp { steps, .. } | SweepPoint::Mhomp { steps, .. } => {
                (steps, "step count")
            }
        };
        if entries.len() != dims {
            return Err(Error::InvalidConfig(format!(
                "{} point has {} {kind} entries for {dims} dimensions",
                self.name(),
                entries.len()
            )));
        }
        if entries.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "{} point has a zero {kind}",
                self.name()
            )));
        }
        if matches!(self, SweepPoint::Homp { .. }) && dims != 1 {
            return Err(Error::InvalidConfig(
                "homp applies to one dimension; use mhomp".into(),
            ));
        }
        if let Some(n) = self.branching() {
            for &s in entries {
                HSearchConfig::new(n, s)?;
            }
        }
        Ok(())
    }
}

fn default_spacing() -> f64 {
    DEFAULT_SUBCARRIER_SPACING_HZ
}

fn default_snr() -> f64 {
    10.0
}

fn default_budget() -> u128 {
    DEFAULT_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Grid sizes in Kronecker order: subcarriers first, then antennas.
    pub dims: Vec<usize>,
    #[serde(default = "default_spacing")]
    pub subcarrier_spacing_hz: f64,
    /// Target domain per dimension; grid defaults when absent.
    #[serde(default)]
    pub domains: Option<Vec<(f64, f64)>>,
    /// Path count `K`, also the number of greedy iterations.
    pub paths: usize,
    pub trials: usize,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default)]
    pub noiseless: bool,
    /// Draw each trial's SNR uniformly in `[snr_db − 5, snr_db + 5]`.
    #[serde(default)]
    pub varying_snr: bool,
    /// Draw parameters on the bin centers of this many bins per dimension.
    #[serde(default)]
    pub on_grid: Option<Vec<u64>>,
    pub sweep: Vec<SweepPoint>,
    pub master_seed: u64,
    /// Ceiling on predicted selection multiplications per iteration.
    #[serde(default = "default_budget")]
    pub budget: u128,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("cannot parse config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.sweep.is_empty() {
            return bad("sweep is empty".into());
        }
        if self.paths == 0 {
            return bad("at least one path is required".into());
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return bad(format!("dims must be positive, got {:?}", self.dims));
        }
        let want_dims = if self.scenario.is_one_dimensional() {
            1
        } else {
            3
        };
        if self.dims.len() != want_dims {
            return bad(format!(
                "{} needs {want_dims} dimension(s), got {}",
                self.scenario.name(),
                self.dims.len()
            ));
        }
        if self.scenario == Scenario::Delay1d && self.paths != 1 {
            return bad("delay estimation is single-path".into());
        }
        if !(self.subcarrier_spacing_hz > 0.0 && self.subcarrier_spacing_hz.is_finite()) {
            return bad("subcarrier spacing must be positive".into());
        }
        if !self.noiseless && !self.snr_db.is_finite() {
            return bad("snr_db must be finite; set noiseless instead".into());
        }
        if let Some(d) = &self.domains {
            if d.len() != self.dims.len() {
                return bad(format!(
                    "{} domains for {} dimensions",
                    d.len(),
                    self.dims.len()
                ));
            }
        }
        if let Some(bins) = &self.on_grid {
            if bins.len() != self.dims.len() || bins.contains(&0) {
                return bad(format!(
                    "on_grid needs one positive bin count per dimension, got {bins:?}"
                ));
            }
        }
        for p in &self.sweep {
            p.validate(self.dims.len())?;
        }
        self.grids()?;
        self.target_domains()?;
        Ok(())
    }

    pub fn grids(&self) -> Result<Vec<ObservationGrid>> {
        self.dims
            .iter()
            .enumerate()
            .map(|(d, &n)| {
                if d == 0 {
                    ObservationGrid::frequency(n, self.subcarrier_spacing_hz)
                } else {
                    ObservationGrid::space(n)
                }
            })
            .collect()
    }

    pub fn target_domains(&self) -> Result<Vec<TargetDomain>> {
        match &self.domains {
            Some(d) => d
                .iter()
                .map(|&(lo, hi)| TargetDomain::new(lo, hi))
                .collect(),
            None => Ok(self
                .grids()?
                .iter()
                .map(ObservationGrid::default_domain)
                .collect()),
        }
    }
}

/// One generated channel realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub grids: Vec<GridSpec>,
    pub paths: PathSet,
    /// `None` for noiseless observations.
    pub snr_db: Option<f64>,
}

impl TrialRecord {
    pub fn channel(&self) -> Result<Vec<C64>> {
        let grids = self
            .grids
            .iter()
            .map(|s| ObservationGrid::from_spec(*s))
            .collect::<Result<Vec<_>>>()?;
        synth_channel(&grids, &self.paths)
    }

    /// Observation of `h` at this record's SNR, noise seeded by `seed`.
    pub fn observe(&self, h: &[C64]) -> Result<Vec<C64>> {
        let snr = self.snr_db.unwrap_or(f64::INFINITY);
        Ok(add_noise(h, snr, self.seed)?.y)
    }
}

fn draw_trial(
    cfg: &ExperimentConfig,
    specs: &[GridSpec],
    domains: &[TargetDomain],
    trial: usize,
) -> Result<TrialRecord> {
    let seed = cfg.master_seed.wrapping_add(trial as u64);
    let mut rng = seeded_rng(seed, PARAM_STREAM);
    let mut paths = Vec::with_capacity(cfg.paths);
    for _ in 0..cfg.paths {
        let params = domains
            .iter()
            .enumerate()
            .map(|(d, dom)| match &cfg.on_grid {
                Some(bins) => dom.bin_center(rng.random_range(0..bins[d]), bins[d]),
                None => dom.u_min() + dom.width() * rng.random::<f64>(),
            })
            .collect();
        let gain = complex_gaussian(&mut rng, 1.0);
        paths.push(Path { gain, params });
    }
    let snr_db = if cfg.noiseless {
        None
    } else if cfg.varying_snr {
        Some(cfg.snr_db - 5.0 + 10.0 * rng.random::<f64>())
    } else {
        Some(cfg.snr_db)
    };
    Ok(TrialRecord {
        trial,
        seed,
        grids: specs.to_vec(),
        paths: PathSet::new(paths)?,
        snr_db,
    })
}

/// `B` channel realizations; trial `i` uses seed `master_seed + i`.
pub fn gen_dataset(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let specs: Vec<GridSpec> = cfg.grids()?.iter().map(ObservationGrid::spec).collect();
    let domains = cfg.target_domains()?;
    (0..cfg.trials)
        .map(|t| draw_trial(cfg, &specs, &domains, t))
        .collect()
}

/// One JSON record per line.
pub fn write_dataset<W: Write>(mut out: W, records: &[TrialRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Mean absolute error.
pub fn mae(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.len() != truths.len() || estimates.is_empty() {
        return Err(Error::LengthMismatch {
            left: estimates.len(),
            right: truths.len(),
        });
    }
    let sum: f64 = estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| (e - t).abs())
        .sum();
    Ok(sum / estimates.len() as f64)
}

/// Per-sample squared error normalized by the true energy.
fn normalized_error(estimate: &[C64], truth: &[C64], index: usize) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: estimate.len(),
        });
    }
    let energy = linalg::norm_sqr(truth);
    if energy == 0.0 {
        return Err(Error::ZeroTruth { index });
    }
    let err: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(err / energy)
}

/// `(1/B) Σ ‖ĥ_j − h_j‖² / ‖h_j‖²`, linear scale.
pub fn nmse(estimates: &[Vec<C64>], truths: &[Vec<C64>]) -> Result<f64> {
    if estimates.len() != truths.len() || estimates.is_empty() {
        return Err(Error::LengthMismatch {
            left: estimates.len(),
            right: truths.len(),
        });
    }
    let mut sum = 0.0;
    for (j, (e, t)) in estimates.iter().zip(truths).enumerate() {
        sum += normalized_error(e, t, j)?;
    }
    Ok(sum / estimates.len() as f64)
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// One CSV row: a method at one resolution, averaged over the trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub scenario: String,
    /// Branching factor; empty for exhaustive methods.
    pub n: Option<usize>,
    #[serde(rename = "S_or_A")]
    pub s_or_a: String,
    /// Selection multiplications per trial, all iterations included.
    pub sel_mults: f64,
    pub total_mults: f64,
    /// MAE in seconds for delay estimation, linear NMSE otherwise.
    pub metric: f64,
    pub trials: usize,
    pub seed: u64,
}

pub fn write_rows_csv<W: Write>(out: W, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: std::io::Read>(input: R) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// Refuse a point whose predicted selection cost per iteration exceeds the
/// budget. Returns the prediction.
pub fn check_budget(point: &SweepPoint, dims: &[usize], budget: u128) -> Result<u128> {
    let method = point.selection_method(dims.len());
    let predicted = predicted_selection_mults(method, dims, &point.resolution())?;
    if predicted > budget {
        return Err(Error::BudgetExceeded {
            method: format!("{} ({})", point.name(), point.label()),
            predicted,
            budget,
        });
    }
    Ok(predicted)
}

type Selector = Box<dyn AtomSelector + Sync>;

fn prepare(
    point: &SweepPoint,
    grids: &[ObservationGrid],
    domains: &[TargetDomain],
) -> Result<Selector> {
    let dicts = |atoms: &[usize]| -> Result<Vec<Dictionary>> {
        grids
            .iter()
            .zip(domains)
            .zip(atoms)
            .map(|((g, d), &a)| Dictionary::build_classical(g, *d, a))
            .collect()
    };
    let cfgs = |n: usize, steps: &[usize]| -> Result<Vec<HSearchConfig>> {
        steps.iter().map(|&s| HSearchConfig::new(n, s)).collect()
    };
    Ok(match point {
        SweepPoint::Omp { atoms } if grids.len() == 1 => {
            Box::new(dicts(atoms)?.pop().ok_or(Error::EmptyDictionary)?)
        }
        SweepPoint::Omp { atoms } => Box::new(KroneckerDictionary::new(dicts(atoms)?)?),
        SweepPoint::Homp { branching, steps } => Box::new(HierarchicalSelector {
            grid: grids[0].clone(),
            domain: domains[0],
            cfg: HSearchConfig::new(*branching, steps[0])?,
        }),
        SweepPoint::Momp { atoms } => Box::new(MultiDimSelector {
            dicts: dicts(atoms)?,
        }),
        SweepPoint::Mhomp { branching, steps } => Box::new(MultiDimHierarchicalSelector::new(
            grids.to_vec(),
            domains.to_vec(),
            cfgs(*branching, steps)?,
        )?),
    })
}

/// Outcome of one trial at one sweep point.
#[derive(Debug, Clone, Copy)]
pub struct TrialOutcome {
    pub metric: f64,
    pub mults: OpCounter,
}

fn run_trial(
    scenario: Scenario,
    selector: &(dyn AtomSelector + Sync),
    record: &TrialRecord,
) -> Result<TrialOutcome> {
    let h = record.channel()?;
    let y = record.observe(&h)?;
    let mut counter = OpCounter::new();
    let k = record.paths.len();
    let res = pursue(&y, selector, StoppingRule::FixedIterations(k), &mut counter)?;
    let metric = match scenario {
        Scenario::Delay1d => (res.support[0].params[0] - record.paths.paths()[0].params[0]).abs(),
        _ => normalized_error(&res.estimate, &h, record.trial)?,
    };
    Ok(TrialOutcome {
        metric,
        mults: res.mults,
    })
}

/// Run every trial of `records` at one sweep point, in parallel, and reduce
/// in trial order.
pub fn run_point(
    cfg: &ExperimentConfig,
    point: &SweepPoint,
    records: &[TrialRecord],
) -> Result<MetricRow> {
    check_budget(point, &cfg.dims, cfg.budget)?;
    let selector = prepare(point, &cfg.grids()?, &cfg.target_domains()?)?;
    let outcomes: Vec<TrialOutcome> = records
        .par_iter()
        .map(|r| run_trial(cfg.scenario, selector.as_ref(), r))
        .collect::<Result<_>>()?;
    let b = outcomes.len() as f64;
    let metric = outcomes.iter().map(|o| o.metric).sum::<f64>() / b;
    let total: OpCounter = outcomes.iter().map(|o| o.mults).sum();
    Ok(MetricRow {
        method: point.name().to_string(),
        scenario: cfg.scenario.name().to_string(),
        n: point.branching(),
        s_or_a: point.label(),
        sel_mults: total.selection_mults as f64 / b,
        total_mults: total.total_mults() as f64 / b,
        metric,
        trials: outcomes.len(),
        seed: cfg.master_seed,
    })
}

fn expect_scenario(cfg: &ExperimentConfig, want: Scenario) -> Result<()> {
    if cfg.scenario != want {
        return Err(Error::InvalidConfig(format!(
            "expected a {} config, got {}",
            want.name(),
            cfg.scenario.name()
        )));
    }
    Ok(())
}

/// Run the whole sweep. Budget checks happen up front so nothing runs when
/// any point would be refused.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    cfg.validate()?;
    for p in &cfg.sweep {
        check_budget(p, &cfg.dims, cfg.budget)?;
    }
    let records = gen_dataset(cfg)?;
    cfg.sweep
        .iter()
        .map(|p| run_point(cfg, p, &records))
        .collect()
}

pub fn run_delay_estimation(cfg: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    expect_scenario(cfg, Scenario::Delay1d)?;
    run_experiment(cfg)
}

pub fn run_nmse_1d(cfg: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    expect_scenario(cfg, Scenario::Nmse1d)?;
    run_experiment(cfg)
}

pub fn run_nmse_3d(cfg: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    expect_scenario(cfg, Scenario::Nmse3d)?;
    run_experiment(cfg)
}

/// Predicted per-iteration selection cost of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub method: String,
    pub dims: String,
    #[serde(rename = "S_or_A")]
    pub s_or_a: String,
    pub n: Option<usize>,
    pub sel_mults_per_iteration: u128,
    pub within_budget: bool,
}

pub fn predict_complexity(cfg: &ExperimentConfig) -> Result<Vec<ComplexityRow>> {
    cfg.validate()?;
    let dims = cfg
        .dims
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("x");
    cfg.sweep
        .iter()
        .map(|p| {
            let predicted = predicted_selection_mults(
                p.selection_method(cfg.dims.len()),
                &cfg.dims,
                &p.resolution(),
            )?;
            Ok(ComplexityRow {
                method: p.name().to_string(),
                dims: dims.clone(),
                s_or_a: p.label(),
                n: p.branching(),
                sel_mults_per_iteration: predicted,
                within_budget: predicted <= cfg.budget,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_time_s: f64,
    pub rows: usize,
}

/// Time `f` and wrap its rows in a manifest.
pub fn with_manifest<F>(
    command: &str,
    cfg: &ExperimentConfig,
    f: F,
) -> Result<(Vec<MetricRow>, RunManifest)>
where
    F: FnOnce(&ExperimentConfig) -> Result<Vec<MetricRow>>,
{
    let start = Instant::now();
    let rows = f(cfg)?;
    let manifest = RunManifest {
        command: command.to_string(),
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        rows: rows.len(),
    };
    Ok((rows, manifest))
}
