//! Hierarchical atom selection.
//!
//! Instead of correlating the residual with all `A = n^S` atoms of a classical
//! dictionary, the search correlates it with `n` meta-atoms whose responses
//! tile the current interval, keeps the winning interval, splits it in `n`
//! again, and stops after `S` steps: `n·S` correlations in total.
//!
//! Centers are tracked by integer bin index, so after `S` steps the estimate is
//! bit-identical to the matching parameter of [`Dictionary::build_classical`]
//! with `A = n^S`.
//!
//! [`Dictionary::build_classical`]: crate::dictionary::Dictionary::build_classical

use serde::{Deserialize, Serialize};

use crate::dictionary::MetaAtomSet;
use crate::error::{Error, Result};
use crate::linalg;
use crate::opcount::OpCounter;
use crate::signal_model::{ObservationGrid, TargetDomain};
use crate::C64;

/// Largest resolution `n^S` for which bin indices stay exact in `f64`.
const MAX_RESOLUTION: u64 = 1 << 53;

/// How a vector-valued correlation is reduced to a selection score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    /// Energy `‖c‖₂`.
    #[default]
    L2,
    /// Peak `‖c‖∞`.
    LInf,
}

impl Reduction {
    /// Monotone score of a correlation vector (squared to skip the root).
    fn score(self, c: &[C64]) -> f64 {
        match self {
            Reduction::L2 => linalg::norm_sqr(c),
            Reduction::LInf => c.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max),
        }
    }
}

/// Branching factor `n` and step count `S`. Ties go to the smallest
/// meta-atom index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HSearchConfig {
    branching: usize,
    steps: usize,
    #[serde(default)]
    reduction: Reduction,
}

impl HSearchConfig {
    pub fn new(branching: usize, steps: usize) -> Result<Self> {
        if branching < 2 {
            return Err(Error::InvalidSearch(format!(
                "branching factor must be at least 2, got {branching}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidSearch("at least one step is required".into()));
        }
        let fits = (branching as u64)
            .checked_pow(steps as u32)
            .is_some_and(|r| r <= MAX_RESOLUTION);
        if !fits {
            return Err(Error::InvalidSearch(format!(
                "resolution {branching}^{steps} exceeds 2^53"
            )));
        }
        Ok(Self {
            branching,
            steps,
            reduction: Reduction::default(),
        })
    }

    pub fn with_reduction(mut self, reduction: Reduction) -> Self {
        self.reduction = reduction;
        self
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn reduction(&self) -> Reduction {
        self.reduction
    }

    /// Equivalent classical dictionary size `n^S`.
    pub fn resolution(&self) -> u64 {
        (self.branching as u64).pow(self.steps as u32)
    }

    /// Correlations per search, `n·S`.
    pub fn correlations(&self) -> u64 {
        (self.branching * self.steps) as u64
    }
}

/// One refinement step: the meta-atom centers tried and the winner.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchStep {
    pub width: f64,
    pub centers: Vec<f64>,
    pub selected: usize,
}

#[derive(Debug, Clone)]
pub struct HSearchOutcome {
    /// Center of the last selected meta-atom.
    pub u_star: f64,
    /// Index of that center among the `n^S` final bins.
    pub bin: u64,
    /// Correlation of the last selected meta-atom: a scalar in the 1-D form,
    /// the contraction over the trailing dimensions in the tensor form.
    pub payload: Vec<C64>,
    /// Selection multiplications consumed by this call.
    pub mults: u64,
    pub trace: Vec<SearchStep>,
}

/// Hierarchical search on a vector residual of length `N`.
pub fn hsearch_1d(
    residual: &[C64],
    domain: &TargetDomain,
    grid: &ObservationGrid,
    cfg: &HSearchConfig,
    counter: &mut OpCounter,
) -> Result<HSearchOutcome> {
    if residual.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: residual.len(),
        });
    }
    hsearch_tensor(residual, domain, grid, cfg, counter)
}

/// Hierarchical search on a row-major tensor whose leading dimension is the
/// grid. Each correlation contracts a meta-atom along that dimension; the
/// winner maximizes the configured reduction of the contracted vector.
pub fn hsearch_tensor(
    residual: &[C64],
    domain: &TargetDomain,
    grid: &ObservationGrid,
    cfg: &HSearchConfig,
    counter: &mut OpCounter,
) -> Result<HSearchOutcome> {
    let lead = grid.len();
    if residual.is_empty() || !residual.len().is_multiple_of(lead) {
        return Err(Error::DimensionMismatch {
            expected: lead,
            found: residual.len(),
        });
    }
    if residual
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::NonFiniteResidual);
    }
    let trailing = residual.len() / lead;
    let n = cfg.branching as u64;
    let start = counter.selection_mults;

    let mut bin: u64 = 0;
    let mut bins: u64 = 1;
    let mut trace = Vec::with_capacity(cfg.steps);
    let mut scratch = vec![C64::new(0.0, 0.0); trailing];
    let mut payload = scratch.clone();
    let mut u_star = domain.u_min();

    for _ in 0..cfg.steps {
        bins *= n;
        let first = bin * n;
        let centers: Vec<f64> = (0..n).map(|k| domain.bin_center(first + k, bins)).collect();
        let width = domain.width() / bins as f64;
        let metas = MetaAtomSet::build(grid, &centers, width, counter)?;

        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (j, atom) in metas.atoms().enumerate() {
            linalg::contract_leading(atom, residual, trailing, &mut scratch);
            counter.correlation(residual.len());
            let score = cfg.reduction.score(&scratch);
            if score > best_score {
                best_score = score;
                best = j;
                payload.copy_from_slice(&scratch);
            }
        }
        bin = first + best as u64;
        u_star = centers[best];
        trace.push(SearchStep {
            width,
            centers,
            selected: best,
        });
    }

    Ok(HSearchOutcome {
        u_star,
        bin,
        payload,
        mults: counter.selection_mults - start,
        trace,
    })
}
