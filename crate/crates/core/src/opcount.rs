//! Multiplication accounting.
//!
//! One complex multiplication is one unit and additions are free. Only the
//! inner products of the atom-selection step go into `selection_mults`; the
//! least-squares refit and residual update go into `refit_mults`, and the
//! sinc modulation or Kronecker expansion that builds candidate atoms goes
//! into `construction_mults`.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounter {
    pub selection_mults: u64,
    pub refit_mults: u64,
    pub construction_mults: u64,
    /// Inner products (or tensor contractions) computed during selection.
    pub correlations: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record one selection correlation over `len` products.
    #[inline]
    pub fn correlation(&mut self, len: usize) {
        self.correlations += 1;
        self.selection_mults += len as u64;
    }

    #[inline]
    pub fn refit(&mut self, mults: usize) {
        self.refit_mults += mults as u64;
    }

    #[inline]
    pub fn construction(&mut self, mults: usize) {
        self.construction_mults += mults as u64;
    }

    pub fn total_mults(&self) -> u64 {
        self.selection_mults + self.refit_mults + self.construction_mults
    }

    /// Counts accumulated since `earlier` was taken.
    pub fn since(&self, earlier: &OpCounter) -> OpCounter {
        OpCounter {
            selection_mults: self.selection_mults - earlier.selection_mults,
            refit_mults: self.refit_mults - earlier.refit_mults,
            construction_mults: self.construction_mults - earlier.construction_mults,
            correlations: self.correlations - earlier.correlations,
        }
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.selection_mults += rhs.selection_mults;
        self.refit_mults += rhs.refit_mults;
        self.construction_mults += rhs.construction_mults;
        self.correlations += rhs.correlations;
    }
}

impl Add for OpCounter {
    type Output = OpCounter;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl std::iter::Sum for OpCounter {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(OpCounter::default(), Add::add)
    }
}

/// Atom-selection strategies compared in the complexity table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMethod {
    /// Exhaustive search over a 1-D dictionary.
    Classical1d,
    /// Hierarchical search over one dimension.
    Hierarchical1d,
    /// Exhaustive search over the full Kronecker dictionary.
    Classical3d,
    /// Sequential exhaustive search per dimension.
    MultiDimClassical,
    /// Sequential hierarchical search per dimension.
    MultiDimHierarchical,
}

impl SelectionMethod {
    pub fn is_hierarchical(self) -> bool {
        matches!(self, Self::Hierarchical1d | Self::MultiDimHierarchical)
    }

    fn is_one_dimensional(self) -> bool {
        matches!(self, Self::Classical1d | Self::Hierarchical1d)
    }
}

/// Dictionary resolution: atom counts per dimension, or a branching factor
/// with a step count per dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Atoms(Vec<usize>),
    Hierarchical { branching: usize, steps: Vec<usize> },
}

impl Resolution {
    fn dims(&self) -> usize {
        match self {
            Self::Atoms(a) => a.len(),
            Self::Hierarchical { steps, .. } => steps.len(),
        }
    }
}

fn check_arity(method: SelectionMethod, dims: Option<&[usize]>, res: &Resolution) -> Result<()> {
    let matches_kind = matches!(
        (method.is_hierarchical(), res),
        (true, Resolution::Hierarchical { .. }) | (false, Resolution::Atoms(_))
    );
    if !matches_kind {
        return Err(Error::ArityMismatch(format!(
            "{method:?} cannot take resolution {res:?}"
        )));
    }
    let d = res.dims();
    if d == 0 || (method.is_one_dimensional() && d != 1) {
        return Err(Error::ArityMismatch(format!(
            "{method:?} got {d} resolution entries"
        )));
    }
    if let Some(dims) = dims {
        if dims.len() != d {
            return Err(Error::ArityMismatch(format!(
                "{} dimensions but {d} resolution entries",
                dims.len()
            )));
        }
    }
    if let Resolution::Hierarchical { branching, .. } = res {
        if *branching < 2 {
            return Err(Error::ArityMismatch(format!(
                "branching factor must be at least 2, got {branching}"
            )));
        }
    }
    Ok(())
}

/// Selection multiplications for one atom-selection invocation.
pub fn predicted_selection_mults(
    method: SelectionMethod,
    dims: &[usize],
    res: &Resolution,
) -> Result<u128> {
    check_arity(method, Some(dims), res)?;
    let dims: Vec<u128> = dims.iter().map(|&n| n as u128).collect();
    let total: u128 = dims.iter().product();
    let count = match (method, res) {
        (SelectionMethod::Classical1d, Resolution::Atoms(a))
        | (SelectionMethod::Classical3d, Resolution::Atoms(a)) => {
            total * a.iter().map(|&x| x as u128).product::<u128>()
        }
        (SelectionMethod::MultiDimClassical, Resolution::Atoms(a)) => {
            // A_d times the size of the tensor still left at dimension d.
            (0..dims.len())
                .map(|d| a[d] as u128 * dims[d..].iter().product::<u128>())
                .sum()
        }
        (
            SelectionMethod::Hierarchical1d | SelectionMethod::MultiDimHierarchical,
            Resolution::Hierarchical { branching, steps },
        ) => (0..dims.len())
            .map(|d| (branching * steps[d]) as u128 * dims[d..].iter().product::<u128>())
            .sum(),
        _ => unreachable!("arity checked above"),
    };
    Ok(count)
}

/// Correlations (inner products or contractions) per selection invocation.
pub fn predicted_correlations(method: SelectionMethod, res: &Resolution) -> Result<u128> {
    check_arity(method, None, res)?;
    Ok(match (method, res) {
        (SelectionMethod::Classical1d | SelectionMethod::Classical3d, Resolution::Atoms(a)) => {
            a.iter().map(|&x| x as u128).product()
        }
        (SelectionMethod::MultiDimClassical, Resolution::Atoms(a)) => {
            a.iter().map(|&x| x as u128).sum()
        }
        (_, Resolution::Hierarchical { branching, steps }) => {
            steps.iter().map(|&s| (branching * s) as u128).sum()
        }
        _ => unreachable!("arity checked above"),
    })
}
