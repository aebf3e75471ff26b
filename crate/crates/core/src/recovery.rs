//! Greedy sparse recovery: MP, OMP and the structured variants HOMP, MOMP and
//! MHOMP, which differ from OMP only in how the next atom is selected.
//!
//! The OMP-family loop keeps an orthonormal basis of the active atoms
//! (classical Gram-Schmidt with one reorthogonalization pass), so the
//! least-squares refit and the residual update cost `O(N·s)` per iteration
//! and the residual stays orthogonal to the active span.

use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::hierarchical_search::{hsearch_tensor, HSearchConfig};
use crate::linalg;
use crate::opcount::OpCounter;
use crate::signal_model::{atomic_signal, ObservationGrid, TargetDomain};
use crate::C64;

/// Relative pivot below which a new atom counts as linearly dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingRule {
    /// Run exactly `s` selections.
    FixedIterations(usize),
    /// Stop once `‖ε‖ ≤ ratio·‖y‖` (at most `N` selections).
    ResidualThreshold(f64),
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StoppingRule::FixedIterations(0) => Err(Error::InvalidConfig(
                "fixed iteration count must be at least 1".into(),
            )),
            StoppingRule::ResidualThreshold(r) if !(r > 0.0 && r < 1.0) => Err(
                Error::InvalidConfig(format!("residual ratio must lie in (0, 1), got {r}")),
            ),
            _ => Ok(()),
        }
    }

    fn max_iterations(&self, signal_len: usize) -> usize {
        match *self {
            StoppingRule::FixedIterations(s) => s,
            StoppingRule::ResidualThreshold(_) => signal_len,
        }
    }
}

/// An active atom and the per-dimension parameters that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportEntry {
    pub params: Vec<f64>,
    pub atom: Vec<C64>,
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub support: Vec<SupportEntry>,
    /// One coefficient per support entry.
    pub coefficients: Vec<C64>,
    /// `Σ x_i · atom_i`.
    pub estimate: Vec<C64>,
    pub residual: Vec<C64>,
    /// `‖ε‖` after each selection.
    pub residual_norms: Vec<f64>,
    /// Number of atom-selection invocations, duplicates included.
    pub selections: usize,
    /// Operations spent by this call.
    pub mults: OpCounter,
}

/// JSON form of a [`RecoveryResult`]: complex numbers as `[re, im]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoverySummary {
    pub support: Vec<Vec<f64>>,
    pub coefficients: Vec<C64>,
    pub residual_norms: Vec<f64>,
    pub selections: usize,
    pub selection_mults: u64,
    pub total_mults: u64,
    pub counts: OpCounter,
}

impl RecoveryResult {
    pub fn summary(&self) -> RecoverySummary {
        RecoverySummary {
            support: self.support.iter().map(|s| s.params.clone()).collect(),
            coefficients: self.coefficients.clone(),
            residual_norms: self.residual_norms.clone(),
            selections: self.selections,
            selection_mults: self.mults.selection_mults,
            total_mults: self.mults.total_mults(),
            counts: self.mults,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.summary())?)
    }
}

/// An atom-selection strategy for the OMP loop.
pub trait AtomSelector {
    fn signal_len(&self) -> usize;

    /// Pick the next atom for `residual`, charging selection work to `counter`.
    fn select(&self, residual: &[C64], counter: &mut OpCounter) -> Result<SupportEntry>;
}

impl AtomSelector for Dictionary {
    fn signal_len(&self) -> usize {
        Dictionary::signal_len(self)
    }

    fn select(&self, residual: &[C64], counter: &mut OpCounter) -> Result<SupportEntry> {
        let (i, _) = Dictionary::select(self, residual, counter)?;
        Ok(SupportEntry {
            params: vec![self.params()[i]],
            atom: self.atom(i).to_vec(),
        })
    }
}

/// The full Kronecker product of per-dimension dictionaries, searched
/// exhaustively atom by atom.
#[derive(Debug, Clone)]
pub struct KroneckerDictionary {
    factors: Vec<Dictionary>,
}

impl KroneckerDictionary {
    pub fn new(factors: Vec<Dictionary>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::EmptyDictionary);
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Dictionary] {
        &self.factors
    }

    /// `Π A_d`.
    pub fn len(&self) -> usize {
        self.factors.iter().map(Dictionary::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for (d, f) in self.factors.iter().enumerate().rev() {
            out[d] = flat % f.len();
            flat /= f.len();
        }
    }

    /// Expand atom `idx` into `buf`, returning the multiplications spent.
    fn expand(&self, idx: &[usize], buf: &mut Vec<C64>) -> usize {
        buf.clear();
        buf.push(C64::new(1.0, 0.0));
        let mut mults = 0;
        for (f, &i) in self.factors.iter().zip(idx) {
            let next = linalg::kron(buf, f.atom(i));
            mults += next.len();
            *buf = next;
        }
        mults
    }
}

impl AtomSelector for KroneckerDictionary {
    fn signal_len(&self) -> usize {
        self.factors.iter().map(Dictionary::signal_len).product()
    }

    fn select(&self, residual: &[C64], counter: &mut OpCounter) -> Result<SupportEntry> {
        let n = AtomSelector::signal_len(self);
        if residual.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: residual.len(),
            });
        }
        let mut idx = vec![0; self.factors.len()];
        let mut buf = Vec::with_capacity(n);
        let mut best = (0, f64::NEG_INFINITY);
        for flat in 0..self.len() {
            self.multi_index(flat, &mut idx);
            counter.construction(self.expand(&idx, &mut buf));
            let c = linalg::dot_conj(&buf, residual);
            counter.correlation(n);
            if c.norm_sqr() > best.1 {
                best = (flat, c.norm_sqr());
            }
        }
        self.multi_index(best.0, &mut idx);
        counter.construction(self.expand(&idx, &mut buf));
        Ok(SupportEntry {
            params: self
                .factors
                .iter()
                .zip(&idx)
                .map(|(f, &i)| f.params()[i])
                .collect(),
            atom: buf,
        })
    }
}

/// Unit-norm atomic signal `e(u)/√N`; charges the scaling to construction.
fn unit_atom(grid: &ObservationGrid, u: f64, counter: &mut OpCounter) -> Vec<C64> {
    let mut a = atomic_signal(grid, u);
    linalg::scale(&mut a, 1.0 / (grid.len() as f64).sqrt());
    counter.construction(a.len());
    a
}

fn kron_atoms(factors: &[Vec<C64>], counter: &mut OpCounter) -> Vec<C64> {
    let mut out = vec![C64::new(1.0, 0.0)];
    for f in factors {
        out = linalg::kron(&out, f);
        counter.construction(out.len());
    }
    out
}

/// Hierarchical selection over one dimension.
#[derive(Debug, Clone)]
pub struct HierarchicalSelector {
    pub grid: ObservationGrid,
    pub domain: TargetDomain,
    pub cfg: HSearchConfig,
}

impl AtomSelector for HierarchicalSelector {
    fn signal_len(&self) -> usize {
        self.grid.len()
    }

    fn select(&self, residual: &[C64], counter: &mut OpCounter) -> Result<SupportEntry> {
        if residual.len() != self.grid.len() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.len(),
                found: residual.len(),
            });
        }
        let out = hsearch_tensor(residual, &self.domain, &self.grid, &self.cfg, counter)?;
        Ok(SupportEntry {
            params: vec![out.u_star],
            atom: unit_atom(&self.grid, out.u_star, counter),
        })
    }
}

fn check_product_len(lens: impl Iterator<Item = usize>, found: usize) -> Result<usize> {
    let n: usize = lens.product();
    if n != found {
        return Err(Error::DimensionMismatch { expected: n, found });
    }
    Ok(n)
}

/// Sequential exhaustive selection per dimension (MOMP). Dimension `d` keeps
/// the atom whose contraction with the remaining tensor has the largest ℓ2
/// norm and hands that contraction to dimension `d + 1`.
#[derive(Debug, Clone)]
pub struct MultiDimSelector {
    pub dicts: Vec<Dictionary>,
}

impl AtomSelector for MultiDimSelector {
    fn signal_len(&self) -> usize {
        self.dicts.iter().map(Dictionary::signal_len).product()
    }

    fn select(&self, residual: &[C64], counter: &mut OpCounter) -> Result<SupportEntry> {
        check_product_len(
            self.dicts.iter().map(Dictionary::signal_len),
            residual.len(),
        )?;
        let mut tensor = residual.to_vec();
        let mut params = Vec::with_capacity(self.dicts.len());
        let mut factors = Vec::with_capacity(self.dicts.len());
        for dict in &self.dicts {
            let trailing = tensor.len() / dict.signal_len();
            let mut scratch = vec![C64::new(0.0, 0.0); trailing];
            let mut payload = scratch.clone();
            let mut best = (0, f64::NEG_INFINITY);
            for (i, atom) in dict.atoms().enumerate() {
                linalg::contract_leading(atom, &tensor, trailing, &mut scratch);
                counter.correlation(tensor.len());
                let score = linalg::norm_sqr(&scratch);
                if score > best.1 {
                    best = (i, score);
                    payload.copy_from_slice(&scratch);
                }
            }
            params.push(dict.params()[best.0]);
            factors.push(dict.atom(best.0).to_vec());
            tensor = payload;
        }
        Ok(SupportEntry {
            params,
            atom: kron_atoms(&factors, counter),
        })
    }
}

/// Sequential hierarchical selection per dimension (MHOMP).
#[derive(Debug, Clone)]
pub struct MultiDimHierarchicalSelector {
    pub grids: Vec<ObservationGrid>,
    pub domains: Vec<TargetDomain>,
    pub cfgs: Vec<HSearchConfig>,
}

impl MultiDimHierarchicalSelector {
    pub fn new(
        grids: Vec<ObservationGrid>,
        domains: Vec<TargetDomain>,
        cfgs: Vec<HSearchConfig>,
    ) -> Result<Self> {
        if grids.is_empty() || grids.len() != domains.len() || grids.len() != cfgs.len() {
            return Err(Error::ArityMismatch(format!(
                "{} grids, {} domains, {} search configurations",
                grids.len(),
                domains.len(),
                cfgs.len()
            )));
        }
        Ok(Self {
            grids,
            domains,
            cfgs,
        })
    }
}

impl AtomSelector for MultiDimHierarchicalSelector {
    fn signal_len(&self) -> usize {
        self.grids.iter().map(ObservationGrid::len).product()
    }

    fn select(&self, residual: &[C64], counter: &mut OpCounter) -> Result<SupportEntry> {
        check_product_len(self.grids.iter().map(ObservationGrid::len), residual.len())?;
        let mut tensor = residual.to_vec();
        let mut params = Vec::with_capacity(self.grids.len());
        let mut factors = Vec::with_capacity(self.grids.len());
        for ((grid, domain), cfg) in self.grids.iter().zip(&self.domains).zip(&self.cfgs) {
            let out = hsearch_tensor(&tensor, domain, grid, cfg, counter)?;
            params.push(out.u_star);
            factors.push(unit_atom(grid, out.u_star, counter));
            tensor = out.payload;
        }
        Ok(SupportEntry {
            params,
            atom: kron_atoms(&factors, counter),
        })
    }
}

/// Orthonormal basis of the active atoms plus the triangular factor, built
/// one column at a time.
struct IncrementalQr {
    q: Vec<Vec<C64>>,
    /// Column `k` holds `R[0..=k, k]`.
    r: Vec<Vec<C64>>,
    /// `qₖᴴ ε` at the time column `k` was added.
    z: Vec<C64>,
    largest_pivot: f64,
}

impl IncrementalQr {
    fn new() -> Self {
        Self {
            q: Vec::new(),
            r: Vec::new(),
            z: Vec::new(),
            largest_pivot: 0.0,
        }
    }

    /// Append `atom` and project it out of `residual`. Leaves everything
    /// untouched and returns `RankDeficient` when `atom` is (numerically) in
    /// the current span.
    fn push(&mut self, atom: &[C64], residual: &mut [C64], counter: &mut OpCounter) -> Result<()> {
        let n = atom.len();
        let mut v = atom.to_vec();
        let mut col = vec![C64::new(0.0, 0.0); self.q.len() + 1];
        for _ in 0..2 {
            for (k, q) in self.q.iter().enumerate() {
                let h = linalg::dot_conj(q, &v);
                linalg::sub_scaled(&mut v, h, q);
                counter.refit(2 * n);
                col[k] += h;
            }
        }
        let pivot = linalg::norm(&v);
        let reference = linalg::norm(atom).max(self.largest_pivot);
        if !(pivot > RANK_TOLERANCE * reference) {
            return Err(Error::RankDeficient);
        }
        linalg::scale(&mut v, 1.0 / pivot);
        counter.refit(n);
        col[self.q.len()] = C64::new(pivot, 0.0);

        let z = linalg::dot_conj(&v, residual);
        linalg::sub_scaled(residual, z, &v);
        counter.refit(2 * n);

        self.largest_pivot = self.largest_pivot.max(pivot);
        self.q.push(v);
        self.r.push(col);
        self.z.push(z);
        Ok(())
    }

    /// Solve `R x = z` by back substitution.
    fn coefficients(&self, counter: &mut OpCounter) -> Vec<C64> {
        let s = self.z.len();
        let mut x = self.z.clone();
        for k in (0..s).rev() {
            for j in k + 1..s {
                let xj = x[j];
                x[k] -= self.r[j][k] * xj;
            }
            x[k] /= self.r[k][k];
            counter.refit(s - k);
        }
        x
    }
}

/// Minimize `‖y − D x‖₂` over the columns `active`.
pub fn least_squares(active: &[Vec<C64>], y: &[C64]) -> Result<Vec<C64>> {
    if active.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    let mut qr = IncrementalQr::new();
    let mut residual = y.to_vec();
    let mut counter = OpCounter::new();
    for col in active {
        if col.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                found: col.len(),
            });
        }
        qr.push(col, &mut residual, &mut counter)?;
    }
    Ok(qr.coefficients(&mut counter))
}

fn combine(
    support: &[SupportEntry],
    coefficients: &[C64],
    n: usize,
    counter: &mut OpCounter,
) -> Vec<C64> {
    let mut h = vec![C64::new(0.0, 0.0); n];
    for (entry, &x) in support.iter().zip(coefficients) {
        for (hi, a) in h.iter_mut().zip(&entry.atom) {
            *hi += x * a;
        }
        counter.refit(n);
    }
    h
}

/// OMP loop around an arbitrary selector.
///
/// A selection that repeats an active atom (or is numerically dependent on
/// the active set) is not appended; the residual is left as is, and a second
/// consecutive repeat ends the loop.
pub fn pursue<S: AtomSelector + ?Sized>(
    y: &[C64],
    selector: &S,
    stop: StoppingRule,
    counter: &mut OpCounter,
) -> Result<RecoveryResult> {
    stop.validate()?;
    let n = selector.signal_len();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    let start = *counter;
    let y_norm = linalg::norm(y);
    let mut residual = y.to_vec();
    let mut qr = IncrementalQr::new();
    let mut support: Vec<SupportEntry> = Vec::new();
    let mut residual_norms = Vec::new();
    let mut selections = 0;
    let mut repeats = 0;

    for _ in 0..stop.max_iterations(n) {
        if let StoppingRule::ResidualThreshold(ratio) = stop {
            if linalg::norm(&residual) <= ratio * y_norm {
                break;
            }
        }
        let entry = selector.select(&residual, counter)?;
        selections += 1;
        let mut repeated = support.iter().any(|s| s.params == entry.params);
        if !repeated {
            match qr.push(&entry.atom, &mut residual, counter) {
                Ok(()) => support.push(entry),
                Err(Error::RankDeficient) => repeated = true,
                Err(e) => return Err(e),
            }
        }
        residual_norms.push(linalg::norm(&residual));
        if repeated {
            repeats += 1;
            if repeats >= 2 {
                break;
            }
        } else {
            repeats = 0;
        }
    }

    let coefficients = qr.coefficients(counter);
    let estimate = combine(&support, &coefficients, n, counter);
    Ok(RecoveryResult {
        support,
        coefficients,
        estimate,
        residual,
        residual_norms,
        selections,
        mults: counter.since(&start),
    })
}

/// Classical OMP: exhaustive selection over `dict`.
pub fn omp(
    y: &[C64],
    dict: &Dictionary,
    stop: StoppingRule,
    counter: &mut OpCounter,
) -> Result<RecoveryResult> {
    pursue(y, dict, stop, counter)
}

/// Classical OMP over the full Kronecker dictionary.
pub fn omp_kronecker(
    y: &[C64],
    dict: &KroneckerDictionary,
    stop: StoppingRule,
    counter: &mut OpCounter,
) -> Result<RecoveryResult> {
    pursue(y, dict, stop, counter)
}

/// OMP with hierarchical atom selection.
pub fn homp(
    y: &[C64],
    grid: &ObservationGrid,
    domain: &TargetDomain,
    cfg: &HSearchConfig,
    stop: StoppingRule,
    counter: &mut OpCounter,
) -> Result<RecoveryResult> {
    let selector = HierarchicalSelector {
        grid: grid.clone(),
        domain: *domain,
        cfg: *cfg,
    };
    pursue(y, &selector, stop, counter)
}

/// Multi-dimensional OMP, dictionaries in Kronecker order.
pub fn momp(
    y: &[C64],
    dicts: &[Dictionary],
    stop: StoppingRule,
    counter: &mut OpCounter,
) -> Result<RecoveryResult> {
    if dicts.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    let selector = MultiDimSelector {
        dicts: dicts.to_vec(),
    };
    pursue(y, &selector, stop, counter)
}

/// Multi-dimensional hierarchical OMP.
pub fn mhomp(
    y: &[C64],
    grids: &[ObservationGrid],
    domains: &[TargetDomain],
    cfgs: &[HSearchConfig],
    stop: StoppingRule,
    counter: &mut OpCounter,
) -> Result<RecoveryResult> {
    let selector =
        MultiDimHierarchicalSelector::new(grids.to_vec(), domains.to_vec(), cfgs.to_vec())?;
    pursue(y, &selector, stop, counter)
}

/// Matching pursuit: the selected atom's coefficient is its correlation and
/// the residual is updated by a single projection, with no refit.
pub fn mp(
    y: &[C64],
    dict: &Dictionary,
    stop: StoppingRule,
    counter: &mut OpCounter,
) -> Result<RecoveryResult> {
    stop.validate()?;
    let n = dict.signal_len();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    let start = *counter;
    let y_norm = linalg::norm(y);
    let mut residual = y.to_vec();
    let mut support: Vec<SupportEntry> = Vec::new();
    let mut index_of: Vec<usize> = Vec::new();
    let mut coefficients: Vec<C64> = Vec::new();
    let mut residual_norms = Vec::new();
    let mut selections = 0;

    for _ in 0..stop.max_iterations(n) {
        if let StoppingRule::ResidualThreshold(ratio) = stop {
            if linalg::norm(&residual) <= ratio * y_norm {
                break;
            }
        }
        let (i, corr) = dict.select(&residual, counter)?;
        selections += 1;
        let atom = dict.atom(i);
        linalg::sub_scaled(&mut residual, corr, atom);
        counter.refit(n);
        match index_of.iter().position(|&k| k == i) {
            Some(pos) => coefficients[pos] += corr,
            None => {
                index_of.push(i);
                coefficients.push(corr);
                support.push(SupportEntry {
                    params: vec![dict.params()[i]],
                    atom: atom.to_vec(),
                });
            }
        }
        residual_norms.push(linalg::norm(&residual));
    }

    let estimate = combine(&support, &coefficients, n, counter);
    Ok(RecoveryResult {
        support,
        coefficients,
        estimate,
        residual,
        residual_norms,
        selections,
        mults: counter.since(&start),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_model::{complex_gaussian, seeded_rng, synth_channel, Path, PathSet};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_vec(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = seeded_rng(seed, 0);
        (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect()
    }

    /// Normal equations `(DᴴD) x = Dᴴy` solved by Gaussian elimination with
    /// partial pivoting.
    fn normal_equations(cols: &[Vec<C64>], y: &[C64]) -> Vec<C64> {
        let s = cols.len();
        let mut m = vec![vec![C64::default(); s + 1]; s];
        for i in 0..s {
            for j in 0..s {
                m[i][j] = cols[i]
                    .iter()
                    .zip(&cols[j])
                    .map(|(a, b)| a.conj() * b)
                    .sum();
            }
            m[i][s] = cols[i].iter().zip(y).map(|(a, b)| a.conj() * b).sum();
        }
        for k in 0..s {
            let p = (k..s)
                .max_by(|&a, &b| m[a][k].norm().total_cmp(&m[b][k].norm()))
                .unwrap();
            m.swap(k, p);
            for i in k + 1..s {
                let f = m[i][k] / m[k][k];
                for j in k..=s {
                    let v = m[k][j];
                    m[i][j] -= f * v;
                }
            }
        }
        let mut x = vec![C64::default(); s];
        for k in (0..s).rev() {
            let mut acc = m[k][s];
            for j in k + 1..s {
                acc -= m[k][j] * x[j];
            }
            x[k] = acc / m[k][k];
        }
        x
    }

    #[test]
    fn least_squares_single_column_is_projection() {
        let mut a = random_vec(20, 1);
        let na = linalg::norm(&a);
        linalg::scale(&mut a, 1.0 / na);
        let y = random_vec(20, 2);
        let x = least_squares(&[a.clone()], &y).unwrap();
        assert!((x[0] - linalg::dot_conj(&a, &y)).norm() < 1e-12);
    }

    #[test]
    fn least_squares_orthonormal_columns() {
        let g = ObservationGrid::frequency(16, 1.0).unwrap();
        // Atoms on the DFT grid are orthonormal.
        let cols: Vec<Vec<C64>> = [0.0, 0.25, 0.5]
            .iter()
            .map(|&u| {
                let mut a = atomic_signal(&g, u);
                linalg::scale(&mut a, 0.25);
                a
            })
            .collect();
        let y = random_vec(16, 3);
        let x = least_squares(&cols, &y).unwrap();
        for (xi, col) in x.iter().zip(&cols) {
            assert!((xi - linalg::dot_conj(col, &y)).norm() < 1e-12);
        }
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let cols: Vec<Vec<C64>> = (0..4).map(|k| random_vec(32, 10 + k)).collect();
        let y = random_vec(32, 99);
        let x = least_squares(&cols, &y).unwrap();
        let want = normal_equations(&cols, &y);
        for (a, b) in x.iter().zip(&want) {
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
        // Residual orthogonal to the column span.
        let mut r = y.clone();
        for (col, xi) in cols.iter().zip(&x) {
            linalg::sub_scaled(&mut r, *xi, col);
        }
        for col in &cols {
            assert!(linalg::dot_conj(col, &r).norm() <= 1e-8 * linalg::norm(&y));
        }
    }

    #[test]
    fn least_squares_flags_rank_deficiency() {
        let a = random_vec(10, 4);
        let b: Vec<C64> = a.iter().map(|z| z * c(0.0, 2.0)).collect();
        assert!(matches!(
            least_squares(&[a, b], &random_vec(10, 5)),
            Err(Error::RankDeficient)
        ));
        assert!(matches!(
            least_squares(&[], &random_vec(10, 5)),
            Err(Error::EmptyDictionary)
        ));
    }

    #[test]
    fn stopping_rule_validation() {
        assert!(StoppingRule::FixedIterations(0).validate().is_err());
        assert!(StoppingRule::ResidualThreshold(0.0).validate().is_err());
        assert!(StoppingRule::ResidualThreshold(1.0).validate().is_err());
        assert!(StoppingRule::ResidualThreshold(0.1).validate().is_ok());
    }

    fn setup_1d(n: usize, a: usize) -> (ObservationGrid, Dictionary) {
        let g = ObservationGrid::frequency(n, 1.0).unwrap();
        let d = Dictionary::build_classical(&g, g.default_domain(), a).unwrap();
        (g, d)
    }

    #[test]
    fn omp_recovers_single_atom() {
        let (_, d) = setup_1d(64, 256);
        let gain = c(0.7, -0.2);
        let y: Vec<C64> = d.atom(100).iter().map(|z| z * gain).collect();
        let mut k = OpCounter::new();
        let res = omp(&y, &d, StoppingRule::FixedIterations(1), &mut k).unwrap();
        assert!(res.residual_norms[0] <= 1e-10);
        assert!((res.coefficients[0] - gain).norm() < 1e-12);
        assert_eq!(res.support[0].params, vec![d.params()[100]]);
        assert_eq!(k.selection_mults, 64 * 256);
        assert_eq!(res.mults.selection_mults, 64 * 256);
    }

    #[test]
    fn omp_recovers_three_separated_atoms() {
        let (_, d) = setup_1d(128, 512);
        // Main-lobe width 2/N = 8 atoms at 4× oversampling; keep ≥ 4 widths apart.
        let picks = [20usize, 200, 400];
        let gains = [c(1.0, 0.0), c(0.0, 0.8), c(-0.6, 0.3)];
        let mut y = vec![C64::default(); 128];
        for (&i, &g) in picks.iter().zip(&gains) {
            for (yi, a) in y.iter_mut().zip(d.atom(i)) {
                *yi += g * a;
            }
        }
        // Brute force: the true atoms are the three largest local maxima of
        // the matched-filter output.
        let corr: Vec<f64> = d.atoms().map(|a| linalg::dot_conj(a, &y).norm()).collect();
        let mut peaks: Vec<usize> = (1..corr.len() - 1)
            .filter(|&i| corr[i] > corr[i - 1] && corr[i] > corr[i + 1])
            .collect();
        peaks.sort_by(|&a, &b| corr[b].total_cmp(&corr[a]));
        let mut top = peaks[..3].to_vec();
        top.sort();
        assert_eq!(top, picks);

        let res = omp(
            &y,
            &d,
            StoppingRule::FixedIterations(3),
            &mut OpCounter::new(),
        )
        .unwrap();
        let mut got: Vec<f64> = res.support.iter().map(|s| s.params[0]).collect();
        got.sort_by(f64::total_cmp);
        let want: Vec<f64> = picks.iter().map(|&i| d.params()[i]).collect();
        assert_eq!(got, want);
        assert!(res.residual_norms[2] <= 1e-9 * linalg::norm(&y));
    }

    #[test]
    fn mp_equals_omp_for_one_atom() {
        let (_, d) = setup_1d(32, 128);
        let y: Vec<C64> = d.atom(7).iter().map(|z| z * c(2.0, 1.0)).collect();
        let a = mp(
            &y,
            &d,
            StoppingRule::FixedIterations(1),
            &mut OpCounter::new(),
        )
        .unwrap();
        let b = omp(
            &y,
            &d,
            StoppingRule::FixedIterations(1),
            &mut OpCounter::new(),
        )
        .unwrap();
        assert_eq!(a.support, b.support);
        assert!((a.coefficients[0] - b.coefficients[0]).norm() < 1e-12);
    }

    #[test]
    fn mp_exact_on_orthogonal_atoms() {
        // A = N puts atoms on an orthogonal (shifted DFT) grid.
        let (_, d) = setup_1d(32, 32);
        let mut y = vec![C64::default(); 32];
        for (i, g) in [(3usize, c(1.0, 0.0)), (17, c(0.0, -0.5))] {
            for (yi, a) in y.iter_mut().zip(d.atom(i)) {
                *yi += g * a;
            }
        }
        let res = mp(
            &y,
            &d,
            StoppingRule::FixedIterations(2),
            &mut OpCounter::new(),
        )
        .unwrap();
        assert!(res.residual_norms[1] < 1e-12);
        let err: f64 = res
            .estimate
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).norm())
            .sum();
        assert!(err < 1e-12);
    }

    #[test]
    fn mp_residual_never_below_omp() {
        let (_, d) = setup_1d(32, 256);
        for seed in 0..20 {
            let y = random_vec(32, 1000 + seed);
            let a = mp(
                &y,
                &d,
                StoppingRule::FixedIterations(4),
                &mut OpCounter::new(),
            )
            .unwrap();
            let b = omp(
                &y,
                &d,
                StoppingRule::FixedIterations(4),
                &mut OpCounter::new(),
            )
            .unwrap();
            // Compare OMP's refit on MP's support: LS is optimal for a given support.
            let cols: Vec<Vec<C64>> = a.support.iter().map(|s| s.atom.clone()).collect();
            let x = least_squares(&cols, &y).unwrap();
            let mut r = y.clone();
            for (col, xi) in cols.iter().zip(&x) {
                linalg::sub_scaled(&mut r, *xi, col);
            }
            assert!(linalg::norm(&a.residual) >= linalg::norm(&r) - 1e-12);
            assert!(
                *a.residual_norms.last().unwrap() >= *b.residual_norms.last().unwrap() - 1e-12
                    || a.support != b.support
            );
        }
    }

    #[test]
    fn homp_matches_omp_on_grid() {
        let (g, d) = setup_1d(64, 1024);
        let cfg = HSearchConfig::new(2, 10).unwrap();
        let y: Vec<C64> = d.atom(613).iter().map(|z| z * c(-1.0, 0.4)).collect();
        let a = homp(
            &y,
            &g,
            &g.default_domain(),
            &cfg,
            StoppingRule::FixedIterations(1),
            &mut OpCounter::new(),
        )
        .unwrap();
        let b = omp(
            &y,
            &d,
            StoppingRule::FixedIterations(1),
            &mut OpCounter::new(),
        )
        .unwrap();
        assert_eq!(a.support[0].params, b.support[0].params);
        for (x, z) in a.estimate.iter().zip(&b.estimate) {
            assert!((x - z).norm() < 1e-12);
        }
    }

    #[test]
    fn homp_selection_cost_ratio() {
        let (g, d) = setup_1d(256, 1024);
        let cfg = HSearchConfig::new(2, 10).unwrap();
        let y = random_vec(256, 8);
        let a = homp(
            &y,
            &g,
            &g.default_domain(),
            &cfg,
            StoppingRule::FixedIterations(1),
            &mut OpCounter::new(),
        )
        .unwrap();
        let b = omp(
            &y,
            &d,
            StoppingRule::FixedIterations(1),
            &mut OpCounter::new(),
        )
        .unwrap();
        assert_eq!(
            b.mults.selection_mults as f64 / a.mults.selection_mults as f64,
            51.2
        );
    }

    fn grids_3d(n: [usize; 3]) -> Vec<ObservationGrid> {
        vec![
            ObservationGrid::frequency(n[0], 1.0).unwrap(),
            ObservationGrid::space(n[1]).unwrap(),
            ObservationGrid::space(n[2]).unwrap(),
        ]
    }

    #[test]
    fn momp_recovers_on_grid_triple_and_counts() {
        let grids = grids_3d([8, 4, 2]);
        let sizes = [16usize, 8, 4];
        let dicts: Vec<Dictionary> = grids
            .iter()
            .zip(sizes)
            .map(|(g, a)| Dictionary::build_classical(g, g.default_domain(), a).unwrap())
            .collect();
        let truth = vec![
            dicts[0].params()[11],
            dicts[1].params()[2],
            dicts[2].params()[3],
        ];
        let h = synth_channel(&grids, &PathSet::single(c(0.5, 0.5), truth.clone())).unwrap();
        let mut k = OpCounter::new();
        let res = momp(&h, &dicts, StoppingRule::FixedIterations(1), &mut k).unwrap();
        assert_eq!(res.support[0].params, truth);
        assert_eq!(k.selection_mults, 16 * 64 + 8 * 8 + 4 * 2);
        assert!(res.residual_norms[0] < 1e-10 * linalg::norm(&h));
    }

    #[test]
    fn momp_with_unit_dims_is_omp() {
        let g = ObservationGrid::frequency(32, 1.0).unwrap();
        let one = ObservationGrid::space(1).unwrap();
        let d0 = Dictionary::build_classical(&g, g.default_domain(), 128).unwrap();
        let d1 = Dictionary::build_classical(&one, one.default_domain(), 1).unwrap();
        let y = random_vec(32, 21);
        let a = momp(
            &y,
            &[d0.clone(), d1.clone(), d1],
            StoppingRule::FixedIterations(3),
            &mut OpCounter::new(),
        )
        .unwrap();
        let b = omp(
            &y,
            &d0,
            StoppingRule::FixedIterations(3),
            &mut OpCounter::new(),
        )
        .unwrap();
        for (x, z) in a.support.iter().zip(&b.support) {
            assert_eq!(x.params[0], z.params[0]);
        }
        for (x, z) in a.estimate.iter().zip(&b.estimate) {
            assert!((x - z).norm() < 1e-12);
        }
    }

    #[test]
    fn mhomp_matches_momp_on_grid() {
        let grids = grids_3d([8, 4, 2]);
        let steps = [4usize, 3, 2];
        let domains: Vec<TargetDomain> = grids.iter().map(|g| g.default_domain()).collect();
        let dicts: Vec<Dictionary> = grids
            .iter()
            .zip(steps)
            .map(|(g, s)| Dictionary::build_classical(g, g.default_domain(), 1 << s).unwrap())
            .collect();
        let cfgs: Vec<HSearchConfig> = steps
            .iter()
            .map(|&s| HSearchConfig::new(2, s).unwrap())
            .collect();
        for (i, j, l) in [(0usize, 0usize, 0usize), (5, 7, 3), (15, 2, 1), (9, 4, 2)] {
            let truth = vec![
                dicts[0].params()[i],
                dicts[1].params()[j],
                dicts[2].params()[l],
            ];
            let h = synth_channel(&grids, &PathSet::single(c(1.0, -0.3), truth.clone())).unwrap();
            let a = mhomp(
                &h,
                &grids,
                &domains,
                &cfgs,
                StoppingRule::FixedIterations(1),
                &mut OpCounter::new(),
            )
            .unwrap();
            let b = momp(
                &h,
                &dicts,
                StoppingRule::FixedIterations(1),
                &mut OpCounter::new(),
            )
            .unwrap();
            assert_eq!(a.support[0].params, truth);
            assert_eq!(b.support[0].params, truth);
        }
    }

    #[test]
    fn mhomp_runs_k_iterations() {
        let grids = grids_3d([16, 8, 4]);
        let domains: Vec<TargetDomain> = grids.iter().map(|g| g.default_domain()).collect();
        let cfgs = vec![HSearchConfig::new(2, 6).unwrap(); 3];
        let paths = PathSet::new(vec![
            Path {
                gain: c(1.0, 0.0),
                params: vec![0.1, -0.5, 0.3],
            },
            Path {
                gain: c(0.0, 0.7),
                params: vec![0.6, 0.4, -0.7],
            },
            Path {
                gain: c(-0.5, 0.2),
                params: vec![0.85, 0.0, 0.9],
            },
        ])
        .unwrap();
        let h = synth_channel(&grids, &paths).unwrap();
        let res = mhomp(
            &h,
            &grids,
            &domains,
            &cfgs,
            StoppingRule::FixedIterations(3),
            &mut OpCounter::new(),
        )
        .unwrap();
        assert_eq!(res.support.len(), 3);
        assert!(matches!(
            mhomp(
                &h,
                &grids[..2],
                &domains,
                &cfgs,
                StoppingRule::FixedIterations(1),
                &mut OpCounter::new()
            ),
            Err(Error::ArityMismatch(_))
        ));
    }

    #[test]
    fn kronecker_omp_counts_full_product() {
        let grids = grids_3d([4, 2, 2]);
        let dicts: Vec<Dictionary> = grids
            .iter()
            .zip([8usize, 4, 2])
            .map(|(g, a)| Dictionary::build_classical(g, g.default_domain(), a).unwrap())
            .collect();
        let kd = KroneckerDictionary::new(dicts.clone()).unwrap();
        assert_eq!(kd.len(), 64);
        let truth = vec![
            dicts[0].params()[5],
            dicts[1].params()[1],
            dicts[2].params()[0],
        ];
        let h = synth_channel(&grids, &PathSet::single(c(1.0, 0.0), truth.clone())).unwrap();
        let mut k = OpCounter::new();
        let res = omp_kronecker(&h, &kd, StoppingRule::FixedIterations(1), &mut k).unwrap();
        assert_eq!(res.support[0].params, truth);
        assert_eq!(k.selection_mults, 16 * 64);
        assert_eq!(k.correlations, 64);
    }

    #[test]
    fn duplicate_selection_terminates() {
        // With A = 1 every selection returns the same atom.
        let (_, d) = setup_1d(16, 1);
        let y = random_vec(16, 5);
        let res = omp(
            &y,
            &d,
            StoppingRule::FixedIterations(10),
            &mut OpCounter::new(),
        )
        .unwrap();
        assert_eq!(res.support.len(), 1);
        assert_eq!(res.selections, 3);
        assert_eq!(res.residual_norms.len(), 3);
        assert_eq!(res.residual_norms[1], res.residual_norms[0]);
    }

    #[test]
    fn residual_threshold_stops_early() {
        let (_, d) = setup_1d(64, 256);
        let y: Vec<C64> = d
            .atom(3)
            .iter()
            .zip(d.atom(150))
            .map(|(a, b)| a + b * 0.5)
            .collect();
        let res = omp(
            &y,
            &d,
            StoppingRule::ResidualThreshold(1e-6),
            &mut OpCounter::new(),
        )
        .unwrap();
        assert_eq!(res.support.len(), 2);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (_, d) = setup_1d(16, 32);
        assert!(matches!(
            omp(
                &random_vec(15, 0),
                &d,
                StoppingRule::FixedIterations(1),
                &mut OpCounter::new()
            ),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn summary_serializes_pairs() {
        let (_, d) = setup_1d(8, 8);
        let y = d.atom(2).to_vec();
        let res = omp(
            &y,
            &d,
            StoppingRule::FixedIterations(1),
            &mut OpCounter::new(),
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&res.to_json().unwrap()).unwrap();
        assert_eq!(v["coefficients"][0].as_array().unwrap().len(), 2);
        assert_eq!(v["selection_mults"], 64);
        assert_eq!(v["support"][0][0], d.params()[2]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn omp_family_invariants(seed in any::<u64>(), iters in 1usize..8) {
            let (g, d) = setup_1d(48, 192);
            let y = random_vec(48, seed);
            let cfg = HSearchConfig::new(2, 6).unwrap();
            let runs = [
                omp(&y, &d, StoppingRule::FixedIterations(iters), &mut OpCounter::new()).unwrap(),
                homp(&y, &g, &g.default_domain(), &cfg, StoppingRule::FixedIterations(iters), &mut OpCounter::new()).unwrap(),
            ];
            let yn = linalg::norm(&y);
            for res in &runs {
                let mut prev = yn;
                for &r in &res.residual_norms {
                    prop_assert!(r <= prev + 1e-12 * yn);
                    prev = r;
                }
                for s in &res.support {
                    prop_assert!(linalg::dot_conj(&s.atom, &res.residual).norm() <= 1e-8 * yn);
                    prop_assert!((linalg::norm(&s.atom) - 1.0).abs() < 1e-12);
                }
                let direct: Vec<C64> = y.iter().zip(&res.residual).map(|(a, b)| a - b).collect();
                for (a, b) in direct.iter().zip(&res.estimate) {
                    prop_assert!((a - b).norm() < 1e-10 * yn);
                }
            }
        }
    }
}
