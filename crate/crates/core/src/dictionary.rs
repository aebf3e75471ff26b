//! Classical Fourier dictionaries and sinc-modulated meta-atoms.
//!
//! The response of an atom `a` to an atomic signal is the windowed discrete
//! Fourier sum `r(u) = Σ_n conj(a_n) e^{−j2πγ_n u}`. Modulating an exponential
//! atom by `sinc(L·γ)` convolves that response with a rectangle of width `L`,
//! so a single meta-atom answers for a whole interval of the target domain.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg;
use crate::opcount::OpCounter;
use crate::signal_model::{atomic_signal, ObservationGrid, TargetDomain};
use crate::C64;

/// Normalized sinc, `sin(πx)/(πx)` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Unit-norm exponential atoms on bin centers `u_min + (i + ½)·Δu/A`.
#[derive(Debug, Clone)]
pub struct Dictionary {
    /// Column-major `N × A`.
    atoms: Vec<C64>,
    params: Vec<f64>,
    grid: ObservationGrid,
    domain: TargetDomain,
}

impl Dictionary {
    pub fn build_classical(
        grid: &ObservationGrid,
        domain: TargetDomain,
        size: usize,
    ) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyDictionary);
        }
        let scale = 1.0 / (grid.len() as f64).sqrt();
        let params: Vec<f64> = (0..size as u64)
            .map(|i| domain.bin_center(i, size as u64))
            .collect();
        let mut atoms = Vec::with_capacity(grid.len() * size);
        for &u in &params {
            atoms.extend(atomic_signal(grid, u).into_iter().map(|z| z * scale));
        }
        Ok(Self {
            atoms,
            params,
            grid: grid.clone(),
            domain,
        })
    }

    /// Number of atoms `A`.
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Atom length `N`.
    pub fn signal_len(&self) -> usize {
        self.grid.len()
    }

    pub fn atom(&self, index: usize) -> &[C64] {
        let n = self.grid.len();
        &self.atoms[index * n..(index + 1) * n]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn grid(&self) -> &ObservationGrid {
        &self.grid
    }

    pub fn domain(&self) -> TargetDomain {
        self.domain
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[C64]> {
        self.atoms.chunks_exact(self.grid.len())
    }

    /// Exhaustive `argmax_i |⟨a_i, ε⟩|`, first index on ties.
    pub fn select(&self, residual: &[C64], counter: &mut OpCounter) -> Result<(usize, C64)> {
        if residual.len() != self.signal_len() {
            return Err(Error::DimensionMismatch {
                expected: self.signal_len(),
                found: residual.len(),
            });
        }
        let mut best = (0, C64::new(0.0, 0.0));
        let mut best_mag = f64::NEG_INFINITY;
        for (i, atom) in self.atoms().enumerate() {
            let c = linalg::dot_conj(atom, residual);
            counter.correlation(atom.len());
            let mag = c.norm_sqr();
            if mag > best_mag {
                best_mag = mag;
                best = (i, c);
            }
        }
        Ok(best)
    }
}

/// `aᴴ e(u)`.
pub fn response(atom: &[C64], grid: &ObservationGrid, u: f64) -> Result<C64> {
    if atom.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: atom.len(),
        });
    }
    Ok(atom
        .iter()
        .zip(grid.values())
        .map(|(a, &g)| a.conj() * C64::from_polar(1.0, -2.0 * PI * g * u))
        .sum())
}

/// `|aᴴ e(u)|` at each sample.
pub fn response_profile(
    atom: &[C64],
    grid: &ObservationGrid,
    u_samples: &[f64],
) -> Result<Vec<f64>> {
    u_samples
        .iter()
        .map(|&u| response(atom, grid, u).map(|r| r.norm()))
        .collect()
}

/// Write a `u,magnitude` CSV of a response profile.
pub fn write_profile_csv<W: Write>(out: W, u_samples: &[f64], magnitudes: &[f64]) -> Result<()> {
    if u_samples.len() != magnitudes.len() {
        return Err(Error::LengthMismatch {
            left: u_samples.len(),
            right: magnitudes.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u", "magnitude"])?;
    for (u, m) in u_samples.iter().zip(magnitudes) {
        w.write_record([u.to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Real sinc window `sinc(L·(γ_n − γ_mid))` shared by every meta-atom of
/// width `L` on this grid, and its ℓ2 norm.
///
/// The window is centered on the aperture midpoint. A sinc truncated
/// one-sidedly (grid starting at γ = 0) picks up a logarithmic quadrature
/// term whose peaks sit on the interval edges and destroy the flat response;
/// on a grid symmetric about zero the two conventions coincide.
fn sinc_window(grid: &ObservationGrid, width: f64) -> Result<(Vec<f64>, f64)> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::InvalidSearch(format!(
            "meta-atom width must be positive, got {width}"
        )));
    }
    let mid = grid.midpoint();
    let window: Vec<f64> = grid
        .values()
        .iter()
        .map(|&g| sinc(width * (g - mid)))
        .collect();
    let norm = window.iter().map(|w| w * w).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok((window, norm))
}

/// Unit-norm meta-atom `e(center) ⊙ sinc(L·(γ − γ_mid))`.
pub fn meta_atom(grid: &ObservationGrid, center: f64, width: f64) -> Result<Vec<C64>> {
    let (window, norm) = sinc_window(grid, width)?;
    Ok(modulate(grid, center, &window, 1.0 / norm))
}

fn modulate(grid: &ObservationGrid, center: f64, window: &[f64], scale: f64) -> Vec<C64> {
    grid.values()
        .iter()
        .zip(window)
        .map(|(&g, &w)| C64::from_polar(w * scale, -2.0 * PI * g * center))
        .collect()
}

/// The `n` meta-atoms of one hierarchical step.
#[derive(Debug, Clone)]
pub struct MetaAtomSet {
    /// Row `i` is meta-atom `i`, each of length `N`.
    atoms: Vec<C64>,
    centers: Vec<f64>,
    width: f64,
    signal_len: usize,
}

impl MetaAtomSet {
    /// Meta-atoms of width `width` at the given centers. Charges `N` mults per
    /// meta-atom to the construction tally.
    pub fn build(
        grid: &ObservationGrid,
        centers: &[f64],
        width: f64,
        counter: &mut OpCounter,
    ) -> Result<Self> {
        let (window, norm) = sinc_window(grid, width)?;
        let scale = 1.0 / norm;
        let mut atoms = Vec::with_capacity(centers.len() * grid.len());
        for &c in centers {
            atoms.extend(modulate(grid, c, &window, scale));
            counter.construction(grid.len());
        }
        Ok(Self {
            atoms,
            centers: centers.to_vec(),
            width,
            signal_len: grid.len(),
        })
    }

    /// `n` meta-atoms of width `(hi − lo)/n` tiling `[lo, hi]`.
    pub fn tiling(
        grid: &ObservationGrid,
        lo: f64,
        hi: f64,
        n: usize,
        counter: &mut OpCounter,
    ) -> Result<Self> {
        let domain = TargetDomain::new(lo, hi)?;
        let centers: Vec<f64> = (0..n as u64)
            .map(|k| domain.bin_center(k, n as u64))
            .collect();
        Self::build(grid, &centers, domain.width() / n as f64, counter)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[C64] {
        &self.atoms[i * self.signal_len..(i + 1) * self.signal_len]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[C64]> {
        self.atoms.chunks_exact(self.signal_len)
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Index of the half-open bin `[u_i − L/2, u_i + L/2)` containing `u`.
    pub fn bin_of(&self, u: f64) -> Option<usize> {
        let half = self.width / 2.0;
        self.centers
            .iter()
            .position(|&c| u >= c - half && u < c + half)
    }
}
