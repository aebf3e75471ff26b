//! Observation grids, atomic signals, multipath synthesis and the noisy
//! observation model `y = h + n`.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::C64;

/// Stream used for path parameters and gains of a trial.
pub const PARAM_STREAM: u64 = 0;
/// Stream used for the additive noise of a trial.
pub const NOISE_STREAM: u64 = 1;

/// Portable seeded generator. A trial with seed `s` draws its channel from
/// stream [`PARAM_STREAM`] and its noise from stream [`NOISE_STREAM`] of the
/// same ChaCha8 key, so the two never overlap.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    /// Subcarrier frequencies in Hz, paired with delays in seconds.
    Frequency,
    /// Antenna positions in wavelengths, paired with `cos θ`.
    Space,
}

/// Serializable description of a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: GridKind,
    pub start: f64,
    pub spacing: f64,
    pub count: usize,
}

/// Uniformly spaced sensor positions `γ` along one physical dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationGrid {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ObservationGrid {
    pub fn uniform(kind: GridKind, start: f64, spacing: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidGrid("grid needs at least one sensor".into()));
        }
        if !(spacing.is_finite() && spacing > 0.0) || !start.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "spacing must be finite and positive, got {spacing}"
            )));
        }
        let values = (0..count).map(|n| start + n as f64 * spacing).collect();
        Ok(Self {
            spec: GridSpec {
                kind,
                start,
                spacing,
                count,
            },
            values,
        })
    }

    /// Baseband pilot grid `0, Δf, …, (N−1)Δf`.
    pub fn frequency(count: usize, spacing_hz: f64) -> Result<Self> {
        Self::uniform(GridKind::Frequency, 0.0, spacing_hz, count)
    }

    /// Half-wavelength uniform linear array, positions `n/2` in wavelengths.
    pub fn space(count: usize) -> Result<Self> {
        Self::uniform(GridKind::Space, 0.0, 0.5, count)
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self> {
        Self::uniform(spec.kind, spec.start, spec.spacing, spec.count)
    }

    /// Build from explicit positions, checking they are strictly increasing
    /// and uniform to 1e-12 relative.
    pub fn from_values(kind: GridKind, values: Vec<f64>) -> Result<Self> {
        match values.len() {
            0 => return Err(Error::InvalidGrid("grid needs at least one sensor".into())),
            1 => return Self::uniform(kind, values[0], 1.0, 1),
            _ => {}
        }
        let spacing = (values[values.len() - 1] - values[0]) / (values.len() - 1) as f64;
        if !(spacing > 0.0) {
            return Err(Error::InvalidGrid(
                "values must be strictly increasing".into(),
            ));
        }
        for w in values.windows(2) {
            let step = w[1] - w[0];
            if !(step > 0.0) || ((step - spacing) / spacing).abs() > 1e-12 {
                return Err(Error::InvalidGrid(format!(
                    "non-uniform step {step} (expected {spacing})"
                )));
            }
        }
        Ok(Self {
            spec: GridSpec {
                kind,
                start: values[0],
                spacing,
                count: values.len(),
            },
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spec.spacing
    }

    pub fn kind(&self) -> GridKind {
        self.spec.kind
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    /// Center of the aperture, `(γ_1 + γ_N)/2`.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.values[0] + self.values[self.values.len() - 1])
    }

    /// Unambiguous target period `1/Δγ`.
    pub fn period(&self) -> f64 {
        1.0 / self.spec.spacing
    }

    /// `[0, 1/Δγ]` for frequency grids, `[−1, 1]` (cos θ) for spatial grids.
    pub fn default_domain(&self) -> TargetDomain {
        match self.spec.kind {
            GridKind::Frequency => TargetDomain {
                u_min: 0.0,
                u_max: self.period(),
            },
            GridKind::Space => TargetDomain {
                u_min: -1.0,
                u_max: 1.0,
            },
        }
    }
}

/// Closed interval `[u_min, u_max]` of the target parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct TargetDomain {
    u_min: f64,
    u_max: f64,
}

impl TargetDomain {
    pub fn new(u_min: f64, u_max: f64) -> Result<Self> {
        if !(u_min.is_finite() && u_max.is_finite() && u_max > u_min) {
            return Err(Error::EmptyDomain { u_min, u_max });
        }
        Ok(Self { u_min, u_max })
    }

    pub fn u_min(&self) -> f64 {
        self.u_min
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn contains(&self, u: f64) -> bool {
        u >= self.u_min && u <= self.u_max
    }

    /// Center of bin `index` when the domain is split into `bins` equal bins.
    pub fn bin_center(&self, index: u64, bins: u64) -> f64 {
        self.u_min + (index as f64 + 0.5) * (self.width() / bins as f64)
    }
}

impl TryFrom<(f64, f64)> for TargetDomain {
    type Error = Error;

    fn try_from((lo, hi): (f64, f64)) -> Result<Self> {
        Self::new(lo, hi)
    }
}

impl From<TargetDomain> for (f64, f64) {
    fn from(d: TargetDomain) -> Self {
        (d.u_min, d.u_max)
    }
}

/// One propagation path: complex gain and one target parameter per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub gain: C64,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Path>", into = "Vec<Path>")]
pub struct PathSet {
    paths: Vec<Path>,
}

impl PathSet {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        let Some(first) = paths.first() else {
            return Err(Error::EmptyPathSet);
        };
        let arity = first.params.len();
        if let Some(p) = paths.iter().find(|p| p.params.len() != arity) {
            return Err(Error::DimensionMismatch {
                expected: arity,
                found: p.params.len(),
            });
        }
        Ok(Self { paths })
    }

    pub fn single(gain: C64, params: Vec<f64>) -> Self {
        Self {
            paths: vec![Path { gain, params }],
        }
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Multiply every gain by `alpha`.
    pub fn scaled(&self, alpha: C64) -> Self {
        Self {
            paths: self
                .paths
                .iter()
                .map(|p| Path {
                    gain: p.gain * alpha,
                    params: p.params.clone(),
                })
                .collect(),
        }
    }

    /// True when every parameter lies in its dimension's domain.
    pub fn within(&self, domains: &[TargetDomain]) -> bool {
        self.paths.iter().all(|p| {
            p.params.len() == domains.len()
                && p.params.iter().zip(domains).all(|(&u, d)| d.contains(u))
        })
    }
}

impl TryFrom<Vec<Path>> for PathSet {
    type Error = Error;

    fn try_from(paths: Vec<Path>) -> Result<Self> {
        Self::new(paths)
    }
}

impl From<PathSet> for Vec<Path> {
    fn from(p: PathSet) -> Self {
        p.paths
    }
}

/// Noisy measurement of a channel.
#[derive(Debug, Clone)]
pub struct Observation {
    pub y: Vec<C64>,
    pub sigma2: f64,
    pub true_channel: Option<Vec<C64>>,
    pub seed: u64,
}

/// `e(u)_n = exp(−j2πγ_n u)`.
pub fn atomic_signal(grid: &ObservationGrid, u: f64) -> Vec<C64> {
    grid.values()
        .iter()
        .map(|&g| C64::from_polar(1.0, -2.0 * PI * g * u))
        .collect()
}

/// `Σ_k α_k · (⊗_d e_d(u_{k,d}))`, grids in Kronecker order (slowest first).
pub fn synth_channel(grids: &[ObservationGrid], paths: &PathSet) -> Result<Vec<C64>> {
    let total: usize = grids.iter().map(ObservationGrid::len).product();
    let mut h = vec![C64::new(0.0, 0.0); total];
    for path in paths.paths() {
        if path.params.len() != grids.len() {
            return Err(Error::DimensionMismatch {
                expected: grids.len(),
                found: path.params.len(),
            });
        }
        let factors: Vec<Vec<C64>> = grids
            .iter()
            .zip(&path.params)
            .map(|(g, &u)| atomic_signal(g, u))
            .collect();
        let atom = linalg::kron_all(&factors);
        for (hi, ai) in h.iter_mut().zip(&atom) {
            *hi += path.gain * ai;
        }
    }
    Ok(h)
}

/// Add circularly-symmetric Gaussian noise so that `‖h‖²/(Nσ²)` equals the
/// target SNR. `f64::INFINITY` yields a noiseless observation.
pub fn add_noise(h: &[C64], target_snr_db: f64, rng_seed: u64) -> Result<Observation> {
    let energy = linalg::norm_sqr(h);
    if energy == 0.0 || h.is_empty() {
        return Err(Error::ZeroChannel);
    }
    if target_snr_db == f64::INFINITY {
        return Ok(Observation {
            y: h.to_vec(),
            sigma2: 0.0,
            true_channel: Some(h.to_vec()),
            seed: rng_seed,
        });
    }
    let sigma2 = energy / (h.len() as f64 * 10f64.powf(target_snr_db / 10.0));
    let mut rng = seeded_rng(rng_seed, NOISE_STREAM);
    let y = h
        .iter()
        .map(|&x| x + complex_gaussian(&mut rng, sigma2))
        .collect();
    Ok(Observation {
        y,
        sigma2,
        true_channel: Some(h.to_vec()),
        seed: rng_seed,
    })
}

/// Linear SNR `‖h‖²/(Nσ²)`.
pub fn measure_snr(h: &[C64], sigma2: f64) -> Result<f64> {
    if sigma2 == 0.0 {
        return Err(Error::ZeroNoise);
    }
    Ok(linalg::norm_sqr(h) / (h.len() as f64 * sigma2))
}
