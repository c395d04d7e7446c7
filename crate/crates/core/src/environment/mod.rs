//! Finite realizations of marked simple point processes.
//!
//! A [`MarkedConfiguration`] is the restriction of a stationary marked point
//! process to an axis-aligned window. Two ground processes are supported:
//! a homogeneous Poisson process and a randomly shifted, site-percolated
//! copy of `Z^d`. Marks are i.i.d. from a [`MarkLaw`], independent of the
//! positions.

mod snapshot;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::network::ConductanceKernel;
use crate::rng::{derive_seed, rng_from_seed};

pub use snapshot::{read_snapshot, write_snapshot};

/// Axis-aligned half-open box `[lo, hi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let w = Window { lo, hi };
        w.validate()?;
        Ok(w)
    }

    /// The cube `[origin, origin + side)^d`.
    pub fn cube(dimension: usize, origin: f64, side: f64) -> Result<Self> {
        Window::new(vec![origin; dimension], vec![origin + side; dimension])
    }

    fn validate(&self) -> Result<()> {
        if self.lo.is_empty() || self.lo.len() != self.hi.len() {
            return Err(Error::EmptyWindow);
        }
        let ok = self
            .lo
            .iter()
            .zip(&self.hi)
            .all(|(a, b)| a.is_finite() && b.is_finite() && b > a);
        if ok {
            Ok(())
        } else {
            Err(Error::EmptyWindow)
        }
    }

    pub fn dimension(&self) -> usize {
        self.lo.len()
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dimension()).map(|k| self.extent(k)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v < *b)
    }

    pub fn translated(&self, shift: &[f64]) -> Window {
        Window {
            lo: self.lo.iter().zip(shift).map(|(a, s)| a + s).collect(),
            hi: self.hi.iter().zip(shift).map(|(a, s)| a + s).collect(),
        }
    }
}

/// Law of the energy marks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarkLaw {
    /// `c |E|^alpha dE` on `[-cutoff, cutoff]`.
    PowerLaw { alpha: f64, cutoff: f64 },
    PointMass { value: f64 },
}

impl MarkLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MarkLaw::PowerLaw { alpha, cutoff } => {
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    return Err(invalid(format!("mark exponent alpha={alpha} must be >= 0")));
                }
                if !(cutoff > 0.0 && cutoff.is_finite()) {
                    return Err(invalid(format!("mark cutoff A={cutoff} must be > 0")));
                }
                Ok(())
            }
            MarkLaw::PointMass { value } if value.is_finite() => Ok(()),
            MarkLaw::PointMass { value } => Err(invalid(format!("point mass at {value}"))),
        }
    }

    /// The constant `c` making `c |E|^alpha` a probability density on `[-A, A]`.
    pub fn normalization(&self) -> Option<f64> {
        match *self {
            MarkLaw::PowerLaw { alpha, cutoff } => {
                Some((alpha + 1.0) / (2.0 * cutoff.powf(alpha + 1.0)))
            }
            MarkLaw::PointMass { .. } => None,
        }
    }

    /// Exponent of the power law; a point mass behaves like `alpha = 0` in the
    /// Mott exponent bookkeeping.
    pub fn alpha(&self) -> f64 {
        match *self {
            MarkLaw::PowerLaw { alpha, .. } => alpha,
            MarkLaw::PointMass { .. } => 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MarkLaw::PowerLaw { alpha, cutoff } => sample_power_law_mark(alpha, cutoff, rng),
            MarkLaw::PointMass { value } => value,
        }
    }
}

/// Inverse-CDF draw from `c |E|^alpha dE` on `[-cutoff, cutoff]`.
pub fn sample_power_law_mark<R: Rng + ?Sized>(alpha: f64, cutoff: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let magnitude = cutoff * u.powf(1.0 / (alpha + 1.0));
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessKind {
    /// Homogeneous Poisson process with `intensity` points per unit volume.
    Poisson { intensity: f64 },
    /// `lo + k + U`, `k` in `N^d`, each site kept with probability
    /// `retention`. `U` is uniform on `[0,1)^d` unless `shift` pins it.
    PerturbedLattice {
        retention: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<Vec<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    pub dimension: usize,
    pub process: ProcessKind,
    pub marks: MarkLaw,
}

impl ProcessSpec {
    pub fn poisson(dimension: usize, intensity: f64, marks: MarkLaw) -> Self {
        ProcessSpec { dimension, process: ProcessKind::Poisson { intensity }, marks }
    }

    pub fn lattice(dimension: usize, retention: f64, shift: Option<Vec<f64>>, marks: MarkLaw) -> Self {
        ProcessSpec {
            dimension,
            process: ProcessKind::PerturbedLattice { retention, shift },
            marks,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(invalid("dimension must be >= 1"));
        }
        self.marks.validate()?;
        match &self.process {
            ProcessKind::Poisson { intensity } => {
                if !(*intensity > 0.0 && intensity.is_finite()) {
                    return Err(invalid(format!("intensity {intensity} must be positive")));
                }
            }
            ProcessKind::PerturbedLattice { retention, shift } => {
                if !(*retention > 0.0 && *retention <= 1.0) {
                    return Err(invalid(format!("retention {retention} must lie in (0, 1]")));
                }
                if let Some(u) = shift {
                    if u.len() != self.dimension || u.iter().any(|v| !(0.0..1.0).contains(v)) {
                        return Err(invalid("lattice shift must have d entries in [0, 1)"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Mean number of points per unit volume.
    pub fn intensity(&self) -> f64 {
        match self.process {
            ProcessKind::Poisson { intensity } => intensity,
            ProcessKind::PerturbedLattice { retention, .. } => retention,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    #[serde(rename = "x")]
    pub position: Vec<f64>,
    #[serde(rename = "E")]
    pub mark: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkedConfiguration {
    pub dimension: usize,
    pub window: Window,
    pub seed: u64,
    pub points: Vec<MarkedPoint>,
}

impl MarkedConfiguration {
    /// Checks the window/position invariants and simplicity.
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        if self.window.dimension() != self.dimension {
            return Err(invalid("window dimension does not match configuration"));
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.position.len() != self.dimension || !self.window.contains(&p.position) {
                return Err(invalid(format!("point {i} lies outside the window")));
            }
        }
        check_simple(&self.points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn check_simple(points: &[MarkedPoint]) -> Result<()> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    let cmp = |a: &usize, b: &usize| {
        let (pa, pb) = (&points[*a].position, &points[*b].position);
        pa.iter()
            .zip(pb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    order.sort_unstable_by(cmp);
    for w in order.windows(2) {
        if points[w[0]].position == points[w[1]].position {
            return Err(Error::DuplicatePosition(w[0].max(w[1])));
        }
    }
    Ok(())
}

/// Draws a realization of `spec` inside `window`. Pure in `(spec, window, seed)`.
pub fn sample_configuration(spec: &ProcessSpec, window: &Window, seed: u64) -> Result<MarkedConfiguration> {
    window.validate()?;
    spec.validate()?;
    let d = spec.dimension;
    if window.dimension() != d {
        return Err(invalid(format!(
            "window has dimension {}, process has {d}",
            window.dimension()
        )));
    }
    let mut pos_rng = rng_from_seed(derive_seed(seed, 0));
    let mut mark_rng = rng_from_seed(derive_seed(seed, 1));

    let positions: Vec<Vec<f64>> = match &spec.process {
        ProcessKind::Poisson { intensity } => {
            let mean = intensity * window.volume();
            let count = Poisson::new(mean)
                .map_err(|e| invalid(format!("poisson mean {mean}: {e}")))?
                .sample(&mut pos_rng) as usize;
            (0..count)
                .map(|_| {
                    (0..d)
                        .map(|k| {
                            let x = window.lo[k] + window.extent(k) * pos_rng.random::<f64>();
                            // rounding can land exactly on hi
                            if x < window.hi[k] {
                                x
                            } else {
                                window.lo[k]
                            }
                        })
                        .collect()
                })
                .collect()
        }
        ProcessKind::PerturbedLattice { retention, shift } => {
            let u: Vec<f64> = match shift {
                Some(u) => u.clone(),
                None => (0..d).map(|_| pos_rng.random::<f64>()).collect(),
            };
            let counts: Vec<usize> = (0..d)
                .map(|k| {
                    let span = window.extent(k) - u[k];
                    if span > 0.0 {
                        span.ceil() as usize
                    } else {
                        0
                    }
                })
                .collect();
            let total: usize = counts.iter().product();
            let mut out = Vec::new();
            let mut idx = vec![0usize; d];
            for _ in 0..total {
                let keep = *retention >= 1.0 || pos_rng.random::<f64>() < *retention;
                let x: Vec<f64> = (0..d).map(|k| window.lo[k] + idx[k] as f64 + u[k]).collect();
                if keep && window.contains(&x) {
                    out.push(x);
                }
                for k in (0..d).rev() {
                    idx[k] += 1;
                    if idx[k] < counts[k] {
                        break;
                    }
                    idx[k] = 0;
                }
            }
            out
        }
    };

    let points: Vec<MarkedPoint> = positions
        .into_iter()
        .map(|position| MarkedPoint { position, mark: spec.marks.sample(&mut mark_rng) })
        .collect();
    check_simple(&points)?;
    Ok(MarkedConfiguration { dimension: d, window: window.clone(), seed, points })
}

/// Number of points per unit volume of the window.
pub fn empirical_intensity(config: &MarkedConfiguration) -> f64 {
    config.points.len() as f64 / config.window.volume()
}

/// Palm-average estimate of `E_0[lambda_k]`: the mean over points of
/// `sum_{j != i} c(x_i, x_j) |x_j - x_i|^k`.
pub fn moment_diagnostics(config: &MarkedConfiguration, kernel: &ConductanceKernel, k: i32) -> f64 {
    let pts = &config.points;
    if pts.is_empty() {
        return 0.0;
    }
    let per_point: Vec<f64> = pts
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut acc = 0.0;
            for (j, q) in pts.iter().enumerate() {
                if i == j {
                    continue;
                }
                let c = kernel.conductance(&p.position, &q.position, p.mark, q.mark);
                if c > 0.0 {
                    let r = crate::network::distance(&p.position, &q.position);
                    acc += c * r.powi(k);
                }
            }
            acc
        })
        .collect();
    per_point.iter().sum::<f64>() / pts.len() as f64
}
