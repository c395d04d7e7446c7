//! Effective diffusion matrix from the corrector variational problem.
//!
//! On a periodized environment with `N` nodes the quadratic form
//!
//! ```text
//! F_a(f) = 1/(2N) sum_i sum_j c_ij (a . z_ij - (f_j - f_i))^2
//! ```
//!
//! is minimized over node functions `f`; `a . D a` is the minimum. The
//! minimizer solves the weighted-Laplacian system `L f = -b`,
//! `b_i = sum_j c_ij a . z_ij`, which is singular along constants; it is
//! solved by projected, Jacobi-preconditioned conjugate gradients with the
//! mean-zero gauge. Off-diagonal entries come from polarization.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{sample_configuration, MarkedConfiguration, ProcessSpec, Window};
use crate::error::{invalid, Error, Result};
use crate::network::ConductanceKernel;
use crate::rng::derive_seed;
use crate::stats::{mean_and_stderr, DiffusionEstimate};

/// `dx` reduced to the periodic representative of smallest modulus.
#[inline]
pub fn minimum_image(dx: f64, side: f64) -> f64 {
    dx - side * (dx / side).round()
}

/// Marked configuration on the torus `[lo, lo + L)^d` with its retained
/// filaments in compressed rows; every undirected filament is stored in
/// both orientations with `z_ji = -z_ij` and `c_ji = c_ij`.
#[derive(Clone, Debug)]
pub struct PeriodicEnvironment {
    pub dimension: usize,
    pub side: f64,
    pub cutoff: f64,
    pub positions: Vec<Vec<f64>>,
    pub marks: Vec<f64>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    displacements: Vec<f64>,
    weights: Vec<f64>,
}

/// Undirected filament `i -- j` with displacement `z` from `i` to `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicEdge {
    pub i: usize,
    pub j: usize,
    pub z: Vec<f64>,
    pub weight: f64,
}

impl PeriodicEnvironment {
    /// Periodizes `config`, whose window must be a cube, keeping filaments of
    /// minimum-image length at most `cutoff <= L/2`.
    pub fn build(config: &MarkedConfiguration, kernel: &ConductanceKernel, cutoff: f64) -> Result<Self> {
        kernel.validate()?;
        let d = config.dimension;
        let w = &config.window;
        let side = w.extent(0);
        if (1..d).any(|k| w.extent(k) != side) {
            return Err(invalid("periodic environment needs a cubic window"));
        }
        if !(cutoff > 0.0 && cutoff <= 0.5 * side) {
            return Err(invalid(format!("cutoff {cutoff} must lie in (0, L/2 = {}]", 0.5 * side)));
        }
        let positions: Vec<Vec<f64>> = config
            .points
            .iter()
            .map(|p| p.position.iter().zip(&w.lo).map(|(x, lo)| x - lo).collect())
            .collect();
        let marks: Vec<f64> = config.points.iter().map(|p| p.mark).collect();
        let n = positions.len();

        let pair = |i: usize, j: usize| -> Option<PeriodicEdge> {
            let z: Vec<f64> = (0..d)
                .map(|k| minimum_image(positions[j][k] - positions[i][k], side))
                .collect();
            let r2: f64 = z.iter().map(|v| v * v).sum();
            if r2 > cutoff * cutoff {
                return None;
            }
            let origin = vec![0.0; d];
            let c = kernel.conductance(&origin, &z, marks[i], marks[j]);
            (c > 0.0 && c.is_finite()).then_some(PeriodicEdge { i, j, z, weight: c })
        };

        let cells_per_axis = (side / cutoff).floor() as usize;
        let edges: Vec<PeriodicEdge> = if cells_per_axis >= 3 && d <= 3 {
            let cell = side / cells_per_axis as f64;
            let key = |x: &[f64]| -> Vec<usize> {
                x.iter().map(|v| ((v / cell).floor() as usize).min(cells_per_axis - 1)).collect()
            };
            let flat = |k: &[usize]| k.iter().fold(0usize, |acc, c| acc * cells_per_axis + c);
            let mut buckets = vec![Vec::new(); cells_per_axis.pow(d as u32)];
            for (i, x) in positions.iter().enumerate() {
                buckets[flat(&key(x))].push(i);
            }
            let offsets: Vec<Vec<i64>> = (0..3usize.pow(d as u32))
                .map(|m| (0..d).map(|k| ((m / 3usize.pow(k as u32)) % 3) as i64 - 1).collect())
                .collect();
            (0..n)
                .into_par_iter()
                .flat_map_iter(|i| {
                    let base = key(&positions[i]);
                    let mut found = Vec::new();
                    for off in &offsets {
                        let cellk: Vec<usize> = base
                            .iter()
                            .zip(off)
                            .map(|(b, o)| (*b as i64 + o).rem_euclid(cells_per_axis as i64) as usize)
                            .collect();
                        for &j in &buckets[flat(&cellk)] {
                            if j > i {
                                found.extend(pair(i, j));
                            }
                        }
                    }
                    found.sort_by_key(|e| e.j);
                    found
                })
                .collect()
        } else {
            (0..n)
                .into_par_iter()
                .flat_map_iter(|i| ((i + 1)..n).filter_map(move |j| pair(i, j)))
                .collect()
        };
        let mut env = Self::from_edges(d, side, positions, marks, &edges)?;
        env.cutoff = cutoff;
        Ok(env)
    }

    /// Environment from an explicit undirected edge list.
    pub fn from_edges(
        dimension: usize,
        side: f64,
        positions: Vec<Vec<f64>>,
        marks: Vec<f64>,
        edges: &[PeriodicEdge],
    ) -> Result<Self> {
        let n = positions.len();
        if marks.len() != n {
            return Err(invalid("one mark per node required"));
        }
        let mut counts = vec![0usize; n + 1];
        for e in edges {
            if e.i == e.j || e.i >= n || e.j >= n || e.z.len() != dimension {
                return Err(invalid(format!("bad periodic edge ({}, {})", e.i, e.j)));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(invalid(format!("edge ({}, {}) has weight {}", e.i, e.j, e.weight)));
            }
            counts[e.i + 1] += 1;
            counts[e.j + 1] += 1;
        }
        for k in 0..n {
            counts[k + 1] += counts[k];
        }
        let offsets = counts;
        let total = offsets[n];
        let mut fill = offsets.clone();
        let mut targets = vec![0usize; total];
        let mut displacements = vec![0.0; total * dimension];
        let mut weights = vec![0.0; total];
        for e in edges {
            for (a, b, sign) in [(e.i, e.j, 1.0), (e.j, e.i, -1.0)] {
                let slot = fill[a];
                targets[slot] = b;
                weights[slot] = e.weight;
                for (k, zk) in e.z.iter().enumerate() {
                    displacements[slot * dimension + k] = sign * zk;
                }
                fill[a] += 1;
            }
        }
        let cutoff = edges
            .iter()
            .map(|e| e.z.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Ok(PeriodicEnvironment {
            dimension,
            side,
            cutoff,
            positions,
            marks,
            offsets,
            targets,
            displacements,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dimension as i32)
    }

    /// Nodes per unit volume.
    pub fn intensity(&self) -> f64 {
        self.len() as f64 / self.volume()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    /// Outgoing filaments of `i` as `(j, z_ij, c_ij)`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, &[f64], f64)> + '_ {
        let d = self.dimension;
        (self.offsets[i]..self.offsets[i + 1])
            .map(move |s| (self.targets[s], &self.displacements[s * d..(s + 1) * d], self.weights[s]))
    }

    /// The `slot`-th outgoing filament of `i`, in [`neighbors`](Self::neighbors) order.
    pub fn neighbor(&self, i: usize, slot: usize) -> (usize, &[f64], f64) {
        let s = self.offsets[i] + slot;
        debug_assert!(s < self.offsets[i + 1]);
        let d = self.dimension;
        (self.targets[s], &self.displacements[s * d..(s + 1) * d], self.weights[s])
    }

    pub fn total_rate(&self, i: usize) -> f64 {
        self.weights[self.offsets[i]..self.offsets[i + 1]].iter().sum()
    }

    /// Undirected filaments, each once with `i < j`.
    pub fn edges(&self) -> Vec<PeriodicEdge> {
        (0..self.len())
            .flat_map(|i| {
                self.neighbors(i)
                    .filter(move |(j, _, _)| *j > i)
                    .map(move |(j, z, c)| PeriodicEdge { i, j, z: z.to_vec(), weight: c })
            })
            .collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.weights.iter_mut().for_each(|w| *w *= s);
        out
    }

    pub fn is_connected(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for (j, _, _) in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == n
    }
}

fn project(a: &[f64], z: &[f64]) -> f64 {
    a.iter().zip(z).map(|(x, y)| x * y).sum()
}

/// `F_a(f)`.
pub fn corrector_energy(env: &PeriodicEnvironment, a: &[f64], f: &[f64]) -> f64 {
    let n = env.len();
    let total: f64 = (0..n)
        .map(|i| {
            env.neighbors(i)
                .map(|(j, z, c)| {
                    let g = project(a, z) - (f[j] - f[i]);
                    c * g * g
                })
                .sum::<f64>()
        })
        .sum();
    total / (2.0 * n as f64)
}

/// Gradient of `F_a` at `f = 0`, `(2/N) b`. The first-order condition reads
/// `(2/N) L f = -gradient`.
pub fn corrector_gradient_at_zero(env: &PeriodicEnvironment, a: &[f64]) -> Vec<f64> {
    let scale = 2.0 / env.len() as f64;
    (0..env.len())
        .map(|i| scale * env.neighbors(i).map(|(_, z, c)| c * project(a, z)).sum::<f64>())
        .collect()
}

#[derive(Clone, Debug)]
pub struct CorrectorSolution {
    pub direction: Vec<f64>,
    /// Mean-zero corrector values.
    pub f: Vec<f64>,
    pub d_aa: f64,
    /// `||L f + b|| / ||b||`.
    pub residual: f64,
    pub iterations: usize,
}

fn laplacian_apply(env: &PeriodicEnvironment, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().enumerate().for_each(|(i, yi)| {
        *yi = env.neighbors(i).map(|(j, _, c)| c * (x[i] - x[j])).sum();
    });
}

fn remove_mean(x: &mut [f64]) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `F_a` and returns `a . D a = F_a(f*)`.
pub fn solve_corrector(env: &PeriodicEnvironment, a: &[f64], tol: f64) -> Result<CorrectorSolution> {
    if a.len() != env.dimension {
        return Err(invalid("direction has wrong dimension"));
    }
    if !env.is_connected() {
        return Err(Error::DisconnectedEnvironment);
    }
    let n = env.len();
    let max_iter = 20 * n + 100;
    // rhs of L f = -b
    let mut rhs: Vec<f64> = (0..n)
        .map(|i| -env.neighbors(i).map(|(_, z, c)| c * project(a, z)).sum::<f64>())
        .collect();
    remove_mean(&mut rhs);
    let b_norm = dot(&rhs, &rhs).sqrt();
    let mut f = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = 0.0;
    if b_norm > 0.0 {
        let inv_diag: Vec<f64> = (0..n).map(|i| 1.0 / env.total_rate(i)).collect();
        let mut r = rhs.clone();
        let mut q = vec![0.0; n];
        let precondition = |r: &[f64]| -> Vec<f64> {
            let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
            remove_mean(&mut z);
            z
        };
        let mut z = precondition(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        loop {
            residual = dot(&r, &r).sqrt() / b_norm;
            if residual <= tol {
                break;
            }
            if iterations >= max_iter {
                return Err(Error::NotConverged { iterations, residual });
            }
            laplacian_apply(env, &p, &mut q);
            let pq = dot(&p, &q);
            let alpha = rz / pq;
            for i in 0..n {
                f[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            z = precondition(&r);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            iterations += 1;
        }
        remove_mean(&mut f);
        laplacian_apply(env, &f, &mut q);
        let true_r: Vec<f64> = rhs.iter().zip(&q).map(|(b, lf)| b - lf).collect();
        residual = dot(&true_r, &true_r).sqrt() / b_norm;
    }
    let d_aa = corrector_energy(env, a, &f);
    Ok(CorrectorSolution { direction: a.to_vec(), f, d_aa, residual, iterations })
}

#[derive(Clone, Debug)]
pub struct DiffusionMatrix {
    /// Row-major `d x d`.
    pub entries: Vec<Vec<f64>>,
    /// Ascending eigenvalues and matching unit eigenvectors (columns).
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
}

impl DiffusionMatrix {
    pub fn trace(&self) -> f64 {
        (0..self.entries.len()).map(|k| self.entries[k][k]).sum()
    }

    pub fn offdiag_max(&self) -> f64 {
        let d = self.entries.len();
        let mut m = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    m = m.max(self.entries[i][j].abs());
                }
            }
        }
        m
    }
}

/// Full `D` by polarization `a.Db = (q(a+b) - q(a) - q(b)) / 2`.
pub fn diffusion_matrix(env: &PeriodicEnvironment, tol: f64) -> Result<DiffusionMatrix> {
    let d = env.dimension;
    let unit = |k: usize| -> Vec<f64> { (0..d).map(|m| if m == k { 1.0 } else { 0.0 }).collect() };
    let diag: Vec<f64> = (0..d)
        .map(|k| solve_corrector(env, &unit(k), tol).map(|s| s.d_aa))
        .collect::<Result<_>>()?;
    let mut entries = vec![vec![0.0; d]; d];
    for i in 0..d {
        entries[i][i] = diag[i];
        for j in (i + 1)..d {
            let a: Vec<f64> = (0..d).map(|m| if m == i || m == j { 1.0 } else { 0.0 }).collect();
            let q = solve_corrector(env, &a, tol)?.d_aa;
            let v = 0.5 * (q - diag[i] - diag[j]);
            entries[i][j] = v;
            entries[j][i] = v;
        }
    }
    let m = DMatrix::from_fn(d, d, |i, j| entries[i][j]);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = order
        .iter()
        .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();
    Ok(DiffusionMatrix { entries, eigenvalues, eigenvectors })
}

/// One torus realization of an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectorSample {
    pub seed: u64,
    pub intensity: f64,
    pub entries: Vec<Vec<f64>>,
    pub offdiag_max: f64,
}

#[derive(Clone, Debug)]
pub struct CorrectorEnsemble {
    pub side: f64,
    pub cutoff: f64,
    pub samples: Vec<CorrectorSample>,
    pub estimate: DiffusionEstimate,
}

/// Samples the torus `[0, L)^d` with seed `derive_seed(master_seed, r)`.
pub fn torus_realization(spec: &ProcessSpec, kernel: &ConductanceKernel, side: f64, cutoff: f64, seed: u64) -> Result<PeriodicEnvironment> {
    let window = Window::cube(spec.dimension, 0.0, side)?;
    let config = sample_configuration(spec, &window, seed)?;
    PeriodicEnvironment::build(&config, kernel, cutoff)
}

pub fn corrector_sample(env: &PeriodicEnvironment, seed: u64, tol: f64) -> Result<CorrectorSample> {
    let dm = diffusion_matrix(env, tol)?;
    Ok(CorrectorSample {
        seed,
        intensity: env.intensity(),
        offdiag_max: dm.offdiag_max(),
        entries: dm.entries,
    })
}

/// Palm average of `D` approximated by averaging over `n_realizations`
/// independent tori.
pub fn ensemble_d(
    spec: &ProcessSpec,
    kernel: &ConductanceKernel,
    side: f64,
    cutoff: f64,
    n_realizations: usize,
    master_seed: u64,
    tol: f64,
) -> Result<CorrectorEnsemble> {
    if n_realizations < 2 {
        return Err(invalid("ensemble needs at least two realizations"));
    }
    let samples = (0..n_realizations as u64)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(master_seed, r);
            let env = torus_realization(spec, kernel, side, cutoff, seed)?;
            corrector_sample(&env, seed, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    let estimate = summarize_samples(spec.dimension, &samples);
    Ok(CorrectorEnsemble { side, cutoff, samples, estimate })
}

pub fn summarize_samples(d: usize, samples: &[CorrectorSample]) -> DiffusionEstimate {
    let mut entries = vec![vec![0.0; d]; d];
    let mut stderr = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            let xs: Vec<f64> = samples.iter().map(|s| s.entries[i][j]).collect();
            let (m, se) = mean_and_stderr(&xs);
            entries[i][j] = m;
            stderr[i][j] = se;
        }
    }
    let intensities: Vec<f64> = samples.iter().map(|s| s.intensity).collect();
    let scaled: Vec<f64> = samples.iter().map(|s| s.intensity * s.entries[0][0]).collect();
    let (scaled_d11, scaled_d11_stderr) = mean_and_stderr(&scaled);
    DiffusionEstimate {
        dimension: d,
        entries,
        stderr,
        samples: samples.len(),
        intensity: mean_and_stderr(&intensities).0,
        scaled_d11,
        scaled_d11_stderr,
        slopes: None,
        horizon: None,
        mean_jumps: None,
    }
}
