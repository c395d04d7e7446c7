//! Dirichlet problem for the electrical potential.
//!
//! Unknowns are the potentials of interior nodes that are connected to a
//! boundary; boundary nodes are pinned to 0 (left) and 1 (right) and floating
//! interior components to 1/2. The interior block of the weighted Laplacian
//! is symmetric positive definite and is solved by conjugate gradients with
//! a Jacobi preconditioner. A dense Cholesky solve is kept as an oracle.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::network::{floating_nodes, NodeClass, StripeNetwork};
use crate::rng::rng_from_seed;

pub const DEFAULT_TOL: f64 = 1e-10;

/// Largest interior block the dense oracle accepts.
pub const DIRECT_LIMIT: usize = 2000;

/// Potential assigned to interior components cut off from both boundaries.
pub const FLOATING_POTENTIAL: f64 = 0.5;

/// CG restarts from the recomputed residual before giving up.
const MAX_RESTARTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverKind {
    Cg,
    Direct,
}

#[derive(Clone, Debug)]
pub struct PotentialField {
    pub values: Vec<f64>,
    /// `||L_II V_I - b|| / ||b||` of the returned values.
    pub residual_norm: f64,
    pub iterations: usize,
    pub solver_kind: SolverKind,
}

pub fn default_max_iter(n_interior: usize) -> usize {
    ((50.0 * (n_interior as f64).sqrt()).ceil() as usize).max(100)
}

/// Interior block in compressed rows: `A = diag - W_II`.
struct InteriorSystem {
    /// Network node of every unknown.
    node_of: Vec<usize>,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    diag: Vec<f64>,
    rhs: Vec<f64>,
}

impl InteriorSystem {
    fn assemble(net: &StripeNetwork) -> Result<Self> {
        let floating = floating_nodes(&net.nodes, &net.edges);
        let unflagged = floating
            .iter()
            .zip(&net.floating)
            .filter(|(f, flagged)| **f && !**flagged)
            .count();
        if unflagged > 0 {
            return Err(Error::SingularComponent(unflagged));
        }
        let n_nodes = net.nodes.len();
        let mut unknown = vec![usize::MAX; n_nodes];
        let mut node_of = Vec::new();
        for (k, node) in net.nodes.iter().enumerate() {
            if node.class == NodeClass::Interior && !net.floating[k] {
                unknown[k] = node_of.len();
                node_of.push(k);
            }
        }
        let n = node_of.len();
        let mut diag = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut counts = vec![0usize; n + 1];
        for e in &net.edges {
            for (a, b) in [(e.i, e.j), (e.j, e.i)] {
                let ua = unknown[a];
                if ua == usize::MAX {
                    continue;
                }
                diag[ua] += e.weight;
                match net.nodes[b].class {
                    NodeClass::RightBoundary => rhs[ua] += e.weight,
                    NodeClass::LeftBoundary => {}
                    NodeClass::Interior => counts[ua + 1] += 1,
                }
            }
        }
        for k in 0..n {
            counts[k + 1] += counts[k];
        }
        let offsets = counts;
        let mut fill = offsets.clone();
        let mut cols = vec![0usize; offsets[n]];
        let mut weights = vec![0.0; offsets[n]];
        for e in &net.edges {
            let (ui, uj) = (unknown[e.i], unknown[e.j]);
            if ui != usize::MAX && uj != usize::MAX {
                for (a, b) in [(ui, uj), (uj, ui)] {
                    cols[fill[a]] = b;
                    weights[fill[a]] = e.weight;
                    fill[a] += 1;
                }
            }
        }
        Ok(InteriorSystem { node_of, offsets, cols, weights, diag, rhs })
    }

    fn len(&self) -> usize {
        self.node_of.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = self.diag[i] * x[i];
            for k in self.offsets[i]..self.offsets[i + 1] {
                acc -= self.weights[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut ax = vec![0.0; self.len()];
        self.apply(x, &mut ax);
        self.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect()
    }

    /// `(||r|| / ||b||, max_i |r_i| / diag_i)`.
    fn residual_measures(&self, r: &[f64], b_norm: f64) -> (f64, f64) {
        let rel = norm(r) / b_norm;
        let local = r
            .iter()
            .zip(&self.diag)
            .map(|(ri, di)| ri.abs() / di)
            .fold(0.0, f64::max);
        (rel, local)
    }

    fn to_potential(&self, net: &StripeNetwork, x: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = net
            .nodes
            .iter()
            .enumerate()
            .map(|(k, n)| match n.class {
                NodeClass::LeftBoundary => 0.0,
                NodeClass::RightBoundary => 1.0,
                NodeClass::Interior if net.floating[k] => FLOATING_POTENTIAL,
                NodeClass::Interior => f64::NAN,
            })
            .collect();
        for (u, &k) in self.node_of.iter().enumerate() {
            v[k] = x[u];
        }
        v
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves the Dirichlet system by Jacobi-preconditioned conjugate gradients.
///
/// Iterates until both the relative residual and the per-node Kirchhoff
/// imbalance (relative to the node's incident weight) are below `tol`.
pub fn solve_potential(net: &StripeNetwork, tol: f64, max_iter: Option<usize>) -> Result<PotentialField> {
    if !(tol > 0.0) {
        return Err(invalid("solver tolerance must be positive"));
    }
    let sys = InteriorSystem::assemble(net)?;
    let n = sys.len();
    let max_iter = max_iter.unwrap_or_else(|| default_max_iter(n));
    let b_norm = norm(&sys.rhs);
    if n == 0 || b_norm == 0.0 {
        // no current can flow: every connected interior node sits at 0
        let x = vec![0.0; n];
        return Ok(PotentialField {
            values: sys.to_potential(net, &x),
            residual_norm: 0.0,
            iterations: 0,
            solver_kind: SolverKind::Cg,
        });
    }

    let inv_diag: Vec<f64> = sys.diag.iter().map(|d| 1.0 / d).collect();
    let mut x = vec![0.0; n];
    let mut r = sys.rhs.clone();
    let mut q = vec![0.0; n];
    let mut iterations = 0;
    for _ in 0..MAX_RESTARTS {
        // (re)start from the true residual
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            let (rel, local) = sys.residual_measures(&r, b_norm);
            if rel <= tol && local <= tol {
                break;
            }
            sys.apply(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                break;
            }
            let alpha = rz / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            iterations += 1;
        }
        r = sys.residual(&x);
        let (rel, local) = sys.residual_measures(&r, b_norm);
        if rel <= tol && local <= tol {
            return Ok(PotentialField {
                values: sys.to_potential(net, &x),
                residual_norm: rel,
                iterations,
                solver_kind: SolverKind::Cg,
            });
        }
        if iterations >= max_iter {
            return Err(Error::NotConverged { iterations, residual: rel });
        }
    }
    let residual = norm(&r) / b_norm;
    Err(Error::NotConverged { iterations, residual })
}

/// Dense Cholesky solve of the same system; an oracle for small networks.
pub fn solve_potential_direct(net: &StripeNetwork) -> Result<PotentialField> {
    let sys = InteriorSystem::assemble(net)?;
    let n = sys.len();
    if n > DIRECT_LIMIT {
        return Err(invalid(format!("dense solve limited to {DIRECT_LIMIT} unknowns, got {n}")));
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = sys.diag[i];
        for k in sys.offsets[i]..sys.offsets[i + 1] {
            a[(i, sys.cols[k])] -= sys.weights[k];
        }
    }
    let chol = a
        .cholesky()
        .ok_or(Error::SingularComponent(n))?;
    let x = chol.solve(&DVector::from_vec(sys.rhs.clone()));
    let x: Vec<f64> = x.iter().copied().collect();
    let b_norm = norm(&sys.rhs);
    let residual_norm = if b_norm > 0.0 { norm(&sys.residual(&x)) / b_norm } else { 0.0 };
    Ok(PotentialField {
        values: sys.to_potential(net, &x),
        residual_norm,
        iterations: 0,
        solver_kind: SolverKind::Direct,
    })
}

/// `sum over filaments of c_ij (V_i - V_j)^2`.
pub fn dirichlet_energy(net: &StripeNetwork, v: &[f64]) -> f64 {
    net.edges
        .iter()
        .map(|e| {
            let dv = v[e.i] - v[e.j];
            e.weight * dv * dv
        })
        .sum()
}

/// Per interior (non-floating) node: `(node, sum_j c_ij (V_j - V_i), sum_j c_ij)`.
pub fn kirchhoff_residuals(net: &StripeNetwork, v: &[f64]) -> Vec<(usize, f64, f64)> {
    let mut flux = vec![0.0; net.nodes.len()];
    let mut weight = vec![0.0; net.nodes.len()];
    for e in &net.edges {
        let i_ij = e.weight * (v[e.j] - v[e.i]);
        flux[e.i] += i_ij;
        flux[e.j] -= i_ij;
        weight[e.i] += e.weight;
        weight[e.j] += e.weight;
    }
    (0..net.nodes.len())
        .filter(|&k| net.nodes[k].class == NodeClass::Interior && !net.floating[k])
        .map(|k| (k, flux[k], weight[k]))
        .collect()
}

/// Checks that random interior perturbations of size `magnitude` never
/// lower the Dirichlet energy by more than `10 tol` relative.
pub fn verify_minimality(
    net: &StripeNetwork,
    v: &[f64],
    n_trials: usize,
    magnitude: f64,
    tol: f64,
    seed: u64,
) -> bool {
    let base = dirichlet_energy(net, v);
    let mut rng = rng_from_seed(seed);
    let free: Vec<usize> = (0..net.nodes.len())
        .filter(|&k| net.nodes[k].class == NodeClass::Interior)
        .collect();
    let mut trial = v.to_vec();
    (0..n_trials).all(|_| {
        for &k in &free {
            trial[k] = v[k] + magnitude * rng.random_range(-1.0..=1.0);
        }
        dirichlet_energy(net, &trial) >= base - 10.0 * tol * base
    })
}

/// CSV `node_index,x1..xd,class,V`.
pub fn write_potential_csv(net: &StripeNetwork, field: &PotentialField, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "node_index")?;
    for k in 1..=net.dimension {
        write!(w, ",x{k}")?;
    }
    writeln!(w, ",class,V")?;
    for (k, n) in net.nodes.iter().enumerate() {
        write!(w, "{k}")?;
        for x in &n.position {
            write!(w, ",{x:.16e}")?;
        }
        writeln!(w, ",{},{:.16e}", n.class.label(), field.values[k])?;
    }
    w.flush()?;
    Ok(())
}
