//! Effective conductivity of a solved stripe network.
//!
//! Three routes to the same number: the current leaving the left boundary,
//! the current through any hyperplane `x_1 = g`, and the Dirichlet energy of
//! the potential. They agree exactly for an exact potential because the
//! current is divergence free at every interior node, so their spread is a
//! direct measure of solver error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{NodeClass, StripeNetwork};
use crate::solver::{dirichlet_energy, PotentialField};

/// Current `sum c_xy (V_y - V_x)` from left-boundary `x` into interior `y`.
pub fn sigma_boundary_current(net: &StripeNetwork, v: &[f64]) -> f64 {
    net.edges
        .iter()
        .map(|e| {
            let (ci, cj) = (net.nodes[e.i].class, net.nodes[e.j].class);
            match (ci, cj) {
                (NodeClass::LeftBoundary, NodeClass::Interior) => e.weight * (v[e.j] - v[e.i]),
                (NodeClass::Interior, NodeClass::LeftBoundary) => e.weight * (v[e.i] - v[e.j]),
                _ => 0.0,
            }
        })
        .sum()
}

/// Current through the hyperplane `x_1 = g`, `g` in `[-l/2, l/2)`.
pub fn sigma_cross_section(net: &StripeNetwork, v: &[f64], g: f64) -> Result<f64> {
    let half = 0.5 * net.ell;
    if !(g >= -half && g < half) {
        return Err(Error::CrossSectionOutOfRange(g));
    }
    Ok(net
        .edges
        .iter()
        .map(|e| {
            let (xi, xj) = (net.nodes[e.i].position[0], net.nodes[e.j].position[0]);
            if xi <= g && g < xj {
                e.weight * (v[e.j] - v[e.i])
            } else if xj <= g && g < xi {
                e.weight * (v[e.i] - v[e.j])
            } else {
                0.0
            }
        })
        .sum())
}

pub fn sigma_energy(net: &StripeNetwork, v: &[f64]) -> f64 {
    dirichlet_energy(net, v)
}

/// `l^{2-d} sigma`.
pub fn rescaled_conductivity(sigma: f64, ell: f64, dimension: usize) -> f64 {
    sigma * ell.powi(2 - dimension as i32)
}

/// `g_j = -l/2 + j l / 10`, `j = 0..9`.
pub fn default_cross_sections(ell: f64) -> Vec<f64> {
    (0..10).map(|j| -0.5 * ell + j as f64 * ell / 10.0).collect()
}

/// Ratio of the largest to the smallest incident weight over connected
/// interior nodes.
pub fn condition_proxy(net: &StripeNetwork) -> f64 {
    let deg = net.incident_weights();
    let (lo, hi) = net
        .nodes
        .iter()
        .enumerate()
        .filter(|(k, n)| n.class == NodeClass::Interior && !net.floating[*k])
        .map(|(k, _)| deg[k])
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), w| (lo.min(w), hi.max(w)));
    if hi > 0.0 {
        hi / lo
    } else {
        1.0
    }
}

/// Allowed relative spread between the formulas for a given solver tolerance.
pub fn equivalence_tolerance(solver_tol: f64, condition_proxy: f64) -> f64 {
    (1e-8f64).max(100.0 * solver_tol * condition_proxy)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConductivityReport {
    pub sigma_boundary: f64,
    /// `(g, current through x_1 = g)`.
    pub sigma_cross: Vec<(f64, f64)>,
    pub sigma_energy: f64,
    pub rescaled: f64,
    pub ell: f64,
    pub dimension: usize,
    pub condition_proxy: f64,
    pub cg_iterations: usize,
    /// Largest pairwise relative disagreement between all formulas.
    pub max_discrepancy: f64,
}

impl ConductivityReport {
    pub fn cross_min(&self) -> f64 {
        self.sigma_cross.iter().map(|c| c.1).fold(f64::INFINITY, f64::min)
    }

    pub fn cross_max(&self) -> f64 {
        self.sigma_cross.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Evaluates all three formulas on the default cross sections.
pub fn evaluate(net: &StripeNetwork, field: &PotentialField) -> Result<ConductivityReport> {
    let v = &field.values;
    let sigma_boundary = sigma_boundary_current(net, v);
    let sigma_cross = default_cross_sections(net.ell)
        .into_iter()
        .map(|g| sigma_cross_section(net, v, g).map(|s| (g, s)))
        .collect::<Result<Vec<_>>>()?;
    let sigma_energy = sigma_energy(net, v);
    let mut all = vec![sigma_boundary, sigma_energy];
    all.extend(sigma_cross.iter().map(|c| c.1));
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let max_discrepancy = if sigma_energy > 0.0 { (hi - lo) / sigma_energy } else { hi - lo };
    Ok(ConductivityReport {
        sigma_boundary,
        sigma_cross,
        sigma_energy,
        rescaled: rescaled_conductivity(sigma_energy, net.ell, net.dimension),
        ell: net.ell,
        dimension: net.dimension,
        condition_proxy: condition_proxy(net),
        cg_iterations: field.iterations,
        max_discrepancy,
    })
}

/// [`evaluate`], then aborts if the formulas disagree beyond
/// [`equivalence_tolerance`].
pub fn conductivity_report(net: &StripeNetwork, field: &PotentialField, solver_tol: f64) -> Result<ConductivityReport> {
    let report = evaluate(net, field)?;
    let tol = equivalence_tolerance(solver_tol, report.condition_proxy);
    if !(report.max_discrepancy <= tol) {
        return Err(Error::EquivalenceViolation(format!(
            "relative spread {:e} exceeds {:e} (boundary {}, energy {}, cross [{}, {}])",
            report.max_discrepancy,
            tol,
            report.sigma_boundary,
            report.sigma_energy,
            report.cross_min(),
            report.cross_max()
        )));
    }
    Ok(report)
}

/// One CSV row per realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConductivityRow {
    pub seed: u64,
    pub d: usize,
    pub ell: f64,
    pub beta: f64,
    pub alpha: f64,
    pub gamma_loc: f64,
    pub sigma_boundary: f64,
    pub sigma_energy: f64,
    pub sigma_cross_min: f64,
    pub sigma_cross_max: f64,
    pub rescaled: f64,
    pub cg_iters: usize,
    pub condition_proxy: f64,
    /// Largest relative spread between the three formulas.
    pub max_discrepancy: f64,
}

impl ConductivityRow {
    pub fn new(report: &ConductivityReport, seed: u64, beta: f64, alpha: f64, gamma_loc: f64) -> Self {
        ConductivityRow {
            seed,
            d: report.dimension,
            ell: report.ell,
            beta,
            alpha,
            gamma_loc,
            sigma_boundary: report.sigma_boundary,
            sigma_energy: report.sigma_energy,
            sigma_cross_min: report.cross_min(),
            sigma_cross_max: report.cross_max(),
            rescaled: report.rescaled,
            cg_iters: report.cg_iterations,
            condition_proxy: report.condition_proxy,
            max_discrepancy: report.max_discrepancy,
        }
    }
}
