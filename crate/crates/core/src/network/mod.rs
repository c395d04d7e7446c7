//! Stripe resistor networks.
//!
//! The network lives on the stripe `R x (-l/2, l/2)^{d-1}`. Nodes inside the
//! box `(-l/2, l/2)^d` are interior; nodes with `x_1 <= -l/2` (resp. `>= l/2`)
//! form the left (resp. right) boundary and are held at potential 0 (resp. 1).
//! Filaments join every pair with at least one interior endpoint.
//!
//! The infinite stripe and the complete graph are truncated: boundary nodes
//! are kept to depth `W` past the box faces and filaments to length `R`. The
//! [`TruncationReport`] carries an estimate of the discarded conductance.

mod export;
mod grid;
mod kernel;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{empirical_intensity, MarkedConfiguration};
use crate::error::{invalid, Error, Result};
use grid::CellGrid;

pub use export::{read_network, write_network};
pub use kernel::{distance, ConductanceKernel, CustomKernel, KernelSpec};

/// Weights below this fraction of the largest weight are dropped.
pub const DENORMAL_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeClass {
    Interior,
    LeftBoundary,
    RightBoundary,
}

impl NodeClass {
    pub fn label(self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::LeftBoundary => "left",
            NodeClass::RightBoundary => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "interior" => Some(NodeClass::Interior),
            "left" => Some(NodeClass::LeftBoundary),
            "right" => Some(NodeClass::RightBoundary),
            _ => None,
        }
    }

    pub fn classify(x: &[f64], ell: f64) -> NodeClass {
        if x[0] <= -0.5 * ell {
            NodeClass::LeftBoundary
        } else if x[0] >= 0.5 * ell {
            NodeClass::RightBoundary
        } else {
            NodeClass::Interior
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub position: Vec<f64>,
    pub mark: f64,
    pub class: NodeClass,
}

/// Undirected filament between nodes `i < j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// How far the stripe and the filament lengths are truncated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Chosen from the kernel so that dropped weights are below `tol`.
    Auto { tol: f64 },
    Fixed(f64),
    Unbounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationPolicy {
    /// Depth `W` of the kept boundary layers beyond `x_1 = +-l/2`.
    pub depth: Truncation,
    /// Maximal filament length `R`.
    pub cutoff: Truncation,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            depth: Truncation::Auto { tol: 1e-10 },
            cutoff: Truncation::Auto { tol: 1e-14 },
        }
    }
}

impl TruncationPolicy {
    /// All-pairs filaments on every sampled point of the stripe.
    pub fn exact() -> Self {
        TruncationPolicy { depth: Truncation::Unbounded, cutoff: Truncation::Unbounded }
    }

    pub fn stripe_depth(&self, kernel: &ConductanceKernel, ell: f64) -> f64 {
        match self.depth {
            Truncation::Auto { tol } => (0.5 * ell).min(kernel.cutoff_radius(tol)),
            Truncation::Fixed(w) => w,
            Truncation::Unbounded => f64::INFINITY,
        }
    }

    pub fn cutoff_radius(&self, kernel: &ConductanceKernel) -> f64 {
        match self.cutoff {
            Truncation::Auto { tol } => kernel.cutoff_radius(tol),
            Truncation::Fixed(r) => r,
            Truncation::Unbounded => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub stripe_depth: f64,
    pub cutoff_radius: f64,
    /// Estimated conductance discarded by both truncations, summed over
    /// interior nodes.
    pub neglected_total: f64,
    pub neglected_max_per_node: f64,
    pub retained_total: f64,
    pub dropped_tiny_weights: usize,
    pub floating_nodes: usize,
}

#[derive(Clone, Debug)]
pub struct StripeNetwork {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub ell: f64,
    pub dimension: usize,
    pub truncation: TruncationReport,
    /// Interior nodes whose component touches neither boundary.
    pub floating: Vec<bool>,
}

impl StripeNetwork {
    /// Assembles a network from explicit nodes and filaments, checking the
    /// structural invariants.
    pub fn from_parts(nodes: Vec<Node>, edges: Vec<Edge>, ell: f64, dimension: usize) -> Result<Self> {
        if !(ell > 0.0) {
            return Err(invalid("box side must be positive"));
        }
        for (k, n) in nodes.iter().enumerate() {
            if n.position.len() != dimension {
                return Err(invalid(format!("node {k} has wrong dimension")));
            }
            if n.position[1..].iter().any(|v| v.abs() >= 0.5 * ell) {
                return Err(invalid(format!("node {k} lies outside the stripe")));
            }
            if NodeClass::classify(&n.position, ell) != n.class {
                return Err(invalid(format!("node {k} has inconsistent class")));
            }
        }
        let mut canon = Vec::with_capacity(edges.len());
        for e in edges {
            let (i, j) = (e.i.min(e.j), e.i.max(e.j));
            if i == j || j >= nodes.len() {
                return Err(invalid(format!("bad edge ({}, {})", e.i, e.j)));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(invalid(format!("edge ({i}, {j}) has weight {}", e.weight)));
            }
            if nodes[i].class != NodeClass::Interior && nodes[j].class != NodeClass::Interior {
                return Err(invalid(format!("edge ({i}, {j}) has no interior endpoint")));
            }
            canon.push(Edge { i, j, weight: e.weight });
        }
        canon.sort_by_key(|e| (e.i, e.j));
        check_classes(&nodes)?;
        let floating = floating_nodes(&nodes, &canon);
        let retained_total = canon.iter().map(|e| e.weight).sum();
        let truncation = TruncationReport {
            stripe_depth: f64::INFINITY,
            cutoff_radius: f64::INFINITY,
            retained_total,
            floating_nodes: floating.iter().filter(|f| **f).count(),
            ..Default::default()
        };
        Ok(StripeNetwork { nodes, edges: canon, ell, dimension, truncation, floating })
    }

    pub fn count(&self, class: NodeClass) -> usize {
        self.nodes.iter().filter(|n| n.class == class).count()
    }

    /// Total incident weight of every node.
    pub fn incident_weights(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.nodes.len()];
        for e in &self.edges {
            deg[e.i] += e.weight;
            deg[e.j] += e.weight;
        }
        deg
    }

    /// Sparse weight matrix as sorted `(row, col, weight)` triplets, both
    /// orientations of every filament.
    pub fn weight_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t: Vec<(usize, usize, f64)> = self
            .edges
            .iter()
            .flat_map(|e| [(e.i, e.j, e.weight), (e.j, e.i, e.weight)])
            .collect();
        t.sort_by_key(|e| (e.0, e.1));
        t
    }

    /// Every filament scaled by `s`.
    pub fn scaled(&self, s: f64) -> StripeNetwork {
        let mut out = self.clone();
        for e in &mut out.edges {
            e.weight *= s;
        }
        out.truncation.retained_total *= s;
        out.truncation.neglected_total *= s;
        out.truncation.neglected_max_per_node *= s;
        out
    }
}

fn check_classes(nodes: &[Node]) -> Result<()> {
    for (class, name) in [
        (NodeClass::Interior, "interior"),
        (NodeClass::LeftBoundary, "left boundary"),
        (NodeClass::RightBoundary, "right boundary"),
    ] {
        if !nodes.iter().any(|n| n.class == class) {
            return Err(Error::EmptyBoundary(name));
        }
    }
    Ok(())
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Marks interior nodes whose interior component has no filament to a
/// boundary node.
pub(crate) fn floating_nodes(nodes: &[Node], edges: &[Edge]) -> Vec<bool> {
    let n = nodes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let interior = |k: usize| nodes[k].class == NodeClass::Interior;
    for e in edges {
        if interior(e.i) && interior(e.j) {
            let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
            if a != b {
                parent[a] = b;
            }
        }
    }
    let mut anchored = vec![false; n];
    for e in edges {
        let k = if interior(e.i) && !interior(e.j) {
            e.i
        } else if interior(e.j) && !interior(e.i) {
            e.j
        } else {
            continue;
        };
        let r = find(&mut parent, k);
        anchored[r] = true;
    }
    (0..n)
        .map(|k| interior(k) && !anchored[find(&mut parent, k)])
        .collect()
}

/// Assembles the truncated stripe network of `config` at box side `ell`.
pub fn build_stripe_network(
    config: &MarkedConfiguration,
    kernel: &ConductanceKernel,
    ell: f64,
    policy: &TruncationPolicy,
) -> Result<StripeNetwork> {
    kernel.validate()?;
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(invalid(format!("box side {ell} must be positive")));
    }
    let d = config.dimension;
    let half = 0.5 * ell;
    let depth = policy.stripe_depth(kernel, ell);
    let cutoff = policy.cutoff_radius(kernel);
    if !(depth >= 0.0) || !(cutoff > 0.0) {
        return Err(invalid("truncation depth and cutoff must be positive"));
    }

    let w = &config.window;
    if depth.is_finite() && (w.lo[0] > -half - depth || w.hi[0] < half + depth) {
        return Err(Error::WindowTooSmall(format!(
            "x1 range [{}, {}) does not cover [{}, {}]",
            w.lo[0],
            w.hi[0],
            -half - depth,
            half + depth
        )));
    }
    for k in 1..d {
        if w.lo[k] > -half || w.hi[k] < half {
            return Err(Error::WindowTooSmall(format!("transverse axis {k} does not cover (-l/2, l/2)")));
        }
    }

    let nodes: Vec<Node> = config
        .points
        .iter()
        .filter(|p| {
            p.position[1..].iter().all(|v| v.abs() < half)
                && p.position[0] >= -half - depth
                && p.position[0] <= half + depth
        })
        .map(|p| Node {
            position: p.position.clone(),
            mark: p.mark,
            class: NodeClass::classify(&p.position, ell),
        })
        .collect();
    check_classes(&nodes)?;

    let interior: Vec<usize> = (0..nodes.len()).filter(|&k| nodes[k].class == NodeClass::Interior).collect();
    let edge_between = |i: usize, j: usize| -> Option<Edge> {
        if j == i || (nodes[j].class == NodeClass::Interior && j < i) {
            return None;
        }
        let (xi, xj) = (&nodes[i], &nodes[j]);
        if cutoff.is_finite() && distance(&xi.position, &xj.position) > cutoff {
            return None;
        }
        let c = kernel.conductance(&xi.position, &xj.position, xi.mark, xj.mark);
        (c > 0.0 && c.is_finite()).then(|| Edge { i: i.min(j), j: i.max(j), weight: c })
    };

    let mut edges: Vec<Edge> = if cutoff.is_finite() && d <= 3 {
        let grid = CellGrid::new(nodes.iter().enumerate().map(|(k, n)| (k, n.position.as_slice())), d, cutoff);
        interior
            .par_iter()
            .flat_map_iter(|&i| {
                let mut out = Vec::new();
                grid.for_each_candidate(&nodes[i].position, |j| out.extend(edge_between(i, j)));
                out
            })
            .collect()
    } else {
        interior
            .par_iter()
            .flat_map_iter(|&i| (0..nodes.len()).filter_map(move |j| edge_between(i, j)))
            .collect()
    };

    let max_weight = edges.iter().map(|e| e.weight).fold(0.0, f64::max);
    let before = edges.len();
    edges.retain(|e| e.weight >= DENORMAL_FLOOR * max_weight);
    let dropped_tiny_weights = before - edges.len();
    edges.sort_by_key(|e| (e.i, e.j));

    let density = empirical_intensity(config);
    let tail = |r: f64| kernel.tail_mass(r, density, d);
    let per_node: Vec<f64> = interior
        .iter()
        .map(|&i| {
            let x1 = nodes[i].position[0];
            let mut b = tail(cutoff);
            if depth.is_finite() {
                b += tail(x1 + half + depth) + tail(half - x1 + depth);
            }
            b
        })
        .collect();
    let floating = floating_nodes(&nodes, &edges);
    let truncation = TruncationReport {
        stripe_depth: depth,
        cutoff_radius: cutoff,
        neglected_total: per_node.iter().sum(),
        neglected_max_per_node: per_node.iter().copied().fold(0.0, f64::max),
        retained_total: edges.iter().map(|e| e.weight).sum(),
        dropped_tiny_weights,
        floating_nodes: floating.iter().filter(|f| **f).count(),
    };
    if truncation.floating_nodes > 0 {
        log::warn!("{} interior nodes are disconnected from both boundaries", truncation.floating_nodes);
    }
    Ok(StripeNetwork { nodes, edges, ell, dimension: d, truncation, floating })
}

/// Collapses each boundary class into a single terminal carrying the summed
/// parallel conductances. Interior nodes keep their relative order and come
/// first; the left and right terminals are the last two nodes.
pub fn merge_boundary(net: &StripeNetwork) -> StripeNetwork {
    let left = net.count(NodeClass::LeftBoundary);
    let right = net.count(NodeClass::RightBoundary);
    if left == 1 && right == 1 {
        let mut seen = std::collections::HashSet::new();
        let unique = net.edges.iter().all(|e| seen.insert((e.i, e.j)));
        if unique {
            return net.clone();
        }
    }

    let mut new_index = vec![usize::MAX; net.nodes.len()];
    let mut nodes = Vec::new();
    let mut floating = Vec::new();
    for (k, n) in net.nodes.iter().enumerate() {
        if n.class == NodeClass::Interior {
            new_index[k] = nodes.len();
            nodes.push(n.clone());
            floating.push(net.floating[k]);
        }
    }
    let left_id = nodes.len();
    let right_id = left_id + 1;
    let terminal = |x1: f64, class| {
        let mut position = vec![0.0; net.dimension];
        position[0] = x1;
        Node { position, mark: 0.0, class }
    };
    nodes.push(terminal(-0.5 * net.ell, NodeClass::LeftBoundary));
    nodes.push(terminal(0.5 * net.ell, NodeClass::RightBoundary));
    floating.extend([false, false]);
    for (k, n) in net.nodes.iter().enumerate() {
        match n.class {
            NodeClass::LeftBoundary => new_index[k] = left_id,
            NodeClass::RightBoundary => new_index[k] = right_id,
            NodeClass::Interior => {}
        }
    }

    let mut acc: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
    for e in &net.edges {
        let (a, b) = (new_index[e.i], new_index[e.j]);
        *acc.entry((a.min(b), a.max(b))).or_insert(0.0) += e.weight;
    }
    let edges: Vec<Edge> = acc.into_iter().map(|((i, j), weight)| Edge { i, j, weight }).collect();
    let mut truncation = net.truncation.clone();
    truncation.retained_total = edges.iter().map(|e| e.weight).sum();
    StripeNetwork { nodes, edges, ell: net.ell, dimension: net.dimension, truncation, floating }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{sample_configuration, MarkLaw, MarkedPoint, ProcessSpec, Window};

    fn config_1d(xs: &[f64], window: (f64, f64)) -> MarkedConfiguration {
        MarkedConfiguration {
            dimension: 1,
            window: Window::new(vec![window.0], vec![window.1]).unwrap(),
            seed: 0,
            points: xs.iter().map(|&x| MarkedPoint { position: vec![x], mark: 0.0 }).collect(),
        }
    }

    #[test]
    fn three_collinear_points() {
        let c = config_1d(&[-1.0, 0.0, 1.0], (-2.0, 2.0));
        let k = ConductanceKernel::miller_abrahams(0.0, 1.0);
        let net = build_stripe_network(&c, &k, 1.5, &TruncationPolicy::exact()).unwrap();
        let classes: Vec<NodeClass> = net.nodes.iter().map(|n| n.class).collect();
        assert_eq!(classes, vec![NodeClass::LeftBoundary, NodeClass::Interior, NodeClass::RightBoundary]);
        assert_eq!(net.edges.len(), 2);
        assert!(net.edges.iter().all(|e| e.i == 1 || e.j == 1));
    }

    #[test]
    fn exact_mode_edge_count_is_complete_graph() {
        let spec = ProcessSpec::poisson(2, 1.0, MarkLaw::PowerLaw { alpha: 0.0, cutoff: 1.0 });
        let w = Window::new(vec![-4.0, -2.0], vec![4.0, 2.0]).unwrap();
        let c = sample_configuration(&spec, &w, 3).unwrap();
        let k = ConductanceKernel::miller_abrahams(1.0, 1.0);
        let net = build_stripe_network(&c, &k, 4.0, &TruncationPolicy::exact()).unwrap();
        let ni = net.count(NodeClass::Interior);
        let nb = net.nodes.len() - ni;
        assert!(net.nodes.len() > 20);
        assert_eq!(net.edges.len(), ni * (ni - 1) / 2 + ni * nb);
    }

    #[test]
    fn empty_boundary_is_an_error() {
        let c = config_1d(&[-0.5, 0.0, 1.0], (-2.0, 2.0));
        let k = ConductanceKernel::miller_abrahams(0.0, 1.0);
        let err = build_stripe_network(&c, &k, 1.5, &TruncationPolicy::exact()).unwrap_err();
        assert!(matches!(err, Error::EmptyBoundary("left boundary")));
    }

    #[test]
    fn small_window_is_an_error() {
        let c = config_1d(&[-1.0, 0.0, 1.0], (-1.2, 1.2));
        let k = ConductanceKernel::miller_abrahams(0.0, 1.0);
        let policy = TruncationPolicy { depth: Truncation::Fixed(0.5), ..Default::default() };
        let err = build_stripe_network(&c, &k, 1.5, &policy).unwrap_err();
        assert!(matches!(err, Error::WindowTooSmall(_)));
    }

    #[test]
    fn truncated_network_loses_little_weight() {
        let spec = ProcessSpec::poisson(2, 1.0, MarkLaw::PowerLaw { alpha: 0.0, cutoff: 1.0 });
        let w = Window::new(vec![-30.0, -5.0], vec![30.0, 5.0]).unwrap();
        let c = sample_configuration(&spec, &w, 12).unwrap();
        let k = ConductanceKernel::miller_abrahams(1.0, 1.0);
        let policy = TruncationPolicy { depth: Truncation::Fixed(25.0), cutoff: Truncation::Fixed(20.0) };
        let net = build_stripe_network(&c, &k, 10.0, &policy).unwrap();
        let t = &net.truncation;
        assert!(t.neglected_total < 1e-8 * t.retained_total, "{t:?}");

        let exact = build_stripe_network(&c, &k, 10.0, &TruncationPolicy::exact()).unwrap();
        let missing = exact.truncation.retained_total - t.retained_total;
        assert!(missing >= 0.0 && missing <= t.neglected_total.max(1e-300) * 10.0 + 1e-15 * t.retained_total);
    }

    #[test]
    fn weights_are_symmetric_and_covariant() {
        let spec = ProcessSpec::poisson(2, 1.0, MarkLaw::PowerLaw { alpha: 1.0, cutoff: 1.0 });
        let w = Window::new(vec![-12.0, -6.0], vec![12.0, 6.0]).unwrap();
        let c = sample_configuration(&spec, &w, 5).unwrap();
        let k = ConductanceKernel::miller_abrahams(2.0, 1.0);
        let net = build_stripe_network(&c, &k, 8.0, &TruncationPolicy::default()).unwrap();
        let t = net.weight_triplets();
        let mut transposed: Vec<_> = t.iter().map(|&(a, b, w)| (b, a, w)).collect();
        transposed.sort_by_key(|e| (e.0, e.1));
        assert_eq!(t, transposed);

        // Translating positions and re-evaluating the kernel leaves each
        // weight unchanged: MA weights depend on |x - y| only.
        let a = [0.5, 0.0];
        for e in &net.edges {
            let (p, q) = (&net.nodes[e.i], &net.nodes[e.j]);
            let ps: Vec<f64> = p.position.iter().zip(&a).map(|(x, s)| x + s).collect();
            let qs: Vec<f64> = q.position.iter().zip(&a).map(|(x, s)| x + s).collect();
            let c2 = k.conductance(&ps, &qs, p.mark, q.mark);
            assert!((c2 - e.weight).abs() <= 4.0 * f64::EPSILON * e.weight);
        }
    }

    #[test]
    fn integer_translation_is_bitwise_covariant() {
        let spec = ProcessSpec::lattice(2, 0.8, Some(vec![0.25, 0.5]), MarkLaw::PowerLaw { alpha: 0.0, cutoff: 1.0 });
        let w = Window::new(vec![-9.0, -4.0], vec![9.0, 4.0]).unwrap();
        let c = sample_configuration(&spec, &w, 1).unwrap();
        let k = ConductanceKernel::miller_abrahams(1.5, 1.0);
        let net = build_stripe_network(&c, &k, 8.0, &TruncationPolicy::default()).unwrap();
        let a = [4.0, -2.0];
        for e in &net.edges {
            let (p, q) = (&net.nodes[e.i], &net.nodes[e.j]);
            let ps: Vec<f64> = p.position.iter().zip(&a).map(|(x, s)| x + s).collect();
            let qs: Vec<f64> = q.position.iter().zip(&a).map(|(x, s)| x + s).collect();
            assert_eq!(k.conductance(&ps, &qs, p.mark, q.mark).to_bits(), e.weight.to_bits());
        }
    }

    #[test]
    fn merge_sums_parallel_boundary_filaments() {
        let nodes = vec![
            Node { position: vec![-2.0], mark: 0.0, class: NodeClass::LeftBoundary },
            Node { position: vec![-1.5], mark: 0.0, class: NodeClass::LeftBoundary },
            Node { position: vec![0.0], mark: 0.0, class: NodeClass::Interior },
            Node { position: vec![2.0], mark: 0.0, class: NodeClass::RightBoundary },
        ];
        let edges = vec![
            Edge { i: 0, j: 2, weight: 0.3 },
            Edge { i: 1, j: 2, weight: 0.45 },
            Edge { i: 2, j: 3, weight: 1.0 },
        ];
        let net = StripeNetwork::from_parts(nodes, edges, 2.0, 1).unwrap();
        let merged = merge_boundary(&net);
        assert_eq!(merged.nodes.len(), 3);
        assert_eq!(merged.edges.len(), 2);
        let left_edge = merged.edges.iter().find(|e| e.j == 1).unwrap();
        assert!((left_edge.weight - 0.75).abs() < 1e-15);

        let again = merge_boundary(&merged);
        assert_eq!(again.edges, merged.edges);
        assert_eq!(again.nodes, merged.nodes);
    }

    #[test]
    fn disconnected_interior_is_flagged() {
        let nodes = vec![
            Node { position: vec![-2.0], mark: 0.0, class: NodeClass::LeftBoundary },
            Node { position: vec![-0.5], mark: 0.0, class: NodeClass::Interior },
            Node { position: vec![0.5], mark: 0.0, class: NodeClass::Interior },
            Node { position: vec![0.7], mark: 0.0, class: NodeClass::Interior },
            Node { position: vec![2.0], mark: 0.0, class: NodeClass::RightBoundary },
        ];
        let edges = vec![
            Edge { i: 0, j: 1, weight: 1.0 },
            Edge { i: 1, j: 4, weight: 1.0 },
            Edge { i: 2, j: 3, weight: 1.0 },
        ];
        let net = StripeNetwork::from_parts(nodes, edges, 2.0, 1).unwrap();
        assert_eq!(net.floating, vec![false, false, true, true, false]);
        assert_eq!(net.truncation.floating_nodes, 2);
    }

    #[test]
    fn from_parts_rejects_boundary_only_edges() {
        let nodes = vec![
            Node { position: vec![-2.0], mark: 0.0, class: NodeClass::LeftBoundary },
            Node { position: vec![0.0], mark: 0.0, class: NodeClass::Interior },
            Node { position: vec![2.0], mark: 0.0, class: NodeClass::RightBoundary },
        ];
        let edges = vec![Edge { i: 0, j: 2, weight: 1.0 }];
        assert!(StripeNetwork::from_parts(nodes, edges, 2.0, 1).is_err());
    }
}
