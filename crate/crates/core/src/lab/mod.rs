//! Experiment orchestration: configuration, cell-by-cell sweeps with
//! resumable CSV output, and the three experiment recipes.

mod config;
mod store;

use std::collections::BTreeSet;

use csv::StringRecord;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, GeometryConfig, ModelConfig, RunConfig, DEFAULT_JUMPS};
pub use store::{run_ordered, write_table, Manifest, RunDirectory, Table, TableRow};

use crate::conductivity::{condition_proxy, conductivity_report, equivalence_tolerance, evaluate, ConductivityReport, ConductivityRow};
use crate::corrector::{diffusion_matrix, PeriodicEnvironment};
use crate::environment::{sample_configuration, MarkedConfiguration, Window};
use crate::error::{Error, Result};
use crate::mott_walk::{estimate_diffusion, JumpTables, WalkRow};
use crate::network::{build_stripe_network, ConductanceKernel, NodeClass, StripeNetwork, Truncation};
use crate::rng::derive_seed;
use crate::solver::{default_max_iter, solve_potential, solve_potential_direct, PotentialField, DIRECT_LIMIT};
use crate::stats::{linear_fit, mean_and_stderr, median, median_stderr, quartiles};
use store::{completed, field, serde_table_row};

/// Sub-stream of a realization seed used for its torus environment.
const TORUS_STREAM: u64 = 2;
/// Sub-stream of a realization seed used for its walkers.
const WALK_STREAM: u64 = 3;

/// Minimal number of inverse temperatures for a Mott fit.
pub const MIN_MOTT_POINTS: usize = 5;

/// `psi(x) = x_1 + 1/2` on the unit box, 0 to its left and 1 to its right.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReferenceProfile;

impl ReferenceProfile {
    pub fn value(&self, x: &[f64]) -> f64 {
        (x[0] + 0.5).clamp(0.0, 1.0)
    }

    /// `[eps^d sum_{x interior} (V(x) - psi(eps x))^2]^(1/2)` with `eps = 1/l`.
    pub fn l2_error(&self, net: &StripeNetwork, v: &[f64]) -> f64 {
        let eps = 1.0 / net.ell;
        let sum: f64 = net
            .nodes
            .iter()
            .zip(v)
            .filter(|(n, _)| n.class == NodeClass::Interior)
            .map(|(n, vi)| {
                let scaled: Vec<f64> = n.position.iter().map(|x| eps * x).collect();
                (vi - self.value(&scaled)).powi(2)
            })
            .sum();
        (eps.powi(net.dimension as i32) * sum).sqrt()
    }
}

/// Sampling window shared by all box sides of a sweep, so that one seed
/// means one environment across `l`. Offsets are integers so that lattice
/// sites keep their alignment with the box.
pub fn stripe_window(config: &ExperimentConfig, kernel: &ConductanceKernel) -> Result<Window> {
    let ell = *config.ells().last().expect("validated non-empty");
    let depth = match config.geometry.truncation.depth {
        Truncation::Unbounded => 0.5 * ell,
        _ => config.geometry.truncation.stripe_depth(kernel, ell),
    };
    let reach = (0.5 * ell + depth).ceil() + 1.0;
    let half = (0.5 * ell).ceil();
    let d = config.model.dimension;
    let mut lo = vec![-half; d];
    let mut hi = vec![half; d];
    lo[0] = -reach;
    hi[0] = reach;
    Window::new(lo, hi)
}

pub fn stripe_configuration(config: &ExperimentConfig, seed: u64) -> Result<MarkedConfiguration> {
    let window = stripe_window(config, &config.kernel())?;
    sample_configuration(&config.process_spec(), &window, seed)
}

/// A solved stripe problem.
pub struct StripeSolve {
    pub network: StripeNetwork,
    pub field: PotentialField,
    pub report: ConductivityReport,
}

pub fn solve_stripe(config: &ExperimentConfig, seed: u64, ell: f64, beta: f64) -> Result<StripeSolve> {
    solve_stripe_checked(config, seed, ell, beta, true)
}

/// With `strict = false` a residual formula disagreement after refinement is
/// logged and left in the report instead of aborting.
pub fn solve_stripe_checked(config: &ExperimentConfig, seed: u64, ell: f64, beta: f64, strict: bool) -> Result<StripeSolve> {
    let kernel = config.kernel_at(beta);
    let window = stripe_window(config, &config.kernel())?;
    let env = sample_configuration(&config.process_spec(), &window, seed)?;
    let network = build_stripe_network(&env, &kernel, ell, &config.geometry.truncation)?;
    let (field, report) = solve_consistently(&network, config.run.solver_tol, strict)?;
    Ok(StripeSolve { network, field, report })
}

/// Tightest CG tolerance tried before giving up on ill-conditioned networks.
const FINEST_TOL: f64 = 1e-15;

/// Solves and checks the three conductivity formulas against each other.
/// When the currents are tiny compared with the node weights (large beta,
/// long chains) a residual at `tol` is not enough for the formulas to agree,
/// so the solve is refined: a dense factorization for small systems,
/// otherwise CG with successively tighter tolerances.
pub fn solve_consistently(net: &StripeNetwork, tol: f64, strict: bool) -> Result<(PotentialField, ConductivityReport)> {
    let small = net.count(NodeClass::Interior) <= DIRECT_LIMIT;
    let report = match solve_potential(net, tol, None) {
        Ok(field) => {
            let report = evaluate(net, &field)?;
            if report.max_discrepancy <= equivalence_tolerance(tol, report.condition_proxy) {
                return Ok((field, report));
            }
            Some(report)
        }
        Err(Error::NotConverged { .. }) if small => None,
        Err(e) => return Err(e),
    };
    let proxy = report.map_or_else(|| condition_proxy(net), |r| r.condition_proxy);
    let field = if small {
        log::debug!("refining with a dense solve");
        solve_potential_direct(net)?
    } else {
        let mut t = tol;
        loop {
            t = (t * 1e-2).max(FINEST_TOL);
            log::debug!("formulas disagree, refining CG to {t:e}");
            let f = solve_potential(net, t, Some(20 * default_max_iter(net.nodes.len())))?;
            if t <= FINEST_TOL || evaluate(net, &f)?.max_discrepancy <= equivalence_tolerance(tol, proxy) {
                break f;
            }
        }
    };
    if strict {
        let report = conductivity_report(net, &field, tol)?;
        return Ok((field, report));
    }
    let refined = evaluate(net, &field)?;
    let limit = equivalence_tolerance(tol, refined.condition_proxy);
    if refined.max_discrepancy > limit {
        log::warn!(
            "formulas still disagree by {:e} (limit {limit:e}) at sigma = {:e}; flagged",
            refined.max_discrepancy,
            refined.sigma_energy
        );
    }
    Ok((field, refined))
}

pub fn conductivity_row(config: &ExperimentConfig, seed: u64, ell: f64, beta: f64) -> Result<ConductivityRow> {
    conductivity_row_checked(config, seed, ell, beta, true)
}

fn conductivity_row_checked(config: &ExperimentConfig, seed: u64, ell: f64, beta: f64, strict: bool) -> Result<ConductivityRow> {
    let s = solve_stripe_checked(config, seed, ell, beta, strict)?;
    Ok(ConductivityRow::new(&s.report, seed, beta, config.model.marks.alpha(), gamma_of(config)))
}

fn gamma_of(config: &ExperimentConfig) -> f64 {
    config.kernel().localization_length().unwrap_or(f64::NAN)
}

fn torus_side(config: &ExperimentConfig) -> Result<f64> {
    config
        .geometry
        .torus_side
        .ok_or_else(|| Error::Config("geometry.torus_side is required for torus estimators".into()))
}

/// Points of the torus `[0, L)^d` belonging to realization `seed`.
pub fn torus_configuration(config: &ExperimentConfig, seed: u64) -> Result<MarkedConfiguration> {
    let window = Window::cube(config.model.dimension, 0.0, torus_side(config)?)?;
    sample_configuration(&config.process_spec(), &window, derive_seed(seed, TORUS_STREAM))
}

pub fn torus_environment(config: &ExperimentConfig, seed: u64, beta: f64) -> Result<PeriodicEnvironment> {
    let kernel = config.kernel_at(beta);
    PeriodicEnvironment::build(&torus_configuration(config, seed)?, &kernel, config.torus_cutoff(&kernel))
}

/// Corrector estimate of `D` on one torus realization.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectorRow {
    pub seed: u64,
    pub beta: f64,
    pub side: f64,
    pub cutoff: f64,
    pub n_nodes: usize,
    pub intensity: f64,
    /// Row-major `D`.
    pub entries: Vec<Vec<f64>>,
    pub offdiag_max: f64,
}

impl CorrectorRow {
    pub fn scaled_d11(&self) -> f64 {
        self.intensity * self.entries[0][0]
    }
}

impl TableRow for CorrectorRow {
    fn header(&self) -> Vec<String> {
        let d = self.entries.len();
        let mut h: Vec<String> = ["seed", "beta", "L", "R", "n_nodes", "intensity"].map(String::from).to_vec();
        for a in 1..=d {
            h.extend((1..=d).map(|b| format!("D_{a}{b}")));
        }
        h.extend(["offdiag_max", "m_D11"].map(String::from));
        h
    }

    fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.seed.to_string(),
            self.beta.to_string(),
            self.side.to_string(),
            self.cutoff.to_string(),
            self.n_nodes.to_string(),
            self.intensity.to_string(),
        ];
        r.extend(self.entries.iter().flatten().map(|v| v.to_string()));
        r.push(self.offdiag_max.to_string());
        r.push(self.scaled_d11().to_string());
        r
    }

    fn parse(h: &StringRecord, r: &StringRecord) -> Result<Self> {
        let d = (h.iter().filter(|c| c.starts_with("D_")).count() as f64).sqrt().round() as usize;
        let mut entries = vec![vec![0.0; d]; d];
        for (a, row) in entries.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = field(h, r, &format!("D_{}{}", a + 1, b + 1))?;
            }
        }
        Ok(CorrectorRow {
            seed: field(h, r, "seed")?,
            beta: field(h, r, "beta")?,
            side: field(h, r, "L")?,
            cutoff: field(h, r, "R")?,
            n_nodes: field(h, r, "n_nodes")?,
            intensity: field(h, r, "intensity")?,
            entries,
            offdiag_max: field(h, r, "offdiag_max")?,
        })
    }
}

impl TableRow for WalkRow {
    fn header(&self) -> Vec<String> {
        WalkRow::header(self.slopes.len())
    }

    fn record(&self) -> Vec<String> {
        WalkRow::record(self)
    }

    fn parse(h: &StringRecord, r: &StringRecord) -> Result<Self> {
        let d = h.iter().filter(|c| c.starts_with("slope_")).count();
        let per_axis = |prefix: &str| -> Result<Vec<f64>> {
            (1..=d).map(|a| field(h, r, &format!("{prefix}{a}"))).collect()
        };
        Ok(WalkRow {
            seed: field(h, r, "seed")?,
            beta: field(h, r, "beta")?,
            side: field(h, r, "L")?,
            horizon: field(h, r, "T")?,
            n_walkers: field(h, r, "n_walkers")?,
            slopes: per_axis("slope_")?,
            diffusion: (1..=d).map(|a| field(h, r, &format!("D_{a}{a}"))).collect::<Result<_>>()?,
            stderr: per_axis("stderr_")?,
            mean_jumps_per_walker: field(h, r, "mean_jumps_per_walker")?,
            intensity: field(h, r, "intensity")?,
        })
    }
}

pub fn corrector_row(config: &ExperimentConfig, seed: u64, beta: f64) -> Result<CorrectorRow> {
    let env = torus_environment(config, seed, beta)?;
    let dm = diffusion_matrix(&env, config.run.solver_tol)?;
    Ok(CorrectorRow {
        seed,
        beta,
        side: env.side,
        cutoff: env.cutoff,
        n_nodes: env.len(),
        intensity: env.intensity(),
        offdiag_max: dm.offdiag_max(),
        entries: dm.entries,
    })
}

pub fn walk_row(config: &ExperimentConfig, seed: u64, beta: f64) -> Result<WalkRow> {
    let env = torus_environment(config, seed, beta)?;
    let tables = JumpTables::new(&env)?;
    let horizon = config.run.horizon.unwrap_or_else(|| {
        let mean_rate = (0..env.len()).map(|i| tables.total_rate(i)).sum::<f64>() / env.len() as f64;
        DEFAULT_JUMPS / mean_rate
    });
    let est = estimate_diffusion(&env, &tables, config.run.walkers, horizon, derive_seed(seed, WALK_STREAM))?;
    Ok(WalkRow::new(&est, seed, beta, env.side))
}

/// Exact key of a `(seed, l, beta)` cell.
type CellKey = (u64, u64, u64);

fn cell_key(seed: u64, ell: f64, beta: f64) -> CellKey {
    (seed, ell.to_bits(), beta.to_bits())
}

fn cell_label(kind: &str, seed: u64, ell: Option<f64>, beta: f64) -> String {
    match ell {
        Some(l) => format!("{kind}/seed={seed}/ell={l}/beta={beta}"),
        None => format!("{kind}/seed={seed}/beta={beta}"),
    }
}

/// Cells of a stripe table not yet present, ordered by `(beta, l, seed)`.
fn pending_stripe_cells(
    config: &ExperimentConfig,
    ells: &[f64],
    done: &BTreeSet<CellKey>,
) -> Vec<(u64, f64, f64)> {
    let mut todo = Vec::new();
    for beta in config.betas() {
        for &ell in ells {
            for seed in config.realization_seeds() {
                if !done.contains(&cell_key(seed, ell, beta)) {
                    todo.push((seed, ell, beta));
                }
            }
        }
    }
    todo
}

/// Fills `name` with one [`ConductivityRow`] per stripe cell.
fn fill_sigma_table(
    run: &mut RunDirectory,
    config: &ExperimentConfig,
    name: &str,
    ells: &[f64],
    strict: bool,
) -> Result<Table<ConductivityRow>> {
    let mut table = Table::<ConductivityRow>::open(&run.path(name))?;
    let done = completed(&table, |r| cell_key(r.seed, r.ell, r.beta));
    let todo = pending_stripe_cells(config, ells, &done);
    let result = run_ordered(
        &todo,
        |&(seed, ell, beta)| conductivity_row_checked(config, seed, ell, beta, strict),
        |&(seed, ell, beta), row, secs| {
            table.append(row)?;
            run.record_cell(cell_label(name, seed, Some(ell), beta), secs);
            Ok(())
        },
    );
    run.save_manifest()?;
    result.map(|_| table)
}

fn fill_torus_table<R: TableRow + Send>(
    run: &mut RunDirectory,
    config: &ExperimentConfig,
    name: &str,
    key: impl Fn(&R) -> (u64, u64),
    work: impl Fn(u64, f64) -> Result<R> + Sync,
) -> Result<Table<R>> {
    let mut table = Table::<R>::open(&run.path(name))?;
    let done = completed(&table, key);
    let mut todo = Vec::new();
    for beta in config.betas() {
        for seed in config.realization_seeds() {
            if !done.contains(&(seed, beta.to_bits())) {
                todo.push((seed, beta));
            }
        }
    }
    let result = run_ordered(
        &todo,
        |&(seed, beta)| work(seed, beta),
        |&(seed, beta), row, secs| {
            table.append(row)?;
            run.record_cell(cell_label(name, seed, None, beta), secs);
            Ok(())
        },
    );
    run.save_manifest()?;
    result.map(|_| table)
}

/// One line of the Theorem-1 comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Row {
    pub d: usize,
    pub beta: f64,
    pub ell: f64,
    pub n: usize,
    pub median_rescaled: f64,
    pub q1_rescaled: f64,
    pub q3_rescaled: f64,
    pub median_se: f64,
    pub m_d11_corrector: f64,
    pub m_d11_corrector_se: f64,
    pub m_d11_walk: f64,
    pub m_d11_walk_se: f64,
}

#[derive(Clone, Debug)]
pub struct Theorem1Table {
    pub rows: Vec<Theorem1Row>,
    pub sigma: Vec<ConductivityRow>,
    pub corrector: Vec<CorrectorRow>,
    pub walk: Vec<WalkRow>,
}

/// Summary rows `(beta, l)` in sweep order.
pub fn summarize_theorem1(
    config: &ExperimentConfig,
    sigma: &[ConductivityRow],
    corrector: &[CorrectorRow],
    walk: &[WalkRow],
) -> Vec<Theorem1Row> {
    let seeds: BTreeSet<u64> = config.realization_seeds().into_iter().collect();
    let mut rows = Vec::new();
    for beta in config.betas() {
        let pick = |xs: Vec<f64>| if xs.is_empty() { (f64::NAN, f64::NAN) } else { mean_and_stderr(&xs) };
        let (mc, mc_se) = pick(
            corrector
                .iter()
                .filter(|r| r.beta == beta && seeds.contains(&r.seed))
                .map(CorrectorRow::scaled_d11)
                .collect(),
        );
        let (mw, mw_se) = pick(
            walk.iter()
                .filter(|r| r.beta == beta && seeds.contains(&r.seed))
                .map(|r| r.intensity * r.diffusion[0])
                .collect(),
        );
        for ell in config.ells() {
            let xs: Vec<f64> = sigma
                .iter()
                .filter(|r| r.beta == beta && r.ell == ell && seeds.contains(&r.seed))
                .map(|r| r.rescaled)
                .collect();
            let (q1, q3) = quartiles(&xs);
            rows.push(Theorem1Row {
                d: config.model.dimension,
                beta,
                ell,
                n: xs.len(),
                median_rescaled: median(&xs),
                q1_rescaled: q1,
                q3_rescaled: q3,
                median_se: median_stderr(&xs),
                m_d11_corrector: mc,
                m_d11_corrector_se: mc_se,
                m_d11_walk: mw,
                m_d11_walk_se: mw_se,
            });
        }
    }
    rows
}

/// Theorem-1 recipe: rescaled conductivities per `(seed, l, beta)` next to
/// the corrector and random-walk estimates of `m D_11`.
///
/// Writes `sigma.csv`, `corrector.csv`, `walk.csv` (the latter two only with
/// a torus side; `walk.csv` only with walkers) and the summary
/// `theorem1.csv`.
pub fn run_theorem1_sweep(config: &ExperimentConfig) -> Result<Theorem1Table> {
    let mut run = RunDirectory::open(config)?;
    let sigma = fill_sigma_table(&mut run, config, "sigma.csv", &config.ells(), true)?;
    let (mut corrector, mut walk) = (Vec::new(), Vec::new());
    if config.geometry.torus_side.is_some() {
        corrector = fill_torus_table(
            &mut run,
            config,
            "corrector.csv",
            |r: &CorrectorRow| (r.seed, r.beta.to_bits()),
            |seed, beta| corrector_row(config, seed, beta),
        )?
        .rows()
        .to_vec();
        if config.run.walkers > 0 {
            walk = fill_torus_table(
                &mut run,
                config,
                "walk.csv",
                |r: &WalkRow| (r.seed, r.beta.to_bits()),
                |seed, beta| walk_row(config, seed, beta),
            )?
            .rows()
            .to_vec();
        }
    }
    let sigma = sigma.rows().to_vec();
    let rows = summarize_theorem1(config, &sigma, &corrector, &walk);
    write_table(&run.path("theorem1.csv"), &rows)?;
    Ok(Theorem1Table { rows, sigma, corrector, walk })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub seed: u64,
    pub d: usize,
    pub ell: f64,
    pub beta: f64,
    pub n_interior: usize,
    pub l2_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Row {
    pub beta: f64,
    pub ell: f64,
    pub n: usize,
    pub median_error: f64,
    pub q1_error: f64,
    pub q3_error: f64,
}

/// Power-law fit `err ~ l^slope` of the median errors at one beta.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub beta: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub strictly_decreasing: bool,
}

#[derive(Clone, Debug)]
pub struct Theorem2Report {
    pub rows: Vec<Theorem2Row>,
    pub cells: Vec<ProfileRow>,
    pub fits: Vec<DecayFit>,
}

serde_table_row!(ConductivityRow, Theorem1Row, ProfileRow, Theorem2Row, MottPoint);

pub fn profile_row(config: &ExperimentConfig, seed: u64, ell: f64, beta: f64) -> Result<ProfileRow> {
    let s = solve_stripe(config, seed, ell, beta)?;
    Ok(ProfileRow {
        seed,
        d: config.model.dimension,
        ell,
        beta,
        n_interior: s.network.count(NodeClass::Interior),
        l2_error: ReferenceProfile.l2_error(&s.network, &s.field.values),
    })
}

/// Finite-range kernels on sparse point sets may not percolate, in which
/// case `D_11 = 0` and the profile does not converge.
fn warn_if_d11_may_vanish(config: &ExperimentConfig) {
    let kernel = config.kernel();
    if kernel.beta().is_some() {
        return;
    }
    let d = config.model.dimension as i32;
    let r = kernel.cutoff_radius(1e-14);
    let ball = std::f64::consts::PI.powf(d as f64 / 2.0) * r.powi(d) / gamma_fn(d as f64 / 2.0 + 1.0);
    let degree = config.process_spec().intensity() * ball;
    if degree < 1.0 {
        log::warn!("mean degree {degree:.2} < 1: D_11 may vanish and the profile need not converge");
    }
}

/// Gamma function at integers and half-integers.
fn gamma_fn(x: f64) -> f64 {
    if x == 0.5 {
        std::f64::consts::PI.sqrt()
    } else if x <= 1.0 {
        1.0
    } else {
        (x - 1.0) * gamma_fn(x - 1.0)
    }
}

/// Theorem-2 recipe: `L^2` distance between the rescaled potential and the
/// affine profile, per cell and as medians per `l`.
///
/// Writes `profile.csv`, `theorem2.csv` and `theorem2_fit.json`.
pub fn run_theorem2_check(config: &ExperimentConfig) -> Result<Theorem2Report> {
    warn_if_d11_may_vanish(config);
    let mut run = RunDirectory::open(config)?;
    let mut table = Table::<ProfileRow>::open(&run.path("profile.csv"))?;
    let done = completed(&table, |r| cell_key(r.seed, r.ell, r.beta));
    let todo = pending_stripe_cells(config, &config.ells(), &done);
    let result = run_ordered(
        &todo,
        |&(seed, ell, beta)| profile_row(config, seed, ell, beta),
        |&(seed, ell, beta), row, secs| {
            table.append(row)?;
            run.record_cell(cell_label("profile.csv", seed, Some(ell), beta), secs);
            Ok(())
        },
    );
    run.save_manifest()?;
    result?;

    let seeds: BTreeSet<u64> = config.realization_seeds().into_iter().collect();
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for beta in config.betas() {
        let mut medians = Vec::new();
        for ell in config.ells() {
            let xs: Vec<f64> = table
                .rows()
                .iter()
                .filter(|r| r.beta == beta && r.ell == ell && seeds.contains(&r.seed))
                .map(|r| r.l2_error)
                .collect();
            let (q1, q3) = quartiles(&xs);
            medians.push(median(&xs));
            rows.push(Theorem2Row { beta, ell, n: xs.len(), median_error: median(&xs), q1_error: q1, q3_error: q3 });
        }
        let strictly_decreasing = medians.windows(2).all(|w| w[1] < w[0]);
        let (slope, r_squared) = if medians.len() >= 2 && medians.iter().all(|m| *m > 0.0) {
            let lx: Vec<f64> = config.ells().iter().map(|l| l.ln()).collect();
            let ly: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
            let fit = linear_fit(&lx, &ly);
            (fit.slope, fit.r_squared)
        } else {
            (f64::NAN, f64::NAN)
        };
        fits.push(DecayFit { beta, slope, r_squared, strictly_decreasing });
    }
    write_table(&run.path("theorem2.csv"), &rows)?;
    std::fs::write(run.path("theorem2_fit.json"), serde_json::to_string_pretty(&fits)?)?;
    Ok(Theorem2Report { rows, cells: table.rows().to_vec(), fits })
}

/// Median conductivity at one inverse temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MottPoint {
    pub beta: f64,
    /// `beta^theta`.
    pub x: f64,
    pub n: usize,
    pub median_sigma: f64,
    pub ln_median_sigma: f64,
    /// Cells whose formulas disagree beyond the equivalence tolerance.
    pub unreliable: usize,
    /// Set when the median underflowed and the point was left out of the fit.
    pub dropped: bool,
}

/// `ln sigma = intercept - kappa beta^theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MottFit {
    pub dimension: usize,
    pub alpha: f64,
    pub theta: f64,
    pub ell: f64,
    pub kappa: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `log10(sigma_max / sigma_min)` over the fitted points.
    pub decades: f64,
    pub points: Vec<MottPoint>,
}

/// Exponent of the stretched exponential: `(alpha+1)/(alpha+d+1)` for
/// `d >= 2`, Arrhenius (`1`) in one dimension.
pub fn mott_exponent(dimension: usize, alpha: f64) -> f64 {
    if dimension == 1 {
        1.0
    } else {
        (alpha + 1.0) / (alpha + dimension as f64 + 1.0)
    }
}

/// Smallest median conductivity still considered resolved.
const SIGMA_FLOOR: f64 = 1e-280;

/// Mott recipe: median conductivity at the largest box side over the beta
/// grid, fitted against `beta^theta`.
///
/// Writes `mott.csv`, `mott_summary.csv` and `mott_fit.json`.
pub fn run_mott_scaling(config: &ExperimentConfig) -> Result<MottFit> {
    let betas = config.betas();
    if betas.len() < MIN_MOTT_POINTS {
        return Err(Error::InsufficientGrid(format!(
            "{} inverse temperatures given, at least {MIN_MOTT_POINTS} needed",
            betas.len()
        )));
    }
    let ell = *config.ells().last().expect("validated non-empty");
    let mut run = RunDirectory::open(config)?;
    let table = fill_sigma_table(&mut run, config, "mott.csv", &[ell], false)?;

    let d = config.model.dimension;
    let alpha = config.model.marks.alpha();
    let theta = mott_exponent(d, alpha);
    let seeds: BTreeSet<u64> = config.realization_seeds().into_iter().collect();
    let points: Vec<MottPoint> = betas
        .iter()
        .map(|&beta| {
            let cells: Vec<&ConductivityRow> = table
                .rows()
                .iter()
                .filter(|r| r.beta == beta && r.ell == ell && seeds.contains(&r.seed))
                .collect();
            let xs: Vec<f64> = cells.iter().map(|r| r.sigma_boundary).collect();
            let unreliable = cells
                .iter()
                .filter(|r| r.max_discrepancy > equivalence_tolerance(config.run.solver_tol, r.condition_proxy))
                .count();
            let m = median(&xs);
            let dropped = !(m > SIGMA_FLOOR && m.is_finite());
            if dropped {
                log::warn!("beta = {beta}: median conductivity {m:e} underflows, point dropped");
            }
            MottPoint {
                beta,
                x: beta.powf(theta),
                n: xs.len(),
                median_sigma: m,
                ln_median_sigma: m.ln(),
                unreliable,
                dropped,
            }
        })
        .collect();
    write_table(&run.path("mott_summary.csv"), &points)?;

    let kept: Vec<&MottPoint> = points.iter().filter(|p| !p.dropped).collect();
    if kept.len() < 3 {
        return Err(Error::InsufficientGrid(format!("only {} resolved points remain", kept.len())));
    }
    let xs: Vec<f64> = kept.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.ln_median_sigma).collect();
    let fit = linear_fit(&xs, &ys);
    let span = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max) - ys.iter().copied().fold(f64::INFINITY, f64::min);
    let decades = span / std::f64::consts::LN_10;
    if decades < 1.0 {
        log::warn!("conductivity varies by only {decades:.2} decades over the beta grid");
    }
    let report = MottFit {
        dimension: d,
        alpha,
        theta,
        ell,
        kappa: -fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        decades,
        points,
    };
    std::fs::write(run.path("mott_fit.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}
