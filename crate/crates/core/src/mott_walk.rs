//! Continuous-time Mott random walk on a periodic environment.
//!
//! From node `i` the walker waits an exponential time of rate
//! `lambda_i = sum_j c_ij` and then jumps to `j` with probability
//! `c_ij / lambda_i`. Jumps follow minimum-image displacements, so the
//! unwrapped displacement keeps track of windings around the torus.
//!
//! The mean-squared-displacement slope `E[(X_T . a)^2] / T` is twice the
//! corrector value `a . D a` (on the constant-rate lattice the corrector
//! gives `c` and the slope is `2c`), hence [`CONVENTION_FACTOR`].

use rand::distr::Open01;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::corrector::{minimum_image, PeriodicEnvironment};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, rng_from_seed, LabRng};
use crate::stats::{linear_fit, mean_and_stderr, DiffusionEstimate};

/// `D = CONVENTION_FACTOR * MSD / T`.
pub const CONVENTION_FACTOR: f64 = 0.5;

/// Walks with fewer expected jumps than this are flagged as too short.
pub const MIN_JUMPS: f64 = 100.0;

/// Per-node jump sampling tables; immutable and shared between walkers.
pub struct JumpTables {
    alias: Vec<WeightedAliasIndex<f64>>,
    total_rate: Vec<f64>,
}

impl JumpTables {
    pub fn new(env: &PeriodicEnvironment) -> Result<Self> {
        let (alias, total_rate) = (0..env.len())
            .into_par_iter()
            .map(|i| {
                let w: Vec<f64> = env.neighbors(i).map(|(_, _, c)| c).collect();
                let total: f64 = w.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::ZeroExitRate(i));
                }
                let table = WeightedAliasIndex::new(w).map_err(|e| invalid(format!("node {i}: {e}")))?;
                Ok((table, total))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        Ok(JumpTables { alias, total_rate })
    }

    pub fn total_rate(&self, i: usize) -> f64 {
        self.total_rate[i]
    }
}

#[derive(Clone, Debug)]
pub struct WalkState {
    pub start: usize,
    pub node: usize,
    /// Unwrapped displacement since `start`.
    pub displacement: Vec<f64>,
    pub time: f64,
    pub jumps: u64,
    rng: LabRng,
}

/// Outcome of one jump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jump {
    pub from: usize,
    pub to: usize,
    pub holding: f64,
}

impl WalkState {
    pub fn new(env: &PeriodicEnvironment, start: usize, seed: u64) -> Self {
        WalkState {
            start,
            node: start,
            displacement: vec![0.0; env.dimension],
            time: 0.0,
            jumps: 0,
            rng: rng_from_seed(seed),
        }
    }

    /// Starts from a node drawn uniformly with the walker's own stream.
    pub fn uniform_start(env: &PeriodicEnvironment, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let start = rng.random_range(0..env.len());
        WalkState { start, node: start, displacement: vec![0.0; env.dimension], time: 0.0, jumps: 0, rng }
    }

    fn holding_time(&mut self, rate: f64) -> f64 {
        let u: f64 = self.rng.sample(Open01);
        -u.ln() / rate
    }

    fn jump_target(&mut self, env: &PeriodicEnvironment, tables: &JumpTables) -> (usize, usize) {
        let slot = tables.alias[self.node].sample(&mut self.rng);
        (slot, env.neighbor(self.node, slot).0)
    }

    fn apply_jump(&mut self, env: &PeriodicEnvironment, slot: usize) -> usize {
        let (j, z, _) = env.neighbor(self.node, slot);
        for (x, dz) in self.displacement.iter_mut().zip(z) {
            *x += dz;
        }
        self.node = j;
        self.jumps += 1;
        j
    }

    /// One holding period followed by a jump.
    pub fn step(&mut self, env: &PeriodicEnvironment, tables: &JumpTables) -> Result<Jump> {
        let rate = tables.total_rate[self.node];
        if !(rate > 0.0) {
            return Err(Error::ZeroExitRate(self.node));
        }
        let holding = self.holding_time(rate);
        let from = self.node;
        let (slot, _) = self.jump_target(env, tables);
        self.time += holding;
        let to = self.apply_jump(env, slot);
        Ok(Jump { from, to, holding })
    }

    /// Runs until `horizon`, calling `observe(t, displacement)` at each
    /// checkpoint (ascending, all `<= horizon`).
    pub fn run_until(
        &mut self,
        env: &PeriodicEnvironment,
        tables: &JumpTables,
        horizon: f64,
        checkpoints: &[f64],
        mut observe: impl FnMut(usize, &[f64]),
    ) -> Result<()> {
        let mut next = checkpoints.iter().position(|&t| t >= self.time).unwrap_or(checkpoints.len());
        loop {
            let rate = tables.total_rate[self.node];
            if !(rate > 0.0) {
                return Err(Error::ZeroExitRate(self.node));
            }
            let holding = self.holding_time(rate);
            let arrival = self.time + holding;
            while next < checkpoints.len() && checkpoints[next] < arrival.min(horizon + f64::MIN_POSITIVE) {
                observe(next, &self.displacement);
                next += 1;
            }
            if arrival > horizon {
                while next < checkpoints.len() {
                    observe(next, &self.displacement);
                    next += 1;
                }
                self.time = horizon;
                return Ok(());
            }
            let (slot, _) = self.jump_target(env, tables);
            self.time = arrival;
            self.apply_jump(env, slot);
        }
    }

    /// The unwrapped displacement projects back onto the torus difference
    /// between the current and the starting node.
    pub fn is_consistent(&self, env: &PeriodicEnvironment) -> bool {
        (0..env.dimension).all(|k| {
            let torus = env.positions[self.node][k] - env.positions[self.start][k];
            let err = minimum_image(self.displacement[k] - torus, env.side);
            err.abs() <= 1e-9 * (1.0 + self.displacement[k].abs())
        })
    }
}

/// Final displacement of one walker plus its squared displacement at the
/// fitting checkpoints.
#[derive(Clone, Debug)]
struct WalkerOutcome {
    displacement: Vec<f64>,
    squared_at: Vec<Vec<f64>>,
    jumps: u64,
}

#[derive(Clone, Debug)]
pub struct WalkEstimate {
    pub estimate: DiffusionEstimate,
    pub n_walkers: usize,
    pub horizon: f64,
    /// Per direction: least-squares slope of MSD(t) over `t` in `[T/2, T]`.
    pub fit_slopes: Vec<f64>,
    /// Standard error of `D_aa` per direction.
    pub diagonal_stderr: Vec<f64>,
    pub too_short: bool,
}

/// Number of checkpoints spread over `[T/2, T]` for the MSD fit.
const FIT_POINTS: usize = 11;

/// Runs `n_walkers` independent walkers to time `horizon` and estimates `D`
/// from the mean squared displacement.
pub fn estimate_diffusion(
    env: &PeriodicEnvironment,
    tables: &JumpTables,
    n_walkers: usize,
    horizon: f64,
    master_seed: u64,
) -> Result<WalkEstimate> {
    if n_walkers < 2 || !(horizon > 0.0) {
        return Err(invalid("need at least two walkers and a positive horizon"));
    }
    let d = env.dimension;
    let mean_rate = (0..env.len()).map(|i| tables.total_rate(i)).sum::<f64>() / env.len() as f64;
    let too_short = mean_rate * horizon < MIN_JUMPS;
    if too_short {
        log::warn!(
            "horizon {horizon} gives about {:.1} jumps per walker (< {MIN_JUMPS})",
            mean_rate * horizon
        );
    }
    let checkpoints: Vec<f64> = (0..FIT_POINTS)
        .map(|k| 0.5 * horizon * (1.0 + k as f64 / (FIT_POINTS - 1) as f64))
        .collect();

    let outcomes = (0..n_walkers as u64)
        .into_par_iter()
        .map(|w| {
            let mut state = WalkState::uniform_start(env, derive_seed(master_seed, w));
            let mut squared_at = vec![vec![0.0; d]; FIT_POINTS];
            state.run_until(env, tables, horizon, &checkpoints, |k, x| {
                for a in 0..d {
                    squared_at[k][a] = x[a] * x[a];
                }
            })?;
            Ok(WalkerOutcome { displacement: state.displacement, squared_at, jumps: state.jumps })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut entries = vec![vec![0.0; d]; d];
    let mut stderr = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in 0..d {
            let xs: Vec<f64> = outcomes
                .iter()
                .map(|o| CONVENTION_FACTOR * o.displacement[a] * o.displacement[b] / horizon)
                .collect();
            let (m, se) = mean_and_stderr(&xs);
            entries[a][b] = m;
            stderr[a][b] = se;
        }
    }
    let slopes: Vec<f64> = (0..d).map(|a| entries[a][a] / CONVENTION_FACTOR).collect();
    let fit_slopes = (0..d)
        .map(|a| {
            let msd: Vec<f64> = (0..FIT_POINTS)
                .map(|k| outcomes.iter().map(|o| o.squared_at[k][a]).sum::<f64>() / n_walkers as f64)
                .collect();
            linear_fit(&checkpoints, &msd).slope
        })
        .collect();
    let mean_jumps = outcomes.iter().map(|o| o.jumps as f64).sum::<f64>() / n_walkers as f64;
    let intensity = env.intensity();
    let diagonal_stderr = (0..d).map(|a| stderr[a][a]).collect();
    Ok(WalkEstimate {
        estimate: DiffusionEstimate {
            dimension: d,
            scaled_d11: intensity * entries[0][0],
            scaled_d11_stderr: intensity * stderr[0][0],
            entries,
            stderr,
            samples: n_walkers,
            intensity,
            slopes: Some(slopes),
            horizon: Some(horizon),
            mean_jumps: Some(mean_jumps),
        },
        n_walkers,
        horizon,
        fit_slopes,
        diagonal_stderr,
        too_short,
    })
}

/// One CSV row of walk results; columns depend on the dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkRow {
    pub seed: u64,
    pub beta: f64,
    pub side: f64,
    pub horizon: f64,
    pub n_walkers: usize,
    pub slopes: Vec<f64>,
    pub diffusion: Vec<f64>,
    pub stderr: Vec<f64>,
    pub mean_jumps_per_walker: f64,
    /// Empirical intensity of the torus, for `m D` comparisons.
    pub intensity: f64,
}

impl WalkRow {
    pub fn new(w: &WalkEstimate, seed: u64, beta: f64, side: f64) -> Self {
        let d = w.estimate.dimension;
        WalkRow {
            seed,
            beta,
            side,
            horizon: w.horizon,
            n_walkers: w.n_walkers,
            slopes: w.estimate.slopes.clone().unwrap_or_default(),
            diffusion: (0..d).map(|a| w.estimate.entries[a][a]).collect(),
            stderr: w.diagonal_stderr.clone(),
            mean_jumps_per_walker: w.estimate.mean_jumps.unwrap_or(0.0),
            intensity: w.estimate.intensity,
        }
    }

    pub fn header(d: usize) -> Vec<String> {
        let mut h: Vec<String> = ["seed", "beta", "L", "T", "n_walkers"].iter().map(|s| s.to_string()).collect();
        h.extend((1..=d).map(|a| format!("slope_{a}")));
        h.extend((1..=d).map(|a| format!("D_{a}{a}")));
        h.extend((1..=d).map(|a| format!("stderr_{a}")));
        h.push("mean_jumps_per_walker".into());
        h.push("intensity".into());
        h
    }

    pub fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.seed.to_string(),
            self.beta.to_string(),
            self.side.to_string(),
            self.horizon.to_string(),
            self.n_walkers.to_string(),
        ];
        for v in self.slopes.iter().chain(&self.diffusion).chain(&self.stderr) {
            r.push(v.to_string());
        }
        r.push(self.mean_jumps_per_walker.to_string());
        r.push(self.intensity.to_string());
        r
    }
}

pub fn write_walk_csv(path: &std::path::Path, rows: &[WalkRow]) -> Result<()> {
    let d = rows.first().map_or(1, |r| r.slopes.len());
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(WalkRow::header(d))?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}
