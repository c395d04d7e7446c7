use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use mottlab_core::conductivity::ConductivityRow;
use mottlab_core::environment::write_snapshot;
use mottlab_core::lab::{self, write_table, ExperimentConfig};
use mottlab_core::mott_walk::write_walk_csv;
use mottlab_core::network::write_network;
use mottlab_core::solver::write_potential_csv;

#[derive(Parser)]
#[command(name = "mottlab", version, about = "Random resistor networks, correctors and Mott random walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Recipes: master seed. Single-realization commands: the realization
    /// seed itself, as printed in the `seed` column of every table.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding `run.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Cell {
    #[command(flatten)]
    common: Common,
    /// Box side; defaults to every side of the configuration.
    #[arg(long)]
    ell: Option<f64>,
    /// Inverse temperature; defaults to the configured grid.
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a marked configuration and write it as JSON.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Sample the torus instead of the stripe window.
        #[arg(long)]
        torus: bool,
    },
    /// Build the stripe network and solve for the potential.
    Solve(Cell),
    /// Effective conductivity by all three formulas.
    Sigma(Cell),
    /// Diffusion matrix from the corrector on the torus.
    Corrector(Cell),
    /// Diffusion matrix from Mott random walkers on the torus.
    Walk(Cell),
    /// Rescaled conductivity against corrector and walk estimates.
    Sweep(Common),
    /// Convergence of the rescaled potential to the affine profile.
    Profile(Common),
    /// Conductivity against inverse temperature.
    Mott(Common),
}

struct Loaded {
    config: ExperimentConfig,
    /// Realization seed for single-cell commands.
    seed: u64,
    out: PathBuf,
}

fn load(common: &Common, seed_is_master: bool) -> Result<Loaded> {
    let config = ExperimentConfig::load(&common.config)
        .with_context(|| format!("reading {}", common.config.display()))?;
    let config = if seed_is_master {
        config.with_overrides(common.seed, common.out.clone())
    } else {
        config.with_overrides(None, common.out.clone())
    };
    let seed = common.seed.unwrap_or_else(|| config.realization_seed(0));
    let out = config.run.output_dir.clone();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(Loaded { config, seed, out })
}

fn ells(cell: &Cell, config: &ExperimentConfig) -> Vec<f64> {
    cell.ell.map_or_else(|| config.ells(), |l| vec![l])
}

fn betas(cell: &Cell, config: &ExperimentConfig) -> Vec<f64> {
    cell.beta.map_or_else(|| config.betas(), |b| vec![b])
}

fn tagged(out: &Path, stem: &str, ell: f64, beta: f64, ext: &str) -> PathBuf {
    out.join(format!("{stem}_l{ell}_b{beta}.{ext}"))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { common, torus } => {
            let l = load(&common, false)?;
            let (env, name) = if torus {
                (lab::torus_configuration(&l.config, l.seed)?, "torus.json")
            } else {
                (lab::stripe_configuration(&l.config, l.seed)?, "configuration.json")
            };
            let path = l.out.join(name);
            write_snapshot(&env, &path)?;
            println!("{} points -> {}", env.len(), path.display());
        }
        Command::Solve(cell) => {
            let l = load(&cell.common, false)?;
            for beta in betas(&cell, &l.config) {
                for ell in ells(&cell, &l.config) {
                    let s = lab::solve_stripe(&l.config, l.seed, ell, beta)?;
                    write_network(
                        &s.network,
                        &tagged(&l.out, "nodes", ell, beta, "txt"),
                        &tagged(&l.out, "edges", ell, beta, "txt"),
                    )?;
                    write_potential_csv(&s.network, &s.field, &tagged(&l.out, "potential", ell, beta, "csv"))?;
                    println!(
                        "l={ell} beta={beta}: {} nodes, {} edges, {} CG iterations, residual {:.2e}",
                        s.network.nodes.len(),
                        s.network.edges.len(),
                        s.field.iterations,
                        s.field.residual_norm
                    );
                }
            }
        }
        Command::Sigma(cell) => {
            let l = load(&cell.common, false)?;
            let mut rows: Vec<ConductivityRow> = Vec::new();
            for beta in betas(&cell, &l.config) {
                for ell in ells(&cell, &l.config) {
                    let row = lab::conductivity_row(&l.config, l.seed, ell, beta)?;
                    println!(
                        "l={ell} beta={beta}: sigma={:.10e} rescaled={:.10e}",
                        row.sigma_energy, row.rescaled
                    );
                    rows.push(row);
                }
            }
            write_table(&l.out.join("sigma_single.csv"), &rows)?;
        }
        Command::Corrector(cell) => {
            let l = load(&cell.common, false)?;
            let rows = betas(&cell, &l.config)
                .into_iter()
                .map(|beta| lab::corrector_row(&l.config, l.seed, beta))
                .collect::<Result<Vec<_>, _>>()?;
            for r in &rows {
                println!("beta={}: D={:?}, m D_11={:.6}", r.beta, r.entries, r.scaled_d11());
            }
            write_table(&l.out.join("corrector_single.csv"), &rows)?;
        }
        Command::Walk(cell) => {
            let l = load(&cell.common, false)?;
            let rows = betas(&cell, &l.config)
                .into_iter()
                .map(|beta| lab::walk_row(&l.config, l.seed, beta))
                .collect::<Result<Vec<_>, _>>()?;
            for r in &rows {
                println!(
                    "beta={}: D_aa={:?} +- {:?}, {:.0} jumps per walker",
                    r.beta, r.diffusion, r.stderr, r.mean_jumps_per_walker
                );
            }
            write_walk_csv(&l.out.join("walk_single.csv"), &rows)?;
        }
        Command::Sweep(common) => {
            let l = load(&common, true)?;
            let t = lab::run_theorem1_sweep(&l.config)?;
            println!("beta\tell\tmedian l^(2-d) sigma\tm D11 (corrector)\tm D11 (walk)");
            for r in &t.rows {
                println!(
                    "{}\t{}\t{:.5} +- {:.5}\t{:.5} +- {:.5}\t{:.5} +- {:.5}",
                    r.beta,
                    r.ell,
                    r.median_rescaled,
                    r.median_se,
                    r.m_d11_corrector,
                    r.m_d11_corrector_se,
                    r.m_d11_walk,
                    r.m_d11_walk_se
                );
            }
        }
        Command::Profile(common) => {
            let l = load(&common, true)?;
            let rep = lab::run_theorem2_check(&l.config)?;
            for r in &rep.rows {
                println!("beta={} ell={}: median L2 error {:.5}", r.beta, r.ell, r.median_error);
            }
            for f in &rep.fits {
                println!(
                    "beta={}: error ~ l^{:.3} (R^2 {:.3}), strictly decreasing: {}",
                    f.beta, f.slope, f.r_squared, f.strictly_decreasing
                );
            }
        }
        Command::Mott(common) => {
            let l = load(&common, true)?;
            let fit = lab::run_mott_scaling(&l.config)?;
            for p in &fit.points {
                println!(
                    "beta={} beta^theta={:.4} median sigma={:.4e}{}",
                    p.beta,
                    p.x,
                    p.median_sigma,
                    if p.dropped { " (dropped)" } else { "" }
                );
            }
            println!(
                "theta={:.4}: ln sigma = {:.4} - {:.4} beta^theta, R^2 = {:.4}",
                fit.theta, fit.intercept, fit.kappa, fit.r_squared
            );
        }
    }
    Ok(())
}
