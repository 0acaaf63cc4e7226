use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use reeb_core::report::{exit_code, run_audit, run_certify, run_delta_star, run_kappa, to_json, Criterion, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "reeb", version, about = "Right-handedness certificates for Reeb flows on S³")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured criteria and write one certificate per criterion.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Criterion to run (repeatable); overrides the config list.
        #[arg(long = "criterion")]
        criteria: Vec<String>,
    },
    /// Audit the Birkhoff annulus of an ellipsoid of revolution.
    Audit {
        #[command(flatten)]
        common: Common,
        /// Grid size as NS,NTHETA.
        #[arg(long, default_value = "32,16")]
        grid: String,
    },
    /// Estimate the asymptotic linking ratio κ̂ along a grid of times.
    Kappa {
        #[command(flatten)]
        common: Common,
        /// Comma-separated times T.
        #[arg(long)]
        t_grid: Option<String>,
    },
    /// Print the pinching threshold x*, δ* = x*².
    DeltaStar {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Integration tolerance (relative and absolute).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sample budget.
    #[arg(long)]
    budget: Option<usize>,
    /// Output directory for JSON and CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let Some(path) = &self.config else { bail!("--config is required") };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = RunConfig::from_json(&text)?;
        if let Some(t) = self.tol {
            cfg.tolerances.integration = t;
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.budget.is_some() {
            cfg.budget = self.budget;
        }
        if self.out.is_some() {
            cfg.output_dir = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("REEB_THREADS") {
        let n: usize = v.parse().with_context(|| format!("REEB_THREADS={v:?} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    threads()?;
    match cli.cmd {
        Cmd::Certify { common, criteria } => {
            let mut cfg = common.load()?;
            if !criteria.is_empty() {
                cfg.criteria = criteria.iter().map(|c| c.parse::<Criterion>()).collect::<Result<_, _>>()?;
            }
            let certs = run_certify(&cfg, cfg.output_dir.as_deref())?;
            for c in &certs {
                print!("{}", to_json(c)?);
            }
            Ok(exit_code(&certs))
        }
        Cmd::Audit { common, grid } => {
            let cfg = common.load()?;
            let g: Vec<usize> = grid.split(',').map(|s| s.trim().parse()).collect::<Result<_, _>>().context("--grid expects NS,NTHETA")?;
            if g.len() != 2 || g.contains(&0) {
                bail!("--grid expects two positive counts");
            }
            let rep = run_audit(&cfg, (g[0], g[1]), cfg.output_dir.as_deref())?;
            print!("{}", to_json(&rep)?);
            Ok(if rep.audit.violated() { 2 } else { 0 })
        }
        Cmd::Kappa { common, t_grid } => {
            let mut cfg = common.load()?;
            if let Some(g) = t_grid {
                cfg.t_grid = Some(g.split(',').map(|s| s.trim().parse()).collect::<Result<_, _>>().context("--t-grid expects numbers")?);
                cfg.validate()?;
            }
            let rep = run_kappa(&cfg, cfg.output_dir.as_deref())?;
            print!("{}", to_json(&rep)?);
            Ok(if rep.estimate.stabilized { 0 } else { 3 })
        }
        Cmd::DeltaStar { common } => {
            let d = run_delta_star();
            let text = to_json(&d)?;
            if let Some(dir) = &common.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("delta_star.json"), &text)?;
            }
            print!("{text}");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    // usage errors share exit code 1 with other failures; 2 means not certified
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
