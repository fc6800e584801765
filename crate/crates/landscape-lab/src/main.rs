use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use landscape_lab::config::RunConfig;
use landscape_lab::run::{self, seed_dir};
use landscape_lab::LabError;

#[derive(Parser)]
#[command(
    name = "landscape-lab",
    version,
    about = "Simulate last-passage percolation and analyse its instability graph"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file with dotted `key = value` lines, applied over the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run this seed only.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and store the environment.
    Simulate,
    /// Build the difference field and the instability graph.
    Analyze,
    /// Classify island points and sampled bonds.
    Classify,
    /// Write the SVG picture.
    Render,
    /// Run every check and write the report.
    Check,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Smoke,
    Acceptance,
    Atlas,
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::Smoke => "smoke",
            Preset::Acceptance => "acceptance",
            Preset::Atlas => "atlas",
        }
    }
}

fn config(cli: &Cli) -> landscape_lab::Result<RunConfig> {
    let mut cfg = match cli.preset {
        Some(p) => RunConfig::from_preset(p.name())?,
        None => RunConfig::default(),
    };
    if let Some(path) = &cli.config {
        cfg.apply_text(
            &std::fs::read_to_string(path)
                .map_err(|e| LabError::Config(vec![format!("{}: {e}", path.display())]))?,
        )?;
    }
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> landscape_lab::Result<bool> {
    let cfg = config(cli)?;
    run::init_threads(cfg.threads)?;
    let mut ok = true;
    for &seed in &cfg.seeds {
        let dir = seed_dir(&cfg, seed);
        match cli.command {
            Command::Simulate => {
                let env = run::stage_simulate(&cfg, seed)?;
                println!(
                    "seed {seed}: {} levels x {} columns -> {}",
                    env.n_levels(),
                    env.width(),
                    dir.display()
                );
            }
            Command::Analyze => {
                let a = run::stage_analyze(&cfg, seed)?;
                let (points, islands) = a
                    .graph
                    .as_ref()
                    .map_or((0, 0), |g| (g.n_points(), g.islands.len()));
                println!(
                    "seed {seed}: {points} instability points, {islands} islands -> {}",
                    dir.display()
                );
            }
            Command::Classify => match run::stage_classify(&cfg, seed)? {
                Some(c) => println!(
                    "seed {seed}: {} points classified -> {}",
                    c.entries.len(),
                    dir.display()
                ),
                None => {
                    println!("seed {seed}: shock analysis off for this backend; nothing classified")
                }
            },
            Command::Render => {
                let m = run::stage_render(&cfg, seed)?;
                println!(
                    "seed {seed}: {} islands ({} in window) -> {}",
                    m.islands,
                    m.islands_drawn,
                    dir.join("graph.svg").display()
                );
            }
            Command::Check => {
                let report = run::stage_check(&cfg, seed)?;
                for c in &report.checks {
                    let tag = match (c.passed, c.hard) {
                        (true, _) => "ok  ",
                        (false, true) => "FAIL",
                        (false, false) => "warn",
                    };
                    println!("seed {seed} {tag} {:28} {}", c.name, c.detail);
                }
                ok &= report.hard_failures().is_empty();
            }
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                LabError::Config(_) | LabError::Parameter(_) | LabError::Capability(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}
