//! The whole pipeline on the smoke preset, as the `check` subcommand runs it.

use landscape_lab::config::RunConfig;
use landscape_lab::run::run;

fn main() -> landscape_lab::Result<()> {
    let mut cfg = RunConfig::from_preset("smoke")?;
    cfg.out = std::env::temp_dir().join("landscape-lab-smoke");
    for report in run(&cfg)? {
        for c in &report.checks {
            println!(
                "{:5} {:28} {}",
                if c.passed {
                    "ok"
                } else if c.hard {
                    "FAIL"
                } else {
                    "warn"
                },
                c.name,
                c.detail
            );
        }
        println!(
            "islands per width scale: {:?}",
            report.island_census.by_width_scale
        );
        println!(
            "artifacts in {}",
            cfg.out.join(format!("seed-{}", report.seed)).display()
        );
    }
    Ok(())
}
