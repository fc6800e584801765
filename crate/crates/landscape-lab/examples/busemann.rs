//! Busemann pair from two far targets: the difference field D, its
//! monotonicity, the cocycle identity and the linear growth.

use std::sync::Arc;

use landscape_lab::busemann::{build_difference_field, cocycle_defect, summarize, BusemannParams};
use landscape_lab::environment::{gen_environment, EnvParams, SitePoint};
use landscape_lab::lpp::Sign;

fn main() -> landscape_lab::Result<()> {
    let env = Arc::new(gen_environment(
        &EnvParams::SemiDiscrete {
            n_levels: 80,
            mesh: 0.005,
            x_min: 0.0,
            x_max: 8.0,
        },
        11,
    )?);
    let df = build_difference_field(&env, &BusemannParams::default())?;
    let s = summarize(&df);
    println!(
        "targets {:?} / {:?}, anchor {:?}",
        s.target_minus, s.target_plus, s.anchor
    );
    for g in &s.growth {
        println!(
            "level {}: slope of W- {:+.3}, of W+ {:+.3}",
            g.level, g.slope_minus, g.slope_plus
        );
    }
    println!(
        "largest excess over the monotonicity tolerance: {:e}",
        df.monotonicity_defect()
    );

    let (a, b, c) = (
        SitePoint::new(3, 100),
        SitePoint::new(20, 700),
        SitePoint::new(40, 350),
    );
    for sign in [Sign::Minus, Sign::Plus] {
        println!(
            "cocycle defect {sign:?}: {:e}",
            cocycle_defect(&df, sign, a, b, c)?
        );
    }
    let row = df.level_d(0);
    let step = row.len() / 10;
    let sample: Vec<String> = row
        .iter()
        .step_by(step)
        .map(|v| format!("{v:.3}"))
        .collect();
    println!("D on level 0, every {step} cells: {}", sample.join(" "));
    Ok(())
}
