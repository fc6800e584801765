//! Shock interfaces below an island tip, shock ages, and the island rebuilt
//! from its misordered pair of interfaces.

use std::sync::Arc;

use landscape_lab::busemann::{build_difference_field, BusemannParams};
use landscape_lab::environment::{gen_environment, EnvParams};
use landscape_lab::instability::{build_instability_graph, GraphParams};
use landscape_lab::lpp::Sign;
use landscape_lab::shocks::{
    competition_field, reconstruct_island_from_tip, shock_age, shock_interfaces_from_point, Origin,
};

fn main() -> landscape_lab::Result<()> {
    let env = Arc::new(gen_environment(
        &EnvParams::SemiDiscrete {
            n_levels: 60,
            mesh: 0.01,
            x_min: 0.0,
            x_max: 6.0,
        },
        2,
    )?);
    let df = build_difference_field(&env, &BusemannParams::default())?;
    let g = build_instability_graph(&df, &GraphParams::default())?;
    let isl = g
        .islands
        .iter()
        .max_by_key(|i| i.area())
        .expect("no island in this window");
    println!(
        "island: tip {:?}, bottom {:?}, {} rows",
        isl.tip,
        isl.bottom,
        isl.height()
    );

    for sign in [Sign::Minus, Sign::Plus] {
        let cf = competition_field(&df, isl.tip, sign)?;
        let (l, r) = shock_interfaces_from_point(&cf)?;
        println!(
            "{sign:?} interfaces, first levels below the tip: left {:?} right {:?}",
            &l.xs[..4.min(l.xs.len())],
            &r.xs[..4.min(r.xs.len())]
        );
        // a crossing is a bond; its two cells send their geodesics apart
        let below = (l.bottom_level()..isl.tip.level).rev().take(4);
        let ages: Vec<Option<usize>> = below
            .filter_map(|k| {
                l.bond(k)
                    .map(|(j, _)| shock_age(df.field(sign), Origin::bond(k, j), 1e-9))
            })
            .collect::<Result<_, _>>()?;
        println!("  shock ages of the left crossings: {ages:?}");
    }

    let rec = reconstruct_island_from_tip(&df, isl.tip, &g.level_tol)?
        .expect("tip interfaces are misordered");
    println!(
        "rebuilt from the tip: identical = {}, bottom span {:?}",
        &rec.island == isl,
        rec.bottom_span
    );
    Ok(())
}
