//! Classify island tips, bottoms, boundaries and sampled bonds into the
//! twenty geodesic configurations.

use std::sync::Arc;

use landscape_lab::busemann::{build_difference_field, BusemannParams};
use landscape_lab::environment::{gen_environment, EnvParams};
use landscape_lab::instability::{build_instability_graph, GraphParams};
use landscape_lab::shocks::{taxonomy_census, CensusParams, CensusRole, Special};

fn main() -> landscape_lab::Result<()> {
    let env = Arc::new(gen_environment(
        &EnvParams::SemiDiscrete {
            n_levels: 80,
            mesh: 0.005,
            x_min: 0.0,
            x_max: 8.0,
        },
        4,
    )?);
    let df = build_difference_field(&env, &BusemannParams::default())?;
    let g = build_instability_graph(&df, &GraphParams::default())?;
    let c = taxonomy_census(
        &df,
        &g,
        &CensusParams {
            samples: 500,
            ..Default::default()
        },
    )?;

    println!(
        "{} points classified from {} islands",
        c.entries.len(),
        g.islands.len()
    );
    for role in CensusRole::ALL {
        let h = c.histogram(&[role]);
        if !h.is_empty() {
            println!("{role:?}: {h:?}");
        }
    }
    let (ok, n) = c.fraction(&[CensusRole::Tip], |k| k.special == Special::Pns);
    println!("tips that are proper non-shocks: {ok}/{n}");
    let (ok, n) = c.fraction(&[CensusRole::Bottom], |k| k.special == Special::Snowbird);
    println!("resolved bottoms that are snowbirds: {ok}/{n}");
    Ok(())
}
