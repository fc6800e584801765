//! Points of increase of D, stability islands and the box-counting slope on
//! the anchor level.

use std::sync::Arc;

use landscape_lab::busemann::{build_difference_field, BusemannParams};
use landscape_lab::environment::{gen_environment, EnvParams};
use landscape_lab::instability::{build_instability_graph, random_walk_dimension, GraphParams};

fn main() -> landscape_lab::Result<()> {
    let env = Arc::new(gen_environment(
        &EnvParams::SemiDiscrete {
            n_levels: 100,
            mesh: 0.001,
            x_min: 0.0,
            x_max: 10.0,
        },
        1,
    )?);
    let df = build_difference_field(
        &env,
        &BusemannParams {
            delta_sep: Some(0.25),
            ..Default::default()
        },
    )?;
    let g = build_instability_graph(
        &df,
        &GraphParams {
            dim_levels: vec![0],
            ..Default::default()
        },
    )?;

    let [tips, bottoms, right, left, dust] = g.role_counts();
    println!("{} instability points: tips {tips}, bottoms {bottoms}, right {right}, left {left}, dust {dust}", g.n_points());
    println!(
        "{} islands, {} regions cut off by the window",
        g.islands.len(),
        g.truncated.len()
    );
    let mut by_height = g
        .islands
        .iter()
        .map(|i| (i.height(), i))
        .collect::<Vec<_>>();
    by_height.sort_by_key(|(h, _)| std::cmp::Reverse(*h));
    for (h, i) in by_height.iter().take(3) {
        println!(
            "  tip {:?}, bottom {:?}, {h} rows, widest {}",
            i.tip,
            i.bottom,
            i.max_width()
        );
    }
    for d in &g.dims {
        println!(
            "level {:?}: slope {:.3} from {} points",
            d.level, d.slope, d.n_points
        );
    }
    let rw = random_walk_dimension(10_000, 10.0, 1)?;
    println!("random-walk bridge zeros, same estimator: {:.3}", rw.slope);
    Ok(())
}
