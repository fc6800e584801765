//! Draw a window of the instability graph with its islands, two interfaces
//! and a geodesic of each sign.

use std::sync::Arc;

use landscape_lab::busemann::{build_difference_field, BusemannParams};
use landscape_lab::environment::{gen_environment, EnvParams, SitePoint};
use landscape_lab::instability::{build_instability_graph, GraphParams};
use landscape_lab::lpp::{Side, Sign};
use landscape_lab::render::{read_meta, render_svg, Layer, Scene, Style};
use landscape_lab::shocks::{trace_interface, InterfaceSide};

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
    let tip = g
        .islands
        .iter()
        .max_by_key(|i| i.area())
        .map(|i| i.tip)
        .unwrap();

    let points = g
        .levels
        .iter()
        .enumerate()
        .flat_map(|(k, xs)| xs.iter().map(move |&x| SitePoint::new(k, x)))
        .collect();
    let scene = Scene {
        n_levels: df.n_levels(),
        columns: (0, df.limit(0) + 1),
        heatmap: None,
        islands: g.islands.clone(),
        interfaces: vec![
            trace_interface(&df.pf_minus, tip, InterfaceSide::Left)?,
            trace_interface(&df.pf_plus, tip, InterfaceSide::Right)?,
        ],
        geodesics: vec![
            (
                Sign::Minus,
                df.pf_minus
                    .extract_geodesic(SitePoint::new(0, 50), Side::Leftmost, 1e-9)?,
            ),
            (
                Sign::Plus,
                df.pf_plus
                    .extract_geodesic(SitePoint::new(0, 50), Side::Rightmost, 1e-9)?,
            ),
        ],
        points,
        max_blocks: (400, 200),
    };
    let svg = render_svg(
        &scene,
        &[
            Layer::Islands,
            Layer::Interfaces,
            Layer::Geodesics,
            Layer::Points,
        ],
        &Style::default(),
    )?;
    let path = std::env::temp_dir().join("landscape-lab-window.svg");
    std::fs::write(&path, &svg)?;
    let meta = read_meta(&svg).unwrap();
    println!(
        "{} bytes -> {}; {} islands, layers {:?}",
        svg.len(),
        path.display(),
        meta.islands,
        meta.layers
    );
    Ok(())
}
