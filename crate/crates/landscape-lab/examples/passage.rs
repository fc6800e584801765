//! Passage values to a target, the two extreme geodesics from one source, and
//! the composition law at a few intermediate levels.

use std::sync::Arc;

use landscape_lab::environment::{gen_environment, EnvParams, SitePoint};
use landscape_lab::lpp::{
    check_composition, sample_composition_pairs, solve_to_target, Side, Sign,
};

fn main() -> landscape_lab::Result<()> {
    let env = Arc::new(gen_environment(
        &EnvParams::SemiDiscrete {
            n_levels: 30,
            mesh: 0.01,
            x_min: 0.0,
            x_max: 4.0,
        },
        3,
    )?);
    let target = SitePoint::new(29, 300);
    let pf = solve_to_target(&env, target, Sign::Untagged)?;

    let src = SitePoint::new(0, 20);
    println!("G{src:?} = {:.6}", pf.at(src));
    for side in [Side::Leftmost, Side::Rightmost] {
        let g = pf.extract_geodesic(src, side, 1e-9)?;
        let exits: Vec<usize> = g.runs.iter().map(|r| r.exit).collect();
        println!(
            "{side:?}: weight {:.6}, exits {:?}",
            g.weight(&env),
            &exits[..8]
        );
    }

    let pairs = sample_composition_pairs(&pf, 25, 1);
    let rep = check_composition(&pf, &pairs)?;
    println!(
        "composition over {} pairs: max defect {:e}, pass {}",
        pairs.len(),
        rep.max_defect,
        rep.pass
    );
    Ok(())
}
