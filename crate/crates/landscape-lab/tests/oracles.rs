use std::sync::Arc;

use proptest::prelude::*;

use landscape_lab::busemann::{build_difference_field, cocycle_defect, BusemannParams};
use landscape_lab::environment::{gen_environment, EnvParams, EnvironmentField, SitePoint};
use landscape_lab::io::fmt_f64;
use landscape_lab::lpp::{solve_to_target, Side, Sign};
use landscape_lab::shocks::{competition_field, detect_shock, shock_interfaces_from_point};

/// Every up/right path from `from` to `target`, as the exit column on each level.
fn exits(target: SitePoint, from: SitePoint) -> Vec<Vec<usize>> {
    if from.level == target.level {
        return if from.x <= target.x {
            vec![vec![target.x]]
        } else {
            vec![]
        };
    }
    let mut out = Vec::new();
    for j in from.x..=target.x {
        for mut rest in exits(target, SitePoint::new(from.level + 1, j)) {
            rest.insert(0, j);
            out.push(rest);
        }
    }
    out
}

fn weight(env: &EnvironmentField, semi: bool, from: SitePoint, ex: &[usize]) -> f64 {
    let mut entry = from.x;
    let mut w = 0.0;
    for (i, &j) in ex.iter().enumerate() {
        w += if semi {
            env.path(from.level + i, j) - env.path(from.level + i, entry)
        } else {
            (entry..=j)
                .map(|x| env.weight(from.level + i, x))
                .sum::<f64>()
        };
        entry = j;
    }
    w
}

fn dyadic_env(semi: bool, n: usize, m: usize, raw: &[i32]) -> Arc<EnvironmentField> {
    Arc::new(if semi {
        let incs: Vec<f64> = raw[..n * (m - 1)].iter().map(|&r| r as f64 / 8.0).collect();
        EnvironmentField::from_increments(n, 1.0, 0.0, (m - 1) as f64, &incs).unwrap()
    } else {
        let w: Vec<f64> = raw[..n * m]
            .iter()
            .map(|&r| (r.unsigned_abs() + 1) as f64 / 8.0)
            .collect();
        EnvironmentField::from_weights(n, m, w).unwrap()
    })
}

proptest! {
    #[test]
    fn solver_equals_enumeration(semi in any::<bool>(), n in 1usize..=4, m0 in 1usize..=8, tx in 0usize..8, raw in prop::collection::vec(-16i32..=16, 32)) {
        let m = (m0.min(16 / n)).max(if semi { 2 } else { 1 });
        let env = dyadic_env(semi, n, m, &raw);
        let target = SitePoint::new(n - 1, tx % m);
        let pf = solve_to_target(&env, target, Sign::Untagged).unwrap();
        for k in 0..n {
            for x in 0..m {
                let src = SitePoint::new(k, x);
                let all = exits(target, src);
                let best = all.iter().map(|e| weight(&env, semi, src, e)).fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(pf.at(src), best);
                if best.is_finite() {
                    // leftmost/rightmost maximisers are the lexicographic extremes
                    let maxi: Vec<&Vec<usize>> = all.iter().filter(|e| weight(&env, semi, src, e) == best).collect();
                    let lo = maxi.iter().min().unwrap();
                    let hi = maxi.iter().max().unwrap();
                    let l = pf.extract_geodesic(src, Side::Leftmost, 0.0).unwrap();
                    let r = pf.extract_geodesic(src, Side::Rightmost, 0.0).unwrap();
                    prop_assert_eq!(&l.runs.iter().map(|r| r.exit).collect::<Vec<_>>(), *lo);
                    prop_assert_eq!(&r.runs.iter().map(|r| r.exit).collect::<Vec<_>>(), *hi);
                }
            }
        }
    }

    #[test]
    fn difference_field_is_monotone_and_cocycle_exact(seed in 0u64..500) {
        let env = Arc::new(gen_environment(&EnvParams::SemiDiscrete { n_levels: 6, mesh: 0.05, x_min: 0.0, x_max: 3.0 }, seed).unwrap());
        let df = build_difference_field(&env, &BusemannParams::default()).unwrap();
        prop_assert!(df.monotonicity_defect() <= 0.0);
        let (a, b, c) = (SitePoint::new(0, 3), SitePoint::new(2, 20), SitePoint::new(4, 11));
        for sign in [Sign::Minus, Sign::Plus] {
            prop_assert_eq!(cocycle_defect(&df, sign, a, b, c).unwrap(), 0.0);
        }
    }

    #[test]
    fn competition_interfaces_are_ordered(seed in 0u64..200, lvl in 2usize..6, frac in 0.2f64..0.8) {
        let env = Arc::new(gen_environment(&EnvParams::SemiDiscrete { n_levels: 8, mesh: 0.05, x_min: 0.0, x_max: 3.0 }, seed).unwrap());
        let df = build_difference_field(&env, &BusemannParams::default()).unwrap();
        let a = ((df.limit(lvl) as f64) * frac) as usize;
        for sign in [Sign::Minus, Sign::Plus] {
            let cf = competition_field(&df, SitePoint::new(lvl, a), sign).unwrap();
            let (l, r) = shock_interfaces_from_point(&cf).unwrap();
            // left crossing x is the bond (x-1|x), right crossing x is (x|x+1)
            for k in r.bottom_level().max(l.bottom_level())..lvl {
                prop_assert!(l.cut(k).unwrap() <= r.cut(k).unwrap());
            }
        }
    }

    #[test]
    fn seventeen_digit_floats_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }
}

/// Increments (in halves) that make the two extremal geodesics from (0,0)
/// leave at columns 0 and 2 and share a site again only on level 3.
const AGE3: [f64; 15] = [
    0.5, 0.5, 0.5, 1.0, 0.0, -1.0, -1.0, 0.0, -0.5, 0.0, 0.0, 1.0, -0.5, 1.0, -1.0,
];

#[test]
fn two_branch_tie_has_age_three() {
    let env = Arc::new(EnvironmentField::from_increments(5, 1.0, 0.0, 3.0, &AGE3).unwrap());
    let target = SitePoint::new(4, 3);
    let pf = solve_to_target(&env, target, Sign::Plus).unwrap();
    let src = SitePoint::new(0, 0);

    let all = exits(target, src);
    let best = all
        .iter()
        .map(|e| weight(&env, true, src, e))
        .fold(f64::NEG_INFINITY, f64::max);
    let maxi: Vec<&Vec<usize>> = all
        .iter()
        .filter(|e| weight(&env, true, src, e) == best)
        .collect();
    let (lo, hi) = (maxi.iter().min().unwrap(), maxi.iter().max().unwrap());
    assert_eq!(**lo, vec![0, 1, 1, 3, 3]);
    assert_eq!(**hi, vec![2, 2, 2, 3, 3]);
    // runs [entry, exit] per level; the first shared site is on level 3
    let runs = |e: &[usize]| -> Vec<(usize, usize)> {
        std::iter::once(0)
            .chain(e.iter().copied())
            .zip(e.iter().copied())
            .collect()
    };
    let (rl, rh) = (runs(lo), runs(hi));
    let meet = (1..5)
        .find(|&k| rl[k].0.max(rh[k].0) <= rl[k].1.min(rh[k].1))
        .unwrap();
    assert_eq!(meet, 3);

    assert_eq!(detect_shock(&pf, src, 0.0).unwrap(), Some(3));
}

#[test]
fn unique_maximiser_has_no_shock() {
    let incs = [1.0, -1.0, 0.5, 0.25, -0.5, 2.0];
    let env = Arc::new(EnvironmentField::from_increments(2, 1.0, 0.0, 3.0, &incs).unwrap());
    let pf = solve_to_target(&env, SitePoint::new(1, 3), Sign::Minus).unwrap();
    let mut checked = 0;
    for x in 0..=3 {
        let src = SitePoint::new(0, x);
        let all = exits(pf.target, src);
        let best = all
            .iter()
            .map(|e| weight(&env, true, src, e))
            .fold(f64::NEG_INFINITY, f64::max);
        let ties = all
            .iter()
            .filter(|e| weight(&env, true, src, e) == best)
            .count();
        if ties == 1 {
            assert_eq!(detect_shock(&pf, src, 0.0).unwrap(), None, "x = {x}");
            checked += 1;
        }
    }
    assert!(checked >= 2);
}
