//! Acceptance suite. One PASS/FAIL line per criterion, indented lines for the
//! numbers behind it. The process fails only when a hard invariant fails;
//! statistical targets that miss are printed as FAIL and left at that.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use landscape_lab::config::RunConfig;
use landscape_lab::environment::{gen_environment, EnvironmentField, SitePoint};
use landscape_lab::instability::random_walk_dimension;
use landscape_lab::lpp::{solve_to_target, Side, Sign};
use landscape_lab::render::read_meta;
use landscape_lab::run::{
    analyze_env, build_report, classify_analysis, render_analysis, Analysis, RunReport,
};
use landscape_lab::shocks::TaxonomyCensus;

#[derive(Default)]
struct Board {
    passed: usize,
    total: usize,
    hard_failed: Vec<String>,
}

impl Board {
    fn criterion(&mut self, id: &str, pass: bool, hard: bool, text: String) {
        self.total += 1;
        if pass {
            self.passed += 1;
        } else if hard {
            self.hard_failed.push(id.to_string());
        }
        println!("{} [{id}] {text}", if pass { "PASS" } else { "FAIL" });
    }

    fn sub(&self, text: String) {
        println!("       {text}");
    }
}

// ---- exhaustive enumeration oracle

fn enumerate(
    target: SitePoint,
    from: SitePoint,
    path: &mut Vec<SitePoint>,
    out: &mut Vec<Vec<SitePoint>>,
) {
    path.push(from);
    if from == target {
        out.push(path.clone());
    } else {
        if from.level < target.level {
            enumerate(target, SitePoint::new(from.level + 1, from.x), path, out);
        }
        if from.x < target.x {
            enumerate(target, SitePoint::new(from.level, from.x + 1), path, out);
        }
    }
    path.pop();
}

fn path_weight(env: &EnvironmentField, semi: bool, path: &[SitePoint]) -> f64 {
    if semi {
        path.windows(2)
            .filter(|w| w[0].level == w[1].level)
            .map(|w| env.increment(w[0].level, w[0].x))
            .sum()
    } else {
        path.iter().map(|p| env.weight(p.level, p.x)).sum()
    }
}

/// Returns (max defect over values, max defect of extracted geodesic weights, cells compared).
fn oracle_grid(rng: &mut ChaCha8Rng, semi: bool) -> (f64, f64, usize) {
    let n = rng.random_range(1..=4usize);
    let m = rng.random_range(if semi { 2 } else { 1 }..=16 / n);
    // dyadic weights keep every sum exact
    let env = if semi {
        let incs: Vec<f64> = (0..n * (m - 1))
            .map(|_| rng.random_range(-16..=16) as f64 / 8.0)
            .collect();
        EnvironmentField::from_increments(n, 1.0, 0.0, (m - 1) as f64, &incs).unwrap()
    } else {
        let w: Vec<f64> = (0..n * m)
            .map(|_| rng.random_range(1..=16) as f64 / 8.0)
            .collect();
        EnvironmentField::from_weights(n, m, w).unwrap()
    };
    let env = Arc::new(env);
    let target = SitePoint::new(n - 1, rng.random_range(0..m));
    let pf = solve_to_target(&env, target, Sign::Untagged).unwrap();
    let (mut dv, mut dg, mut cells) = (0.0f64, 0.0f64, 0);
    for k in 0..n {
        for x in 0..m {
            let src = SitePoint::new(k, x);
            let mut paths = Vec::new();
            enumerate(target, src, &mut Vec::new(), &mut paths);
            let best = paths
                .iter()
                .map(|p| path_weight(&env, semi, p))
                .fold(f64::NEG_INFINITY, f64::max);
            let got = pf.at(src);
            if best == f64::NEG_INFINITY {
                dv = dv.max(if got == f64::NEG_INFINITY {
                    0.0
                } else {
                    f64::INFINITY
                });
                continue;
            }
            dv = dv.max((got - best).abs());
            for side in [Side::Leftmost, Side::Rightmost] {
                let g = pf.extract_geodesic(src, side, 0.0).unwrap();
                dg = dg.max((g.weight(&env) - best).abs());
            }
            cells += 1;
        }
    }
    (dv, dg, cells)
}

// ---- helpers

struct Full {
    a: Analysis,
    census: TaxonomyCensus,
    report: RunReport,
    analyze_secs: f64,
    census_secs: f64,
}

fn full_run(cfg: &RunConfig, seed: u64) -> Full {
    let t = Instant::now();
    let env = Arc::new(gen_environment(&cfg.env, seed).unwrap());
    let a = analyze_env(cfg, seed, env).unwrap();
    let analyze_secs = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let census = classify_analysis(cfg, &a)
        .unwrap()
        .expect("acceptance runs are semi-discrete");
    let census_secs = t.elapsed().as_secs_f64();
    let report = build_report(cfg, &a, Some(&census)).unwrap();
    Full {
        a,
        census,
        report,
        analyze_secs,
        census_secs,
    }
}

fn check_line(b: &Board, r: &RunReport, name: &str) -> bool {
    match r.check(name) {
        Some(c) => {
            b.sub(format!(
                "{name}: {} ({})",
                if c.passed { "ok" } else { "miss" },
                c.detail
            ));
            c.passed
        }
        None => {
            b.sub(format!("{name}: not run"));
            false
        }
    }
}

fn passed(r: &RunReport, name: &str) -> bool {
    r.check(name).is_some_and(|c| c.passed)
}

fn timing(r: &RunReport, name: &str) -> f64 {
    r.timing
        .iter()
        .find(|(k, _)| k == name)
        .map_or(0.0, |(_, v)| *v)
}

fn main() {
    let start = Instant::now();
    let mut b = Board::default();
    let cfg = RunConfig::from_preset("acceptance").unwrap();
    landscape_lab::run::init_threads(cfg.threads).unwrap();

    // 1
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut dv, mut dg, mut cells) = (0.0f64, 0.0f64, 0);
    for i in 0..200 {
        let (v, g, c) = oracle_grid(&mut rng, i % 2 == 1);
        dv = dv.max(v);
        dg = dg.max(g);
        cells += c;
    }
    let secs = t.elapsed().as_secs_f64();
    b.criterion(
        "1",
        dv == 0.0 && dg == 0.0 && secs < 1.0,
        true,
        format!("oracle equivalence: 200 grids (<= 16 cells), {cells} sources, value defect {dv:e}, geodesic defect {dg:e}, {secs:.3} s"),
    );

    // the acceptance run
    let f = full_run(&cfg, cfg.seeds[0]);
    let r = &f.report;
    println!(
        "       acceptance run: seed {}, {} levels, width {}, analyze {:.2} s, census {:.2} s",
        r.seed,
        f.a.env.n_levels(),
        f.a.env.width(),
        f.analyze_secs,
        f.census_secs
    );

    // 2
    let secs = f.analyze_secs + timing(r, "structural_checks");
    let ok = r
        .check("composition")
        .is_some_and(|c| c.passed && c.max_defect <= 1e-9)
        && secs < 120.0;
    b.criterion(
        "2",
        ok,
        true,
        format!("composition law on 100 pairs, {secs:.2} s"),
    );
    check_line(&b, r, "composition");

    // 3
    b.criterion(
        "3",
        r.check("cocycle")
            .is_some_and(|c| c.passed && c.max_defect == 0.0)
            && r.check("monotonicity").is_some_and(|c| c.passed),
        true,
        "cocycle exactness and D-monotonicity".into(),
    );
    check_line(&b, r, "cocycle");
    check_line(&b, r, "monotonicity");

    // 4
    b.criterion(
        "4",
        r.check("duality").is_some_and(|c| c.passed),
        true,
        "duality: no interface/geodesic crossings".into(),
    );
    check_line(&b, r, "duality");
    check_line(&b, r, "interface_coalescence");
    check_line(&b, r, "interfaces_on_graph");
    check_line(&b, r, "asymptotic_order");

    // 5
    let mut scanned = vec![(r.seed, r.island_census.islands)];
    let mut scout = cfg.clone();
    scout.analysis.dimension_levels.clear();
    for seed in 2..=20 {
        if scanned.iter().map(|s| s.1).sum::<usize>() >= 2 {
            break;
        }
        let a = analyze_env(
            &scout,
            seed,
            Arc::new(gen_environment(&scout.env, seed).unwrap()),
        )
        .unwrap();
        scanned.push((seed, a.graph.map_or(0, |g| g.islands.len())));
    }
    let found: usize = scanned.iter().map(|s| s.1).sum();
    let structure = passed(r, "island_structure");
    let round_trip = passed(r, "island_round_trip");
    b.criterion(
        "5",
        found >= 2 && structure && round_trip,
        !(found >= 2 && structure),
        format!(
            "island structure: {found} complete islands over {} seed(s), {} truncated regions",
            scanned.len(),
            r.island_census.truncated
        ),
    );
    check_line(&b, r, "island_structure");
    check_line(&b, r, "island_round_trip");

    // 6
    let hard6 = ["taxonomy_one_class", "stable_classes_off_graph"];
    let rates = [
        "tips_pns",
        "bottoms_snowbird",
        "left_boundary_hugging_minus",
        "right_boundary_hugging_plus",
        "no_double_hugging",
    ];
    let hard_ok = hard6.iter().all(|n| passed(r, n));
    b.criterion(
        "6",
        hard_ok && rates.iter().all(|n| passed(r, n)) && r.census_points >= 2000,
        !hard_ok,
        format!(
            "taxonomy consistency over {} points, {} distinct classes",
            r.census_points,
            r.class_histogram.len()
        ),
    );
    for n in hard6.iter().chain(&rates) {
        check_line(&b, r, n);
    }
    b.sub(format!("class histogram {:?}", r.class_histogram));

    // 7
    let mut notes = Vec::new();
    // A small target separation is closer to the θ± limit that the graph is
    // defined by; the default separation leaves extra shocks between the two
    // directions and biases the slope upward.
    let t = Instant::now();
    for e in &r.dims {
        notes.push(format!(
            "default separation, seed {} level {:?}: slope {:.3} from {} points (not scored)",
            r.seed, e.level, e.slope, e.n_points
        ));
    }
    let mut dim_cfg = cfg.clone();
    dim_cfg.busemann.delta_sep = Some(0.25);
    let mut dim_ok = true;
    let mut used = 0;
    for seed in 1..=10u64 {
        let a = analyze_env(
            &dim_cfg,
            seed,
            Arc::new(gen_environment(&dim_cfg.env, seed).unwrap()),
        )
        .unwrap();
        let d = a.graph.map_or_else(Vec::new, |g| g.dims);
        for e in d.iter().filter(|e| e.n_points >= 500) {
            used += 1;
            let ok = (0.35..=0.65).contains(&e.slope);
            dim_ok &= ok;
            notes.push(format!(
                "delta_sep 0.25, seed {seed} level {:?}: slope {:.3} from {} points{}",
                e.level,
                e.slope,
                e.n_points,
                if ok { "" } else { " (out of range)" }
            ));
        }
        if d.iter().all(|e| e.n_points < 500) {
            notes.push(format!(
                "delta_sep 0.25, seed {seed}: fewer than 500 points on the anchor level, skipped"
            ));
        }
    }
    let span = f.a.env.coord(f.a.env.width() - 1) - f.a.env.coord(0);
    let steps = f.a.env.width() - 1;
    let rw: Vec<f64> = (1..=10)
        .map(|seed| {
            random_walk_dimension(steps - steps % 2, span, seed)
                .unwrap()
                .slope
        })
        .collect();
    let rw_mean = rw.iter().sum::<f64>() / rw.len() as f64;
    let rw_ok = (rw_mean - 0.5).abs() <= 0.1;
    notes.push(format!(
        "random-walk bridge zero sets ({steps} steps): {:?}, mean {rw_mean:.3}",
        rw.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>()
    ));
    let secs = t.elapsed().as_secs_f64();
    b.criterion(
        "7",
        dim_ok && used > 0 && rw_ok && secs < 300.0,
        false,
        format!("dimension: {used} graph estimates in [0.35, 0.65], oracle mean within 0.5 +- 0.1, {secs:.1} s"),
    );
    notes.into_iter().for_each(|n| b.sub(n));

    // 8
    let mut notes = Vec::new();
    let base_hist = f.census.histogram(&landscape_lab::shocks::CensusRole::ALL);
    let base_islands = r.island_census.islands;
    let mut stable = true;
    for factor in [3.1622776601683795, 10.0] {
        let mut c = cfg.clone();
        c.tol.flat = cfg.tol.flat * factor;
        c.analysis.dimension_levels.clear();
        let g = full_run(&c, r.seed);
        let islands = g.report.island_census.islands;
        let hist = g.census.histogram(&landscape_lab::shocks::CensusRole::ALL);
        let rel = |a: usize, b: usize| (a as f64 - b as f64).abs() / (b.max(1) as f64);
        let island_ok = rel(islands, base_islands) <= 0.10;
        // bins that hold at least 1% of the census; smaller ones are pure noise
        let floor = base_hist.values().sum::<usize>() / 100;
        let mut worst: (f64, u8) = (0.0, 0);
        let keys: std::collections::BTreeSet<u8> =
            base_hist.keys().chain(hist.keys()).copied().collect();
        for k in keys {
            let (x, y) = (
                hist.get(&k).copied().unwrap_or(0),
                base_hist.get(&k).copied().unwrap_or(0),
            );
            if x.max(y) >= floor && rel(x, y) > worst.0 {
                worst = (rel(x, y), k);
            }
        }
        let ok = island_ok && worst.0 <= 0.10;
        stable &= ok;
        notes.push(format!(
            "tol_flat {:.2e}: islands {islands} vs {base_islands} ({:+.1}%), largest class shift {:.1}% (class {})",
            c.tol.flat,
            100.0 * (islands as f64 - base_islands as f64) / base_islands.max(1) as f64,
            100.0 * worst.0,
            worst.1
        ));
    }
    b.criterion(
        "8",
        stable,
        false,
        "tolerance robustness over one decade of tol_flat (+-10%)".into(),
    );
    notes.into_iter().for_each(|n| b.sub(n));

    // multi-scale census and the picture
    let scales: BTreeMap<u32, usize> = r.island_census.by_width_scale.clone();
    b.criterion(
        "islands-multiscale",
        scales.len() >= 3,
        false,
        format!(
            "islands at {} dyadic width scales: {:?}",
            scales.len(),
            scales
        ),
    );
    let svg = render_analysis(&cfg, &f.a).unwrap();
    let meta = read_meta(&svg).unwrap();
    b.criterion(
        "render",
        meta.islands == r.island_census.islands,
        true,
        format!(
            "SVG metadata lists {} islands ({} drawn in the window), census {}",
            meta.islands, meta.islands_drawn, r.island_census.islands
        ),
    );

    let total = start.elapsed().as_secs_f64();
    b.criterion(
        "runtime",
        total < 600.0,
        false,
        format!("whole suite {total:.1} s"),
    );
    println!("{}/{} criteria passed", b.passed, b.total);
    let soft_misses = b.total - b.passed - b.hard_failed.len();
    if b.hard_failed.is_empty() {
        println!("no hard invariant failed; {soft_misses} statistical target(s) missed");
    } else {
        println!("hard invariants failed in: {}", b.hard_failed.join(", "));
        std::process::exit(1);
    }
}
