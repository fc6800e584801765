//! The stage pipeline behind the command line: simulate, analyze, classify,
//! render, check. Each stage reads the files of the stages before it from
//! `<out>/seed-<N>/`; [`run`] chains all of them in memory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::busemann::{build_difference_field, cocycle_defect, DifferenceField};
use crate::config::RunConfig;
use crate::environment::{gen_environment, EnvironmentField, Kind, SitePoint, PRNG_ID};
use crate::error::{LabError, Result};
use crate::instability::{
    build_instability_graph, island_separation, DimEstimate, GraphParams, InstabilityGraph, Island,
    PointRole, PsiPaths,
};
use crate::io::{fmt_f64, write_csv, write_json};
use crate::lpp::{check_composition, sample_composition_pairs, Side, Sign};
use crate::render::{render_svg, Heatmap, Layer, Scene, Style, SvgMeta};
use crate::shocks::{
    coalescence_violations, interface_crossings, off_graph_bonds, order_violations,
    reconstruct_island_from_tip, taxonomy_census, trace_interface, CensusParams, CensusRole,
    ClassGroup, InterfaceSide, IslandReconstruction, Special, TaxonomyCensus,
};

pub const GRAPH_SCHEMA: &str = "instability_graph/v1";
pub const RECON_SCHEMA: &str = "island_reconstructions/v1";
pub const REPORT_SCHEMA: &str = "run_report/v1";

/// Environment variable bounding the worker pool.
pub const THREADS_VAR: &str = "LANDSCAPE_LAB_THREADS";

/// Sizes the global worker pool from the config and `LANDSCAPE_LAB_THREADS`,
/// taking the smaller when both are set. Returns the pool size.
pub fn init_threads(config_threads: Option<usize>) -> Result<usize> {
    let from_env = match std::env::var(THREADS_VAR) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| {
                    LabError::Config(vec![format!(
                        "{THREADS_VAR} must be a positive integer, got `{v}`"
                    )])
                })?,
        ),
        Err(_) => None,
    };
    let n = match (config_threads, from_env) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    if let Some(n) = n {
        // a second call in one process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(rayon::current_num_threads())
}

pub fn seed_dir(cfg: &RunConfig, seed: u64) -> PathBuf {
    cfg.out.join(format!("seed-{seed}"))
}

fn shocks_enabled(cfg: &RunConfig, env: &EnvironmentField) -> Result<bool> {
    match (cfg.analysis.shocks, env.kind()) {
        (Some(true), Kind::Exponential) => Err(LabError::Capability(
            "analysis.shocks = true needs the semi-discrete backend; the lattice model has no shocks".into(),
        )),
        (Some(b), _) => Ok(b),
        (None, k) => Ok(k == Kind::SemiDiscrete),
    }
}

/// Everything derived from one environment.
pub struct Analysis {
    pub seed: u64,
    pub env: Arc<EnvironmentField>,
    /// `None` when the field is too small to carry two targets.
    pub df: Option<DifferenceField>,
    pub graph: Option<InstabilityGraph>,
}

pub fn analyze_env(cfg: &RunConfig, seed: u64, env: Arc<EnvironmentField>) -> Result<Analysis> {
    if env.n_levels() < 2 || env.width() < 2 {
        return Ok(Analysis {
            seed,
            env,
            df: None,
            graph: None,
        });
    }
    let df = build_difference_field(&env, &cfg.busemann)?;
    let gp = GraphParams {
        tol_flat: cfg.tol.flat,
        min_island_rows: cfg.analysis.min_island_rows,
        dim_levels: cfg.analysis.dimension_levels.clone(),
    };
    let graph = build_instability_graph(&df, &gp)?;
    Ok(Analysis {
        seed,
        env,
        df: Some(df),
        graph: Some(graph),
    })
}

// ---- simulate

pub fn stage_simulate(cfg: &RunConfig, seed: u64) -> Result<Arc<EnvironmentField>> {
    let env = gen_environment(&cfg.env, seed)?;
    env.save(&seed_dir(cfg, seed), "env")?;
    Ok(Arc::new(env))
}

pub fn load_env(cfg: &RunConfig, seed: u64) -> Result<Arc<EnvironmentField>> {
    let dir = seed_dir(cfg, seed);
    if !dir.join("env.json").exists() {
        return Err(LabError::Config(vec![format!(
            "{} has no environment; run `simulate` first",
            dir.display()
        )]));
    }
    let env = EnvironmentField::load(&dir, "env")?;
    if env.params != cfg.env || env.seed != seed {
        return Err(LabError::Config(vec![format!(
            "{} holds an environment for different parameters or seed; rerun `simulate`",
            dir.display()
        )]));
    }
    Ok(Arc::new(env))
}

// ---- analyze

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelPoints {
    pub t: usize,
    pub points: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub schema: String,
    pub seed: u64,
    pub prng_id: String,
    pub tol_flat: f64,
    pub n_levels: usize,
    pub levels: Vec<LevelPoints>,
    pub islands: Vec<Island>,
    pub truncated: usize,
    pub psi: Option<PsiPaths>,
    pub dims: Vec<DimEstimate>,
}

impl GraphFile {
    pub fn new(a: &Analysis, tol_flat: f64) -> Self {
        let g = a.graph.as_ref();
        GraphFile {
            schema: GRAPH_SCHEMA.into(),
            seed: a.seed,
            prng_id: PRNG_ID.into(),
            tol_flat,
            n_levels: a.env.n_levels(),
            levels: g.map_or_else(Vec::new, |g| {
                g.levels
                    .iter()
                    .enumerate()
                    .map(|(t, p)| LevelPoints {
                        t,
                        points: p.clone(),
                    })
                    .collect()
            }),
            islands: g.map_or_else(Vec::new, |g| g.islands.clone()),
            truncated: g.map_or(0, |g| g.truncated.len()),
            psi: g.map(|g| g.psi.clone()),
            dims: g.map_or_else(Vec::new, |g| g.dims.clone()),
        }
    }
}

fn role_name(r: PointRole) -> &'static str {
    match r {
        PointRole::Tip => "tip",
        PointRole::Bottom => "bottom",
        PointRole::Right => "right",
        PointRole::Left => "left",
        PointRole::Dust => "dust",
    }
}

pub fn write_graph_artifacts(dir: &Path, cfg: &RunConfig, a: &Analysis) -> Result<()> {
    write_json(&dir.join("graph.json"), &GraphFile::new(a, cfg.tol.flat))?;
    let mut rows = Vec::new();
    if let Some(g) = &a.graph {
        for (k, (pts, roles)) in g.levels.iter().zip(&g.roles).enumerate() {
            for (&x, &r) in pts.iter().zip(roles) {
                let island = g
                    .island_at(SitePoint::new(k, x))
                    .map_or_else(String::new, |i| i.to_string());
                rows.push(vec![
                    k.to_string(),
                    x.to_string(),
                    fmt_f64(a.env.coord(x)),
                    role_name(r).into(),
                    island,
                ]);
            }
        }
    }
    write_csv(
        &dir.join("points.csv"),
        &["level", "x", "coord", "role", "island"],
        rows,
    )
}

pub fn stage_analyze(cfg: &RunConfig, seed: u64) -> Result<Analysis> {
    let a = analyze_env(cfg, seed, load_env(cfg, seed)?)?;
    write_graph_artifacts(&seed_dir(cfg, seed), cfg, &a)?;
    Ok(a)
}

// ---- classify

fn census_params(cfg: &RunConfig, seed: u64) -> CensusParams {
    CensusParams {
        tol_tie: cfg.tol.tie,
        samples: cfg.analysis.census_samples,
        seed,
        max_islands: cfg.analysis.census_max_islands,
        ..CensusParams::default()
    }
}

pub fn classify_analysis(cfg: &RunConfig, a: &Analysis) -> Result<Option<TaxonomyCensus>> {
    if !shocks_enabled(cfg, &a.env)? {
        return Ok(None);
    }
    match (&a.df, &a.graph) {
        (Some(df), Some(g)) => Ok(Some(taxonomy_census(df, g, &census_params(cfg, a.seed))?)),
        _ => Ok(None),
    }
}

fn group_name(g: ClassGroup) -> &'static str {
    match g {
        ClassGroup::StableNoSign => "stable_no_sign",
        ClassGroup::StableSigned => "stable_signed",
        ClassGroup::Dust => "dust",
        ClassGroup::HugPlus => "hug_plus",
        ClassGroup::HugMinus => "hug_minus",
    }
}

fn special_name(s: Special) -> &'static str {
    match s {
        Special::Pns => "pns",
        Special::Snowbird => "snowbird",
        Special::SingleMinus => "single_minus",
        Special::SinglePlus => "single_plus",
        Special::HuggingMinus => "hugging_minus",
        Special::HuggingPlus => "hugging_plus",
        Special::ProperDouble => "proper_double",
        Special::None => "none",
    }
}

fn census_role_name(r: CensusRole) -> &'static str {
    match r {
        CensusRole::Tip => "tip",
        CensusRole::Bottom => "bottom",
        CensusRole::BottomUnresolved => "bottom_unresolved",
        CensusRole::LeftBoundary => "left",
        CensusRole::RightBoundary => "right",
        CensusRole::LeftEdge => "left_edge",
        CensusRole::RightEdge => "right_edge",
        CensusRole::Sampled => "sampled",
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructionFile {
    pub schema: String,
    pub seed: u64,
    pub prng_id: String,
    pub reconstructions: Vec<IslandReconstruction>,
}

pub fn reconstructions(a: &Analysis, n: usize) -> Vec<IslandReconstruction> {
    let (Some(df), Some(g)) = (&a.df, &a.graph) else {
        return Vec::new();
    };
    if df.env().kind() != Kind::SemiDiscrete {
        return Vec::new();
    }
    g.islands
        .iter()
        .take(n)
        .filter_map(|i| {
            reconstruct_island_from_tip(df, i.tip, &g.level_tol)
                .ok()
                .flatten()
        })
        .collect()
}

pub fn write_classify_artifacts(
    dir: &Path,
    cfg: &RunConfig,
    a: &Analysis,
    census: &TaxonomyCensus,
) -> Result<()> {
    let opt = |v: Option<usize>| v.map_or_else(String::new, |x| x.to_string());
    let rows = census.entries.iter().map(|e| {
        vec![
            census_role_name(e.role).into(),
            e.origin.level.to_string(),
            e.origin.xl.to_string(),
            e.origin.xr.to_string(),
            e.on_graph.to_string(),
            e.class.class_id.to_string(),
            group_name(e.class.group).into(),
            special_name(e.class.special).into(),
            opt(e.minus_age),
            opt(e.plus_age),
            e.class.borderline.to_string(),
            e.class.double_hug_raw.to_string(),
        ]
    });
    write_csv(
        &dir.join("classes.csv"),
        &[
            "role",
            "level",
            "xl",
            "xr",
            "on_graph",
            "class_id",
            "group",
            "special",
            "minus_age",
            "plus_age",
            "borderline",
            "double_hug_raw",
        ],
        rows,
    )?;
    let shocks = census.entries.iter().flat_map(|e| {
        [(Sign::Minus, e.minus_age), (Sign::Plus, e.plus_age)]
            .into_iter()
            .filter_map(move |(s, age)| {
                age.map(|age| {
                    vec![
                        e.origin.level.to_string(),
                        e.origin.xl.to_string(),
                        s.label().into(),
                        age.to_string(),
                        e.class.class_id.to_string(),
                    ]
                })
            })
    });
    write_csv(
        &dir.join("shocks.csv"),
        &["level", "x", "sign", "age", "class_id"],
        shocks,
    )?;
    let file = ReconstructionFile {
        schema: RECON_SCHEMA.into(),
        seed: a.seed,
        prng_id: PRNG_ID.into(),
        reconstructions: reconstructions(a, cfg.analysis.reconstructions_written),
    };
    write_json(&dir.join("reconstructions.json"), &file)
}

pub fn stage_classify(cfg: &RunConfig, seed: u64) -> Result<Option<TaxonomyCensus>> {
    let a = analyze_env(cfg, seed, load_env(cfg, seed)?)?;
    let dir = seed_dir(cfg, seed);
    check_graph_file(&dir, &a)?;
    let census = classify_analysis(cfg, &a)?;
    if let Some(c) = &census {
        write_classify_artifacts(&dir, cfg, &a, c)?;
    }
    Ok(census)
}

/// The analyze stage's island catalogue must match the recomputed one.
fn check_graph_file(dir: &Path, a: &Analysis) -> Result<()> {
    let path = dir.join("graph.json");
    if !path.exists() {
        return Err(LabError::Config(vec![format!(
            "{} is missing; run `analyze` first",
            path.display()
        )]));
    }
    let file: GraphFile = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
    let islands = a.graph.as_ref().map_or(0, |g| g.islands.len());
    if file.schema != GRAPH_SCHEMA || file.islands.len() != islands || file.seed != a.seed {
        return Err(LabError::Inconsistency(format!(
            "{} does not match this configuration ({} islands on file, {islands} recomputed); rerun `analyze`",
            path.display(),
            file.islands.len()
        )));
    }
    Ok(())
}

// ---- render

pub fn build_scene(cfg: &RunConfig, a: &Analysis) -> Scene {
    let width = a.env.width();
    let columns = cfg.render.columns.map_or((0, width), |(f, t)| {
        (f.min(width.saturating_sub(1)), t.min(width))
    });
    let mut scene = Scene {
        n_levels: a.env.n_levels(),
        columns,
        max_blocks: (cfg.render.max_blocks_x, cfg.render.max_blocks_y),
        ..Default::default()
    };
    let (Some(df), Some(g)) = (&a.df, &a.graph) else {
        // no Busemann structure: show the environment itself
        let values = (0..a.env.n_levels())
            .flat_map(|k| (0..width).map(move |x| (k, x)))
            .map(|(k, x)| a.env.weight(k, x))
            .collect();
        scene.heatmap = Some(Heatmap {
            n_levels: a.env.n_levels(),
            width,
            values,
        });
        return scene;
    };
    let mut values = vec![f64::NAN; a.env.n_levels() * width];
    for k in 0..df.n_levels() {
        for (x, v) in df.level_d(k).iter().enumerate() {
            values[k * width + x] = *v;
        }
    }
    scene.heatmap = Some(Heatmap {
        n_levels: a.env.n_levels(),
        width,
        values,
    });
    scene.islands = g.islands.clone();
    let (from, to) = columns;
    scene.points = g
        .levels
        .iter()
        .enumerate()
        .flat_map(|(k, pts)| {
            pts.iter()
                .filter(|&&x| x >= from && x < to)
                .map(move |&x| SitePoint::new(k, x))
        })
        .collect();
    if df.env().kind() == Kind::SemiDiscrete {
        for isl in g.islands.iter().filter(|i| i.tip.x >= from && i.tip.x < to) {
            if let Ok(Some(r)) = reconstruct_island_from_tip(df, isl.tip, &g.level_tol) {
                scene.interfaces.push(r.minus_left);
                scene.interfaces.push(r.plus_right);
            }
        }
    }
    let n = cfg.render.geodesics;
    for i in 0..n {
        let x = from + (2 * i + 1) * (to - from) / (2 * n);
        if x > df.limit(0) {
            continue;
        }
        for sign in [Sign::Minus, Sign::Plus] {
            if let Ok(geo) =
                df.field(sign)
                    .extract_geodesic(SitePoint::new(0, x), Side::Leftmost, cfg.tol.tie)
            {
                scene.geodesics.push((sign, geo));
            }
        }
    }
    scene
}

pub fn render_analysis(cfg: &RunConfig, a: &Analysis) -> Result<String> {
    render_svg(&build_scene(cfg, a), &Layer::ALL, &Style::default())
}

pub fn stage_render(cfg: &RunConfig, seed: u64) -> Result<SvgMeta> {
    let a = analyze_env(cfg, seed, load_env(cfg, seed)?)?;
    let dir = seed_dir(cfg, seed);
    check_graph_file(&dir, &a)?;
    let svg = render_analysis(cfg, &a)?;
    std::fs::write(dir.join("graph.svg"), &svg)?;
    crate::render::read_meta(&svg)
        .ok_or_else(|| LabError::Format("rendered SVG lacks metadata".into()))
}

// ---- check

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// Hard checks decide the exit status; soft ones are mesh-limited
    /// statistics that are reported only.
    pub hard: bool,
    pub passed: bool,
    pub max_defect: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IslandCensus {
    pub islands: usize,
    pub truncated: usize,
    /// Islands per dyadic scale of the widest row, keyed by `floor(log2(cells))`.
    pub by_width_scale: BTreeMap<u32, usize>,
    /// Islands per dyadic scale of the height in levels.
    pub by_height_scale: BTreeMap<u32, usize>,
}

impl IslandCensus {
    pub fn from_islands(islands: &[Island], truncated: usize) -> Self {
        let mut c = IslandCensus {
            islands: islands.len(),
            truncated,
            ..Default::default()
        };
        for i in islands {
            *c.by_width_scale
                .entry(i.max_width().max(1).ilog2())
                .or_insert(0) += 1;
            *c.by_height_scale
                .entry(i.height().max(1).ilog2())
                .or_insert(0) += 1;
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub seed: u64,
    pub prng_id: String,
    pub checks: Vec<CheckResult>,
    pub island_census: IslandCensus,
    pub class_histogram: BTreeMap<u8, usize>,
    pub census_points: usize,
    pub dims: Vec<DimEstimate>,
    /// Wall-clock seconds per phase; written to `timing.txt`, not to the
    /// report, so the report stays byte-for-byte reproducible.
    #[serde(skip)]
    pub timing: Vec<(String, f64)>,
}

impl RunReport {
    pub fn hard_failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| c.hard && !c.passed).collect()
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn result(name: &str, hard: bool, passed: bool, max_defect: f64, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        hard,
        passed,
        max_defect,
        detail,
    }
}

fn rate_check(
    name: &str,
    census: &TaxonomyCensus,
    roles: &[CensusRole],
    pred: impl Fn(&crate::shocks::ConfigClass) -> bool,
) -> CheckResult {
    let (ok, n) = census.fraction(roles, pred);
    let miss = if n == 0 {
        0.0
    } else {
        (n - ok) as f64 / n as f64
    };
    result(name, false, ok == n, miss, format!("{ok}/{n}"))
}

/// Checks that need only the passage fields and the graph.
pub fn structural_checks(cfg: &RunConfig, a: &Analysis, out: &mut Vec<CheckResult>) -> Result<()> {
    let (Some(df), Some(g)) = (&a.df, &a.graph) else {
        for name in ["composition", "cocycle", "monotonicity", "island_structure"] {
            out.push(result(
                name,
                true,
                true,
                0.0,
                "field too small for two targets; nothing to check".into(),
            ));
        }
        return Ok(());
    };
    if cfg.analysis.composition_pairs > 0 {
        let pf = &df.pf_minus;
        let pairs = sample_composition_pairs(pf, cfg.analysis.composition_pairs, a.seed);
        if pairs.is_empty() {
            out.push(result(
                "composition",
                true,
                true,
                0.0,
                "fewer than three levels; nothing to check".into(),
            ));
        } else {
            let rep = check_composition(pf, &pairs)?;
            out.push(result(
                "composition",
                true,
                rep.max_scaled_defect <= cfg.tol.eq,
                rep.max_scaled_defect,
                format!("{} pairs, max |defect| {:e}", pairs.len(), rep.max_defect),
            ));
        }
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed ^ 0xc0c0);
    let n = df.n_levels();
    let mut worst: f64 = 0.0;
    let mut triples = 0;
    for sign in [Sign::Minus, Sign::Plus] {
        let pf = df.field(sign);
        for _ in 0..100 {
            let mut pick = || {
                let k = rng.random_range(0..n);
                pf.reach_limit(k)
                    .map(|lim| SitePoint::new(k, rng.random_range(0..=lim)))
            };
            if let (Some(p), Some(q), Some(r)) = (pick(), pick(), pick()) {
                worst = worst.max(cocycle_defect(df, sign, p, q, r)?.abs());
                triples += 1;
            }
        }
    }
    out.push(result(
        "cocycle",
        true,
        worst == 0.0,
        worst,
        format!("{triples} triples"),
    ));

    let mono = df.monotonicity_defect();
    out.push(result(
        "monotonicity",
        true,
        mono <= 0.0,
        mono.max(0.0),
        format!("largest excess over tolerance {mono:e}"),
    ));

    let sep = island_separation(&g.islands, g.n_levels());
    let bad_rows = g
        .islands
        .iter()
        .filter(|i| {
            i.left.iter().zip(&i.right).any(|(l, r)| l > r)
                || i.tip.level + 1 != i.first_row() + i.height()
                || i.right.last() != Some(&i.tip.x)
        })
        .count();
    let interior = g.interior_points();
    let bad = sep.overlapping + bad_rows + g.boundary_misses + interior;
    out.push(result(
        "island_structure",
        true,
        bad == 0,
        bad as f64,
        format!(
            "{} islands; overlapping {} misordered {} boundary misses {} interior points {}; abutting pairs {} role conflicts {}",
            g.islands.len(),
            sep.overlapping,
            bad_rows,
            g.boundary_misses,
            interior,
            sep.abutting,
            g.role_conflicts
        ),
    ));
    Ok(())
}

/// Duality, coalescence, asymptotic order and graph membership of shock
/// interfaces.
pub fn interface_checks(cfg: &RunConfig, a: &Analysis, out: &mut Vec<CheckResult>) -> Result<()> {
    let (Some(df), Some(g)) = (&a.df, &a.graph) else {
        return Ok(());
    };
    let step = (g.islands.len() / 50).max(1);
    let starts: Vec<SitePoint> = g.islands.iter().step_by(step).map(|i| i.tip).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed ^ 0xd0a1);
    let n = df.n_levels();
    let (mut crossings, mut coal, mut off, mut pts, mut n_if) = (0, 0, 0, 0, 0);
    for sign in [Sign::Minus, Sign::Plus] {
        let pf = df.field(sign);
        let ifs: Vec<_> = starts
            .par_iter()
            .flat_map_iter(|&s| {
                [InterfaceSide::Left, InterfaceSide::Right].map(|side| trace_interface(pf, s, side))
            })
            .collect::<Result<_>>()?;
        let mut srcs = Vec::new();
        while srcs.len() < cfg.analysis.duality_geodesics && n > 1 {
            let k = rng.random_range(0..n - 1);
            if let Some(lim) = pf.reach_limit(k) {
                let side = if rng.random_bool(0.5) {
                    Side::Leftmost
                } else {
                    Side::Rightmost
                };
                srcs.push((SitePoint::new(k, rng.random_range(0..=lim)), side));
            }
        }
        let geos: Vec<_> = srcs
            .par_iter()
            .map(|&(p, side)| pf.extract_geodesic(p, side, cfg.tol.tie))
            .collect::<Result<_>>()?;
        crossings += ifs
            .par_iter()
            .map(|i| {
                geos.iter()
                    .map(|g| interface_crossings(i, g))
                    .sum::<usize>()
            })
            .sum::<usize>();
        coal += ifs
            .par_iter()
            .map(|a| {
                ifs.iter()
                    .map(|b| coalescence_violations(a, b))
                    .sum::<usize>()
            })
            .sum::<usize>();
        off += ifs.iter().map(|i| off_graph_bonds(df, g, i)).sum::<usize>();
        pts += ifs.iter().map(|i| i.xs.len()).sum::<usize>();
        n_if += ifs.len();
    }
    let geos = cfg.analysis.duality_geodesics;
    out.push(result(
        "duality",
        true,
        crossings == 0,
        crossings as f64,
        format!("{n_if} interfaces ({pts} points) against {geos} geodesics per sign"),
    ));
    out.push(result(
        "interface_coalescence",
        true,
        coal == 0,
        coal as f64,
        format!("{n_if} interfaces, all pairs per sign"),
    ));
    out.push(result(
        "interfaces_on_graph",
        true,
        off == 0,
        off as f64,
        format!("{pts} interface bonds from island tips"),
    ));

    let (mut viol, mut pairs) = (0, 0);
    for _ in 0..100 {
        if n < 3 {
            break;
        }
        let s = rng.random_range(1..n - 1);
        let lim = df.limit(s);
        if lim < 2 {
            continue;
        }
        let x = rng.random_range(0..lim);
        let y = rng.random_range(x + 1..=lim);
        for side in [InterfaceSide::Left, InterfaceSide::Right] {
            let p = trace_interface(&df.pf_plus, SitePoint::new(s, x), side)?;
            let m = trace_interface(&df.pf_minus, SitePoint::new(s, y), side)?;
            viol += order_violations(&p, &m)?;
            pairs += 1;
        }
    }
    out.push(result(
        "asymptotic_order",
        true,
        viol == 0,
        viol as f64,
        format!("{pairs} plus/minus pairs"),
    ));
    Ok(())
}

pub fn taxonomy_checks(census: &TaxonomyCensus, out: &mut Vec<CheckResult>) {
    use CensusRole::*;
    let n = census.entries.len();
    out.push(result(
        "taxonomy_one_class",
        true,
        census.bundle_errors == 0,
        census.bundle_errors as f64,
        format!(
            "{n} points classified, {} bundles failed",
            census.bundle_errors
        ),
    ));
    let mism = census
        .entries
        .iter()
        .filter(|e| e.class.graph_mismatch)
        .count();
    out.push(result(
        "stable_classes_off_graph",
        true,
        mism == 0,
        mism as f64,
        format!("{mism} of {n} points disagree with graph membership"),
    ));
    out.push(result(
        "island_round_trip",
        false,
        census.reconstruction_mismatches == 0,
        census.reconstruction_mismatches as f64,
        format!(
            "{} islands rebuild differently from their tip",
            census.reconstruction_mismatches
        ),
    ));
    out.push(rate_check("tips_pns", census, &[Tip], |c| {
        c.special == Special::Pns
    }));
    let mut b = rate_check(
        "bottoms_snowbird",
        census,
        &[Bottom, BottomUnresolved],
        |c| c.special == Special::Snowbird,
    );
    let (ok, m) = census.fraction(&[Bottom], |c| c.special == Special::Snowbird);
    b.detail += &format!("; resolved bottoms {ok}/{m}");
    out.push(b);
    let mut l = rate_check(
        "left_boundary_hugging_minus",
        census,
        &[LeftBoundary, LeftEdge],
        |c| c.group == ClassGroup::HugMinus,
    );
    let (ok, m) = census.fraction(&[LeftBoundary], |c| c.group == ClassGroup::HugMinus);
    l.detail += &format!("; interior rows {ok}/{m}");
    out.push(l);
    let mut r = rate_check(
        "right_boundary_hugging_plus",
        census,
        &[RightBoundary, RightEdge],
        |c| c.group == ClassGroup::HugPlus,
    );
    let (ok, m) = census.fraction(&[RightBoundary], |c| c.group == ClassGroup::HugPlus);
    r.detail += &format!("; interior rows {ok}/{m}");
    out.push(r);
    let dh = census
        .entries
        .iter()
        .filter(|e| e.class.double_hug_raw)
        .count();
    out.push(result(
        "no_double_hugging",
        false,
        dh == 0,
        dh as f64,
        format!("{dh} of {n} points hug on both sides"),
    ));
}

pub fn dimension_check(a: &Analysis, out: &mut Vec<CheckResult>) {
    let Some(g) = &a.graph else { return };
    let dims: Vec<_> = g.dims.iter().filter(|d| d.n_points >= 500).collect();
    if dims.is_empty() {
        return;
    }
    let bad = dims
        .iter()
        .filter(|d| !(0.35..=0.65).contains(&d.slope))
        .count();
    let worst = dims
        .iter()
        .map(|d| (d.slope - 0.5).abs())
        .fold(0.0, f64::max);
    let detail = dims
        .iter()
        .map(|d| {
            format!(
                "level {:?}: {:.3} ({} points)",
                d.level, d.slope, d.n_points
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    out.push(result("dimension", false, bad == 0, worst, detail));
}

pub fn build_report(
    cfg: &RunConfig,
    a: &Analysis,
    census: Option<&TaxonomyCensus>,
) -> Result<RunReport> {
    let mut checks = Vec::new();
    let mut timing = Vec::new();
    let t = Instant::now();
    structural_checks(cfg, a, &mut checks)?;
    timing.push(("structural_checks".into(), t.elapsed().as_secs_f64()));
    if shocks_enabled(cfg, &a.env)? {
        let t = Instant::now();
        interface_checks(cfg, a, &mut checks)?;
        timing.push(("interface_checks".into(), t.elapsed().as_secs_f64()));
        if let Some(c) = census {
            taxonomy_checks(c, &mut checks);
        }
    }
    dimension_check(a, &mut checks);
    let island_census = a.graph.as_ref().map_or_else(IslandCensus::default, |g| {
        IslandCensus::from_islands(&g.islands, g.truncated.len())
    });
    Ok(RunReport {
        schema: REPORT_SCHEMA.into(),
        seed: a.seed,
        prng_id: PRNG_ID.into(),
        checks,
        island_census,
        class_histogram: census.map_or_else(BTreeMap::new, |c| c.histogram(&CensusRole::ALL)),
        census_points: census.map_or(0, |c| c.entries.len()),
        dims: a.graph.as_ref().map_or_else(Vec::new, |g| g.dims.clone()),
        timing,
    })
}

pub fn write_report(dir: &Path, report: &RunReport) -> Result<()> {
    write_json(&dir.join("report.json"), report)?;
    let text: String = report
        .timing
        .iter()
        .map(|(k, v)| format!("{k}\t{v:.3}\n"))
        .collect();
    std::fs::write(dir.join("timing.txt"), text)?;
    Ok(())
}

pub fn stage_check(cfg: &RunConfig, seed: u64) -> Result<RunReport> {
    let t = Instant::now();
    let a = analyze_env(cfg, seed, load_env(cfg, seed)?)?;
    let analyze_secs = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let census = classify_analysis(cfg, &a)?;
    let census_secs = t.elapsed().as_secs_f64();
    let mut report = build_report(cfg, &a, census.as_ref())?;
    report.timing.insert(0, ("analyze".into(), analyze_secs));
    report.timing.insert(1, ("classify".into(), census_secs));
    write_report(&seed_dir(cfg, seed), &report)?;
    Ok(report)
}

/// All stages for every seed, without re-reading intermediate files.
pub fn run(cfg: &RunConfig) -> Result<Vec<RunReport>> {
    cfg.validate()?;
    let mut reports = Vec::new();
    for &seed in &cfg.seeds {
        let dir = seed_dir(cfg, seed);
        let mut timing = Vec::new();
        let t = Instant::now();
        let env = stage_simulate(cfg, seed)?;
        timing.push(("simulate".to_string(), t.elapsed().as_secs_f64()));
        let t = Instant::now();
        let a = analyze_env(cfg, seed, env)?;
        write_graph_artifacts(&dir, cfg, &a)?;
        timing.push(("analyze".to_string(), t.elapsed().as_secs_f64()));
        let t = Instant::now();
        let census = classify_analysis(cfg, &a)?;
        if let Some(c) = &census {
            write_classify_artifacts(&dir, cfg, &a, c)?;
        }
        timing.push(("classify".to_string(), t.elapsed().as_secs_f64()));
        if cfg.render.enabled {
            let t = Instant::now();
            std::fs::write(dir.join("graph.svg"), render_analysis(cfg, &a)?)?;
            timing.push(("render".to_string(), t.elapsed().as_secs_f64()));
        }
        let mut report = build_report(cfg, &a, census.as_ref())?;
        timing.append(&mut report.timing);
        report.timing = timing;
        write_report(&dir, &report)?;
        reports.push(report);
    }
    Ok(reports)
}
