//! Points of increase of the difference profile, the Ψ interfaces through an
//! anchor, stability islands and box-counting dimension.
//!
//! Mesh conventions. On a level, `D` is nonincreasing in x. A bond `(j|j+1)`
//! is an increase bond of the profile `f = D0 - D` when `D(j) - D(j+1)`
//! exceeds the level tolerance; both of its cells are instability points. A
//! maximal stretch of cells without an increase bond is a flat run. A flat
//! run whose value does not occur on the level above is the top row of a
//! region `{D = c}`; tracing that value down gives the rows of the region.
//! Regions with at least `min_rows` rows are islands, the rest are flat dust.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::busemann::{ls_slope, DifferenceField};
use crate::environment::SitePoint;
use crate::error::{domain, param, Result};
use crate::lpp::tol_eq;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelProfile {
    pub level: usize,
    pub xs: Vec<f64>,
    pub f: Vec<f64>,
}

impl LevelProfile {
    pub fn new(level: usize, xs: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if xs.len() != f.len() {
            return param("xs and f differ in length");
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return param("xs must be strictly increasing");
        }
        Ok(LevelProfile { level, xs, f })
    }

    /// `x ↦ D0 - D(x)` over the common cone of one level.
    pub fn from_difference(df: &DifferenceField, level: usize) -> Self {
        let env = df.env();
        let row = df.level_d(level);
        LevelProfile {
            level,
            xs: (0..row.len()).map(|x| env.coord(x)).collect(),
            f: row.iter().map(|d| df.d0 - d).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    fn scale(&self) -> f64 {
        self.f.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest decrease `f(i) - f(i+1)`, or an error if it exceeds tol_eq.
    pub fn check_monotone(&self) -> Result<f64> {
        let tol = tol_eq(self.scale());
        let mut worst: f64 = 0.0;
        for (i, w) in self.f.windows(2).enumerate() {
            let drop = w[0] - w[1];
            if drop > tol {
                return domain(format!(
                    "profile decreases by {drop:e} at index {i} on level {}",
                    self.level
                ));
            }
            worst = worst.max(drop);
        }
        Ok(worst)
    }

    fn increase_bond(&self, j: usize, tol_flat: f64) -> bool {
        self.f[j + 1] - self.f[j] > tol_flat
    }
}

/// Indices that are points of increase of the profile. Index `i` is kept when
/// its nearest neighbours satisfy `f(i-1) < f(i+1) - tol_flat`; at the two ends
/// the index itself stands in for the missing neighbour. The result is then
/// closed with [`discrete_closure`].
pub fn points_of_increase(p: &LevelProfile, tol_flat: f64) -> Result<Vec<usize>> {
    p.check_monotone()?;
    let n = p.len();
    if n < 2 {
        return Ok(Vec::new());
    }
    let raw: Vec<usize> = (0..n)
        .filter(|&i| {
            let z = i.saturating_sub(1);
            let y = (i + 1).min(n - 1);
            p.f[z] < p.f[y] - tol_flat
        })
        .collect();
    Ok(discrete_closure(p, &raw, tol_flat))
}

/// Adds both cells of every increase bond. Applied to the output of
/// [`points_of_increase`] it is the identity; applying it twice equals applying
/// it once.
pub fn discrete_closure(p: &LevelProfile, set: &[usize], tol_flat: f64) -> Vec<usize> {
    let mut out = set.to_vec();
    for j in 0..p.len().saturating_sub(1) {
        if p.increase_bond(j, tol_flat) {
            out.push(j);
            out.push(j + 1);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IsoSide {
    Left,
    Right,
}

/// Right-isolated: some sample to the right has f within tol_flat of f(i).
pub fn isolation_test(p: &LevelProfile, i: usize, side: IsoSide, tol_flat: f64) -> Result<bool> {
    let pts = points_of_increase(p, tol_flat)?;
    if pts.binary_search(&i).is_err() {
        return domain(format!("index {i} is not a point of increase"));
    }
    // f is monotone, so the nearest neighbour decides.
    Ok(match side {
        IsoSide::Right => i + 1 < p.len() && p.f[i + 1] - p.f[i] <= tol_flat,
        IsoSide::Left => i > 0 && p.f[i] - p.f[i - 1] <= tol_flat,
    })
}

/// Per-level absolute flat tolerance `tol_flat * (1 + max |D|)`.
pub fn level_tolerances(df: &DifferenceField, tol_flat: f64) -> Vec<f64> {
    (0..df.n_levels())
        .map(|k| tol_flat * (1.0 + df.level_d(k).iter().fold(0.0f64, |m, v| m.max(v.abs()))))
        .collect()
}

/// Cells of level `k` with `D` within `tol` of `c`, as an inclusive range.
fn value_row(row: &[f64], c: f64, tol: f64) -> Option<(usize, usize)> {
    let lo = row.partition_point(|&v| v > c + tol);
    let hi = row.partition_point(|&v| v >= c - tol);
    (lo < hi).then(|| (lo, hi - 1))
}

/// Level-indexed interface paths through the value `value`.
///
/// `minus[t]` is the last site with `D > value + tol` and `plus[t]` the first
/// site with `D < value - tol`; the cells strictly between them are flat at
/// `value`. `None` marks a level where no such site exists inside the cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiPaths {
    pub anchor: SitePoint,
    pub value: f64,
    pub minus: Vec<Option<usize>>,
    pub plus: Vec<Option<usize>>,
}

impl PsiPaths {
    /// Flat cells at `value` on a level; `None` also for undefined levels.
    pub fn flat_row(&self, level: usize, limit: usize) -> Option<(usize, usize)> {
        if self.minus[level].is_none() && self.plus[level].is_none() {
            return None;
        }
        let lo = self.minus[level].map_or(0, |m| m + 1);
        let hi = self.plus[level].map_or(limit as i64, |p| p as i64 - 1);
        (lo as i64 <= hi).then_some((lo, hi as usize))
    }
}

pub fn psi_for_value(
    df: &DifferenceField,
    anchor: SitePoint,
    value: f64,
    level_tol: &[f64],
) -> PsiPaths {
    let (minus, plus) = (0..df.n_levels())
        .map(|k| {
            let row = df.level_d(k);
            let tol = level_tol[k];
            let a = row.partition_point(|&v| v > value + tol);
            let b = row.partition_point(|&v| v >= value - tol);
            let n = row.len();
            // a crossing pinned at the cone end is not an interface point
            (
                (1..n).contains(&a).then(|| a - 1),
                (1..n).contains(&b).then_some(b),
            )
        })
        .unzip();
    PsiPaths {
        anchor,
        value,
        minus,
        plus,
    }
}

/// Ψ⁻/Ψ⁺ through the anchor of the difference field.
pub fn interfaces_from_anchor(df: &DifferenceField, tol_flat: f64) -> PsiPaths {
    psi_for_value(df, df.anchor, df.d0, &level_tolerances(df, tol_flat))
}

/// Ψ paths with the anchor moved to another site.
pub fn interfaces_from(df: &DifferenceField, anchor: SitePoint, level_tol: &[f64]) -> PsiPaths {
    psi_for_value(df, anchor, df.d(anchor.level, anchor.x), level_tol)
}

/// A closed separation component: `lower < upper` strictly on `t1+1..t2`,
/// not separated at `t1` and `t2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub t1: usize,
    pub t2: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub closed: Vec<Component>,
    /// Separated level ranges `[a, b]` that reach an end of the window or an
    /// undefined level.
    pub open: Vec<(usize, usize)>,
}

/// Maximal level ranges where `lower < upper`. `None` entries count as
/// undefined; a range touching one is open.
pub fn separation_components(lower: &[Option<f64>], upper: &[Option<f64>]) -> Result<Components> {
    if lower.len() != upper.len() {
        return param("paths must be level-aligned");
    }
    let n = lower.len();
    let mut state = Vec::with_capacity(n);
    for t in 0..n {
        state.push(match (lower[t], upper[t]) {
            (Some(a), Some(b)) if a > b => {
                return param(format!("lower path above upper path at level {t}"))
            }
            (Some(a), Some(b)) => Some(a < b),
            _ => None,
        });
    }
    let mut out = Components::default();
    let mut t = 0;
    while t < n {
        if state[t] != Some(true) {
            t += 1;
            continue;
        }
        let a = t;
        while t < n && state[t] == Some(true) {
            t += 1;
        }
        let b = t - 1;
        let below = a.checked_sub(1).and_then(|s| state[s]);
        let above = state.get(b + 1).copied().flatten();
        if below == Some(false) && above == Some(false) {
            out.closed.push(Component {
                t1: a - 1,
                t2: b + 1,
            });
        } else {
            out.open.push((a, b));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Island {
    /// `D` on the island.
    pub value: f64,
    /// Right end of the top row.
    pub tip: SitePoint,
    /// Last site above the island value on the level just below the bottom row.
    pub bottom: SitePoint,
    /// Row ends on levels `bottom.level + 1 ..= tip.level`.
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl Island {
    pub fn first_row(&self) -> usize {
        self.bottom.level + 1
    }

    pub fn height(&self) -> usize {
        self.left.len()
    }

    pub fn row(&self, level: usize) -> Option<(usize, usize)> {
        let i = level.checked_sub(self.first_row())?;
        Some((*self.left.get(i)?, self.right[i]))
    }

    pub fn area(&self) -> usize {
        self.left
            .iter()
            .zip(&self.right)
            .map(|(l, r)| r - l + 1)
            .sum()
    }

    pub fn contains(&self, p: SitePoint) -> bool {
        self.row(p.level).is_some_and(|(l, r)| l <= p.x && p.x <= r)
    }

    pub fn max_width(&self) -> usize {
        self.left
            .iter()
            .zip(&self.right)
            .map(|(l, r)| r - l + 1)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedRegion {
    pub value: f64,
    pub top: SitePoint,
    pub rows: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IslandExtraction {
    pub islands: Vec<Island>,
    pub truncated: Vec<TruncatedRegion>,
}

fn island_from_rows(
    df: &DifferenceField,
    value: f64,
    top: usize,
    rows: Vec<(usize, usize)>,
    tol: f64,
) -> std::result::Result<Island, String> {
    // rows run downward from `top`
    let bottom_row = top + 1 - rows.len();
    if bottom_row == 0 {
        return Err("reaches level 0".into());
    }
    let t1 = bottom_row - 1;
    let below = df.level_d(t1);
    let u = below.partition_point(|&v| v > value + tol);
    if u == 0 || u >= below.len() {
        return Err("bottom crossing outside the cone".into());
    }
    let (mut left, mut right): (Vec<usize>, Vec<usize>) = rows.into_iter().rev().unzip();
    left.shrink_to_fit();
    right.shrink_to_fit();
    Ok(Island {
        value,
        tip: SitePoint::new(top, *right.last().unwrap()),
        bottom: SitePoint::new(t1, u - 1),
        left,
        right,
    })
}

/// Islands along the Ψ paths of one value: components with at least
/// `min_rows` flat rows.
pub fn extract_islands(
    df: &DifferenceField,
    psi: &PsiPaths,
    level_tol: &[f64],
    min_rows: usize,
) -> IslandExtraction {
    let n = df.n_levels();
    let lower: Vec<Option<f64>> = psi
        .minus
        .iter()
        .map(|m| m.map(|m| (m + 1) as f64))
        .collect();
    let upper: Vec<Option<f64>> = psi.plus.iter().map(|p| p.map(|p| p as f64)).collect();
    let comps =
        separation_components(&lower, &upper).expect("psi paths are ordered by construction");
    let mut out = IslandExtraction::default();
    for c in comps.closed {
        let rows: Vec<(usize, usize)> = (c.t1 + 1..c.t2)
            .rev()
            .map(|r| (psi.minus[r].unwrap() + 1, psi.plus[r].unwrap() - 1))
            .collect();
        if rows.len() < min_rows {
            continue;
        }
        match island_from_rows(df, psi.value, c.t2 - 1, rows, level_tol[c.t1]) {
            Ok(isl) => out.islands.push(isl),
            Err(reason) => out.truncated.push(TruncatedRegion {
                value: psi.value,
                top: SitePoint::new(c.t2 - 1, 0),
                rows: c.t2 - c.t1 - 1,
                reason,
            }),
        }
    }
    for (a, b) in comps.open {
        if b + 1 - a >= min_rows {
            let reason = if b + 1 == n {
                "reaches the top level"
            } else {
                "touches the window edge or the cone limit"
            };
            let x = psi.plus[b].map_or(df.limit(b), |p| p.saturating_sub(1));
            out.truncated.push(TruncatedRegion {
                value: psi.value,
                top: SitePoint::new(b, x),
                rows: b + 1 - a,
                reason: reason.into(),
            });
        }
    }
    out
}

/// Every region `{D = c}` with at least `min_rows` rows, found from its top row.
pub fn enumerate_islands(
    df: &DifferenceField,
    level_tol: &[f64],
    min_rows: usize,
) -> IslandExtraction {
    let n = df.n_levels();
    if n < 2 {
        return IslandExtraction::default();
    }
    // top rows: flat runs whose value is absent one level up
    let tops: Vec<(usize, usize, f64, bool)> = (0..n - 1)
        .into_par_iter()
        .flat_map_iter(|k| {
            let row = df.level_d(k);
            let up = df.level_d(k + 1);
            let (tol, tol_up) = (level_tol[k], level_tol[k + 1]);
            let mut found = Vec::new();
            for hi in 0..row.len() {
                let run_end = hi + 1 == row.len() || row[hi] - row[hi + 1] > tol;
                if run_end && value_row(up, row[hi], tol_up).is_none() {
                    // the level above must cross below the value inside its cone
                    let closed = up.last().is_some_and(|&v| v < row[hi] - tol_up);
                    found.push((k, hi, row[hi], closed));
                }
            }
            found.into_iter()
        })
        .collect();
    let traced: Vec<std::result::Result<Island, TruncatedRegion>> = tops
        .par_iter()
        .filter_map(|&(k, hi, c, closed)| {
            let mut rows = Vec::new();
            let mut edge = false;
            let mut r = k as i64;
            while r >= 0 {
                let ru = r as usize;
                let Some((lo, h)) = value_row(df.level_d(ru), c, level_tol[ru]) else {
                    break;
                };
                edge |= lo == 0 || h == df.limit(ru);
                rows.push((lo, h));
                r -= 1;
            }
            if rows.len() < min_rows {
                return None;
            }
            let trunc = |reason: String| TruncatedRegion {
                value: c,
                top: SitePoint::new(k, hi),
                rows: rows.len(),
                reason,
            };
            if edge || !closed {
                return Some(Err(trunc(
                    "touches the window edge or the cone limit".into(),
                )));
            }
            let nrows = rows.len();
            Some(
                island_from_rows(
                    df,
                    c,
                    k,
                    rows.clone(),
                    level_tol[(k + 1).saturating_sub(nrows + 1)],
                )
                .map_err(trunc),
            )
        })
        .collect();
    let mut out = IslandExtraction::default();
    for t in traced {
        match t {
            Ok(i) => out.islands.push(i),
            Err(t) => out.truncated.push(t),
        }
    }
    out.islands.sort_by_key(|i| (i.tip.level, i.tip.x));
    out.truncated.sort_by_key(|t| (t.top.level, t.top.x));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PointRole {
    Tip,
    Bottom,
    Right,
    Left,
    Dust,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimEstimate {
    pub level: Option<usize>,
    pub n_points: usize,
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    pub slope: f64,
}

/// Powers of two inside `[4·mesh, domain/8]`, largest first.
pub fn dyadic_scales(mesh: f64, domain: f64) -> Vec<f64> {
    let (lo, hi) = (4.0 * mesh, domain / 8.0);
    let mut out = Vec::new();
    if !(lo > 0.0 && hi >= lo) {
        return out;
    }
    let mut e = hi.log2().floor() as i32;
    while 2f64.powi(e) >= lo {
        out.push(2f64.powi(e));
        e -= 1;
    }
    out
}

/// Least-squares slope of `ln N(ε)` against `ln(1/ε)`, boxes `[mε, (m+1)ε)`.
pub fn box_dimension(points: &[f64], scales: &[f64]) -> Result<DimEstimate> {
    if points.is_empty() {
        return domain("no points");
    }
    if scales.len() < 2 {
        return domain(format!("need at least 2 scales, got {}", scales.len()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let counts: Vec<usize> = scales
        .iter()
        .map(|&e| {
            let mut boxes: Vec<i64> = sorted.iter().map(|x| (x / e).floor() as i64).collect();
            boxes.dedup();
            boxes.len()
        })
        .collect();
    let xs: Vec<f64> = scales.iter().map(|e| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    Ok(DimEstimate {
        level: None,
        n_points: points.len(),
        scales: scales.to_vec(),
        counts,
        slope: ls_slope(&xs, &ys),
    })
}

/// Zero positions of a simple random-walk bridge with `steps` (even) steps.
pub fn random_walk_bridge_zeros(steps: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut moves: Vec<i8> = (0..steps)
        .map(|i| if i % 2 == 0 { 1 } else { -1 })
        .collect();
    moves.shuffle(&mut rng);
    let mut pos = 0i64;
    let mut zeros = vec![0];
    for (i, m) in moves.iter().enumerate() {
        pos += *m as i64;
        if pos == 0 {
            zeros.push(i + 1);
        }
    }
    zeros
}

/// The random-walk zero-set oracle under the estimator used for the graph: the
/// walk is laid on `[0, domain]` with `steps` cells.
pub fn random_walk_dimension(steps: usize, domain: f64, seed: u64) -> Result<DimEstimate> {
    let mesh = domain / steps as f64;
    let pts: Vec<f64> = random_walk_bridge_zeros(steps, seed)
        .into_iter()
        .map(|i| i as f64 * mesh)
        .collect();
    box_dimension(&pts, &dyadic_scales(mesh, domain))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphParams {
    /// Relative flat tolerance coefficient.
    pub tol_flat: f64,
    pub min_island_rows: usize,
    /// Levels whose dimension is estimated (skipped when too sparse).
    pub dim_levels: Vec<usize>,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            tol_flat: 1e-8,
            min_island_rows: 2,
            dim_levels: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstabilityGraph {
    pub tol_flat: f64,
    pub level_tol: Vec<f64>,
    pub cone_limit: Vec<usize>,
    /// Sorted instability cells per level.
    pub levels: Vec<Vec<usize>>,
    /// Role of each instability cell, parallel to `levels`.
    pub roles: Vec<Vec<PointRole>>,
    pub islands: Vec<Island>,
    pub truncated: Vec<TruncatedRegion>,
    pub psi: PsiPaths,
    pub dims: Vec<DimEstimate>,
    /// Boundary cells claimed by more than one role or island.
    pub role_conflicts: usize,
    /// Boundary cells that are not instability cells (should be 0).
    pub boundary_misses: usize,
}

/// Cells touched by the boundary bonds of an island, with their roles.
pub fn boundary_cells(isl: &Island) -> Vec<(SitePoint, PointRole)> {
    let mut out = Vec::new();
    let mut bond = |level: usize, j: usize, role: PointRole| {
        out.push((SitePoint::new(level, j), role));
        out.push((SitePoint::new(level, j + 1), role));
    };
    bond(isl.tip.level, isl.tip.x, PointRole::Tip);
    bond(isl.bottom.level, isl.bottom.x, PointRole::Bottom);
    for (i, (&l, &r)) in isl.left.iter().zip(&isl.right).enumerate() {
        let level = isl.first_row() + i;
        if level != isl.tip.level {
            bond(level, r, PointRole::Right);
        }
        bond(level, l - 1, PointRole::Left);
    }
    out
}

pub fn build_instability_graph(
    df: &DifferenceField,
    params: &GraphParams,
) -> Result<InstabilityGraph> {
    if !(params.tol_flat > 0.0) || params.min_island_rows < 1 {
        return param("tol_flat must be positive and min_island_rows at least 1");
    }
    let n = df.n_levels();
    let level_tol = level_tolerances(df, params.tol_flat);
    let levels: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|k| points_of_increase(&LevelProfile::from_difference(df, k), level_tol[k]))
        .collect::<Result<_>>()?;
    let ext = enumerate_islands(df, &level_tol, params.min_island_rows);

    let mut roles: Vec<Vec<PointRole>> = levels
        .iter()
        .map(|l| vec![PointRole::Dust; l.len()])
        .collect();
    let mut claimed: Vec<Vec<Option<(usize, PointRole)>>> =
        levels.iter().map(|l| vec![None; l.len()]).collect();
    let (mut conflicts, mut misses) = (0, 0);
    for (id, isl) in ext.islands.iter().enumerate() {
        for (p, role) in boundary_cells(isl) {
            let Ok(i) = levels[p.level].binary_search(&p.x) else {
                misses += 1;
                continue;
            };
            match claimed[p.level][i] {
                None => claimed[p.level][i] = Some((id, role)),
                Some((other, r)) => {
                    if other != id || r != role {
                        conflicts += 1;
                    }
                    if role < r {
                        claimed[p.level][i] = Some((id, role));
                    }
                }
            }
        }
    }
    for (k, row) in claimed.iter().enumerate() {
        for (i, c) in row.iter().enumerate() {
            if let Some((_, r)) = c {
                roles[k][i] = *r;
            }
        }
    }

    let psi = psi_for_value(df, df.anchor, df.d0, &level_tol);
    let env = df.env();
    let dims = params
        .dim_levels
        .iter()
        .filter_map(|&k| level_dimension_of(&levels, df, k).ok())
        .collect();
    let _ = env;
    Ok(InstabilityGraph {
        tol_flat: params.tol_flat,
        cone_limit: (0..n).map(|k| df.limit(k)).collect(),
        level_tol,
        levels,
        roles,
        islands: ext.islands,
        truncated: ext.truncated,
        psi,
        dims,
        role_conflicts: conflicts,
        boundary_misses: misses,
    })
}

fn level_dimension_of(
    levels: &[Vec<usize>],
    df: &DifferenceField,
    level: usize,
) -> Result<DimEstimate> {
    let env = df.env();
    let pts = levels
        .get(level)
        .ok_or_else(|| crate::LabError::Parameter("level out of range".into()))?;
    if pts.len() < 200 {
        return domain(format!(
            "level {level} has {} instability points, need 200",
            pts.len()
        ));
    }
    if pts[pts.len() - 1] - pts[0] < 100 {
        return domain("instability points span fewer than 100 mesh cells");
    }
    let domain_len = env.coord(df.limit(level)) - env.coord(0);
    let coords: Vec<f64> = pts.iter().map(|&x| env.coord(x) - env.coord(0)).collect();
    let mut d = box_dimension(&coords, &dyadic_scales(env.mesh(), domain_len))?;
    d.level = Some(level);
    Ok(d)
}

impl InstabilityGraph {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn n_points(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_point(&self, p: SitePoint) -> bool {
        self.levels
            .get(p.level)
            .is_some_and(|l| l.binary_search(&p.x).is_ok())
    }

    pub fn role(&self, p: SitePoint) -> Option<PointRole> {
        let i = self.levels.get(p.level)?.binary_search(&p.x).ok()?;
        Some(self.roles[p.level][i])
    }

    pub fn role_counts(&self) -> [usize; 5] {
        let mut c = [0; 5];
        for r in self.roles.iter().flatten() {
            c[*r as usize] += 1;
        }
        c
    }

    /// Box-counting dimension of one level's instability set.
    pub fn level_dimension(&self, df: &DifferenceField, level: usize) -> Result<DimEstimate> {
        level_dimension_of(&self.levels, df, level)
    }

    /// Island whose rows contain the site, if any.
    pub fn island_at(&self, p: SitePoint) -> Option<usize> {
        self.islands.iter().position(|i| i.contains(p))
    }

    /// Instability cells strictly inside island rows (should be 0).
    pub fn interior_points(&self) -> usize {
        self.islands
            .iter()
            .map(|isl| {
                (0..isl.height())
                    .map(|i| {
                        let k = isl.first_row() + i;
                        let (l, r) = (isl.left[i], isl.right[i]);
                        if r < l + 2 {
                            return 0;
                        }
                        let row = &self.levels[k];
                        row.partition_point(|&x| x < r) - row.partition_point(|&x| x <= l)
                    })
                    .sum::<usize>()
            })
            .sum()
    }
}

/// Pairs of islands whose rows overlap on a level, and pairs whose rows sit
/// in neighbouring cells of one level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub overlapping: usize,
    pub abutting: usize,
}

pub fn island_separation(islands: &[Island], n_levels: usize) -> SeparationReport {
    let mut per_level: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); n_levels];
    for (id, isl) in islands.iter().enumerate() {
        for i in 0..isl.height() {
            per_level[isl.first_row() + i].push((isl.left[i], isl.right[i], id));
        }
    }
    let mut rep = SeparationReport::default();
    let mut abut = std::collections::BTreeSet::new();
    for rows in &mut per_level {
        rows.sort_unstable();
        for w in rows.windows(2) {
            if w[1].0 <= w[0].1 {
                rep.overlapping += 1;
            } else if w[1].0 == w[0].1 + 1 {
                abut.insert((w[0].2.min(w[1].2), w[0].2.max(w[1].2)));
            }
        }
    }
    rep.abutting = abut.len();
    rep
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DensityProbe {
    pub max_run: usize,
    pub level_of_max: usize,
    /// Levels containing a run of at least 10 consecutive instability cells.
    pub levels_with_run_ge_10: usize,
}

/// Longest stretch of consecutive instability cells.
pub fn interval_density(graph: &InstabilityGraph) -> DensityProbe {
    let mut p = DensityProbe::default();
    for (k, pts) in graph.levels.iter().enumerate() {
        let mut best = 0;
        let mut run = 0;
        for (i, &x) in pts.iter().enumerate() {
            run = if i > 0 && pts[i - 1] + 1 == x {
                run + 1
            } else {
                1
            };
            best = usize::max(best, run);
        }
        if best > p.max_run {
            p.max_run = best;
            p.level_of_max = k;
        }
        if best >= 10 {
            p.levels_with_run_ge_10 += 1;
        }
    }
    p
}

/// Ψ path cells that are not instability cells, over both paths.
pub fn psi_containment_misses(graph: &InstabilityGraph, psi: &PsiPaths) -> usize {
    let mut miss = 0;
    for k in 0..psi.minus.len() {
        for x in [psi.minus[k], psi.plus[k]].into_iter().flatten() {
            if !graph.is_point(SitePoint::new(k, x)) {
                miss += 1;
            }
        }
    }
    miss
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PsiMeetProbe {
    pub pairs: usize,
    /// Pairs whose Ψ⁺ paths share a cell on some level above the launch level.
    pub meeting_pairs: usize,
}

/// Ψ⁺ paths launched from consecutive non-right-isolated points of one level,
/// followed upward.
pub fn psi_plus_meetings(
    df: &DifferenceField,
    graph: &InstabilityGraph,
    level: usize,
    max_pairs: usize,
) -> PsiMeetProbe {
    let row = df.level_d(level);
    let tol = graph.level_tol[level];
    let launch: Vec<usize> = graph.levels[level]
        .iter()
        .copied()
        .filter(|&x| x + 1 < row.len() && row[x] - row[x + 1] > tol)
        .collect();
    let mut probe = PsiMeetProbe::default();
    for w in launch.windows(2).take(max_pairs) {
        probe.pairs += 1;
        let (a, b) = (row[w[0]], row[w[1]]);
        let met = (level + 1..df.n_levels()).any(|k| {
            let r = df.level_d(k);
            let t = graph.level_tol[k];
            let pa = r.partition_point(|&v| v >= a - t);
            let pb = r.partition_point(|&v| v >= b - t);
            pa == pb && pa < r.len()
        });
        if met {
            probe.meeting_pairs += 1;
        }
    }
    probe
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IsolationCensus {
    pub points: usize,
    pub left_isolated: usize,
    pub right_isolated: usize,
    pub both: usize,
    /// Left-isolated points carrying a right-boundary or tip role.
    pub left_iso_on_right_boundary: usize,
    /// Right-isolated points carrying a left-boundary role.
    pub right_iso_on_left_boundary: usize,
}

pub fn isolation_census(df: &DifferenceField, graph: &InstabilityGraph) -> IsolationCensus {
    let mut c = IsolationCensus::default();
    for (k, pts) in graph.levels.iter().enumerate() {
        let row = df.level_d(k);
        let tol = graph.level_tol[k];
        for (i, &x) in pts.iter().enumerate() {
            c.points += 1;
            let li = x > 0 && row[x - 1] - row[x] <= tol;
            let ri = x + 1 < row.len() && row[x] - row[x + 1] <= tol;
            let role = graph.roles[k][i];
            c.left_isolated += li as usize;
            c.right_isolated += ri as usize;
            c.both += (li && ri) as usize;
            c.left_iso_on_right_boundary +=
                (li && matches!(role, PointRole::Right | PointRole::Tip)) as usize;
            c.right_iso_on_left_boundary += (ri && role == PointRole::Left) as usize;
        }
    }
    c
}
