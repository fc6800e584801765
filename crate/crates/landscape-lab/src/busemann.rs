//! Two-target Busemann proxy and the difference field `D = G⁻ − G⁺`.
//!
//! Paths only move right, so a site reaches a top-level target only from its
//! left. Both targets are therefore placed near the right edge of the window
//! (`center ∓ delta_sep`), which keeps most of every level inside the common
//! cone. `theta` shears the pair by `theta · T` spatial units.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::environment::{EnvironmentField, Kind, SitePoint};
use crate::error::{domain, param, Result};
use crate::lpp::{solve_to_target, tol_eq, PassageField, Sign};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusemannParams {
    pub theta: f64,
    /// Half-distance between the targets in model units; `None` = default.
    pub delta_sep: Option<f64>,
    /// Midpoint of the targets in model units; `None` = default.
    pub center: Option<f64>,
    /// `None` = midpoint of level 0.
    pub anchor: Option<SitePoint>,
}

impl Default for BusemannParams {
    fn default() -> Self {
        BusemannParams {
            theta: 0.0,
            delta_sep: None,
            center: None,
            anchor: None,
        }
    }
}

/// `2 · √T` in model units; T is the number of level steps for the lattice and
/// is read in spatial units for the semi-discrete backend, capped to a tenth of
/// the window so the pair stays inside it.
pub fn default_delta_sep(env: &EnvironmentField) -> f64 {
    let t = env.top_level().max(1) as f64;
    match env.kind() {
        Kind::Exponential => 2.0 * t.sqrt(),
        Kind::SemiDiscrete => {
            let span = env.coord(env.width() - 1) - env.coord(0);
            (2.0 * t.sqrt() * env.mesh().sqrt()).min(span / 10.0)
        }
    }
}

pub fn default_center(env: &EnvironmentField, delta_sep: f64) -> f64 {
    env.coord(env.width() - 1) - 2.0 * delta_sep
}

#[derive(Clone, Debug)]
pub struct DifferenceField {
    pub pf_minus: PassageField,
    pub pf_plus: PassageField,
    pub anchor: SitePoint,
    pub d0: f64,
    /// D(v), NaN outside the common cone.
    d: Vec<f64>,
    /// Per level, sites `0..=limit[k]` are in the common cone.
    limit: Vec<usize>,
}

pub fn build_difference_field(
    env: &Arc<EnvironmentField>,
    params: &BusemannParams,
) -> Result<DifferenceField> {
    let top = env.top_level();
    let delta = params.delta_sep.unwrap_or_else(|| default_delta_sep(env));
    if !(delta > 0.0) {
        return param("delta_sep must be positive");
    }
    let center =
        params.center.unwrap_or_else(|| default_center(env, delta)) + params.theta * top as f64;
    let (lo, hi) = (center - delta, center + delta);
    let (x0, x1) = (env.coord(0), env.coord(env.width() - 1));
    if lo < x0 || hi > x1 {
        return param(format!(
            "targets [{lo}, {hi}] leave the window [{x0}, {x1}]"
        ));
    }
    let cm = env.index_of(lo);
    let cp = env.index_of(hi);
    if cm >= cp {
        return param("targets collapse to the same column; increase delta_sep or mesh resolution");
    }
    let (pm, pp) = rayon::join(
        || solve_to_target(env, SitePoint::new(top, cm), Sign::Minus),
        || solve_to_target(env, SitePoint::new(top, cp), Sign::Plus),
    );
    DifferenceField::new(pm?, pp?, params.anchor)
}

impl DifferenceField {
    pub fn new(
        pf_minus: PassageField,
        pf_plus: PassageField,
        anchor: Option<SitePoint>,
    ) -> Result<Self> {
        if pf_minus.target.x >= pf_plus.target.x || pf_minus.target.level != pf_plus.target.level {
            return param("need p- strictly left of p+ on the same level");
        }
        let env = Arc::clone(pf_minus.env());
        let (n, w) = (env.n_levels(), env.width());
        let mut d = vec![f64::NAN; n * w];
        let mut limit = vec![0; n];
        for k in 0..n {
            let lim = pf_minus
                .reach_limit(k)
                .expect("level 0 site always reaches");
            limit[k] = lim;
            for x in 0..=lim {
                d[k * w + x] = pf_minus.value(k, x) - pf_plus.value(k, x);
            }
        }
        let anchor = anchor.unwrap_or(SitePoint::new(0, limit[0] / 2));
        if anchor.level >= n || anchor.x > limit[anchor.level] {
            return param(format!("anchor {anchor:?} outside the common cone"));
        }
        let d0 = d[anchor.level * w + anchor.x];
        Ok(DifferenceField {
            pf_minus,
            pf_plus,
            anchor,
            d0,
            d,
            limit,
        })
    }

    pub fn env(&self) -> &Arc<EnvironmentField> {
        self.pf_minus.env()
    }

    pub fn n_levels(&self) -> usize {
        self.limit.len()
    }

    /// Last site of the common cone on a level.
    pub fn limit(&self, level: usize) -> usize {
        self.limit[level]
    }

    pub fn d(&self, level: usize, x: usize) -> f64 {
        self.d[level * self.env().width() + x]
    }

    /// D on the common cone of one level.
    pub fn level_d(&self, level: usize) -> &[f64] {
        let w = self.env().width();
        &self.d[level * w..level * w + self.limit[level] + 1]
    }

    pub fn with_anchor(&self, anchor: SitePoint) -> Result<DifferenceField> {
        DifferenceField::new(self.pf_minus.clone(), self.pf_plus.clone(), Some(anchor))
    }

    pub fn field(&self, sign: Sign) -> &PassageField {
        match sign {
            Sign::Minus => &self.pf_minus,
            _ => &self.pf_plus,
        }
    }

    /// Largest increase of D between neighbours, minus the tolerance; ≤ 0 means monotone.
    pub fn monotonicity_defect(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for k in 0..self.n_levels() {
            let row = self.level_d(k);
            for i in 0..row.len().saturating_sub(1) {
                let g = self
                    .pf_minus
                    .value(k, i)
                    .abs()
                    .max(self.pf_plus.value(k, i).abs());
                worst = worst.max(row[i + 1] - row[i] - tol_eq(g));
            }
        }
        worst
    }

    /// Largest raw increase `D(i+1) − D(i)` over all levels (0 if none).
    pub fn max_increase(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.n_levels() {
            let row = self.level_d(k);
            for i in 0..row.len().saturating_sub(1) {
                worst = worst.max(row[i + 1] - row[i]);
            }
        }
        worst
    }
}

/// W^σ(v; u) = G^σ(v) − G^σ(u).
pub fn busemann_value(df: &DifferenceField, sign: Sign, v: SitePoint, u: SitePoint) -> Result<f64> {
    df.field(sign).difference(v, u)
}

/// `a - b` as an unevaluated sum `hi + lo` (Knuth two-sum, exact).
pub fn exact_difference(a: f64, b: f64) -> (f64, f64) {
    let hi = a - b;
    let bb = hi - a;
    let lo = (a - (hi - bb)) + (-b - bb);
    (hi, lo)
}

/// Exact `Σ terms` of doubles via a growing expansion, rounded once at the end.
fn exact_sum(terms: &[f64]) -> f64 {
    let mut parts: Vec<f64> = Vec::new();
    for &t in terms {
        let mut x = t;
        let mut next = Vec::with_capacity(parts.len() + 1);
        for &p in &parts {
            let (s, e) = exact_difference(x, -p);
            if e != 0.0 {
                next.push(e);
            }
            x = s;
        }
        next.push(x);
        parts = next;
    }
    parts.iter().rev().sum()
}

/// `W(a,b) + W(b,c) - W(a,c)` evaluated without rounding, with each W carried
/// as its exact two-term expansion.
pub fn cocycle_defect(
    df: &DifferenceField,
    sign: Sign,
    a: SitePoint,
    b: SitePoint,
    c: SitePoint,
) -> Result<f64> {
    let pf = df.field(sign);
    for p in [a, b, c] {
        if !pf.reachable(p) {
            return domain(format!("{p:?} outside the cone"));
        }
    }
    let (ab, ab_lo) = exact_difference(pf.at(a), pf.at(b));
    let (bc, bc_lo) = exact_difference(pf.at(b), pf.at(c));
    let (ac, ac_lo) = exact_difference(pf.at(a), pf.at(c));
    Ok(exact_sum(&[ab, ab_lo, bc, bc_lo, -ac, -ac_lo]))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthReport {
    pub level: usize,
    pub slope_minus: f64,
    pub slope_plus: f64,
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Slope of `x ↦ W^σ(x, level; anchor)` over the central half of the cone.
pub fn check_growth(df: &DifferenceField, level: usize) -> Result<GrowthReport> {
    if level >= df.n_levels() {
        return param("level out of range");
    }
    let lim = df.limit(level);
    if lim + 1 < 100 {
        return domain(format!("level {level} has only {} finite sites", lim + 1));
    }
    let env = df.env();
    let (a, b) = (lim / 4, 3 * lim / 4);
    let xs: Vec<f64> = (a..=b).map(|x| env.coord(x)).collect();
    let slope = |pf: &PassageField| {
        let g0 = pf.at(df.anchor);
        let ys: Vec<f64> = (a..=b).map(|x| pf.value(level, x) - g0).collect();
        ls_slope(&xs, &ys)
    };
    Ok(GrowthReport {
        level,
        slope_minus: slope(&df.pf_minus),
        slope_plus: slope(&df.pf_plus),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BusemannSummary {
    pub d0: f64,
    pub anchor: SitePoint,
    pub target_minus: SitePoint,
    pub target_plus: SitePoint,
    pub growth: Vec<GrowthReport>,
    pub monotonicity_max_defect: f64,
}

pub fn summarize(df: &DifferenceField) -> BusemannSummary {
    let growth = [df.anchor.level, df.n_levels() / 2]
        .iter()
        .filter_map(|&k| check_growth(df, k).ok())
        .collect();
    BusemannSummary {
        d0: df.d0,
        anchor: df.anchor,
        target_minus: df.pf_minus.target,
        target_plus: df.pf_plus.target,
        growth,
        monotonicity_max_defect: df.max_increase(),
    }
}
