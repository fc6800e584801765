//! Last-passage values to a fixed target, geodesic backtracking and the
//! composition check.
//!
//! Paths move up one level or right one site at a time. A path therefore
//! occupies one contiguous run `[entry, exit]` per level and steps up at the
//! exit. Both backends obey
//!
//! ```text
//! G(k,i) = a(k,i) + max( G(k+1,i), r(k,i) + G(k,i+1) )
//! ```
//!
//! with `a` the vertex weight (exponential) and `r` the level increment
//! (semi-discrete). On the target level only the run ending at the target
//! column is admissible.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{EnvironmentField, SitePoint};
use crate::error::{domain, param, LabError, Result};

pub const NO_JUMP: u32 = u32::MAX;

/// Relative equality tolerance, `1e-9 * (1 + |g|)`.
pub fn tol_eq(g: f64) -> f64 {
    1e-9 * (1.0 + g.abs())
}

/// Relative tolerance coefficients: a comparison at magnitude `g` uses `c * (1 + |g|)`.
/// `tie` is absolute.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub eq: f64,
    pub tie: f64,
    pub flat: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eq: 1e-9,
            tie: 1e-9,
            flat: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if !(self.eq > 0.0 && self.tie > 0.0 && self.flat > 0.0) {
            return param("tolerances must be positive");
        }
        if self.flat < self.eq {
            return param("tol_flat must be at least tol_eq");
        }
        Ok(())
    }

    pub fn eq_at(&self, g: f64) -> f64 {
        self.eq * (1.0 + g.abs())
    }

    pub fn flat_at(&self, g: f64) -> f64 {
        self.flat * (1.0 + g.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Minus,
    Plus,
    Untagged,
}

impl Sign {
    pub fn label(self) -> &'static str {
        match self {
            Sign::Minus => "-",
            Sign::Plus => "+",
            Sign::Untagged => "0",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Leftmost,
    Rightmost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub level: usize,
    pub entry: usize,
    pub exit: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geodesic {
    pub side: Side,
    pub runs: Vec<Run>,
}

impl Geodesic {
    pub fn source(&self) -> SitePoint {
        SitePoint::new(self.runs[0].level, self.runs[0].entry)
    }

    /// Entry point on every level, source first.
    pub fn points(&self) -> Vec<SitePoint> {
        self.runs
            .iter()
            .map(|r| SitePoint::new(r.level, r.entry))
            .collect()
    }

    pub fn run_at(&self, level: usize) -> Option<&Run> {
        let first = self.runs.first()?.level;
        if level < first {
            return None;
        }
        self.runs.get(level - first)
    }

    /// Whether the site lies on the path (inside some level run).
    pub fn contains(&self, p: SitePoint) -> bool {
        self.run_at(p.level)
            .is_some_and(|r| r.entry <= p.x && p.x <= r.exit)
    }

    pub fn weight(&self, env: &EnvironmentField) -> f64 {
        self.runs
            .iter()
            .map(|r| env.run_weight(r.level, r.entry, r.exit))
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct PassageField {
    env: Arc<EnvironmentField>,
    pub target: SitePoint,
    pub sign: Sign,
    values: Vec<f64>,
    /// Leftmost exact maximiser of the jump position from each site.
    jump: Vec<u32>,
}

pub fn solve_to_target(
    env: &Arc<EnvironmentField>,
    target: SitePoint,
    sign: Sign,
) -> Result<PassageField> {
    if target.level != env.top_level() || target.x >= env.width() {
        return param(format!(
            "target {:?} must lie on the top level {} within width {}",
            target,
            env.top_level(),
            env.width()
        ));
    }
    let (n, w) = (env.n_levels(), env.width());
    let mut values = vec![f64::NEG_INFINITY; n * w];
    let mut jump = vec![NO_JUMP; n * w];
    let top = n - 1;
    let c = target.x;
    {
        let row = &mut values[top * w..(top + 1) * w];
        row[c] = env.site_gain(top, c);
        for i in (0..c).rev() {
            row[i] = env.site_gain(top, i) + (env.right_gain(top, i) + row[i + 1]);
        }
        for j in &mut jump[top * w..top * w + c + 1] {
            *j = c as u32;
        }
    }
    for k in (0..top).rev() {
        let (lower, upper) = values.split_at_mut((k + 1) * w);
        let row = &mut lower[k * w..];
        let up = &upper[..w];
        let (jlow, _) = jump.split_at_mut((k + 1) * w);
        let jrow = &mut jlow[k * w..];
        for i in (0..w).rev() {
            let u = up[i];
            let r = if i + 1 < w {
                env.right_gain(k, i) + row[i + 1]
            } else {
                f64::NEG_INFINITY
            };
            if u == f64::NEG_INFINITY && r == f64::NEG_INFINITY {
                continue;
            }
            if u >= r {
                row[i] = env.site_gain(k, i) + u;
                jrow[i] = i as u32;
            } else {
                row[i] = env.site_gain(k, i) + r;
                jrow[i] = jrow[i + 1];
            }
        }
    }
    Ok(PassageField {
        env: Arc::clone(env),
        target,
        sign,
        values,
        jump,
    })
}

impl PassageField {
    pub fn env(&self) -> &Arc<EnvironmentField> {
        &self.env
    }

    pub fn n_levels(&self) -> usize {
        self.env.n_levels()
    }

    pub fn width(&self) -> usize {
        self.env.width()
    }

    #[inline]
    pub fn value(&self, level: usize, x: usize) -> f64 {
        self.values[level * self.env.width() + x]
    }

    pub fn at(&self, p: SitePoint) -> f64 {
        self.value(p.level, p.x)
    }

    pub fn level_values(&self, level: usize) -> &[f64] {
        let w = self.env.width();
        &self.values[level * w..(level + 1) * w]
    }

    pub fn reachable(&self, p: SitePoint) -> bool {
        self.env.contains(p) && self.at(p).is_finite()
    }

    /// Largest reachable index on a level (the cone is a prefix of every level).
    pub fn reach_limit(&self, level: usize) -> Option<usize> {
        self.level_values(level).iter().rposition(|v| v.is_finite())
    }

    /// Comparable value of leaving level k (< top) upward at column j.
    #[inline]
    pub fn jump_value(&self, k: usize, j: usize) -> f64 {
        self.env.cum(k, j) + self.value(k + 1, j)
    }

    /// Exact leftmost maximiser of the exit column from (k,i).
    pub fn exact_exit(&self, k: usize, i: usize) -> Option<usize> {
        let j = self.jump[k * self.env.width() + i];
        (j != NO_JUMP).then_some(j as usize)
    }

    /// Exit column on level k from entry i, leftmost or rightmost among exits
    /// within `tol` of the best.
    pub fn exit_within(&self, k: usize, i: usize, side: Side, tol: f64) -> Option<usize> {
        let a = self.exact_exit(k, i)?;
        if k == self.target.level {
            return Some(a);
        }
        let thr = self.jump_value(k, a) - tol;
        match side {
            Side::Leftmost => (i..=a).find(|&j| self.jump_value(k, j) >= thr),
            Side::Rightmost => {
                let w = self.env.width();
                let mut j = a;
                while j + 1 < w {
                    match self.exact_exit(k, j + 1) {
                        Some(b) if self.jump_value(k, b) >= thr => j = b,
                        _ => break,
                    }
                }
                Some(j)
            }
        }
    }

    /// All exit columns from (k,i) within `tol` of the best, sorted.
    pub fn near_max_exits(&self, k: usize, i: usize, tol: f64) -> Vec<usize> {
        let Some(a) = self.exact_exit(k, i) else {
            return Vec::new();
        };
        if k == self.target.level {
            return vec![a];
        }
        let thr = self.jump_value(k, a) - tol;
        let mut out: Vec<usize> = (i..=a).filter(|&j| self.jump_value(k, j) >= thr).collect();
        let w = self.env.width();
        let mut j = a;
        while j + 1 < w {
            // scan the gap (j, b) too: values there are below the suffix max but may clear thr
            match self.exact_exit(k, j + 1) {
                Some(b) if self.jump_value(k, b) >= thr => {
                    out.extend((j + 1..b).filter(|&m| self.jump_value(k, m) >= thr));
                    out.push(b);
                    j = b;
                }
                _ => break,
            }
        }
        out
    }

    /// Follows exits from `src` to the target with the given side rule.
    pub fn extract_geodesic(&self, src: SitePoint, side: Side, tol_tie: f64) -> Result<Geodesic> {
        if !self.env.contains(src) {
            return param(format!("source {src:?} out of bounds"));
        }
        if !self.reachable(src) {
            return domain(format!(
                "source {src:?} cannot reach target {:?}",
                self.target
            ));
        }
        let mut runs = Vec::with_capacity(self.n_levels() - src.level);
        let mut i = src.x;
        for k in src.level..self.n_levels() {
            let exit = self
                .exit_within(k, i, side, tol_tie)
                .ok_or_else(|| LabError::Domain(format!("lost the cone at level {k}")))?;
            runs.push(Run {
                level: k,
                entry: i,
                exit,
            });
            i = exit;
        }
        Ok(Geodesic { side, runs })
    }

    /// Geodesic whose first exit is forced to `first_exit`, exact afterwards.
    pub fn geodesic_via(
        &self,
        src: SitePoint,
        first_exit: usize,
        side: Side,
        tol_tie: f64,
    ) -> Result<Geodesic> {
        if first_exit < src.x || !self.reachable(src) {
            return domain("inadmissible first exit");
        }
        let mut runs = vec![Run {
            level: src.level,
            entry: src.x,
            exit: first_exit,
        }];
        if src.level + 1 < self.n_levels() {
            let rest =
                self.extract_geodesic(SitePoint::new(src.level + 1, first_exit), side, tol_tie)?;
            runs.extend(rest.runs);
        }
        Ok(Geodesic { side, runs })
    }

    /// Passage values to every site of `mid_level` from `src`, excluding the
    /// vertex weight of the arrival site: `G(src) = max_z F(z) + G(z)`.
    pub fn forward_from(&self, src: SitePoint, mid_level: usize) -> Vec<f64> {
        let env = &self.env;
        let w = env.width();
        let mut cur = vec![f64::NEG_INFINITY; w];
        cur[src.x] = 0.0;
        for i in src.x + 1..w {
            cur[i] =
                cur[i - 1] + env.site_gain(src.level, i - 1) + env.right_gain(src.level, i - 1);
        }
        for k in src.level + 1..=mid_level {
            let mut next = vec![f64::NEG_INFINITY; w];
            for i in 0..w {
                let from_below = cur[i] + env.site_gain(k - 1, i);
                let from_left = if i > 0 {
                    next[i - 1] + env.site_gain(k, i - 1) + env.right_gain(k, i - 1)
                } else {
                    f64::NEG_INFINITY
                };
                next[i] = from_below.max(from_left);
            }
            cur = next;
        }
        cur
    }

    /// Busemann-style difference along the σ tree: W(v,u) = G(v) - G(u).
    pub fn difference(&self, v: SitePoint, u: SitePoint) -> Result<f64> {
        if !self.reachable(v) || !self.reachable(u) {
            return domain("site outside the cone of the target");
        }
        Ok(self.at(v) - self.at(u))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompositionSample {
    pub src: SitePoint,
    pub mid_level: usize,
    pub g_src: f64,
    pub composed: f64,
    pub defect: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompositionReport {
    pub samples: Vec<CompositionSample>,
    pub max_defect: f64,
    /// max over samples of defect / (1 + |G(src)|)
    pub max_scaled_defect: f64,
    pub pass: bool,
}

fn composition_one(
    pf: &PassageField,
    src: SitePoint,
    mid_level: usize,
) -> Result<CompositionSample> {
    if !(src.level < mid_level && mid_level < pf.target.level) {
        return param(format!(
            "need src level {} < mid {} < target level {}",
            src.level, mid_level, pf.target.level
        ));
    }
    if !pf.reachable(src) {
        return domain(format!("{src:?} unreachable"));
    }
    let f = pf.forward_from(src, mid_level);
    let g_mid = pf.level_values(mid_level);
    let composed = f
        .iter()
        .zip(g_mid)
        .map(|(a, b)| a + b)
        .fold(f64::NEG_INFINITY, f64::max);
    let g_src = pf.at(src);
    Ok(CompositionSample {
        src,
        mid_level,
        g_src,
        composed,
        defect: (composed - g_src).abs(),
    })
}

/// Checks `G(src) = max_z [L(src -> (z,mid)) + G(z,mid)]` for each (src, mid) pair.
pub fn check_composition(
    pf: &PassageField,
    pairs: &[(SitePoint, usize)],
) -> Result<CompositionReport> {
    let samples: Vec<CompositionSample> = pairs
        .par_iter()
        .map(|&(s, m)| composition_one(pf, s, m))
        .collect::<Result<_>>()?;
    let max_defect = samples.iter().map(|s| s.defect).fold(0.0, f64::max);
    let max_scaled_defect = samples
        .iter()
        .map(|s| s.defect / (1.0 + s.g_src.abs()))
        .fold(0.0, f64::max);
    let pass = samples.iter().all(|s| s.defect <= tol_eq(s.g_src));
    Ok(CompositionReport {
        samples,
        max_defect,
        max_scaled_defect,
        pass,
    })
}

/// Random reachable (src, mid) pairs for `check_composition`.
pub fn sample_composition_pairs(pf: &PassageField, n: usize, seed: u64) -> Vec<(SitePoint, usize)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let top = pf.target.level;
    let mut out = Vec::with_capacity(n);
    if top < 2 {
        return out;
    }
    while out.len() < n {
        let level = rng.random_range(0..top - 1);
        let Some(lim) = pf.reach_limit(level) else {
            continue;
        };
        let x = rng.random_range(0..=lim);
        let mid = rng.random_range(level + 1..top);
        out.push((SitePoint::new(level, x), mid));
    }
    out
}
