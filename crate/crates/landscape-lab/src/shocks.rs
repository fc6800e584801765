//! Competition functions, shock interfaces, shock ages and the classification
//! of geodesic configurations into twenty classes.
//!
//! Mesh conventions. A continuum point where geodesics separate sits between
//! two mesh cells, so most origins here are bonds `(j|j+1)`: leftmost
//! geodesics start from the left cell and rightmost ones from the right cell.
//! An origin may also be a single site or a span `[xl, xr]`. Shock machinery
//! is only defined for the semi-discrete backend.

use serde::{Deserialize, Serialize};

use crate::busemann::DifferenceField;
use crate::environment::{EnvironmentField, Kind, SitePoint};
use crate::error::{param, LabError, Result};
use crate::instability::{InstabilityGraph, Island};
use crate::lpp::{tol_eq, Geodesic, PassageField, Run, Side, Sign};

pub fn require_semi_discrete(env: &EnvironmentField) -> Result<()> {
    match env.kind() {
        Kind::SemiDiscrete => Ok(()),
        Kind::Exponential => Err(LabError::Capability(
            "shocks are only defined for the semi-discrete backend; the lattice model does not exhibit them".into(),
        )),
    }
}

/// `d(x,r)` for a reference point `(a,t)`: best value ending right of `a`
/// minus best value ending left of `a`, with a boundary row on level `t`.
#[derive(Clone, Debug)]
pub struct CompetitionField {
    pub reference: SitePoint,
    pub sign: Sign,
    /// Boundary values on the reference level, columns `0..cols`.
    pub boundary: Vec<f64>,
    /// Per level `r < t`: tolerance below which `d` counts as zero.
    pub level_tol: Vec<f64>,
    cols: usize,
    d: Vec<f64>,
}

impl CompetitionField {
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn d(&self, x: usize, r: usize) -> Result<f64> {
        if r >= self.reference.level {
            return param(format!(
                "level {r} is not below the reference level {}",
                self.reference.level
            ));
        }
        if x >= self.cols {
            return param(format!(
                "column {x} outside the field ({} columns)",
                self.cols
            ));
        }
        Ok(self.d[r * self.cols + x])
    }

    pub fn level(&self, r: usize) -> &[f64] {
        &self.d[r * self.cols..(r + 1) * self.cols]
    }
}

/// Competition field with boundary `f(y) = G^σ(y,t) − G^σ(anchor)`.
pub fn competition_field(
    df: &DifferenceField,
    reference: SitePoint,
    sign: Sign,
) -> Result<CompetitionField> {
    let pf = match sign {
        Sign::Minus | Sign::Plus => df.field(sign),
        Sign::Untagged => return param("competition fields need a signed Busemann row"),
    };
    let t = reference.level;
    if t >= df.n_levels() {
        return param("reference level outside the field");
    }
    let lim = pf.reach_limit(t).unwrap_or(0);
    let g0 = pf.at(df.anchor);
    let f: Vec<f64> = (0..=lim).map(|y| pf.value(t, y) - g0).collect();
    competition_field_with_boundary(df.env(), reference, sign, &f)
}

/// Two constrained sweeps from an explicit boundary row.
pub fn competition_field_with_boundary(
    env: &EnvironmentField,
    reference: SitePoint,
    sign: Sign,
    f: &[f64],
) -> Result<CompetitionField> {
    require_semi_discrete(env)?;
    let (t, a) = (reference.level, reference.x);
    if t == 0 || t >= env.n_levels() {
        return param("reference level must have a level below it");
    }
    let cols = f.len();
    if a >= cols || cols > env.width() {
        return param("reference column outside the boundary row");
    }
    if f.iter().any(|v| !v.is_finite()) {
        return param("boundary row must be finite");
    }
    let ninf = f64::NEG_INFINITY;
    let g: Vec<f64> = (0..cols).map(|y| env.path(t, y) + f[y]).collect();
    // terminal rows on level t
    let mut right = vec![ninf; cols];
    let mut left = vec![ninf; cols];
    let mut best = ninf;
    for y in (0..cols).rev() {
        if y >= a {
            best = best.max(g[y]);
        }
        right[y] = best - env.path(t, y);
    }
    for i in 0..=a {
        let m = g[i..=a].iter().fold(ninf, |m, &v| m.max(v));
        left[i] = m - env.path(t, i);
    }
    let mut d = vec![0.0; t * cols];
    let mut level_tol = vec![0.0; t];
    for r in (0..t).rev() {
        for i in (0..cols - 1).rev() {
            let inc = env.increment(r, i);
            right[i] = right[i].max(inc + right[i + 1]);
            left[i] = left[i].max(inc + left[i + 1]);
        }
        let row = &mut d[r * cols..(r + 1) * cols];
        let mut mag: f64 = 0.0;
        for i in 0..cols {
            row[i] = if left[i] == ninf {
                f64::INFINITY
            } else {
                right[i] - left[i]
            };
            mag = mag.max(right[i].abs());
        }
        level_tol[r] = tol_eq(mag);
    }
    Ok(CompetitionField {
        reference,
        sign,
        boundary: f.to_vec(),
        level_tol,
        cols,
        d,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InterfaceSide {
    Left,
    Right,
}

/// A shock interface at mesh resolution. `xs[i]` is the crossing on level
/// `start.level - 1 - i`; a left crossing `x` marks the bond `(x-1|x)`, a
/// right crossing the bond `(x|x+1)`. The path stops where it leaves the field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShockInterface {
    pub sign: Sign,
    pub side: InterfaceSide,
    pub start: SitePoint,
    pub xs: Vec<usize>,
    /// Largest change of the crossing between consecutive levels.
    pub max_jump: usize,
}

impl ShockInterface {
    fn new(sign: Sign, side: InterfaceSide, start: SitePoint, xs: Vec<usize>) -> Self {
        let max_jump = xs
            .windows(2)
            .map(|w| w[0].abs_diff(w[1]))
            .max()
            .unwrap_or(0);
        ShockInterface {
            sign,
            side,
            start,
            xs,
            max_jump,
        }
    }

    pub fn at(&self, level: usize) -> Option<usize> {
        let i = self.start.level.checked_sub(level + 1)?;
        self.xs.get(i).copied()
    }

    /// Lowest level reached.
    pub fn bottom_level(&self) -> usize {
        self.start.level - self.xs.len()
    }

    pub fn points(&self) -> impl Iterator<Item = SitePoint> + '_ {
        self.xs
            .iter()
            .enumerate()
            .map(|(i, &x)| SitePoint::new(self.start.level - 1 - i, x))
    }

    /// First column on the right side of the interface on a level.
    pub fn cut(&self, level: usize) -> Option<usize> {
        let x = self.at(level)?;
        Some(match self.side {
            InterfaceSide::Left => x,
            InterfaceSide::Right => x + 1,
        })
    }

    /// The bond separating the two sides on a level.
    pub fn bond(&self, level: usize) -> Option<(usize, usize)> {
        let x = self.at(level)?;
        match self.side {
            InterfaceSide::Left => x.checked_sub(1).map(|l| (l, x)),
            InterfaceSide::Right => Some((x, x + 1)),
        }
    }
}

/// Zero crossings of a competition field: `inf{d ≥ 0}` and `sup{d ≤ 0}` per level.
pub fn shock_interfaces_from_point(
    cf: &CompetitionField,
) -> Result<(ShockInterface, ShockInterface)> {
    let t = cf.reference.level;
    let (mut ls, mut rs) = (Vec::new(), Vec::new());
    let (mut l_open, mut r_open) = (true, true);
    for r in (0..t).rev() {
        let row = cf.level(r);
        let tol = cf.level_tol[r];
        if let Some(i) = row.windows(2).position(|w| w[1] < w[0] - tol) {
            return Err(LabError::Domain(format!(
                "competition function decreases at ({i}, {r})"
            )));
        }
        if l_open {
            match row.iter().position(|&v| v >= -tol) {
                Some(x) => ls.push(x),
                None => l_open = false,
            }
        }
        if r_open {
            match row.iter().rposition(|&v| v <= tol) {
                Some(x) => rs.push(x),
                None => r_open = false,
            }
        }
    }
    Ok((
        ShockInterface::new(cf.sign, InterfaceSide::Left, cf.reference, ls),
        ShockInterface::new(cf.sign, InterfaceSide::Right, cf.reference, rs),
    ))
}

/// Same crossings from exact exits: the left interface holds the first site
/// whose geodesic reaches column `a` or beyond on level `t`, the right one the
/// last site whose geodesic enters level `t` at or left of `a`.
pub fn trace_interface(
    pf: &PassageField,
    reference: SitePoint,
    side: InterfaceSide,
) -> Result<ShockInterface> {
    require_semi_discrete(pf.env())?;
    let (t, a) = (reference.level, reference.x);
    if t >= pf.n_levels() || !pf.reachable(reference) {
        return param(format!("reference {reference:?} is not a reachable site"));
    }
    let jump = |r: usize, x: usize| pf.exact_exit(r, x).expect("inside the cone");
    let mut xs = Vec::new();
    match side {
        InterfaceSide::Left => {
            let lim = pf.reach_limit(t).unwrap();
            let mut bar = first_true(lim, |x| jump(t, x) >= a).expect("a itself qualifies");
            for r in (0..t).rev() {
                let lim = pf.reach_limit(r).unwrap();
                match first_true(lim, |x| jump(r, x) >= bar) {
                    Some(x) => {
                        xs.push(x);
                        bar = x;
                    }
                    None => break,
                }
            }
        }
        InterfaceSide::Right => {
            let mut bar = a;
            for r in (0..t).rev() {
                let lim = pf.reach_limit(r).unwrap();
                // last x with J(r,x) <= bar
                match first_true(lim, |x| jump(r, x) > bar) {
                    Some(0) => break,
                    Some(x) => {
                        xs.push(x - 1);
                        bar = x - 1;
                    }
                    None => {
                        xs.push(lim);
                        bar = lim;
                    }
                }
            }
        }
    }
    Ok(ShockInterface::new(pf.sign, side, reference, xs))
}

/// Smallest x in `0..=lim` with `pred(x)`, for a monotone predicate.
fn first_true(lim: usize, pred: impl Fn(usize) -> bool) -> Option<usize> {
    let (mut lo, mut hi) = (0, lim + 1);
    while lo < hi {
        let m = (lo + hi) / 2;
        if pred(m) {
            hi = m;
        } else {
            lo = m + 1;
        }
    }
    (lo <= lim).then_some(lo)
}

/// Origin of a bundle: leftmost geodesics start at `xl`, rightmost at `xr`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Origin {
    pub level: usize,
    pub xl: usize,
    pub xr: usize,
}

impl Origin {
    pub fn site(p: SitePoint) -> Self {
        Origin {
            level: p.level,
            xl: p.x,
            xr: p.x,
        }
    }

    pub fn bond(level: usize, j: usize) -> Self {
        Origin {
            level,
            xl: j,
            xr: j + 1,
        }
    }

    pub fn span(level: usize, xl: usize, xr: usize) -> Result<Self> {
        if xl > xr {
            return param("span ends out of order");
        }
        Ok(Origin { level, xl, xr })
    }
}

fn overlap(a: &Run, b: &Run) -> bool {
    a.entry.max(b.entry) <= a.exit.min(b.exit)
}

/// First level offset at which the runs overlap, starting at `from`.
fn first_overlap(g1: &Geodesic, g2: &Geodesic, from: usize) -> Option<usize> {
    g1.runs
        .iter()
        .zip(&g2.runs)
        .skip(from)
        .position(|(a, b)| overlap(a, b))
        .map(|i| i + from)
}

/// Whether a leftmost-side and rightmost-side geodesic separate at the origin.
fn split_at_origin(o: &Origin, l: &Geodesic, r: &Geodesic) -> bool {
    let (el, er) = (l.runs[0].exit, r.runs[0].exit);
    if o.xl == o.xr {
        el != er
    } else {
        el < o.xr
    }
}

/// Shock age of a (left, right) geodesic pair out of an origin: the first
/// level offset at which they share a site again, `None` if they do not
/// separate at the origin. Geodesics always meet at the target, so the age is
/// at most the distance to the top level.
pub fn pair_age(o: &Origin, l: &Geodesic, r: &Geodesic) -> Option<usize> {
    if !split_at_origin(o, l, r) {
        return None;
    }
    Some(first_overlap(l, r, 1).unwrap_or(l.runs.len()))
}

/// First level offset at which two geodesics share a site other than the
/// origin cells.
fn meet_beyond_origin(o: &Origin, g1: &Geodesic, g2: &Geodesic) -> usize {
    let (a, b) = (&g1.runs[0], &g2.runs[0]);
    let m = a.exit.min(b.exit);
    if m >= a.entry.max(b.entry) && m >= o.xr && m > o.xl {
        return 0;
    }
    first_overlap(g1, g2, 1).unwrap_or(g1.runs.len())
}

/// First shared site after the origin level as (offset, column). Within a level
/// a run is traversed left to right, so the column orders meets on one level.
fn meet_point(g1: &Geodesic, g2: &Geodesic) -> (usize, usize) {
    match first_overlap(g1, g2, 1) {
        Some(i) => (i, g1.runs[i].entry.max(g2.runs[i].entry)),
        None => (g1.runs.len(), 0),
    }
}

/// Number of initial levels on which two geodesics from one site agree.
fn agree_len(g1: &Geodesic, g2: &Geodesic) -> usize {
    g1.runs
        .iter()
        .zip(&g2.runs)
        .take_while(|(a, b)| a == b)
        .count()
}

/// Age of the shock at a site, `None` when the leftmost and rightmost
/// geodesics leave the site together.
pub fn detect_shock(pf: &PassageField, v: SitePoint, tol_tie: f64) -> Result<Option<usize>> {
    shock_age(pf, Origin::site(v), tol_tie)
}

pub fn shock_age(pf: &PassageField, o: Origin, tol_tie: f64) -> Result<Option<usize>> {
    require_semi_discrete(pf.env())?;
    let l = pf.extract_geodesic(SitePoint::new(o.level, o.xl), Side::Leftmost, tol_tie)?;
    let r = pf.extract_geodesic(SitePoint::new(o.level, o.xr), Side::Rightmost, tol_tie)?;
    Ok(pair_age(&o, &l, &r))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub left: Geodesic,
    /// Present only when a third branch separates from both extremes.
    pub middle: Option<Geodesic>,
    pub right: Geodesic,
}

impl Family {
    fn from_field(pf: &PassageField, o: Origin, tol_tie: f64) -> Result<Family> {
        let left = pf.extract_geodesic(SitePoint::new(o.level, o.xl), Side::Leftmost, tol_tie)?;
        let right = pf.extract_geodesic(SitePoint::new(o.level, o.xr), Side::Rightmost, tol_tie)?;
        let mut middle = None;
        if o.xl == o.xr && o.level + 1 < pf.n_levels() {
            let src = SitePoint::new(o.level, o.xl);
            let (el, er) = (left.runs[0].exit, right.runs[0].exit);
            for m in pf.near_max_exits(o.level, o.xl, tol_tie) {
                if m <= el || m >= er {
                    continue;
                }
                let g = pf.geodesic_via(src, m, Side::Leftmost, tol_tie)?;
                if !overlap(&g.runs[1], &left.runs[1]) && !overlap(&g.runs[1], &right.runs[1]) {
                    middle = Some(g);
                    break;
                }
            }
        }
        Ok(Family {
            left,
            middle,
            right,
        })
    }

    fn paths(&self) -> Vec<&Geodesic> {
        let mut v = vec![&self.left];
        v.extend(self.middle.as_ref());
        v.push(&self.right);
        v
    }
}

/// Up to six geodesics out of one origin. Unsigned bundles carry one family
/// twice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicBundle {
    pub origin: Origin,
    pub signed: bool,
    pub minus: Family,
    pub plus: Family,
}

/// `g1 ⪯ g2`: never strictly right on any common level.
fn weakly_left(g1: &Geodesic, g2: &Geodesic) -> bool {
    g1.runs
        .iter()
        .zip(&g2.runs)
        .all(|(a, b)| a.level == b.level && a.entry <= b.entry && a.exit <= b.exit)
}

impl GeodesicBundle {
    pub fn from_difference(df: &DifferenceField, o: Origin, tol_tie: f64) -> Result<Self> {
        require_semi_discrete(df.env())?;
        let minus = Family::from_field(&df.pf_minus, o, tol_tie)?;
        let plus = Family::from_field(&df.pf_plus, o, tol_tie)?;
        Self::from_parts(o, true, minus, plus)
    }

    pub fn from_passage(pf: &PassageField, o: Origin, tol_tie: f64) -> Result<Self> {
        require_semi_discrete(pf.env())?;
        let fam = Family::from_field(pf, o, tol_tie)?;
        Self::from_parts(o, false, fam.clone(), fam)
    }

    /// Validates the ordering chain.
    pub fn from_parts(origin: Origin, signed: bool, minus: Family, plus: Family) -> Result<Self> {
        let n = minus.left.runs.len();
        for g in minus.paths().into_iter().chain(plus.paths()) {
            let s = g
                .runs
                .first()
                .ok_or_else(|| LabError::Inconsistency("empty geodesic".into()))?;
            if s.level != origin.level || g.runs.len() != n {
                return Err(LabError::Inconsistency(
                    "geodesics must start on the origin level and share a horizon".into(),
                ));
            }
        }
        let starts_ok = |f: &Family| {
            f.left.runs[0].entry == origin.xl
                && f.right.runs[0].entry == origin.xr
                && f.middle
                    .as_ref()
                    .is_none_or(|m| origin.xl == origin.xr && m.runs[0].entry == origin.xl)
        };
        if !starts_ok(&minus) || !starts_ok(&plus) {
            return Err(LabError::Inconsistency(
                "geodesics do not start at the origin".into(),
            ));
        }
        for (name, f) in [("-", &minus), ("+", &plus)] {
            let p = f.paths();
            if p.windows(2).any(|w| !weakly_left(w[0], w[1])) {
                return Err(LabError::Inconsistency(format!(
                    "L/M/R order violated in the {name} family"
                )));
            }
        }
        if !weakly_left(&minus.left, &plus.left) || !weakly_left(&minus.right, &plus.right) {
            return Err(LabError::Inconsistency(
                "a minus geodesic lies right of its plus partner".into(),
            ));
        }
        if let (Some(m), Some(p)) = (&minus.middle, &plus.middle) {
            if !weakly_left(m, p) {
                return Err(LabError::Inconsistency(
                    "minus middle lies right of plus middle".into(),
                ));
            }
        }
        Ok(GeodesicBundle {
            origin,
            signed,
            minus,
            plus,
        })
    }

    pub fn family(&self, sign: Sign) -> &Family {
        match sign {
            Sign::Plus => &self.plus,
            _ => &self.minus,
        }
    }

    pub fn age(&self, sign: Sign) -> Option<usize> {
        let f = self.family(sign);
        pair_age(&self.origin, &f.left, &f.right)
    }

    /// Levels on which the two leftmost (or rightmost) geodesics agree.
    pub fn hug_len(&self, side: Side) -> usize {
        match side {
            Side::Leftmost => agree_len(&self.minus.left, &self.plus.left),
            Side::Rightmost => agree_len(&self.minus.right, &self.plus.right),
        }
    }

    /// Whether the leftmost minus and rightmost plus geodesics share a site
    /// other than the origin.
    pub fn extremes_meet(&self) -> bool {
        meet_beyond_origin(&self.origin, &self.minus.left, &self.plus.right)
            < self.minus.left.runs.len()
    }

    /// First offset at which R⁻ and L⁺ share a site.
    pub fn inner_meet(&self) -> usize {
        meet_beyond_origin(&self.origin, &self.minus.right, &self.plus.left)
    }

    /// Whether R⁻ and L⁺ meet strictly before both same-sign pairs do.
    pub fn inner_meets_first(&self) -> bool {
        let inner = if self.inner_meet() == 0 {
            (0, 0)
        } else {
            meet_point(&self.minus.right, &self.plus.left)
        };
        inner < meet_point(&self.minus.left, &self.minus.right)
            && inner < meet_point(&self.plus.left, &self.plus.right)
    }

    /// For a distinct middle geodesic: whether it meets the left geodesic
    /// strictly before the right one (`None` on a tie or without a middle).
    pub fn middle_meets_left_first(&self, sign: Sign) -> Option<bool> {
        let f = self.family(sign);
        let m = f.middle.as_ref()?;
        let ml = meet_point(m, &f.left);
        let mr = meet_point(m, &f.right);
        (ml != mr).then_some(ml < mr)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassGroup {
    StableNoSign,
    StableSigned,
    Dust,
    HugPlus,
    HugMinus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Special {
    None,
    ProperDouble,
    Pns,
    SinglePlus,
    SingleMinus,
    Snowbird,
    HuggingPlus,
    HuggingMinus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigClass {
    /// 1..=20 in reading order of the configuration table (see README).
    pub class_id: u8,
    pub group: ClassGroup,
    pub minus_shock: bool,
    pub plus_shock: bool,
    pub special: Special,
    /// A tie below the resolution was resolved toward the coarser class.
    pub borderline: bool,
    /// The geodesic instability test disagrees with the supplied graph membership.
    pub graph_mismatch: bool,
    /// Both hugging conditions held before resolution.
    pub double_hug_raw: bool,
}

impl ConfigClass {
    fn new(class_id: u8, minus_shock: bool, plus_shock: bool, special: Special) -> Self {
        let group = match class_id {
            1..=4 => ClassGroup::StableNoSign,
            5..=8 => ClassGroup::StableSigned,
            9..=12 => ClassGroup::Dust,
            13..=16 => ClassGroup::HugPlus,
            _ => ClassGroup::HugMinus,
        };
        ConfigClass {
            class_id,
            group,
            minus_shock,
            plus_shock,
            special,
            borderline: false,
            graph_mismatch: false,
            double_hug_raw: false,
        }
    }

    pub fn is_unstable_class(&self) -> bool {
        self.class_id >= 9
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifyParams {
    /// Ages up to this many levels are below resolution and count as no shock.
    pub resolution: usize,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams { resolution: 1 }
    }
}

/// Sorts a bundle into one of the twenty configurations. `on_graph` is the
/// origin's membership in the instability graph when known.
pub fn classify_configuration(
    b: &GeodesicBundle,
    on_graph: Option<bool>,
    p: &ClassifyParams,
) -> ConfigClass {
    let h = p.resolution;
    let mut borderline = false;
    let mut shock = |age: Option<usize>| match age {
        Some(a) if a > h => true,
        Some(_) => {
            borderline = true;
            false
        }
        None => false,
    };
    let (am, ap) = (b.age(Sign::Minus), b.age(Sign::Plus));
    let (sm, sp) = (shock(am), shock(ap));

    let mut c = if !b.signed {
        match (sm, b.middle_meets_left_first(Sign::Minus)) {
            (false, _) => ConfigClass::new(1, false, false, Special::None),
            (true, None) => ConfigClass::new(2, true, true, Special::ProperDouble),
            (true, Some(true)) => ConfigClass::new(3, true, true, Special::ProperDouble),
            (true, Some(false)) => ConfigClass::new(4, true, true, Special::ProperDouble),
        }
    } else if b.extremes_meet() {
        stable_signed(b, sm, sp, &mut borderline)
    } else {
        unstable(b, sm, sp, am.unwrap_or(0), ap.unwrap_or(0), &mut borderline)
    };
    c.borderline |= borderline;
    if let Some(g) = on_graph {
        c.graph_mismatch = b.signed && g != c.is_unstable_class();
    }
    c
}

fn stable_signed(b: &GeodesicBundle, sm: bool, sp: bool, borderline: &mut bool) -> ConfigClass {
    match (sm, sp) {
        (false, false) => ConfigClass::new(5, false, false, Special::None),
        (true, true) => {
            let mid = b
                .middle_meets_left_first(Sign::Plus)
                .or(b.middle_meets_left_first(Sign::Minus));
            let paired = b.hug_len(Side::Leftmost) > 0 && b.hug_len(Side::Rightmost) > 0;
            if !paired {
                *borderline = true;
            }
            match mid {
                None => ConfigClass::new(6, true, true, Special::ProperDouble),
                Some(true) => ConfigClass::new(7, true, true, Special::ProperDouble),
                Some(false) => ConfigClass::new(8, true, true, Special::ProperDouble),
            }
        }
        _ => {
            *borderline = true;
            ConfigClass::new(5, false, false, Special::None)
        }
    }
}

fn unstable(
    b: &GeodesicBundle,
    sm: bool,
    sp: bool,
    am: usize,
    ap: usize,
    borderline: &mut bool,
) -> ConfigClass {
    let hug_l = b.hug_len(Side::Leftmost);
    let hug_r = b.hug_len(Side::Rightmost);
    if sm && sp && b.inner_meets_first() {
        let mut c = ConfigClass::new(12, true, true, Special::Snowbird);
        if hug_l > 0 || hug_r > 0 {
            *borderline = true;
        }
        c.double_hug_raw = hug_l > 0 && hug_r > 0;
        return c;
    }
    // hugging needs the shock of the matching sign
    let mut plus = hug_l > 0 && sp;
    let mut minus = hug_r > 0 && sm;
    let double_raw = plus && minus;
    if (hug_l > 0 && !sp) || (hug_r > 0 && !sm) {
        *borderline = true;
    }
    if double_raw {
        *borderline = true;
        plus = hug_l > hug_r;
        minus = hug_r > hug_l;
    }
    let mut c = if plus {
        if sm {
            ConfigClass::new(16, true, true, Special::HuggingPlus)
        } else {
            match b.middle_meets_left_first(Sign::Plus) {
                None => ConfigClass::new(13, false, true, Special::HuggingPlus),
                Some(false) => ConfigClass::new(14, false, true, Special::HuggingPlus),
                Some(true) => ConfigClass::new(15, false, true, Special::HuggingPlus),
            }
        }
    } else if minus {
        if sp {
            ConfigClass::new(20, true, true, Special::HuggingMinus)
        } else {
            match b.middle_meets_left_first(Sign::Minus) {
                None => ConfigClass::new(17, true, false, Special::HuggingMinus),
                Some(true) => ConfigClass::new(18, true, false, Special::HuggingMinus),
                Some(false) => ConfigClass::new(19, true, false, Special::HuggingMinus),
            }
        }
    } else {
        match (sm, sp) {
            (false, false) => ConfigClass::new(9, false, false, Special::Pns),
            (false, true) => ConfigClass::new(10, false, true, Special::SinglePlus),
            (true, false) => ConfigClass::new(11, true, false, Special::SingleMinus),
            (true, true) => {
                *borderline = true;
                match ap.cmp(&am) {
                    std::cmp::Ordering::Greater => {
                        ConfigClass::new(10, false, true, Special::SinglePlus)
                    }
                    std::cmp::Ordering::Less => {
                        ConfigClass::new(11, true, false, Special::SingleMinus)
                    }
                    std::cmp::Ordering::Equal => ConfigClass::new(9, false, false, Special::Pns),
                }
            }
        }
    };
    c.double_hug_raw = double_raw;
    c
}

/// Number of places where a geodesic crosses an interface: levels on which
/// its run straddles the cut, plus side changes between consecutive levels.
pub fn interface_crossings(iface: &ShockInterface, g: &Geodesic) -> usize {
    let mut count = 0;
    let mut prev: Option<bool> = None;
    for run in &g.runs {
        let Some(cut) = iface.cut(run.level) else {
            prev = None;
            continue;
        };
        let side = if run.exit < cut {
            Some(false)
        } else if run.entry >= cut {
            Some(true)
        } else {
            None
        };
        match (prev, side) {
            (_, None) => count += 1,
            (Some(a), Some(b)) if a != b => count += 1,
            _ => {}
        }
        prev = side;
    }
    count
}

/// Levels on which two interfaces that already met below their starts
/// disagree again further down.
pub fn coalescence_violations(a: &ShockInterface, b: &ShockInterface) -> usize {
    let top = a.start.level.min(b.start.level);
    let bottom = a.bottom_level().max(b.bottom_level());
    let mut met = false;
    let mut bad = 0;
    for r in (bottom..top).rev() {
        let same = a.cut(r) == b.cut(r);
        if met && !same {
            bad += 1;
        }
        met |= same;
    }
    bad
}

/// Levels on which a plus interface lies strictly right of a minus interface
/// of the same side started further right on the same level.
pub fn order_violations(plus: &ShockInterface, minus: &ShockInterface) -> Result<usize> {
    if plus.sign != Sign::Plus || minus.sign != Sign::Minus || plus.side != minus.side {
        return param("need a plus and a minus interface of the same side");
    }
    if plus.start.level != minus.start.level || plus.start.x >= minus.start.x {
        return param(
            "the plus interface must start strictly left of the minus one on the same level",
        );
    }
    let lo = plus.bottom_level().max(minus.bottom_level());
    Ok((lo..plus.start.level)
        .filter(|&r| plus.cut(r) > minus.cut(r))
        .count())
}

/// Interface bonds that are not increase bonds of `D` on their level.
pub fn off_graph_bonds(
    df: &DifferenceField,
    graph: &InstabilityGraph,
    iface: &ShockInterface,
) -> usize {
    (iface.bottom_level()..iface.start.level)
        .filter(|&r| {
            iface
                .bond(r)
                .is_some_and(|(l, _)| !origin_on_graph(df, graph, Origin::bond(r, l)))
        })
        .count()
}

/// Whether an origin sits on the instability graph: a site in the point
/// set, or a bond/span across which `D` drops by more than the level tolerance.
pub fn origin_on_graph(df: &DifferenceField, graph: &InstabilityGraph, o: Origin) -> bool {
    if o.xl == o.xr {
        return graph.is_point(SitePoint::new(o.level, o.xl));
    }
    df.d(o.level, o.xl) - df.d(o.level, o.xr) > graph.level_tol[o.level]
}

/// An island rebuilt from the misordered pair of interfaces below its tip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IslandReconstruction {
    pub island: Island,
    /// Crossings of the plus-right and minus-left interfaces on the level
    /// below the bottom row: the mesh image of the bottom point.
    pub bottom_span: (usize, usize),
    pub minus_left: ShockInterface,
    pub plus_right: ShockInterface,
}

impl IslandReconstruction {
    pub fn tip_origin(&self) -> Origin {
        Origin::site(self.island.tip)
    }

    pub fn bottom_origin(&self) -> Origin {
        Origin {
            level: self.island.bottom.level,
            xl: self.bottom_span.0,
            xr: self.bottom_span.1,
        }
    }
}

/// Traces `Υ^{L,−}` and `Υ^{R,+}` down from a tip bond `(s|s+1)`; returns the
/// island they enclose when they are misordered just below the tip.
pub fn reconstruct_island_from_tip(
    df: &DifferenceField,
    tip: SitePoint,
    level_tol: &[f64],
) -> Result<Option<IslandReconstruction>> {
    require_semi_discrete(df.env())?;
    let (t2, s) = (tip.level, tip.x);
    if t2 >= df.n_levels() || s >= df.limit(t2) {
        return param(format!("tip {tip:?} outside the common cone"));
    }
    let c = df.d(t2, s);
    if c - df.d(t2, s + 1) <= level_tol[t2] {
        return param(format!("tip {tip:?} is not on an increase bond"));
    }
    if t2 == 0 {
        return Ok(None);
    }
    let ml = trace_interface(&df.pf_minus, tip, InterfaceSide::Left)?;
    let pr = trace_interface(&df.pf_plus, tip, InterfaceSide::Right)?;
    // An interface that stops has passed the whole cone: the minus-left one
    // beyond its right end, the plus-right one beyond column 0.
    let row_at = |r: usize| -> (i64, i64) {
        let b = ml.at(r).map_or(df.limit(r) as i64 + 1, |x| x as i64);
        let a = pr.at(r).map_or(-1, |x| x as i64);
        (b, a)
    };
    let (b, a) = row_at(t2 - 1);
    if b > a {
        return Ok(None);
    }
    let top_left = {
        let lim = df.pf_minus.reach_limit(t2).unwrap();
        first_true(lim, |x| df.pf_minus.exact_exit(t2, x).unwrap() >= s).unwrap()
    };
    let (mut left, mut right) = (vec![top_left], vec![s]);
    let mut r = t2;
    let span = loop {
        if r == 0 {
            return Err(LabError::Truncation("island reaches level 0".into()));
        }
        r -= 1;
        let (b, a) = row_at(r);
        if b > a {
            break (a.max(0) as usize, (b as usize).min(df.limit(r)));
        }
        left.push(b as usize);
        right.push(a as usize);
    };
    let t1 = r;
    for (i, (&l, &h)) in left.iter().zip(&right).enumerate() {
        let k = t2 - i;
        if l == 0 || h >= df.limit(k) {
            return Err(LabError::Truncation(format!(
                "island row on level {k} touches the window edge or the cone limit"
            )));
        }
    }
    let below = df.level_d(t1);
    let u = below.partition_point(|&v| v > c + level_tol[t1]);
    if u == 0 || u >= below.len() {
        return Err(LabError::Truncation(
            "bottom crossing outside the cone".into(),
        ));
    }
    left.reverse();
    right.reverse();
    let island = Island {
        value: c,
        tip,
        bottom: SitePoint::new(t1, u - 1),
        left,
        right,
    };
    Ok(Some(IslandReconstruction {
        island,
        bottom_span: span,
        minus_left: ml,
        plus_right: pr,
    }))
}

/// Where a census point comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CensusRole {
    Tip,
    /// Bottom span whose geodesics of both signs reach the tip.
    Bottom,
    /// Bottom span where no geodesic of one sign from the level below passes
    /// through the tip: the bottom point is not resolved on the mesh.
    BottomUnresolved,
    LeftBoundary,
    RightBoundary,
    /// Boundary bonds on the first row, the row below the tip, or shared with
    /// an abutting island.
    LeftEdge,
    RightEdge,
    Sampled,
}

impl CensusRole {
    pub const ALL: [CensusRole; 8] = [
        CensusRole::Tip,
        CensusRole::Bottom,
        CensusRole::BottomUnresolved,
        CensusRole::LeftBoundary,
        CensusRole::RightBoundary,
        CensusRole::LeftEdge,
        CensusRole::RightEdge,
        CensusRole::Sampled,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusEntry {
    pub role: CensusRole,
    pub origin: Origin,
    pub on_graph: bool,
    pub minus_age: Option<usize>,
    pub plus_age: Option<usize>,
    pub class: ConfigClass,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TaxonomyCensus {
    pub entries: Vec<CensusEntry>,
    /// Islands whose tip did not rebuild, or rebuilt to a different island.
    pub reconstruction_mismatches: usize,
    /// Bundles that could not be built (ordering violations, bad origins).
    pub bundle_errors: usize,
}

impl TaxonomyCensus {
    pub fn histogram(&self, roles: &[CensusRole]) -> std::collections::BTreeMap<u8, usize> {
        let mut h = std::collections::BTreeMap::new();
        for e in self.entries.iter().filter(|e| roles.contains(&e.role)) {
            *h.entry(e.class.class_id).or_insert(0) += 1;
        }
        h
    }

    /// Share of entries with one of `roles` that satisfy `pred` (1 when empty).
    pub fn fraction(
        &self,
        roles: &[CensusRole],
        pred: impl Fn(&ConfigClass) -> bool,
    ) -> (usize, usize) {
        let sel: Vec<_> = self
            .entries
            .iter()
            .filter(|e| roles.contains(&e.role))
            .collect();
        (sel.iter().filter(|e| pred(&e.class)).count(), sel.len())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CensusParams {
    pub classify: ClassifyParams,
    pub tol_tie: f64,
    /// Uniformly sampled bonds inside the common cone.
    pub samples: usize,
    pub seed: u64,
    /// Use at most this many islands (the first ones by tip).
    pub max_islands: Option<usize>,
}

impl Default for CensusParams {
    fn default() -> Self {
        CensusParams {
            classify: ClassifyParams::default(),
            tol_tie: 1e-9,
            samples: 2000,
            seed: 0,
            max_islands: None,
        }
    }
}

fn census_entry(
    df: &DifferenceField,
    graph: &InstabilityGraph,
    role: CensusRole,
    o: Origin,
    p: &CensusParams,
) -> Result<CensusEntry> {
    let b = GeodesicBundle::from_difference(df, o, p.tol_tie)?;
    let on_graph = origin_on_graph(df, graph, o);
    let class = classify_configuration(&b, Some(on_graph), &p.classify);
    Ok(CensusEntry {
        role,
        origin: o,
        on_graph,
        minus_age: b.age(Sign::Minus),
        plus_age: b.age(Sign::Plus),
        class,
    })
}

/// Classifies every island tip, bottom and boundary bond, plus uniformly
/// sampled bonds.
pub fn taxonomy_census(
    df: &DifferenceField,
    graph: &InstabilityGraph,
    p: &CensusParams,
) -> Result<TaxonomyCensus> {
    use rand::{Rng, SeedableRng};
    use rayon::prelude::*;
    require_semi_discrete(df.env())?;
    let islands = &graph.islands[..p.max_islands.unwrap_or(usize::MAX).min(graph.islands.len())];
    // island rows per level, for abutting checks
    let mut rows: Vec<Vec<(usize, usize)>> = vec![Vec::new(); df.n_levels()];
    for isl in &graph.islands {
        for i in 0..isl.height() {
            rows[isl.first_row() + i].push((isl.left[i], isl.right[i]));
        }
    }
    for r in &mut rows {
        r.sort_unstable();
    }
    let in_island = |k: usize, x: usize| {
        let r = &rows[k];
        let i = r.partition_point(|&(l, _)| l <= x);
        i > 0 && r[i - 1].1 >= x
    };

    let per_island: Vec<(Vec<(CensusRole, Origin)>, bool)> = islands
        .par_iter()
        .map(|isl| {
            let mut out = Vec::new();
            let rec = match reconstruct_island_from_tip(df, isl.tip, &graph.level_tol) {
                Ok(Some(r)) => r,
                _ => return (out, false),
            };
            let ok = &rec.island == isl;
            out.push((CensusRole::Tip, rec.tip_origin()));
            let bo = rec.bottom_origin();
            let resolved = [(&df.pf_plus, bo.xl), (&df.pf_minus, bo.xr)]
                .iter()
                .all(|(pf, x)| {
                    pf.extract_geodesic(SitePoint::new(bo.level, *x), Side::Leftmost, p.tol_tie)
                        .is_ok_and(|g| g.contains(isl.tip))
                });
            out.push((
                if resolved {
                    CensusRole::Bottom
                } else {
                    CensusRole::BottomUnresolved
                },
                bo,
            ));
            for i in 0..isl.height() {
                let k = isl.first_row() + i;
                if k == isl.tip.level {
                    continue;
                }
                let edge_row = i == 0 || k + 1 == isl.tip.level;
                let (l, r) = (isl.left[i], isl.right[i]);
                let lrole = if edge_row || in_island(k, l - 1) {
                    CensusRole::LeftEdge
                } else {
                    CensusRole::LeftBoundary
                };
                let rrole = if edge_row || in_island(k, r + 1) {
                    CensusRole::RightEdge
                } else {
                    CensusRole::RightBoundary
                };
                out.push((lrole, Origin::bond(k, l - 1)));
                out.push((rrole, Origin::bond(k, r)));
            }
            (out, ok)
        })
        .collect();

    let mut census = TaxonomyCensus::default();
    let mut work: Vec<(CensusRole, Origin)> = Vec::new();
    for (items, ok) in per_island {
        if !ok {
            census.reconstruction_mismatches += 1;
        }
        work.extend(items);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(p.seed);
    let n = df.n_levels();
    if n >= 2 {
        for _ in 0..p.samples {
            let k = rng.random_range(0..n - 1);
            let lim = df.limit(k);
            if lim < 1 {
                continue;
            }
            let j = rng.random_range(0..lim);
            work.push((CensusRole::Sampled, Origin::bond(k, j)));
        }
    }
    let results: Vec<Result<CensusEntry>> = work
        .par_iter()
        .map(|&(role, o)| census_entry(df, graph, role, o, p))
        .collect();
    for r in results {
        match r {
            Ok(e) => census.entries.push(e),
            Err(_) => census.bundle_errors += 1,
        }
    }
    Ok(census)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{gen_environment, EnvParams};
    use crate::lpp::solve_to_target;
    use std::sync::Arc;

    fn geo(level: usize, runs: &[(usize, usize)], side: Side) -> Geodesic {
        Geodesic {
            side,
            runs: runs
                .iter()
                .enumerate()
                .map(|(i, &(entry, exit))| Run {
                    level: level + i,
                    entry,
                    exit,
                })
                .collect(),
        }
    }

    fn fam(l: Geodesic, r: Geodesic) -> Family {
        Family {
            left: l,
            middle: None,
            right: r,
        }
    }

    #[test]
    fn identical_geodesics_are_class_one() {
        let g = geo(0, &[(2, 3), (3, 3), (3, 5)], Side::Leftmost);
        let f = fam(g.clone(), g.clone());
        let b = GeodesicBundle::from_parts(Origin::site(SitePoint::new(0, 2)), false, f.clone(), f)
            .unwrap();
        let c = classify_configuration(&b, None, &ClassifyParams::default());
        assert_eq!(c.class_id, 1);
        assert_eq!(c.group, ClassGroup::StableNoSign);
    }

    // Minus geodesics end at column 6, plus geodesics at column 9.
    #[test]
    fn snowbird_definition_instance() {
        let lm = geo(0, &[(2, 2), (2, 3), (3, 3), (3, 6), (6, 6)], Side::Leftmost);
        let rm = geo(
            0,
            &[(2, 4), (4, 5), (5, 5), (5, 6), (6, 6)],
            Side::Rightmost,
        );
        let lp = geo(0, &[(2, 4), (4, 5), (5, 5), (5, 8), (8, 9)], Side::Leftmost);
        let rp = geo(
            0,
            &[(2, 6), (6, 7), (7, 8), (8, 8), (8, 9)],
            Side::Rightmost,
        );
        let b = GeodesicBundle::from_parts(
            Origin::site(SitePoint::new(0, 2)),
            true,
            fam(lm, rm),
            fam(lp, rp),
        )
        .unwrap();
        assert_eq!(b.age(Sign::Minus), Some(3));
        assert_eq!(b.age(Sign::Plus), Some(3));
        assert!(!b.extremes_meet());
        let c = classify_configuration(&b, Some(true), &ClassifyParams::default());
        assert_eq!((c.class_id, c.special), (12, Special::Snowbird));
        assert!(!c.borderline && !c.graph_mismatch);
    }

    #[test]
    fn hugging_and_pns_instances() {
        let o = Origin::site(SitePoint::new(0, 2));
        // L- = L+ for two levels, plus pair re-meets after 3, minus pair after 1
        let lm = geo(0, &[(2, 2), (2, 3), (3, 3), (3, 4), (4, 6)], Side::Leftmost);
        let rm = geo(
            0,
            &[(2, 3), (3, 3), (3, 3), (3, 4), (4, 6)],
            Side::Rightmost,
        );
        let lp = geo(0, &[(2, 2), (2, 3), (3, 5), (5, 8), (8, 9)], Side::Leftmost);
        let rp = geo(
            0,
            &[(2, 6), (6, 7), (7, 7), (7, 8), (8, 9)],
            Side::Rightmost,
        );
        let b = GeodesicBundle::from_parts(o, true, fam(lm.clone(), rm), fam(lp, rp)).unwrap();
        assert_eq!(b.hug_len(Side::Leftmost), 2);
        let c = classify_configuration(&b, None, &ClassifyParams::default());
        assert_eq!(c.class_id, 13);
        assert_eq!(c.group, ClassGroup::HugPlus);
        // the minus pair splitting for one level only is below resolution
        assert!(c.borderline);

        // pns: minus pair never splits, plus pair re-meets one level up
        let lp = geo(0, &[(2, 4), (4, 6), (6, 7), (7, 9), (9, 9)], Side::Leftmost);
        let rp = geo(
            0,
            &[(2, 6), (6, 6), (6, 7), (7, 9), (9, 9)],
            Side::Rightmost,
        );
        let b = GeodesicBundle::from_parts(o, true, fam(lm.clone(), lm), fam(lp, rp)).unwrap();
        let c = classify_configuration(&b, None, &ClassifyParams::default());
        assert_eq!(c.class_id, 9);
    }

    #[test]
    fn ordering_violation_is_an_error() {
        let l = geo(0, &[(2, 5), (5, 9)], Side::Leftmost);
        let r = geo(0, &[(2, 3), (3, 9)], Side::Rightmost);
        let o = Origin::site(SitePoint::new(0, 2));
        let e =
            GeodesicBundle::from_parts(o, true, fam(l.clone(), r.clone()), fam(l, r)).unwrap_err();
        assert!(matches!(e, LabError::Inconsistency(_)));
    }

    fn small_df(seed: u64) -> DifferenceField {
        let env = Arc::new(
            gen_environment(
                &EnvParams::SemiDiscrete {
                    n_levels: 40,
                    mesh: 1e-2,
                    x_min: 0.0,
                    x_max: 20.0,
                },
                seed,
            )
            .unwrap(),
        );
        crate::busemann::build_difference_field(&env, &Default::default()).unwrap()
    }

    #[test]
    fn lattice_backend_has_no_shocks() {
        let env = Arc::new(EnvironmentField::from_weights(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let pf = solve_to_target(&env, SitePoint::new(1, 1), Sign::Untagged).unwrap();
        assert!(matches!(
            detect_shock(&pf, SitePoint::new(0, 0), 1e-9),
            Err(LabError::Capability(_))
        ));
        assert!(matches!(
            trace_interface(&pf, SitePoint::new(1, 0), InterfaceSide::Left),
            Err(LabError::Capability(_))
        ));
    }

    #[test]
    fn competition_field_signs_and_shift() {
        let df = small_df(3);
        let t = 30;
        let a = df.limit(t) / 2;
        let cf = competition_field(&df, SitePoint::new(t, a), Sign::Minus).unwrap();
        for r in 0..t {
            let row = cf.level(r);
            assert!(row.windows(2).all(|w| w[1] >= w[0] - cf.level_tol[r]));
            assert!(row[cf.cols() - 1] > 0.0);
        }
        // a few levels down the left edge is still outside the reach of a
        for r in t - 5..t {
            assert!(cf.level(r)[0] < 0.0, "left end at level {r}");
        }
        // one level below the reference, a itself is on the nonnegative side
        // and the left crossing is not right of it
        let row = cf.level(t - 1);
        assert!(row[a] >= -cf.level_tol[t - 1]);
        let (l, _) = shock_interfaces_from_point(&cf).unwrap();
        assert!(l.xs[0] <= a);
        assert!(cf.d(0, t).is_err());

        let shifted: Vec<f64> = cf.boundary.iter().map(|v| v + 3.25).collect();
        let cf2 =
            competition_field_with_boundary(df.env(), cf.reference, Sign::Minus, &shifted).unwrap();
        let (i1, i2) = (
            shock_interfaces_from_point(&cf).unwrap(),
            shock_interfaces_from_point(&cf2).unwrap(),
        );
        assert_eq!(i1, i2);
        for r in 0..t {
            for x in (0..cf.cols()).step_by(97) {
                let (u, v) = (cf.d(x, r).unwrap(), cf2.d(x, r).unwrap());
                assert!(
                    u == v || (u - v).abs() <= 8.0 * cf.level_tol[r],
                    "{u} vs {v}"
                );
            }
        }
    }

    #[test]
    fn unique_crossing_and_plateau() {
        let env = Arc::new(EnvironmentField::from_increments(2, 1.0, 0.0, 4.0, &[0.0; 8]).unwrap());
        // flat environment: d(x,0) = g-right - g-left is driven by the boundary alone
        let f = [0.0, 1.0, 2.0, 1.0, 0.0];
        let cf =
            competition_field_with_boundary(&env, SitePoint::new(1, 2), Sign::Plus, &f).unwrap();
        let (l, r) = shock_interfaces_from_point(&cf).unwrap();
        // every x <= 2 reaches the peak at 2 from both sides: zero plateau on [0,2]
        assert_eq!((l.xs[0], r.xs[0]), (0, 2));
        // d = [-1, -1, 0, inf, inf]: a single zero at the reference column
        let f = [0.0, 3.0, 2.0, 2.0, 0.0];
        let cf =
            competition_field_with_boundary(&env, SitePoint::new(1, 2), Sign::Plus, &f).unwrap();
        assert_eq!(cf.level(0)[..3], [-1.0, -1.0, 0.0]);
        let (l, r) = shock_interfaces_from_point(&cf).unwrap();
        assert_eq!((l.xs[0], r.xs[0]), (2, 2));
    }

    #[test]
    fn traced_interfaces_match_competition_crossings() {
        let df = small_df(5);
        for (t, frac) in [(30usize, 2usize), (20, 3), (35, 4)] {
            let a = df.limit(t) / frac;
            for sign in [Sign::Minus, Sign::Plus] {
                let cf = competition_field(&df, SitePoint::new(t, a), sign).unwrap();
                let (l, r) = shock_interfaces_from_point(&cf).unwrap();
                let tl = trace_interface(df.field(sign), SitePoint::new(t, a), InterfaceSide::Left)
                    .unwrap();
                let tr =
                    trace_interface(df.field(sign), SitePoint::new(t, a), InterfaceSide::Right)
                        .unwrap();
                assert_eq!(l.xs, tl.xs, "left {sign:?} t={t}");
                assert_eq!(r.xs, tr.xs, "right {sign:?} t={t}");
                assert!(l.xs.iter().zip(&r.xs).all(|(a, b)| *a <= b + 1));
            }
        }
    }

    #[test]
    fn interface_bonds_are_shocks_and_avoid_geodesics() {
        let df = small_df(8);
        let pf = &df.pf_plus;
        let t = 30;
        let a = df.limit(t) / 2;
        for side in [InterfaceSide::Left, InterfaceSide::Right] {
            let it = trace_interface(pf, SitePoint::new(t, a), side).unwrap();
            for p in it.points() {
                let Some((l, r)) = it.bond(p.level) else {
                    continue;
                };
                let age = shock_age(pf, Origin::bond(p.level, l), 1e-9).unwrap();
                // the right pair may share a site on the reference level itself
                assert!(
                    age.is_some_and(|g| g >= t - p.level),
                    "bond {l}|{r} on level {}",
                    p.level
                );
            }
        }
        // no geodesic run contains both cells of an interface bond
        let it = trace_interface(pf, SitePoint::new(t, a), InterfaceSide::Left).unwrap();
        for x in (0..df.limit(0)).step_by(37) {
            let g = pf
                .extract_geodesic(SitePoint::new(0, x), Side::Leftmost, 0.0)
                .unwrap();
            for run in &g.runs[1..] {
                if let Some((l, r)) = it.bond(run.level) {
                    assert!(!(run.entry <= l && r <= run.exit));
                }
            }
        }
    }

    #[test]
    fn shocks_absent_inside_geodesics() {
        let df = small_df(9);
        let pf = &df.pf_minus;
        let g = pf
            .extract_geodesic(SitePoint::new(0, 100), Side::Leftmost, 1e-9)
            .unwrap();
        for run in &g.runs[1..g.runs.len() - 1] {
            for x in run.entry + 1..=run.exit {
                assert_eq!(
                    detect_shock(pf, SitePoint::new(run.level, x), 1e-9).unwrap(),
                    None
                );
            }
        }
    }

    // R- and L+ meet on the same level as the plus pair, but further left.
    #[test]
    fn same_level_meets_are_ordered_by_column() {
        let o = Origin::span(0, 2, 5).unwrap();
        let lm = geo(0, &[(2, 2), (2, 3), (3, 3), (3, 4), (4, 6)], Side::Leftmost);
        let rm = geo(
            0,
            &[(5, 5), (5, 5), (5, 5), (5, 6), (6, 6)],
            Side::Rightmost,
        );
        let lp = geo(0, &[(2, 3), (3, 3), (3, 4), (4, 8), (8, 9)], Side::Leftmost);
        let rp = geo(
            0,
            &[(5, 6), (6, 7), (7, 7), (7, 8), (8, 9)],
            Side::Rightmost,
        );
        let b = GeodesicBundle::from_parts(o, true, fam(lm, rm), fam(lp, rp)).unwrap();
        assert_eq!((b.age(Sign::Minus), b.age(Sign::Plus)), (Some(4), Some(3)));
        assert_eq!(b.inner_meet(), 3);
        assert!(b.inner_meets_first());
        let c = classify_configuration(&b, Some(true), &ClassifyParams::default());
        assert_eq!(c.special, Special::Snowbird);
    }

    #[test]
    fn interface_checks_on_small_paths() {
        let a = ShockInterface::new(
            Sign::Minus,
            InterfaceSide::Left,
            SitePoint::new(4, 3),
            vec![3, 3, 2, 2],
        );
        assert_eq!(a.max_jump, 1);
        let stays = geo(0, &[(0, 1), (1, 1), (1, 1), (1, 2)], Side::Leftmost);
        let crosses = geo(0, &[(0, 1), (1, 3), (3, 3), (3, 4)], Side::Leftmost);
        assert_eq!(interface_crossings(&a, &stays), 0);
        assert_eq!(interface_crossings(&a, &crosses), 1);

        let b = ShockInterface::new(
            Sign::Minus,
            InterfaceSide::Left,
            SitePoint::new(4, 5),
            vec![5, 3, 1, 2],
        );
        assert_eq!(coalescence_violations(&a, &b), 1);
        assert_eq!(coalescence_violations(&a, &a), 0);

        let plus = ShockInterface::new(
            Sign::Plus,
            InterfaceSide::Left,
            SitePoint::new(4, 2),
            vec![2, 2, 3, 1],
        );
        let minus = ShockInterface::new(
            Sign::Minus,
            InterfaceSide::Left,
            SitePoint::new(4, 5),
            vec![5, 3, 2, 2],
        );
        assert_eq!(order_violations(&plus, &minus).unwrap(), 1);
        assert!(order_violations(&minus, &plus).is_err());
    }
}
