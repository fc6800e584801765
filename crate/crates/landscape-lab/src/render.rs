//! SVG rendering of a run. Level 0 is at the bottom; one column of the
//! window maps to `width / columns` pixels.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::environment::SitePoint;
use crate::error::{param, Result};
use crate::instability::Island;
use crate::lpp::{Geodesic, Sign};
use crate::shocks::ShockInterface;

/// Drawing order is the declaration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Layer {
    Heatmap,
    Islands,
    Interfaces,
    Geodesics,
    Points,
}

impl Layer {
    pub const ALL: [Layer; 5] = [
        Layer::Heatmap,
        Layer::Islands,
        Layer::Interfaces,
        Layer::Geodesics,
        Layer::Points,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Layer::Heatmap => "heatmap",
            Layer::Islands => "islands",
            Layer::Interfaces => "interfaces",
            Layer::Geodesics => "geodesics",
            Layer::Points => "points",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Style {
    pub width: f64,
    pub height: f64,
    pub background: String,
    pub heatmap_low: String,
    pub heatmap_high: String,
    pub island_fill: String,
    pub island_stroke: String,
    pub interface_minus: String,
    pub interface_plus: String,
    pub geodesic_minus: String,
    pub geodesic_plus: String,
    pub point: String,
    pub stroke_width: f64,
    pub point_size: f64,
}

impl Default for Style {
    fn default() -> Self {
        serde_json::from_str(include_str!("../assets/style.json"))
            .expect("bundled style table parses")
    }
}

/// Row-major values, `n_levels × width`; NaN cells are left blank.
#[derive(Clone, Debug)]
pub struct Heatmap {
    pub n_levels: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct Scene {
    pub n_levels: usize,
    /// Column window `[from, to)`.
    pub columns: (usize, usize),
    pub heatmap: Option<Heatmap>,
    pub islands: Vec<Island>,
    pub interfaces: Vec<ShockInterface>,
    pub geodesics: Vec<(Sign, Geodesic)>,
    pub points: Vec<SitePoint>,
    /// Heatmap blocks per axis are capped at these counts.
    pub max_blocks: (usize, usize),
}

pub type Polyline = Vec<(f64, f64)>;

/// Left and right boundary polylines of an island in data coordinates
/// (column, level), bottom row first. Row `[l, r]` spans columns `l..r+1`.
pub fn island_outline(isl: &Island) -> (Polyline, Polyline) {
    let y = |i: usize| (isl.first_row() + i) as f64 + 0.5;
    let left = isl
        .left
        .iter()
        .enumerate()
        .map(|(i, &l)| (l as f64, y(i)))
        .collect();
    let right = isl
        .right
        .iter()
        .enumerate()
        .map(|(i, &r)| ((r + 1) as f64, y(i)))
        .collect();
    (left, right)
}

/// Linear ramp between two `#rrggbb` colours, `u` clamped to `[0, 1]`.
pub fn ramp(low: &str, high: &str, u: f64) -> String {
    let rgb = |s: &str| {
        let h = s.trim_start_matches('#');
        let c =
            |i: usize| u8::from_str_radix(h.get(i..i + 2).unwrap_or("00"), 16).unwrap_or(0) as f64;
        [c(0), c(2), c(4)]
    };
    let (a, b) = (rgb(low), rgb(high));
    let u = u.clamp(0.0, 1.0);
    let m = |i: usize| (a[i] + (b[i] - a[i]) * u).round() as u8;
    format!("#{:02x}{:02x}{:02x}", m(0), m(1), m(2))
}

struct Frame {
    x0: f64,
    cols: f64,
    n: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn x(&self, col: f64) -> f64 {
        (col - self.x0) / self.cols * self.w
    }
    fn y(&self, level: f64) -> f64 {
        self.h - level / self.n * self.h
    }
    fn pt(&self, (c, l): (f64, f64)) -> String {
        format!("{:.3},{:.3}", self.x(c), self.y(l))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvgMeta {
    pub generator: String,
    pub prng_id: String,
    pub layers: Vec<String>,
    /// Islands passed to the renderer.
    pub islands: usize,
    /// Islands that intersect the column window.
    pub islands_drawn: usize,
    pub columns: (usize, usize),
    pub created_unix: u64,
}

pub fn render_svg(scene: &Scene, layers: &[Layer], style: &Style) -> Result<String> {
    if layers.is_empty() {
        return param("render needs at least one layer");
    }
    let (from, to) = scene.columns;
    if from >= to || scene.n_levels == 0 {
        return param("empty column window or no levels");
    }
    let mut layers = layers.to_vec();
    layers.sort();
    layers.dedup();
    let f = Frame {
        x0: from as f64,
        cols: (to - from) as f64,
        n: scene.n_levels as f64,
        w: style.width,
        h: style.height,
    };
    let in_window = |isl: &Island| {
        isl.left
            .iter()
            .zip(&isl.right)
            .any(|(&l, &r)| l < to && r >= from)
    };
    let drawn = scene.islands.iter().filter(|i| in_window(i)).count();
    let meta = SvgMeta {
        generator: format!("landscape-lab {}", env!("CARGO_PKG_VERSION")),
        prng_id: crate::environment::PRNG_ID.into(),
        layers: layers.iter().map(|l| l.name().to_string()).collect(),
        islands: scene.islands.len(),
        islands_drawn: drawn,
        columns: scene.columns,
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = style.width,
        h = style.height
    );
    let _ = writeln!(s, "<metadata>{}</metadata>", serde_json::to_string(&meta)?);
    let _ = writeln!(
        s,
        r#"<rect width="100%" height="100%" fill="{}"/>"#,
        style.background
    );
    for layer in &layers {
        let _ = writeln!(s, r#"<g id="{}">"#, layer.name());
        match layer {
            Layer::Heatmap => heatmap(&mut s, scene, &f, style)?,
            Layer::Islands => {
                for isl in scene.islands.iter().filter(|i| in_window(i)) {
                    let (l, r) = island_outline(isl);
                    let pts: Vec<String> = l
                        .into_iter()
                        .chain(r.into_iter().rev())
                        .map(|p| f.pt(p))
                        .collect();
                    let _ = writeln!(
                        s,
                        r#"<polygon points="{}" fill="{}" stroke="{}" stroke-width="{}"/>"#,
                        pts.join(" "),
                        style.island_fill,
                        style.island_stroke,
                        style.stroke_width
                    );
                }
            }
            Layer::Interfaces => {
                for it in &scene.interfaces {
                    let pts: Vec<String> = it
                        .points()
                        .filter_map(|p| {
                            it.cut(p.level)
                                .map(|c| f.pt((c as f64, p.level as f64 + 0.5)))
                        })
                        .collect();
                    let colour = if it.sign == Sign::Plus {
                        &style.interface_plus
                    } else {
                        &style.interface_minus
                    };
                    polyline(&mut s, &pts, colour, style.stroke_width);
                }
            }
            Layer::Geodesics => {
                for (sign, g) in &scene.geodesics {
                    let mut pts = Vec::new();
                    for r in &g.runs {
                        let y = r.level as f64 + 0.5;
                        pts.push(f.pt((r.entry as f64 + 0.5, y)));
                        pts.push(f.pt((r.exit as f64 + 0.5, y)));
                    }
                    let colour = if *sign == Sign::Plus {
                        &style.geodesic_plus
                    } else {
                        &style.geodesic_minus
                    };
                    polyline(&mut s, &pts, colour, style.stroke_width);
                }
            }
            Layer::Points => {
                let half = style.point_size / 2.0;
                for p in scene.points.iter().filter(|p| p.x >= from && p.x < to) {
                    let _ = writeln!(
                        s,
                        r#"<rect x="{:.3}" y="{:.3}" width="{}" height="{}" fill="{}"/>"#,
                        f.x(p.x as f64 + 0.5) - half,
                        f.y(p.level as f64 + 0.5) - half,
                        style.point_size,
                        style.point_size,
                        style.point
                    );
                }
            }
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn polyline(s: &mut String, pts: &[String], colour: &str, width: f64) {
    if pts.len() >= 2 {
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="{width}"/>"#,
            pts.join(" ")
        );
    }
}

/// Block means over the window, one rect per block, coloured on the ramp by
/// rank between the smallest and largest block mean.
fn heatmap(s: &mut String, scene: &Scene, f: &Frame, style: &Style) -> Result<()> {
    let Some(hm) = &scene.heatmap else {
        return param("heatmap layer requested without heatmap values");
    };
    if hm.values.len() != hm.n_levels * hm.width {
        return param("heatmap values do not match their dimensions");
    }
    let (from, to) = (scene.columns.0, scene.columns.1.min(hm.width));
    if from >= to {
        return Ok(());
    }
    let (mx, my) = scene.max_blocks;
    let bx = (to - from).min(mx.max(1));
    let by = hm.n_levels.min(my.max(1));
    let mut blocks = Vec::with_capacity(bx * by);
    for j in 0..by {
        let (k0, k1) = (j * hm.n_levels / by, (j + 1) * hm.n_levels / by);
        for i in 0..bx {
            let (c0, c1) = (
                from + i * (to - from) / bx,
                from + (i + 1) * (to - from) / bx,
            );
            let (mut sum, mut n) = (0.0, 0usize);
            for k in k0..k1 {
                for v in &hm.values[k * hm.width + c0..k * hm.width + c1] {
                    if v.is_finite() {
                        sum += v;
                        n += 1;
                    }
                }
            }
            blocks.push((
                k0,
                k1,
                c0,
                c1,
                if n > 0 { sum / n as f64 } else { f64::NAN },
            ));
        }
    }
    let finite = blocks.iter().map(|b| b.4).filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    for (k0, k1, c0, c1, v) in blocks {
        if !v.is_finite() {
            continue;
        }
        let u = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
        let _ = writeln!(
            s,
            r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
            f.x(c0 as f64),
            f.y(k1 as f64),
            f.x(c1 as f64) - f.x(c0 as f64),
            f.y(k0 as f64) - f.y(k1 as f64),
            ramp(&style.heatmap_low, &style.heatmap_high, u)
        );
    }
    Ok(())
}

/// Parses the metadata block back out of a rendered file.
pub fn read_meta(svg: &str) -> Option<SvgMeta> {
    let a = svg.find("<metadata>")? + "<metadata>".len();
    let b = svg[a..].find("</metadata>")? + a;
    serde_json::from_str(&svg[a..b]).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene3() -> Scene {
        Scene {
            n_levels: 3,
            columns: (0, 3),
            heatmap: Some(Heatmap {
                n_levels: 3,
                width: 3,
                values: (0..9).map(|i| i as f64).collect(),
            }),
            max_blocks: (10, 10),
            ..Default::default()
        }
    }

    fn fills(svg: &str, group: &str) -> Vec<String> {
        let a = svg.find(&format!(r#"<g id="{group}">"#)).unwrap();
        let b = svg[a..].find("</g>").unwrap() + a;
        svg[a..b]
            .split("fill=\"")
            .skip(1)
            .map(|t| t[..7].to_string())
            .collect()
    }

    #[test]
    fn heatmap_of_three_by_three() {
        let svg = render_svg(&scene3(), &[Layer::Heatmap], &Style::default()).unwrap();
        let f = fills(&svg, "heatmap");
        assert_eq!(f.len(), 9);
        // values rise along each row and from level to level; the ramp is
        // monotone in every channel for the bundled style
        let lum = |c: &str| {
            (1..7)
                .step_by(2)
                .map(|i| u32::from_str_radix(&c[i..i + 2], 16).unwrap())
                .sum::<u32>()
        };
        let mut by_value: Vec<(usize, u32)> = Vec::new();
        // blocks are emitted level by level, column by column: value index = level*3+col
        for (i, c) in f.iter().enumerate() {
            by_value.push((i, lum(c)));
        }
        assert!(by_value.windows(2).all(|w| w[0].1 < w[1].1));
        assert_eq!(f[0], Style::default().heatmap_low);
        assert_eq!(f[8], Style::default().heatmap_high);
    }

    #[test]
    fn island_polygon_is_its_boundaries() {
        let isl = Island {
            value: 0.0,
            tip: SitePoint::new(4, 6),
            bottom: SitePoint::new(1, 3),
            left: vec![4, 3, 5],
            right: vec![5, 7, 6],
        };
        let mut sc = scene3();
        sc.n_levels = 5;
        sc.columns = (0, 10);
        sc.islands = vec![isl.clone()];
        let style = Style::default();
        let svg = render_svg(&sc, &[Layer::Islands], &style).unwrap();
        let f = Frame {
            x0: 0.0,
            cols: 10.0,
            n: 5.0,
            w: style.width,
            h: style.height,
        };
        let (l, r) = island_outline(&isl);
        let want: Vec<String> = l.iter().chain(r.iter().rev()).map(|&p| f.pt(p)).collect();
        assert!(svg.contains(&format!(r#"points="{}""#, want.join(" "))));
        assert_eq!(l[0], (4.0, 2.5));
        assert_eq!(r[2], (7.0, 4.5));
        let m = read_meta(&svg).unwrap();
        assert_eq!((m.islands, m.islands_drawn), (1, 1));
    }

    #[test]
    fn layers_are_drawn_in_fixed_order() {
        let svg = render_svg(
            &scene3(),
            &[Layer::Points, Layer::Heatmap, Layer::Islands],
            &Style::default(),
        )
        .unwrap();
        let pos = |n: &str| svg.find(&format!(r#"<g id="{n}">"#)).unwrap();
        assert!(pos("heatmap") < pos("islands") && pos("islands") < pos("points"));
        assert_eq!(
            read_meta(&svg).unwrap().layers,
            vec!["heatmap", "islands", "points"]
        );
    }

    #[test]
    fn empty_layer_set_is_an_error() {
        assert!(render_svg(&scene3(), &[], &Style::default()).is_err());
    }
}
