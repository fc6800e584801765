//! Run configuration: flat `key = value` text with dotted keys (TOML syntax,
//! so `[section]` headers work too). Every problem in a file is collected and
//! reported together; unknown keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::busemann::BusemannParams;
use crate::environment::{EnvParams, SitePoint};
use crate::error::{LabError, Result};
use crate::lpp::Tolerances;

pub const PRESETS: [(&str, &str); 3] = [
    ("smoke", include_str!("../presets/smoke.toml")),
    ("acceptance", include_str!("../presets/acceptance.toml")),
    ("atlas", include_str!("../presets/atlas.toml")),
];

pub fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            LabError::Config(vec![format!(
                "unknown preset `{name}` (smoke, acceptance, atlas)"
            )])
        })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisToggles {
    /// Random (source, mid-level) pairs for the composition check; 0 disables it.
    pub composition_pairs: usize,
    pub min_island_rows: usize,
    /// Levels whose instability set gets a box-counting estimate.
    pub dimension_levels: Vec<usize>,
    /// `None`: on for the semi-discrete backend, off for the lattice.
    pub shocks: Option<bool>,
    pub census_samples: usize,
    pub census_max_islands: Option<usize>,
    /// Sampled geodesics per sign for the duality check.
    pub duality_geodesics: usize,
    /// Island reconstructions written to JSON.
    pub reconstructions_written: usize,
}

impl Default for AnalysisToggles {
    fn default() -> Self {
        AnalysisToggles {
            composition_pairs: 100,
            min_island_rows: 2,
            dimension_levels: vec![0],
            shocks: None,
            census_samples: 2000,
            census_max_islands: None,
            duality_geodesics: 500,
            reconstructions_written: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    pub enabled: bool,
    /// Column window `[from, to)`; `None` shows the whole width.
    pub columns: Option<(usize, usize)>,
    /// Heatmap blocks per axis are capped at these counts.
    pub max_blocks_x: usize,
    pub max_blocks_y: usize,
    pub geodesics: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            enabled: true,
            columns: None,
            max_blocks_x: 400,
            max_blocks_y: 200,
            geodesics: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: EnvParams,
    pub busemann: BusemannParams,
    pub tol: Tolerances,
    pub analysis: AnalysisToggles,
    pub render: RenderOptions,
    pub out: PathBuf,
    pub seeds: Vec<u64>,
    /// Worker pool size; `None` lets the pool pick.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: EnvParams::SemiDiscrete {
                n_levels: 40,
                mesh: 1e-2,
                x_min: 0.0,
                x_max: 4.0,
            },
            busemann: BusemannParams::default(),
            tol: Tolerances::default(),
            analysis: AnalysisToggles::default(),
            render: RenderOptions::default(),
            out: PathBuf::from("out"),
            seeds: vec![1],
            threads: None,
        }
    }
}

/// Flattens a TOML document into dotted keys.
fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

pub fn parse_keys(text: &str) -> Result<BTreeMap<String, toml::Value>> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| LabError::Config(vec![e.to_string()]))?;
    let mut out = BTreeMap::new();
    flatten("", &table, &mut out);
    Ok(out)
}

struct Reader {
    keys: BTreeMap<String, toml::Value>,
    errors: Vec<String>,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<toml::Value> {
        self.keys.remove(key)
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        match self.take(key)? {
            toml::Value::Float(f) => Some(f),
            toml::Value::Integer(i) => Some(i as f64),
            v => {
                self.errors
                    .push(format!("{key}: expected a number, got {v}"));
                None
            }
        }
    }

    fn uint(&mut self, key: &str) -> Option<u64> {
        match self.take(key)? {
            toml::Value::Integer(i) if i >= 0 => Some(i as u64),
            v => {
                self.errors
                    .push(format!("{key}: expected a non-negative integer, got {v}"));
                None
            }
        }
    }

    fn usize(&mut self, key: &str) -> Option<usize> {
        self.uint(key).map(|v| v as usize)
    }

    fn bool(&mut self, key: &str) -> Option<bool> {
        match self.take(key)? {
            toml::Value::Boolean(b) => Some(b),
            v => {
                self.errors
                    .push(format!("{key}: expected true or false, got {v}"));
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.take(key)? {
            toml::Value::String(s) => Some(s),
            v => {
                self.errors
                    .push(format!("{key}: expected a string, got {v}"));
                None
            }
        }
    }

    fn uints(&mut self, key: &str) -> Option<Vec<u64>> {
        match self.take(key)? {
            toml::Value::Integer(i) if i >= 0 => Some(vec![i as u64]),
            toml::Value::Array(a) => {
                let v: Vec<u64> = a
                    .iter()
                    .filter_map(|x| x.as_integer().filter(|i| *i >= 0).map(|i| i as u64))
                    .collect();
                if v.len() != a.len() {
                    self.errors
                        .push(format!("{key}: expected non-negative integers"));
                    return None;
                }
                Some(v)
            }
            v => {
                self.errors.push(format!(
                    "{key}: expected an integer or a list of integers, got {v}"
                ));
                None
            }
        }
    }
}

impl RunConfig {
    /// Applies `key = value` text on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut r = Reader {
            keys: parse_keys(text)?,
            errors: Vec::new(),
        };
        self.apply(&mut r);
        let mut errors = r.errors;
        errors.extend(r.keys.keys().map(|k| format!("unknown key `{k}`")));
        if let Err(LabError::Config(v)) = self.validate() {
            errors.extend(v);
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(LabError::Config(errors))
        }
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn from_preset(name: &str) -> Result<Self> {
        Self::from_text(preset_text(name)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    fn apply(&mut self, r: &mut Reader) {
        let kind = r.string("env.kind");
        let semi = match kind.as_deref() {
            Some("semi_discrete") => true,
            Some("exponential") => false,
            Some(k) => {
                r.errors.push(format!(
                    "env.kind: expected semi_discrete or exponential, got `{k}`"
                ));
                matches!(self.env, EnvParams::SemiDiscrete { .. })
            }
            None => matches!(self.env, EnvParams::SemiDiscrete { .. }),
        };
        let n_levels = r.usize("env.n_levels").unwrap_or(self.env.n_levels());
        if semi {
            let (mut mesh, mut x_min, mut x_max) = match self.env {
                EnvParams::SemiDiscrete {
                    mesh, x_min, x_max, ..
                } => (mesh, x_min, x_max),
                _ => (1e-2, 0.0, 4.0),
            };
            mesh = r.float("env.mesh").unwrap_or(mesh);
            x_min = r.float("env.x_min").unwrap_or(x_min);
            x_max = r.float("env.x_max").unwrap_or(x_max);
            for k in ["env.n_cols", "env.rate"] {
                if r.take(k).is_some() {
                    r.errors
                        .push(format!("{k} applies to the exponential backend only"));
                }
            }
            self.env = EnvParams::SemiDiscrete {
                n_levels,
                mesh,
                x_min,
                x_max,
            };
        } else {
            let (mut n_cols, mut rate) = match self.env {
                EnvParams::Exponential { n_cols, rate, .. } => (n_cols, rate),
                _ => (n_levels, 1.0),
            };
            n_cols = r.usize("env.n_cols").unwrap_or(n_cols);
            rate = r.float("env.rate").unwrap_or(rate);
            for k in ["env.mesh", "env.x_min", "env.x_max"] {
                if r.take(k).is_some() {
                    r.errors
                        .push(format!("{k} applies to the semi-discrete backend only"));
                }
            }
            self.env = EnvParams::Exponential {
                n_levels,
                n_cols,
                rate,
            };
        }

        let b = &mut self.busemann;
        if let Some(v) = r.float("busemann.theta") {
            b.theta = v;
        }
        if let Some(v) = r.float("busemann.delta_sep") {
            b.delta_sep = Some(v);
        }
        if let Some(v) = r.float("busemann.center") {
            b.center = Some(v);
        }
        match (
            r.usize("busemann.anchor_level"),
            r.usize("busemann.anchor_x"),
        ) {
            (Some(level), Some(x)) => b.anchor = Some(SitePoint::new(level, x)),
            (None, None) => {}
            _ => r
                .errors
                .push("busemann.anchor_level and busemann.anchor_x go together".into()),
        }

        if let Some(v) = r.float("tol.eq") {
            self.tol.eq = v;
        }
        if let Some(v) = r.float("tol.tie") {
            self.tol.tie = v;
        }
        if let Some(v) = r.float("tol.flat") {
            self.tol.flat = v;
        }

        let a = &mut self.analysis;
        if let Some(v) = r.usize("analysis.composition_pairs") {
            a.composition_pairs = v;
        }
        if let Some(v) = r.usize("analysis.min_island_rows") {
            a.min_island_rows = v;
        }
        if let Some(v) = r.uints("analysis.dimension_levels") {
            a.dimension_levels = v.into_iter().map(|x| x as usize).collect();
        }
        if let Some(v) = r.bool("analysis.shocks") {
            a.shocks = Some(v);
        }
        if let Some(v) = r.usize("analysis.census_samples") {
            a.census_samples = v;
        }
        if let Some(v) = r.usize("analysis.census_max_islands") {
            a.census_max_islands = Some(v);
        }
        if let Some(v) = r.usize("analysis.duality_geodesics") {
            a.duality_geodesics = v;
        }
        if let Some(v) = r.usize("analysis.reconstructions_written") {
            a.reconstructions_written = v;
        }

        let rd = &mut self.render;
        if let Some(v) = r.bool("render.enabled") {
            rd.enabled = v;
        }
        match (r.usize("render.x_from"), r.usize("render.x_to")) {
            (Some(a), Some(b)) => rd.columns = Some((a, b)),
            (None, None) => {}
            _ => r
                .errors
                .push("render.x_from and render.x_to go together".into()),
        }
        if let Some(v) = r.usize("render.max_blocks_x") {
            rd.max_blocks_x = v;
        }
        if let Some(v) = r.usize("render.max_blocks_y") {
            rd.max_blocks_y = v;
        }
        if let Some(v) = r.usize("render.geodesics") {
            rd.geodesics = v;
        }

        if let Some(v) = r.string("run.out") {
            self.out = PathBuf::from(v);
        }
        if let Some(v) = r.uints("run.seeds") {
            self.seeds = v;
        }
        if let Some(v) = r.usize("run.threads") {
            self.threads = Some(v);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if let Err(e) = self.env.validate() {
            errors.push(e.to_string());
        }
        if let Err(e) = self.tol.validate() {
            errors.push(e.to_string());
        }
        if self.seeds.is_empty() {
            errors.push("run.seeds must list at least one seed".into());
        }
        if self.threads == Some(0) {
            errors.push("run.threads must be positive".into());
        }
        if self.analysis.min_island_rows == 0 {
            errors.push("analysis.min_island_rows must be at least 1".into());
        }
        if let Some((a, b)) = self.render.columns {
            if a >= b {
                errors.push("render.x_from must be below render.x_to".into());
            }
        }
        if self.render.max_blocks_x == 0 || self.render.max_blocks_y == 0 {
            errors.push("render block counts must be positive".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(LabError::Config(errors))
        }
    }
}
