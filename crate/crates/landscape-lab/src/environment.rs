//! Seeded random environments for the two backends.
//!
//! Exponential: i.i.d. `Exp(rate)` vertex weights on an `n_levels × n_cols` grid.
//! SemiDiscrete: one Brownian path per level, sampled on a uniform mesh over
//! `[x_min, x_max]` and pinned to 0 at `x_min`.
//!
//! Both backends share one storage layout: `step[k][i]` holds the raw draw
//! (weight or increment) and `cum[k][i]` a running sum along the level, so the
//! solver can treat them uniformly.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param, LabError, Result};

pub const PRNG_ID: &str =
    "chacha20 (rand_chacha 0.9, seed_from_u64) + rand_distr 0.5 Exp/StandardNormal";
pub const ENV_FORMAT_VERSION: u32 = 1;
const BLOB_MAGIC: &[u8; 8] = b"LLABENV1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    Exponential,
    SemiDiscrete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EnvParams {
    Exponential {
        n_levels: usize,
        n_cols: usize,
        rate: f64,
    },
    SemiDiscrete {
        n_levels: usize,
        mesh: f64,
        x_min: f64,
        x_max: f64,
    },
}

impl EnvParams {
    pub fn kind(&self) -> Kind {
        match self {
            EnvParams::Exponential { .. } => Kind::Exponential,
            EnvParams::SemiDiscrete { .. } => Kind::SemiDiscrete,
        }
    }

    pub fn n_levels(&self) -> usize {
        match *self {
            EnvParams::Exponential { n_levels, .. } | EnvParams::SemiDiscrete { n_levels, .. } => {
                n_levels
            }
        }
    }

    /// Sites per level: columns, or mesh points.
    pub fn width(&self) -> usize {
        match *self {
            EnvParams::Exponential { n_cols, .. } => n_cols,
            EnvParams::SemiDiscrete {
                mesh, x_min, x_max, ..
            } => ((x_max - x_min) / mesh + 1e-9).floor() as usize + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EnvParams::Exponential {
                n_levels,
                n_cols,
                rate,
            } => {
                if n_levels == 0 || n_cols == 0 {
                    return param("grid dimensions must be positive");
                }
                if !(rate > 0.0 && rate.is_finite()) {
                    return param(format!("rate must be positive, got {rate}"));
                }
            }
            EnvParams::SemiDiscrete {
                n_levels,
                mesh,
                x_min,
                x_max,
            } => {
                if n_levels == 0 {
                    return param("n_levels must be positive");
                }
                if !(mesh > 0.0 && mesh.is_finite()) {
                    return param(format!("mesh must be positive, got {mesh}"));
                }
                if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
                    return param("need finite x_min < x_max");
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SitePoint {
    pub level: usize,
    pub x: usize,
}

impl SitePoint {
    pub fn new(level: usize, x: usize) -> Self {
        SitePoint { level, x }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentField {
    pub seed: u64,
    pub params: EnvParams,
    n_levels: usize,
    width: usize,
    /// Exponential: weight of site (k,i). SemiDiscrete: B_k(i+1) - B_k(i); last column unused (0).
    step: Vec<f64>,
    /// Exponential: sum_{m<=i} w(k,m). SemiDiscrete: B_k(i).
    cum: Vec<f64>,
}

/// Header written next to the binary blob. The header is the contract.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvHeader {
    pub kind: Kind,
    pub seed: u64,
    pub params: EnvParams,
    pub prng_id: String,
    pub format_version: u32,
}

pub fn gen_environment(params: &EnvParams, seed: u64) -> Result<EnvironmentField> {
    params.validate()?;
    let n_levels = params.n_levels();
    let width = params.width();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut step = vec![0.0; n_levels * width];
    match *params {
        EnvParams::Exponential { rate, .. } => {
            let law = Exp::new(rate).map_err(|e| LabError::Parameter(e.to_string()))?;
            for w in step.iter_mut() {
                // Exp can return 0.0 in principle; resample to keep weights strictly positive.
                let mut v: f64 = law.sample(&mut rng);
                while v <= 0.0 {
                    v = law.sample(&mut rng);
                }
                *w = v;
            }
        }
        EnvParams::SemiDiscrete { mesh, .. } => {
            let sd = mesh.sqrt();
            for k in 0..n_levels {
                for i in 0..width - 1 {
                    let z: f64 = rng.sample(StandardNormal);
                    step[k * width + i] = sd * z;
                }
            }
        }
    }
    Ok(EnvironmentField::from_steps(seed, params.clone(), step))
}

impl EnvironmentField {
    fn from_steps(seed: u64, params: EnvParams, step: Vec<f64>) -> Self {
        let n_levels = params.n_levels();
        let width = params.width();
        let mut cum = vec![0.0; n_levels * width];
        for k in 0..n_levels {
            let row = &step[k * width..(k + 1) * width];
            let out = &mut cum[k * width..(k + 1) * width];
            match params.kind() {
                Kind::Exponential => {
                    let mut acc = 0.0;
                    for i in 0..width {
                        acc += row[i];
                        out[i] = acc;
                    }
                }
                Kind::SemiDiscrete => {
                    let mut acc = 0.0;
                    out[0] = 0.0;
                    for i in 1..width {
                        acc += row[i - 1];
                        out[i] = acc;
                    }
                }
            }
        }
        EnvironmentField {
            seed,
            params,
            n_levels,
            width,
            step,
            cum,
        }
    }

    /// Build an exponential-kind field from explicit weights (fixtures, oracles).
    pub fn from_weights(n_levels: usize, n_cols: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n_levels * n_cols || n_levels == 0 || n_cols == 0 {
            return param("weights length must equal n_levels * n_cols");
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return param("weights must be finite and strictly positive");
        }
        let params = EnvParams::Exponential {
            n_levels,
            n_cols,
            rate: 1.0,
        };
        Ok(Self::from_steps(0, params, weights))
    }

    /// Build a semi-discrete field from explicit increments, `n_levels × (width-1)`.
    pub fn from_increments(
        n_levels: usize,
        mesh: f64,
        x_min: f64,
        x_max: f64,
        incs: &[f64],
    ) -> Result<Self> {
        let params = EnvParams::SemiDiscrete {
            n_levels,
            mesh,
            x_min,
            x_max,
        };
        params.validate()?;
        let width = params.width();
        if incs.len() != n_levels * (width - 1) {
            return param(format!(
                "expected {} increments, got {}",
                n_levels * (width - 1),
                incs.len()
            ));
        }
        if incs.iter().any(|v| !v.is_finite()) {
            return param("increments must be finite");
        }
        let mut step = vec![0.0; n_levels * width];
        for k in 0..n_levels {
            step[k * width..k * width + width - 1]
                .copy_from_slice(&incs[k * (width - 1)..(k + 1) * (width - 1)]);
        }
        Ok(Self::from_steps(0, params, step))
    }

    pub fn kind(&self) -> Kind {
        self.params.kind()
    }
    pub fn n_levels(&self) -> usize {
        self.n_levels
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn top_level(&self) -> usize {
        self.n_levels - 1
    }

    pub fn contains(&self, p: SitePoint) -> bool {
        p.level < self.n_levels && p.x < self.width
    }

    /// Exponential weight at a site.
    pub fn weight(&self, level: usize, x: usize) -> f64 {
        debug_assert_eq!(self.kind(), Kind::Exponential);
        self.step[level * self.width + x]
    }

    /// Semi-discrete increment B_k(x+1) - B_k(x).
    pub fn increment(&self, level: usize, x: usize) -> f64 {
        debug_assert_eq!(self.kind(), Kind::SemiDiscrete);
        self.step[level * self.width + x]
    }

    /// B_k(x) for the semi-discrete backend.
    pub fn path(&self, level: usize, x: usize) -> f64 {
        self.cum[level * self.width + x]
    }

    pub fn level_increments(&self, level: usize) -> &[f64] {
        &self.step[level * self.width..level * self.width + self.width - 1]
    }

    /// Weight picked up on entering site (k,x) (vertex weight; 0 for semi-discrete).
    #[inline]
    pub(crate) fn site_gain(&self, k: usize, x: usize) -> f64 {
        match self.kind() {
            Kind::Exponential => self.step[k * self.width + x],
            Kind::SemiDiscrete => 0.0,
        }
    }

    /// Weight of the horizontal move (k,x) -> (k,x+1), excluding the site gain.
    #[inline]
    pub(crate) fn right_gain(&self, k: usize, x: usize) -> f64 {
        match self.kind() {
            Kind::Exponential => 0.0,
            Kind::SemiDiscrete => self.step[k * self.width + x],
        }
    }

    /// Level running sum: C_k(j) such that the weight of a run [i, j] on level k is
    /// C_k(j) - C_k(i-1) (discrete) or C_k(j) - C_k(i) (semi-discrete).
    #[inline]
    pub(crate) fn cum(&self, k: usize, j: usize) -> f64 {
        self.cum[k * self.width + j]
    }

    /// Weight collected along the run [entry, exit] on one level.
    pub fn run_weight(&self, k: usize, entry: usize, exit: usize) -> f64 {
        match self.kind() {
            Kind::Exponential => (entry..=exit).map(|m| self.weight(k, m)).sum(),
            Kind::SemiDiscrete => self.path(k, exit) - self.path(k, entry),
        }
    }

    /// Spatial coordinate of a site (mesh point or column index).
    pub fn coord(&self, x: usize) -> f64 {
        match self.params {
            EnvParams::Exponential { .. } => x as f64,
            EnvParams::SemiDiscrete { mesh, x_min, .. } => x_min + mesh * x as f64,
        }
    }

    /// Nearest site index to a spatial coordinate, clamped to the level.
    pub fn index_of(&self, coord: f64) -> usize {
        let raw = match self.params {
            EnvParams::Exponential { .. } => coord.round(),
            EnvParams::SemiDiscrete { mesh, x_min, .. } => ((coord - x_min) / mesh).round(),
        };
        raw.clamp(0.0, (self.width - 1) as f64) as usize
    }

    /// Mesh step in model units (1 for the lattice).
    pub fn mesh(&self) -> f64 {
        match self.params {
            EnvParams::Exponential { .. } => 1.0,
            EnvParams::SemiDiscrete { mesh, .. } => mesh,
        }
    }

    pub fn header(&self) -> EnvHeader {
        EnvHeader {
            kind: self.kind(),
            seed: self.seed,
            params: self.params.clone(),
            prng_id: PRNG_ID.to_string(),
            format_version: ENV_FORMAT_VERSION,
        }
    }

    /// Writes `<stem>.json` (header) and `<stem>.bin` (blob). Blob layout: 8-byte magic
    /// `LLABENV1`, u64 LE n_levels, u64 LE width, then n_levels*width f64 LE raw draws
    /// in row-major order (level-major). Running sums are rebuilt on load.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(
            dir.join(format!("{stem}.json")),
            crate::io::to_json(&self.header())?,
        )?;
        let mut blob = Vec::with_capacity(24 + 8 * self.step.len());
        blob.extend_from_slice(BLOB_MAGIC);
        blob.extend_from_slice(&(self.n_levels as u64).to_le_bytes());
        blob.extend_from_slice(&(self.width as u64).to_le_bytes());
        for v in &self.step {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = fs::File::create(dir.join(format!("{stem}.bin")))?;
        f.write_all(&blob)?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let header: EnvHeader =
            serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        if header.format_version != ENV_FORMAT_VERSION {
            return Err(LabError::Format(format!(
                "unsupported format_version {}",
                header.format_version
            )));
        }
        header.params.validate()?;
        let mut blob = Vec::new();
        fs::File::open(dir.join(format!("{stem}.bin")))?.read_to_end(&mut blob)?;
        if blob.len() < 24 || &blob[..8] != BLOB_MAGIC {
            return Err(LabError::Format("bad environment blob magic".into()));
        }
        let n_levels = u64::from_le_bytes(blob[8..16].try_into().unwrap()) as usize;
        let width = u64::from_le_bytes(blob[16..24].try_into().unwrap()) as usize;
        if n_levels != header.params.n_levels() || width != header.params.width() {
            return Err(LabError::Format(
                "blob dimensions disagree with header".into(),
            ));
        }
        if blob.len() != 24 + 8 * n_levels * width {
            return Err(LabError::Format("blob length mismatch".into()));
        }
        let step = blob[24..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self::from_steps(header.seed, header.params, step))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_single_cell_is_deterministic() {
        let p = EnvParams::Exponential {
            n_levels: 1,
            n_cols: 1,
            rate: 1.0,
        };
        let a = gen_environment(&p, 1).unwrap();
        let b = gen_environment(&p, 1).unwrap();
        assert!(a.weight(0, 0) > 0.0);
        assert_eq!(a.weight(0, 0).to_bits(), b.weight(0, 0).to_bits());
    }

    #[test]
    fn semi_discrete_shape_and_anchor() {
        let p = EnvParams::SemiDiscrete {
            n_levels: 2,
            mesh: 0.5,
            x_min: 0.0,
            x_max: 1.0,
        };
        let e = gen_environment(&p, 7).unwrap();
        assert_eq!(e.width(), 3);
        for k in 0..2 {
            assert_eq!(e.path(k, 0), 0.0);
            assert_eq!(e.path(k, 2), e.increment(k, 0) + e.increment(k, 1));
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(gen_environment(
            &EnvParams::Exponential {
                n_levels: 0,
                n_cols: 1,
                rate: 1.0
            },
            0
        )
        .is_err());
        assert!(gen_environment(
            &EnvParams::Exponential {
                n_levels: 1,
                n_cols: 1,
                rate: 0.0
            },
            0
        )
        .is_err());
        assert!(gen_environment(
            &EnvParams::SemiDiscrete {
                n_levels: 1,
                mesh: -1.0,
                x_min: 0.0,
                x_max: 1.0
            },
            0
        )
        .is_err());
        assert!(gen_environment(
            &EnvParams::SemiDiscrete {
                n_levels: 1,
                mesh: 0.1,
                x_min: 1.0,
                x_max: 1.0
            },
            0
        )
        .is_err());
    }

    #[test]
    fn width_floor_rule() {
        let p = EnvParams::SemiDiscrete {
            n_levels: 1,
            mesh: 0.3,
            x_min: 0.0,
            x_max: 1.0,
        };
        assert_eq!(p.width(), 4);
        let p = EnvParams::SemiDiscrete {
            n_levels: 1,
            mesh: 1e-3,
            x_min: 0.0,
            x_max: 20.0,
        };
        assert_eq!(p.width(), 20001);
    }

    #[test]
    fn exponential_mean_and_gaussian_variance() {
        let e = gen_environment(
            &EnvParams::Exponential {
                n_levels: 100,
                n_cols: 1000,
                rate: 2.0,
            },
            3,
        )
        .unwrap();
        let n = 100_000.0;
        let mean: f64 = (0..100)
            .flat_map(|k| (0..1000).map(move |i| (k, i)))
            .map(|(k, i)| e.weight(k, i))
            .sum::<f64>()
            / n;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");

        let mesh = 1e-3;
        let e = gen_environment(
            &EnvParams::SemiDiscrete {
                n_levels: 10,
                mesh,
                x_min: 0.0,
                x_max: 10.0,
            },
            5,
        )
        .unwrap();
        let xs: Vec<f64> = (0..10)
            .flat_map(|k| e.level_increments(k).to_vec())
            .collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / xs.len() as f64;
        assert!(xs.len() >= 100_000);
        assert!((var / mesh - 1.0).abs() < 0.02, "var ratio {}", var / mesh);
    }

    #[test]
    fn blob_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let e = gen_environment(
            &EnvParams::SemiDiscrete {
                n_levels: 3,
                mesh: 0.1,
                x_min: -1.0,
                x_max: 1.0,
            },
            11,
        )
        .unwrap();
        e.save(dir.path(), "env").unwrap();
        let back = EnvironmentField::load(dir.path(), "env").unwrap();
        assert_eq!(e, back);
        let hdr: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("env.json")).unwrap())
                .unwrap();
        assert_eq!(hdr["prng_id"], PRNG_ID);
        assert_eq!(hdr["format_version"], 1);
    }
}
