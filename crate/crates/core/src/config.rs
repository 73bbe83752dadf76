//! Run configuration: JSON schema, validation, defaults.

use crate::analysis::SweepMesh;
use crate::geometry::{NeckGeometry, Profile};
use crate::rigid::Datum;
use crate::{Error, Result};
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub phi: PhiConfig,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Sample count for the field identity suite.
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub fields: Option<FieldsConfig>,
    /// Verdict band overrides keyed by criterion id.
    #[serde(default)]
    pub tolerances: Vec<ToleranceOverride>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverride {
    pub id: String,
    pub bounds: [f64; 2],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default = "d_eps")]
    pub epsilon: f64,
    #[serde(default = "d_profile")]
    pub profile: Profile,
    #[serde(default = "one")]
    pub kappa2: f64,
    #[serde(default = "one")]
    pub inclusion_radius: f64,
    #[serde(default = "four")]
    pub container_radius: f64,
    #[serde(default = "half", rename = "R")]
    pub neck_half_width: f64,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default)]
    pub mesh: MeshConfig,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub h_min: Option<f64>,
    pub h_max: Option<f64>,
    pub layers: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum PhiConfig {
    Preset(String),
    Linear { linear: [[f64; 2]; 2] },
}

impl Default for PhiConfig {
    fn default() -> Self {
        PhiConfig::Preset("shear".into())
    }
}

fn d_eps() -> f64 {
    0.01
}
fn d_profile() -> Profile {
    Profile::Circle
}
fn one() -> f64 {
    1.0
}
fn four() -> f64 {
    4.0
}
fn half() -> f64 {
    0.5
}
fn default_eps_list() -> Vec<f64> {
    vec![0.08, 0.04, 0.02, 0.01, 0.005]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsConfig {
    pub kappa2_override: Option<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            epsilon: d_eps(),
            profile: d_profile(),
            kappa2: 1.0,
            inclusion_radius: 1.0,
            container_radius: 4.0,
            neck_half_width: 0.5,
            mu: 1.0,
            mesh: MeshConfig::default(),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: GeometryConfig::default(),
            phi: PhiConfig::default(),
            eps_list: default_eps_list(),
            output_dir: None,
            samples: None,
            fields: None,
            tolerances: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(Error::Config("eps_list must not be empty".into()));
        }
        for w in self.eps_list.windows(2) {
            if w[1] >= w[0] {
                return Err(Error::Config("eps_list must be strictly decreasing".into()));
            }
        }
        if self.eps_list.iter().any(|&e| e <= 0.0) {
            return Err(Error::Config("eps_list entries must be positive".into()));
        }
        self.geometry()?;
        self.datum()?;
        Ok(())
    }

    pub fn geometry(&self) -> Result<NeckGeometry> {
        let g = &self.geometry;
        NeckGeometry::new(
            g.epsilon,
            g.profile,
            g.kappa2,
            g.inclusion_radius,
            g.container_radius,
            g.neck_half_width,
            g.mu,
        )
    }

    pub fn datum(&self) -> Result<Datum> {
        match &self.phi {
            PhiConfig::Preset(name) => match name.as_str() {
                "shear" => Ok(Datum::Shear),
                "extension" => Ok(Datum::Extension),
                "rotation" => Ok(Datum::Rotation),
                "mixed" => Ok(Datum::Mixed),
                "parabolic" => Ok(Datum::Parabolic),
                "zero" => Ok(Datum::Zero),
                other => Err(Error::Config(format!("unknown phi preset '{other}'"))),
            },
            PhiConfig::Linear { linear } => Ok(Datum::Linear(*linear)),
        }
    }

    /// Mesh resolution for a sweep; per-epsilon h_min defaults to eps/6.
    pub fn sweep_mesh(&self) -> SweepMesh {
        let mut sm = SweepMesh::default();
        if let Some(h_max) = self.geometry.mesh.h_max {
            sm.h_max = h_max;
        }
        if let Some(layers) = self.geometry.mesh.layers {
            sm.layers = layers;
        }
        sm
    }

    /// Mesh parameters for a single-epsilon solve.
    pub fn mesh_params(&self, eps: f64) -> crate::mesh::MeshParams {
        let sm = self.sweep_mesh();
        let mut p = sm.params(eps);
        if let Some(h_min) = self.geometry.mesh.h_min {
            p.h_min = h_min;
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.datum().unwrap(), Datum::Shear);
    }

    #[test]
    fn parses_full_document() {
        let text = r#"{
            "geometry": {"epsilon": 0.02, "profile": "quadratic", "kappa2": 1.0,
                         "inclusion_radius": 1.0, "container_radius": 4.0, "R": 0.5,
                         "mu": 1.0, "mesh": {"h_min": 0.002, "h_max": 0.25}},
            "phi": "mixed",
            "eps_list": [0.04, 0.01, 0.0025]
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        assert_eq!(cfg.geometry.epsilon, 0.02);
        assert_eq!(cfg.datum().unwrap(), Datum::Mixed);
        assert_eq!(cfg.mesh_params(0.04).h_min, 0.002);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = r#"{"geometry": {"epsilon": 0.02}, "unknown_key": 1}"#;
        assert!(RunConfig::from_json(text).is_err());
    }

    #[test]
    fn rejects_bad_eps_list() {
        let text = r#"{"eps_list": [0.01, 0.04]}"#;
        assert!(RunConfig::from_json(text).is_err());
        let text2 = r#"{"eps_list": [0.04, -0.01]}"#;
        assert!(RunConfig::from_json(text2).is_err());
    }

    #[test]
    fn parses_inline_linear_datum() {
        let text = r#"{"phi": {"linear": [[0.0, 1.0], [0.0, 0.0]]}}"#;
        let cfg = RunConfig::from_json(text).unwrap();
        match cfg.datum().unwrap() {
            Datum::Linear(m) => assert_eq!(m[0][1], 1.0),
            other => panic!("unexpected datum {other:?}"),
        }
    }
}
