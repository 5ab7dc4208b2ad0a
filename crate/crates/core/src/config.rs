//! Scenario configuration file (TOML).
//!
//! ```toml
//! num_floors = 7
//! floor_height_m = 3.5
//! length_m = 20.0
//! breadth_m = 20.0
//! window_height_m = 1.0
//! anchors = [[2.0, -10.0, 5.0], [8.0, -10.0, 12.0], [12.0, -10.0, 17.0], [18.0, -10.0, 24.0]]
//!
//! [experiment]        # optional; command-line flags override
//! n_trials = 10000
//! sigma_m = 0.1
//! edge_prob = 0.5
//! bias_mode = "floorwise"
//! seed = 1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnchorConfig, BuildingModel, Point3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub num_floors: usize,
    pub floor_height_m: f64,
    pub length_m: f64,
    pub breadth_m: f64,
    pub window_height_m: f64,
    /// Horizontal window extent; defaults to the full floor length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_x_m: Option<[f64; 2]>,
    pub anchors: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimators: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ScenarioFile {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_parts(building: &BuildingModel, anchors: &AnchorConfig) -> Self {
        let (wx0, wx1) = building.window_extent();
        let window_x_m = if (wx0, wx1) == (0.0, building.length()) {
            None
        } else {
            Some([wx0, wx1])
        };
        Self {
            num_floors: building.num_floors(),
            floor_height_m: building.floor_height(),
            length_m: building.length(),
            breadth_m: building.breadth(),
            window_height_m: building.window_height(),
            window_x_m,
            anchors: anchors.iter().map(|a| [a.x, a.y, a.z]).collect(),
            experiment: None,
        }
    }

    pub fn building(&self) -> Result<BuildingModel> {
        let window = self
            .window_x_m
            .map(|[a, b]| (a, b))
            .unwrap_or((0.0, self.length_m));
        BuildingModel::with_window_extent(
            self.num_floors,
            self.floor_height_m,
            self.length_m,
            self.breadth_m,
            self.window_height_m,
            window,
        )
    }

    pub fn anchors(&self) -> Result<AnchorConfig> {
        AnchorConfig::new(
            self.anchors
                .iter()
                .map(|&[x, y, z]| Point3::new(x, y, z))
                .collect(),
        )
    }
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self::from_parts(&BuildingModel::default(), &AnchorConfig::default())
    }
}
