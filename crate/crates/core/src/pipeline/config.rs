use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registration::{builtin_estimator, EstimatorConfig, EstimatorId};
use crate::sanity::VehicleModel;
use crate::scalar::Real;
use crate::selection::ScoringConfig;

/// Whole-pipeline configuration. Loaded from a TOML file; every key is
/// optional and falls back to the defaults below, which follow the KITTI
/// vehicle setup.
///
/// ```toml
/// enabled_estimators = ["p2p_icp", "gicp", "ndt"]  # cvm is always on
/// voxel_size = 0.25
/// n_map = 10
/// default_frame_rate = 10.0
/// parallel = true
///
/// [vehicle]
/// l = 1.0
/// a_max = 6.0
/// v_th = 0.8
///
/// [scoring]
/// r_s = 0.5
/// min_match_fraction = 0.1
///
/// [estimator]
/// max_iterations = 30
/// convergence_translation = 1e-4
/// convergence_rotation = 1e-4
/// max_correspondence_distance = 1.0
/// ndt_cell_size = 1.0
/// gicp_epsilon = 1e-3
/// neighborhood_k = 10
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig<S: Real = f64> {
    /// Scan-matching estimators to run; the constant-velocity model is
    /// implicitly enabled regardless.
    pub enabled_estimators: Vec<EstimatorId>,
    /// Edge length for scan voxelization, m.
    pub voxel_size: S,
    /// Scans retained in the local map.
    pub n_map: usize,
    /// Frame rate assumed when timestamps are missing or non-increasing, Hz.
    pub default_frame_rate: S,
    /// Run the estimators of one frame concurrently. Sequential execution
    /// produces bitwise-identical results; this only trades latency.
    pub parallel: bool,
    pub vehicle: VehicleModel<S>,
    pub scoring: ScoringConfig<S>,
    pub estimator: EstimatorConfig<S>,
}

impl<S: Real> Default for PipelineConfig<S> {
    fn default() -> Self {
        PipelineConfig {
            enabled_estimators: vec![
                EstimatorId::P2pIcp,
                EstimatorId::Gicp,
                EstimatorId::Ndt,
                EstimatorId::Cvm,
            ],
            voxel_size: S::from_config(0.25),
            n_map: 10,
            default_frame_rate: S::from_config(10.0),
            parallel: true,
            vehicle: VehicleModel::default(),
            scoring: ScoringConfig::default(),
            estimator: EstimatorConfig::default(),
        }
    }
}

impl<S: Real + serde::de::DeserializeOwned> PipelineConfig<S> {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig<S> =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

impl<S: Real> PipelineConfig<S> {
    /// Full validation: value ranges plus the requirement that every
    /// enabled estimator has a built-in implementation.
    pub fn validate(&self) -> Result<()> {
        self.validate_values()?;
        for &id in &self.enabled_estimators {
            if builtin_estimator::<S>(id).is_none() {
                return Err(Error::Config(format!(
                    "estimator `{id}` is a plug-in slot with no built-in implementation"
                )));
            }
        }
        Ok(())
    }

    /// Value-range checks only; used by the plug-in construction path,
    /// where the estimator stack is supplied by the caller.
    pub fn validate_values(&self) -> Result<()> {
        let positive = |v: S, name: &str| -> Result<()> {
            if v > S::zero() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive")))
            }
        };
        positive(self.voxel_size, "voxel_size")?;
        positive(self.default_frame_rate, "default_frame_rate")?;
        positive(self.vehicle.l, "vehicle.l")?;
        positive(self.vehicle.a_max, "vehicle.a_max")?;
        positive(self.vehicle.v_th, "vehicle.v_th")?;
        positive(self.scoring.r_s, "scoring.r_s")?;
        positive(
            self.estimator.convergence_translation,
            "estimator.convergence_translation",
        )?;
        positive(
            self.estimator.convergence_rotation,
            "estimator.convergence_rotation",
        )?;
        positive(
            self.estimator.max_correspondence_distance,
            "estimator.max_correspondence_distance",
        )?;
        positive(self.estimator.ndt_cell_size, "estimator.ndt_cell_size")?;
        positive(self.estimator.gicp_epsilon, "estimator.gicp_epsilon")?;
        if self.n_map == 0 {
            return Err(Error::Config("n_map must be at least 1".into()));
        }
        if self.estimator.max_iterations == 0 {
            return Err(Error::Config(
                "estimator.max_iterations must be at least 1".into(),
            ));
        }
        if self.estimator.neighborhood_k < 4 {
            return Err(Error::Config(
                "estimator.neighborhood_k must be at least 4".into(),
            ));
        }
        if self.scoring.min_match_fraction <= S::zero()
            || self.scoring.min_match_fraction > S::one()
        {
            return Err(Error::Config(
                "scoring.min_match_fraction must be in (0, 1]".into(),
            ));
        }
        if self.enabled_estimators.is_empty() {
            return Err(Error::Config("enabled_estimators must not be empty".into()));
        }
        Ok(())
    }

    /// Enabled estimators, deduplicated in priority order, with the
    /// constant-velocity fallback always appended.
    pub fn estimator_ids(&self) -> Vec<EstimatorId> {
        let mut ids: Vec<EstimatorId> = Vec::new();
        for &id in &self.enabled_estimators {
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        if !ids.contains(&EstimatorId::Cvm) {
            ids.push(EstimatorId::Cvm);
        }
        ids
    }
}
