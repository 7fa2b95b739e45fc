//! TOML configuration of every tunable. Missing sections and keys take their
//! defaults; unknown keys are rejected.

use std::path::Path;

use cohere_core::assoc::AssocParams;
use cohere_core::bev::BevParams;
use cohere_core::cluster::ClusterParams;
use cohere_core::ground::GroundParams;
use cohere_core::learn::{PretrainParams, RigParams};
use cohere_core::pipeline::TrackingParams;
use cohere_core::synth::{SceneSpec, ScoreParams};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{parse_toml, read_text};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub ground: GroundParams,
    pub cluster: ClusterParams,
    pub assoc: AssocParams,
    pub bev: BevParams,
    pub rig: RigParams,
    pub pretrain: PretrainParams,
    pub score: ScoreParams,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |e: &dyn std::fmt::Display| Error::Config(e.to_string());
        self.ground.validate().map_err(|e| bad(&e))?;
        self.cluster.validate().map_err(|e| bad(&e))?;
        self.assoc.validate().map_err(|e| bad(&e))?;
        self.bev.validate().map_err(|e| bad(&e))?;
        self.rig.validate().map_err(|e| bad(&e))?;
        self.pretrain.validate().map_err(|e| bad(&e))?;
        if !(self.score.gate.is_finite() && self.score.gate > 0.0) {
            return Err(Error::Config(format!("score.gate must be positive, got {}", self.score.gate)));
        }
        Ok(())
    }

    pub fn tracking(&self) -> TrackingParams {
        TrackingParams { ground: self.ground, cluster: self.cluster, assoc: self.assoc }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let config: Self = parse_toml(text, path)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }

    /// Loads `path`, or the defaults when none is given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn load_scene(path: &Path) -> Result<SceneSpec> {
    let spec: SceneSpec = parse_toml(&read_text(path)?, path)?;
    spec.validate()?;
    Ok(spec)
}
