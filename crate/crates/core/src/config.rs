//! Engine configuration and the plain-text config file.
//!
//! The config file is a flat `key = value` document (a TOML subset); every key
//! is optional and falls back to the defaults below. `soulmem config init`
//! writes the full default file.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MemoryError, Result};

/// Memory subsystems that can be disabled for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Hippocampus,
    TemporalLobe,
    Amygdala,
    Prefrontal,
    BasalGanglia,
}

impl Region {
    pub const ALL: [Region; 5] = [
        Region::Hippocampus,
        Region::TemporalLobe,
        Region::Amygdala,
        Region::Prefrontal,
        Region::BasalGanglia,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Hippocampus => "hippocampus",
            Region::TemporalLobe => "temporal_lobe",
            Region::Amygdala => "amygdala",
            Region::Prefrontal => "prefrontal",
            Region::BasalGanglia => "basal_ganglia",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = MemoryError;

    fn from_str(s: &str) -> Result<Self> {
        Region::ALL
            .into_iter()
            .find(|r| r.as_str() == s.trim())
            .ok_or_else(|| MemoryError::UnknownRegion(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub cap_hippocampus: usize,
    pub cap_temporal_lobe: usize,
    pub cap_amygdala: usize,
    pub cap_working_memory: usize,
    pub cap_basal_ganglia: usize,

    /// Smoothing constant of reciprocal rank fusion.
    pub rrf_k: f64,
    /// Update rate of the confidence moving average.
    pub ema_lambda: f64,
    pub soul_alpha: f64,
    pub soul_beta: f64,
    pub soul_gamma: f64,
    pub embed_dim: usize,
    pub frozen: bool,

    pub bm25_k1: f64,
    pub bm25_b: f64,
    /// Candidates kept per ranker.
    pub ranker_depth: usize,
    pub uncertainty_threshold: f64,
    pub second_round_graph_boost: f64,

    pub stability_initial: f64,
    pub stability_step: f64,
    pub protection_threshold: f64,
    pub novelty_window: usize,

    pub consolidate_min_access: u32,
    pub consolidate_min_salience: f64,
    pub stale_salience: f64,
    pub stale_horizon_days: i64,

    pub disabled_regions: BTreeSet<Region>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            cap_hippocampus: 20_000,
            cap_temporal_lobe: 70_000,
            cap_amygdala: 1_000,
            cap_working_memory: 10,
            cap_basal_ganglia: 500,
            rrf_k: 60.0,
            ema_lambda: 0.3,
            soul_alpha: 1.0 / 3.0,
            soul_beta: 1.0 / 3.0,
            soul_gamma: 1.0 / 3.0,
            embed_dim: 64,
            frozen: false,
            bm25_k1: 1.2,
            bm25_b: 0.75,
            ranker_depth: 20,
            uncertainty_threshold: 0.45,
            second_round_graph_boost: 1.5,
            stability_initial: 0.5,
            stability_step: 0.1,
            protection_threshold: 0.8,
            novelty_window: 100,
            consolidate_min_access: 3,
            consolidate_min_salience: 0.7,
            stale_salience: 0.1,
            stale_horizon_days: 90,
            disabled_regions: BTreeSet::new(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let caps = [
            ("cap_hippocampus", self.cap_hippocampus),
            ("cap_temporal_lobe", self.cap_temporal_lobe),
            ("cap_amygdala", self.cap_amygdala),
            ("cap_working_memory", self.cap_working_memory),
            ("cap_basal_ganglia", self.cap_basal_ganglia),
            ("embed_dim", self.embed_dim),
            ("ranker_depth", self.ranker_depth),
        ];
        for (name, value) in caps {
            if value == 0 {
                return Err(MemoryError::BadConfig(format!("{name} must be positive")));
            }
        }
        if !(self.rrf_k.is_finite() && self.rrf_k > 0.0) {
            return Err(MemoryError::BadConfig("rrf_k must be positive".into()));
        }
        if !(self.ema_lambda > 0.0 && self.ema_lambda < 1.0) {
            return Err(MemoryError::BadConfig("ema_lambda must lie in (0, 1)".into()));
        }
        check_soul_weights(self.soul_weights())?;
        for (name, v) in [
            ("stability_initial", self.stability_initial),
            ("stability_step", self.stability_step),
            ("protection_threshold", self.protection_threshold),
            ("consolidate_min_salience", self.consolidate_min_salience),
            ("stale_salience", self.stale_salience),
            ("uncertainty_threshold", self.uncertainty_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(MemoryError::BadConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn soul_weights(&self) -> (f64, f64, f64) {
        (self.soul_alpha, self.soul_beta, self.soul_gamma)
    }

    pub fn is_enabled(&self, region: Region) -> bool {
        !self.disabled_regions.contains(&region)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: EngineConfig =
            toml::from_str(text).map_err(|e| MemoryError::BadConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }
}

pub(crate) fn check_soul_weights((a, b, g): (f64, f64, f64)) -> Result<()> {
    if [a, b, g].iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(MemoryError::BadWeights(format!("({a}, {b}, {g}) has a negative entry")));
    }
    if ((a + b + g) - 1.0).abs() > 1e-9 {
        return Err(MemoryError::BadWeights(format!("({a}, {b}, {g}) does not sum to 1")));
    }
    Ok(())
}
