//! Scenario definitions and their JSON form.

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::delay_approx::DelayConfig;
use crate::model::{ModelOptions, Weights};
use crate::solver::MilpOptions;
use crate::topology::{round_robin_processing, round_robin_sources, LinkCapacities, UserAttachment};

use super::HarnessError;

pub const DEFAULT_DRR: f64 = 0.05;

/// Where the user devices sit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum UserPlacement {
    /// `count` devices in every room, round-robin over the groups.
    PerRoom { count: usize },
    /// `count` devices in one room, round-robin over its groups.
    SingleRoom { room: usize, count: usize },
    Explicit { users: Vec<UserAttachment> },
}

impl UserPlacement {
    fn sources(&self, rooms: usize) -> Vec<UserAttachment> {
        match self {
            UserPlacement::PerRoom { count } => (1..=rooms).flat_map(|r| round_robin_sources(r, *count)).collect(),
            UserPlacement::SingleRoom { room, count } => round_robin_sources(*room, *count),
            UserPlacement::Explicit { users } => users.clone(),
        }
    }

    fn processing(&self, rooms: usize) -> Vec<UserAttachment> {
        match self {
            UserPlacement::PerRoom { count } => (1..=rooms).flat_map(|r| round_robin_processing(r, *count)).collect(),
            UserPlacement::SingleRoom { room, count } => round_robin_processing(*room, *count),
            UserPlacement::Explicit { users } => users.clone(),
        }
    }

    fn count(&self, rooms: usize) -> usize {
        match self {
            UserPlacement::PerRoom { count } => count * rooms,
            UserPlacement::SingleRoom { count, .. } => *count,
            UserPlacement::Explicit { users } => users.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    P2pPon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverLimits {
    pub gap: f64,
    pub node_limit: u64,
    /// Per sweep point; `None` for no limit.
    pub time_limit_s: Option<f64>,
}

impl Default for SolverLimits {
    fn default() -> Self {
        let d = MilpOptions::default();
        SolverLimits { gap: d.gap_tol, node_limit: d.node_limit, time_limit_s: None }
    }
}

impl SolverLimits {
    pub fn milp_options(&self) -> MilpOptions {
        MilpOptions {
            gap_tol: self.gap,
            node_limit: self.node_limit,
            time_limit: self.time_limit_s.map(Duration::from_secs_f64),
            ..MilpOptions::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub rooms: usize,
    pub user_placement: UserPlacement,
    /// Processing user devices; none by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub processing_placement: Option<UserPlacement>,
    /// GFLOPs per user at each sweep point.
    pub demand_sweep: Vec<f64>,
    #[serde(default = "default_drr")]
    pub drr: f64,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default = "default_architecture")]
    pub architecture: Architecture,
    #[serde(default)]
    pub limits: SolverLimits,
    #[serde(default)]
    pub links: LinkCapacities,
    #[serde(default)]
    pub delay: DelayConfig,
    #[serde(default)]
    pub model: ModelOptions,
    #[serde(default)]
    pub output: OutputPaths,
}

fn default_drr() -> f64 {
    DEFAULT_DRR
}

fn default_architecture() -> Architecture {
    Architecture::P2pPon
}

impl Scenario {
    /// `users_per_room` source devices in each of `rooms` rooms, power-aware.
    pub fn per_room(name: impl Into<String>, rooms: usize, users_per_room: usize, demand_sweep: Vec<f64>) -> Self {
        Scenario {
            name: name.into(),
            rooms,
            user_placement: UserPlacement::PerRoom { count: users_per_room },
            processing_placement: None,
            demand_sweep,
            drr: DEFAULT_DRR,
            weights: Weights::POWER_AWARE,
            architecture: Architecture::P2pPon,
            limits: SolverLimits::default(),
            links: LinkCapacities::default(),
            delay: DelayConfig::default(),
            model: ModelOptions::default(),
            output: OutputPaths::default(),
        }
    }

    /// `count` source devices in one room.
    pub fn single_room(name: impl Into<String>, rooms: usize, room: usize, count: usize, demand_sweep: Vec<f64>) -> Self {
        Scenario { user_placement: UserPlacement::SingleRoom { room, count }, ..Scenario::per_room(name, rooms, 0, demand_sweep) }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| HarnessError::Invalid(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Invalid(format!("scenario {}: {m}", self.name)));
        if self.rooms == 0 {
            return bad("needs at least one room".into());
        }
        if let Some(v) = self.demand_sweep.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return bad(format!("sweep value {v} must be positive"));
        }
        if !(self.drr > 0.0 && self.drr.is_finite()) {
            return bad(format!("drr {} must be positive", self.drr));
        }
        if self.user_placement.count(self.rooms) == 0 {
            return bad("places no source user devices".into());
        }
        if !(self.weights.alpha >= 0.0 && self.weights.beta >= 0.0) || self.weights.alpha + self.weights.beta == 0.0 {
            return bad(format!("weights ({}, {}) must be nonnegative and not both zero", self.weights.alpha, self.weights.beta));
        }
        if !(self.limits.gap >= 0.0) || self.limits.time_limit_s.is_some_and(|t| !(t > 0.0)) {
            return bad("solver limits must be nonnegative".into());
        }
        Ok(())
    }

    /// Source and processing device attachments.
    pub fn placement(&self) -> Vec<UserAttachment> {
        let mut out = self.user_placement.sources(self.rooms);
        if let Some(p) = &self.processing_placement {
            out.extend(p.processing(self.rooms));
        }
        out
    }
}
