//! PMU placement, measurement windows, error injection and feature vectors.

mod measurement;
mod placement;

pub use measurement::*;
pub use placement::*;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Placement result file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementReport {
    pub network: String,
    pub use_zero_injection: bool,
    pub buses: Vec<u32>,
    pub total_cost: f64,
    pub proven_optimal: bool,
    pub nodes_explored: u64,
    pub wall_time_s: f64,
}

impl PlacementReport {
    pub fn new(network: &str, problem: &PlacementProblem, sol: &PlacementSolution) -> Self {
        PlacementReport {
            network: network.to_string(),
            use_zero_injection: problem.use_zero_injection,
            buses: problem.placed_ids(&sol.placed),
            total_cost: sol.total_cost,
            proven_optimal: sol.proven_optimal,
            nodes_explored: sol.stats.nodes,
            wall_time_s: sol.stats.wall_time_s,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("serializable");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| {
            Error::parse(format!("{}:{}:{}", path.display(), e.line(), e.column()), e)
        })
    }
}
