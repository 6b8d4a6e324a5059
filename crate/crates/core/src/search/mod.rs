//! Closed-loop inverse design with a dynamically updated exemplar pool.
//!
//! An initial pool holds the `K` best hard-constraint-satisfying candidates
//! from unconditioned generation. Each iteration samples one exemplar
//! uniformly, generates `n` conditioned candidates, scores each with
//! `0.7·R_energy + 0.3·R_pvcp`, and lets every candidate that beats the current
//! pool minimum replace it.

mod generator;
mod pool;
mod surrogate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generator::{CandidateGenerator, DefectRates, GeneratedCandidate, InjectedDefects, MutationGenerator};
pub use pool::{
    evaluate_candidate, initialize_pool, refine_step, run_search, Evaluation, ExemplarPool, IterationLog,
    IterationSummary, PoolEntry, SearchReport,
};
pub use surrogate::{EnergyPredictor, PairPotentialSurrogate, PredictError};

use crate::cif::parse_cif;
use crate::elements::CovalentRadiusTable;
use crate::reward::{PhysConfig, RewardBreakdown, RewardError, RewardWeights};
use crate::structure::CompositionVector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(
        "pool initialization failed: {passed} of {generated} candidates met the hard constraints, {needed} needed"
    )]
    InitFailure {
        generated: usize,
        passed: usize,
        needed: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// eV.
    pub target_energy: f64,
    /// Sharpness of the energy reward, 1/eV.
    pub lambda_energy: f64,
    pub energy_weight: f64,
    pub pvcp_weight: f64,
    pub iterations: usize,
    pub candidates_per_iteration: usize,
    pub pool_capacity: usize,
    /// Unconditioned candidates per initialization round; defaults to 4·K.
    pub init_candidates: Option<usize>,
    /// Extra initialization rounds allowed when too few candidates pass.
    pub init_retries: usize,
    /// Success tolerance on |E_pred − E_target|, eV.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            target_energy: 0.0,
            lambda_energy: 1.0,
            energy_weight: 0.7,
            pvcp_weight: 0.3,
            iterations: 10,
            candidates_per_iteration: 16,
            pool_capacity: 8,
            init_candidates: None,
            init_retries: 3,
            tolerance: 0.1,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn init_candidates(&self) -> usize {
        self.init_candidates.unwrap_or(4 * self.pool_capacity)
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::Config(m));
        if !self.target_energy.is_finite() {
            return bad(format!("target_energy {} is not finite", self.target_energy));
        }
        if !(self.lambda_energy > 0.0 && self.lambda_energy.is_finite()) {
            return bad(format!("lambda_energy must be positive, got {}", self.lambda_energy));
        }
        let (we, wp) = (self.energy_weight, self.pvcp_weight);
        if !(we >= 0.0 && wp >= 0.0 && (we + wp - 1.0).abs() <= 1e-12) {
            return bad(format!("energy_weight + pvcp_weight must be 1, got {we} + {wp}"));
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.candidates_per_iteration == 0 {
            return bad("candidates_per_iteration must be at least 1".into());
        }
        if self.pool_capacity == 0 {
            return bad("pool_capacity must be at least 1".into());
        }
        if self.init_candidates() < self.pool_capacity {
            return bad(format!(
                "init_candidates ({}) must be at least pool_capacity ({})",
                self.init_candidates(),
                self.pool_capacity
            ));
        }
        if !(self.tolerance >= 0.0) {
            return bad(format!("tolerance must be non-negative, got {}", self.tolerance));
        }
        Ok(())
    }
}

/// exp(−λ |E_pred − E_target|).
pub fn energy_reward(e_pred: f64, e_target: f64, lambda: f64) -> f64 {
    (-lambda * (e_pred - e_target).abs()).exp()
}

/// Everything needed to score candidates against a target.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringContext {
    pub target: CompositionVector,
    pub weights: RewardWeights,
    pub phys: PhysConfig,
    pub radii: CovalentRadiusTable,
}

impl ScoringContext {
    pub fn new(target: CompositionVector) -> Self {
        ScoringContext {
            target,
            weights: RewardWeights::default(),
            phys: PhysConfig::default(),
            radii: CovalentRadiusTable::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CombinedBreakdown {
    pub score: f64,
    pub energy: Option<f64>,
    pub energy_reward: f64,
    pub pvcp: RewardBreakdown,
    pub diagnostics: Vec<String>,
}

/// `energy_weight · R_energy + pvcp_weight · R_pvcp`; 0 for candidates that do
/// not parse or whose energy cannot be predicted.
pub fn combined_reward(
    candidate_text: &str,
    cfg: &SearchConfig,
    predictor: &dyn EnergyPredictor,
    ctx: &ScoringContext,
) -> Result<CombinedBreakdown, SearchError> {
    let outcome = parse_cif(candidate_text);
    Ok(pool::combined_from_outcome(&outcome, cfg, predictor, ctx)?.0)
}
