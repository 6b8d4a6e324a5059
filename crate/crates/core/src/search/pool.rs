use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::generator::CandidateGenerator;
use super::surrogate::EnergyPredictor;
use super::{energy_reward, CombinedBreakdown, ScoringContext, SearchConfig, SearchError};
use crate::cif::{parse_cif, serialize_cif, ParseOutcome};
use crate::reward::{pvcp_outcome, worst_distance_ratio};
use crate::structure::Structure;

pub(crate) fn combined_from_outcome(
    outcome: &ParseOutcome,
    cfg: &SearchConfig,
    predictor: &dyn EnergyPredictor,
    ctx: &ScoringContext,
) -> Result<(CombinedBreakdown, bool), SearchError> {
    let pvcp = pvcp_outcome(outcome, &ctx.target, &ctx.weights, &ctx.radii, &ctx.phys)?;
    let mut diagnostics = Vec::new();
    let Some(structure) = &outcome.structure else {
        diagnostics.push("unparseable candidate scored 0".to_string());
        return Ok((
            CombinedBreakdown {
                score: 0.0,
                energy: None,
                energy_reward: 0.0,
                pvcp,
                diagnostics,
            },
            false,
        ));
    };
    let energy = match predictor.predict(structure) {
        Ok(e) => e,
        Err(e) => {
            diagnostics.push(format!("energy prediction failed: {e}"));
            return Ok((
                CombinedBreakdown {
                    score: 0.0,
                    energy: None,
                    energy_reward: 0.0,
                    pvcp,
                    diagnostics,
                },
                false,
            ));
        }
    };
    let er = energy_reward(energy, cfg.target_energy, cfg.lambda_energy);
    let score = (cfg.energy_weight * er + cfg.pvcp_weight * pvcp.total).clamp(0.0, 1.0);
    let hard_ok = match worst_distance_ratio(structure, &ctx.radii) {
        Ok((ratio, _, _)) => ratio > ctx.phys.hard_overlap_fraction,
        Err(_) => false,
    };
    if !hard_ok {
        diagnostics.push("violates the hard overlap bound".to_string());
    }
    Ok((
        CombinedBreakdown {
            score,
            energy: Some(energy),
            energy_reward: er,
            pvcp,
            diagnostics,
        },
        hard_ok,
    ))
}

/// A scored candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub text: String,
    pub structure: Option<Structure>,
    pub breakdown: CombinedBreakdown,
    /// Parsed, energy predicted, and no pair closer than the hard-overlap bound.
    pub passes_hard: bool,
}

impl Evaluation {
    pub fn score(&self) -> f64 {
        self.breakdown.score
    }

    pub fn abs_delta_e(&self, target: f64) -> Option<f64> {
        self.breakdown.energy.map(|e| (e - target).abs())
    }
}

pub fn evaluate_candidate(
    text: String,
    cfg: &SearchConfig,
    predictor: &dyn EnergyPredictor,
    ctx: &ScoringContext,
) -> Result<Evaluation, SearchError> {
    let outcome = parse_cif(&text);
    let (breakdown, passes_hard) = combined_from_outcome(&outcome, cfg, predictor, ctx)?;
    Ok(Evaluation {
        text,
        structure: outcome.structure,
        breakdown,
        passes_hard,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolEntry {
    pub id: u64,
    pub score: f64,
    pub energy: f64,
    pub abs_delta_e: f64,
    /// Iteration that produced the entry; 0 for initialization.
    pub provenance: usize,
    #[serde(skip)]
    pub structure: Structure,
}

/// Fixed-capacity set of structures kept in descending score order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarPool {
    capacity: usize,
    entries: Vec<PoolEntry>,
    next_id: u64,
}

impl ExemplarPool {
    pub fn new(capacity: usize) -> Self {
        ExemplarPool {
            capacity,
            entries: Vec::with_capacity(capacity),
            next_id: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn min_score(&self) -> Option<f64> {
        self.entries.last().map(|e| e.score)
    }

    pub fn max_score(&self) -> Option<f64> {
        self.entries.first().map(|e| e.score)
    }

    pub fn best_abs_delta_e(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.abs_delta_e).min_by(f64::total_cmp)
    }

    fn insert_sorted(&mut self, entry: PoolEntry) {
        let at = self
            .entries
            .iter()
            .position(|e| e.score < entry.score)
            .unwrap_or(self.entries.len());
        self.entries.insert(at, entry);
    }

    /// Adds an entry while there is room; afterwards an entry only enters by
    /// strictly beating the current minimum, which it then evicts. Returns the
    /// assigned id and the evicted entry, or `None` if rejected.
    pub fn offer(
        &mut self,
        structure: Structure,
        score: f64,
        energy: f64,
        abs_delta_e: f64,
        provenance: usize,
    ) -> Option<(u64, Option<PoolEntry>)> {
        let evicted = if self.entries.len() < self.capacity {
            None
        } else if self.min_score().is_some_and(|m| score > m) {
            self.entries.pop()
        } else {
            return None;
        };
        let id = self.next_id;
        self.next_id += 1;
        self.insert_sorted(PoolEntry {
            id,
            score,
            energy,
            abs_delta_e,
            provenance,
            structure,
        });
        Some((id, evicted))
    }
}

/// Unconditioned generation rounds until `K` candidates pass the hard
/// constraints; the pool takes the `K` best of those by score (earlier
/// candidates win ties).
pub fn initialize_pool(
    gen: &dyn CandidateGenerator,
    predictor: &dyn EnergyPredictor,
    cfg: &SearchConfig,
    ctx: &ScoringContext,
    rng: &mut ChaCha8Rng,
) -> Result<(ExemplarPool, Vec<f64>), SearchError> {
    let k = cfg.pool_capacity;
    let n = cfg.init_candidates();
    let mut passing: Vec<Evaluation> = Vec::new();
    let mut scores = Vec::new();
    let mut generated = 0;
    for _round in 0..=cfg.init_retries {
        let seeds: Vec<u64> = (0..n).map(|_| rng.random()).collect();
        let evals = seeds
            .iter()
            .map(|&seed| evaluate_candidate(gen.propose(None, &ctx.target, seed), cfg, predictor, ctx))
            .collect::<Result<Vec<_>, _>>()?;
        generated += evals.len();
        scores.extend(evals.iter().map(Evaluation::score));
        passing.extend(evals.into_iter().filter(|e| e.passes_hard));
        if passing.len() >= k {
            // Stable sort keeps generation order among equal scores.
            passing.sort_by(|a, b| b.score().total_cmp(&a.score()));
            let mut pool = ExemplarPool::new(k);
            for e in passing.into_iter().take(k) {
                let energy = e.breakdown.energy.expect("passing candidates have an energy");
                let delta = (energy - cfg.target_energy).abs();
                pool.offer(e.structure.expect("parsed"), e.breakdown.score, energy, delta, 0);
            }
            return Ok((pool, scores));
        }
    }
    Err(SearchError::InitFailure {
        generated,
        passed: passing.len(),
        needed: k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replacement {
    pub candidate: usize,
    pub new_id: u64,
    pub evicted_id: u64,
    pub score: f64,
}

/// Full record of one refinement iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub exemplar_id: u64,
    pub pool_min_before: f64,
    pub candidate_seeds: Vec<u64>,
    pub candidate_scores: Vec<f64>,
    pub candidate_passes: Vec<bool>,
    pub candidate_abs_delta_e: Vec<Option<f64>>,
    pub replacements: Vec<Replacement>,
    pub pool_min: f64,
    pub pool_max: f64,
}

/// Samples an exemplar uniformly, generates and scores `n` conditioned
/// candidates, and applies the replacement rule to each candidate in order.
pub fn refine_step(
    pool: &mut ExemplarPool,
    gen: &dyn CandidateGenerator,
    predictor: &dyn EnergyPredictor,
    cfg: &SearchConfig,
    ctx: &ScoringContext,
    rng: &mut ChaCha8Rng,
    iteration: usize,
) -> Result<IterationLog, SearchError> {
    assert!(!pool.is_empty(), "refine_step needs an initialized pool");
    let pick = rng.random_range(0..pool.len());
    let exemplar = &pool.entries()[pick];
    let exemplar_id = exemplar.id;
    let exemplar_structure = exemplar.structure.clone();
    let pool_min_before = pool.min_score().unwrap_or(f64::NEG_INFINITY);
    let seeds: Vec<u64> = (0..cfg.candidates_per_iteration).map(|_| rng.random()).collect();
    let evals = seeds
        .iter()
        .map(|&seed| {
            evaluate_candidate(
                gen.propose(Some(&exemplar_structure), &ctx.target, seed),
                cfg,
                predictor,
                ctx,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut replacements = Vec::new();
    for (idx, e) in evals.iter().enumerate() {
        if !e.passes_hard {
            continue;
        }
        let energy = e.breakdown.energy.expect("passing candidates have an energy");
        let structure = e.structure.clone().expect("parsed");
        let delta = (energy - cfg.target_energy).abs();
        if let Some((new_id, Some(evicted))) = pool.offer(structure, e.score(), energy, delta, iteration) {
            replacements.push(Replacement {
                candidate: idx,
                new_id,
                evicted_id: evicted.id,
                score: e.score(),
            });
        }
    }
    Ok(IterationLog {
        iteration,
        exemplar_id,
        pool_min_before,
        candidate_seeds: seeds,
        candidate_scores: evals.iter().map(Evaluation::score).collect(),
        candidate_passes: evals.iter().map(|e| e.passes_hard).collect(),
        candidate_abs_delta_e: evals.iter().map(|e| e.abs_delta_e(cfg.target_energy)).collect(),
        replacements,
        pool_min: pool.min_score().unwrap_or(f64::NAN),
        pool_max: pool.max_score().unwrap_or(f64::NAN),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationSummary {
    pub iteration: usize,
    /// Best |E_pred − E_target| among current pool members.
    pub best_abs_delta_e: f64,
    /// Best |E_pred − E_target| of any structure that has entered the pool so far.
    pub running_best_abs_delta_e: f64,
    pub pool_min: f64,
    pub pool_max: f64,
    pub replacements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport {
    pub config: SearchConfig,
    pub seed: u64,
    pub initial: IterationSummary,
    pub per_iteration: Vec<IterationSummary>,
    pub success: bool,
    pub best_abs_delta_e: f64,
    pub best_energy: f64,
    pub best_cif: String,
}

struct RunningBest {
    abs_delta_e: f64,
    energy: f64,
    structure: Structure,
}

impl RunningBest {
    fn update(&mut self, pool: &ExemplarPool, min_provenance: usize) {
        for e in pool.entries().iter().filter(|e| e.provenance >= min_provenance) {
            if e.abs_delta_e < self.abs_delta_e {
                self.abs_delta_e = e.abs_delta_e;
                self.energy = e.energy;
                self.structure = e.structure.clone();
            }
        }
    }
}

fn summary(iteration: usize, pool: &ExemplarPool, best: &RunningBest, replacements: usize) -> IterationSummary {
    IterationSummary {
        iteration,
        best_abs_delta_e: pool.best_abs_delta_e().unwrap_or(f64::NAN),
        running_best_abs_delta_e: best.abs_delta_e,
        pool_min: pool.min_score().unwrap_or(f64::NAN),
        pool_max: pool.max_score().unwrap_or(f64::NAN),
        replacements,
    }
}

/// Initializes the pool and runs `cfg.iterations` refinement steps. The
/// result depends only on the arguments, including `cfg.seed`.
pub fn run_search(
    cfg: &SearchConfig,
    gen: &dyn CandidateGenerator,
    predictor: &dyn EnergyPredictor,
    ctx: &ScoringContext,
) -> Result<(SearchReport, Vec<IterationLog>), SearchError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut pool, _) = initialize_pool(gen, predictor, cfg, ctx, &mut rng)?;
    let first = &pool.entries()[0];
    let mut best = RunningBest {
        abs_delta_e: first.abs_delta_e,
        energy: first.energy,
        structure: first.structure.clone(),
    };
    best.update(&pool, 0);
    let initial = summary(0, &pool, &best, 0);
    let mut per_iteration = Vec::with_capacity(cfg.iterations);
    let mut logs = Vec::with_capacity(cfg.iterations);
    for iteration in 1..=cfg.iterations {
        let log = refine_step(&mut pool, gen, predictor, cfg, ctx, &mut rng, iteration)?;
        best.update(&pool, iteration);
        per_iteration.push(summary(iteration, &pool, &best, log.replacements.len()));
        logs.push(log);
    }
    let report = SearchReport {
        config: cfg.clone(),
        seed: cfg.seed,
        initial,
        per_iteration,
        success: best.abs_delta_e <= cfg.tolerance,
        best_abs_delta_e: best.abs_delta_e,
        best_energy: best.energy,
        best_cif: serialize_cif(&best.structure),
    };
    Ok((report, logs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::Element;
    use crate::structure::{AtomSite, Lattice, SpaceGroup};

    fn dummy(x: f64) -> Structure {
        let cu = Element::from_symbol("Cu").unwrap();
        Structure::new(
            Lattice::cubic(4.0).unwrap(),
            vec![AtomSite::new("Cu1", cu, [x, 0.0, 0.0])],
            SpaceGroup::default(),
        )
        .unwrap()
    }

    #[test]
    fn replacement_rule() {
        let mut pool = ExemplarPool::new(3);
        for s in [0.5, 0.9, 0.7] {
            assert!(pool.offer(dummy(s), s, 0.0, 0.0, 0).is_some());
        }
        let scores: Vec<f64> = pool.entries().iter().map(|e| e.score).collect();
        assert_eq!(scores, vec![0.9, 0.7, 0.5]);
        // Below or equal to the minimum: rejected.
        assert!(pool.offer(dummy(0.1), 0.4, 0.0, 0.0, 1).is_none());
        assert!(pool.offer(dummy(0.1), 0.5, 0.0, 0.0, 1).is_none());
        assert_eq!(pool.len(), 3);
        let (_, evicted) = pool.offer(dummy(0.1), 0.6, 0.0, 0.0, 1).unwrap();
        assert_eq!(evicted.unwrap().score, 0.5);
        assert_eq!(pool.min_score(), Some(0.6));
        assert_eq!(pool.len(), 3);
        // Ties keep the earlier entry first.
        pool.offer(dummy(0.2), 0.7, 0.0, 0.0, 2).unwrap();
        assert_eq!(pool.entries()[1].provenance, 0);
        assert_eq!(pool.entries()[2].provenance, 2);
    }
}
