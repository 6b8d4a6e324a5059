//! Parse / valid / composition / physical reward for generated CIF text, and
//! the corpus failure-mode rates (PF, VF, CM, PV) derived from it.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cif::{parse_cif, ParseOutcome};
use crate::elements::CovalentRadiusTable;
use crate::geometry::{min_image_distance, volume_per_atom, GeometryError};
use crate::structure::{CompositionVector, Structure};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("reward weights must be non-negative and sum to 1 (got {0:?})")]
    BadWeights([f64; 4]),
    #[error("target composition is empty")]
    EmptyTarget,
    #[error("invalid physical-plausibility config: {0}")]
    BadPhysConfig(String),
    #[error("cannot compute failure rates of an empty corpus")]
    EmptyCorpus,
}

/// Weights of the four sub-scores. They must be non-negative and sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct RewardWeights {
    comp: f64,
    parse: f64,
    valid: f64,
    phys: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    comp: f64,
    parse: f64,
    valid: f64,
    phys: f64,
}

impl TryFrom<RawWeights> for RewardWeights {
    type Error = RewardError;
    fn try_from(w: RawWeights) -> Result<Self, Self::Error> {
        RewardWeights::new(w.comp, w.parse, w.valid, w.phys)
    }
}

impl From<RewardWeights> for RawWeights {
    fn from(w: RewardWeights) -> Self {
        RawWeights {
            comp: w.comp,
            parse: w.parse,
            valid: w.valid,
            phys: w.phys,
        }
    }
}

impl Default for RewardWeights {
    /// (comp, parse, valid, phys) = (0.6, 0.2, 0.1, 0.1).
    fn default() -> Self {
        RewardWeights {
            comp: 0.6,
            parse: 0.2,
            valid: 0.1,
            phys: 0.1,
        }
    }
}

impl RewardWeights {
    pub fn new(comp: f64, parse: f64, valid: f64, phys: f64) -> Result<Self, RewardError> {
        let w = [comp, parse, valid, phys];
        let ok = w.iter().all(|x| x.is_finite() && *x >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
        if !ok {
            return Err(RewardError::BadWeights(w));
        }
        Ok(RewardWeights { comp, parse, valid, phys })
    }

    pub fn comp(&self) -> f64 {
        self.comp
    }
    pub fn parse(&self) -> f64 {
        self.parse
    }
    pub fn valid(&self) -> f64 {
        self.valid
    }
    pub fn phys(&self) -> f64 {
        self.phys
    }

    pub fn total(&self, s_parse: f64, s_valid: f64, s_comp: f64, s_phys: f64) -> f64 {
        self.comp * s_comp + self.parse * s_parse + self.valid * s_valid + self.phys * s_phys
    }
}

/// Thresholds of the physical-plausibility score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysConfig {
    /// Pairs closer than this fraction of their covalent-radius sum score 0.
    pub hard_overlap_fraction: f64,
    /// Pairs at or beyond this fraction score 1.
    pub full_credit_fraction: f64,
    /// Volume-per-atom window in Å³ with full credit.
    pub vpa_min: f64,
    pub vpa_max: f64,
}

impl Default for PhysConfig {
    fn default() -> Self {
        PhysConfig {
            hard_overlap_fraction: 0.5,
            full_credit_fraction: 0.75,
            vpa_min: 3.0,
            vpa_max: 200.0,
        }
    }
}

impl PhysConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        let (h, f) = (self.hard_overlap_fraction, self.full_credit_fraction);
        if !(h > 0.0 && h < f && f <= 1.0) {
            return Err(RewardError::BadPhysConfig(format!(
                "need 0 < hard_overlap_fraction ({h}) < full_credit_fraction ({f}) <= 1"
            )));
        }
        if !(self.vpa_min > 0.0 && self.vpa_min < self.vpa_max && self.vpa_max.is_finite()) {
            return Err(RewardError::BadPhysConfig(format!(
                "need 0 < vpa_min ({}) < vpa_max ({})",
                self.vpa_min, self.vpa_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FailureFlag {
    /// Parse fail.
    PF,
    /// Valid fail: parsed but some field check failed.
    VF,
    /// Composition mismatch.
    CM,
    /// Physical violation.
    PV,
}

impl FailureFlag {
    pub const ALL: [FailureFlag; 4] = [FailureFlag::PF, FailureFlag::VF, FailureFlag::CM, FailureFlag::PV];
}

impl fmt::Display for FailureFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Sub-scores, weighted total and failure flags of one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub s_parse: f64,
    pub s_valid: f64,
    pub s_comp: f64,
    pub s_phys: f64,
    pub total: f64,
    pub flags: Vec<FailureFlag>,
    pub diagnostics: Vec<String>,
}

impl RewardBreakdown {
    pub fn has(&self, flag: FailureFlag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Report row for one scored file or candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    pub candidate_id: String,
    #[serde(flatten)]
    pub breakdown: RewardBreakdown,
}

/// 1 when a structure was produced, 0 otherwise.
pub fn score_parse(outcome: &ParseOutcome) -> f64 {
    if outcome.is_success() {
        1.0
    } else {
        0.0
    }
}

/// Fraction of the six field-completeness checks that pass; 0 without a structure.
pub fn score_valid(outcome: &ParseOutcome) -> f64 {
    if !outcome.is_success() {
        return 0.0;
    }
    let checks = outcome.validity.checks();
    let violations = checks.iter().filter(|(_, ok)| !ok).count();
    (1.0 - violations as f64 / checks.len() as f64).clamp(0.0, 1.0)
}

/// 1 − Σ|t_e − a_e| / (Σ t_e + Σ a_e): 1 for an exact match, 0 for disjoint element sets.
pub fn score_composition(target: &CompositionVector, actual: &CompositionVector) -> Result<f64, RewardError> {
    if target.is_empty() {
        return Err(RewardError::EmptyTarget);
    }
    let mut diff = 0u64;
    for e in target.elements().chain(actual.elements().filter(|e| target.get(*e) == 0)) {
        diff += (target.get(e) as i64 - actual.get(e) as i64).unsigned_abs();
    }
    let denom = target.total() + actual.total();
    Ok((1.0 - diff as f64 / denom as f64).clamp(0.0, 1.0))
}

/// Physical-plausibility score with its explanatory diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysScore {
    pub score: f64,
    pub distance_factor: f64,
    pub volume_factor: f64,
    /// Smallest distance / (r_i + r_j) over all pairs and self-images.
    pub worst_ratio: f64,
    pub diagnostics: Vec<String>,
}

/// Smallest minimum-image distance divided by the covalent-radius sum, over
/// all pairs including self-images.
pub fn worst_distance_ratio(s: &Structure, radii: &CovalentRadiusTable) -> Result<(f64, usize, usize), GeometryError> {
    let r: Vec<f64> = s.sites().iter().map(|site| radii.radius(site.element)).collect();
    let mut worst = (f64::INFINITY, 0, 0);
    for i in 0..s.len() {
        for j in i..s.len() {
            let ratio = min_image_distance(s, i, j)? / (r[i] + r[j]);
            if ratio < worst.0 {
                worst = (ratio, i, j);
            }
        }
    }
    Ok(worst)
}

/// 1 inside [vpa_min, vpa_max]; falls linearly to 0 at vpa_min/10 below and
/// at 10·vpa_max above.
pub fn volume_factor(vpa: f64, cfg: &PhysConfig) -> f64 {
    if vpa < cfg.vpa_min {
        let floor = cfg.vpa_min / 10.0;
        ((vpa - floor) / (cfg.vpa_min - floor)).clamp(0.0, 1.0)
    } else if vpa > cfg.vpa_max {
        let ceil = cfg.vpa_max * 10.0;
        ((ceil - vpa) / (ceil - cfg.vpa_max)).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

pub fn distance_factor(ratio: f64, cfg: &PhysConfig) -> f64 {
    let (h, f) = (cfg.hard_overlap_fraction, cfg.full_credit_fraction);
    ((ratio - h) / (f - h)).clamp(0.0, 1.0)
}

pub fn score_physical(s: &Structure, radii: &CovalentRadiusTable, cfg: &PhysConfig) -> PhysScore {
    let mut diagnostics = Vec::new();
    let (worst_ratio, i, j) = match worst_distance_ratio(s, radii) {
        Ok(w) => w,
        Err(e) => {
            diagnostics.push(format!("physical: {e}"));
            return PhysScore {
                score: 0.0,
                distance_factor: 0.0,
                volume_factor: 0.0,
                worst_ratio: 0.0,
                diagnostics,
            };
        }
    };
    let df = distance_factor(worst_ratio, cfg);
    if df < 1.0 {
        let sites = s.sites();
        diagnostics.push(format!(
            "physical: {}-{} at {:.3} of the covalent-radius sum",
            sites[i].label, sites[j].label, worst_ratio
        ));
    }
    let vpa = volume_per_atom(s);
    let vf = volume_factor(vpa, cfg);
    if vf < 1.0 {
        diagnostics.push(format!(
            "physical: {vpa:.3} Å³/atom outside [{}, {}]",
            cfg.vpa_min, cfg.vpa_max
        ));
    }
    PhysScore {
        score: df * vf,
        distance_factor: df,
        volume_factor: vf,
        worst_ratio,
        diagnostics,
    }
}

/// Scores an already-parsed outcome.
pub fn pvcp_outcome(
    outcome: &ParseOutcome,
    target: &CompositionVector,
    weights: &RewardWeights,
    radii: &CovalentRadiusTable,
    cfg: &PhysConfig,
) -> Result<RewardBreakdown, RewardError> {
    if target.is_empty() {
        return Err(RewardError::EmptyTarget);
    }
    cfg.validate()?;
    let Some(structure) = &outcome.structure else {
        let diagnostics = outcome
            .fatal_defects()
            .map(|d| format!("parse: {} at line {}: {}", d.code, d.line, d.message))
            .collect();
        return Ok(RewardBreakdown {
            s_parse: 0.0,
            s_valid: 0.0,
            s_comp: 0.0,
            s_phys: 0.0,
            total: 0.0,
            flags: vec![FailureFlag::PF],
            diagnostics,
        });
    };
    let mut diagnostics = Vec::new();
    let s_parse = score_parse(outcome);
    let s_valid = score_valid(outcome);
    for (name, ok) in outcome.validity.checks() {
        if !ok {
            diagnostics.push(format!("valid: failed check '{name}'"));
        }
    }
    let actual = structure.composition();
    let s_comp = score_composition(target, &actual)?;
    if s_comp < 1.0 {
        diagnostics.push(format!("composition: expected {target}, found {actual}"));
    }
    let phys = score_physical(structure, radii, cfg);
    diagnostics.extend(phys.diagnostics);
    let s_phys = phys.score;

    let mut flags = Vec::new();
    if s_valid < 1.0 {
        flags.push(FailureFlag::VF);
    }
    if s_comp < 1.0 {
        flags.push(FailureFlag::CM);
    }
    if s_phys < 1.0 {
        flags.push(FailureFlag::PV);
    }
    Ok(RewardBreakdown {
        s_parse,
        s_valid,
        s_comp,
        s_phys,
        total: weights.total(s_parse, s_valid, s_comp, s_phys).clamp(0.0, 1.0),
        flags,
        diagnostics,
    })
}

/// Parses `text` and computes the full reward breakdown.
pub fn pvcp(
    text: &str,
    target: &CompositionVector,
    weights: &RewardWeights,
    radii: &CovalentRadiusTable,
    cfg: &PhysConfig,
) -> Result<RewardBreakdown, RewardError> {
    pvcp_outcome(&parse_cif(text), target, weights, radii, cfg)
}

/// Percentage of reports carrying each flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureRates {
    pub pf: f64,
    pub vf: f64,
    pub cm: f64,
    pub pv: f64,
    pub corpus_size: usize,
}

impl FailureRates {
    pub fn rate(&self, flag: FailureFlag) -> f64 {
        match flag {
            FailureFlag::PF => self.pf,
            FailureFlag::VF => self.vf,
            FailureFlag::CM => self.cm,
            FailureFlag::PV => self.pv,
        }
    }
}

pub fn corpus_failure_rates<'a, I>(reports: I) -> Result<FailureRates, RewardError>
where
    I: IntoIterator<Item = &'a RewardBreakdown>,
{
    let mut counts = [0usize; 4];
    let mut n = 0usize;
    for r in reports {
        n += 1;
        for (k, flag) in FailureFlag::ALL.iter().enumerate() {
            if r.has(*flag) {
                counts[k] += 1;
            }
        }
    }
    if n == 0 {
        return Err(RewardError::EmptyCorpus);
    }
    let pct = |c: usize| 100.0 * c as f64 / n as f64;
    Ok(FailureRates {
        pf: pct(counts[0]),
        vf: pct(counts[1]),
        cm: pct(counts[2]),
        pv: pct(counts[3]),
        corpus_size: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::Element;
    use crate::structure::{AtomSite, Lattice, SpaceGroup};

    fn comp(f: &str) -> CompositionVector {
        CompositionVector::parse_formula(f).unwrap()
    }

    fn cif(lattice_a: f64, sites: &[(&str, &str, [f64; 3])], space_group: bool) -> String {
        let mut t = format!(
            "data_t\n_cell_length_a {lattice_a}\n_cell_length_b 6\n_cell_length_c 6\n_cell_angle_alpha 90\n_cell_angle_beta 90\n_cell_angle_gamma 90\n"
        );
        if space_group {
            t.push_str("_symmetry_space_group_name_H-M 'P 1'\n");
        }
        t.push_str("loop_\n_atom_site_label\n_atom_site_type_symbol\n_atom_site_fract_x\n_atom_site_fract_y\n_atom_site_fract_z\n");
        for (label, el, f) in sites {
            t.push_str(&format!("{label} {el} {} {} {}\n", f[0], f[1], f[2]));
        }
        t
    }

    fn cu2(a: f64, d: f64) -> Structure {
        let cu = Element::from_symbol("Cu").unwrap();
        Structure::new(
            Lattice::new(a, 6.0, 6.0, 90.0, 90.0, 90.0).unwrap(),
            vec![AtomSite::new("Cu1", cu, [0.0; 3]), AtomSite::new("Cu2", cu, [d / a, 0.0, 0.0])],
            SpaceGroup::default(),
        )
        .unwrap()
    }

    #[test]
    fn weights_validation() {
        assert!(RewardWeights::new(0.6, 0.2, 0.1, 0.1).is_ok());
        assert!(RewardWeights::new(0.6, 0.2, 0.1, 0.2).is_err());
        assert!(RewardWeights::new(1.2, -0.2, 0.0, 0.0).is_err());
        let w = RewardWeights::default();
        assert_eq!((w.comp(), w.parse(), w.valid(), w.phys()), (0.6, 0.2, 0.1, 0.1));
        let parsed: RewardWeights = serde_json::from_str(r#"{"comp":0.25,"parse":0.25,"valid":0.25,"phys":0.25}"#).unwrap();
        assert_eq!(parsed.comp(), 0.25);
        assert!(serde_json::from_str::<RewardWeights>(r#"{"comp":0.5,"parse":0.25,"valid":0.25,"phys":0.25}"#).is_err());
    }

    #[test]
    fn composition_scores() {
        assert_eq!(score_composition(&comp("Cu4O"), &comp("Cu4O")).unwrap(), 1.0);
        let s = score_composition(&comp("Cu4O"), &comp("Cu3O")).unwrap();
        assert!((s - (1.0 - 1.0 / 9.0)).abs() < 1e-12);
        assert_eq!(score_composition(&comp("Cu4"), &comp("Pt4")).unwrap(), 0.0);
        assert_eq!(
            score_composition(&CompositionVector::new(), &comp("Cu")),
            Err(RewardError::EmptyTarget)
        );
        assert_eq!(score_composition(&comp("Cu"), &CompositionVector::new()).unwrap(), 0.0);
    }

    #[test]
    fn parse_and_valid_scores() {
        let good = cif(4.8, &[("Cu1", "Cu", [0.0; 3])], true);
        let o = parse_cif(&good);
        assert_eq!((score_parse(&o), score_valid(&o)), (1.0, 1.0));
        let no_sg = parse_cif(&cif(4.8, &[("Cu1", "Cu", [0.0; 3])], false));
        assert_eq!(score_parse(&no_sg), 1.0);
        assert!((score_valid(&no_sg) - 5.0 / 6.0).abs() < 1e-12);
        let dup = parse_cif(&cif(4.8, &[("Cu1", "Cu", [0.0; 3]), ("Cu1", "Cu", [0.5; 3])], true));
        assert_eq!(score_parse(&dup), 1.0);
        let broken = parse_cif(&good.replace("_cell_length_a 4.8\n", ""));
        assert_eq!((score_parse(&broken), score_valid(&broken)), (0.0, 0.0));
    }

    #[test]
    fn physical_scores() {
        let radii = CovalentRadiusTable::default();
        let cfg = PhysConfig::default();
        // 2.4 Å apart, radius sum 2.64 Å, full credit from 1.98 Å.
        let p = score_physical(&cu2(4.8, 2.4), &radii, &cfg);
        assert_eq!(p.score, 1.0);
        assert!(p.diagnostics.is_empty());
        assert_eq!(score_physical(&cu2(4.8, 0.0), &radii, &cfg).score, 0.0);
        let at_hard = score_physical(&cu2(8.0, 0.5 * 2.64), &radii, &cfg);
        assert!(at_hard.score.abs() < 1e-12);
        let at_full = score_physical(&cu2(8.0, 0.75 * 2.64 + 1e-12), &radii, &cfg);
        assert!((at_full.score - 1.0).abs() < 1e-9);
        let mid = score_physical(&cu2(8.0, 0.625 * 2.64), &radii, &cfg);
        assert!((mid.score - 0.5).abs() < 1e-9);
    }

    #[test]
    fn volume_window() {
        let cfg = PhysConfig::default();
        assert_eq!(volume_factor(50.0, &cfg), 1.0);
        assert_eq!(volume_factor(3.0, &cfg), 1.0);
        assert_eq!(volume_factor(0.3, &cfg), 0.0);
        assert!((volume_factor(1.65, &cfg) - 0.5).abs() < 1e-12);
        assert_eq!(volume_factor(2000.0, &cfg), 0.0);
        assert!((volume_factor(1100.0, &cfg) - 0.5).abs() < 1e-12);
        assert_eq!(volume_factor(1e6, &cfg), 0.0);
    }

    #[test]
    fn pvcp_examples() {
        let radii = CovalentRadiusTable::default();
        let cfg = PhysConfig::default();
        let w = RewardWeights::default();
        let target = comp("Cu2");
        let perfect = cif(4.8, &[("Cu1", "Cu", [0.0; 3]), ("Cu2", "Cu", [0.5, 0.0, 0.0])], true);
        let r = pvcp(&perfect, &target, &w, &radii, &cfg).unwrap();
        assert!((r.total - 1.0).abs() < 1e-12);
        assert!(r.flags.is_empty());

        let r = pvcp("not a cif", &target, &w, &radii, &cfg).unwrap();
        assert_eq!(r.total, 0.0);
        assert_eq!(r.flags, vec![FailureFlag::PF]);

        let bad = cif(4.8, &[("Cu1", "Cu", [0.0; 3]), ("Cu2", "Cu", [0.0; 3])], false);
        let r = pvcp(&bad, &target, &w, &radii, &cfg).unwrap();
        assert!((r.total - (0.6 + 0.2 + 0.1 * 5.0 / 6.0)).abs() < 1e-12);
        assert!((r.total - 0.8833).abs() < 1e-4);
        assert_eq!(r.flags, vec![FailureFlag::VF, FailureFlag::PV]);

        assert_eq!(
            pvcp(&perfect, &CompositionVector::new(), &w, &radii, &cfg),
            Err(RewardError::EmptyTarget)
        );
    }

    #[test]
    fn failure_rates() {
        let mk = |flags: Vec<FailureFlag>| RewardBreakdown {
            s_parse: 1.0,
            s_valid: 1.0,
            s_comp: 1.0,
            s_phys: 1.0,
            total: 1.0,
            flags,
            diagnostics: vec![],
        };
        let reports: Vec<_> = FailureFlag::ALL.iter().map(|f| mk(vec![*f])).collect();
        let r = corpus_failure_rates(&reports).unwrap();
        assert_eq!((r.pf, r.vf, r.cm, r.pv), (25.0, 25.0, 25.0, 25.0));
        let clean = vec![mk(vec![]); 3];
        let r = corpus_failure_rates(&clean).unwrap();
        assert_eq!((r.pf, r.vf, r.cm, r.pv), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(corpus_failure_rates(&[]), Err(RewardError::EmptyCorpus));
    }

    #[test]
    fn report_json_shape() {
        let report = RewardReport {
            candidate_id: "a.cif".into(),
            breakdown: RewardBreakdown {
                s_parse: 0.0,
                s_valid: 0.0,
                s_comp: 0.0,
                s_phys: 0.0,
                total: 0.0,
                flags: vec![FailureFlag::PF],
                diagnostics: vec!["x".into()],
            },
        };
        let v: serde_json::Value = serde_json::to_value(&report).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        for k in ["candidate_id", "s_parse", "s_valid", "s_comp", "s_phys", "total", "flags", "diagnostics"] {
            assert!(keys.contains(&k), "{k}");
        }
        assert_eq!(v["flags"][0], "PF");
    }
}
