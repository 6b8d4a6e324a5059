//! Candidate generator contract and a seeded structural-mutation generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cif::serialize_cif;
use crate::elements::{CovalentRadiusTable, Element};
use crate::structure::{AtomSite, CompositionVector, Lattice, Structure};

/// Proposes CIF text, optionally conditioned on an exemplar structure. Must
/// be a pure function of its arguments.
pub trait CandidateGenerator: Sync {
    fn propose(&self, exemplar: Option<&Structure>, target: &CompositionVector, seed: u64) -> String;
}

/// Per-class probability of corrupting a generated candidate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefectRates {
    /// Breaks the text so it no longer parses.
    pub syntax: f64,
    /// Drops the space-group items.
    pub missing_field: f64,
    /// Swaps one site to an element absent from the target.
    pub composition: f64,
    /// Moves one site on top of another.
    pub overlap: f64,
}

/// Which corruptions were applied to a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InjectedDefects {
    pub syntax: bool,
    pub missing_field: bool,
    pub composition: bool,
    pub overlap: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCandidate {
    pub text: String,
    pub injected: InjectedDefects,
}

/// Jitters fractional coordinates and lattice lengths of the exemplar (or of
/// a fixed template when unconditioned), then optionally injects defects.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationGenerator {
    pub template: Structure,
    /// Maximum per-coordinate displacement, in fractional units.
    pub coord_jitter: f64,
    /// Maximum relative change of each cell length.
    pub lattice_jitter: f64,
    pub defects: DefectRates,
}

impl MutationGenerator {
    pub fn new(template: Structure) -> Self {
        MutationGenerator {
            template,
            coord_jitter: 0.05,
            lattice_jitter: 0.02,
            defects: DefectRates::default(),
        }
    }

    pub fn with_jitter(mut self, coord: f64, lattice: f64) -> Self {
        self.coord_jitter = coord;
        self.lattice_jitter = lattice;
        self
    }

    pub fn with_defects(mut self, defects: DefectRates) -> Self {
        self.defects = defects;
        self
    }

    fn jitter(&self, base: &Structure, rng: &mut ChaCha8Rng) -> Structure {
        let p = base.lattice().params();
        let mut len = |x: f64| x * (1.0 + self.lattice_jitter * rng.random_range(-1.0..=1.0));
        let (a, b, c) = (len(p.a), len(p.b), len(p.c));
        let lattice = Lattice::new(a, b, c, p.alpha, p.beta, p.gamma).unwrap_or_else(|_| base.lattice().clone());
        let sites = base
            .sites()
            .iter()
            .map(|s| {
                let mut out = s.clone();
                for x in &mut out.frac {
                    *x += self.coord_jitter * rng.random_range(-1.0..=1.0);
                }
                out
            })
            .collect();
        Structure::new(lattice, sites, base.space_group().clone()).expect("jitter keeps structure valid")
    }

    /// Generates one candidate and records which defects were injected.
    pub fn generate(&self, exemplar: Option<&Structure>, target: &CompositionVector, seed: u64) -> GeneratedCandidate {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = self.jitter(exemplar.unwrap_or(&self.template), &mut rng);
        let d = self.defects;
        let injected = InjectedDefects {
            syntax: rng.random_bool(d.syntax.clamp(0.0, 1.0)),
            missing_field: rng.random_bool(d.missing_field.clamp(0.0, 1.0)),
            composition: rng.random_bool(d.composition.clamp(0.0, 1.0)),
            overlap: rng.random_bool(d.overlap.clamp(0.0, 1.0)),
        };
        if injected.overlap {
            s = inject_overlap(&s, &mut rng);
        }
        if injected.composition {
            s = inject_foreign_element(&s, target, &mut rng);
        }
        let mut text = serialize_cif(&s);
        if injected.missing_field {
            text = text
                .lines()
                .filter(|l| !l.starts_with("_symmetry_space_group_name_H-M") && !l.starts_with("_symmetry_Int_Tables_number"))
                .map(|l| format!("{l}\n"))
                .collect();
        }
        if injected.syntax {
            let mut lines: Vec<&str> = text.lines().collect();
            let at = rng.random_range(1..=lines.len());
            lines.insert(at, "_generated_comment 'unterminated");
            text = lines.iter().map(|l| format!("{l}\n")).collect();
        }
        GeneratedCandidate { text, injected }
    }
}

impl CandidateGenerator for MutationGenerator {
    fn propose(&self, exemplar: Option<&Structure>, target: &CompositionVector, seed: u64) -> String {
        self.generate(exemplar, target, seed).text
    }
}

fn inject_overlap(s: &Structure, rng: &mut ChaCha8Rng) -> Structure {
    let mut sites: Vec<AtomSite> = s.sites().to_vec();
    if sites.len() < 2 {
        // A lone atom cannot overlap another; shrink the cell onto its own images.
        let lattice = s.lattice().scaled(0.05).unwrap_or_else(|_| s.lattice().clone());
        return Structure::new(lattice, sites, s.space_group().clone()).expect("valid");
    }
    let i = rng.random_range(0..sites.len());
    let mut j = rng.random_range(0..sites.len() - 1);
    if j >= i {
        j += 1;
    }
    let f = sites[i].frac;
    sites[j].frac = [f[0] + 1e-4, f[1], f[2]];
    Structure::new(s.lattice().clone(), sites, s.space_group().clone()).expect("valid")
}

/// Replaces one site's element with the smallest-radius element absent from
/// `target`, so no interatomic distance ratio gets worse.
fn inject_foreign_element(s: &Structure, target: &CompositionVector, rng: &mut ChaCha8Rng) -> Structure {
    let radii = CovalentRadiusTable::default();
    let mut candidates: Vec<Element> = Element::all().filter(|e| target.get(*e) == 0).collect();
    candidates.sort_by(|a, b| radii.radius(*a).total_cmp(&radii.radius(*b)));
    let Some(&foreign) = candidates.first() else {
        return s.clone();
    };
    let mut sites = s.sites().to_vec();
    let i = rng.random_range(0..sites.len());
    sites[i].element = foreign;
    Structure::new(s.lattice().clone(), sites, s.space_group().clone()).expect("valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cif::{parse_cif, DefectCode};
    use crate::structure::SpaceGroup;

    fn fcc_cu() -> Structure {
        let cu = Element::from_symbol("Cu").unwrap();
        let fr = [[0.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]];
        let sites = fr
            .iter()
            .enumerate()
            .map(|(i, f)| AtomSite::new(format!("Cu{}", i + 1), cu, *f))
            .collect();
        Structure::new(Lattice::cubic(3.61).unwrap(), sites, SpaceGroup::default()).unwrap()
    }

    #[test]
    fn clean_candidates_parse_and_are_deterministic() {
        let g = MutationGenerator::new(fcc_cu());
        let target = g.template.composition();
        for seed in 0..50 {
            let text = g.propose(None, &target, seed);
            assert_eq!(text, g.propose(None, &target, seed));
            let o = parse_cif(&text);
            assert!(o.defects.is_empty(), "{:?}", o.defects);
            assert_eq!(o.structure.unwrap().composition(), target);
        }
        assert_ne!(g.propose(None, &target, 1), g.propose(None, &target, 2));
    }

    #[test]
    fn forced_defects() {
        let all = DefectRates {
            syntax: 0.0,
            missing_field: 1.0,
            composition: 1.0,
            overlap: 1.0,
        };
        let g = MutationGenerator::new(fcc_cu()).with_defects(all);
        let target = g.template.composition();
        let c = g.generate(None, &target, 7);
        assert!(c.injected.missing_field && c.injected.composition && c.injected.overlap);
        let o = parse_cif(&c.text);
        assert!(o.has(DefectCode::MissingSpaceGroup));
        let s = o.structure.unwrap();
        assert_ne!(s.composition(), target);
        assert!(crate::geometry::min_pair_distance(&s).unwrap() < 0.01);

        let broken = MutationGenerator::new(fcc_cu()).with_defects(DefectRates { syntax: 1.0, ..Default::default() });
        for seed in 0..20 {
            assert!(parse_cif(&broken.propose(None, &target, seed)).structure.is_none());
        }
    }
}
