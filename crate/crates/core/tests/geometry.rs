mod common;

use catloop::geometry::{build_neighbor_list, min_image_distance, min_pair_distance, volume_per_atom};
use catloop::{CovalentRadiusTable, Lattice};
use common::{oracle_min_image, oracle_min_pair, random_structure, structure};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..150 {
        let s = random_structure(&mut rng, 8);
        let d = min_pair_distance(&s).unwrap();
        assert!((d - oracle_min_pair(&s)).abs() < 1e-9);
        for i in 0..s.len() {
            for j in 0..s.len() {
                let got = min_image_distance(&s, i, j).unwrap();
                assert!((got - oracle_min_image(&s, i, j)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn strongly_skewed_cell() {
    let lattice = Lattice::new(3.0, 3.0, 12.0, 100.0, 100.0, 25.0).unwrap();
    let s = structure(lattice, &[("Cu", [0.1, 0.2, 0.3]), ("O", [0.9, 0.7, 0.05])]);
    for i in 0..2 {
        for j in 0..2 {
            assert!((min_image_distance(&s, i, j).unwrap() - oracle_min_image(&s, i, j)).abs() < 1e-9);
        }
    }
}

#[test]
fn neighbor_list_agrees_with_brute_force_cutoff() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let radii = CovalentRadiusTable::default();
    for _ in 0..40 {
        let s = random_structure(&mut rng, 5);
        let nl = build_neighbor_list(&s, &radii, 1.2).unwrap();
        for i in 0..s.len() {
            for j in 0..s.len() {
                let cutoff = 1.2 * (radii.radius(s.sites()[i].element) + radii.radius(s.sites()[j].element));
                let bonded = oracle_min_image(&s, i, j) <= cutoff;
                assert_eq!(nl.are_bonded(i, j), bonded, "{i} {j}");
            }
        }
        // Symmetric: every i→j image has a j→i partner at the same distance.
        let records = nl.records();
        for r in &records {
            assert!(records.iter().any(|q| q.site_i == r.site_j
                && q.site_j == r.site_i
                && q.image == r.image.map(|x| -x)
                && (q.distance - r.distance).abs() < 1e-9));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn invariant_under_cell_translation(seed in any::<u64>(), shift in prop::array::uniform3(-3i32..3)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_structure(&mut rng, 4);
        let moved: Vec<(String, [f64; 3])> = s
            .sites()
            .iter()
            .map(|a| (a.element.symbol().to_string(), std::array::from_fn(|k| a.frac[k] + shift[k] as f64)))
            .collect();
        let refs: Vec<(&str, [f64; 3])> = moved.iter().map(|(e, f)| (e.as_str(), *f)).collect();
        let t = structure(s.lattice().clone(), &refs);
        prop_assert!((min_pair_distance(&s).unwrap() - min_pair_distance(&t).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn symmetric_and_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_structure(&mut rng, 4);
        let m = s.lattice().matrix();
        let shortest = m.iter().map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()).fold(f64::INFINITY, f64::min);
        for i in 0..s.len() {
            prop_assert!(min_image_distance(&s, i, i).unwrap() <= shortest + 1e-12);
            for j in 0..s.len() {
                let a = min_image_distance(&s, i, j).unwrap();
                let b = min_image_distance(&s, j, i).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
        prop_assert!(volume_per_atom(&s) > 0.0);
    }
}
