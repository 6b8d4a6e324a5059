//! Periodic-boundary distance queries.
//!
//! Image searches are bounded by the lattice plane spacings: an image whose
//! fractional offset along direction `k` exceeds `best / h_k` cannot be closer
//! than `best`, so the scanned box grows with cell skew instead of being fixed
//! at one shell.

use serde::Serialize;
use thiserror::Error;

use crate::elements::CovalentRadiusTable;
use crate::structure::{Structure, Vec3};

/// Cells with a smaller volume (Å³) are treated as degenerate.
pub const DEGENERATE_VOLUME: f64 = 1e-6;
/// Image boxes larger than this many offsets are treated as degenerate
/// (the cell is so flat that every query would scan millions of images).
pub const MAX_IMAGE_BOX: u64 = 2_000_000;
pub const DEFAULT_BOND_SCALE: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate cell: {0}")]
    DegenerateCell(String),
    #[error("site index {index} out of range for {len} sites")]
    BadIndex { index: usize, len: usize },
    #[error("connectivity scale must be positive and finite, got {0}")]
    BadScale(f64),
}

fn check_cell(s: &Structure) -> Result<Vec3, GeometryError> {
    let v = s.lattice().volume();
    if !(v.abs() >= DEGENERATE_VOLUME) {
        return Err(GeometryError::DegenerateCell(format!("volume {v:.3e} Å³")));
    }
    Ok(s.lattice().plane_spacings())
}

fn image_box(half_widths: [i64; 3]) -> Result<(), GeometryError> {
    let count = half_widths
        .iter()
        .map(|&n| (n.max(0) as u64).saturating_mul(2).saturating_add(1))
        .fold(1u64, u64::saturating_mul);
    if count > MAX_IMAGE_BOX {
        return Err(GeometryError::DegenerateCell(format!(
            "cell too flat: more than {MAX_IMAGE_BOX} periodic images needed"
        )));
    }
    Ok(())
}

fn cartesian_norm(s: &Structure, d: &Vec3) -> f64 {
    let c = s.lattice().to_cartesian(d);
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

fn check_index(s: &Structure, i: usize) -> Result<(), GeometryError> {
    if i >= s.len() {
        Err(GeometryError::BadIndex { index: i, len: s.len() })
    } else {
        Ok(())
    }
}

fn scan(s: &Structure, d: &Vec3, n: [i64; 3], skip_origin: bool, best: &mut f64) {
    for x in -n[0]..=n[0] {
        for y in -n[1]..=n[1] {
            for z in -n[2]..=n[2] {
                if skip_origin && x == 0 && y == 0 && z == 0 {
                    continue;
                }
                let v = [d[0] + x as f64, d[1] + y as f64, d[2] + z as f64];
                let dist = cartesian_norm(s, &v);
                if dist < *best {
                    *best = dist;
                }
            }
        }
    }
}

/// Shortest distance from site `i` to any periodic image of site `j`. For
/// `i == j` this is the shortest non-zero lattice translation.
pub fn min_image_distance(s: &Structure, i: usize, j: usize) -> Result<f64, GeometryError> {
    check_index(s, i)?;
    check_index(s, j)?;
    let h = check_cell(s)?;
    let (fi, fj) = (&s.sites()[i].frac, &s.sites()[j].frac);
    let d: Vec3 = std::array::from_fn(|k| {
        let x = fj[k] - fi[k];
        x - x.round()
    });
    let self_image = i == j;
    let mut best = f64::INFINITY;
    scan(s, &d, [2, 2, 2], self_image, &mut best);
    // |d_k + n_k| · h_k ≤ distance and |d_k| ≤ 1/2, so |n_k| ≤ best/h_k + 1/2.
    let needed: [i64; 3] = std::array::from_fn(|k| (best / h[k] + 0.5).ceil() as i64);
    if needed.iter().any(|&n| n > 2) {
        image_box(needed)?;
        scan(s, &d, needed, self_image, &mut best);
    }
    Ok(best)
}

/// Smallest minimum-image distance over all site pairs and self-images.
pub fn min_pair_distance(s: &Structure) -> Result<f64, GeometryError> {
    let mut best = f64::INFINITY;
    for i in 0..s.len() {
        for j in i..s.len() {
            best = best.min(min_image_distance(s, i, j)?);
        }
    }
    Ok(best)
}

/// |det(cell)| divided by the number of sites.
pub fn volume_per_atom(s: &Structure) -> f64 {
    s.lattice().volume().abs() / s.len() as f64
}

/// Visits every ordered site pair `(i, j, image)` with
/// `|r_j + image·L - r_i| <= cutoff(i, j)`, skipping `(i, i, 0)`. Pairs are
/// visited by `i`, then `j`, then lexicographic image.
pub fn for_each_pair_within<C, F>(s: &Structure, cutoff: C, mut visit: F) -> Result<(), GeometryError>
where
    C: Fn(usize, usize) -> f64,
    F: FnMut(usize, usize, [i32; 3], f64),
{
    let h = check_cell(s)?;
    let sites = s.sites();
    for i in 0..sites.len() {
        for j in 0..sites.len() {
            let rc = cutoff(i, j);
            if !(rc >= 0.0) {
                continue;
            }
            let d: Vec3 = std::array::from_fn(|k| sites[j].frac[k] - sites[i].frac[k]);
            // Raw differences lie in (-1, 1), hence the +1.
            let n: [i64; 3] = std::array::from_fn(|k| (rc / h[k] + 1.0).floor() as i64);
            image_box(n)?;
            for x in -n[0]..=n[0] {
                for y in -n[1]..=n[1] {
                    for z in -n[2]..=n[2] {
                        if i == j && x == 0 && y == 0 && z == 0 {
                            continue;
                        }
                        let v = [d[0] + x as f64, d[1] + y as f64, d[2] + z as f64];
                        let dist = cartesian_norm(s, &v);
                        if dist <= rc {
                            visit(i, j, [x as i32, y as i32, z as i32], dist);
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Neighbor {
    pub site: usize,
    pub image: [i32; 3],
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeighborRecord {
    pub site_i: usize,
    pub site_j: usize,
    pub image: [i32; 3],
    pub distance: f64,
}

/// Covalent-radius connectivity: per site, every neighbor image within
/// `scale · (r_i + r_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborList {
    pub neighbors: Vec<Vec<Neighbor>>,
}

impl NeighborList {
    pub fn len(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn of(&self, i: usize) -> &[Neighbor] {
        &self.neighbors[i]
    }

    pub fn are_bonded(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].iter().any(|n| n.site == j)
    }

    pub fn records(&self) -> Vec<NeighborRecord> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| {
                ns.iter().map(move |n| NeighborRecord {
                    site_i: i,
                    site_j: n.site,
                    image: n.image,
                    distance: n.distance,
                })
            })
            .collect()
    }
}

pub fn build_neighbor_list(
    s: &Structure,
    radii: &CovalentRadiusTable,
    scale: f64,
) -> Result<NeighborList, GeometryError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(GeometryError::BadScale(scale));
    }
    let r: Vec<f64> = s.sites().iter().map(|site| radii.radius(site.element)).collect();
    let mut neighbors = vec![Vec::new(); s.len()];
    for_each_pair_within(
        s,
        |i, j| scale * (r[i] + r[j]),
        |i, j, image, distance| neighbors[i].push(Neighbor { site: j, image, distance }),
    )?;
    Ok(NeighborList { neighbors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::Element;
    use crate::structure::{AtomSite, Lattice, SpaceGroup};

    fn cu(frac: Vec3) -> AtomSite {
        AtomSite::new("Cu", Element::from_symbol("Cu").unwrap(), frac)
    }

    fn structure(lattice: Lattice, fracs: &[Vec3]) -> Structure {
        let sites = fracs
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let mut s = cu(*f);
                s.label = format!("Cu{}", i + 1);
                s
            })
            .collect();
        Structure::new(lattice, sites, SpaceGroup::default()).unwrap()
    }

    #[test]
    fn cubic_pair_and_self_image() {
        let s = structure(Lattice::cubic(4.0).unwrap(), &[[0.0; 3], [0.5, 0.0, 0.0]]);
        assert!((min_image_distance(&s, 0, 1).unwrap() - 2.0).abs() < 1e-12);
        assert!((min_pair_distance(&s).unwrap() - 2.0).abs() < 1e-12);
        let one = structure(Lattice::cubic(3.0).unwrap(), &[[0.3, 0.1, 0.9]]);
        assert!((min_image_distance(&one, 0, 0).unwrap() - 3.0).abs() < 1e-12);
        assert!((min_pair_distance(&one).unwrap() - 3.0).abs() < 1e-12);
        let same = structure(Lattice::cubic(3.0).unwrap(), &[[0.2; 3], [0.2; 3]]);
        assert_eq!(min_image_distance(&same, 0, 1).unwrap(), 0.0);
        assert_eq!(min_pair_distance(&same).unwrap(), 0.0);
    }

    #[test]
    fn volumes() {
        let s = structure(Lattice::cubic(4.0).unwrap(), &[[0.0; 3], [0.5, 0.0, 0.0]]);
        assert!((volume_per_atom(&s) - 32.0).abs() < 1e-12);
        let s = structure(Lattice::cubic(1.0).unwrap(), &[[0.0; 3]]);
        assert!((volume_per_atom(&s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn skewed_cell_needs_wider_search() {
        // gamma = 5 degrees: the two short in-plane vectors nearly coincide.
        let s = structure(Lattice::new(10.0, 10.0, 10.0, 90.0, 90.0, 5.0).unwrap(), &[[0.0; 3]]);
        let b_minus_a = 2.0 * 10.0 * (2.5f64.to_radians()).sin();
        assert!((min_image_distance(&s, 0, 0).unwrap() - b_minus_a).abs() < 1e-9);
    }

    #[test]
    fn degenerate_and_bad_inputs() {
        let flat = structure(Lattice::new(1e-3, 1e-3, 1e-3, 90.0, 90.0, 90.0).unwrap(), &[[0.0; 3]]);
        assert!(matches!(min_image_distance(&flat, 0, 0), Err(GeometryError::DegenerateCell(_))));
        let s = structure(Lattice::cubic(4.0).unwrap(), &[[0.0; 3]]);
        assert!(matches!(min_image_distance(&s, 0, 3), Err(GeometryError::BadIndex { .. })));
        let radii = CovalentRadiusTable::default();
        assert!(matches!(build_neighbor_list(&s, &radii, 0.0), Err(GeometryError::BadScale(_))));
    }

    #[test]
    fn huge_image_box_is_rejected() {
        assert!(image_box([2, 2, 2]).is_ok());
        assert!(matches!(image_box([i64::MAX, i64::MAX, 3]), Err(GeometryError::DegenerateCell(_))));
        assert!(matches!(image_box([1 << 40, 1 << 40, 0]), Err(GeometryError::DegenerateCell(_))));
    }

    #[test]
    fn cutoff_inclusion() {
        let radii = CovalentRadiusTable::default();
        // r_Cu = 1.32 Å, cutoff at scale 1.0 is 2.64 Å.
        let near = structure(Lattice::new(4.8, 12.0, 12.0, 90.0, 90.0, 90.0).unwrap(), &[[0.0; 3], [0.5, 0.0, 0.0]]);
        let nl = build_neighbor_list(&near, &radii, 1.0).unwrap();
        assert!(nl.are_bonded(0, 1));
        // 2.4 Å to both +x and -x images.
        assert_eq!(nl.of(0).len(), 2);
        let far = structure(Lattice::new(5.4, 12.0, 12.0, 90.0, 90.0, 90.0).unwrap(), &[[0.0; 3], [0.5, 0.0, 0.0]]);
        let nl = build_neighbor_list(&far, &radii, 1.0).unwrap();
        assert!(nl.is_empty());
        let nl = build_neighbor_list(&near, &radii, 1e-9).unwrap();
        assert!(nl.is_empty());
    }

    #[test]
    fn neighbor_order_and_records() {
        let radii = CovalentRadiusTable::default();
        let s = structure(Lattice::cubic(2.5).unwrap(), &[[0.0; 3]]);
        let nl = build_neighbor_list(&s, &radii, 1.2).unwrap();
        let images: Vec<[i32; 3]> = nl.of(0).iter().map(|n| n.image).collect();
        assert_eq!(
            images,
            vec![[-1, 0, 0], [0, -1, 0], [0, 0, -1], [0, 0, 1], [0, 1, 0], [1, 0, 0]]
        );
        let json = serde_json::to_string(&nl.records()[0]).unwrap();
        assert_eq!(json, r#"{"site_i":0,"site_j":0,"image":[-1,0,0],"distance":2.5}"#);
    }
}
