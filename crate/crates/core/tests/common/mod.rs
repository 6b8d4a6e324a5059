#![allow(dead_code)]

use catloop::{AtomSite, Element, Lattice, SpaceGroup, Structure};
use rand::Rng;

pub const SYMBOLS: [&str; 8] = ["H", "C", "O", "Cu", "Pt", "Ni", "Au", "Zn"];

pub fn el(symbol: &str) -> Element {
    Element::from_symbol(symbol).unwrap()
}

pub fn structure(lattice: Lattice, sites: &[(&str, [f64; 3])]) -> Structure {
    let sites = sites
        .iter()
        .enumerate()
        .map(|(i, (sym, f))| AtomSite::new(format!("{sym}{}", i + 1), el(sym), *f))
        .collect();
    Structure::new(lattice, sites, SpaceGroup::default()).unwrap()
}

pub fn random_lattice<R: Rng>(rng: &mut R) -> Lattice {
    loop {
        let a = rng.random_range(2.0..10.0);
        let b = rng.random_range(2.0..10.0);
        let c = rng.random_range(2.0..10.0);
        let alpha = rng.random_range(60.0..120.0);
        let beta = rng.random_range(60.0..120.0);
        let gamma = rng.random_range(60.0..120.0);
        if let Ok(l) = Lattice::new(a, b, c, alpha, beta, gamma) {
            if l.volume() > 1.0 {
                return l;
            }
        }
    }
}

pub fn random_structure<R: Rng>(rng: &mut R, max_sites: usize) -> Structure {
    let lattice = random_lattice(rng);
    let n = rng.random_range(1..=max_sites);
    let sites: Vec<AtomSite> = (0..n)
        .map(|i| {
            let sym = SYMBOLS[rng.random_range(0..SYMBOLS.len())];
            let frac = [rng.random(), rng.random(), rng.random()];
            AtomSite::new(format!("{sym}{}", i + 1), el(sym), frac)
        })
        .collect();
    Structure::new(lattice, sites, SpaceGroup::default()).unwrap()
}

/// Exhaustive periodic-image oracle. Uses raw (unwrapped) fractional
/// differences and bounds the image range from the direct distance: an image
/// `n` with |n_k| > d0/h_k + 1 is farther than the direct vector.
pub fn oracle_min_image(s: &Structure, i: usize, j: usize) -> f64 {
    let m = s.lattice().matrix();
    let cart = |f: [f64; 3]| -> [f64; 3] {
        std::array::from_fn(|k| f[0] * m[0][k] + f[1] * m[1][k] + f[2] * m[2][k])
    };
    let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let cross = |u: [f64; 3], v: [f64; 3]| {
        [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
    };
    let vol = {
        let c = cross(m[1], m[2]);
        (m[0][0] * c[0] + m[0][1] * c[1] + m[0][2] * c[2]).abs()
    };
    let h = [
        vol / norm(cross(m[1], m[2])),
        vol / norm(cross(m[2], m[0])),
        vol / norm(cross(m[0], m[1])),
    ];
    let fi = s.sites()[i].frac;
    let fj = s.sites()[j].frac;
    let d: [f64; 3] = std::array::from_fn(|k| fj[k] - fi[k]);
    // Upper bound: the direct vector, or for i == j the shortest cell vector.
    let d0 = if i == j {
        norm(m[0]).min(norm(m[1])).min(norm(m[2]))
    } else {
        norm(cart(d))
    };
    let n: [i64; 3] = std::array::from_fn(|k| (d0 / h[k]).ceil() as i64 + 1);
    let mut best = f64::INFINITY;
    for x in -n[0]..=n[0] {
        for y in -n[1]..=n[1] {
            for z in -n[2]..=n[2] {
                if i == j && x == 0 && y == 0 && z == 0 {
                    continue;
                }
                let v = cart([d[0] + x as f64, d[1] + y as f64, d[2] + z as f64]);
                best = best.min(norm(v));
            }
        }
    }
    best
}

pub fn oracle_min_pair(s: &Structure) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..s.len() {
        for j in 0..s.len() {
            best = best.min(oracle_min_image(s, i, j));
        }
    }
    best
}

/// Periodic difference of two fractional coordinates.
pub fn frac_gap(a: f64, b: f64) -> f64 {
    let d = a - b;
    (d - d.round()).abs()
}

pub fn fcc(symbols: [&str; 4], a: f64) -> Structure {
    let fr = [[0.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]];
    let sites: Vec<(&str, [f64; 3])> = symbols.iter().copied().zip(fr).collect();
    structure(Lattice::cubic(a).unwrap(), &sites)
}

/// Four-layer Cu slab, three columns 2.5 Å apart, with CO on top of Cu5.
/// Site order: twelve Cu, then C, then O.
pub fn co_on_cu_slab() -> Structure {
    let lattice = Lattice::new(7.5, 10.0, 25.0, 90.0, 90.0, 90.0).unwrap();
    let columns = [
        (0.0, ["Cu2", "Cu1", "Cu3", "Cu10"]),
        (2.5, ["Cu5", "Cu4", "Cu6", "Cu11"]),
        (5.0, ["Cu8", "Cu7", "Cu9", "Cu12"]),
    ];
    let depths = [10.0, 7.9, 5.8, 3.7];
    let mut sites = Vec::new();
    for (layer, z) in depths.iter().enumerate() {
        for (x, labels) in &columns {
            sites.push(AtomSite::new(labels[layer], el("Cu"), [x / 7.5, 0.5, z / 25.0]));
        }
    }
    sites.push(AtomSite::new("C1", el("C"), [2.5 / 7.5, 0.5, 11.8 / 25.0]));
    sites.push(AtomSite::new("O1", el("O"), [2.5 / 7.5, 0.5, 12.95 / 25.0]));
    Structure::new(lattice, sites, SpaceGroup::default()).unwrap()
}

/// Top-layer indices of [`co_on_cu_slab`].
pub const SLAB_TOP: [usize; 3] = [0, 1, 2];
pub const SLAB_ADSORBATE: [usize; 2] = [12, 13];
