//! Crystal structures: lattice, sites and compositions.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elements::Element;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StructureError {
    #[error("cell length {name} = {value} must be positive and finite")]
    BadLength { name: &'static str, value: f64 },
    #[error("cell angle {name} = {value} must lie strictly between 0 and 180 degrees")]
    BadAngle { name: &'static str, value: f64 },
    #[error("cell angles ({alpha}, {beta}, {gamma}) do not describe a cell with positive volume")]
    ImpossibleAngles { alpha: f64, beta: f64, gamma: f64 },
    #[error("structure has no sites")]
    NoSites,
    #[error("fractional coordinate of site {0} is not finite")]
    NonFiniteCoordinate(String),
    #[error("space group number {0} outside 1..=230")]
    BadSpaceGroupNumber(u32),
}

/// Unit cell given by lengths (Å) and angles (degrees), with the derived
/// Cartesian cell matrix. Row `k` of the matrix is lattice vector `k`; `a` lies
/// along x and `b` in the xy-plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatticeParams", into = "LatticeParams")]
pub struct Lattice {
    params: LatticeParams,
    matrix: [Vec3; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl TryFrom<LatticeParams> for Lattice {
    type Error = StructureError;

    fn try_from(p: LatticeParams) -> Result<Self, Self::Error> {
        Lattice::new(p.a, p.b, p.c, p.alpha, p.beta, p.gamma)
    }
}

impl From<Lattice> for LatticeParams {
    fn from(l: Lattice) -> Self {
        l.params
    }
}

/// 1 - cos²α - cos²β - cos²γ + 2 cosα cosβ cosγ; the normalized metric determinant.
fn metric_determinant(alpha: f64, beta: f64, gamma: f64) -> f64 {
    let (ca, cb, cg) = (
        alpha.to_radians().cos(),
        beta.to_radians().cos(),
        gamma.to_radians().cos(),
    );
    1.0 - ca * ca - cb * cb - cg * cg + 2.0 * ca * cb * cg
}

impl Lattice {
    pub fn new(
        a: f64,
        b: f64,
        c: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
    ) -> Result<Self, StructureError> {
        for (name, value) in [("a", a), ("b", b), ("c", c)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(StructureError::BadLength { name, value });
            }
        }
        for (name, value) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !(value.is_finite() && value > 0.0 && value < 180.0) {
                return Err(StructureError::BadAngle { name, value });
            }
        }
        let det = metric_determinant(alpha, beta, gamma);
        if det.is_nan() || det <= 0.0 {
            return Err(StructureError::ImpossibleAngles { alpha, beta, gamma });
        }
        let (ca, cb) = (alpha.to_radians().cos(), beta.to_radians().cos());
        let (sg, cg) = gamma.to_radians().sin_cos();
        let cy = (ca - cb * cg) / sg;
        let cz = (1.0 - cb * cb - cy * cy).max(0.0).sqrt();
        let matrix = [
            [a, 0.0, 0.0],
            [b * cg, b * sg, 0.0],
            [c * cb, c * cy, c * cz],
        ];
        Ok(Lattice {
            params: LatticeParams { a, b, c, alpha, beta, gamma },
            matrix,
        })
    }

    pub fn cubic(a: f64) -> Result<Self, StructureError> {
        Lattice::new(a, a, a, 90.0, 90.0, 90.0)
    }

    /// Recovers lengths and angles from three lattice vectors (rows).
    pub fn from_matrix(m: [Vec3; 3]) -> Result<Self, StructureError> {
        let len = |v: &Vec3| dot(v, v).sqrt();
        let angle = |u: &Vec3, v: &Vec3| {
            (dot(u, v) / (len(u) * len(v))).clamp(-1.0, 1.0).acos().to_degrees()
        };
        Lattice::new(
            len(&m[0]),
            len(&m[1]),
            len(&m[2]),
            angle(&m[1], &m[2]),
            angle(&m[0], &m[2]),
            angle(&m[0], &m[1]),
        )
    }

    pub fn params(&self) -> LatticeParams {
        self.params
    }

    pub fn matrix(&self) -> &[Vec3; 3] {
        &self.matrix
    }

    /// Signed determinant of the cell matrix in Å³.
    pub fn volume(&self) -> f64 {
        dot(&self.matrix[0], &cross(&self.matrix[1], &self.matrix[2]))
    }

    /// Distance between adjacent lattice planes spanned by the other two
    /// vectors, for each of the three directions.
    pub fn plane_spacings(&self) -> Vec3 {
        let v = self.volume().abs();
        let m = &self.matrix;
        [
            v / norm(&cross(&m[1], &m[2])),
            v / norm(&cross(&m[2], &m[0])),
            v / norm(&cross(&m[0], &m[1])),
        ]
    }

    pub fn to_cartesian(&self, frac: &Vec3) -> Vec3 {
        let m = &self.matrix;
        let mut out = [0.0; 3];
        for (k, row) in m.iter().enumerate() {
            for d in 0..3 {
                out[d] += frac[k] * row[d];
            }
        }
        out
    }

    /// Same lattice with every length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, StructureError> {
        let p = self.params;
        Lattice::new(p.a * factor, p.b * factor, p.c * factor, p.alpha, p.beta, p.gamma)
    }
}

pub(crate) fn dot(u: &Vec3, v: &Vec3) -> f64 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

pub(crate) fn cross(u: &Vec3, v: &Vec3) -> Vec3 {
    [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ]
}

pub(crate) fn norm(u: &Vec3) -> f64 {
    dot(u, u).sqrt()
}

/// Wraps a fractional coordinate into [0, 1).
pub fn wrap_unit(x: f64) -> f64 {
    let w = x - x.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleTag {
    Adsorbate,
    SurfaceTop,
    Subsurface,
    #[default]
    Unspecified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSite {
    pub label: String,
    pub element: Element,
    /// Fractional coordinates, wrapped into [0, 1) once inside a [`Structure`].
    pub frac: Vec3,
    #[serde(default)]
    pub role: RoleTag,
}

impl AtomSite {
    pub fn new(label: impl Into<String>, element: Element, frac: Vec3) -> Self {
        AtomSite {
            label: label.into(),
            element,
            frac,
            role: RoleTag::Unspecified,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpaceGroup {
    pub symbol: Option<String>,
    pub number: Option<u32>,
}

impl SpaceGroup {
    pub fn is_present(&self) -> bool {
        self.symbol.is_some() || self.number.is_some()
    }
}

/// A periodic crystal: lattice plus a non-empty list of sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Structure {
    lattice: Lattice,
    sites: Vec<AtomSite>,
    #[serde(default)]
    space_group: SpaceGroup,
}

impl Structure {
    /// Builds a structure, wrapping every fractional coordinate into [0, 1).
    pub fn new(
        lattice: Lattice,
        sites: Vec<AtomSite>,
        space_group: SpaceGroup,
    ) -> Result<Self, StructureError> {
        if sites.is_empty() {
            return Err(StructureError::NoSites);
        }
        if let Some(n) = space_group.number {
            if !(1..=230).contains(&n) {
                return Err(StructureError::BadSpaceGroupNumber(n));
            }
        }
        let mut sites = sites;
        for site in &mut sites {
            if site.frac.iter().any(|x| !x.is_finite()) {
                return Err(StructureError::NonFiniteCoordinate(site.label.clone()));
            }
            site.frac = site.frac.map(wrap_unit);
        }
        Ok(Structure {
            lattice,
            sites,
            space_group,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn sites(&self) -> &[AtomSite] {
        &self.sites
    }

    pub fn space_group(&self) -> &SpaceGroup {
        &self.space_group
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn composition(&self) -> CompositionVector {
        composition_of(self)
    }

    pub fn cartesian(&self, i: usize) -> Vec3 {
        self.lattice.to_cartesian(&self.sites[i].frac)
    }

    /// Returns a copy with role tags assigned; indices out of range are ignored.
    pub fn with_roles(&self, roles: &[(usize, RoleTag)]) -> Structure {
        let mut out = self.clone();
        for &(i, role) in roles {
            if let Some(site) = out.sites.get_mut(i) {
                site.role = role;
            }
        }
        out
    }
}

/// Element → count. Zero counts are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CompositionVector(BTreeMap<Element, u32>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse formula {formula:?}: {reason}")]
pub struct FormulaError {
    pub formula: String,
    pub reason: String,
}

impl CompositionVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, element: Element, count: u32) {
        if count > 0 {
            *self.0.entry(element).or_insert(0) += count;
        }
    }

    pub fn get(&self, element: Element) -> u32 {
        self.0.get(&element).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().map(|&c| c as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Element, u32)> + '_ {
        self.0.iter().map(|(e, c)| (*e, *c))
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        self.0.keys().copied()
    }

    /// Parses compact formulas such as `"Cu4O"` or `"C O2"`. Repeated elements
    /// accumulate.
    pub fn parse_formula(formula: &str) -> Result<Self, FormulaError> {
        let err = |reason: &str| FormulaError {
            formula: formula.to_string(),
            reason: reason.to_string(),
        };
        let chars: Vec<char> = formula.chars().collect();
        let mut out = CompositionVector::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if !c.is_ascii_uppercase() {
                return Err(err(&format!("unexpected character {c:?}")));
            }
            let mut symbol = c.to_string();
            i += 1;
            while i < chars.len() && chars[i].is_ascii_lowercase() {
                symbol.push(chars[i]);
                i += 1;
            }
            let element =
                Element::from_symbol(&symbol).ok_or_else(|| err(&format!("unknown element {symbol}")))?;
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let count = if start == i {
                1
            } else {
                chars[start..i]
                    .iter()
                    .collect::<String>()
                    .parse::<u32>()
                    .map_err(|_| err("count out of range"))?
            };
            if count == 0 {
                return Err(err(&format!("zero count for {symbol}")));
            }
            out.add(element, count);
        }
        if out.is_empty() {
            return Err(err("empty formula"));
        }
        Ok(out)
    }

    /// Formula with counts divided by their greatest common divisor, in
    /// [`hill_order`]; unit counts are omitted (`{Cu:12}` → `"Cu"`).
    pub fn reduced_formula(&self) -> String {
        let g = self.0.values().fold(0u32, |acc, &c| gcd(acc, c)).max(1);
        let mut elements: Vec<Element> = self.elements().collect();
        elements.sort_by(hill_order);
        elements
            .into_iter()
            .map(|e| {
                let n = self.get(e) / g;
                if n == 1 {
                    e.symbol().to_string()
                } else {
                    format!("{}{}", e.symbol(), n)
                }
            })
            .collect()
    }
}

impl FromIterator<(Element, u32)> for CompositionVector {
    fn from_iter<I: IntoIterator<Item = (Element, u32)>>(iter: I) -> Self {
        let mut out = CompositionVector::new();
        for (e, c) in iter {
            out.add(e, c);
        }
        out
    }
}

impl fmt::Display for CompositionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut elements: Vec<Element> = self.elements().collect();
        elements.sort_by(hill_order);
        for e in elements {
            let n = self.get(e);
            if n == 1 {
                write!(f, "{e}")?;
            } else {
                write!(f, "{e}{n}")?;
            }
        }
        Ok(())
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// C first, H second, everything else alphabetically by symbol.
pub fn hill_order(a: &Element, b: &Element) -> std::cmp::Ordering {
    let rank = |e: &Element| match e.symbol() {
        "C" => 0,
        "H" => 1,
        _ => 2,
    };
    rank(a).cmp(&rank(b)).then_with(|| a.symbol().cmp(b.symbol()))
}

/// Element counts of a structure.
pub fn composition_of(s: &Structure) -> CompositionVector {
    s.sites().iter().map(|site| (site.element, 1)).collect()
}
