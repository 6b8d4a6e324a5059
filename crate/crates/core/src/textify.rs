//! Three-part text description of an adsorbate–surface system:
//! adsorbate symbols, catalyst surface with Miller index, and the
//! primary/secondary interaction configuration.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elements::CovalentRadiusTable;
use crate::geometry::{build_neighbor_list, GeometryError, DEFAULT_BOND_SCALE};
use crate::structure::{hill_order, CompositionVector, RoleTag, Structure};

pub const DEFAULT_SEPARATOR: &str = "</s>";
pub const NO_CONTACT: &str = "no direct contact";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TextifyError {
    #[error("metadata index {index} out of range for {len} sites")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("site {0} is tagged both adsorbate and surface-top")]
    OverlappingRoles(usize),
    #[error("miller index (0 0 0) is not a plane")]
    ZeroMiller,
    #[error("no adsorbate atoms in metadata")]
    NoAdsorbate,
    #[error("catalyst composition is empty")]
    EmptyCatalyst,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Sidecar metadata for one adsorption system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemMetadata {
    #[serde(rename = "adsorbate")]
    pub adsorbate_site_indices: BTreeSet<usize>,
    #[serde(rename = "surface_top")]
    pub surface_top_indices: BTreeSet<usize>,
    pub catalyst_composition: CompositionVector,
    #[serde(rename = "miller")]
    pub miller_index: [i32; 3],
}

impl SystemMetadata {
    pub fn validate(&self, n_sites: usize) -> Result<(), TextifyError> {
        for &i in self.adsorbate_site_indices.iter().chain(&self.surface_top_indices) {
            if i >= n_sites {
                return Err(TextifyError::IndexOutOfRange { index: i, len: n_sites });
            }
        }
        if let Some(&i) = self.adsorbate_site_indices.intersection(&self.surface_top_indices).next() {
            return Err(TextifyError::OverlappingRoles(i));
        }
        if self.miller_index == [0, 0, 0] {
            return Err(TextifyError::ZeroMiller);
        }
        if self.adsorbate_site_indices.is_empty() {
            return Err(TextifyError::NoAdsorbate);
        }
        if self.catalyst_composition.is_empty() {
            return Err(TextifyError::EmptyCatalyst);
        }
        Ok(())
    }

    /// Copy of `s` with role tags set from this metadata; sites that are
    /// neither adsorbate nor surface-top become subsurface.
    pub fn tag(&self, s: &Structure) -> Structure {
        let roles: Vec<(usize, RoleTag)> = (0..s.len())
            .map(|i| {
                let role = if self.adsorbate_site_indices.contains(&i) {
                    RoleTag::Adsorbate
                } else if self.surface_top_indices.contains(&i) {
                    RoleTag::SurfaceTop
                } else {
                    RoleTag::Subsurface
                };
                (i, role)
            })
            .collect();
        s.with_roles(&roles)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct InteractionAtoms {
    pub primary: Vec<usize>,
    pub secondary: Vec<usize>,
}

/// Primary atoms are non-adsorbate sites bonded to an adsorbate atom;
/// secondary atoms are surface-top sites bonded to a primary atom that are
/// themselves neither adsorbate nor primary. Both lists are sorted by index.
pub fn find_interaction_atoms(
    s: &Structure,
    meta: &SystemMetadata,
    radii: &CovalentRadiusTable,
    scale: f64,
) -> Result<InteractionAtoms, TextifyError> {
    meta.validate(s.len())?;
    let nl = build_neighbor_list(s, radii, scale)?;
    let ads = &meta.adsorbate_site_indices;
    let primary: BTreeSet<usize> = ads
        .iter()
        .flat_map(|&a| nl.of(a).iter().map(|n| n.site))
        .filter(|j| !ads.contains(j))
        .collect();
    let secondary: BTreeSet<usize> = primary
        .iter()
        .flat_map(|&p| nl.of(p).iter().map(|n| n.site))
        .filter(|j| meta.surface_top_indices.contains(j) && !ads.contains(j) && !primary.contains(j))
        .collect();
    Ok(InteractionAtoms {
        primary: primary.into_iter().collect(),
        secondary: secondary.into_iter().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SystemText {
    pub adsorbate_part: String,
    pub surface_part: String,
    pub configuration_part: String,
    pub joined: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextifyConfig {
    pub separator: String,
    pub bond_scale: f64,
}

impl Default for TextifyConfig {
    fn default() -> Self {
        TextifyConfig {
            separator: DEFAULT_SEPARATOR.to_string(),
            bond_scale: DEFAULT_BOND_SCALE,
        }
    }
}

/// Compares labels with embedded numbers numerically ("Cu2" < "Cu10").
fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut x, mut y) = (a.chars().peekable(), b.chars().peekable());
    loop {
        match (x.peek().copied(), y.peek().copied()) {
            (None, None) => return a.cmp(b),
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(c), Some(d)) if c.is_ascii_digit() && d.is_ascii_digit() => {
                let take = |it: &mut std::iter::Peekable<std::str::Chars>| {
                    let mut s = String::new();
                    while let Some(c) = it.peek().copied().filter(char::is_ascii_digit) {
                        s.push(c);
                        it.next();
                    }
                    s
                };
                let (p, q) = (take(&mut x), take(&mut y));
                let (tp, tq) = (p.trim_start_matches('0'), q.trim_start_matches('0'));
                let ord = tp.len().cmp(&tq.len()).then_with(|| tp.cmp(tq));
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            (Some(c), Some(d)) => {
                if c != d {
                    return c.cmp(&d);
                }
                x.next();
                y.next();
            }
        }
    }
}

fn describe(s: &Structure, indices: &[usize]) -> String {
    let mut atoms: Vec<_> = indices.iter().map(|&i| &s.sites()[i]).collect();
    atoms.sort_by(|a, b| hill_order(&a.element, &b.element).then_with(|| natural_cmp(&a.label, &b.label)));
    atoms
        .iter()
        .map(|a| format!("{}@{}", a.element, a.label))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Renders the system as `adsorbate<sep>surface (h k l)<sep>configuration`,
/// e.g. `C O</s>Cu (1 1 1)</s>primary: Cu@Cu5; secondary: Cu@Cu2, Cu@Cu8`.
///
/// Within each part atoms are ordered by element (C, H, then alphabetical)
/// and label, so the text does not depend on site storage order.
pub fn to_system_text(
    s: &Structure,
    meta: &SystemMetadata,
    radii: &CovalentRadiusTable,
    cfg: &TextifyConfig,
) -> Result<SystemText, TextifyError> {
    let atoms = find_interaction_atoms(s, meta, radii, cfg.bond_scale)?;
    let mut ads: Vec<_> = meta.adsorbate_site_indices.iter().map(|&i| s.sites()[i].element).collect();
    ads.sort_by(hill_order);
    let adsorbate_part = ads.iter().map(|e| e.symbol()).collect::<Vec<_>>().join(" ");
    let [h, k, l] = meta.miller_index;
    let surface_part = format!("{} ({h} {k} {l})", meta.catalyst_composition.reduced_formula());
    let configuration_part = if atoms.primary.is_empty() {
        NO_CONTACT.to_string()
    } else {
        let secondary = if atoms.secondary.is_empty() {
            "none".to_string()
        } else {
            describe(s, &atoms.secondary)
        };
        format!("primary: {}; secondary: {}", describe(s, &atoms.primary), secondary)
    };
    let joined = [adsorbate_part.as_str(), &surface_part, &configuration_part].join(&cfg.separator);
    Ok(SystemText {
        adsorbate_part,
        surface_part,
        configuration_part,
        joined,
    })
}
