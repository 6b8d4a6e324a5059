//! Structure-level machinery for a catalyst property-prediction and
//! inverse-design loop: CIF I/O, periodic geometry, the parse/valid/
//! composition/physical reward, group-relative policy math, structure-to-text
//! conversion and the exemplar-pool search.

pub mod cif;
pub mod config;
pub mod elements;
pub mod geometry;
pub mod policy;
pub mod reward;
pub mod search;
pub mod structure;
pub mod textify;

pub use cif::{parse_cif, parse_cif_bytes, serialize_cif, Defect, DefectCode, ParseOptions, ParseOutcome};
pub use elements::{CovalentRadiusTable, Element};
pub use structure::{composition_of, AtomSite, CompositionVector, Lattice, RoleTag, SpaceGroup, Structure};
