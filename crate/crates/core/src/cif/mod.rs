//! CIF reading and writing for the subset used by generated structures.
//!
//! Supported items: the data block header, the six `_cell_*` parameters,
//! `_symmetry_space_group_name_H-M` (alias `_space_group_name_H-M_alt`), the
//! space group number (`_symmetry_Int_Tables_number` / `_space_group_IT_number`)
//! and the `_atom_site_{label,type_symbol,fract_x,fract_y,fract_z}` table.
//! Every other tag is kept in [`CifDocument`] and otherwise ignored.

mod document;
mod parse;
mod write;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use document::{CifDocument, CifLoop, CifValue};
pub use parse::{parse_cif, parse_cif_bytes, ParseOptions, ParseOutcome, ValidityFacts, DEFAULT_MAX_INPUT};
pub use write::serialize_cif;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DefectCode {
    Syntax,
    MissingLattice,
    BadNumber,
    UnknownElement,
    EmptySites,
    MissingSpaceGroup,
    DuplicateLabel,
    InconsistentLoop,
}

impl DefectCode {
    /// Fatal defects prevent a structure from being built.
    pub fn is_fatal(self) -> bool {
        !matches!(self, DefectCode::MissingSpaceGroup | DefectCode::DuplicateLabel)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DefectCode::Syntax => "SYNTAX",
            DefectCode::MissingLattice => "MISSING_LATTICE",
            DefectCode::BadNumber => "BAD_NUMBER",
            DefectCode::UnknownElement => "UNKNOWN_ELEMENT",
            DefectCode::EmptySites => "EMPTY_SITES",
            DefectCode::MissingSpaceGroup => "MISSING_SPACE_GROUP",
            DefectCode::DuplicateLabel => "DUPLICATE_LABEL",
            DefectCode::InconsistentLoop => "INCONSISTENT_LOOP",
        }
    }
}

impl fmt::Display for DefectCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One problem found in a CIF, with its 1-based line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Defect {
    pub code: DefectCode,
    pub message: String,
    pub line: usize,
}

impl Defect {
    pub fn new(code: DefectCode, message: impl Into<String>, line: usize) -> Self {
        Defect {
            code,
            message: message.into(),
            line,
        }
    }
}

/// Renders defects as line-delimited JSON, one `{code, message, line}` object per line.
pub fn defects_to_jsonl(defects: &[Defect]) -> String {
    let mut out = String::new();
    for d in defects {
        out.push_str(&serde_json::to_string(d).expect("defect serializes"));
        out.push('\n');
    }
    out
}
