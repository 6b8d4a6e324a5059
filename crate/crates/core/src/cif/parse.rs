use std::collections::HashSet;

use serde::Serialize;

use super::document::{read_document, CifDocument, CifLoop, CifValue};
use super::{Defect, DefectCode};
use crate::elements::Element;
use crate::structure::{AtomSite, Lattice, SpaceGroup, Structure};

pub const DEFAULT_MAX_INPUT: usize = 1 << 20;

const CELL_TAGS: [&str; 6] = [
    "_cell_length_a",
    "_cell_length_b",
    "_cell_length_c",
    "_cell_angle_alpha",
    "_cell_angle_beta",
    "_cell_angle_gamma",
];
const SG_SYMBOL_TAGS: [&str; 2] = ["_symmetry_space_group_name_H-M", "_space_group_name_H-M_alt"];
const SG_NUMBER_TAGS: [&str; 2] = ["_symmetry_Int_Tables_number", "_space_group_IT_number"];
const LABEL: &str = "_atom_site_label";
const TYPE_SYMBOL: &str = "_atom_site_type_symbol";
const FRACT: [&str; 3] = ["_atom_site_fract_x", "_atom_site_fract_y", "_atom_site_fract_z"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// Inputs longer than this many bytes are rejected with a SYNTAX defect.
    pub max_input_bytes: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_input_bytes: DEFAULT_MAX_INPUT,
        }
    }
}

/// Field-completeness facts gathered while parsing; the validity score is
/// computed from these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ValidityFacts {
    pub space_group_present: bool,
    pub cell_tags_explicit: bool,
    pub site_columns_complete: bool,
    pub labels_unique: bool,
    pub loops_consistent: bool,
    /// Every fractional coordinate, as written, lies in [-0.5, 1.5).
    pub coords_in_soft_range: bool,
}

impl ValidityFacts {
    pub fn checks(&self) -> [(&'static str, bool); 6] {
        [
            ("space group present", self.space_group_present),
            ("all six cell parameters explicit", self.cell_tags_explicit),
            ("atom_site loop has label, type_symbol and fract columns", self.site_columns_complete),
            ("atom_site labels unique", self.labels_unique),
            ("loop row counts consistent", self.loops_consistent),
            ("fractional coordinates within [-0.5, 1.5)", self.coords_in_soft_range),
        ]
    }
}

/// Result of reading one CIF text. `structure` is present iff no fatal defect
/// was found.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub document: CifDocument,
    pub structure: Option<Structure>,
    pub defects: Vec<Defect>,
    pub validity: ValidityFacts,
}

impl ParseOutcome {
    pub fn is_success(&self) -> bool {
        self.structure.is_some()
    }

    pub fn has(&self, code: DefectCode) -> bool {
        self.defects.iter().any(|d| d.code == code)
    }

    pub fn fatal_defects(&self) -> impl Iterator<Item = &Defect> {
        self.defects.iter().filter(|d| d.code.is_fatal())
    }
}

/// Parses raw bytes; invalid UTF-8 is reported as a SYNTAX defect.
pub fn parse_cif_bytes(bytes: &[u8], opts: ParseOptions) -> ParseOutcome {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_cif_with(text, opts),
        Err(e) => {
            let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
            failed(Defect::new(DefectCode::Syntax, "input is not valid UTF-8", line))
        }
    }
}

pub fn parse_cif(text: &str) -> ParseOutcome {
    parse_cif_with(text, ParseOptions::default())
}

fn failed(defect: Defect) -> ParseOutcome {
    ParseOutcome {
        document: CifDocument::default(),
        structure: None,
        defects: vec![defect],
        validity: ValidityFacts::default(),
    }
}

/// Strips a trailing standard-uncertainty suffix such as `(5)` and parses a
/// finite number.
pub(crate) fn parse_number(raw: &str) -> Option<f64> {
    let s = raw.trim();
    let s = match s.find('(') {
        Some(open) => {
            let inner = s[open..].strip_prefix('(')?.strip_suffix(')')?;
            if inner.is_empty() || !inner.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            &s[..open]
        }
        None => s,
    };
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E')) {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn parse_cif_with(text: &str, opts: ParseOptions) -> ParseOutcome {
    if text.len() > opts.max_input_bytes {
        return failed(Defect::new(
            DefectCode::Syntax,
            format!("input of {} bytes exceeds the {} byte limit", text.len(), opts.max_input_bytes),
            1,
        ));
    }
    let mut defects = Vec::new();
    let document = read_document(text, &mut defects);
    let header_line = document.data_block_line.max(1);
    let mut validity = ValidityFacts {
        loops_consistent: !defects.iter().any(|d| d.code == DefectCode::InconsistentLoop),
        ..ValidityFacts::default()
    };

    let lattice = read_lattice(&document, header_line, &mut defects, &mut validity);
    let space_group = read_space_group(&document, header_line, &mut defects, &mut validity);
    let sites = read_sites(&document, header_line, &mut defects, &mut validity);

    let structure = if defects.iter().any(|d| d.code.is_fatal()) {
        None
    } else {
        match (lattice, sites) {
            (Some(lattice), Some(sites)) => match Structure::new(lattice, sites, space_group) {
                Ok(s) => Some(s),
                Err(e) => {
                    defects.push(Defect::new(DefectCode::BadNumber, e.to_string(), header_line));
                    None
                }
            },
            _ => None,
        }
    };
    defects.sort_by_key(|d| d.line);
    ParseOutcome {
        document,
        structure,
        defects,
        validity,
    }
}

fn read_lattice(
    doc: &CifDocument,
    header_line: usize,
    defects: &mut Vec<Defect>,
    validity: &mut ValidityFacts,
) -> Option<Lattice> {
    let mut values = [0.0; 6];
    let mut missing = Vec::new();
    let mut bad = false;
    for (slot, tag) in values.iter_mut().zip(CELL_TAGS) {
        match doc.scalar(tag) {
            None => missing.push(tag),
            Some(v) => match parse_number(&v.text).filter(|_| !v.is_placeholder()) {
                Some(x) => *slot = x,
                None => {
                    bad = true;
                    defects.push(Defect::new(
                        DefectCode::BadNumber,
                        format!("{tag} value {:?} is not a number", v.text),
                        v.line,
                    ));
                }
            },
        }
    }
    validity.cell_tags_explicit = missing.is_empty();
    if !missing.is_empty() {
        defects.push(Defect::new(
            DefectCode::MissingLattice,
            format!("missing cell parameters: {}", missing.join(", ")),
            header_line,
        ));
        return None;
    }
    if bad {
        return None;
    }
    let [a, b, c, alpha, beta, gamma] = values;
    match Lattice::new(a, b, c, alpha, beta, gamma) {
        Ok(l) => Some(l),
        Err(e) => {
            let line = doc
                .source_line_spans
                .iter()
                .find(|(t, _)| t.eq_ignore_ascii_case(CELL_TAGS[0]))
                .map(|(_, span)| span.0)
                .unwrap_or(header_line);
            defects.push(Defect::new(DefectCode::BadNumber, e.to_string(), line));
            None
        }
    }
}

fn first_scalar<'a>(doc: &'a CifDocument, tags: &[&str]) -> Option<&'a CifValue> {
    tags.iter().find_map(|t| doc.scalar(t)).filter(|v| !v.is_placeholder())
}

fn read_space_group(
    doc: &CifDocument,
    header_line: usize,
    defects: &mut Vec<Defect>,
    validity: &mut ValidityFacts,
) -> SpaceGroup {
    let symbol = first_scalar(doc, &SG_SYMBOL_TAGS)
        .map(|v| v.text.trim().to_string())
        .filter(|s| !s.is_empty());
    let number = first_scalar(doc, &SG_NUMBER_TAGS).and_then(|v| {
        let n = v.text.trim().parse::<u32>().ok().filter(|n| (1..=230).contains(n));
        if n.is_none() {
            defects.push(Defect::new(
                DefectCode::BadNumber,
                format!("space group number {:?} is not an integer in 1..=230", v.text),
                v.line,
            ));
        }
        n
    });
    let sg = SpaceGroup { symbol, number };
    validity.space_group_present = sg.is_present();
    if !sg.is_present() {
        defects.push(Defect::new(
            DefectCode::MissingSpaceGroup,
            "no space group symbol or number",
            header_line,
        ));
    }
    sg
}

/// The atom-site table as a loop; single-site files may give the items as scalars.
fn site_table(doc: &CifDocument) -> Option<CifLoop> {
    if let Some(l) = FRACT.iter().find_map(|t| doc.loop_with(t)) {
        return Some(l.clone());
    }
    let items: Vec<(String, CifValue)> = doc
        .scalars
        .iter()
        .filter(|(t, _)| t.to_ascii_lowercase().starts_with("_atom_site_"))
        .cloned()
        .collect();
    if items.is_empty() {
        return doc.loop_with(LABEL).or_else(|| doc.loop_with(TYPE_SYMBOL)).cloned();
    }
    let line = items[0].1.line;
    let (tags, row): (Vec<_>, Vec<_>) = items.into_iter().unzip();
    Some(CifLoop {
        tags,
        rows: vec![row],
        line,
    })
}

fn read_sites(
    doc: &CifDocument,
    header_line: usize,
    defects: &mut Vec<Defect>,
    validity: &mut ValidityFacts,
) -> Option<Vec<AtomSite>> {
    let Some(table) = site_table(doc) else {
        defects.push(Defect::new(DefectCode::EmptySites, "no atom_site table", header_line));
        return None;
    };
    let label_col = table.column(LABEL);
    let type_col = table.column(TYPE_SYMBOL);
    let fract_cols: Vec<Option<usize>> = FRACT.iter().map(|t| table.column(t)).collect();
    validity.site_columns_complete =
        label_col.is_some() && type_col.is_some() && fract_cols.iter().all(Option::is_some);

    let missing: Vec<&str> = FRACT
        .iter()
        .zip(&fract_cols)
        .filter(|(_, c)| c.is_none())
        .map(|(t, _)| *t)
        .collect();
    if !missing.is_empty() {
        defects.push(Defect::new(
            DefectCode::EmptySites,
            format!("atom_site table lacks {}", missing.join(", ")),
            table.line,
        ));
        return None;
    }
    if label_col.is_none() && type_col.is_none() {
        defects.push(Defect::new(
            DefectCode::EmptySites,
            "atom_site table has neither label nor type_symbol column",
            table.line,
        ));
        return None;
    }
    if table.rows.is_empty() {
        defects.push(Defect::new(DefectCode::EmptySites, "atom_site table has no rows", table.line));
        return None;
    }

    let fract_cols: Vec<usize> = fract_cols.into_iter().flatten().collect();
    let mut sites = Vec::with_capacity(table.rows.len());
    let mut ok = true;
    let mut in_range = true;
    let mut labels_seen = HashSet::new();
    validity.labels_unique = true;
    for (row_idx, row) in table.rows.iter().enumerate() {
        let line = row[0].line;
        let label_val = label_col.map(|c| &row[c]).filter(|v| !v.is_placeholder());
        let type_val = type_col.map(|c| &row[c]).filter(|v| !v.is_placeholder());
        let element = match (type_val, label_val) {
            (Some(t), _) => Element::from_cif_symbol(&t.text).ok_or_else(|| t.text.clone()),
            (None, Some(l)) => Element::from_cif_symbol(&l.text).ok_or_else(|| l.text.clone()),
            (None, None) => Err("?".to_string()),
        };
        let element = match element {
            Ok(e) => Some(e),
            Err(raw) => {
                ok = false;
                defects.push(Defect::new(
                    DefectCode::UnknownElement,
                    format!("cannot identify an element from {raw:?}"),
                    line,
                ));
                None
            }
        };
        let mut frac = [0.0; 3];
        for (k, &c) in fract_cols.iter().enumerate() {
            let v = &row[c];
            match parse_number(&v.text).filter(|_| !v.is_placeholder()) {
                Some(x) => {
                    frac[k] = x;
                    if !(-0.5..1.5).contains(&x) {
                        in_range = false;
                    }
                }
                None => {
                    ok = false;
                    defects.push(Defect::new(
                        DefectCode::BadNumber,
                        format!("{} value {:?} is not a number", FRACT[k], v.text),
                        v.line,
                    ));
                }
            }
        }
        let Some(element) = element else { continue };
        let label = label_val
            .map(|v| v.text.clone())
            .unwrap_or_else(|| format!("{}{}", element.symbol(), row_idx + 1));
        if !labels_seen.insert(label.clone()) {
            validity.labels_unique = false;
            defects.push(Defect::new(
                DefectCode::DuplicateLabel,
                format!("label {label} used more than once"),
                line,
            ));
        }
        sites.push(AtomSite::new(label, element, frac));
    }
    validity.coords_in_soft_range = in_range;
    ok.then_some(sites)
}
