use std::fmt::Write;

use crate::structure::Structure;

const DECIMALS: usize = 9;

fn fixed(x: f64) -> String {
    format!("{x:.DECIMALS$}")
}

/// Fractional coordinate printed so that it re-parses inside [0, 1).
fn fixed_frac(x: f64) -> String {
    let s = fixed(x);
    if s.parse::<f64>().is_ok_and(|v| v >= 1.0) || s.starts_with('-') {
        fixed(0.0)
    } else {
        s
    }
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || s.chars().any(char::is_whitespace)
        || s.starts_with(['_', '#', '$', '\'', '"', ';', '[', ']'])
        || s == "?"
        || s == "."
        || {
            let lower = s.to_ascii_lowercase();
            lower.starts_with("data_")
                || lower == "loop_"
                || lower.starts_with("save_")
                || lower.starts_with("global_")
                || lower.starts_with("stop_")
        }
}

fn quoted(s: &str) -> String {
    if !needs_quotes(s) {
        s.to_string()
    } else if s.contains("' ") || s.ends_with('\'') {
        format!("\"{s}\"")
    } else {
        format!("'{s}'")
    }
}

/// Writes a structure as CIF: cell block, symmetry block, then the atom-site
/// loop. Numbers carry nine decimals. Structures without a space group are
/// written as `P 1`, which is exact since every site is listed explicitly.
pub fn serialize_cif(s: &Structure) -> String {
    let mut out = String::new();
    let name: String = s
        .composition()
        .to_string()
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect();
    let p = s.lattice().params();
    let _ = writeln!(out, "data_{name}");
    for (tag, v) in [
        ("_cell_length_a", p.a),
        ("_cell_length_b", p.b),
        ("_cell_length_c", p.c),
        ("_cell_angle_alpha", p.alpha),
        ("_cell_angle_beta", p.beta),
        ("_cell_angle_gamma", p.gamma),
    ] {
        let _ = writeln!(out, "{tag:<34}{}", fixed(v));
    }
    let sg = s.space_group();
    match (&sg.symbol, sg.number) {
        (None, None) => {
            let _ = writeln!(out, "{:<34}'P 1'", "_symmetry_space_group_name_H-M");
            let _ = writeln!(out, "{:<34}1", "_symmetry_Int_Tables_number");
        }
        (symbol, number) => {
            if let Some(symbol) = symbol {
                let _ = writeln!(out, "{:<34}{}", "_symmetry_space_group_name_H-M", quoted_always(symbol));
            }
            if let Some(n) = number {
                let _ = writeln!(out, "{:<34}{n}", "_symmetry_Int_Tables_number");
            }
        }
    }
    out.push_str("loop_\n_atom_site_label\n_atom_site_type_symbol\n_atom_site_fract_x\n_atom_site_fract_y\n_atom_site_fract_z\n");
    for site in s.sites() {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            quoted(&site.label),
            site.element.symbol(),
            fixed_frac(site.frac[0]),
            fixed_frac(site.frac[1]),
            fixed_frac(site.frac[2]),
        );
    }
    out
}

fn quoted_always(s: &str) -> String {
    if s.contains("' ") || s.ends_with('\'') {
        format!("\"{s}\"")
    } else {
        format!("'{s}'")
    }
}
