//! Tokenizer and raw key/value + loop representation of CIF text.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{Defect, DefectCode};

/// One raw value as written in the file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CifValue {
    pub text: String,
    /// Quoted and text-field values are never treated as `?` / `.` placeholders.
    pub quoted: bool,
    pub line: usize,
}

impl CifValue {
    /// True for the bare `?` (unknown) and `.` (inapplicable) markers.
    pub fn is_placeholder(&self) -> bool {
        !self.quoted && (self.text == "?" || self.text == ".")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CifLoop {
    pub tags: Vec<String>,
    pub rows: Vec<Vec<CifValue>>,
    pub line: usize,
}

impl CifLoop {
    pub fn column(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t.eq_ignore_ascii_case(tag))
    }
}

/// A parsed data block. Tag lookups are case-insensitive; the original
/// spelling is kept.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct CifDocument {
    pub data_block_name: Option<String>,
    pub data_block_line: usize,
    /// Scalar items in file order.
    pub scalars: Vec<(String, CifValue)>,
    pub loops: Vec<CifLoop>,
    /// Tag → (first line, last line).
    pub source_line_spans: BTreeMap<String, (usize, usize)>,
}

impl CifDocument {
    pub fn scalar(&self, tag: &str) -> Option<&CifValue> {
        self.scalars
            .iter()
            .find(|(t, _)| t.eq_ignore_ascii_case(tag))
            .map(|(_, v)| v)
    }

    /// First loop carrying `tag` as a column.
    pub fn loop_with(&self, tag: &str) -> Option<&CifLoop> {
        self.loops.iter().find(|l| l.column(tag).is_some())
    }

    fn has_tag(&self, tag: &str) -> bool {
        self.scalar(tag).is_some() || self.loop_with(tag).is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    DataHeader(String),
    Loop,
    Tag(String),
    Value(CifValue),
    /// `global_`, `save_`, `stop_`: reserved words outside the supported subset.
    Reserved(String),
}

#[derive(Debug, Clone)]
struct Spanned {
    token: Token,
    line: usize,
}

fn is_ws(c: char) -> bool {
    c == ' ' || c == '\t'
}

fn tokenize(text: &str, defects: &mut Vec<Defect>) -> Vec<Spanned> {
    let lines: Vec<&str> = text.lines().collect();
    let mut tokens = Vec::new();
    let mut idx = 0;
    while idx < lines.len() {
        let line_no = idx + 1;
        let line = lines[idx];
        if let Some(first) = line.strip_prefix(';') {
            // Text field runs until the next line starting with ';'.
            let mut body = vec![first];
            let mut end = None;
            for (j, l) in lines.iter().enumerate().skip(idx + 1) {
                if l.starts_with(';') {
                    end = Some(j);
                    break;
                }
                body.push(l);
            }
            match end {
                Some(j) => {
                    tokens.push(Spanned {
                        token: Token::Value(CifValue {
                            text: body.join("\n").trim().to_string(),
                            quoted: true,
                            line: line_no,
                        }),
                        line: line_no,
                    });
                    // Anything after the closing ';' on the same line is tokenized normally.
                    let rest = &lines[j][1..];
                    tokenize_line(rest, j + 1, &mut tokens, defects);
                    idx = j + 1;
                }
                None => {
                    defects.push(Defect::new(
                        DefectCode::Syntax,
                        "unterminated semicolon text field",
                        line_no,
                    ));
                    idx = lines.len();
                }
            }
            continue;
        }
        tokenize_line(line, line_no, &mut tokens, defects);
        idx += 1;
    }
    tokens
}

fn tokenize_line(line: &str, line_no: usize, tokens: &mut Vec<Spanned>, defects: &mut Vec<Defect>) {
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if is_ws(c) || c == '\r' {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        if c == '\'' || c == '"' {
            // Closing quote must be followed by whitespace or end of line.
            let mut j = i + 1;
            let mut close = None;
            while j < chars.len() {
                if chars[j] == c && (j + 1 == chars.len() || is_ws(chars[j + 1]) || chars[j + 1] == '\r') {
                    close = Some(j);
                    break;
                }
                j += 1;
            }
            match close {
                Some(j) => {
                    tokens.push(Spanned {
                        token: Token::Value(CifValue {
                            text: chars[i + 1..j].iter().collect(),
                            quoted: true,
                            line: line_no,
                        }),
                        line: line_no,
                    });
                    i = j + 1;
                }
                None => {
                    defects.push(Defect::new(
                        DefectCode::Syntax,
                        format!("unterminated {c} quote"),
                        line_no,
                    ));
                    return;
                }
            }
            continue;
        }
        let start = i;
        while i < chars.len() && !is_ws(chars[i]) && chars[i] != '\r' {
            i += 1;
        }
        let word: String = chars[start..i].iter().collect();
        let lower = word.to_ascii_lowercase();
        let token = if lower.starts_with("data_") {
            Token::DataHeader(word[5..].to_string())
        } else if lower == "loop_" {
            Token::Loop
        } else if lower.starts_with("global_") || lower.starts_with("save_") || lower.starts_with("stop_") {
            Token::Reserved(word)
        } else if word.starts_with('_') {
            Token::Tag(word)
        } else {
            Token::Value(CifValue {
                text: word,
                quoted: false,
                line: line_no,
            })
        };
        tokens.push(Spanned { token, line: line_no });
    }
}

/// Tokenizes `text` and assembles the first data block. Never fails; every
/// malformation is appended to `defects`.
pub fn read_document(text: &str, defects: &mut Vec<Defect>) -> CifDocument {
    let tokens = tokenize(text, defects);
    let mut doc = CifDocument::default();
    let mut seen_header = false;
    let mut reported_preamble = false;
    let mut i = 0;

    let record_span = |doc: &mut CifDocument, tag: &str, first: usize, last: usize| {
        doc.source_line_spans.insert(tag.to_string(), (first, last));
    };

    while i < tokens.len() {
        let Spanned { token, line } = &tokens[i];
        let line = *line;
        if !seen_header {
            if let Token::DataHeader(name) = token {
                seen_header = true;
                doc.data_block_line = line;
                if name.is_empty() {
                    defects.push(Defect::new(DefectCode::Syntax, "data block header has no name", line));
                }
                doc.data_block_name = Some(name.clone());
            } else if !reported_preamble {
                reported_preamble = true;
                defects.push(Defect::new(
                    DefectCode::Syntax,
                    "content before the data block header",
                    line,
                ));
            }
            i += 1;
            continue;
        }
        match token {
            // Only the first data block is read.
            Token::DataHeader(_) => break,
            Token::Reserved(word) => {
                defects.push(Defect::new(
                    DefectCode::Syntax,
                    format!("unsupported reserved word {word}"),
                    line,
                ));
                i += 1;
            }
            Token::Value(v) => {
                defects.push(Defect::new(
                    DefectCode::Syntax,
                    format!("value {:?} has no tag", v.text),
                    line,
                ));
                i += 1;
            }
            Token::Tag(tag) => {
                match tokens.get(i + 1).map(|t| &t.token) {
                    Some(Token::Value(v)) => {
                        if doc.has_tag(tag) {
                            defects.push(Defect::new(
                                DefectCode::Syntax,
                                format!("duplicate tag {tag}"),
                                line,
                            ));
                        } else {
                            record_span(&mut doc, tag, line, v.line);
                            doc.scalars.push((tag.clone(), v.clone()));
                        }
                        i += 2;
                    }
                    _ => {
                        defects.push(Defect::new(
                            DefectCode::Syntax,
                            format!("tag {tag} has no value"),
                            line,
                        ));
                        i += 1;
                    }
                }
            }
            Token::Loop => {
                let loop_line = line;
                i += 1;
                let mut tags: Vec<(String, usize)> = Vec::new();
                while let Some(Spanned { token: Token::Tag(t), line }) = tokens.get(i) {
                    tags.push((t.clone(), *line));
                    i += 1;
                }
                let mut values: Vec<CifValue> = Vec::new();
                while let Some(Spanned { token: Token::Value(v), .. }) = tokens.get(i) {
                    values.push(v.clone());
                    i += 1;
                }
                if tags.is_empty() {
                    defects.push(Defect::new(DefectCode::Syntax, "loop_ without column tags", loop_line));
                    continue;
                }
                let ncols = tags.len();
                if !values.len().is_multiple_of(ncols) {
                    let bad_line = values
                        .get(values.len() - values.len() % ncols)
                        .map(|v| v.line)
                        .unwrap_or(loop_line);
                    defects.push(Defect::new(
                        DefectCode::InconsistentLoop,
                        format!(
                            "loop with {ncols} columns holds {} values (not a multiple)",
                            values.len()
                        ),
                        bad_line,
                    ));
                    values.truncate(values.len() - values.len() % ncols);
                }
                let last_line = values.last().map(|v| v.line);
                let mut dup = false;
                for (t, tl) in &tags {
                    let repeated = tags.iter().filter(|(o, _)| o.eq_ignore_ascii_case(t)).count() > 1;
                    if doc.has_tag(t) || repeated {
                        dup = true;
                        defects.push(Defect::new(DefectCode::Syntax, format!("duplicate tag {t}"), *tl));
                    }
                }
                if dup {
                    continue;
                }
                for (t, tl) in &tags {
                    record_span(&mut doc, t, *tl, last_line.unwrap_or(*tl));
                }
                let rows = values.chunks(ncols).map(|r| r.to_vec()).collect();
                doc.loops.push(CifLoop {
                    tags: tags.into_iter().map(|(t, _)| t).collect(),
                    rows,
                    line: loop_line,
                });
            }
        }
    }
    if !seen_header {
        defects.push(Defect::new(DefectCode::Syntax, "no data block header", 1));
    }
    doc
}
