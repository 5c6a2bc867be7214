//! CPLEX LP text format.
//!
//! Every column is written to the `Bounds` section with explicit bounds, and
//! integer columns are listed under `Generals`, so a fixed 0-1 column reads
//! back with the same bounds in any compliant reader.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::model::{MilpModel, RowSense, VarKind, Variable};
use super::ParseError;

const TERMS_PER_LINE: usize = 6;

/// Shortest text that parses back to the same `f64`.
pub(crate) fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (String, f64)>) {
    for (k, (name, a)) in terms.enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n  ");
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        let mag = a.abs();
        if mag == 1.0 {
            let _ = write!(out, " {sign} {name}");
        } else {
            let _ = write!(out, " {sign} {} {name}", format_number(mag));
        }
    }
}

pub fn write_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", model.name);
    out.push_str("Minimize\n obj:");
    write_terms(
        &mut out,
        model.variables.iter().filter(|v| v.objective != 0.0).map(|v| (v.name.clone(), v.objective)),
    );
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", c.name);
        if c.terms.is_empty() {
            if let Some(v) = model.variables.first() {
                let _ = write!(out, " 0 {}", v.name);
            }
        }
        write_terms(&mut out, c.terms.iter().map(|&(j, a)| (model.variables[j].name.clone(), a)));
        let _ = writeln!(out, " {} {}", c.sense.symbol(), format_number(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        let _ = match (v.lower.is_finite(), v.upper.is_finite()) {
            _ if v.lower == v.upper => writeln!(out, " {} = {}", v.name, format_number(v.lower)),
            (true, true) => {
                writeln!(out, " {} <= {} <= {}", format_number(v.lower), v.name, format_number(v.upper))
            }
            (true, false) => writeln!(out, " {} >= {}", v.name, format_number(v.lower)),
            (false, true) => writeln!(out, " -inf <= {} <= {}", v.name, format_number(v.upper)),
            (false, false) => writeln!(out, " {} free", v.name),
        };
    }
    let integers: Vec<&str> =
        model.variables.iter().filter(|v| v.kind == VarKind::Integer).map(|v| v.name.as_str()).collect();
    if !integers.is_empty() {
        out.push_str("Generals\n");
        for chunk in integers.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Colon,
    Sense(RowSense),
}

fn tokenize(text: &str, line: usize) -> Result<Vec<Tok>, ParseError> {
    let err = |msg: String| ParseError::Syntax { line, message: msg };
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        match c {
            c if c.is_whitespace() => k += 1,
            '+' => {
                toks.push(Tok::Plus);
                k += 1;
            }
            '-' => {
                toks.push(Tok::Minus);
                k += 1;
            }
            ':' => {
                toks.push(Tok::Colon);
                k += 1;
            }
            '<' | '>' | '=' => {
                let next = chars.get(k + 1).copied();
                let (sense, len) = match (c, next) {
                    ('<', Some('=')) | ('=', Some('<')) => (RowSense::Le, 2),
                    ('>', Some('=')) | ('=', Some('>')) => (RowSense::Ge, 2),
                    ('<', _) => (RowSense::Le, 1),
                    ('>', _) => (RowSense::Ge, 1),
                    _ => (RowSense::Eq, 1),
                };
                toks.push(Tok::Sense(sense));
                k += len;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = k;
                while k < chars.len() && (chars[k].is_ascii_digit() || chars[k] == '.') {
                    k += 1;
                }
                if k < chars.len() && (chars[k] == 'e' || chars[k] == 'E') {
                    let mut j = k + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        k = j;
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                    }
                }
                let s: String = chars[start..k].iter().collect();
                toks.push(Tok::Num(s.parse().map_err(|_| err(format!("bad number {s:?}")))?));
            }
            _ => {
                let start = k;
                while k < chars.len() && !chars[k].is_whitespace() && !"+-:<>=".contains(chars[k]) {
                    k += 1;
                }
                toks.push(Tok::Ident(chars[start..k].iter().collect()));
            }
        }
    }
    Ok(toks)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Generals,
    Binaries,
    End,
}

fn section_header(line: &str) -> Option<Section> {
    let lower = line.trim().to_ascii_lowercase();
    let s = match lower.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Section::Objective,
        "subject to" | "such that" | "st" | "s.t." | "st." => Section::Constraints,
        "bounds" | "bound" => Section::Bounds,
        "generals" | "general" | "gen" | "integers" => Section::Generals,
        "binaries" | "binary" | "bin" => Section::Binaries,
        "end" => Section::End,
        _ => return None,
    };
    Some(s)
}

struct Builder {
    model: MilpModel,
    names: HashMap<String, usize>,
}

impl Builder {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&j) = self.names.get(name) {
            return j;
        }
        let j = self
            .model
            .add_variable(Variable {
                name: name.to_string(),
                kind: VarKind::Continuous,
                lower: 0.0,
                upper: f64::INFINITY,
                objective: 0.0,
            })
            .expect("fresh name");
        self.names.insert(name.to_string(), j);
        j
    }
}

fn is_inf(name: &str) -> bool {
    matches!(name.to_ascii_lowercase().as_str(), "inf" | "infinity")
}

/// Parse `[+|-] [coef] name` terms until a sense token or the end.
fn parse_terms(toks: &[Tok], pos: &mut usize, line: usize) -> Result<Vec<(String, f64)>, ParseError> {
    let mut terms = Vec::new();
    while *pos < toks.len() && !matches!(toks[*pos], Tok::Sense(_)) {
        let mut sign = 1.0;
        let mut coef = None;
        loop {
            match toks.get(*pos) {
                Some(Tok::Plus) => *pos += 1,
                Some(Tok::Minus) => {
                    sign = -sign;
                    *pos += 1;
                }
                _ => break,
            }
        }
        if let Some(Tok::Num(v)) = toks.get(*pos) {
            coef = Some(*v);
            *pos += 1;
        }
        match toks.get(*pos) {
            Some(Tok::Ident(name)) => {
                terms.push((name.clone(), sign * coef.unwrap_or(1.0)));
                *pos += 1;
            }
            other => {
                return Err(ParseError::Syntax {
                    line,
                    message: format!("expected a variable name, found {other:?}"),
                })
            }
        }
    }
    Ok(terms)
}

fn signed_value(toks: &[Tok], pos: &mut usize, line: usize) -> Result<f64, ParseError> {
    let mut sign = 1.0;
    loop {
        match toks.get(*pos) {
            Some(Tok::Plus) => *pos += 1,
            Some(Tok::Minus) => {
                sign = -sign;
                *pos += 1;
            }
            _ => break,
        }
    }
    let v = match toks.get(*pos) {
        Some(Tok::Num(v)) => *v,
        Some(Tok::Ident(s)) if is_inf(s) => f64::INFINITY,
        other => return Err(ParseError::Syntax { line, message: format!("expected a number, found {other:?}") }),
    };
    *pos += 1;
    Ok(sign * v)
}

fn merge(builder: &mut Builder, terms: Vec<(String, f64)>) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (name, a) in terms {
        let j = builder.var(&name);
        match out.iter_mut().find(|(k, _)| *k == j) {
            Some(slot) => slot.1 += a,
            None => out.push((j, a)),
        }
    }
    out
}

pub fn parse_lp(text: &str) -> Result<MilpModel, ParseError> {
    let mut builder = Builder { model: MilpModel::new(""), names: HashMap::new() };
    let mut section = Section::Preamble;
    // Objective and constraint text may span lines; collect it with line numbers.
    let mut objective: Vec<(usize, String)> = Vec::new();
    let mut constraints: Vec<(usize, String)> = Vec::new();
    let mut bounds: Vec<(usize, String)> = Vec::new();
    let mut integer_lines: Vec<(usize, String, bool)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('\\') {
            Some(k) => {
                if idx == 0 && builder.model.name.is_empty() {
                    builder.model.name = raw[k + 1..].trim().to_string();
                }
                &raw[..k]
            }
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        if let Some(s) = section_header(line) {
            section = s;
            continue;
        }
        let lower = line.trim().to_ascii_lowercase();
        if lower.starts_with("maximize") || lower.starts_with("maximise") || lower == "max" {
            return Err(ParseError::Unsupported("maximisation".into()));
        }
        match section {
            Section::Preamble => {
                return Err(ParseError::Syntax { line: line_no, message: "content before the objective".into() })
            }
            Section::Objective => objective.push((line_no, line.to_string())),
            Section::Constraints => constraints.push((line_no, line.to_string())),
            Section::Bounds => bounds.push((line_no, line.to_string())),
            Section::Generals => integer_lines.push((line_no, line.to_string(), false)),
            Section::Binaries => integer_lines.push((line_no, line.to_string(), true)),
            Section::End => {
                return Err(ParseError::Syntax { line: line_no, message: "content after End".into() })
            }
        }
    }
    if section != Section::End {
        return Err(ParseError::Syntax { line: text.lines().count(), message: "missing End".into() });
    }

    // Objective.
    let first_line = objective.first().map_or(0, |l| l.0);
    let joined: String = objective.iter().map(|(_, l)| l.as_str()).collect::<Vec<_>>().join(" ");
    let toks = tokenize(&joined, first_line)?;
    let mut pos = 0;
    if let (Some(Tok::Ident(_)), Some(Tok::Colon)) = (toks.first(), toks.get(1)) {
        pos = 2;
    }
    let terms = parse_terms(&toks, &mut pos, first_line)?;
    if pos != toks.len() {
        return Err(ParseError::Syntax { line: first_line, message: "constant or relation in objective".into() });
    }
    for (j, a) in merge(&mut builder, terms) {
        builder.model.variables[j].objective += a;
    }

    // Constraints: a row ends at the value after its relation.
    let mut toks = Vec::new();
    let mut tok_lines = Vec::new();
    for (line_no, line) in &constraints {
        for t in tokenize(line, *line_no)? {
            toks.push(t);
            tok_lines.push(*line_no);
        }
    }
    let mut pos = 0;
    let mut unnamed = 0;
    while pos < toks.len() {
        let line = tok_lines[pos];
        let name = match (&toks[pos], toks.get(pos + 1)) {
            (Tok::Ident(name), Some(Tok::Colon)) => {
                pos += 2;
                name.clone()
            }
            _ => {
                unnamed += 1;
                format!("R{unnamed}")
            }
        };
        let terms = parse_terms(&toks, &mut pos, line)?;
        let sense = match toks.get(pos) {
            Some(Tok::Sense(s)) => *s,
            _ => return Err(ParseError::Syntax { line, message: format!("row {name} has no relation") }),
        };
        pos += 1;
        let rhs = signed_value(&toks, &mut pos, line)?;
        let terms = merge(&mut builder, terms);
        builder.model.add_row(name, terms, sense, rhs);
    }

    for (line_no, line) in &bounds {
        let line_no = *line_no;
        let toks = tokenize(line, line_no)?;
        let bad = || ParseError::Syntax { line: line_no, message: format!("unrecognised bound {:?}", line.trim()) };
        match toks.as_slice() {
            [Tok::Ident(name), Tok::Ident(kw)] if kw.eq_ignore_ascii_case("free") => {
                let j = builder.var(name);
                builder.model.variables[j].lower = f64::NEG_INFINITY;
                builder.model.variables[j].upper = f64::INFINITY;
            }
            [Tok::Ident(name), Tok::Sense(sense), ..] if !is_inf(name) => {
                let mut pos = 2;
                let v = signed_value(&toks, &mut pos, line_no)?;
                if pos != toks.len() {
                    return Err(bad());
                }
                let j = builder.var(name);
                let var = &mut builder.model.variables[j];
                match sense {
                    RowSense::Le => var.upper = v,
                    RowSense::Ge => var.lower = v,
                    RowSense::Eq => {
                        var.lower = v;
                        var.upper = v;
                    }
                }
            }
            _ => {
                let mut pos = 0;
                let lo = signed_value(&toks, &mut pos, line_no)?;
                let (Some(Tok::Sense(s1)), Some(Tok::Ident(name))) = (toks.get(pos), toks.get(pos + 1)) else {
                    return Err(bad());
                };
                let (s1, name) = (*s1, name.clone());
                pos += 2;
                let j = builder.var(&name);
                let hi = if pos < toks.len() {
                    let Some(Tok::Sense(RowSense::Le)) = toks.get(pos) else { return Err(bad()) };
                    pos += 1;
                    Some(signed_value(&toks, &mut pos, line_no)?)
                } else {
                    None
                };
                if pos != toks.len() {
                    return Err(bad());
                }
                let var = &mut builder.model.variables[j];
                match s1 {
                    RowSense::Le => var.lower = lo,
                    RowSense::Ge => var.upper = lo,
                    RowSense::Eq => {
                        var.lower = lo;
                        var.upper = lo;
                    }
                }
                if let Some(hi) = hi {
                    var.upper = hi;
                }
            }
        }
    }

    for (_, line, binary) in &integer_lines {
        for name in line.split_whitespace() {
            let j = builder.var(name);
            let var = &mut builder.model.variables[j];
            var.kind = VarKind::Integer;
            if *binary {
                var.lower = 0.0;
                var.upper = 1.0;
            }
        }
    }
    builder.model.check().map_err(|e| ParseError::Invalid(e.to_string()))?;
    Ok(builder.model)
}
