//! Free-format MPS.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::lp::format_number;
use super::model::{MilpModel, RowSense, VarKind, Variable};
use super::ParseError;

const OBJ_ROW: &str = "obj";

pub fn write_mps(model: &MilpModel) -> String {
    let mut out = String::new();
    let name = if model.name.is_empty() { "model" } else { model.name.as_str() };
    let _ = writeln!(out, "NAME {name}");
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N {OBJ_ROW}");
    for c in &model.constraints {
        let kind = match c.sense {
            RowSense::Le => 'L',
            RowSense::Ge => 'G',
            RowSense::Eq => 'E',
        };
        let _ = writeln!(out, " {kind} {}", c.name);
    }

    let mut by_column: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.variables.len()];
    for (row, c) in model.constraints.iter().enumerate() {
        for &(j, a) in &c.terms {
            by_column[j].push((row, a));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_marker = false;
    let mut markers = 0;
    for (j, v) in model.variables.iter().enumerate() {
        let integer = v.kind == VarKind::Integer;
        if integer != in_marker {
            let tag = if integer { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, " M{markers} 'MARKER' '{tag}'");
            markers += 1;
            in_marker = integer;
        }
        let mut wrote = false;
        if v.objective != 0.0 {
            let _ = writeln!(out, " {} {OBJ_ROW} {}", v.name, format_number(v.objective));
            wrote = true;
        }
        for &(row, a) in &by_column[j] {
            let _ = writeln!(out, " {} {} {}", v.name, model.constraints[row].name, format_number(a));
            wrote = true;
        }
        if !wrote {
            let _ = writeln!(out, " {} {OBJ_ROW} 0", v.name);
        }
    }
    if in_marker {
        let _ = writeln!(out, " M{markers} 'MARKER' 'INTEND'");
    }

    out.push_str("RHS\n");
    for c in model.constraints.iter().filter(|c| c.rhs != 0.0) {
        let _ = writeln!(out, " RHS {} {}", c.name, format_number(c.rhs));
    }

    out.push_str("BOUNDS\n");
    for v in &model.variables {
        if v.lower == v.upper {
            let _ = writeln!(out, " FX BND {} {}", v.name, format_number(v.lower));
            continue;
        }
        match (v.lower, v.upper) {
            (l, u) if l == f64::NEG_INFINITY && u == f64::INFINITY => {
                let _ = writeln!(out, " FR BND {}", v.name);
            }
            (l, u) => {
                if l == f64::NEG_INFINITY {
                    let _ = writeln!(out, " MI BND {}", v.name);
                } else {
                    let _ = writeln!(out, " LO BND {} {}", v.name, format_number(l));
                }
                if u == f64::INFINITY {
                    let _ = writeln!(out, " PL BND {}", v.name);
                } else {
                    let _ = writeln!(out, " UP BND {} {}", v.name, format_number(u));
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    End,
}

pub fn parse_mps(text: &str) -> Result<MilpModel, ParseError> {
    let mut model = MilpModel::new("");
    let mut section = Section::None;
    let mut rows: HashMap<String, Option<usize>> = HashMap::new();
    let mut cols: HashMap<String, usize> = HashMap::new();
    let mut objective_name: Option<String> = None;
    let mut integer = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| ParseError::Syntax { line: line_no, message };
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(char::is_whitespace) {
            section = match toks[0].to_ascii_uppercase().as_str() {
                "NAME" => {
                    model.name = toks.get(1..).map(|t| t.join(" ")).unwrap_or_default();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                "RANGES" => return Err(ParseError::Unsupported("RANGES section".into())),
                "OBJSENSE" => return Err(ParseError::Unsupported("OBJSENSE section".into())),
                other => return Err(err(format!("unknown section {other}"))),
            };
            continue;
        }
        match section {
            Section::Rows => {
                let [kind, name] = toks.as_slice() else { return Err(err("expected `type name`".into())) };
                let sense = match kind.to_ascii_uppercase().as_str() {
                    "N" => {
                        if objective_name.is_none() {
                            objective_name = Some(name.to_string());
                        }
                        rows.insert(name.to_string(), None);
                        continue;
                    }
                    "L" => RowSense::Le,
                    "G" => RowSense::Ge,
                    "E" => RowSense::Eq,
                    other => return Err(err(format!("unknown row type {other}"))),
                };
                rows.insert(name.to_string(), Some(model.constraints.len()));
                model.add_row(*name, Vec::new(), sense, 0.0);
            }
            Section::Columns => {
                if toks.len() == 3 && toks[1] == "'MARKER'" {
                    integer = match toks[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        other => return Err(err(format!("unknown marker {other}"))),
                    };
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(err("expected `column row value [row value]`".into()));
                }
                let j = match cols.get(toks[0]) {
                    Some(&j) => j,
                    None => {
                        let var = Variable {
                            name: toks[0].to_string(),
                            kind: if integer { VarKind::Integer } else { VarKind::Continuous },
                            lower: 0.0,
                            upper: f64::INFINITY,
                            objective: 0.0,
                        };
                        let j = model.add_variable(var).map_err(|e| err(e.to_string()))?;
                        cols.insert(toks[0].to_string(), j);
                        j
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let value: f64 = pair[1].parse().map_err(|_| err(format!("bad number {}", pair[1])))?;
                    match rows.get(pair[0]) {
                        Some(None) if Some(pair[0]) == objective_name.as_deref() => {
                            model.variables[j].objective += value
                        }
                        Some(None) => {}
                        Some(Some(row)) => {
                            if value != 0.0 {
                                model.constraints[*row].terms.push((j, value));
                            }
                        }
                        None => return Err(err(format!("unknown row {}", pair[0]))),
                    }
                }
            }
            Section::Rhs => {
                let pairs = if toks.len() % 2 == 1 { &toks[1..] } else { &toks[..] };
                for pair in pairs.chunks(2) {
                    let value: f64 = pair[1].parse().map_err(|_| err(format!("bad number {}", pair[1])))?;
                    match rows.get(pair[0]) {
                        Some(Some(row)) => model.constraints[*row].rhs = value,
                        Some(None) => return Err(ParseError::Unsupported("objective constant".into())),
                        None => return Err(err(format!("unknown row {}", pair[0]))),
                    }
                }
            }
            Section::Bounds => {
                let kind = toks[0].to_ascii_uppercase();
                let needs_value = !matches!(kind.as_str(), "FR" | "MI" | "PL" | "BV");
                let (col, value) = match (toks.len(), needs_value) {
                    (3, false) | (2, false) => (toks[toks.len() - 1], None),
                    (4, true) => (toks[2], Some(toks[3])),
                    (3, true) => (toks[1], Some(toks[2])),
                    _ => return Err(err("malformed bound".into())),
                };
                let &j = cols.get(col).ok_or_else(|| err(format!("bound on unknown column {col}")))?;
                let value = value
                    .map(|v| v.parse::<f64>().map_err(|_| err(format!("bad number {v}"))))
                    .transpose()?;
                let var = &mut model.variables[j];
                match (kind.as_str(), value) {
                    ("UP", Some(v)) => var.upper = v,
                    ("LO", Some(v)) => var.lower = v,
                    ("FX", Some(v)) => {
                        var.lower = v;
                        var.upper = v;
                    }
                    ("FR", None) => {
                        var.lower = f64::NEG_INFINITY;
                        var.upper = f64::INFINITY;
                    }
                    ("MI", None) => var.lower = f64::NEG_INFINITY,
                    ("PL", None) => var.upper = f64::INFINITY,
                    ("BV", None) => {
                        var.kind = VarKind::Integer;
                        var.lower = 0.0;
                        var.upper = 1.0;
                    }
                    ("LI", Some(v)) => {
                        var.kind = VarKind::Integer;
                        var.lower = v;
                    }
                    ("UI", Some(v)) => {
                        var.kind = VarKind::Integer;
                        var.upper = v;
                    }
                    _ => return Err(err(format!("unsupported bound type {kind}"))),
                }
            }
            Section::None | Section::End => return Err(err("data outside a section".into())),
        }
    }
    if section != Section::End {
        return Err(ParseError::Syntax { line: text.lines().count(), message: "missing ENDATA".into() });
    }
    model.check().map_err(|e| ParseError::Invalid(e.to_string()))?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_hand_written_mps() {
        let text = "NAME tiny\nROWS\n N cost\n G c1\n L c2\nCOLUMNS\n M0 'MARKER' 'INTORG'\n x cost 1 c1 1\n \
                    y c1 1 c2 2\n M1 'MARKER' 'INTEND'\n z cost -1 c2 1\nRHS\n RHS c1 1 c2 4\nBOUNDS\n UP BND x 1\n \
                    BV BND y\n FR BND z\nENDATA\n";
        let m = parse_mps(text).unwrap();
        assert_eq!(m.name, "tiny");
        assert_eq!(m.constraints.len(), 2);
        assert_eq!(m.constraints[1].rhs, 4.0);
        assert_eq!(m.constraints[1].terms, vec![(1, 2.0), (2, 1.0)]);
        assert!(m.variables[0].is_binary() && m.variables[1].is_binary());
        assert_eq!(m.variables[2].kind, VarKind::Continuous);
        assert_eq!(m.variables[2].lower, f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_unknown_rows_and_truncation() {
        assert!(parse_mps("NAME t\nROWS\n N obj\nCOLUMNS\n x c9 1\nENDATA\n").is_err());
        assert!(parse_mps("NAME t\nROWS\n N obj\nCOLUMNS\n x obj 1\n").is_err());
        assert!(matches!(parse_mps("NAME t\nRANGES\nENDATA\n"), Err(ParseError::Unsupported(_))));
    }
}
