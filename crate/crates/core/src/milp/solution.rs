//! Solution files written by external solvers.
//!
//! Two layouts are understood: the HiGHS raw solution file (`Model status`,
//! then `# Columns N` followed by `name value` lines) and the CBC `solu`
//! file (a status line such as `Optimal - objective value 3`, then
//! `index name value reduced-cost` lines, nonzeros only).

use std::collections::HashMap;
use std::fmt::Write as _;

use super::lp::format_number;
use super::model::MilpModel;
use super::{ParseError, SolveStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFile {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub values: HashMap<String, f64>,
}

fn status_from_text(text: &str) -> Result<SolveStatus, ParseError> {
    let lower = text.to_ascii_lowercase();
    if lower.contains("infeasible") {
        Ok(SolveStatus::Infeasible)
    } else if lower.contains("optimal") {
        Ok(SolveStatus::Optimal)
    } else if lower.contains("time") {
        Ok(SolveStatus::Timeout)
    } else {
        Err(ParseError::Unsupported(format!("solver status {:?}", text.trim())))
    }
}

pub fn parse_solution(text: &str) -> Result<SolutionFile, ParseError> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.trim_start().starts_with("Model status") {
        parse_highs(text)
    } else {
        parse_cbc(text)
    }
}

fn parse_highs(text: &str) -> Result<SolutionFile, ParseError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut k = 0;
    let next_nonblank = |k: &mut usize| -> Option<(usize, &str)> {
        while *k < lines.len() {
            let l = lines[*k];
            *k += 1;
            if !l.trim().is_empty() {
                return Some((*k, l));
            }
        }
        None
    };
    let (_, head) = next_nonblank(&mut k).expect("caller checked");
    let status_text = match head.split_once(':') {
        Some((_, rest)) if !rest.trim().is_empty() => rest.to_string(),
        _ => next_nonblank(&mut k)
            .ok_or_else(|| ParseError::Syntax { line: k, message: "missing model status".into() })?
            .1
            .to_string(),
    };
    let status = status_from_text(&status_text)?;
    let mut objective = None;
    let mut values = HashMap::new();
    while let Some((line_no, line)) = next_nonblank(&mut k) {
        let t = line.trim();
        if let Some(v) = t.strip_prefix("Objective") {
            objective = v.trim().parse().ok();
        } else if let Some(count) = t.strip_prefix("# Columns") {
            let count: usize = count
                .trim()
                .parse()
                .map_err(|_| ParseError::Syntax { line: line_no, message: "bad column count".into() })?;
            for _ in 0..count {
                let (line_no, line) = next_nonblank(&mut k)
                    .ok_or_else(|| ParseError::Syntax { line: lines.len(), message: "truncated column list".into() })?;
                let mut toks = line.split_whitespace();
                let (Some(name), Some(value)) = (toks.next(), toks.next()) else {
                    return Err(ParseError::Syntax { line: line_no, message: "expected `name value`".into() });
                };
                let value = value
                    .parse()
                    .map_err(|_| ParseError::Syntax { line: line_no, message: format!("bad value {value}") })?;
                values.insert(name.to_string(), value);
            }
            break;
        }
    }
    Ok(SolutionFile { status, objective, values })
}

fn parse_cbc(text: &str) -> Result<SolutionFile, ParseError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, head)) = lines.next() else {
        return Err(ParseError::Syntax { line: 1, message: "empty solution file".into() });
    };
    let (status_text, objective) = match head.split_once("objective value") {
        Some((s, v)) => (s.trim_end_matches([' ', '-']).to_string(), v.trim().parse().ok()),
        None => (head.to_string(), None),
    };
    let status = status_from_text(&status_text)?;
    let mut values = HashMap::new();
    for (idx, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().filter(|t| *t != "**").collect();
        let (name, value) = match toks.as_slice() {
            [_, name, value, ..] => (name, value),
            _ => return Err(ParseError::Syntax { line: idx + 1, message: "expected `index name value`".into() }),
        };
        let value =
            value.parse().map_err(|_| ParseError::Syntax { line: idx + 1, message: format!("bad value {value}") })?;
        values.insert(name.to_string(), value);
    }
    Ok(SolutionFile { status, objective, values })
}

/// Render a solution in the HiGHS raw layout.
pub fn write_highs_solution(model: &MilpModel, status: SolveStatus, values: Option<&[f64]>) -> String {
    let mut out = String::from("Model status\n");
    out.push_str(match status {
        SolveStatus::Optimal => "Optimal\n",
        SolveStatus::Infeasible => "Infeasible\n",
        SolveStatus::Timeout => "Time limit reached\n",
    });
    out.push_str("\n# Primal solution values\n");
    match values {
        None => out.push_str("None\n"),
        Some(values) => {
            out.push_str("Feasible\n");
            let _ = writeln!(out, "Objective {}", format_number(model.objective_value(values)));
            let _ = writeln!(out, "# Columns {}", model.variables.len());
            for (v, x) in model.variables.iter().zip(values) {
                let _ = writeln!(out, "{} {}", v.name, format_number(*x));
            }
            let _ = writeln!(out, "# Rows {}", model.constraints.len());
            for c in &model.constraints {
                let activity: f64 = c.terms.iter().map(|&(j, a)| a * values[j]).sum();
                let _ = writeln!(out, "{} {}", c.name, format_number(activity));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn highs_layout() {
        let text = "Model status\nOptimal\n\n# Primal solution values\nFeasible\nObjective 2\n# Columns 3\n\
                    x 1\ny 0\nz 1\n# Rows 1\nc1 2\n\n# Dual solution values\nNone\n";
        let s = parse_solution(text).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective, Some(2.0));
        assert_eq!(s.values.len(), 3);
        assert_eq!(s.values["z"], 1.0);
        assert_eq!(s.values.get("c1"), None);
    }

    #[test]
    fn highs_infeasible_and_timeout() {
        let s = parse_solution("Model status\nInfeasible\n\n# Primal solution values\nNone\n").unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        let s = parse_solution("Model status: Time limit reached\n").unwrap();
        assert_eq!(s.status, SolveStatus::Timeout);
        assert!(parse_solution("Model status\nOptimal\n# Columns 2\nx 1\n").is_err());
    }

    #[test]
    fn cbc_layout() {
        let text = "Optimal - objective value 3.00000000\n      0 x          1          0\n  \
                    **  2 z          1          1\n";
        let s = parse_solution(text).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective, Some(3.0));
        assert_eq!(s.values["z"], 1.0);
        let s = parse_solution("Infeasible - objective value 0.00000000\n").unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        let s = parse_solution("Stopped on time - objective value 5.00000000\n").unwrap();
        assert_eq!(s.status, SolveStatus::Timeout);
    }
}
