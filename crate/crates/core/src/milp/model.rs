//! Solver-neutral 0-1 linear program representation with stable variable names.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Identity of a model variable. Names round-trip through [`VarKey::name`] and
/// [`VarKey::parse`], so a solution file read back by name maps onto the same
/// indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKey {
    /// `X_{b,r,n}`: robot served directly by BS `b`.
    Xb { b: usize, r: usize, n: usize },
    /// `X_{i,r,n}`: robot served through RIS `i`.
    Xi { i: usize, r: usize, n: usize },
    /// `Z_{b,r,n} = 1 - X_{b,r,n}`, switching off the BS SINR row.
    Zb { b: usize, r: usize, n: usize },
    /// `Z_{i,r,n} = 1 - X_{i,r,n}`, switching off the RIS SINR row.
    Zi { i: usize, r: usize, n: usize },
    /// `Y_{i,r,n}`: robot used RIS `i` within the last `D` slots.
    Y { i: usize, r: usize, n: usize },
    /// `C_{i,n}`: RIS `i` is reconfiguring.
    C { i: usize, n: usize },
    /// `W_{i,r,n}`: robot on RIS `i` while it is ready.
    W { i: usize, r: usize, n: usize },
    /// `O_{r,n}`: robot in outage.
    O { r: usize, n: usize },
}

impl VarKey {
    pub fn name(&self) -> String {
        match *self {
            VarKey::Xb { b, r, n } => format!("Xb_b{b}_r{r}_n{n}"),
            VarKey::Xi { i, r, n } => format!("Xi_i{i}_r{r}_n{n}"),
            VarKey::Zb { b, r, n } => format!("Zb_b{b}_r{r}_n{n}"),
            VarKey::Zi { i, r, n } => format!("Zi_i{i}_r{r}_n{n}"),
            VarKey::Y { i, r, n } => format!("Y_i{i}_r{r}_n{n}"),
            VarKey::C { i, n } => format!("C_i{i}_n{n}"),
            VarKey::W { i, r, n } => format!("W_i{i}_r{r}_n{n}"),
            VarKey::O { r, n } => format!("O_r{r}_n{n}"),
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        let mut parts = name.split('_');
        let kind = parts.next()?;
        let mut field = |tag: char| -> Option<usize> {
            let p = parts.next()?;
            let digits = p.strip_prefix(tag)?;
            if digits.is_empty() || (digits.len() > 1 && digits.starts_with('0')) {
                return None;
            }
            digits.parse().ok()
        };
        let key = match kind {
            "Xb" => VarKey::Xb { b: field('b')?, r: field('r')?, n: field('n')? },
            "Xi" => VarKey::Xi { i: field('i')?, r: field('r')?, n: field('n')? },
            "Zb" => VarKey::Zb { b: field('b')?, r: field('r')?, n: field('n')? },
            "Zi" => VarKey::Zi { i: field('i')?, r: field('r')?, n: field('n')? },
            "Y" => VarKey::Y { i: field('i')?, r: field('r')?, n: field('n')? },
            "C" => VarKey::C { i: field('i')?, n: field('n')? },
            "W" => VarKey::W { i: field('i')?, r: field('r')?, n: field('n')? },
            "O" => VarKey::O { r: field('r')?, n: field('n')? },
            _ => return None,
        };
        parts.next().is_none().then_some(key)
    }

    pub fn slot(&self) -> usize {
        match *self {
            VarKey::Xb { n, .. }
            | VarKey::Xi { n, .. }
            | VarKey::Zb { n, .. }
            | VarKey::Zi { n, .. }
            | VarKey::Y { n, .. }
            | VarKey::C { n, .. }
            | VarKey::W { n, .. }
            | VarKey::O { n, .. } => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Integer,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
}

impl Variable {
    pub fn is_binary(&self) -> bool {
        self.kind == VarKind::Integer && self.lower >= 0.0 && self.upper <= 1.0 && self.lower <= self.upper
    }

    pub fn is_fixed(&self) -> bool {
        self.lower == self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

impl RowSense {
    pub fn symbol(self) -> &'static str {
        match self {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// `(variable index, coefficient)`.
    pub terms: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn is_satisfied(&self, values: &[f64], tolerance: f64) -> bool {
        let lhs: f64 = self.terms.iter().map(|&(j, a)| a * values[j]).sum();
        match self.sense {
            RowSense::Le => lhs <= self.rhs + tolerance,
            RowSense::Ge => lhs >= self.rhs - tolerance,
            RowSense::Eq => (lhs - self.rhs).abs() <= tolerance,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("duplicate variable name {0}")]
    DuplicateVariable(String),
    #[error("row {row} references variable index {index}, but only {count} exist")]
    UnknownVariable { row: String, index: usize, count: usize },
    #[error("row {row} has a non-finite coefficient or right-hand side")]
    NonFinite { row: String },
    #[error("variable {0} has invalid bounds")]
    BadBounds(String),
    #[error("objective must be the sum of the O variables; {0} breaks that")]
    Objective(String),
}

/// A minimisation problem over integer and continuous columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    index: HashMap<String, usize>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Self::default() }
    }

    pub fn add_variable(&mut self, var: Variable) -> Result<usize, ModelError> {
        if self.index.contains_key(&var.name) {
            return Err(ModelError::DuplicateVariable(var.name));
        }
        let j = self.variables.len();
        self.index.insert(var.name.clone(), j);
        self.variables.push(var);
        Ok(j)
    }

    /// Add a 0-1 column; `fixed_zero` pins its upper bound to 0.
    pub fn add_binary(&mut self, key: VarKey, objective: f64, fixed_zero: bool) -> usize {
        let var = Variable {
            name: key.name(),
            kind: VarKind::Integer,
            lower: 0.0,
            upper: if fixed_zero { 0.0 } else { 1.0 },
            objective,
        };
        self.add_variable(var).expect("keys are unique")
    }

    pub fn add_row(&mut self, name: impl Into<String>, terms: Vec<(usize, f64)>, sense: RowSense, rhs: f64) {
        self.constraints.push(Constraint { name: name.into(), terms, sense, rhs });
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn index_of_key(&self, key: VarKey) -> Option<usize> {
        self.index_of(&key.name())
    }

    pub fn key(&self, j: usize) -> Option<VarKey> {
        VarKey::parse(&self.variables[j].name)
    }

    pub fn num_nonzeros(&self) -> usize {
        self.constraints.iter().map(|c| c.terms.len()).sum()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.variables.iter().zip(values).map(|(v, x)| v.objective * x).sum()
    }

    /// Rows violated by `values` beyond `tolerance`, plus out-of-bound columns.
    pub fn violated_rows(&self, values: &[f64], tolerance: f64) -> Vec<String> {
        let mut out: Vec<String> = self
            .variables
            .iter()
            .zip(values)
            .filter(|(v, &x)| x < v.lower - tolerance || x > v.upper + tolerance)
            .map(|(v, _)| format!("bound of {}", v.name))
            .collect();
        out.extend(self.constraints.iter().filter(|c| !c.is_satisfied(values, tolerance)).map(|c| c.name.clone()));
        out
    }

    /// Structural checks: indices in range, finite numbers, sane bounds.
    pub fn check(&self) -> Result<(), ModelError> {
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper || !v.objective.is_finite() {
                return Err(ModelError::BadBounds(v.name.clone()));
            }
        }
        let count = self.variables.len();
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(ModelError::NonFinite { row: c.name.clone() });
            }
            for &(j, a) in &c.terms {
                if j >= count {
                    return Err(ModelError::UnknownVariable { row: c.name.clone(), index: j, count });
                }
                if !a.is_finite() {
                    return Err(ModelError::NonFinite { row: c.name.clone() });
                }
            }
        }
        Ok(())
    }

    /// [`check`](Self::check), plus: every column is binary and the objective
    /// is exactly the sum of the `O` columns.
    pub fn check_allocation_model(&self) -> Result<(), ModelError> {
        self.check()?;
        for v in &self.variables {
            if !v.is_binary() {
                return Err(ModelError::BadBounds(v.name.clone()));
            }
            let is_outage = matches!(VarKey::parse(&v.name), Some(VarKey::O { .. }));
            if v.objective != if is_outage { 1.0 } else { 0.0 } {
                return Err(ModelError::Objective(v.name.clone()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for MilpModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fixed = self.variables.iter().filter(|v| v.is_fixed()).count();
        write!(
            f,
            "{}: {} columns ({} fixed), {} rows, {} nonzeros",
            self.name,
            self.variables.len(),
            fixed,
            self.constraints.len(),
            self.num_nonzeros()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn any_key() -> impl Strategy<Value = VarKey> {
        let idx = 0usize..200;
        prop_oneof![
            (idx.clone(), idx.clone(), idx.clone()).prop_map(|(b, r, n)| VarKey::Xb { b, r, n }),
            (idx.clone(), idx.clone(), idx.clone()).prop_map(|(i, r, n)| VarKey::Xi { i, r, n }),
            (idx.clone(), idx.clone(), idx.clone()).prop_map(|(b, r, n)| VarKey::Zb { b, r, n }),
            (idx.clone(), idx.clone(), idx.clone()).prop_map(|(i, r, n)| VarKey::Zi { i, r, n }),
            (idx.clone(), idx.clone(), idx.clone()).prop_map(|(i, r, n)| VarKey::Y { i, r, n }),
            (idx.clone(), idx.clone()).prop_map(|(i, n)| VarKey::C { i, n }),
            (idx.clone(), idx.clone(), idx.clone()).prop_map(|(i, r, n)| VarKey::W { i, r, n }),
            (idx.clone(), idx).prop_map(|(r, n)| VarKey::O { r, n }),
        ]
    }

    proptest! {
        #[test]
        fn key_names_round_trip(key in any_key()) {
            prop_assert_eq!(VarKey::parse(&key.name()), Some(key));
        }
    }

    #[test]
    fn malformed_names_are_rejected() {
        for bad in ["", "X_b0_r0_n0", "Xb_b0_r0", "Xb_b0_r0_n0_x", "O_r01_n0", "O_rx_n0", "C_i0_r0_n0", "x"] {
            assert_eq!(VarKey::parse(bad), None, "{bad}");
        }
    }

    #[test]
    fn check_catches_bad_rows() {
        let mut m = MilpModel::new("t");
        let x = m.add_binary(VarKey::O { r: 0, n: 0 }, 1.0, false);
        m.add_row("ok", vec![(x, 1.0)], RowSense::Le, 1.0);
        assert!(m.check_allocation_model().is_ok());
        m.add_row("bad", vec![(x + 1, 1.0)], RowSense::Le, 1.0);
        assert!(matches!(m.check(), Err(ModelError::UnknownVariable { .. })));
        let mut m2 = MilpModel::new("t");
        let y = m2.add_binary(VarKey::O { r: 0, n: 0 }, 1.0, false);
        m2.add_row("nan", vec![(y, f64::NAN)], RowSense::Ge, 0.0);
        assert!(matches!(m2.check(), Err(ModelError::NonFinite { .. })));
        assert!(m2.add_variable(m2.variables[0].clone()).is_err());
    }
}
