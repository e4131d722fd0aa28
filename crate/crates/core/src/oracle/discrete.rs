//! Finite joint distributions of `(X^1, ..., X^p, y)` and their text format.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Result, VimError};

/// Largest product space accepted.
pub const MAX_ATOMS: usize = 1_000_000;

/// Probability table over the product of finite supports. Atoms are stored
/// row-major with the covariates in order and the target varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    names: Vec<String>,
    supports: Vec<Vec<f64>>,
    target_name: String,
    y_support: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(supports: Vec<Vec<f64>>, y_support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let names = (1..=supports.len()).map(|k| format!("x{k}")).collect();
        Self::with_names(names, supports, "y".into(), y_support, probs)
    }

    pub fn with_names(
        names: Vec<String>,
        supports: Vec<Vec<f64>>,
        target_name: String,
        y_support: Vec<f64>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        if supports.is_empty() {
            return Err(VimError::InvalidJoint("at least one covariate is required".into()));
        }
        if names.len() != supports.len() {
            return Err(VimError::InvalidJoint("one name per covariate is required".into()));
        }
        let mut atoms = 1usize;
        for (k, s) in supports.iter().chain(std::iter::once(&y_support)).enumerate() {
            if s.is_empty() {
                return Err(VimError::InvalidJoint(format!("support {k} is empty")));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(VimError::InvalidJoint(format!("support {k} has a non-finite value")));
            }
            for (a, v) in s.iter().enumerate() {
                if s[..a].contains(v) {
                    return Err(VimError::InvalidJoint(format!("support {k} repeats {v}")));
                }
            }
            atoms = atoms
                .checked_mul(s.len())
                .filter(|&a| a <= MAX_ATOMS)
                .ok_or_else(|| VimError::Size(format!("joint exceeds {MAX_ATOMS} atoms")))?;
        }
        if probs.len() != atoms {
            return Err(VimError::InvalidJoint(format!(
                "expected {atoms} probabilities, found {}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(VimError::InvalidJoint(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(VimError::InvalidJoint(format!("total mass is {total}, expected 1")));
        }
        Ok(Self {
            names,
            supports,
            target_name,
            y_support,
            probs,
        })
    }

    pub fn p(&self) -> usize {
        self.supports.len()
    }

    pub fn supports(&self) -> &[Vec<f64>] {
        &self.supports
    }

    pub fn y_support(&self) -> &[f64] {
        &self.y_support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Number of covariate configurations.
    pub fn n_configs(&self) -> usize {
        self.supports.iter().map(Vec::len).product()
    }

    /// Support indices of configuration `cx`.
    pub fn decode(&self, mut cx: usize) -> Vec<usize> {
        let mut digits = vec![0; self.p()];
        for k in (0..self.p()).rev() {
            let s = self.supports[k].len();
            digits[k] = cx % s;
            cx /= s;
        }
        digits
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.supports)
            .fold(0, |acc, (&d, s)| acc * s.len() + d)
    }

    /// Probability of configuration `cx` with target index `yi`.
    #[inline]
    pub fn prob(&self, cx: usize, yi: usize) -> f64 {
        self.probs[cx * self.y_support.len() + yi]
    }

    /// Parses the plain-text table format (see [`DiscreteJoint::to_text`]).
    pub fn parse(text: &str) -> Result<Self> {
        let mut names = Vec::new();
        let mut supports = Vec::new();
        let mut target: Option<(String, Vec<f64>)> = None;
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tok = line.split_whitespace();
            let head = tok.next().unwrap_or("");
            let parse_vals = |it: std::str::SplitWhitespace<'_>| -> Result<Vec<f64>> {
                it.map(|t| {
                    f64::from_str(t).map_err(|_| {
                        VimError::InvalidJoint(format!("line {}: cannot parse '{t}'", ln + 1))
                    })
                })
                .collect()
            };
            match head {
                "support" | "target" => {
                    if !rows.is_empty() {
                        return Err(VimError::InvalidJoint(format!(
                            "line {}: declarations must precede atoms",
                            ln + 1
                        )));
                    }
                    let name = tok
                        .next()
                        .ok_or_else(|| VimError::InvalidJoint(format!("line {}: missing name", ln + 1)))?
                        .to_string();
                    let vals = parse_vals(tok)?;
                    if head == "support" {
                        names.push(name);
                        supports.push(vals);
                    } else if target.replace((name, vals)).is_some() {
                        return Err(VimError::InvalidJoint("target declared twice".into()));
                    }
                }
                _ => {
                    let vals = parse_vals(line.split_whitespace())?;
                    rows.push((ln + 1, vals));
                }
            }
        }
        let (target_name, y_support) =
            target.ok_or_else(|| VimError::InvalidJoint("missing target declaration".into()))?;
        let p = supports.len();
        let ny = y_support.len();
        let atoms: usize = supports.iter().map(Vec::len).product::<usize>() * ny;
        if atoms > MAX_ATOMS {
            return Err(VimError::Size(format!("joint exceeds {MAX_ATOMS} atoms")));
        }
        let mut probs = vec![0.0; atoms];
        let mut seen = vec![false; atoms];
        for (ln, vals) in rows {
            if vals.len() != p + 2 {
                return Err(VimError::InvalidJoint(format!(
                    "line {ln}: expected {} fields, found {}",
                    p + 2,
                    vals.len()
                )));
            }
            let mut idx = 0usize;
            for k in 0..p {
                let d = supports[k].iter().position(|v| *v == vals[k]).ok_or_else(|| {
                    VimError::InvalidJoint(format!("line {ln}: {} is not in the support of {}", vals[k], names[k]))
                })?;
                idx = idx * supports[k].len() + d;
            }
            let yi = y_support.iter().position(|v| *v == vals[p]).ok_or_else(|| {
                VimError::InvalidJoint(format!("line {ln}: {} is not in the target support", vals[p]))
            })?;
            let a = idx * ny + yi;
            if seen[a] {
                return Err(VimError::InvalidJoint(format!("line {ln}: atom listed twice")));
            }
            seen[a] = true;
            probs[a] = vals[p + 1];
        }
        Self::with_names(names, supports, target_name, y_support, probs)
    }

    /// Text form: one `support <name> <values...>` line per covariate, a
    /// `target <name> <values...>` line, then one `x1 ... xp y prob` line per
    /// atom. Parsing accepts omitted atoms as zero mass.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        for (n, s) in self.names.iter().zip(&self.supports) {
            let _ = writeln!(out, "support {n} {}", join(s));
        }
        let _ = writeln!(out, "target {} {}", self.target_name, join(&self.y_support));
        for cx in 0..self.n_configs() {
            let digits = self.decode(cx);
            let xs: Vec<f64> = digits.iter().enumerate().map(|(k, &d)| self.supports[k][d]).collect();
            for (yi, y) in self.y_support.iter().enumerate() {
                let _ = writeln!(out, "{} {y:?} {:?}", join(&xs), self.prob(cx, yi));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coins() -> DiscreteJoint {
        // y = x2 with independent fair coins
        let mut probs = vec![0.0; 8];
        for cx in 0..4 {
            let x2 = cx % 2;
            probs[cx * 2 + x2] = 0.25;
        }
        DiscreteJoint::new(vec![vec![0.0, 1.0]; 2], vec![0.0, 1.0], probs).unwrap()
    }

    #[test]
    fn text_round_trip() {
        let j = coins();
        let back = DiscreteJoint::parse(&j.to_text()).unwrap();
        assert_eq!(back, j);
    }

    #[test]
    fn corrupted_mass_is_rejected() {
        let text = "support a 0 1\ntarget y 0 1\n0 0 0.5\n1 1 0.499\n";
        assert!(matches!(DiscreteJoint::parse(text), Err(VimError::InvalidJoint(_))));
    }

    #[test]
    fn size_cap() {
        let big = vec![(0..1000).map(f64::from).collect::<Vec<_>>(); 2];
        let e = DiscreteJoint::new(big, vec![0.0, 1.0], vec![]);
        assert!(matches!(e, Err(VimError::Size(_))));
    }

    #[test]
    fn encode_decode() {
        let j = DiscreteJoint::new(vec![vec![0.0, 1.0, 2.0], vec![5.0, 6.0]], vec![0.0], vec![1.0 / 6.0; 6]);
        let j = j.unwrap();
        for cx in 0..6 {
            assert_eq!(j.encode(&j.decode(cx)), cx);
        }
    }
}
