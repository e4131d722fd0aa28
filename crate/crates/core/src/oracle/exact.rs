//! Exact population indices on finite joints, with the regression function
//! `m(x) = E[y | X = x]` as the model.

use serde::{Deserialize, Serialize};

use super::discrete::DiscreteJoint;
use crate::data::Loss;
use crate::error::{Result, VimError};
use crate::estimators::IndexTag;

/// Exact value of an index for one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexValue {
    pub index: IndexTag,
    pub feature: usize,
    pub value: f64,
}

/// How out-of-coalition features are integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marginalization {
    /// Under the conditional law given the coalition.
    Conditional,
    /// Under their own marginal law, independently of the coalition.
    Marginal,
}

/// Equivalent expressions of the total Sobol index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsiForm {
    /// `E[Var(y | X^-j)] - E[Var(y | X)]` (quadratic loss).
    ConditionalVariance,
    /// `E[(m_{-j} - m)^2]` (quadratic loss).
    SquaredGap,
    /// `E l(y, m_{-j}) - E l(y, m)`.
    RiskDifference,
    /// `E l(y, E[m(X) | X^-j]) - E l(y, m)`.
    Marginalization,
    /// Half the loss increase under a conditional redraw of `X^j`
    /// (quadratic loss).
    HalfPerturbation,
    /// `I(y; X^j | X^-j)` in nats (cross-entropy loss).
    MutualInformation,
}

impl TsiForm {
    pub const ALL: [TsiForm; 6] = [
        TsiForm::ConditionalVariance,
        TsiForm::SquaredGap,
        TsiForm::RiskDifference,
        TsiForm::Marginalization,
        TsiForm::HalfPerturbation,
        TsiForm::MutualInformation,
    ];

    /// Numeric label `1, 2, 3, 4, 5, 7`.
    pub fn number(self) -> u8 {
        match self {
            TsiForm::ConditionalVariance => 1,
            TsiForm::SquaredGap => 2,
            TsiForm::RiskDifference => 3,
            TsiForm::Marginalization => 4,
            TsiForm::HalfPerturbation => 5,
            TsiForm::MutualInformation => 7,
        }
    }

    pub fn from_number(k: u8) -> Result<Self> {
        TsiForm::ALL
            .into_iter()
            .find(|f| f.number() == k)
            .ok_or_else(|| VimError::invalid(format!("no formulation numbered {k}")))
    }
}

/// Conditional means `E[y | X^S = x^S]` for every configuration of the
/// coalition with positive mass.
#[derive(Debug, Clone, PartialEq)]
pub struct CondMeanTable {
    pub features: Vec<usize>,
    pub rows: Vec<(Vec<f64>, f64)>,
}

impl CondMeanTable {
    pub fn get(&self, values: &[f64]) -> Option<f64> {
        self.rows.iter().find(|(v, _)| v == values).map(|(_, m)| *m)
    }
}

/// Precomputed configuration masses and regression function.
struct Tables<'a> {
    d: &'a DiscreteJoint,
    px: Vec<f64>,
    m: Vec<f64>,
}

impl<'a> Tables<'a> {
    fn new(d: &'a DiscreteJoint) -> Self {
        let ny = d.y_support().len();
        let nc = d.n_configs();
        let mut px = vec![0.0; nc];
        let mut m = vec![f64::NAN; nc];
        for cx in 0..nc {
            let mut mass = 0.0;
            let mut sy = 0.0;
            for yi in 0..ny {
                let p = d.prob(cx, yi);
                mass += p;
                sy += p * d.y_support()[yi];
            }
            px[cx] = mass;
            if mass > 0.0 {
                m[cx] = sy / mass;
            }
        }
        Self { d, px, m }
    }

    fn ey(&self) -> f64 {
        self.px
            .iter()
            .zip(&self.m)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, m)| p * m)
            .sum()
    }

    /// Mixed-radix key of the coalition digits of `cx`.
    fn key(&self, digits: &[usize], coalition: &[usize]) -> usize {
        coalition
            .iter()
            .fold(0, |acc, &k| acc * self.d.supports()[k].len() + digits[k])
    }

    fn key_space(&self, coalition: &[usize]) -> usize {
        coalition.iter().map(|&k| self.d.supports()[k].len()).product()
    }

    /// `E[y | X^S]` evaluated at every configuration (NaN on zero mass).
    fn cond_mean(&self, coalition: &[usize]) -> Vec<f64> {
        let nk = self.key_space(coalition);
        let mut mass = vec![0.0; nk];
        let mut sum = vec![0.0; nk];
        let keys: Vec<usize> = (0..self.px.len())
            .map(|cx| self.key(&self.d.decode(cx), coalition))
            .collect();
        for (cx, &k) in keys.iter().enumerate() {
            if self.px[cx] > 0.0 {
                mass[k] += self.px[cx];
                sum[k] += self.px[cx] * self.m[cx];
            }
        }
        keys.iter()
            .enumerate()
            .map(|(cx, &k)| if self.px[cx] > 0.0 { sum[k] / mass[k] } else { f64::NAN })
            .collect()
    }

    /// `E[m(x^S, X^-S)]` with `X^-S` drawn from its marginal law.
    fn marginal_mean(&self, coalition: &[usize]) -> Result<Vec<f64>> {
        let p = self.d.p();
        let rest: Vec<usize> = (0..p).filter(|k| !coalition.contains(k)).collect();
        let nr = self.key_space(&rest);
        let mut pm = vec![0.0; nr];
        let mut template = vec![None; nr];
        for cx in 0..self.px.len() {
            let digits = self.d.decode(cx);
            let k = self.key(&digits, &rest);
            pm[k] += self.px[cx];
            if template[k].is_none() {
                template[k] = Some(digits);
            }
        }
        let mut out = vec![f64::NAN; self.px.len()];
        for (cx, o) in out.iter_mut().enumerate() {
            if self.px[cx] == 0.0 {
                continue;
            }
            let base = self.d.decode(cx);
            let mut v = 0.0;
            for (k, w) in pm.iter().enumerate() {
                if *w == 0.0 {
                    continue;
                }
                let mut digits = base.clone();
                let t = template[k].as_ref().expect("every key has a configuration");
                for &r in &rest {
                    digits[r] = t[r];
                }
                let c2 = self.d.encode(&digits);
                if self.px[c2] == 0.0 {
                    return Err(VimError::Incompatible(
                        "the regression function is undefined at a zero-mass configuration reached by marginal sampling".into(),
                    ));
                }
                v += w * self.m[c2];
            }
            *o = v;
        }
        Ok(out)
    }

    /// `E l(y, f(X))` over atoms with positive mass.
    fn risk(&self, loss: Loss, f: &[f64]) -> Result<f64> {
        let ny = self.d.y_support().len();
        let mut r = 0.0;
        for cx in 0..self.px.len() {
            for yi in 0..ny {
                let p = self.d.prob(cx, yi);
                if p > 0.0 {
                    r += p * loss.checked(self.d.y_support()[yi], f[cx])?;
                }
            }
        }
        Ok(r)
    }

    /// Distribution of `X^j` given the other coordinates of `cx`, as
    /// `(support index, probability, configuration)` triples.
    fn conditional_of(&self, cx: usize, j: usize) -> Vec<(usize, f64, usize)> {
        let mut digits = self.d.decode(cx);
        let s = self.d.supports()[j].len();
        let configs: Vec<usize> = (0..s)
            .map(|a| {
                digits[j] = a;
                self.d.encode(&digits)
            })
            .collect();
        let total: f64 = configs.iter().map(|&c| self.px[c]).sum();
        configs
            .into_iter()
            .enumerate()
            .filter(|(_, c)| self.px[*c] > 0.0)
            .map(|(a, c)| (a, self.px[c] / total, c))
            .collect()
    }

    fn second_moment(&self, coalition: &[usize]) -> Vec<f64> {
        // E[y^2 | X^S] at each configuration
        let ny = self.d.y_support().len();
        let nk = self.key_space(coalition);
        let mut mass = vec![0.0; nk];
        let mut sum = vec![0.0; nk];
        let keys: Vec<usize> = (0..self.px.len())
            .map(|cx| self.key(&self.d.decode(cx), coalition))
            .collect();
        for (cx, &k) in keys.iter().enumerate() {
            for yi in 0..ny {
                let p = self.d.prob(cx, yi);
                let y = self.d.y_support()[yi];
                mass[k] += p;
                sum[k] += p * y * y;
            }
        }
        keys.iter()
            .enumerate()
            .map(|(cx, &k)| if self.px[cx] > 0.0 { sum[k] / mass[k] } else { f64::NAN })
            .collect()
    }

    fn value(&self, coalition: &[usize], loss: Loss, mode: Marginalization) -> Result<f64> {
        let base = self.cond_mean(&[]);
        let f = match mode {
            Marginalization::Conditional => self.cond_mean(coalition),
            Marginalization::Marginal => self.marginal_mean(coalition)?,
        };
        Ok(self.risk(loss, &base)? - self.risk(loss, &f)?)
    }
}

fn check_feature(d: &DiscreteJoint, j: usize) -> Result<()> {
    if j >= d.p() {
        return Err(VimError::invalid(format!("feature {j} out of range (p = {})", d.p())));
    }
    Ok(())
}

fn check_coalition(d: &DiscreteJoint, s: &[usize]) -> Result<()> {
    for (a, &k) in s.iter().enumerate() {
        check_feature(d, k)?;
        if s[..a].contains(&k) {
            return Err(VimError::invalid(format!("feature {k} repeated in coalition")));
        }
    }
    Ok(())
}

fn without(p: usize, j: usize) -> Vec<usize> {
    (0..p).filter(|&k| k != j).collect()
}

/// `E[y | X^S]` for every coalition configuration with positive mass.
pub fn exact_cond_mean(d: &DiscreteJoint, coalition: &[usize]) -> Result<CondMeanTable> {
    check_coalition(d, coalition)?;
    let t = Tables::new(d);
    let cm = t.cond_mean(coalition);
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for cx in 0..t.px.len() {
        if t.px[cx] == 0.0 {
            continue;
        }
        let digits = d.decode(cx);
        let vals: Vec<f64> = coalition.iter().map(|&k| d.supports()[k][digits[k]]).collect();
        if !rows.iter().any(|(v, _)| *v == vals) {
            rows.push((vals, cm[cx]));
        }
    }
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite supports"));
    Ok(CondMeanTable {
        features: coalition.to_vec(),
        rows,
    })
}

/// `v(S) = E l(y, E[y]) - E l(y, m_S(X^S))`, with `m_S` the conditional
/// (or marginal) integration of the regression function over `X^-S`.
pub fn exact_value_function(
    d: &DiscreteJoint,
    coalition: &[usize],
    loss: Loss,
    mode: Marginalization,
) -> Result<f64> {
    check_coalition(d, coalition)?;
    Tables::new(d).value(coalition, loss, mode)
}

/// One expression of the total Sobol index of feature `j`.
pub fn exact_tsi(d: &DiscreteJoint, j: usize, loss: Loss, form: TsiForm) -> Result<f64> {
    check_feature(d, j)?;
    let needs_quadratic = matches!(
        form,
        TsiForm::ConditionalVariance | TsiForm::SquaredGap | TsiForm::HalfPerturbation
    );
    if needs_quadratic && loss != Loss::Quadratic {
        return Err(VimError::Incompatible(format!(
            "formulation {} needs the quadratic loss",
            form.number()
        )));
    }
    if form == TsiForm::MutualInformation && loss != Loss::CrossEntropy {
        return Err(VimError::Incompatible(
            "formulation 7 is the cross-entropy index".into(),
        ));
    }
    let t = Tables::new(d);
    let rest = without(d.p(), j);
    let n = t.px.len();
    match form {
        TsiForm::ConditionalVariance => {
            let m_rest = t.cond_mean(&rest);
            let s_rest = t.second_moment(&rest);
            let s_all = t.second_moment(&(0..d.p()).collect::<Vec<_>>());
            let mut acc = 0.0;
            for cx in 0..n {
                if t.px[cx] > 0.0 {
                    let var_rest = s_rest[cx] - m_rest[cx] * m_rest[cx];
                    let var_all = s_all[cx] - t.m[cx] * t.m[cx];
                    acc += t.px[cx] * (var_rest - var_all);
                }
            }
            Ok(acc)
        }
        TsiForm::SquaredGap => {
            let m_rest = t.cond_mean(&rest);
            Ok((0..n)
                .filter(|&cx| t.px[cx] > 0.0)
                .map(|cx| t.px[cx] * (m_rest[cx] - t.m[cx]).powi(2))
                .sum())
        }
        TsiForm::RiskDifference => {
            let m_rest = t.cond_mean(&rest);
            Ok(t.risk(loss, &m_rest)? - t.risk(loss, &t.m)?)
        }
        TsiForm::Marginalization => {
            let f: Vec<f64> = (0..n)
                .map(|cx| {
                    if t.px[cx] == 0.0 {
                        return f64::NAN;
                    }
                    t.conditional_of(cx, j).iter().map(|(_, w, c)| w * t.m[*c]).sum()
                })
                .collect();
            Ok(t.risk(loss, &f)? - t.risk(loss, &t.m)?)
        }
        TsiForm::HalfPerturbation => {
            let ny = d.y_support().len();
            let mut perturbed = 0.0;
            for cx in 0..n {
                if t.px[cx] == 0.0 {
                    continue;
                }
                let cond = t.conditional_of(cx, j);
                for yi in 0..ny {
                    let p = d.prob(cx, yi);
                    if p == 0.0 {
                        continue;
                    }
                    let y = d.y_support()[yi];
                    for (_, w, c) in &cond {
                        perturbed += p * w * loss.checked(y, t.m[*c])?;
                    }
                }
            }
            Ok(0.5 * (perturbed - t.risk(loss, &t.m)?))
        }
        TsiForm::MutualInformation => {
            // sum p(x, y) log [ p(y | x) / p(y | x^-j) ]
            let ny = d.y_support().len();
            let nk = t.key_space(&rest);
            let mut mass_rest = vec![0.0; nk];
            let mut joint_rest = vec![0.0; nk * ny];
            let keys: Vec<usize> = (0..n).map(|cx| t.key(&d.decode(cx), &rest)).collect();
            for (cx, &k) in keys.iter().enumerate() {
                for yi in 0..ny {
                    let p = d.prob(cx, yi);
                    mass_rest[k] += p;
                    joint_rest[k * ny + yi] += p;
                }
            }
            let mut cmi = 0.0;
            for (cx, &k) in keys.iter().enumerate() {
                for yi in 0..ny {
                    let p = d.prob(cx, yi);
                    if p > 0.0 {
                        let p_y_x = p / t.px[cx];
                        let p_y_rest = joint_rest[k * ny + yi] / mass_rest[k];
                        cmi += p * (p_y_x / p_y_rest).ln();
                    }
                }
            }
            Ok(cmi)
        }
    }
}

/// The risk-difference index divided by `Var(y)`.
pub fn exact_tsi_r2(d: &DiscreteJoint, j: usize) -> Result<f64> {
    let tsi = exact_tsi(d, j, Loss::Quadratic, TsiForm::RiskDifference)?;
    let t = Tables::new(d);
    let ey = t.ey();
    let ny = d.y_support().len();
    let mut var = 0.0;
    for cx in 0..t.px.len() {
        for yi in 0..ny {
            var += d.prob(cx, yi) * (d.y_support()[yi] - ey).powi(2);
        }
    }
    if var <= 0.0 {
        return Err(VimError::invalid("target has zero variance"));
    }
    Ok(tsi / var)
}

/// All `2^p` coalition values, indexed by bitmask.
pub fn exact_value_table(d: &DiscreteJoint, loss: Loss, mode: Marginalization) -> Result<Vec<f64>> {
    let p = d.p();
    if p > 12 {
        return Err(VimError::Size(format!("exact Shapley values need p <= 12, got {p}")));
    }
    let t = Tables::new(d);
    (0..1usize << p)
        .map(|mask| {
            let s: Vec<usize> = (0..p).filter(|k| mask >> k & 1 == 1).collect();
            t.value(&s, loss, mode)
        })
        .collect()
}

/// Shapley weights `(1/p) / C(p-1, |S|)` applied to a coalition table.
pub fn shapley_from_values(values: &[f64], p: usize) -> Vec<f64> {
    let mut binom = vec![vec![1.0f64; p + 1]; p + 1];
    for n in 1..=p {
        for k in 1..n {
            binom[n][k] = binom[n - 1][k - 1] + binom[n - 1][k];
        }
    }
    (0..p)
        .map(|j| {
            let mut acc = 0.0;
            for mask in 0..1usize << p {
                if mask >> j & 1 == 1 {
                    continue;
                }
                let size = mask.count_ones() as usize;
                let w = 1.0 / (p as f64 * binom[p - 1][size]);
                acc += w * (values[mask | 1 << j] - values[mask]);
            }
            acc
        })
        .collect()
}

/// Exact Shapley value of feature `j` for the chosen value function.
pub fn exact_shapley(d: &DiscreteJoint, j: usize, loss: Loss, mode: Marginalization) -> Result<f64> {
    check_feature(d, j)?;
    let values = exact_value_table(d, loss, mode)?;
    Ok(shapley_from_values(&values, d.p())[j])
}

/// Permutation importance of the regression function: `X^j` replaced by an
/// independent copy with the same marginal law.
pub fn exact_pfi(d: &DiscreteJoint, j: usize, loss: Loss) -> Result<f64> {
    check_feature(d, j)?;
    let t = Tables::new(d);
    let s = d.supports()[j].len();
    let mut marginal = vec![0.0; s];
    for cx in 0..t.px.len() {
        marginal[d.decode(cx)[j]] += t.px[cx];
    }
    let ny = d.y_support().len();
    let mut perturbed = 0.0;
    for cx in 0..t.px.len() {
        if t.px[cx] == 0.0 {
            continue;
        }
        let mut digits = d.decode(cx);
        for (a, w) in marginal.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            digits[j] = a;
            let c2 = d.encode(&digits);
            if t.px[c2] == 0.0 {
                return Err(VimError::Incompatible(
                    "the regression function is undefined at a zero-mass configuration reached by permutation".into(),
                ));
            }
            for yi in 0..ny {
                let p = d.prob(cx, yi);
                if p > 0.0 {
                    perturbed += p * w * loss.checked(d.y_support()[yi], t.m[c2])?;
                }
            }
        }
    }
    Ok(perturbed - t.risk(loss, &t.m)?)
}

/// Surplus value `v([p]) - v(-j)`.
pub fn exact_sc_sage(d: &DiscreteJoint, j: usize, loss: Loss) -> Result<f64> {
    check_feature(d, j)?;
    let t = Tables::new(d);
    let all: Vec<usize> = (0..d.p()).collect();
    Ok(t.value(&all, loss, Marginalization::Conditional)?
        - t.value(&without(d.p(), j), loss, Marginalization::Conditional)?)
}

/// Exact value of one index on a finite joint.
pub fn exact_index(d: &DiscreteJoint, j: usize, index: IndexTag, loss: Loss) -> Result<IndexValue> {
    let value = match index {
        IndexTag::Tsi => exact_tsi(d, j, loss, TsiForm::RiskDifference)?,
        IndexTag::Pfi => exact_pfi(d, j, loss)?,
        IndexTag::Sage => exact_shapley(d, j, loss, Marginalization::Conditional)?,
        IndexTag::MSage => exact_shapley(d, j, loss, Marginalization::Marginal)?,
        IndexTag::SageVf => exact_value_function(d, &[j], loss, Marginalization::Conditional)?,
        IndexTag::MSageVf => exact_value_function(d, &[j], loss, Marginalization::Marginal)?,
        IndexTag::ScSage => exact_sc_sage(d, j, loss)?,
        IndexTag::DTsi | IndexTag::Glm => {
            return Err(VimError::Incompatible(format!(
                "{index:?} is defined for linear-Gaussian models only"
            )))
        }
    };
    Ok(IndexValue {
        index,
        feature: j,
        value,
    })
}

/// Largest gap between `p(x^j, y | x^-j)` and
/// `p(x^j | x^-j) p(y | x^-j)` over all atoms with `p(x^-j) > 0`.
pub fn factorization_deviation(d: &DiscreteJoint, j: usize) -> Result<f64> {
    check_feature(d, j)?;
    let t = Tables::new(d);
    let rest = without(d.p(), j);
    let ny = d.y_support().len();
    let nk = t.key_space(&rest);
    let mut mass_rest = vec![0.0; nk];
    let mut y_rest = vec![0.0; nk * ny];
    let keys: Vec<usize> = (0..t.px.len()).map(|cx| t.key(&d.decode(cx), &rest)).collect();
    for (cx, &k) in keys.iter().enumerate() {
        mass_rest[k] += t.px[cx];
        for yi in 0..ny {
            y_rest[k * ny + yi] += d.prob(cx, yi);
        }
    }
    let mut worst = 0.0f64;
    for (cx, &k) in keys.iter().enumerate() {
        if mass_rest[k] == 0.0 {
            continue;
        }
        let pj = t.px[cx] / mass_rest[k];
        for yi in 0..ny {
            let joint = d.prob(cx, yi) / mass_rest[k];
            let py = y_rest[k * ny + yi] / mass_rest[k];
            worst = worst.max((joint - pj * py).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::fixtures::{correlated_coins, independent_coins};

    #[test]
    fn empty_coalition_mean() {
        let d = independent_coins();
        let t = exact_cond_mean(&d, &[]).unwrap();
        assert_eq!(t.rows, vec![(vec![], 0.5)]);
    }

    #[test]
    fn identity_table() {
        let d = independent_coins();
        let t = exact_cond_mean(&d, &[1]).unwrap();
        assert_eq!(t.get(&[0.0]), Some(0.0));
        assert_eq!(t.get(&[1.0]), Some(1.0));
        let t = exact_cond_mean(&d, &[0]).unwrap();
        assert_eq!(t.rows, vec![(vec![0.0], 0.5), (vec![1.0], 0.5)]);
    }

    #[test]
    fn coin_values() {
        let d = independent_coins();
        let tsi = exact_tsi(&d, 1, Loss::Quadratic, TsiForm::SquaredGap).unwrap();
        assert!((tsi - 0.25).abs() < 1e-15);
        let mi = exact_tsi(&d, 1, Loss::CrossEntropy, TsiForm::MutualInformation).unwrap();
        assert!((mi - std::f64::consts::LN_2).abs() < 1e-15);
        let pfi = exact_pfi(&d, 1, Loss::Quadratic).unwrap();
        assert!((pfi - 0.5).abs() < 1e-15);
        assert_eq!(exact_pfi(&d, 0, Loss::Quadratic).unwrap(), 0.0);
    }

    #[test]
    fn correlated_coins_witness() {
        let d = correlated_coins();
        let v1 = exact_value_function(&d, &[0], Loss::Quadratic, Marginalization::Conditional).unwrap();
        assert!((v1 - 0.09).abs() < 1e-12);
        let sh = exact_shapley(&d, 0, Loss::Quadratic, Marginalization::Conditional).unwrap();
        assert!((sh - 0.045).abs() < 1e-12);
        let tsi = exact_tsi(&d, 0, Loss::Quadratic, TsiForm::RiskDifference).unwrap();
        assert!(tsi.abs() < 1e-15);
        let msh = exact_shapley(&d, 0, Loss::Quadratic, Marginalization::Marginal).unwrap();
        assert!(msh.abs() < 1e-15);
    }

    #[test]
    fn incompatible_form_and_loss() {
        let d = independent_coins();
        assert!(exact_tsi(&d, 0, Loss::CrossEntropy, TsiForm::SquaredGap).is_err());
        assert!(exact_tsi(&d, 0, Loss::Quadratic, TsiForm::MutualInformation).is_err());
        assert!(exact_index(&d, 0, IndexTag::DTsi, Loss::Quadratic).is_err());
    }

    #[test]
    fn value_function_endpoints() {
        let d = correlated_coins();
        let v0 = exact_value_function(&d, &[], Loss::Quadratic, Marginalization::Conditional).unwrap();
        assert_eq!(v0, 0.0);
        let vp = exact_value_function(&d, &[0, 1], Loss::Quadratic, Marginalization::Conditional).unwrap();
        // y = x2 is deterministic: Var(y) - E[Var(y|X)] = 0.25
        assert!((vp - 0.25).abs() < 1e-15);
    }

    #[test]
    fn r2_form() {
        let d = independent_coins();
        assert!((exact_tsi_r2(&d, 1).unwrap() - 1.0).abs() < 1e-12);
    }
}
