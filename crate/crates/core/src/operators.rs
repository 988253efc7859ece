//! Discrete averaging and maximal operators on truncated sequences.
//!
//! The maximal operator at index `n` is the largest Hardy average over the
//! windows `[1, m]` with `n <= m <= N`, i.e. a suffix maximum of prefix
//! averages. Consequently `Mf` is nonincreasing in `n`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{prefix_sums, sum};
use crate::weights::Weight;

/// A nonnegative sequence `f(1..N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sequence(Vec<f64>);

impl Sequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::NegativeEntry { index: i + 1, value: v });
        }
        Ok(Self(values))
    }

    pub(crate) fn from_trusted(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| *v >= 0.0));
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_trusted(self.0.iter().map(|v| v * c).collect())
    }

    pub fn powf(&self, e: f64) -> Self {
        Self::from_trusted(
            self.0
                .iter()
                .map(|&v| if v == 0.0 && e > 0.0 { 0.0 } else { v.powf(e) })
                .collect(),
        )
    }

    /// Entrywise product with a weight.
    pub fn times_weight(&self, w: &Weight) -> Result<Self> {
        check_len(self.len(), w.len())?;
        Ok(Self::from_trusted(
            self.0.iter().zip(w.values()).map(|(a, b)| a * b).collect(),
        ))
    }

    pub fn as_weight(&self) -> Result<Weight> {
        Weight::new(self.0.clone())
    }
}

impl From<Weight> for Sequence {
    fn from(w: Weight) -> Self {
        Self::from_trusted(w.into_values())
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

pub(crate) fn hardy_values(f: &[f64]) -> Vec<f64> {
    prefix_sums(f.iter().copied())
        .into_iter()
        .enumerate()
        .map(|(i, s)| s / (i + 1) as f64)
        .collect()
}

/// Suffix maxima of `averages`, together with the smallest maximizing index.
fn suffix_max_with_index(averages: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = averages.len();
    let mut out = vec![0.0; n];
    let mut idx = vec![0; n];
    let mut best = f64::NEG_INFINITY;
    let mut best_i = n;
    for i in (0..n).rev() {
        // `>=` so that ties resolve to the smallest window
        if averages[i] >= best {
            best = averages[i];
            best_i = i;
        }
        out[i] = best;
        idx[i] = best_i;
    }
    (out, idx)
}

pub(crate) fn maximal_values(f: &[f64]) -> Vec<f64> {
    suffix_max_with_index(&hardy_values(f)).0
}

/// `Hf(n) = (1/n) sum_{k<=n} f(k)`.
pub fn hardy(f: &Sequence) -> Sequence {
    Sequence::from_trusted(hardy_values(f.values()))
}

/// `Mf(n) = max_{n <= m <= N} Hf(m)`.
pub fn maximal(f: &Sequence) -> Sequence {
    Sequence::from_trusted(maximal_values(f.values()))
}

/// `Mf` together with the 1-based window end `m` attaining each entry
/// (smallest `m` on ties).
pub fn maximal_with_witness(f: &Sequence) -> (Sequence, Vec<usize>) {
    let (vals, idx) = suffix_max_with_index(&hardy_values(f.values()));
    (Sequence::from_trusted(vals), idx.into_iter().map(|i| i + 1).collect())
}

/// `M^w f(n) = max_{n <= m <= N} (1/W(m)) sum_{s<=m} w(s) f(s)` with
/// `W(m) = sum_{s<=m} w(s)`.
pub fn weighted_maximal(f: &Sequence, w: &Weight) -> Result<Sequence> {
    check_len(f.len(), w.len())?;
    w.require_positive()?;
    let num = prefix_sums(f.values().iter().zip(w.values()).map(|(a, b)| a * b));
    let den = prefix_sums(w.values().iter().copied());
    let avgs: Vec<f64> = num.iter().zip(&den).map(|(a, b)| a / b).collect();
    Ok(Sequence::from_trusted(suffix_max_with_index(&avgs).0))
}

/// `M'h = M(w h) / w`.
pub fn dual_maximal(h: &Sequence, w: &Weight) -> Result<Sequence> {
    check_len(h.len(), w.len())?;
    w.require_positive()?;
    let m = maximal_values(h.times_weight(w)?.values());
    Ok(Sequence::from_trusted(
        m.iter().zip(w.values()).map(|(a, b)| a / b).collect(),
    ))
}

/// `Gg = (M(g^{1/gamma} w) / w)^gamma`.
pub fn g_operator(g: &Sequence, w: &Weight, gamma: f64) -> Result<Sequence> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    if gamma == 1.0 {
        return dual_maximal(g, w);
    }
    let inner = dual_maximal(&g.powf(1.0 / gamma), w)?;
    Ok(inner.powf(gamma))
}

/// `(sum_k w(k) |f(k)|^p)^{1/p}` for `p >= 1`.
pub fn lp_norm(f: &Sequence, w: &Weight, p: f64) -> Result<f64> {
    if !p.is_finite() || p < 1.0 {
        return Err(Error::BadExponent(format!("p = {p}; p >= 1 is required")));
    }
    check_len(f.len(), w.len())?;
    Ok(lp_norm_unchecked(f.values(), w.values(), p))
}

pub(crate) fn lp_norm_unchecked(f: &[f64], w: &[f64], p: f64) -> f64 {
    let s = sum(f
        .iter()
        .zip(w)
        .filter(|(x, _)| **x != 0.0)
        .map(|(x, wt)| wt * x.abs().powf(p)));
    s.powf(1.0 / p)
}

/// Operators addressable by name from reports and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Hardy,
    Maximal,
    DualMaximal,
    Identity,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Hardy => "hardy",
            OperatorKind::Maximal => "maximal",
            OperatorKind::DualMaximal => "dual_maximal",
            OperatorKind::Identity => "identity",
        }
    }

    /// Applies the operator; `w` is consulted only by `dual_maximal`.
    pub fn apply(self, f: &Sequence, w: &Weight) -> Result<Sequence> {
        match self {
            OperatorKind::Hardy => Ok(hardy(f)),
            OperatorKind::Maximal => Ok(maximal(f)),
            OperatorKind::DualMaximal => dual_maximal(f, w),
            OperatorKind::Identity => Ok(f.clone()),
        }
    }

    /// Raw-slice variant used in tight search loops; `w` must be positive.
    pub(crate) fn apply_values(self, f: &[f64], w: &[f64]) -> Vec<f64> {
        match self {
            OperatorKind::Hardy => hardy_values(f),
            OperatorKind::Maximal => maximal_values(f),
            OperatorKind::DualMaximal => {
                let wf: Vec<f64> = f.iter().zip(w).map(|(a, b)| a * b).collect();
                maximal_values(&wf).iter().zip(w).map(|(a, b)| a / b).collect()
            }
            OperatorKind::Identity => f.to_vec(),
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "hardy" => Ok(OperatorKind::Hardy),
            "maximal" => Ok(OperatorKind::Maximal),
            "dual_maximal" => Ok(OperatorKind::DualMaximal),
            "identity" => Ok(OperatorKind::Identity),
            other => Err(Error::UnsupportedOperator(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> Sequence {
        Sequence::new(v.to_vec()).unwrap()
    }

    fn w(v: &[f64]) -> Weight {
        Weight::new(v.to_vec()).unwrap()
    }

    fn close(a: &Sequence, b: &[f64]) -> bool {
        a.len() == b.len() && a.values().iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-14)
    }

    // O(N^2) reference for the maximal operator
    fn brute_maximal(f: &[f64]) -> Vec<f64> {
        (1..=f.len())
            .map(|n| {
                (n..=f.len())
                    .map(|m| f[..m].iter().sum::<f64>() / m as f64)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    #[test]
    fn hardy_examples() {
        assert!(close(&hardy(&s(&[2.0; 4])), &[2.0; 4]));
        assert!(close(&hardy(&s(&[1.0, 2.0, 3.0])), &[1.0, 1.5, 2.0]));
        assert!(close(&hardy(&s(&[100.0, 1.0, 1.0, 1.0])), &[100.0, 50.5, 34.0, 25.75]));
    }

    #[test]
    fn maximal_examples() {
        assert!(close(&maximal(&s(&[3.0; 5])), &[3.0; 5]));
        assert!(close(&maximal(&s(&[1.0, 0.0, 0.0])), &[1.0, 0.5, 1.0 / 3.0]));
        assert!(close(&maximal(&s(&[0.0, 0.0, 3.0])), &[1.0, 1.0, 1.0]));
        let f = [0.3, 2.0, 0.1, 5.0, 0.0, 0.7, 1.1];
        assert!(close(&maximal(&s(&f)), &brute_maximal(&f)));
    }

    #[test]
    fn maximal_witness_prefers_smallest_window() {
        // averages (1, 1, 1): every window ties, so m = n
        let (_, idx) = maximal_with_witness(&s(&[1.0, 1.0, 1.0]));
        assert_eq!(idx, vec![1, 2, 3]);
        let (_, idx) = maximal_with_witness(&s(&[0.0, 0.0, 3.0]));
        assert_eq!(idx, vec![3, 3, 3]);
    }

    #[test]
    fn weighted_maximal_examples() {
        let f = s(&[0.2, 1.5, 0.0, 0.9]);
        let ones = w(&[1.0; 4]);
        assert!(close(&weighted_maximal(&f, &ones).unwrap(), maximal(&f).values()));
        let r = weighted_maximal(&s(&[0.0, 0.0, 1.0]), &w(&[1.0, 1.0, 2.0])).unwrap();
        assert!(close(&r, &[0.5, 0.5, 0.5]));
        let r = weighted_maximal(&s(&[4.0; 3]), &w(&[1.0, 7.0, 0.5])).unwrap();
        assert!(close(&r, &[4.0; 3]));
    }

    #[test]
    fn dual_maximal_examples() {
        let h = s(&[0.4, 0.0, 2.0]);
        assert!(close(&dual_maximal(&h, &w(&[1.0; 3])).unwrap(), maximal(&h).values()));
        let r = dual_maximal(&s(&[1.0, 0.0]), &w(&[1.0, 4.0])).unwrap();
        assert!(close(&r, &[1.0, 0.125]));
        let r = dual_maximal(&Sequence::zeros(2), &w(&[1.0, 4.0])).unwrap();
        assert!(r.is_zero());
        assert!(dual_maximal(&h, &w(&[1.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn g_operator_examples() {
        let g = s(&[0.3, 1.2, 0.0]);
        let wt = w(&[1.0, 2.0, 0.5]);
        assert_eq!(g_operator(&g, &wt, 1.0).unwrap(), dual_maximal(&g, &wt).unwrap());
        let r = g_operator(&s(&[1.0, 0.0]), &w(&[1.0, 1.0]), 0.5).unwrap();
        assert!(close(&r, &[1.0, 0.5f64.sqrt()]));
        assert!(g_operator(&Sequence::zeros(3), &wt, 0.3).unwrap().is_zero());
        assert_eq!(g_operator(&g, &wt, 0.0), Err(Error::GammaOutOfRange(0.0)));
    }

    #[test]
    fn lp_norm_examples() {
        let ones = w(&[1.0, 1.0]);
        assert_eq!(lp_norm(&Sequence::zeros(2), &ones, 2.0).unwrap(), 0.0);
        assert!((lp_norm(&s(&[3.0, 4.0]), &ones, 2.0).unwrap() - 5.0).abs() < 1e-15);
        assert!((lp_norm(&s(&[1.0, 1.0]), &w(&[1.0, 4.0]), 2.0).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert!(lp_norm(&s(&[1.0, 1.0]), &ones, 0.5).is_err());
    }

    #[test]
    fn operator_kind_parse() {
        assert_eq!(
            "dual_maximal".parse::<OperatorKind>().unwrap(),
            OperatorKind::DualMaximal
        );
        assert!(matches!(
            "fourier".parse::<OperatorKind>(),
            Err(Error::UnsupportedOperator(_))
        ));
    }
}
