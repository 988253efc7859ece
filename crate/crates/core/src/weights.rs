//! Discrete weights and their truncated class constants.
//!
//! A [`Weight`] is a finite truncation `w(1..N)` of a weight on the positive
//! integers. Every supremum over `n` is taken over the windows `[1, n]` with
//! `n <= N`, so the reported constants are lower bounds for the infinite
//! sequence and increase monotonically with `N`.
//!
//! All scans are O(N) using compensated prefix sums.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{argmax_first, prefix_sums, NeumaierSum};

/// Slack used when a computed constant should be `>= 1` but rounding pushed
/// it just below.
pub const UNIT_FLOOR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    values: Vec<f64>,
    #[serde(default)]
    label: String,
}

impl Weight {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_label(values, "")
    }

    pub fn with_label(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyWeight);
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::NegativeEntry { index: i + 1, value: v });
        }
        Ok(Self {
            values,
            label: label.into(),
        })
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::with_label(vec![c; n], format!("const:c={c}"))
    }

    /// `w(k) = k^lambda` for `k = 1..=n`.
    pub fn power(n: usize, lambda: f64) -> Result<Self> {
        Self::with_label(
            (1..=n).map(|k| (k as f64).powf(lambda)).collect(),
            format!("power:lambda={lambda}"),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Fails with the 1-based index of the first zero entry.
    pub fn require_positive(&self) -> Result<()> {
        match self.values.iter().position(|&v| v == 0.0) {
            Some(i) => Err(Error::ZeroWeightEntry { index: i + 1 }),
            None => Ok(()),
        }
    }

    /// Entrywise power. Requires positive entries when `exponent < 0`.
    pub fn powf(&self, exponent: f64) -> Result<Self> {
        if exponent < 0.0 {
            self.require_positive()?;
        }
        Self::with_label(
            self.values.iter().map(|v| v.powf(exponent)).collect(),
            format!("({})^{exponent}", self.label),
        )
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::with_label(
            self.values.iter().map(|v| v * c).collect(),
            format!("{c}*({})", self.label),
        )
    }
}

/// An exponent `p > 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p <= 1.0 {
            return Err(Error::BadExponent(format!("p = {p}; p > 1 is required")));
        }
        Ok(Self(p))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// `p' = p / (p - 1)`.
    pub fn conjugate(self) -> Self {
        Self(self.0 / (self.0 - 1.0))
    }
}

impl TryFrom<f64> for Exponent {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<Exponent> for f64 {
    fn from(p: Exponent) -> f64 {
        p.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Ap,
    A1,
    Ainf,
    Bp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub kind: NormKind,
    /// The exponent for `Ap` and `Bp` reports.
    pub p: Option<f64>,
    pub value: f64,
    /// 1-based window index attaining `value` (first one on ties).
    pub argmax_n: usize,
    /// Truncation length.
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_n: Option<Vec<f64>>,
}

impl NormReport {
    fn from_profile(kind: NormKind, p: Option<f64>, per_n: Vec<f64>) -> Self {
        let (i, value) = argmax_first(&per_n);
        Self {
            kind,
            p,
            value,
            argmax_n: i + 1,
            n: per_n.len(),
            per_n: Some(per_n),
        }
    }

    pub fn without_profile(mut self) -> Self {
        self.per_n = None;
        self
    }
}

/// Truncated `[w]_{A_p}`: the largest over `n <= N` of
/// `avg_n(w) * avg_n(w^{-1/(p-1)})^{p-1}`.
pub fn ap_norm(w: &Weight, p: Exponent) -> Result<NormReport> {
    w.require_positive()?;
    let p = p.get();
    let dual_exp = -1.0 / (p - 1.0);
    let sw = prefix_sums(w.values().iter().copied());
    let sd = prefix_sums(w.values().iter().map(|v| v.powf(dual_exp)));
    let per_n = sw
        .iter()
        .zip(&sd)
        .enumerate()
        .map(|(i, (a, b))| {
            let n = (i + 1) as f64;
            (a / n) * (b / n).powf(p - 1.0)
        })
        .collect();
    Ok(NormReport::from_profile(NormKind::Ap, Some(p), per_n))
}

/// Truncated `[w]_{A_1}`: the largest over `n` of `Mw(n) / w(n)`, where
/// `Mw(n)` is the largest average over windows `[1, m]`, `n <= m <= N`.
pub fn a1_norm(w: &Weight) -> Result<NormReport> {
    w.require_positive()?;
    let mw = crate::operators::maximal_values(w.values());
    let per_n = mw.iter().zip(w.values()).map(|(m, v)| m / v).collect();
    Ok(NormReport::from_profile(NormKind::A1, None, per_n))
}

/// Truncated `[w]_{A_inf}`: the largest over `n` of
/// `avg_n(w) * exp(avg_n(log(1/w)))`.
pub fn ainf_norm(w: &Weight) -> Result<NormReport> {
    w.require_positive()?;
    let sw = prefix_sums(w.values().iter().copied());
    let sl = prefix_sums(w.values().iter().map(|v| -v.ln()));
    let per_n = sw
        .iter()
        .zip(&sl)
        .enumerate()
        .map(|(i, (a, l))| {
            let n = (i + 1) as f64;
            (a / n) * (l / n).exp()
        })
        .collect();
    Ok(NormReport::from_profile(NormKind::Ainf, None, per_n))
}

/// Optional analytic continuation of the `B_p` tail beyond `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BpTail {
    /// Tail truncated at `N`.
    #[default]
    None,
    /// The weight continues as `scale * k^lambda` for `k > N`.
    Power { lambda: f64, scale: f64 },
}

impl BpTail {
    /// `sum_{k > n} scale * k^(lambda - p)`, by the midpoint integral
    /// `int_{n + 1/2}^inf x^s dx`, exact up to O(n^(s-2)).
    pub fn remainder(self, n: usize, p: f64) -> Result<f64> {
        match self {
            BpTail::None => Ok(0.0),
            BpTail::Power { lambda, scale } => {
                let s = lambda - p;
                if s >= -1.0 {
                    return Err(Error::DivergentTail { lambda, p });
                }
                let x0 = n as f64 + 0.5;
                Ok(scale * x0.powf(s + 1.0) / (-(s + 1.0)))
            }
        }
    }
}

/// Truncated `B_p` constant: the largest over `n` of
/// `n^p * sum_{k=n}^{N} w(k)/k^p / sum_{k<=n} w(k)`, plus the analytic tail
/// when one is supplied.
pub fn bp_constant(w: &Weight, p: f64, tail: BpTail) -> Result<NormReport> {
    if !p.is_finite() || p <= 0.0 {
        return Err(Error::BadExponent(format!("p = {p}; B_p needs p > 0")));
    }
    let vals = w.values();
    let n_len = vals.len();
    let head = prefix_sums(vals.iter().copied());
    if let Some(i) = head.iter().position(|&s| s <= 0.0) {
        return Err(Error::ZeroPrefixSum { index: i + 1 });
    }
    let remainder = tail.remainder(n_len, p)?;
    let mut suffix = vec![0.0; n_len];
    let mut acc = NeumaierSum::new();
    acc.add(remainder);
    for k in (0..n_len).rev() {
        acc.add(vals[k] / ((k + 1) as f64).powf(p));
        suffix[k] = acc.value();
    }
    let per_n = (0..n_len)
        .map(|i| ((i + 1) as f64).powf(p) * suffix[i] / head[i])
        .collect();
    Ok(NormReport::from_profile(NormKind::Bp, Some(p), per_n))
}

/// `w^{1-p'}`, the weight dual to `w` under the `l_p(w)` / `l_{p'}` pairing.
pub fn dual_weight(w: &Weight, p: Exponent) -> Result<Weight> {
    w.require_positive()?;
    let e = 1.0 - p.conjugate().get();
    let mut out = w.powf(e)?;
    out.set_label(format!("dual_p={}({})", p.get(), w.label()));
    Ok(out)
}

/// Closed-form estimate of `[n^lambda]_{A_p}`:
/// `(1/(1+lambda)) * ((p-1)/(p-lambda-1))^{p-1}`.
pub fn power_phi(p: Exponent, lambda: f64) -> Result<f64> {
    let p = p.get();
    if !(lambda > -1.0 && lambda < p - 1.0) {
        return Err(Error::LambdaOutOfRange { lambda, upper: p - 1.0 });
    }
    Ok((1.0 / (1.0 + lambda)) * ((p - 1.0) / (p - lambda - 1.0)).powf(p - 1.0))
}

fn check_same_len(a: &Weight, b: &Weight) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Reverse factorization `w1 * w2^{1-p}`.
pub fn factor_compose(w1: &Weight, w2: &Weight, p: Exponent) -> Result<Weight> {
    check_same_len(w1, w2)?;
    w1.require_positive()?;
    w2.require_positive()?;
    let e = 1.0 - p.get();
    Weight::with_label(
        w1.values()
            .iter()
            .zip(w2.values())
            .map(|(a, b)| a * b.powf(e))
            .collect(),
        format!("({})*({})^{e}", w1.label(), w2.label()),
    )
}

/// A computed inequality `lhs <= rhs * (1 + tol)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; nonnegative exactly when the untoleranced bound holds.
    pub gap: f64,
    pub holds: bool,
}

impl BoundCheck {
    pub fn new(lhs: f64, rhs: f64, rel_tol: f64) -> Self {
        Self {
            lhs,
            rhs,
            gap: rhs - lhs,
            holds: lhs <= rhs * (1.0 + rel_tol),
        }
    }
}

/// Relative tolerance for the per-window lemma bounds.
pub const LEMMA_REL_TOL: f64 = 1e-9;

/// `[w1 w2^{1-p}]_{A_p} <= [w1]_{A_1} [w2]_{A_1}^{p-1}`, evaluated on the
/// truncation.
pub fn factorization_bound(w1: &Weight, w2: &Weight, p: Exponent) -> Result<BoundCheck> {
    let composed = factor_compose(w1, w2, p)?;
    let lhs = ap_norm(&composed, p)?.value;
    let rhs = a1_norm(w1)?.value * a1_norm(w2)?.value.powf(p.get() - 1.0);
    Ok(BoundCheck::new(lhs, rhs, LEMMA_REL_TOL))
}

/// Truncated norms on an increasing grid of exponents.
pub fn ap_norm_profile(w: &Weight, grid: &[Exponent]) -> Result<Vec<NormReport>> {
    if grid.windows(2).any(|pair| pair[1].get() <= pair[0].get()) {
        return Err(Error::GridNotIncreasing);
    }
    grid.iter().map(|&p| ap_norm(w, p)).collect()
}

/// First exponent of the grid at which the truncated `A_p` norm is at most
/// `bound`.
pub fn first_exponent_within(w: &Weight, grid: &[Exponent], bound: f64) -> Result<Option<Exponent>> {
    let reports = ap_norm_profile(w, grid)?;
    Ok(grid
        .iter()
        .zip(&reports)
        .find(|(_, r)| r.value <= bound)
        .map(|(p, _)| *p))
}

/// `w1^alpha * w2^{1-alpha}`.
pub fn interpolate_weights(w1: &Weight, w2: &Weight, alpha: f64) -> Result<Weight> {
    check_same_len(w1, w2)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    w1.require_positive()?;
    w2.require_positive()?;
    Weight::with_label(
        w1.values()
            .iter()
            .zip(w2.values())
            .map(|(a, b)| a.powf(alpha) * b.powf(1.0 - alpha))
            .collect(),
        format!("({})^{alpha}*({})^{}", w1.label(), w2.label(), 1.0 - alpha),
    )
}

/// Hölder bound `[w1^a w2^{1-a}]_{A_p} <= [w1]^a [w2]^{1-a}`; `gap` is the
/// measured slack.
pub fn interpolation_gap(w1: &Weight, w2: &Weight, alpha: f64, p: Exponent) -> Result<BoundCheck> {
    let mixed = interpolate_weights(w1, w2, alpha)?;
    let lhs = ap_norm(&mixed, p)?.value;
    let rhs = ap_norm(w1, p)?.value.powf(alpha) * ap_norm(w2, p)?.value.powf(1.0 - alpha);
    Ok(BoundCheck::new(lhs, rhs, LEMMA_REL_TOL))
}
