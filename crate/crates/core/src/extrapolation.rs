//! Factorization lemma checks, transfer constants between exponents, and an
//! empirical check of the extrapolation bound on concrete operators.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::CorpusSpec;
use crate::error::{Error, Result};
use crate::norm_est::estimate_operator_norm;
use crate::operators::{lp_norm_unchecked, OperatorKind, Sequence};
use crate::rdf::{rdf_dual_iterate, rdf_iterate, RdfConfig, RdfResult};
use crate::weights::{ap_norm, dual_weight, BoundCheck, Exponent, Weight, LEMMA_REL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LemmaKind {
    Lstar,
    L1star,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: LemmaKind,
    pub p: f64,
    pub p0: f64,
    /// `[u]_{A_{p0}}` for the composed weight `u`.
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub holds: bool,
    /// Truncated `A_1` constant feeding the right side.
    pub a1_value: f64,
    pub ap_w: f64,
    pub rdf_terms: usize,
    pub tail_slack: f64,
    /// SHA-256 of the exact inputs, for replaying a failing instance.
    pub instance_digest: String,
}

fn instance_digest(lemma: LemmaKind, w: &Weight, h: &Sequence, p: f64, p0: f64, cfg: &RdfConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(match lemma {
        LemmaKind::Lstar => b"lstar".as_slice(),
        LemmaKind::L1star => b"l1star".as_slice(),
    });
    for x in [p, p0, cfg.k, cfg.tail_tol] {
        hasher.update(x.to_bits().to_le_bytes());
    }
    hasher.update((cfg.max_terms as u64).to_le_bytes());
    hasher.update((w.len() as u64).to_le_bytes());
    for x in w.values().iter().chain(h.values()) {
        hasher.update(x.to_bits().to_le_bytes());
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn composed_weight(w: &Weight, iterate: &Sequence, e: f64) -> Result<Weight> {
    Weight::new(
        w.values()
            .iter()
            .zip(iterate.values())
            .map(|(a, b)| a * b.powf(e))
            .collect(),
    )
}

fn lemma_report(
    lemma: LemmaKind,
    w: &Weight,
    (p, p0): (Exponent, Exponent),
    rdf: RdfResult,
    instance_digest: String,
    u_exponent: f64,
    rhs_of: impl Fn(f64, f64) -> f64,
) -> Result<LemmaReport> {
    let u = composed_weight(w, &rdf.iterate, u_exponent)?;
    let lhs = ap_norm(&u, p0)?.value;
    let a1_value = rdf
        .a1_value
        .ok_or_else(|| Error::HypothesisViolation("iterate has zero entries; h must be nonzero".into()))?;
    let ap_w = ap_norm(w, p)?.value;
    let check = BoundCheck::new(lhs, rhs_of(a1_value, ap_w), LEMMA_REL_TOL);
    Ok(LemmaReport {
        lemma,
        p: p.get(),
        p0: p0.get(),
        lhs,
        rhs: check.rhs,
        gap: check.gap,
        holds: check.holds,
        a1_value,
        ap_w,
        rdf_terms: rdf.terms_used(),
        tail_slack: rdf.tail_slack,
        instance_digest,
    })
}

/// `u = w (N h)^{-(p0-p)}` against `[N h]_{A_1}^{p0-p} [w]_{A_p}`.
pub fn lemma_lstar_check(w: &Weight, h: &Sequence, p: Exponent, p0: Exponent, cfg: &RdfConfig) -> Result<LemmaReport> {
    if p.get() >= p0.get() {
        return Err(Error::ExponentOrder(format!("need p < p0, got p = {p}, p0 = {p0}")));
    }
    let rdf = rdf_iterate(h, w, p, cfg)?;
    let d = p0.get() - p.get();
    let digest = instance_digest(LemmaKind::Lstar, w, h, p.get(), p0.get(), cfg);
    lemma_report(LemmaKind::Lstar, w, (p, p0), rdf, digest, -d, |a1, apw| {
        a1.powf(d) * apw
    })
}

/// `u = w (N' h)^{(p-p0)/(p-1)}` against
/// `[w N' h]_{A_1}^{(p-p0)/(p-1)} [w]_{A_p}^{(p0-1)/(p-1)}`.
pub fn lemma_l1star_check(w: &Weight, h: &Sequence, p: Exponent, p0: Exponent, cfg: &RdfConfig) -> Result<LemmaReport> {
    if p0.get() >= p.get() {
        return Err(Error::ExponentOrder(format!("need p0 < p, got p = {p}, p0 = {p0}")));
    }
    let rdf = rdf_dual_iterate(h, w, p, cfg)?;
    let (pv, p0v) = (p.get(), p0.get());
    let theta = (pv - p0v) / (pv - 1.0);
    let outer = (p0v - 1.0) / (pv - 1.0);
    let digest = instance_digest(LemmaKind::L1star, w, h, pv, p0v, cfg);
    lemma_report(LemmaKind::L1star, w, (p, p0), rdf, digest, theta, |a1, apw| {
        a1.powf(theta) * apw.powf(outer)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phi0Form {
    Linear,
    Power,
    Const,
}

/// An increasing function `x -> c x^a` restricted to the three builtin
/// shapes (`a = 1`, `a >= 0`, `a = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phi0 {
    pub form: Phi0Form,
    pub c: f64,
    pub a: f64,
}

impl Phi0 {
    pub fn linear(c: f64) -> Result<Self> {
        Self::build(Phi0Form::Linear, c, 1.0)
    }

    pub fn power(c: f64, a: f64) -> Result<Self> {
        Self::build(Phi0Form::Power, c, a)
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::build(Phi0Form::Const, c, 0.0)
    }

    fn build(form: Phi0Form, c: f64, a: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::BadPhiDescriptor(format!("c = {c}; need c > 0")));
        }
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::BadPhiDescriptor(format!("a = {a}; need a >= 0")));
        }
        Ok(Self { form, c, a })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.form {
            Phi0Form::Linear => self.c * x,
            Phi0Form::Const => self.c,
            Phi0Form::Power => self.c * x.powf(self.a),
        }
    }
}

impl FromStr for Phi0 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::BadPhiDescriptor(format!("`{s}`: {why}"));
        if s.trim() == "identity" {
            return Self::linear(1.0);
        }
        let (kind, body) = s.split_once(':').ok_or_else(|| bad("expected <form>:<params>"))?;
        let mut c = None;
        let mut a = None;
        for kv in body.split(',').filter(|t| !t.trim().is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let v: f64 = v.trim().parse().map_err(|_| bad("not a number"))?;
            match k.trim() {
                "c" => c = Some(v),
                "a" => a = Some(v),
                other => return Err(bad(&format!("unknown key `{other}`"))),
            }
        }
        let c = c.ok_or_else(|| bad("missing `c`"))?;
        match kind.trim() {
            "linear" if a.is_none() => Self::linear(c),
            "const" if a.is_none() => Self::constant(c),
            "power" => Self::power(c, a.ok_or_else(|| bad("missing `a`"))?),
            _ => Err(bad("unknown form or stray parameter")),
        }
    }
}

impl fmt::Display for Phi0 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.form {
            Phi0Form::Linear => write!(f, "linear:c={}", self.c),
            Phi0Form::Const => write!(f, "const:c={}", self.c),
            Phi0Form::Power => write!(f, "power:c={},a={}", self.c, self.a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Down,
    Same,
    Up,
}

impl Regime {
    pub fn of(p0: Exponent, p: Exponent) -> Self {
        match p.get().partial_cmp(&p0.get()) {
            Some(std::cmp::Ordering::Less) => Regime::Down,
            Some(std::cmp::Ordering::Greater) => Regime::Up,
            _ => Regime::Same,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferConstant {
    pub p0: f64,
    pub p: f64,
    pub regime: Regime,
    #[serde(rename = "K")]
    pub k: f64,
    pub ap_norm_value: f64,
    pub phi0: Phi0,
    /// Power of two in front of `phi0`.
    pub prefactor: f64,
    /// Argument passed to `phi0`.
    pub phi0_argument: f64,
    pub value: f64,
}

impl TransferConstant {
    /// The closed form used for this regime.
    pub fn formula(&self) -> &'static str {
        match self.regime {
            Regime::Down => "2^((p0-p)/p0) * phi0((2K)^(p0-p) * [w]_Ap)",
            Regime::Up => "2^((p-p0)/((p-1)p0)) * phi0((2K)^((p-p0)/(p-1)) * [w]_Ap^((p0-1)/(p-1)))",
            Regime::Same => "phi0([w]_Ap)",
        }
    }
}

/// `phi_p` from `phi0`, the maximal-operator constant `K` and `[w]_{A_p}`.
///
/// `K` is `||M||` on `l_p(w)` going down and `||M||` on
/// `l_{p'}(w^{1-p'})` going up.
pub fn transfer_constant(p0: Exponent, p: Exponent, phi0: Phi0, k: f64, apw: f64) -> Result<TransferConstant> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::BadConstant(format!("K = {k}; need K > 0")));
    }
    // truncated A_p constants are >= 1 up to rounding
    if !(apw.is_finite() && apw >= 1.0 - 1e-12) {
        return Err(Error::BadConstant(format!("[w]_Ap = {apw}; need >= 1")));
    }
    let (pv, p0v) = (p.get(), p0.get());
    let regime = Regime::of(p0, p);
    let (prefactor, arg) = match regime {
        Regime::Down => (2f64.powf((p0v - pv) / p0v), (2.0 * k).powf(p0v - pv) * apw),
        Regime::Up => (
            2f64.powf((pv - p0v) / ((pv - 1.0) * p0v)),
            (2.0 * k).powf((pv - p0v) / (pv - 1.0)) * apw.powf((p0v - 1.0) / (pv - 1.0)),
        ),
        Regime::Same => (1.0, apw),
    };
    Ok(TransferConstant {
        p0: p0v,
        p: pv,
        regime,
        k,
        ap_norm_value: apw,
        phi0,
        prefactor,
        phi0_argument: arg,
        value: prefactor * phi0.eval(arg),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFamily {
    pub pairs: Vec<(Sequence, Sequence)>,
    pub description: String,
}

impl PairFamily {
    pub fn new(pairs: Vec<(Sequence, Sequence)>, description: impl Into<String>) -> Result<Self> {
        let n = pairs.first().map(|(f, _)| f.len());
        for (f, g) in &pairs {
            if f.len() != g.len() {
                return Err(Error::LengthMismatch {
                    left: f.len(),
                    right: g.len(),
                });
            }
            if Some(f.len()) != n {
                return Err(Error::LengthMismatch {
                    left: f.len(),
                    right: n.unwrap_or(0),
                });
            }
        }
        Ok(Self {
            pairs,
            description: description.into(),
        })
    }

    /// Common length of the sequences, `None` for an empty family.
    pub fn n(&self) -> Option<usize> {
        self.pairs.first().map(|(f, _)| f.len())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn map_entries(&self, e: f64, description: String) -> PairFamily {
        PairFamily {
            pairs: self.pairs.iter().map(|(f, g)| (f.powf(e), g.powf(e))).collect(),
            description,
        }
    }
}

/// Pairs `(Tf, f)` for operators that do not depend on the weight.
pub fn operator_family(op: OperatorKind, sequences: Vec<Sequence>) -> Result<PairFamily> {
    if op == OperatorKind::DualMaximal {
        return Err(Error::UnsupportedOperator(format!(
            "{} depends on the weight and cannot form a fixed family",
            op.name()
        )));
    }
    let unit = Weight::constant(sequences.first().map_or(1, |s| s.len()), 1.0)?;
    let pairs = sequences
        .into_iter()
        .map(|f| Ok((op.apply(&f, &unit)?, f)))
        .collect::<Result<Vec<_>>>()?;
    PairFamily::new(pairs, format!("({}f, f)", op.name()))
}

/// `(f^r, g^r)` entrywise.
pub fn corollary_rescale(family: &PairFamily, r: f64) -> Result<PairFamily> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::BadConstant(format!("r = {r}; need r > 0")));
    }
    Ok(family.map_entries(r, format!("{} rescaled by r = {r}", family.description)))
}

/// `(f^{p0/r}, g^{p0/r})` entrywise.
pub fn corollary_ainf_reduce(family: &PairFamily, p0: f64, r: Exponent) -> Result<PairFamily> {
    if !(p0.is_finite() && p0 > 0.0) {
        return Err(Error::BadExponent(format!("p0 = {p0}; need p0 > 0")));
    }
    let e = p0 / r.get();
    Ok(family.map_entries(e, format!("{} raised to p0/r = {e}", family.description)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRatio {
    /// Largest `||f|| / ||g||` over usable pairs.
    pub value: f64,
    /// Index of the pair attaining it.
    pub pair_index: Option<usize>,
}

/// Largest `||f||_{l_p(w)} / ||g||_{l_p(w)}`; pairs with `g = 0` are skipped.
pub fn family_ratio(family: &PairFamily, w: &Weight, p: f64) -> Result<FamilyRatio> {
    if let Some(n) = family.n() {
        if n != w.len() {
            return Err(Error::LengthMismatch {
                left: n,
                right: w.len(),
            });
        }
    }
    let mut best = FamilyRatio {
        value: 0.0,
        pair_index: None,
    };
    for (i, (f, g)) in family.pairs.iter().enumerate() {
        if g.is_zero() {
            continue;
        }
        let r = lp_norm_unchecked(f.values(), w.values(), p) / lp_norm_unchecked(g.values(), w.values(), p);
        if best.pair_index.is_none() || r > best.value {
            best = FamilyRatio {
                value: r,
                pair_index: Some(i),
            };
        }
    }
    Ok(best)
}

/// Envelope fit `y <= c x^a` with `a >= 0`: least squares in log-log, then
/// `c` raised until every point lies on or below the curve.
pub fn fit_phi0(points: &[(f64, f64)]) -> Result<Phi0> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if usable.is_empty() {
        return Err(Error::EmptyCorpus("no positive (A_p, ratio) points to fit".into()));
    }
    let m = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / m;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = if sxx > 1e-24 { (sxy / sxx).max(0.0) } else { 0.0 };
    let c = points.iter().map(|(x, y)| y / x.powf(a)).fold(0.0f64, f64::max);
    Phi0::power(c, a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Evaluation budget per operator-norm estimate.
    pub budget: usize,
    pub seed: u64,
    /// Factor applied to uncertified norm estimates.
    pub safety: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            budget: 4000,
            seed: 0,
            safety: crate::norm_est::DEFAULT_SAFETY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Point {
    pub weight: String,
    pub ap_norm: f64,
    pub ratio: f64,
    pub pair_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub weight: String,
    pub ap_norm: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub k_certified: bool,
    pub measured: f64,
    pub predicted: f64,
    pub violated: bool,
    pub pair_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationReport {
    pub family: String,
    pub pairs: usize,
    /// Pairs with `g = 0`, left out of every ratio.
    pub skipped_pairs: Vec<usize>,
    pub p0: f64,
    pub p: f64,
    pub regime: Regime,
    pub phi0: Phi0,
    /// Largest `K` used in a prediction.
    #[serde(rename = "K")]
    pub k: f64,
    pub stage1: Vec<Stage1Point>,
    pub predictions: Vec<Prediction>,
    /// Weights whose measured ratio exceeds the prediction.
    pub violations: Vec<String>,
}

/// Builds the family `(Tf, f)` from the corpus and runs [`verify_family`].
pub fn extrapolation_verify(
    op: OperatorKind,
    corpus: &CorpusSpec,
    weights_p0: &[Weight],
    weights_p: &[Weight],
    p0: Exponent,
    p: Exponent,
    opts: &VerifyOptions,
) -> Result<ExtrapolationReport> {
    if op == OperatorKind::DualMaximal {
        return Err(Error::UnsupportedOperator(op.name().into()));
    }
    let family = operator_family(op, corpus.sequences()?)?;
    verify_family(&family, weights_p0, weights_p, p0, p, opts)
}

/// Stage 1 fits `phi0` to the ratios measured at `p0`; stage 2 compares
/// the ratios at `p` with the transferred bound.
pub fn verify_family(
    family: &PairFamily,
    weights_p0: &[Weight],
    weights_p: &[Weight],
    p0: Exponent,
    p: Exponent,
    opts: &VerifyOptions,
) -> Result<ExtrapolationReport> {
    if weights_p0.is_empty() || weights_p.is_empty() {
        return Err(Error::EmptyCorpus("both weight lists must be nonempty".into()));
    }
    let skipped_pairs: Vec<usize> = family
        .pairs
        .iter()
        .enumerate()
        .filter(|(_, (_, g))| g.is_zero())
        .map(|(i, _)| i)
        .collect();
    if skipped_pairs.len() == family.len() {
        return Err(Error::EmptyCorpus("no pair with nonzero g".into()));
    }
    if opts.budget == 0 {
        return Err(Error::BudgetTooSmall);
    }
    for w in weights_p0.iter().chain(weights_p) {
        w.require_positive()?;
    }

    let stage1 = weights_p0
        .par_iter()
        .map(|w0| {
            let ratio = family_ratio(family, w0, p0.get())?;
            Ok(Stage1Point {
                weight: w0.label().to_string(),
                ap_norm: ap_norm(w0, p0)?.value,
                ratio: ratio.value,
                pair_index: ratio.pair_index,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<(f64, f64)> = stage1.iter().map(|s| (s.ap_norm, s.ratio)).collect();
    let phi0 = fit_phi0(&points)?;

    let regime = Regime::of(p0, p);
    let predictions = weights_p
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let seed = opts.seed.wrapping_add(i as u64);
            let estimate = match regime {
                Regime::Up => {
                    let q = p.conjugate();
                    estimate_operator_norm(OperatorKind::Maximal, &dual_weight(w, p)?, q, opts.budget, seed)?
                }
                _ => estimate_operator_norm(OperatorKind::Maximal, w, p, opts.budget, seed)?,
            };
            let k = estimate.constant_with_safety(opts.safety);
            let apw = ap_norm(w, p)?.value;
            let predicted = transfer_constant(p0, p, phi0, k, apw)?.value;
            let measured = family_ratio(family, w, p.get())?;
            Ok(Prediction {
                weight: w.label().to_string(),
                ap_norm: apw,
                k,
                k_certified: estimate.is_certified_upper,
                measured: measured.value,
                predicted,
                violated: measured.value > predicted,
                pair_index: measured.pair_index,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = predictions
        .iter()
        .filter(|pr| pr.violated)
        .map(|pr| pr.weight.clone())
        .collect();
    let k = predictions.iter().map(|pr| pr.k).fold(0.0f64, f64::max);

    Ok(ExtrapolationReport {
        family: family.description.clone(),
        pairs: family.len(),
        skipped_pairs,
        p0: p0.get(),
        p: p.get(),
        regime,
        phi0,
        k,
        stage1,
        predictions,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64) -> Exponent {
        Exponent::new(x).unwrap()
    }

    fn seq(v: &[f64]) -> Sequence {
        Sequence::new(v.to_vec()).unwrap()
    }

    #[test]
    fn lemmas_trivial_instances() {
        let w = Weight::constant(6, 1.0).unwrap();
        let h = Sequence::constant(6, 1.0).unwrap();
        let cfg = RdfConfig::with_k(1.0).unwrap();
        let r = lemma_lstar_check(&w, &h, p(2.0), p(3.0), &cfg).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-12 && (r.rhs - 1.0).abs() < 1e-12);
        let r = lemma_l1star_check(&w, &h, p(3.0), p(2.0), &cfg).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-12 && (r.rhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lemma_order_errors() {
        let w = Weight::constant(3, 1.0).unwrap();
        let h = Sequence::constant(3, 1.0).unwrap();
        let cfg = RdfConfig::with_k(1.0).unwrap();
        assert!(matches!(
            lemma_lstar_check(&w, &h, p(3.0), p(2.0), &cfg),
            Err(Error::ExponentOrder(_))
        ));
        assert!(matches!(
            lemma_l1star_check(&w, &h, p(2.0), p(3.0), &cfg),
            Err(Error::ExponentOrder(_))
        ));
    }

    #[test]
    fn digest_tracks_inputs() {
        let w = Weight::new(vec![1.0, 4.0]).unwrap();
        let cfg = RdfConfig::with_k(1.2).unwrap();
        let a = lemma_lstar_check(&w, &seq(&[1.0, 1.0]), p(2.0), p(3.0), &cfg).unwrap();
        let b = lemma_lstar_check(&w, &seq(&[1.0, 1.0]), p(2.0), p(3.0), &cfg).unwrap();
        let c = lemma_lstar_check(&w, &seq(&[1.0, 2.0]), p(2.0), p(3.0), &cfg).unwrap();
        assert_eq!(a.instance_digest, b.instance_digest);
        assert_ne!(a.instance_digest, c.instance_digest);
        assert_eq!(a.instance_digest.len(), 64);
    }

    #[test]
    fn transfer_constant_examples() {
        let id = Phi0::linear(1.0).unwrap();
        let down = transfer_constant(p(3.0), p(2.0), id, 2.0, 1.0).unwrap();
        assert_eq!(down.regime, Regime::Down);
        assert!((down.value - 2f64.powf(1.0 / 3.0) * 4.0).abs() < 1e-12);
        let up = transfer_constant(p(2.0), p(3.0), id, 2.0, 1.0).unwrap();
        assert_eq!(up.regime, Regime::Up);
        assert!((up.value - 2f64.powf(0.25) * 2.0).abs() < 1e-12);
        let phi: Phi0 = "power:c=1.5,a=0.5".parse().unwrap();
        let same = transfer_constant(p(2.0), p(2.0), phi, 7.0, 1.0).unwrap();
        assert_eq!(same.regime, Regime::Same);
        assert_eq!(same.value, 1.5);
    }

    #[test]
    fn transfer_constant_rejects_bad_inputs() {
        let id = Phi0::linear(1.0).unwrap();
        assert!(transfer_constant(p(2.0), p(3.0), id, 0.0, 1.0).is_err());
        assert!(transfer_constant(p(2.0), p(3.0), id, 1.0, 0.5).is_err());
    }

    #[test]
    fn phi0_descriptors() {
        assert_eq!("linear:c=2".parse::<Phi0>().unwrap().eval(3.0), 6.0);
        assert_eq!("const:c=2".parse::<Phi0>().unwrap().eval(3.0), 2.0);
        assert_eq!("power:c=2,a=2".parse::<Phi0>().unwrap().eval(3.0), 18.0);
        assert_eq!("identity".parse::<Phi0>().unwrap().eval(3.0), 3.0);
        for bad in [
            "linear",
            "power:c=1",
            "power:c=1,a=-1",
            "const:c=0",
            "exp:c=1",
            "linear:c=1,a=2",
        ] {
            assert!(matches!(bad.parse::<Phi0>(), Err(Error::BadPhiDescriptor(_))), "{bad}");
        }
        let phi: Phi0 = "power:c=1.25,a=0.5".parse().unwrap();
        assert_eq!(phi.to_string().parse::<Phi0>().unwrap(), phi);
    }

    #[test]
    fn fit_is_an_envelope() {
        let pts = [(1.0, 1.0), (2.0, 1.9), (4.0, 4.2), (8.0, 7.0)];
        let phi = fit_phi0(&pts).unwrap();
        assert!(phi.a > 0.5);
        assert!(pts.iter().all(|(x, y)| phi.eval(*x) >= *y * (1.0 - 1e-12)));
        let flat = fit_phi0(&[(1.0, 2.0), (3.0, 1.0)]).unwrap();
        assert_eq!(flat.a, 0.0);
        assert_eq!(flat.c, 2.0);
    }

    #[test]
    fn rescale_examples() {
        let fam = PairFamily::new(vec![(seq(&[2.0, 0.0]), seq(&[4.0, 0.0]))], "one").unwrap();
        assert_eq!(corollary_rescale(&fam, 1.0).unwrap().pairs, fam.pairs);
        let sq = corollary_rescale(&fam, 2.0).unwrap();
        assert_eq!(sq.pairs[0].0.values(), &[4.0, 0.0]);
        assert_eq!(sq.pairs[0].1.values(), &[16.0, 0.0]);
        let back = corollary_rescale(&corollary_rescale(&fam, 0.5).unwrap(), 2.0).unwrap();
        for ((f, g), (f0, g0)) in back.pairs.iter().zip(&fam.pairs) {
            for (a, b) in f
                .values()
                .iter()
                .zip(f0.values())
                .chain(g.values().iter().zip(g0.values()))
            {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
        assert!(corollary_rescale(&fam, 0.0).is_err());
    }

    #[test]
    fn ainf_reduce_examples() {
        let fam = PairFamily::new(vec![(seq(&[4.0]), seq(&[9.0]))], "one").unwrap();
        let red = corollary_ainf_reduce(&fam, 2.0, p(4.0)).unwrap();
        assert_eq!(red.pairs[0].0.values(), &[2.0]);
        assert_eq!(red.pairs[0].1.values(), &[3.0]);
        assert_eq!(corollary_ainf_reduce(&fam, 4.0, p(4.0)).unwrap().pairs, fam.pairs);
        assert!(corollary_ainf_reduce(&fam, -1.0, p(4.0)).is_err());
    }

    #[test]
    fn pair_family_validates_lengths() {
        assert!(PairFamily::new(vec![(seq(&[1.0]), seq(&[1.0, 2.0]))], "x").is_err());
        assert!(PairFamily::new(
            vec![(seq(&[1.0]), seq(&[1.0])), (seq(&[1.0, 1.0]), seq(&[1.0, 1.0]))],
            "x"
        )
        .is_err());
    }

    #[test]
    fn identity_has_unit_ratios() {
        let corpus = CorpusSpec::new(32, 1);
        let ws: Vec<Weight> = [-0.3, 0.0, 0.3]
            .iter()
            .map(|&l| Weight::power(32, l).unwrap())
            .collect();
        let rep = extrapolation_verify(
            OperatorKind::Identity,
            &corpus,
            &ws,
            &ws,
            p(2.0),
            p(3.0),
            &VerifyOptions::default(),
        )
        .unwrap();
        assert!(rep.stage1.iter().all(|s| (s.ratio - 1.0).abs() < 1e-12));
        assert!(rep.predictions.iter().all(|pr| (pr.measured - 1.0).abs() < 1e-12));
        assert!(rep.violations.is_empty());
    }

    #[test]
    fn zero_g_pairs_are_skipped() {
        let fam = PairFamily::new(
            vec![
                (seq(&[1.0, 0.0]), seq(&[0.0, 0.0])),
                (seq(&[1.0, 1.0]), seq(&[1.0, 1.0])),
            ],
            "x",
        )
        .unwrap();
        let w = Weight::constant(2, 1.0).unwrap();
        let rep = verify_family(
            &fam,
            std::slice::from_ref(&w),
            std::slice::from_ref(&w),
            p(2.0),
            p(3.0),
            &VerifyOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.skipped_pairs, vec![0]);
        assert_eq!(rep.predictions[0].pair_index, Some(1));
    }

    #[test]
    fn dual_maximal_is_unsupported() {
        let corpus = CorpusSpec::new(8, 1);
        let w = vec![Weight::constant(8, 1.0).unwrap()];
        assert!(matches!(
            extrapolation_verify(
                OperatorKind::DualMaximal,
                &corpus,
                &w,
                &w,
                p(2.0),
                p(3.0),
                &VerifyOptions::default()
            ),
            Err(Error::UnsupportedOperator(_))
        ));
    }
}
