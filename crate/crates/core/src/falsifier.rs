//! Discretized weighted Hardy-type inequalities: exact evaluation of both
//! sides, the correction ratio `zeta`, and a search for violating data.
//!
//! With `Lambda[1,k] = lambda(1) + ... + lambda(k)` and `Mv(k)` the
//! `lambda`-weighted average of `v` over `[1, k]`:
//!
//! * `kl1`: `sum lambda(k) Lambda[1,k]^{a-1} Mv(k)^b`
//!   against `(b / (b - a))^b sum lambda(k) Lambda[1,k]^{a-1} v(k)^b`;
//! * `ka1`: the same with `Mv(k - 1)` on the left, the `k = 1` term being 0.
//!
//! The unweighted variants are the literal `lambda = 1` displays with
//! `b - a = 1` (`_pos`) or `b - a = -1` (`_neg`).

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{prefix_sums, NeumaierSum};
use crate::operators::Sequence;
use crate::weights::Weight;

/// Tolerance on the `b - a = +-1` hypothesis of the unweighted forms.
const UNWEIGHTED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityForm {
    Kl1,
    Kl1UnweightedPos,
    Kl1UnweightedNeg,
    Ka1,
    Ka1Pos,
    Ka1Neg,
}

impl InequalityForm {
    pub const ALL: [InequalityForm; 6] = [
        InequalityForm::Kl1,
        InequalityForm::Kl1UnweightedPos,
        InequalityForm::Kl1UnweightedNeg,
        InequalityForm::Ka1,
        InequalityForm::Ka1Pos,
        InequalityForm::Ka1Neg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InequalityForm::Kl1 => "kl1",
            InequalityForm::Kl1UnweightedPos => "kl1_unweighted_pos",
            InequalityForm::Kl1UnweightedNeg => "kl1_unweighted_neg",
            InequalityForm::Ka1 => "ka1",
            InequalityForm::Ka1Pos => "ka1_pos",
            InequalityForm::Ka1Neg => "ka1_neg",
        }
    }

    fn shifted(self) -> bool {
        matches!(
            self,
            InequalityForm::Ka1 | InequalityForm::Ka1Pos | InequalityForm::Ka1Neg
        )
    }

    /// `Some(+1)` or `Some(-1)` for the unweighted forms.
    fn unweighted_sign(self) -> Option<f64> {
        match self {
            InequalityForm::Kl1UnweightedPos | InequalityForm::Ka1Pos => Some(1.0),
            InequalityForm::Kl1UnweightedNeg | InequalityForm::Ka1Neg => Some(-1.0),
            _ => None,
        }
    }
}

impl fmt::Display for InequalityForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InequalityForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::BadForm(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityInstance {
    pub form: InequalityForm,
    pub alpha: f64,
    pub beta: f64,
    /// `None` means `lambda = 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Weight>,
    pub v: Sequence,
}

impl InequalityInstance {
    pub fn new(form: InequalityForm, alpha: f64, beta: f64, v: Vec<f64>) -> Result<Self> {
        let inst = Self {
            form,
            alpha,
            beta,
            lambda: None,
            v: Sequence::new(v)?,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_lambda(mut self, lambda: Weight) -> Result<Self> {
        self.lambda = Some(lambda);
        self.validate()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.alpha, self.beta);
        let hyp = |msg: String| Err(Error::HypothesisViolation(msg));
        if self.v.is_empty() {
            return hyp("v must have at least one entry".into());
        }
        if !(a > 0.0 && a < 1.0) {
            return hyp(format!("alpha = {a}; need 0 < alpha < 1"));
        }
        if !b.is_finite() || (0.0..1.0).contains(&b) {
            return hyp(format!("beta = {b}; need beta < 0 or beta >= 1"));
        }
        if let Some(sign) = self.form.unweighted_sign() {
            if ((b - a) - sign).abs() > UNWEIGHTED_TOL {
                return hyp(format!("{} needs beta - alpha = {sign}, got {}", self.form, b - a));
            }
            if self
                .lambda
                .as_ref()
                .is_some_and(|l| l.values().iter().any(|&x| x != 1.0))
            {
                return hyp(format!("{} is unweighted; lambda must be 1", self.form));
            }
        }
        if b < 0.0 && self.v.values().iter().any(|&x| x <= 0.0) {
            return hyp("beta < 0 needs v > 0".into());
        }
        if let Some(l) = &self.lambda {
            if l.len() != self.v.len() {
                return Err(Error::LengthMismatch {
                    left: l.len(),
                    right: self.v.len(),
                });
            }
            if l.values()[0] <= 0.0 {
                return Err(Error::ZeroPrefixSum { index: 1 });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sides {
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
    /// `lhs - rhs`; positive when violated.
    pub margin: f64,
}

impl Sides {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            violated: lhs > rhs,
            margin: lhs - rhs,
        }
    }
}

/// Nonnegative powers keep `0^b = 0` for `b >= 1`.
fn pow(x: f64, b: f64) -> f64 {
    if x == 0.0 && b > 0.0 {
        0.0
    } else {
        x.powf(b)
    }
}

pub fn eval_sides(inst: &InequalityInstance) -> Result<Sides> {
    inst.validate()?;
    let (a, b) = (inst.alpha, inst.beta);
    let v = inst.v.values();
    let n = v.len();
    let ks = |k: usize| k as f64;

    let mut lhs = NeumaierSum::new();
    let mut rhs = NeumaierSum::new();
    match inst.form {
        InequalityForm::Kl1UnweightedPos | InequalityForm::Kl1UnweightedNeg => {
            // literal displays: sum k^{-2} S_k^b, resp. sum S_k^b
            let s = prefix_sums(v.iter().copied());
            let lhs_power = if inst.form == InequalityForm::Kl1UnweightedPos {
                -2.0
            } else {
                0.0
            };
            for k in 1..=n {
                lhs.add(ks(k).powf(lhs_power) * pow(s[k - 1], b));
                rhs.add(pow(v[k - 1], b) / ks(k).powf(1.0 - a));
            }
            let c = if inst.form == InequalityForm::Kl1UnweightedPos {
                b
            } else {
                -b
            };
            return Ok(Sides::new(lhs.value(), c.powf(b) * rhs.value()));
        }
        InequalityForm::Ka1Pos | InequalityForm::Ka1Neg => {
            let s = prefix_sums(v.iter().copied());
            for k in 1..=n {
                if k >= 2 {
                    lhs.add(pow(s[k - 2] / ks(k - 1), b) / ks(k).powf(1.0 - a));
                }
                rhs.add(pow(v[k - 1], b) / ks(k).powf(1.0 - a));
            }
            let c = if inst.form == InequalityForm::Ka1Pos { b } else { -b };
            return Ok(Sides::new(lhs.value(), c.powf(b) * rhs.value()));
        }
        InequalityForm::Kl1 | InequalityForm::Ka1 => {}
    }

    let ones;
    let lambda = match &inst.lambda {
        Some(l) => l.values(),
        None => {
            ones = vec![1.0; n];
            &ones
        }
    };
    let big = prefix_sums(lambda.iter().copied());
    let num = prefix_sums(lambda.iter().zip(v).map(|(l, x)| l * x));
    for k in 1..=n {
        let coeff = lambda[k - 1] / big[k - 1].powf(1.0 - a);
        let avg_at = if inst.form.shifted() { k - 1 } else { k };
        if avg_at >= 1 {
            lhs.add(coeff * pow(num[avg_at - 1] / big[avg_at - 1], b));
        }
        rhs.add(coeff * pow(v[k - 1], b));
    }
    let c = (b / (b - a)).powf(b);
    Ok(Sides::new(lhs.value(), c * rhs.value()))
}

/// `max_{2 <= k <= N} Lambda[1,k] / Lambda[1,k-1]`.
pub fn zeta_constant(lambda: &Weight) -> Result<f64> {
    if lambda.len() < 2 {
        return Err(Error::TooShort {
            need: 2,
            got: lambda.len(),
        });
    }
    lambda.require_positive()?;
    let big = prefix_sums(lambda.values().iter().copied());
    Ok(big.windows(2).map(|w| w[1] / w[0]).fold(f64::MIN, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub form: InequalityForm,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Weight>,
    pub v: Sequence,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub violated: bool,
}

impl InstanceReport {
    pub fn evaluate(inst: &InequalityInstance) -> Result<Self> {
        let sides = eval_sides(inst)?;
        Ok(Self {
            form: inst.form,
            n: inst.n(),
            alpha: inst.alpha,
            beta: inst.beta,
            lambda: inst.lambda.clone(),
            v: inst.v.clone(),
            lhs: sides.lhs,
            rhs: sides.rhs,
            margin: sides.margin,
            violated: sides.violated,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: InstanceReport,
    /// `lhs / rhs - 1`, the scale-free objective.
    pub relative_margin: f64,
    pub evaluations: usize,
    pub restarts: usize,
}

const SEARCH_MIN_STEP: f64 = 1e-6;
const SEARCH_BOX: f64 = 1e8;

/// Maximizes `lhs / rhs` over `v > 0` from log-uniform restarts with
/// multiplicative coordinate moves; the reported instance is rescaled so
/// that `min v = 1`. `lambda = 1` throughout.
pub fn violation_search(
    form: InequalityForm,
    n: usize,
    alpha: f64,
    beta: f64,
    budget: usize,
    seed: u64,
) -> Result<SearchResult> {
    if budget == 0 {
        return Err(Error::BudgetTooSmall);
    }
    if n == 0 {
        return Err(Error::TooShort { need: 1, got: 0 });
    }
    // validates the hypotheses once
    InequalityInstance::new(form, alpha, beta, vec![1.0; n])?;

    let evaluations = Cell::new(0usize);
    let objective = |v: &[f64]| -> f64 {
        evaluations.set(evaluations.get() + 1);
        let inst = InequalityInstance {
            form,
            alpha,
            beta,
            lambda: None,
            v: Sequence::from_trusted(v.to_vec()),
        };
        match eval_sides(&inst) {
            Ok(s) if s.rhs > 0.0 => s.lhs / s.rhs,
            _ => f64::NEG_INFINITY,
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| 10f64.powf(rng.gen_range(-2.0..2.0))).collect() };
    let mut best_v = draw(&mut rng);
    let mut best = objective(&best_v);
    let mut restarts = 1usize;
    let mut start = best_v.clone();
    let mut current = best;
    loop {
        let mut step = 0.5;
        let mut v = start;
        while step >= SEARCH_MIN_STEP {
            let mut improved = false;
            for k in 0..n {
                for factor in [1.0 + step, 1.0 / (1.0 + step)] {
                    if evaluations.get() >= budget {
                        break;
                    }
                    let old = v[k];
                    let moved = (old * factor).clamp(1.0 / SEARCH_BOX, SEARCH_BOX);
                    if moved == old {
                        continue;
                    }
                    v[k] = moved;
                    let r = objective(&v);
                    if r > current {
                        current = r;
                        improved = true;
                        break;
                    }
                    v[k] = old;
                }
            }
            if evaluations.get() >= budget {
                break;
            }
            if !improved {
                step *= 0.5;
            }
        }
        if current > best {
            best = current;
            best_v = v;
        }
        if evaluations.get() >= budget {
            break;
        }
        start = draw(&mut rng);
        current = objective(&start);
        restarts += 1;
    }

    let scale = best_v.iter().cloned().fold(f64::INFINITY, f64::min);
    let normalized: Vec<f64> = best_v.iter().map(|x| x / scale).collect();
    let inst = InequalityInstance::new(form, alpha, beta, normalized)?;
    let report = InstanceReport::evaluate(&inst)?;
    Ok(SearchResult {
        relative_margin: report.lhs / report.rhs - 1.0,
        best: report,
        evaluations: evaluations.get(),
        restarts,
    })
}

/// A printed value and the accepted deviation from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Printed {
    pub value: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCase {
    pub label: &'static str,
    pub instance: InequalityInstance,
    pub lhs: Printed,
    pub rhs: Printed,
    pub violated: bool,
}

/// The four published numeric examples.
pub fn paper_instances() -> Vec<GoldenCase> {
    let pos = vec![100.0, 1.0, 1.0, 1.0];
    let neg = vec![1.0, 5.0, 9.0, 13.0, 17.0];
    let inst =
        |form, a, b, v: &Vec<f64>| InequalityInstance::new(form, a, b, v.clone()).expect("valid golden instance");
    let pr = |value| Printed { value, tol: 5e-4 };
    vec![
        GoldenCase {
            label: "unweighted_pos",
            instance: inst(InequalityForm::Kl1UnweightedPos, 0.2, 1.2, &pos),
            lhs: pr(359.587),
            rhs: pr(314.263),
            violated: true,
        },
        GoldenCase {
            label: "unweighted_neg",
            instance: inst(InequalityForm::Kl1UnweightedNeg, 0.1, -0.9, &neg),
            lhs: Printed {
                value: 1.36913,
                tol: 5e-6,
            },
            rhs: pr(1.3406),
            violated: true,
        },
        GoldenCase {
            label: "shifted_pos",
            instance: inst(InequalityForm::Ka1Pos, 0.2, 1.2, &pos),
            lhs: pr(212.922),
            rhs: pr(314.263),
            violated: false,
        },
        GoldenCase {
            label: "shifted_neg",
            instance: inst(InequalityForm::Ka1Neg, 0.1, -0.9, &neg),
            lhs: pr(0.7743),
            rhs: pr(1.3516),
            violated: false,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCheck {
    pub label: String,
    pub instance: InstanceReport,
    pub printed_lhs: f64,
    pub printed_rhs: f64,
    pub lhs_ok: bool,
    pub rhs_ok: bool,
    pub violated_ok: bool,
    pub ok: bool,
}

pub fn check_golden(case: &GoldenCase) -> Result<GoldenCheck> {
    let report = InstanceReport::evaluate(&case.instance)?;
    let lhs_ok = (report.lhs - case.lhs.value).abs() <= case.lhs.tol;
    let rhs_ok = (report.rhs - case.rhs.value).abs() <= case.rhs.tol;
    let violated_ok = report.violated == case.violated;
    Ok(GoldenCheck {
        label: case.label.to_string(),
        printed_lhs: case.lhs.value,
        printed_rhs: case.rhs.value,
        lhs_ok,
        rhs_ok,
        violated_ok,
        ok: lhs_ok && rhs_ok && violated_ok,
        instance: report,
    })
}
