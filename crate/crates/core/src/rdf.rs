//! Truncated Rubio de Francia iteration and its dual.
//!
//! `N_S h = sum_{s=0}^{S} M^s h / (2K)^s`. For the dual iteration `M` is
//! replaced by `M'h = M(wh)/w` and norms are taken in `l_{p'}(w)`.
//!
//! Sublinearity of `M` gives, for any `K > 0`,
//! `M(N_S h) <= 2K (N_S h - h + M^{S+1} h / (2K)^{S+1})`, so the `A_1`
//! claim is reported with the explicit relative slack
//! `max_n (M^{S+1}h(n) / (2K)^{S+1} - h(n))_+ / N_S h(n)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{lp_norm_unchecked, maximal_values, Sequence};
use crate::weights::{a1_norm, Exponent, NormReport, Weight, LEMMA_REL_TOL};

/// Consecutive non-decaying terms tolerated before giving up.
const STALL_LIMIT: usize = 3;
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_TERMS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdfConfig {
    /// Stand-in for the operator norm; guarantees need `K >= ||M||`.
    #[serde(rename = "K")]
    pub k: f64,
    pub max_terms: usize,
    pub tail_tol: f64,
}

impl RdfConfig {
    pub fn new(k: f64, max_terms: usize, tail_tol: f64) -> Result<Self> {
        let cfg = Self { k, max_terms, tail_tol };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_k(k: f64) -> Result<Self> {
        Self::new(k, DEFAULT_MAX_TERMS, DEFAULT_TAIL_TOL)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::BadConstant(format!("K = {}; K > 0 is required", self.k)));
        }
        if !(self.tail_tol.is_finite() && self.tail_tol > 0.0) {
            return Err(Error::BadConstant(format!(
                "tail_tol = {}; tail_tol > 0 is required",
                self.tail_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RdfChecks {
    /// `h <= iterate` entrywise.
    pub i: bool,
    /// `||iterate|| <= 2 ||h||` up to rounding.
    pub ii: bool,
    /// `[iterate]_{A_1} <= 2K (1 + tail_slack)` up to rounding.
    pub iii: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RdfVariant {
    Primal,
    Dual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdfResult {
    pub variant: RdfVariant,
    /// Exponent of the space the norms are measured in (`p'` for the dual).
    pub norm_exponent: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub iterate: Sequence,
    /// `||M^s h|| / (2K)^s` for the terms actually summed.
    pub term_norms: Vec<f64>,
    pub h_norm: f64,
    pub iterate_norm: f64,
    /// `||h|| 2^{-S}`, sound only when `K >= ||M||`.
    pub tail_bound: f64,
    pub tail_slack: f64,
    /// `A_1` of the iterate (of `w * iterate` for the dual); `None` when it
    /// has zero entries.
    pub a1_report: Option<NormReport>,
    pub a1_value: Option<f64>,
    pub checks: RdfChecks,
}

impl RdfResult {
    /// Number of summed terms minus one.
    pub fn terms_used(&self) -> usize {
        self.term_norms.len().saturating_sub(1)
    }

    pub fn term_norm_sum(&self) -> f64 {
        crate::numeric::sum(self.term_norms.iter().copied())
    }
}

pub fn rdf_iterate(h: &Sequence, w: &Weight, p: Exponent, cfg: &RdfConfig) -> Result<RdfResult> {
    run(h, w, p.get(), cfg, RdfVariant::Primal)
}

/// `p` is the primal exponent; norms are measured in `l_{p'}(w)` and `K`
/// stands for `||M'||` there.
pub fn rdf_dual_iterate(h: &Sequence, w: &Weight, p: Exponent, cfg: &RdfConfig) -> Result<RdfResult> {
    run(h, w, p.conjugate().get(), cfg, RdfVariant::Dual)
}

fn run(h: &Sequence, w: &Weight, q: f64, cfg: &RdfConfig, variant: RdfVariant) -> Result<RdfResult> {
    cfg.validate()?;
    w.require_positive()?;
    if h.len() != w.len() {
        return Err(Error::LengthMismatch {
            left: h.len(),
            right: w.len(),
        });
    }
    let wv = w.values();
    let step = |f: &[f64]| -> Vec<f64> {
        match variant {
            RdfVariant::Primal => maximal_values(f),
            RdfVariant::Dual => {
                let wf: Vec<f64> = f.iter().zip(wv).map(|(a, b)| a * b).collect();
                maximal_values(&wf).iter().zip(wv).map(|(a, b)| a / b).collect()
            }
        }
    };
    let two_k = 2.0 * cfg.k;
    let h_norm = lp_norm_unchecked(h.values(), wv, q);

    if h.is_zero() {
        return Ok(RdfResult {
            variant,
            norm_exponent: q,
            k: cfg.k,
            iterate: h.clone(),
            term_norms: vec![0.0],
            h_norm: 0.0,
            iterate_norm: 0.0,
            tail_bound: 0.0,
            tail_slack: 0.0,
            a1_report: None,
            a1_value: None,
            checks: RdfChecks {
                i: true,
                ii: true,
                iii: true,
            },
        });
    }

    let mut iterate = h.values().to_vec();
    let mut term = h.values().to_vec();
    let mut term_norms = vec![h_norm];
    let mut stalled = 0usize;
    for s in 1..=cfg.max_terms {
        term = step(&term).into_iter().map(|x| x / two_k).collect();
        let norm = lp_norm_unchecked(&term, wv, q);
        let prev = *term_norms.last().expect("nonempty");
        term_norms.push(norm);
        iterate.iter_mut().zip(&term).for_each(|(a, t)| *a += t);
        if norm >= prev {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                return Err(Error::NonconvergentSeries { term: s });
            }
        } else {
            stalled = 0;
        }
        if norm < cfg.tail_tol * h_norm {
            break;
        }
    }
    let summed = term_norms.len() - 1;

    // one more application bounds what the truncation discards
    let next: Vec<f64> = step(&term).into_iter().map(|x| x / two_k).collect();
    let tail_slack = next
        .iter()
        .zip(h.values())
        .zip(&iterate)
        .map(|((nx, hx), it)| if *it > 0.0 { (nx - hx) / it } else { 0.0 })
        .fold(0.0f64, f64::max);

    let iterate_norm = lp_norm_unchecked(&iterate, wv, q);
    let a1_input: Vec<f64> = match variant {
        RdfVariant::Primal => iterate.clone(),
        RdfVariant::Dual => iterate.iter().zip(wv).map(|(a, b)| a * b).collect(),
    };
    let a1_report = if a1_input.iter().all(|&x| x > 0.0) {
        Some(a1_norm(&Weight::new(a1_input)?)?.without_profile())
    } else {
        None
    };
    let a1_value = a1_report.as_ref().map(|r| r.value);

    let checks = RdfChecks {
        i: iterate.iter().zip(h.values()).all(|(a, b)| a >= b),
        ii: iterate_norm <= 2.0 * h_norm * (1.0 + LEMMA_REL_TOL),
        iii: a1_value.is_some_and(|a| a <= two_k * (1.0 + tail_slack) * (1.0 + LEMMA_REL_TOL)),
    };

    Ok(RdfResult {
        variant,
        norm_exponent: q,
        k: cfg.k,
        iterate: Sequence::from_trusted(iterate),
        term_norms,
        h_norm,
        iterate_norm,
        tail_bound: h_norm * 0.5f64.powi(summed as i32),
        tail_slack,
        a1_report,
        a1_value,
        checks,
    })
}
