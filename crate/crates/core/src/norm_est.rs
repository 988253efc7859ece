//! Lower-bound estimation of operator norms on `l_p(w)`.
//!
//! Maximizing `||Tf|| / ||f||` over `f >= 0` is a convex maximization, so in
//! general only lower bounds are available. Three strategies are combined:
//!
//! * a fixed candidate family (prefix indicators, the dual-power sequence
//!   `w^{-1/(p-1)}` and its prefix truncations, unit vectors);
//! * random restarts followed by multiplicative coordinate ascent;
//! * for `N <= 3`, a branch-and-bound cover of the scale-free domain that
//!   also yields a certified upper bound. It relies on monotonicity: for
//!   `lo <= f <= hi` entrywise, `||Tf|| / ||f|| <= ||T hi|| / ||lo||`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{lp_norm_unchecked, OperatorKind, Sequence};
use crate::weights::{Exponent, Weight};

/// Largest truncation for which the exhaustive cover runs.
pub const EXHAUSTIVE_MAX_N: usize = 3;
/// Cell cap for the exhaustive cover.
const EXHAUSTIVE_MAX_CELLS: usize = 3_000_000;
/// Relative gap at which the cover stops, per dimension of the free face.
const EXHAUSTIVE_TOL_1D: f64 = 1e-11;
const EXHAUSTIVE_TOL_2D: f64 = 1e-6;
/// Coordinate ascent stops once the multiplicative step falls below this.
const ASCENT_MIN_STEP: f64 = 1e-6;
const ASCENT_INITIAL_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStrategy {
    ExhaustiveSmall,
    RandomRestartAscent,
    CandidateFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorNormEstimate {
    pub operator: OperatorKind,
    pub p: f64,
    /// `||T witness|| / ||witness||`, a lower bound for the operator norm.
    pub value: f64,
    pub witness: Sequence,
    pub strategy: SearchStrategy,
    pub evaluations: usize,
    /// Set when the exhaustive cover closed the gap to its tolerance; then
    /// `upper_bound` is a proven bound on the truncated operator norm.
    #[serde(rename = "certified")]
    pub is_certified_upper: bool,
    pub upper_bound: Option<f64>,
}

impl OperatorNormEstimate {
    /// The certified upper bound when available, otherwise
    /// `value * safety`.
    pub fn constant_with_safety(&self, safety: f64) -> f64 {
        match (self.is_certified_upper, self.upper_bound) {
            (true, Some(u)) => u,
            _ => self.value * safety,
        }
    }
}

/// Default factor applied to uncertified estimates where an upper bound is
/// needed.
pub const DEFAULT_SAFETY: f64 = 1.5;

struct Problem<'a> {
    op: OperatorKind,
    w: &'a [f64],
    p: f64,
    evaluations: usize,
}

impl Problem<'_> {
    fn ratio(&mut self, f: &[f64]) -> f64 {
        self.evaluations += 1;
        let den = lp_norm_unchecked(f, self.w, self.p);
        if den == 0.0 {
            return 0.0;
        }
        let tf = self.op.apply_values(f, self.w);
        lp_norm_unchecked(&tf, self.w, self.p) / den
    }

    fn upper(&mut self, lo: &[f64], hi: &[f64]) -> f64 {
        self.evaluations += 1;
        let den = lp_norm_unchecked(lo, self.w, self.p);
        let tf = self.op.apply_values(hi, self.w);
        lp_norm_unchecked(&tf, self.w, self.p) / den
    }
}

#[derive(Debug)]
struct Best {
    value: f64,
    witness: Vec<f64>,
    strategy: SearchStrategy,
}

impl Best {
    fn offer(&mut self, value: f64, f: &[f64], strategy: SearchStrategy) {
        // strict `>` keeps the earliest candidate on ties
        if value > self.value {
            self.value = value;
            self.witness = f.to_vec();
            self.strategy = strategy;
        }
    }
}

/// Estimates `||T||` on `l_p(w)` for `T` in {maximal, dual_maximal, hardy}.
///
/// `budget` bounds the evaluations spent by the candidate family and the
/// ascent; the exhaustive cover for `N <= 3` has its own fixed cell cap.
/// The result is deterministic given `seed`.
pub fn estimate_operator_norm(
    op: OperatorKind,
    w: &Weight,
    p: Exponent,
    budget: usize,
    seed: u64,
) -> Result<OperatorNormEstimate> {
    if budget == 0 {
        return Err(Error::BudgetTooSmall);
    }
    w.require_positive()?;
    match op {
        OperatorKind::Maximal | OperatorKind::Hardy => estimate_direct(op, w, p, budget, seed),
        OperatorKind::DualMaximal => {
            // ||M'||_{l_q(w)} = ||M||_{l_q(w^{1-q})} under f = w h
            let q = p.get();
            let shifted = w.powf(1.0 - q)?;
            let inner = estimate_direct(OperatorKind::Maximal, &shifted, p, budget, seed)?;
            let h: Vec<f64> = inner
                .witness
                .values()
                .iter()
                .zip(w.values())
                .map(|(f, wt)| f / wt)
                .collect();
            let mut problem = Problem {
                op,
                w: w.values(),
                p: q,
                evaluations: 0,
            };
            let value = problem.ratio(&h);
            Ok(OperatorNormEstimate {
                operator: op,
                value,
                witness: Sequence::from_trusted(h),
                ..inner
            })
        }
        OperatorKind::Identity => Err(Error::UnsupportedOperator(op.name().into())),
    }
}

fn estimate_direct(
    op: OperatorKind,
    w: &Weight,
    p: Exponent,
    budget: usize,
    seed: u64,
) -> Result<OperatorNormEstimate> {
    let n = w.len();
    let mut problem = Problem {
        op,
        w: w.values(),
        p: p.get(),
        evaluations: 0,
    };
    let ones = vec![1.0; n];
    let first = problem.ratio(&ones);
    let mut best = Best {
        value: first,
        witness: ones,
        strategy: SearchStrategy::CandidateFamily,
    };

    candidate_family(&mut problem, &mut best, budget);
    random_restart_ascent(&mut problem, &mut best, budget, seed);

    let mut certified = false;
    let mut upper_bound = None;
    if n <= EXHAUSTIVE_MAX_N {
        let cover = exhaustive_cover(&mut problem, &mut best);
        certified = cover.closed;
        upper_bound = Some(cover.upper);
        if certified {
            best.strategy = SearchStrategy::ExhaustiveSmall;
        }
    }

    let witness = best.witness;
    let value = problem.ratio(&witness);
    Ok(OperatorNormEstimate {
        operator: op,
        p: p.get(),
        value,
        witness: Sequence::from_trusted(witness),
        strategy: best.strategy,
        evaluations: problem.evaluations,
        is_certified_upper: certified,
        upper_bound,
    })
}

/// Window ends `m` to try: all of them when affordable, otherwise a
/// geometric grid.
fn window_ends(n: usize, max_count: usize) -> Vec<usize> {
    if n <= max_count {
        return (1..=n).collect();
    }
    let count = max_count.max(2);
    let ratio = (n as f64).powf(1.0 / (count - 1) as f64);
    let mut ends: Vec<usize> = (0..count)
        .map(|i| (ratio.powi(i as i32).round() as usize).clamp(1, n))
        .collect();
    ends.dedup();
    ends
}

fn candidate_family(problem: &mut Problem, best: &mut Best, budget: usize) {
    let n = problem.w.len();
    let sigma: Vec<f64> = problem.w.iter().map(|v| v.powf(-1.0 / (problem.p - 1.0))).collect();
    let tag = SearchStrategy::CandidateFamily;
    let r = problem.ratio(&sigma);
    best.offer(r, &sigma, tag);

    // half the budget goes to the family, split over three sub-families
    let per_family = (budget / 6).max(1);
    let mut f = vec![0.0; n];
    for m in window_ends(n, per_family) {
        if problem.evaluations >= budget / 2 {
            return;
        }
        f.iter_mut()
            .enumerate()
            .for_each(|(i, x)| *x = if i < m { 1.0 } else { 0.0 });
        let r = problem.ratio(&f);
        best.offer(r, &f, tag);
        f.iter_mut()
            .enumerate()
            .for_each(|(i, x)| *x = if i < m { sigma[i] } else { 0.0 });
        let r = problem.ratio(&f);
        best.offer(r, &f, tag);
    }
    for k in window_ends(n, per_family) {
        if problem.evaluations >= budget / 2 {
            return;
        }
        f.iter_mut().for_each(|x| *x = 0.0);
        f[k - 1] = 1.0;
        let r = problem.ratio(&f);
        best.offer(r, &f, tag);
    }
}

/// Multiplicative coordinate ascent from `start`; returns the local optimum.
fn ascend(problem: &mut Problem, start: Vec<f64>, budget: usize) -> (Vec<f64>, f64) {
    let mut f = start;
    let mut current = problem.ratio(&f);
    let mut step = ASCENT_INITIAL_STEP;
    while step >= ASCENT_MIN_STEP && problem.evaluations < budget {
        let mut improved = false;
        for k in 0..f.len() {
            for factor in [1.0 + step, 1.0 - step] {
                if problem.evaluations >= budget {
                    return (f, current);
                }
                let old = f[k];
                f[k] = old * factor;
                let r = problem.ratio(&f);
                if r > current {
                    current = r;
                    improved = true;
                    break;
                }
                f[k] = old;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (f, current)
}

fn random_restart_ascent(problem: &mut Problem, best: &mut Best, budget: usize, seed: u64) {
    let n = problem.w.len();
    let tag = SearchStrategy::RandomRestartAscent;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // polish the best candidate first; zeros cannot move multiplicatively
    if problem.evaluations < budget {
        let peak = best.witness.iter().cloned().fold(0.0, f64::max);
        let start: Vec<f64> = best
            .witness
            .iter()
            .map(|&x| if x > 0.0 { x } else { peak * 1e-6 })
            .collect();
        let (f, r) = ascend(problem, start, budget);
        best.offer(r, &f, tag);
    }
    while problem.evaluations < budget {
        // log-uniform on [1e-3, 1]
        let start: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(-3.0..0.0))).collect();
        let (f, r) = ascend(problem, start, budget);
        best.offer(r, &f, tag);
    }
}

struct Cell {
    upper: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.upper == other.upper
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper.total_cmp(&other.upper)
    }
}

struct CoverOutcome {
    upper: f64,
    closed: bool,
}

/// Branch and bound over the faces `{f : f_j = 1, 0 <= f_i <= 1}` of the
/// unit cube, which meet every ray of the nonnegative orthant.
fn exhaustive_cover(problem: &mut Problem, best: &mut Best) -> CoverOutcome {
    let n = problem.w.len();
    let tol = if n <= 2 { EXHAUSTIVE_TOL_1D } else { EXHAUSTIVE_TOL_2D };
    let tag = SearchStrategy::ExhaustiveSmall;
    let mut heap = BinaryHeap::new();
    for j in 0..n {
        let mut lo = vec![0.0; n];
        let hi = vec![1.0; n];
        lo[j] = 1.0;
        let upper = problem.upper(&lo, &hi);
        heap.push(Cell { upper, lo, hi });
    }
    let mut cells = 0usize;
    while let Some(cell) = heap.pop() {
        // float slack on the monotone bound
        let upper = cell.upper * (1.0 + 4.0 * f64::EPSILON);
        if upper <= best.value * (1.0 + tol) {
            return CoverOutcome {
                upper: upper.max(best.value),
                closed: true,
            };
        }
        cells += 1;
        if cells > EXHAUSTIVE_MAX_CELLS {
            return CoverOutcome { upper, closed: false };
        }
        let mid: Vec<f64> = cell.lo.iter().zip(&cell.hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let r = problem.ratio(&mid);
        best.offer(r, &mid, tag);
        let split = (0..n)
            .max_by(|&a, &b| (cell.hi[a] - cell.lo[a]).total_cmp(&(cell.hi[b] - cell.lo[b])))
            .expect("nonempty");
        if cell.hi[split] - cell.lo[split] == 0.0 {
            // a single point: its bound is its value
            let r = problem.ratio(&cell.lo);
            best.offer(r, &cell.lo, tag);
            continue;
        }
        let cut = mid[split];
        let mut left_hi = cell.hi.clone();
        left_hi[split] = cut;
        let mut right_lo = cell.lo.clone();
        right_lo[split] = cut;
        let lu = problem.upper(&cell.lo, &left_hi);
        let ru = problem.upper(&right_lo, &cell.hi);
        heap.push(Cell {
            upper: lu,
            lo: cell.lo,
            hi: left_hi,
        });
        heap.push(Cell {
            upper: ru,
            lo: right_lo,
            hi: cell.hi,
        });
    }
    CoverOutcome {
        upper: best.value,
        closed: true,
    }
}
