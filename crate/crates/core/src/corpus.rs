//! Seeded random families of weights and test sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::log_uniform;
use crate::operators::{maximal_values, Sequence};
use crate::weights::{Exponent, Weight};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `(Mf)^delta` for log-uniform `f` and `delta` in `[0.3, 0.9]`, or
/// `k^lambda` with `lambda` in `(-0.9, 0]`.
pub fn random_a1_weight<R: Rng>(rng: &mut R, n: usize) -> Result<Weight> {
    if rng.gen_bool(0.5) {
        let lambda = rng.gen_range(-0.9..=0.0);
        let mut w = Weight::power(n, lambda)?;
        w.set_label(format!("a1:power:lambda={lambda}"));
        Ok(w)
    } else {
        let delta: f64 = rng.gen_range(0.3..0.9);
        let f = log_uniform(rng, n, 1e-2, 1e2);
        let mf = maximal_values(&f);
        Weight::with_label(
            mf.iter().map(|x| x.powf(delta)).collect(),
            format!("a1:maximal:delta={delta}"),
        )
    }
}

/// Weights with finite, moderate `A_p` constant: reverse factorizations
/// `w1 w2^{1-p}` of `A_1` weights, power weights `k^lambda` with
/// `-1 < lambda < p - 1`, and mild log-uniform noise.
pub fn random_ap_weight<R: Rng>(rng: &mut R, n: usize, p: Exponent) -> Result<Weight> {
    let p = p.get();
    match rng.gen_range(0..3) {
        0 => {
            let w1 = random_a1_weight(rng, n)?;
            let w2 = random_a1_weight(rng, n)?;
            let values = w1
                .values()
                .iter()
                .zip(w2.values())
                .map(|(a, b)| a * b.powf(1.0 - p))
                .collect();
            Weight::with_label(values, "ap:factored")
        }
        1 => {
            let lambda = rng.gen_range(-0.9..(0.9 * (p - 1.0)));
            let mut w = Weight::power(n, lambda)?;
            w.set_label(format!("ap:power:lambda={lambda}"));
            Ok(w)
        }
        _ => Weight::with_label(log_uniform(rng, n, 0.25, 4.0), "ap:loguniform"),
    }
}

pub fn power_weights(n: usize, lambdas: &[f64]) -> Result<Vec<Weight>> {
    lambdas.iter().map(|&l| Weight::power(n, l)).collect()
}

/// `count` power weights with exponents evenly spaced over
/// `[-0.9, 0.95 (p - 1)]`, all of finite `A_p` constant.
pub fn power_weight_span(n: usize, p: Exponent, count: usize) -> Result<Vec<Weight>> {
    if count == 0 {
        return Err(Error::EmptyCorpus("power span with count = 0".into()));
    }
    let (lo, hi) = (-0.9, 0.95 * (p.get() - 1.0));
    let lambdas: Vec<f64> = if count == 1 {
        vec![0.0]
    } else {
        (0..count)
            .map(|i| {
                let l = lo + (hi - lo) * i as f64 / (count - 1) as f64;
                (l * 1e12).round() / 1e12
            })
            .collect()
    };
    power_weights(n, &lambdas)
}

/// Log-uniform positive entries in `[lo, hi]`.
pub fn random_positive<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Sequence {
    Sequence::from_trusted(log_uniform(rng, n, lo, hi))
}

/// Nonnegative entries, roughly a quarter of them zero, never all zero.
pub fn random_nonnegative<R: Rng>(rng: &mut R, n: usize) -> Sequence {
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.25) {
                0.0
            } else {
                10f64.powf(rng.gen_range(-2.0..2.0))
            }
        })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        let k = rng.gen_range(0..n);
        v[k] = 1.0;
    }
    Sequence::from_trusted(v)
}

/// Test sequences used to probe operator ratios. They do not depend on any
/// weight or exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n: usize,
    pub seed: u64,
    /// Log-uniform random sequences added after the structured ones.
    pub random_count: usize,
}

impl CorpusSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            random_count: 16,
        }
    }

    /// Prefix indicators and unit vectors on a geometric grid, power decays
    /// `k^{-gamma}`, then random sequences.
    pub fn sequences(&self) -> Result<Vec<Sequence>> {
        let n = self.n;
        if n == 0 {
            return Err(Error::EmptyCorpus("N = 0".into()));
        }
        let mut grid = vec![];
        let mut m = 1usize;
        while m < n {
            grid.push(m);
            m = (m * 2).max(m + 1);
        }
        grid.push(n);

        let mut out = Vec::new();
        for &m in &grid {
            out.push(Sequence::from_trusted(
                (0..n).map(|i| if i < m { 1.0 } else { 0.0 }).collect(),
            ));
        }
        for &k in &grid {
            let mut v = vec![0.0; n];
            v[k - 1] = 1.0;
            out.push(Sequence::from_trusted(v));
        }
        for gamma in [0.2, 1.0 / 3.0, 0.5, 0.75, 1.0, 1.5, 2.0] {
            out.push(Sequence::from_trusted(
                (1..=n).map(|k| (k as f64).powf(-gamma)).collect(),
            ));
        }
        let mut rng = rng(self.seed);
        for _ in 0..self.random_count {
            out.push(random_positive(&mut rng, n, 1e-3, 1.0));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{a1_norm, ap_norm};

    #[test]
    fn corpus_is_deterministic_and_nonzero() {
        let spec = CorpusSpec::new(100, 4);
        let a = spec.sequences().unwrap();
        assert_eq!(a, spec.sequences().unwrap());
        assert!(a.iter().all(|s| s.len() == 100 && !s.is_zero()));
        assert!(CorpusSpec::new(0, 1).sequences().is_err());
    }

    #[test]
    fn generated_weights_have_finite_constants() {
        let mut r = rng(1);
        let p = Exponent::new(2.0).unwrap();
        for _ in 0..30 {
            let a1 = random_a1_weight(&mut r, 64).unwrap();
            assert!(a1_norm(&a1).unwrap().value.is_finite());
            let ap = random_ap_weight(&mut r, 64, p).unwrap();
            let v = ap_norm(&ap, p).unwrap().value;
            assert!(v.is_finite() && v >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn power_span_endpoints() {
        let ws = power_weight_span(8, Exponent::new(3.0).unwrap(), 5).unwrap();
        assert_eq!(ws.len(), 5);
        assert_eq!(ws[0].label(), "power:lambda=-0.9");
        assert!((ws[4].values()[1] - 2f64.powf(1.9)).abs() < 1e-12);
    }

    #[test]
    fn nonnegative_never_all_zero() {
        let mut r = rng(2);
        for _ in 0..200 {
            assert!(!random_nonnegative(&mut r, 2).is_zero());
        }
    }
}
