//! Weight generator specs and plain-text weight files.
//!
//! Grammar: `power:lambda=<f>`, `const:c=<f>`,
//! `random:dist=loguniform,lo=<f>,hi=<f>,seed=<u64>`, `file:<path>`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::weights::Weight;

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    Power { lambda: f64 },
    Const { c: f64 },
    LogUniform { lo: f64, hi: f64, seed: u64 },
    File(PathBuf),
}

fn bad(spec: &str, why: &str) -> Error {
    Error::BadGenerator(format!("`{spec}`: {why}"))
}

fn parse_params<'a>(spec: &str, body: &'a str) -> Result<Vec<(&'a str, &'a str)>> {
    body.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| bad(spec, &format!("expected key=value, got `{kv}`")))
        })
        .collect()
}

fn take<'a>(spec: &str, params: &[(&str, &'a str)], key: &str) -> Result<&'a str> {
    params
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| bad(spec, &format!("missing `{key}`")))
}

fn take_f64(spec: &str, params: &[(&str, &str)], key: &str) -> Result<f64> {
    let raw = take(spec, params, key)?;
    let v: f64 = raw
        .parse()
        .map_err(|_| bad(spec, &format!("`{key}` is not a number")))?;
    if !v.is_finite() {
        return Err(bad(spec, &format!("`{key}` must be finite")));
    }
    Ok(v)
}

fn reject_unknown(spec: &str, params: &[(&str, &str)], known: &[&str]) -> Result<()> {
    match params.iter().find(|(k, _)| !known.contains(k)) {
        Some((k, _)) => Err(bad(spec, &format!("unknown key `{k}`"))),
        None => Ok(()),
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (kind, body) = spec
            .split_once(':')
            .ok_or_else(|| bad(spec, "expected <kind>:<params>"))?;
        match kind.trim() {
            "file" => {
                if body.is_empty() {
                    return Err(bad(spec, "empty path"));
                }
                Ok(WeightSpec::File(PathBuf::from(body)))
            }
            "power" => {
                let params = parse_params(spec, body)?;
                reject_unknown(spec, &params, &["lambda"])?;
                Ok(WeightSpec::Power {
                    lambda: take_f64(spec, &params, "lambda")?,
                })
            }
            "const" => {
                let params = parse_params(spec, body)?;
                reject_unknown(spec, &params, &["c"])?;
                let c = take_f64(spec, &params, "c")?;
                if c <= 0.0 {
                    return Err(bad(spec, "c must be positive"));
                }
                Ok(WeightSpec::Const { c })
            }
            "random" => {
                let params = parse_params(spec, body)?;
                reject_unknown(spec, &params, &["dist", "lo", "hi", "seed"])?;
                let dist = take(spec, &params, "dist")?;
                if dist != "loguniform" {
                    return Err(bad(spec, &format!("unknown dist `{dist}`")));
                }
                let lo = take_f64(spec, &params, "lo")?;
                let hi = take_f64(spec, &params, "hi")?;
                if !(lo > 0.0 && lo <= hi) {
                    return Err(bad(spec, "need 0 < lo <= hi"));
                }
                let seed = take(spec, &params, "seed")?
                    .parse()
                    .map_err(|_| bad(spec, "`seed` is not an unsigned integer"))?;
                Ok(WeightSpec::LogUniform { lo, hi, seed })
            }
            other => Err(bad(spec, &format!("unknown kind `{other}`"))),
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Power { lambda } => write!(f, "power:lambda={lambda}"),
            WeightSpec::Const { c } => write!(f, "const:c={c}"),
            WeightSpec::LogUniform { lo, hi, seed } => {
                write!(f, "random:dist=loguniform,lo={lo},hi={hi},seed={seed}")
            }
            WeightSpec::File(path) => write!(f, "file:{}", path.display()),
        }
    }
}

impl WeightSpec {
    /// Materializes the weight. Files are truncated to `n` when given and
    /// longer; the other kinds need `n`.
    pub fn generate(&self, n: Option<usize>) -> Result<Weight> {
        let need_n = || {
            n.filter(|&n| n > 0)
                .ok_or_else(|| Error::BadGenerator(format!("`{self}` needs a length N >= 1")))
        };
        let mut w = match self {
            WeightSpec::Power { lambda } => Weight::power(need_n()?, *lambda)?,
            WeightSpec::Const { c } => Weight::constant(need_n()?, *c)?,
            WeightSpec::LogUniform { lo, hi, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Weight::new(log_uniform(&mut rng, need_n()?, *lo, *hi))?
            }
            WeightSpec::File(path) => {
                let values = read_values(path)?;
                match n {
                    Some(n) if n < values.len() => Weight::new(values[..n].to_vec())?,
                    Some(n) if n > values.len() => {
                        return Err(Error::LengthMismatch {
                            left: n,
                            right: values.len(),
                        })
                    }
                    _ => Weight::new(values)?,
                }
            }
        };
        w.set_label(self.to_string());
        Ok(w)
    }
}

/// `n` draws with `log x` uniform on `[log lo, log hi]`.
pub fn log_uniform<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|_| if a == b { lo } else { rng.gen_range(a..b).exp() })
        .collect()
}

/// Parses one value per line. Blank lines and `#` comments are skipped and
/// an optional first line `w` is treated as a header.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut seen_content = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        // tolerate CSV rows by reading the first column
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        if !seen_content && field.eq_ignore_ascii_case("w") {
            seen_content = true;
            continue;
        }
        seen_content = true;
        let v: f64 = field
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: `{field}` is not a number", i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_values(&text)
}

/// Inverse of [`parse_values`]: a `w` header and one value per line,
/// printed with enough digits to round-trip.
pub fn format_values(values: &[f64]) -> String {
    let mut out = String::from("w\n");
    for v in values {
        out.push_str(&format!("{v:e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_kind() {
        assert_eq!(
            "power:lambda=0.5".parse::<WeightSpec>().unwrap(),
            WeightSpec::Power { lambda: 0.5 }
        );
        assert_eq!("const:c=2".parse::<WeightSpec>().unwrap(), WeightSpec::Const { c: 2.0 });
        assert_eq!(
            "random:dist=loguniform,lo=0.001,hi=1000,seed=7"
                .parse::<WeightSpec>()
                .unwrap(),
            WeightSpec::LogUniform {
                lo: 1e-3,
                hi: 1e3,
                seed: 7
            }
        );
        assert_eq!(
            "file:/tmp/w.txt".parse::<WeightSpec>().unwrap(),
            WeightSpec::File(PathBuf::from("/tmp/w.txt"))
        );
    }

    #[test]
    fn rejects_malformed() {
        for s in [
            "power",
            "power:lam=1",
            "power:lambda=x",
            "const:c=-1",
            "random:dist=normal,lo=1,hi=2,seed=1",
            "random:dist=loguniform,lo=2,hi=1,seed=1",
            "random:dist=loguniform,lo=1,hi=2",
            "wave:f=1",
            "file:",
        ] {
            assert!(matches!(s.parse::<WeightSpec>(), Err(Error::BadGenerator(_))), "{s}");
        }
    }

    #[test]
    fn display_round_trips() {
        for s in [
            "power:lambda=-0.5",
            "const:c=3",
            "random:dist=loguniform,lo=0.5,hi=2,seed=9",
        ] {
            let spec: WeightSpec = s.parse().unwrap();
            assert_eq!(spec.to_string().parse::<WeightSpec>().unwrap(), spec);
        }
    }

    #[test]
    fn random_is_seeded_and_in_range() {
        let spec: WeightSpec = "random:dist=loguniform,lo=0.001,hi=1000,seed=3".parse().unwrap();
        let a = spec.generate(Some(200)).unwrap();
        let b = spec.generate(Some(200)).unwrap();
        assert_eq!(a, b);
        assert!(a.values().iter().all(|&x| (1e-3..=1e3).contains(&x)));
    }

    #[test]
    fn generated_lengths() {
        let w = "power:lambda=1"
            .parse::<WeightSpec>()
            .unwrap()
            .generate(Some(4))
            .unwrap();
        assert_eq!(w.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert!("const:c=1".parse::<WeightSpec>().unwrap().generate(None).is_err());
    }

    #[test]
    fn file_format() {
        let text = "w\n# a comment\n1.5\n\n2 # trailing\n3e-1\n";
        assert_eq!(parse_values(text).unwrap(), vec![1.5, 2.0, 0.3]);
        assert_eq!(parse_values("1\n2\n").unwrap(), vec![1.0, 2.0]);
        assert!(matches!(parse_values("1\nabc\n"), Err(Error::Parse(_))));
        let vals = vec![0.1, 1.0 / 3.0, 7e-300];
        assert_eq!(parse_values(&format_values(&vals)).unwrap(), vals);
    }
}
