//! Weight-coefficient regularizers applied to dense layers during training.
//!
//! Each regularizer yields a coefficient per weight; the forward pass uses
//! `coefficient × weight` in place of the raw weight.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RegularizerConfig {
    None,
    /// Zero exactly `rate` randomly chosen weights per layer.
    DropConnect { rate: usize },
    /// Scale weights by band of distance from the layer mean.
    Nsw { alpha: f64, beta: f64, lambda: f64 },
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        Self::nsw_default()
    }
}

impl RegularizerConfig {
    pub fn nsw_default() -> Self {
        Self::Nsw {
            alpha: 1.5,
            beta: 1.0,
            lambda: 0.0,
        }
    }

    /// Checks coefficients and that a drop count fits every layer.
    pub fn validate(&self, layer_sizes: &[usize]) -> Result<()> {
        match *self {
            Self::None => Ok(()),
            Self::DropConnect { rate } => match layer_sizes.iter().find(|&&n| rate > n) {
                Some(n) => Err(Error::Config(format!(
                    "dropconnect rate {rate} exceeds a layer with {n} weights"
                ))),
                None => Ok(()),
            },
            Self::Nsw { alpha, beta, lambda } => {
                if [alpha, beta, lambda].iter().all(|c| c.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::Config("nsw coefficients must be finite".into()))
                }
            }
        }
    }
}

impl fmt::Display for RegularizerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => write!(f, "none"),
            Self::DropConnect { rate } => write!(f, "dropconnect:{rate}"),
            Self::Nsw { alpha, beta, lambda } => write!(f, "nsw:{alpha},{beta},{lambda}"),
        }
    }
}

impl FromStr for RegularizerConfig {
    type Err = Error;

    /// Accepts `none`, `dropconnect:N`, `nsw` and `nsw:a,b,l`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unrecognised regularizer '{s}'"));
        let (kind, args) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        match (kind.to_ascii_lowercase().as_str(), args) {
            ("none", None) => Ok(Self::None),
            ("nsw", None) => Ok(Self::nsw_default()),
            ("nsw", Some(a)) => {
                let c: Vec<f64> = a
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad())?;
                match c[..] {
                    [alpha, beta, lambda] => {
                        let cfg = Self::Nsw { alpha, beta, lambda };
                        cfg.validate(&[])?;
                        Ok(cfg)
                    }
                    _ => Err(bad()),
                }
            }
            ("dropconnect", Some(a)) => Ok(Self::DropConnect {
                rate: a.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

/// Positions of `rate` distinct weights drawn uniformly.
fn dropped_positions<R: Rng + ?Sized>(len: usize, rate: usize, rng: &mut R) -> Result<Vec<usize>> {
    if rate > len {
        return Err(Error::Config(format!(
            "dropconnect rate {rate} exceeds {len} weights"
        )));
    }
    Ok(sample(rng, len, rate).into_vec())
}

/// Copy of `w` with exactly `rate` distinct entries set to zero.
pub fn dropconnect<S: Scalar, R: Rng + ?Sized>(w: &Matrix<S>, rate: usize, rng: &mut R) -> Result<Matrix<S>> {
    let mut out = w.clone();
    for p in dropped_positions(w.as_slice().len(), rate, rng)? {
        out.as_mut_slice()[p] = S::zero();
    }
    Ok(out)
}

/// Mean and population standard deviation, accumulated in `f64`.
pub fn weight_stats<S: Scalar>(w: &[S]) -> (f64, f64) {
    let n = w.len() as f64;
    let mean = w.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let var = w.iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-weight band coefficients: `alpha` strictly within one standard
/// deviation of the mean, `beta` strictly within two, `lambda` beyond.
/// A constant layer (zero deviation) is entirely in the inner band.
pub fn nsw_coefficients<S: Scalar>(w: &[S], alpha: f64, beta: f64, lambda: f64) -> Vec<S> {
    if w.is_empty() {
        return Vec::new();
    }
    let (mean, sd) = weight_stats(w);
    let (a, b, l) = (S::lit(alpha), S::lit(beta), S::lit(lambda));
    if sd == 0.0 {
        return vec![a; w.len()];
    }
    w.iter()
        .map(|v| {
            let d = (v.as_f64() - mean).abs();
            if d < sd {
                a
            } else if d < 2.0 * sd {
                b
            } else {
                l
            }
        })
        .collect()
}

pub fn nsw_reduce<S: Scalar>(w: &Matrix<S>, alpha: f64, beta: f64, lambda: f64) -> Matrix<S> {
    let coeffs = nsw_coefficients(w.as_slice(), alpha, beta, lambda);
    let data = w.as_slice().iter().zip(coeffs).map(|(&v, c)| c * v).collect();
    Matrix::from_vec(w.rows(), w.cols(), data)
}

/// Coefficient mask for one layer, or `None` when weights pass through.
pub fn coefficient_mask<S: Scalar, R: Rng + ?Sized>(
    w: &Matrix<S>,
    reg: &RegularizerConfig,
    rng: &mut R,
) -> Result<Option<Matrix<S>>> {
    let data = match *reg {
        RegularizerConfig::None => return Ok(None),
        RegularizerConfig::DropConnect { rate } => {
            let mut mask = vec![S::one(); w.as_slice().len()];
            for p in dropped_positions(mask.len(), rate, rng)? {
                mask[p] = S::zero();
            }
            mask
        }
        RegularizerConfig::Nsw { alpha, beta, lambda } => nsw_coefficients(w.as_slice(), alpha, beta, lambda),
    };
    Ok(Some(Matrix::from_vec(w.rows(), w.cols(), data)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dropconnect_extremes() {
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(dropconnect(&w, 0, &mut rng).unwrap(), w);
        assert!(dropconnect(&w, 4, &mut rng).unwrap().as_slice().iter().all(|&v| v == 0.0));
        assert!(matches!(dropconnect(&w, 5, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn dropconnect_two_of_four_for_any_seed() {
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        for seed in 0..50 {
            let out = dropconnect(&w, 2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let zeros = out.as_slice().iter().filter(|&&v| v == 0.0).count();
            let kept = out.as_slice().iter().zip(w.as_slice()).filter(|(a, b)| a == b).count();
            assert_eq!((zeros, kept), (2, 2));
        }
    }

    #[test]
    fn nsw_examples() {
        let w = Matrix::from_rows(&[vec![0.3, -1.2], vec![5.0, 0.0]]);
        assert_eq!(nsw_reduce(&w, 1.0, 1.0, 1.0), w);
        let flat = Matrix::from_rows(&[vec![1.0, 1.0, 1.0, 1.0]]);
        assert_eq!(nsw_reduce(&flat, 1.5, 1.0, 0.0).as_slice(), &[1.5; 4]);
        let spike = Matrix::from_rows(&[vec![0.0, 0.0, 0.0, 10.0]]);
        assert_eq!(nsw_reduce(&spike, 1.5, 1.0, 0.0).as_slice(), &[0.0, 0.0, 0.0, 10.0]);
        assert_eq!(
            nsw_coefficients(spike.as_slice(), 1.5, 1.0, 0.0),
            vec![1.5, 1.5, 1.5, 1.0]
        );
    }

    #[test]
    fn parses_cli_forms() {
        assert_eq!("none".parse::<RegularizerConfig>().unwrap(), RegularizerConfig::None);
        assert_eq!("nsw:1.5,1,0".parse::<RegularizerConfig>().unwrap(), RegularizerConfig::nsw_default());
        assert_eq!(
            "dropconnect:12".parse::<RegularizerConfig>().unwrap(),
            RegularizerConfig::DropConnect { rate: 12 }
        );
        for bad in ["nsw:1,2", "dropconnect", "dropout:0.5", "nsw:1,inf,0"] {
            assert!(bad.parse::<RegularizerConfig>().is_err(), "{bad}");
        }
        let cfg = RegularizerConfig::nsw_default();
        assert_eq!(cfg.to_string().parse::<RegularizerConfig>().unwrap(), cfg);
    }

    #[test]
    fn mask_matches_reduced_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = Matrix::from_rows(&[vec![0.1, -0.7, 2.0], vec![0.05, 0.3, -0.2]]);
        let reg = RegularizerConfig::nsw_default();
        let mask = coefficient_mask(&w, &reg, &mut rng).unwrap().unwrap();
        let applied: Vec<f64> = mask.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).collect();
        assert_eq!(applied, nsw_reduce(&w, 1.5, 1.0, 0.0).into_vec());
        assert!(coefficient_mask(&w, &RegularizerConfig::None, &mut rng).unwrap().is_none());
    }
}
