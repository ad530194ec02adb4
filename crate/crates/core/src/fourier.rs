//! Real truncated Fourier series on 𝕋² with exact derivatives up to order two.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One harmonic `cos·cos 2π(m x1 + n x2) + sin·sin 2π(m x1 + n x2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub m: i32,
    pub n: i32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl FourierTerm {
    pub fn cos(m: i32, n: i32, amplitude: f64) -> Self {
        Self {
            m,
            n,
            cos: amplitude,
            sin: 0.0,
        }
    }

    pub fn sin(m: i32, n: i32, amplitude: f64) -> Self {
        Self {
            m,
            n,
            cos: 0.0,
            sin: amplitude,
        }
    }
}

/// Value, gradient and Hessian of a scalar function at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierSeries {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<FourierTerm>,
}

impl FourierSeries {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn new(constant: f64, terms: Vec<FourierTerm>) -> Result<Self> {
        let s = Self { constant, terms };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if !self.constant.is_finite() || self.terms.iter().any(|t| !(t.cos.is_finite() && t.sin.is_finite())) {
            return Err(Error::invalid("non-finite Fourier coefficient"));
        }
        Ok(())
    }

    pub fn max_harmonic(&self) -> u32 {
        self.terms
            .iter()
            .filter(|t| t.cos != 0.0 || t.sin != 0.0)
            .map(|t| t.m.unsigned_abs().max(t.n.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }

    /// True when every non-constant harmonic vanishes.
    pub fn is_constant(&self) -> bool {
        self.terms
            .iter()
            .all(|t| (t.m == 0 && t.n == 0) || (t.cos == 0.0 && t.sin == 0.0))
    }

    /// Constant part including any `(0,0)` terms.
    pub fn mean(&self) -> f64 {
        self.constant + self.terms.iter().filter(|t| t.m == 0 && t.n == 0).map(|t| t.cos).sum::<f64>()
    }

    pub fn shifted(&self, k: f64) -> Self {
        let mut s = self.clone();
        s.constant += k;
        s
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            constant: self.constant * k,
            terms: self
                .terms
                .iter()
                .map(|t| FourierTerm {
                    cos: t.cos * k,
                    sin: t.sin * k,
                    ..*t
                })
                .collect(),
        }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        let mut f = self.constant;
        for t in &self.terms {
            let (s, c) = (TAU * (t.m as f64 * x[0] + t.n as f64 * x[1])).sin_cos();
            f += t.cos * c + t.sin * s;
        }
        f
    }

    pub fn jet(&self, x: [f64; 2]) -> Jet2 {
        let mut j = Jet2 {
            value: self.constant,
            ..Jet2::default()
        };
        for t in &self.terms {
            let k = [TAU * t.m as f64, TAU * t.n as f64];
            let (s, c) = (k[0] * x[0] + k[1] * x[1]).sin_cos();
            let even = t.cos * c + t.sin * s;
            let odd = t.sin * c - t.cos * s;
            j.value += even;
            for i in 0..2 {
                j.grad[i] += k[i] * odd;
                for l in 0..2 {
                    j.hess[i][l] -= k[i] * k[l] * even;
                }
            }
        }
        j
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sample() -> FourierSeries {
        FourierSeries::new(
            0.3,
            vec![
                FourierTerm {
                    m: 1,
                    n: 0,
                    cos: 0.5,
                    sin: -0.2,
                },
                FourierTerm {
                    m: 2,
                    n: -1,
                    cos: 0.1,
                    sin: 0.4,
                },
                FourierTerm {
                    m: 0,
                    n: 3,
                    cos: -0.05,
                    sin: 0.0,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn cosine_values() {
        let u = FourierSeries::new(0.0, vec![FourierTerm::cos(1, 0, 0.5)]).unwrap();
        assert_relative_eq!(u.value([0.0, 0.3]), 0.5);
        assert_relative_eq!(u.value([0.5, 0.3]), -0.5);
        assert_eq!(u.max_harmonic(), 1);
        assert!(!u.is_constant());
        assert!(FourierSeries::constant(2.0).is_constant());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(FourierSeries::new(f64::NAN, vec![]).is_err());
        assert!(FourierSeries::new(0.0, vec![FourierTerm::sin(1, 1, f64::INFINITY)]).is_err());
    }

    proptest! {
        #[test]
        fn jet_matches_central_differences(x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let f = sample();
            let j = f.jet([x, y]);
            let h = 1e-5;
            prop_assert!((j.value - f.value([x, y])).abs() < 1e-14);
            for i in 0..2 {
                let mut p = [x, y];
                let mut m = [x, y];
                p[i] += h;
                m[i] -= h;
                let fd = (f.value(p) - f.value(m)) / (2.0 * h);
                prop_assert!((fd - j.grad[i]).abs() < 1e-7 * (1.0 + j.grad[i].abs()));
                let jp = f.jet(p);
                let jm = f.jet(m);
                for l in 0..2 {
                    let fd2 = (jp.grad[l] - jm.grad[l]) / (2.0 * h);
                    prop_assert!((fd2 - j.hess[i][l]).abs() < 1e-6 * (1.0 + j.hess[i][l].abs()));
                }
            }
        }

        #[test]
        fn periodic(x in -3.0f64..3.0, y in -3.0f64..3.0, a in -3i32..3, b in -3i32..3) {
            let f = sample();
            prop_assert!((f.value([x, y]) - f.value([x + a as f64, y + b as f64])).abs() < 1e-12);
        }
    }
}
