//! Smooth periodic test functions on the unit torus and their samples on the lattice.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Torus;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    /// Integer wave vector `w`; the term is `a cos(2 pi w.u) + b sin(2 pi w.u)`.
    pub wave: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TestFunction {
    /// Trigonometric polynomial `constant + sum of terms`.
    Trig {
        #[serde(default)]
        constant: f64,
        terms: Vec<TrigTerm>,
    },
    /// Periodized Gaussian bump.
    Bump {
        center: Vec<f64>,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// Images summed when periodizing a bump.
const BUMP_IMAGES: i64 = 2;

impl TestFunction {
    /// `sin(2 pi u_1)`.
    pub fn sine(dim: usize) -> Self {
        Self::wave(dim, 0.0, 0.0, 1.0)
    }

    /// `cos(2 pi u_1)`.
    pub fn cosine(dim: usize) -> Self {
        Self::wave(dim, 0.0, 1.0, 0.0)
    }

    fn wave(dim: usize, constant: f64, cos: f64, sin: f64) -> Self {
        let mut wave = vec![0; dim];
        wave[0] = 1;
        TestFunction::Trig {
            constant,
            terms: vec![TrigTerm { wave, cos, sin }],
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            TestFunction::Trig { terms, .. } => terms.first().map(|t| t.wave.len()),
            TestFunction::Bump { center, .. } => Some(center.len()),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            TestFunction::Trig { terms, .. } => {
                if terms.iter().any(|t| t.wave.len() != dim) {
                    return Err(Error::Config(format!("wave vectors must have dimension {dim}")));
                }
            }
            TestFunction::Bump { center, width, .. } => {
                if center.len() != dim {
                    return Err(Error::Config(format!("bump centre must have dimension {dim}")));
                }
                if !(*width > 0.0 && *width <= 0.25) {
                    return Err(Error::Config("bump width must lie in (0, 0.25]".into()));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        match self {
            TestFunction::Trig { constant, terms } => {
                constant
                    + terms
                        .iter()
                        .map(|t| {
                            let th = phase(&t.wave, u);
                            t.cos * th.cos() + t.sin * th.sin()
                        })
                        .sum::<f64>()
            }
            TestFunction::Bump {
                center,
                width,
                amplitude,
            } => {
                images(center.len())
                    .map(|m| gauss(u, center, &m, *width).0)
                    .sum::<f64>()
                    * amplitude
            }
        }
    }

    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let d = u.len();
        let mut g = vec![0.0; d];
        match self {
            TestFunction::Trig { terms, .. } => {
                for t in terms {
                    let th = phase(&t.wave, u);
                    let f = -t.cos * th.sin() + t.sin * th.cos();
                    for l in 0..d {
                        g[l] += 2.0 * PI * t.wave[l] as f64 * f;
                    }
                }
            }
            TestFunction::Bump {
                center,
                width,
                amplitude,
            } => {
                for m in images(d) {
                    let (v, diff) = gauss(u, center, &m, *width);
                    for l in 0..d {
                        g[l] -= amplitude * v * diff[l] / (width * width);
                    }
                }
            }
        }
        g
    }

    pub fn laplacian(&self, u: &[f64]) -> f64 {
        match self {
            TestFunction::Trig { terms, .. } => terms
                .iter()
                .map(|t| {
                    let th = phase(&t.wave, u);
                    let k2: f64 = t.wave.iter().map(|&w| (2.0 * PI * w as f64).powi(2)).sum();
                    -k2 * (t.cos * th.cos() + t.sin * th.sin())
                })
                .sum(),
            TestFunction::Bump {
                center,
                width,
                amplitude,
            } => {
                let d = u.len() as f64;
                let w2 = width * width;
                images(u.len())
                    .map(|m| {
                        let (v, diff) = gauss(u, center, &m, *width);
                        let r2: f64 = diff.iter().map(|x| x * x).sum();
                        amplitude * v * (r2 / (w2 * w2) - d / w2)
                    })
                    .sum()
            }
        }
    }

    pub fn sample(&self, torus: &Torus) -> SiteFunction {
        let v = torus.volume();
        let mut out = SiteFunction {
            values: Vec::with_capacity(v),
            gradients: Vec::with_capacity(v),
            laplacians: Vec::with_capacity(v),
        };
        for s in 0..v {
            let u = torus.position(s);
            out.values.push(self.value(&u));
            out.gradients.push(self.gradient(&u));
            out.laplacians.push(self.laplacian(&u));
        }
        out
    }
}

fn phase(wave: &[i64], u: &[f64]) -> f64 {
    2.0 * PI * wave.iter().zip(u).map(|(&w, &x)| w as f64 * x).sum::<f64>()
}

fn images(dim: usize) -> impl Iterator<Item = Vec<i64>> {
    let side = (2 * BUMP_IMAGES + 1) as usize;
    (0..side.pow(dim as u32)).map(move |mut idx| {
        let mut m = vec![0; dim];
        for c in m.iter_mut() {
            *c = (idx % side) as i64 - BUMP_IMAGES;
            idx /= side;
        }
        m
    })
}

fn gauss(u: &[f64], c: &[f64], image: &[i64], width: f64) -> (f64, Vec<f64>) {
    let diff: Vec<f64> = u
        .iter()
        .zip(c)
        .zip(image)
        .map(|((x, y), m)| x - y - *m as f64)
        .collect();
    let r2: f64 = diff.iter().map(|x| x * x).sum();
    ((-r2 / (2.0 * width * width)).exp(), diff)
}

/// A test function sampled at `x / n` for every lattice site.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteFunction {
    pub values: Vec<f64>,
    pub gradients: Vec<Vec<f64>>,
    pub laplacians: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_checks(f: &TestFunction, u: &[f64]) {
        let h = 1e-4;
        let g = f.gradient(u);
        let mut lap = 0.0;
        for l in 0..u.len() {
            let mut up = u.to_vec();
            let mut dn = u.to_vec();
            up[l] += h;
            dn[l] -= h;
            let (fu, fd, f0) = (f.value(&up), f.value(&dn), f.value(u));
            assert!(((fu - fd) / (2.0 * h) - g[l]).abs() < 1e-5 * (1.0 + g[l].abs()));
            lap += (fu - 2.0 * f0 + fd) / (h * h);
        }
        assert!((lap - f.laplacian(u)).abs() < 1e-3 * (1.0 + lap.abs()));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let trig = TestFunction::Trig {
            constant: 0.5,
            terms: vec![
                TrigTerm {
                    wave: vec![1, 0],
                    cos: 0.3,
                    sin: 1.0,
                },
                TrigTerm {
                    wave: vec![2, -1],
                    cos: -0.7,
                    sin: 0.2,
                },
            ],
        };
        let bump = TestFunction::Bump {
            center: vec![0.3, 0.6],
            width: 0.15,
            amplitude: 2.0,
        };
        for f in [trig, bump] {
            numeric_checks(&f, &[0.17, 0.83]);
            numeric_checks(&f, &[0.98, 0.01]);
        }
    }

    #[test]
    fn functions_are_periodic() {
        let bump = TestFunction::Bump {
            center: vec![0.05],
            width: 0.1,
            amplitude: 1.0,
        };
        for f in [TestFunction::sine(1), bump] {
            assert!((f.value(&[0.0]) - f.value(&[1.0])).abs() < 1e-12);
            assert!((f.gradient(&[0.0])[0] - f.gradient(&[1.0])[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn serde_roundtrip() {
        let f = TestFunction::sine(2);
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"family\":\"trig\""));
        assert_eq!(serde_json::from_str::<TestFunction>(&s).unwrap(), f);
        assert!(TestFunction::Bump {
            center: vec![0.5],
            width: 0.5,
            amplitude: 1.0
        }
        .validate(1)
        .is_err());
    }
}
