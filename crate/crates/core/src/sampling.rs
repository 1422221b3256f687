//! Boxes over `(t, x, u)` and deterministic low-discrepancy sampling inside them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::problem::{Problem, TIME};

/// Cap on the structured lower/center/upper grid.
const MAX_GRID_POINTS: usize = 100_000;

#[derive(Debug, Error, PartialEq)]
pub enum BoxError {
    #[error("malformed box entry '{0}', expected name:lower,upper")]
    Malformed(String),
    #[error("box interval for '{name}' has lower {lower} > upper {upper}")]
    Inverted { name: String, lower: f64, upper: f64 },
    #[error("box names unknown variable '{0}'")]
    Unknown(String),
    #[error("box names '{0}' twice")]
    Duplicate(String),
}

/// Closed intervals for `t`, each state and each control, in that order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBox {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SampleBox {
    /// `t` over the horizon, states in `[-1, 1]`, controls in `[-10, 10]`.
    pub fn default_for(p: &Problem) -> SampleBox {
        let (a, b) = p.horizon();
        let mut names = vec![TIME.to_string()];
        let mut lower = vec![a];
        let mut upper = vec![b];
        for x in p.states() {
            names.push(x.clone());
            lower.push(-1.0);
            upper.push(1.0);
        }
        for u in p.controls() {
            names.push(u.clone());
            lower.push(-10.0);
            upper.push(10.0);
        }
        SampleBox { names, lower, upper }
    }

    /// Parses `"t:0,1;x1:-1,1;u1:-10,10"`; unnamed variables keep their defaults.
    pub fn parse(spec: &str, p: &Problem) -> Result<SampleBox, BoxError> {
        let mut b = SampleBox::default_for(p);
        let mut seen = Vec::new();
        for part in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, range) = part.split_once(':').ok_or_else(|| BoxError::Malformed(part.into()))?;
            let (lo, hi) = range.split_once(',').ok_or_else(|| BoxError::Malformed(part.into()))?;
            let lo: f64 = lo.trim().parse().map_err(|_| BoxError::Malformed(part.into()))?;
            let hi: f64 = hi.trim().parse().map_err(|_| BoxError::Malformed(part.into()))?;
            if !lo.is_finite() || !hi.is_finite() {
                return Err(BoxError::Malformed(part.into()));
            }
            let name = name.trim();
            let i = b.names.iter().position(|n| n == name).ok_or_else(|| BoxError::Unknown(name.into()))?;
            if seen.contains(&i) {
                return Err(BoxError::Duplicate(name.into()));
            }
            seen.push(i);
            if lo > hi {
                return Err(BoxError::Inverted { name: name.into(), lower: lo, upper: hi });
            }
            b.lower[i] = lo;
            b.upper[i] = hi;
        }
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Every dimension except `t` (index 0) scaled about its center by `factor`.
    pub fn scaled(&self, factor: f64) -> SampleBox {
        let mut b = self.clone();
        for i in 1..self.dim() {
            let c = 0.5 * (self.lower[i] + self.upper[i]);
            let r = 0.5 * (self.upper[i] - self.lower[i]);
            b.lower[i] = c - factor * r;
            b.upper[i] = c + factor * r;
        }
        b
    }

    pub fn render(&self) -> String {
        self.names
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(n, (l, u))| format!("{n}:{l},{u}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    fn map(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .enumerate()
            .map(|(i, s)| self.lower[i] + s * (self.upper[i] - self.lower[i]))
            .collect()
    }

    /// The `3^d` grid of lower/center/upper nodes, or nothing when that exceeds the cap.
    pub fn structured(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let count = 3usize.checked_pow(d as u32).filter(|c| *c <= MAX_GRID_POINTS);
        let Some(count) = count else { return Vec::new() };
        (0..count)
            .map(|mut idx| {
                let unit: Vec<f64> = (0..d)
                    .map(|_| {
                        let digit = idx % 3;
                        idx /= 3;
                        digit as f64 / 2.0
                    })
                    .collect();
                self.map(&unit)
            })
            .collect()
    }

    /// `n` shifted Halton points mapped into the box.
    pub fn halton(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        halton(self.dim(), n, seed).iter().map(|u| self.map(u)).collect()
    }

    /// Structured grid followed by `n` shifted Halton points.
    pub fn samples(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut out = self.structured();
        out.extend(self.halton(n, seed));
        out
    }
}

const PRIMES: [u32; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107,
    109, 113, 127, 131,
];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

/// `n` points of the Halton sequence in `[0,1)^d`, Cranley–Patterson rotated by a
/// shift drawn from `seed`.
pub fn halton(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(d <= PRIMES.len(), "at most {} dimensions", PRIMES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
    (1..=n as u64)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let v = radical_inverse(i, PRIMES[j] as u64) + shift[j];
                    v - v.floor()
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> Problem {
        Problem::from_text("[problem]\nt0=0\nt1=1\nstates=x1\ncontrols=u1\n[lagrangian]\nL=\"u1^2\"\n[dynamics]\nx1=\"u1\"\n").unwrap()
    }

    #[test]
    fn parses_boxes() {
        let b = SampleBox::parse("t:0,1;x1:-2,2;u1:-10,10", &quad()).unwrap();
        assert_eq!(b.lower, vec![0.0, -2.0, -10.0]);
        assert_eq!(b.render(), "t:0,1;x1:-2,2;u1:-10,10");
        assert!(matches!(SampleBox::parse("x1:2,1", &quad()), Err(BoxError::Inverted { .. })));
        assert!(matches!(SampleBox::parse("y:0,1", &quad()), Err(BoxError::Unknown(_))));
        assert!(matches!(SampleBox::parse("x1:0", &quad()), Err(BoxError::Malformed(_))));
    }

    #[test]
    fn scaling_keeps_time() {
        let b = SampleBox::default_for(&quad()).scaled(2.0);
        assert_eq!(b.lower, vec![0.0, -2.0, -20.0]);
        assert_eq!(b.upper, vec![1.0, 2.0, 20.0]);
    }

    #[test]
    fn halton_is_deterministic_and_in_range() {
        let a = halton(3, 100, 0);
        assert_eq!(a, halton(3, 100, 0));
        assert_ne!(a, halton(3, 100, 1));
        assert!(a.iter().flatten().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn structured_grid_includes_center_and_corners() {
        let g = SampleBox::default_for(&quad()).structured();
        assert_eq!(g.len(), 27);
        assert!(g.contains(&vec![0.5, 0.0, 0.0]));
        assert!(g.contains(&vec![1.0, 1.0, -10.0]));
    }
}
