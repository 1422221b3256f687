use std::io::{Read, Write};
use std::path::Path;

use crate::config;
use crate::problem::{costate_name, Layout, Problem, HAMILTONIAN, TIME};
use crate::symbolic::{Bindings, Compiled};

use super::ExtremalError;

/// A discretized Pontryagin quadruple `(x, u, ψ₀, ψ)` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<String>,
    pub controls: Vec<String>,
    pub grid: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    /// Hamiltonian at each node.
    pub h: Vec<f64>,
    pub psi0: f64,
    pub cost: f64,
}

impl Trajectory {
    pub(crate) fn empty(p: &Problem) -> Trajectory {
        Trajectory {
            states: p.states().to_vec(),
            controls: p.controls().to_vec(),
            grid: Vec::new(),
            x: Vec::new(),
            psi: Vec::new(),
            u: Vec::new(),
            h: Vec::new(),
            psi0: p.psi0(),
            cost: 0.0,
        }
    }

    pub(crate) fn push(&mut self, t: f64, x: &[f64], psi: &[f64], u: &[f64], h: f64) {
        self.grid.push(t);
        self.x.push(x.to_vec());
        self.psi.push(psi.to_vec());
        self.u.push(u.to_vec());
        self.h.push(h);
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn costates(&self) -> Vec<String> {
        (0..self.states.len()).map(costate_name).collect()
    }

    pub fn max_psi_norm(&self) -> f64 {
        self.psi
            .iter()
            .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// `(ψ₀, ψ(·)) ≠ 0`.
    pub fn check_nontrivial(&self) -> Result<(), ExtremalError> {
        let max_psi = self.max_psi_norm();
        if self.psi0 == 0.0 && max_psi < config::NONTRIVIALITY_TOL {
            return Err(ExtremalError::Trivial { max_psi, tol: config::NONTRIVIALITY_TOL });
        }
        Ok(())
    }

    /// `max_k |H(t_k) - H(t_0)|`.
    pub fn hamiltonian_drift(&self) -> f64 {
        let h0 = self.h.first().copied().unwrap_or(0.0);
        self.h.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max)
    }

    /// Node `k` as a point in `layout` order.
    pub fn point(&self, k: usize, layout: &Layout) -> Vec<f64> {
        let mut p = layout.point();
        p[layout.t()] = self.grid[k];
        for i in 0..self.states.len() {
            p[layout.x(i)] = self.x[k][i];
            p[layout.psi(i)] = self.psi[k][i];
        }
        for j in 0..self.controls.len() {
            p[layout.u(j)] = self.u[k][j];
        }
        p[layout.psi0()] = self.psi0;
        p
    }

    /// Node `k` as named bindings, including `H`.
    pub fn bindings(&self, k: usize) -> Bindings {
        let mut b = Bindings::new();
        b.insert(TIME.into(), self.grid[k]);
        for (i, x) in self.states.iter().enumerate() {
            b.insert(x.clone(), self.x[k][i]);
            b.insert(costate_name(i), self.psi[k][i]);
        }
        for (j, u) in self.controls.iter().enumerate() {
            b.insert(u.clone(), self.u[k][j]);
        }
        b.insert(crate::problem::PSI0.into(), self.psi0);
        b.insert(HAMILTONIAN.into(), self.h[k]);
        b
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec![TIME.to_string()];
        h.extend(self.states.iter().cloned());
        h.extend(self.costates());
        h.extend(self.controls.iter().cloned());
        h.push(HAMILTONIAN.to_string());
        h
    }

    /// CSV with header `t,<states>,psi1..psin,<controls>,H`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ExtremalError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| ExtremalError::Csv(e.to_string());
        w.write_record(self.header()).map_err(err)?;
        for k in 0..self.len() {
            let mut row = vec![self.grid[k]];
            row.extend(&self.x[k]);
            row.extend(&self.psi[k]);
            row.extend(&self.u[k]);
            row.push(self.h[k]);
            w.write_record(row.iter().map(|v| format!("{v:.16e}"))).map_err(err)?;
        }
        w.flush().map_err(|e| ExtremalError::Csv(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ExtremalError> {
        let path = path.as_ref();
        let f = std::fs::File::create(path)
            .map_err(|source| ExtremalError::Io { path: path.display().to_string(), source })?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Reads a trajectory of `p` back from CSV. The cost is recomputed from `L`
    /// (Simpson on uniform grids with an even number of intervals, trapezoid otherwise).
    pub fn read_csv<R: Read>(input: R, p: &Problem) -> Result<Trajectory, ExtremalError> {
        let mut rd = csv::Reader::from_reader(input);
        let header: Vec<String> = rd
            .headers()
            .map_err(|e| ExtremalError::Csv(e.to_string()))?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let mut tr = Trajectory::empty(p);
        if header != tr.header() {
            return Err(ExtremalError::Csv(format!(
                "header [{}] does not match problem columns [{}]",
                header.join(","),
                tr.header().join(",")
            )));
        }
        let (n, r) = (p.n(), p.r());
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| ExtremalError::Csv(e.to_string()))?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| ExtremalError::Csv(format!("row {}: {e}", line + 2)))?;
            if vals.len() != header.len() {
                return Err(ExtremalError::Csv(format!("row {}: wrong column count", line + 2)));
            }
            tr.push(vals[0], &vals[1..1 + n], &vals[1 + n..1 + 2 * n], &vals[1 + 2 * n..1 + 2 * n + r], vals[1 + 2 * n + r]);
        }
        if tr.len() < 2 {
            return Err(ExtremalError::Csv("need at least two rows".into()));
        }
        if tr.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ExtremalError::Csv("time column is not strictly increasing".into()));
        }
        tr.cost = tr.quadrature(p)?;
        Ok(tr)
    }

    pub fn load(path: impl AsRef<Path>, p: &Problem) -> Result<Trajectory, ExtremalError> {
        let path = path.as_ref();
        let f = std::fs::File::open(path)
            .map_err(|source| ExtremalError::Io { path: path.display().to_string(), source })?;
        Trajectory::read_csv(std::io::BufReader::new(f), p)
    }

    /// `∫ L dt` over the grid from node values.
    pub fn quadrature(&self, p: &Problem) -> Result<f64, ExtremalError> {
        let layout = p.layout();
        let l = Compiled::new(p.lagrangian(), layout.names()).map_err(crate::problem::ProblemError::from)?;
        let vals: Vec<f64> = (0..self.len())
            .map(|k| l.eval(&self.point(k, &layout)))
            .collect::<Result<_, _>>()
            .map_err(crate::problem::ProblemError::from)?;
        Ok(integrate_samples(&self.grid, &vals))
    }
}

/// Composite Simpson on uniform grids with an even number of intervals, trapezoid otherwise.
pub(crate) fn integrate_samples(grid: &[f64], vals: &[f64]) -> f64 {
    let m = grid.len() - 1;
    let h = (grid[m] - grid[0]) / m as f64;
    let uniform = grid.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0));
    if uniform && m.is_multiple_of(2) {
        let mut s = vals[0] + vals[m];
        for k in 1..m {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * vals[k];
        }
        s * h / 3.0
    } else {
        grid.windows(2).zip(vals.windows(2)).map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1])).sum()
    }
}

/// Cubic Hermite interpolant on `[t0, t1]` from values and slopes at both ends.
pub fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremal::integrate;

    const QUAD: &str = "[problem]\nt0=0\nt1=1\nstates=x1\ncontrols=u1\n[lagrangian]\nL=\"u1^2\"\n[dynamics]\nx1=\"u1\"\n";

    #[test]
    fn csv_round_trip_is_exact() {
        let p = Problem::from_text(QUAD).unwrap();
        let tr = integrate(&p, &[0.0], &[2.0], 32).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x1,psi1,u1,H\n"));
        assert_eq!(text.lines().count(), 34);
        let back = Trajectory::read_csv(&buf[..], &p).unwrap();
        assert_eq!(back.x, tr.x);
        assert_eq!(back.h, tr.h);
        assert!((back.cost - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let p = Problem::from_text(QUAD).unwrap();
        assert!(Trajectory::read_csv("t,x2,psi1,u1,H\n0,0,0,0,0\n1,1,1,1,1\n".as_bytes(), &p).is_err());
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |t: f64| t * t * t - 2.0 * t;
        let df = |t: f64| 3.0 * t * t - 2.0;
        let v = hermite(0.5, 1.5, f(0.5), f(1.5), df(0.5), df(1.5), 0.8);
        assert!((v - f(0.8)).abs() < 1e-14);
    }

    #[test]
    fn trivial_abnormal_multiplier_is_caught() {
        let p = Problem::from_text(QUAD).unwrap().with_psi0(0.0).unwrap();
        let mut tr = Trajectory::empty(&p);
        tr.push(0.0, &[0.0], &[0.0], &[0.0], 0.0);
        assert!(tr.check_nontrivial().is_err());
    }
}
