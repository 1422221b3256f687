//! Sampling audits of existence and Lipschitz-regularity hypotheses on a box:
//! coercivity, convexity in `u`, growth bounds of the form `LHS ≤ c·base + k`, and the
//! affine-in-control growth condition.
//!
//! Everything here is a semidecision. A pass means "holds at every sample of the
//! stated box"; a trend over nested boxes can only suggest a global violation.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::config;
use crate::problem::{Problem, TIME};
use crate::sampling::SampleBox;
use crate::symbolic::{differentiate, symbolically_zero, Compiled, Expr, SymbolicError};

/// Name of the gauge variable in `θ(r)`.
pub const GAUGE_VAR: &str = "r";

#[derive(Debug, Error)]
pub enum RegularityError {
    #[error("evaluation failed at {point}: {source}")]
    Evaluation { point: String, source: SymbolicError },
    #[error("at least {min} samples required, got {got}")]
    Samples { min: usize, got: usize },
    #[error("theta may only depend on '{GAUGE_VAR}', found '{0}'")]
    Theta(String),
    #[error("dynamics of {state} are not affine in the controls")]
    NonAffine { state: String },
    #[error("g(t, x) has rank {rank} < {r} at {point} (smallest singular value {sigma:e})")]
    RankDeficient { rank: usize, r: usize, point: String, sigma: f64 },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

fn render(names: &[String], vals: &[f64]) -> String {
    names.iter().zip(vals).map(|(n, v)| format!("{n}={v}")).collect::<Vec<_>>().join(", ")
}

fn named(names: &[String], vals: &[f64]) -> BTreeMap<String, f64> {
    names.iter().cloned().zip(vals.iter().copied()).collect()
}

fn check_samples(n: usize) -> Result<(), RegularityError> {
    if n < config::MIN_SAMPLES {
        return Err(RegularityError::Samples { min: config::MIN_SAMPLES, got: n });
    }
    Ok(())
}

/// Expressions compiled over the box layout `[t, x.., u..]`.
struct Fns<'a> {
    names: &'a [String],
    fns: Vec<Compiled>,
}

impl<'a> Fns<'a> {
    fn new(names: &'a [String], exprs: &[Expr]) -> Result<Fns<'a>, RegularityError> {
        let fns = exprs.iter().map(|e| Compiled::new(e, names)).collect::<Result<_, _>>()?;
        Ok(Fns { names, fns })
    }

    fn eval(&self, i: usize, pt: &[f64]) -> Result<f64, RegularityError> {
        let v = self.fns[i]
            .eval(pt)
            .map_err(|source| RegularityError::Evaluation { point: render(self.names, pt), source })?;
        if !v.is_finite() {
            return Err(RegularityError::Evaluation {
                point: render(self.names, pt),
                source: SymbolicError::Domain { expr: self.fns[i].expr().to_string() },
            });
        }
        Ok(v)
    }

    fn all(&self, pt: &[f64]) -> Result<Vec<f64>, RegularityError> {
        (0..self.fns.len()).map(|i| self.eval(i, pt)).collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    /// `‖L_x‖ ≤ c|L| + k`, `‖∂φᵢ/∂x‖ ≤ c|φᵢ| + k`
    #[serde(rename = "applicability-9")]
    Applicability,
    /// The above plus `|L_t| ≤ c|L| + k` and `‖φ_t‖ ≤ c‖φ‖ + k`.
    #[serde(rename = "tonelli-morrey-27")]
    TonelliMorrey,
    /// `‖L_x‖ + ‖L_u‖ ≤ c|L| + k`
    #[serde(rename = "classical-TM")]
    Classical,
}

impl Condition {
    pub fn from_id(id: &str) -> Option<Condition> {
        match id {
            "9" | "applicability-9" => Some(Condition::Applicability),
            "27" | "tonelli-morrey-27" => Some(Condition::TonelliMorrey),
            "25" | "classical-TM" => Some(Condition::Classical),
            _ => None,
        }
    }
}

/// One inequality `lhs ≤ c·base + k` evaluated from compiled pieces.
enum Term {
    /// `|f_0|` against `|f_1|`
    Abs { lhs: usize, base: usize, label: String },
    /// `‖f_lhs‖` against `‖f_base‖`
    Norm { lhs: Vec<usize>, base: Vec<usize>, label: String },
}

impl Term {
    fn label(&self) -> &str {
        match self {
            Term::Abs { label, .. } | Term::Norm { label, .. } => label,
        }
    }

    fn pair(&self, vals: &[f64]) -> (f64, f64) {
        match self {
            Term::Abs { lhs, base, .. } => (vals[*lhs].abs(), vals[*base].abs()),
            Term::Norm { lhs, base, .. } => {
                let l: Vec<f64> = lhs.iter().map(|i| vals[*i]).collect();
                let b: Vec<f64> = base.iter().map(|i| vals[*i]).collect();
                (norm(&l), norm(&b))
            }
        }
    }
}

/// Builds the expression table and inequality list of a growth condition.
fn growth_terms(p: &Problem, cond: Condition) -> (Vec<Expr>, Vec<Term>) {
    let mut exprs = Vec::new();
    let mut push = |e: Expr| {
        exprs.push(e);
        exprs.len() - 1
    };
    let l = p.lagrangian();
    let li = push(l.clone());
    let lx: Vec<usize> = p.states().iter().map(|x| push(differentiate(l, x))).collect();
    let mut terms = Vec::new();
    match cond {
        Condition::Classical => {
            let lu: Vec<usize> = p.controls().iter().map(|u| push(differentiate(l, u))).collect();
            // ‖L_x‖ + ‖L_u‖ is handled as a two-block sum below
            terms.push(Term::Norm { lhs: lx, base: vec![li], label: "|L_x|".into() });
            terms.push(Term::Norm { lhs: lu, base: vec![li], label: "|L_u|".into() });
        }
        Condition::Applicability | Condition::TonelliMorrey => {
            if cond == Condition::TonelliMorrey {
                let lt = push(differentiate(l, TIME));
                terms.push(Term::Abs { lhs: lt, base: li, label: "|L_t| <= c|L| + k".into() });
            }
            terms.push(Term::Norm { lhs: lx, base: vec![li], label: "|L_x| <= c|L| + k".into() });
            let phi: Vec<usize> = p.dynamics().iter().map(|f| push(f.clone())).collect();
            if cond == Condition::TonelliMorrey {
                let phit: Vec<usize> = p.dynamics().iter().map(|f| push(differentiate(f, TIME))).collect();
                terms.push(Term::Norm { lhs: phit, base: phi.clone(), label: "|phi_t| <= c|phi| + k".into() });
            }
            for (i, f) in p.dynamics().iter().enumerate() {
                let fx: Vec<usize> = p.states().iter().map(|x| push(differentiate(f, x))).collect();
                terms.push(Term::Norm {
                    lhs: fx,
                    base: vec![phi[i]],
                    label: format!("|d phi_{} / dx| <= c|phi_{}| + k", i + 1, i + 1),
                });
            }
        }
    }
    (exprs, terms)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrendPoint {
    pub scale: f64,
    #[serde(rename = "box")]
    pub sample_box: String,
    pub c: f64,
    pub k: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthFit {
    pub condition: Condition,
    #[serde(rename = "box")]
    pub sample_box: String,
    pub samples: usize,
    pub c: f64,
    /// Clamped at zero.
    pub k: f64,
    /// `max(LHS - c·base)` before clamping.
    pub k_raw: f64,
    pub witness: BTreeMap<String, f64>,
    pub witness_inequality: String,
    pub trend: Vec<TrendPoint>,
    pub suspected_violation: bool,
    pub c_grid_max: f64,
    pub trend_threshold: f64,
}

struct Fit {
    c: f64,
    k: f64,
    witness: Vec<f64>,
    term: usize,
}

/// Pairs `(lhs, base)` for every sample and inequality.
/// `(lhs, base, sample, term)` at one sample point.
type Pair = (f64, f64, usize, usize);
type Points = Vec<Vec<f64>>;

fn growth_pairs(
    p: &Problem,
    cond: Condition,
    sample_box: &SampleBox,
    samples: usize,
) -> Result<(Vec<Pair>, Vec<String>, Points), RegularityError> {
    let (exprs, terms) = growth_terms(p, cond);
    let fns = Fns::new(&sample_box.names, &exprs)?;
    let pts = sample_box.samples(samples, config::seed());
    let mut pairs = Vec::new();
    for (s, pt) in pts.iter().enumerate() {
        let vals = fns.all(pt)?;
        if cond == Condition::Classical {
            let (a, base) = terms[0].pair(&vals);
            let (b, _) = terms[1].pair(&vals);
            pairs.push((a + b, base, s, 0));
        } else {
            for (j, t) in terms.iter().enumerate() {
                let (lhs, base) = t.pair(&vals);
                pairs.push((lhs, base, s, j));
            }
        }
    }
    let labels = if cond == Condition::Classical {
        vec!["|L_x| + |L_u| <= c|L| + k".to_string()]
    } else {
        terms.iter().map(|t| t.label().to_string()).collect()
    };
    Ok((pairs, labels, pts))
}

/// `k(c) = max(LHS - c·base)` over the c-grid, keeping the smallest c attaining the
/// minimal k.
fn fit_pairs(pairs: &[Pair], pts: &[Vec<f64>]) -> Fit {
    let steps = (config::C_GRID_MAX / config::C_GRID_STEP).round() as usize;
    let mut best: Option<Fit> = None;
    for i in 0..=steps {
        let c = i as f64 * config::C_GRID_STEP;
        let mut k = f64::NEG_INFINITY;
        let mut arg = (0, 0);
        for &(lhs, base, s, j) in pairs {
            let v = lhs - c * base;
            if v > k {
                k = v;
                arg = (s, j);
            }
        }
        if !k.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| k < b.k) {
            best = Some(Fit { c, k, witness: pts[arg.0].clone(), term: arg.1 });
        }
    }
    best.unwrap_or(Fit { c: 0.0, k: 0.0, witness: pts.first().cloned().unwrap_or_default(), term: 0 })
}

/// Fits `(c, k)` for `cond` on `sample_box` and on the boxes scaled ×2 and ×4 (in
/// x and u; t is left alone).
pub fn fit_growth(p: &Problem, cond: Condition, sample_box: &SampleBox, samples: usize) -> Result<GrowthFit, RegularityError> {
    check_samples(samples)?;
    let (pairs, labels, pts) = growth_pairs(p, cond, sample_box, samples)?;
    let fit = fit_pairs(&pairs, &pts);
    let mut trend = Vec::new();
    for &scale in &config::TREND_SCALES {
        let b = sample_box.scaled(scale);
        let f = if scale == 1.0 {
            Fit { c: fit.c, k: fit.k, witness: Vec::new(), term: 0 }
        } else {
            let (pairs, _, pts) = growth_pairs(p, cond, &b, samples)?;
            fit_pairs(&pairs, &pts)
        };
        trend.push(TrendPoint { scale, sample_box: b.render(), c: f.c, k: f.k.max(0.0) });
    }
    let threshold = config::TREND_GROWTH_FLAG * (1.0 - config::GROWTH_SLACK);
    let suspected_violation = trend.windows(2).all(|w| w[0].k > 0.0 && w[1].k >= threshold * w[0].k);
    Ok(GrowthFit {
        condition: cond,
        sample_box: sample_box.render(),
        samples,
        c: fit.c,
        k: fit.k.max(0.0),
        k_raw: fit.k,
        witness: named(&sample_box.names, &fit.witness),
        witness_inequality: labels[fit.term].clone(),
        trend,
        suspected_violation,
        c_grid_max: config::C_GRID_MAX,
        trend_threshold: config::TREND_GROWTH_FLAG,
    })
}

/// Whether every sample satisfies every inequality of `cond` with the given constants.
pub fn satisfies(p: &Problem, cond: Condition, sample_box: &SampleBox, samples: usize, c: f64, k: f64) -> Result<bool, RegularityError> {
    let (pairs, _, _) = growth_pairs(p, cond, sample_box, samples)?;
    Ok(pairs.iter().all(|(lhs, base, _, _)| *lhs <= c * base + k + config::GROWTH_SLACK))
}

#[derive(Debug, Clone, Serialize)]
pub struct GaugeCheck {
    pub r: Vec<f64>,
    pub ratio: Vec<f64>,
    pub superlinear: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RayCheck {
    pub directions: usize,
    pub sigma: Vec<f64>,
    pub passed: bool,
    /// First failing direction and its `‖φ‖` values along the ray.
    pub failure: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityVerdict {
    pub passed: bool,
    #[serde(rename = "box")]
    pub sample_box: String,
    pub samples: usize,
    pub theta: String,
    pub inequality_passed: bool,
    /// Sample where `L < θ(‖φ‖)`, with both sides.
    pub witness: Option<(BTreeMap<String, f64>, f64, f64)>,
    pub gauge: GaugeCheck,
    pub rays: RayCheck,
}

/// `L ≥ θ(‖φ‖)` on the box, `θ(r)/r` increasing past 10³, and `‖φ‖ → ∞` along
/// random control rays.
pub fn check_coercivity(p: &Problem, theta: &Expr, sample_box: &SampleBox, samples: usize) -> Result<CoercivityVerdict, RegularityError> {
    check_samples(samples)?;
    if let Some(v) = theta.free_vars().into_iter().find(|v| v != GAUGE_VAR) {
        return Err(RegularityError::Theta(v));
    }
    let gauge_names = [GAUGE_VAR.to_string()];
    let th = Fns::new(&gauge_names, std::slice::from_ref(theta))?;
    let mut exprs = vec![p.lagrangian().clone()];
    exprs.extend(p.dynamics().iter().cloned());
    let fns = Fns::new(&sample_box.names, &exprs)?;

    let mut witness = None;
    for pt in sample_box.samples(samples, config::seed()) {
        let vals = fns.all(&pt)?;
        let l = vals[0];
        let bound = th.eval(0, &[norm(&vals[1..])])?;
        if l < bound - config::CONVEXITY_TOL * (1.0 + l.abs()) {
            witness = Some((named(&sample_box.names, &pt), l, bound));
            break;
        }
    }

    let r: Vec<f64> = (1..=6).map(|e| 10f64.powi(e)).collect();
    let ratio = r.iter().map(|x| th.eval(0, &[*x]).map(|v| v / x)).collect::<Result<Vec<_>, _>>()?;
    let superlinear = ratio.windows(2).all(|w| w[1] > w[0]) && ratio[ratio.len() - 1] > 1e3;

    let rays = check_rays(p, &fns, sample_box)?;
    let inequality_passed = witness.is_none();
    Ok(CoercivityVerdict {
        passed: inequality_passed && superlinear && rays.passed,
        sample_box: sample_box.render(),
        samples,
        theta: theta.to_string(),
        inequality_passed,
        witness,
        gauge: GaugeCheck { r, ratio, superlinear },
        rays,
    })
}

/// `‖φ(t, x, σd)‖` for random `(t, x)` in the box and unit directions `d`, at
/// σ ∈ {10, 10², 10³}: strictly increasing, and growing at least tenfold from the
/// first to the last scale.
fn check_rays(p: &Problem, fns: &Fns, sample_box: &SampleBox) -> Result<RayCheck, RegularityError> {
    let n = p.n();
    let r = p.r();
    let mut rng = ChaCha8Rng::seed_from_u64(config::seed());
    let sigma = config::COERCIVITY_RAY_SCALES.to_vec();
    for _ in 0..config::COERCIVITY_RAYS {
        let mut pt: Vec<f64> = (0..sample_box.dim())
            .map(|i| rng.gen_range(sample_box.lower[i]..=sample_box.upper[i]))
            .collect();
        let mut d: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let len = norm(&d).max(1e-12);
        d.iter_mut().for_each(|x| *x /= len);
        let mut values = Vec::with_capacity(sigma.len());
        for s in &sigma {
            for j in 0..r {
                pt[1 + n + j] = s * d[j];
            }
            values.push(norm(&fns.all(&pt)?[1..]));
        }
        let increasing = values.windows(2).all(|w| w[1] > w[0]);
        if !increasing || values[values.len() - 1] < 10.0 * values[0] {
            return Ok(RayCheck { directions: config::COERCIVITY_RAYS, sigma, passed: false, failure: Some((d, values)) });
        }
    }
    Ok(RayCheck { directions: config::COERCIVITY_RAYS, sigma, passed: true, failure: None })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityWitness {
    pub function: String,
    pub point: BTreeMap<String, f64>,
    pub u: Vec<f64>,
    pub u_prime: Vec<f64>,
    /// `f((u+u')/2) - (f(u)+f(u'))/2`
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityVerdict {
    pub passed: bool,
    #[serde(rename = "box")]
    pub sample_box: String,
    pub samples: usize,
    pub witness: Option<ConvexityWitness>,
}

/// Midpoint convexity in `u` of `L` and each `φᵢ` at random pairs sharing `(t, x)`.
pub fn check_convexity(p: &Problem, sample_box: &SampleBox, samples: usize) -> Result<ConvexityVerdict, RegularityError> {
    check_samples(samples)?;
    let n = p.n();
    let r = p.r();
    let mut exprs = vec![p.lagrangian().clone()];
    exprs.extend(p.dynamics().iter().cloned());
    let labels: Vec<String> = std::iter::once("L".to_string()).chain(p.states().iter().map(|x| format!("phi[{x}]"))).collect();
    let fns = Fns::new(&sample_box.names, &exprs)?;

    // extend the box by a second copy of the control intervals
    let d = sample_box.dim();
    let mut pair_box = sample_box.clone();
    for j in 0..r {
        pair_box.names.push(format!("{}'", sample_box.names[1 + n + j]));
        pair_box.lower.push(sample_box.lower[1 + n + j]);
        pair_box.upper.push(sample_box.upper[1 + n + j]);
    }
    for q in pair_box.samples(samples, config::seed()) {
        let a = &q[..d];
        let mut b = a.to_vec();
        b[1 + n..].copy_from_slice(&q[d..]);
        let mut mid = a.to_vec();
        for j in 0..r {
            mid[1 + n + j] = 0.5 * (a[1 + n + j] + b[1 + n + j]);
        }
        let (fa, fb, fm) = (fns.all(a)?, fns.all(&b)?, fns.all(&mid)?);
        for i in 0..fa.len() {
            let avg = 0.5 * (fa[i] + fb[i]);
            let gap = fm[i] - avg;
            if gap > config::CONVEXITY_TOL * (1.0 + avg.abs()) {
                return Ok(ConvexityVerdict {
                    passed: false,
                    sample_box: sample_box.render(),
                    samples,
                    witness: Some(ConvexityWitness {
                        function: labels[i].clone(),
                        point: named(&sample_box.names[..1 + n], &a[..1 + n]),
                        u: a[1 + n..].to_vec(),
                        u_prime: b[1 + n..].to_vec(),
                        gap,
                    }),
                });
            }
        }
    }
    Ok(ConvexityVerdict { passed: true, sample_box: sample_box.render(), samples, witness: None })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AffineParams {
    pub gamma: f64,
    pub beta: f64,
    pub eta: f64,
    pub mu: f64,
}

impl AffineParams {
    /// Parses `"gamma,beta,eta,mu"`.
    pub fn parse(s: &str) -> Result<AffineParams, RegularityError> {
        let v: Vec<f64> = s
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| RegularityError::Params(format!("expected four numbers, got '{s}'")))?;
        let [gamma, beta, eta, mu] = v[..] else {
            return Err(RegularityError::Params(format!("expected four numbers, got '{s}'")));
        };
        let p = AffineParams { gamma, beta, eta, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), RegularityError> {
        if !(self.gamma > 0.0) {
            return Err(RegularityError::Params(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.beta < 2.0) {
            return Err(RegularityError::Params(format!("beta must be below 2, got {}", self.beta)));
        }
        let floor = (self.beta - 2.0).max(-2.0);
        if !(self.mu >= floor) {
            return Err(RegularityError::Params(format!("mu must be at least {floor}, got {}", self.mu)));
        }
        if !self.eta.is_finite() {
            return Err(RegularityError::Params("eta must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AffineVerdict {
    pub passed: bool,
    #[serde(rename = "box")]
    pub sample_box: String,
    pub samples: usize,
    pub params: AffineParams,
    pub min_singular_value: f64,
    /// Largest `LHS / (γ|L|^β + η)` and where it occurs.
    pub worst_ratio: f64,
    pub worst_state: String,
    pub witness: BTreeMap<String, f64>,
}

/// The growth condition for control-affine dynamics `φ = f(t,x) + g(t,x)u`, checked
/// for each state index `i`:
/// `(|L_t| + |L_{xᵢ}| + ‖Lφ_t - L_tφ‖ + ‖Lφ_{xᵢ} - L_{xᵢ}φ‖)·‖u‖^μ ≤ γ|L|^β + η`.
pub fn check_affine_growth(
    p: &Problem,
    params: AffineParams,
    sample_box: &SampleBox,
    samples: usize,
) -> Result<AffineVerdict, RegularityError> {
    check_samples(samples)?;
    params.validate()?;
    let n = p.n();
    let r = p.r();
    for (i, f) in p.dynamics().iter().enumerate() {
        for u in p.controls() {
            for w in p.controls() {
                if !symbolically_zero(&differentiate(&differentiate(f, u), w)) {
                    return Err(RegularityError::NonAffine { state: p.states()[i].clone() });
                }
            }
        }
    }

    // rank of g = ∂φ/∂u
    let g: Vec<Expr> = p.dynamics().iter().flat_map(|f| p.controls().iter().map(move |u| differentiate(f, u))).collect();
    let gf = Fns::new(&sample_box.names, &g)?;
    let mut min_sigma = f64::INFINITY;
    for pt in sample_box.samples(config::RANK_SAMPLES, config::seed()) {
        let m = DMatrix::from_row_slice(n, r, &gf.all(&pt)?);
        let sv = m.singular_values();
        let rank = sv.iter().filter(|s| **s > config::RANK_TOL).count();
        let smallest = if n >= r { sv.min() } else { 0.0 };
        min_sigma = min_sigma.min(smallest);
        if rank < r {
            return Err(RegularityError::RankDeficient { rank, r, point: render(&sample_box.names, &pt), sigma: smallest });
        }
    }

    let l = p.lagrangian();
    let mut exprs = vec![l.clone(), differentiate(l, TIME)];
    exprs.extend(p.states().iter().map(|x| differentiate(l, x)));
    exprs.extend(p.dynamics().iter().cloned());
    exprs.extend(p.dynamics().iter().map(|f| differentiate(f, TIME)));
    for x in p.states() {
        exprs.extend(p.dynamics().iter().map(|f| differentiate(f, x)));
    }
    let fns = Fns::new(&sample_box.names, &exprs)?;
    let (lt, lx0, phi0, phit0, phix0) = (1, 2, 2 + n, 2 + 2 * n, 2 + 3 * n);

    let mut worst = (f64::NEG_INFINITY, 0, Vec::new());
    for pt in sample_box.samples(samples, config::seed()) {
        let v = fns.all(&pt)?;
        let lv = v[0];
        let phi = &v[phi0..phi0 + n];
        let unorm = norm(&pt[1 + n..]);
        let rhs = params.gamma * lv.abs().powf(params.beta) + params.eta;
        let time_part: Vec<f64> = (0..n).map(|j| lv * v[phit0 + j] - v[lt] * phi[j]).collect();
        for i in 0..n {
            let state_part: Vec<f64> = (0..n).map(|j| lv * v[phix0 + i * n + j] - v[lx0 + i] * phi[j]).collect();
            let base = v[lt].abs() + v[lx0 + i].abs() + norm(&time_part) + norm(&state_part);
            // a vanishing bracket stays zero whatever ‖u‖^μ does
            let lhs = if base == 0.0 { 0.0 } else { base * unorm.powf(params.mu) };
            let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
            if ratio > worst.0 {
                worst = (ratio, i, pt.clone());
            }
        }
    }
    Ok(AffineVerdict {
        passed: worst.0 <= 1.0 + config::GROWTH_SLACK,
        sample_box: sample_box.render(),
        samples,
        params,
        min_singular_value: min_sigma,
        worst_ratio: worst.0,
        worst_state: p.states()[worst.1].clone(),
        witness: named(&sample_box.names, &worst.2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::parse;

    fn problem(l: &str, f: &str) -> Problem {
        Problem::from_text(&format!(
            "[problem]\nt0=0\nt1=1\nstates=x1\ncontrols=u1\n[lagrangian]\nL=\"{l}\"\n[dynamics]\nx1=\"{f}\"\n"
        ))
        .unwrap()
    }

    fn bx(p: &Problem, s: &str) -> SampleBox {
        SampleBox::parse(s, p).unwrap()
    }

    #[test]
    fn quadratic_growth_is_trivial() {
        let p = problem("u1^2", "u1");
        let f = fit_growth(&p, Condition::TonelliMorrey, &bx(&p, "t:0,1;x1:-2,2;u1:-10,10"), 1000).unwrap();
        assert_eq!((f.c, f.k), (0.0, 0.0));
        assert!(!f.suspected_violation);
    }

    #[test]
    fn x_u_squared_trend_is_flagged() {
        let p = problem("x1*u1^2", "u1");
        let f = fit_growth(&p, Condition::TonelliMorrey, &SampleBox::default_for(&p), 1000).unwrap();
        let ks: Vec<f64> = f.trend.iter().map(|t| t.k).collect();
        assert!(ks[0] >= 100.0 && ks[1] >= 400.0 && ks[2] >= 1600.0, "{ks:?}");
        assert!(f.suspected_violation);
    }

    #[test]
    fn problem_ten_applicability_trend_is_linear() {
        let p = problem("u1^2", "u1*x1");
        let f = fit_growth(&p, Condition::Applicability, &SampleBox::default_for(&p), 1000).unwrap();
        assert!(f.trend[0].k >= 10.0 - 1e-9);
        assert!((f.trend[1].k / f.trend[0].k - 2.0).abs() < 1e-9);
        assert!(!f.suspected_violation);
    }

    #[test]
    fn larger_box_never_lowers_k_at_fixed_c() {
        let p = problem("x1*u1^2 + sin(t*x1)", "u1 + x1^2");
        for c in [0.0, 1.0, 4.0] {
            let mut prev = f64::NEG_INFINITY;
            for scale in [1.0, 2.0] {
                let b = SampleBox::default_for(&p).scaled(scale);
                let (pairs, _, _) = growth_pairs(&p, Condition::TonelliMorrey, &b, 1000).unwrap();
                let k = pairs.iter().map(|(l, base, _, _)| l - c * base).fold(f64::NEG_INFINITY, f64::max);
                assert!(k >= prev);
                prev = k;
            }
        }
    }

    #[test]
    fn twenty_seven_implies_nine() {
        for (l, f) in [("u1^2", "u1"), ("u1^2 + x1^2", "u1 - x1"), ("exp(x1)*u1^2", "u1*x1")] {
            let p = problem(l, f);
            let b = SampleBox::default_for(&p);
            let fit = fit_growth(&p, Condition::TonelliMorrey, &b, 1000).unwrap();
            assert!(satisfies(&p, Condition::TonelliMorrey, &b, 1000, fit.c, fit.k).unwrap());
            assert!(satisfies(&p, Condition::Applicability, &b, 1000, fit.c, fit.k).unwrap());
        }
    }

    #[test]
    fn coercivity_examples() {
        let p = problem("u1^2", "u1");
        let b = SampleBox::default_for(&p);
        assert!(check_coercivity(&p, &parse("r^2").unwrap(), &b, 1000).unwrap().passed);
        let v = check_coercivity(&p, &parse("r^3").unwrap(), &b, 1000).unwrap();
        assert!(!v.passed && !v.inequality_passed);
        let (pt, l, th) = v.witness.unwrap();
        assert!(pt["u1"].abs() > 1.0 && l < th);
        let lin = problem("abs(u1)", "u1");
        assert!(!check_coercivity(&lin, &parse("r^2").unwrap(), &b, 1000).unwrap().passed);
        assert!(matches!(check_coercivity(&p, &parse("x1").unwrap(), &b, 1000), Err(RegularityError::Theta(_))));
    }

    #[test]
    fn bounded_dynamics_fail_the_ray_test() {
        let p = problem("u1^2", "sin(u1)");
        let v = check_coercivity(&p, &parse("r^2").unwrap(), &SampleBox::default_for(&p), 1000).unwrap();
        assert!(!v.rays.passed);
    }

    #[test]
    fn convexity_examples() {
        let q = problem("u1^2", "u1");
        assert!(check_convexity(&q, &SampleBox::default_for(&q), 1000).unwrap().passed);
        let ten = problem("u1^2", "u1*x1");
        assert!(check_convexity(&ten, &SampleBox::default_for(&ten), 1000).unwrap().passed);
        let s = problem("sin(u1)", "u1");
        let v = check_convexity(&s, &bx(&s, "u1:0,6.283185307179586"), 1000).unwrap();
        assert!(!v.passed);
        let w = v.witness.unwrap();
        assert_eq!(w.function, "L");
        assert!(w.gap > 0.0);
    }

    #[test]
    fn affine_growth_examples() {
        let q = problem("u1^2", "u1");
        let params = AffineParams::parse("1,1,1,0").unwrap();
        let v = check_affine_growth(&q, params, &SampleBox::default_for(&q), 1000).unwrap();
        assert!(v.passed);
        assert_eq!(v.worst_ratio, 0.0);
        let sq = problem("u1^2", "u1^2");
        assert!(matches!(check_affine_growth(&sq, params, &SampleBox::default_for(&sq), 1000), Err(RegularityError::NonAffine { .. })));
        let ten = problem("u1^2", "u1*x1");
        match check_affine_growth(&ten, params, &SampleBox::default_for(&ten), 1000) {
            Err(RegularityError::RankDeficient { point, .. }) => assert!(point.contains("x1=0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn affine_params_are_validated() {
        assert!(AffineParams::parse("0,1,1,0").is_err());
        assert!(AffineParams::parse("1,2,1,0").is_err());
        assert!(AffineParams::parse("1,1,1,-1.5").is_err());
        assert!(AffineParams::parse("1,1,1,-1").is_ok());
        assert!(AffineParams::parse("1,1").is_err());
    }

    #[test]
    fn too_few_samples() {
        let p = problem("u1^2", "u1");
        assert!(matches!(check_convexity(&p, &SampleBox::default_for(&p), 10), Err(RegularityError::Samples { .. })));
    }
}
