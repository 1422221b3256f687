//! Command-line driver. Every command prints a JSON report on stdout and maps
//! failures to exit codes: 2 for bad input, 3 for numerical failure, 4 for a
//! broken internal invariant.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config;
use crate::conservation::{self, ConservationError};
use crate::extremal::{self, ExtremalError, ShootOptions, Trajectory};
use crate::noether::{self, NoetherError};
use crate::problem::{self, Problem, ProblemError};
use crate::regularity::{self, AffineParams, Condition, RegularityError};
use crate::report::{Input, Report};
use crate::sampling::{BoxError, SampleBox};
use crate::symbolic::{self, Compiled, SymbolicError};
use crate::transform::{self, TransformError};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "extremal-lab", version, about = "Pontryagin extremals, conservation laws, symmetries and problem transformations")]
#[command(after_help = "The sampling seed defaults to 0 and can be overridden with EXTREMAL_LAB_SEED.")]
pub struct Cli {
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute an extremal by single shooting (or plain integration with --no-shoot).
    Solve {
        problem: PathBuf,
        /// RK4 intervals.
        #[arg(long, default_value_t = config::DEFAULT_STEPS)]
        steps: usize,
        /// Terminal residual tolerance (max norm).
        #[arg(long, default_value_t = config::SHOOT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = config::SHOOT_MAX_ITER)]
        max_iter: usize,
        /// Initial costate guess, comma separated (default all zeros).
        #[arg(long, allow_hyphen_values = true)]
        guess: Option<String>,
        /// Cost multiplier, 0 or -1 (overrides the problem file).
        #[arg(long, allow_hyphen_values = true)]
        psi0: Option<f64>,
        /// Integrate from x(a) and the guess as psi(a) without shooting.
        #[arg(long)]
        no_shoot: bool,
        /// Trajectory CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test whether F(t, x, u, psi0, psi) is a conservation law.
    Check {
        problem: PathBuf,
        /// The candidate, may use H.
        #[arg(long = "f", allow_hyphen_values = true)]
        f: String,
        /// Trajectory CSV to monitor F along.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        psi0: Option<f64>,
    },
    /// Verify quasi-invariance under a transformation family and emit conserved quantities.
    Noether {
        problem: PathBuf,
        family: PathBuf,
        /// Extremal to validate along; otherwise one is shot when boundary data are complete.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long, default_value_t = config::DEFAULT_STEPS)]
        steps: usize,
        #[arg(long, allow_hyphen_values = true)]
        guess: Option<String>,
    },
    /// Build the Gamkrelidze or tau image and map extremals to and from it.
    Transform {
        problem: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Time scale for the Gamkrelidze image.
        #[arg(long, allow_hyphen_values = true)]
        upsilon: Option<String>,
        /// Box for the positivity check of upsilon.
        #[arg(long = "box")]
        sample_box: Option<String>,
        /// Original extremal to lift.
        #[arg(long, conflicts_with = "project")]
        lift: Option<PathBuf>,
        /// Rate profile v(tau) for tau lifts, as an expression in tau.
        #[arg(long, allow_hyphen_values = true)]
        v: Option<String>,
        /// Image extremal to project.
        #[arg(long)]
        project: Option<PathBuf>,
        /// Image problem file, lifted image CSV, or projected CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit existence and regularity hypotheses on a box.
    Regularity {
        problem: PathBuf,
        /// 9, 25, 26, 27, coercivity or convexity.
        #[arg(long)]
        condition: String,
        #[arg(long = "box")]
        sample_box: Option<String>,
        #[arg(long, default_value_t = config::DEFAULT_SAMPLES)]
        samples: usize,
        /// Gauge theta(r) for coercivity.
        #[arg(long)]
        theta: Option<String>,
        /// gamma,beta,eta,mu for condition 26.
        #[arg(long, allow_hyphen_values = true)]
        params: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Gam,
    Tau,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<ProblemError> for Failure {
    fn from(e: ProblemError) -> Failure {
        let code = match e {
            ProblemError::TrivialMultiplier | ProblemError::Newton { .. } => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<ExtremalError> for Failure {
    fn from(e: ExtremalError) -> Failure {
        match e {
            ExtremalError::Problem(p) => p.into(),
            ExtremalError::BlowUp { .. } | ExtremalError::SingularJacobian { .. } | ExtremalError::Trivial { .. } => {
                Failure { code: EXIT_NUMERICAL, message: e.to_string() }
            }
            _ => Failure::input(e.to_string()),
        }
    }
}

impl From<ConservationError> for Failure {
    fn from(e: ConservationError) -> Failure {
        match e {
            ConservationError::Problem(p) => p.into(),
            ConservationError::UnknownVariable(_) => Failure::input(e.to_string()),
            _ => Failure { code: EXIT_NUMERICAL, message: e.to_string() },
        }
    }
}

impl From<NoetherError> for Failure {
    fn from(e: NoetherError) -> Failure {
        let code = match e {
            NoetherError::Evaluation { .. } | NoetherError::Grid => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<RegularityError> for Failure {
    fn from(e: RegularityError) -> Failure {
        let code = match e {
            RegularityError::Evaluation { .. } => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<SymbolicError> for Failure {
    fn from(e: SymbolicError) -> Failure {
        Failure::input(e.to_string())
    }
}

impl From<BoxError> for Failure {
    fn from(e: BoxError) -> Failure {
        Failure::input(e.to_string())
    }
}

/// Transform failures depend on direction: a lift that misses the zero level is a
/// bug, a projection input that misses it is bad input.
fn transform_failure(e: TransformError, lifting: bool) -> Failure {
    let code = match &e {
        TransformError::Problem(ProblemError::TrivialMultiplier | ProblemError::Newton { .. }) => EXIT_NUMERICAL,
        TransformError::Extremal(_) | TransformError::Evaluation { .. } => EXIT_NUMERICAL,
        TransformError::ZeroLevel { .. } if lifting => EXIT_INVARIANT,
        TransformError::NonMonotone { .. } if lifting => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    };
    Failure { code, message: e.to_string() }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn input(path: &Path) -> Result<Input, Failure> {
    Input::from_file(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_problem(path: &Path, psi0: Option<f64>) -> Result<Problem, Failure> {
    let p = Problem::load(path)?;
    Ok(match psi0 {
        Some(v) => p.with_psi0(v)?,
        None => p,
    })
}

fn parse_list(s: &str, n: usize, what: &str) -> Result<Vec<f64>, Failure> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::input(format!("{what}: expected comma-separated numbers, got '{s}'")))?;
    if v.len() != n {
        return Err(Failure::input(format!("{what}: expected {n} values, got {}", v.len())));
    }
    Ok(v)
}

fn parse_expr(s: &str, what: &str) -> Result<symbolic::Expr, Failure> {
    symbolic::parse(s).map_err(|e| Failure::input(format!("{what}: {e}")))
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(config::seed())
}

fn save(tr: &Trajectory, path: &Path) -> Result<(), Failure> {
    tr.save(path).map_err(|e| Failure::input(e.to_string()))
}

fn trajectory_summary(tr: &Trajectory) -> Value {
    json!({
        "nodes": tr.len(),
        "cost": tr.cost,
        "hamiltonian_drift": tr.hamiltonian_drift(),
        "psi0": tr.psi0,
    })
}

/// Runs a parsed command, filling `report`.
pub fn execute(cli: &Cli, report: &mut Report) -> Result<(), Failure> {
    match &cli.command {
        Command::Solve { problem, steps, tol, max_iter, guess, psi0, no_shoot, out } => {
            report.command = "solve".into();
            report.inputs.push(input(problem)?);
            let p = load_problem(problem, *psi0)?;
            report.warnings.extend(p.warnings());
            let guess = match guess {
                Some(g) => parse_list(g, p.n(), "--guess")?,
                None => vec![0.0; p.n()],
            };
            let sys = extremal::CanonicalSystem::new(&p)?;
            let curvature = problem::check_curvature(sys.hamiltonian(), sys.law(), sys.layout(), config::CURVATURE_SAMPLES, &mut rng())?;
            if !curvature.negative_semidefinite() {
                report.warnings.push(format!(
                    "d2H/du2 has a positive eigenvalue (max {:e}) at {} sampled points: stationary but not maximizing there",
                    curvature.max_eigenvalue,
                    curvature.positive.len()
                ));
            }
            let law = match sys.law() {
                problem::ControlLaw::Closed { controls, exprs } => {
                    json!(controls.iter().zip(exprs).map(|(u, e)| (u.clone(), e.to_string())).collect::<std::collections::BTreeMap<_, _>>())
                }
                problem::ControlLaw::Implicit { .. } => json!("implicit (Newton on dH/du = 0)"),
            };
            let (tr, shooting) = if *no_shoot {
                let x_a = p.initial_state().ok_or_else(|| Failure::input("boundary incomplete: --no-shoot needs every x(t0)"))?;
                let tr = sys.integrate(&x_a, &guess, *steps)?;
                tr.check_nontrivial()?;
                (tr, Value::Null)
            } else {
                let r = extremal::shoot(&p, &guess, ShootOptions { steps: *steps, tol: *tol, max_iter: *max_iter })?;
                let s = json!({
                    "converged": r.converged,
                    "iterations": r.iterations,
                    "psi_a": r.psi_a,
                    "residual": r.residual,
                    "residual_norm": r.residual_norm(),
                    "tol": tol,
                });
                if !r.converged {
                    report.result = json!({ "shooting": s });
                    return Err(Failure {
                        code: EXIT_NUMERICAL,
                        message: format!("shooting did not converge: residual {:e} after {} iterations", r.residual_norm(), r.iterations),
                    });
                }
                (r.trajectory, s)
            };
            if let Some(out) = out {
                save(&tr, out)?;
            }
            report.result = json!({
                "problem": p.name(),
                "steps": steps,
                "control_law": law,
                "curvature": { "samples": curvature.samples, "max_eigenvalue": curvature.max_eigenvalue },
                "shooting": shooting,
                "trajectory": trajectory_summary(&tr),
                "out": out.as_ref().map(|o| o.display().to_string()),
            });
        }
        Command::Check { problem, f, trajectory, psi0 } => {
            report.command = "check".into();
            report.inputs.push(input(problem)?);
            let p = load_problem(problem, *psi0)?;
            let f = parse_expr(f, "--f")?;
            let mut verdict = conservation::check_conservation(&p, &f, &mut rng())?;
            if let Some(path) = trajectory {
                report.inputs.push(input(path)?);
                let tr = Trajectory::load(path, &p)?;
                verdict.drift = Some(conservation::monitor(&f, &tr)?);
            }
            report.warnings.extend(verdict.warnings.iter().cloned());
            report.result = json!({ "f": f.to_string(), "verdict": to_value(&verdict) });
        }
        Command::Noether { problem, family, trajectory, steps, guess } => {
            report.command = "noether".into();
            report.inputs.push(input(problem)?);
            report.inputs.push(input(family)?);
            let p = Problem::load(problem)?;
            let fam = noether::load_family(family)?;
            let tr = match trajectory {
                Some(path) => {
                    report.inputs.push(input(path)?);
                    Some(Trajectory::load(path, &p)?)
                }
                None if p.initial_state().is_some() && p.terminal_state().is_some() => {
                    let guess = match guess {
                        Some(g) => parse_list(g, p.n(), "--guess")?,
                        None => vec![0.0; p.n()],
                    };
                    match extremal::shoot(&p, &guess, ShootOptions { steps: *steps, ..ShootOptions::default() }) {
                        Ok(r) if r.converged => Some(r.trajectory),
                        Ok(r) => {
                            report.warnings.push(format!("shooting did not converge (residual {:e}); no extremal to validate along", r.residual_norm()));
                            None
                        }
                        Err(e) => {
                            report.warnings.push(format!("shooting failed: {e}; no extremal to validate along"));
                            None
                        }
                    }
                }
                None => None,
            };
            let inv = noether::check_quasi_invariance(&p, &fam, tr.as_ref(), &mut rng())?;
            report.warnings.extend(inv.warnings.iter().cloned());
            report.result = json!({
                "invariance": to_value(&inv),
                "extremal": tr.as_ref().map(trajectory_summary),
            });
        }
        Command::Transform { problem, kind, upsilon, sample_box, lift, v, project, out } => {
            report.command = "transform".into();
            report.inputs.push(input(problem)?);
            let p = Problem::load(problem)?;
            let tp = match kind {
                Kind::Tau => {
                    if upsilon.is_some() {
                        report.warnings.push("--upsilon is ignored by the tau transform".into());
                    }
                    transform::tau_transform(&p)
                }
                Kind::Gam => {
                    let ups = upsilon.as_deref().ok_or_else(|| Failure::input("--kind gam needs --upsilon"))?;
                    let ups = parse_expr(ups, "--upsilon")?;
                    let b = sample_box.as_deref().map(|s| SampleBox::parse(s, &p)).transpose()?;
                    transform::gamkrelidze(&p, &ups, b.as_ref())
                }
            }
            .map_err(|e| transform_failure(e, false))?;
            let mut result = json!({
                "kind": to_value(&tp.kind),
                "upsilon": tp.upsilon.as_ref().map(|e| e.to_string()),
                "image_problem": tp.image.to_file_string(),
                "link": to_value(&tp.link),
            });
            if let Some(path) = lift {
                report.inputs.push(input(path)?);
                let e = Trajectory::load(path, &p)?;
                let profile = match v {
                    Some(expr) if tp.kind == transform::Kind::Tau => {
                        let f = Compiled::new(&parse_expr(expr, "--v")?, &["tau"])?;
                        Some(e.grid.iter().map(|t| f.eval(&[*t])).collect::<Result<Vec<_>, _>>()?)
                    }
                    Some(_) => {
                        report.warnings.push("--v is ignored by the Gamkrelidze lift".into());
                        None
                    }
                    None => None,
                };
                let (img, rep) = transform::lift_extremal(&tp, &e, profile.as_deref()).map_err(|e| transform_failure(e, true))?;
                if let Some(out) = out {
                    save(&img, out)?;
                }
                result["lift"] = to_value(&rep);
            } else if let Some(path) = project {
                report.inputs.push(input(path)?);
                let img = Trajectory::load(path, &tp.image)?;
                let (back, rep) = transform::project_extremal(&tp, &img).map_err(|e| transform_failure(e, false))?;
                if rep.cost_gap > config::PROJECT_ZERO_LEVEL_TOL * (1.0 + rep.original_cost.abs()) {
                    report.warnings.push(format!("projected cost differs from the image cost by {:e}", rep.cost_gap));
                }
                if let Some(out) = out {
                    save(&back, out)?;
                }
                result["project"] = to_value(&rep);
            } else if let Some(out) = out {
                std::fs::write(out, tp.image.to_file_string()).map_err(|e| Failure::input(format!("{}: {e}", out.display())))?;
            }
            result["out"] = json!(out.as_ref().map(|o| o.display().to_string()));
            report.result = result;
        }
        Command::Regularity { problem, condition, sample_box, samples, theta, params } => {
            report.command = "regularity".into();
            report.inputs.push(input(problem)?);
            let p = Problem::load(problem)?;
            let b = match sample_box {
                Some(s) => SampleBox::parse(s, &p)?,
                None => SampleBox::default_for(&p),
            };
            let result = match condition.as_str() {
                "coercivity" => {
                    let theta = theta.as_deref().ok_or_else(|| Failure::input("coercivity needs --theta"))?;
                    to_value(&regularity::check_coercivity(&p, &parse_expr(theta, "--theta")?, &b, *samples)?)
                }
                "convexity" => to_value(&regularity::check_convexity(&p, &b, *samples)?),
                "26" | "affine-26" => {
                    let params = params.as_deref().ok_or_else(|| Failure::input("condition 26 needs --params gamma,beta,eta,mu"))?;
                    to_value(&regularity::check_affine_growth(&p, AffineParams::parse(params)?, &b, *samples)?)
                }
                other => {
                    let cond = Condition::from_id(other).ok_or_else(|| {
                        Failure::input(format!("unknown condition '{other}'; expected 9, 25, 26, 27, coercivity or convexity"))
                    })?;
                    to_value(&regularity::fit_growth(&p, cond, &b, *samples)?)
                }
            };
            report.result = json!({ "condition": condition, "verdict": result });
        }
    }
    Ok(())
}

/// Parses arguments, runs, prints the report and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let start = Instant::now();
    let mut report = Report::new("");
    let outcome = execute(&cli, &mut report);
    report.wall_time_ms = start.elapsed().as_millis() as u64;
    let code = match outcome {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            report.result = json!({ "error": f.message, "exit_code": f.code, "partial": report.result });
            f.code
        }
    };
    let text = report.to_json();
    {
        use std::io::Write;
        // a closed pipe downstream is not an error of ours
        let _ = writeln!(std::io::stdout().lock(), "{text}");
    }
    if let Some(path) = &cli.report {
        if let Err(e) = std::fs::write(path, format!("{text}\n")) {
            eprintln!("error: {}: {e}", path.display());
            return if code == 0 { EXIT_INPUT } else { code };
        }
    }
    code
}
