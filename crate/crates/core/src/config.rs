//! Default tolerances and sizes. Every command-line flag falls back to a value here.

/// Sampling seed, overridable through `EXTREMAL_LAB_SEED`.
pub const DEFAULT_SEED: u64 = 0;
pub const SEED_ENV: &str = "EXTREMAL_LAB_SEED";

/// Cost multiplier of the normal branch.
pub const DEFAULT_PSI0: f64 = -1.0;

// control elimination
pub const NEWTON_MAX_ITER: usize = 50;
pub const NEWTON_TOL: f64 = 1e-12;
pub const CURVATURE_SAMPLES: usize = 20;
pub const CURVATURE_TOL: f64 = 1e-9;

// integration and shooting
pub const MIN_STEPS: usize = 16;
pub const DEFAULT_STEPS: usize = 512;
pub const SHOOT_TOL: f64 = 1e-9;
pub const SHOOT_MAX_ITER: usize = 60;
pub const SHOOT_FD_STEP: f64 = 1e-6;
pub const SHOOT_MAX_HALVINGS: usize = 8;
pub const NONTRIVIALITY_TOL: f64 = 1e-12;

// conservation
pub const VIOLATION_WITNESS_MIN: f64 = 1e-6;

// noether
pub const NOETHER_FD_STEP: f64 = 1e-4;
pub const NOETHER_FD_TOL: f64 = 1e-6;

// transform
pub const POSITIVITY_SAMPLES: usize = 50;
pub const LIFT_ZERO_LEVEL_TOL: f64 = 1e-7;
pub const PROJECT_ZERO_LEVEL_TOL: f64 = 1e-6;
pub const V_NORMALIZATION_SLACK: f64 = 0.01;
pub const V_INTEGRAL_TOL: f64 = 1e-9;

// regularity
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const MIN_SAMPLES: usize = 1_000;
pub const C_GRID_STEP: f64 = 0.25;
pub const C_GRID_MAX: f64 = 32.0;
pub const TREND_SCALES: [f64; 3] = [1.0, 2.0, 4.0];
pub const TREND_GROWTH_FLAG: f64 = 4.0;
pub const GROWTH_SLACK: f64 = 1e-9;
pub const CONVEXITY_TOL: f64 = 1e-9;
pub const COERCIVITY_RAYS: usize = 16;
pub const COERCIVITY_RAY_SCALES: [f64; 3] = [10.0, 100.0, 1000.0];
pub const RANK_SAMPLES: usize = 50;
pub const RANK_TOL: f64 = 1e-9;

/// `EXTREMAL_LAB_SEED` when set and parseable, the default otherwise.
pub fn seed() -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_SEED)
}
