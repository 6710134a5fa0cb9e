//! Run configuration: one JSON document per run, fully validated before any
//! compute starts.
//!
//! The schema is strict — unknown keys are rejected — and every field has a
//! default, so the empty document `{}` is a complete, valid configuration.
//! One config (plus the RNG seed) determines a run exactly; all outputs are
//! bit-identical across repeats.

use std::fs;
use std::path::Path;

use annulus_core::cone::WeightFamily;
use annulus_core::grid::ProblemParams;
use serde::{Deserialize, Serialize};

/// Coefficient family a(x) in front of the nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightConfig {
    /// a ≡ value (value > 0).
    Constant { value: f64 },
    /// a = 1 + slope·(r - R0)/(R1 - R0), slope > -1.
    RadialProfile { slope: f64 },
    /// a = 1 + eps·cos^power θ, eps ≥ 0.
    AngularProfile { eps: f64, power: u32 },
}

impl WeightConfig {
    pub fn to_core(&self) -> WeightFamily<f64> {
        match *self {
            WeightConfig::Constant { value } => WeightFamily::Constant { value },
            WeightConfig::RadialProfile { slope } => WeightFamily::RadialProfile { slope },
            WeightConfig::AngularProfile { eps, power } => {
                WeightFamily::AngularProfile { eps, power }
            }
        }
    }

    /// True iff the coefficient is identically one.
    pub fn is_unit(&self) -> bool {
        matches!(self, WeightConfig::Constant { value } if *value == 1.0)
    }
}

/// Continuous problem data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    /// Ambient dimension N ≥ 3.
    pub dim: u32,
    /// Nonlinearity exponent p > 2.
    pub exponent: f64,
    /// Inner radius R0 > 0.
    pub inner_radius: f64,
    /// Outer radius R1 > R0.
    pub outer_radius: f64,
    /// Coefficient a(x).
    pub weight: WeightConfig,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            dim: 3,
            exponent: 4.0,
            inner_radius: 1.0,
            outer_radius: 2.0,
            weight: WeightConfig::Constant { value: 1.0 },
        }
    }
}

impl ProblemConfig {
    pub fn to_core(&self) -> ProblemParams<f64> {
        ProblemParams {
            dim: self.dim,
            exponent: self.exponent,
            inner_radius: self.inner_radius,
            outer_radius: self.outer_radius,
            weight: self.weight.to_core(),
        }
    }
}

/// Grid resolutions: the 2D tensor grid and the 1D radial mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Radial nodes of the 2D grid (≥ 3).
    pub nr: usize,
    /// Latitude nodes of the 2D grid (odd, ≥ 3).
    pub ntheta: usize,
    /// Nodes of the 1D radial mesh used by the profile and eigen solvers.
    pub n1d: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { nr: 65, ntheta: 65, n1d: 257 }
    }
}

/// Descent-flow knobs; `alpha` omitted (null) means "calibrate from cone
/// samples at run time".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowKnobs {
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Fixed-point declaration threshold on ‖u - T(u)‖_{H¹}.
    pub phi_tol: f64,
    /// Radius of the small ball around zero for the decay test.
    pub alpha: Option<f64>,
    /// Flow-time budget per trajectory.
    pub t_max_time: f64,
    /// Action level below which a trajectory counts as escaped.
    pub decay_action_floor: f64,
}

impl Default for FlowKnobs {
    fn default() -> Self {
        FlowKnobs {
            dt0: 0.25,
            dt_min: 1e-7,
            dt_max: 1.0,
            phi_tol: 1e-8,
            alpha: None,
            t_max_time: 300.0,
            decay_action_floor: -1.0,
        }
    }
}

/// Solver tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Radial Newton tolerance, relative to the profile amplitude.
    pub radial: f64,
    /// Fixed-point polish target on ‖u - T(u)‖_{H¹}.
    pub polish: f64,
    /// Bracket width at which the separatrix bisection stops.  The initial
    /// state is normalized onto the Nehari set, so this is effectively
    /// relative; keep it deep — each halving costs one flow probe, and the
    /// closest approach to the saddle improves exponentially with depth,
    /// which is what puts the Newton polish inside the right basin.
    pub bisect: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { radial: 1e-10, polish: 1e-10, bisect: 1e-10 }
    }
}

/// Initial datum for the solve pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// Lifted radial profile when the coefficient is constant, bump otherwise.
    Auto,
    /// Lifted 1D radial profile (requires a constant coefficient).
    Radial,
    /// Product bump, positive and latitude-monotone, with a mild angular
    /// bias so symmetry breaking is reachable.
    Bump,
}

/// Options specific to the solve command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    pub initial: InitialGuess,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { initial: InitialGuess::Auto }
    }
}

/// Which parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepModeConfig {
    /// Vary the exponent p at fixed radii.
    VaryP,
    /// Vary the inner radius R over unit-width annuli [R, R+1].
    VaryR,
}

/// Options specific to the sweep command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub mode: SweepModeConfig,
    /// Range start; per-mode default when omitted.
    pub lo: Option<f64>,
    /// Range end; per-mode default when omitted.
    pub hi: Option<f64>,
    /// Number of uniformly spaced samples.
    pub samples: usize,
    /// Annulus width for vary_r; only 1 is admissible.
    pub width: f64,
    /// Reuse sample files already present in the output directory.
    pub resume: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            mode: SweepModeConfig::VaryP,
            lo: None,
            hi: None,
            samples: 18,
            width: 1.0,
            resume: false,
        }
    }
}

impl SweepOptions {
    /// Resolved (lo, hi) range, applying the per-mode defaults.
    pub fn range(&self) -> (f64, f64) {
        match self.mode {
            SweepModeConfig::VaryP => (self.lo.unwrap_or(2.1), self.hi.unwrap_or(10.0)),
            SweepModeConfig::VaryR => (self.lo.unwrap_or(0.05), self.hi.unwrap_or(30.0)),
        }
    }
}

/// The complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    pub flow: FlowKnobs,
    pub tolerances: Tolerances,
    /// Output directory; created if missing.
    pub out_dir: String,
    /// Seed for every randomized ingredient (cone sampling).
    pub seed: u64,
    /// Worker-pool size for sweeps; other commands are single-threaded.
    pub workers: usize,
    pub solve: SolveOptions,
    pub sweep: SweepOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemConfig::default(),
            grid: GridConfig::default(),
            flow: FlowKnobs::default(),
            tolerances: Tolerances::default(),
            out_dir: "out".into(),
            seed: 9001,
            workers: 1,
            solve: SolveOptions::default(),
            sweep: SweepOptions::default(),
        }
    }
}

impl RunConfig {
    /// Read and parse a config file; `None` yields the defaults.
    pub fn load(path: Option<&Path>) -> Result<RunConfig, String> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    /// Schema-level validation; the message names the first violated rule.
    pub fn validate(&self) -> Result<(), String> {
        // Continuous problem data, including weight-family positivity.
        self.problem.to_core().validate().map_err(|e| e.to_string())?;
        if !(self.problem.exponent > 2.0) {
            return Err(format!("exponent must exceed 2, got {}", self.problem.exponent));
        }

        let g = &self.grid;
        if g.nr < 3 {
            return Err(format!("grid.nr must be >= 3, got {}", g.nr));
        }
        if g.ntheta < 3 || g.ntheta % 2 == 0 {
            return Err(format!("grid.ntheta must be odd and >= 3, got {}", g.ntheta));
        }
        if g.n1d < 5 {
            return Err(format!("grid.n1d must be >= 5, got {}", g.n1d));
        }

        let f = &self.flow;
        if !(f.dt_min > 0.0 && f.dt_min <= f.dt0 && f.dt0 <= f.dt_max && f.dt_max <= 1.0) {
            return Err(format!(
                "flow steps must satisfy 0 < dt_min <= dt0 <= dt_max <= 1, got {} / {} / {}",
                f.dt_min, f.dt0, f.dt_max
            ));
        }
        if !(f.phi_tol > 0.0) {
            return Err(format!("flow.phi_tol must be positive, got {}", f.phi_tol));
        }
        if let Some(a) = f.alpha {
            if !(a > 0.0) {
                return Err(format!("flow.alpha must be positive when given, got {a}"));
            }
        }
        if !(f.t_max_time > 0.0) {
            return Err(format!("flow.t_max_time must be positive, got {}", f.t_max_time));
        }
        if !f.decay_action_floor.is_finite() {
            return Err("flow.decay_action_floor must be finite".into());
        }

        let t = &self.tolerances;
        for (name, v) in [("radial", t.radial), ("polish", t.polish), ("bisect", t.bisect)] {
            if !(v > 0.0) {
                return Err(format!("tolerances.{name} must be positive, got {v}"));
            }
        }

        if self.workers == 0 {
            return Err("workers must be >= 1".into());
        }
        if self.solve.initial == InitialGuess::Radial
            && !matches!(self.problem.weight, WeightConfig::Constant { .. })
        {
            return Err("solve.initial = radial requires a constant coefficient".into());
        }

        let s = &self.sweep;
        if s.samples == 0 {
            return Err("sweep.samples must be >= 1".into());
        }
        let (lo, hi) = s.range();
        if !(hi >= lo) {
            return Err(format!("sweep range is empty: [{lo}, {hi}]"));
        }
        match s.mode {
            SweepModeConfig::VaryP => {
                if !(lo > 2.0) {
                    return Err(format!("sweep over p must start above 2, got {lo}"));
                }
            }
            SweepModeConfig::VaryR => {
                if !(lo > 0.0) {
                    return Err(format!("sweep over R must start above 0, got {lo}"));
                }
                // The unit-width family [R, R+1] is the only one admitted.
                if s.width != 1.0 {
                    return Err(format!(
                        "sweep over R fixes the annulus width at 1, got width {}",
                        s.width
                    ));
                }
            }
        }
        Ok(())
    }
}
