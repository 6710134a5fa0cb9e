//! Persistence: JSON and CSV emission with round-trip-exact floats.
//!
//! Every floating-point number is printed with 17 significant digits
//! (`{:.16e}`), the smallest count that reproduces any f64 bit pattern on
//! parse.  Serialization order is fixed by struct declaration order and all
//! iteration is over vectors, so identical data always produces identical
//! bytes — the determinism contract for artifacts.

use std::io;
use std::path::Path;

use annulus_core::cone::ConeReport;
use annulus_core::energy::EnergyBreakdown;
use annulus_core::flow::{FlowOutcome, FlowTrace};
use annulus_core::grid::Field;
use annulus_core::radial::RadialSolution;
use serde::Serialize;

use crate::config::ProblemConfig;

/// One float, 17 significant digits, scientific notation.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON formatter that prints every float with 17 significant digits.
struct Fmt17Json;

impl serde_json::ser::Formatter for Fmt17Json {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.8e}")
    }
}

/// Serialize to a JSON string with exact floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fmt17Json);
    value.serialize(&mut ser).expect("serialization of plain data cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Write a value as exact-float JSON to `path`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    std::fs::write(path, to_json(value))
}

/// Stable string for a flow classification.
pub fn outcome_str(o: FlowOutcome) -> &'static str {
    match o {
        FlowOutcome::ConvergedFixedPoint => "converged_fixed_point",
        FlowOutcome::DecayedToZero => "decayed_to_zero",
        FlowOutcome::EscapedNegative => "escaped_negative",
        FlowOutcome::BudgetExhausted => "budget_exhausted",
    }
}

/// Grid function on the wire: parameters, shape, and values in row-major
/// order by (i_r, j_theta).
#[derive(Debug, Clone, Serialize)]
pub struct FieldJson {
    pub params: ProblemConfig,
    pub nr: usize,
    pub ntheta: usize,
    pub values: Vec<f64>,
}

impl FieldJson {
    pub fn from_field(params: &ProblemConfig, f: &Field<f64>) -> Self {
        FieldJson {
            params: params.clone(),
            nr: f.grid.nr,
            ntheta: f.grid.ntheta,
            values: f.values.clone(),
        }
    }
}

/// Cone-membership defects plus the tolerance they were judged at.
#[derive(Debug, Clone, Serialize)]
pub struct ConeJson {
    pub min_value: f64,
    pub max_even_defect: f64,
    pub max_monotone_defect: f64,
    pub boundary_defect: f64,
    pub tolerance: f64,
    pub in_cone: bool,
}

impl ConeJson {
    pub fn from_report(r: &ConeReport<f64>, tau: f64) -> Self {
        ConeJson {
            min_value: r.min_value,
            max_even_defect: r.max_even_defect,
            max_monotone_defect: r.max_monotone_defect,
            boundary_defect: r.boundary_defect,
            tolerance: tau,
            in_cone: r.in_cone,
        }
    }
}

/// Action functional split at a field: ‖u‖², ∫a|u|^p, I(u), I'(u)u.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyJson {
    pub h1_sq: f64,
    pub nonlinear: f64,
    pub action: f64,
    pub nehari_residual: f64,
}

impl EnergyJson {
    pub fn from_breakdown(e: &EnergyBreakdown<f64>) -> Self {
        EnergyJson {
            h1_sq: e.h1_sq,
            nonlinear: e.nonlinear,
            action: e.action,
            nehari_residual: e.nehari_residual,
        }
    }
}

/// Trajectory CSV: one row per accepted step.
pub fn flow_trace_csv(trace: &FlowTrace<f64>) -> String {
    let mut s = String::from("time,action,phi_norm,h1_norm\n");
    for row in &trace.samples {
        s.push_str(&fmt17(row.time));
        s.push(',');
        s.push_str(&fmt17(row.action));
        s.push(',');
        s.push_str(&fmt17(row.phi_norm));
        s.push(',');
        s.push_str(&fmt17(row.h1_norm));
        s.push('\n');
    }
    s
}

/// Radial profile CSV: one row per mesh node.
pub fn radial_csv(rad: &RadialSolution<f64>) -> String {
    let mut s = String::from("r,u\n");
    for (r, u) in rad.r_nodes.iter().zip(&rad.values) {
        s.push_str(&fmt17(*r));
        s.push(',');
        s.push_str(&fmt17(*u));
        s.push('\n');
    }
    s
}

/// Machine-readable failure record written next to partial artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorJson {
    pub error: ErrorBody,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    /// Pipeline stage that failed (grid, radial, separatrix, ...).
    pub stage: String,
    pub message: String,
}

impl ErrorJson {
    pub fn new(stage: &str, message: impl Into<String>) -> Self {
        ErrorJson { error: ErrorBody { stage: stage.into(), message: message.into() } }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip_exactly() {
        for &x in &[
            std::f64::consts::PI,
            -4.829916992750164e1,
            1.0 / 3.0,
            6.02e23,
            -1.1125369292536007e-308,
            0.1 + 0.2,
        ] {
            let s = fmt17(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s} -> {back}");
        }
    }

    #[test]
    fn json_floats_use_the_exact_format() {
        #[derive(Serialize)]
        struct Probe {
            x: f64,
            v: Vec<f64>,
        }
        let s = to_json(&Probe { x: 0.1, v: vec![1.0, -2.5e-3] });
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("1.0000000000000000e0"));
        assert!(s.contains("-2.5000000000000001e-3"));
        assert!(s.ends_with('\n'));
        // Parses back as JSON with the same values.
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["x"].as_f64().unwrap().to_bits(), (0.1f64).to_bits());
    }

    #[test]
    fn csv_headers_are_stable() {
        assert!(flow_trace_csv(&empty_trace()).starts_with("time,action,phi_norm,h1_norm\n"));
    }

    fn empty_trace() -> FlowTrace<f64> {
        use annulus_core::grid::{AnnulusGrid, ProblemParams};
        use annulus_core::cone::WeightFamily;
        let g = AnnulusGrid::build(
            ProblemParams {
                dim: 3,
                exponent: 4.0,
                inner_radius: 1.0,
                outer_radius: 2.0,
                weight: WeightFamily::Constant { value: 1.0 },
            },
            5,
            5,
        )
        .unwrap();
        FlowTrace {
            samples: vec![],
            outcome: FlowOutcome::BudgetExhausted,
            final_field: Field::zeros(&g),
            best_index: 0,
            best_field: Field::zeros(&g),
        }
    }
}
