//! Analysis of arbitrary bunch systems through the coupling LP alone.

use serde::{Deserialize, Serialize};

use crate::coupling::{build_generic_program, ProgramMode};
use crate::cyclic::{AnalysisError, Certificate, Certificates};
use crate::lp::LpError;
use crate::system::GenericSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericReport {
    pub variables: usize,
    pub connections: usize,
    /// `½ Σ |<X> - <Y>|` over connections.
    pub delta0: f64,
    pub delta_min_lp: Option<f64>,
    pub cntx_lp: Option<f64>,
    /// Whether a coupling with every connection maximally coupled exists.
    pub noncontextual_lp: Option<bool>,
    pub contextual: Option<bool>,
    pub threshold: f64,
    pub lp_skipped: Option<String>,
    pub certificates: Certificates,
}

pub fn generic_delta0(sys: &GenericSystem) -> f64 {
    sys.connections()
        .iter()
        .map(|(a, b)| {
            let p = sys.marginal_plus(a).unwrap_or(0.0);
            let q = sys.marginal_plus(b).unwrap_or(0.0);
            (p - q).abs()
        })
        .sum()
}

pub fn analyze_generic(
    sys: &GenericSystem,
    threshold: f64,
    run_lp: bool,
) -> Result<GenericReport, AnalysisError> {
    let delta0 = generic_delta0(sys);
    let mut report = GenericReport {
        variables: sys.variable_count(),
        connections: sys.connections().len(),
        delta0,
        delta_min_lp: None,
        cntx_lp: None,
        noncontextual_lp: None,
        contextual: None,
        threshold,
        lp_skipped: None,
        certificates: Certificates {
            delta_min: None,
            maximal_coupling: None,
        },
    };
    if !run_lp {
        report.lp_skipped = Some("disabled".into());
        return Ok(report);
    }
    let outcome = (|| -> Result<(), AnalysisError> {
        let mismatch = build_generic_program(sys, ProgramMode::MinimizeMismatch)?;
        let solution = mismatch.solve()?;
        if !solution.is_optimal() {
            return Err(AnalysisError::Lp(LpError::NumericalBreakdown(
                "coupling program of a valid system reported infeasible".into(),
            )));
        }
        report.certificates.delta_min = Some(Certificate::new(mismatch.problem(), &solution));
        let value = (solution.objective - delta0).max(0.0);
        report.delta_min_lp = Some(solution.objective);
        report.cntx_lp = Some(value);
        report.contextual = Some(value > threshold);
        drop(mismatch);

        let maximal = build_generic_program(sys, ProgramMode::MaximalConnections)?;
        let feasibility = maximal.solve()?;
        report.noncontextual_lp = Some(feasibility.is_optimal());
        report.certificates.maximal_coupling =
            Some(Certificate::new(maximal.problem(), &feasibility));
        Ok(())
    })();
    match outcome {
        Ok(()) => Ok(report),
        Err(e) if e.is_too_large() => {
            report.lp_skipped = Some(e.to_string());
            Ok(report)
        }
        Err(e) => Err(e),
    }
}
