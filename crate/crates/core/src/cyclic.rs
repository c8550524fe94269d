//! Contextuality measures and criteria for rank-n cyclic systems.
//!
//! With `<V_i>`, `<W_i>` the connection members' expectations and
//! `vw_i = <V_i W_{i+1}>` the observed product expectations:
//!
//! * `Δ₀ = ½ Σ |<V_i> - <W_i>|`, the mismatch forced by the marginals alone;
//! * `Δ_min = ½ max(2Δ₀, s_odd(vw) - n + 2)`, the smallest total mismatch
//!   `Σ Pr[V_i ≠ W_i]` over all couplings of the system;
//! * `CNTX = Δ_min - Δ₀`, zero exactly when the system is noncontextual.
//!
//! `Δ_min` is also computed by linear programming over the coupling atoms,
//! and noncontextuality is decided three ways: the closed inequality, the
//! 2n-term criterion with maximal connection couplings, and LP feasibility of
//! a coupling whose connection marginals are all maximal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::{self, build_cyclic_program, plus_probability, CouplingError, ProgramMode};
use crate::lp::{self, LpError, LpSolution, LpStatus};
use crate::signed_sums::{s_even, s_odd};
use crate::system::{CyclicSystem, MarginalSummary, PairDistribution, Relabeling};

/// Default CNTX threshold separating float noise from contextuality.
pub const VERDICT_THRESHOLD: f64 = 1e-9;
/// Tolerance for treating a connection as consistent, for special cases.
pub const CC_TOLERANCE: f64 = 1e-9;
/// Tolerance on connection marginals supplied to [`compatibility`].
pub const MARGINAL_TOLERANCE: f64 = 1e-9;
/// Ranks from which the closed form is flagged as conjectural.
pub const CONJECTURAL_FROM_RANK: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("connection {connection}: marginal {which} is {got}, system has {expected}")]
    MarginalMismatch {
        connection: usize,
        which: &'static str,
        expected: f64,
        got: f64,
    },
    #[error("expected {expected} connections, got {got}")]
    ConnectionCount { expected: usize, got: usize },
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

impl AnalysisError {
    /// True for solver failures that signal numerical trouble rather than
    /// bad input or an oversized program.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            AnalysisError::Lp(LpError::NumericalBreakdown(_))
                | AnalysisError::Coupling(CouplingError::Lp(LpError::NumericalBreakdown(_)))
        )
    }

    /// True when the LP was skipped for size reasons.
    pub fn is_too_large(&self) -> bool {
        matches!(
            self,
            AnalysisError::Coupling(CouplingError::TooManyVariables { .. })
                | AnalysisError::Coupling(CouplingError::Lp(LpError::TooLarge { .. }))
                | AnalysisError::Lp(LpError::TooLarge { .. })
        )
    }
}

pub fn delta0(sys: &CyclicSystem) -> f64 {
    delta0_of(&sys.marginal_summary())
}

/// [`delta0`] from expectations alone.
pub fn delta0_of(summary: &MarginalSummary) -> f64 {
    0.5 * summary.connection_gaps().iter().sum::<f64>()
}

fn s_odd_of(values: &[f64]) -> f64 {
    s_odd(values).expect("cyclic systems have n >= 3")
}

fn s_even_of(values: &[f64]) -> f64 {
    s_even(values).expect("cyclic systems have n >= 3")
}

pub fn delta_min_closed(sys: &CyclicSystem) -> f64 {
    delta_min_closed_of(&sys.marginal_summary())
}

/// [`delta_min_closed`] from expectations alone.
pub fn delta_min_closed_of(summary: &MarginalSummary) -> f64 {
    let n = summary.n() as f64;
    let gaps: f64 = summary.connection_gaps().iter().sum();
    0.5 * gaps.max(s_odd_of(&summary.vw) - n + 2.0)
}

/// Minimum of `Σ Pr[V_i ≠ W_i]` over couplings, by linear programming.
/// Returns the optimum with its solver certificate.
pub fn delta_min_lp(sys: &CyclicSystem) -> Result<(f64, LpSolution), AnalysisError> {
    let program = build_cyclic_program(sys, ProgramMode::MinimizeMismatch)?;
    let solution = program.solve()?;
    match solution.status {
        LpStatus::Optimal => Ok((solution.objective, solution)),
        LpStatus::Infeasible => Err(AnalysisError::Lp(LpError::NumericalBreakdown(
            "coupling program of a valid system reported infeasible".into(),
        ))),
    }
}

pub fn cntx(sys: &CyclicSystem) -> f64 {
    cntx_of(&sys.marginal_summary())
}

/// [`cntx`] from expectations alone.
pub fn cntx_of(summary: &MarginalSummary) -> f64 {
    let value = delta_min_closed_of(summary) - delta0_of(summary);
    if value < 0.0 {
        0.0
    } else {
        value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Closed,
    Master,
    Lp,
}

/// Verdict plus the criterion's slack; a negative margin means violation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub method: Method,
    pub noncontextual: bool,
    pub margin: f64,
}

/// Slack of `s_odd(vw) ≤ n - 2 + Σ|<V_i> - <W_i>|`.
pub fn closed_margin(summary: &MarginalSummary) -> f64 {
    let n = summary.n() as f64;
    let gaps: f64 = summary.connection_gaps().iter().sum();
    n - 2.0 + gaps - s_odd_of(&summary.vw)
}

/// The 2n values `vw_1..vw_n, 1 - |<V_1> - <W_1>|, ..`; the second half are
/// the product expectations of maximally coupled connections.
pub fn master_values(summary: &MarginalSummary) -> Vec<f64> {
    summary
        .vw
        .iter()
        .copied()
        .chain(summary.connection_gaps().into_iter().map(|g| 1.0 - g))
        .collect()
}

/// Slack of `s_odd(vw, 1 - |<V_i> - <W_i>|) ≤ 2n - 2`.
pub fn master_margin(summary: &MarginalSummary) -> f64 {
    let n = summary.n() as f64;
    2.0 * n - 2.0 - s_odd_of(&master_values(summary))
}

/// Outcome of the LP route: feasibility of a coupling with maximal
/// connection marginals, plus the certificate.
pub fn lp_criterion(sys: &CyclicSystem) -> Result<(CriterionVerdict, LpSolution), AnalysisError> {
    let program = build_cyclic_program(sys, ProgramMode::MaximalConnections)?;
    let solution = program.solve()?;
    let verdict = CriterionVerdict {
        method: Method::Lp,
        noncontextual: solution.is_optimal(),
        margin: if solution.is_optimal() {
            0.0
        } else {
            -solution.objective
        },
    };
    Ok((verdict, solution))
}

/// Decides noncontextuality. `threshold` bounds the tolerated CNTX; the
/// closed and master slacks are compared against `-2·threshold` since
/// `CNTX = ½ max(0, -closed margin)`.
pub fn is_noncontextual(
    sys: &CyclicSystem,
    method: Method,
    threshold: f64,
) -> Result<CriterionVerdict, AnalysisError> {
    let summary = sys.marginal_summary();
    let verdict = |margin: f64| CriterionVerdict {
        method,
        noncontextual: margin >= -2.0 * threshold,
        margin,
    };
    match method {
        Method::Closed => Ok(verdict(closed_margin(&summary))),
        Method::Master => Ok(verdict(master_margin(&summary))),
        Method::Lp => lp_criterion(sys).map(|(v, _)| v),
    }
}

/// Evaluation of the 2n-term compatibility condition for given connection
/// couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Compatibility {
    /// `<V_i W_i>` of each connection coupling.
    pub connection_products: Vec<f64>,
    /// `s_odd(vw, connection products)`.
    pub s_odd: f64,
    /// `2n - 2`.
    pub bound: f64,
    /// `s_odd(vw) + s_even(connections)` and `s_even(vw) + s_odd(connections)`.
    pub split: [f64; 2],
    pub compatible: bool,
}

fn evaluate_compatibility(vw: &[f64], products: Vec<f64>, threshold: f64) -> Compatibility {
    let n = vw.len() as f64;
    let all: Vec<f64> = vw.iter().chain(&products).copied().collect();
    let value = s_odd_of(&all);
    let bound = 2.0 * n - 2.0;
    let split = [
        s_odd_of(vw) + s_even_of(&products),
        s_even_of(vw) + s_odd_of(&products),
    ];
    Compatibility {
        connection_products: products,
        s_odd: value,
        bound,
        split,
        compatible: value <= bound + threshold,
    }
}

fn check_connection_marginals(
    summary: &MarginalSummary,
    connections: &[PairDistribution],
) -> Result<(), AnalysisError> {
    let n = summary.n();
    if connections.len() != n {
        return Err(AnalysisError::ConnectionCount {
            expected: n,
            got: connections.len(),
        });
    }
    for (i, c) in connections.iter().enumerate() {
        if (c.first_mean() - summary.v[i]).abs() > MARGINAL_TOLERANCE {
            return Err(AnalysisError::MarginalMismatch {
                connection: i + 1,
                which: "<V>",
                expected: summary.v[i],
                got: c.first_mean(),
            });
        }
        if (c.second_mean() - summary.w[i]).abs() > MARGINAL_TOLERANCE {
            return Err(AnalysisError::MarginalMismatch {
                connection: i + 1,
                which: "<W>",
                expected: summary.w[i],
                got: c.second_mean(),
            });
        }
    }
    Ok(())
}

/// Whether connection couplings `(V_i, W_i)` (given as pmfs, in index order)
/// can be combined with the observed pairs into one coupling.
pub fn compatibility(
    sys: &CyclicSystem,
    connections: &[PairDistribution],
) -> Result<Compatibility, AnalysisError> {
    compatibility_with_threshold(sys, connections, VERDICT_THRESHOLD)
}

pub fn compatibility_with_threshold(
    sys: &CyclicSystem,
    connections: &[PairDistribution],
    threshold: f64,
) -> Result<Compatibility, AnalysisError> {
    let summary = sys.marginal_summary();
    check_connection_marginals(&summary, connections)?;
    let products = connections
        .iter()
        .map(PairDistribution::product_mean)
        .collect();
    Ok(evaluate_compatibility(&summary.vw, products, threshold))
}

/// LP cross-check of [`compatibility`]: feasibility with the connection
/// marginals pinned.
pub fn compatibility_lp(
    sys: &CyclicSystem,
    connections: &[PairDistribution],
) -> Result<LpSolution, AnalysisError> {
    check_connection_marginals(&sys.marginal_summary(), connections)?;
    let program = build_cyclic_program(sys, ProgramMode::FixConnections(connections.to_vec()))?;
    Ok(program.solve()?)
}

/// Maximal couplings of every connection `(V_i, W_i)`.
pub fn maximal_connections(sys: &CyclicSystem) -> Vec<PairDistribution> {
    let summary = sys.marginal_summary();
    summary
        .v
        .iter()
        .zip(&summary.w)
        .map(|(&v, &w)| {
            coupling::maximal_coupling(plus_probability(v), plus_probability(w))
                .expect("plus probabilities are clamped to [0, 1]")
        })
        .collect()
}

/// Drops `V_n`, `W_n` from a system where `V_n = W_1` almost surely and
/// `V_n ~ W_n`, turning pair n-1 into `(V_{n-1}, W_1)`.
pub fn reduce_order(sys: &CyclicSystem) -> Result<CyclicSystem, AnalysisError> {
    let n = sys.n();
    if n < 4 {
        return Err(AnalysisError::PreconditionFailed(format!(
            "rank {n} cannot be reduced below 3"
        )));
    }
    let summary = sys.marginal_summary();
    let last = summary.vw[n - 1];
    if (last - 1.0).abs() > 1e-9 {
        return Err(AnalysisError::PreconditionFailed(format!(
            "<V{n} W1> = {last}, expected 1"
        )));
    }
    let gap = (summary.v[n - 1] - summary.w[n - 1]).abs();
    if gap > 1e-9 {
        return Err(AnalysisError::PreconditionFailed(format!(
            "V{n} and W{n} differ in distribution (|<V> - <W>| = {gap})"
        )));
    }
    // Pair n-1 keeps its pmf; its W-coordinate is renamed W_n -> W_1.
    CyclicSystem::new(sys.pairs()[..n - 1].to_vec())
        .map_err(|e| AnalysisError::PreconditionFailed(format!("reduced system invalid: {e}")))
}

/// Either a computed diagnostic or the reason it does not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Diagnostic<T> {
    Applicable(T),
    Skipped { reason: String },
}

impl<T> Diagnostic<T> {
    pub fn applicable(&self) -> Option<&T> {
        match self {
            Diagnostic::Applicable(t) => Some(t),
            Diagnostic::Skipped { .. } => None,
        }
    }

    fn skipped(reason: impl Into<String>) -> Self {
        Diagnostic::Skipped {
            reason: reason.into(),
        }
    }
}

/// Rank 5, consistently connected, with `Pr[V_i=+1, W_{i+1}=+1] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KcbsDiagnostic {
    /// `p_i = Pr[V_i = +1]`.
    pub p: Vec<f64>,
    pub sum: f64,
    /// `Σ p_i ≤ 2`.
    pub noncontextual: bool,
    pub agrees_with_general: bool,
}

/// Rank 4, consistently connected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshDiagnostic {
    /// The four sums of `vw` with one negated term (the fourth, third,
    /// second and first respectively).
    pub combinations: [f64; 4],
    pub max_abs: f64,
    /// All combinations within `[-2, 2]`.
    pub noncontextual: bool,
    pub agrees_with_general: bool,
}

/// Rank 3, consistently connected: `-1 ≤ Σ vw ≤ 1 + 2 min(vw)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppesZanottiDiagnostic {
    pub sum: f64,
    pub lower: f64,
    pub upper: f64,
    pub noncontextual: bool,
    pub agrees_with_general: bool,
    /// `1 + 2 max(vw)`: a looser upper bound that is necessary but not
    /// sufficient, reported for comparison.
    pub max_form_upper: f64,
    pub max_form_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialCases {
    pub kcbs: Diagnostic<KcbsDiagnostic>,
    pub chsh: Diagnostic<ChshDiagnostic>,
    pub suppes_zanotti: Diagnostic<SuppesZanottiDiagnostic>,
}

impl SpecialCases {
    /// Whether every applicable diagnostic agrees with the closed criterion.
    pub fn all_agree(&self) -> bool {
        self.kcbs.applicable().is_none_or(|d| d.agrees_with_general)
            && self.chsh.applicable().is_none_or(|d| d.agrees_with_general)
            && self
                .suppes_zanotti
                .applicable()
                .is_none_or(|d| d.agrees_with_general)
    }
}

pub fn is_consistently_connected(summary: &MarginalSummary) -> bool {
    summary.connection_gaps().iter().all(|&g| g <= CC_TOLERANCE)
}

pub fn special_cases(sys: &CyclicSystem, threshold: f64) -> SpecialCases {
    let summary = sys.marginal_summary();
    let n = sys.n();
    let cc = is_consistently_connected(&summary);
    let general = closed_margin(&summary) >= -2.0 * threshold;

    let kcbs = if n != 5 {
        Diagnostic::skipped("rank is not 5")
    } else if !cc {
        Diagnostic::skipped("not consistently connected")
    } else if sys.pairs().iter().any(|p| p.pp > CC_TOLERANCE) {
        Diagnostic::skipped("exclusion Pr[V_i=+1, W_i+1=+1] = 0 does not hold")
    } else {
        let p: Vec<f64> = summary.v.iter().map(|&v| plus_probability(v)).collect();
        let sum: f64 = p.iter().sum();
        let noncontextual = sum <= 2.0 + threshold;
        Diagnostic::Applicable(KcbsDiagnostic {
            p,
            sum,
            noncontextual,
            agrees_with_general: noncontextual == general,
        })
    };

    let chsh = if n != 4 {
        Diagnostic::skipped("rank is not 4")
    } else if !cc {
        Diagnostic::skipped("not consistently connected")
    } else {
        let total: f64 = summary.vw.iter().sum();
        let combinations = [3, 2, 1, 0].map(|k| total - 2.0 * summary.vw[k]);
        let max_abs = combinations.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        let noncontextual = max_abs <= 2.0 + 2.0 * threshold;
        Diagnostic::Applicable(ChshDiagnostic {
            combinations,
            max_abs,
            noncontextual,
            agrees_with_general: noncontextual == general,
        })
    };

    let suppes_zanotti = if n != 3 {
        Diagnostic::skipped("rank is not 3")
    } else if !cc {
        Diagnostic::skipped("not consistently connected")
    } else {
        let sum: f64 = summary.vw.iter().sum();
        let min = summary.vw.iter().copied().fold(f64::INFINITY, f64::min);
        let max = summary.vw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lower = -1.0;
        let upper = 1.0 + 2.0 * min;
        let slack = 2.0 * threshold;
        let noncontextual = sum >= lower - slack && sum <= upper + slack;
        let max_form_upper = 1.0 + 2.0 * max;
        Diagnostic::Applicable(SuppesZanottiDiagnostic {
            sum,
            lower,
            upper,
            noncontextual,
            agrees_with_general: noncontextual == general,
            max_form_upper,
            max_form_holds: sum >= lower - slack && sum <= max_form_upper + slack,
        })
    };

    SpecialCases {
        kcbs,
        chsh,
        suppes_zanotti,
    }
}

/// Solver result kept in a report: status, optimum, nonzero atoms and the
/// Farkas ray when infeasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub status: LpStatus,
    pub objective: f64,
    pub atom_count: usize,
    /// `(atom index, probability)` for every nonzero atom.
    pub support: Vec<(usize, f64)>,
    pub ray: Option<Vec<f64>>,
    pub pivots: usize,
    pub perturbed: bool,
    /// Result of [`lp::verify_certificate`] on the originating program.
    pub verified: bool,
}

impl Certificate {
    pub fn new(problem: &lp::LpProblem, solution: &LpSolution) -> Self {
        Self {
            status: solution.status,
            objective: solution.objective,
            atom_count: solution.atoms.len(),
            support: solution
                .atoms
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != 0.0)
                .map(|(k, &p)| (k, p))
                .collect(),
            ray: solution.ray.clone(),
            pivots: solution.pivots,
            perturbed: solution.perturbed,
            verified: lp::verify_certificate(problem, solution),
        }
    }

    /// Dense atom vector.
    pub fn atoms(&self) -> Vec<f64> {
        let mut atoms = vec![0.0; self.atom_count];
        for &(k, p) in &self.support {
            atoms[k] = p;
        }
        atoms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criteria {
    pub closed: CriterionVerdict,
    pub master: CriterionVerdict,
    pub lp: Option<CriterionVerdict>,
    /// The 2n-term compatibility condition evaluated at the maximal
    /// connection couplings.
    pub compatibility: Compatibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub delta_min: Option<Certificate>,
    pub maximal_coupling: Option<Certificate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub n: usize,
    pub summary: MarginalSummary,
    pub delta0: f64,
    pub delta_min_closed: f64,
    pub delta_min_lp: Option<f64>,
    pub cntx: f64,
    pub contextual: bool,
    pub threshold: f64,
    pub consistently_connected: bool,
    /// Rank ≥ 6: the closed form is checked against the LP rather than
    /// assumed.
    pub conjectural: bool,
    pub criteria: Criteria,
    pub special_cases: SpecialCases,
    pub relabeling: Option<Relabeling>,
    /// Why the LP parts are missing, when they are.
    pub lp_skipped: Option<String>,
    pub certificates: Certificates,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub threshold: f64,
    pub run_lp: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            threshold: VERDICT_THRESHOLD,
            run_lp: true,
        }
    }
}

/// Full analysis of a cyclic system. LP parts are skipped (with a reason)
/// when disabled or too large for the dense solver; solver breakdowns are
/// returned as errors.
pub fn analyze(
    sys: &CyclicSystem,
    options: AnalysisOptions,
) -> Result<AnalysisReport, AnalysisError> {
    let summary = sys.marginal_summary();
    let n = sys.n();
    let threshold = options.threshold;
    let d0 = delta0(sys);
    let closed = delta_min_closed(sys);
    let value = cntx(sys);

    let closed_verdict = is_noncontextual(sys, Method::Closed, threshold)?;
    let master_verdict = is_noncontextual(sys, Method::Master, threshold)?;
    let products = maximal_connections(sys)
        .iter()
        .map(PairDistribution::product_mean)
        .collect();
    let compat = evaluate_compatibility(&summary.vw, products, threshold);

    let mut delta_min_lp_value = None;
    let mut lp_verdict = None;
    let mut certificates = Certificates {
        delta_min: None,
        maximal_coupling: None,
    };
    let mut lp_skipped = None;
    if options.run_lp {
        match run_lp_parts(sys) {
            Ok(parts) => {
                delta_min_lp_value = Some(parts.delta_min);
                lp_verdict = Some(parts.verdict);
                certificates = parts.certificates;
            }
            Err(e) if e.is_too_large() => lp_skipped = Some(e.to_string()),
            Err(e) => return Err(e),
        }
    } else {
        lp_skipped = Some("disabled".into());
    }

    Ok(AnalysisReport {
        n,
        delta0: d0,
        delta_min_closed: closed,
        delta_min_lp: delta_min_lp_value,
        cntx: value,
        contextual: value > threshold,
        threshold,
        consistently_connected: is_consistently_connected(&summary),
        conjectural: n >= CONJECTURAL_FROM_RANK,
        criteria: Criteria {
            closed: closed_verdict,
            master: master_verdict,
            lp: lp_verdict,
            compatibility: compat,
        },
        special_cases: special_cases(sys, threshold),
        relabeling: None,
        lp_skipped,
        certificates,
        summary,
    })
}

struct LpParts {
    delta_min: f64,
    verdict: CriterionVerdict,
    certificates: Certificates,
}

fn run_lp_parts(sys: &CyclicSystem) -> Result<LpParts, AnalysisError> {
    let mismatch = build_cyclic_program(sys, ProgramMode::MinimizeMismatch)?;
    let solution = mismatch.solve()?;
    if !solution.is_optimal() {
        return Err(AnalysisError::Lp(LpError::NumericalBreakdown(
            "coupling program of a valid system reported infeasible".into(),
        )));
    }
    let delta_min_cert = Certificate::new(mismatch.problem(), &solution);
    drop(mismatch);

    let maximal = build_cyclic_program(sys, ProgramMode::MaximalConnections)?;
    let feasibility = maximal.solve()?;
    let verdict = CriterionVerdict {
        method: Method::Lp,
        noncontextual: feasibility.is_optimal(),
        margin: if feasibility.is_optimal() {
            0.0
        } else {
            -feasibility.objective
        },
    };
    Ok(LpParts {
        delta_min: solution.objective,
        verdict,
        certificates: Certificates {
            delta_min: Some(delta_min_cert),
            maximal_coupling: Some(Certificate::new(maximal.problem(), &feasibility)),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::from_expectations;

    fn system(v: &[f64], w: &[f64], vw: &[f64]) -> CyclicSystem {
        from_expectations(&MarginalSummary {
            v: v.to_vec(),
            w: w.to_vec(),
            vw: vw.to_vec(),
        })
        .unwrap()
    }

    fn cc(vw: &[f64]) -> CyclicSystem {
        let zeros = vec![0.0; vw.len()];
        system(&zeros, &zeros, vw)
    }

    #[test]
    fn delta0_examples() {
        assert_eq!(delta0(&cc(&[0.3, -0.2, 0.5])), 0.0);
        let s = system(&[0.2, 0.0, 0.0], &[-0.1, 0.0, 0.0], &[0.0, 0.0, 0.0]);
        assert!((delta0(&s) - 0.15).abs() < 1e-15);
        let s = system(&[0.1, 0.2, 0.3, 0.4], &[0.0; 4], &[0.0; 4]);
        assert!((delta0(&s) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closed_form_examples() {
        let pr = cc(&[1.0, 1.0, 1.0, -1.0]);
        assert!((delta_min_closed(&pr) - 1.0).abs() < 1e-15);
        assert!((cntx(&pr) - 1.0).abs() < 1e-15);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let tsirelson = cc(&[h, h, h, -h]);
        assert!((delta_min_closed(&tsirelson) - (2f64.sqrt() - 1.0)).abs() < 1e-12);

        let specker = cc(&[-1.0, -1.0, -1.0]);
        assert!((delta_min_closed(&specker) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_system_sits_on_the_boundary() {
        for n in 3..=7 {
            let sys = cc(&vec![1.0; n]);
            let v = is_noncontextual(&sys, Method::Closed, VERDICT_THRESHOLD).unwrap();
            assert!(v.noncontextual);
            assert!(v.margin.abs() < 1e-12);
            assert_eq!(cntx(&sys), 0.0);
        }
    }

    #[test]
    fn inconsistent_expectations_closed_form_only() {
        // <V1> = 1 with <V1 W2> = -1 forces <W2> = -1, so no pair pmf
        // realizes these expectations; the closed forms still evaluate.
        let summary = MarginalSummary {
            v: vec![1.0, 0.0, 0.0],
            w: vec![0.0, 0.0, 0.0],
            vw: vec![-1.0, -1.0, -1.0],
        };
        assert!(from_expectations(&summary).is_err());
        assert!((delta0_of(&summary) - 0.5).abs() < 1e-15);
        assert!((cntx_of(&summary) - 0.5).abs() < 1e-12);
        assert!((closed_margin(&summary) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_connection_lp_agrees() {
        // Realizable variant: the W2 marginal is shifted instead.
        let sys = system(&[0.0, 0.6, 0.0], &[0.0, 0.0, 0.0], &[-1.0, 0.0, -1.0]);
        let (lp_value, _) = delta_min_lp(&sys).unwrap();
        assert!((lp_value - delta_min_closed(&sys)).abs() < 1e-9);
        let lp = is_noncontextual(&sys, Method::Lp, VERDICT_THRESHOLD).unwrap();
        let closed = is_noncontextual(&sys, Method::Closed, VERDICT_THRESHOLD).unwrap();
        assert_eq!(lp.noncontextual, closed.noncontextual);
    }

    #[test]
    fn pr_box_all_methods() {
        let pr = cc(&[1.0, 1.0, 1.0, -1.0]);
        let closed = is_noncontextual(&pr, Method::Closed, VERDICT_THRESHOLD).unwrap();
        assert!(!closed.noncontextual);
        assert!((closed.margin + 2.0).abs() < 1e-12);
        assert!(
            !is_noncontextual(&pr, Method::Master, VERDICT_THRESHOLD)
                .unwrap()
                .noncontextual
        );
        assert!(
            !is_noncontextual(&pr, Method::Lp, VERDICT_THRESHOLD)
                .unwrap()
                .noncontextual
        );
        let (value, solution) = delta_min_lp(&pr).unwrap();
        assert!((value - 1.0).abs() < 1e-9);
        assert!(solution.is_optimal());
    }

    #[test]
    fn compatibility_examples() {
        let specker = cc(&[-1.0, -1.0, -1.0]);
        let identity = vec![
            PairDistribution {
                pp: 0.5,
                pm: 0.0,
                mp: 0.0,
                mm: 0.5
            };
            3
        ];
        let c = compatibility(&specker, &identity).unwrap();
        assert!((c.s_odd - 6.0).abs() < 1e-12);
        assert_eq!(c.bound, 4.0);
        assert!(!c.compatible);
        assert!(!compatibility_lp(&specker, &identity).unwrap().is_optimal());

        for n in 3..=5 {
            let independent = cc(&vec![0.0; n]);
            let conns = vec![
                PairDistribution {
                    pp: 0.25,
                    pm: 0.25,
                    mp: 0.25,
                    mm: 0.25
                };
                n
            ];
            let c = compatibility(&independent, &conns).unwrap();
            assert_eq!(c.s_odd, 0.0);
            assert!(c.compatible);
            assert!(compatibility_lp(&independent, &conns).unwrap().is_optimal());
        }
    }

    #[test]
    fn compatibility_split_form() {
        let sys = cc(&[0.9, -0.4, 0.7, 0.2]);
        let conns: Vec<_> = [0.5, -0.3, 0.8, 0.1]
            .iter()
            .map(|&c| PairDistribution::from_expectations(0.0, 0.0, c).unwrap())
            .collect();
        let c = compatibility(&sys, &conns).unwrap();
        assert!((c.s_odd - c.split[0].max(c.split[1])).abs() < 1e-12);
    }

    #[test]
    fn compatibility_rejects_mismatched_marginals() {
        let sys = cc(&[0.0, 0.0, 0.0]);
        let mut conns = vec![
            PairDistribution {
                pp: 0.25,
                pm: 0.25,
                mp: 0.25,
                mm: 0.25
            };
            3
        ];
        conns[1] = PairDistribution {
            pp: 0.5,
            pm: 0.25,
            mp: 0.0,
            mm: 0.25,
        };
        assert!(matches!(
            compatibility(&sys, &conns),
            Err(AnalysisError::MarginalMismatch { connection: 2, .. })
        ));
        assert!(matches!(
            compatibility(&sys, &conns[..2]),
            Err(AnalysisError::ConnectionCount {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn reduce_order_preconditions() {
        let sys = cc(&[0.3, 0.2, 0.1, 0.9]);
        assert!(matches!(
            reduce_order(&sys),
            Err(AnalysisError::PreconditionFailed(_))
        ));
        assert!(matches!(
            reduce_order(&cc(&[1.0; 3])),
            Err(AnalysisError::PreconditionFailed(_))
        ));
        let sys = cc(&[0.3, -0.2, 0.1, 1.0]);
        let reduced = reduce_order(&sys).unwrap();
        assert_eq!(reduced.n(), 3);
        for (got, want) in reduced.marginal_summary().vw.iter().zip([0.3, -0.2, 0.1]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((cntx(&sys) - cntx(&reduced)).abs() < 1e-12);
    }

    #[test]
    fn special_case_examples() {
        let p = 1.0 / 5f64.sqrt();
        let v = 2.0 * p - 1.0;
        let kcbs = system(&[v; 5], &[v; 5], &[1.0 - 4.0 * p; 5]);
        let sc = special_cases(&kcbs, VERDICT_THRESHOLD);
        let d = sc.kcbs.applicable().unwrap();
        assert!((d.sum - 5f64.sqrt()).abs() < 1e-12);
        assert!(!d.noncontextual && d.agrees_with_general);
        assert!((cntx(&kcbs) - 0.5 * (4.0 * 5f64.sqrt() - 8.0)).abs() < 1e-12);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let sc = special_cases(&cc(&[h, h, h, -h]), VERDICT_THRESHOLD);
        let d = sc.chsh.applicable().unwrap();
        assert!((d.max_abs - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!(!d.noncontextual && d.agrees_with_general);

        let sc = special_cases(&cc(&[1.0, 1.0, 1.0]), VERDICT_THRESHOLD);
        let d = sc.suppes_zanotti.applicable().unwrap();
        assert!(d.noncontextual && d.agrees_with_general);
        assert_eq!(d.sum, 3.0);
        assert_eq!(d.upper, 3.0);
        assert!(sc.kcbs.applicable().is_none());
    }

    #[test]
    fn max_form_is_not_sufficient() {
        // Two perfect correlations and one perfect anticorrelation.
        let sc = special_cases(&cc(&[1.0, 1.0, -1.0]), VERDICT_THRESHOLD);
        let d = sc.suppes_zanotti.applicable().unwrap();
        assert!(!d.noncontextual);
        assert!(d.max_form_holds);
        assert!(d.agrees_with_general);
    }

    #[test]
    fn analyze_pr_box() {
        let report = analyze(&cc(&[1.0, 1.0, 1.0, -1.0]), AnalysisOptions::default()).unwrap();
        assert!(report.contextual);
        assert!((report.delta_min_lp.unwrap() - 1.0).abs() < 1e-9);
        assert!(report.certificates.delta_min.as_ref().unwrap().verified);
        let feas = report.certificates.maximal_coupling.as_ref().unwrap();
        assert_eq!(feas.status, LpStatus::Infeasible);
        assert!(feas.verified);
        assert!(!report.conjectural);
    }
}
