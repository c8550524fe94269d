//! Independent re-verification of analysis results.
//!
//! Nothing here calls the solver or the closed-form routines. Coupling atoms
//! are decoded from scratch, marginals and expectations are recomputed by
//! direct summation over raw pmfs, signed sums come from exhaustive
//! enumeration, and Farkas rays are checked against constraint rows rebuilt
//! locally.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cyclic::{
    analyze, AnalysisError, AnalysisOptions, AnalysisReport, Diagnostic, VERDICT_THRESHOLD,
};
use crate::lp::LpStatus;
use crate::signed_sums::{s_parity_exhaustive, Parity};
use crate::system::{CyclicSystem, GenericSystem, PairDistribution, System};

/// Tolerance for reproduced marginals and Farkas inequalities.
pub const COUPLING_TOLERANCE: f64 = 1e-8;
/// Tolerance for closed form against LP optimum.
pub const DELTA_TOLERANCE: f64 = 1e-7;
/// Tolerance for signed sums against enumeration.
pub const SIGNED_SUM_TOLERANCE: f64 = 1e-12;
/// Longest vector the oracle enumerates exhaustively.
pub const MAX_ENUMERATION: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("atom vector has {got} entries, system has {expected} atoms")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0} variables is too many to enumerate")]
    TooLarge(usize),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Claim {
    Value(f64),
    Flag(bool),
}

impl Claim {
    fn distance(self, other: Claim) -> f64 {
        match (self, other) {
            (Claim::Value(a), Claim::Value(b)) => {
                let d = (a - b).abs();
                if d.is_nan() {
                    f64::INFINITY
                } else {
                    d
                }
            }
            (Claim::Flag(a), Claim::Flag(b)) => f64::from(u8::from(a != b)),
            _ => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub subject: String,
    pub claim: Claim,
    pub independent: Claim,
    pub tolerance: f64,
    pub agreement: bool,
    pub discrepancy: f64,
}

impl OracleVerdict {
    pub fn compare(
        subject: impl Into<String>,
        claim: Claim,
        independent: Claim,
        tolerance: f64,
    ) -> Self {
        let discrepancy = claim.distance(independent);
        Self {
            subject: subject.into(),
            claim,
            independent,
            tolerance,
            agreement: discrepancy <= tolerance,
            discrepancy,
        }
    }

    fn values(subject: impl Into<String>, claim: f64, independent: f64, tolerance: f64) -> Self {
        Self::compare(
            subject,
            Claim::Value(claim),
            Claim::Value(independent),
            tolerance,
        )
    }

    fn flags(subject: impl Into<String>, claim: bool, independent: bool) -> Self {
        Self::compare(subject, Claim::Flag(claim), Claim::Flag(independent), 0.0)
    }
}

/// Result of [`verify_coupling`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingCheck {
    /// Claim: the atoms form a coupling (flag); discrepancy is the largest
    /// deviation found.
    pub verdict: OracleVerdict,
    /// `Pr[X ≠ Y]` for each connection, recomputed from the atoms.
    pub mismatch: Vec<f64>,
    pub total_mismatch: f64,
}

/// Variables of the coupling in atom-bit order, the observed bunches as
/// (variable indices, pmf) and the connections as index pairs.
struct Layout {
    variables: usize,
    bunches: Vec<(Vec<usize>, Vec<f64>)>,
    connections: Vec<(usize, usize)>,
    /// `Pr[X = +1]` for each connection member.
    connection_plus: Vec<(f64, f64)>,
}

fn plus_share(pmf: &[f64], position: usize, width: usize) -> f64 {
    pmf.iter()
        .enumerate()
        .filter(|(outcome, _)| outcome >> (width - 1 - position) & 1 == 0)
        .map(|(_, p)| p)
        .sum()
}

fn cyclic_layout(sys: &CyclicSystem) -> Layout {
    let n = sys.n();
    let bunches: Vec<(Vec<usize>, Vec<f64>)> = sys
        .pairs()
        .iter()
        .enumerate()
        .map(|(i, p)| (vec![i, n + (i + 1) % n], vec![p.pp, p.pm, p.mp, p.mm]))
        .collect();
    let connection_plus = (0..n)
        .map(|i| {
            let v = plus_share(&bunches[i].1, 0, 2);
            let w = plus_share(&bunches[(i + n - 1) % n].1, 1, 2);
            (v, w)
        })
        .collect();
    Layout {
        variables: 2 * n,
        bunches,
        connections: (0..n).map(|i| (i, n + i)).collect(),
        connection_plus,
    }
}

fn generic_layout(sys: &GenericSystem) -> Layout {
    let mut names: Vec<&str> = Vec::new();
    let mut bunches = Vec::new();
    let mut home = Vec::new();
    for (b, bunch) in sys.bunches().iter().enumerate() {
        let mut idx = Vec::new();
        for (k, name) in bunch.vars.iter().enumerate() {
            idx.push(names.len());
            names.push(name);
            home.push((b, k));
        }
        bunches.push((idx, bunch.pmf.clone()));
    }
    let find = |name: &str| names.iter().position(|v| *v == name);
    let mut connections = Vec::new();
    let mut connection_plus = Vec::new();
    for (a, b) in sys.connections() {
        if let (Some(x), Some(y)) = (find(a), find(b)) {
            connections.push((x, y));
            let share = |var: usize| {
                let (bunch, k) = home[var];
                plus_share(&bunches[bunch].1, k, bunches[bunch].0.len())
            };
            connection_plus.push((share(x), share(y)));
        }
    }
    Layout {
        variables: names.len(),
        bunches,
        connections,
        connection_plus,
    }
}

fn layout(system: &System) -> Layout {
    match system {
        System::Cyclic(c) => cyclic_layout(c),
        System::Generic(g) => generic_layout(g),
    }
}

/// Outcome index of `vars` within `atom`: bit set means -1, first listed
/// variable most significant.
fn project(atom: usize, vars: &[usize], total: usize) -> usize {
    let mut outcome = 0;
    for &v in vars {
        outcome = outcome * 2 + (atom >> (total - 1 - v) & 1);
    }
    outcome
}

/// Entries of the best-agreement coupling of two binary variables with
/// `Pr[+1] = p, q`, in `++, +-, -+, --` order.
fn agreement_maximizer(p: f64, q: f64) -> [f64; 4] {
    let both_plus = p.min(q);
    let both_minus = (1.0 - p).min(1.0 - q);
    [both_plus, p - both_plus, q - both_plus, both_minus]
}

/// Checks that `atoms` reproduces every observed bunch, optionally pins each
/// connection's joint distribution to `targets` (or to the best-agreement
/// couplings when `maximal` is set), and recomputes connection mismatch.
pub fn verify_coupling(
    system: &System,
    atoms: &[f64],
    targets: Option<&[PairDistribution]>,
    maximal: bool,
) -> Result<CouplingCheck, OracleError> {
    let layout = layout(system);
    if layout.variables > 24 {
        return Err(OracleError::TooLarge(layout.variables));
    }
    let expected = 1usize << layout.variables;
    if atoms.len() != expected {
        return Err(OracleError::DimensionMismatch {
            expected,
            got: atoms.len(),
        });
    }
    let total = layout.variables;
    let mut worst: f64 = 0.0;
    let mut mass = 0.0;
    for &p in atoms {
        worst = worst.max(-p);
        mass += p;
    }
    worst = worst.max((mass - 1.0).abs());

    for (vars, pmf) in &layout.bunches {
        let mut got = vec![0.0; pmf.len()];
        for (atom, &p) in atoms.iter().enumerate() {
            got[project(atom, vars, total)] += p;
        }
        for (g, want) in got.iter().zip(pmf) {
            worst = worst.max((g - want).abs());
        }
    }

    let mut mismatch = Vec::with_capacity(layout.connections.len());
    for (c, &(x, y)) in layout.connections.iter().enumerate() {
        let mut joint = [0.0; 4];
        for (atom, &p) in atoms.iter().enumerate() {
            joint[project(atom, &[x, y], total)] += p;
        }
        mismatch.push(joint[1] + joint[2]);
        let pinned = match targets {
            Some(t) => t.get(c).map(|d| [d.pp, d.pm, d.mp, d.mm]),
            None if maximal => {
                let (p, q) = layout.connection_plus[c];
                Some(agreement_maximizer(p, q))
            }
            None => None,
        };
        if let Some(want) = pinned {
            for (g, w) in joint.iter().zip(want) {
                worst = worst.max((g - w).abs());
            }
        }
    }
    if let Some(t) = targets {
        if t.len() != layout.connections.len() {
            worst = f64::INFINITY;
        }
    }

    let total_mismatch = mismatch.iter().sum();
    let subject = match system {
        System::Cyclic(c) => format!("coupling of rank-{} cyclic system", c.n()),
        System::Generic(g) => format!("coupling of {}-bunch system", g.bunches().len()),
    };
    let verdict = OracleVerdict {
        subject,
        claim: Claim::Flag(true),
        independent: Claim::Flag(worst <= COUPLING_TOLERANCE),
        tolerance: COUPLING_TOLERANCE,
        agreement: worst <= COUPLING_TOLERANCE,
        discrepancy: worst,
    };
    Ok(CouplingCheck {
        verdict,
        mismatch,
        total_mismatch,
    })
}

/// Checks a Farkas ray for the program "couple the bunches with every
/// connection pinned to `targets`": rows are rebuilt here in the order bunch
/// outcomes, connection outcomes, normalization. The ray must satisfy
/// `yᵀA ≤ tol` on every atom and `yᵀb > tol`.
pub fn verify_ray(
    system: &System,
    ray: &[f64],
    targets: &[PairDistribution],
) -> Result<OracleVerdict, OracleError> {
    let layout = layout(system);
    if layout.variables > 24 {
        return Err(OracleError::TooLarge(layout.variables));
    }
    let rows: usize =
        layout.bunches.iter().map(|(_, p)| p.len()).sum::<usize>() + 4 * targets.len() + 1;
    if ray.len() != rows {
        return Err(OracleError::DimensionMismatch {
            expected: rows,
            got: ray.len(),
        });
    }
    let mut offsets = Vec::new();
    let mut rhs_value = 0.0;
    let mut offset = 0;
    for (_, pmf) in &layout.bunches {
        offsets.push(offset);
        for (k, p) in pmf.iter().enumerate() {
            rhs_value += ray[offset + k] * p;
        }
        offset += pmf.len();
    }
    let connection_offset = offset;
    for (c, t) in targets.iter().enumerate() {
        for (k, p) in [t.pp, t.pm, t.mp, t.mm].iter().enumerate() {
            rhs_value += ray[connection_offset + 4 * c + k] * p;
        }
    }
    let normalization = ray[rows - 1];
    rhs_value += normalization;

    let total = layout.variables;
    let mut worst_column = f64::NEG_INFINITY;
    for atom in 0..1usize << total {
        let mut value = normalization;
        for ((vars, _), &start) in layout.bunches.iter().zip(&offsets) {
            value += ray[start + project(atom, vars, total)];
        }
        for (c, &(x, y)) in layout.connections.iter().enumerate().take(targets.len()) {
            value += ray[connection_offset + 4 * c + project(atom, &[x, y], total)];
        }
        worst_column = worst_column.max(value);
    }
    let valid = worst_column <= 1e-10 && rhs_value > COUPLING_TOLERANCE;
    Ok(OracleVerdict {
        subject: "Farkas ray".into(),
        claim: Claim::Flag(true),
        independent: Claim::Flag(valid),
        tolerance: 0.0,
        agreement: valid,
        discrepancy: if valid {
            0.0
        } else {
            worst_column.max(0.0) + (-rhs_value).max(0.0)
        },
    })
}

/// Raw expectations `(v, w, vw)` recomputed from the pair pmfs.
fn raw_expectations(sys: &CyclicSystem) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = sys.n();
    let pairs = sys.pairs();
    let first = |p: &PairDistribution| (p.pp + p.pm) - (p.mp + p.mm);
    let second = |p: &PairDistribution| (p.pp + p.mp) - (p.pm + p.mm);
    let product = |p: &PairDistribution| (p.pp + p.mm) - (p.pm + p.mp);
    let v = pairs.iter().map(first).collect();
    let w = (0..n).map(|i| second(&pairs[(i + n - 1) % n])).collect();
    let vw = pairs.iter().map(product).collect();
    (v, w, vw)
}

fn enumerate(values: &[f64], parity: Parity) -> Option<f64> {
    (values.len() <= MAX_ENUMERATION).then(|| {
        s_parity_exhaustive(values, parity).expect("nonempty and within enumeration limit")
    })
}

/// Analyzes the system with the LP enabled and cross-checks the report.
pub fn cross_validate(sys: &CyclicSystem) -> Result<Vec<OracleVerdict>, OracleError> {
    let report = analyze(sys, AnalysisOptions::default())?;
    cross_validate_report(sys, &report)
}

/// Cross-checks every redundant quantity in `report` against values
/// recomputed here from the raw system.
pub fn cross_validate_report(
    sys: &CyclicSystem,
    report: &AnalysisReport,
) -> Result<Vec<OracleVerdict>, OracleError> {
    let n = sys.n();
    let nf = n as f64;
    let threshold = report.threshold;
    let (v, w, vw) = raw_expectations(sys);
    let gaps: Vec<f64> = v.iter().zip(&w).map(|(a, b)| (a - b).abs()).collect();
    let gap_sum: f64 = gaps.iter().sum();
    let mut out = Vec::new();

    let s_odd_vw = enumerate(&vw, Parity::Odd).ok_or(OracleError::TooLarge(n))?;
    let s_even_vw = enumerate(&vw, Parity::Even).ok_or(OracleError::TooLarge(n))?;
    let independent_delta0 = gap_sum / 2.0;
    let independent_delta_min = 0.5 * gap_sum.max(s_odd_vw - nf + 2.0);
    let independent_cntx = independent_delta_min - independent_delta0;
    let independent_noncontextual = s_odd_vw <= nf - 2.0 + gap_sum + 2.0 * threshold;

    out.push(OracleVerdict::values(
        "delta0",
        report.delta0,
        independent_delta0,
        1e-12,
    ));
    out.push(OracleVerdict::values(
        "delta_min closed form vs enumeration",
        report.delta_min_closed,
        independent_delta_min,
        1e-12,
    ));
    out.push(OracleVerdict::values(
        "cntx",
        report.cntx,
        independent_cntx.max(0.0),
        1e-12,
    ));
    out.push(OracleVerdict::flags(
        "contextual flag",
        report.contextual,
        independent_cntx > threshold,
    ));
    out.push(OracleVerdict::flags(
        "closed criterion",
        report.criteria.closed.noncontextual,
        independent_noncontextual,
    ));
    out.push(OracleVerdict::flags(
        "closed vs master criterion",
        report.criteria.closed.noncontextual,
        report.criteria.master.noncontextual,
    ));

    // Connection products of maximal couplings are 1 - |<V_i> - <W_i>|.
    let master: Vec<f64> = vw
        .iter()
        .copied()
        .chain(gaps.iter().map(|g| 1.0 - g))
        .collect();
    let master_sum = enumerate(&master, Parity::Odd);
    if let Some(s) = master_sum {
        out.push(OracleVerdict::values(
            "compatibility s_odd vs enumeration",
            report.criteria.compatibility.s_odd,
            s,
            SIGNED_SUM_TOLERANCE * (1.0 + s.abs()),
        ));
        out.push(OracleVerdict::flags(
            "master criterion vs enumeration",
            report.criteria.master.noncontextual,
            s <= 2.0 * nf - 2.0 + 2.0 * threshold,
        ));
    }
    let split = report.criteria.compatibility.split;
    if let (Some(so), Some(se)) = (
        enumerate(&master[n..], Parity::Odd),
        enumerate(&master[n..], Parity::Even),
    ) {
        out.push(OracleVerdict::values(
            "compatibility split form",
            split[0].max(split[1]),
            (s_odd_vw + se).max(s_even_vw + so),
            SIGNED_SUM_TOLERANCE * (1.0 + nf),
        ));
    }

    if let Some(lp_value) = report.delta_min_lp {
        out.push(OracleVerdict::values(
            "delta_min closed form vs LP",
            report.delta_min_closed,
            lp_value,
            DELTA_TOLERANCE,
        ));
    }
    // LP feasibility has no threshold; compare it with the inequalities at
    // the default one, whatever the report used.
    if let Some(lp) = report.criteria.lp {
        out.push(OracleVerdict::flags(
            "LP criterion vs closed inequality",
            lp.noncontextual,
            s_odd_vw <= nf - 2.0 + gap_sum + 2.0 * VERDICT_THRESHOLD,
        ));
        if let Some(s) = master_sum {
            out.push(OracleVerdict::flags(
                "LP criterion vs compatibility at maximal connections",
                lp.noncontextual,
                s <= 2.0 * nf - 2.0 + 2.0 * VERDICT_THRESHOLD,
            ));
        }
    }

    let system = System::Cyclic(sys.clone());
    if let Some(cert) = &report.certificates.delta_min {
        if cert.status == LpStatus::Optimal {
            let check = verify_coupling(&system, &cert.atoms(), None, false)?;
            out.push(OracleVerdict {
                subject: "delta_min coupling reproduces bunches".into(),
                ..check.verdict
            });
            out.push(OracleVerdict::values(
                "delta_min LP objective vs recomputed mismatch",
                cert.objective,
                check.total_mismatch,
                COUPLING_TOLERANCE,
            ));
        } else {
            out.push(OracleVerdict::flags(
                "delta_min program feasible",
                false,
                true,
            ));
        }
    }
    if let Some(cert) = &report.certificates.maximal_coupling {
        match (&cert.status, &cert.ray) {
            (LpStatus::Optimal, _) => {
                let check = verify_coupling(&system, &cert.atoms(), None, true)?;
                out.push(OracleVerdict {
                    subject: "maximally connected coupling".into(),
                    ..check.verdict
                });
            }
            (LpStatus::Infeasible, Some(ray)) => {
                let targets: Vec<PairDistribution> = v
                    .iter()
                    .zip(&w)
                    .map(|(a, b)| {
                        let [pp, pm, mp, mm] =
                            agreement_maximizer((1.0 + a) / 2.0, (1.0 + b) / 2.0);
                        PairDistribution { pp, pm, mp, mm }
                    })
                    .collect();
                out.push(verify_ray(&system, ray, &targets)?);
            }
            (LpStatus::Infeasible, None) => {
                out.push(OracleVerdict::flags(
                    "infeasibility certificate present",
                    false,
                    true,
                ));
            }
        }
    }

    special_case_verdicts(report, &v, &vw, threshold, &mut out);
    Ok(out)
}

fn special_case_verdicts(
    report: &AnalysisReport,
    v: &[f64],
    vw: &[f64],
    threshold: f64,
    out: &mut Vec<OracleVerdict>,
) {
    let general = report.criteria.closed.noncontextual;
    let sc = &report.special_cases;
    if let Diagnostic::Applicable(_) = sc.kcbs {
        let sum: f64 = v.iter().map(|x| (1.0 + x) / 2.0).sum();
        out.push(OracleVerdict::flags(
            "KCBS inequality vs closed criterion",
            general,
            sum <= 2.0 + threshold,
        ));
    }
    if let Diagnostic::Applicable(_) = sc.chsh {
        let mut worst: f64 = 0.0;
        for minus in 0..4 {
            let combo: f64 = vw
                .iter()
                .enumerate()
                .map(|(i, x)| if i == minus { -x } else { *x })
                .sum();
            worst = worst.max(combo.abs());
        }
        out.push(OracleVerdict::flags(
            "CHSH inequalities vs closed criterion",
            general,
            worst <= 2.0 + 2.0 * threshold,
        ));
    }
    if let Diagnostic::Applicable(_) = sc.suppes_zanotti {
        let sum: f64 = vw.iter().sum();
        let lowest = vw.iter().copied().fold(f64::INFINITY, f64::min);
        let slack = 2.0 * threshold;
        out.push(OracleVerdict::flags(
            "Suppes-Zanotti bound vs closed criterion",
            general,
            sum >= -1.0 - slack && sum <= 1.0 + 2.0 * lowest + slack,
        ));
    }
}

/// The verdicts that disagree.
pub fn disagreements(verdicts: &[OracleVerdict]) -> Vec<&OracleVerdict> {
    verdicts.iter().filter(|v| !v.agreement).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclic::delta_min_lp;
    use crate::system::{from_expectations, Bunch, MarginalSummary};

    fn cc(vw: &[f64]) -> CyclicSystem {
        let zeros = vec![0.0; vw.len()];
        from_expectations(&MarginalSummary {
            v: zeros.clone(),
            w: zeros,
            vw: vw.to_vec(),
        })
        .unwrap()
    }

    #[test]
    fn pr_box_coupling_reproduces_bunches() {
        let pr = cc(&[1.0, 1.0, 1.0, -1.0]);
        let (_, solution) = delta_min_lp(&pr).unwrap();
        let check = verify_coupling(&System::Cyclic(pr), &solution.atoms, None, false).unwrap();
        assert!(check.verdict.agreement);
        assert!((check.total_mismatch - 1.0).abs() < 1e-8);
    }

    #[test]
    fn uniform_atoms_fail_on_kcbs() {
        let p = 1.0 / 5f64.sqrt();
        let v = 2.0 * p - 1.0;
        let kcbs = from_expectations(&MarginalSummary {
            v: vec![v; 5],
            w: vec![v; 5],
            vw: vec![1.0 - 4.0 * p; 5],
        })
        .unwrap();
        let atoms = vec![1.0 / 1024.0; 1024];
        let check = verify_coupling(&System::Cyclic(kcbs), &atoms, None, false).unwrap();
        assert!(!check.verdict.agreement);
    }

    #[test]
    fn deterministic_atom_for_all_correlated() {
        let sys = from_expectations(&MarginalSummary {
            v: vec![1.0; 4],
            w: vec![1.0; 4],
            vw: vec![1.0; 4],
        })
        .unwrap();
        let mut atoms = vec![0.0; 256];
        atoms[0] = 1.0;
        let check = verify_coupling(&System::Cyclic(sys), &atoms, None, true).unwrap();
        assert!(check.verdict.agreement);
        assert_eq!(check.verdict.discrepancy, 0.0);
        assert_eq!(check.total_mismatch, 0.0);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let sys = cc(&[0.0; 3]);
        assert_eq!(
            verify_coupling(&System::Cyclic(sys), &[1.0], None, false).unwrap_err(),
            OracleError::DimensionMismatch {
                expected: 64,
                got: 1
            }
        );
    }

    #[test]
    fn generic_single_bunch() {
        let sys = GenericSystem::new(
            vec![Bunch {
                vars: vec!["x".into(), "y".into()],
                pmf: vec![0.1, 0.2, 0.3, 0.4],
            }],
            vec![],
        )
        .unwrap();
        let check =
            verify_coupling(&System::Generic(sys), &[0.1, 0.2, 0.3, 0.4], None, false).unwrap();
        assert!(check.verdict.agreement);
    }

    #[test]
    fn tsirelson_cross_validates() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let verdicts = cross_validate(&cc(&[h, h, h, -h])).unwrap();
        assert!(verdicts.len() >= 10);
        assert!(
            disagreements(&verdicts).is_empty(),
            "{:#?}",
            disagreements(&verdicts)
        );
    }

    #[test]
    fn corrupted_report_is_flagged() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let sys = cc(&[h, h, h, -h]);
        let mut report = analyze(&sys, AnalysisOptions::default()).unwrap();
        report.delta_min_closed += 0.01;
        let verdicts = cross_validate_report(&sys, &report).unwrap();
        let bad = disagreements(&verdicts);
        assert!(bad
            .iter()
            .any(|v| v.subject == "delta_min closed form vs LP"));
    }

    #[test]
    fn tampered_ray_is_rejected() {
        let pr = cc(&[1.0, 1.0, 1.0, -1.0]);
        let mut report = analyze(&pr, AnalysisOptions::default()).unwrap();
        assert!(disagreements(&cross_validate_report(&pr, &report).unwrap()).is_empty());
        let cert = report.certificates.maximal_coupling.as_mut().unwrap();
        for y in cert.ray.as_mut().unwrap() {
            *y = -*y;
        }
        let verdicts = cross_validate_report(&pr, &report).unwrap();
        assert!(disagreements(&verdicts)
            .iter()
            .any(|v| v.subject == "Farkas ray"));
    }
}
