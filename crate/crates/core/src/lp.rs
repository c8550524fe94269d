//! Dense two-phase tableau simplex for standard-form programs
//! `min cᵀx  s.t.  Ax = b, x ≥ 0`.
//!
//! Pricing is Dantzig (most negative reduced cost) until `5·(m+N)` pivots
//! have been made, then Bland's rule takes over so the method terminates on
//! degenerate problems. Every result carries a certificate that
//! [`verify_certificate`] rechecks from the original data: a primal point for
//! `Optimal`, a Farkas ray `y` with `yᵀA ≤ 0`, `yᵀb > 0` for `Infeasible`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Max-norm bound on `Ax - b` for an accepted primal point.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-8;
/// Smallest tableau entry accepted as a pivot.
pub const PIVOT_TOLERANCE: f64 = 1e-10;
/// Atoms may dip this far below zero.
pub const ATOM_TOLERANCE: f64 = 1e-10;
/// Slack allowed on `yᵀA_j ≤ 0` for a Farkas ray.
pub const RAY_TOLERANCE: f64 = 1e-10;
/// Right-hand-side shift used when retrying after a breakdown.
pub const RHS_PERTURBATION: f64 = 1e-12;
/// Largest dense tableau (entries) the solver will allocate.
pub const MAX_TABLEAU_ENTRIES: usize = 1 << 25;

const OPTIMALITY_TOLERANCE: f64 = 1e-11;
const REDUNDANT_ROW_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("tableau of {entries} entries exceeds the dense budget of {MAX_TABLEAU_ENTRIES}")]
    TooLarge { entries: usize },
    #[error("objective is unbounded below")]
    Unbounded,
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

/// `m × N` equality-constrained program over nonnegative variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    rows: usize,
    cols: usize,
    /// Row-major coefficient matrix.
    matrix: Vec<f64>,
    rhs: Vec<f64>,
    objective: Vec<f64>,
}

impl LpProblem {
    pub fn new(
        rows: usize,
        cols: usize,
        matrix: Vec<f64>,
        rhs: Vec<f64>,
        objective: Vec<f64>,
    ) -> Result<Self, LpError> {
        if matrix.len() != rows * cols {
            return Err(LpError::Dimension(format!(
                "matrix has {} entries, expected {rows}x{cols}",
                matrix.len()
            )));
        }
        if rhs.len() != rows {
            return Err(LpError::Dimension(format!(
                "rhs has {} entries for {rows} rows",
                rhs.len()
            )));
        }
        if objective.len() != cols {
            return Err(LpError::Dimension(format!(
                "objective has {} entries for {cols} columns",
                objective.len()
            )));
        }
        if cols > 1 << 24 {
            return Err(LpError::Dimension(format!("{cols} columns exceed 2^24")));
        }
        if !matrix.iter().all(|x| x.is_finite()) {
            return Err(LpError::NonFinite("matrix"));
        }
        if !rhs.iter().all(|x| x.is_finite()) {
            return Err(LpError::NonFinite("rhs"));
        }
        if !objective.iter().all(|x| x.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        Ok(Self {
            rows,
            cols,
            matrix,
            rhs,
            objective,
        })
    }

    /// Convenience constructor from row vectors.
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        rhs: Vec<f64>,
        objective: Vec<f64>,
    ) -> Result<Self, LpError> {
        let m = rows.len();
        let n = objective.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(LpError::Dimension(format!(
                "row of length {} for {n} columns",
                bad.len()
            )));
        }
        Self::new(m, n, rows.concat(), rhs, objective)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    /// Same problem with the constraint rows reordered; `order[k]` is the
    /// source row of new row `k`.
    pub fn permute_rows(&self, order: &[usize]) -> Self {
        let matrix = order
            .iter()
            .flat_map(|&i| self.row(i).iter().copied())
            .collect();
        let rhs = order.iter().map(|&i| self.rhs[i]).collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            matrix,
            rhs,
            objective: self.objective.clone(),
        }
    }

    fn with_rhs(&self, rhs: Vec<f64>) -> Self {
        Self {
            rhs,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

/// Solver outcome. For `Infeasible`, `objective` is the phase-I minimum of the
/// total artificial mass and `ray` holds the Farkas certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub atoms: Vec<f64>,
    pub ray: Option<Vec<f64>>,
    pub pivots: usize,
    /// Set when the right-hand side had to be perturbed by
    /// [`RHS_PERTURBATION`] after a breakdown.
    pub perturbed: bool,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

struct Tableau {
    width: usize,
    /// Constraint rows followed by the reduced-cost row.
    cells: Vec<f64>,
    basis: Vec<usize>,
    /// Original problem row behind each tableau row.
    origin: Vec<usize>,
    structural: usize,
    pivots: usize,
    bland_after: usize,
    pivot_cap: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.basis.len()
    }

    fn rhs_col(&self) -> usize {
        self.width - 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.cells[r * self.width + c]
    }

    fn objective_row(&self) -> usize {
        self.rows()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let inv = 1.0 / self.cells[r * w + c];
        for x in &mut self.cells[r * w..(r + 1) * w] {
            *x *= inv;
        }
        self.cells[r * w + c] = 1.0;
        let pivot_row: Vec<f64> = self.cells[r * w..(r + 1) * w].to_vec();
        let support: Vec<usize> = (0..w).filter(|&k| pivot_row[k] != 0.0).collect();
        for k in 0..=self.rows() {
            if k == r {
                continue;
            }
            let factor = self.cells[k * w + c];
            if factor == 0.0 {
                continue;
            }
            let row = &mut self.cells[k * w..(k + 1) * w];
            for &j in &support {
                row[j] -= factor * pivot_row[j];
            }
            row[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    fn entering(&self, allowed: usize) -> Option<usize> {
        let obj = &self.cells[self.objective_row() * self.width..][..allowed];
        if self.pivots >= self.bland_after {
            obj.iter().position(|&d| d < -OPTIMALITY_TOLERANCE)
        } else {
            let (best, value) =
                obj.iter()
                    .enumerate()
                    .fold((usize::MAX, -OPTIMALITY_TOLERANCE), |acc, (j, &d)| {
                        if d < acc.1 {
                            (j, d)
                        } else {
                            acc
                        }
                    });
            (value < -OPTIMALITY_TOLERANCE && best != usize::MAX).then_some(best)
        }
    }

    fn leaving(&self, c: usize) -> Option<usize> {
        let bland = self.pivots >= self.bland_after;
        let rhs = self.rhs_col();
        let mut best: Option<(usize, f64, f64)> = None;
        for r in 0..self.rows() {
            let a = self.at(r, c);
            if a <= PIVOT_TOLERANCE {
                continue;
            }
            let ratio = self.at(r, rhs).max(0.0) / a;
            best = match best {
                None => Some((r, ratio, a)),
                Some((br, bratio, ba)) => {
                    let tie = (ratio - bratio).abs() <= 1e-12 * (1.0 + bratio.abs());
                    let better = if tie {
                        if bland {
                            self.basis[r] < self.basis[br]
                        } else {
                            a > ba
                        }
                    } else {
                        ratio < bratio
                    };
                    if better {
                        Some((r, ratio, a))
                    } else {
                        Some((br, bratio, ba))
                    }
                }
            };
        }
        best.map(|(r, _, _)| r)
    }

    fn iterate(&mut self, allowed: usize) -> Result<Outcome, LpError> {
        loop {
            let Some(c) = self.entering(allowed) else {
                return Ok(Outcome::Optimal);
            };
            let Some(r) = self.leaving(c) else {
                return Ok(Outcome::Unbounded);
            };
            self.pivot(r, c);
            if self.pivots > self.pivot_cap {
                return Err(LpError::NumericalBreakdown(format!(
                    "no convergence after {} pivots",
                    self.pivots
                )));
            }
        }
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width;
        self.cells.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.origin.remove(r);
    }

    fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.structural];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.structural {
                x[b] = self.at(r, self.rhs_col());
            }
        }
        x
    }
}

/// Solves `B z = rhs` by Gaussian elimination with partial pivoting, where
/// `B` is dense row-major `k × k`.
fn dense_solve(mut b: Vec<f64>, mut rhs: Vec<f64>, k: usize) -> Option<Vec<f64>> {
    for col in 0..k {
        let piv =
            (col..k).max_by(|&x, &y| b[x * k + col].abs().total_cmp(&b[y * k + col].abs()))?;
        if b[piv * k + col].abs() < 1e-12 {
            return None;
        }
        if piv != col {
            for j in 0..k {
                b.swap(piv * k + j, col * k + j);
            }
            rhs.swap(piv, col);
        }
        for r in col + 1..k {
            let f = b[r * k + col] / b[col * k + col];
            if f == 0.0 {
                continue;
            }
            for j in col..k {
                b[r * k + j] -= f * b[col * k + j];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut z = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|j| b[r * k + j] * z[j]).sum();
        z[r] = (rhs[r] - s) / b[r * k + r];
    }
    Some(z)
}

fn max_residual(problem: &LpProblem, x: &[f64]) -> f64 {
    (0..problem.rows)
        .map(|i| {
            let ax: f64 = problem.row(i).iter().zip(x).map(|(a, v)| a * v).sum();
            (ax - problem.rhs[i]).abs()
        })
        .fold(0.0, f64::max)
}

/// Dense tableau size for an `m × n` program: constraint rows plus the cost
/// row, structural plus artificial columns plus the right-hand side.
pub fn tableau_entries(m: usize, n: usize) -> usize {
    (m + 1).saturating_mul(n + m + 1)
}

/// Two-phase simplex. Returns `NumericalBreakdown` when the final point fails
/// the residual check; callers may retry through [`solve_with_retry`].
pub fn solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    let m = problem.rows;
    let n = problem.cols;
    let width = n + m + 1;
    let entries = tableau_entries(m, n);
    if entries > MAX_TABLEAU_ENTRIES {
        return Err(LpError::TooLarge { entries });
    }

    // Phase I: rows flipped so that b ≥ 0, one artificial per row.
    let signs: Vec<f64> = problem
        .rhs
        .iter()
        .map(|&b| if b < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let mut cells = vec![0.0; entries];
    for i in 0..m {
        let row = &mut cells[i * width..(i + 1) * width];
        for (dst, &a) in row[..n].iter_mut().zip(problem.row(i)) {
            *dst = signs[i] * a;
        }
        row[n + i] = 1.0;
        row[width - 1] = signs[i] * problem.rhs[i];
    }
    for j in (0..n).chain(std::iter::once(width - 1)) {
        let total: f64 = (0..m).map(|i| cells[i * width + j]).sum();
        cells[m * width + j] = -total;
    }
    let bland_after = 5 * (m + n);
    let mut t = Tableau {
        width,
        cells,
        basis: (n..n + m).collect(),
        origin: (0..m).collect(),
        structural: n,
        pivots: 0,
        bland_after,
        pivot_cap: bland_after + 50 * (m + n) + 10_000,
    };
    t.iterate(n)?;

    let infeasibility = -t.at(t.objective_row(), t.rhs_col());
    if infeasibility > FEASIBILITY_TOLERANCE {
        // Reduced cost of artificial i is 1 - y_i.
        let obj = t.objective_row();
        let ray = (0..m)
            .map(|i| signs[i] * (1.0 - t.at(obj, n + i)))
            .collect();
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            objective: infeasibility,
            atoms: t.primal(),
            ray: Some(ray),
            pivots: t.pivots,
            perturbed: false,
        });
    }

    // Drive remaining artificials out of the basis; rows where that is
    // impossible are linear combinations of the others.
    let mut r = 0;
    while r < t.rows() {
        if t.basis[r] < n {
            r += 1;
            continue;
        }
        let row = &t.cells[r * width..r * width + n];
        let (best, mag) =
            row.iter().enumerate().fold(
                (0, 0.0),
                |acc, (j, &a)| if a.abs() > acc.1 { (j, a.abs()) } else { acc },
            );
        if mag > REDUNDANT_ROW_TOLERANCE {
            t.pivot(r, best);
            r += 1;
        } else {
            t.remove_row(r);
        }
    }

    // Phase II reduced costs.
    let obj = t.objective_row();
    for j in 0..width {
        let mut d = if j < n { problem.objective[j] } else { 0.0 };
        for (r, &b) in t.basis.iter().enumerate() {
            let cb = problem.objective[b];
            if cb != 0.0 {
                d -= cb * t.at(r, j);
            }
        }
        t.cells[obj * width + j] = d;
    }
    if let Outcome::Unbounded = t.iterate(n)? {
        return Err(LpError::Unbounded);
    }

    let mut x = t.primal();
    // Recompute the basic values from the original data.
    let k = t.rows();
    let mut basis_matrix = vec![0.0; k * k];
    for (row_idx, &orig) in t.origin.iter().enumerate() {
        let source = problem.row(orig);
        for (col_idx, &b) in t.basis.iter().enumerate() {
            basis_matrix[row_idx * k + col_idx] = source[b];
        }
    }
    let basis_rhs = t.origin.iter().map(|&i| problem.rhs[i]).collect();
    if let Some(z) = dense_solve(basis_matrix, basis_rhs, k) {
        let mut refined = vec![0.0; n];
        for (&b, v) in t.basis.iter().zip(z) {
            refined[b] = v;
        }
        if max_residual(problem, &refined) <= max_residual(problem, &x)
            && refined.iter().all(|&v| v >= -FEASIBILITY_TOLERANCE)
        {
            x = refined;
        }
    }
    if let Some(&worst) = x.iter().find(|&&v| v < -FEASIBILITY_TOLERANCE) {
        return Err(LpError::NumericalBreakdown(format!(
            "negative atom {worst:.3e}"
        )));
    }
    for v in &mut x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let residual = max_residual(problem, &x);
    if residual > FEASIBILITY_TOLERANCE {
        return Err(LpError::NumericalBreakdown(format!(
            "residual {residual:.3e}"
        )));
    }
    let objective = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective,
        atoms: x,
        ray: None,
        pivots: t.pivots,
        perturbed: false,
    })
}

/// [`solve`], retrying once with the right-hand side shifted by
/// [`RHS_PERTURBATION`] if the first attempt breaks down.
pub fn solve_with_retry(problem: &LpProblem) -> Result<LpSolution, LpError> {
    match solve(problem) {
        Err(LpError::NumericalBreakdown(_)) => {
            let m = problem.rows as f64;
            let rhs = problem
                .rhs
                .iter()
                .enumerate()
                .map(|(i, &b)| b + RHS_PERTURBATION * (i as f64 + 1.0) / m)
                .collect();
            let mut solution = solve(&problem.with_rhs(rhs))?;
            solution.perturbed = true;
            Ok(solution)
        }
        other => other,
    }
}

/// Rechecks a solution against the original data without touching solver
/// state: residuals, nonnegativity and objective for `Optimal`; the Farkas
/// inequalities for `Infeasible`.
pub fn verify_certificate(problem: &LpProblem, solution: &LpSolution) -> bool {
    let m = problem.rows();
    let n = problem.cols();
    match solution.status {
        LpStatus::Optimal => {
            let x = &solution.atoms;
            if x.len() != n || x.iter().any(|&v| !(v >= -ATOM_TOLERANCE)) {
                return false;
            }
            // Perturbed solves answer a shifted problem; allow the shift.
            let tolerance = if solution.perturbed {
                FEASIBILITY_TOLERANCE + 2.0 * RHS_PERTURBATION
            } else {
                FEASIBILITY_TOLERANCE
            };
            for i in 0..m {
                let mut ax = 0.0;
                for (a, v) in problem.row(i).iter().zip(x) {
                    ax += a * v;
                }
                if !((ax - problem.rhs()[i]).abs() <= tolerance) {
                    return false;
                }
            }
            let mut value = 0.0;
            for (c, v) in problem.objective().iter().zip(x) {
                value += c * v;
            }
            (value - solution.objective).abs() <= FEASIBILITY_TOLERANCE * (1.0 + value.abs())
        }
        LpStatus::Infeasible => {
            let Some(y) = &solution.ray else {
                return false;
            };
            if y.len() != m {
                return false;
            }
            for j in 0..n {
                let mut ya = 0.0;
                for (i, yi) in y.iter().enumerate() {
                    ya += yi * problem.row(i)[j];
                }
                if !(ya <= RAY_TOLERANCE) {
                    return false;
                }
            }
            let mut yb = 0.0;
            for (yi, b) in y.iter().zip(problem.rhs()) {
                yb += yi * b;
            }
            yb > FEASIBILITY_TOLERANCE
        }
    }
}
