//! Maximal couplings of binary pairs and the linear programs whose variables
//! are the probabilities of joint outcomes ("atoms") of every variable in a
//! system.
//!
//! Atoms are ordered lexicographically over the system's variable list with
//! `+1` before `-1`; the first variable is the most significant bit and a set
//! bit means `-1`. For cyclic systems the variable list is
//! `V_1..V_n, W_1..W_n`.

use thiserror::Error;

use crate::lp::{self, LpError, LpProblem, LpSolution};
use crate::system::{CyclicSystem, GenericSystem, PairDistribution};

/// Largest number of binary variables a program may couple.
pub const MAX_VARIABLES: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("probabilities must lie in [0, 1] (p={p}, q={q})")]
    OutOfRange { p: f64, q: f64 },
    #[error("{count} variables exceed the coupling limit of {MAX_VARIABLES}")]
    TooManyVariables { count: usize },
    #[error("expected {expected} connection couplings, got {got}")]
    ConnectionCount { expected: usize, got: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Maximal coupling of binary `A`, `B` with `p = Pr[A=+1]`, `q = Pr[B=+1]`:
/// `(q, p-q, 0, 1-p)` when `p ≥ q`, mirrored when `p < q`. Its agreement
/// `Pr[A=B]` is `1 - |p-q|`.
pub fn maximal_coupling(p: f64, q: f64) -> Result<PairDistribution, CouplingError> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(CouplingError::OutOfRange { p, q });
    }
    Ok(if p >= q {
        PairDistribution {
            pp: q,
            pm: p - q,
            mp: 0.0,
            mm: 1.0 - p,
        }
    } else {
        PairDistribution {
            pp: p,
            pm: 0.0,
            mp: q - p,
            mm: 1.0 - q,
        }
    })
}

/// What the program asks of the connections.
#[derive(Debug, Clone, PartialEq)]
pub enum ProgramMode {
    /// Bunch marginals only.
    Feasibility,
    /// Bunch marginals, objective `Σ Pr[A ≠ B]` over connections.
    MinimizeMismatch,
    /// Every connection's 2-marginal pinned to the maximal coupling of its
    /// members' observed marginals.
    MaximalConnections,
    /// Connection 2-marginals pinned to the given pmfs, in connection order.
    FixConnections(Vec<PairDistribution>),
}

/// Linear program over the atoms of a system coupling. Constraint rows are
/// laid out as bunch rows, then connection rows, then one normalization row.
#[derive(Debug, Clone)]
pub struct CouplingProgram {
    variables: Vec<String>,
    connections: Vec<(usize, usize)>,
    mode: ProgramMode,
    bunch_rows: usize,
    connection_rows: usize,
    problem: LpProblem,
}

impl CouplingProgram {
    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    /// Connections as indices into [`Self::variables`].
    pub fn connections(&self) -> &[(usize, usize)] {
        &self.connections
    }

    pub fn mode(&self) -> &ProgramMode {
        &self.mode
    }

    pub fn atom_count(&self) -> usize {
        1 << self.variables.len()
    }

    pub fn bunch_rows(&self) -> usize {
        self.bunch_rows
    }

    pub fn connection_rows(&self) -> usize {
        self.connection_rows
    }

    pub fn problem(&self) -> &LpProblem {
        &self.problem
    }

    /// Value (`+1`/`-1`) of variable `var` in atom `atom`.
    pub fn value(&self, atom: usize, var: usize) -> i8 {
        let bit = self.variables.len() - 1 - var;
        if atom >> bit & 1 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        lp::solve_with_retry(&self.problem)
    }
}

struct Builder {
    total: usize,
    atoms: usize,
    matrix: Vec<f64>,
    rhs: Vec<f64>,
}

impl Builder {
    fn new(total: usize) -> Result<Self, CouplingError> {
        if total > MAX_VARIABLES {
            return Err(CouplingError::TooManyVariables { count: total });
        }
        Ok(Self {
            total,
            atoms: 1 << total,
            matrix: Vec::new(),
            rhs: Vec::new(),
        })
    }

    /// Adds one row per joint outcome of `vars`, requiring the atoms that
    /// project onto that outcome to sum to `pmf[outcome]`.
    fn marginal_rows(&mut self, vars: &[usize], pmf: &[f64]) -> Result<(), CouplingError> {
        let k = vars.len();
        let base = self.rhs.len();
        // Refuse before allocating; the extra row is the normalization.
        let entries = lp::tableau_entries(base + (1 << k) + 1, self.atoms);
        if entries > lp::MAX_TABLEAU_ENTRIES {
            return Err(LpError::TooLarge { entries }.into());
        }
        self.matrix.resize((base + (1 << k)) * self.atoms, 0.0);
        for atom in 0..self.atoms {
            let outcome = vars
                .iter()
                .fold(0, |acc, &v| (acc << 1) | (atom >> (self.total - 1 - v) & 1));
            self.matrix[(base + outcome) * self.atoms + atom] = 1.0;
        }
        self.rhs.extend_from_slice(pmf);
        Ok(())
    }

    fn normalization_row(&mut self) {
        self.matrix.extend(std::iter::repeat_n(1.0, self.atoms));
        self.rhs.push(1.0);
    }

    fn mismatch_objective(&self, connections: &[(usize, usize)]) -> Vec<f64> {
        (0..self.atoms)
            .map(|atom| {
                connections
                    .iter()
                    .filter(|&&(a, b)| {
                        (atom >> (self.total - 1 - a) & 1) != (atom >> (self.total - 1 - b) & 1)
                    })
                    .count() as f64
            })
            .collect()
    }

    fn rows(&self) -> usize {
        self.rhs.len()
    }

    fn finish(self, objective: Vec<f64>) -> Result<LpProblem, CouplingError> {
        let rows = self.rhs.len();
        Ok(LpProblem::new(
            rows,
            self.atoms,
            self.matrix,
            self.rhs,
            objective,
        )?)
    }
}

fn pin_connections(
    builder: &mut Builder,
    connections: &[(usize, usize)],
    targets: &[PairDistribution],
) -> Result<(), CouplingError> {
    if targets.len() != connections.len() {
        return Err(CouplingError::ConnectionCount {
            expected: connections.len(),
            got: targets.len(),
        });
    }
    for (&(a, b), target) in connections.iter().zip(targets) {
        builder.marginal_rows(&[a, b], &target.entries())?;
    }
    Ok(())
}

fn assemble(
    mut builder: Builder,
    variables: Vec<String>,
    connections: Vec<(usize, usize)>,
    mode: ProgramMode,
    maximal_targets: impl FnOnce() -> Result<Vec<PairDistribution>, CouplingError>,
) -> Result<CouplingProgram, CouplingError> {
    let bunch_rows = builder.rows();
    match &mode {
        ProgramMode::MaximalConnections => {
            let targets = maximal_targets()?;
            pin_connections(&mut builder, &connections, &targets)?;
        }
        ProgramMode::FixConnections(targets) => {
            pin_connections(&mut builder, &connections, targets)?;
        }
        ProgramMode::Feasibility | ProgramMode::MinimizeMismatch => {}
    }
    let connection_rows = builder.rows() - bunch_rows;
    builder.normalization_row();
    let objective = match mode {
        ProgramMode::MinimizeMismatch => builder.mismatch_objective(&connections),
        _ => vec![0.0; builder.atoms],
    };
    let problem = builder.finish(objective)?;
    Ok(CouplingProgram {
        variables,
        connections,
        mode,
        bunch_rows,
        connection_rows,
        problem,
    })
}

/// Coupling program of a cyclic system over `V_1..V_n, W_1..W_n`.
pub fn build_cyclic_program(
    sys: &CyclicSystem,
    mode: ProgramMode,
) -> Result<CouplingProgram, CouplingError> {
    let n = sys.n();
    let mut builder = Builder::new(2 * n)?;
    for (i, pair) in sys.pairs().iter().enumerate() {
        builder.marginal_rows(&[i, n + (i + 1) % n], &pair.entries())?;
    }
    let variables = (1..=n)
        .map(|i| format!("V{i}"))
        .chain((1..=n).map(|i| format!("W{i}")))
        .collect();
    let connections = (0..n).map(|i| (i, n + i)).collect();
    assemble(builder, variables, connections, mode, || {
        let summary = sys.marginal_summary();
        summary
            .v
            .iter()
            .zip(&summary.w)
            .map(|(v, w)| maximal_coupling(plus_probability(*v), plus_probability(*w)))
            .collect()
    })
}

/// `Pr[X = +1]` from `<X>`, clamped against rounding.
pub fn plus_probability(mean: f64) -> f64 {
    ((1.0 + mean) / 2.0).clamp(0.0, 1.0)
}

/// Coupling program of a generic system; variables in bunch order.
pub fn build_generic_program(
    sys: &GenericSystem,
    mode: ProgramMode,
) -> Result<CouplingProgram, CouplingError> {
    let mut builder = Builder::new(sys.variable_count())?;
    let mut offset = 0;
    for bunch in sys.bunches() {
        let vars: Vec<usize> = (offset..offset + bunch.vars.len()).collect();
        builder.marginal_rows(&vars, &bunch.pmf)?;
        offset += bunch.vars.len();
    }
    let variables: Vec<String> = sys.variables().into_iter().map(String::from).collect();
    let index_of = |name: &str| variables.iter().position(|v| v == name);
    let connections = sys
        .connections()
        .iter()
        .filter_map(|(a, b)| Some((index_of(a)?, index_of(b)?)))
        .collect();
    assemble(builder, variables.clone(), connections, mode, || {
        sys.connections()
            .iter()
            .map(|(a, b)| {
                let p = sys.marginal_plus(a).unwrap_or(0.0).clamp(0.0, 1.0);
                let q = sys.marginal_plus(b).unwrap_or(0.0).clamp(0.0, 1.0);
                maximal_coupling(p, q)
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Bunch;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn maximal_coupling_examples() {
        let c = maximal_coupling(0.7, 0.4).unwrap();
        for (got, want) in c.entries().iter().zip([0.4, 0.3, 0.0, 0.3]) {
            assert!(close(*got, want));
        }
        assert!(close(c.agreement(), 0.7));

        let c = maximal_coupling(0.5, 0.5).unwrap();
        assert_eq!(c.entries(), [0.5, 0.0, 0.0, 0.5]);
        assert_eq!(c.agreement(), 1.0);

        let c = maximal_coupling(0.3, 0.8).unwrap();
        for (got, want) in c.entries().iter().zip([0.3, 0.0, 0.5, 0.2]) {
            assert!(close(*got, want));
        }
        assert!(close(c.agreement(), 0.5));
    }

    #[test]
    fn mirror_case_is_lp_optimal() {
        // max r_pp + r_mm subject to the marginals (0.3, 0.8).
        let problem = LpProblem::from_rows(
            vec![
                vec![1.0, 1.0, 0.0, 0.0],
                vec![1.0, 0.0, 1.0, 0.0],
                vec![1.0, 1.0, 1.0, 1.0],
            ],
            vec![0.3, 0.8, 1.0],
            vec![-1.0, 0.0, 0.0, -1.0],
        )
        .unwrap();
        let s = lp::solve(&problem).unwrap();
        assert!(close(-s.objective, 0.5));
    }

    #[test]
    fn maximal_coupling_rejects_out_of_range() {
        assert!(matches!(
            maximal_coupling(1.1, 0.5),
            Err(CouplingError::OutOfRange { .. })
        ));
        assert!(matches!(
            maximal_coupling(0.5, -0.1),
            Err(CouplingError::OutOfRange { .. })
        ));
    }

    fn uniform_cyclic(n: usize) -> CyclicSystem {
        CyclicSystem::new(vec![
            PairDistribution {
                pp: 0.25,
                pm: 0.25,
                mp: 0.25,
                mm: 0.25
            };
            n
        ])
        .unwrap()
    }

    #[test]
    fn cyclic_program_counts() {
        let p = build_cyclic_program(&uniform_cyclic(3), ProgramMode::Feasibility).unwrap();
        assert_eq!(p.atom_count(), 64);
        assert_eq!(p.bunch_rows(), 12);
        assert_eq!(p.connection_rows(), 0);
        assert_eq!(p.problem().rows(), 13);

        let p = build_cyclic_program(&uniform_cyclic(5), ProgramMode::MinimizeMismatch).unwrap();
        assert_eq!(p.atom_count(), 1024);
        assert_eq!(p.bunch_rows(), 20);
        assert_eq!(p.problem().rows(), 21);

        let targets = vec![
            PairDistribution {
                pp: 0.5,
                pm: 0.0,
                mp: 0.0,
                mm: 0.5
            };
            3
        ];
        let p =
            build_cyclic_program(&uniform_cyclic(3), ProgramMode::FixConnections(targets)).unwrap();
        assert_eq!(p.connection_rows(), 12);
        assert_eq!(p.problem().rows(), 25);
    }

    #[test]
    fn cyclic_program_rejects_wrong_target_count() {
        let targets = vec![
            PairDistribution {
                pp: 0.5,
                pm: 0.0,
                mp: 0.0,
                mm: 0.5
            };
            2
        ];
        assert_eq!(
            build_cyclic_program(&uniform_cyclic(3), ProgramMode::FixConnections(targets)).err(),
            Some(CouplingError::ConnectionCount {
                expected: 3,
                got: 2
            })
        );
    }

    #[test]
    fn too_many_variables() {
        assert_eq!(
            build_cyclic_program(&uniform_cyclic(13), ProgramMode::Feasibility).err(),
            Some(CouplingError::TooManyVariables { count: 26 })
        );
    }

    #[test]
    fn atom_ordering_is_lexicographic_plus_first() {
        let p = build_cyclic_program(&uniform_cyclic(3), ProgramMode::MinimizeMismatch).unwrap();
        assert_eq!(p.variables()[0], "V1");
        assert_eq!(p.variables()[5], "W3");
        // Atom 0 is all +1; atom 1 flips only the last variable (W3).
        assert!((0..6).all(|v| p.value(0, v) == 1));
        assert_eq!(p.value(1, 5), -1);
        assert_eq!(p.value(1, 4), 1);
        assert_eq!(p.value(32, 0), -1);
        // Mismatch count of atom 1: only V3 != W3.
        assert_eq!(p.problem().objective()[1], 1.0);
        assert_eq!(p.problem().objective()[0], 0.0);
    }

    #[test]
    fn example_seventeen_shape_and_feasibility() {
        let sys = GenericSystem::new(
            vec![
                Bunch {
                    vars: vec!["A".into(), "C".into()],
                    pmf: vec![0.1, 0.4, 0.3, 0.2],
                },
                Bunch {
                    vars: vec!["B".into(), "D".into()],
                    pmf: vec![0.05, 0.15, 0.6, 0.2],
                },
            ],
            vec![("A".into(), "B".into())],
        )
        .unwrap();
        let p = build_generic_program(&sys, ProgramMode::MaximalConnections).unwrap();
        assert_eq!(p.atom_count(), 16);
        assert_eq!(p.bunch_rows(), 8);
        assert_eq!(p.connection_rows(), 4);
        let s = p.solve().unwrap();
        assert!(s.is_optimal());
        assert!(lp::verify_certificate(p.problem(), &s));
    }

    #[test]
    fn single_bunch_is_its_own_coupling() {
        let pmf = vec![0.1, 0.2, 0.3, 0.4];
        let sys = GenericSystem::new(
            vec![Bunch {
                vars: vec!["x".into(), "y".into()],
                pmf: pmf.clone(),
            }],
            vec![],
        )
        .unwrap();
        let p = build_generic_program(&sys, ProgramMode::Feasibility).unwrap();
        let s = p.solve().unwrap();
        assert!(s.is_optimal());
        for (got, want) in s.atoms.iter().zip(&pmf) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}
