//! System representations: binary pair distributions, rank-n cyclic systems
//! and generic systems of named bunches with a simple set of connections.
//!
//! Cyclic systems always use successor pairing internally: pair `i` holds the
//! joint distribution of `(V_i, W_{i+1})` (indices wrap around), and the
//! connections are `{V_i, W_i}`. Other circular pairings are canonicalized by
//! [`relabel_permutation`].

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Allowed deviation of a pmf sum from 1.
pub const SUM_TOLERANCE: f64 = 1e-9;
/// Negative entries down to this magnitude are clamped to zero on ingestion.
pub const NEGATIVE_CLAMP: f64 = 1e-12;
/// Reconstructed entries below `-EXPECTATION_TOLERANCE` are infeasible.
pub const EXPECTATION_TOLERANCE: f64 = 1e-9;
/// Dense pmf storage bound per bunch.
pub const MAX_BUNCH_VARIABLES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid system: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("expectations at pair {pair} are not realizable (entry {entry:.3e})")]
    InfeasibleExpectations { pair: usize, entry: f64 },
    #[error("permutation is not circular: it has {cycles} cycles")]
    NotCircular { cycles: usize },
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("pair list does not match the permutation: {0}")]
    PairingMismatch(String),
    #[error("expectation sequences must all have length n >= 3 (got v={v}, w={w}, vw={vw})")]
    LengthMismatch { v: usize, w: usize, vw: usize },
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    ProbabilityOutOfRange,
    ProbabilitySum,
    NonFinite,
    RankTooSmall,
    PairIndex,
    BunchSize,
    DuplicateVariable,
    UnknownVariable,
    ConnectionWithinBunch,
    OverlappingConnections,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            ViolationKind::ProbabilityOutOfRange => "probability out of range",
            ViolationKind::ProbabilitySum => "probabilities do not sum to 1",
            ViolationKind::NonFinite => "non-finite probability",
            ViolationKind::RankTooSmall => "cyclic rank below 3",
            ViolationKind::PairIndex => "pair index missing or duplicated",
            ViolationKind::BunchSize => "bunch size does not match pmf",
            ViolationKind::DuplicateVariable => "duplicate variable name",
            ViolationKind::UnknownVariable => "unknown variable in connection",
            ViolationKind::ConnectionWithinBunch => "connection within single bunch",
            ViolationKind::OverlappingConnections => "connections are not disjoint",
        };
        f.write_str(text)
    }
}

/// One invariant violation: where, what, and by how much.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub location: String,
    pub kind: ViolationKind,
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} ({:.3e})",
            self.location, self.kind, self.magnitude
        )
    }
}

/// Checks a slice of probabilities, emitting at most one range violation and
/// one sum violation.
fn pmf_violations(entries: &[f64], location: &str) -> Vec<Violation> {
    let mut out = Vec::new();
    if entries.iter().any(|p| !p.is_finite()) {
        out.push(Violation {
            location: location.to_string(),
            kind: ViolationKind::NonFinite,
            magnitude: f64::NAN,
        });
        return out;
    }
    let worst = entries
        .iter()
        .map(|&p| {
            if p < -NEGATIVE_CLAMP {
                -p
            } else if p > 1.0 + NEGATIVE_CLAMP {
                p - 1.0
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    if worst > 0.0 {
        out.push(Violation {
            location: location.to_string(),
            kind: ViolationKind::ProbabilityOutOfRange,
            magnitude: worst,
        });
    }
    let sum: f64 = entries.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        out.push(Violation {
            location: location.to_string(),
            kind: ViolationKind::ProbabilitySum,
            magnitude: (sum - 1.0).abs(),
        });
    }
    out
}

fn clamp_negative(p: f64) -> f64 {
    if (-NEGATIVE_CLAMP..0.0).contains(&p) {
        0.0
    } else {
        p
    }
}

/// Joint pmf of a binary pair `(X, Y)`: `pp = Pr[X=+1, Y=+1]`,
/// `pm = Pr[X=+1, Y=-1]`, `mp = Pr[X=-1, Y=+1]`, `mm = Pr[X=-1, Y=-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDistribution {
    pub pp: f64,
    pub pm: f64,
    pub mp: f64,
    pub mm: f64,
}

impl PairDistribution {
    /// Validated constructor; tiny negative entries are clamped to zero.
    pub fn new(pp: f64, pm: f64, mp: f64, mm: f64) -> Result<Self, ModelError> {
        let raw = Self { pp, pm, mp, mm };
        let violations = raw.violations("pair");
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations));
        }
        Ok(raw.clamped())
    }

    /// Rebuilds a pmf from `<X>`, `<Y>` and `<XY>` via
    /// `r_ab = (1 + a<X> + b<Y> + ab<XY>) / 4`.
    ///
    /// Entries in `[-1e-9, 0)` are clamped to zero; anything lower means no
    /// joint pmf has these moments.
    pub fn from_expectations(first: f64, second: f64, product: f64) -> Result<Self, f64> {
        let entry = |a: f64, b: f64| (1.0 + a * first + b * second + a * b * product) / 4.0;
        let entries = [
            entry(1.0, 1.0),
            entry(1.0, -1.0),
            entry(-1.0, 1.0),
            entry(-1.0, -1.0),
        ];
        if let Some(&bad) = entries.iter().find(|&&e| !(e >= -EXPECTATION_TOLERANCE)) {
            return Err(bad);
        }
        let [pp, pm, mp, mm] = entries.map(|e| e.max(0.0));
        Ok(Self { pp, pm, mp, mm })
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.pp, self.pm, self.mp, self.mm]
    }

    /// `<X>`
    pub fn first_mean(&self) -> f64 {
        self.pp + self.pm - self.mp - self.mm
    }

    /// `<Y>`
    pub fn second_mean(&self) -> f64 {
        self.pp - self.pm + self.mp - self.mm
    }

    /// `<XY>`
    pub fn product_mean(&self) -> f64 {
        self.pp - self.pm - self.mp + self.mm
    }

    /// `Pr[X = +1]`
    pub fn first_plus(&self) -> f64 {
        self.pp + self.pm
    }

    /// `Pr[Y = +1]`
    pub fn second_plus(&self) -> f64 {
        self.pp + self.mp
    }

    /// `Pr[X = Y]`
    pub fn agreement(&self) -> f64 {
        self.pp + self.mm
    }

    /// Distribution of `(Y, X)`.
    pub fn transpose(&self) -> Self {
        Self {
            pp: self.pp,
            pm: self.mp,
            mp: self.pm,
            mm: self.mm,
        }
    }

    pub fn violations(&self, location: &str) -> Vec<Violation> {
        pmf_violations(&self.entries(), location)
    }

    fn clamped(self) -> Self {
        Self {
            pp: clamp_negative(self.pp),
            pm: clamp_negative(self.pm),
            mp: clamp_negative(self.mp),
            mm: clamp_negative(self.mm),
        }
    }
}

/// Per-variable expectations of a cyclic system. `w[i]` is `<W_{i+1}>` in
/// 1-based terms read from the pair where that `W` occurs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSummary {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub vw: Vec<f64>,
}

impl MarginalSummary {
    pub fn n(&self) -> usize {
        self.vw.len()
    }

    /// `|<V_i> - <W_i>|` for each i.
    pub fn connection_gaps(&self) -> Vec<f64> {
        self.v
            .iter()
            .zip(&self.w)
            .map(|(v, w)| (v - w).abs())
            .collect()
    }
}

/// Rank-n cyclic system with successor pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicSystem {
    pairs: Vec<PairDistribution>,
}

impl CyclicSystem {
    /// Validated constructor. Pair `k` (0-based) is the pmf of
    /// `(V_{k+1}, W_{k+2})`, wrapping at the end.
    pub fn new(pairs: Vec<PairDistribution>) -> Result<Self, ModelError> {
        let sys = Self::unchecked(pairs);
        let violations = sys.violations();
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations));
        }
        Ok(Self {
            pairs: sys
                .pairs
                .into_iter()
                .map(PairDistribution::clamped)
                .collect(),
        })
    }

    /// Builds a system without validation, for ingesting raw data that is
    /// checked afterwards with [`validate_system`].
    pub fn unchecked(pairs: Vec<PairDistribution>) -> Self {
        Self { pairs }
    }

    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[PairDistribution] {
        &self.pairs
    }

    /// Pair distribution `(V_i, W_{i+1})` for 0-based `i`.
    pub fn pair(&self, i: usize) -> &PairDistribution {
        &self.pairs[i]
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.pairs.len() < 3 {
            out.push(Violation {
                location: "system".into(),
                kind: ViolationKind::RankTooSmall,
                magnitude: self.pairs.len() as f64,
            });
        }
        for (k, pair) in self.pairs.iter().enumerate() {
            out.extend(pair.violations(&format!("pair {}", k + 1)));
        }
        out
    }

    pub fn marginal_summary(&self) -> MarginalSummary {
        marginal_summary(self)
    }
}

/// Reads `<V_i>` from pair i, `<W_i>` from pair i-1 and `<V_i W_{i+1}>` from
/// pair i.
pub fn marginal_summary(sys: &CyclicSystem) -> MarginalSummary {
    let n = sys.n();
    let v = sys.pairs.iter().map(PairDistribution::first_mean).collect();
    let w = (0..n)
        .map(|i| sys.pairs[(i + n - 1) % n].second_mean())
        .collect();
    let vw = sys
        .pairs
        .iter()
        .map(PairDistribution::product_mean)
        .collect();
    MarginalSummary { v, w, vw }
}

/// Inverse of [`marginal_summary`].
pub fn from_expectations(summary: &MarginalSummary) -> Result<CyclicSystem, ModelError> {
    let n = summary.vw.len();
    if n < 3 || summary.v.len() != n || summary.w.len() != n {
        return Err(ModelError::LengthMismatch {
            v: summary.v.len(),
            w: summary.w.len(),
            vw: n,
        });
    }
    let pairs = (0..n)
        .map(|i| {
            PairDistribution::from_expectations(summary.v[i], summary.w[(i + 1) % n], summary.vw[i])
                .map_err(|entry| ModelError::InfeasibleExpectations { pair: i + 1, entry })
        })
        .collect::<Result<Vec<_>, _>>()?;
    CyclicSystem::new(pairs)
}

/// Renaming produced when a circular pairing is canonicalized to successor
/// form. Both vectors are 1-based labels; `old_to_new[i - 1]` is the new label
/// of the old index `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relabeling {
    pub old_to_new: Vec<usize>,
}

impl Relabeling {
    pub fn identity(n: usize) -> Self {
        Self {
            old_to_new: (1..=n).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.old_to_new.iter().enumerate().all(|(k, &j)| j == k + 1)
    }
}

fn count_cycles(pi: &[usize]) -> usize {
    let mut seen = vec![false; pi.len()];
    let mut cycles = 0;
    for start in 0..pi.len() {
        if seen[start] {
            continue;
        }
        cycles += 1;
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            k = pi[k] - 1;
        }
    }
    cycles
}

/// Canonicalizes a system whose pairs are `(V_i, W_{pi(i)})` for a circular
/// permutation `pi` (given 1-based: `pi[i - 1] = pi(i)`).
///
/// Indices are renamed along the cycle starting at 1, so that the result uses
/// successor pairing and connection `{V_i, W_i}` keeps its meaning.
pub fn relabel_permutation(
    pairs: &[(usize, usize, PairDistribution)],
    pi: &[usize],
) -> Result<(CyclicSystem, Relabeling), ModelError> {
    let n = pi.len();
    let mut hit = vec![false; n];
    for &target in pi {
        if target == 0 || target > n || hit[target - 1] {
            return Err(ModelError::InvalidPermutation(format!(
                "{pi:?} is not a permutation of 1..={n}"
            )));
        }
        hit[target - 1] = true;
    }
    let cycles = count_cycles(pi);
    if cycles != 1 {
        return Err(ModelError::NotCircular { cycles });
    }
    if pairs.len() != n {
        return Err(ModelError::PairingMismatch(format!(
            "{} pairs for a permutation of length {n}",
            pairs.len()
        )));
    }

    let mut by_index: Vec<Option<PairDistribution>> = vec![None; n];
    for &(i, j, dist) in pairs {
        if i == 0 || i > n {
            return Err(ModelError::PairingMismatch(format!(
                "pair index {i} out of range"
            )));
        }
        if pi[i - 1] != j {
            return Err(ModelError::PairingMismatch(format!(
                "pair ({i}, {j}) but permutation maps {i} to {}",
                pi[i - 1]
            )));
        }
        if by_index[i - 1].replace(dist).is_some() {
            return Err(ModelError::PairingMismatch(format!(
                "pair index {i} repeated"
            )));
        }
    }

    let mut old_to_new = vec![0; n];
    let mut order = Vec::with_capacity(n);
    let mut k = 1;
    for label in 1..=n {
        old_to_new[k - 1] = label;
        order.push(k);
        k = pi[k - 1];
    }
    // New pair `label` is the old pair whose V-index maps to `label`.
    let new_pairs = order
        .iter()
        .map(|&old| by_index[old - 1].expect("every index present"))
        .collect();
    Ok((CyclicSystem::new(new_pairs)?, Relabeling { old_to_new }))
}

/// One bunch: named binary variables and their dense joint pmf. Outcome
/// tuples are ordered lexicographically with `+1` before `-1`, the first
/// variable being most significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bunch {
    pub vars: Vec<String>,
    pub pmf: Vec<f64>,
}

impl Bunch {
    /// `Pr[var = +1]` for the variable at position `k` in this bunch.
    pub fn marginal_plus(&self, k: usize) -> f64 {
        let width = self.vars.len();
        let bit = width - 1 - k;
        self.pmf
            .iter()
            .enumerate()
            .filter(|(outcome, _)| outcome >> bit & 1 == 0)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Arbitrary bunches of named binary variables plus a simple set of
/// connections between variables of distinct bunches.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericSystem {
    bunches: Vec<Bunch>,
    connections: Vec<(String, String)>,
}

/// Location of a variable: (bunch index, position within the bunch).
pub type VariableSlot = (usize, usize);

impl GenericSystem {
    pub fn new(
        bunches: Vec<Bunch>,
        connections: Vec<(String, String)>,
    ) -> Result<Self, ModelError> {
        let sys = Self::unchecked(bunches, connections);
        let violations = sys.violations();
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations));
        }
        let bunches = sys
            .bunches
            .into_iter()
            .map(|b| Bunch {
                vars: b.vars,
                pmf: b.pmf.into_iter().map(clamp_negative).collect(),
            })
            .collect();
        Ok(Self {
            bunches,
            connections: sys.connections,
        })
    }

    pub fn unchecked(bunches: Vec<Bunch>, connections: Vec<(String, String)>) -> Self {
        Self {
            bunches,
            connections,
        }
    }

    pub fn bunches(&self) -> &[Bunch] {
        &self.bunches
    }

    pub fn connections(&self) -> &[(String, String)] {
        &self.connections
    }

    /// All variable names, bunch by bunch.
    pub fn variables(&self) -> Vec<&str> {
        self.bunches
            .iter()
            .flat_map(|b| b.vars.iter().map(String::as_str))
            .collect()
    }

    pub fn variable_count(&self) -> usize {
        self.bunches.iter().map(|b| b.vars.len()).sum()
    }

    pub fn slot(&self, name: &str) -> Option<VariableSlot> {
        self.bunches
            .iter()
            .enumerate()
            .find_map(|(b, bunch)| bunch.vars.iter().position(|v| v == name).map(|k| (b, k)))
    }

    /// `Pr[name = +1]` from the variable's own bunch.
    pub fn marginal_plus(&self, name: &str) -> Option<f64> {
        self.slot(name)
            .map(|(b, k)| self.bunches[b].marginal_plus(k))
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut owner: HashMap<&str, usize> = HashMap::new();
        for (b, bunch) in self.bunches.iter().enumerate() {
            let location = format!("bunch {}", b + 1);
            let width = bunch.vars.len();
            if width == 0 || width > MAX_BUNCH_VARIABLES || bunch.pmf.len() != 1 << width {
                out.push(Violation {
                    location: location.clone(),
                    kind: ViolationKind::BunchSize,
                    magnitude: width as f64,
                });
            } else {
                out.extend(pmf_violations(&bunch.pmf, &location));
            }
            for name in &bunch.vars {
                if owner.insert(name, b).is_some() {
                    out.push(Violation {
                        location: format!("variable {name}"),
                        kind: ViolationKind::DuplicateVariable,
                        magnitude: 0.0,
                    });
                }
            }
        }
        let mut used: HashSet<&str> = HashSet::new();
        for (a, b) in &self.connections {
            let location = format!("connection {{{a}, {b}}}");
            match (owner.get(a.as_str()), owner.get(b.as_str())) {
                (Some(x), Some(y)) if x == y => out.push(Violation {
                    location: location.clone(),
                    kind: ViolationKind::ConnectionWithinBunch,
                    magnitude: 0.0,
                }),
                (Some(_), Some(_)) => {}
                _ => out.push(Violation {
                    location: location.clone(),
                    kind: ViolationKind::UnknownVariable,
                    magnitude: 0.0,
                }),
            }
            if !used.insert(a) | (a != b && !used.insert(b)) | (a == b) {
                out.push(Violation {
                    location,
                    kind: ViolationKind::OverlappingConnections,
                    magnitude: 0.0,
                });
            }
        }
        out
    }

    /// Recognizes a cyclic system: every bunch is a pair, every variable lies
    /// in exactly one connection, and bunches and connections alternate around
    /// a single cycle. Returns the successor-form system plus, for each cyclic
    /// index, the names `(V_i, W_i)`.
    pub fn to_cyclic(&self) -> Option<(CyclicSystem, Vec<(String, String)>)> {
        let n = self.bunches.len();
        if n < 3 || self.bunches.iter().any(|b| b.vars.len() != 2) {
            return None;
        }
        if self.connections.len() != n {
            return None;
        }
        let mut partner: HashMap<&str, &str> = HashMap::new();
        for (a, b) in &self.connections {
            partner.insert(a, b);
            partner.insert(b, a);
        }
        if partner.len() != 2 * n {
            return None;
        }

        // Walk: bunch (V_1, W_2) -> partner of W_2 is V_2 -> its bunch (V_2, W_3) ...
        let mut visited = vec![false; n];
        let mut pairs = Vec::with_capacity(n);
        let mut v_names = Vec::with_capacity(n);
        let mut w_names = Vec::with_capacity(n);
        let mut bunch = 0;
        let mut v_pos = 0;
        for _ in 0..n {
            if visited[bunch] {
                return None;
            }
            visited[bunch] = true;
            let b = &self.bunches[bunch];
            let w_pos = 1 - v_pos;
            let pmf = PairDistribution {
                pp: b.pmf[0],
                pm: b.pmf[1],
                mp: b.pmf[2],
                mm: b.pmf[3],
            };
            pairs.push(if v_pos == 0 { pmf } else { pmf.transpose() });
            v_names.push(b.vars[v_pos].clone());
            w_names.push(b.vars[w_pos].clone());
            let next_v = partner.get(b.vars[w_pos].as_str())?;
            let (next_bunch, next_pos) = self.slot(next_v)?;
            bunch = next_bunch;
            v_pos = next_pos;
        }
        // The cycle must close on the first bunch's V through W_1.
        if bunch != 0 || v_pos != 0 || visited.iter().any(|&seen| !seen) {
            return None;
        }
        // w_names[k] holds W_{k+2}; rotate so index k names W_{k+1}.
        w_names.rotate_right(1);
        let names = v_names.into_iter().zip(w_names).collect();
        CyclicSystem::new(pairs).ok().map(|sys| (sys, names))
    }
}

/// Either kind of system, for validation and ingestion.
#[derive(Debug, Clone, PartialEq)]
pub enum System {
    Cyclic(CyclicSystem),
    Generic(GenericSystem),
}

/// Every invariant violation of the system; empty means valid.
pub fn validate_system(sys: &System) -> Vec<Violation> {
    match sys {
        System::Cyclic(c) => c.violations(),
        System::Generic(g) => g.violations(),
    }
}
