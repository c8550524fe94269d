//! JSON input and output formats.
//!
//! System files:
//!
//! ```json
//! {"type":"cyclic","n":4,"pairs":[{"i":1,"pp":0.5,"pm":0,"mp":0,"mm":0.5}, ...]}
//! {"type":"cyclic-expectations","n":4,"v":[...],"w":[...],"vw":[...]}
//! {"type":"generic","bunches":[{"vars":["A_X","B_X"],"pmf":{"++":0.5,"--":0.5}}],
//!  "connections":[["A_X","A_Z"]]}
//! ```
//!
//! Cyclic forms accept `"permutation":[π(1),..,π(n)]` when pair i is
//! `(V_i, W_π(i))`; such systems are renamed to successor pairing. Generic
//! pmf keys spell outcomes with `+`/`-`, one character per variable; missing
//! outcomes have probability zero.
//!
//! Connection files list one coupling per connection `(V_i, W_i)`:
//!
//! ```json
//! {"connections":[{"i":1,"pp":0.5,"pm":0,"mp":0,"mm":0.5}, {"i":2,"vw":0.3}, ...]}
//! ```
//!
//! An entry gives either the full pmf or just `"vw"` = `<V_i W_i>`, in
//! which case the pmf is rebuilt from the system's marginals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::system::{
    Bunch, CyclicSystem, GenericSystem, ModelError, PairDistribution, Relabeling, System, Violation,
};

#[derive(Debug, Error)]
pub enum InputError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl InputError {
    fn json(e: serde_json::Error) -> Self {
        InputError::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }

    /// Violations when the input parsed but failed validation.
    pub fn violations(&self) -> &[Violation] {
        match self {
            InputError::Model(ModelError::Invalid(v)) => v,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub i: usize,
    pub pp: f64,
    pub pm: f64,
    pub mp: f64,
    pub mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BunchEntry {
    pub vars: Vec<String>,
    pub pmf: BTreeMap<String, f64>,
}

/// On-disk system description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemFile {
    Cyclic {
        n: usize,
        pairs: Vec<PairEntry>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        permutation: Option<Vec<usize>>,
    },
    CyclicExpectations {
        n: usize,
        v: Vec<f64>,
        w: Vec<f64>,
        vw: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        permutation: Option<Vec<usize>>,
    },
    Generic {
        bunches: Vec<BunchEntry>,
        connections: Vec<[String; 2]>,
    },
}

/// A validated system plus the renaming applied on ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub system: System,
    pub relabeling: Option<Relabeling>,
}

pub fn parse_system(text: &str) -> Result<Loaded, InputError> {
    let file: SystemFile = serde_json::from_str(text).map_err(InputError::json)?;
    load(&file)
}

pub fn read_system(path: &std::path::Path) -> Result<Loaded, InputError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError::Schema(format!("cannot read {}: {e}", path.display())))?;
    parse_system(&text)
}

fn successor(n: usize) -> Vec<usize> {
    (1..=n).map(|i| i % n + 1).collect()
}

/// Builds the canonical system from triples `(i, π(i), pmf)`.
fn canonical(
    n: usize,
    pairs: Vec<(usize, usize, PairDistribution)>,
    permutation: Option<&Vec<usize>>,
) -> Result<Loaded, InputError> {
    match permutation {
        Some(pi) => {
            if pi.len() != n {
                return Err(InputError::Schema(format!(
                    "permutation has {} entries, n = {n}",
                    pi.len()
                )));
            }
            let (system, relabeling) = crate::system::relabel_permutation(&pairs, pi)?;
            Ok(Loaded {
                system: System::Cyclic(system),
                relabeling: Some(relabeling),
            })
        }
        None => {
            let mut by_index: Vec<Option<PairDistribution>> = vec![None; n];
            for (i, _, dist) in pairs {
                if by_index[i - 1].replace(dist).is_some() {
                    return Err(InputError::Schema(format!("pair i = {i} given twice")));
                }
            }
            let pairs: Vec<_> = by_index
                .into_iter()
                .map(|p| p.expect("count and range checked"))
                .collect();
            Ok(Loaded {
                system: System::Cyclic(CyclicSystem::new(pairs)?),
                relabeling: None,
            })
        }
    }
}

pub fn load(file: &SystemFile) -> Result<Loaded, InputError> {
    match file {
        SystemFile::Cyclic {
            n,
            pairs,
            permutation,
        } => {
            let n = *n;
            if n < 3 {
                return Err(InputError::Schema(format!(
                    "n = {n}, cyclic systems need n >= 3"
                )));
            }
            if pairs.len() != n {
                return Err(InputError::Schema(format!(
                    "{} pairs for n = {n}",
                    pairs.len()
                )));
            }
            if let Some(bad) = pairs.iter().find(|p| p.i == 0 || p.i > n) {
                return Err(InputError::Schema(format!(
                    "pair index i = {} out of 1..={n}",
                    bad.i
                )));
            }
            let pi = permutation.clone().unwrap_or_else(|| successor(n));
            if pi.iter().any(|&j| j == 0 || j > n) {
                return Err(ModelError::InvalidPermutation(format!(
                    "{pi:?} is not a permutation of 1..={n}"
                ))
                .into());
            }
            // Validate all pmfs together so every violation is reported.
            let raw: Vec<PairDistribution> = pairs
                .iter()
                .map(|p| PairDistribution {
                    pp: p.pp,
                    pm: p.pm,
                    mp: p.mp,
                    mm: p.mm,
                })
                .collect();
            let violations: Vec<Violation> = pairs
                .iter()
                .zip(&raw)
                .flat_map(|(p, d)| d.violations(&format!("pair {}", p.i)))
                .collect();
            if !violations.is_empty() {
                return Err(ModelError::Invalid(violations).into());
            }
            let triples = pairs
                .iter()
                .zip(raw)
                .map(|(p, d)| (p.i, pi[p.i - 1], d))
                .collect();
            canonical(n, triples, permutation.as_ref())
        }
        SystemFile::CyclicExpectations {
            n,
            v,
            w,
            vw,
            permutation,
        } => {
            let n = *n;
            if n < 3 || v.len() != n || w.len() != n || vw.len() != n {
                return Err(ModelError::LengthMismatch {
                    v: v.len(),
                    w: w.len(),
                    vw: vw.len(),
                }
                .into());
            }
            let pi = permutation.clone().unwrap_or_else(|| successor(n));
            if pi.len() != n || pi.iter().any(|&j| j == 0 || j > n) {
                return Err(ModelError::InvalidPermutation(format!(
                    "{pi:?} is not a permutation of 1..={n}"
                ))
                .into());
            }
            let triples = (0..n)
                .map(|k| {
                    let j = pi[k];
                    PairDistribution::from_expectations(v[k], w[j - 1], vw[k])
                        .map(|d| (k + 1, j, d))
                        .map_err(|entry| ModelError::InfeasibleExpectations { pair: k + 1, entry })
                })
                .collect::<Result<Vec<_>, _>>()?;
            canonical(n, triples, permutation.as_ref())
        }
        SystemFile::Generic {
            bunches,
            connections,
        } => {
            let bunches = bunches
                .iter()
                .enumerate()
                .map(|(b, entry)| dense_pmf(b, entry))
                .collect::<Result<Vec<_>, _>>()?;
            let connections = connections
                .iter()
                .map(|[a, b]| (a.clone(), b.clone()))
                .collect();
            Ok(Loaded {
                system: System::Generic(GenericSystem::new(bunches, connections)?),
                relabeling: None,
            })
        }
    }
}

fn outcome_index(key: &str, width: usize) -> Option<usize> {
    if key.chars().count() != width {
        return None;
    }
    key.chars().try_fold(0, |acc, c| match c {
        '+' => Some(acc * 2),
        '-' => Some(acc * 2 + 1),
        _ => None,
    })
}

fn outcome_key(index: usize, width: usize) -> String {
    (0..width)
        .map(|k| {
            if index >> (width - 1 - k) & 1 == 0 {
                '+'
            } else {
                '-'
            }
        })
        .collect()
}

fn dense_pmf(b: usize, entry: &BunchEntry) -> Result<Bunch, InputError> {
    let width = entry.vars.len();
    if width == 0 || width > crate::system::MAX_BUNCH_VARIABLES {
        return Err(InputError::Schema(format!(
            "bunch {} has {width} variables, expected 1..={}",
            b + 1,
            crate::system::MAX_BUNCH_VARIABLES
        )));
    }
    let mut pmf = vec![0.0; 1 << width];
    for (key, &p) in &entry.pmf {
        let index = outcome_index(key, width).ok_or_else(|| {
            InputError::Schema(format!("bunch {}: bad outcome key {key:?}", b + 1))
        })?;
        pmf[index] = p;
    }
    Ok(Bunch {
        vars: entry.vars.clone(),
        pmf,
    })
}

impl SystemFile {
    /// Probability form of a cyclic system.
    pub fn cyclic(sys: &CyclicSystem) -> Self {
        SystemFile::Cyclic {
            n: sys.n(),
            pairs: sys
                .pairs()
                .iter()
                .enumerate()
                .map(|(k, p)| PairEntry {
                    i: k + 1,
                    pp: p.pp,
                    pm: p.pm,
                    mp: p.mp,
                    mm: p.mm,
                })
                .collect(),
            permutation: None,
        }
    }

    pub fn generic(sys: &GenericSystem) -> Self {
        SystemFile::Generic {
            bunches: sys
                .bunches()
                .iter()
                .map(|b| BunchEntry {
                    vars: b.vars.clone(),
                    pmf: b
                        .pmf
                        .iter()
                        .enumerate()
                        .map(|(k, &p)| (outcome_key(k, b.vars.len()), p))
                        .collect(),
                })
                .collect(),
            connections: sys
                .connections()
                .iter()
                .map(|(a, b)| [a.clone(), b.clone()])
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system files always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionEntry {
    pub i: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionsFile {
    pub connections: Vec<ConnectionEntry>,
}

/// Parses a connections file against `sys`, returning one pmf per
/// connection in index order. Marginal consistency is left to the analysis.
pub fn parse_connections(
    text: &str,
    sys: &CyclicSystem,
) -> Result<Vec<PairDistribution>, InputError> {
    let file: ConnectionsFile = serde_json::from_str(text).map_err(InputError::json)?;
    let n = sys.n();
    let summary = sys.marginal_summary();
    let mut out: Vec<Option<PairDistribution>> = vec![None; file.connections.len().max(n)];
    for c in &file.connections {
        if c.i == 0 || c.i > out.len() {
            return Err(InputError::Schema(format!(
                "connection index i = {} out of range",
                c.i
            )));
        }
        let dist = match (c.pp, c.pm, c.mp, c.mm, c.vw) {
            (Some(pp), Some(pm), Some(mp), Some(mm), None) => PairDistribution::new(pp, pm, mp, mm)
                .map_err(|e| match e {
                    ModelError::Invalid(v) => ModelError::Invalid(
                        v.into_iter()
                            .map(|x| Violation {
                                location: format!("connection {}", c.i),
                                ..x
                            })
                            .collect(),
                    ),
                    other => other,
                })?,
            (None, None, None, None, Some(vw)) if c.i <= n => {
                PairDistribution::from_expectations(summary.v[c.i - 1], summary.w[c.i - 1], vw)
                    .map_err(|_| {
                        InputError::Schema(format!(
                    "connection {}: <VW> = {vw} is not realizable with the system's marginals",
                    c.i
                ))
                    })?
            }
            _ => {
                return Err(InputError::Schema(format!(
                    "connection {}: give either pp, pm, mp, mm or vw",
                    c.i
                )))
            }
        };
        if out[c.i - 1].replace(dist).is_some() {
            return Err(InputError::Schema(format!(
                "connection i = {} given twice",
                c.i
            )));
        }
    }
    if let Some(missing) = out.iter().position(Option::is_none) {
        return Err(InputError::Schema(format!(
            "connection i = {} missing",
            missing + 1
        )));
    }
    Ok(out.into_iter().flatten().collect())
}

impl ConnectionsFile {
    pub fn from_pmfs(pmfs: &[PairDistribution]) -> Self {
        ConnectionsFile {
            connections: pmfs
                .iter()
                .enumerate()
                .map(|(k, d)| ConnectionEntry {
                    i: k + 1,
                    pp: Some(d.pp),
                    pm: Some(d.pm),
                    mp: Some(d.mp),
                    mm: Some(d.mm),
                    vw: None,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::ViolationKind;

    #[test]
    fn cyclic_probability_form() {
        let text = r#"{"type":"cyclic","n":3,"pairs":[
            {"i":2,"pp":0.5,"pm":0,"mp":0,"mm":0.5},
            {"i":1,"pp":0.4,"pm":0.2,"mp":0.1,"mm":0.3},
            {"i":3,"pp":0.25,"pm":0.25,"mp":0.25,"mm":0.25}]}"#;
        let loaded = parse_system(text).unwrap();
        let System::Cyclic(sys) = loaded.system else {
            panic!()
        };
        assert!((sys.marginal_summary().v[0] - 0.2).abs() < 1e-15);
        assert_eq!(sys.pair(1).pp, 0.5);
        assert!(loaded.relabeling.is_none());
    }

    #[test]
    fn out_of_range_probability_is_one_violation() {
        let text = r#"{"type":"cyclic","n":3,"pairs":[
            {"i":1,"pp":1.2,"pm":-0.2,"mp":0,"mm":0},
            {"i":2,"pp":0.25,"pm":0.25,"mp":0.25,"mm":0.25},
            {"i":3,"pp":0.25,"pm":0.25,"mp":0.25,"mm":0.25}]}"#;
        let err = parse_system(text).unwrap_err();
        assert_eq!(err.violations().len(), 1);
        assert_eq!(
            err.violations()[0].kind,
            ViolationKind::ProbabilityOutOfRange
        );
        assert_eq!(err.violations()[0].location, "pair 1");
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_system("{\"type\": \"cyclic\",\n \"n\": }").unwrap_err();
        assert!(matches!(err, InputError::Json { line: 2, .. }), "{err}");
    }

    #[test]
    fn expectations_form_with_permutation() {
        let text = r#"{"type":"cyclic-expectations","n":3,
            "v":[0,0,0],"w":[0,0,0],"vw":[0.1,0.2,0.3],"permutation":[3,1,2]}"#;
        let loaded = parse_system(text).unwrap();
        let System::Cyclic(sys) = loaded.system else {
            panic!()
        };
        assert_eq!(loaded.relabeling.unwrap().old_to_new, vec![1, 3, 2]);
        let mut vw = sys.marginal_summary().vw;
        vw.sort_by(f64::total_cmp);
        for (got, want) in vw.iter().zip([0.1, 0.2, 0.3]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn non_circular_permutation() {
        let text = r#"{"type":"cyclic-expectations","n":4,
            "v":[0,0,0,0],"w":[0,0,0,0],"vw":[0,0,0,0],"permutation":[2,1,4,3]}"#;
        assert!(matches!(
            parse_system(text).unwrap_err(),
            InputError::Model(ModelError::NotCircular { cycles: 2 })
        ));
    }

    #[test]
    fn generic_form_roundtrip() {
        let text = r#"{"type":"generic","bunches":[
            {"vars":["A_X","B_X"],"pmf":{"+-":0.5,"-+":0.5}},
            {"vars":["B_Y","C_Y"],"pmf":{"+-":0.5,"-+":0.5}},
            {"vars":["A_Z","C_Z"],"pmf":{"+-":0.5,"-+":0.5}}],
            "connections":[["A_X","A_Z"],["B_X","B_Y"],["C_Y","C_Z"]]}"#;
        let loaded = parse_system(text).unwrap();
        let System::Generic(g) = &loaded.system else {
            panic!()
        };
        assert_eq!(g.bunches()[0].pmf, vec![0.0, 0.5, 0.5, 0.0]);
        let again = parse_system(&SystemFile::generic(g).to_json()).unwrap();
        assert_eq!(again, loaded);
    }

    #[test]
    fn bad_outcome_key() {
        let text =
            r#"{"type":"generic","bunches":[{"vars":["a","b"],"pmf":{"+x":1}}],"connections":[]}"#;
        assert!(matches!(
            parse_system(text).unwrap_err(),
            InputError::Schema(_)
        ));
    }

    #[test]
    fn connections_file_forms() {
        let sys = crate::system::from_expectations(&crate::system::MarginalSummary {
            v: vec![0.0; 3],
            w: vec![0.0; 3],
            vw: vec![0.0; 3],
        })
        .unwrap();
        let text = r#"{"connections":[
            {"i":1,"pp":0.5,"pm":0,"mp":0,"mm":0.5},
            {"i":3,"vw":0.0},
            {"i":2,"vw":1.0}]}"#;
        let c = parse_connections(text, &sys).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c[1].pp, 0.5);
        assert_eq!(c[2].pp, 0.25);
        let mixed = r#"{"connections":[{"i":1,"pp":0.5,"vw":1}]}"#;
        assert!(parse_connections(mixed, &sys).is_err());
        let short = r#"{"connections":[{"i":1,"vw":1}]}"#;
        assert!(parse_connections(short, &sys).is_err());
    }
}
