//! Bundled systems and seeded random generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};
use thiserror::Error;

use crate::io::SystemFile;
use crate::system::{
    from_expectations, Bunch, CyclicSystem, GenericSystem, MarginalSummary, PairDistribution,
};

/// Ranks accepted for random scenarios.
pub const RANDOM_RANKS: std::ops::RangeInclusive<usize> = 3..=12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("scenario `random` needs --n and --seed")]
    MissingRandomArgs,
    #[error("n = {0} outside 3..=12")]
    RankOutOfRange(usize),
    #[error("n = {0}: cyclic systems need n >= 3")]
    RankTooSmall(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    PrBox,
    Tsirelson,
    KcbsQuantum,
    Specker,
    AllCorrelated,
    Random,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pair(pp: f64, pm: f64, mp: f64, mm: f64) -> PairDistribution {
    PairDistribution { pp, pm, mp, mm }
}

/// Three perfect correlations and one perfect anticorrelation, uniform
/// marginals.
pub fn pr_box() -> CyclicSystem {
    let corr = pair(0.5, 0.0, 0.0, 0.5);
    let anti = pair(0.0, 0.5, 0.5, 0.0);
    CyclicSystem::new(vec![corr, corr, corr, anti]).expect("valid by construction")
}

/// `√2/2` in the expectation file, kept exact to double precision.
pub fn tsirelson_expectations() -> MarginalSummary {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    MarginalSummary {
        v: vec![0.0; 4],
        w: vec![0.0; 4],
        vw: vec![h, h, h, -h],
    }
}

pub fn tsirelson() -> CyclicSystem {
    from_expectations(&tsirelson_expectations()).expect("valid by construction")
}

/// Rank 5, `Pr[V_i = +1] = 1/√5`, exclusive adjacent outcomes.
pub fn kcbs_quantum() -> CyclicSystem {
    let p = 1.0 / 5f64.sqrt();
    kcbs_exclusion(&[p; 5])
}

/// Consistently connected rank-5 system with `Pr[V_i = +1] = p_i` and
/// `Pr[V_i = +1, W_{i+1} = +1] = 0`. Needs `p_i + p_{i+1} ≤ 1`.
pub fn kcbs_exclusion(p: &[f64]) -> CyclicSystem {
    let n = p.len();
    let pairs = (0..n)
        .map(|i| {
            let (a, b) = (p[i], p[(i + 1) % n]);
            pair(0.0, a, b, 1.0 - a - b)
        })
        .collect();
    CyclicSystem::new(pairs).expect("adjacent plus-probabilities sum to at most 1")
}

/// Three boxes opened two at a time, every opened pair anticorrelated with
/// uniform marginals.
pub fn specker() -> GenericSystem {
    let anti = vec![0.0, 0.5, 0.5, 0.0];
    let bunch = |a: &str, b: &str| Bunch {
        vars: vec![a.into(), b.into()],
        pmf: anti.clone(),
    };
    GenericSystem::new(
        vec![
            bunch("A_X", "B_X"),
            bunch("B_Y", "C_Y"),
            bunch("A_Z", "C_Z"),
        ],
        vec![
            ("A_X".into(), "A_Z".into()),
            ("B_X".into(), "B_Y".into()),
            ("C_Y".into(), "C_Z".into()),
        ],
    )
    .expect("valid by construction")
}

/// Every pair perfectly correlated with uniform marginals.
pub fn all_correlated(n: usize) -> Result<CyclicSystem, ScenarioError> {
    if n < 3 {
        return Err(ScenarioError::RankTooSmall(n));
    }
    Ok(CyclicSystem::new(vec![pair(0.5, 0.0, 0.0, 0.5); n]).expect("valid by construction"))
}

/// Pair pmf from a flat Dirichlet over the four outcomes.
pub fn random_pair(rng: &mut impl Rng) -> PairDistribution {
    let dirichlet = Dirichlet::new([1.0; 4]).expect("positive concentration");
    let [pp, pm, mp, mm] = dirichlet.sample(rng);
    pair(pp, pm, mp, mm)
}

/// Rank-n system with independent flat-Dirichlet pairs; generally not
/// consistently connected.
pub fn random_system(n: usize, rng: &mut impl Rng) -> CyclicSystem {
    CyclicSystem::new((0..n).map(|_| random_pair(rng)).collect())
        .expect("Dirichlet draws are valid")
}

/// Uniform draw of `<XY>` over its feasible range given `<X> = a`, `<Y> = b`.
fn random_product(a: f64, b: f64, rng: &mut impl Rng) -> f64 {
    let lo = -1.0 + (a + b).abs();
    let hi = 1.0 - (a - b).abs();
    lo + (hi - lo) * rng.random::<f64>()
}

fn realize(summary: &MarginalSummary) -> CyclicSystem {
    from_expectations(summary).expect("products drawn inside the feasible range")
}

/// Consistently connected rank-n system: a common scale `λ ~ U[0,1]`, then
/// `<V_i> = <W_i> = λ u_i` with `u_i ~ U[-1,1]`, then each product uniform
/// over its feasible range.
pub fn random_cc_system(n: usize, rng: &mut impl Rng) -> CyclicSystem {
    let scale: f64 = rng.random();
    let v: Vec<f64> = (0..n)
        .map(|_| scale * rng.random_range(-1.0..=1.0))
        .collect();
    let vw = (0..n)
        .map(|i| random_product(v[i], v[(i + 1) % n], rng))
        .collect();
    realize(&MarginalSummary {
        w: v.clone(),
        v,
        vw,
    })
}

/// Consistently connected rank-5 system with adjacent exclusion: `p_i`
/// uniform on `[0,1]`, redrawn until every adjacent sum is at most 1.
pub fn random_kcbs_exclusion(rng: &mut impl Rng) -> CyclicSystem {
    loop {
        let p: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
        if (0..5).all(|i| p[i] + p[(i + 1) % 5] <= 1.0) {
            return kcbs_exclusion(&p);
        }
    }
}

/// Rank-n system meeting the order-reduction premises: `<V_n W_1> = 1` and
/// `<V_n> = <W_n>`; remaining expectations random.
pub fn random_reducible(n: usize, rng: &mut impl Rng) -> CyclicSystem {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let shared = v[n - 1];
    w[0] = shared;
    w[n - 1] = shared;
    v[n - 1] = shared;
    let mut vw: Vec<f64> = (0..n - 1)
        .map(|i| random_product(v[i], w[i + 1], rng))
        .collect();
    vw.push(1.0);
    realize(&MarginalSummary { v, w, vw })
}

/// Couplings of every connection `(V_i, W_i)` with the system's marginals
/// and a random product expectation.
pub fn random_connections(sys: &CyclicSystem, rng: &mut impl Rng) -> Vec<PairDistribution> {
    let summary = sys.marginal_summary();
    (0..sys.n())
        .map(|i| {
            let (a, b) = (summary.v[i], summary.w[i]);
            let c = random_product(a, b, rng);
            PairDistribution::from_expectations(a, b, c).expect("product inside the feasible range")
        })
        .collect()
}

/// Two random two-variable bunches `(A, C)`, `(B, D)` joined by the single
/// connection `{A, B}`.
pub fn random_bunch_pair(rng: &mut impl Rng) -> GenericSystem {
    let mut pmf = || random_pair(rng).entries().to_vec();
    let first = Bunch {
        vars: vec!["A".into(), "C".into()],
        pmf: pmf(),
    };
    let second = Bunch {
        vars: vec!["B".into(), "D".into()],
        pmf: pmf(),
    };
    GenericSystem::new(vec![first, second], vec![("A".into(), "B".into())])
        .expect("Dirichlet draws are valid")
}

/// File contents for a named scenario. `n` defaults to 4 for
/// `all-correlated`; `random` needs both `n` and `seed`.
pub fn scenario_file(
    scenario: Scenario,
    n: Option<usize>,
    seed: Option<u64>,
) -> Result<SystemFile, ScenarioError> {
    Ok(match scenario {
        Scenario::PrBox => SystemFile::cyclic(&pr_box()),
        Scenario::Tsirelson => {
            let s = tsirelson_expectations();
            SystemFile::CyclicExpectations {
                n: 4,
                v: s.v,
                w: s.w,
                vw: s.vw,
                permutation: None,
            }
        }
        Scenario::KcbsQuantum => SystemFile::cyclic(&kcbs_quantum()),
        Scenario::Specker => SystemFile::generic(&specker()),
        Scenario::AllCorrelated => SystemFile::cyclic(&all_correlated(n.unwrap_or(4))?),
        Scenario::Random => {
            let (Some(n), Some(seed)) = (n, seed) else {
                return Err(ScenarioError::MissingRandomArgs);
            };
            if !RANDOM_RANKS.contains(&n) {
                return Err(ScenarioError::RankOutOfRange(n));
            }
            SystemFile::cyclic(&random_system(n, &mut rng(seed)))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclic::is_consistently_connected;

    #[test]
    fn fixed_scenarios_are_valid() {
        assert_eq!(pr_box().marginal_summary().vw, vec![1.0, 1.0, 1.0, -1.0]);
        assert_eq!(tsirelson().n(), 4);
        let kcbs = kcbs_quantum();
        assert!(is_consistently_connected(&kcbs.marginal_summary()));
        assert!(kcbs.pairs().iter().all(|p| p.pp == 0.0));
        assert!(specker().to_cyclic().is_some());
        assert!(all_correlated(2).is_err());
    }

    #[test]
    fn generators_respect_their_constraints() {
        let mut r = rng(11);
        for _ in 0..50 {
            assert!(is_consistently_connected(
                &random_cc_system(4, &mut r).marginal_summary()
            ));
            let k = random_kcbs_exclusion(&mut r);
            assert!(k.pairs().iter().all(|p| p.pp == 0.0));
            let red = random_reducible(5, &mut r).marginal_summary();
            assert!((red.vw[4] - 1.0).abs() < 1e-12);
            assert!((red.v[4] - red.w[4]).abs() < 1e-12);
            let sys = random_system(4, &mut r);
            let conns = random_connections(&sys, &mut r);
            let s = sys.marginal_summary();
            for (i, c) in conns.iter().enumerate() {
                assert!((c.first_mean() - s.v[i]).abs() < 1e-9);
                assert!((c.second_mean() - s.w[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn random_scenario_is_deterministic() {
        let a = scenario_file(Scenario::Random, Some(5), Some(7))
            .unwrap()
            .to_json();
        let b = scenario_file(Scenario::Random, Some(5), Some(7))
            .unwrap()
            .to_json();
        assert_eq!(a, b);
        assert_ne!(
            a,
            scenario_file(Scenario::Random, Some(5), Some(8))
                .unwrap()
                .to_json()
        );
        assert_eq!(
            scenario_file(Scenario::Random, Some(5), None),
            Err(ScenarioError::MissingRandomArgs)
        );
        assert_eq!(
            scenario_file(Scenario::Random, Some(13), Some(1)),
            Err(ScenarioError::RankOutOfRange(13))
        );
    }

    #[test]
    fn tsirelson_file_is_exact() {
        let json = scenario_file(Scenario::Tsirelson, None, None)
            .unwrap()
            .to_json();
        assert!(json.contains("0.7071067811865476"));
        assert!(json.contains("-0.7071067811865476"));
    }
}
