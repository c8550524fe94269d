//! Contextuality-by-Default analysis of binary measurement systems.
//!
//! A cyclic system of rank n pairs binary variables `V_i` and `W_{i+1}` in
//! each of n contexts, with `V_i` and `W_i` measuring the same property in
//! different contexts. [`cyclic::analyze`] computes the mismatch forced by
//! the marginals (`Δ₀`), the least achievable mismatch over all couplings
//! (`Δ_min`, in closed form and by LP) and their difference `CNTX`.

pub mod cli;
pub mod coupling;
pub mod cyclic;
pub mod generic;
pub mod io;
pub mod lp;
pub mod oracle;
pub mod scenarios;
pub mod signed_sums;
pub mod system;

pub use cyclic::{analyze, AnalysisOptions, AnalysisReport};
pub use system::{CyclicSystem, GenericSystem, MarginalSummary, PairDistribution, System};
