//! The `cbd` command line.
//!
//! Exit codes: 0 success, 1 input error, 2 numerical breakdown, 3 oracle
//! disagreement. `CBD_TOLERANCE` overrides the CNTX verdict threshold.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cyclic::{
    analyze, compatibility_lp, compatibility_with_threshold, AnalysisError, AnalysisOptions,
    AnalysisReport, Certificate, Compatibility, CriterionVerdict, Diagnostic, VERDICT_THRESHOLD,
};
use crate::generic::{analyze_generic, GenericReport};
use crate::io::{parse_connections, read_system, InputError, Loaded};
use crate::lp::LpStatus;
use crate::oracle::{self, OracleVerdict, MAX_ENUMERATION};
use crate::scenarios::{scenario_file, Scenario};
use crate::system::{CyclicSystem, PairDistribution, System};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_ORACLE: i32 = 3;

pub const TOLERANCE_VAR: &str = "CBD_TOLERANCE";

#[derive(Debug, Parser)]
#[command(
    name = "cbd",
    version,
    about = "Contextuality analysis of binary measurement systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze a system file.
    Analyze {
        file: PathBuf,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
        /// Skip the linear programs.
        #[arg(long)]
        no_lp: bool,
    },
    /// Print a bundled or random system file.
    Generate {
        scenario: ScenarioArg,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check whether connection couplings fit a cyclic system.
    Compat {
        system: PathBuf,
        connections: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioArg {
    PrBox,
    Tsirelson,
    KcbsQuantum,
    Specker,
    AllCorrelated,
    Random,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::PrBox => Scenario::PrBox,
            ScenarioArg::Tsirelson => Scenario::Tsirelson,
            ScenarioArg::KcbsQuantum => Scenario::KcbsQuantum,
            ScenarioArg::Specker => Scenario::Specker,
            ScenarioArg::AllCorrelated => Scenario::AllCorrelated,
            ScenarioArg::Random => Scenario::Random,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical breakdown: {m}"),
        }
    }
}

impl From<InputError> for CliError {
    fn from(e: InputError) -> Self {
        let violations = e.violations();
        if violations.is_empty() {
            CliError::Input(e.to_string())
        } else {
            let lines: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
            CliError::Input(format!("invalid system:\n{}", lines.join("\n")))
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<oracle::OracleError> for CliError {
    fn from(e: oracle::OracleError) -> Self {
        match e {
            oracle::OracleError::Analysis(a) => a.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

/// Threshold from `CBD_TOLERANCE`, or the default.
pub fn threshold_from_env() -> Result<f64, CliError> {
    match std::env::var(TOLERANCE_VAR) {
        Err(_) => Ok(VERDICT_THRESHOLD),
        Ok(raw) => match raw.trim().parse::<f64>() {
            Ok(t) if t.is_finite() && t >= 0.0 => Ok(t),
            _ => Err(CliError::Input(format!(
                "{TOLERANCE_VAR}={raw:?} is not a nonnegative number"
            ))),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub checks: usize,
    pub disagreements: Vec<OracleVerdict>,
    /// Why cross-validation was skipped, when it was.
    pub skipped: Option<String>,
}

impl OracleSummary {
    fn from_verdicts(verdicts: Vec<OracleVerdict>) -> Self {
        Self {
            checks: verdicts.len(),
            disagreements: verdicts.into_iter().filter(|v| !v.agreement).collect(),
            skipped: None,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        match (&self.skipped, &other.skipped) {
            (Some(_), None) => return other,
            (_, Some(_)) => return self,
            (None, None) => {}
        }
        self.checks += other.checks;
        self.disagreements.extend(other.disagreements);
        self
    }

    fn skipped(reason: impl Into<String>) -> Self {
        Self {
            checks: 0,
            disagreements: Vec::new(),
            skipped: Some(reason.into()),
        }
    }
}

/// Everything `analyze --json` prints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOutput {
    pub cyclic: Option<AnalysisReport>,
    pub generic: Option<GenericReport>,
    /// For generic files with cyclic structure: the variable names behind
    /// `(V_i, W_i)`.
    pub cyclic_names: Option<Vec<(String, String)>>,
    pub oracle: OracleSummary,
}

fn cyclic_part(
    sys: &CyclicSystem,
    options: AnalysisOptions,
) -> Result<(AnalysisReport, OracleSummary), CliError> {
    let report = analyze(sys, options)?;
    let summary = if sys.n() <= MAX_ENUMERATION {
        OracleSummary::from_verdicts(oracle::cross_validate_report(sys, &report)?)
    } else {
        OracleSummary::skipped(format!("rank {} too large to enumerate", sys.n()))
    };
    Ok((report, summary))
}

/// Builds the analysis output for a loaded system.
pub fn build_analysis(
    loaded: &Loaded,
    options: AnalysisOptions,
) -> Result<AnalyzeOutput, CliError> {
    match &loaded.system {
        System::Cyclic(sys) => {
            let (mut report, oracle) = cyclic_part(sys, options)?;
            report.relabeling = loaded.relabeling.clone();
            Ok(AnalyzeOutput {
                cyclic: Some(report),
                generic: None,
                cyclic_names: None,
                oracle,
            })
        }
        System::Generic(g) => {
            let generic = analyze_generic(g, options.threshold, options.run_lp)?;
            let (cyclic, names, oracle) = match g.to_cyclic() {
                Some((sys, names)) => {
                    let (report, oracle) = cyclic_part(&sys, options)?;
                    let oracle = oracle.merge(generic_oracle(g, &generic)?);
                    (Some(report), Some(names), oracle)
                }
                None => (None, None, generic_oracle(g, &generic)?),
            };
            Ok(AnalyzeOutput {
                cyclic,
                generic: Some(generic),
                cyclic_names: names,
                oracle,
            })
        }
    }
}

fn generic_oracle(
    g: &crate::system::GenericSystem,
    report: &GenericReport,
) -> Result<OracleSummary, CliError> {
    let system = System::Generic(g.clone());
    let mut verdicts = Vec::new();
    if let Some(cert) = &report.certificates.delta_min {
        let check = oracle::verify_coupling(&system, &cert.atoms(), None, false)?;
        verdicts.push(check.verdict);
    }
    if let Some(cert) = &report.certificates.maximal_coupling {
        if cert.status == LpStatus::Optimal {
            verdicts.push(oracle::verify_coupling(&system, &cert.atoms(), None, true)?.verdict);
        }
    }
    if verdicts.is_empty() {
        return Ok(OracleSummary::skipped("no LP certificates"));
    }
    Ok(OracleSummary::from_verdicts(verdicts))
}

/// Everything `compat --json` prints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatOutput {
    pub n: usize,
    pub compatibility: Compatibility,
    pub lp_feasible: Option<bool>,
    pub lp_skipped: Option<String>,
    pub certificate: Option<Certificate>,
    pub oracle: OracleSummary,
}

pub fn build_compat(
    sys: &CyclicSystem,
    connections: &[PairDistribution],
    threshold: f64,
) -> Result<CompatOutput, CliError> {
    let compat = compatibility_with_threshold(sys, connections, threshold)?;
    let mut out = CompatOutput {
        n: sys.n(),
        compatibility: compat,
        lp_feasible: None,
        lp_skipped: None,
        certificate: None,
        oracle: OracleSummary::skipped("LP not run"),
    };
    match compatibility_lp(sys, connections) {
        Ok(solution) => {
            let program = crate::coupling::build_cyclic_program(
                sys,
                crate::coupling::ProgramMode::FixConnections(connections.to_vec()),
            )
            .map_err(AnalysisError::from)?;
            let cert = Certificate::new(program.problem(), &solution);
            let system = System::Cyclic(sys.clone());
            let mut verdicts = vec![OracleVerdict::compare(
                "compatibility inequality vs LP",
                oracle::Claim::Flag(out.compatibility.compatible),
                oracle::Claim::Flag(solution.is_optimal()),
                0.0,
            )];
            if solution.is_optimal() {
                verdicts.push(
                    oracle::verify_coupling(&system, &solution.atoms, Some(connections), false)?
                        .verdict,
                );
            } else if let Some(ray) = &solution.ray {
                verdicts.push(oracle::verify_ray(&system, ray, connections)?);
            }
            out.lp_feasible = Some(solution.is_optimal());
            out.certificate = Some(cert);
            out.oracle = OracleSummary::from_verdicts(verdicts);
        }
        Err(e) if e.is_too_large() => out.lp_skipped = Some(e.to_string()),
        Err(e) => return Err(e.into()),
    }
    Ok(out)
}

/// `9`-decimal rendering with trailing zeros removed.
fn short(x: f64) -> String {
    let s = format!("{x:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn fixed(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.9}")
    }
}

fn verdict_word(noncontextual: bool) -> &'static str {
    if noncontextual {
        "noncontextual"
    } else {
        "contextual"
    }
}

fn criterion_line(name: &str, v: &CriterionVerdict) -> String {
    format!(
        "  {name:<7} {} (margin {})",
        verdict_word(v.noncontextual),
        fixed(v.margin)
    )
}

fn certificate_line(name: &str, cert: &Certificate) -> String {
    let status = match cert.status {
        LpStatus::Optimal => "optimal",
        LpStatus::Infeasible => "infeasible",
    };
    let check = if cert.verified {
        "verified"
    } else {
        "NOT verified"
    };
    let perturbed = if cert.perturbed { ", perturbed" } else { "" };
    format!(
        "  {name}: {status}, {} pivots, {check}{perturbed}",
        cert.pivots
    )
}

fn render_cyclic(r: &AnalysisReport, out: &mut String) {
    use std::fmt::Write as _;
    let _ = writeln!(out, "rank-{} cyclic system", r.n);
    if let Some(relabel) = r.relabeling.as_ref().filter(|x| !x.is_identity()) {
        let _ = writeln!(
            out,
            "relabeled to successor pairing: old index i -> {:?}",
            relabel.old_to_new
        );
    }
    let _ = writeln!(out, "Delta0 = {}", fixed(r.delta0));
    let _ = writeln!(
        out,
        "Delta_min (closed form) = {}",
        fixed(r.delta_min_closed)
    );
    match (r.delta_min_lp, &r.lp_skipped) {
        (Some(v), _) => {
            let _ = writeln!(out, "Delta_min (LP) = {}", fixed(v));
        }
        (None, Some(reason)) => {
            let _ = writeln!(out, "Delta_min (LP) skipped: {reason}");
        }
        (None, None) => {}
    }
    let _ = writeln!(
        out,
        "CNTX = {}, {}",
        fixed(r.cntx),
        verdict_word(!r.contextual)
    );
    if r.conjectural {
        let check = if r.delta_min_lp.is_some() {
            "checked against the LP value above"
        } else {
            "unchecked since the LP was skipped"
        };
        let _ = writeln!(
            out,
            "note: closed form is conjectural at rank >= 6, {check}"
        );
    }
    let _ = writeln!(out, "criteria:");
    let _ = writeln!(out, "{}", criterion_line("closed", &r.criteria.closed));
    let _ = writeln!(out, "{}", criterion_line("master", &r.criteria.master));
    if let Some(lp) = &r.criteria.lp {
        let _ = writeln!(out, "{}", criterion_line("lp", lp));
    }
    let c = &r.criteria.compatibility;
    let _ = writeln!(
        out,
        "  maximal connections: s_odd = {} vs bound {} : {}",
        short(c.s_odd),
        short(c.bound),
        if c.compatible {
            "compatible"
        } else {
            "incompatible"
        }
    );
    let _ = writeln!(out, "special cases:");
    let sc = &r.special_cases;
    match &sc.kcbs {
        Diagnostic::Applicable(d) => {
            let _ = writeln!(
                out,
                "  KCBS: sum p_i = {} vs 2 : {}",
                fixed(d.sum),
                verdict_word(d.noncontextual)
            );
        }
        Diagnostic::Skipped { reason } => {
            let _ = writeln!(out, "  KCBS: skipped ({reason})");
        }
    }
    match &sc.chsh {
        Diagnostic::Applicable(d) => {
            let _ = writeln!(
                out,
                "  CHSH: max |combination| = {} vs 2 : {}",
                fixed(d.max_abs),
                verdict_word(d.noncontextual)
            );
        }
        Diagnostic::Skipped { reason } => {
            let _ = writeln!(out, "  CHSH: skipped ({reason})");
        }
    }
    match &sc.suppes_zanotti {
        Diagnostic::Applicable(d) => {
            let _ = writeln!(
                out,
                "  Suppes-Zanotti: sum = {} in [{}, {}] : {}",
                fixed(d.sum),
                short(d.lower),
                short(d.upper),
                verdict_word(d.noncontextual)
            );
        }
        Diagnostic::Skipped { reason } => {
            let _ = writeln!(out, "  Suppes-Zanotti: skipped ({reason})");
        }
    }
    if r.certificates.delta_min.is_some() || r.certificates.maximal_coupling.is_some() {
        let _ = writeln!(out, "certificates:");
        if let Some(c) = &r.certificates.delta_min {
            let _ = writeln!(out, "{}", certificate_line("Delta_min program", c));
        }
        if let Some(c) = &r.certificates.maximal_coupling {
            let _ = writeln!(out, "{}", certificate_line("maximal-connection program", c));
        }
    }
}

fn render_generic(r: &GenericReport, out: &mut String) {
    use std::fmt::Write as _;
    let _ = writeln!(
        out,
        "generic system: {} variables, {} connections",
        r.variables, r.connections
    );
    let _ = writeln!(out, "Delta0 = {}", fixed(r.delta0));
    if let Some(reason) = &r.lp_skipped {
        let _ = writeln!(out, "LP skipped: {reason}");
    }
    if let (Some(d), Some(c), Some(ctx)) = (r.delta_min_lp, r.cntx_lp, r.contextual) {
        let _ = writeln!(out, "Delta_min (LP) = {}", fixed(d));
        let _ = writeln!(out, "CNTX = {}, {}", fixed(c), verdict_word(!ctx));
    }
    if let Some(nc) = r.noncontextual_lp {
        let _ = writeln!(
            out,
            "maximal-connection coupling: {}",
            if nc { "exists" } else { "does not exist" }
        );
    }
    if let Some(c) = &r.certificates.maximal_coupling {
        let _ = writeln!(out, "{}", certificate_line("maximal-connection program", c));
    }
}

fn render_oracle(o: &OracleSummary, out: &mut String) {
    use std::fmt::Write as _;
    match &o.skipped {
        Some(reason) => {
            let _ = writeln!(out, "oracle: skipped ({reason})");
        }
        None => {
            let _ = writeln!(
                out,
                "oracle: {} checks, {} disagreements",
                o.checks,
                o.disagreements.len()
            );
            for d in &o.disagreements {
                let _ = writeln!(
                    out,
                    "  DISAGREE {}: discrepancy {:e}",
                    d.subject, d.discrepancy
                );
            }
        }
    }
}

pub fn render_analysis(output: &AnalyzeOutput) -> String {
    let mut out = String::new();
    if let Some(g) = &output.generic {
        render_generic(g, &mut out);
    }
    if let Some(names) = &output.cyclic_names {
        out.push_str("cyclic structure: ");
        let pairs: Vec<String> = names.iter().map(|(v, w)| format!("({v}, {w})")).collect();
        out.push_str(&pairs.join(", "));
        out.push('\n');
    }
    if let Some(c) = &output.cyclic {
        render_cyclic(c, &mut out);
    }
    render_oracle(&output.oracle, &mut out);
    out
}

pub fn render_compat(output: &CompatOutput) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let c = &output.compatibility;
    let (relation, word) = if c.compatible {
        ("<=", "compatible")
    } else {
        (">", "incompatible")
    };
    let _ = writeln!(
        out,
        "s_odd = {} {relation} {} : {word}",
        short(c.s_odd),
        short(c.bound)
    );
    let _ = writeln!(
        out,
        "split: s_odd(vw) + s_even(c) = {}, s_even(vw) + s_odd(c) = {}",
        fixed(c.split[0]),
        fixed(c.split[1])
    );
    match (output.lp_feasible, &output.lp_skipped) {
        (Some(f), _) => {
            let _ = writeln!(
                out,
                "LP cross-check: {}",
                if f { "feasible" } else { "infeasible" }
            );
        }
        (None, Some(reason)) => {
            let _ = writeln!(out, "LP cross-check skipped: {reason}");
        }
        (None, None) => {}
    }
    render_oracle(&output.oracle, &mut out);
    out
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports always serialize")
}

fn cyclic_of(loaded: Loaded, path: &Path) -> Result<CyclicSystem, CliError> {
    match loaded.system {
        System::Cyclic(c) => Ok(c),
        System::Generic(g) => g
            .to_cyclic()
            .map(|(c, _)| c)
            .ok_or_else(|| CliError::Input(format!("{} is not a cyclic system", path.display()))),
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    let io_error = |e: std::io::Error| CliError::Input(format!("cannot write output: {e}"));
    match command {
        Command::Analyze { file, json, no_lp } => {
            let options = AnalysisOptions {
                threshold: threshold_from_env()?,
                run_lp: !no_lp,
            };
            let loaded = read_system(&file)?;
            let output = build_analysis(&loaded, options)?;
            let text = if json {
                to_json(&output) + "\n"
            } else {
                render_analysis(&output)
            };
            out.write_all(text.as_bytes()).map_err(io_error)?;
            Ok(if output.oracle.disagreements.is_empty() {
                EXIT_OK
            } else {
                EXIT_ORACLE
            })
        }
        Command::Generate { scenario, n, seed } => {
            let file = scenario_file(scenario.into(), n, seed)
                .map_err(|e| CliError::Input(e.to_string()))?;
            writeln!(out, "{}", file.to_json()).map_err(io_error)?;
            Ok(EXIT_OK)
        }
        Command::Compat {
            system,
            connections,
            json,
        } => {
            let threshold = threshold_from_env()?;
            let sys = cyclic_of(read_system(&system)?, &system)?;
            let text = std::fs::read_to_string(&connections).map_err(|e| {
                CliError::Input(format!("cannot read {}: {e}", connections.display()))
            })?;
            let pmfs = parse_connections(&text, &sys)?;
            let output = build_compat(&sys, &pmfs, threshold)?;
            let text = if json {
                to_json(&output) + "\n"
            } else {
                render_compat(&output)
            };
            out.write_all(text.as_bytes()).map_err(io_error)?;
            Ok(if output.oracle.disagreements.is_empty() {
                EXIT_OK
            } else {
                EXIT_ORACLE
            })
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(rendered.as_bytes());
            } else {
                let _ = out.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formats() {
        assert_eq!(short(6.0), "6");
        assert_eq!(short(2.5), "2.5");
        assert_eq!(short(-0.0000000001), "0");
        assert_eq!(fixed(1.0), "1.000000000");
        assert_eq!(fixed(0.0), "0");
    }

    #[test]
    fn bad_flags_exit_one() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(
            run(["cbd", "generate", "nope"], &mut out, &mut err),
            EXIT_INPUT
        );
        assert_eq!(
            run(
                ["cbd", "generate", "random", "--n", "5"],
                &mut out,
                &mut err
            ),
            EXIT_INPUT
        );
        assert_eq!(run(["cbd", "--help"], &mut out, &mut err), EXIT_OK);
    }
}
