use std::fmt::Write as _;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use vbroadcast_core::choi::{
    choi_optimal_2broadcast, choi_universal_nbroadcast_capped, choi_warmup_2broadcast, gamma_prime_decomposition,
    verify_cptp, verify_universal, CptpReport, HptpDecomposition, UniversalityReport,
};
use vbroadcast_core::cost::{
    bound_dual_point, bounds_n, certificate_2broadcast_with, certificate_nbroadcast_bounds_with, gamma2_analytic,
    optimal_cost_sdp, sweep, CostReport, SweepOptions, SweepRow,
};
use vbroadcast_core::linalg::{max_entangled, random_density};
use vbroadcast_core::qpd::{exact_expectation, hoeffding_rounds, EstimationOptions, Estimator, RoundRecord};
use vbroadcast_core::sdp::{build_dual_capped, build_primal_capped, primal_candidate, SolveOptions};
use vbroadcast_core::{Error, SizeCap, SystemLayout};

use crate::args::*;
use crate::observable::parse_observable;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 74;

/// Envelope schema tag of JSON reports.
pub const REPORT_SCHEMA: &str = "vbroadcast-cli/1";

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { code: EXIT_IO, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotConverged { .. }
            | Error::NumericalBreakdown { .. }
            | Error::BoundViolation { .. }
            | Error::EigenNoConvergence
            | Error::NotPositiveDefinite => EXIT_NOT_CONVERGED,
            _ => EXIT_USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

/// Result of a command in every supported format.
pub struct Report {
    pub result: Value,
    pub human: String,
    pub csv: Option<String>,
    /// `false` when a check ran and failed.
    pub pass: bool,
    /// Emit `result` without the envelope.
    pub bare_json: bool,
}

impl Report {
    fn new(result: impl Serialize, human: String, pass: bool) -> Self {
        Self { result: to_value(result), human, csv: None, pass, bare_json: false }
    }

    fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn csv_string<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

fn solve_options(tol: &Tolerances) -> SolveOptions {
    SolveOptions { feas_tol: tol.feas_tol, gap_tol: tol.gap_tol, max_iter: tol.max_iter }
}

fn size_cap(g: &Global) -> SizeCap {
    g.size_cap.map(SizeCap).unwrap_or_else(SizeCap::from_env)
}

fn check_dims(d: usize, n: usize) -> Result<(), CliError> {
    if d < 2 {
        return Err(CliError::usage(format!("d must be at least 2, got {d}")));
    }
    if n < 2 {
        return Err(CliError::usage(format!("n must be at least 2, got {n}")));
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Report, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Cost(a) => cost(a, g),
        Command::Bounds(a) => bounds(a),
        Command::Certify(a) => certify(a, g),
        Command::Verify(a) => verify(a, g),
        Command::Sweep(a) => sweep_cmd(a, g),
        Command::Simulate(a) => simulate(a, g),
        Command::DumpSdp(a) => dump(a, g),
    }
}

fn cost_line(label: &str, r: &CostReport) -> String {
    format!("{label:<9} gamma = {:.9}   log2 gamma = {:.9}\n", r.gamma_linear, r.gamma_log)
}

#[derive(Serialize)]
struct CostCsvRow<'a> {
    method: &'a str,
    d: usize,
    n: usize,
    gamma_linear: f64,
    gamma_log2: f64,
    lower_bound_linear: f64,
    upper_bound_linear: f64,
}

fn cost(a: &CostArgs, g: &Global) -> Result<Report, CliError> {
    let Dims { d, n } = a.dims;
    check_dims(d, n)?;
    let method = a.method.unwrap_or(if n == 2 { Method::Both } else { Method::Sdp });
    if method != Method::Sdp && n != 2 {
        return Err(CliError::usage(format!("the analytic cost is only available for n = 2, got n = {n}")));
    }
    let analytic = matches!(method, Method::Analytic | Method::Both).then(|| gamma2_analytic(d)).transpose()?;
    let sdp = matches!(method, Method::Sdp | Method::Both)
        .then(|| optimal_cost_sdp(d, n, &solve_options(&g.tol), size_cap(g)))
        .transpose()?;
    let delta = analytic.as_ref().zip(sdp.as_ref()).map(|(x, y)| (x.gamma_linear - y.gamma_linear).abs());

    let mut human = format!("d = {d}, n = {n}\n");
    let mut rows = Vec::new();
    for (label, r) in [("analytic", &analytic), ("sdp", &sdp)] {
        if let Some(r) = r {
            human += &cost_line(label, r);
            rows.push(CostCsvRow {
                method: label,
                d,
                n,
                gamma_linear: r.gamma_linear,
                gamma_log2: r.gamma_log,
                lower_bound_linear: r.lower_bound_linear,
                upper_bound_linear: r.upper_bound_linear,
            });
        }
    }
    if let Some(delta) = delta {
        let _ = writeln!(human, "agreement |analytic - sdp| = {delta:.3e}");
    }
    let r = analytic.as_ref().or(sdp.as_ref()).expect("at least one method ran");
    let _ = writeln!(human, "bounds    [{:.9}, {:.9}]", r.lower_bound_linear, r.upper_bound_linear);
    let result = json!({ "analytic": analytic, "sdp": sdp, "agreement_delta": delta });
    Ok(Report::new(result, human, true).with_csv(csv_string(&rows)))
}

#[derive(Serialize)]
struct BoundsRow {
    d: usize,
    n: usize,
    lower_linear: f64,
    upper_linear: f64,
    lower_log2: f64,
    upper_log2: f64,
}

fn bounds(a: &Dims) -> Result<Report, CliError> {
    check_dims(a.d, a.n)?;
    let (lo, up) = bounds_n(a.d, a.n)?;
    let row = BoundsRow { d: a.d, n: a.n, lower_linear: lo, upper_linear: up, lower_log2: lo.log2(), upper_log2: up.log2() };
    let human = format!(
        "d = {}, n = {}\nlower  gamma = {:.9}   log2 gamma = {:.9}\nupper  gamma = {:.9}   log2 gamma = {:.9}\n",
        a.d, a.n, lo, row.lower_log2, up, row.upper_log2
    );
    let csv = csv_string(std::slice::from_ref(&row));
    Ok(Report::new(row, human, true).with_csv(csv))
}

fn mark(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn certify(a: &Dims, g: &Global) -> Result<Report, CliError> {
    let Dims { d, n } = *a;
    check_dims(d, n)?;
    let tol = &g.tol;
    if n == 2 {
        let primal = primal_candidate(&choi_optimal_2broadcast(d)?);
        let r = certificate_2broadcast_with(d, &primal, &bound_dual_point(d, 2), tol.cert_tol)?;
        let gap_ok = r.gap.abs() <= tol.cert_gap_tol;
        let pass = r.pass() && gap_ok;
        let human = format!(
            "d = {d}, n = 2\nprimal {}  objective {:.12}  min eigenvalue {:.3e}\ndual   {}  objective {:.12}  min slack eigenvalue {:.3e}\ngap    {}  {:.3e}\nmax equality residual {:.3e}\n",
            mark(r.primal_pass),
            r.primal_obj,
            r.min_primal_eigenvalue,
            mark(r.dual_pass),
            r.dual_obj,
            r.min_dual_margin,
            mark(gap_ok),
            r.gap,
            r.max_equality_residual
        );
        let result = json!({ "two_output": r, "gap_within_tolerance": gap_ok, "pass": pass });
        return Ok(Report::new(result, human, pass));
    }
    let r = certificate_nbroadcast_bounds_with(d, n, size_cap(g), tol.cert_tol)?;
    let (lower, upper) = bounds_n(d, n)?;
    let lower_ok = (r.lower_obj - lower).abs() <= tol.cert_tol;
    let upper_ok = (r.upper_from_gamma_prime - upper).abs() <= tol.cert_tol;
    let pass = r.upper_pass && r.dual_lower_pass && lower_ok && upper_ok;
    let human = format!(
        "d = {d}, n = {n}\nupper  {}  gamma = {}  (M1 min eig {:.3e}, M2 min eig {:.3e})\nlower  {}  dual objective {:.12}  min slack eigenvalue {:.3e}\n",
        mark(r.upper_pass && upper_ok),
        r.upper_from_gamma_prime,
        r.m1.min_eigenvalue,
        r.m2.min_eigenvalue,
        mark(r.dual_lower_pass && lower_ok),
        r.lower_obj,
        r.min_dual_margin
    );
    let result = json!({ "bounds": r, "expected_lower": lower, "expected_upper": upper, "pass": pass });
    Ok(Report::new(result, human, pass))
}

#[derive(Serialize)]
struct ChannelCheck {
    name: &'static str,
    weight: f64,
    report: CptpReport,
}

fn channel_checks(dec: &HptpDecomposition, tol: f64) -> Result<Vec<ChannelCheck>, CliError> {
    Ok(vec![
        ChannelCheck { name: "N1", weight: dec.p1, report: verify_cptp(&dec.choi1, 1.0, tol)? },
        ChannelCheck { name: "N2", weight: dec.p2, report: verify_cptp(&dec.choi2, 1.0, tol)? },
    ])
}

fn verify(a: &VerifyArgs, g: &Global) -> Result<Report, CliError> {
    let Dims { d, n } = a.dims;
    check_dims(d, n)?;
    if matches!(a.protocol, Protocol::Warmup | Protocol::Optimal2) && n != 2 {
        return Err(CliError::usage(format!("protocol {:?} is defined for n = 2 only", a.protocol).to_lowercase()));
    }
    let cap = size_cap(g);
    let (universality, channels): (UniversalityReport, Vec<ChannelCheck>) = match a.protocol {
        Protocol::Warmup => (verify_universal(&choi_warmup_2broadcast(d)?, g.tol.universal_tol)?, vec![]),
        Protocol::Universal => {
            let choi = choi_universal_nbroadcast_capped(d, n, cap)?;
            let dec = gamma_prime_decomposition(d, n, cap)?;
            (verify_universal(&choi, g.tol.universal_tol)?, channel_checks(&dec, g.tol.cert_tol)?)
        }
        Protocol::Optimal2 => {
            let dec = choi_optimal_2broadcast(d)?;
            (verify_universal(&dec.signed_choi()?, g.tol.universal_tol)?, channel_checks(&dec, g.tol.cert_tol)?)
        }
    };
    let pass = universality.pass && channels.iter().all(|c| c.report.pass);
    let mut human = format!("d = {d}, n = {n}, protocol {:?}\n", a.protocol).to_lowercase();
    let _ = writeln!(human, "universality  {}  max marginal deviation {:.3e}", mark(universality.pass), universality.max_deviation());
    for c in &channels {
        let _ = writeln!(
            human,
            "{} (weight {:.6})  {}  min eigenvalue {:.3e}  trace deviation {:.3e}",
            c.name,
            c.weight,
            mark(c.report.pass),
            c.report.min_eigenvalue,
            c.report.max_tp_deviation
        );
    }
    let result = json!({ "universality": universality, "channels": channels, "pass": pass });
    Ok(Report::new(result, human, pass))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

fn sweep_cmd(a: &SweepArgs, g: &Global) -> Result<Report, CliError> {
    if a.d < 2 {
        return Err(CliError::usage(format!("d must be at least 2, got {}", a.d)));
    }
    let opts = SweepOptions { solve: solve_options(&g.tol), sdp_up_to: a.sdp_up_to, cap: size_cap(g) };
    let rows: Vec<SweepRow> = sweep(a.d, a.n.0, a.n.1, &opts)?;
    let mut human = format!("{:>4} {:>12} {:>12} {:>12} {:>10} {:>10} {:>10}\n", "n", "lower", "sdp", "upper", "lower_log2", "sdp_log2", "upper_log2");
    for r in &rows {
        let _ = writeln!(
            human,
            "{:>4} {:>12.6} {:>12} {:>12.6} {:>10.6} {:>10} {:>10.6}",
            r.n,
            r.lower_linear,
            fmt_opt(r.sdp_linear),
            r.upper_linear,
            r.lower_log2,
            fmt_opt(r.sdp_log2),
            r.upper_log2
        );
    }
    let csv = csv_string(&rows);
    Ok(Report::new(json!({ "rows": rows }), human, true).with_csv(csv))
}

fn simulate(a: &SimulateArgs, g: &Global) -> Result<Report, CliError> {
    let Dims { d, n } = a.dims;
    check_dims(d, n)?;
    if a.j == 0 || a.j > n {
        return Err(CliError::usage(format!("--j must lie in 1..={n}, got {}", a.j)));
    }
    let decomp = if n == 2 { choi_optimal_2broadcast(d)? } else { gamma_prime_decomposition(d, n, size_cap(g))? };
    let layout = SystemLayout::new([("A", d), ("B", d)])?;
    let rho = match a.state {
        StateSpec::Bell => max_entangled(d).scale(1.0 / d as f64),
        StateSpec::Random(seed) => random_density(d * d, &mut ChaCha8Rng::seed_from_u64(seed)),
    };
    let obs = parse_observable(&a.obs, d, a.j)?;
    obs.require_bounded()?;
    let rounds = match a.rounds {
        Some(m) => m,
        None => hoeffding_rounds(decomp.gamma(), a.delta, a.epsilon)?,
    };
    let est = Estimator::new(&rho, &layout, &decomp, &obs, a.j)?;
    let opts = EstimationOptions { record_trace: a.trace.is_some() || g.output == Format::Csv, ..Default::default() };
    let mut result = est.run(rounds, a.seed, &opts)?;
    let oracle = exact_expectation(&rho, &layout, &decomp, &obs, a.j)?;
    let records: Vec<RoundRecord> = result.records.take().unwrap_or_default();
    let csv = csv_string(&records);
    if let Some(path) = &a.trace {
        std::fs::write(path, &csv).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    }
    let error = (result.estimate - oracle).abs();
    let human = format!(
        "target A{}  rounds M = {}  gamma = {:.9}  seed {}\nestimate xi = {:.6}  (std of terms {:.4})\nexact      = {:.6}  |xi - exact| = {:.4}  delta = {}\n",
        result.target_subsystem, result.rounds, result.gamma, result.seed, result.estimate, result.empirical_std, oracle, error, a.delta
    );
    let body = json!({
        "sampling": result,
        "exact_expectation": oracle,
        "abs_error": error,
        "within_delta": error <= a.delta,
    });
    Ok(Report::new(body, human, true).with_csv(csv))
}

fn dump(a: &DumpArgs, g: &Global) -> Result<Report, CliError> {
    let Dims { d, n } = a.dims;
    check_dims(d, n)?;
    let problem = match a.kind {
        Kind::Primal => build_primal_capped(d, n, size_cap(g))?,
        Kind::Dual => build_dual_capped(d, n, size_cap(g))?,
    };
    let doc = problem.to_json();
    let human = serde_json::to_string_pretty(&doc).expect("json") + "\n";
    Ok(Report { result: doc, human, csv: None, pass: true, bare_json: true })
}
