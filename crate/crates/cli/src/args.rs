use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Simulation costs, certificates and sampling for virtual broadcasting maps.
#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[command(name = "vbroadcast", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct Global {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Human, global = true)]
    pub output: Format,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output_path: Option<PathBuf>,

    /// Print the parsed configuration as JSON and exit.
    #[arg(long, global = true)]
    pub dry_run: bool,

    /// Largest operator side d^(n+1); defaults to $VBROADCAST_SIZE_CAP or 4096.
    #[arg(long, global = true)]
    pub size_cap: Option<usize>,

    #[command(flatten)]
    pub tol: Tolerances,
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct Tolerances {
    /// Solver primal and dual feasibility tolerance.
    #[arg(long, default_value_t = 1e-8, global = true)]
    pub feas_tol: f64,

    /// Solver relative gap tolerance.
    #[arg(long, default_value_t = 1e-7, global = true)]
    pub gap_tol: f64,

    /// Solver iteration limit.
    #[arg(long, default_value_t = 200, global = true)]
    pub max_iter: usize,

    /// Feasibility tolerance of certificate and channel checks.
    #[arg(long, default_value_t = 1e-9, global = true)]
    pub cert_tol: f64,

    /// Largest accepted primal-dual gap of a certificate.
    #[arg(long, default_value_t = 1e-10, global = true)]
    pub cert_gap_tol: f64,

    /// Largest accepted deviation of a Choi marginal from the maximally entangled operator.
    #[arg(long, default_value_t = 1e-10, global = true)]
    pub universal_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Human,
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Optimal simulation cost of universal n-broadcasting.
    Cost(CostArgs),
    /// Closed-form lower and upper bounds on the cost.
    Bounds(Dims),
    /// Check the analytic primal and dual certificates.
    Certify(Dims),
    /// Check a protocol's Choi operator.
    Verify(VerifyArgs),
    /// Bounds and SDP values over a range of output counts.
    Sweep(SweepArgs),
    /// Run the sampling estimator.
    Simulate(SimulateArgs),
    /// Emit the primal or dual program as a JSON document.
    DumpSdp(DumpArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Cost(_) => "cost",
            Command::Bounds(_) => "bounds",
            Command::Certify(_) => "certify",
            Command::Verify(_) => "verify",
            Command::Sweep(_) => "sweep",
            Command::Simulate(_) => "simulate",
            Command::DumpSdp(_) => "dump-sdp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct Dims {
    /// Local dimension of B.
    #[arg(long)]
    pub d: usize,
    /// Number of outputs.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Analytic,
    Sdp,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct CostArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub dims: Dims,
    /// Defaults to `both` for n = 2 and `sdp` otherwise.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Warmup,
    Universal,
    Optimal2,
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub dims: Dims,
    #[arg(long, value_enum)]
    pub protocol: Protocol,
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub d: usize,
    /// Inclusive range `a:b` of output counts.
    #[arg(long, value_parser = parse_range)]
    pub n: (usize, usize),
    /// Solve the program for n up to this value; larger n are bounds-only.
    #[arg(long)]
    pub sdp_up_to: Option<usize>,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got `{s}`"))?;
    let a = a.trim().parse::<usize>().map_err(|e| format!("bad start `{a}`: {e}"))?;
    let b = b.trim().parse::<usize>().map_err(|e| format!("bad end `{b}`: {e}"))?;
    if a < 2 || a > b {
        return Err(format!("need 2 <= a <= b, got {a}:{b}"));
    }
    Ok((a, b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "seed")]
pub enum StateSpec {
    Bell,
    Random(u64),
}

fn parse_state(s: &str) -> Result<StateSpec, String> {
    match s {
        "bell" => Ok(StateSpec::Bell),
        _ => match s.strip_prefix("random:") {
            Some(seed) => seed.parse().map(StateSpec::Random).map_err(|e| format!("bad seed `{seed}`: {e}")),
            None => Err(format!("expected `bell` or `random:<seed>`, got `{s}`")),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub dims: Dims,
    /// Output whose marginal with A is measured.
    #[arg(long, default_value_t = 1)]
    pub j: usize,
    /// `bell` or `random:<seed>`.
    #[arg(long, value_parser = parse_state, default_value = "bell")]
    pub state: StateSpec,
    /// Pauli word over {I,X,Y,Z} (d = 2) or a path to a JSON Hermitian matrix on A Bj.
    #[arg(long)]
    pub obs: String,
    /// Target accuracy of the estimate.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Allowed failure probability.
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// Override the Hoeffding round count.
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the per-round trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Primal,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Args, Serialize, Deserialize)]
pub struct DumpArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub dims: Dims,
    #[arg(long, value_enum, default_value_t = Kind::Primal)]
    pub kind: Kind,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_states() {
        assert_eq!(parse_range("2:5"), Ok((2, 5)));
        assert!(parse_range("5:2").is_err());
        assert!(parse_range("1:3").is_err());
        assert!(parse_range("3").is_err());
        assert_eq!(parse_state("bell"), Ok(StateSpec::Bell));
        assert_eq!(parse_state("random:42"), Ok(StateSpec::Random(42)));
        assert!(parse_state("random:x").is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cli = Cli::try_parse_from([
            "vbroadcast", "simulate", "--d", "2", "--j", "2", "--obs", "ZZ", "--state", "random:3", "--seed", "7",
            "--output", "json", "--feas-tol", "1e-9",
        ])
        .unwrap();
        let text = serde_json::to_string(&cli).unwrap();
        let back: Cli = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cli);
    }
}
