//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers or strings and returns a JSON string; the
//! logic lives in [`api`] so it can be tested natively.

use wasm_bindgen::prelude::*;

pub mod api {
    use serde::Serialize;
    use vbroadcast_core::choi::{choi_optimal_2broadcast, output_label};
    use vbroadcast_core::cost::{bounds_n, gamma2_analytic, sweep, SweepOptions, SweepRow};
    use vbroadcast_core::linalg::max_entangled;
    use vbroadcast_core::qpd::{exact_expectation, hoeffding_rounds, EstimationOptions, Estimator, Observable};
    use vbroadcast_core::sdp::{build_primal_capped, solve, SolveOptions, SolveStatus};
    use vbroadcast_core::{SizeCap, SystemLayout};

    /// Largest operator side the page may ask the solver for.
    pub const DEMO_CAP: SizeCap = SizeCap(256);
    pub const MAX_ROUNDS: usize = 200_000;
    const MAX_POINTS: usize = 400;

    #[derive(Debug, Serialize)]
    pub struct CurvePoint {
        pub d: usize,
        pub gamma: f64,
        pub log2_gamma: f64,
    }

    /// Two-output cost for `d = 2..=d_max`.
    pub fn cost_curve(d_max: usize) -> Result<Vec<CurvePoint>, String> {
        if !(2..=1000).contains(&d_max) {
            return Err(format!("d_max must lie in 2..=1000, got {d_max}"));
        }
        (2..=d_max)
            .map(|d| {
                let r = gamma2_analytic(d).map_err(|e| e.to_string())?;
                Ok(CurvePoint { d, gamma: r.gamma_linear, log2_gamma: r.gamma_log })
            })
            .collect()
    }

    /// Bounds for `n = 2..=n_max`, with SDP values where the program fits [`DEMO_CAP`].
    pub fn bounds_table(d: usize, n_max: usize, sdp_up_to: usize) -> Result<Vec<SweepRow>, String> {
        if d < 2 || !(2..=64).contains(&n_max) {
            return Err(format!("need d >= 2 and 2 <= n_max <= 64, got d={d}, n_max={n_max}"));
        }
        let opts = SweepOptions { solve: SolveOptions::default(), sdp_up_to: Some(sdp_up_to), cap: DEMO_CAP };
        sweep(d, 2, n_max, &opts).map_err(|e| e.to_string())
    }

    #[derive(Debug, Serialize)]
    pub struct SolveSummary {
        pub d: usize,
        pub n: usize,
        pub gamma: f64,
        pub log2_gamma: f64,
        pub lower: f64,
        pub upper: f64,
        pub analytic: Option<f64>,
        pub iterations: usize,
        pub relative_gap: f64,
        pub optimal: bool,
    }

    pub fn solve_cost(d: usize, n: usize) -> Result<SolveSummary, String> {
        let (lower, upper) = bounds_n(d, n).map_err(|e| e.to_string())?;
        let problem = build_primal_capped(d, n, DEMO_CAP).map_err(|e| e.to_string())?;
        let s = solve(&problem, &SolveOptions::default()).map_err(|e| e.to_string())?;
        let analytic = if n == 2 { gamma2_analytic(d).ok().map(|r| r.gamma_linear) } else { None };
        Ok(SolveSummary {
            d,
            n,
            gamma: s.primal_objective,
            log2_gamma: s.primal_objective.log2(),
            lower,
            upper,
            analytic,
            iterations: s.iterations,
            relative_gap: s.relative_gap,
            optimal: s.status == SolveStatus::Optimal,
        })
    }

    #[derive(Debug, Serialize)]
    pub struct Convergence {
        pub gamma: f64,
        pub exact: f64,
        pub estimate: f64,
        /// Rounds needed for accuracy 0.05 at confidence 95%.
        pub hoeffding_rounds: usize,
        /// `(m, running mean, Hoeffding half-width at 95%)`.
        pub series: Vec<(usize, f64, f64)>,
    }

    /// Running estimate for the Bell state under the optimal two-output
    /// decomposition at `d = 2`, measuring the Pauli `word` on `A Bj`.
    pub fn estimator_convergence(word: &str, j: usize, rounds: usize, seed: u64) -> Result<Convergence, String> {
        if !(1..=MAX_ROUNDS).contains(&rounds) {
            return Err(format!("rounds must lie in 1..={MAX_ROUNDS}, got {rounds}"));
        }
        if !(1..=2).contains(&j) {
            return Err(format!("j must be 1 or 2, got {j}"));
        }
        let word = word.trim().to_ascii_uppercase();
        let err = |e: vbroadcast_core::Error| e.to_string();
        let decomp = choi_optimal_2broadcast(2).map_err(err)?;
        let rho = max_entangled(2).scale(0.5);
        let layout = SystemLayout::new([("A", 2), ("B", 2)]).map_err(err)?;
        let obs = Observable::pauli(&word, &["A", &output_label(j)]).map_err(err)?;
        let est = Estimator::new(&rho, &layout, &decomp, &obs, j).map_err(err)?;
        let run = est
            .run(rounds, seed, &EstimationOptions { record_trace: true, ..Default::default() })
            .map_err(err)?;
        let gamma = run.gamma;
        let width = |m: usize| gamma * (2.0 * (2.0f64 / 0.05).ln() / m as f64).sqrt();
        let stride = rounds.div_ceil(MAX_POINTS);
        let mut series = Vec::with_capacity(MAX_POINTS + 1);
        let mut sum = 0.0;
        for (i, r) in run.records.unwrap_or_default().iter().enumerate() {
            sum += gamma * r.sign as f64 * r.outcome_lambda;
            let m = i + 1;
            if m % stride == 0 || m == rounds {
                series.push((m, sum / m as f64, width(m)));
            }
        }
        Ok(Convergence {
            gamma,
            exact: exact_expectation(&rho, &layout, &decomp, &obs, j).map_err(err)?,
            estimate: run.estimate,
            hoeffding_rounds: hoeffding_rounds(gamma, 0.05, 0.05).map_err(err)?,
            series,
        })
    }
}

fn to_js<T: serde::Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map(|v| serde_json::to_string(&v).expect("json")).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn cost_curve(d_max: usize) -> Result<String, JsError> {
    to_js(api::cost_curve(d_max))
}

#[wasm_bindgen]
pub fn bounds_table(d: usize, n_max: usize, sdp_up_to: usize) -> Result<String, JsError> {
    to_js(api::bounds_table(d, n_max, sdp_up_to))
}

#[wasm_bindgen]
pub fn solve_cost(d: usize, n: usize) -> Result<String, JsError> {
    to_js(api::solve_cost(d, n))
}

#[wasm_bindgen]
pub fn estimator_convergence(word: &str, j: usize, rounds: usize, seed: u64) -> Result<String, JsError> {
    to_js(api::estimator_convergence(word, j, rounds, seed))
}

#[cfg(test)]
mod tests {
    use super::api::*;

    #[test]
    fn curve_rises_toward_three() {
        let c = cost_curve(50).unwrap();
        assert_eq!(c.len(), 49);
        assert!((c[0].gamma - 5.0 / 3.0).abs() < 1e-15);
        assert!(c.windows(2).all(|w| w[0].gamma < w[1].gamma));
        assert!(c.last().unwrap().gamma < 3.0);
        assert!(cost_curve(1).is_err());
    }

    #[test]
    fn table_respects_demo_cap() {
        let rows = bounds_table(2, 8, 8).unwrap();
        assert_eq!(rows.len(), 7);
        // 2^(n+1) <= 256 up to n = 7
        assert!(rows.iter().all(|r| r.sdp_linear.is_some() == (r.n <= 7)));
        for r in rows.iter().filter(|r| r.n <= 4) {
            assert!((r.sdp_linear.unwrap() - r.lower_linear).abs() < 1e-4);
        }
    }

    #[test]
    fn solves_small_program() {
        let s = solve_cost(3, 2).unwrap();
        assert!(s.optimal);
        assert!((s.gamma - 2.0).abs() < 1e-6);
        assert_eq!(s.analytic, Some(2.0));
        assert!(solve_cost(5, 3).is_err());
    }

    #[test]
    fn convergence_series() {
        let c = estimator_convergence("zz", 2, 10_000, 3).unwrap();
        assert!(c.series.len() <= 401);
        let last = c.series.last().unwrap();
        assert_eq!(last.0, 10_000);
        assert_eq!(last.1, c.estimate);
        assert!((c.exact - 1.0).abs() < 1e-12);
        assert_eq!(c.hoeffding_rounds, 8198);
        assert!(estimator_convergence("ZZ", 3, 10, 0).is_err());
        assert!(estimator_convergence("Q", 1, 10, 0).is_err());
    }
}
