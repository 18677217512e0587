//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vbroadcast_core::choi::{
    apply_choi, choi_optimal_2broadcast, choi_universal_nbroadcast, output_label, verify_universal, ChoiOperator,
};
use vbroadcast_core::cost::{bounds_n, certificate_2broadcast, gamma2_analytic, CERTIFICATE_TOL};
use vbroadcast_core::linalg::{max_entangled, partial_trace, random_density};
use vbroadcast_core::qpd::{bias_check, hoeffding_rounds, EstimationOptions, Estimator, Observable};
use vbroadcast_core::sdp::{build_primal, solve, SolveOptions, SolveStatus};
use vbroadcast_core::{ComplexMatrix, Result, SystemLayout};

struct Outcome {
    pass: bool,
    detail: String,
}

fn criterion(id: usize, name: &str, f: impl FnOnce() -> Result<Outcome>) -> bool {
    let start = Instant::now();
    let outcome = f().unwrap_or_else(|e| Outcome { pass: false, detail: format!("error: {e}") });
    println!(
        "criterion {id} [{}] {name}: {} ({:.1}s)",
        if outcome.pass { "PASS" } else { "FAIL" },
        outcome.detail,
        start.elapsed().as_secs_f64()
    );
    outcome.pass
}

fn two_output_sdp() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut all_optimal = true;
    for d in 2..=5 {
        let s = solve(&build_primal(d, 2)?, &SolveOptions::default())?;
        let df = d as f64;
        worst = worst.max((s.primal_objective - (3.0 * df - 1.0) / (df + 1.0)).abs());
        all_optimal &= s.status == SolveStatus::Optimal;
    }
    Ok(Outcome { pass: all_optimal && worst <= 1e-5, detail: format!("d=2..5, max |sdp - (3d-1)/(d+1)| = {worst:.2e}") })
}

fn certificates() -> Result<Outcome> {
    let mut pass = true;
    let mut worst_gap: f64 = 0.0;
    for d in 2..=8 {
        let r = certificate_2broadcast(d)?;
        pass &= r.pass() && r.gap.abs() <= 1e-10;
        worst_gap = worst_gap.max(r.gap.abs());
    }
    Ok(Outcome { pass, detail: format!("d=2..8 at tol {CERTIFICATE_TOL:e}, max |gap| = {worst_gap:.2e}") })
}

fn n_output_bounds() -> Result<Outcome> {
    let mut pass = true;
    let mut worst: f64 = 0.0;
    let mut values = Vec::new();
    for n in 2..=5 {
        let (lo, up) = bounds_n(2, n)?;
        let s = solve(&build_primal(2, n)?, &SolveOptions::default())?;
        let v = s.primal_objective;
        pass &= s.status == SolveStatus::Optimal && v >= lo - 1e-5 && v <= up + 1e-5;
        worst = worst.max((v - lo).abs());
        values.push(format!("{v:.6}"));
    }
    pass &= worst <= 1e-4;
    Ok(Outcome { pass, detail: format!("d=2, n=2..5 values [{}], max |sdp - lower| = {worst:.2e}", values.join(", ")) })
}

/// Largest deviation of an `A Bj` marginal of the applied map from `rho`.
fn marginal_deviation(choi: &ChoiOperator, rho: &ComplexMatrix, layout: &SystemLayout) -> Result<f64> {
    let (out, out_layout) = apply_choi(choi, rho, layout)?;
    let mut worst: f64 = 0.0;
    for j in 1..=choi.outputs() {
        let m = partial_trace(&out, &out_layout, &["A", &output_label(j)])?;
        worst = worst.max(m.max_abs_diff(rho));
    }
    Ok(worst)
}

fn universality() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut pass = true;
    let (mut worst_choi, mut worst_state): (f64, f64) = (0.0, 0.0);
    let mut protocols = 0;
    for d in [2usize, 3] {
        for n in [2usize, 3, 4] {
            if d.pow(n as u32 + 1) > 256 {
                continue;
            }
            let mut chois = vec![choi_universal_nbroadcast(d, n)?];
            if n == 2 {
                chois.push(choi_optimal_2broadcast(d)?.signed_choi()?);
            }
            let layout = SystemLayout::new([("A", d), ("B", d)])?;
            for choi in &chois {
                protocols += 1;
                let report = verify_universal(choi, 1e-10)?;
                pass &= report.pass;
                worst_choi = worst_choi.max(report.max_deviation());
                for _ in 0..50 {
                    let rho = random_density(d * d, &mut rng);
                    let dev = marginal_deviation(choi, &rho, &layout)?;
                    pass &= dev <= 1e-9;
                    worst_state = worst_state.max(dev);
                }
            }
        }
    }
    Ok(Outcome {
        pass,
        detail: format!(
            "{protocols} protocols, max Choi marginal deviation {worst_choi:.2e}, max state marginal deviation {worst_state:.2e}"
        ),
    })
}

fn idempotency() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for d in 2..=6 {
        let dec = choi_optimal_2broadcast(d)?;
        let j1 = dec.choi1.matrix();
        let j2 = dec.choi2.matrix();
        worst = worst.max(j1.matmul(j1).max_abs_diff(j1));
        let df = d as f64;
        worst = worst.max(j2.matmul(j2).max_abs_diff(&j2.scale(1.0 / (df * df - 2.0))));
    }
    Ok(Outcome { pass: worst <= 1e-11, detail: format!("d=2..6, max deviation {worst:.2e}") })
}

fn estimator() -> Result<Outcome> {
    let decomp = choi_optimal_2broadcast(2)?;
    let rho = max_entangled(2).scale(0.5);
    let layout = SystemLayout::new([("A", 2), ("B", 2)])?;
    let rounds = hoeffding_rounds(decomp.gamma(), 0.05, 0.05)?;
    let mut pass = rounds == 8198;
    let mut parts = vec![format!("M = {rounds}")];
    for j in 1..=2 {
        let obs = Observable::pauli("ZZ", &["A", &output_label(j)])?;
        let est = Estimator::new(&rho, &layout, &decomp, &obs, j)?;
        let mut hits = 0;
        for seed in 0..200u64 {
            if (est.run(rounds, seed, &EstimationOptions::default())?.estimate - 1.0).abs() <= 0.05 {
                hits += 1;
            }
        }
        pass &= hits >= 190;
        let bias = bias_check(&rho, &layout, &decomp, &obs, j, 100, 2000, 10_000)?;
        pass &= bias.pass;
        parts.push(format!(
            "j={j}: {hits}/200 within 0.05, z = {:.2}",
            bias.z_score.unwrap_or(f64::NAN)
        ));
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

fn asymptotics() -> Result<Outcome> {
    let gammas = (2..=50).map(|d| Ok(gamma2_analytic(d)?.gamma_linear)).collect::<Result<Vec<f64>>>()?;
    let increasing = gammas.windows(2).all(|w| w[0] < w[1]);
    let tail = 3.0 - gammas.last().unwrap();
    Ok(Outcome {
        pass: increasing && tail <= 4.0 / 51.0 + 1e-12,
        detail: format!("strictly increasing over d=2..50: {increasing}, 3 - gamma(50) = {tail:.6}"),
    })
}

fn main() {
    let results = [
        criterion(1, "two-output cost from the SDP", two_output_sdp),
        criterion(2, "certificate optimality", certificates),
        criterion(3, "n-output bounds and lower-bound match", n_output_bounds),
        criterion(4, "universality", universality),
        criterion(5, "idempotency identities", idempotency),
        criterion(6, "estimator statistics", estimator),
        criterion(7, "asymptotic convergence", asymptotics),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
