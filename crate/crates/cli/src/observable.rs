use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;
use vbroadcast_core::choi::output_label;
use vbroadcast_core::qpd::Observable;
use vbroadcast_core::{ComplexMatrix, SystemLayout};

use crate::run::CliError;

/// Matrix entry in a JSON observable file: a real number or `[re, im]`.
#[derive(Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

/// Parses `source` as a two-letter Pauli word (qubits only) or a JSON file
/// holding a `d² x d²` matrix as a list of rows on `A Bj`.
pub fn parse_observable(source: &str, d: usize, j: usize) -> Result<Observable, CliError> {
    let target = output_label(j);
    let is_word = !source.is_empty() && source.chars().all(|c| "IXYZ".contains(c));
    if is_word && !Path::new(source).exists() {
        if d != 2 {
            return Err(CliError::usage(format!("Pauli words need d = 2, got d = {d}; pass a JSON matrix file")));
        }
        return Observable::pauli(source, &["A", &target]).map_err(CliError::from);
    }
    let text = std::fs::read_to_string(source)
        .map_err(|e| CliError::usage(format!("`{source}` is neither a Pauli word nor a readable file: {e}")))?;
    let rows: Vec<Vec<Entry>> =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{source}: expected a list of rows: {e}")))?;
    let side = d * d;
    if rows.len() != side || rows.iter().any(|r| r.len() != side) {
        return Err(CliError::usage(format!("{source}: observable on A {target} must be {side}x{side}")));
    }
    let data = rows
        .into_iter()
        .flatten()
        .map(|e| match e {
            Entry::Real(x) => Complex64::new(x, 0.0),
            Entry::Complex([re, im]) => Complex64::new(re, im),
        })
        .collect();
    let layout = SystemLayout::new([("A".to_string(), d), (target, d)])?;
    Ok(Observable::new(ComplexMatrix::new(side, side, data)?, layout)?)
}
