//! Bit-stable text formatting for CSV and JSON artifacts.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

/// Seventeen significant digits in scientific notation, e.g. `1.0000000000000000e0`.
/// The result is a valid JSON number and round-trips every finite `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Joins already-formatted fields into a CSV document with `\n` line endings.
pub fn csv_document(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Rows of real vectors, one per line.
pub fn vectors_csv(points: &[Vec<f64>]) -> String {
    let mut out = String::new();
    if let Some(first) = points.first() {
        let header: Vec<String> = (0..first.len()).map(|i| format!("w{i}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
    }
    for p in points {
        for (i, x) in p.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", fmt17(*x));
        }
        out.push('\n');
    }
    out
}

/// Lowercase hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
