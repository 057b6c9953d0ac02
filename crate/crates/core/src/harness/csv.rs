//! CSV emission. Rows are written in (cell, trial) order by a single writer; floats use
//! Rust's shortest round-trip formatting.

use super::ExperimentResult;
use std::io::{self, Write};

pub const CSV_HEADER: &str = "algo,seed,trial,K,T,fraction_eq,final_eq";
pub const LONG_HEADER: &str = "trial,k,policy_index,in_eq";

/// Header plus one row per trial of every result, in order.
pub fn write_summary<W: Write>(w: &mut W, results: &[ExperimentResult]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in results {
        for t in &r.trials {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.algo.label(),
                r.master_seed,
                t.trial,
                r.k,
                r.t,
                t.fraction(),
                u8::from(t.final_in_eq())
            )?;
        }
    }
    Ok(())
}

/// Per-phase indicator stream of one result; `k` runs over `1..=K`.
pub fn write_long<W: Write>(w: &mut W, result: &ExperimentResult) -> io::Result<()> {
    writeln!(w, "{LONG_HEADER}")?;
    for t in &result.trials {
        for (k, (u, e)) in t.policy_indices.iter().zip(&t.in_eq).enumerate() {
            writeln!(w, "{},{},{},{}", t.trial, k + 1, u, u8::from(*e))?;
        }
    }
    Ok(())
}
