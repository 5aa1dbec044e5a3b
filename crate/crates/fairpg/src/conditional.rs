//! Empirical conditional distribution of groups given the target class.
//!
//! Random group-label assignment draws from the empirical `P(A | Y = y)`
//! estimated on the group-labeled rows. Classes that never occur among those
//! rows have an empty conditional; callers fall back to the marginal
//! empirical `P(A)` over the same rows, the least-information substitute.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Empirical `P(A | Y)` with raw counts, over a fixed set of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalGroupTable {
    /// `table[y][a]`, each non-empty row a distribution over groups.
    table: Vec<Vec<f64>>,
    /// `counts[y][a]`, the cell counts behind `table`.
    counts: Vec<Vec<u64>>,
    /// Empirical `P(A)` over all contributing rows (the fallback).
    marginal: Vec<f64>,
}

impl ConditionalGroupTable {
    pub fn num_classes(&self) -> usize {
        self.table.len()
    }

    pub fn num_groups(&self) -> usize {
        self.marginal.len()
    }

    /// Probability row for class `y`; all zeros when the class is empty.
    pub fn row(&self, y: usize) -> &[f64] {
        &self.table[y]
    }

    pub fn counts(&self, y: usize) -> &[u64] {
        &self.counts[y]
    }

    /// True when no contributing row had target `y`.
    pub fn is_empty_row(&self, y: usize) -> bool {
        self.counts[y].iter().all(|&c| c == 0)
    }

    /// Empirical `P(A)` over the contributing rows.
    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }
}

/// Counts `P(A | Y)` over `rows`, which must all carry group labels.
pub fn empirical_conditional(ds: &Dataset, rows: &[usize]) -> Result<ConditionalGroupTable> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("empirical_conditional over no rows"));
    }
    let m = ds.num_classes();
    let n = ds.num_groups();
    let mut counts = vec![vec![0u64; n]; m];
    let mut group_totals = vec![0u64; n];
    for &row in rows {
        let a = ds.group(row).ok_or(Error::MissingGroup { row })?;
        counts[ds.target(row)][a] += 1;
        group_totals[a] += 1;
    }
    let mut table = vec![vec![0.0; n]; m];
    for y in 0..m {
        let total: u64 = counts[y].iter().sum();
        if total > 0 {
            for a in 0..n {
                table[y][a] = counts[y][a] as f64 / total as f64;
            }
        }
    }
    let total = rows.len() as f64;
    let marginal = group_totals.iter().map(|&c| c as f64 / total).collect();
    Ok(ConditionalGroupTable {
        table,
        counts,
        marginal,
    })
}

/// Draws a group from `table[y]`; errors when the class row is empty so the
/// caller can fall back (see [`sample_group_or_marginal`]).
pub fn sample_group(table: &ConditionalGroupTable, y: usize, rng: &mut SeededRng) -> Result<usize> {
    if table.is_empty_row(y) {
        return Err(Error::EmptyConditionalRow { class: y });
    }
    Ok(rng.categorical(table.row(y)))
}

/// Draws from `table[y]`, or from the marginal when the class row is empty.
pub fn sample_group_or_marginal(
    table: &ConditionalGroupTable,
    y: usize,
    rng: &mut SeededRng,
) -> usize {
    if table.is_empty_row(y) {
        rng.categorical(table.marginal())
    } else {
        rng.categorical(table.row(y))
    }
}
