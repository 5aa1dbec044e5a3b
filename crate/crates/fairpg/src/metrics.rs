//! Equalized-odds disparity metrics.
//!
//! Equalized odds asks that the prediction be conditionally independent of
//! the group given the true class. The degree of violation is summarized by
//! the per-class accuracy gap between groups, reduced either by the maximum
//! over classes ([`delta_m`]) or the average over classes ([`delta_a`]).
//! Both are reported in `[0, 1]`; presentation layers multiply by 100.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Anything that maps a feature vector to a class index.
pub trait Classifier {
    fn predict(&self, x: &[f64]) -> usize;
}

impl<F: Fn(&[f64]) -> usize> Classifier for F {
    fn predict(&self, x: &[f64]) -> usize {
        self(x)
    }
}

/// Per-(group, class) empirical accuracy with supporting counts.
///
/// `acc[a][y]` is the fraction of rows with group `a` and target `y` that the
/// classifier predicts as `y`. Cells with `support[a][y] == 0` are absent and
/// excluded from every gap computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupClassAccuracyTable {
    pub acc: Vec<Vec<f64>>,
    pub support: Vec<Vec<u64>>,
}

impl GroupClassAccuracyTable {
    pub fn num_groups(&self) -> usize {
        self.acc.len()
    }

    pub fn num_classes(&self) -> usize {
        self.acc.first().map_or(0, Vec::len)
    }

    pub fn is_supported(&self, a: usize, y: usize) -> bool {
        self.support[a][y] > 0
    }

    /// Largest pairwise accuracy gap among supported groups for class `y`;
    /// `None` when fewer than two groups are supported.
    fn class_gap(&self, y: usize) -> Option<f64> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut supported = 0;
        for a in 0..self.num_groups() {
            if self.is_supported(a, y) {
                supported += 1;
                lo = lo.min(self.acc[a][y]);
                hi = hi.max(self.acc[a][y]);
            }
        }
        (supported >= 2).then_some(hi - lo)
    }

    fn ensure_comparable(&self) -> Result<()> {
        if (0..self.num_classes()).any(|y| self.class_gap(y).is_some()) {
            Ok(())
        } else {
            Err(Error::NoComparableClass)
        }
    }
}

/// Counts per-(group, class) accuracy of `preds` over `rows`.
///
/// Every row must carry a group label and `preds` must be aligned with the
/// dataset (one prediction per dataset row).
pub fn accuracy_table(
    preds: &[usize],
    ds: &Dataset,
    rows: &[usize],
) -> Result<GroupClassAccuracyTable> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("accuracy_table over no rows"));
    }
    if preds.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            what: "predictions",
            expected: ds.len(),
            got: preds.len(),
        });
    }
    let n = ds.num_groups();
    let m = ds.num_classes();
    let mut hits = vec![vec![0u64; m]; n];
    let mut support = vec![vec![0u64; m]; n];
    for &row in rows {
        let a = ds.group(row).ok_or(Error::MissingGroup { row })?;
        let y = ds.target(row);
        support[a][y] += 1;
        if preds[row] == y {
            hits[a][y] += 1;
        }
    }
    let acc = (0..n)
        .map(|a| {
            (0..m)
                .map(|y| {
                    if support[a][y] > 0 {
                        hits[a][y] as f64 / support[a][y] as f64
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    Ok(GroupClassAccuracyTable { acc, support })
}

/// Maximum over classes of the worst pairwise accuracy gap between groups.
///
/// Classes with fewer than two supported groups contribute 0; errors when no
/// class has two supported groups to compare.
pub fn delta_m(table: &GroupClassAccuracyTable) -> Result<f64> {
    table.ensure_comparable()?;
    Ok((0..table.num_classes())
        .map(|y| table.class_gap(y).unwrap_or(0.0))
        .fold(0.0, f64::max))
}

/// Average over all classes of the worst pairwise gap; the divisor is the
/// total class count, with unsupported classes contributing 0.
pub fn delta_a(table: &GroupClassAccuracyTable) -> Result<f64> {
    table.ensure_comparable()?;
    let m = table.num_classes();
    let sum: f64 = (0..m).map(|y| table.class_gap(y).unwrap_or(0.0)).sum();
    Ok(sum / m as f64)
}

/// Accuracy plus both disparity reductions for one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub accuracy: f64,
    pub delta_m: f64,
    pub delta_a: f64,
    pub table: Vec<Vec<f64>>,
    pub support: Vec<Vec<u64>>,
    pub n_eval: usize,
}

/// Evaluates a classifier on fully group-labeled rows.
pub fn evaluate<C: Classifier>(f: &C, ds: &Dataset, rows: &[usize]) -> Result<FairnessReport> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("evaluate over no rows"));
    }
    let preds: Vec<usize> = (0..ds.len()).map(|row| f.predict(ds.feature(row))).collect();
    evaluate_preds(&preds, ds, rows)
}

/// As [`evaluate`], for precomputed predictions aligned with the dataset.
pub fn evaluate_preds(preds: &[usize], ds: &Dataset, rows: &[usize]) -> Result<FairnessReport> {
    let table = accuracy_table(preds, ds, rows)?;
    let dm = delta_m(&table)?;
    let da = delta_a(&table)?;
    let correct = rows.iter().filter(|&&r| preds[r] == ds.target(r)).count();
    Ok(FairnessReport {
        accuracy: correct as f64 / rows.len() as f64,
        delta_m: dm,
        delta_a: da,
        table: table.acc,
        support: table.support,
        n_eval: rows.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn ds_with(preds_targets_groups: &[(usize, usize, usize)], m: usize, n: usize) -> (Dataset, Vec<usize>) {
        let features = vec![vec![0.0]; preds_targets_groups.len()];
        let targets = preds_targets_groups.iter().map(|&(_, y, _)| y).collect();
        let groups = preds_targets_groups.iter().map(|&(_, _, a)| Some(a)).collect();
        let preds = preds_targets_groups.iter().map(|&(p, _, _)| p).collect();
        (
            Dataset::new(features, targets, groups, m, n).unwrap(),
            preds,
        )
    }

    /// Independent triple-loop reduction used as the test oracle.
    fn brute_force(table: &GroupClassAccuracyTable) -> (f64, f64) {
        let n = table.num_groups();
        let m = table.num_classes();
        let mut per_class = vec![0.0; m];
        for y in 0..m {
            let mut best = 0.0f64;
            let mut comparable = false;
            for a in 0..n {
                for b in 0..n {
                    if a != b && table.is_supported(a, y) && table.is_supported(b, y) {
                        comparable = true;
                        best = best.max((table.acc[a][y] - table.acc[b][y]).abs());
                    }
                }
            }
            per_class[y] = if comparable { best } else { 0.0 };
        }
        let max = per_class.iter().cloned().fold(0.0, f64::max);
        let avg = per_class.iter().sum::<f64>() / m as f64;
        (max, avg)
    }

    #[test]
    fn counting_matches_hand_example() {
        let (ds, preds) = ds_with(
            &[(0, 0, 0), (1, 0, 0), (0, 0, 1), (1, 1, 1)],
            2,
            2,
        );
        let table = accuracy_table(&preds, &ds, &ds.all_rows()).unwrap();
        assert_eq!(table.acc[0][0], 0.5);
        assert_eq!(table.acc[1][0], 1.0);
        assert_eq!(table.acc[1][1], 1.0);
        assert!(!table.is_supported(0, 1));
    }

    #[test]
    fn all_correct_is_all_ones() {
        let (ds, preds) = ds_with(&[(0, 0, 0), (1, 1, 0), (0, 0, 1), (1, 1, 1)], 2, 2);
        let table = accuracy_table(&preds, &ds, &ds.all_rows()).unwrap();
        for a in 0..2 {
            for y in 0..2 {
                assert_eq!(table.acc[a][y], 1.0);
            }
        }
    }

    #[test]
    fn random_preds_match_independent_recount() {
        // Balanced 2x2 set of 400 rows with seeded random predictions; the
        // oracle recount walks the rows a second time with separate tallies.
        let mut rng = SeededRng::new(31);
        let mut rows = Vec::new();
        for a in 0..2 {
            for y in 0..2 {
                for _ in 0..100 {
                    rows.push((rng.index(2), y, a));
                }
            }
        }
        let (ds, preds) = ds_with(&rows, 2, 2);
        let table = accuracy_table(&preds, &ds, &ds.all_rows()).unwrap();
        for a in 0..2 {
            for y in 0..2 {
                let mut hit = 0u64;
                let mut tot = 0u64;
                for (i, &(p, ty, ta)) in rows.iter().enumerate() {
                    let _ = i;
                    if ta == a && ty == y {
                        tot += 1;
                        if p == y {
                            hit += 1;
                        }
                    }
                }
                assert_eq!(table.support[a][y], tot);
                assert!((table.acc[a][y] - hit as f64 / tot as f64).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn delta_hand_example() {
        let table = GroupClassAccuracyTable {
            acc: vec![vec![0.9, 0.8], vec![0.7, 0.8]],
            support: vec![vec![1, 1], vec![1, 1]],
        };
        assert!((delta_m(&table).unwrap() - 0.2).abs() < 1e-15);
        assert!((delta_a(&table).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn identical_rows_are_fair() {
        let table = GroupClassAccuracyTable {
            acc: vec![vec![0.6, 0.4], vec![0.6, 0.4]],
            support: vec![vec![5, 5], vec![5, 5]],
        };
        assert_eq!(delta_m(&table).unwrap(), 0.0);
        assert_eq!(delta_a(&table).unwrap(), 0.0);
    }

    #[test]
    fn no_comparable_class_errors() {
        let table = GroupClassAccuracyTable {
            acc: vec![vec![0.9, 0.0], vec![0.0, 0.8]],
            support: vec![vec![3, 0], vec![0, 3]],
        };
        assert!(matches!(delta_m(&table), Err(Error::NoComparableClass)));
        assert!(matches!(delta_a(&table), Err(Error::NoComparableClass)));
    }

    #[test]
    fn random_tables_match_brute_force() {
        let mut rng = SeededRng::new(17);
        for _ in 0..200 {
            let n = 2 + rng.index(3);
            let m = 2 + rng.index(3);
            let acc = (0..n)
                .map(|_| (0..m).map(|_| rng.uniform()).collect())
                .collect();
            let support = (0..n)
                .map(|_| (0..m).map(|_| rng.index(3) as u64).collect())
                .collect();
            let table = GroupClassAccuracyTable { acc, support };
            if table.ensure_comparable().is_err() {
                continue;
            }
            let (bm, ba) = brute_force(&table);
            assert!((delta_m(&table).unwrap() - bm).abs() < 1e-12);
            assert!((delta_a(&table).unwrap() - ba).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_classifier_report() {
        let (ds, _) = ds_with(&[(0, 0, 0), (0, 1, 0), (0, 0, 1), (0, 1, 1)], 2, 2);
        let targets: Vec<usize> = ds.targets().to_vec();
        let f = move |_: &[f64]| 0usize;
        let _ = f;
        let report = evaluate_preds(&targets, &ds, &ds.all_rows()).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.delta_m, 0.0);
        assert_eq!(report.delta_a, 0.0);
        assert_eq!(report.n_eval, 4);
    }

    #[test]
    fn constant_classifier_is_group_invariant() {
        let (ds, _) = ds_with(&[(0, 0, 0), (0, 1, 0), (0, 0, 1), (0, 1, 1)], 2, 2);
        let constant = |_: &[f64]| 0usize;
        let report = evaluate(&constant, &ds, &ds.all_rows()).unwrap();
        assert_eq!(report.delta_m, 0.0);
        assert_eq!(report.accuracy, 0.5);
    }

    #[test]
    fn seeded_random_classifier_matches_recount() {
        let mut rng = SeededRng::new(77);
        let mut triples = Vec::new();
        for a in 0..2 {
            for y in 0..3 {
                for _ in 0..40 {
                    triples.push((rng.index(3), y, a));
                }
            }
        }
        let (ds, preds) = ds_with(&triples, 3, 2);
        let report = evaluate_preds(&preds, &ds, &ds.all_rows()).unwrap();
        let correct = triples.iter().filter(|&&(p, y, _)| p == y).count();
        assert!((report.accuracy - correct as f64 / triples.len() as f64).abs() < 1e-15);
        let table = accuracy_table(&preds, &ds, &ds.all_rows()).unwrap();
        let (bm, ba) = brute_force(&table);
        assert!((report.delta_m - bm).abs() < 1e-12);
        assert!((report.delta_a - ba).abs() < 1e-12);
    }

    #[test]
    fn report_serializes_with_flat_keys() {
        let (ds, preds) = ds_with(&[(0, 0, 0), (1, 1, 1), (0, 0, 1), (1, 1, 0)], 2, 2);
        let report = evaluate_preds(&preds, &ds, &ds.all_rows()).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        for key in ["accuracy", "delta_m", "delta_a", "table", "support", "n_eval"] {
            assert!(json.get(key).is_some(), "missing key {key}");
        }
        let back: FairnessReport = serde_json::from_value(json).unwrap();
        assert_eq!(back, report);
    }

    proptest! {
        /// 0 <= delta_a <= delta_m <= 1 and permutation invariance.
        #[test]
        fn delta_bounds_and_symmetry(
            cells in proptest::collection::vec((0.0f64..=1.0, 0u64..4), 4..36),
        ) {
            let n = 2 + cells.len() % 3;
            let m = cells.len() / n;
            prop_assume!(m >= 1);
            let cells = &cells[..n * m];
            let acc: Vec<Vec<f64>> = (0..n).map(|a| (0..m).map(|y| cells[a * m + y].0).collect()).collect();
            let support: Vec<Vec<u64>> = (0..n).map(|a| (0..m).map(|y| cells[a * m + y].1).collect()).collect();
            let table = GroupClassAccuracyTable { acc: acc.clone(), support: support.clone() };
            prop_assume!(table.ensure_comparable().is_ok());
            let dm = delta_m(&table).unwrap();
            let da = delta_a(&table).unwrap();
            prop_assert!((0.0..=1.0).contains(&dm));
            prop_assert!((0.0..=1.0).contains(&da));
            prop_assert!(da <= dm + 1e-15);

            // Reversing the group order must not change either metric.
            let table_rev = GroupClassAccuracyTable {
                acc: acc.iter().rev().cloned().collect(),
                support: support.iter().rev().cloned().collect(),
            };
            prop_assert!((delta_m(&table_rev).unwrap() - dm).abs() < 1e-15);
            prop_assert!((delta_a(&table_rev).unwrap() - da).abs() < 1e-15);
        }
    }
}
