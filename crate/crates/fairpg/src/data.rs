//! Tabular datasets with optional sensitive-group labels.
//!
//! A [`Dataset`] holds feature rows, target class indices, and per-row
//! optional group indices. Rows with a group label form the group-labeled
//! subset `X_L`; the rest form `X_U`. The CSV layout is
//! `feature_0,...,feature_{d-1},target,group` with the group cell left empty
//! for unlabeled rows (UTF-8, LF line endings, `.` decimal separator).

use std::path::Path;

use crate::error::{Error, Result};

/// Feature rows with targets and partially annotated group labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    targets: Vec<usize>,
    groups: Vec<Option<usize>>,
    dim: usize,
    num_classes: usize,
    num_groups: usize,
}

impl Dataset {
    /// Validates lengths and label ranges; `num_classes`/`num_groups` fix the
    /// label spaces even when some labels never occur.
    pub fn new(
        features: Vec<Vec<f64>>,
        targets: Vec<usize>,
        groups: Vec<Option<usize>>,
        num_classes: usize,
        num_groups: usize,
    ) -> Result<Self> {
        let n = features.len();
        if n == 0 {
            return Err(Error::EmptyInput("dataset has no rows"));
        }
        if targets.len() != n || groups.len() != n {
            return Err(Error::InvalidDataset(format!(
                "length mismatch: {} features, {} targets, {} groups",
                n,
                targets.len(),
                groups.len()
            )));
        }
        let dim = features[0].len();
        if let Some(row) = features.iter().position(|f| f.len() != dim) {
            return Err(Error::InvalidDataset(format!(
                "feature row {row} has length {}, expected {dim}",
                features[row].len()
            )));
        }
        if num_classes == 0 || num_groups == 0 {
            return Err(Error::InvalidDataset(
                "num_classes and num_groups must be positive".into(),
            ));
        }
        if let Some(row) = targets.iter().position(|&y| y >= num_classes) {
            return Err(Error::InvalidDataset(format!(
                "target {} at row {row} out of range 0..{num_classes}",
                targets[row]
            )));
        }
        if let Some(row) = groups
            .iter()
            .position(|g| matches!(g, Some(a) if *a >= num_groups))
        {
            return Err(Error::InvalidDataset(format!(
                "group {:?} at row {row} out of range 0..{num_groups}",
                groups[row]
            )));
        }
        Ok(Self {
            features,
            targets,
            groups,
            dim,
            num_classes,
            num_groups,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Feature dimensionality `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of target classes `M`.
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Number of sensitive groups `N`.
    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn feature(&self, row: usize) -> &[f64] {
        &self.features[row]
    }

    pub fn target(&self, row: usize) -> usize {
        self.targets[row]
    }

    pub fn group(&self, row: usize) -> Option<usize> {
        self.groups[row]
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn groups(&self) -> &[Option<usize>] {
        &self.groups
    }

    /// Returns a copy with the given rows' group labels replaced.
    pub fn with_groups(&self, groups: Vec<Option<usize>>) -> Result<Self> {
        Dataset::new(
            self.features.clone(),
            self.targets.clone(),
            groups,
            self.num_classes,
            self.num_groups,
        )
    }

    /// True when every row carries a group label.
    pub fn fully_group_labeled(&self) -> bool {
        self.groups.iter().all(|g| g.is_some())
    }

    /// All row indices, in order.
    pub fn all_rows(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }

    /// Writes the CSV layout described in the module docs.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("feature_{j}")).collect();
        header.push("target".into());
        header.push("group".into());
        w.write_record(&header)?;
        for row in 0..self.len() {
            let mut record: Vec<String> = self.features[row].iter().map(|v| v.to_string()).collect();
            record.push(self.targets[row].to_string());
            record.push(match self.groups[row] {
                Some(a) => a.to_string(),
                None => String::new(),
            });
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV layout; `M` and `N` are inferred as `max label + 1`.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        if header.len() < 3 {
            return Err(Error::CsvFormat {
                line: 1,
                msg: "expected at least feature_0,target,group columns".into(),
            });
        }
        let dim = header.len() - 2;
        for (j, name) in header.iter().take(dim).enumerate() {
            if name != format!("feature_{j}") {
                return Err(Error::CsvFormat {
                    line: 1,
                    msg: format!("column {j} named {name:?}, expected \"feature_{j}\""),
                });
            }
        }
        if &header[dim] != "target" || &header[dim + 1] != "group" {
            return Err(Error::CsvFormat {
                line: 1,
                msg: "last two columns must be target,group".into(),
            });
        }

        let mut features = Vec::new();
        let mut targets = Vec::new();
        let mut groups = Vec::new();
        for (i, record) in r.records().enumerate() {
            let record = record?;
            let line = i + 2;
            if record.len() != dim + 2 {
                return Err(Error::CsvFormat {
                    line,
                    msg: format!("expected {} fields, got {}", dim + 2, record.len()),
                });
            }
            let row: Vec<f64> = record
                .iter()
                .take(dim)
                .map(|s| {
                    s.parse::<f64>().map_err(|e| Error::CsvFormat {
                        line,
                        msg: format!("bad feature {s:?}: {e}"),
                    })
                })
                .collect::<Result<_>>()?;
            let target = record[dim].parse::<usize>().map_err(|e| Error::CsvFormat {
                line,
                msg: format!("bad target {:?}: {e}", &record[dim]),
            })?;
            let group_field = &record[dim + 1];
            let group = if group_field.is_empty() {
                None
            } else {
                Some(group_field.parse::<usize>().map_err(|e| Error::CsvFormat {
                    line,
                    msg: format!("bad group {group_field:?}: {e}"),
                })?)
            };
            features.push(row);
            targets.push(target);
            groups.push(group);
        }
        if features.is_empty() {
            return Err(Error::EmptyInput("csv has no data rows"));
        }
        let num_classes = targets.iter().max().copied().unwrap_or(0) + 1;
        let num_groups = groups.iter().flatten().max().copied().unwrap_or(0) + 1;
        Dataset::new(features, targets, groups, num_classes, num_groups)
    }

    /// Reads CSV with explicit label-space sizes (for files that do not
    /// realize every class or group).
    pub fn read_csv_with_meta(path: &Path, num_classes: usize, num_groups: usize) -> Result<Self> {
        let ds = Self::read_csv(path)?;
        if ds.num_classes > num_classes || ds.num_groups > num_groups {
            return Err(Error::InvalidDataset(format!(
                "file realizes {} classes / {} groups, larger than requested {num_classes}/{num_groups}",
                ds.num_classes, ds.num_groups
            )));
        }
        Dataset::new(ds.features, ds.targets, ds.groups, num_classes, num_groups)
    }
}

/// Splits row indices into the group-labeled set `X_L` and the rest `X_U`.
pub fn partition_group_labeled(ds: &Dataset) -> (Vec<usize>, Vec<usize>) {
    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    for row in 0..ds.len() {
        if ds.group(row).is_some() {
            labeled.push(row);
        } else {
            unlabeled.push(row);
        }
    }
    (labeled, unlabeled)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset::new(
            vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]],
            vec![0, 1, 0],
            vec![Some(0), None, Some(1)],
            2,
            2,
        )
        .unwrap()
    }

    #[test]
    fn partition_filters_by_group_presence() {
        let ds = tiny();
        let (labeled, unlabeled) = partition_group_labeled(&ds);
        assert_eq!(labeled, vec![0, 2]);
        assert_eq!(unlabeled, vec![1]);
    }

    #[test]
    fn partition_all_present_and_all_absent() {
        let all = tiny()
            .with_groups(vec![Some(0), Some(1), Some(1)])
            .unwrap();
        let (labeled, unlabeled) = partition_group_labeled(&all);
        assert_eq!(labeled.len(), 3);
        assert!(unlabeled.is_empty());

        let none = tiny().with_groups(vec![None, None, None]).unwrap();
        let (labeled, unlabeled) = partition_group_labeled(&none);
        assert!(labeled.is_empty());
        assert_eq!(unlabeled.len(), 3);
    }

    #[test]
    fn rejects_out_of_range_labels() {
        let bad = Dataset::new(vec![vec![0.0]], vec![2], vec![None], 2, 2);
        assert!(bad.is_err());
        let bad = Dataset::new(vec![vec![0.0]], vec![0], vec![Some(5)], 2, 2);
        assert!(bad.is_err());
    }

    #[test]
    fn csv_round_trip_preserves_missing_groups() {
        let ds = tiny();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        ds.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("feature_0,feature_1,target,group\n"));
        assert!(!text.contains('\r'));
        let back = Dataset::read_csv(&path).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn csv_rejects_malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "feature_0,target,group\nx,0,\n").unwrap();
        assert!(matches!(
            Dataset::read_csv(&path),
            Err(Error::CsvFormat { line: 2, .. })
        ));
    }
}
