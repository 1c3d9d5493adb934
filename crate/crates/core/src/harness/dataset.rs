//! Iris CSV ingestion, min-max normalization, and the stratified split.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Sample;

pub const IRIS_CLASSES: [&str; 3] = ["Iris-setosa", "Iris-versicolor", "Iris-virginica"];
pub const N_FEATURES: usize = 4;
/// Fraction of each class held out for testing.
pub const TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub features: [f64; N_FEATURES],
    pub label: usize,
}

fn class_index(name: &str) -> Option<usize> {
    let n = name.trim().to_ascii_lowercase();
    let n = n.strip_prefix("iris-").unwrap_or(&n);
    IRIS_CLASSES
        .iter()
        .position(|c| c.to_ascii_lowercase().strip_prefix("iris-") == Some(n))
}

/// Parses CSV text: four numeric columns and a class label, header optional.
/// Row numbers in errors are 1-based file lines.
pub fn parse_dataset(text: &str) -> Result<Vec<DatasetRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 1;
        let row = row.map_err(|e| Error::DatasetRow {
            row: line,
            msg: e.to_string(),
        })?;
        if row.iter().all(str::is_empty) {
            continue;
        }
        if row.len() != N_FEATURES + 1 {
            return Err(Error::Schema(format!(
                "row {line} has {} columns, expected {} features and a label",
                row.len(),
                N_FEATURES
            )));
        }
        if i == 0 && row[0].parse::<f64>().is_err() {
            continue;
        }
        let mut features = [0.0f64; N_FEATURES];
        for (k, f) in features.iter_mut().enumerate() {
            *f = row[k].parse().map_err(|_| Error::DatasetRow {
                row: line,
                msg: format!("feature {} is not a number: {:?}", k + 1, &row[k]),
            })?;
            if !f.is_finite() {
                return Err(Error::DatasetRow {
                    row: line,
                    msg: format!("feature {} is not finite", k + 1),
                });
            }
        }
        let label = class_index(&row[N_FEATURES]).ok_or_else(|| Error::DatasetRow {
            row: line,
            msg: format!(
                "unknown class {:?}; known classes: {}",
                &row[N_FEATURES],
                IRIS_CLASSES.join(", ")
            ),
        })?;
        out.push(DatasetRecord { features, label });
    }
    if out.is_empty() {
        return Err(Error::Schema("dataset has no records".into()));
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    /// Per-feature training minimum and maximum used for scaling.
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub warnings: Vec<String>,
}

pub fn one_hot(label: usize, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i == label { 1.0 } else { 0.0 }).collect()
}

/// Stratified 80/20 split, then min-max scaling to [0, 1] V from training
/// statistics. A constant feature scales to 0 and produces a warning.
pub fn normalize_split(records: &[DatasetRecord], seed: u64) -> Result<Split> {
    if records.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let n_classes = IRIS_CLASSES.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for class in 0..n_classes {
        let mut idx: Vec<usize> = (0..records.len()).filter(|&i| records[i].label == class).collect();
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * TEST_FRACTION).round() as usize;
        test_idx.extend_from_slice(&idx[..n_test]);
        train_idx.extend_from_slice(&idx[n_test..]);
    }
    if train_idx.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let mut min = vec![f64::INFINITY; N_FEATURES];
    let mut max = vec![f64::NEG_INFINITY; N_FEATURES];
    for &i in &train_idx {
        for k in 0..N_FEATURES {
            min[k] = min[k].min(records[i].features[k]);
            max[k] = max[k].max(records[i].features[k]);
        }
    }
    let mut warnings = Vec::new();
    for k in 0..N_FEATURES {
        if max[k] == min[k] {
            let w = format!("feature {} is constant ({}) in the training split; scaled to 0", k + 1, min[k]);
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    let sample = |i: usize| {
        let r = &records[i];
        let x = (0..N_FEATURES)
            .map(|k| {
                let span = max[k] - min[k];
                if span == 0.0 {
                    0.0
                } else {
                    (r.features[k] - min[k]) / span
                }
            })
            .collect();
        Sample {
            x,
            t: one_hot(r.label, n_classes),
            label: r.label,
        }
    };
    Ok(Split {
        train: train_idx.iter().map(|&i| sample(i)).collect(),
        test: test_idx.iter().map(|&i| sample(i)).collect(),
        min,
        max,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "5.1,3.5,1.4,0.2,Iris-setosa\n7.0,3.2,4.7,1.4,Iris-versicolor\n6.3,3.3,6.0,2.5,Iris-virginica\n";

    #[test]
    fn header_is_optional() {
        let a = parse_dataset(SMALL).unwrap();
        let b = parse_dataset(&format!("sl,sw,pl,pw,species\n{SMALL}")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_eq!(a[2].label, 2);
    }

    #[test]
    fn short_names_accepted() {
        let r = parse_dataset("1,2,3,4,setosa\n1,2,3,4,VIRGINICA\n").unwrap();
        assert_eq!(r[0].label, 0);
        assert_eq!(r[1].label, 2);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_dataset(""), Err(Error::Schema(_))));
        assert!(matches!(parse_dataset("1,2,3,Iris-setosa\n"), Err(Error::Schema(_))));
        let e = parse_dataset("1,2,3,4,Iris-setosa\n1,x,3,4,Iris-setosa\n").unwrap_err();
        assert!(matches!(e, Error::DatasetRow { row: 2, .. }));
        let e = parse_dataset("1,2,3,4,rose\n").unwrap_err();
        assert!(e.to_string().contains("Iris-versicolor"));
    }

    fn synthetic(per_class: usize) -> Vec<DatasetRecord> {
        (0..3 * per_class)
            .map(|i| DatasetRecord {
                features: [i as f64, (i % 7) as f64, 2.0, (i * i % 11) as f64],
                label: i % 3,
            })
            .collect()
    }

    #[test]
    fn stratified_split_and_scaling() {
        let recs = synthetic(50);
        let s = normalize_split(&recs, 3).unwrap();
        assert_eq!(s.train.len(), 120);
        assert_eq!(s.test.len(), 30);
        for c in 0..3 {
            assert_eq!(s.test.iter().filter(|x| x.label == c).count(), 10);
        }
        for x in &s.train {
            assert!(x.x.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        assert_eq!(s.warnings.len(), 1);
        assert!(s.train.iter().all(|x| x.x[2] == 0.0));
        assert_eq!(normalize_split(&recs, 3).unwrap(), s);
        assert_ne!(normalize_split(&recs, 4).unwrap().test, s.test);
        assert!(normalize_split(&[], 0).is_err());
    }
}
