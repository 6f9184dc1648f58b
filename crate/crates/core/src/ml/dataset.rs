use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Label of an insecure case; `1` is secure.
pub const INSECURE: u8 = 0;
pub const SECURE: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CaseKey {
    pub case_id: usize,
    pub oc_id: usize,
    pub cont_id: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub season: Option<String>,
    pub solar_target: f64,
    /// Channel angle half-width of the injected errors, if any.
    pub error_halfwidth_deg: Option<f64>,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub keys: Vec<CaseKey>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl Dataset {
    /// Builds a dataset with sequential keys and generic feature names.
    pub fn from_rows(features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let d = features.first().map_or(0, |r| r.len());
        let ds = Dataset {
            keys: (0..labels.len())
                .map(|i| CaseKey {
                    case_id: i,
                    ..Default::default()
                })
                .collect(),
            features,
            labels,
            feature_names: (0..d).map(|k| format!("f_{k}")).collect(),
            provenance: Provenance::default(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if self.features.len() != n || self.keys.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.features.len(),
            });
        }
        let d = self.feature_names.len();
        for (i, row) in self.features.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Validation(format!(
                    "row {i} has {} features, expected {d}",
                    row.len()
                )));
            }
            if let Some(k) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "row {i} feature {} is not finite",
                    self.feature_names[k]
                )));
            }
        }
        if let Some(i) = self.labels.iter().position(|&l| l > 1) {
            return Err(Error::Validation(format!("row {i} label must be 0 or 1")));
        }
        Ok(())
    }

    /// Rows in `idx` order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            keys: idx.iter().map(|&i| self.keys[i]).collect(),
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.len() - ones, ones]
    }

    /// Errors unless both classes are present.
    pub fn require_both_classes(&self) -> Result<()> {
        let c = self.class_counts();
        if c[0] == 0 || c[1] == 0 {
            return Err(Error::Training(format!(
                "training data needs both classes, got {} insecure / {} secure",
                c[0], c[1]
            )));
        }
        Ok(())
    }

    /// CSV with header `case_id,oc_id,cont_id,<features>,label`.
    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["case_id".to_string(), "oc_id".into(), "cont_id".into()];
        header.extend(self.feature_names.iter().cloned());
        header.push("label".into());
        let csv_err = |e: csv::Error| Error::Validation(format!("csv write: {e}"));
        wr.write_record(&header).map_err(csv_err)?;
        for i in 0..self.len() {
            let k = self.keys[i];
            let mut rec = vec![k.case_id.to_string(), k.oc_id.to_string(), k.cont_id.to_string()];
            rec.extend(self.features[i].iter().map(|v| format!("{v:?}")));
            rec.push(self.labels[i].to_string());
            wr.write_record(&rec).map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::Validation(format!("csv write: {e}")))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv(r: impl std::io::Read, location: &str) -> Result<Dataset> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd
            .headers()
            .map_err(|e| Error::parse(location, e))?
            .iter()
            .map(String::from)
            .collect();
        let fixed = ["case_id", "oc_id", "cont_id"];
        if header.len() < 4 || header[..3] != fixed || header.last().map(String::as_str) != Some("label") {
            return Err(Error::parse(
                format!("{location}:1"),
                "header must be case_id,oc_id,cont_id,<features>,label",
            ));
        }
        let d = header.len() - 4;
        let mut ds = Dataset {
            keys: Vec::new(),
            features: Vec::new(),
            labels: Vec::new(),
            feature_names: header[3..3 + d].to_vec(),
            provenance: Provenance::default(),
        };
        for (k, rec) in rd.records().enumerate() {
            let line = k + 2;
            let at = |col: usize| format!("{location}:{line}:{}", col + 1);
            let rec = rec.map_err(|e| Error::parse(format!("{location}:{line}"), e))?;
            let int = |col: usize| -> Result<usize> {
                rec[col].trim().parse().map_err(|e| Error::parse(at(col), e))
            };
            ds.keys.push(CaseKey {
                case_id: int(0)?,
                oc_id: int(1)?,
                cont_id: int(2)?,
            });
            let mut row = Vec::with_capacity(d);
            for c in 3..3 + d {
                row.push(rec[c].trim().parse::<f64>().map_err(|e| Error::parse(at(c), e))?);
            }
            ds.features.push(row);
            let label: u8 = rec[3 + d].trim().parse().map_err(|e| Error::parse(at(3 + d), e))?;
            ds.labels.push(label);
        }
        ds.validate().map_err(|e| Error::parse(location, e))?;
        Ok(ds)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f), &path.display().to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub validation_frac_of_train: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.70,
            validation_frac_of_train: 0.10,
            stratified: true,
            seed: 0,
        }
    }
}

/// Row indices of the three partitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits `total` over groups of the given sizes in proportion, by largest
/// remainder (ties to the lower group).
fn apportion(total: usize, sizes: &[usize]) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let exact: Vec<f64> = sizes.iter().map(|&s| total as f64 * s as f64 / n as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest: Vec<(usize, f64)> = exact.iter().enumerate().map(|(i, e)| (i, e - e.floor())).collect();
    rest.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let short = total - out.iter().sum::<usize>();
    for &(i, _) in rest.iter().take(short) {
        out[i] += 1;
    }
    out
}

/// Stratified random partition into train / validation / test.
///
/// Partition sizes are fixed on the whole dataset first (`round(0.7 n)`
/// train pool, `round(0.1 pool)` validation) and then apportioned over the
/// classes.
pub fn split_indices(labels: &[u8], spec: &SplitSpec) -> Result<SplitIndices> {
    let n = labels.len();
    if !(spec.train_frac > 0.0 && spec.train_frac < 1.0)
        || !(spec.validation_frac_of_train >= 0.0 && spec.validation_frac_of_train < 1.0)
    {
        return Err(Error::InvalidInput(format!("split fractions out of range: {spec:?}")));
    }
    let n_pool = (spec.train_frac * n as f64).round() as usize;
    let n_val = (spec.validation_frac_of_train * n_pool as f64).round() as usize;
    let mut rng = seed::derived_rng(spec.seed, &[seed::stream::SPLIT]);

    let groups: Vec<Vec<usize>> = if spec.stratified {
        (0..2u8)
            .map(|c| (0..n).filter(|&i| labels[i] == c).collect())
            .filter(|g: &Vec<usize>| !g.is_empty())
            .collect()
    } else {
        vec![(0..n).collect()]
    };
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let pool_q = apportion(n_pool, &sizes);
    let val_q = apportion(n_val, &pool_q);
    let mut out = SplitIndices {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (g, mut idx) in groups.into_iter().enumerate() {
        let (p, v) = (pool_q[g], val_q[g]);
        let t = idx.len() - p;
        // Validation may miss a rare class; train and test may not.
        if p - v == 0 || t == 0 {
            return Err(Error::InvalidInput(format!(
                "a class with {} rows cannot fill every partition",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        out.validation.extend_from_slice(&idx[..v]);
        out.train.extend_from_slice(&idx[v..p]);
        out.test.extend_from_slice(&idx[p..]);
    }
    out.train.sort_unstable();
    out.validation.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

pub fn split_dataset(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let s = split_indices(&ds.labels, spec)?;
    Ok((ds.subset(&s.train), ds.subset(&s.validation), ds.subset(&s.test)))
}

/// Stratified random `(keep, held)` split with `round(frac n)` rows held out.
pub fn stratified_holdout(labels: &[u8], frac: f64, seed_value: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    let n_held = (frac * n as f64).round() as usize;
    let groups: Vec<Vec<usize>> = (0..2u8)
        .map(|c| (0..n).filter(|&i| labels[i] == c).collect())
        .collect();
    let q = apportion(n_held, &groups.iter().map(Vec::len).collect::<Vec<_>>());
    let mut rng = seed::derived_rng(seed_value, &[seed::stream::SPLIT, 1]);
    let (mut keep, mut held) = (Vec::new(), Vec::new());
    for (g, mut idx) in groups.into_iter().enumerate() {
        if !idx.is_empty() && q[g] == idx.len() {
            return Err(Error::InvalidInput(format!("holding out {} rows empties class {g}", q[g])));
        }
        idx.shuffle(&mut rng);
        held.extend_from_slice(&idx[..q[g]]);
        keep.extend_from_slice(&idx[q[g]..]);
    }
    keep.sort_unstable();
    held.sort_unstable();
    Ok((keep, held))
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[u8], folds: usize, seed_value: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidInput("at least two folds are needed".into()));
    }
    let mut rng = seed::derived_rng(seed_value, &[seed::stream::FOLDS]);
    let mut out = vec![Vec::new(); folds];
    let mut offset = 0;
    for c in 0..2u8 {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if idx.len() < folds {
            return Err(Error::InvalidInput(format!(
                "{folds} folds exceed the {} rows of class {c}",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (k, i) in idx.into_iter().enumerate() {
            out[(k + offset) % folds].push(i);
        }
        offset += 1;
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}
