use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::mlp::LossKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Class index per sample (cross-entropy).
    Classes(Vec<usize>),
    /// Row-major `n_samples × width` real targets (squared error).
    Values { values: Vec<f64>, width: usize },
}

/// In-memory supervised dataset; inputs are row-major `n_samples × input_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    input_dim: usize,
    targets: Targets,
}

impl Dataset {
    pub fn new(inputs: Vec<f64>, input_dim: usize, targets: Targets) -> Result<Self> {
        if input_dim == 0 || inputs.is_empty() || inputs.len() % input_dim != 0 {
            return Err(Error::InvalidConfig(format!(
                "{} input values do not form rows of width {input_dim}",
                inputs.len()
            )));
        }
        super::check_finite(&inputs)?;
        let n = inputs.len() / input_dim;
        let target_rows = match &targets {
            Targets::Classes(c) => c.len(),
            Targets::Values { values, width } => {
                super::check_finite(values)?;
                if *width == 0 || values.len() % width != 0 {
                    return Err(Error::InvalidConfig("ragged target rows".into()));
                }
                values.len() / width
            }
        };
        if target_rows != n {
            return Err(Error::InvalidConfig(format!(
                "{n} input rows but {target_rows} target rows"
            )));
        }
        Ok(Dataset { inputs, input_dim, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    /// Rows `indices` (in the given order) as a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidConfig(format!("sample index {bad} out of range")));
        }
        let inputs = indices.iter().flat_map(|&i| self.input(i).iter().copied()).collect();
        let targets = match &self.targets {
            Targets::Classes(c) => Targets::Classes(indices.iter().map(|&i| c[i]).collect()),
            Targets::Values { values, width } => Targets::Values {
                values: indices
                    .iter()
                    .flat_map(|&i| values[i * width..(i + 1) * width].iter().copied())
                    .collect(),
                width: *width,
            },
        };
        Dataset::new(inputs, self.input_dim, targets)
    }

    /// Reads a CSV with a header row: feature columns followed by a single
    /// target column. The target is parsed as a class index for
    /// cross-entropy and as a real value for squared error.
    pub fn from_csv<R: Read>(reader: R, loss_kind: LossKind) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).from_reader(reader);
        let columns = rdr.headers()?.len();
        if columns < 2 {
            return Err(Error::Parse("dataset needs at least one feature and one target column".into()));
        }
        let mut inputs = Vec::new();
        let mut classes = Vec::new();
        let mut values = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            for field in record.iter().take(columns - 1) {
                inputs.push(parse_field(field, row)?);
            }
            let target = record.get(columns - 1).unwrap_or_default().trim();
            match loss_kind {
                LossKind::CrossEntropy => classes.push(target.parse::<usize>().map_err(|_| {
                    Error::Parse(format!("row {row}: class label {target:?} is not a non-negative integer"))
                })?),
                LossKind::SquaredError => values.push(parse_field(target, row)?),
            }
        }
        let targets = match loss_kind {
            LossKind::CrossEntropy => Targets::Classes(classes),
            LossKind::SquaredError => Targets::Values { values, width: 1 },
        };
        Dataset::new(inputs, columns - 1, targets)
    }

    /// Writes the dataset in the format read by [`Dataset::from_csv`].
    /// Only single-column targets are supported.
    pub fn to_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.input_dim).map(|i| format!("x{i}")).collect();
        header.push("target".into());
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.input(i).iter().map(|v| format!("{v:?}")).collect();
            row.push(match &self.targets {
                Targets::Classes(c) => c[i].to_string(),
                Targets::Values { values, width: 1 } => format!("{:?}", values[i]),
                Targets::Values { .. } => {
                    return Err(Error::InvalidConfig("multi-column targets cannot be written as CSV".into()))
                }
            });
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn parse_field(field: &str, row: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("row {row}: {field:?} is not a number")))
}

/// The four XOR points with 0/1 inputs and a single 0/1 regression target.
pub fn xor_dataset() -> Dataset {
    Dataset::new(
        vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0],
        2,
        Targets::Values { values: vec![0.0, 1.0, 1.0, 0.0], width: 1 },
    )
    .expect("static dataset")
}

/// `n` 2D points in two isotropic Gaussian clusters centred at `(-1, -1)`
/// (class 0) and `(1, 1)` (class 1) with standard deviation 0.5; classes
/// alternate so the set is balanced.
pub fn two_cluster_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).expect("valid std");
    let mut inputs = Vec::with_capacity(2 * n);
    let mut classes = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let c = if class == 0 { -1.0 } else { 1.0 };
        inputs.push(c + noise.sample(&mut rng));
        inputs.push(c + noise.sample(&mut rng));
        classes.push(class);
    }
    Dataset::new(inputs, 2, Targets::Classes(classes)).expect("generated dataset")
}
