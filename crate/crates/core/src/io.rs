//! File formats: parameter vectors, chains, saddle records and graphs as
//! JSON, loss profiles and traces as CSV.
//!
//! Floating-point vectors are written twice: as JSON numbers for people and
//! as 16-digit hex strings of the IEEE-754 bit pattern. Readers prefer the
//! hex form when it is present, so files round-trip bit-exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::autoneb::{DenseProfile, SaddleRecord, SaddleSource};
use crate::chain::Chain;
use crate::error::{Error, Result};
use crate::explorer::LandscapeGraph;
use crate::landscape::ParamVector;

/// Provenance stamped into every output artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub seed: u64,
    pub config_hash: String,
}

pub fn encode_hex(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| format!("{:016x}", v.to_bits())).collect()
}

pub fn decode_hex(values: &[String]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|s| {
            u64::from_str_radix(s.trim_start_matches("0x"), 16)
                .map(f64::from_bits)
                .map_err(|_| Error::Parse(format!("{s:?} is not a binary64 hex string")))
        })
        .collect()
}

fn decode_vector(dim: usize, values: &[f64], hex: Option<&[String]>) -> Result<ParamVector> {
    let values = match hex {
        Some(h) => decode_hex(h)?,
        None => values.to_vec(),
    };
    if values.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: values.len() });
    }
    ParamVector::new(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub dim: usize,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values_hex: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

impl ParamsFile {
    pub fn new(params: &ParamVector, loss: Option<f64>, meta: Option<Meta>) -> Self {
        ParamsFile {
            dim: params.dim(),
            values: params.to_vec(),
            values_hex: Some(encode_hex(params)),
            loss,
            meta,
        }
    }

    pub fn params(&self) -> Result<ParamVector> {
        decode_vector(self.dim, &self.values, self.values_hex.as_deref())
    }
}

/// `{dim, pivots: [[...]], pivots_hex: [[...]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainFile {
    pub dim: usize,
    pub pivots: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivots_hex: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

impl ChainFile {
    pub fn new(chain: &Chain, meta: Option<Meta>) -> Self {
        ChainFile {
            dim: chain.dim(),
            pivots: chain.pivots().iter().map(|p| p.to_vec()).collect(),
            pivots_hex: Some(chain.pivots().iter().map(|p| encode_hex(p)).collect()),
            meta,
        }
    }

    pub fn chain(&self) -> Result<Chain> {
        if let Some(hex) = &self.pivots_hex {
            if hex.len() != self.pivots.len() {
                return Err(Error::Parse("pivots and pivots_hex differ in length".into()));
            }
        }
        let pivots = self
            .pivots
            .iter()
            .enumerate()
            .map(|(i, p)| decode_vector(self.dim, p, self.pivots_hex.as_ref().map(|h| h[i].as_slice())))
            .collect::<Result<Vec<_>>>()?;
        Chain::new(pivots)
    }
}

/// `{saddle_loss, source, params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleFile {
    pub saddle_loss: f64,
    pub source: SaddleSource,
    pub params: ParamsFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

impl SaddleFile {
    pub fn new(record: &SaddleRecord, meta: Option<Meta>) -> Self {
        SaddleFile {
            saddle_loss: record.loss,
            source: record.source,
            params: ParamsFile::new(&record.params, None, None),
            meta,
        }
    }

    pub fn record(&self) -> Result<SaddleRecord> {
        Ok(SaddleRecord { params: self.params.params()?, loss: self.saddle_loss, source: self.source })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    pub min_loss: f64,
    pub params_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub id: usize,
    pub u: usize,
    pub v: usize,
    pub saddle_loss: f64,
    pub chain_file: Option<String>,
}

/// `{nodes, edges, mst}` with chains and parameters stored in separate
/// files referenced by relative path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub mst: Vec<usize>,
    #[serde(default)]
    pub ignored: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

impl GraphFile {
    /// Describes `graph`; `params_file` and `chain_file` name the files the
    /// caller writes for node and edge `id`.
    pub fn new(
        graph: &LandscapeGraph,
        mst: &[usize],
        params_file: impl Fn(usize) -> String,
        chain_file: impl Fn(usize) -> String,
        meta: Option<Meta>,
    ) -> Self {
        GraphFile {
            nodes: graph
                .nodes()
                .iter()
                .map(|n| GraphNode { id: n.id, min_loss: n.min_loss, params_file: params_file(n.id) })
                .collect(),
            edges: graph
                .edges()
                .iter()
                .map(|e| GraphEdge {
                    id: e.id,
                    u: e.u,
                    v: e.v,
                    saddle_loss: e.saddle_loss,
                    chain_file: e.chain.as_ref().map(|_| chain_file(e.id)),
                })
                .collect(),
            mst: mst.to_vec(),
            ignored: graph.ignored().iter().copied().collect(),
            meta,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_meta_comment<W: Write>(writer: &mut W, meta: Option<&Meta>) -> Result<()> {
    if let Some(m) = meta {
        writeln!(writer, "# config_hash={} seed={}", m.config_hash, m.seed)?;
    }
    Ok(())
}

/// One row of a path loss profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub cumulative_arc_length: f64,
    pub alpha_global: f64,
    pub loss: f64,
    pub is_pivot: bool,
}

/// Rows of `profile` along `chain` in path order. `alpha_global` is the
/// arc-length fraction (or the segment fraction on a zero-length chain).
pub fn profile_rows(chain: &Chain, profile: &DenseProfile) -> Vec<ProfileRow> {
    let s = chain.arc_lengths();
    let total = *s.last().expect("non-empty");
    let segments = (chain.len() - 1) as f64;
    profile
        .samples()
        .into_iter()
        .map(|(position, loss, is_pivot)| {
            let seg = (position.floor() as usize).min(chain.len() - 2);
            let alpha = position - seg as f64;
            let arc = s[seg] + alpha * (s[seg + 1] - s[seg]);
            let alpha_global = if total > 0.0 { arc / total } else { position / segments };
            ProfileRow { cumulative_arc_length: arc, alpha_global, loss, is_pivot }
        })
        .collect()
}

pub fn write_profile_csv<W: Write>(mut writer: W, rows: &[ProfileRow], meta: Option<&Meta>) -> Result<()> {
    write_meta_comment(&mut writer, meta)?;
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_profile_csv<R: std::io::Read>(reader: R) -> Result<Vec<ProfileRow>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// `iteration,max_interior_loss`, iterations counted from 1.
pub fn write_trace_csv<W: Write>(mut writer: W, trace: &[f64], meta: Option<&Meta>) -> Result<()> {
    write_meta_comment(&mut writer, meta)?;
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["iteration", "max_interior_loss"])?;
    for (i, v) in trace.iter().enumerate() {
        wtr.serialize((i + 1, v))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoneb::evaluate_dense;
    use crate::landscape::make_double_well;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn hex_is_bit_exact() {
        let values = [0.1, -0.0, f64::MIN_POSITIVE, 1e300, std::f64::consts::PI];
        let back = decode_hex(&encode_hex(&values)).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(decode_hex(&["zz".to_string()]).is_err());
    }

    #[test]
    fn chain_file_prefers_hex() {
        let c = Chain::straight(&pv(&[0.0, 0.1]), &pv(&[1.0 / 3.0, 2.0]), 2).unwrap();
        let mut file = ChainFile::new(&c, None);
        file.pivots[1][0] = 123.0;
        assert_eq!(file.chain().unwrap(), c);
        file.pivots_hex = None;
        assert_ne!(file.chain().unwrap(), c);
    }

    #[test]
    fn chain_file_json_shape() {
        let c = Chain::straight(&pv(&[0.0]), &pv(&[1.0]), 1).unwrap();
        let json: serde_json::Value = serde_json::to_value(ChainFile::new(&c, None)).unwrap();
        assert_eq!(json["dim"], 1);
        assert_eq!(json["pivots"], serde_json::json!([[0.0], [0.5], [1.0]]));
    }

    #[test]
    fn params_file_dimension_checked() {
        let mut f = ParamsFile::new(&pv(&[1.0, 2.0]), Some(0.5), None);
        f.dim = 3;
        assert!(f.params().is_err());
    }

    #[test]
    fn profile_rows_cover_path() {
        let c = Chain::straight(&pv(&[-1.0, 1.0]), &pv(&[1.0, 1.0]), 0).unwrap();
        let profile = evaluate_dense(&c, &make_double_well(), 9).unwrap();
        let rows = profile_rows(&c, &profile);
        assert_eq!(rows.len(), 11);
        assert_eq!(rows[0].alpha_global, 0.0);
        assert_eq!(rows[10].alpha_global, 1.0);
        assert_eq!(rows[5].loss, 3.0);
        assert!(rows[0].is_pivot && rows[10].is_pivot && !rows[5].is_pivot);

        let mut buf = Vec::new();
        let meta = Meta { seed: 3, config_hash: "abc".into() };
        write_profile_csv(&mut buf, &rows, Some(&meta)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# config_hash=abc seed=3\ncumulative_arc_length,alpha_global,loss,is_pivot\n"));
        assert_eq!(read_profile_csv(buf.as_slice()).unwrap(), rows);
    }
}
