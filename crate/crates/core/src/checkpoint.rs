//! Checkpoint file format: a little-endian u64 header length, a JSON header
//! listing parameter names/shapes and hyperparameters, then the raw
//! little-endian f64 values of every parameter in header order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Parameter;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub hyper: serde_json::Value,
    pub params: Vec<ParamEntry>,
}

pub fn save(path: &Path, params: &[Parameter], hyper: serde_json::Value) -> Result<()> {
    let header = Header {
        version: FORMAT_VERSION,
        hyper,
        params: params
            .iter()
            .map(|p| ParamEntry {
                name: p.name.clone(),
                shape: p.tensor.shape().to_vec(),
            })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path.display().to_string(), e);
    w.write_all(&(header_bytes.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&header_bytes).map_err(io)?;
    for p in params {
        for v in p.tensor.to_vec() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub struct Checkpoint {
    pub header: Header,
    pub values: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Result<(&[usize], &[f64])> {
        for (entry, vals) in self.header.params.iter().zip(&self.values) {
            if entry.name == name {
                return Ok((&entry.shape, vals));
            }
        }
        Err(Error::InvalidCheckpoint(format!("missing parameter `{name}`")))
    }
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path.display().to_string(), e);
    let mut len_buf = [0u8; 8];
    r.read_exact(&mut len_buf).map_err(io)?;
    let header_len = u64::from_le_bytes(len_buf) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes).map_err(io)?;
    let header: Header = serde_json::from_slice(&header_bytes)?;
    if header.version != FORMAT_VERSION {
        return Err(Error::InvalidCheckpoint(format!(
            "unsupported format version {}",
            header.version
        )));
    }
    let mut values = Vec::with_capacity(header.params.len());
    for entry in &header.params {
        let n: usize = entry.shape.iter().product();
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf).map_err(io)?;
        let vals: Vec<f64> = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        values.push(vals);
    }
    Ok(Checkpoint { header, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test.ckpt");
        let params = vec![
            Parameter::new("w1", &[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            Parameter::new("b1", &[3], vec![-0.5, 0.0, 0.5]),
        ];
        save(&path, &params, serde_json::json!({"lr": 1e-5})).unwrap();
        let ckpt = load(&path).unwrap();
        let (shape, vals) = ckpt.get("w1").unwrap();
        assert_eq!(shape, &[2, 3]);
        assert_eq!(vals, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(ckpt.header.hyper["lr"], 1e-5);
        assert!(ckpt.get("nope").is_err());
    }
}
