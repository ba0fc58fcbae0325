//! Binary dataset container.
//!
//! Layout (little-endian): magic `DPDS`, u32 format version, u32 header
//! length, JSON header, then per sample a u32 label, a u8 truncation flag and
//! T·O f64 values in row-major (timestep-major) order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::collect::{DiagnosisSample, Method};
use crate::error::{invalid, Result};
use crate::nn::Tensor2;

const MAGIC: &[u8; 4] = b"DPDS";
pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub obs_dim: usize,
    pub timesteps: usize,
    pub classes: usize,
    pub method: Method,
    pub seed_base: u64,
    pub samples: usize,
    #[serde(default)]
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<DiagnosisSample>,
}

impl Dataset {
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header)?;
        out.write_all(MAGIC)?;
        out.write_all(&DATASET_FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&(header.len() as u32).to_le_bytes())?;
        out.write_all(&header)?;
        for s in &self.samples {
            out.write_all(&(s.label as u32).to_le_bytes())?;
            out.write_all(&[u8::from(s.truncated)])?;
            for v in s.matrix.data() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(invalid("not a diagnosis dataset file"));
        }
        let version = read_u32(&mut input)?;
        if version != DATASET_FORMAT_VERSION {
            return Err(invalid(format!("unsupported dataset format version {version}")));
        }
        let len = read_u32(&mut input)? as usize;
        let mut header_bytes = vec![0u8; len];
        input.read_exact(&mut header_bytes)?;
        let header: DatasetHeader = serde_json::from_slice(&header_bytes)?;
        let cells = header.timesteps * header.obs_dim;
        let mut samples = Vec::with_capacity(header.samples);
        let mut buf = vec![0u8; cells * 8];
        for _ in 0..header.samples {
            let label = read_u32(&mut input)? as usize;
            let mut flag = [0u8; 1];
            input.read_exact(&mut flag)?;
            input.read_exact(&mut buf)?;
            let data = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            samples.push(DiagnosisSample {
                matrix: Tensor2::from_vec(header.timesteps, header.obs_dim, data)?,
                label,
                method: header.method,
                truncated: flag[0] != 0,
            });
        }
        Ok(Self { header, samples })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Confusion matrix as CSV: one row per true class, one column per prediction.
pub fn write_confusion_csv<W: Write>(counts: &[Vec<usize>], mut out: W) -> Result<()> {
    let d = counts.len();
    let header: Vec<String> = (0..d).map(|j| format!("pred_{j}")).collect();
    writeln!(out, "true_class,{}", header.join(","))?;
    for (i, row) in counts.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(usize::to_string).collect();
        writeln!(out, "{i},{}", cells.join(","))?;
    }
    Ok(())
}
