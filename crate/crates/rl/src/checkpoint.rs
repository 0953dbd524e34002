//! Checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic       8 bytes   "MMSIMCK\0"
//! header_len  u64
//! header      JSON      CheckpointHeader
//! params      f64 x n   network parameters
//! adam_m      f64 x n   first-moment estimates
//! adam_v      f64 x n   second-moment estimates
//! ```
//!
//! Readers accept any header whose `format_version` major part matches.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::network::{NetConfig, PolicyValueNet};
use crate::optim::Adam;
use crate::trainer::{Learner, TrainConfig};
use crate::RlError;

pub const MAGIC: &[u8; 8] = b"MMSIMCK\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    /// Decimal string; JSON numbers cannot carry 128 bits.
    pub word_pos: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub train: TrainConfig,
    pub net: NetConfig,
    pub step: u64,
    pub updates: u64,
    pub adam_step: u64,
    pub rng: RngState,
    pub n_params: usize,
    /// Free-form settings of the caller, echoed for provenance.
    #[serde(default)]
    pub extra: serde_json::Value,
}

fn err(path: &Path, message: impl Into<String>) -> RlError {
    RlError::Checkpoint { path: path.display().to_string(), message: message.into() }
}

pub fn save(path: &Path, learner: &Learner, extra: serde_json::Value) -> Result<(), RlError> {
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        train: learner.config.clone(),
        net: learner.net.config().clone(),
        step: learner.step,
        updates: learner.updates,
        adam_step: learner.adam.step,
        rng: RngState {
            seed: learner.rng.get_seed(),
            stream: learner.rng.get_stream(),
            word_pos: learner.rng.get_word_pos().to_string(),
        },
        n_params: learner.net.parameter_count(),
        extra,
    };
    let json = serde_json::to_vec(&header).map_err(|e| err(path, e.to_string()))?;
    let io = |source| RlError::Io { path: path.display().to_string(), source };
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp).map_err(io)?);
        f.write_all(MAGIC).map_err(io)?;
        f.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
        f.write_all(&json).map_err(io)?;
        for block in [learner.net.params().to_vec(), learner.adam.m.clone(), learner.adam.v.clone()] {
            for x in block {
                f.write_all(&x.to_le_bytes()).map_err(io)?;
            }
        }
        f.flush().map_err(io)?;
    }
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn load(path: &Path) -> Result<(CheckpointHeader, Learner), RlError> {
    let io = |source| RlError::Io { path: path.display().to_string(), source };
    let mut bytes = Vec::new();
    std::fs::File::open(path).map_err(io)?.read_to_end(&mut bytes).map_err(io)?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(err(path, "not a checkpoint file"));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(16..16 + header_len).ok_or_else(|| err(path, "truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(body).map_err(|e| err(path, format!("bad header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(err(path, format!("unsupported format version {}", header.format_version)));
    }
    let n = header.n_params;
    let data = &bytes[16 + header_len..];
    if data.len() != 3 * n * 8 {
        return Err(err(path, format!("expected {} parameter bytes, found {}", 3 * n * 8, data.len())));
    }
    let block = |k: usize| -> Vec<f64> {
        data[k * n * 8..(k + 1) * n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect()
    };
    let net = PolicyValueNet::from_params(header.net.clone(), block(0))?;
    let mut adam = Adam::new(n, header.train.learning_rate);
    adam.m = block(1);
    adam.v = block(2);
    adam.step = header.adam_step;
    let mut rng = ChaCha8Rng::from_seed(header.rng.seed);
    rng.set_stream(header.rng.stream);
    rng.set_word_pos(header.rng.word_pos.parse().map_err(|_| err(path, "bad RNG position"))?);
    let learner = Learner {
        config: header.train.clone(),
        net,
        adam,
        rng,
        step: header.step,
        updates: header.updates,
    };
    Ok((header, learner))
}
