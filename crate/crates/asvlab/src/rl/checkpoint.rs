//! Versioned binary checkpoints carrying the network, its feature-scaling
//! table and the optimizer moments.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic            8 bytes  "ASVLABCK"
//! version          u32
//! obs_layout       u32
//! obs_dim          u32
//! act_dim          u32
//! hidden_dim       u32
//! steps_done       u64
//! iteration        u64
//! adam_t           u64
//! scaling          obs_dim x f64
//! params           param_count x f64   (policy layers, log_std, value layers)
//! adam_m           param_count x f64
//! adam_v           param_count x f64
//! ```

use std::path::Path;
use thiserror::Error;

use super::net::{FeatureScaling, PolicyValueNet};
use super::ppo::Adam;
use crate::config::write_atomic;
use crate::env::OBS_LAYOUT_VERSION;
use crate::rng::Rng;

const MAGIC: &[u8; 8] = b"ASVLABCK";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}, expected {VERSION}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated: needed {needed} bytes, had {available}")]
    Truncated { needed: usize, available: usize },
    #[error("checkpoint observation layout {0} does not match this build ({OBS_LAYOUT_VERSION})")]
    LayoutMismatch(u32),
}

/// Everything needed to resume or evaluate a training run.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub net: PolicyValueNet,
    pub opt: Adam,
    pub steps_done: u64,
    pub iteration: u64,
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    let net = &ckpt.net;
    let params = net.flatten();
    debug_assert_eq!(ckpt.opt.m.len(), params.len());
    let mut out = Vec::with_capacity(64 + 8 * (net.obs_dim + 3 * params.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&OBS_LAYOUT_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.obs_dim as u32).to_le_bytes());
    out.extend_from_slice(&(net.act_dim as u32).to_le_bytes());
    out.extend_from_slice(&(net.hidden_dim as u32).to_le_bytes());
    out.extend_from_slice(&ckpt.steps_done.to_le_bytes());
    out.extend_from_slice(&ckpt.iteration.to_le_bytes());
    out.extend_from_slice(&ckpt.opt.t.to_le_bytes());
    for v in &net.scaling.divisors {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in params.iter().chain(&ckpt.opt.m).chain(&ckpt.opt.v) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &out).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.data.len() {
            return Err(CheckpointError::Truncated {
                needed: self.pos + n,
                available: self.data.len(),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>, CheckpointError> {
        let bytes = self.take(8 * n)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let data = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut r = Reader { data: &data, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let obs_layout = r.u32()?;
    if obs_layout != OBS_LAYOUT_VERSION {
        return Err(CheckpointError::LayoutMismatch(obs_layout));
    }
    let obs_dim = r.u32()? as usize;
    let act_dim = r.u32()? as usize;
    let hidden_dim = r.u32()? as usize;
    let steps_done = r.u64()?;
    let iteration = r.u64()?;
    let adam_t = r.u64()?;
    let scaling = FeatureScaling {
        divisors: r.f64_vec(obs_dim)?,
    };
    // Shape the network, then overwrite every parameter from the file.
    let mut net = PolicyValueNet::new(
        obs_dim,
        act_dim,
        hidden_dim,
        scaling,
        &mut Rng::seed_from_u64(0),
    );
    let count = net.param_count();
    net.load_flat(&r.f64_vec(count)?);
    let mut opt = Adam::new(count);
    opt.m = r.f64_vec(count)?;
    opt.v = r.f64_vec(count)?;
    opt.t = adam_t;
    if r.pos != data.len() {
        return Err(CheckpointError::Truncated {
            needed: r.pos,
            available: data.len(),
        });
    }
    Ok(Checkpoint {
        net,
        opt,
        steps_done,
        iteration,
    })
}
