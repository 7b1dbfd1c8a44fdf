//! Policy checkpoint: magic string, little-endian `u64` header, then raw `f64` arrays.
//!
//! ```text
//! magic                      20 bytes
//! history_len, include_velocity, input_dim, output_dim, n_hidden   u64 each
//! hidden[n_hidden]           u64 each
//! n_obs_scale, n_params      u64 each
//! obs_scale[n_obs_scale]     f64 each
//! params[n_params]           f64 each
//! ```

use std::io::{self, Read, Write};

use thiserror::Error;

use super::{Mlp, MlpSpec, NnError};

pub const CHECKPOINT_MAGIC: &[u8; 20] = b"SLOTBENCH-POLICY-v1\n";

/// Hidden widths and counts larger than this are treated as corruption.
const MAX_COUNT: u64 = 1 << 28;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a policy checkpoint (bad magic)")]
    BadMagic,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Shape(#[from] NnError),
}

/// Actor network plus the observation layout it was trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub history_len: usize,
    pub include_velocity: bool,
    /// Multiplies each raw observation component before the network.
    pub obs_scale: Vec<f64>,
    pub actor: Mlp,
}

fn put(w: &mut impl Write, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get(r: &mut impl Read) -> Result<u64, CheckpointError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_count(r: &mut impl Read, what: &str) -> Result<usize, CheckpointError> {
    let v = get(r)?;
    if v > MAX_COUNT {
        return Err(CheckpointError::Corrupt(format!("{what} = {v} is implausible")));
    }
    Ok(v as usize)
}

fn get_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>, CheckpointError> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

pub fn write_checkpoint(w: &mut impl Write, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    let spec = &ckpt.actor.spec;
    w.write_all(CHECKPOINT_MAGIC)?;
    put(w, ckpt.history_len as u64)?;
    put(w, ckpt.include_velocity as u64)?;
    put(w, spec.input_dim as u64)?;
    put(w, spec.output_dim as u64)?;
    put(w, spec.hidden.len() as u64)?;
    for h in &spec.hidden {
        put(w, *h as u64)?;
    }
    put(w, ckpt.obs_scale.len() as u64)?;
    put(w, ckpt.actor.params.len() as u64)?;
    for v in ckpt.obs_scale.iter().chain(&ckpt.actor.params) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<Checkpoint, CheckpointError> {
    let mut magic = [0u8; 20];
    r.read_exact(&mut magic).map_err(|_| CheckpointError::BadMagic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let history_len = get_count(r, "history_len")?;
    let include_velocity = match get(r)? {
        0 => false,
        1 => true,
        v => return Err(CheckpointError::Corrupt(format!("include_velocity flag {v}"))),
    };
    let input_dim = get_count(r, "input_dim")?;
    let output_dim = get_count(r, "output_dim")?;
    let n_hidden = get_count(r, "hidden layer count")?;
    if n_hidden > 64 {
        return Err(CheckpointError::Corrupt(format!("{n_hidden} hidden layers")));
    }
    let hidden = (0..n_hidden).map(|_| get_count(r, "hidden width")).collect::<Result<Vec<_>, _>>()?;
    let n_scale = get_count(r, "obs_scale length")?;
    let n_params = get_count(r, "parameter count")?;
    if n_scale != input_dim {
        return Err(CheckpointError::Corrupt(format!("obs_scale has {n_scale} entries for input width {input_dim}")));
    }
    let spec = MlpSpec::new(input_dim, hidden, output_dim)?;
    if spec.n_params() != n_params {
        return Err(CheckpointError::Corrupt(format!(
            "{n_params} parameters stored, layout needs {}",
            spec.n_params()
        )));
    }
    let obs_scale = get_f64s(r, n_scale)?;
    let params = get_f64s(r, n_params)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(CheckpointError::Corrupt("trailing bytes".into()));
    }
    Ok(Checkpoint { history_len, include_velocity, obs_scale, actor: Mlp::from_params(spec, params)? })
}
