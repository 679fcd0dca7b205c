//! Versioned binary checkpoints.
//!
//! Layout: 8-byte magic `HLABCKP1`, little-endian u32 JSON-header length,
//! the JSON header (dims, bounds, hyperparameters, seed, temperature, and a
//! free-form config snapshot), then the five parameter blocks — policy, Q₁,
//! Q₂, Q₁-target, Q₂-target — as packed little-endian f64 in
//! layer-major order (weights before biases per layer). Round-trips are
//! bit-exact; optimizer moments are not persisted.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Mlp, SacAgent, SacHyper};

const MAGIC: &[u8; 8] = b"HLABCKP1";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    obs_dim: usize,
    act_dim: usize,
    bounds: Vec<(f64, f64)>,
    hyper: SacHyper,
    seed: u64,
    log_alpha: f64,
    /// Experiment config snapshot so evaluation can rebuild the environment.
    config: String,
}

fn write_net(w: &mut impl Write, net: &Mlp) -> Result<()> {
    for v in net.flatten() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_net(r: &mut impl Read, dims: &[usize]) -> Result<Mlp> {
    let count = Mlp::zeros(dims)?.param_count();
    let mut flat = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        flat.push(f64::from_le_bytes(buf));
    }
    Mlp::from_flat(dims, &flat)
}

pub fn save_checkpoint(path: &Path, agent: &SacAgent, config: &str) -> Result<()> {
    let header = Header {
        version: VERSION,
        obs_dim: agent.obs_dim,
        act_dim: agent.act_dim,
        bounds: agent.bounds.pairs(),
        hyper: agent.hyper.clone(),
        seed: agent.seed,
        log_alpha: agent.log_alpha,
        config: config.to_string(),
    };
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| Error::Data(format!("checkpoint header: {e}")))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for net in [&agent.policy, &agent.q1, &agent.q2, &agent.q1_targ, &agent.q2_targ] {
        write_net(&mut w, net)?;
    }
    w.flush()?;
    Ok(())
}

/// Returns the rebuilt agent and the stored config snapshot.
pub fn load_checkpoint(path: &Path) -> Result<(SacAgent, String)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Data(format!(
            "{} is not a checkpoint (bad magic)",
            path.display()
        )));
    }
    let mut len_buf = [0u8; 4];
    r.read_exact(&mut len_buf)?;
    let header_len = u32::from_le_bytes(len_buf) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Data(format!("checkpoint header: {e}")))?;
    if header.version != VERSION {
        return Err(Error::Data(format!(
            "checkpoint version {} unsupported (expected {VERSION})",
            header.version
        )));
    }

    let mut policy_dims = vec![header.obs_dim];
    policy_dims.extend(&header.hyper.hidden);
    policy_dims.push(2 * header.act_dim);
    let mut q_dims = vec![header.obs_dim + header.act_dim];
    q_dims.extend(&header.hyper.hidden);
    q_dims.push(1);

    let policy = read_net(&mut r, &policy_dims)?;
    let q1 = read_net(&mut r, &q_dims)?;
    let q2 = read_net(&mut r, &q_dims)?;
    let q1_targ = read_net(&mut r, &q_dims)?;
    let q2_targ = read_net(&mut r, &q_dims)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Data("checkpoint has trailing bytes".into()));
    }

    let agent = SacAgent::from_parts(
        header.obs_dim,
        header.act_dim,
        &header.bounds,
        &header.hyper,
        header.seed,
        header.log_alpha,
        [policy, q1, q2, q1_targ, q2_targ],
    )?;
    Ok((agent, header.config))
}
