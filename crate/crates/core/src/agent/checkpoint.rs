//! Binary checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic "LTD3CKPT" | version u32 | config hash (str) | step u64 | config text (str)
//! network count u32, then per network: name (str), tensor count u32,
//!     per tensor: rows u64, cols u64, rows*cols f64
//! optimizer count u32, then per optimizer: name (str), t u64,
//!     lr f64, beta1 f64, beta2 f64, eps f64, tensor count u32, m tensors, v tensors
//! update counters: critic u64, actor_q u64, info u64, posterior u64
//! ```
//!
//! A `str` is a u32 byte length followed by UTF-8 bytes.

use super::learner::{Agent, UpdateCounts};
use crate::error::{Error, Result};
use crate::numerics::{AdamState, Matrix};

const MAGIC: &[u8; 8] = b"LTD3CKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub version: u32,
    pub config_hash: String,
    pub step: u64,
    pub config_text: String,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn tensor(&mut self, m: &Matrix) {
        self.u64(m.rows() as u64);
        self.u64(m.cols() as u64);
        for v in m.as_slice() {
            self.f64(*v);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8 string".into()))
    }
    /// Reads a tensor into `into`, which fixes the expected shape.
    fn tensor_into(&mut self, into: &mut Matrix, what: &str) -> Result<()> {
        let (r, c) = (self.u64()? as usize, self.u64()? as usize);
        if (r, c) != into.shape() {
            return Err(Error::Checkpoint(format!(
                "{what}: stored shape {r}x{c}, expected {}x{}",
                into.rows(),
                into.cols()
            )));
        }
        for v in into.as_mut_slice() {
            *v = self.f64()?;
        }
        Ok(())
    }
    fn expect_name(&mut self, name: &str) -> Result<()> {
        let got = self.str()?;
        if got != name {
            return Err(Error::Checkpoint(format!("expected section '{name}', found '{got}'")));
        }
        Ok(())
    }
}

fn network_names() -> [&'static str; 7] {
    [
        "actor",
        "actor_target",
        "critic1",
        "critic2",
        "critic1_target",
        "critic2_target",
        "posterior",
    ]
}

fn networks_mut(agent: &mut Agent) -> Vec<Vec<&mut Matrix>> {
    let n = &mut agent.nets;
    vec![
        n.actor.tensors_mut(),
        n.actor_target.tensors_mut(),
        n.critic1.tensors_mut(),
        n.critic2.tensors_mut(),
        n.critic1_target.tensors_mut(),
        n.critic2_target.tensors_mut(),
        n.posterior.tensors_mut(),
    ]
}

fn networks(agent: &Agent) -> Vec<Vec<&Matrix>> {
    let n = &agent.nets;
    vec![
        n.actor.tensors(),
        n.actor_target.tensors(),
        n.critic1.tensors(),
        n.critic2.tensors(),
        n.critic1_target.tensors(),
        n.critic2_target.tensors(),
        n.posterior.tensors(),
    ]
}

const OPTIMIZER_NAMES: [&str; 5] = ["actor_q", "actor_info", "critic1", "critic2", "posterior"];

fn optimizers_mut(agent: &mut Agent) -> [&mut AdamState; 5] {
    let o = &mut agent.optim;
    [
        &mut o.actor_q,
        &mut o.actor_info,
        &mut o.critic1,
        &mut o.critic2,
        &mut o.posterior,
    ]
}

pub fn encode_checkpoint(agent: &Agent, config_hash: &str, step: u64, config_text: &str) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION);
    w.str(config_hash);
    w.u64(step);
    w.str(config_text);
    let nets = networks(agent);
    w.u32(nets.len() as u32);
    for (name, tensors) in network_names().iter().zip(&nets) {
        w.str(name);
        w.u32(tensors.len() as u32);
        for t in tensors {
            w.tensor(t);
        }
    }
    let o = &agent.optim;
    let opts = [&o.actor_q, &o.actor_info, &o.critic1, &o.critic2, &o.posterior];
    w.u32(opts.len() as u32);
    for (name, adam) in OPTIMIZER_NAMES.iter().zip(opts) {
        w.str(name);
        w.u64(adam.t);
        for v in [adam.lr, adam.beta1, adam.beta2, adam.eps] {
            w.f64(v);
        }
        w.u32(adam.m.len() as u32);
        for t in adam.m.iter().chain(&adam.v) {
            w.tensor(t);
        }
    }
    let c = agent.counts;
    for v in [c.critic, c.actor_q, c.info, c.posterior] {
        w.u64(v);
    }
    w.0
}

fn read_header_from(r: &mut Reader<'_>) -> Result<CheckpointHeader> {
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    Ok(CheckpointHeader {
        version,
        config_hash: r.str()?,
        step: r.u64()?,
        config_text: r.str()?,
    })
}

pub fn read_header(bytes: &[u8]) -> Result<CheckpointHeader> {
    read_header_from(&mut Reader { bytes, pos: 0 })
}

/// Overwrites `agent`'s parameters, optimizer moments and counters with the
/// checkpoint's. `agent` must have been built from the same architecture. A
/// hash different from `expected_hash` is rejected unless `force` is set.
pub fn restore_checkpoint(agent: &mut Agent, bytes: &[u8], expected_hash: &str, force: bool) -> Result<CheckpointHeader> {
    let mut r = Reader { bytes, pos: 0 };
    let header = read_header_from(&mut r)?;
    if header.config_hash != expected_hash && !force {
        return Err(Error::Checkpoint(format!(
            "config hash mismatch: checkpoint {}, expected {expected_hash}",
            header.config_hash
        )));
    }
    // Decode into a copy so a failure leaves the caller's agent untouched.
    let mut staged = agent.clone();
    let count = r.u32()? as usize;
    if count != network_names().len() {
        return Err(Error::Checkpoint(format!("expected 7 networks, found {count}")));
    }
    for (name, mut tensors) in network_names().iter().zip(networks_mut(&mut staged)) {
        r.expect_name(name)?;
        let n = r.u32()? as usize;
        if n != tensors.len() {
            return Err(Error::Checkpoint(format!("{name}: {n} tensors, expected {}", tensors.len())));
        }
        for t in tensors.iter_mut() {
            r.tensor_into(t, name)?;
        }
    }
    let count = r.u32()? as usize;
    if count != OPTIMIZER_NAMES.len() {
        return Err(Error::Checkpoint(format!("expected 5 optimizers, found {count}")));
    }
    for (name, adam) in OPTIMIZER_NAMES.iter().zip(optimizers_mut(&mut staged)) {
        r.expect_name(name)?;
        adam.t = r.u64()?;
        adam.lr = r.f64()?;
        adam.beta1 = r.f64()?;
        adam.beta2 = r.f64()?;
        adam.eps = r.f64()?;
        let n = r.u32()? as usize;
        if n != adam.m.len() {
            return Err(Error::Checkpoint(format!("optimizer {name}: {n} tensors, expected {}", adam.m.len())));
        }
        for t in adam.m.iter_mut().chain(adam.v.iter_mut()) {
            r.tensor_into(t, name)?;
        }
    }
    staged.counts = UpdateCounts {
        critic: r.u64()?,
        actor_q: r.u64()?,
        info: r.u64()?,
        posterior: r.u64()?,
    };
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after checkpoint".into()));
    }
    *agent = staged;
    Ok(header)
}
