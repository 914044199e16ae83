//! Versioned binary snapshot of an agent and its training configuration.
//!
//! Layout (little-endian): magic `EECOCKPT`, `u32` version, `u32` length +
//! UTF-8 TOML of the [`TrainConfig`], then four networks (actor, critic,
//! target actor, target critic). Each network is a `u32` layer count
//! followed per layer by `u32` outputs, `u32` inputs, `u8` activation tag,
//! the weights row-major and the biases as raw `f64`s.

use std::path::Path;

use ndarray::{Array1, Array2};

use super::agent::Agent;
use super::nn::{Activation, DenseNet, Layer};
use super::train::TrainConfig;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"EECOCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_net(out: &mut Vec<u8>, net: &DenseNet) {
    put_u32(out, net.layers.len() as u32);
    for l in &net.layers {
        put_u32(out, l.outputs() as u32);
        put_u32(out, l.inputs() as u32);
        out.push(l.activation.tag());
        for v in l.weights.iter().chain(l.bias.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn to_bytes(agent: &Agent, cfg: &TrainConfig) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    let text = toml::to_string(cfg)?;
    put_u32(&mut out, text.len() as u32);
    out.extend_from_slice(text.as_bytes());
    for net in [&agent.actor, &agent.critic, &agent.target_actor, &agent.target_critic] {
        put_net(&mut out, net);
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn net(&mut self) -> Result<DenseNet> {
        let count = self.u32()? as usize;
        if count == 0 {
            return Err(Error::Checkpoint("network without layers".into()));
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let outputs = self.u32()? as usize;
            let inputs = self.u32()? as usize;
            let tag = self.take(1)?[0];
            let activation = Activation::from_tag(tag)
                .ok_or_else(|| Error::Checkpoint(format!("unknown activation tag {tag}")))?;
            let weights = Array2::from_shape_vec((outputs, inputs), self.f64s(outputs * inputs)?)
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
            let bias = Array1::from(self.f64s(outputs)?);
            if let Some(prev) = layers.last().map(Layer::outputs) {
                if prev != inputs {
                    return Err(Error::Checkpoint("layer sizes do not chain".into()));
                }
            }
            layers.push(Layer {
                weights,
                bias,
                activation,
            });
        }
        Ok(DenseNet { layers })
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<(Agent, TrainConfig)> {
    let mut r = Reader { buf: bytes };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let len = r.u32()? as usize;
    let text = std::str::from_utf8(r.take(len)?).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let cfg: TrainConfig = toml::from_str(text)?;
    let (actor, critic, ta, tc) = (r.net()?, r.net()?, r.net()?, r.net()?);
    if !r.buf.is_empty() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok((Agent::from_nets(actor, critic, ta, tc)?, cfg))
}

pub fn save_checkpoint(path: &Path, agent: &Agent, cfg: &TrainConfig) -> Result<()> {
    std::fs::write(path, to_bytes(agent, cfg)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Agent, TrainConfig)> {
    from_bytes(&std::fs::read(path)?)
}
