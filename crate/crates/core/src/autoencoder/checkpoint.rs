//! Binary checkpoint format.
//!
//! ```text
//! magic "D3RCKPT" | version u32
//! layer count u32 | per layer: kind u8, in u32, out u32
//! epochs_completed u64
//! tensor count u32 | per tensor: name len u32, name, rank u32, dims u32*, f32 data
//! has_optimizer u8 | [step u64, tensor count u32, tensors named adam.m.* / adam.v.*]
//! ```
//!
//! All integers and floats are little-endian.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::adam::OptimState;
use super::model::{Architecture, LayerKind, LayerSpec, ModelParams};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 7] = b"D3RCKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub optimizer: Option<OptimState<f32>>,
    pub epochs_completed: u64,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("value fits in u32");
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn tensor(&mut self, name: &str, t: &Tensor<f32>) {
        self.u32(name.len());
        self.0.extend_from_slice(name.as_bytes());
        self.u32(t.shape().len());
        for &d in t.shape() {
            self.u32(d);
        }
        for v in t.data() {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn tensor(&mut self) -> Result<(String, Tensor<f32>)> {
        let len = self.u32()?;
        let name = String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        let rank = self.u32()?;
        let shape = (0..rank).map(|_| self.u32()).collect::<Result<Vec<_>>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Checkpoint(format!("tensor {name} is too large")))?;
        let bytes = self.take(count.checked_mul(4).ok_or_else(|| Error::Checkpoint("overflow".into()))?)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok((name, Tensor::from_vec(&shape, data)?))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION as usize);
        let specs = self.params.architecture().layer_specs();
        w.u32(specs.len());
        for s in &specs {
            w.u8(s.kind.code());
            w.u32(s.in_channels);
            w.u32(s.out_channels);
        }
        w.u64(self.epochs_completed);
        let tensors = self.params.tensors();
        w.u32(tensors.len());
        for (i, role, t) in tensors {
            w.tensor(&ModelParams::<f32>::tensor_name(i, role), t);
        }
        match &self.optimizer {
            None => w.u8(0),
            Some(opt) => {
                w.u8(1);
                w.u64(opt.step);
                w.u32(opt.m.len() + opt.v.len());
                for (k, t) in opt.m.iter().enumerate() {
                    w.tensor(&format!("adam.m.{k}"), t);
                }
                for (k, t) in opt.v.iter().enumerate() {
                    w.tensor(&format!("adam.v.{k}"), t);
                }
            }
        }
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != VERSION as usize {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let n_layers = r.u32()?;
        let mut specs = Vec::with_capacity(n_layers.min(1024));
        for _ in 0..n_layers {
            let code = r.u8()?;
            let kind =
                LayerKind::from_code(code).ok_or_else(|| Error::Checkpoint(format!("unknown layer kind {code}")))?;
            specs.push(LayerSpec {
                kind,
                in_channels: r.u32()?,
                out_channels: r.u32()?,
            });
        }
        let arch = Architecture::from_specs(&specs)?;
        let epochs_completed = r.u64()?;

        let n_tensors = r.u32()?;
        let mut named = HashMap::new();
        for _ in 0..n_tensors {
            let (name, t) = r.tensor()?;
            if named.insert(name.clone(), t).is_some() {
                return Err(Error::Checkpoint(format!("duplicate tensor {name}")));
            }
        }
        let mut params = ModelParams::<f32>::init(arch, 0);
        for (i, role, slot) in params.tensors_mut() {
            let name = ModelParams::<f32>::tensor_name(i, role);
            let t = named
                .remove(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            if t.shape() != slot.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t;
        }
        if let Some(extra) = named.keys().next() {
            return Err(Error::Checkpoint(format!("unexpected tensor {extra}")));
        }

        let optimizer = match r.u8()? {
            0 => None,
            1 => {
                let step = r.u64()?;
                let count = r.u32()?;
                let mut named = HashMap::new();
                for _ in 0..count {
                    let (name, t) = r.tensor()?;
                    named.insert(name, t);
                }
                let shapes: Vec<Vec<usize>> = params.trainable().iter().map(|t| t.shape().to_vec()).collect();
                if count != 2 * shapes.len() {
                    return Err(Error::Checkpoint("optimizer state does not match the model".into()));
                }
                let mut take = |prefix: &str| -> Result<Vec<Tensor<f32>>> {
                    shapes
                        .iter()
                        .enumerate()
                        .map(|(k, shape)| {
                            let name = format!("adam.{prefix}.{k}");
                            let t = named
                                .remove(&name)
                                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
                            if t.shape() != shape.as_slice() {
                                return Err(Error::Checkpoint(format!("tensor {name} has the wrong shape")));
                            }
                            Ok(t)
                        })
                        .collect()
                };
                let m = take("m")?;
                let v = take("v")?;
                Some(OptimState { step, m, v })
            }
            flag => return Err(Error::Checkpoint(format!("bad optimizer flag {flag}"))),
        };
        if r.pos != buf.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        Ok(Checkpoint {
            params,
            optimizer,
            epochs_completed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf).map_err(|e| match e {
            Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
