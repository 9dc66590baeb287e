//! Versioned binary checkpoint format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "EVORLNET"
//! version    u32
//! method     u32 length + UTF-8 bytes
//! head       class u8, kind u8, level u8, categories u32, tsp_nodes u32
//! tensors    u32 count, then per tensor: u32 ndim, u32 dims..., f32 data
//! ```
//!
//! Tensors appear in canonical order (trunk weight/bias pairs, actor,
//! critic). Loading a saved network reproduces it bit-exactly.

use super::{HeadSpec, NetworkParams, OutputLevel, TRUNK_DEPTH};
use crate::dist::DistKind;
use crate::error::{Error, Result};
use crate::problems::ProblemClass;
use ndarray::prelude::*;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"EVORLNET";
const VERSION: u32 = 1;

fn class_tag(c: ProblemClass) -> u8 {
    match c {
        ProblemClass::Knapsack => 0,
        ProblemClass::Tsp => 1,
        ProblemClass::Continuous => 2,
    }
}

fn class_from(tag: u8) -> Result<ProblemClass> {
    match tag {
        0 => Ok(ProblemClass::Knapsack),
        1 => Ok(ProblemClass::Tsp),
        2 => Ok(ProblemClass::Continuous),
        t => Err(Error::parse(format!("bad class tag {t}"))),
    }
}

fn kind_tag(k: DistKind) -> u8 {
    match k {
        DistKind::Bernoulli => 0,
        DistKind::Beta => 1,
        DistKind::Categorical => 2,
        DistKind::Normal => 3,
    }
}

fn kind_from(tag: u8) -> Result<DistKind> {
    match tag {
        0 => Ok(DistKind::Bernoulli),
        1 => Ok(DistKind::Beta),
        2 => Ok(DistKind::Categorical),
        3 => Ok(DistKind::Normal),
        t => Err(Error::parse(format!("bad distribution tag {t}"))),
    }
}

fn level_tag(l: OutputLevel) -> u8 {
    match l {
        OutputLevel::Population => 0,
        OutputLevel::Individual => 1,
        OutputLevel::Component => 2,
    }
}

fn level_from(tag: u8) -> Result<OutputLevel> {
    match tag {
        0 => Ok(OutputLevel::Population),
        1 => Ok(OutputLevel::Individual),
        2 => Ok(OutputLevel::Component),
        t => Err(Error::parse(format!("bad output-level tag {t}"))),
    }
}

/// Serializes network parameters to the binary checkpoint format.
pub fn save_checkpoint(params: &NetworkParams, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let method = params.method.as_bytes();
    buf.extend_from_slice(&(method.len() as u32).to_le_bytes());
    buf.extend_from_slice(method);
    buf.push(class_tag(params.head.class));
    buf.push(kind_tag(params.head.kind));
    buf.push(level_tag(params.head.level));
    buf.extend_from_slice(&(params.head.categories as u32).to_le_bytes());
    buf.extend_from_slice(&(params.head.tsp_nodes as u32).to_le_bytes());

    let tensors = params.tensors();
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in &tensors {
        buf.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::parse("checkpoint truncated"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Loads network parameters from a checkpoint file.
pub fn load_checkpoint(path: &Path) -> Result<NetworkParams> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = Reader { data: &bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::parse("bad checkpoint magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::parse(format!("unsupported checkpoint version {version}")));
    }
    let mlen = r.u32()? as usize;
    let method = String::from_utf8(r.take(mlen)?.to_vec())
        .map_err(|_| Error::parse("method id is not UTF-8"))?;
    let head = HeadSpec {
        class: class_from(r.u8()?)?,
        kind: kind_from(r.u8()?)?,
        level: level_from(r.u8()?)?,
        categories: r.u32()? as usize,
        tsp_nodes: r.u32()? as usize,
    };
    let count = r.u32()? as usize;
    if count != 2 * TRUNK_DEPTH + 4 {
        return Err(Error::parse(format!("unexpected tensor count {count}")));
    }
    let mut tensors: Vec<ArrayD<f32>> = Vec::with_capacity(count);
    for _ in 0..count {
        let ndim = r.u32()? as usize;
        if ndim > 2 {
            return Err(Error::parse("tensor rank too high"));
        }
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.u32()? as usize);
        }
        let n: usize = dims.iter().product();
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            vals.push(r.f32()?);
        }
        tensors.push(
            ArrayD::from_shape_vec(IxDyn(&dims), vals)
                .map_err(|_| Error::parse("tensor shape mismatch"))?,
        );
    }
    if r.pos != bytes.len() {
        return Err(Error::parse("trailing bytes in checkpoint"));
    }

    let zero = |inf: usize, outf: usize| super::ConvLayer {
        weight: Array2::zeros((inf, outf)),
        bias: Array1::zeros(outf),
    };
    let mut params = NetworkParams {
        method,
        head,
        trunk: (0..TRUNK_DEPTH).map(|_| zero(1, 1)).collect(),
        actor: zero(1, 1),
        critic: zero(1, 1),
        version,
    };
    params.set_tensors(&tensors);
    params.validate()?;
    Ok(params)
}
