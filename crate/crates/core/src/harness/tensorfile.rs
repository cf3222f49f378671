//! Little-endian tensor container.
//!
//! ```text
//! magic   "RNTF"            4 bytes
//! version u32               currently 1
//! count   u32               number of tensors
//! per tensor:
//!   name_len u32, name (UTF-8, name_len bytes)
//!   ndim u32, dims u64 x ndim
//!   data f32 x prod(dims), row-major
//! ```

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RNTF";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let want: usize = shape.iter().product();
        if want != data.len() {
            return Err(Error::TensorFile(format!("{name}: shape {shape:?} needs {want} values, got {}", data.len())));
        }
        Ok(Self { name, shape, data })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorFile {
    tensors: Vec<Tensor>,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::TensorFile(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl TensorFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: Tensor) -> Result<()> {
        if self.get(&t.name).is_some() {
            return Err(Error::TensorFile(format!("duplicate tensor {}", t.name)));
        }
        self.tensors.push(t);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name).ok_or_else(|| Error::TensorFile(format!("missing tensor {name}")))
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor { buf: bytes, pos: 0 };
        if c.take(4)? != MAGIC {
            return Err(Error::TensorFile("bad magic".into()));
        }
        let version = c.u32()?;
        if version != VERSION {
            return Err(Error::TensorFile(format!("unsupported version {version}")));
        }
        let count = c.u32()?;
        let mut file = TensorFile::new();
        for _ in 0..count {
            let len = c.u32()? as usize;
            let name = std::str::from_utf8(c.take(len)?)
                .map_err(|_| Error::TensorFile("tensor name is not UTF-8".into()))?
                .to_string();
            let ndim = c.u32()? as usize;
            let shape: Vec<usize> = (0..ndim).map(|_| c.u64().map(|d| d as usize)).collect::<Result<_>>()?;
            let numel = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| Error::TensorFile(format!("{name}: size overflow")))?;
            let raw = c.take(numel)?;
            let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
            file.push(Tensor { name, shape, data })?;
        }
        if c.pos != bytes.len() {
            return Err(Error::TensorFile(format!("{} trailing bytes", bytes.len() - c.pos)));
        }
        Ok(file)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }
}
