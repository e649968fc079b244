//! Typed parameter tensors, serialized as base64 of little-endian values.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    I8(Vec<i8>),
    U8(Vec<u8>),
    U16(Vec<u16>),
    I32(Vec<i32>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::I8(v) => v.len(),
            TensorData::U8(v) => v.len(),
            TensorData::U16(v) => v.len(),
            TensorData::I32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> &'static str {
        match self {
            TensorData::F32(_) => "f32",
            TensorData::I8(_) => "i8",
            TensorData::U8(_) => "u8",
            TensorData::U16(_) => "u16",
            TensorData::I32(_) => "i32",
        }
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        match self {
            TensorData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            TensorData::I8(v) => v.iter().map(|x| *x as u8).collect(),
            TensorData::U8(v) => v.clone(),
            TensorData::U16(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            TensorData::I32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }

    fn from_le_bytes(dtype: &str, bytes: &[u8]) -> Result<Self> {
        fn chunks<const N: usize, T>(bytes: &[u8], f: fn([u8; N]) -> T) -> Result<Vec<T>> {
            if bytes.len() % N != 0 {
                return Err(Error::Format(format!(
                    "{} bytes is not a multiple of {N}",
                    bytes.len()
                )));
            }
            Ok(bytes
                .chunks_exact(N)
                .map(|c| f(c.try_into().expect("chunk size")))
                .collect())
        }
        Ok(match dtype {
            "f32" => TensorData::F32(chunks(bytes, f32::from_le_bytes)?),
            "i8" => TensorData::I8(bytes.iter().map(|b| *b as i8).collect()),
            "u8" => TensorData::U8(bytes.to_vec()),
            "u16" => TensorData::U16(chunks(bytes, u16::from_le_bytes)?),
            "i32" => TensorData::I32(chunks(bytes, i32::from_le_bytes)?),
            other => return Err(Error::Format(format!("unknown dtype {other:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: TensorData) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn f32(shape: Vec<usize>, v: Vec<f32>) -> Self {
        Self::new(shape, TensorData::F32(v))
    }

    pub fn byte_len(&self) -> usize {
        self.data.to_le_bytes().len()
    }
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    dtype: String,
    shape: Vec<usize>,
    data: String,
}

impl Serialize for Tensor {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TensorRepr {
            dtype: self.data.dtype().to_owned(),
            shape: self.shape.clone(),
            data: STANDARD.encode(self.data.to_le_bytes()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Tensor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = TensorRepr::deserialize(d)?;
        let bytes = STANDARD.decode(&repr.data).map_err(D::Error::custom)?;
        let data = TensorData::from_le_bytes(&repr.dtype, &bytes).map_err(D::Error::custom)?;
        if repr.shape.iter().product::<usize>() != data.len() {
            return Err(D::Error::custom(format!(
                "shape {:?} does not match {} elements",
                repr.shape,
                data.len()
            )));
        }
        Ok(Tensor {
            shape: repr.shape,
            data,
        })
    }
}

/// Named tensors in deterministic (sorted) order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TensorMap(pub BTreeMap<String, Tensor>);

impl TensorMap {
    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.0.insert(name.into(), t);
    }

    pub fn byte_len(&self) -> usize {
        self.0.values().map(Tensor::byte_len).sum()
    }

    fn get(&self, name: &str) -> Result<&Tensor> {
        self.0
            .get(name)
            .ok_or_else(|| Error::Format(format!("missing tensor {name:?}")))
    }

    fn typed<'a, T>(
        &'a self,
        name: &str,
        dtype: &str,
        pick: fn(&'a TensorData) -> Option<&'a Vec<T>>,
    ) -> Result<&'a [T]> {
        let t = self.get(name)?;
        pick(&t.data).map(Vec::as_slice).ok_or_else(|| {
            Error::Format(format!(
                "tensor {name:?} is {}, expected {dtype}",
                t.data.dtype()
            ))
        })
    }

    pub fn f32(&self, name: &str) -> Result<&[f32]> {
        self.typed(name, "f32", |d| {
            if let TensorData::F32(v) = d {
                Some(v)
            } else {
                None
            }
        })
    }

    pub fn i8(&self, name: &str) -> Result<&[i8]> {
        self.typed(name, "i8", |d| {
            if let TensorData::I8(v) = d {
                Some(v)
            } else {
                None
            }
        })
    }

    pub fn u8(&self, name: &str) -> Result<&[u8]> {
        self.typed(name, "u8", |d| {
            if let TensorData::U8(v) = d {
                Some(v)
            } else {
                None
            }
        })
    }

    pub fn u16(&self, name: &str) -> Result<&[u16]> {
        self.typed(name, "u16", |d| {
            if let TensorData::U16(v) = d {
                Some(v)
            } else {
                None
            }
        })
    }

    pub fn i32(&self, name: &str) -> Result<&[i32]> {
        self.typed(name, "i32", |d| {
            if let TensorData::I32(v) = d {
                Some(v)
            } else {
                None
            }
        })
    }

    pub fn shape(&self, name: &str) -> Result<&[usize]> {
        Ok(&self.get(name)?.shape)
    }
}
