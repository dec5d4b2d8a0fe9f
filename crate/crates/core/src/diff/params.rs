use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use crate::real::Real;

/// A named, shaped block of trainable values stored contiguously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { name: name.into(), shape, data: vec![T::zero(); n] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Anything that owns trainable tensors in a fixed order.
pub trait Parameters<T: Real> {
    fn tensors(&self) -> Vec<&Tensor<T>>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Order-sensitive hash of the exact bit patterns of every parameter.
    fn checksum(&self) -> u64 {
        // FNV-1a over the f64 bit patterns.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in self.tensors() {
            for v in &t.data {
                for b in v.as_f64().to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }
}

/// Binds every tensor of `module` as a trainable leaf, in `tensors()` order.
pub fn bind_params<'a, T: Real, M: Parameters<T> + ?Sized>(tape: &mut Tape<'a, T>, module: &'a M) -> Vec<Var> {
    module.tensors().into_iter().map(|t| tape.param(&t.data)).collect()
}
