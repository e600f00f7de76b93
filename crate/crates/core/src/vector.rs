//! Block vectors: one `R^C` vector per arc or per node, stored contiguously.

use std::ops::{Deref, DerefMut};

/// A sequence of equally sized blocks stored in a single buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    dim: usize,
    data: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(blocks: usize, dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; blocks * dim],
        }
    }

    /// Builds a block vector from a flat buffer. Panics if the buffer length
    /// is not a multiple of `dim`.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0, "block dimension must be positive");
        assert_eq!(
            data.len() % dim,
            0,
            "buffer length not a multiple of block dimension"
        );
        Self { dim, data }
    }

    /// Builds a block vector from nested blocks. Returns `None` when the
    /// blocks do not all have length `dim`.
    pub fn from_blocks<B: AsRef<[f64]>>(dim: usize, blocks: &[B]) -> Option<Self> {
        let mut data = Vec::with_capacity(blocks.len() * dim);
        for b in blocks {
            let b = b.as_ref();
            if b.len() != dim {
                return None;
            }
            data.extend_from_slice(b);
        }
        Some(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_blocks(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.dim.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        self.iter_blocks().map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Sum of squared entries, accumulated in ascending index order.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Euclidean inner product over all blocks, ascending index order.
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        dot(&self.data, &other.data)
    }

    pub fn distance_sq(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

macro_rules! block_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(pub BlockVector);

        impl $name {
            pub fn zeros(blocks: usize, dim: usize) -> Self {
                Self(BlockVector::zeros(blocks, dim))
            }

            pub fn from_blocks<B: AsRef<[f64]>>(dim: usize, blocks: &[B]) -> Option<Self> {
                BlockVector::from_blocks(dim, blocks).map(Self)
            }

            pub fn into_inner(self) -> BlockVector {
                self.0
            }
        }

        impl Deref for $name {
            type Target = BlockVector;
            fn deref(&self) -> &BlockVector {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut BlockVector {
                &mut self.0
            }
        }

        impl From<BlockVector> for $name {
            fn from(v: BlockVector) -> Self {
                Self(v)
            }
        }
    };
}

block_newtype!(
    /// Per-arc commodity fluxes `x_j`.
    Flow
);
block_newtype!(
    /// Per-node commodity potentials `v*_i`.
    Potential
);
block_newtype!(
    /// Per-arc dual variables `x*_j` attached to the constraint cones.
    ArcDual
);
