//! Sparse codes: placements of dictionary atoms with coefficients.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// One translated atom: atom index plus the top-left corner of its `m x m`
/// support inside the image. Only fully-inside placements are representable,
/// so `row <= height - m` and `col <= width - m` always hold in a valid code.
///
/// The derived ordering (atom, then row, then col) is the tie-break and
/// iteration order used throughout the library; keep the field order intact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Placement {
    pub atom: usize,
    pub row: usize,
    pub col: usize,
}

impl Placement {
    pub fn new(atom: usize, row: usize, col: usize) -> Self {
        Placement { atom, row, col }
    }
}

/// A sparse code over a fixed dictionary shape and image geometry.
///
/// Entries live in a `BTreeMap` so iteration is deterministic (sorted by
/// `(atom, row, col)`), which keeps reconstruction and serialization
/// reproducible down to floating-point rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    p: usize,
    m: usize,
    height: usize,
    width: usize,
    entries: BTreeMap<Placement, f64>,
}

impl SparseCode {
    pub fn empty(p: usize, m: usize, height: usize, width: usize) -> Result<Self> {
        if p == 0 || m == 0 {
            return Err(Error::param("code needs p >= 1 and m >= 1"));
        }
        if height < m || width < m {
            return Err(Error::param(format!(
                "image {height}x{width} too small for m={m}"
            )));
        }
        Ok(SparseCode {
            p,
            m,
            height,
            width,
            entries: BTreeMap::new(),
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn placement_in_range(&self, plc: Placement) -> bool {
        plc.atom < self.p && plc.row + self.m <= self.height && plc.col + self.m <= self.width
    }

    /// Inserts or overwrites the coefficient of `plc`.
    pub fn set(&mut self, plc: Placement, coeff: f64) -> Result<()> {
        if !self.placement_in_range(plc) {
            return Err(Error::param(format!("placement {plc:?} out of range")));
        }
        self.entries.insert(plc, coeff);
        Ok(())
    }

    /// Adds `delta` to the coefficient of `plc` (creating it if absent).
    pub fn add(&mut self, plc: Placement, delta: f64) -> Result<()> {
        if !self.placement_in_range(plc) {
            return Err(Error::param(format!("placement {plc:?} out of range")));
        }
        *self.entries.entry(plc).or_insert(0.0) += delta;
        Ok(())
    }

    pub fn get(&self, plc: Placement) -> Option<f64> {
        self.entries.get(&plc).copied()
    }

    pub fn contains(&self, plc: Placement) -> bool {
        self.entries.contains_key(&plc)
    }

    /// Number of stored placements (the code's ℓ0 count).
    pub fn l0(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorted iteration over `(placement, coefficient)`.
    pub fn iter(&self) -> impl Iterator<Item = (Placement, f64)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    pub fn placements(&self) -> impl Iterator<Item = Placement> + '_ {
        self.entries.keys().copied()
    }
}
