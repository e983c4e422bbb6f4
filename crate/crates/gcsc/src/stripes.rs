//! Coverage accounting for the ℓ0,∞ sparsity model.
//!
//! The quantity controlled everywhere in this crate is *coverage*: how many
//! placements of the code touch a given pixel. The ℓ0,∞ measure of a code is
//! its densest pixel. A "layer" is a set of pairwise non-overlapping
//! placements, so a code assembled from `k` layers has ℓ0,∞ at most `k`.

use crate::code::{Placement, SparseCode};
use crate::error::{Error, Result};

/// Do the `m x m` supports at two corners intersect?
#[inline]
pub fn overlaps(a: Placement, b: Placement, m: usize) -> bool {
    a.row.abs_diff(b.row) < m && a.col.abs_diff(b.col) < m
}

/// Per-pixel count of covering placements.
#[derive(Debug, Clone)]
pub struct CoverageGrid {
    height: usize,
    width: usize,
    m: usize,
    counts: Vec<u32>,
}

impl CoverageGrid {
    pub fn new(height: usize, width: usize, m: usize) -> Self {
        CoverageGrid {
            height,
            width,
            m,
            counts: vec![0; height * width],
        }
    }

    pub fn add(&mut self, plc: Placement) {
        debug_assert!(plc.row + self.m <= self.height && plc.col + self.m <= self.width);
        for u in 0..self.m {
            let base = (plc.row + u) * self.width + plc.col;
            for v in 0..self.m {
                self.counts[base + v] += 1;
            }
        }
    }

    #[inline]
    pub fn count(&self, row: usize, col: usize) -> u32 {
        self.counts[row * self.width + col]
    }

    /// Densest pixel.
    pub fn max_count(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// May `plc` be added while keeping every pixel's coverage at most
    /// `budget`? True iff all pixels under its support currently count less
    /// than `budget`.
    pub fn can_add(&self, plc: Placement, budget: usize) -> bool {
        let budget = budget as u32;
        for u in 0..self.m {
            let base = (plc.row + u) * self.width + plc.col;
            for v in 0..self.m {
                if self.counts[base + v] >= budget {
                    return false;
                }
            }
        }
        true
    }
}

/// The ℓ0,∞ measure of a code: the maximum, over pixels, of the number of
/// stored placements whose support covers that pixel.
pub fn l0inf(code: &SparseCode) -> usize {
    let mut grid = CoverageGrid::new(code.height(), code.width(), code.m());
    for plc in code.placements() {
        grid.add(plc);
    }
    grid.max_count() as usize
}

/// Blocked corners in the placement domain. Selecting a placement during a
/// pursuit layer blocks every corner whose support would overlap it.
#[derive(Debug, Clone)]
pub struct BlockMask {
    rows: usize,
    cols: usize,
    m: usize,
    blocked: Vec<bool>,
}

impl BlockMask {
    /// `rows x cols` is the per-atom corner domain (`H-m+1 x W-m+1`).
    pub fn new(rows: usize, cols: usize, m: usize) -> Self {
        BlockMask {
            rows,
            cols,
            m,
            blocked: vec![false; rows * cols],
        }
    }

    #[inline]
    pub fn is_blocked(&self, row: usize, col: usize) -> bool {
        self.blocked[row * self.cols + col]
    }

    /// Blocks all corners within `m-1` of `(row, col)` in both axes — exactly
    /// the placements (of any atom) whose support overlaps the one selected.
    pub fn block_around(&mut self, row: usize, col: usize) {
        let r0 = row.saturating_sub(self.m - 1);
        let r1 = (row + self.m - 1).min(self.rows - 1);
        let c0 = col.saturating_sub(self.m - 1);
        let c1 = (col + self.m - 1).min(self.cols - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                self.blocked[r * self.cols + c] = true;
            }
        }
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|&&b| b).count()
    }
}

/// The sandwich between the two sparsity counts: `l0inf <= l0` always, and a
/// pixel budget of `l0inf` caps the total at `floor(H*W / m^2) * l0inf`
/// because each layer packs at most that many disjoint `m x m` supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparsityBounds {
    pub l0: usize,
    pub l0inf: usize,
    pub bound_holds: bool,
}

pub fn l0_l0inf_bounds(code: &SparseCode) -> Result<SparsityBounds> {
    let m = code.m();
    if m == 0 {
        return Err(Error::param("kernel side must be positive"));
    }
    let l0 = code.l0();
    let linf = l0inf(code);
    let per_layer = (code.height() * code.width()) / (m * m);
    let bound_holds = linf <= l0 && l0 <= per_layer * linf;
    Ok(SparsityBounds {
        l0,
        l0inf: linf,
        bound_holds,
    })
}
