//! Convolutional operators: score fields (valid cross-correlation of an image
//! with every atom), reconstruction from sparse codes, and the forward/adjoint
//! maps used by the dictionary-update solvers.
//!
//! Placements are restricted to kernels fully inside the image, so a score
//! field over an `H x W` image with kernel side `m` has `(H-m+1) x (W-m+1)`
//! entries per atom. Two engines compute the same field: a direct triple loop
//! (the reference, exact by construction) and an FFT path that evaluates all
//! shifts of one atom at once. Both are exposed because tests pin the direct
//! engine as the oracle for the FFT one.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::code::SparseCode;
use crate::dictionary::LocalDictionary;
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Which correlation implementation to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    Direct,
    #[default]
    Fft,
}

/// Scores of every placement: `p` planes of `rows x cols`, where
/// `rows = H-m+1`, `cols = W-m+1`. Flat layout is plane-major then row-major,
/// so ascending flat index enumerates placements in `(atom, row, col)` order.
#[derive(Debug, Clone)]
pub struct ScoreField {
    p: usize,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScoreField {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, atom: usize, row: usize, col: usize) -> f64 {
        self.data[(atom * self.rows + row) * self.cols + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Decodes a flat index back into `(atom, row, col)`.
    #[inline]
    pub fn decode(&self, flat: usize) -> (usize, usize, usize) {
        let plane = self.rows * self.cols;
        let atom = flat / plane;
        let rest = flat % plane;
        (atom, rest / self.cols, rest % self.cols)
    }
}

struct FftState {
    fwd_row: Arc<dyn Fft<f64>>,
    fwd_col: Arc<dyn Fft<f64>>,
    inv_row: Arc<dyn Fft<f64>>,
    inv_col: Arc<dyn Fft<f64>>,
    /// Forward transform of each zero-padded atom, length `H*W`.
    atom_spectra: Vec<Vec<Complex<f64>>>,
}

/// A score-field evaluator bound to one dictionary and one image geometry.
///
/// Constructing it once per pursuit amortizes FFT planning and the atom
/// transforms across all layers; it also counts how many fields it has built,
/// which lets tests verify the one-field-per-layer contract of the pursuit
/// algorithms.
pub struct Correlator {
    engine: Engine,
    p: usize,
    m: usize,
    height: usize,
    width: usize,
    atoms: Vec<f64>,
    fft: Option<FftState>,
    calls: AtomicUsize,
}

/// In-place 2D FFT over a row-major `h x w` complex buffer.
fn fft_2d(
    data: &mut [Complex<f64>],
    h: usize,
    w: usize,
    row_plan: &Arc<dyn Fft<f64>>,
    col_plan: &Arc<dyn Fft<f64>>,
) {
    debug_assert_eq!(row_plan.len(), w);
    debug_assert_eq!(col_plan.len(), h);
    let mut scratch = vec![Complex::default(); row_plan.get_inplace_scratch_len()];
    for row in data.chunks_exact_mut(w) {
        row_plan.process_with_scratch(row, &mut scratch);
    }
    let mut t = vec![Complex::default(); h * w];
    for i in 0..h {
        for j in 0..w {
            t[j * h + i] = data[i * w + j];
        }
    }
    let mut scratch = vec![Complex::default(); col_plan.get_inplace_scratch_len()];
    for col in t.chunks_exact_mut(h) {
        col_plan.process_with_scratch(col, &mut scratch);
    }
    for j in 0..w {
        for i in 0..h {
            data[i * w + j] = t[j * h + i];
        }
    }
}

impl Correlator {
    pub fn new(
        dict: &LocalDictionary,
        height: usize,
        width: usize,
        engine: Engine,
    ) -> Result<Self> {
        let m = dict.m();
        if height < m || width < m {
            return Err(Error::param(format!(
                "image {height}x{width} smaller than kernel side {m}"
            )));
        }
        let fft = match engine {
            Engine::Direct => None,
            Engine::Fft => {
                let mut planner = FftPlanner::new();
                let fwd_row = planner.plan_fft_forward(width);
                let fwd_col = planner.plan_fft_forward(height);
                let inv_row = planner.plan_fft_inverse(width);
                let inv_col = planner.plan_fft_inverse(height);
                let atom_spectra = (0..dict.p())
                    .map(|j| {
                        let atom = dict.atom(j);
                        let mut buf = vec![Complex::default(); height * width];
                        for u in 0..m {
                            for v in 0..m {
                                buf[u * width + v] = Complex::new(atom[u * m + v], 0.0);
                            }
                        }
                        fft_2d(&mut buf, height, width, &fwd_row, &fwd_col);
                        buf
                    })
                    .collect();
                Some(FftState {
                    fwd_row,
                    fwd_col,
                    inv_row,
                    inv_col,
                    atom_spectra,
                })
            }
        };
        Ok(Correlator {
            engine,
            p: dict.p(),
            m,
            height,
            width,
            atoms: dict.atoms_flat().to_vec(),
            fft,
            calls: AtomicUsize::new(0),
        })
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.height - self.m + 1
    }

    pub fn cols(&self) -> usize {
        self.width - self.m + 1
    }

    /// Number of score fields built so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    /// Builds the score field of `img`: for every atom `j` and corner `(r,c)`
    /// the inner product of the atom with the `m x m` patch at that corner.
    pub fn correlate(&self, img: &GrayImage) -> Result<ScoreField> {
        if img.height() != self.height || img.width() != self.width {
            return Err(Error::param(format!(
                "image {}x{} does not match correlator geometry {}x{}",
                img.height(),
                img.width(),
                self.height,
                self.width
            )));
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        let rows = self.rows();
        let cols = self.cols();
        let planes: Vec<Vec<f64>> = match self.engine {
            Engine::Direct => (0..self.p)
                .into_par_iter()
                .map(|j| self.correlate_direct_plane(img, j))
                .collect(),
            Engine::Fft => {
                let state = self.fft.as_ref().unwrap();
                let mut spectrum: Vec<Complex<f64>> = img
                    .as_slice()
                    .iter()
                    .map(|&v| Complex::new(v, 0.0))
                    .collect();
                fft_2d(
                    &mut spectrum,
                    self.height,
                    self.width,
                    &state.fwd_row,
                    &state.fwd_col,
                );
                (0..self.p)
                    .into_par_iter()
                    .map(|j| self.correlate_fft_plane(&spectrum, j))
                    .collect()
            }
        };
        let mut data = Vec::with_capacity(self.p * rows * cols);
        for plane in planes {
            data.extend(plane);
        }
        Ok(ScoreField {
            p: self.p,
            rows,
            cols,
            data,
        })
    }

    fn correlate_direct_plane(&self, img: &GrayImage, j: usize) -> Vec<f64> {
        let m = self.m;
        let atom = &self.atoms[j * m * m..(j + 1) * m * m];
        let rows = self.rows();
        let cols = self.cols();
        let x = img.as_slice();
        let w = self.width;
        let mut plane = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                let mut s = 0.0;
                for u in 0..m {
                    let img_row = &x[(r + u) * w + c..(r + u) * w + c + m];
                    let atom_row = &atom[u * m..u * m + m];
                    for v in 0..m {
                        s += atom_row[v] * img_row[v];
                    }
                }
                plane[r * cols + c] = s;
            }
        }
        plane
    }

    fn correlate_fft_plane(&self, image_spectrum: &[Complex<f64>], j: usize) -> Vec<f64> {
        let state = self.fft.as_ref().unwrap();
        let n = (self.height * self.width) as f64;
        // Correlation theorem: IFFT(X . conj(D)). Because every valid corner
        // keeps the kernel inside the image, the circular result needs no
        // padding in the cropped region.
        let mut prod: Vec<Complex<f64>> = image_spectrum
            .iter()
            .zip(&state.atom_spectra[j])
            .map(|(x, d)| x * d.conj())
            .collect();
        fft_2d(
            &mut prod,
            self.height,
            self.width,
            &state.inv_row,
            &state.inv_col,
        );
        let rows = self.rows();
        let cols = self.cols();
        let mut plane = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                plane[r * cols + c] = prod[r * self.width + c].re / n;
            }
        }
        plane
    }
}

/// One-shot convenience over [`Correlator`].
pub fn correlate_all(x: &GrayImage, dict: &LocalDictionary, engine: Engine) -> Result<ScoreField> {
    Correlator::new(dict, x.height(), x.width(), engine)?.correlate(x)
}

/// Sums `coefficient * atom` over all placements of the code. Entries are
/// visited in sorted `(atom, row, col)` order, so the floating-point result is
/// reproducible for a given code.
pub fn reconstruct(code: &SparseCode, dict: &LocalDictionary) -> Result<GrayImage> {
    if dict.p() != code.p() || dict.m() != code.m() {
        return Err(Error::param(format!(
            "dictionary (p={}, m={}) does not match code (p={}, m={})",
            dict.p(),
            dict.m(),
            code.p(),
            code.m()
        )));
    }
    let m = dict.m();
    let mut out = GrayImage::zeros(code.height(), code.width());
    let w = code.width();
    let buf = out.as_mut_slice();
    for (plc, coeff) in code.iter() {
        let atom = dict.atom(plc.atom);
        for u in 0..m {
            let row = &mut buf[(plc.row + u) * w + plc.col..(plc.row + u) * w + plc.col + m];
            let atom_row = &atom[u * m..u * m + m];
            for v in 0..m {
                row[v] += coeff * atom_row[v];
            }
        }
    }
    Ok(out)
}

/// Dense per-atom coefficient maps extracted from a sparse code; the linear
/// operator `d -> sum_j map_j * d_j` (correlation-style stamping) and its
/// adjoint are what the dictionary-update solvers iterate with.
#[derive(Debug, Clone)]
pub struct CoeffMaps {
    p: usize,
    m: usize,
    height: usize,
    width: usize,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CoeffMaps {
    pub fn from_code(code: &SparseCode) -> Self {
        let rows = code.height() - code.m() + 1;
        let cols = code.width() - code.m() + 1;
        let mut data = vec![0.0; code.p() * rows * cols];
        for (plc, coeff) in code.iter() {
            data[(plc.atom * rows + plc.row) * cols + plc.col] = coeff;
        }
        CoeffMaps {
            p: code.p(),
            m: code.m(),
            height: code.height(),
            width: code.width(),
            rows,
            cols,
            data,
        }
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

    pub fn map(&self, j: usize) -> &[f64] {
        let n = self.rows * self.cols;
        &self.data[j * n..(j + 1) * n]
    }

    pub fn map_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.rows * self.cols;
        &mut self.data[j * n..(j + 1) * n]
    }

    /// Multiplies every coefficient of atom `j` by `s`.
    pub fn scale_atom(&mut self, j: usize, s: f64) {
        for v in self.map_mut(j) {
            *v *= s;
        }
    }

    /// Total number of nonzero coefficients of atom `j`.
    pub fn usage(&self, j: usize) -> usize {
        self.map(j).iter().filter(|&&v| v != 0.0).count()
    }
}

/// Forward operator: reconstructs the image from coefficient maps and a flat
/// atom vector (`p*m*m` values). This is `A d` with `A` built from the maps.
pub fn apply_a(maps: &CoeffMaps, atoms: &[f64]) -> Result<GrayImage> {
    if atoms.len() != maps.p * maps.m * maps.m {
        return Err(Error::param(format!(
            "atom vector length {} does not match p={} m={}",
            atoms.len(),
            maps.p,
            maps.m
        )));
    }
    let mut out = GrayImage::zeros(maps.height, maps.width);
    for j in 0..maps.p {
        apply_a_single_into(maps, j, &atoms[j * maps.m * maps.m..(j + 1) * maps.m * maps.m], &mut out);
    }
    Ok(out)
}

/// Adds atom `j`'s contribution to `out`.
fn apply_a_single_into(maps: &CoeffMaps, j: usize, atom: &[f64], out: &mut GrayImage) {
    let m = maps.m;
    let w = maps.width;
    let map = maps.map(j);
    let buf = out.as_mut_slice();
    for r in 0..maps.rows {
        for c in 0..maps.cols {
            let a = map[r * maps.cols + c];
            if a == 0.0 {
                continue;
            }
            for u in 0..m {
                let row = &mut buf[(r + u) * w + c..(r + u) * w + c + m];
                let atom_row = &atom[u * m..u * m + m];
                for v in 0..m {
                    row[v] += a * atom_row[v];
                }
            }
        }
    }
}

/// Contribution of a single atom: `A_j d_j` as an image.
pub fn apply_a_single(maps: &CoeffMaps, j: usize, atom: &[f64]) -> GrayImage {
    let mut out = GrayImage::zeros(maps.height, maps.width);
    apply_a_single_into(maps, j, atom, &mut out);
    out
}

/// Adjoint operator: projects a residual image back onto atom space,
/// returning a flat `p*m*m` vector. `(apply_at(y))_j[u,v] = sum_(r,c)
/// map_j[r,c] * y[r+u, c+v]`, the exact transpose of [`apply_a`].
pub fn apply_at(residual: &GrayImage, maps: &CoeffMaps) -> Result<Vec<f64>> {
    if residual.height() != maps.height || residual.width() != maps.width {
        return Err(Error::param("residual does not match coefficient maps"));
    }
    let mut out = vec![0.0; maps.p * maps.m * maps.m];
    for j in 0..maps.p {
        let block = apply_at_single(residual, maps, j);
        out[j * maps.m * maps.m..(j + 1) * maps.m * maps.m].copy_from_slice(&block);
    }
    Ok(out)
}

/// Adjoint restricted to atom `j`: an `m*m` gradient block.
pub fn apply_at_single(residual: &GrayImage, maps: &CoeffMaps, j: usize) -> Vec<f64> {
    let m = maps.m;
    let w = maps.width;
    let map = maps.map(j);
    let res = residual.as_slice();
    let mut out = vec![0.0; m * m];
    for r in 0..maps.rows {
        for c in 0..maps.cols {
            let a = map[r * maps.cols + c];
            if a == 0.0 {
                continue;
            }
            for u in 0..m {
                let row = &res[(r + u) * w + c..(r + u) * w + c + m];
                for v in 0..m {
                    out[u * m + v] += a * row[v];
                }
            }
        }
    }
    out
}
