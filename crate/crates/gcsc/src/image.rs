//! Grayscale images and masks, plus the pixel-level preprocessing used before
//! coding: gray-level inversion and local contrast normalization.

use crate::error::{Error, Result};

/// A dense `height x width` grayscale image with `f64` samples, row major.
///
/// Values are unconstrained finite reals; quantization to `[0,1]` only happens
/// at the file-format boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// An all-zero image.
    pub fn zeros(height: usize, width: usize) -> Self {
        GrayImage {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    /// Wraps row-major samples. Fails if the length does not match or any
    /// sample is non-finite.
    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::param(format!(
                "image data length {} does not match {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::param("image contains non-finite samples"));
        }
        Ok(GrayImage {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.width + col] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// ‖self‖₂ over all pixels.
    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Sum of squared samples.
    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Per-pixel observation mask; `true` marks an observed pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMask {
    height: usize,
    width: usize,
    observed: Vec<bool>,
}

impl PixelMask {
    pub fn all_observed(height: usize, width: usize) -> Self {
        PixelMask {
            height,
            width,
            observed: vec![true; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != height * width {
            return Err(Error::param(format!(
                "mask length {} does not match {}x{}",
                observed.len(),
                height,
                width
            )));
        }
        Ok(PixelMask {
            height,
            width,
            observed,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn observed(&self, row: usize, col: usize) -> bool {
        self.observed[row * self.width + col]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.observed
    }

    pub fn count_observed(&self) -> usize {
        self.observed.iter().filter(|&&b| b).count()
    }
}

/// Gray-level inversion `v -> 1 - v`. Applying it twice gives the input back.
pub fn invert(x: &GrayImage) -> GrayImage {
    let data = x.as_slice().iter().map(|v| 1.0 - v).collect();
    GrayImage {
        height: x.height,
        width: x.width,
        data,
    }
}

/// Regularizer added to the local standard deviation so flat windows do not
/// blow up the quotient.
const LCN_STD_FLOOR: f64 = 1e-4;

/// Local contrast normalization: each pixel is centered by the mean and
/// divided by the standard deviation (plus a small floor) of the window
/// around it, with edge replication at the borders; the result is affinely
/// rescaled to occupy `[0,1]`. A constant input maps to the mid gray 0.5.
///
/// `window` must be odd, at least 3 and no larger than the smaller image side.
pub fn local_contrast_normalize(x: &GrayImage, window: usize) -> Result<GrayImage> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::param(format!(
            "window must be odd and >= 3, got {window}"
        )));
    }
    if window > x.height.min(x.width) {
        return Err(Error::param(format!(
            "window {} exceeds image side {}x{}",
            window, x.height, x.width
        )));
    }

    let h = x.height;
    let w = x.width;
    let r = window / 2;

    // A constant image has no contrast anywhere; decide that from the input
    // itself rather than from the normalized field, where accumulated
    // round-off would leave a spurious span of ~1e-12.
    let lo_in = x.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_in = x.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi_in == lo_in {
        return GrayImage::from_vec(h, w, vec![0.5; h * w]);
    }

    // Pad by edge replication, then build integral images of values and
    // squares so each window sum is O(1).
    let ph = h + 2 * r;
    let pw = w + 2 * r;
    let mut padded = vec![0.0f64; ph * pw];
    for i in 0..ph {
        let si = i.saturating_sub(r).min(h - 1);
        for j in 0..pw {
            let sj = j.saturating_sub(r).min(w - 1);
            padded[i * pw + j] = x.get(si, sj);
        }
    }
    let mut sum = vec![0.0f64; (ph + 1) * (pw + 1)];
    let mut sumsq = vec![0.0f64; (ph + 1) * (pw + 1)];
    for i in 0..ph {
        let mut row = 0.0;
        let mut rowsq = 0.0;
        for j in 0..pw {
            let v = padded[i * pw + j];
            row += v;
            rowsq += v * v;
            sum[(i + 1) * (pw + 1) + (j + 1)] = sum[i * (pw + 1) + (j + 1)] + row;
            sumsq[(i + 1) * (pw + 1) + (j + 1)] = sumsq[i * (pw + 1) + (j + 1)] + rowsq;
        }
    }
    let window_area = (window * window) as f64;
    let rect = |acc: &[f64], i0: usize, j0: usize| -> f64 {
        let i1 = i0 + window;
        let j1 = j0 + window;
        acc[i1 * (pw + 1) + j1] - acc[i0 * (pw + 1) + j1] - acc[i1 * (pw + 1) + j0]
            + acc[i0 * (pw + 1) + j0]
    };

    let mut normalized = vec![0.0f64; h * w];
    for i in 0..h {
        for j in 0..w {
            let s = rect(&sum, i, j);
            let sq = rect(&sumsq, i, j);
            let mean = s / window_area;
            let var = (sq / window_area - mean * mean).max(0.0);
            let std = var.sqrt();
            normalized[i * w + j] = (x.get(i, j) - mean) / (std + LCN_STD_FLOOR);
        }
    }

    let lo = normalized.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = normalized.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let out = if hi - lo < 1e-12 {
        vec![0.5; h * w]
    } else {
        let span = hi - lo;
        normalized.iter().map(|v| (v - lo) / span).collect()
    };
    GrayImage::from_vec(h, w, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(n: usize) -> GrayImage {
        let data = (0..n * n)
            .map(|i| ((i / n + i % n) % 2) as f64)
            .collect();
        GrayImage::from_vec(n, n, data).unwrap()
    }

    /// Direct per-pixel reference for the normalization, kept deliberately
    /// independent of the integral-image implementation.
    fn lcn_naive(x: &GrayImage, window: usize) -> Vec<f64> {
        let h = x.height();
        let w = x.width();
        let r = window / 2;
        let clamp = |v: isize, n: usize| -> usize { v.clamp(0, n as isize - 1) as usize };
        let mut normalized = vec![0.0; h * w];
        for i in 0..h {
            for j in 0..w {
                let mut s = 0.0;
                let mut sq = 0.0;
                for di in -(r as isize)..=(r as isize) {
                    for dj in -(r as isize)..=(r as isize) {
                        let v = x.get(clamp(i as isize + di, h), clamp(j as isize + dj, w));
                        s += v;
                        sq += v * v;
                    }
                }
                let area = (window * window) as f64;
                let mean = s / area;
                let std = (sq / area - mean * mean).max(0.0).sqrt();
                normalized[i * w + j] = (x.get(i, j) - mean) / (std + LCN_STD_FLOOR);
            }
        }
        let lo = normalized.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = normalized.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-12 {
            return vec![0.5; h * w];
        }
        normalized.iter().map(|v| (v - lo) / (hi - lo)).collect()
    }

    #[test]
    fn from_vec_rejects_bad_length_and_nan() {
        assert!(GrayImage::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::from_vec(1, 2, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn invert_is_an_involution() {
        let x = checkerboard(5);
        let twice = invert(&invert(&x));
        for (a, b) in x.as_slice().iter().zip(twice.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn lcn_constant_image_maps_to_mid_gray() {
        let x = GrayImage::from_vec(6, 6, vec![0.37; 36]).unwrap();
        let y = local_contrast_normalize(&x, 3).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn lcn_output_occupies_unit_range() {
        let x = checkerboard(8);
        let y = local_contrast_normalize(&x, 3).unwrap();
        let lo = y.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y
            .as_slice()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((lo - 0.0).abs() < 1e-12);
        assert!((hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lcn_matches_direct_loop_on_checkerboard() {
        let x = checkerboard(8);
        let y = local_contrast_normalize(&x, 3).unwrap();
        let reference = lcn_naive(&x, 3);
        for (a, b) in y.as_slice().iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn lcn_matches_direct_loop_on_smooth_ramp() {
        let data: Vec<f64> = (0..9 * 7).map(|i| (i as f64 * 0.37).sin() * 0.5 + 0.5).collect();
        let x = GrayImage::from_vec(9, 7, data).unwrap();
        for window in [3, 5, 7] {
            let y = local_contrast_normalize(&x, window).unwrap();
            let reference = lcn_naive(&x, window);
            for (a, b) in y.as_slice().iter().zip(&reference) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lcn_rejects_bad_windows() {
        let x = checkerboard(8);
        assert!(local_contrast_normalize(&x, 4).is_err());
        assert!(local_contrast_normalize(&x, 1).is_err());
        assert!(local_contrast_normalize(&x, 9).is_err());
    }
}
