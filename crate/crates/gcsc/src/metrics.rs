//! Quality and sparsity reporting.

use crate::code::SparseCode;
use crate::convops::reconstruct;
use crate::dictionary::LocalDictionary;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::stripes::l0inf;

/// Peak signal-to-noise ratio in dB: `20·log10(peak) + 20·log10(√(MN)/‖x−x̂‖₂)`.
/// Splitting out the peak term keeps the `peak = 255` convention *exactly*
/// `20·log10(255)` above the `peak = 1` one. Identical images return
/// `f64::INFINITY` (which formats as `inf` in reports).
pub fn psnr(x: &GrayImage, xhat: &GrayImage, peak: f64) -> Result<f64> {
    if x.height() != xhat.height() || x.width() != xhat.width() {
        return Err(Error::param("psnr operands differ in dimensions"));
    }
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::param("peak must be positive and finite"));
    }
    let err: f64 = x
        .as_slice()
        .iter()
        .zip(xhat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    let n = (x.pixels() as f64).sqrt();
    Ok(20.0 * peak.log10() + 20.0 * (n / err).log10())
}

#[derive(Debug, Clone, Copy)]
pub struct QualityReport {
    pub psnr_db: f64,
    /// Number of placements with a stored coefficient.
    pub l0: usize,
    /// Densest per-pixel cover.
    pub l0inf: usize,
    pub residual_l2: f64,
    pub pixels: usize,
}

impl QualityReport {
    pub const CSV_HEADER: &'static str =
        "image_id,algorithm,k,l0,l0inf,residual_l2,psnr_db";

    /// One CSV row under [`Self::CSV_HEADER`]. Infinite PSNR prints as `inf`.
    pub fn csv_row(&self, image_id: &str, algorithm: &str, k: usize) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            image_id, algorithm, k, self.l0, self.l0inf, self.residual_l2, self.psnr_db
        )
    }
}

/// Reconstructs `code` against `dict` and summarizes how well it represents
/// `x` (unit peak convention).
pub fn report(x: &GrayImage, code: &SparseCode, dict: &LocalDictionary) -> Result<QualityReport> {
    if code.height() != x.height() || code.width() != x.width() {
        return Err(Error::param("code geometry does not match image"));
    }
    let recon = reconstruct(code, dict)?;
    let residual_l2: f64 = x
        .as_slice()
        .iter()
        .zip(recon.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(QualityReport {
        psnr_db: psnr(x, &recon, 1.0)?,
        l0: code.l0(),
        l0inf: l0inf(code),
        residual_l2,
        pixels: x.pixels(),
    })
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_image_pair() -> impl Strategy<Value = (GrayImage, GrayImage)> {
        (1usize..10, 1usize..10).prop_flat_map(|(h, w)| {
            let pixels = prop::collection::vec(0f64..=1.0, h * w);
            (pixels.clone(), pixels).prop_map(move |(a, b)| {
                (
                    GrayImage::from_vec(h, w, a).unwrap(),
                    GrayImage::from_vec(h, w, b).unwrap(),
                )
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn psnr_is_symmetric((a, b) in arb_image_pair()) {
            let ab = psnr(&a, &b, 1.0).unwrap();
            let ba = psnr(&b, &a, 1.0).unwrap();
            prop_assert_eq!(ab.to_bits(), ba.to_bits());
        }

        #[test]
        fn peak_conventions_differ_by_a_constant((a, b) in arb_image_pair()) {
            let unit = psnr(&a, &b, 1.0).unwrap();
            if unit.is_finite() {
                let byte = psnr(&a, &b, 255.0).unwrap();
                prop_assert!((byte - unit - 20.0 * 255f64.log10()).abs() < 1e-9);
            }
        }

        #[test]
        fn psnr_strictly_decreases_as_the_error_grows(
            (a, b) in arb_image_pair(),
            scale in 1.5f64..4.0,
        ) {
            let near = psnr(&a, &b, 1.0).unwrap();
            if near.is_finite() {
                // move b away from a along the same direction
                let further: Vec<f64> = a
                    .as_slice()
                    .iter()
                    .zip(b.as_slice())
                    .map(|(x, y)| x + scale * (y - x))
                    .collect();
                let b_far = GrayImage::from_vec(a.height(), a.width(), further).unwrap();
                let far = psnr(&a, &b_far, 1.0).unwrap();
                prop_assert!(far < near, "{far} should be below {near}");
            }
        }
    }
}
