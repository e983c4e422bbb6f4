//! Greedy convolutional sparse coding over grayscale images.
//!
//! An image is modeled as a sum of small unit-norm kernels ("atoms") placed
//! at pixel offsets, with sparsity measured by the ℓ0,∞ "norm": the largest
//! number of placements covering any single pixel. The crate provides
//!
//! * four greedy pursuit algorithms under that constraint ([`gcmp`],
//!   [`gcomp`], [`gct`], [`stgcomp`]), built on FFT cross-correlation with a
//!   bitwise-reproducible direct fallback;
//! * convolutional dictionary learning ([`dictlearn::train`]) with joint
//!   (MOD-style) and per-atom block-coordinate updates;
//! * two restorations: masked inpainting ([`apps::inpaint`],
//!   [`apps::inpaint_learn`]) and salt-and-pepper denoising with an explicit
//!   impulse component ([`apps::snp_denoise`]);
//! * PGM image I/O plus binary dictionary and text code formats
//!   ([`io`]), and PSNR/sparsity reporting ([`metrics`]).
//!
//! ```
//! use gcsc::{gcmp, reconstruct, GrayImage, LocalDictionary, Placement,
//!            PursuitConfig, SparseCode};
//!
//! // one 3×3 impulse atom; plant it at (2, 2) with weight 0.75
//! let mut atom = vec![0.0; 9];
//! atom[0] = 1.0;
//! let dict = LocalDictionary::from_atoms(1, 3, atom)?;
//! let mut planted = SparseCode::empty(1, 3, 8, 8)?;
//! planted.set(Placement::new(0, 2, 2), 0.75)?;
//! let image = reconstruct(&planted, &dict)?;
//!
//! // a single pursuit layer digs it back out
//! let result = gcmp(&image, &dict, &PursuitConfig::with_target_k(1), None)?;
//! let found = result.code.get(Placement::new(0, 2, 2)).unwrap();
//! assert!((found - 0.75).abs() < 1e-12);
//! assert!(result.residual_norm < 1e-12);
//! # Ok::<(), gcsc::Error>(())
//! ```

pub mod apps;
pub mod code;
pub mod convops;
pub mod dictionary;
pub mod dictlearn;
pub mod error;
pub mod image;
pub mod io;
pub mod lsq;
pub mod metrics;
pub mod pursuit;
pub mod stripes;

pub use apps::{
    inpaint, inpaint_learn, prune_noise_atoms, snp_denoise, InpaintLearnConfig, SnpConfig,
    SnpResult,
};
pub use code::{Placement, SparseCode};
pub use convops::{correlate_all, reconstruct, Correlator, Engine, ScoreField};
pub use dictionary::LocalDictionary;
pub use dictlearn::{
    handle_dead_atoms, init_dictionary, train, LearnAlgorithm, LearnConfig, LearnTrace,
};
pub use error::{Error, Result};
pub use image::{invert, local_contrast_normalize, GrayImage, PixelMask};
pub use lsq::{cgls, solve_support, CglsConfig, CglsOutcome};
pub use metrics::{psnr, report, QualityReport};
pub use pursuit::{
    dense_reference_greedy, gcmp, gcomp, gct, mutual_coherence, stgcomp, GreedyMode,
    PursuitConfig, PursuitResult,
};
pub use stripes::{l0inf, l0_l0inf_bounds, CoverageGrid, SparsityBounds};
