//! Restoration built on the pursuit core: masked inpainting (with an
//! optional image-specific dictionary refinement) and salt-and-pepper
//! denoising with an explicit impulse noise component.

use crate::code::SparseCode;
use crate::convops::{
    apply_a, apply_a_single, apply_at_single, reconstruct, CoeffMaps, Correlator, Engine,
};
use crate::dictionary::LocalDictionary;
use crate::dictlearn::{init_dictionary, LearnConfig};
use crate::error::{Error, Result};
use crate::image::{invert, GrayImage, PixelMask};
use crate::pursuit::{gcmp, gcmp_with, PursuitConfig, PursuitResult};

/// Default residual-energy threshold for [`prune_noise_atoms`].
pub const DEFAULT_PRUNE_EPS: f64 = 0.01;

/// Atoms expressible with fewer impulses than this are considered noise.
pub const DEFAULT_PRUNE_MIN_L0: usize = 3;

fn zero_unobserved(y: &GrayImage, mask: &PixelMask) -> GrayImage {
    let mut out = y.clone();
    for (v, obs) in out.as_mut_slice().iter_mut().zip(mask.as_slice()) {
        if !obs {
            *v = 0.0;
        }
    }
    out
}

/// Fills in missing pixels: matching pursuit over the observed pixels only
/// (the residual is `y - mask∘reconstruction`; scores need no masking because
/// the observed image is already zero elsewhere), then an *unmasked*
/// reconstruction so the holes take the values the code implies. Unobserved
/// entries of `y` are zeroed defensively before the pursuit. Returns the
/// filled image along with the full pursuit result.
pub fn inpaint(
    y: &GrayImage,
    mask: &PixelMask,
    dict: &LocalDictionary,
    k: usize,
) -> Result<(GrayImage, PursuitResult)> {
    if mask.count_observed() == 0 {
        return Err(Error::param("inpainting mask observes no pixels"));
    }
    let y_work = zero_unobserved(y, mask);
    let cfg = PursuitConfig::with_target_k(k);
    let result = gcmp(&y_work, dict, &cfg, Some(mask))?;
    let filled = reconstruct(&result.code, dict)?;
    Ok((filled, result))
}

#[derive(Debug, Clone)]
pub struct InpaintLearnConfig {
    pub p: usize,
    pub m: usize,
    pub outer_iters: usize,
    pub seed: u64,
    /// Gradient step size for the per-atom dictionary refinement.
    pub gamma: f64,
    pub engine: Engine,
}

impl InpaintLearnConfig {
    pub fn new(p: usize, m: usize, gamma: f64) -> Self {
        InpaintLearnConfig {
            p,
            m,
            outer_iters: 10,
            seed: 0,
            gamma,
            engine: Engine::default(),
        }
    }
}

/// Gradient of the masked squared error `‖mask∘(y − Σ_j d_j ∗ α_j)‖²` with
/// respect to atom `j`, holding the coefficients fixed: the masked residual
/// projected back onto atom space, times −2.
pub fn masked_atom_gradient(
    y: &GrayImage,
    mask: &PixelMask,
    maps: &CoeffMaps,
    dict: &LocalDictionary,
    j: usize,
) -> Result<Vec<f64>> {
    let recon = apply_a(maps, dict.atoms_flat())?;
    let mut masked = GrayImage::zeros(y.height(), y.width());
    for (i, o) in masked.as_mut_slice().iter_mut().enumerate() {
        if mask.as_slice()[i] {
            *o = y.as_slice()[i] - recon.as_slice()[i];
        }
    }
    let g = apply_at_single(&masked, maps, j);
    Ok(g.into_iter().map(|v| -2.0 * v).collect())
}

/// Inpainting with an image-specific dictionary: alternates masked pursuit
/// with one gradient step per atom on the masked objective (atom
/// renormalized after its step, coefficients rescaled to compensate). Errors
/// out if the masked error ever grows past ten times its initial value —
/// the step size is too large.
pub fn inpaint_learn(
    y: &GrayImage,
    mask: &PixelMask,
    k: usize,
    cfg: &InpaintLearnConfig,
) -> Result<(LocalDictionary, GrayImage)> {
    if !(cfg.gamma.is_finite() && cfg.gamma > 0.0) {
        return Err(Error::param("gamma must be positive"));
    }
    if cfg.outer_iters == 0 {
        return Err(Error::param("outer_iters must be at least 1"));
    }
    if mask.count_observed() == 0 {
        return Err(Error::param("inpainting mask observes no pixels"));
    }
    if mask.height() != y.height() || mask.width() != y.width() {
        return Err(Error::param("mask dimensions do not match image"));
    }

    let y_work = zero_unobserved(y, mask);
    let mut dict = init_dictionary(&LearnConfig {
        seed: cfg.seed,
        engine: cfg.engine,
        ..LearnConfig::new(cfg.p, cfg.m, k)
    })?;
    let pursuit_cfg = PursuitConfig {
        engine: cfg.engine,
        ..PursuitConfig::with_target_k(k)
    };
    let mut initial_err: Option<f64> = None;

    for _ in 0..cfg.outer_iters {
        let coded = gcmp(&y_work, &dict, &pursuit_cfg, Some(mask))?;
        let mut maps = CoeffMaps::from_code(&coded.code);

        // masked residual, maintained across the per-atom sweep
        let recon = apply_a(&maps, dict.atoms_flat())?;
        let mut resid: Vec<f64> = y_work
            .as_slice()
            .iter()
            .zip(recon.as_slice())
            .zip(mask.as_slice())
            .map(|((a, b), obs)| if *obs { a - b } else { 0.0 })
            .collect();

        let err: f64 = resid.iter().map(|v| v * v).sum();
        let initial = *initial_err.get_or_insert(err);
        if err > 10.0 * initial.max(f64::MIN_POSITIVE) {
            return Err(Error::Divergence(format!(
                "masked error grew from {initial:.3e} to {err:.3e}; reduce gamma"
            )));
        }

        for j in 0..dict.p() {
            let old_contrib = apply_a_single(&maps, j, dict.atom(j));
            let resid_img = {
                let mut img = GrayImage::zeros(y.height(), y.width());
                img.as_mut_slice().copy_from_slice(&resid);
                img
            };
            let g = apply_at_single(&resid_img, &maps, j);
            // d_j ← d_j − γ·(−2 g) followed by renormalization
            for (d, gv) in dict.atom_mut(j).iter_mut().zip(&g) {
                *d += 2.0 * cfg.gamma * gv;
            }
            let norm: f64 = dict.atom(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for d in dict.atom_mut(j) {
                    *d /= norm;
                }
                maps.scale_atom(j, norm);
            }
            let new_contrib = apply_a_single(&maps, j, dict.atom(j));
            for (i, r) in resid.iter_mut().enumerate() {
                if mask.as_slice()[i] {
                    *r += old_contrib.as_slice()[i] - new_contrib.as_slice()[i];
                }
            }
        }
    }

    let coded = gcmp(&y_work, &dict, &pursuit_cfg, Some(mask))?;
    let filled = reconstruct(&coded.code, &dict)?;
    Ok((dict, filled))
}

#[derive(Debug, Clone)]
pub struct SnpConfig {
    /// ℓ0,∞ budget for the image component.
    pub k: usize,
    /// ℓ0,∞ budget for the impulse noise component.
    pub k_noise: usize,
    /// Work on the gray-inverted image (black-on-white text) and undo the
    /// inversion on output.
    pub invert_text: bool,
    /// The reference loop stops as soon as *either* budget is exhausted.
    /// Setting this keeps alternating with the smaller budget frozen at its
    /// cap until both are exhausted.
    pub continue_after_budget: bool,
    pub engine: Engine,
}

impl SnpConfig {
    pub fn new(k: usize, k_noise: usize) -> Self {
        SnpConfig {
            k,
            k_noise,
            invert_text: false,
            continue_after_budget: false,
            engine: Engine::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SnpResult {
    /// Image component (in the caller's orientation, inversion undone).
    pub clean: GrayImage,
    /// Noise component; `clean + noise` reproduces the joint reconstruction.
    pub noise: GrayImage,
    /// Code of the image component over the supplied dictionary. When
    /// `invert_text` is set, codes refer to the inverted orientation.
    pub image_code: SparseCode,
    /// Code of the noise component over the internal 1×1 impulse atom.
    pub noise_code: SparseCode,
    pub iterations: usize,
}

/// Salt-and-pepper removal by alternating pursuits: the image component is
/// coded over `dict`, the noise component over a single 1×1 impulse atom
/// (whose placements reach every pixel and never overlap each other), with
/// budgets ramping 1, 2, … up to `k` and `k_noise`. Each half-step recodes
/// the input minus the *other* component's current estimate from scratch.
pub fn snp_denoise(x: &GrayImage, dict: &LocalDictionary, cfg: &SnpConfig) -> Result<SnpResult> {
    if cfg.k == 0 || cfg.k_noise == 0 {
        return Err(Error::param("both budgets must be at least 1"));
    }
    let x_work = if cfg.invert_text { invert(x) } else { x.clone() };
    let (h, w) = (x.height(), x.width());
    let impulse = LocalDictionary::from_atoms(1, 1, vec![1.0])?;

    let image_corr = Correlator::new(dict, h, w, cfg.engine)?;
    let noise_corr = Correlator::new(&impulse, h, w, cfg.engine)?;

    let mut image_est = GrayImage::zeros(h, w);
    let mut noise_est = GrayImage::zeros(h, w);
    let mut image_code = SparseCode::empty(dict.p(), dict.m(), h, w)?;
    let mut noise_code = SparseCode::empty(1, 1, h, w)?;
    let mut iterations = 0usize;
    let (mut k1, mut k2) = (1usize, 1usize);

    loop {
        let image_open = k1 <= cfg.k;
        let noise_open = k2 <= cfg.k_noise;
        let go = if cfg.continue_after_budget {
            image_open || noise_open
        } else {
            image_open && noise_open
        };
        if !go {
            break;
        }
        iterations += 1;

        let target = diff(&x_work, &noise_est);
        let run = gcmp_with(
            &image_corr,
            &target,
            dict,
            &pursuit_k(k1.min(cfg.k), cfg.engine),
            None,
        )?;
        image_code = run.code;
        image_est = reconstruct(&image_code, dict)?;

        let target = diff(&x_work, &image_est);
        let run = gcmp_with(
            &noise_corr,
            &target,
            &impulse,
            &pursuit_k(k2.min(cfg.k_noise), cfg.engine),
            None,
        )?;
        noise_code = run.code;
        noise_est = reconstruct(&noise_code, &impulse)?;

        k1 += 1;
        k2 += 1;
    }

    let (clean, noise) = if cfg.invert_text {
        let neg = GrayImage::from_vec(h, w, noise_est.as_slice().iter().map(|v| -v).collect())?;
        (invert(&image_est), neg)
    } else {
        (image_est, noise_est)
    };
    Ok(SnpResult {
        clean,
        noise,
        image_code,
        noise_code,
        iterations,
    })
}

fn pursuit_k(k: usize, engine: Engine) -> PursuitConfig {
    PursuitConfig {
        engine,
        ..PursuitConfig::with_target_k(k)
    }
}

fn diff(a: &GrayImage, b: &GrayImage) -> GrayImage {
    let mut out = GrayImage::zeros(a.height(), a.width());
    for (o, (x, y)) in out
        .as_mut_slice()
        .iter_mut()
        .zip(a.as_slice().iter().zip(b.as_slice()))
    {
        *o = x - y;
    }
    out
}

/// Fewest impulses whose removal from `atom` leaves at most `eps` of squared
/// energy: the smallest `q` such that the sum of squares of all but the `q`
/// largest-magnitude entries is ≤ `eps`. Impulse shifts are orthonormal, so
/// keeping the largest entries is exactly optimal.
pub fn impulse_sparsity(atom: &[f64], eps: f64) -> usize {
    let mut sq: Vec<f64> = atom.iter().map(|v| v * v).collect();
    sq.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let mut tail: f64 = sq.iter().sum();
    for (q, s) in sq.iter().enumerate() {
        if tail <= eps {
            return q;
        }
        tail -= s;
    }
    sq.len()
}

/// Drops atoms that are expressible as fewer than `min_l0` impulses up to
/// `eps_prune` residual energy — such atoms would soak up impulse noise
/// instead of structure. Per-atom decision: order-independent, idempotent.
pub fn prune_noise_atoms(
    dict: &LocalDictionary,
    eps_prune: f64,
    min_l0: usize,
) -> Result<LocalDictionary> {
    if !(eps_prune.is_finite() && eps_prune >= 0.0) {
        return Err(Error::param("eps_prune must be finite and non-negative"));
    }
    let mut kept = Vec::new();
    let mut count = 0;
    for j in 0..dict.p() {
        if impulse_sparsity(dict.atom(j), eps_prune) >= min_l0 {
            kept.extend_from_slice(dict.atom(j));
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::param(
            "noise pruning removed every atom; eps_prune is too permissive",
        ));
    }
    LocalDictionary::from_atoms(count, dict.m(), kept)
}
