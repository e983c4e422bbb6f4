//! Greedy pursuit under the ℓ0,∞ model.
//!
//! All four algorithms share one selection discipline: build a score field
//! (one correlation pass per layer/stage — never more), then walk its entries
//! in decreasing magnitude with ties broken toward the smallest
//! `(atom, row, col)`. They differ in how coefficients are assigned:
//!
//! * [`gcmp`] — matching pursuit: the score itself is the coefficient update,
//!   layers are kept disjoint by blocking every overlapping corner.
//! * [`gcomp`] — orthogonal variant: same selection, but after each layer all
//!   coefficients are refit by least squares against the original image.
//! * [`gct`] — thresholding: a single score field of the input, acceptance
//!   limited only by the per-pixel budget, one refit at the end.
//! * [`stgcomp`] — staged middle ground: GCT-style acceptance with a stage
//!   budget `delta_k`, merged support, full refit per stage.
//!
//! A stage/layer budget of 1 makes [`stgcomp`] coincide with [`gcomp`], and
//! `delta_k = k` makes it coincide with [`gct`]; tests pin both equalities.

use crate::code::{Placement, SparseCode};
use crate::convops::{reconstruct, Correlator, Engine, ScoreField};
use crate::dictionary::LocalDictionary;
use crate::error::{Error, Result};
use crate::image::{GrayImage, PixelMask};
use crate::lsq::solve_support;
use crate::stripes::{l0inf, overlaps, BlockMask, CoverageGrid};

/// Scores at or below this magnitude are treated as zero during selection.
pub const DEFAULT_SCORE_ZERO_TOL: f64 = 1e-12;

/// Hard cap on layers when only an `epsilon` stopping rule is given.
pub const DEFAULT_MAX_LAYERS: usize = 1024;

/// Atoms must be unit-norm within this tolerance for pursuit to run.
const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct PursuitConfig {
    /// Layer budget: the ℓ0,∞ target. At least one of `target_k` / `epsilon`
    /// must be set.
    pub target_k: Option<usize>,
    /// Residual-norm stopping threshold; `None` behaves like zero.
    pub epsilon: Option<f64>,
    /// Per-stage budget for [`stgcomp`]; ignored by the other algorithms.
    pub delta_k: usize,
    pub score_zero_tol: f64,
    pub max_layers: usize,
    pub engine: Engine,
}

impl Default for PursuitConfig {
    fn default() -> Self {
        PursuitConfig {
            target_k: None,
            epsilon: None,
            delta_k: 1,
            score_zero_tol: DEFAULT_SCORE_ZERO_TOL,
            max_layers: DEFAULT_MAX_LAYERS,
            engine: Engine::default(),
        }
    }
}

impl PursuitConfig {
    pub fn with_target_k(k: usize) -> Self {
        PursuitConfig {
            target_k: Some(k),
            ..Default::default()
        }
    }

    pub fn with_epsilon(eps: f64) -> Self {
        PursuitConfig {
            epsilon: Some(eps),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_k.is_none() && self.epsilon.is_none() {
            return Err(Error::param(
                "pursuit needs a stopping rule: target_k and/or epsilon",
            ));
        }
        if self.target_k == Some(0) {
            return Err(Error::param("target_k must be at least 1"));
        }
        if let Some(eps) = self.epsilon {
            if !eps.is_finite() || eps < 0.0 {
                return Err(Error::param("epsilon must be finite and non-negative"));
            }
        }
        if self.delta_k == 0 {
            return Err(Error::param("delta_k must be at least 1"));
        }
        if self.max_layers == 0 {
            return Err(Error::param("max_layers must be at least 1"));
        }
        if !self.score_zero_tol.is_finite() || self.score_zero_tol < 0.0 {
            return Err(Error::param("score_zero_tol must be finite and non-negative"));
        }
        Ok(())
    }
}

/// What one layer (or stage) did.
#[derive(Debug, Clone)]
pub struct LayerRecord {
    /// Placements accepted this layer, in selection order. For the refitting
    /// algorithms this includes reselections of already-known placements.
    pub accepted: Vec<Placement>,
    /// Sum of squared scores over the accepted selections.
    pub score_energy: f64,
    pub residual_before: f64,
    pub residual_after: f64,
}

#[derive(Debug, Clone)]
pub struct PursuitResult {
    pub code: SparseCode,
    /// Outer iterations run — equivalently, score fields built.
    pub layers_used: usize,
    /// ℓ0,∞ of the returned code, recounted from scratch. Can be smaller than
    /// `layers_used` when a later layer reselects an existing placement.
    pub measured_l0inf: usize,
    /// Final residual ℓ2 norm.
    pub residual_norm: f64,
    /// Residual ℓ2 norm after each layer; non-increasing.
    pub residual_history: Vec<f64>,
    pub layers: Vec<LayerRecord>,
    /// True when the `max_layers` cap fired before the stopping rule.
    pub truncated: bool,
}

fn validate_inputs(
    x: &GrayImage,
    dict: &LocalDictionary,
    mask: Option<&PixelMask>,
) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::param("pursuit input contains non-finite samples"));
    }
    if x.height() < dict.m() || x.width() < dict.m() {
        return Err(Error::param(format!(
            "image {}x{} smaller than kernel side {}",
            x.height(),
            x.width(),
            dict.m()
        )));
    }
    let dev = dict.max_norm_deviation();
    if dev > UNIT_NORM_TOL {
        return Err(Error::param(format!(
            "dictionary atoms must be unit-norm (worst deviation {dev:.2e})"
        )));
    }
    if let Some(mk) = mask {
        if mk.height() != x.height() || mk.width() != x.width() {
            return Err(Error::param("mask dimensions do not match image"));
        }
    }
    Ok(())
}

fn check_correlator(corr: &Correlator, x: &GrayImage) -> Result<()> {
    if corr.height() != x.height() || corr.width() != x.width() {
        return Err(Error::param("correlator geometry does not match image"));
    }
    Ok(())
}

/// `x - recon` with unobserved pixels of the reconstruction treated as zero.
fn subtract_masked(x: &GrayImage, recon: &GrayImage, mask: Option<&PixelMask>) -> GrayImage {
    let mut out = GrayImage::zeros(x.height(), x.width());
    let buf = out.as_mut_slice();
    match mask {
        None => {
            for (o, (a, b)) in buf.iter_mut().zip(x.as_slice().iter().zip(recon.as_slice())) {
                *o = a - b;
            }
        }
        Some(mk) => {
            for (i, o) in buf.iter_mut().enumerate() {
                let r = if mk.as_slice()[i] { recon.as_slice()[i] } else { 0.0 };
                *o = x.as_slice()[i] - r;
            }
        }
    }
    out
}

/// All entries with `|score| > tol` as `(|score|, flat index)`, sorted by
/// descending magnitude with ties broken by ascending flat index — which is
/// exactly ascending `(atom, row, col)`. Walking this list while honoring a
/// block mask reproduces the repeated argmax-and-zero-the-neighborhood rule.
fn selection_order(scores: &ScoreField, tol: f64) -> Vec<(f64, usize)> {
    let mut order: Vec<(f64, usize)> = scores
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > tol)
        .map(|(i, v)| (v.abs(), i))
        .collect();
    order.sort_unstable_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    order
}

enum Stop {
    Residual,
    Budget,
    LayerCap,
    Go,
}

fn stopping(cfg: &PursuitConfig, r_norm: f64, layers_done: usize) -> Stop {
    let eps = cfg.epsilon.unwrap_or(0.0);
    if r_norm <= eps {
        return Stop::Residual;
    }
    if let Some(k) = cfg.target_k {
        if layers_done >= k {
            return Stop::Budget;
        }
    }
    if layers_done >= cfg.max_layers {
        return Stop::LayerCap;
    }
    Stop::Go
}

fn finish(
    code: SparseCode,
    layers: Vec<LayerRecord>,
    residual_history: Vec<f64>,
    residual_norm: f64,
    truncated: bool,
) -> PursuitResult {
    let measured = l0inf(&code);
    PursuitResult {
        layers_used: layers.len(),
        measured_l0inf: measured,
        residual_norm,
        residual_history,
        layers,
        truncated,
        code,
    }
}

/// Greedy convolutional matching pursuit. Each layer: one score field of the
/// residual, then greedy selection of non-overlapping placements (blocking
/// every corner whose support would intersect an accepted one); each accepted
/// score is *added* to its placement's coefficient, so a placement reselected
/// in a later layer accumulates. Runs while the residual exceeds `epsilon`
/// and fewer than `target_k` layers have been built.
pub fn gcmp(
    x: &GrayImage,
    dict: &LocalDictionary,
    cfg: &PursuitConfig,
    mask: Option<&PixelMask>,
) -> Result<PursuitResult> {
    let corr = Correlator::new(dict, x.height(), x.width(), cfg.engine)?;
    gcmp_with(&corr, x, dict, cfg, mask)
}

/// [`gcmp`] against a caller-supplied correlator (which also exposes the
/// score-field call count for instrumentation).
pub fn gcmp_with(
    corr: &Correlator,
    x: &GrayImage,
    dict: &LocalDictionary,
    cfg: &PursuitConfig,
    mask: Option<&PixelMask>,
) -> Result<PursuitResult> {
    cfg.validate()?;
    validate_inputs(x, dict, mask)?;
    check_correlator(corr, x)?;

    let m = dict.m();
    let mut code = SparseCode::empty(dict.p(), m, x.height(), x.width())?;
    let mut residual = subtract_masked(x, &GrayImage::zeros(x.height(), x.width()), mask);
    let mut r_norm = residual.norm_l2();
    let mut layers: Vec<LayerRecord> = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut truncated = false;

    loop {
        match stopping(cfg, r_norm, layers.len()) {
            Stop::Residual | Stop::Budget => break,
            Stop::LayerCap => {
                truncated = true;
                break;
            }
            Stop::Go => {}
        }
        let scores = corr.correlate(&residual)?;
        let order = selection_order(&scores, cfg.score_zero_tol);
        let mut blocked = BlockMask::new(scores.rows(), scores.cols(), m);
        let mut rec = LayerRecord {
            accepted: Vec::new(),
            score_energy: 0.0,
            residual_before: r_norm,
            residual_after: r_norm,
        };
        for &(_, flat) in &order {
            let (atom, row, col) = scores.decode(flat);
            if blocked.is_blocked(row, col) {
                continue;
            }
            let b = scores.as_slice()[flat];
            let plc = Placement::new(atom, row, col);
            code.add(plc, b)?;
            blocked.block_around(row, col);
            rec.accepted.push(plc);
            rec.score_energy += b * b;
        }
        if rec.accepted.is_empty() {
            // residual is (numerically) orthogonal to every placement; no
            // further layer can make progress
            history.push(r_norm);
            layers.push(rec);
            break;
        }
        let recon = reconstruct(&code, dict)?;
        residual = subtract_masked(x, &recon, mask);
        r_norm = residual.norm_l2();
        rec.residual_after = r_norm;
        history.push(r_norm);
        layers.push(rec);
    }

    Ok(finish(code, layers, history, r_norm, truncated))
}

/// Greedy convolutional orthogonal matching pursuit: the selection of
/// [`gcmp`], but the support is a set (reselection is a no-op) and after each
/// layer *all* coefficients are refit by least squares against the original
/// image. After every refit the support columns are orthogonal to the
/// residual to within `1e-8 * ‖x‖₂`.
pub fn gcomp(
    x: &GrayImage,
    dict: &LocalDictionary,
    cfg: &PursuitConfig,
    mask: Option<&PixelMask>,
) -> Result<PursuitResult> {
    let corr = Correlator::new(dict, x.height(), x.width(), cfg.engine)?;
    gcomp_with(&corr, x, dict, cfg, mask)
}

pub fn gcomp_with(
    corr: &Correlator,
    x: &GrayImage,
    dict: &LocalDictionary,
    cfg: &PursuitConfig,
    mask: Option<&PixelMask>,
) -> Result<PursuitResult> {
    cfg.validate()?;
    validate_inputs(x, dict, mask)?;
    check_correlator(corr, x)?;

    let m = dict.m();
    let mut support: Vec<Placement> = Vec::new();
    let mut code = SparseCode::empty(dict.p(), m, x.height(), x.width())?;
    let mut residual = subtract_masked(x, &GrayImage::zeros(x.height(), x.width()), mask);
    let mut r_norm = residual.norm_l2();
    let mut layers: Vec<LayerRecord> = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut truncated = false;

    loop {
        match stopping(cfg, r_norm, layers.len()) {
            Stop::Residual | Stop::Budget => break,
            Stop::LayerCap => {
                truncated = true;
                break;
            }
            Stop::Go => {}
        }
        let scores = corr.correlate(&residual)?;
        let order = selection_order(&scores, cfg.score_zero_tol);
        let mut blocked = BlockMask::new(scores.rows(), scores.cols(), m);
        let mut rec = LayerRecord {
            accepted: Vec::new(),
            score_energy: 0.0,
            residual_before: r_norm,
            residual_after: r_norm,
        };
        let mut fresh = 0usize;
        for &(_, flat) in &order {
            let (atom, row, col) = scores.decode(flat);
            if blocked.is_blocked(row, col) {
                continue;
            }
            let b = scores.as_slice()[flat];
            let plc = Placement::new(atom, row, col);
            if !code.contains(plc) {
                code.set(plc, 0.0)?; // membership marker; coefficients come from the refit
                support.push(plc);
                fresh += 1;
            }
            blocked.block_around(row, col);
            rec.accepted.push(plc);
            rec.score_energy += b * b;
        }
        if rec.accepted.is_empty() || fresh == 0 {
            // nothing new: the refit would reproduce the same coefficients
            history.push(r_norm);
            layers.push(rec);
            break;
        }
        let coeffs = solve_support(&support, dict, x, mask)?;
        code = SparseCode::empty(dict.p(), m, x.height(), x.width())?;
        for (plc, a) in support.iter().zip(&coeffs) {
            code.set(*plc, *a)?;
        }
        let recon = reconstruct(&code, dict)?;
        residual = subtract_masked(x, &recon, mask);
        r_norm = residual.norm_l2();
        rec.residual_after = r_norm;
        history.push(r_norm);
        layers.push(rec);
    }

    Ok(finish(code, layers, history, r_norm, truncated))
}

/// Greedy convolutional thresholding: one score field of the input, visited
/// in decreasing magnitude; a placement is accepted iff every pixel under it
/// is still below the budget `k`. A single least-squares refit at the end.
pub fn gct(x: &GrayImage, dict: &LocalDictionary, k: usize) -> Result<PursuitResult> {
    let corr = Correlator::new(dict, x.height(), x.width(), Engine::default())?;
    gct_with(&corr, x, dict, k)
}

pub fn gct_with(
    corr: &Correlator,
    x: &GrayImage,
    dict: &LocalDictionary,
    k: usize,
) -> Result<PursuitResult> {
    if k == 0 {
        return Err(Error::param("thresholding budget k must be at least 1"));
    }
    validate_inputs(x, dict, None)?;
    check_correlator(corr, x)?;

    let m = dict.m();
    let x_norm = x.norm_l2();
    let scores = corr.correlate(x)?;
    let order = selection_order(&scores, DEFAULT_SCORE_ZERO_TOL);
    let mut coverage = CoverageGrid::new(x.height(), x.width(), m);
    let mut accepted: Vec<Placement> = Vec::new();
    let mut energy = 0.0;
    for &(_, flat) in &order {
        let (atom, row, col) = scores.decode(flat);
        let plc = Placement::new(atom, row, col);
        if coverage.can_add(plc, k) {
            coverage.add(plc);
            energy += scores.as_slice()[flat].powi(2);
            accepted.push(plc);
        }
    }
    let coeffs = solve_support(&accepted, dict, x, None)?;
    let mut code = SparseCode::empty(dict.p(), m, x.height(), x.width())?;
    for (plc, a) in accepted.iter().zip(&coeffs) {
        code.set(*plc, *a)?;
    }
    let recon = reconstruct(&code, dict)?;
    let residual = subtract_masked(x, &recon, None);
    let r_norm = residual.norm_l2();
    let rec = LayerRecord {
        accepted,
        score_energy: energy,
        residual_before: x_norm,
        residual_after: r_norm,
    };
    Ok(finish(code, vec![rec], vec![r_norm], r_norm, false))
}

/// Staged GCOMP: each stage scores the current residual, accepts placements
/// GCT-style against a *fresh* per-stage coverage grid with budget `delta_k`
/// (while also respecting the cumulative ℓ0,∞ cap `target_k`), merges them
/// into the support and refits everything against the input. Stages run until
/// the cumulative budget reaches `target_k`, the residual drops below
/// `epsilon`, or a stage brings nothing new.
pub fn stgcomp(x: &GrayImage, dict: &LocalDictionary, cfg: &PursuitConfig) -> Result<PursuitResult> {
    let corr = Correlator::new(dict, x.height(), x.width(), cfg.engine)?;
    stgcomp_with(&corr, x, dict, cfg)
}

pub fn stgcomp_with(
    corr: &Correlator,
    x: &GrayImage,
    dict: &LocalDictionary,
    cfg: &PursuitConfig,
) -> Result<PursuitResult> {
    cfg.validate()?;
    let Some(target_k) = cfg.target_k else {
        return Err(Error::param("stgcomp requires target_k"));
    };
    validate_inputs(x, dict, None)?;
    check_correlator(corr, x)?;

    let m = dict.m();
    let mut support: Vec<Placement> = Vec::new();
    let mut code = SparseCode::empty(dict.p(), m, x.height(), x.width())?;
    let mut global_cov = CoverageGrid::new(x.height(), x.width(), m);
    let mut residual = x.clone();
    let mut r_norm = residual.norm_l2();
    let mut layers: Vec<LayerRecord> = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut truncated = false;
    let mut budget_used = 0usize;

    loop {
        let eps = cfg.epsilon.unwrap_or(0.0);
        if r_norm <= eps || budget_used >= target_k {
            break;
        }
        if layers.len() >= cfg.max_layers {
            truncated = true;
            break;
        }
        let stage_budget = cfg.delta_k.min(target_k - budget_used);
        let scores = corr.correlate(&residual)?;
        let order = selection_order(&scores, cfg.score_zero_tol);
        let mut stage_cov = CoverageGrid::new(x.height(), x.width(), m);
        let mut rec = LayerRecord {
            accepted: Vec::new(),
            score_energy: 0.0,
            residual_before: r_norm,
            residual_after: r_norm,
        };
        let mut fresh = 0usize;
        for &(_, flat) in &order {
            let (atom, row, col) = scores.decode(flat);
            let plc = Placement::new(atom, row, col);
            if !stage_cov.can_add(plc, stage_budget) {
                continue;
            }
            let known = code.contains(plc);
            if !known && !global_cov.can_add(plc, target_k) {
                continue;
            }
            stage_cov.add(plc);
            rec.accepted.push(plc);
            rec.score_energy += scores.as_slice()[flat].powi(2);
            if !known {
                code.set(plc, 0.0)?;
                support.push(plc);
                global_cov.add(plc);
                fresh += 1;
            }
        }
        if rec.accepted.is_empty() || fresh == 0 {
            history.push(r_norm);
            layers.push(rec);
            break;
        }
        let coeffs = solve_support(&support, dict, x, None)?;
        code = SparseCode::empty(dict.p(), m, x.height(), x.width())?;
        for (plc, a) in support.iter().zip(&coeffs) {
            code.set(*plc, *a)?;
        }
        let recon = reconstruct(&code, dict)?;
        residual = subtract_masked(x, &recon, None);
        r_norm = residual.norm_l2();
        rec.residual_after = r_norm;
        history.push(r_norm);
        layers.push(rec);
        budget_used += stage_budget;
    }

    Ok(finish(code, layers, history, r_norm, truncated))
}

// ===== reference implementation and coherence =====

/// Which greedy rule [`dense_reference_greedy`] replays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreedyMode {
    /// Coefficient accumulation, as in [`gcmp`].
    Accumulate,
    /// Per-layer least-squares refit, as in [`gcomp`].
    Refit,
}

/// Largest pixel count accepted by the brute-force helpers below.
const DENSE_PIXEL_LIMIT: usize = 4096;

fn explicit_columns(
    dict: &LocalDictionary,
    height: usize,
    width: usize,
) -> (Vec<Placement>, Vec<Vec<f64>>) {
    let m = dict.m();
    let mut placements = Vec::new();
    let mut columns = Vec::new();
    for atom in 0..dict.p() {
        for row in 0..=(height - m) {
            for col in 0..=(width - m) {
                let mut column = vec![0.0; height * width];
                for u in 0..m {
                    for v in 0..m {
                        column[(row + u) * width + col + v] = dict.atom(atom)[u * m + v];
                    }
                }
                placements.push(Placement::new(atom, row, col));
                columns.push(column);
            }
        }
    }
    (placements, columns)
}

/// Brute-force greedy pursuit over the *explicit* translated dictionary:
/// every placement is materialized as a dense column, scores are plain dot
/// products, the refit (in [`GreedyMode::Refit`]) solves dense normal
/// equations. Deliberately naive — this is the oracle the fast paths are
/// tested against — and therefore guarded to small images.
pub fn dense_reference_greedy(
    x: &GrayImage,
    dict: &LocalDictionary,
    cfg: &PursuitConfig,
    mode: GreedyMode,
) -> Result<PursuitResult> {
    cfg.validate()?;
    validate_inputs(x, dict, None)?;
    if x.pixels() > DENSE_PIXEL_LIMIT {
        return Err(Error::param(format!(
            "dense reference limited to {DENSE_PIXEL_LIMIT} pixels, got {}",
            x.pixels()
        )));
    }

    let m = dict.m();
    let n = x.pixels();
    let (placements, columns) = explicit_columns(dict, x.height(), x.width());
    let mut alpha = vec![0.0f64; placements.len()];
    let mut in_support = vec![false; placements.len()];
    let mut support: Vec<usize> = Vec::new();

    let recompute_residual = |alpha: &[f64]| -> Vec<f64> {
        let mut recon = vec![0.0; n];
        for (ci, a) in alpha.iter().enumerate() {
            if *a != 0.0 {
                for (o, c) in recon.iter_mut().zip(&columns[ci]) {
                    *o += a * c;
                }
            }
        }
        x.as_slice().iter().zip(&recon).map(|(a, b)| a - b).collect()
    };

    let mut residual: Vec<f64> = x.as_slice().to_vec();
    let mut r_norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut layers: Vec<LayerRecord> = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut truncated = false;

    loop {
        match stopping(cfg, r_norm, layers.len()) {
            Stop::Residual | Stop::Budget => break,
            Stop::LayerCap => {
                truncated = true;
                break;
            }
            Stop::Go => {}
        }
        // dense score pass, then the shared selection ordering
        let mut order: Vec<(f64, usize)> = Vec::new();
        let mut scores = vec![0.0f64; placements.len()];
        for (ci, column) in columns.iter().enumerate() {
            let s: f64 = column.iter().zip(&residual).map(|(c, r)| c * r).sum();
            scores[ci] = s;
            if s.abs() > cfg.score_zero_tol {
                order.push((s.abs(), ci));
            }
        }
        order.sort_unstable_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

        let mut accepted_cols: Vec<usize> = Vec::new();
        let mut rec = LayerRecord {
            accepted: Vec::new(),
            score_energy: 0.0,
            residual_before: r_norm,
            residual_after: r_norm,
        };
        let mut fresh = 0usize;
        for &(_, ci) in &order {
            let plc = placements[ci];
            if accepted_cols
                .iter()
                .any(|&aj| overlaps(placements[aj], plc, m))
            {
                continue;
            }
            accepted_cols.push(ci);
            rec.accepted.push(plc);
            rec.score_energy += scores[ci] * scores[ci];
            match mode {
                GreedyMode::Accumulate => alpha[ci] += scores[ci],
                GreedyMode::Refit => {
                    if !in_support[ci] {
                        in_support[ci] = true;
                        support.push(ci);
                        fresh += 1;
                    }
                }
            }
        }
        let progress = match mode {
            GreedyMode::Accumulate => !rec.accepted.is_empty(),
            GreedyMode::Refit => !rec.accepted.is_empty() && fresh > 0,
        };
        if !progress {
            history.push(r_norm);
            layers.push(rec);
            break;
        }
        if mode == GreedyMode::Refit {
            let coeffs = dense_normal_equations(&columns, &support, x.as_slice())?;
            for a in alpha.iter_mut() {
                *a = 0.0;
            }
            for (si, ci) in support.iter().enumerate() {
                alpha[*ci] = coeffs[si];
            }
        }
        residual = recompute_residual(&alpha);
        r_norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
        rec.residual_after = r_norm;
        history.push(r_norm);
        layers.push(rec);
    }

    let mut code = SparseCode::empty(dict.p(), m, x.height(), x.width())?;
    match mode {
        GreedyMode::Accumulate => {
            for (ci, a) in alpha.iter().enumerate() {
                if *a != 0.0 {
                    code.set(placements[ci], *a)?;
                }
            }
        }
        GreedyMode::Refit => {
            for ci in &support {
                code.set(placements[*ci], alpha[*ci])?;
            }
        }
    }
    Ok(finish(code, layers, history, r_norm, truncated))
}

/// Dense least squares on explicit columns via the normal equations.
fn dense_normal_equations(
    columns: &[Vec<f64>],
    support: &[usize],
    target: &[f64],
) -> Result<Vec<f64>> {
    let n = support.len();
    let a = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        columns[support[i]]
            .iter()
            .zip(&columns[support[j]])
            .map(|(x, y)| x * y)
            .sum::<f64>()
    });
    let b = nalgebra::DVector::from_fn(n, |i, _| {
        columns[support[i]]
            .iter()
            .zip(target)
            .map(|(x, y)| x * y)
            .sum::<f64>()
    });
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Conditioning("dense reference normal equations singular".into()))?;
    Ok(chol.solve(&b).iter().copied().collect())
}

/// Mutual coherence of the translated dictionary over a given image geometry:
/// the largest absolute inner product between two *distinct* placements'
/// columns. Non-overlapping placements contribute zero, so only overlapping
/// pairs are evaluated. Brute force; guarded to small geometries.
pub fn mutual_coherence(dict: &LocalDictionary, height: usize, width: usize) -> Result<f64> {
    let m = dict.m();
    if height < m || width < m {
        return Err(Error::param("geometry smaller than kernel"));
    }
    if height * width > DENSE_PIXEL_LIMIT {
        return Err(Error::param(format!(
            "mutual coherence limited to {DENSE_PIXEL_LIMIT} pixels, got {}",
            height * width
        )));
    }
    let rows = height - m + 1;
    let cols = width - m + 1;
    let mut placements = Vec::with_capacity(dict.p() * rows * cols);
    for atom in 0..dict.p() {
        for row in 0..rows {
            for col in 0..cols {
                placements.push(Placement::new(atom, row, col));
            }
        }
    }
    let mut mu = 0.0f64;
    for i in 0..placements.len() {
        for j in (i + 1)..placements.len() {
            let (a, b) = (placements[i], placements[j]);
            if !overlaps(a, b, m) {
                continue;
            }
            let inner = crate::lsq::overlap_inner(a, b, dict, None);
            mu = mu.max(inner.abs());
        }
    }
    Ok(mu)
}
