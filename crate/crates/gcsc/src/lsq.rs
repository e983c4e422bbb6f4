//! Least-squares machinery: refitting coefficients on a fixed support, and an
//! operator-form CGLS used by the dictionary update.
//!
//! The support refit never materializes the convolutional dictionary. Columns
//! of the implied system have unit-norm atoms on `m x m` supports, so the Gram
//! matrix is sparse (only geometrically overlapping placements interact) and
//! its entries are tiny sums over the overlap rectangle.

use crate::code::Placement;
use crate::dictionary::LocalDictionary;
use crate::error::{Error, Result};
use crate::image::{GrayImage, PixelMask};
use crate::stripes::overlaps;

/// Supports up to this size are refit with a dense Cholesky factorization of
/// the Gram matrix; larger ones switch to conjugate gradients on the same
/// (sparse) Gram, whose stopping rule is the orthogonality tolerance below.
const DENSE_SOLVE_LIMIT: usize = 900;

/// Conjugate-gradient refits stop once every support column's correlation
/// with the residual is below this multiple of the target's ℓ2 norm. One
/// order of magnitude tighter than the 1e-8 the pursuit contract promises.
const GRAM_CG_TOL_FACTOR: f64 = 1e-9;

/// Inner product of the atoms of two overlapping placements over the
/// intersection of their supports, skipping unobserved pixels.
pub(crate) fn overlap_inner(
    a: Placement,
    b: Placement,
    dict: &LocalDictionary,
    mask: Option<&PixelMask>,
) -> f64 {
    let m = dict.m();
    let atom_a = dict.atom(a.atom);
    let atom_b = dict.atom(b.atom);
    let r0 = a.row.max(b.row);
    let r1 = (a.row + m).min(b.row + m);
    let c0 = a.col.max(b.col);
    let c1 = (a.col + m).min(b.col + m);
    let mut s = 0.0;
    for r in r0..r1 {
        for c in c0..c1 {
            if mask.is_some_and(|mk| !mk.observed(r, c)) {
                continue;
            }
            s += atom_a[(r - a.row) * m + (c - a.col)] * atom_b[(r - b.row) * m + (c - b.col)];
        }
    }
    s
}

/// Sparse symmetric Gram matrix in adjacency-list form.
struct Gram {
    /// Per row: `(column index, value)`, diagonal included.
    rows: Vec<Vec<(usize, f64)>>,
}

impl Gram {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            let mut s = 0.0;
            for &(j, g) in row {
                s += g * x[j];
            }
            out[i] = s;
        }
    }

    fn dense(&self, n: usize) -> Vec<f64> {
        let mut full = vec![0.0; n * n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, g) in row {
                full[i * n + j] = g;
            }
        }
        full
    }
}

fn build_normal_equations(
    support: &[Placement],
    dict: &LocalDictionary,
    target: &GrayImage,
    mask: Option<&PixelMask>,
) -> (Gram, Vec<f64>) {
    let n = support.len();
    let m = dict.m();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i..n {
            if !overlaps(support[i], support[j], m) {
                continue;
            }
            let g = overlap_inner(support[i], support[j], dict, mask);
            rows[i].push((j, g));
            if j != i {
                rows[j].push((i, g));
            }
        }
    }
    let mut rhs = vec![0.0; n];
    for (i, plc) in support.iter().enumerate() {
        let atom = dict.atom(plc.atom);
        let mut s = 0.0;
        for u in 0..m {
            for v in 0..m {
                let (r, c) = (plc.row + u, plc.col + v);
                if mask.is_some_and(|mk| !mk.observed(r, c)) {
                    continue;
                }
                s += atom[u * m + v] * target.get(r, c);
            }
        }
        rhs[i] = s;
    }
    (Gram { rows }, rhs)
}

/// In-place Cholesky solve of a dense SPD system; fails on a non-positive
/// pivot, which here means a (numerically) rank-deficient support.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Result<()> {
    for k in 0..n {
        let mut pivot = a[k * n + k];
        for t in 0..k {
            pivot -= a[k * n + t] * a[k * n + t];
        }
        if pivot <= 0.0 || !pivot.is_finite() {
            return Err(Error::Conditioning(format!(
                "support system is not positive definite at column {k}"
            )));
        }
        let pivot = pivot.sqrt();
        a[k * n + k] = pivot;
        for i in (k + 1)..n {
            let mut v = a[i * n + k];
            for t in 0..k {
                v -= a[i * n + t] * a[k * n + t];
            }
            a[i * n + k] = v / pivot;
        }
    }
    // forward then backward substitution on the lower factor
    for i in 0..n {
        let mut v = b[i];
        for t in 0..i {
            v -= a[i * n + t] * b[t];
        }
        b[i] = v / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for t in (i + 1)..n {
            v -= a[t * n + i] * b[t];
        }
        b[i] = v / a[i * n + i];
    }
    Ok(())
}

/// Plain conjugate gradients on the sparse Gram system, run until the
/// normal-equation residual (which *is* the column/residual correlation
/// vector) drops below `tol_inf` in max-norm.
fn gram_cg(gram: &Gram, rhs: &[f64], tol_inf: f64) -> Result<Vec<f64>> {
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut q = vec![0.0; n];
    let mut rho: f64 = r.iter().map(|v| v * v).sum();
    let max_iter = (10 * n).clamp(200, 40_000);
    for _ in 0..max_iter {
        let rmax = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if rmax <= tol_inf {
            return Ok(x);
        }
        gram.apply(&p, &mut q);
        let pq: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
        if pq <= 0.0 || !pq.is_finite() {
            return Err(Error::Conditioning(
                "support system lost positive definiteness in CG".into(),
            ));
        }
        let alpha = rho / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rho_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rho_new / rho;
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    let rmax = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if rmax <= tol_inf {
        Ok(x)
    } else {
        Err(Error::Conditioning(format!(
            "support CG stalled at residual {rmax:.3e} (tolerance {tol_inf:.3e})"
        )))
    }
}

/// Least-squares coefficients for a fixed set of placements: minimizes
/// `‖target - sum_i alpha_i column_i‖₂` over observed pixels. Coefficients are
/// returned in the order of `support`.
///
/// After the solve, the correlation of every support column with the residual
/// is below `1e-8 * ‖target‖₂` (machine precision on the Cholesky path).
pub fn solve_support(
    support: &[Placement],
    dict: &LocalDictionary,
    target: &GrayImage,
    mask: Option<&PixelMask>,
) -> Result<Vec<f64>> {
    let n = support.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = dict.m();
    for plc in support {
        if plc.atom >= dict.p()
            || plc.row + m > target.height()
            || plc.col + m > target.width()
        {
            return Err(Error::param(format!("placement {plc:?} out of range")));
        }
    }
    if let Some(mk) = mask {
        if mk.height() != target.height() || mk.width() != target.width() {
            return Err(Error::param("mask does not match target dimensions"));
        }
    }

    let (gram, mut rhs) = build_normal_equations(support, dict, target, mask);
    for (i, row) in gram.rows.iter().enumerate() {
        let diag = row
            .iter()
            .find(|(j, _)| *j == i)
            .map(|(_, g)| *g)
            .unwrap_or(0.0);
        if diag <= 1e-12 {
            return Err(Error::Conditioning(format!(
                "support column {i} has (near-)zero observed energy"
            )));
        }
    }

    if n <= DENSE_SOLVE_LIMIT {
        let mut dense = gram.dense(n);
        cholesky_solve(&mut dense, &mut rhs, n)?;
        Ok(rhs)
    } else {
        let tol = GRAM_CG_TOL_FACTOR * target.norm_l2().max(f64::MIN_POSITIVE);
        gram_cg(&gram, &rhs, tol)
    }
}

// ===== operator-form CGLS =====

#[derive(Debug, Clone, Copy)]
pub struct CglsConfig {
    /// Stop once the mean squared residual (sum of squares over element
    /// count) of the system drops to this value.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CglsConfig {
    fn default() -> Self {
        CglsConfig {
            tol: 1.0,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CglsOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Sum of squared residuals after 0, 1, 2, ... iterations. Non-increasing.
    pub objective_history: Vec<f64>,
}

/// Conjugate gradient on the normal equations for `min ‖rhs - A v‖₂`, with
/// `A` given only through matching `forward`/`adjoint` closures. Starts from
/// `x0` (a warm start never worsens the objective) and guarantees a
/// non-increasing objective history: a step that fails to improve is rolled
/// back and iteration stops.
pub fn cgls(
    forward: impl Fn(&[f64]) -> Vec<f64>,
    adjoint: impl Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    x0: &[f64],
    cfg: &CglsConfig,
) -> Result<CglsOutcome> {
    if !rhs.iter().all(|v| v.is_finite()) || !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::param("cgls inputs must be finite"));
    }
    if rhs.is_empty() {
        return Err(Error::param("cgls needs a non-empty right-hand side"));
    }
    let m_len = rhs.len() as f64;

    let mut x = x0.to_vec();
    let ax = forward(&x);
    if ax.len() != rhs.len() {
        return Err(Error::param(
            "forward operator output length does not match rhs",
        ));
    }
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut sse: f64 = r.iter().map(|v| v * v).sum();
    let mut history = vec![sse];

    let mut s = adjoint(&r);
    if s.len() != x.len() {
        return Err(Error::param(
            "adjoint operator output length does not match x0",
        ));
    }
    let mut p = s.clone();
    let mut gamma: f64 = s.iter().map(|v| v * v).sum();

    let mut iterations = 0;
    while iterations < cfg.max_iter {
        if sse / m_len <= cfg.tol || gamma == 0.0 {
            break;
        }
        let q = forward(&p);
        let qq: f64 = q.iter().map(|v| v * v).sum();
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        if !alpha.is_finite() {
            return Err(Error::Divergence("cgls step size became non-finite".into()));
        }
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += alpha * pi;
        }
        let mut new_sse = 0.0;
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= alpha * qi;
            new_sse += *ri * *ri;
        }
        if !new_sse.is_finite() {
            return Err(Error::Divergence("cgls residual became non-finite".into()));
        }
        if new_sse >= sse {
            // stagnated (or floating-point noise at convergence): roll back
            for (xi, pi) in x.iter_mut().zip(&p) {
                *xi -= alpha * pi;
            }
            break;
        }
        iterations += 1;
        sse = new_sse;
        history.push(sse);

        s = adjoint(&r);
        let gamma_new: f64 = s.iter().map(|v| v * v).sum();
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
    }

    Ok(CglsOutcome {
        solution: x,
        iterations,
        objective_history: history,
    })
}
