//! Downlink sum-rate capacity: dirty-paper-coding capacity via sum-power
//! iterative water-filling, the interference-free asymptote, and a
//! zero-forcing equal-power baseline.
//!
//! The DPC sum capacity of a K x M channel at interference-free SNR `rho`
//! maximizes `log2 det(I + (rho K / M) H^H P H)` over diagonal `P >= 0` with
//! unit trace. With single-antenna users this is the dual multiple-access
//! form, so everything reduces to the K x K Gram matrix `G = H H^H`:
//! the determinant equals `det(I_K + c sqrt(P) G sqrt(P))` and each user's
//! effective gain needs only a (K-1) x (K-1) Hermitian solve.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default relative-capacity-change stopping tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Default iteration cap for the water-filling loop.
pub const DEFAULT_MAX_ITER: usize = 500;

/// Power split across users: diagonal of the DPC power matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// Per-user powers, nonnegative, summing to 1.
    pub p: Vec<f64>,
    /// Water level of the final water-filling step.
    pub water_level: f64,
    /// Water-filling cycles performed.
    pub iterations: usize,
    /// False when the loop hit its iteration cap before the tolerance.
    pub converged: bool,
}

impl PowerAllocation {
    /// Checks the feasibility invariants: entries nonnegative, unit sum.
    pub fn is_feasible(&self) -> bool {
        self.p.iter().all(|&x| x >= 0.0)
            && (self.p.iter().sum::<f64>() - 1.0).abs() <= 1e-9
    }
}

/// DPC capacity with its power allocation, plus an optional ZF baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    /// DPC sum-rate capacity in bits/s/Hz.
    pub c_dpc: f64,
    pub allocation: PowerAllocation,
    /// Zero-forcing equal-power sum rate, when requested.
    pub c_zf: Option<f64>,
}

/// Interference-free asymptotic sum-rate capacity `K log2(1 + rho)`, the
/// limit reached when user channels become pairwise orthogonal.
pub fn if_capacity(num_users: usize, rho: f64) -> f64 {
    num_users as f64 * (1.0 + rho).log2()
}

fn validate_channel(h: &DMatrix<Complex64>, rho: f64) -> Result<(usize, usize, f64)> {
    let (k, m) = h.shape();
    if k > m {
        return Err(Error::Overloaded {
            users: k,
            antennas: m,
        });
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidParam("rho must be positive".into()));
    }
    if h.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok((k, m, rho * k as f64 / m as f64))
}

/// Evaluates the DPC objective `log2 det(I + c sqrt(P) G sqrt(P))` at a given
/// allocation (not necessarily optimal).
pub fn capacity_objective(h: &DMatrix<Complex64>, rho: f64, p: &[f64]) -> Result<f64> {
    let (k, _, c) = validate_channel(h, rho)?;
    if p.len() != k {
        return Err(Error::InvalidParam(format!(
            "allocation has {} entries for {k} users",
            p.len()
        )));
    }
    let g = h * h.adjoint();
    Ok(logdet_objective(&g, c, p))
}

fn logdet_objective(g: &DMatrix<Complex64>, c: f64, p: &[f64]) -> f64 {
    let k = g.nrows();
    let sqrt_p: Vec<f64> = p.iter().map(|&x| x.max(0.0).sqrt()).collect();
    let a = DMatrix::from_fn(k, k, |i, j| {
        let v = g[(i, j)] * (c * sqrt_p[i] * sqrt_p[j]);
        if i == j {
            v + Complex64::new(1.0, 0.0)
        } else {
            v
        }
    });
    // I + PSD is positive definite, so the factorization cannot fail
    let chol = a.cholesky().expect("I + c sqrt(P) G sqrt(P) must be positive definite");
    let ln_det: f64 = (0..k).map(|i| chol.l()[(i, i)].re.ln()).sum::<f64>() * 2.0;
    ln_det / std::f64::consts::LN_2
}

/// Effective gain of each user given the other users' current powers:
/// `e_i = c h_i (I + c sum_{j != i} P_j h_j^H h_j)^{-1} h_i^H`, computed via
/// the matrix-inversion lemma on the Gram matrix.
fn effective_gains(g: &DMatrix<Complex64>, c: f64, p: &[f64]) -> Vec<f64> {
    let k = g.nrows();
    (0..k)
        .map(|i| {
            let others: Vec<usize> = (0..k).filter(|&j| j != i && p[j] > 0.0).collect();
            let gii = g[(i, i)].re;
            if others.is_empty() {
                return c * gii;
            }
            let n = others.len();
            let s = DMatrix::from_fn(n, n, |r, t| {
                let v = g[(others[r], others[t])];
                if r == t {
                    v + Complex64::new(1.0 / (c * p[others[r]]), 0.0)
                } else {
                    v
                }
            });
            let rhs = DVector::from_fn(n, |r, _| g[(others[r], i)]);
            let x = s
                .cholesky()
                .map(|ch| ch.solve(&rhs))
                .unwrap_or_else(|| DVector::zeros(n));
            let reduction: f64 = rhs
                .iter()
                .zip(x.iter())
                .map(|(gv, xv)| (gv.conj() * xv).re)
                .sum();
            (c * (gii - reduction)).max(0.0)
        })
        .collect()
}

/// Exact water level for `sum_i max(0, mu - 1/e_i) = 1`, found by sorting
/// the inverse gains and solving the piecewise-linear constraint.
/// Returns the allocation and the level; `None` when every gain is zero.
fn water_fill(gains: &[f64]) -> Option<(Vec<f64>, f64)> {
    let k = gains.len();
    let inv: Vec<f64> = gains
        .iter()
        .map(|&e| if e > 1e-300 { 1.0 / e } else { f64::INFINITY })
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| inv[a].partial_cmp(&inv[b]).unwrap());
    let finite = order.iter().filter(|&&i| inv[i].is_finite()).count();
    if finite == 0 {
        return None;
    }
    // the active set is a prefix of the sorted users; the solution is the
    // largest n whose water level still covers its n-th inverse gain
    let mut prefix = 0.0;
    let mut chosen = None;
    for n in 1..=finite {
        prefix += inv[order[n - 1]];
        let mu = (1.0 + prefix) / n as f64;
        if mu > inv[order[n - 1]] {
            chosen = Some(mu);
        }
    }
    let mu = chosen?;
    let p: Vec<f64> = inv
        .iter()
        .map(|&a| if a.is_finite() { (mu - a).max(0.0) } else { 0.0 })
        .collect();
    Some((p, mu))
}

/// DPC sum-rate capacity by damped sum-power iterative water-filling.
///
/// Starts from the uniform allocation; each cycle recomputes every user's
/// effective gain against the others' current powers, water-fills a fresh
/// allocation under the unit power budget, and averages it with the old one
/// with weight (K-1)/K (the provably convergent variant). Stops when the
/// relative capacity change drops below `tol` or after `max_iter` cycles;
/// in the latter case the result is flagged `converged = false` but the
/// value is still returned.
pub fn dpc_capacity(
    h: &DMatrix<Complex64>,
    rho: f64,
    tol: f64,
    max_iter: usize,
) -> Result<CapacityResult> {
    let (k, _, c) = validate_channel(h, rho)?;
    if max_iter == 0 {
        return Err(Error::InvalidParam("max_iter must be at least 1".into()));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidParam("tol must be nonnegative".into()));
    }
    let g = h * h.adjoint();
    let mut p = vec![1.0 / k as f64; k];
    let mut cap = logdet_objective(&g, c, &p);
    let mut water_level = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=max_iter {
        iterations = it;
        let gains = effective_gains(&g, c, &p);
        let Some((p_new, mu)) = water_fill(&gains) else {
            // zero channel: capacity 0 at the uniform allocation
            converged = true;
            break;
        };
        water_level = mu;
        let damp = (k as f64 - 1.0) / k as f64;
        for i in 0..k {
            p[i] = damp * p[i] + (1.0 - damp) * p_new[i];
        }
        let sum: f64 = p.iter().sum();
        for v in &mut p {
            *v /= sum;
        }
        let new_cap = logdet_objective(&g, c, &p);
        let done = (new_cap - cap).abs() <= tol * new_cap.abs().max(1.0);
        cap = new_cap;
        if done {
            converged = true;
            break;
        }
    }

    Ok(CapacityResult {
        c_dpc: cap,
        allocation: PowerAllocation {
            p,
            water_level,
            iterations,
            converged,
        },
        c_zf: None,
    })
}

/// DPC capacity with the defaults `tol = 1e-8`, `max_iter = 500`.
pub fn dpc_capacity_default(h: &DMatrix<Complex64>, rho: f64) -> Result<CapacityResult> {
    dpc_capacity(h, rho, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// DPC capacity with the zero-forcing baseline filled in alongside it.
pub fn dpc_with_zf(h: &DMatrix<Complex64>, rho: f64) -> Result<CapacityResult> {
    let mut result = dpc_capacity_default(h, rho)?;
    result.c_zf = Some(zf_sumrate(h, rho)?);
    Ok(result)
}

/// Zero-forcing sum rate with equal per-user power 1/K through the
/// pseudo-inverse precoder normalized to unit total power:
/// `R = sum_i log2(1 + (rho K / M) (1/K) / [(H H^H)^{-1}]_ii)`.
pub fn zf_sumrate(h: &DMatrix<Complex64>, rho: f64) -> Result<f64> {
    let (k, _, c) = validate_channel(h, rho)?;
    // explicit numeric-rank decision: Cholesky alone can slip past an
    // exactly singular Gram matrix through rounding
    let sv = h.singular_values();
    let s_max = sv.iter().cloned().fold(0.0f64, f64::max);
    let s_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if s_max == 0.0 || s_min <= crate::spectral::RANK_TOL * s_max {
        return Err(Error::SingularGram);
    }
    let g = h * h.adjoint();
    let chol = g.cholesky().ok_or(Error::SingularGram)?;
    let inv = chol.inverse();
    let mut rate = 0.0;
    for i in 0..k {
        let d = inv[(i, i)].re;
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::SingularGram);
        }
        rate += (1.0 + c / (k as f64 * d)).log2();
    }
    Ok(rate)
}
