//! Threshold formulas, their inversion, and block-separation bounds.
//!
//! The headline quantity is
//! `lambda(n, m, k, kappa) = ln n + (k-1) ln(m/n) - (m/n) kappa`:
//! driven to minus infinity the union of `m` layers on `n` vertices becomes
//! k-connected with probability tending to one, driven to plus infinity it
//! stops being k-edge-connected (degree obstructions appear). Callers pass
//! either the limit moment `kappa_star` or its size-`n` truncation `kappa_n`.
//!
//! `q_rs` names the probability that no layer edge joins the vertex blocks
//! `(s, s+r]` and `(s+r, n]` (1-based labels). Two closed-form upper bounds
//! are provided for a single layer with fixed `(x, q)`, plus one for the
//! model average; the latter holds only for large `n` and carries an
//! `asymptotic_only` flag.

use crate::{Error, Result};

/// Graph-scale parameters bundled for convenience.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelParams {
    pub n: u64,
    pub m: u64,
    pub k: u32,
}

impl ModelParams {
    pub fn lambda(&self, kappa: f64) -> f64 {
        lambda_star(self.n, self.m, self.k, kappa)
    }
}

/// `ln n + (k-1) ln(m/n) - (m/n) kappa`.
pub fn lambda_star(n: u64, m: u64, k: u32, kappa: f64) -> f64 {
    assert!(n >= 1 && m >= 1 && k >= 1, "n, m, k must be positive");
    assert!(kappa.is_finite() && kappa >= 0.0, "kappa = {kappa} invalid");
    let ratio = m as f64 / n as f64;
    (n as f64).ln() + f64::from(k - 1) * ratio.ln() - ratio * kappa
}

/// Largest layer count considered by [`solve_m`].
pub const SOLVE_M_CAP: u64 = 1_000_000_000;

/// Invert the threshold: find the integer `m` on the decreasing branch
/// (`m >= (k-1) n / kappa`) minimizing `|lambda(n, m, k, kappa) - c_target|`,
/// ties toward smaller `m`. Errors when the target exceeds the branch
/// maximum or needs more than 10^9 layers.
pub fn solve_m(n: u64, k: u32, kappa: f64, c_target: f64) -> Result<u64> {
    assert!(n >= 1 && k >= 1, "n, k must be positive");
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::Domain(format!(
            "kappa = {kappa} must be positive and finite"
        )));
    }
    if !c_target.is_finite() {
        return Err(Error::Domain(format!("c_target = {c_target} not finite")));
    }
    let branch_start = ((f64::from(k - 1) * n as f64) / kappa).ceil();
    let m_lo = (branch_start.max(1.0)) as u64;
    if m_lo > SOLVE_M_CAP {
        return Err(Error::NotSolvable(format!(
            "decreasing branch starts beyond {SOLVE_M_CAP} layers"
        )));
    }
    let lam = |m: u64| lambda_star(n, m, k, kappa);
    if lam(m_lo) < c_target {
        return Err(Error::NotSolvable(format!(
            "target {c_target} exceeds the branch maximum {} at m = {m_lo}",
            lam(m_lo)
        )));
    }
    // Double until lambda drops below the target, then bisect.
    let mut hi = m_lo;
    while lam(hi) >= c_target {
        if hi >= SOLVE_M_CAP {
            return Err(Error::NotSolvable(format!(
                "target {c_target} still above lambda at m = {SOLVE_M_CAP}"
            )));
        }
        hi = (hi * 2).min(SOLVE_M_CAP);
    }
    let mut lo = m_lo;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if lam(mid) >= c_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (d_lo, d_hi) = ((lam(lo) - c_target).abs(), (lam(hi) - c_target).abs());
    Ok(if d_lo <= d_hi { lo } else { hi })
}

/// Expected count of vertices whose layer degrees are all 0/1 and sum to
/// `k-1`, from the exact product formula
/// `n C(m, k-1) (tau_n/n)^(k-1) (1 - kappa_n/n)^(m-k+1)`,
/// evaluated in log space so that large `n, m` survive.
pub fn predicted_expected_nd(n: u64, m: u64, k: u32, kappa_n: f64, tau_n: f64) -> Result<f64> {
    assert!(n >= 1 && m >= 1 && k >= 1, "n, m, k must be positive");
    if !(kappa_n.is_finite() && kappa_n >= 0.0) || !(tau_n.is_finite() && tau_n >= 0.0) {
        return Err(Error::Domain(format!(
            "kappa_n = {kappa_n}, tau_n = {tau_n} must be finite and nonnegative"
        )));
    }
    let nf = n as f64;
    if kappa_n > nf {
        return Err(Error::Degenerate(format!(
            "kappa_n = {kappa_n} exceeds n = {n}; the isolation factor is negative"
        )));
    }
    let j = k - 1; // degree-one layer count
    if (m as f64) < f64::from(j) {
        return Ok(0.0); // C(m, k-1) = 0
    }
    if tau_n == 0.0 && j > 0 {
        return Ok(0.0);
    }
    let trailing = m as i64 - i64::from(j); // exponent of the isolation factor
    if kappa_n == nf {
        return Ok(if trailing == 0 {
            nf * log_binom(m, j).exp() * (tau_n / nf).powi(j as i32)
        } else {
            0.0
        });
    }
    // j = 0 contributes a factor of 1; keep 0 * ln(0) out of the sum.
    let tau_term = if j > 0 {
        f64::from(j) * (tau_n.ln() - nf.ln())
    } else {
        0.0
    };
    let log_value = nf.ln() + log_binom(m, j) + tau_term + trailing as f64 * (-kappa_n / nf).ln_1p();
    Ok(log_value.exp())
}

/// `ln C(m, j)` by a short product; `j` is small in every use.
fn log_binom(m: u64, j: u32) -> f64 {
    let mut out = 0.0;
    for i in 0..u64::from(j) {
        out += ((m - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    out
}

/// Upper bound on `q_rs` that ignores the layer size:
/// `1 - 2 q r (n-s-r) / ((n-s)(n-s-1)) + (s+1) s / n`.
pub fn qrs_bound_sr1(n: u64, s: u64, r: u64, q: f64) -> f64 {
    check_block_geometry(n, s, r);
    assert!(
        q.is_finite() && (0.0..=1.0).contains(&q),
        "q = {q} outside [0, 1]"
    );
    let (nf, sf, rf) = (n as f64, s as f64, r as f64);
    1.0 - 2.0 * q * rf * (nf - sf - rf) / ((nf - sf) * (nf - sf - 1.0)) + (sf + 1.0) * sf / nf
}

/// The sharper bound on `q_rs`, split into its three terms. The pieces
/// recombine exactly: `value = leading + r1s * h(x, q) + overlap`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QBound {
    pub value: f64,
    /// `1 - (1 - e^(-r x / (n-s))) h(x, q)`
    pub leading: f64,
    /// `R_1s = r^2 / (n-s-r)^2`
    pub r1s: f64,
    /// `s r x^2 / (n (n-s)) * h(x, q)`
    pub overlap: f64,
}

/// Size-aware upper bound on `q_rs` for a layer with fixed `(x, q)`:
/// `1 - (1 - e^(-rx/(n-s)) - R_1s) h(x,q) + (s r x^2 / (n(n-s))) h(x,q)`.
pub fn qrs_bound_sr2(n: u64, s: u64, r: u64, x: u64, q: f64) -> QBound {
    check_block_geometry(n, s, r);
    assert!(x >= 2, "x = {x} must be at least 2");
    assert!(
        q.is_finite() && (0.0..=1.0).contains(&q),
        "q = {q} outside [0, 1]"
    );
    let (nf, sf, rf, xf) = (n as f64, s as f64, r as f64, x as f64);
    let hv = crate::dist::h(x, q);
    let leading = 1.0 - (1.0 - (-rf * xf / (nf - sf)).exp()) * hv;
    let r1s = (rf / (nf - sf - rf)).powi(2);
    let overlap = sf * rf * xf * xf / (nf * (nf - sf)) * hv;
    QBound {
        value: leading + r1s * hv + overlap,
        leading,
        r1s,
        overlap,
    }
}

/// Model-averaged bound with its validity caveat.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HatBound {
    pub value: f64,
    /// The inequality is proved only for sufficiently large `n`; the
    /// threshold size is not constructive, so this stays `true` and the
    /// bound is never used as a hard acceptance criterion.
    pub asymptotic_only: bool,
}

/// Average-layer bound
/// `1 - r kappa_star / (n-s) + (2 + mu (s+1)) r / ((n-s) ln n)`.
pub fn hat_qrs_bound(n: u64, s: u64, r: u64, kappa_star: f64, mu: f64) -> HatBound {
    assert!(n >= 2 && n > s && r >= 1, "need n >= 2, n > s, r >= 1");
    assert!(
        kappa_star.is_finite() && kappa_star >= 0.0 && mu.is_finite() && mu >= 0.0,
        "kappa_star = {kappa_star}, mu = {mu} must be finite and nonnegative"
    );
    let (nf, sf, rf) = (n as f64, s as f64, r as f64);
    let value =
        1.0 - rf * kappa_star / (nf - sf) + (2.0 + mu * (sf + 1.0)) * rf / ((nf - sf) * nf.ln());
    HatBound {
        value,
        asymptotic_only: true,
    }
}

fn check_block_geometry(n: u64, s: u64, r: u64) {
    assert!(r >= 1, "r must be at least 1");
    assert!(
        s + 2 * r <= n,
        "blocks out of range: need s + 2r <= n, got n = {n}, s = {s}, r = {r}"
    );
}
