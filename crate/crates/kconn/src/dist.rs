//! Model descriptions and moment functionals.
//!
//! A model is the joint law of `(X, Q)`: `X` a nonnegative integer (layer
//! size budget), `Q` a value in `[0, 1]` (within-layer edge probability).
//! Two shapes are supported, mirroring the on-disk JSON:
//!
//! * finite support — `{"atoms": [{"x": 2, "q": 1.0, "p": 1.0}]}`,
//! * parametric — `{"family": "poisson", "params": {"lambda": 3.0, "q": 0.2}}`.
//!
//! Families shipped: `poisson` (`lambda`), `geometric` (`p`, success
//! probability, support 0,1,2,...), `zipf` (`gamma > 1`, support 1,2,...).
//! Each family takes exactly one of `q` (constant) or `q_over_x` (`beta`,
//! meaning `q(x) = min(1, beta/x)` for `x >= 1`).
//!
//! The moment summary [`ThresholdQuantities`] collects the functionals that
//! drive connectivity thresholds:
//!
//! | field        | value                                        |
//! |--------------|----------------------------------------------|
//! | `alpha`      | `E[Q; X >= 2]`                               |
//! | `kappa_star` | `E[X h(X,Q)]`                                |
//! | `tau_star`   | `E[(X)_2 Q (1-Q)^(X-2)]`                     |
//! | `eta[j]`     | `E[X^j Q^(j-1)]` for `2 <= j <= k_max`       |
//! | `mu`         | `E[X h(X,Q) ln(1+X)]`                        |
//! | `mu_prime`   | `E[X min(1, XQ) ln(1+X)]`                    |
//! | `kappa_n`    | `E[X~ h(X~,Q)]` with `X~ = min(X, n)`        |
//! | `tau_n`      | `E[(X~)_2 Q (1-Q)^(X~-2)]`                   |
//!
//! where `h(x,q) = 1 - (1-q)^((x-1)+)` is the probability that a fixed
//! member of a layer of size `x` is non-isolated inside it (with `0^0 = 1`).
//!
//! Parametric moments are streamed over the support until the analytic tail
//! mass drops below a tolerance (default 1e-10). Divergent moments are
//! detected by a dyadic tail-growth heuristic (block sums over
//! `[2^t, 2^(t+1))`; a last-block ratio at or above 0.95 flags the moment)
//! and reported as `+inf`; convergent heavy tails get a geometric
//! extrapolation of the remaining blocks. FiniteSupport moments are exact
//! sums and never infinite.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{Error, Result};

/// Default tail-mass tolerance for parametric summation/materialization.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;
/// Finite-support probabilities must sum to 1 within this.
pub const PROB_SUM_TOL: f64 = 1e-12;
/// Materialized atom cap for parametric samplers.
const MAX_MATERIALIZED_ATOMS: usize = 1 << 22;
/// Hard cap on streamed support points.
const MAX_STREAM_X: u64 = 1 << 24;
/// Dyadic block ratio at or above which a moment is flagged divergent.
const DIVERGENT_BLOCK_RATIO: f64 = 0.95;

/// One support point of a finite-support law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub x: u64,
    pub q: f64,
    pub p: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteSupportSpec {
    pub atoms: Vec<Atom>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParametricSpec {
    pub family: String,
    pub params: BTreeMap<String, f64>,
}

/// Joint law of `(X, Q)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JointDistribution {
    FiniteSupport(FiniteSupportSpec),
    Parametric(ParametricSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    FiniteSupport,
    Parametric,
}

impl JointDistribution {
    pub fn from_atoms(atoms: Vec<Atom>) -> Self {
        JointDistribution::FiniteSupport(FiniteSupportSpec { atoms })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let dist: JointDistribution = serde_json::from_str(s)
            .map_err(|e| Error::InvalidDistribution(format!("unrecognized shape: {e}")))?;
        dist.validate()?;
        Ok(dist)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn kind(&self) -> Kind {
        match self {
            JointDistribution::FiniteSupport(_) => Kind::FiniteSupport,
            JointDistribution::Parametric(_) => Kind::Parametric,
        }
    }

    /// Check ranges, probability mass, and family parameters.
    pub fn validate(&self) -> Result<()> {
        match self {
            JointDistribution::FiniteSupport(spec) => {
                if spec.atoms.is_empty() {
                    return Err(Error::InvalidDistribution("no atoms".into()));
                }
                let mut total = 0.0;
                for (i, a) in spec.atoms.iter().enumerate() {
                    if !a.q.is_finite() || !(0.0..=1.0).contains(&a.q) {
                        return Err(Error::InvalidDistribution(format!(
                            "atom {i}: q = {} outside [0, 1]",
                            a.q
                        )));
                    }
                    if !a.p.is_finite() || !(0.0..=1.0).contains(&a.p) {
                        return Err(Error::InvalidDistribution(format!(
                            "atom {i}: p = {} outside [0, 1]",
                            a.p
                        )));
                    }
                    total += a.p;
                }
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::InvalidDistribution(format!(
                        "atom probabilities sum to {total}, not 1"
                    )));
                }
                Ok(())
            }
            JointDistribution::Parametric(spec) => Family::from_spec(spec).map(|_| ()),
        }
    }

    fn family(&self) -> Result<Family> {
        match self {
            JointDistribution::Parametric(spec) => Family::from_spec(spec),
            JointDistribution::FiniteSupport(_) => Err(Error::InvalidDistribution(
                "finite-support law has no family".into(),
            )),
        }
    }

    /// Prepare a reusable sampler. Parametric laws are materialized down to
    /// tail mass `tol` (capped at 2^22 points; the covered mass is
    /// renormalized, so the truncation bias is below `tol`).
    pub fn sampler(&self, tol: f64) -> Result<DistSampler> {
        self.validate()?;
        check_tol(tol)?;
        let items: Vec<(u64, f64, f64)> = match self {
            JointDistribution::FiniteSupport(spec) => {
                spec.atoms.iter().map(|a| (a.x, a.q, a.p)).collect()
            }
            JointDistribution::Parametric(_) => {
                let fam = self.family()?;
                let mut out = Vec::new();
                let mut pmf = fam.pmf();
                loop {
                    let (x, p) = pmf.next_mass();
                    if p > 0.0 {
                        out.push((x, fam.q_of(x), p));
                    }
                    if pmf.tail_mass(x) < tol {
                        break;
                    }
                    if out.len() >= MAX_MATERIALIZED_ATOMS {
                        return Err(Error::InvalidDistribution(format!(
                            "tail mass still above {tol} after {MAX_MATERIALIZED_ATOMS} \
                             support points; loosen the tolerance"
                        )));
                    }
                }
                out
            }
        };
        let mut cum = Vec::with_capacity(items.len());
        let mut total = 0.0;
        for &(_, _, p) in &items {
            total += p;
            cum.push(total);
        }
        Ok(DistSampler {
            items: items.into_iter().map(|(x, q, _)| (x, q)).collect(),
            cum,
            total,
        })
    }
}

/// Draws `(X, Q)` pairs; built once, used for many layers.
#[derive(Clone, Debug)]
pub struct DistSampler {
    items: Vec<(u64, f64)>,
    cum: Vec<f64>,
    total: f64,
}

impl DistSampler {
    pub fn draw(&self, rng: &mut impl rand::Rng) -> (u64, f64) {
        let u: f64 = rng.gen::<f64>() * self.total;
        let i = self.cum.partition_point(|&c| c <= u);
        self.items[i.min(self.items.len() - 1)]
    }

    pub fn support_len(&self) -> usize {
        self.items.len()
    }
}

/// Falling factorial `(x)_j = x (x-1) ... (x-j+1)`; zero when `x < j`.
pub fn falling_factorial(x: u64, j: u32) -> f64 {
    if (x as u128) < j as u128 {
        return 0.0;
    }
    let mut out = 1.0;
    for i in 0..j as u64 {
        out *= (x - i) as f64;
    }
    out
}

/// `h(x, q) = 1 - (1-q)^((x-1)+)`, the chance that a given member of a
/// size-`x` layer with edge probability `q` meets at least one layer edge
/// endpoint. Zero for `x <= 1`; `0^0 = 1` so `h(., 1)` jumps only at `x = 2`.
pub fn h(x: u64, q: f64) -> f64 {
    assert!(
        q.is_finite() && (0.0..=1.0).contains(&q),
        "q = {q} outside [0, 1]"
    );
    if x <= 1 || q == 0.0 {
        return 0.0;
    }
    if q == 1.0 {
        return 1.0;
    }
    -(((x - 1) as f64) * (-q).ln_1p()).exp_m1()
}

/// `(1-q)^e` with the `0^0 = 1` convention, stable for tiny `q`.
fn pow_one_minus(q: f64, e: u64) -> f64 {
    if e == 0 {
        return 1.0;
    }
    if q == 1.0 {
        return 0.0;
    }
    ((e as f64) * (-q).ln_1p()).exp()
}

/// Moment summary of a model at graph size `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdQuantities {
    pub alpha: f64,
    pub kappa_star: f64,
    pub tau_star: f64,
    /// `eta[j] = E[X^j Q^(j-1)]`, keys `2..=k_max`.
    pub eta: BTreeMap<u32, f64>,
    pub mu: f64,
    pub mu_prime: f64,
    pub kappa_n: f64,
    pub tau_n: f64,
    pub n_used: u64,
}

impl ThresholdQuantities {
    /// JSON with `+inf` spelled as the string `"inf"` (JSON has no infinity).
    pub fn to_json(&self) -> Value {
        let eta: serde_json::Map<String, Value> = self
            .eta
            .iter()
            .map(|(j, v)| (j.to_string(), json_num(*v)))
            .collect();
        json!({
            "alpha": json_num(self.alpha),
            "kappa_star": json_num(self.kappa_star),
            "tau_star": json_num(self.tau_star),
            "eta": eta,
            "mu": json_num(self.mu),
            "mu_prime": json_num(self.mu_prime),
            "kappa_n": json_num(self.kappa_n),
            "tau_n": json_num(self.tau_n),
            "n_used": self.n_used,
        })
    }
}

/// Render a float for JSON, mapping non-finite values to strings.
pub(crate) fn json_num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

/// All raw expectations from one pass, including the pair moments used by
/// the inequality checks.
pub(crate) struct RawMoments {
    pub alpha: f64,
    pub kappa_star: f64,
    pub tau_star: f64,
    pub mu: f64,
    pub mu_prime: f64,
    pub eta: Vec<f64>,
    pub kappa_n: f64,
    pub tau_n: f64,
    /// `E[(X)_2 Q]`
    pub pairs_q: f64,
    /// `E[(X)_2 Q; X > n]`
    pub pairs_q_tail: f64,
}

/// Number of possibly-divergent functionals tracked per stream.
const BASE_FUNCS: usize = 7;

fn integrands(x: u64, q: f64, n: u64, k_max: u32, out: &mut [f64]) {
    let xf = x as f64;
    let hv = h(x, q);
    let log1px = (xf + 1.0).ln();
    let pairs = falling_factorial(x, 2) * q;
    out[0] = if x >= 2 { q } else { 0.0 }; // alpha
    out[1] = xf * hv; // kappa_star
    out[2] = if x >= 2 {
        pairs * pow_one_minus(q, x - 2)
    } else {
        0.0
    }; // tau_star
    out[3] = xf * hv * log1px; // mu
    out[4] = xf * (xf * q).min(1.0) * log1px; // mu_prime
    out[5] = pairs; // E (X)_2 Q
    out[6] = if x > n { pairs } else { 0.0 }; // E (X)_2 Q; X > n
    for j in 2..=k_max {
        out[BASE_FUNCS + (j - 2) as usize] = xf.powi(j as i32) * q.powf((j - 1) as f64);
    }
}

fn truncated_terms(x: u64, q: f64, n: u64) -> (f64, f64) {
    let xt = x.min(n);
    let kap = (xt as f64) * h(xt, q);
    let tau = if xt >= 2 {
        falling_factorial(xt, 2) * q * pow_one_minus(q, xt - 2)
    } else {
        0.0
    };
    (kap, tau)
}

/// Tracks one functional's partial sum plus dyadic block sums for the
/// tail-growth heuristic.
struct Acc {
    sum: f64,
    block: f64,
    last_complete: f64,
    prev_complete: f64,
    block_end: u64,
}

impl Acc {
    fn new() -> Self {
        Acc {
            sum: 0.0,
            block: 0.0,
            last_complete: 0.0,
            prev_complete: 0.0,
            block_end: 2,
        }
    }

    fn push(&mut self, x: u64, v: f64) {
        while x >= self.block_end {
            self.prev_complete = self.last_complete;
            self.last_complete = self.block;
            self.block = 0.0;
            self.block_end *= 2;
        }
        self.sum += v;
        self.block += v;
    }

    /// Final value once streaming has stopped at a dyadic boundary, so that
    /// `block` holds a complete block: `+inf` when the block sums refuse to
    /// decay, otherwise the partial sum plus a geometric extrapolation of
    /// everything past the boundary.
    fn finish(&self) -> f64 {
        let (b1, b0) = (self.block, self.last_complete);
        if b0 > 0.0 && b1 > 0.0 {
            let ratio = b1 / b0;
            if ratio >= DIVERGENT_BLOCK_RATIO {
                return f64::INFINITY;
            }
            // Power-law tails keep a constant block ratio, while lighter
            // tails shrink theirs (geometric pmfs square the ratio every
            // block since the exponent doubles). Extrapolating the log-ratio
            // trend covers both without overshooting the remainder.
            let mut r = ratio;
            if self.prev_complete > 0.0 {
                let prev_ratio = b0 / self.prev_complete;
                if prev_ratio < 1.0 && ratio < prev_ratio {
                    let projected = (ratio.ln() * ratio.ln() / prev_ratio.ln()).exp();
                    r = projected.min(ratio);
                }
            }
            return self.sum + b1 * r / (1.0 - r);
        }
        self.sum
    }
}

pub(crate) fn raw_moments(
    dist: &JointDistribution,
    n: u64,
    k_max: u32,
    tol: f64,
) -> Result<RawMoments> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if k_max == 0 {
        return Err(Error::Domain("k_max must be at least 1".into()));
    }
    dist.validate()?;
    let nfuncs = BASE_FUNCS + k_max.saturating_sub(1) as usize;
    let mut vals = vec![0.0; nfuncs];
    let finish;
    let mut kappa_n = 0.0;
    let mut tau_n = 0.0;

    match dist {
        JointDistribution::FiniteSupport(spec) => {
            let mut sums = vec![0.0; nfuncs];
            for a in &spec.atoms {
                integrands(a.x, a.q, n, k_max, &mut vals);
                for (s, v) in sums.iter_mut().zip(&vals) {
                    *s += a.p * v;
                }
                let (kap, tau) = truncated_terms(a.x, a.q, n);
                kappa_n += a.p * kap;
                tau_n += a.p * tau;
            }
            finish = sums;
        }
        JointDistribution::Parametric(_) => {
            check_tol(tol)?;
            let fam = dist.family()?;
            let mut accs: Vec<Acc> = (0..nfuncs).map(|_| Acc::new()).collect();
            let mut pmf = fam.pmf();
            // Stop only at dyadic block boundaries so the extrapolation in
            // Acc::finish sees a complete final block and the geometric tail
            // estimate covers exactly the region never streamed.
            let mut boundary = 2u64;
            loop {
                let (x, p) = pmf.next_mass();
                if p > 0.0 {
                    let q = fam.q_of(x);
                    integrands(x, q, n, k_max, &mut vals);
                    let (kap, tau) = truncated_terms(x, q, n);
                    kappa_n += p * kap;
                    tau_n += p * tau;
                } else {
                    vals.iter_mut().for_each(|v| *v = 0.0);
                }
                for (a, v) in accs.iter_mut().zip(&vals) {
                    a.push(x, p * v);
                }
                if x + 1 == boundary {
                    if pmf.tail_mass(x) < tol {
                        break;
                    }
                    boundary *= 2;
                }
                if x >= MAX_STREAM_X {
                    return Err(Error::InvalidDistribution(format!(
                        "tail mass still above {tol} at x = {MAX_STREAM_X}; \
                         loosen the tolerance"
                    )));
                }
            }
            finish = accs.iter().map(Acc::finish).collect();
        }
    }

    Ok(RawMoments {
        alpha: finish[0],
        kappa_star: finish[1],
        tau_star: finish[2],
        mu: finish[3],
        mu_prime: finish[4],
        pairs_q: finish[5],
        pairs_q_tail: finish[6],
        eta: finish[BASE_FUNCS..].to_vec(),
        kappa_n,
        tau_n,
    })
}

/// Compute the moment summary of `dist` at graph size `n`, with
/// `eta[j]` for `2 <= j <= k_max`. `tol` is the parametric tail-mass
/// tolerance (ignored for finite support; pass [`DEFAULT_TAIL_TOL`]).
pub fn moments(
    dist: &JointDistribution,
    n: u64,
    k_max: u32,
    tol: f64,
) -> Result<ThresholdQuantities> {
    let raw = raw_moments(dist, n, k_max, tol)?;
    let eta = (2..=k_max)
        .map(|j| (j, raw.eta[(j - 2) as usize]))
        .collect();
    Ok(ThresholdQuantities {
        alpha: raw.alpha,
        kappa_star: raw.kappa_star,
        tau_star: raw.tau_star,
        eta,
        mu: raw.mu,
        mu_prime: raw.mu_prime,
        kappa_n: raw.kappa_n,
        tau_n: raw.tau_n,
        n_used: n,
    })
}

/// One inequality evaluation: `lhs <= rhs` up to float slack.
#[derive(Clone, Debug)]
pub struct MomentCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct MomentCheckReport {
    pub checks: Vec<MomentCheck>,
    pub all_pass: bool,
}

impl MomentCheckReport {
    pub fn to_json(&self) -> Value {
        json!({
            "all_pass": self.all_pass,
            "checks": self.checks.iter().map(|c| json!({
                "name": c.name,
                "lhs": json_num(c.lhs),
                "rhs": json_num(c.rhs),
                "pass": c.pass,
            })).collect::<Vec<_>>(),
        })
    }
}

pub(crate) fn le_check(name: &str, lhs: f64, rhs: f64) -> MomentCheck {
    let slack = 1e-12 * lhs.abs().max(rhs.abs()).max(1.0);
    // An infinite rhs dominates everything; an infinite lhs only passes
    // against an infinite rhs.
    let pass = lhs <= rhs + slack || rhs.is_infinite() && rhs > 0.0;
    MomentCheck {
        name: name.into(),
        lhs,
        rhs,
        pass,
    }
}

/// Evaluate the structural inequalities the moment functionals must satisfy:
/// `alpha <= kappa_star <= E[(X)_2 Q]`, the truncation gap bounds
/// `0 <= kappa_star - kappa_n <= mu / ln(1+n)`,
/// `|tau_n - tau_star| <= E[(X)_2 Q; X > n]`, and `tau_star <= kappa_star`.
pub fn check_moment_inequalities(
    dist: &JointDistribution,
    tq: &ThresholdQuantities,
    tol: f64,
) -> Result<MomentCheckReport> {
    let raw = raw_moments(dist, tq.n_used, 1, tol)?;
    let gap = tq.kappa_star - tq.kappa_n;
    let checks = vec![
        le_check("alpha <= kappa_star", tq.alpha, tq.kappa_star),
        le_check("kappa_star <= E[(X)_2 Q]", tq.kappa_star, raw.pairs_q),
        le_check("0 <= kappa_star - kappa_n", 0.0, gap),
        le_check(
            "kappa_star - kappa_n <= mu/ln(1+n)",
            gap,
            tq.mu / ((tq.n_used as f64) + 1.0).ln(),
        ),
        le_check(
            "|tau_n - tau_star| <= E[(X)_2 Q; X > n]",
            (tq.tau_n - tq.tau_star).abs(),
            raw.pairs_q_tail,
        ),
        le_check("tau_star <= kappa_star", tq.tau_star, tq.kappa_star),
    ];
    let all_pass = checks.iter().all(|c| c.pass);
    Ok(MomentCheckReport { checks, all_pass })
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol.is_finite() && tol > 0.0 && tol < 1.0) {
        return Err(Error::Domain(format!("tolerance {tol} outside (0, 1)")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Parametric families

#[derive(Clone, Debug)]
enum XLaw {
    Poisson { lambda: f64 },
    Geometric { p: f64 },
    Zipf { gamma: f64, zeta: f64 },
}

#[derive(Clone, Copy, Debug)]
enum QRule {
    Const(f64),
    OverX(f64),
}

#[derive(Clone, Debug)]
struct Family {
    xlaw: XLaw,
    qrule: QRule,
}

impl Family {
    fn from_spec(spec: &ParametricSpec) -> Result<Family> {
        let mut params = spec.params.clone();
        let mut take = |key: &str| params.remove(key);
        let qrule = match (take("q"), take("q_over_x")) {
            (Some(q), None) => {
                if !q.is_finite() || !(0.0..=1.0).contains(&q) {
                    return Err(Error::InvalidDistribution(format!(
                        "q = {q} outside [0, 1]"
                    )));
                }
                QRule::Const(q)
            }
            (None, Some(beta)) => {
                if !beta.is_finite() || beta <= 0.0 {
                    return Err(Error::InvalidDistribution(format!(
                        "q_over_x = {beta} must be positive"
                    )));
                }
                QRule::OverX(beta)
            }
            _ => {
                return Err(Error::InvalidDistribution(
                    "exactly one of q / q_over_x is required".into(),
                ))
            }
        };
        let xlaw = match spec.family.as_str() {
            "poisson" => {
                let lambda = req(&mut params, "lambda")?;
                if !lambda.is_finite() || lambda <= 0.0 {
                    return Err(Error::InvalidDistribution(format!(
                        "lambda = {lambda} must be positive"
                    )));
                }
                XLaw::Poisson { lambda }
            }
            "geometric" => {
                let p = req(&mut params, "p")?;
                if !p.is_finite() || !(p > 0.0 && p <= 1.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "p = {p} outside (0, 1]"
                    )));
                }
                XLaw::Geometric { p }
            }
            "zipf" => {
                let gamma = req(&mut params, "gamma")?;
                if !gamma.is_finite() || gamma <= 1.0 {
                    return Err(Error::InvalidDistribution(format!(
                        "gamma = {gamma} must exceed 1"
                    )));
                }
                XLaw::Zipf {
                    gamma,
                    zeta: zeta(gamma),
                }
            }
            other => {
                return Err(Error::InvalidDistribution(format!(
                    "unknown family {other:?} (expected poisson, geometric, or zipf)"
                )))
            }
        };
        if let Some(key) = params.keys().next() {
            return Err(Error::InvalidDistribution(format!(
                "unexpected parameter {key:?} for family {:?}",
                spec.family
            )));
        }
        Ok(Family { xlaw, qrule })
    }

    fn q_of(&self, x: u64) -> f64 {
        match self.qrule {
            QRule::Const(q) => q,
            QRule::OverX(beta) => {
                if x == 0 {
                    0.0
                } else {
                    (beta / x as f64).min(1.0)
                }
            }
        }
    }

    fn pmf(&self) -> Pmf {
        match self.xlaw {
            XLaw::Poisson { lambda } => Pmf::Poisson {
                lambda,
                log_p: f64::NAN,
                x: 0,
            },
            XLaw::Geometric { p } => Pmf::Geometric { p, mass: f64::NAN, x: 0 },
            XLaw::Zipf { gamma, zeta } => Pmf::Zipf { gamma, zeta, x: 0 },
        }
    }
}

fn req(params: &mut BTreeMap<String, f64>, key: &str) -> Result<f64> {
    params
        .remove(key)
        .ok_or_else(|| Error::InvalidDistribution(format!("missing parameter {key:?}")))
}

/// Incremental pmf walker with an analytic upper bound on the tail mass.
enum Pmf {
    Poisson { lambda: f64, log_p: f64, x: u64 },
    Geometric { p: f64, mass: f64, x: u64 },
    Zipf { gamma: f64, zeta: f64, x: u64 },
}

impl Pmf {
    /// Mass at the next support point, starting from `x = 0`.
    fn next_mass(&mut self) -> (u64, f64) {
        match self {
            Pmf::Poisson { lambda, log_p, x } => {
                if log_p.is_nan() {
                    *log_p = -*lambda;
                } else {
                    *x += 1;
                    *log_p += lambda.ln() - (*x as f64).ln();
                }
                (*x, log_p.exp())
            }
            Pmf::Geometric { p, mass, x } => {
                if mass.is_nan() {
                    *mass = *p;
                } else {
                    *x += 1;
                    *mass *= 1.0 - *p;
                }
                (*x, *mass)
            }
            Pmf::Zipf { gamma, zeta, x } => {
                *x += 1;
                (*x, (*x as f64).powf(-*gamma) / *zeta)
            }
        }
    }

    /// Upper bound on `P{X > x}`.
    fn tail_mass(&self, x: u64) -> f64 {
        match self {
            Pmf::Poisson { lambda, log_p, .. } => {
                let next = x as f64 + 1.0;
                if next <= *lambda {
                    return 1.0;
                }
                // P{X > x} <= p(x+1) / (1 - lambda/(x+2)), a geometric bound.
                let log_next = log_p + lambda.ln() - next.ln();
                log_next.exp() / (1.0 - lambda / (next + 1.0))
            }
            Pmf::Geometric { p, .. } => ((x as f64 + 1.0) * (-p).ln_1p()).exp(),
            Pmf::Zipf { gamma, zeta, .. } => {
                (x as f64).powf(1.0 - gamma) / ((gamma - 1.0) * zeta)
            }
        }
    }
}

/// Riemann zeta on `gamma > 1` by Euler-Maclaurin at N = 10^4; error well
/// below 1e-12 across the valid range.
fn zeta(gamma: f64) -> f64 {
    let n = 10_000.0_f64;
    let mut sum = 0.0;
    for x in 1..=10_000u64 {
        sum += (x as f64).powf(-gamma);
    }
    // Euler-Maclaurin tail from N, minus the f(N) the loop already counted.
    sum + n.powf(1.0 - gamma) / (gamma - 1.0) - 0.5 * n.powf(-gamma)
        + gamma * n.powf(-gamma - 1.0) / 12.0
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent expectation oracle: direct powf arithmetic over atoms,
    // sharing no code with the streaming accumulator.
    fn oracle_expect(atoms: &[Atom], f: impl Fn(u64, f64) -> f64) -> f64 {
        atoms.iter().map(|a| a.p * f(a.x, a.q)).sum()
    }

    fn oracle_h(x: u64, q: f64) -> f64 {
        if x < 2 {
            0.0
        } else {
            1.0 - (1.0 - q).powf((x - 1) as f64)
        }
    }

    fn two_atom() -> Vec<Atom> {
        vec![
            Atom { x: 2, q: 1.0, p: 0.5 },
            Atom { x: 0, q: 0.3, p: 0.5 },
        ]
    }

    #[test]
    fn falling_factorial_basics() {
        assert_eq!(falling_factorial(3, 2), 6.0);
        assert_eq!(falling_factorial(1, 2), 0.0);
        assert_eq!(falling_factorial(5, 0), 1.0);
        assert_eq!(falling_factorial(0, 0), 1.0);
        assert_eq!(falling_factorial(10, 3), 720.0);
    }

    #[test]
    fn h_boundary_values() {
        assert_eq!(h(0, 0.7), 0.0);
        assert_eq!(h(1, 0.7), 0.0);
        assert_eq!(h(1, 1.0), 0.0);
        assert_eq!(h(2, 1.0), 1.0);
        assert_eq!(h(5, 0.0), 0.0);
        assert!((h(2, 0.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn h_monotone_and_bounded() {
        for x in 2..40u64 {
            for &q in &[0.01, 0.1, 0.5, 0.9, 1.0] {
                let v = h(x, q);
                assert!(v >= q - 1e-15, "h({x},{q}) = {v} below q");
                assert!(v <= q * (x - 1) as f64 + 1e-15);
                assert!(v >= h(x - 1, q) - 1e-15);
            }
        }
    }

    #[test]
    fn moments_two_atom_example() {
        let dist = JointDistribution::from_atoms(two_atom());
        let tq = moments(&dist, 10, 2, DEFAULT_TAIL_TOL).unwrap();
        assert_eq!(tq.alpha, 0.5);
        assert_eq!(tq.kappa_star, 1.0);
        assert_eq!(tq.tau_star, 1.0);
        assert_eq!(tq.kappa_n, 1.0);
        assert_eq!(tq.n_used, 10);
    }

    #[test]
    fn moments_match_oracle_on_finite_support() {
        let cases: Vec<Vec<Atom>> = vec![
            two_atom(),
            vec![
                Atom { x: 5, q: 0.3, p: 0.4 },
                Atom { x: 2, q: 0.8, p: 0.6 },
            ],
            vec![
                Atom { x: 10, q: 0.1, p: 0.3 },
                Atom { x: 4, q: 0.9, p: 0.2 },
                Atom { x: 1, q: 0.5, p: 0.5 },
            ],
            vec![
                Atom { x: 200, q: 0.02, p: 0.4 },
                Atom { x: 2, q: 0.5, p: 0.6 },
            ],
        ];
        for atoms in cases {
            let dist = JointDistribution::from_atoms(atoms.clone());
            let tq = moments(&dist, 100, 4, DEFAULT_TAIL_TOL).unwrap();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
            assert!(close(
                tq.alpha,
                oracle_expect(&atoms, |x, q| if x >= 2 { q } else { 0.0 })
            ));
            assert!(close(
                tq.kappa_star,
                oracle_expect(&atoms, |x, q| x as f64 * oracle_h(x, q))
            ));
            assert!(close(
                tq.tau_star,
                oracle_expect(&atoms, |x, q| if x >= 2 {
                    falling_factorial(x, 2) * q * (1.0 - q).powf((x - 2) as f64)
                } else {
                    0.0
                })
            ));
            assert!(close(
                tq.mu,
                oracle_expect(&atoms, |x, q| x as f64
                    * oracle_h(x, q)
                    * ((x + 1) as f64).ln())
            ));
            assert!(close(
                tq.mu_prime,
                oracle_expect(&atoms, |x, q| x as f64
                    * (x as f64 * q).min(1.0)
                    * ((x + 1) as f64).ln())
            ));
            assert!(close(
                tq.eta[&2],
                oracle_expect(&atoms, |x, q| (x as f64).powi(2) * q)
            ));
            assert!(close(
                tq.eta[&4],
                oracle_expect(&atoms, |x, q| (x as f64).powi(4) * q.powi(3))
            ));
            assert!(close(
                tq.kappa_n,
                oracle_expect(&atoms, |x, q| {
                    let xt = x.min(100);
                    xt as f64 * oracle_h(xt, q)
                })
            ));
        }
    }

    #[test]
    fn truncation_gap_example() {
        // Support {2, 200} at n = 100: the gap is big but still under
        // mu / ln(1+n).
        let atoms = vec![
            Atom { x: 2, q: 0.5, p: 0.6 },
            Atom { x: 200, q: 0.02, p: 0.4 },
        ];
        let dist = JointDistribution::from_atoms(atoms);
        let tq = moments(&dist, 100, 2, DEFAULT_TAIL_TOL).unwrap();
        assert!((tq.kappa_star - 79.164249256675788).abs() < 1e-12);
        assert!((tq.kappa_n - 35.186956902254977).abs() < 1e-12);
        let gap = tq.kappa_star - tq.kappa_n;
        assert!(gap > 0.0);
        assert!(gap <= tq.mu / 101f64.ln());
        let report = check_moment_inequalities(&dist, &tq, DEFAULT_TAIL_TOL).unwrap();
        assert!(report.all_pass, "{report:?}");
    }

    #[test]
    fn rejects_bad_atom_files() {
        assert!(JointDistribution::from_json_str(r#"{"atoms": []}"#).is_err());
        assert!(
            JointDistribution::from_json_str(r#"{"atoms": [{"x": 2, "q": 1.5, "p": 1.0}]}"#)
                .is_err()
        );
        assert!(
            JointDistribution::from_json_str(r#"{"atoms": [{"x": 2, "q": 0.5, "p": 0.9}]}"#)
                .is_err()
        );
        assert!(JointDistribution::from_json_str(
            r#"{"atoms": [{"x": 2, "q": 0.5, "p": 0.5, "w": 1}]}"#
        )
        .is_err());
    }

    #[test]
    fn parses_both_shapes() {
        let fs = JointDistribution::from_json_str(r#"{"atoms": [{"x": 2, "q": 1.0, "p": 1.0}]}"#)
            .unwrap();
        assert_eq!(fs.kind(), Kind::FiniteSupport);
        let pm = JointDistribution::from_json_str(
            r#"{"family": "poisson", "params": {"lambda": 3.0, "q": 0.25}}"#,
        )
        .unwrap();
        assert_eq!(pm.kind(), Kind::Parametric);
        // Round trip keeps the shape.
        let text = serde_json::to_string(&fs).unwrap();
        assert!(text.contains("\"atoms\""));
        let text = serde_json::to_string(&pm).unwrap();
        assert!(text.contains("\"family\""));
    }

    #[test]
    fn rejects_bad_family_params() {
        for bad in [
            r#"{"family": "poisson", "params": {"lambda": -1.0, "q": 0.2}}"#,
            r#"{"family": "poisson", "params": {"lambda": 2.0}}"#,
            r#"{"family": "poisson", "params": {"lambda": 2.0, "q": 0.2, "xx": 1.0}}"#,
            r#"{"family": "poisson", "params": {"lambda": 2.0, "q": 0.2, "q_over_x": 1.0}}"#,
            r#"{"family": "zipf", "params": {"gamma": 1.0, "q": 0.2}}"#,
            r#"{"family": "nope", "params": {"q": 0.2}}"#,
        ] {
            assert!(JointDistribution::from_json_str(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn poisson_moments_match_direct_summation() {
        let dist = JointDistribution::from_json_str(
            r#"{"family": "poisson", "params": {"lambda": 3.0, "q": 0.25}}"#,
        )
        .unwrap();
        let tq = moments(&dist, 50, 3, DEFAULT_TAIL_TOL).unwrap();
        // Direct summation with plain powf pmf arithmetic.
        let mut pmf = Vec::new();
        let mut logp = -3.0f64;
        for x in 0..200u64 {
            if x > 0 {
                logp += 3.0f64.ln() - (x as f64).ln();
            }
            pmf.push(logp.exp());
        }
        let expect = |f: &dyn Fn(u64) -> f64| -> f64 {
            pmf.iter().enumerate().map(|(x, p)| p * f(x as u64)).sum()
        };
        let q = 0.25;
        let alpha = expect(&|x| if x >= 2 { q } else { 0.0 });
        let kappa = expect(&|x| x as f64 * oracle_h(x, q));
        let eta2 = expect(&|x| (x as f64).powi(2) * q);
        assert!((tq.alpha - alpha).abs() < 1e-9, "{} vs {alpha}", tq.alpha);
        assert!((tq.kappa_star - kappa).abs() < 1e-9);
        assert!((tq.eta[&2] - eta2).abs() < 1e-9);
        assert!(tq.mu.is_finite() && tq.mu_prime.is_finite());
    }

    #[test]
    fn geometric_moments_match_direct_summation() {
        let dist = JointDistribution::from_json_str(
            r#"{"family": "geometric", "params": {"p": 0.35, "q_over_x": 1.2}}"#,
        )
        .unwrap();
        let tq = moments(&dist, 30, 2, DEFAULT_TAIL_TOL).unwrap();
        let q_of = |x: u64| if x == 0 { 0.0 } else { (1.2 / x as f64).min(1.0) };
        let mut kappa = 0.0;
        let mut mass = 0.35;
        for x in 0..400u64 {
            if x > 0 {
                mass *= 0.65;
            }
            kappa += mass * x as f64 * oracle_h(x, q_of(x));
        }
        assert!((tq.kappa_star - kappa).abs() < 1e-9);
    }

    #[test]
    fn zipf_divergent_moments_are_flagged() {
        // gamma = 3 with constant q: E X^2 Q is harmonic-divergent while
        // kappa_star, mu stay finite.
        let dist = JointDistribution::from_json_str(
            r#"{"family": "zipf", "params": {"gamma": 3.0, "q": 0.5}}"#,
        )
        .unwrap();
        let tq = moments(&dist, 100, 3, 1e-8).unwrap();
        assert!(tq.eta[&2].is_infinite());
        assert!(tq.eta[&3].is_infinite());
        assert!(tq.kappa_star.is_finite());
        assert!(tq.mu.is_finite());
        assert!(tq.alpha > 0.0 && tq.alpha.is_finite());
        // gamma = 3.5 keeps eta_2 = E X^2 Q finite but blows eta_3 = E X^3 Q^2.
        let dist = JointDistribution::from_json_str(
            r#"{"family": "zipf", "params": {"gamma": 3.5, "q": 0.5}}"#,
        )
        .unwrap();
        let tq = moments(&dist, 100, 3, 1e-9).unwrap();
        assert!(tq.eta[&2].is_finite());
        assert!(tq.eta[&3].is_infinite());
    }

    #[test]
    fn zipf_heavy_tail_kappa_close_to_reference() {
        let dist = JointDistribution::from_json_str(
            r#"{"family": "zipf", "params": {"gamma": 2.5, "q": 0.4}}"#,
        )
        .unwrap();
        let tq = moments(&dist, 1000, 2, 1e-8).unwrap();
        // Reference: direct summation to 10^7.
        let z = zeta(2.5);
        let mut kappa = 0.0;
        for x in 1..10_000_000u64 {
            kappa += (x as f64).powf(-2.5) / z * x as f64 * oracle_h(x, 0.4);
        }
        assert!(
            (tq.kappa_star - kappa).abs() < 2e-3 * kappa,
            "{} vs {kappa}",
            tq.kappa_star
        );
        assert!(tq.eta[&2].is_infinite());
    }

    #[test]
    fn sampler_is_deterministic_and_unbiased() {
        let dist = JointDistribution::from_atoms(vec![
            Atom { x: 5, q: 0.3, p: 0.25 },
            Atom { x: 2, q: 0.8, p: 0.75 },
        ]);
        let sampler = dist.sampler(DEFAULT_TAIL_TOL).unwrap();
        let mut a = crate::rng::substream(11, 0);
        let mut b = crate::rng::substream(11, 0);
        for _ in 0..100 {
            assert_eq!(sampler.draw(&mut a), sampler.draw(&mut b));
        }
        let trials = 200_000;
        let mut hits = 0u64;
        for _ in 0..trials {
            if sampler.draw(&mut a).0 == 5 {
                hits += 1;
            }
        }
        let freq = hits as f64 / trials as f64;
        let se = (0.25 * 0.75 / trials as f64).sqrt();
        assert!(
            (freq - 0.25).abs() < 4.0 * se,
            "freq {freq} off from 0.25 (se {se})"
        );
    }

    #[test]
    fn parametric_sampler_matches_pmf() {
        let dist = JointDistribution::from_json_str(
            r#"{"family": "geometric", "params": {"p": 0.5, "q": 0.2}}"#,
        )
        .unwrap();
        let sampler = dist.sampler(1e-10).unwrap();
        let mut rng = crate::rng::substream(3, 0);
        let trials = 100_000;
        let mut zero = 0u64;
        for _ in 0..trials {
            let (x, q) = sampler.draw(&mut rng);
            assert_eq!(q, 0.2);
            if x == 0 {
                zero += 1;
            }
        }
        let freq = zero as f64 / trials as f64;
        let se = (0.5 * 0.5 / trials as f64).sqrt();
        assert!((freq - 0.5).abs() < 4.0 * se);
    }

    #[test]
    fn zeta_reference_values() {
        assert!((zeta(2.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
        assert!((zeta(4.0) - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-12);
    }

    #[test]
    fn inequality_checks_pass_on_finite_support() {
        let dist = JointDistribution::from_atoms(vec![
            Atom { x: 120, q: 0.05, p: 0.2 },
            Atom { x: 7, q: 0.6, p: 0.5 },
            Atom { x: 1, q: 0.9, p: 0.3 },
        ]);
        let tq = moments(&dist, 60, 3, DEFAULT_TAIL_TOL).unwrap();
        let report = check_moment_inequalities(&dist, &tq, DEFAULT_TAIL_TOL).unwrap();
        assert!(report.all_pass, "{:?}", report.checks);
        assert_eq!(report.checks.len(), 6);
    }

    #[test]
    fn threshold_quantities_json_spells_infinity() {
        let dist = JointDistribution::from_json_str(
            r#"{"family": "zipf", "params": {"gamma": 3.0, "q": 0.5}}"#,
        )
        .unwrap();
        let tq = moments(&dist, 100, 2, 1e-8).unwrap();
        let v = tq.to_json();
        assert_eq!(v["eta"]["2"], json!("inf"));
        assert!(v["kappa_star"].is_number());
    }
}
