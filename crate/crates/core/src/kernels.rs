//! Scalar kernels and the one-dimensional semi-infinite integrals behind the
//! comparability `J ≈ K₀`.
//!
//! Conventions: the heat kernel `g(t, x, y)` is the Gaussian density with
//! per-coordinate variance `2t`, and every "kernel" here is a plain
//! function of points in `R^d` with `d ≥ 3`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{BridgeError, Result};
use crate::geom;
use crate::quadrature::{
    integrate, integrate_half_line, integrate_real_line, integrate_to_infinity,
    integrate_to_zero, Estimate, QuadratureSpec, Status, StatusTracker,
};
use crate::special::{gamma, sphere_area};

/// Spatial dimension `d ≥ 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Dimension(u32);

impl Dimension {
    pub fn new(d: u32) -> Result<Self> {
        if d < 3 {
            return Err(BridgeError::LowDimension(d));
        }
        Ok(Self(d))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_usize(self) -> usize {
        self.0 as usize
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Errors unless `x` has exactly `d` coordinates.
    pub fn check(self, x: &[f64]) -> Result<()> {
        if x.len() != self.as_usize() {
            return Err(BridgeError::DimensionMismatch {
                expected: self.as_usize(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<u32> for Dimension {
    type Error = BridgeError;
    fn try_from(d: u32) -> Result<Self> {
        Dimension::new(d)
    }
}

impl From<Dimension> for u32 {
    fn from(d: Dimension) -> u32 {
        d.0
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(BridgeError::NonPositiveTime(t));
    }
    Ok(())
}

/// `g(t, x, y) = (4πt)^{-d/2} exp(-|y - x|² / (4t))`.
pub fn heat_kernel(t: f64, x: &[f64], y: &[f64], d: Dimension) -> Result<f64> {
    check_time(t)?;
    d.check(x)?;
    d.check(y)?;
    let r2 = geom::dist2(x, y);
    Ok((4.0 * PI * t).powf(-0.5 * d.as_f64()) * (-r2 / (4.0 * t)).exp())
}

/// Mean and per-coordinate variance of the bridge from `x` (time 0) to `y`
/// (time `t`) observed at time `s`.
pub fn bridge_params(t: f64, s: f64, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_time(t)?;
    if x.len() != y.len() {
        return Err(BridgeError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if !(s > 0.0 && s < t) {
        return Err(BridgeError::InvalidParameter(format!(
            "bridge time s = {s} must lie in (0, {t})"
        )));
    }
    Ok((geom::lerp(x, y, s / t), 2.0 * s * (t - s) / t))
}

/// `g(s, x, z) g(t - s, z, y) / g(t, x, y)`, evaluated as the Gaussian density
/// with the parameters of [`bridge_params`].
pub fn bridge_density(
    t: f64,
    s: f64,
    x: &[f64],
    y: &[f64],
    z: &[f64],
    d: Dimension,
) -> Result<f64> {
    d.check(x)?;
    d.check(y)?;
    d.check(z)?;
    let (mean, var) = bridge_params(t, s, x, y)?;
    let r2 = geom::dist2(z, &mean);
    Ok((2.0 * PI * var).powf(-0.5 * d.as_f64()) * (-r2 / (2.0 * var)).exp())
}

/// `K₀(x, y) = e^{-(|x||y| - x·y)/2} |x|^{-(d-2)} (1 + |x||y|)^{(d-3)/2}`.
///
/// Returns `+∞` at `x = 0`.
pub fn k0(x: &[f64], y: &[f64], d: Dimension) -> Result<f64> {
    d.check(x)?;
    d.check(y)?;
    let nx = geom::norm(x);
    if nx == 0.0 {
        return Ok(f64::INFINITY);
    }
    let ny = geom::norm(y);
    let dd = d.as_f64();
    Ok((-0.5 * geom::misalignment(x, y)).exp()
        * nx.powf(2.0 - dd)
        * (1.0 + nx * ny).powf(0.5 * (dd - 3.0)))
}

/// `J(x, y) = ∫_0^∞ τ^{-d/2} exp(-|x - τy|² / (4τ)) dτ`, evaluated through
/// the factorisation `J = e^{-(|x||y| - x·y)/2} f(|x|/2, |y|/2; d/2, 1)`.
pub fn j_kernel(x: &[f64], y: &[f64], d: Dimension, q: &QuadratureSpec) -> Result<Estimate> {
    d.check(x)?;
    d.check(y)?;
    let nx = geom::norm(x);
    if nx == 0.0 {
        return Ok(Estimate::infinite());
    }
    let ny = geom::norm(y);
    let f = f_radial(0.5 * nx, 0.5 * ny, 0.5 * d.as_f64(), 1.0, q);
    Ok(f.scaled((-0.5 * geom::misalignment(x, y)).exp()))
}

/// `f(a, b)` allowing `b = 0`, where it reduces to `Γ(β-1) (c a²)^{1-β}`.
pub(crate) fn f_radial(a: f64, b: f64, beta: f64, c: f64, q: &QuadratureSpec) -> Estimate {
    if b == 0.0 {
        return Estimate::exact(gamma(beta - 1.0) * (c * a * a).powf(1.0 - beta));
    }
    f_quadrature(a, b, beta, c, q)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(BridgeError::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(BridgeError::InvalidParameter(format!(
            "beta must exceed 1, got {beta}"
        )));
    }
    Ok(())
}

/// `f(a, b) = ∫_0^∞ u^{-β} exp(-c [√u b - a/√u]²) du` for `a, b, c > 0`, `β > 1`.
pub fn f_integral(a: f64, b: f64, beta: f64, c: f64, q: &QuadratureSpec) -> Result<Estimate> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    check_positive("c", c)?;
    check_beta(beta)?;
    Ok(f_quadrature(a, b, beta, c, q))
}

// With u = (a/b) e^v the bracket becomes 2 sinh(v/2) and
//   f = (a/b)^{1-β} ∫ exp((1-β) v - 4cab sinh²(v/2)) dv
// which has no cancellation anywhere on the real line.
fn f_quadrature(a: f64, b: f64, beta: f64, c: f64, q: &QuadratureSpec) -> Estimate {
    let kappa = c * a * b;
    let prefactor_log = (1.0 - beta) * (a / b).ln();
    let exponent = |v: f64| {
        let sh = (0.5 * v).sinh();
        (1.0 - beta) * v - 4.0 * kappa * sh * sh
    };
    if a * b > 1e3 {
        // fold v -> -v onto the half line: peak at 0 with width ~ 1/sqrt(2κ)
        let width = 1.0 / (2.0 * kappa).sqrt();
        let folded = |v: f64| {
            let sh = (0.5 * v).sinh();
            let damp = -4.0 * kappa * sh * sh;
            ((beta - 1.0) * v + damp).exp() + ((1.0 - beta) * v + damp).exp()
        };
        let body = integrate(folded, 0.0, 12.0 * width, &[width, 3.0 * width], q);
        let tail = integrate_to_infinity(folded, 12.0 * width, width, q);
        return body.plus(tail).checked(q).scaled(prefactor_log.exp());
    }
    let peak = -((beta - 1.0) / (2.0 * kappa)).asinh();
    let top = exponent(peak);
    let width = 1.0 / (2.0 * kappa * peak.cosh()).sqrt();
    let est = integrate_real_line(
        |v| {
            let e = exponent(v) - top;
            if e.is_nan() {
                0.0
            } else {
                e.exp()
            }
        },
        peak,
        width,
        q,
    );
    est.scaled((prefactor_log + top).exp())
}

/// Closed-form comparison `(1 + 4ab)^{β - 3/2} / a^{2(β - 1)}`.
pub fn f_estimate(a: f64, b: f64, beta: f64) -> f64 {
    (1.0 + 4.0 * a * b).powf(beta - 1.5) / a.powf(2.0 * (beta - 1.0))
}

/// `I_app(a, b) = ∫_0^∞ ((s + √(4ab + s²)) / (2a))^{2(β-1)} e^{-cs²} / √(4ab + s²) ds`.
pub fn i_app(a: f64, b: f64, beta: f64, c: f64, q: &QuadratureSpec) -> Result<Estimate> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    check_positive("c", c)?;
    check_beta(beta)?;
    let four_ab = 4.0 * a * b;
    let integrand = |s: f64| {
        let root = (four_ab + s * s).sqrt();
        (2.0 * (beta - 1.0) * ((s + root) / (2.0 * a)).ln() - c * s * s - root.ln()).exp()
    };
    let splits = [four_ab.sqrt(), 1.0 / c.sqrt()];
    Ok(integrate_half_line(integrand, &splits, 1.0 / c.sqrt(), q))
}

/// The companion integral with `-s` in place of `s`; `f = 2 (I_app + I_minus)`.
pub(crate) fn i_minus(a: f64, b: f64, beta: f64, c: f64, q: &QuadratureSpec) -> Estimate {
    let four_ab = 4.0 * a * b;
    let integrand = |s: f64| {
        let root = (four_ab + s * s).sqrt();
        // root - s = 4ab / (root + s)
        let lower = four_ab / (root + s);
        (2.0 * (beta - 1.0) * (lower / (2.0 * a)).ln() - c * s * s - root.ln()).exp()
    };
    let splits = [four_ab.sqrt(), 1.0 / c.sqrt()];
    integrate_half_line(integrand, &splits, 1.0 / c.sqrt(), q)
}

/// `h(x) = ∫_0^∞ (x + s²)^γ e^{-cs²} ds` together with its comparison value
/// `(1 + x)^γ`.
///
/// For `γ ≥ 0` the quadrature is also held to `h(x) ≤ C (1 + x)^γ` with the
/// constant of [`h_upper_constant`]; a violation beyond the error bounds
/// downgrades the status.
pub fn h_pair(x: f64, gamma_exp: f64, c: f64, q: &QuadratureSpec) -> Result<(Estimate, f64)> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(BridgeError::InvalidParameter(format!(
            "x must be non-negative, got {x}"
        )));
    }
    if !(gamma_exp > -0.5) {
        return Err(BridgeError::InvalidParameter(format!(
            "gamma must exceed -1/2, got {gamma_exp}"
        )));
    }
    check_positive("c", c)?;
    let integrand = |s: f64| {
        let base = if x == 0.0 { s.powf(2.0 * gamma_exp) } else { (x + s * s).powf(gamma_exp) };
        base * (-c * s * s).exp()
    };
    let mut splits = vec![1.0 / c.sqrt()];
    if x > 0.0 {
        splits.push(x.sqrt());
    }
    let mut h = integrate_half_line(integrand, &splits, 1.0 / c.sqrt(), q);
    let closed = (1.0 + x).powf(gamma_exp);
    if gamma_exp >= 0.0 {
        let cap = h_upper_constant(gamma_exp, c, q)?;
        if h.value - h.error_bound > (cap.value + cap.error_bound) * closed {
            h.status = h.status.max(Status::MaxSubdivisionsReached);
        }
    }
    Ok((h, closed))
}

/// `C = ½ ∫_0^∞ (1 ∨ r)^γ r^{-1/2} e^{-cr} dr`, the constant in `h(x) ≤ C (1+x)^γ`.
pub fn h_upper_constant(gamma_exp: f64, c: f64, q: &QuadratureSpec) -> Result<Estimate> {
    check_positive("c", c)?;
    if !(gamma_exp >= 0.0) {
        return Err(BridgeError::InvalidParameter(format!(
            "the upper constant needs gamma >= 0, got {gamma_exp}"
        )));
    }
    let integrand = |r: f64| r.max(1.0).powf(gamma_exp) * r.powf(-0.5) * (-c * r).exp();
    Ok(integrate_half_line(integrand, &[1.0, 1.0 / c], 1.0 / c, q).scaled(0.5))
}

/// `C = 2 ∫_0^∞ (1 ∨ r)^{β - 3/2} r^{-1/2} e^{-cr} dr`, for which
/// `f(a, b) ≤ C (1 + 4ab)^{β - 3/2} / a^{2(β - 1)}` when `β ≥ 3/2`.
pub fn explicit_constant(beta: f64, c: f64, q: &QuadratureSpec) -> Result<Estimate> {
    if !(beta >= 1.5) {
        return Err(BridgeError::InvalidParameter(format!(
            "explicit constant needs beta >= 3/2, got {beta}"
        )));
    }
    Ok(h_upper_constant(beta - 1.5, c, q)?.scaled(4.0))
}

/// `C_d = Γ(d/2 - 1) / (4 π^{d/2})`, so that `-Δ^{-1} V = C_d ∫ |z - x|^{2-d} V(z) dz`.
pub fn newton_constant(d: Dimension) -> f64 {
    let half = 0.5 * d.as_f64();
    gamma(half - 1.0) / (4.0 * PI.powf(half))
}

/// `σ_{d-2} ∫_0^π sin^{d-2}φ ∫_1^{R} e^{-λ r (1 - cos φ)} r^{d-1-β} dr dφ`,
/// the spherical-coordinate form of `∫_{1<|w|<R} e^{-λ(|w| - w₁)} |w|^{-β} dw`.
///
/// `radius = ∞` gives the untruncated integral.
pub fn angular_tail_integral(
    d: Dimension,
    lambda: f64,
    beta: f64,
    radius: f64,
    q: &QuadratureSpec,
) -> Estimate {
    let dd = d.as_f64();
    let k1 = dd - beta; // exponent of r in r^{d-1-β} dr, plus one
    let inner_q = q.inner();
    let tracker = StatusTracker::new();
    let log_r_max = radius.ln();

    // With r α = e^v the inner integral is α^{-k1} ∫ exp(k1 v - e^v) dv over
    // v ∈ [ln α, ln(α R)]; the outer weight is folded into the exponent.
    let outer = |phi: f64| -> f64 {
        let half = (0.5 * phi).sin();
        let alpha = 2.0 * lambda * half * half;
        let sin_phi = phi.sin();
        if alpha <= 0.0 || sin_phi <= 0.0 {
            return 0.0;
        }
        let log_weight = (dd - 2.0) * sin_phi.ln() - k1 * alpha.ln();
        let lo = alpha.ln();
        let hi = lo + log_r_max;
        let g = |v: f64| {
            let e = k1 * v - v.exp() + log_weight;
            if e.is_nan() {
                0.0
            } else {
                e.exp()
            }
        };
        let mut pts = vec![-2.0, 0.0, 2.0];
        if k1 > 0.0 {
            pts.push(k1.ln());
        }
        let est = if hi.is_finite() {
            integrate(g, lo, hi, &pts, &inner_q)
        } else {
            let cut = lo.max(4.0);
            let body = if cut > lo {
                integrate(g, lo, cut, &pts, &inner_q)
            } else {
                Estimate::zero()
            };
            body.plus(integrate_to_infinity(g, cut, 1.0, &inner_q))
        };
        tracker.absorb(est)
    };

    let knee = if radius.is_finite() {
        (1.0 / radius.sqrt()).min(0.5)
    } else {
        0.5
    };
    let head = integrate_to_zero(outer, knee, q);
    let body = integrate(outer, knee, PI, &[3.0 * knee, 1.0, PI / 2.0], q);
    let total = head.plus(body).checked(q);
    tracker.finish(total.scaled(sphere_area(d.get() - 2)))
}

/// `κ_d = (∫_{|w|>1} (e^{-(|w| - w₁)/2} |w|^{-(d-1)/2})^{d/(d-2)} dw)^{(d-2)/d}`.
pub fn kappa(d: Dimension, q: &QuadratureSpec) -> Result<Estimate> {
    if d.get() < 4 {
        return Err(BridgeError::InvalidParameter(format!(
            "kappa is defined for d >= 4, got {}",
            d.get()
        )));
    }
    let dd = d.as_f64();
    let p = dd / (dd - 2.0);
    let inner = angular_tail_integral(d, 0.5 * p, 0.5 * p * (dd - 1.0), f64::INFINITY, q);
    if inner.is_infinite() {
        return Ok(inner);
    }
    let value = inner.value.powf(1.0 / p);
    // first-order propagation of the relative error through the power
    let rel = inner.error_bound / inner.value / p;
    Ok(Estimate {
        value,
        error_bound: rel * value,
        status: inner.status,
    })
}

/// Truncated `∫_{1<|w|<R} e^{-(|w| - w₁)} |w|^{-β} dw`, finite as `R → ∞`
/// exactly when `β > (d+1)/2`.
pub fn lemma_const_integral(d: Dimension, beta: f64, radius: f64, q: &QuadratureSpec) -> Result<Estimate> {
    if !(radius > 1.0) {
        return Err(BridgeError::InvalidParameter(format!(
            "truncation radius must exceed 1, got {radius}"
        )));
    }
    Ok(angular_tail_integral(d, 1.0, beta, radius, q))
}
