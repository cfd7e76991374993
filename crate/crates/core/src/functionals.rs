//! Integral transforms of potentials: `K(V)`, the Newton potential, the `J`
//! transform and the bridge functionals `N` and `S`.
//!
//! Every transform consumes `|V|` through a [`Reduction`]. Radial profiles
//! are integrated in polar coordinates centred at the probe `x`, with the
//! polar axis along `y`; axial profiles need `x` and `y` on the axis and are
//! integrated in cylindrical coordinates `(z₁, ρ)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{BridgeError, Result};
use crate::geom;
use crate::growth::{self, GrowthConfig, GrowthDiagnosis, Verdict};
use crate::kernels::{f_radial, newton_constant, Dimension};
use crate::potentials::{Annulus, AxialProfile, Potential, RadialProfile, Reduction};
use crate::quadrature::{
    integrate, integrate_to_infinity, Estimate, QuadratureSpec, Status, StatusTracker,
};
use crate::special::{gamma, gamma_p, sphere_area};

/// Arguments `(t, x, y)` of `S`, `N` and the bridge simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeSpec {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl BridgeSpec {
    pub fn new(t: f64, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(BridgeError::NonPositiveTime(t));
        }
        if x.len() != y.len() {
            return Err(BridgeError::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(BridgeError::InvalidParameter("bridge endpoints must be finite".into()));
        }
        Ok(Self { t, x, y })
    }

    pub fn dimension(&self) -> Result<Dimension> {
        Dimension::new(self.x.len() as u32)
    }

    pub fn swapped(&self) -> Self {
        Self {
            t: self.t,
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }
}

fn probe_dimension(x: &[f64], y: &[f64]) -> Result<Dimension> {
    let d = Dimension::new(x.len() as u32)?;
    d.check(y)?;
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    K,
    J,
    Newton,
}

/// `K(V, x, y) = ∫ |V(z)| K₀(z - x, y) dz`.
pub fn k_transform(v: &Potential, x: &[f64], y: &[f64], q: &QuadratureSpec) -> Result<Estimate> {
    transform(v, x, y, Kind::K, q)
}

/// `∫ J(z - x, y) |V(z)| dz`.
pub fn j_transform(v: &Potential, x: &[f64], y: &[f64], q: &QuadratureSpec) -> Result<Estimate> {
    transform(v, x, y, Kind::J, q)
}

/// `-Δ^{-1}|V|(x) = C_d ∫ |V(z)| |z - x|^{2-d} dz`.
pub fn newton_potential(v: &Potential, x: &[f64], q: &QuadratureSpec) -> Result<Estimate> {
    let zero = vec![0.0; x.len()];
    transform(v, x, &zero, Kind::Newton, q)
}

/// `K(V 1_{|z - c| < R}, x, y)` for radial parts (centre `c`) and
/// `K(V 1_{z₁ ≤ R}, x, y)` for axial parts.
pub fn truncated_k(
    v: &Potential,
    x: &[f64],
    y: &[f64],
    radius: f64,
    q: &QuadratureSpec,
) -> Result<Estimate> {
    let d = probe_dimension(x, y)?;
    let red = truncate(&v.reduce(d)?, radius);
    evaluate(&red, x, y, Kind::K, d, q)
}

/// Newton potential of the truncation used by [`truncated_k`].
pub fn truncated_newton(v: &Potential, x: &[f64], radius: f64, q: &QuadratureSpec) -> Result<Estimate> {
    let d = Dimension::new(x.len() as u32)?;
    let red = truncate(&v.reduce(d)?, radius);
    evaluate(&red, x, &vec![0.0; x.len()], Kind::Newton, d, q)
}

/// Growth of [`truncated_k`] over `radii`.
pub fn k_growth(
    v: &Potential,
    x: &[f64],
    y: &[f64],
    radii: &[f64],
    q: &QuadratureSpec,
) -> Result<GrowthDiagnosis> {
    let d = probe_dimension(x, y)?;
    let red = v.reduce(d)?;
    diagnose_truncations(&red, x, y, Kind::K, d, radii, q)
}

/// Growth of [`truncated_newton`] over `radii`.
pub fn newton_growth(v: &Potential, x: &[f64], radii: &[f64], q: &QuadratureSpec) -> Result<GrowthDiagnosis> {
    let d = Dimension::new(x.len() as u32)?;
    let red = v.reduce(d)?;
    diagnose_truncations(&red, x, &vec![0.0; x.len()], Kind::Newton, d, radii, q)
}

fn diagnose_truncations(
    red: &Reduction,
    x: &[f64],
    y: &[f64],
    kind: Kind,
    d: Dimension,
    radii: &[f64],
    q: &QuadratureSpec,
) -> Result<GrowthDiagnosis> {
    let values = radii
        .iter()
        .map(|&r| evaluate(&truncate(red, r), x, y, kind, d, q))
        .collect::<Result<Vec<_>>>()?;
    growth::diagnose(radii, &values, &growth_config(&values, q))
}

fn transform(v: &Potential, x: &[f64], y: &[f64], kind: Kind, q: &QuadratureSpec) -> Result<Estimate> {
    let d = probe_dimension(x, y)?;
    let red = v.reduce(d)?;
    if is_bounded(&red) {
        return evaluate(&red, x, y, kind, d, q);
    }
    // unbounded support: finiteness is decided from truncations only
    let base = [reach(&red), geom::norm(x), geom::norm(y), 1.0]
        .into_iter()
        .fold(0.0, f64::max);
    let radii: Vec<f64> = (1..=5).map(|k| base * 10f64.powi(k)).collect();
    let diag = diagnose_truncations(&red, x, y, kind, d, &radii, q)?;
    match diag.verdict {
        Verdict::Divergent => Ok(Estimate::infinite()),
        Verdict::Convergent => evaluate(&red, x, y, kind, d, q),
        Verdict::Inconclusive => {
            let mut est = evaluate(&red, x, y, kind, d, q)?;
            est.status = est.status.max(Status::MaxSubdivisionsReached);
            Ok(est)
        }
    }
}

/// Increments below `rel_tol` times the largest truncation count as zero.
pub(crate) fn growth_config(values: &[Estimate], q: &QuadratureSpec) -> GrowthConfig {
    let peak = values
        .iter()
        .map(|e| e.value.abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    GrowthConfig {
        abs_tol: q.abs_tol.max(q.rel_tol * peak).max(1e-12),
        ..GrowthConfig::default()
    }
}

pub(crate) fn is_bounded(red: &Reduction) -> bool {
    match red {
        Reduction::Zero => true,
        Reduction::Radial(p) => p.outer_radius().is_finite(),
        Reduction::Axial(p) => p.z1_range().1.is_finite(),
        Reduction::Split(parts) => parts.iter().all(is_bounded),
    }
}

// Largest finite length scale in the reduction.
fn reach(red: &Reduction) -> f64 {
    match red {
        Reduction::Zero => 0.0,
        Reduction::Radial(p) => {
            geom::norm(&p.center) + p.breakpoints().last().copied().unwrap_or(0.0)
        }
        Reduction::Axial(p) => p.z1_breakpoints().last().copied().unwrap_or(0.0),
        Reduction::Split(parts) => parts.iter().map(reach).fold(0.0, f64::max),
    }
}

pub(crate) fn truncate(red: &Reduction, radius: f64) -> Reduction {
    match red {
        Reduction::Zero => Reduction::Zero,
        Reduction::Radial(p) => {
            let pieces: Vec<_> = p
                .pieces
                .iter()
                .filter(|piece| piece.lo < radius)
                .map(|piece| {
                    let mut piece = piece.clone();
                    piece.hi = piece.hi.min(radius);
                    piece
                })
                .collect();
            if pieces.is_empty() {
                Reduction::Zero
            } else {
                Reduction::Radial(RadialProfile {
                    center: p.center.clone(),
                    pieces,
                })
            }
        }
        Reduction::Axial(p) => {
            let pieces: Vec<_> = p
                .pieces
                .iter()
                .filter(|piece| piece.lo < radius)
                .map(|piece| {
                    let mut piece = piece.clone();
                    piece.hi = piece.hi.min(radius);
                    piece
                })
                .collect();
            if pieces.is_empty() {
                Reduction::Zero
            } else {
                Reduction::Axial(AxialProfile { pieces })
            }
        }
        Reduction::Split(parts) => Reduction::Split(parts.iter().map(|p| truncate(p, radius)).collect()),
    }
}

fn evaluate(
    red: &Reduction,
    x: &[f64],
    y: &[f64],
    kind: Kind,
    d: Dimension,
    q: &QuadratureSpec,
) -> Result<Estimate> {
    match red {
        Reduction::Zero => Ok(Estimate::zero()),
        Reduction::Radial(p) => Ok(match kind {
            Kind::Newton => radial_newton(p, x, d, q),
            _ => radial_polar(p, x, y, kind, d, q),
        }),
        Reduction::Axial(p) => axial_transform(p, x, y, kind, d, q),
        Reduction::Split(parts) => {
            let mut total = Estimate::zero();
            for part in parts {
                total = total.plus(evaluate(part, x, y, kind, d, q)?);
            }
            Ok(total.checked(q))
        }
    }
}

/// `∫_{-1}^{u} (1 - s²)^{n/2} ds` for integer `n ≥ -1`.
fn cap_measure(n: i32, u: f64) -> f64 {
    let u = u.clamp(-1.0, 1.0);
    match n {
        -1 => u.asin() + 0.5 * PI,
        0 => u + 1.0,
        _ => {
            let nf = n as f64;
            (u * (1.0 - u * u).powf(0.5 * nf) + nf * cap_measure(n - 2, u)) / (nf + 1.0)
        }
    }
}

// `∫_l^b |Σ a_i r^{p_i}| dr` restricted to a single annulus, by quadrature.
fn annulus_average_quadrature<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, q: &QuadratureSpec) -> Estimate {
    integrate(f, lo, hi, &[], q)
}

// Integral of `|V|(√(P - Q u))` against `(1 - u²)^{(d-4)/2} du` over `[-1, 1]`.
fn sphere_slice(
    annuli: &[Annulus],
    p: f64,
    qq: f64,
    n: i32,
    full: f64,
    q: &QuadratureSpec,
    tracker: &StatusTracker,
) -> f64 {
    if qq <= 1e-13 * p.abs().max(f64::MIN_POSITIVE) {
        let rho = p.max(0.0).sqrt();
        return annuli
            .iter()
            .find(|a| rho >= a.lo && rho < a.hi)
            .map_or(0.0, |a| a.abs_value(rho))
            * full;
    }
    let mut total = 0.0;
    for a in annuli {
        let ua = if a.hi.is_finite() {
            ((p - a.hi * a.hi) / qq).max(-1.0)
        } else {
            -1.0
        };
        let ub = ((p - a.lo * a.lo) / qq).min(1.0);
        if !(ub > ua) {
            continue;
        }
        match a.constant_value() {
            Some(v) => total += v * (cap_measure(n, ub) - cap_measure(n, ua)),
            None => {
                let (psi_lo, psi_hi) = (ub.acos(), ua.acos());
                let est = annulus_average_quadrature(
                    |psi: f64| {
                        let rho = (p - qq * psi.cos()).max(0.0).sqrt();
                        a.abs_value(rho) * psi.sin().powi(n + 1)
                    },
                    psi_lo,
                    psi_hi,
                    q,
                );
                total += tracker.absorb(est);
            }
        }
    }
    total
}

// Angles in (0, π) where the sphere |u| = r around x meets |z - c| = R on
// the extreme meridians ψ = 0 and ψ = π.
fn polar_breaks(r: f64, nw: f64, phi: f64, radii: &[f64], ny: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if nw > 0.0 && r > 0.0 {
        for &big_r in radii {
            let c = (r * r + nw * nw - big_r * big_r) / (2.0 * r * nw);
            if c.abs() < 1.0 {
                let alpha = c.acos();
                for t in [phi + alpha, phi - alpha, -phi + alpha, -phi - alpha] {
                    let mut t = t.abs();
                    if t > PI {
                        t = 2.0 * PI - t;
                    }
                    if t > 0.0 && t < PI {
                        out.push(t);
                    }
                }
            }
        }
    }
    let scale = r * ny;
    if scale > 1.0 {
        for k in [1.0, 3.0, 10.0] {
            let t = k / scale.sqrt();
            if t < PI {
                out.push(t);
            }
        }
    }
    out
}

fn radial_polar(
    profile: &RadialProfile,
    x: &[f64],
    y: &[f64],
    kind: Kind,
    d: Dimension,
    q: &QuadratureSpec,
) -> Estimate {
    let annuli = profile.annuli();
    if annuli.is_empty() {
        return Estimate::zero();
    }
    let dd = d.as_f64();
    let n = d.get() as i32 - 4;
    let w = geom::sub(&profile.center, x);
    let nw = geom::norm(&w);
    let ny = geom::norm(y);
    let e1 = if ny > 0.0 {
        geom::scale(y, 1.0 / ny)
    } else if nw > 0.0 {
        geom::scale(&w, 1.0 / nw)
    } else {
        geom::unit(d.as_usize(), 0)
    };
    let (w1, w2, _) = geom::plane_frame(&e1, &w);
    let w2 = w2.max(0.0);
    let phi = w2.atan2(w1);
    let full = cap_measure(n, 1.0);
    let sigma = sphere_area(d.get() - 3);
    let radii = profile.breakpoints();
    let inner_q = q.inner();
    let slice_q = inner_q.inner();
    let tracker = StatusTracker::new();
    let beta = 0.5 * dd;

    let weight = |r: f64| -> f64 {
        match kind {
            Kind::K => r * (1.0 + r * ny).powf(0.5 * (dd - 3.0)),
            _ => {
                if r == 0.0 {
                    return 0.0;
                }
                // r^{d-1} f(r/2, |y|/2) with r^{d-2} folded into f's scale
                let f = tracker.absorb(f_radial(0.5 * r, 0.5 * ny, beta, 1.0, &slice_q));
                r.powf(dd - 1.0) * f
            }
        }
    };

    let angular = |r: f64| -> f64 {
        let base = r * r + nw * nw;
        let g = |theta: f64| {
            let (s, c) = theta.sin_cos();
            let half = (0.5 * theta).sin();
            let damping = (-r * ny * half * half).exp();
            if damping == 0.0 {
                return 0.0;
            }
            let p = base - 2.0 * r * w1 * c;
            let qq = 2.0 * r * w2 * s;
            damping * s.powi(d.get() as i32 - 2) * sphere_slice(&annuli, p, qq, n, full, &slice_q, &tracker)
        };
        let breaks = polar_breaks(r, nw, phi, &radii, ny);
        tracker.absorb(integrate(g, 0.0, PI, &breaks, &inner_q))
    };

    let first = annuli[0].lo;
    let outer = annuli.last().map_or(0.0, |a| a.hi);
    let r_lo = if nw < first {
        first - nw
    } else if nw > outer {
        nw - outer
    } else {
        0.0
    };
    let r_hi = nw + outer;
    let mut breaks: Vec<f64> = radii
        .iter()
        .flat_map(|&big_r| [nw - big_r, nw + big_r, big_r - nw])
        .filter(|&r| r > r_lo && r < r_hi)
        .collect();
    breaks.push(nw);
    breaks.retain(|&r| r > r_lo && r < r_hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let integrand = |r: f64| {
        let wgt = weight(r);
        if wgt == 0.0 {
            0.0
        } else {
            wgt * angular(r)
        }
    };
    let est = if r_hi.is_finite() {
        integrate(integrand, r_lo, r_hi, &breaks, q)
    } else {
        let cut = breaks.last().copied().unwrap_or(r_lo).max(r_lo + 1.0) * 2.0;
        let mut integrand = integrand;
        let body = integrate(&mut integrand, r_lo, cut, &breaks, q);
        body.plus(integrate_to_infinity(&mut integrand, cut, cut, q))
    };
    tracker.finish(est.scaled(sigma).checked(q))
}

// Newton's theorem: the sphere average of |z - x|^{2-d} over |z - c| = ρ is
// max(ρ, |x - c|)^{2-d}, and C_d σ_{d-1} = 1/(d-2).
fn radial_newton(profile: &RadialProfile, x: &[f64], d: Dimension, q: &QuadratureSpec) -> Estimate {
    let dd = d.as_f64();
    let a = geom::dist(x, &profile.center);
    let mut total = Estimate::zero();
    for ann in profile.annuli() {
        let inside_hi = ann.hi.min(a);
        if ann.lo < inside_hi {
            // ∫ |V| ρ^{d-1} a^{2-d}
            let m = ann.moment(ann.lo, inside_hi, dd - 1.0, q);
            total = total.plus(m.scaled(a.powf(2.0 - dd)));
        }
        let outside_lo = ann.lo.max(a);
        if outside_lo < ann.hi {
            total = total.plus(ann.moment(outside_lo, ann.hi, 1.0, q));
        }
    }
    total.scaled(1.0 / (dd - 2.0)).checked(q)
}

fn on_axis(p: &[f64]) -> bool {
    p[1..].iter().all(|v| *v == 0.0)
}

fn axial_transform(
    profile: &AxialProfile,
    x: &[f64],
    y: &[f64],
    kind: Kind,
    d: Dimension,
    q: &QuadratureSpec,
) -> Result<Estimate> {
    if !on_axis(x) || (kind != Kind::Newton && !on_axis(y)) {
        return Err(BridgeError::UnsupportedReduction(
            "axial potentials need x and y on the symmetry axis".into(),
        ));
    }
    let dd = d.as_f64();
    let x1 = x[0];
    let y1 = if kind == Kind::Newton { 0.0 } else { y[0] };
    let ny = y1.abs();
    let beta = 0.5 * dd;
    let inner_q = q.inner();
    let slice_q = inner_q.inner();
    let tracker = StatusTracker::new();
    let (lo, hi) = profile.z1_range();
    if !(hi > lo) {
        return Ok(Estimate::zero());
    }
    // limit of |u|^{d-2} f(|u|/2, b) as |u| → 0
    let j_origin = gamma(beta - 1.0) * 4f64.powf(beta - 1.0);

    // ρ^{d-2} × kernel(u), u = (h, ρ), written to stay bounded as |u| → 0
    let kernel = |h: f64, rho: f64| -> f64 {
        let nu = h.hypot(rho);
        let ratio = if nu > 0.0 { (rho / nu).powf(dd - 2.0) } else { 1.0 };
        let misalign = if ny == 0.0 {
            0.0
        } else if h * y1 > 0.0 {
            ny * rho * rho / (nu + h.abs())
        } else {
            ny * nu - h * y1
        };
        let damping = (-0.5 * misalign).exp();
        match kind {
            Kind::Newton => ratio,
            Kind::K => ratio * damping * (1.0 + nu * ny).powf(0.5 * (dd - 3.0)),
            Kind::J => {
                if nu == 0.0 {
                    return j_origin;
                }
                let f = tracker.absorb(f_radial(0.5 * nu, 0.5 * ny, beta, 1.0, &slice_q));
                ratio * damping * nu.powf(dd - 2.0) * f
            }
        }
    };

    let cross_section = |z1: f64| -> f64 {
        let h = z1 - x1;
        let mut total = 0.0;
        for (rlo, rhi, value) in profile.rings(z1) {
            let mut breaks = vec![h.abs()];
            if ny > 0.0 && h * y1 > 0.0 {
                let width = (4.0 * h.abs() / ny).sqrt();
                breaks.extend([width, 3.0 * width]);
            }
            breaks.retain(|b| *b > rlo && *b < rhi);
            let est = integrate(|rho| kernel(h, rho), rlo, rhi, &breaks, &inner_q);
            total += value * tracker.absorb(est);
        }
        total
    };

    // z₁ = e^s
    let mut breaks: Vec<f64> = profile.z1_breakpoints();
    if x1 > 0.0 {
        breaks.extend([x1, x1 + 1.0, (x1 - 1.0).max(0.0)]);
    }
    let (s_lo, s_hi) = (lo.ln(), hi.ln());
    let mut s_breaks: Vec<f64> = breaks
        .iter()
        .filter(|b| **b > 0.0)
        .map(|b| b.ln())
        .filter(|s| *s > s_lo && *s < s_hi)
        .collect();
    s_breaks.sort_by(f64::total_cmp);
    s_breaks.dedup();
    let integrand = |s: f64| {
        let z1 = s.exp();
        z1 * cross_section(z1)
    };
    let est = if s_hi.is_finite() {
        integrate(integrand, s_lo, s_hi, &s_breaks, q)
    } else {
        let cut = s_breaks.last().copied().unwrap_or(s_lo).max(s_lo) + 2.0;
        let mut integrand = integrand;
        let body = integrate(&mut integrand, s_lo, cut, &s_breaks, q);
        body.plus(integrate_to_infinity(&mut integrand, cut, 4.0, q))
    };
    let scale = sphere_area(d.get() - 2)
        * if kind == Kind::Newton {
            newton_constant(d)
        } else {
            1.0
        };
    Ok(tracker.finish(est.scaled(scale).checked(q)))
}

/// `E |V|(m + √v Z)` for a standard normal `Z` in `R^d`.
pub fn gaussian_average(v: &Potential, m: &[f64], var: f64, q: &QuadratureSpec) -> Result<Estimate> {
    let d = Dimension::new(m.len() as u32)?;
    if !(var >= 0.0) {
        return Err(BridgeError::InvalidParameter(format!("variance must be >= 0, got {var}")));
    }
    let red = v.reduce(d)?;
    check_gaussian_support(&red, m)?;
    Ok(reduction_average(&red, m, var, d, q))
}

fn check_gaussian_support(red: &Reduction, m: &[f64]) -> Result<()> {
    match red {
        Reduction::Axial(_) if !on_axis(m) => Err(BridgeError::UnsupportedReduction(
            "Gaussian averages of axial potentials need the mean on the axis".into(),
        )),
        Reduction::Split(parts) => parts.iter().try_for_each(|p| check_gaussian_support(p, m)),
        _ => Ok(()),
    }
}

fn reduction_average(red: &Reduction, m: &[f64], var: f64, d: Dimension, q: &QuadratureSpec) -> Estimate {
    match red {
        Reduction::Zero => Estimate::zero(),
        Reduction::Radial(p) => radial_average(p, m, var, d, q),
        Reduction::Axial(p) => axial_average(p, m[0], var, d, q),
        Reduction::Split(parts) => Estimate::sum(parts.iter().map(|p| reduction_average(p, m, var, d, q))).checked(q),
    }
}

// Mass of a ball of radius `big_r` under N(δ e₁, v I).
fn ball_mass(big_r: f64, delta: f64, var: f64, d: Dimension, q: &QuadratureSpec) -> Estimate {
    if big_r <= 0.0 {
        return Estimate::zero();
    }
    if big_r.is_infinite() {
        return Estimate::exact(1.0);
    }
    let sd = var.sqrt();
    let k = 0.5 * (d.as_f64() - 1.0);
    let lo = (-big_r).max(delta - 40.0 * sd);
    let hi = big_r.min(delta + 40.0 * sd);
    if !(hi > lo) {
        return Estimate::zero();
    }
    let norm = 1.0 / (sd * (2.0 * PI).sqrt());
    let r2 = big_r * big_r;
    let integrand = |z1: f64| {
        let g = (z1 - delta) / sd;
        norm * (-0.5 * g * g).exp() * gamma_p(k, (r2 - z1 * z1).max(0.0) / (2.0 * var))
    };
    let mut breaks = vec![delta, delta - sd, delta + sd, delta - 4.0 * sd, delta + 4.0 * sd];
    for c in [1.0, 8.0] {
        let e = r2 - 2.0 * c * var;
        if e > 0.0 {
            breaks.extend([e.sqrt(), -e.sqrt()]);
        }
    }
    breaks.retain(|b| *b > lo && *b < hi);
    integrate(integrand, lo, hi, &breaks, q)
}

fn radial_average(profile: &RadialProfile, m: &[f64], var: f64, d: Dimension, q: &QuadratureSpec) -> Estimate {
    let delta = geom::dist(m, &profile.center);
    if var == 0.0 {
        return Estimate::exact(profile.abs_value(delta));
    }
    let mut total = Estimate::zero();
    for ann in profile.annuli() {
        let part = match ann.constant_value() {
            Some(v) => {
                let outer = ball_mass(ann.hi, delta, var, d, q);
                let inner = ball_mass(ann.lo, delta, var, d, q);
                Estimate {
                    value: (outer.value - inner.value).max(0.0),
                    error_bound: outer.error_bound + inner.error_bound,
                    status: outer.status.max(inner.status),
                }
                .scaled(v)
            }
            None => shell_average(&ann, delta, var, d, q),
        };
        total = total.plus(part);
    }
    total.checked(q)
}

// E |V| 1_{lo ≤ |W| < hi} for W ~ N(δ e₁, v I), non-constant profile.
fn shell_average(ann: &Annulus, delta: f64, var: f64, d: Dimension, q: &QuadratureSpec) -> Estimate {
    let dd = d.as_f64();
    let sd = var.sqrt();
    let k = 0.5 * (dd - 1.0);
    let chi_norm = 2.0 / ((2.0 * var).powf(k) * gamma(k));
    let phi_norm = 1.0 / (sd * (2.0 * PI).sqrt());
    let rho_cap = sd * (dd.sqrt() + 12.0);
    let inner_q = q.inner();
    let tracker = StatusTracker::new();
    let z_lo = (-ann.hi).max(delta - 40.0 * sd);
    let z_hi = ann.hi.min(delta + 40.0 * sd);
    if !(z_hi > z_lo) {
        return Estimate::zero();
    }
    let integrand = |z1: f64| {
        let g = (z1 - delta) / sd;
        let phi = phi_norm * (-0.5 * g * g).exp();
        if phi == 0.0 {
            return 0.0;
        }
        let r_lo = (ann.lo * ann.lo - z1 * z1).max(0.0).sqrt();
        let r_hi = if ann.hi.is_finite() {
            (ann.hi * ann.hi - z1 * z1).max(0.0).sqrt().min(rho_cap)
        } else {
            rho_cap
        };
        if !(r_hi > r_lo) {
            return 0.0;
        }
        let mode = sd * (dd - 2.0).sqrt();
        let breaks: Vec<f64> = [mode, z1.abs()].into_iter().filter(|b| *b > r_lo && *b < r_hi).collect();
        let est = integrate(
            |rho: f64| {
                let chi = chi_norm * rho.powf(dd - 2.0) * (-rho * rho / (2.0 * var)).exp();
                chi * ann.abs_value(z1.hypot(rho))
            },
            r_lo,
            r_hi,
            &breaks,
            &inner_q,
        );
        phi * tracker.absorb(est)
    };
    let mut breaks = vec![delta, delta - 4.0 * sd, delta + 4.0 * sd, 0.0];
    breaks.retain(|b| *b > z_lo && *b < z_hi);
    tracker.finish(integrate(integrand, z_lo, z_hi, &breaks, q))
}

fn axial_average(profile: &AxialProfile, m1: f64, var: f64, d: Dimension, q: &QuadratureSpec) -> Estimate {
    if var == 0.0 {
        return Estimate::exact(profile.abs_value(m1, 0.0));
    }
    let sd = var.sqrt();
    let k = 0.5 * (d.as_f64() - 1.0);
    let norm = 1.0 / (sd * (2.0 * PI).sqrt());
    let (lo, hi) = profile.z1_range();
    let z_lo = lo.max(m1 - 40.0 * sd);
    let z_hi = hi.min(m1 + 40.0 * sd);
    if !(z_hi > z_lo) {
        return Estimate::zero();
    }
    let integrand = |z1: f64| {
        let g = (z1 - m1) / sd;
        let phi = norm * (-0.5 * g * g).exp();
        if phi == 0.0 {
            return 0.0;
        }
        profile
            .rings(z1)
            .iter()
            .map(|&(a, b, v)| {
                v * (gamma_p(k, b * b / (2.0 * var)) - gamma_p(k, a * a / (2.0 * var)))
            })
            .sum::<f64>()
            * phi
    };
    let mut breaks = profile.z1_breakpoints();
    breaks.extend([m1, m1 - 4.0 * sd, m1 + 4.0 * sd]);
    breaks.retain(|b| *b > z_lo && *b < z_hi);
    breaks.sort_by(f64::total_cmp);
    integrate(integrand, z_lo, z_hi, &breaks, q)
}

// Fractions λ ∈ (0, 1) at which the segment a → b crosses a shell boundary
// or passes closest to a centre.
fn segment_breaks(red: &Reduction, a: &[f64], b: &[f64], out: &mut Vec<f64>) {
    match red {
        Reduction::Zero => {}
        Reduction::Radial(p) => {
            let e = geom::sub(b, a);
            let f = geom::sub(a, &p.center);
            let ee = geom::dot(&e, &e);
            if ee == 0.0 {
                return;
            }
            let fe = geom::dot(&f, &e);
            let ff = geom::dot(&f, &f);
            out.push(-fe / ee);
            for big_r in p.breakpoints() {
                let disc = fe * fe - ee * (ff - big_r * big_r);
                if disc > 0.0 {
                    let root = disc.sqrt();
                    out.push((-fe - root) / ee);
                    out.push((-fe + root) / ee);
                }
            }
        }
        Reduction::Axial(p) => {
            let e1 = b[0] - a[0];
            if e1 != 0.0 {
                for z in p.z1_breakpoints() {
                    out.push((z - a[0]) / e1);
                }
            }
        }
        Reduction::Split(parts) => parts.iter().for_each(|p| segment_breaks(p, a, b, out)),
    }
}

fn time_breaks(red: &Reduction, a: &[f64], b: &[f64], t0: f64, t1: f64, span: f64) -> Vec<f64> {
    let mut lambdas = Vec::new();
    segment_breaks(red, a, b, &mut lambdas);
    let mut out: Vec<f64> = lambdas
        .into_iter()
        .filter(|l| *l > 0.0 && *l < 1.0)
        .map(|l| l * span)
        .filter(|t| *t > t0 && *t < t1)
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// `S(V, t, x, y) = ∫_0^t E |V|(m_s + √(2s(t-s)/t) Z) ds`, the bridge
/// integral of `|V|`.
pub fn s_functional(v: &Potential, spec: &BridgeSpec, q: &QuadratureSpec) -> Result<Estimate> {
    let d = spec.dimension()?;
    let red = v.reduce(d)?;
    let (t, x, y) = (spec.t, &spec.x, &spec.y);
    check_gaussian_support(&red, x)?;
    check_gaussian_support(&red, y)?;
    let inner_q = q.inner();
    let tracker = StatusTracker::new();
    let integrand = |s: f64| {
        let m = geom::lerp(x, y, s / t);
        let var = 2.0 * s * (t - s) / t;
        tracker.absorb(reduction_average(&red, &m, var, d, &inner_q))
    };
    let mut breaks = time_breaks(&red, x, y, 0.0, t, t);
    breaks.push(0.5 * t);
    breaks.sort_by(f64::total_cmp);
    Ok(tracker.finish(integrate(integrand, 0.0, t, &breaks, q)))
}

/// The two half-integrals of `N(V, t, x, y)`, each including the factor
/// `(4π)^{d/2}`.
pub fn n_halves(v: &Potential, spec: &BridgeSpec, q: &QuadratureSpec) -> Result<(Estimate, Estimate)> {
    let d = spec.dimension()?;
    let red = v.reduce(d)?;
    let (t, x, y) = (spec.t, &spec.x, &spec.y);
    check_gaussian_support(&red, x)?;
    check_gaussian_support(&red, y)?;
    let inner_q = q.inner();
    let prefactor = (4.0 * PI).powf(0.5 * d.as_f64());
    let half = 0.5 * t;
    let breaks = time_breaks(&red, y, x, 0.0, t, t);

    let tracker = StatusTracker::new();
    let first = integrate(
        |tau: f64| {
            let m = geom::lerp(y, x, tau / t);
            tracker.absorb(reduction_average(&red, &m, 2.0 * tau, d, &inner_q))
        },
        0.0,
        half,
        &breaks,
        q,
    );
    let first = tracker.finish(first).scaled(prefactor);

    let tracker = StatusTracker::new();
    let second = integrate(
        |tau: f64| {
            let m = geom::lerp(y, x, tau / t);
            tracker.absorb(reduction_average(&red, &m, 2.0 * (t - tau), d, &inner_q))
        },
        half,
        t,
        &breaks,
        q,
    );
    let second = tracker.finish(second).scaled(prefactor);
    Ok((first, second))
}

/// `N(V, t, x, y)`, the comparison functional for `S`; no `(4π)^{-d/2}`
/// normalisation.
pub fn n_functional(v: &Potential, spec: &BridgeSpec, q: &QuadratureSpec) -> Result<Estimate> {
    let (a, b) = n_halves(v, spec, q)?;
    Ok(a.plus(b).checked(q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(d: u32) -> Dimension {
        Dimension::new(d).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn unit_ball(d: usize) -> Potential {
        Potential::ball(vec![0.0; d], 1.0, -1.0).unwrap()
    }

    #[test]
    fn cap_measure_totals() {
        // ∫_{-1}^{1} (1-u²)^{n/2} du = √π Γ(n/2+1) / Γ(n/2+3/2)
        for n in -1..6 {
            let nf = n as f64;
            let exact = PI.sqrt() * gamma(0.5 * nf + 1.0) / gamma(0.5 * nf + 1.5);
            assert!(rel(cap_measure(n, 1.0), exact) < 1e-14, "n = {n}");
            assert_eq!(cap_measure(n, -1.0), 0.0);
        }
    }

    #[test]
    fn newton_of_unit_ball_at_centre() {
        let q = QuadratureSpec::one_dim().with_rel_tol(1e-10);
        for d in [3usize, 4, 6] {
            let est = newton_potential(&unit_ball(d), &vec![0.0; d], &q).unwrap();
            assert!(rel(est.value, 0.5 / (d as f64 - 2.0)) < 1e-12, "d = {d}");
        }
    }

    #[test]
    fn k_at_y_zero_is_scaled_newton() {
        let q = QuadratureSpec::multi_dim().with_rel_tol(1e-10);
        for d in [3usize, 4] {
            let v = unit_ball(d);
            let mut x = vec![0.0; d];
            x[0] = 0.7;
            x[1] = 0.9;
            let k = k_transform(&v, &x, &vec![0.0; d], &q).unwrap();
            let n = newton_potential(&v, &x, &q).unwrap();
            assert!(k.is_converged(), "{k:?}");
            assert!(rel(k.value, n.value / newton_constant(dim(d as u32))) < 1e-8, "d = {d}: {k:?} {n:?}");
        }
    }

    #[test]
    fn constant_potential_closed_forms() {
        let q = QuadratureSpec::one_dim();
        let v = Potential::constant(-0.5).unwrap();
        let spec = BridgeSpec::new(2.0, vec![0.1, 0.2, 0.3], vec![1.0, -1.0, 0.0]).unwrap();
        let s = s_functional(&v, &spec, &q).unwrap();
        assert!(rel(s.value, 1.0) < 1e-12);
        let n = n_functional(&v, &spec, &q).unwrap();
        assert!(rel(n.value, 1.0 * (4.0 * PI).powf(1.5)) < 1e-12);
    }

    #[test]
    fn zero_potential_gives_zero() {
        let q = QuadratureSpec::one_dim();
        let v = Potential::constant(0.0).unwrap();
        let x = [0.3, 0.0, 0.0];
        let y = [0.0, 1.0, 0.0];
        assert_eq!(k_transform(&v, &x, &y, &q).unwrap().value, 0.0);
        assert_eq!(j_transform(&v, &x, &y, &q).unwrap().value, 0.0);
        assert_eq!(newton_potential(&v, &x, &q).unwrap().value, 0.0);
    }

    #[test]
    fn ball_mass_matches_chi_square_limit() {
        // centred ball: P(|Z|² v ≤ R²) = P(d/2, R²/(2v))
        let q = QuadratureSpec::one_dim().with_rel_tol(1e-12);
        let d = dim(3);
        let m = ball_mass(1.3, 0.0, 0.4, d, &q);
        assert!(rel(m.value, gamma_p(1.5, 1.69 / 0.8)) < 1e-10);
    }

    #[test]
    fn s_is_symmetric() {
        let q = QuadratureSpec::one_dim().with_rel_tol(1e-10);
        let v = unit_ball(3);
        let spec = BridgeSpec::new(0.7, vec![0.2, 0.5, 0.0], vec![1.5, -0.3, 0.4]).unwrap();
        let a = s_functional(&v, &spec, &q).unwrap();
        let b = s_functional(&v, &spec.swapped(), &q).unwrap();
        assert!(rel(a.value, b.value) < 1e-9, "{a:?} {b:?}");
    }

    #[test]
    fn j_at_y_zero_is_scaled_newton() {
        let q = QuadratureSpec::multi_dim().with_rel_tol(1e-9);
        let d = 3;
        let v = unit_ball(d);
        let x = [1.5, 0.2, 0.0];
        let j = j_transform(&v, &x, &[0.0; 3], &q).unwrap();
        let n = newton_potential(&v, &x, &q).unwrap();
        assert!(rel(j.value, (4.0 * PI).powf(1.5) * n.value) < 1e-7, "{j:?} {n:?}");
    }
}
