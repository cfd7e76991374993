//! Adaptive Gauss–Kronrod quadrature on finite and semi-infinite ranges.
//!
//! Every integral in the crate funnels through [`integrate`]: a globally
//! adaptive 21-point Gauss–Kronrod scheme that always bisects the panel with
//! the largest error estimate. Infinite ranges are mapped onto `[0, 1)` with
//! either an algebraic or a logarithmic change of variables, and integrable
//! power singularities at the origin are flattened by `s = b·e^{-w}`.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{BridgeError, Result};

/// How a semi-infinite interval is folded onto `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfiniteMap {
    /// `x = a - L ln(1 - t)`; best for exponentially decaying integrands.
    LogMap,
    /// `x = a + L t / (1 - t)`; tolerates algebraic decay.
    AlgebraicMap,
}

/// Tolerances and budget for one adaptive integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub infinite_map: InfiniteMap,
}

impl QuadratureSpec {
    pub fn new(
        rel_tol: f64,
        abs_tol: f64,
        max_subdivisions: usize,
        infinite_map: InfiniteMap,
    ) -> Result<Self> {
        if !(rel_tol > 0.0) {
            return Err(BridgeError::InvalidParameter(format!(
                "rel_tol must be positive, got {rel_tol}"
            )));
        }
        if !(abs_tol >= 0.0) {
            return Err(BridgeError::InvalidParameter(format!(
                "abs_tol must be non-negative, got {abs_tol}"
            )));
        }
        if max_subdivisions < 1 {
            return Err(BridgeError::InvalidParameter(
                "max_subdivisions must be at least 1".into(),
            ));
        }
        Ok(Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
            infinite_map,
        })
    }

    /// Default for one-dimensional integrals (`rel_tol = 1e-8`).
    pub fn one_dim() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 0.0,
            max_subdivisions: 2000,
            infinite_map: InfiniteMap::AlgebraicMap,
        }
    }

    /// Default for reduced two- and three-dimensional integrals (`rel_tol = 1e-6`).
    pub fn multi_dim() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 0.0,
            max_subdivisions: 1000,
            infinite_map: InfiniteMap::AlgebraicMap,
        }
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    /// Tolerances for an integral nested inside another one.
    pub fn inner(&self) -> Self {
        Self {
            rel_tol: (self.rel_tol * 0.1).max(1e-14),
            abs_tol: self.abs_tol * 0.1,
            ..*self
        }
    }

    fn accepts(&self, value: f64, error: f64) -> bool {
        error <= self.abs_tol.max(self.rel_tol * value.abs())
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::one_dim()
    }
}

/// Outcome classification of a numerical integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxSubdivisionsReached,
    Diverged,
}

/// A numerical value with an error bound and a convergence status.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    #[serde(with = "crate::real")]
    pub value: f64,
    #[serde(with = "crate::real")]
    pub error_bound: f64,
    pub status: Status,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            error_bound: 0.0,
            status: Status::Converged,
        }
    }

    pub fn zero() -> Self {
        Self::exact(0.0)
    }

    /// The `+∞` sentinel.
    pub fn infinite() -> Self {
        Self {
            value: f64::INFINITY,
            error_bound: f64::INFINITY,
            status: Status::Diverged,
        }
    }

    pub fn is_converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn is_infinite(&self) -> bool {
        self.value == f64::INFINITY
    }

    /// Sum of two estimates; the worse status wins.
    pub fn plus(self, other: Estimate) -> Estimate {
        let value = self.value + other.value;
        if value == f64::INFINITY {
            return Estimate::infinite();
        }
        Estimate {
            value,
            error_bound: self.error_bound + other.error_bound,
            status: self.status.max(other.status),
        }
    }

    pub fn scaled(self, factor: f64) -> Estimate {
        if self.is_infinite() {
            return if factor > 0.0 {
                self
            } else if factor == 0.0 {
                Estimate::zero()
            } else {
                Estimate {
                    value: f64::NEG_INFINITY,
                    ..self
                }
            };
        }
        Estimate {
            value: self.value * factor,
            error_bound: self.error_bound * factor.abs(),
            status: self.status,
        }
    }

    /// Downgrade to `max_subdivisions_reached` if the error bound no longer
    /// meets `q` (used after combining several pieces).
    pub fn checked(mut self, q: &QuadratureSpec) -> Estimate {
        if self.status == Status::Converged && !q.accepts(self.value, self.error_bound) {
            self.status = Status::MaxSubdivisionsReached;
        }
        self
    }

    pub fn sum<I: IntoIterator<Item = Estimate>>(items: I) -> Estimate {
        items.into_iter().fold(Estimate::zero(), Estimate::plus)
    }
}

/// Records the worst status seen across the inner integrals of a nested
/// quadrature.
#[derive(Debug, Default)]
pub struct StatusTracker {
    worst: Cell<Option<Status>>,
}

impl StatusTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the estimate's value and remembers its status.
    pub fn absorb(&self, est: Estimate) -> f64 {
        let worst = match self.worst.get() {
            Some(s) => s.max(est.status),
            None => est.status,
        };
        self.worst.set(Some(worst));
        est.value
    }

    pub fn note(&self, status: Status) {
        self.absorb(Estimate {
            value: 0.0,
            error_bound: 0.0,
            status,
        });
    }

    /// Applies the recorded inner status to an outer estimate.
    pub fn finish(&self, mut outer: Estimate) -> Estimate {
        if let Some(s) = self.worst.get() {
            if s == Status::Diverged && !outer.is_infinite() {
                outer.status = outer.status.max(Status::MaxSubdivisionsReached);
            } else {
                outer.status = outer.status.max(s);
            }
        }
        outer
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

fn rescale_error(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut scaled = err.abs();
    if resasc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / resasc).powf(1.5);
        scaled = if scale < 1.0 { resasc * scale } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * resabs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Panel {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();
    let fc = f(centre);
    let mut res_g = 0.0;
    let mut res_k = WGK[10] * fc;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(centre - x);
        let f2 = f(centre + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let error = rescale_error((res_k - res_g) * half, res_abs * abs_half, res_asc * abs_half);
    Panel { a, b, value, error }
}

/// Adaptive quadrature of `f` over the finite interval `[a, b]`.
///
/// `breakpoints` strictly inside `(a, b)` seed the initial partition; use
/// them for kinks, jumps and narrow peaks whose location is known.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    q: &QuadratureSpec,
) -> Estimate {
    if a == b {
        return Estimate::zero();
    }
    if b < a {
        return integrate(f, b, a, breakpoints, q).scaled(-1.0);
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > a && *p < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut frozen_value = 0.0;
    let mut frozen_error = 0.0;
    let mut lo = a;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        if hi - lo > 0.0 {
            heap.push(kronrod21(&mut f, lo, hi));
        }
        lo = hi;
    }

    let mut splits = 0usize;
    loop {
        let (value, error) = heap
            .iter()
            .fold((frozen_value, frozen_error), |(v, e), p| (v + p.value, e + p.error));
        if !value.is_finite() {
            return if value == f64::INFINITY {
                Estimate::infinite()
            } else {
                Estimate {
                    value,
                    error_bound: f64::INFINITY,
                    status: Status::MaxSubdivisionsReached,
                }
            };
        }
        if q.accepts(value, error) {
            return Estimate {
                value,
                error_bound: error,
                status: Status::Converged,
            };
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => {
                return Estimate {
                    value,
                    error_bound: error,
                    status: Status::MaxSubdivisionsReached,
                }
            }
        };
        if splits >= q.max_subdivisions {
            heap.push(worst);
            return Estimate {
                value,
                error_bound: error,
                status: Status::MaxSubdivisionsReached,
            };
        }
        let mid = 0.5 * (worst.a + worst.b);
        let width = worst.b - worst.a;
        if width <= 4.0 * f64::EPSILON * worst.a.abs().max(worst.b.abs()).max(f64::MIN_POSITIVE)
            || mid <= worst.a
            || mid >= worst.b
        {
            frozen_value += worst.value;
            frozen_error += worst.error;
            continue;
        }
        heap.push(kronrod21(&mut f, worst.a, mid));
        heap.push(kronrod21(&mut f, mid, worst.b));
        splits += 1;
    }
}

/// `∫_a^∞ f`, folded onto `[0, 1)` with length scale `scale`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    scale: f64,
    q: &QuadratureSpec,
) -> Estimate {
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    match q.infinite_map {
        InfiniteMap::AlgebraicMap => integrate(
            |t| {
                let one_minus = 1.0 - t;
                let x = a + scale * t / one_minus;
                let jac = scale / (one_minus * one_minus);
                guarded(f(x) * jac)
            },
            0.0,
            1.0,
            &[],
            q,
        ),
        InfiniteMap::LogMap => integrate(
            |t| {
                let one_minus = 1.0 - t;
                let x = a - scale * one_minus.ln();
                guarded(f(x) * scale / one_minus)
            },
            0.0,
            1.0,
            &[],
            q,
        ),
    }
}

/// `∫_{-∞}^b f`.
pub fn integrate_from_neg_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    b: f64,
    scale: f64,
    q: &QuadratureSpec,
) -> Estimate {
    integrate_to_infinity(|x| f(2.0 * b - x), b, scale, q)
}

/// `∫_0^b f` through `s = b·e^{-w}`, which turns a power singularity at the
/// origin into exponential decay in `w`.
pub fn integrate_to_zero<F: FnMut(f64) -> f64>(mut f: F, b: f64, q: &QuadratureSpec) -> Estimate {
    if b <= 0.0 {
        return Estimate::zero();
    }
    integrate_to_infinity(
        |w| {
            let s = b * (-w).exp();
            if s == 0.0 {
                0.0
            } else {
                guarded(f(s) * s)
            }
        },
        0.0,
        1.0,
        q,
    )
}

/// `∫_0^∞ f`: logarithmic map on `[0, splits[0]]`, plain panels between the
/// split points and a folded tail beyond the last one.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(
    mut f: F,
    splits: &[f64],
    tail_scale: f64,
    q: &QuadratureSpec,
) -> Estimate {
    let mut pts: Vec<f64> = splits
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > 0.0)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.is_empty() {
        pts.push(1.0);
    }
    let first = pts[0];
    let last = *pts.last().unwrap_or(&first);
    let head = integrate_to_zero(&mut f, first, q);
    let middle = if last > first {
        integrate(&mut f, first, last, &pts[1..pts.len() - 1], q)
    } else {
        Estimate::zero()
    };
    let tail = integrate_to_infinity(&mut f, last, tail_scale, q);
    Estimate::sum([head, middle, tail]).checked(q)
}

/// `∫_{-∞}^{∞} f`, split at `centre`.
pub fn integrate_real_line<F: FnMut(f64) -> f64>(
    mut f: F,
    centre: f64,
    scale: f64,
    q: &QuadratureSpec,
) -> Estimate {
    let right = integrate_to_infinity(&mut f, centre, scale, q);
    let left = integrate_from_neg_infinity(&mut f, centre, scale, q);
    right.plus(left).checked(q)
}

fn guarded(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v
    }
}
