//! Closed-form potentials `V` with sign, support and symmetry metadata.
//!
//! A [`Potential`] is an immutable expression tree ([`PotentialForm`]) plus
//! metadata derived at construction. The transforms in
//! [`crate::functionals`] never look at the tree directly; they ask for a
//! [`Reduction`], which flattens scalings, dilations and sums into radial or
//! axial profiles of `|V|`.

use serde::{Deserialize, Serialize};

use crate::error::{BridgeError, Result};
use crate::geom;
use crate::growth::{self, Verdict};
use crate::kernels::Dimension;
use crate::quadrature::{integrate, integrate_to_infinity, Estimate, QuadratureSpec, Status};
use crate::special::sphere_area;

/// Expression tree of a potential, also its JSON wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialForm {
    Constant {
        value: f64,
    },
    /// `amplitude · 1_{B(center, radius)}`
    #[serde(rename = "ball")]
    BallIndicator {
        center: Vec<f64>,
        radius: f64,
        amplitude: f64,
    },
    /// `amplitude · |z|^exponent` on `inner_radius ≤ |z| < outer_radius`.
    RadialPower {
        exponent: f64,
        inner_radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        outer_radius: Option<f64>,
        amplitude: f64,
    },
    /// `-1/z₁` on `A = {z₁ > 4, |z₂| ≤ √z₁}`, optionally cut at `z₁ ≤ z1_max`.
    CounterexampleA {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z1_max: Option<f64>,
    },
    /// `d_s V(z) = s · V(√s z)`
    Dilate {
        s: f64,
        inner: Box<PotentialForm>,
    },
    Scale {
        factor: f64,
        inner: Box<PotentialForm>,
    },
    Sum {
        terms: Vec<PotentialForm>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Symmetry {
    /// Depends only on `|z - center|`.
    Radial { center: Vec<f64> },
    /// Depends only on `z_axis` and the distance to the `axis` line through 0.
    Axial { axis: usize },
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Zero,
    Nonpositive,
    Nonnegative,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Support {
    /// Contained in the closed ball `B(0, radius)`.
    Compact { radius: f64 },
    Unbounded,
}

/// A validated potential with its metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialForm", into = "PotentialForm")]
pub struct Potential {
    form: PotentialForm,
    symmetry: Symmetry,
    sign: Sign,
    support: Support,
}

impl TryFrom<PotentialForm> for Potential {
    type Error = BridgeError;
    fn try_from(form: PotentialForm) -> Result<Self> {
        Potential::new(form)
    }
}

impl From<Potential> for PotentialForm {
    fn from(p: Potential) -> Self {
        p.form
    }
}

fn invalid(msg: String) -> BridgeError {
    BridgeError::InvalidParameter(msg)
}

fn validate(form: &PotentialForm) -> Result<()> {
    let finite = |name: &str, v: f64| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(invalid(format!("{name} must be finite, got {v}")))
        }
    };
    match form {
        PotentialForm::Constant { value } => finite("value", *value),
        PotentialForm::BallIndicator {
            center,
            radius,
            amplitude,
        } => {
            finite("amplitude", *amplitude)?;
            if !(*radius > 0.0) || !radius.is_finite() {
                return Err(invalid(format!("ball radius must be positive, got {radius}")));
            }
            if center.iter().any(|c| !c.is_finite()) {
                return Err(invalid("ball center must be finite".into()));
            }
            Ok(())
        }
        PotentialForm::RadialPower {
            exponent,
            inner_radius,
            outer_radius,
            amplitude,
        } => {
            finite("exponent", *exponent)?;
            finite("amplitude", *amplitude)?;
            if !(*inner_radius >= 0.0) || !inner_radius.is_finite() {
                return Err(invalid(format!(
                    "inner_radius must be non-negative, got {inner_radius}"
                )));
            }
            if let Some(outer) = outer_radius {
                if !(*outer > *inner_radius) || !outer.is_finite() {
                    return Err(invalid(format!(
                        "outer_radius {outer} must exceed inner_radius {inner_radius}"
                    )));
                }
            }
            Ok(())
        }
        PotentialForm::CounterexampleA { z1_max } => match z1_max {
            Some(m) if !(*m > 4.0) || !m.is_finite() => {
                Err(invalid(format!("z1_max must exceed 4, got {m}")))
            }
            _ => Ok(()),
        },
        PotentialForm::Dilate { s, inner } => {
            if !(*s > 0.0) || !s.is_finite() {
                return Err(invalid(format!("dilation s must be positive, got {s}")));
            }
            validate(inner)
        }
        PotentialForm::Scale { factor, inner } => {
            finite("factor", *factor)?;
            validate(inner)
        }
        PotentialForm::Sum { terms } => terms.iter().try_for_each(validate),
    }
}

fn sign_of_value(v: f64) -> Sign {
    if v < 0.0 {
        Sign::Nonpositive
    } else if v > 0.0 {
        Sign::Nonnegative
    } else {
        Sign::Zero
    }
}

fn combine_sign(a: Sign, b: Sign) -> Sign {
    match (a, b) {
        (Sign::Zero, s) | (s, Sign::Zero) => s,
        (x, y) if x == y => x,
        _ => Sign::Mixed,
    }
}

fn flip(s: Sign) -> Sign {
    match s {
        Sign::Nonpositive => Sign::Nonnegative,
        Sign::Nonnegative => Sign::Nonpositive,
        other => other,
    }
}

fn sign_of(form: &PotentialForm) -> Sign {
    match form {
        PotentialForm::Constant { value } => sign_of_value(*value),
        PotentialForm::BallIndicator { amplitude, .. } => sign_of_value(*amplitude),
        PotentialForm::RadialPower { amplitude, .. } => sign_of_value(*amplitude),
        PotentialForm::CounterexampleA { .. } => Sign::Nonpositive,
        PotentialForm::Dilate { inner, .. } => sign_of(inner),
        PotentialForm::Scale { factor, inner } => {
            if *factor > 0.0 {
                sign_of(inner)
            } else if *factor < 0.0 {
                flip(sign_of(inner))
            } else {
                Sign::Zero
            }
        }
        PotentialForm::Sum { terms } => terms
            .iter()
            .map(sign_of)
            .fold(Sign::Zero, combine_sign),
    }
}

fn support_of(form: &PotentialForm) -> Support {
    match form {
        PotentialForm::Constant { value } => {
            if *value == 0.0 {
                Support::Compact { radius: 0.0 }
            } else {
                Support::Unbounded
            }
        }
        PotentialForm::BallIndicator {
            center,
            radius,
            amplitude,
        } => {
            if *amplitude == 0.0 {
                Support::Compact { radius: 0.0 }
            } else {
                Support::Compact {
                    radius: geom::norm(center) + radius,
                }
            }
        }
        PotentialForm::RadialPower {
            outer_radius,
            amplitude,
            ..
        } => match outer_radius {
            _ if *amplitude == 0.0 => Support::Compact { radius: 0.0 },
            Some(r) => Support::Compact { radius: *r },
            None => Support::Unbounded,
        },
        PotentialForm::CounterexampleA { z1_max } => match z1_max {
            // A ∩ {z₁ ≤ R} ⊂ B(0, √(R² + R))
            Some(r) => Support::Compact {
                radius: (r * r + r).sqrt(),
            },
            None => Support::Unbounded,
        },
        PotentialForm::Dilate { s, inner } => match support_of(inner) {
            Support::Compact { radius } => Support::Compact {
                radius: radius / s.sqrt(),
            },
            Support::Unbounded => Support::Unbounded,
        },
        PotentialForm::Scale { factor, inner } => {
            if *factor == 0.0 {
                Support::Compact { radius: 0.0 }
            } else {
                support_of(inner)
            }
        }
        PotentialForm::Sum { terms } => {
            let mut radius: f64 = 0.0;
            for t in terms {
                match support_of(t) {
                    Support::Compact { radius: r } => radius = radius.max(r),
                    Support::Unbounded => return Support::Unbounded,
                }
            }
            Support::Compact { radius }
        }
    }
}

fn same_point(a: &[f64], b: &[f64]) -> bool {
    let n = a.len().max(b.len());
    (0..n).all(|i| a.get(i).copied().unwrap_or(0.0) == b.get(i).copied().unwrap_or(0.0))
}

fn on_axis(c: &[f64], axis: usize) -> bool {
    c.iter().enumerate().all(|(i, v)| i == axis || *v == 0.0)
}

// `None` marks terms that are symmetric under everything (constants, zero).
fn symmetry_of(form: &PotentialForm) -> Option<Symmetry> {
    match form {
        PotentialForm::Constant { .. } => None,
        PotentialForm::BallIndicator {
            center, amplitude, ..
        } => {
            if *amplitude == 0.0 {
                None
            } else {
                Some(Symmetry::Radial {
                    center: center.clone(),
                })
            }
        }
        PotentialForm::RadialPower { amplitude, .. } => {
            if *amplitude == 0.0 {
                None
            } else {
                Some(Symmetry::Radial { center: vec![] })
            }
        }
        PotentialForm::CounterexampleA { .. } => Some(Symmetry::Axial { axis: 0 }),
        PotentialForm::Dilate { s, inner } => symmetry_of(inner).map(|sym| match sym {
            Symmetry::Radial { center } => Symmetry::Radial {
                center: geom::scale(&center, 1.0 / s.sqrt()),
            },
            other => other,
        }),
        PotentialForm::Scale { factor, inner } => {
            if *factor == 0.0 {
                None
            } else {
                symmetry_of(inner)
            }
        }
        PotentialForm::Sum { terms } => {
            let mut acc: Option<Symmetry> = None;
            for t in terms {
                let Some(s) = symmetry_of(t) else { continue };
                acc = Some(match (acc, s) {
                    (None, s) => s,
                    (Some(Symmetry::General), _) | (_, Symmetry::General) => Symmetry::General,
                    (Some(Symmetry::Radial { center: a }), Symmetry::Radial { center: b }) => {
                        if same_point(&a, &b) {
                            Symmetry::Radial { center: a }
                        } else {
                            // two centres span a line; axial only if it is a coordinate axis through 0
                            let axis_of = |c: &[f64]| (0..c.len()).find(|&i| c[i] != 0.0);
                            match (axis_of(&a), axis_of(&b)) {
                                (Some(i), _) if on_axis(&a, i) && on_axis(&b, i) => {
                                    Symmetry::Axial { axis: i }
                                }
                                (None, Some(i)) if on_axis(&b, i) => Symmetry::Axial { axis: i },
                                _ => Symmetry::General,
                            }
                        }
                    }
                    (Some(Symmetry::Radial { center }), Symmetry::Axial { axis })
                    | (Some(Symmetry::Axial { axis }), Symmetry::Radial { center }) => {
                        if on_axis(&center, axis) {
                            Symmetry::Axial { axis }
                        } else {
                            Symmetry::General
                        }
                    }
                    (Some(Symmetry::Axial { axis: a }), Symmetry::Axial { axis: b }) => {
                        if a == b {
                            Symmetry::Axial { axis: a }
                        } else {
                            Symmetry::General
                        }
                    }
                });
            }
            acc
        }
    }
}

impl Potential {
    pub fn new(form: PotentialForm) -> Result<Self> {
        validate(&form)?;
        let sign = sign_of(&form);
        let support = support_of(&form);
        let symmetry = symmetry_of(&form).unwrap_or(Symmetry::Radial { center: vec![] });
        Ok(Self {
            form,
            symmetry,
            sign,
            support,
        })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(PotentialForm::Constant { value })
    }

    pub fn ball(center: Vec<f64>, radius: f64, amplitude: f64) -> Result<Self> {
        Self::new(PotentialForm::BallIndicator {
            center,
            radius,
            amplitude,
        })
    }

    pub fn radial_power(
        exponent: f64,
        inner_radius: f64,
        outer_radius: Option<f64>,
        amplitude: f64,
    ) -> Result<Self> {
        Self::new(PotentialForm::RadialPower {
            exponent,
            inner_radius,
            outer_radius,
            amplitude,
        })
    }

    /// `V = -(1/z₁) 1_A`, the potential with bounded Newton potential and
    /// infinite `K`-norm for `d ≥ 4`.
    pub fn counterexample_a() -> Self {
        Self::new(PotentialForm::CounterexampleA { z1_max: None }).expect("valid form")
    }

    /// `V 1_{z₁ ≤ z1_max}`.
    pub fn counterexample_a_truncated(z1_max: f64) -> Result<Self> {
        Self::new(PotentialForm::CounterexampleA {
            z1_max: Some(z1_max),
        })
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(PotentialForm::Scale {
            factor,
            inner: Box::new(self.form.clone()),
        })
    }

    pub fn sum(terms: Vec<Potential>) -> Result<Self> {
        Self::new(PotentialForm::Sum {
            terms: terms.into_iter().map(|p| p.form).collect(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.form).expect("potential forms always serialize")
    }

    pub fn form(&self) -> &PotentialForm {
        &self.form
    }

    pub fn symmetry(&self) -> &Symmetry {
        &self.symmetry
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn support(&self) -> Support {
        self.support
    }

    /// Checks that the potential can be evaluated in dimension `d`.
    pub fn check_dimension(&self, d: Dimension) -> Result<()> {
        check_form_dimension(&self.form, d)
    }

    /// `V(z)`.
    pub fn evaluate(&self, z: &[f64]) -> Result<f64> {
        let d = Dimension::new(z.len() as u32)?;
        self.check_dimension(d)?;
        Ok(eval_form(&self.form, z))
    }

    /// `V(z)` without the dimension checks; for hot loops after
    /// [`Potential::check_dimension`].
    pub fn evaluate_unchecked(&self, z: &[f64]) -> f64 {
        eval_form(&self.form, z)
    }

    /// Upper bounds for `sup V⁺` and `sup V⁻`; `None` when unbounded.
    pub fn part_bounds(&self) -> (Option<f64>, Option<f64>) {
        part_bounds(&self.form)
    }

    /// `d_s V`.
    pub fn dilate(&self, s: f64) -> Result<Self> {
        Self::new(PotentialForm::Dilate {
            s,
            inner: Box::new(self.form.clone()),
        })
    }

    /// Flattens the expression into profiles of `|V|` for dimension `d`.
    pub fn reduce(&self, d: Dimension) -> Result<Reduction> {
        self.check_dimension(d)?;
        reduce(&self.form, d)
    }
}

fn check_form_dimension(form: &PotentialForm, d: Dimension) -> Result<()> {
    match form {
        PotentialForm::BallIndicator { center, .. } => {
            if center.len() != d.as_usize() {
                return Err(BridgeError::DimensionMismatch {
                    expected: d.as_usize(),
                    found: center.len(),
                });
            }
            Ok(())
        }
        PotentialForm::RadialPower {
            exponent,
            inner_radius,
            ..
        } => {
            if *inner_radius == 0.0 && *exponent <= -0.5 * d.as_f64() {
                return Err(invalid(format!(
                    "radial power with exponent {exponent} needs a positive inner_radius in d = {}",
                    d.get()
                )));
            }
            Ok(())
        }
        PotentialForm::Dilate { inner, .. } | PotentialForm::Scale { inner, .. } => {
            check_form_dimension(inner, d)
        }
        PotentialForm::Sum { terms } => terms.iter().try_for_each(|t| check_form_dimension(t, d)),
        PotentialForm::Constant { .. } | PotentialForm::CounterexampleA { .. } => Ok(()),
    }
}

fn in_set_a(z: &[f64], z1_max: Option<f64>) -> bool {
    let z1 = z[0];
    if !(z1 > 4.0) {
        return false;
    }
    if let Some(m) = z1_max {
        if z1 > m {
            return false;
        }
    }
    let perp2: f64 = z[1..].iter().map(|v| v * v).sum();
    perp2 <= z1
}

fn eval_form(form: &PotentialForm, z: &[f64]) -> f64 {
    match form {
        PotentialForm::Constant { value } => *value,
        PotentialForm::BallIndicator {
            center,
            radius,
            amplitude,
        } => {
            if geom::dist2(z, center) <= radius * radius {
                *amplitude
            } else {
                0.0
            }
        }
        PotentialForm::RadialPower {
            exponent,
            inner_radius,
            outer_radius,
            amplitude,
        } => {
            let r = geom::norm(z);
            let below_outer = outer_radius.map_or(true, |o| r < o);
            if r >= *inner_radius && below_outer {
                amplitude * r.powf(*exponent)
            } else {
                0.0
            }
        }
        PotentialForm::CounterexampleA { z1_max } => {
            if in_set_a(z, *z1_max) {
                -1.0 / z[0]
            } else {
                0.0
            }
        }
        PotentialForm::Dilate { s, inner } => {
            let scaled = geom::scale(z, s.sqrt());
            s * eval_form(inner, &scaled)
        }
        PotentialForm::Scale { factor, inner } => factor * eval_form(inner, z),
        PotentialForm::Sum { terms } => terms.iter().map(|t| eval_form(t, z)).sum(),
    }
}

fn part_bounds(form: &PotentialForm) -> (Option<f64>, Option<f64>) {
    let split = |v: f64| (Some(v.max(0.0)), Some((-v).max(0.0)));
    match form {
        PotentialForm::Constant { value } => split(*value),
        PotentialForm::BallIndicator { amplitude, .. } => split(*amplitude),
        PotentialForm::RadialPower {
            exponent,
            inner_radius,
            outer_radius,
            amplitude,
        } => {
            let peak = if *exponent >= 0.0 {
                outer_radius.map(|o| o.powf(*exponent))
            } else if *inner_radius > 0.0 {
                Some(inner_radius.powf(*exponent))
            } else {
                None
            };
            if *amplitude == 0.0 {
                (Some(0.0), Some(0.0))
            } else if *amplitude > 0.0 {
                (peak.map(|p| amplitude * p), Some(0.0))
            } else {
                (Some(0.0), peak.map(|p| -amplitude * p))
            }
        }
        PotentialForm::CounterexampleA { .. } => (Some(0.0), Some(0.25)),
        PotentialForm::Dilate { s, inner } => {
            let (p, n) = part_bounds(inner);
            (p.map(|v| v * s), n.map(|v| v * s))
        }
        PotentialForm::Scale { factor, inner } => {
            let (p, n) = part_bounds(inner);
            if *factor >= 0.0 {
                (p.map(|v| v * factor), n.map(|v| v * factor))
            } else {
                (n.map(|v| -v * factor), p.map(|v| -v * factor))
            }
        }
        PotentialForm::Sum { terms } => {
            let mut pos = Some(0.0);
            let mut neg = Some(0.0);
            for t in terms {
                let (p, n) = part_bounds(t);
                pos = pos.zip(p).map(|(a, b)| a + b);
                neg = neg.zip(n).map(|(a, b)| a + b);
            }
            (pos, neg)
        }
    }
}

/// `amp · r^exponent` on `lo ≤ r < hi` (signed amplitude).
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPiece {
    pub lo: f64,
    pub hi: f64,
    pub amp: f64,
    pub exponent: f64,
}

/// `|V|(z) = |Σ pieces(|z - center|)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub center: Vec<f64>,
    pub pieces: Vec<RadialPiece>,
}

/// One shell `[lo, hi)` between consecutive breakpoints, with the pieces
/// active on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Annulus {
    pub lo: f64,
    pub hi: f64,
    /// `(amp, exponent)` of each active piece.
    pub terms: Vec<(f64, f64)>,
}

impl Annulus {
    /// `Some(|v|)` when the annulus carries a constant value.
    pub fn constant_value(&self) -> Option<f64> {
        if self.terms.iter().all(|(_, p)| *p == 0.0) {
            Some(self.terms.iter().map(|(a, _)| a).sum::<f64>().abs())
        } else {
            None
        }
    }

    /// `∫_lo^hi |Σ a_i r^{p_i}| r^k dr` over a sub-interval of the annulus.
    ///
    /// Closed form when all amplitudes share a sign, quadrature otherwise.
    pub fn moment(&self, lo: f64, hi: f64, k: f64, q: &QuadratureSpec) -> Estimate {
        if !(hi > lo) {
            return Estimate::zero();
        }
        let coherent = self.terms.iter().all(|(a, _)| *a >= 0.0) || self.terms.iter().all(|(a, _)| *a <= 0.0);
        if coherent {
            let mut total = 0.0;
            for (a, p) in &self.terms {
                let e = p + k + 1.0;
                let piece = if e == 0.0 {
                    if lo == 0.0 || hi.is_infinite() {
                        f64::INFINITY
                    } else {
                        (hi / lo).ln()
                    }
                } else if (hi.is_infinite() && e > 0.0) || (lo == 0.0 && e < 0.0) {
                    f64::INFINITY
                } else {
                    (hi.powf(e) - lo.powf(e)) / e
                };
                total += a.abs() * piece;
            }
            return if total.is_infinite() {
                Estimate::infinite()
            } else {
                Estimate::exact(total)
            };
        }
        let f = |r: f64| self.abs_value(r) * r.powf(k);
        if hi.is_finite() {
            integrate(f, lo, hi, &[], q)
        } else {
            integrate_to_infinity(f, lo, lo.max(1.0), q)
        }
    }

    pub fn abs_value(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|(a, p)| if *p == 0.0 { *a } else { a * r.powf(*p) })
            .sum::<f64>()
            .abs()
    }
}

impl RadialProfile {
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .pieces
            .iter()
            .flat_map(|p| [p.lo, p.hi])
            .filter(|r| r.is_finite() && *r > 0.0)
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    pub fn annuli(&self) -> Vec<Annulus> {
        let mut edges = vec![0.0];
        edges.extend(self.breakpoints());
        edges.push(f64::INFINITY);
        edges
            .windows(2)
            .filter_map(|w| {
                let (lo, hi) = (w[0], w[1]);
                let terms: Vec<(f64, f64)> = self
                    .pieces
                    .iter()
                    .filter(|p| p.lo <= lo && p.hi >= hi && p.amp != 0.0)
                    .map(|p| (p.amp, p.exponent))
                    .collect();
                if terms.is_empty() {
                    None
                } else {
                    Some(Annulus { lo, hi, terms })
                }
            })
            .collect()
    }

    pub fn abs_value(&self, r: f64) -> f64 {
        self.pieces
            .iter()
            .filter(|p| r >= p.lo && r < p.hi)
            .map(|p| if p.exponent == 0.0 { p.amp } else { p.amp * r.powf(p.exponent) })
            .sum::<f64>()
            .abs()
    }

    /// Radius beyond which the profile vanishes (`∞` if it never does).
    pub fn outer_radius(&self) -> f64 {
        self.annuli().last().map_or(0.0, |a| a.hi)
    }

    fn sign(&self) -> Sign {
        self.pieces
            .iter()
            .map(|p| sign_of_value(p.amp))
            .fold(Sign::Zero, combine_sign)
    }
}

/// `amp · z₁^power` on `lo < z₁ ≤ hi`, `|z_⊥| ≤ width · √z₁` (signed amplitude).
#[derive(Debug, Clone, PartialEq)]
pub struct AxialPiece {
    pub lo: f64,
    pub hi: f64,
    pub amp: f64,
    pub power: f64,
    pub width: f64,
}

/// `|V|(z) = |Σ pieces(z₁, |z_⊥|)|` with the axis along `e₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxialProfile {
    pub pieces: Vec<AxialPiece>,
}

impl AxialProfile {
    pub fn z1_breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .pieces
            .iter()
            .flat_map(|p| [p.lo, p.hi])
            .filter(|v| v.is_finite())
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `(lo, hi)` of the union of the pieces' `z₁` ranges.
    pub fn z1_range(&self) -> (f64, f64) {
        let lo = self.pieces.iter().map(|p| p.lo).fold(f64::INFINITY, f64::min);
        let hi = self.pieces.iter().map(|p| p.hi).fold(0.0, f64::max);
        (lo, hi)
    }

    /// Cross-section at `z1`: `(ρ_lo, ρ_hi, |value|)` discs and rings.
    pub fn rings(&self, z1: f64) -> Vec<(f64, f64, f64)> {
        let mut active: Vec<(f64, f64)> = self
            .pieces
            .iter()
            .filter(|p| z1 > p.lo && z1 <= p.hi)
            .map(|p| (p.width * z1.sqrt(), p.amp * z1.powf(p.power)))
            .collect();
        if active.is_empty() {
            return vec![];
        }
        active.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut rings = Vec::with_capacity(active.len());
        let mut lo = 0.0;
        for (i, (edge, _)) in active.iter().enumerate() {
            if *edge > lo {
                let value: f64 = active[i..].iter().map(|(_, v)| v).sum();
                if value != 0.0 {
                    rings.push((lo, *edge, value.abs()));
                }
                lo = *edge;
            }
        }
        rings
    }

    pub fn abs_value(&self, z1: f64, rho: f64) -> f64 {
        self.pieces
            .iter()
            .filter(|p| z1 > p.lo && z1 <= p.hi && rho <= p.width * z1.sqrt())
            .map(|p| p.amp * z1.powf(p.power))
            .sum::<f64>()
            .abs()
    }

    fn sign(&self) -> Sign {
        self.pieces
            .iter()
            .map(|p| sign_of_value(p.amp))
            .fold(Sign::Zero, combine_sign)
    }
}

/// `|V|` in a form the symmetry-aware integrators understand.
#[derive(Debug, Clone, PartialEq)]
pub enum Reduction {
    Zero,
    Radial(RadialProfile),
    Axial(AxialProfile),
    /// `|V| = Σ |V_i|`, valid because every part has the same sign.
    Split(Vec<Reduction>),
}

#[derive(Debug, Clone)]
enum Atom {
    Constant(f64),
    Radial { center: Vec<f64>, piece: RadialPiece },
    Axial(AxialPiece),
}

// Flattens `factor · d_dilation(form)` into atoms.
fn atoms(form: &PotentialForm, factor: f64, dilation: f64, d: usize, out: &mut Vec<Atom>) {
    let root = dilation.sqrt();
    match form {
        PotentialForm::Constant { value } => {
            if *value != 0.0 && factor != 0.0 {
                out.push(Atom::Constant(factor * dilation * value));
            }
        }
        PotentialForm::BallIndicator {
            center,
            radius,
            amplitude,
        } => {
            if *amplitude != 0.0 && factor != 0.0 {
                out.push(Atom::Radial {
                    center: geom::scale(center, 1.0 / root),
                    piece: RadialPiece {
                        lo: 0.0,
                        hi: radius / root,
                        amp: factor * dilation * amplitude,
                        exponent: 0.0,
                    },
                });
            }
        }
        PotentialForm::RadialPower {
            exponent,
            inner_radius,
            outer_radius,
            amplitude,
        } => {
            if *amplitude != 0.0 && factor != 0.0 {
                // s · a (√s r)^p = a s^{1 + p/2} r^p
                out.push(Atom::Radial {
                    center: vec![0.0; d],
                    piece: RadialPiece {
                        lo: inner_radius / root,
                        hi: outer_radius.map_or(f64::INFINITY, |o| o / root),
                        amp: factor * amplitude * dilation.powf(1.0 + 0.5 * exponent),
                        exponent: *exponent,
                    },
                });
            }
        }
        PotentialForm::CounterexampleA { z1_max } => {
            if factor != 0.0 {
                // s · (-1/(√s z₁)) on √s z₁ > 4, √s ρ ≤ (√s z₁)^{1/2}
                out.push(Atom::Axial(AxialPiece {
                    lo: 4.0 / root,
                    hi: z1_max.map_or(f64::INFINITY, |m| m / root),
                    amp: -factor * root,
                    power: -1.0,
                    width: dilation.powf(-0.25),
                }));
            }
        }
        PotentialForm::Dilate { s, inner } => atoms(inner, factor, dilation * s, d, out),
        PotentialForm::Scale { factor: f, inner } => atoms(inner, factor * f, dilation, d, out),
        PotentialForm::Sum { terms } => {
            for t in terms {
                atoms(t, factor, dilation, d, out);
            }
        }
    }
}

fn reduction_sign(r: &Reduction) -> Sign {
    match r {
        Reduction::Zero => Sign::Zero,
        Reduction::Radial(p) => p.sign(),
        Reduction::Axial(p) => p.sign(),
        Reduction::Split(parts) => parts.iter().map(reduction_sign).fold(Sign::Zero, combine_sign),
    }
}

fn reduce(form: &PotentialForm, d: Dimension) -> Result<Reduction> {
    let mut list = Vec::new();
    atoms(form, 1.0, 1.0, d.as_usize(), &mut list);
    if list.is_empty() {
        return Ok(Reduction::Zero);
    }

    let constants: f64 = list
        .iter()
        .filter_map(|a| if let Atom::Constant(v) = a { Some(*v) } else { None })
        .sum();
    let mut radial_groups: Vec<RadialProfile> = Vec::new();
    let mut axial: Vec<AxialPiece> = Vec::new();
    for atom in list {
        match atom {
            Atom::Constant(_) => {}
            Atom::Radial { center, piece } => {
                match radial_groups.iter_mut().find(|g| same_point(&g.center, &center)) {
                    Some(g) => g.pieces.push(piece),
                    None => radial_groups.push(RadialProfile {
                        center,
                        pieces: vec![piece],
                    }),
                }
            }
            Atom::Axial(p) => axial.push(p),
        }
    }

    let constant_piece = RadialPiece {
        lo: 0.0,
        hi: f64::INFINITY,
        amp: constants,
        exponent: 0.0,
    };
    if axial.is_empty() && radial_groups.len() <= 1 {
        let mut profile = radial_groups.pop().unwrap_or(RadialProfile {
            center: vec![0.0; d.as_usize()],
            pieces: vec![],
        });
        if constants != 0.0 {
            profile.pieces.push(constant_piece);
        }
        return Ok(if profile.annuli().is_empty() {
            Reduction::Zero
        } else {
            Reduction::Radial(profile)
        });
    }

    let mut parts: Vec<Reduction> = radial_groups.into_iter().map(Reduction::Radial).collect();
    if !axial.is_empty() {
        parts.push(Reduction::Axial(AxialProfile { pieces: axial }));
    }
    if constants != 0.0 {
        parts.push(Reduction::Radial(RadialProfile {
            center: vec![0.0; d.as_usize()],
            pieces: vec![constant_piece],
        }));
    }
    if parts.len() == 1 {
        return Ok(parts.pop().expect("one part"));
    }
    let signs: Vec<Sign> = parts.iter().map(reduction_sign).collect();
    let coherent = signs.iter().all(|s| *s == Sign::Nonpositive || *s == Sign::Zero)
        || signs.iter().all(|s| *s == Sign::Nonnegative || *s == Sign::Zero);
    if coherent {
        Ok(Reduction::Split(parts))
    } else {
        Err(BridgeError::UnsupportedReduction(
            "sum of differently-centred terms with opposite signs".into(),
        ))
    }
}

/// `‖V‖_{d/2} = (∫ |V|^{d/2})^{2/d}`.
///
/// Radial profiles are integrated shell by shell in closed form where the
/// amplitudes share a sign; axial profiles reduce to a `z₁` quadrature.
/// Unbounded supports are decided from truncations, and a divergent
/// diagnosis returns the `+∞` sentinel.
pub fn lp_halfd_norm(v: &Potential, d: Dimension, q: &QuadratureSpec) -> Result<Estimate> {
    let red = v.reduce(d)?;
    let power = 0.5 * d.as_f64();
    let bounded = crate::functionals::is_bounded(&red);
    let integral = if bounded {
        halfd_integral(&red, d, q)?
    } else {
        let base = match &red {
            Reduction::Axial(p) => p.z1_breakpoints().last().copied().unwrap_or(4.0),
            Reduction::Radial(p) => p.breakpoints().last().copied().unwrap_or(1.0),
            _ => 1.0,
        }
        .max(1.0);
        let radii: Vec<f64> = (1..=5).map(|k| base * 10f64.powi(k)).collect();
        let values = radii
            .iter()
            .map(|&r| halfd_integral(&crate::functionals::truncate(&red, r), d, q))
            .collect::<Result<Vec<_>>>()?;
        let cfg = crate::functionals::growth_config(&values, q);
        match growth::diagnose(&radii, &values, &cfg)?.verdict {
            Verdict::Divergent => return Ok(Estimate::infinite()),
            Verdict::Convergent => halfd_integral(&red, d, q)?,
            Verdict::Inconclusive => {
                let mut est = halfd_integral(&red, d, q)?;
                est.status = est.status.max(Status::MaxSubdivisionsReached);
                est
            }
        }
    };
    if integral.is_infinite() {
        return Ok(integral);
    }
    let value = integral.value.powf(1.0 / power);
    let rel = if integral.value > 0.0 {
        integral.error_bound / integral.value / power
    } else {
        0.0
    };
    Ok(Estimate {
        value,
        error_bound: rel * value,
        status: integral.status,
    })
}

fn halfd_integral(red: &Reduction, d: Dimension, q: &QuadratureSpec) -> Result<Estimate> {
    let dd = d.as_f64();
    let power = 0.5 * dd;
    match red {
        Reduction::Zero => Ok(Estimate::zero()),
        Reduction::Radial(p) => {
            let mut total = Estimate::zero();
            for ann in p.annuli() {
                let part = if ann.terms.len() == 1 {
                    let (a, e) = ann.terms[0];
                    let powered = Annulus {
                        lo: ann.lo,
                        hi: ann.hi,
                        terms: vec![(a.abs().powf(power), e * power)],
                    };
                    powered.moment(ann.lo, ann.hi, dd - 1.0, q)
                } else {
                    let f = |r: f64| ann.abs_value(r).powf(power) * r.powf(dd - 1.0);
                    if ann.hi.is_finite() {
                        integrate(f, ann.lo, ann.hi, &[], q)
                    } else {
                        integrate_to_infinity(f, ann.lo, ann.lo.max(1.0), q)
                    }
                };
                total = total.plus(part);
            }
            Ok(total.scaled(sphere_area(d.get() - 1)).checked(q))
        }
        Reduction::Axial(p) => {
            let (lo, hi) = p.z1_range();
            let section = |z1: f64| -> f64 {
                p.rings(z1)
                    .iter()
                    .map(|&(a, b, v)| v.powf(power) * (b.powf(dd - 1.0) - a.powf(dd - 1.0)) / (dd - 1.0))
                    .sum::<f64>()
            };
            let mut breaks = p.z1_breakpoints();
            breaks.retain(|b| *b > lo && *b < hi);
            let est = if hi.is_finite() {
                integrate(section, lo, hi, &breaks, q)
            } else {
                let cut = breaks.last().copied().unwrap_or(lo).max(lo) * 2.0;
                let mut section = section;
                integrate(&mut section, lo, cut, &breaks, q).plus(integrate_to_infinity(&mut section, cut, cut, q))
            };
            Ok(est.scaled(sphere_area(d.get() - 2)).checked(q))
        }
        Reduction::Split(parts) => {
            if parts.len() == 1 {
                return halfd_integral(&parts[0], d, q);
            }
            Err(BridgeError::UnsupportedReduction(
                "the L^{d/2} norm of a sum of differently-centred terms is not additive".into(),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(d: u32) -> Dimension {
        Dimension::new(d).unwrap()
    }

    #[test]
    fn counterexample_membership() {
        let v = Potential::counterexample_a();
        assert!((v.evaluate(&[9.0, 2.0, 0.0, 0.0]).unwrap() + 1.0 / 9.0).abs() < 1e-16);
        assert_eq!(v.evaluate(&[9.0, 4.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(v.evaluate(&[3.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(v.sign(), Sign::Nonpositive);
        assert_eq!(v.support(), Support::Unbounded);
        assert_eq!(v.symmetry(), &Symmetry::Axial { axis: 0 });
    }

    #[test]
    fn dilated_ball_example() {
        let ball = Potential::ball(vec![0.0; 3], 1.0, -1.0).unwrap();
        let v = ball.dilate(4.0).unwrap();
        assert_eq!(v.evaluate(&[0.4, 0.0, 0.0]).unwrap(), -4.0);
        assert_eq!(v.evaluate(&[0.6, 0.0, 0.0]).unwrap(), 0.0);
        let big = Potential::ball(vec![0.0; 3], 2.0, -1.0).unwrap();
        assert_eq!(big.dilate(4.0).unwrap().support(), Support::Compact { radius: 1.0 });
        assert!(ball.dilate(0.0).is_err());
        assert!(ball.dilate(-1.0).is_err());
    }

    #[test]
    fn json_shapes() {
        let text = r#"{"type":"ball","center":[0,0,0],"radius":1.0,"amplitude":-1.0}"#;
        let v = Potential::from_json(text).unwrap();
        assert_eq!(v.sign(), Sign::Nonpositive);
        for text in [
            r#"{"type":"counterexample_a"}"#,
            r#"{"type":"dilate","s":4.0,"inner":{"type":"constant","value":-0.5}}"#,
            r#"{"type":"sum","terms":[{"type":"counterexample_a"},{"type":"ball","center":[1,0,0,0],"radius":0.5,"amplitude":-2}]}"#,
            r#"{"type":"radial_power","exponent":-1.0,"inner_radius":0.1,"outer_radius":10.0,"amplitude":-1.0}"#,
            r#"{"type":"constant","value":-0.5}"#,
        ] {
            let v = Potential::from_json(text).unwrap();
            let again = Potential::from_json(&v.to_json()).unwrap();
            assert_eq!(v, again);
        }
        assert!(Potential::from_json(r#"{"type":"blob"}"#).is_err());
        assert!(Potential::from_json(r#"{"type":"ball","center":[0],"radius":-1,"amplitude":1}"#).is_err());
    }

    #[test]
    fn sum_metadata() {
        let a = Potential::ball(vec![0.0; 3], 1.0, -1.0).unwrap();
        let b = Potential::ball(vec![2.0, 0.0, 0.0], 1.0, 3.0).unwrap();
        let s = Potential::sum(vec![a.clone(), b]).unwrap();
        assert_eq!(s.sign(), Sign::Mixed);
        assert_eq!(s.symmetry(), &Symmetry::Axial { axis: 0 });
        assert_eq!(s.support(), Support::Compact { radius: 3.0 });
        let c = Potential::ball(vec![0.0, 2.0, 0.0], 1.0, -1.0).unwrap();
        let s = Potential::sum(vec![Potential::counterexample_a(), c]).unwrap();
        assert_eq!(s.symmetry(), &Symmetry::General);
        assert_eq!(a.scaled(-2.0).unwrap().sign(), Sign::Nonnegative);
        assert_eq!(a.scaled(0.0).unwrap().sign(), Sign::Zero);
    }

    #[test]
    fn radial_power_needs_inner_radius_for_strong_singularities() {
        let v = Potential::radial_power(-2.5, 0.0, Some(1.0), -1.0).unwrap();
        assert!(v.check_dimension(dim(4)).is_err());
        assert!(v.check_dimension(dim(6)).is_ok());
        assert!(Potential::radial_power(-1.0, 2.0, Some(1.0), 1.0).is_err());
    }

    #[test]
    fn reduction_of_dilated_counterexample() {
        let v = Potential::counterexample_a().dilate(16.0).unwrap();
        let Reduction::Axial(profile) = v.reduce(dim(4)).unwrap() else {
            panic!("expected axial")
        };
        // pointwise agreement with direct evaluation
        for &(z1, rho) in &[(1.5, 0.5), (1.5, 0.7), (0.9, 0.1), (30.0, 2.7), (30.0, 2.8)] {
            let direct = v.evaluate(&[z1, rho, 0.0, 0.0]).unwrap().abs();
            assert!((profile.abs_value(z1, rho) - direct).abs() < 1e-14, "{z1} {rho}");
        }
    }

    #[test]
    fn reduction_merges_same_centre_and_splits_coherent_sums() {
        let a = Potential::ball(vec![0.0; 3], 1.0, -1.0).unwrap();
        let b = Potential::ball(vec![0.0; 3], 2.0, 0.5).unwrap();
        let Reduction::Radial(p) = Potential::sum(vec![a.clone(), b]).unwrap().reduce(dim(3)).unwrap() else {
            panic!()
        };
        assert_eq!(p.abs_value(0.5), 0.5);
        assert_eq!(p.abs_value(1.5), 0.5);
        assert_eq!(p.abs_value(2.5), 0.0);
        let far = Potential::ball(vec![0.0, 5.0, 0.0], 1.0, -2.0).unwrap();
        assert!(matches!(
            Potential::sum(vec![a.clone(), far.clone()]).unwrap().reduce(dim(3)).unwrap(),
            Reduction::Split(_)
        ));
        let opposite = far.scaled(-1.0).unwrap();
        assert!(Potential::sum(vec![a, opposite]).unwrap().reduce(dim(3)).is_err());
    }

    #[test]
    fn positive_part_bounds() {
        let v = Potential::ball(vec![0.0; 3], 1.0, 0.1).unwrap();
        assert_eq!(v.part_bounds(), (Some(0.1), Some(0.0)));
        let w = Potential::radial_power(-1.0, 0.0, Some(1.0), 1.0).unwrap();
        assert_eq!(w.part_bounds().0, None);
        assert_eq!(Potential::counterexample_a().part_bounds().0, Some(0.0));
    }
}
