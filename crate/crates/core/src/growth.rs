//! Divergence diagnosis for improper integrals from a sequence of truncations.
//!
//! An adaptive integrator cannot tell slow logarithmic divergence from slow
//! convergence, so infinite norms are only ever claimed through a
//! [`GrowthDiagnosis`] built from truncated values `I(R_1), …, I(R_n)`.

use serde::{Deserialize, Serialize};

use crate::error::{BridgeError, Result};
use crate::quadrature::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthModel {
    /// `I(R) ≈ α + slope · ln R`
    LogFit,
    /// increments `dI/d ln R ≈ C · R^slope`
    PowerFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthDiagnosis {
    pub radii: Vec<f64>,
    #[serde(with = "crate::real::vec")]
    pub values: Vec<f64>,
    #[serde(with = "crate::real::vec")]
    pub errors: Vec<f64>,
    pub model: GrowthModel,
    #[serde(with = "crate::real")]
    pub slope: f64,
    #[serde(with = "crate::real")]
    pub r_squared: f64,
    /// Slope of the least-squares line `I ≈ α + s ln R`, whatever the model.
    #[serde(with = "crate::real")]
    pub log_slope: f64,
    #[serde(with = "crate::real")]
    pub log_r_squared: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthConfig {
    /// Increments below this are treated as zero.
    pub abs_tol: f64,
    /// Increment exponents within `±exponent_tol` count as logarithmic growth.
    pub exponent_tol: f64,
    pub min_r_squared: f64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            exponent_tol: 0.04,
            min_r_squared: 0.99,
        }
    }
}

/// Least-squares line `y ≈ a + b x`; returns `(b, a, r²)`.
///
/// A perfect fit (zero residual) has `r² = 1`, including constant data.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let scale = syy.max(y.iter().map(|v| v * v).sum::<f64>() * 1e-30);
    let r2 = if ss_res <= 1e-28 * scale || syy == 0.0 {
        1.0
    } else {
        1.0 - ss_res / syy
    };
    (slope, intercept, r2)
}

/// Evaluates `truncated` at each radius and diagnoses with default settings.
pub fn growth_diagnosis<F: FnMut(f64) -> Estimate>(
    truncated: F,
    radii: &[f64],
) -> Result<GrowthDiagnosis> {
    growth_diagnosis_with(truncated, radii, &GrowthConfig::default())
}

pub fn growth_diagnosis_with<F: FnMut(f64) -> Estimate>(
    mut truncated: F,
    radii: &[f64],
    cfg: &GrowthConfig,
) -> Result<GrowthDiagnosis> {
    check_radii(radii)?;
    let values: Vec<Estimate> = radii.iter().map(|&r| truncated(r)).collect();
    diagnose(radii, &values, cfg)
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.len() < 4 {
        return Err(BridgeError::TooFewRadii(radii.len()));
    }
    if radii[0] <= 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(BridgeError::InvalidParameter(
            "radii must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Diagnoses precomputed truncations.
pub fn diagnose(radii: &[f64], values: &[Estimate], cfg: &GrowthConfig) -> Result<GrowthDiagnosis> {
    check_radii(radii)?;
    if values.len() != radii.len() {
        return Err(BridgeError::InvalidParameter(format!(
            "{} radii but {} values",
            radii.len(),
            values.len()
        )));
    }
    let ln_r: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let v: Vec<f64> = values.iter().map(|e| e.value).collect();
    let err: Vec<f64> = values.iter().map(|e| e.error_bound).collect();
    let mut diag = GrowthDiagnosis {
        radii: radii.to_vec(),
        values: v.clone(),
        errors: err.clone(),
        model: GrowthModel::LogFit,
        slope: 0.0,
        r_squared: 0.0,
        log_slope: 0.0,
        log_r_squared: 0.0,
        verdict: Verdict::Inconclusive,
    };

    if v.iter().any(|x| x.is_infinite() && *x > 0.0) {
        diag.slope = f64::INFINITY;
        diag.log_slope = f64::INFINITY;
        diag.r_squared = 1.0;
        diag.log_r_squared = 1.0;
        diag.verdict = Verdict::Divergent;
        return Ok(diag);
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Ok(diag);
    }

    let (log_slope, _, log_r2) = linear_fit(&ln_r, &v);
    diag.slope = log_slope;
    diag.r_squared = log_r2;
    diag.log_slope = log_slope;
    diag.log_r_squared = log_r2;

    let n = v.len();
    let steps: Vec<f64> = (0..n - 1).map(|i| v[i + 1] - v[i]).collect();
    let noise: Vec<f64> = (0..n - 1)
        .map(|i| cfg.abs_tol.max(4.0 * (err[i] + err[i + 1])))
        .collect();
    let negligible = |i: usize| steps[i].abs() <= noise[i];

    if negligible(n - 2) && negligible(n - 3) {
        diag.verdict = Verdict::Convergent;
        return Ok(diag);
    }

    // power model on the increments per unit of ln R; increments lost in
    // the noise may only trail the resolved ones
    if (0..n - 1).any(|i| steps[i] < -noise[i]) {
        return Ok(diag);
    }
    let usable: Vec<usize> = (0..n - 1).take_while(|&i| steps[i] > noise[i]).collect();
    let trailing_noise = usable.len() < n - 1;
    if usable.len() < 3 || (trailing_noise && (usable.len()..n - 1).any(|i| !negligible(i))) {
        return Ok(diag);
    }
    let mid: Vec<f64> = usable.iter().map(|&i| 0.5 * (ln_r[i] + ln_r[i + 1])).collect();
    let rate: Vec<f64> = usable
        .iter()
        .map(|&i| (steps[i] / (ln_r[i + 1] - ln_r[i])).ln())
        .collect();
    let (p, _, p_r2) = linear_fit(&mid, &rate);

    if p.abs() <= cfg.exponent_tol {
        if log_slope > 0.0 && log_r2 >= cfg.min_r_squared && !trailing_noise {
            diag.verdict = Verdict::Divergent;
        }
    } else if p > 0.0 {
        diag.model = GrowthModel::PowerFit;
        diag.slope = p;
        diag.r_squared = p_r2;
        if p_r2 >= cfg.min_r_squared && !trailing_noise {
            diag.verdict = Verdict::Divergent;
        }
    } else {
        diag.model = GrowthModel::PowerFit;
        diag.slope = p;
        diag.r_squared = p_r2;
        if p_r2 >= cfg.min_r_squared {
            diag.verdict = Verdict::Convergent;
        }
    }
    Ok(diag)
}

/// Log-spaced radii `lo, …, hi` with `n ≥ 2` points.
pub fn log_radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radii() -> Vec<f64> {
        vec![1e2, 1e3, 1e4, 1e5]
    }

    #[test]
    fn constant_values_converge() {
        let d = growth_diagnosis(|_| Estimate::exact(5.0), &radii()).unwrap();
        assert_eq!(d.verdict, Verdict::Convergent);
        assert_eq!(d.slope, 0.0);
    }

    #[test]
    fn exact_log_growth_diverges() {
        let d = growth_diagnosis(|r| Estimate::exact(2.0 * r.ln()), &radii()).unwrap();
        assert_eq!(d.verdict, Verdict::Divergent);
        assert_eq!(d.model, GrowthModel::LogFit);
        assert!((d.slope - 2.0).abs() < 1e-12);
        assert!((d.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_growth_and_decay() {
        let rs = log_radii(1e2, 1e8, 7);
        let up = growth_diagnosis(|r| Estimate::exact(r.powf(0.1)), &rs).unwrap();
        assert_eq!(up.verdict, Verdict::Divergent);
        assert!((up.slope - 0.1).abs() < 1e-6);
        let down = growth_diagnosis(|r| Estimate::exact(3.0 - r.powf(-0.1)), &rs).unwrap();
        assert_eq!(down.verdict, Verdict::Convergent);
        assert!((down.slope + 0.1).abs() < 1e-6);
    }

    #[test]
    fn decay_into_noise_converges() {
        let rs = log_radii(1e2, 1e6, 5);
        let vals: Vec<Estimate> = rs
            .iter()
            .enumerate()
            .map(|(i, r)| Estimate {
                value: 1.0 - r.powf(-0.5) + if i == 4 { 1e-4 } else { 0.0 },
                error_bound: 5e-4,
                status: crate::quadrature::Status::Converged,
            })
            .collect();
        let d = diagnose(&rs, &vals, &GrowthConfig::default()).unwrap();
        assert_eq!(d.verdict, Verdict::Convergent, "{d:?}");
    }

    #[test]
    fn noisy_values_are_inconclusive() {
        let vals = [1.0, 3.0, 2.0, 4.0, 3.5];
        let rs = log_radii(1.0, 1e4, 5);
        let mut it = vals.iter();
        let d = growth_diagnosis(|_| Estimate::exact(*it.next().unwrap()), &rs).unwrap();
        assert_eq!(d.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn rejects_short_or_unsorted_radii() {
        assert!(matches!(
            growth_diagnosis(|_| Estimate::zero(), &[1.0, 2.0, 3.0]),
            Err(BridgeError::TooFewRadii(3))
        ));
        assert!(growth_diagnosis(|_| Estimate::zero(), &[1.0, 3.0, 2.0, 4.0]).is_err());
    }
}
