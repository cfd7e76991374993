//! Brownian-bridge Monte Carlo for `G/g` and `S(V)`.
//!
//! Path `i` draws from a ChaCha8 stream selected by `i`, so the estimate
//! is bit-identical for a fixed seed regardless of the number of threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BridgeError, Result};
use crate::functionals::BridgeSpec;
use crate::potentials::{Potential, PotentialForm};

/// Largest time integral whose exponential is still comfortably finite.
const EXP_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(paths: usize, steps: usize, seed: u64) -> Result<Self> {
        let cfg = Self { paths, steps, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.paths < 1 {
            return Err(BridgeError::InvalidParameter("paths must be at least 1".into()));
        }
        if self.steps < 2 {
            return Err(BridgeError::InvalidParameter("steps must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    #[serde(with = "crate::real")]
    pub mean: f64,
    /// Infinite for a single path.
    #[serde(with = "crate::real")]
    pub std_error: f64,
    pub paths: usize,
}

impl McEstimate {
    fn deterministic(value: f64, paths: usize) -> Self {
        Self {
            mean: value,
            std_error: 0.0,
            paths,
        }
    }
}

/// The generator used for path `index`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A bridge path on the uniform grid `s_k = k t / steps`, `k = 0..=steps`,
/// by sequential conditional sampling.
pub fn sample_bridge<R: Rng + ?Sized>(spec: &BridgeSpec, steps: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut path = Vec::with_capacity(steps + 1);
    walk_bridge(spec, steps, rng, |z| path.push(z.to_vec()));
    path
}

fn walk_bridge<R: Rng + ?Sized, F: FnMut(&[f64])>(spec: &BridgeSpec, steps: usize, rng: &mut R, mut visit: F) {
    let h = spec.t / steps as f64;
    let mut z = spec.x.clone();
    visit(&z);
    for k in 1..steps {
        let remaining = spec.t - (k - 1) as f64 * h;
        let frac = h / remaining;
        let sd = (2.0 * h * (remaining - h) / remaining).max(0.0).sqrt();
        for (zi, yi) in z.iter_mut().zip(&spec.y) {
            let xi: f64 = rng.sample(StandardNormal);
            *zi += frac * (yi - *zi) + sd * xi;
        }
        visit(&z);
    }
    visit(&spec.y);
}

/// Trapezoidal `∫_0^t φ(V(path_s)) ds` along one path.
fn path_integral<R: Rng + ?Sized>(
    v: &Potential,
    spec: &BridgeSpec,
    steps: usize,
    rng: &mut R,
    phi: fn(f64) -> f64,
) -> f64 {
    let mut acc = 0.0;
    let mut k = 0;
    walk_bridge(spec, steps, rng, |z| {
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
        acc += w * phi(v.evaluate_unchecked(z));
        k += 1;
    });
    acc * (spec.t / steps as f64)
}

/// Value of `V` if it is the same everywhere.
fn constant_value(form: &PotentialForm) -> Option<f64> {
    match form {
        PotentialForm::Constant { value } => Some(*value),
        PotentialForm::Scale { factor, inner } => constant_value(inner).map(|c| factor * c),
        PotentialForm::Dilate { s, inner } => constant_value(inner).map(|c| s * c),
        PotentialForm::Sum { terms } => terms.iter().map(constant_value).sum(),
        _ => None,
    }
}

fn prepare(v: &Potential, spec: &BridgeSpec, mc: &McConfig) -> Result<()> {
    mc.validate()?;
    let d = spec.dimension()?;
    v.check_dimension(d)
}

fn summarize(samples: &[f64]) -> McEstimate {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let std_error = if n > 1 {
        let ss: f64 = samples.iter().map(|s| (s - mean) * (s - mean)).sum();
        (ss / (n - 1) as f64 / n as f64).sqrt()
    } else {
        f64::INFINITY
    };
    McEstimate {
        mean,
        std_error,
        paths: n,
    }
}

fn per_path<F: Fn(&mut ChaCha8Rng) -> f64 + Sync>(mc: &McConfig, f: F) -> Vec<f64> {
    (0..mc.paths)
        .into_par_iter()
        .map(|i| f(&mut path_rng(mc.seed, i as u64)))
        .collect()
}

/// Bridge expectation of `exp(∫_0^t V(path_s) ds)`, an estimate of `G/g`.
pub fn g_ratio_mc(v: &Potential, spec: &BridgeSpec, mc: &McConfig) -> Result<McEstimate> {
    prepare(v, spec, mc)?;
    let upper = v.part_bounds().0.ok_or(BridgeError::UnboundedPositivePart)?;
    if upper * spec.t > EXP_LIMIT {
        return Err(BridgeError::Overflow(upper * spec.t));
    }
    if let Some(c) = constant_value(v.form()) {
        return Ok(McEstimate::deterministic((c * spec.t).exp(), mc.paths));
    }
    let samples = per_path(mc, |rng| path_integral(v, spec, mc.steps, rng, |x| x).exp());
    Ok(summarize(&samples))
}

/// Bridge expectation of `∫_0^t |V(path_s)| ds`, an estimate of `S(V, t, x, y)`.
pub fn s_mc(v: &Potential, spec: &BridgeSpec, mc: &McConfig) -> Result<McEstimate> {
    prepare(v, spec, mc)?;
    if v.part_bounds().0.is_none() {
        return Err(BridgeError::UnboundedPositivePart);
    }
    if let Some(c) = constant_value(v.form()) {
        return Ok(McEstimate::deterministic(c.abs() * spec.t, mc.paths));
    }
    let samples = per_path(mc, |rng| path_integral(v, spec, mc.steps, rng, f64::abs));
    Ok(summarize(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec3() -> BridgeSpec {
        BridgeSpec::new(1.0, vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn endpoints_are_pinned() {
        let spec = BridgeSpec::new(2.5, vec![0.3, -1.0, 2.0], vec![1.0, 4.0, -0.5]).unwrap();
        let path = sample_bridge(&spec, 16, &mut path_rng(7, 0));
        assert_eq!(path.len(), 17);
        assert_eq!(path[0], spec.x);
        assert_eq!(path[16], spec.y);
    }

    #[test]
    fn midpoint_marginal() {
        let spec = BridgeSpec::new(2.0, vec![0.0, 0.0, 0.0], vec![2.0, -2.0, 0.0]).unwrap();
        let n = 20_000;
        let mids: Vec<f64> = (0..n)
            .map(|i| sample_bridge(&spec, 8, &mut path_rng(11, i))[4][0])
            .collect();
        let mean = mids.iter().sum::<f64>() / n as f64;
        let var = mids.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // 2·(t/2)·(t/2)/t = t/2
        assert!((mean - 1.0).abs() < 4.0 * (var / n as f64).sqrt());
        assert!((var / 1.0 - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn constant_potentials_are_exact() {
        let spec = spec3();
        let mc = McConfig::new(100, 8, 1).unwrap();
        let zero = g_ratio_mc(&Potential::constant(0.0).unwrap(), &spec, &mc).unwrap();
        assert_eq!((zero.mean, zero.std_error), (1.0, 0.0));
        let g = g_ratio_mc(&Potential::constant(-0.7).unwrap(), &spec, &mc).unwrap();
        assert_eq!(g.mean, (-0.7f64).exp());
        let spec2 = BridgeSpec::new(2.0, spec.x.clone(), spec.y.clone()).unwrap();
        let s = s_mc(&Potential::constant(-0.7).unwrap(), &spec2, &mc).unwrap();
        assert_eq!((s.mean, s.std_error), (1.4, 0.0));
    }

    #[test]
    fn rejects_unbounded_positive_part_and_overflow() {
        let spec = spec3();
        let mc = McConfig::new(10, 8, 1).unwrap();
        let sing = Potential::radial_power(-1.0, 0.0, Some(1.0), 1.0).unwrap();
        assert!(matches!(g_ratio_mc(&sing, &spec, &mc), Err(BridgeError::UnboundedPositivePart)));
        let big = Potential::constant(1000.0).unwrap();
        assert!(matches!(g_ratio_mc(&big, &spec, &mc), Err(BridgeError::Overflow(_))));
        assert!(McConfig::new(0, 8, 1).is_err());
        assert!(McConfig::new(1, 1, 1).is_err());
    }

    #[test]
    fn reproducible() {
        let v = Potential::ball(vec![0.0; 3], 1.0, -1.0).unwrap();
        let mc = McConfig::new(500, 32, 42).unwrap();
        let a = s_mc(&v, &spec3(), &mc).unwrap();
        let b = s_mc(&v, &spec3(), &mc).unwrap();
        assert_eq!(a, b);
        let c = s_mc(&v, &spec3(), &McConfig { seed: 43, ..mc }).unwrap();
        assert_ne!(a.mean, c.mean);
    }
}
