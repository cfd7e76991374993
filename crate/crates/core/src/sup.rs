//! Empirical suprema over boxes: a coarse grid followed by multistart
//! Nelder–Mead refinement.
//!
//! The result is a lower bound on the true supremum. When the best grid
//! point sits on the box boundary the result says so through
//! [`SupResult::boundary_hit`], and callers should follow up with a
//! growth diagnosis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BridgeError, Result};

/// A box with optional logarithmic spacing per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub log_scale: Vec<bool>,
}

impl SupDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, log_scale: Vec<bool>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() != log_scale.len() {
            return Err(BridgeError::InvalidParameter(format!(
                "domain arity mismatch: {} lower, {} upper, {} scale flags",
                lower.len(),
                upper.len(),
                log_scale.len()
            )));
        }
        for i in 0..lower.len() {
            let (lo, hi) = (lower[i], upper[i]);
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(BridgeError::InvalidParameter(format!(
                    "coordinate {i}: need finite lower <= upper, got [{lo}, {hi}]"
                )));
            }
            if log_scale[i] && !(lo > 0.0) {
                return Err(BridgeError::InvalidParameter(format!(
                    "coordinate {i}: log spacing needs a positive lower bound, got {lo}"
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            log_scale,
        })
    }

    /// All coordinates log-spaced.
    pub fn log_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = lower.len();
        Self::new(lower, upper, vec![true; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Maps the unit cube onto the box.
    pub fn point(&self, u: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let (lo, hi) = (self.lower[i], self.upper[i]);
                let w = u[i].clamp(0.0, 1.0);
                if w == 0.0 {
                    lo
                } else if w == 1.0 {
                    hi
                } else if self.log_scale[i] {
                    (lo.ln() + w * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + w * (hi - lo)
                }
            })
            .collect()
    }

    fn degenerate(&self, i: usize) -> bool {
        self.lower[i] == self.upper[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupStrategy {
    /// Grid points per coordinate.
    pub grid_density: usize,
    /// Best grid points used as simplex starts.
    pub multistarts: usize,
    /// Nelder–Mead iterations per start.
    pub local_refinement: usize,
}

impl Default for SupStrategy {
    fn default() -> Self {
        Self {
            grid_density: 9,
            multistarts: 3,
            local_refinement: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub stage: String,
    pub arg: Vec<f64>,
    #[serde(with = "crate::real")]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupResult {
    #[serde(with = "crate::real")]
    pub value: f64,
    pub arg: Vec<f64>,
    pub evaluations: usize,
    pub strategy_trace: Vec<TraceEntry>,
    /// The best grid point lies on the boundary of a non-degenerate coordinate.
    pub boundary_hit: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Best probed value of `objective` over `domain`.
///
/// Objective values of `NaN` count as `-∞`.
pub fn sup_search<F>(objective: F, domain: &SupDomain, strategy: &SupStrategy) -> Result<SupResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = domain.dim();
    if strategy.grid_density < 1 {
        return Err(BridgeError::InvalidParameter(
            "grid_density must be at least 1".into(),
        ));
    }
    let m = strategy.grid_density;
    let total = m
        .checked_pow(n as u32)
        .filter(|&t| t <= 10_000_000)
        .ok_or_else(|| BridgeError::InvalidParameter(format!("grid of {m}^{n} points is too large")))?;

    let coord = |k: usize| if m == 1 { 0.5 } else { k as f64 / (m - 1) as f64 };
    let index = |mut flat: usize| -> Vec<usize> {
        let mut idx = vec![0; n];
        for slot in idx.iter_mut().rev() {
            *slot = flat % m;
            flat /= m;
        }
        idx
    };

    let grid: Vec<(Vec<usize>, Vec<f64>, f64)> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let idx = index(flat);
            let u: Vec<f64> = idx.iter().map(|&k| coord(k)).collect();
            let p = domain.point(&u);
            let v = sanitize(objective(&p));
            (idx, u, v)
        })
        .collect();
    let mut evaluations = total;

    // stable sort keeps the canonical grid order among ties
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| grid[b].2.total_cmp(&grid[a].2));

    let (best_idx, best_u, best_v) = &grid[order[0]];
    let boundary_hit = m > 1
        && (0..n).any(|i| !domain.degenerate(i) && (best_idx[i] == 0 || best_idx[i] == m - 1));
    let mut trace = vec![TraceEntry {
        stage: format!("grid {m}^{n}"),
        arg: domain.point(best_u),
        value: *best_v,
    }];
    let mut best = (domain.point(best_u), *best_v);

    let starts: Vec<Vec<f64>> = order
        .iter()
        .take(strategy.multistarts.min(total))
        .filter(|&&i| grid[i].2 > f64::NEG_INFINITY)
        .map(|&i| grid[i].1.clone())
        .collect();
    let step = if m > 1 { 0.5 / (m - 1) as f64 } else { 0.25 };
    let refined: Vec<(Vec<f64>, f64, usize)> = starts
        .par_iter()
        .map(|u0| nelder_mead(&|u: &[f64]| sanitize(objective(&domain.point(u))), u0, step, strategy.local_refinement))
        .collect();
    for (k, (u, v, evals)) in refined.into_iter().enumerate() {
        evaluations += evals;
        let arg = domain.point(&u);
        trace.push(TraceEntry {
            stage: format!("simplex {k}"),
            arg: arg.clone(),
            value: v,
        });
        if v > best.1 {
            best = (arg, v);
        }
    }

    Ok(SupResult {
        value: best.1,
        arg: best.0,
        evaluations,
        strategy_trace: trace,
        boundary_hit,
    })
}

/// Maximises `f` over the unit cube starting from `u0`; returns the best
/// point, its value, and the number of evaluations.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, u0: &[f64], step: f64, iterations: usize) -> (Vec<f64>, f64, usize) {
    let n = u0.len();
    let clamp = |u: Vec<f64>| -> Vec<f64> { u.into_iter().map(|x| x.clamp(0.0, 1.0)).collect() };
    let mut evals = 0;
    let mut eval = |u: &[f64]| {
        evals += 1;
        f(u)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(u0);
    simplex.push((u0.to_vec(), v0));
    for i in 0..n {
        let mut u = u0.to_vec();
        u[i] += if u[i] + step <= 1.0 { step } else { -step };
        let u = clamp(u);
        let v = eval(&u);
        simplex.push((u, v));
    }

    for _ in 0..iterations {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let spread = simplex[0].1 - simplex[n].1;
        if spread.abs() <= 1e-12 * simplex[0].1.abs() && simplex[0].1.is_finite() {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64)
            .collect();
        let towards = |k: f64| -> Vec<f64> {
            clamp(
                (0..n)
                    .map(|j| centroid[j] + k * (simplex[n].0[j] - centroid[j]))
                    .collect(),
            )
        };
        let xr = towards(-1.0);
        let fr = eval(&xr);
        if fr > simplex[0].1 {
            let xe = towards(-2.0);
            let fe = eval(&xe);
            simplex[n] = if fe > fr { (xe, fe) } else { (xr, fr) };
        } else if fr > simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = if fr > simplex[n].1 {
                towards(-0.5)
            } else {
                towards(0.5)
            };
            let fc = eval(&xc);
            if fc > simplex[n].1.max(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    let u: Vec<f64> = (0..n).map(|j| best[j] + 0.5 * (p.0[j] - best[j])).collect();
                    p.1 = eval(&u);
                    p.0 = u;
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (u, v) = simplex.swap_remove(0);
    (u, v, evals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_objective() {
        let dom = SupDomain::log_box(vec![1e-3, 1e-3], vec![1e6, 1e6]).unwrap();
        let r = sup_search(|_| 7.0, &dom, &SupStrategy::default()).unwrap();
        assert_eq!(r.value, 7.0);
        assert!(r.strategy_trace.iter().all(|e| e.value <= r.value));
    }

    #[test]
    fn refines_interior_peak() {
        let dom = SupDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![false, false]).unwrap();
        let f = |p: &[f64]| -((p[0] - 0.123).powi(2) + (p[1] + 0.456).powi(2));
        let r = sup_search(f, &dom, &SupStrategy {
            grid_density: 5,
            multistarts: 2,
            local_refinement: 200,
        })
        .unwrap();
        assert!(r.value > -1e-8, "{r:?}");
        assert!(!r.boundary_hit);
        assert!((r.arg[0] - 0.123).abs() < 1e-3);
    }

    #[test]
    fn boundary_maximum_is_flagged() {
        let dom = SupDomain::log_box(vec![1.0], vec![1e4]).unwrap();
        let r = sup_search(|p| p[0].ln(), &dom, &SupStrategy::default()).unwrap();
        assert!(r.boundary_hit);
        assert_eq!(r.arg, vec![1e4]);
    }

    #[test]
    fn nan_objective_is_ignored() {
        let dom = SupDomain::new(vec![0.0], vec![1.0], vec![false]).unwrap();
        let r = sup_search(|p| if p[0] < 0.5 { f64::NAN } else { p[0] }, &dom, &SupStrategy::default()).unwrap();
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn arity_mismatch_rejected() {
        assert!(SupDomain::new(vec![0.0], vec![1.0, 2.0], vec![false]).is_err());
        assert!(SupDomain::log_box(vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn deterministic_across_runs() {
        let dom = SupDomain::new(vec![0.0, 0.0], vec![3.0, 3.0], vec![false, false]).unwrap();
        let f = |p: &[f64]| (p[0] * 1.7).sin() * (p[1] * 2.3).cos();
        let a = sup_search(f, &dom, &SupStrategy::default()).unwrap();
        let b = sup_search(f, &dom, &SupStrategy::default()).unwrap();
        assert_eq!(a, b);
    }
}
