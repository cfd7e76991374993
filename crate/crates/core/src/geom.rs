//! Small vector helpers on `&[f64]` points.

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    dist2(x, y).sqrt()
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn scale(x: &[f64], s: f64) -> Vec<f64> {
    x.iter().map(|a| a * s).collect()
}

/// `x + t (y - x)`
pub fn lerp(x: &[f64], y: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + t * (b - a)).collect()
}

pub fn unit(d: usize, axis: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[axis] = 1.0;
    e
}

/// `|x||y| - x·y` without cancellation when `x` and `y` are nearly aligned.
///
/// For `x·y > 0` this uses Lagrange's identity
/// `|x|²|y|² - (x·y)² = Σ_{i<j} (x_i y_j - x_j y_i)²`.
pub fn misalignment(x: &[f64], y: &[f64]) -> f64 {
    let nx = norm(x);
    let ny = norm(y);
    let p = dot(x, y);
    if p <= 0.0 {
        return nx * ny - p;
    }
    let mut cross = 0.0;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let c = x[i] * y[j] - x[j] * y[i];
            cross += c * c;
        }
    }
    cross / (nx * ny + p)
}

/// Completes `e1` (unit) to an orthonormal pair using the direction of `w`.
/// Returns `(w1, w2, e2)` with `w = w1 e1 + w2 e2`, `w2 >= 0`.
pub fn plane_frame(e1: &[f64], w: &[f64]) -> (f64, f64, Vec<f64>) {
    let w1 = dot(w, e1);
    let perp: Vec<f64> = w.iter().zip(e1).map(|(a, b)| a - w1 * b).collect();
    let w2 = norm(&perp);
    let tiny = 1e-14 * norm(w).max(f64::MIN_POSITIVE);
    if w2 > tiny {
        (w1, w2, scale(&perp, 1.0 / w2))
    } else {
        // any unit vector orthogonal to e1
        let d = e1.len();
        let k = (0..d)
            .min_by(|&i, &j| e1[i].abs().total_cmp(&e1[j].abs()))
            .unwrap_or(0);
        let mut v = unit(d, k);
        let c = dot(&v, e1);
        for (vi, ei) in v.iter_mut().zip(e1) {
            *vi -= c * ei;
        }
        let n = norm(&v);
        (w1, 0.0, scale(&v, 1.0 / n))
    }
}
