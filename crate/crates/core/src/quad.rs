//! Small quadrature toolbox: adaptive Simpson on smooth integrands and
//! composite Gauss-Legendre on graded meshes for endpoint singularities.

use crate::error::{Error, Result};

/// 7-point Gauss-Legendre nodes on [-1, 1].
const GL7_NODES: [f64; 7] = [
    -0.949107912342758524526190,
    -0.741531185599394439863865,
    -0.405845151377397166906606,
    0.0,
    0.405845151377397166906606,
    0.741531185599394439863865,
    0.949107912342758524526190,
];

const GL7_WEIGHTS: [f64; 7] = [
    0.129484966168869693270611,
    0.279705391489276667901468,
    0.381830050505118944950369,
    0.417959183673469387755102,
    0.381830050505118944950369,
    0.279705391489276667901468,
    0.129484966168869693270611,
];

/// Integrate `f` over a single cell [a, b] with 7-point Gauss-Legendre.
fn gauss7<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL7_NODES.iter().zip(GL7_WEIGHTS.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Composite Gauss-Legendre over an explicit partition of [a, b].
pub fn composite_gauss<F: Fn(f64) -> f64>(f: &F, partition: &[f64]) -> f64 {
    partition
        .windows(2)
        .map(|w| gauss7(f, w[0], w[1]))
        .sum()
}

/// Partition of [a, b] with `n` cells clustered toward both endpoints.
///
/// Uses the map xi -> xi^r / (xi^r + (1 - xi)^r), which compresses cells
/// near 0 and 1 with grading exponent `r`.
pub fn double_graded_partition(a: f64, b: f64, n: usize, r: f64) -> Vec<f64> {
    let mut pts = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let xi = i as f64 / n as f64;
        let num = xi.powf(r);
        let den = num + (1.0 - xi).powf(r);
        let s = if den == 0.0 { 0.0 } else { num / den };
        pts.push(a + (b - a) * s);
    }
    pts
}

/// Integrate a smooth integrand on a graded mesh, doubling the cell count
/// until two successive levels agree to `tol` (absolute).
pub fn graded_adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    grading: f64,
    tol: f64,
    max_cells: usize,
) -> Result<f64> {
    let mut n = 16;
    let mut prev = composite_gauss(f, &double_graded_partition(a, b, n, grading));
    loop {
        n *= 2;
        let cur = composite_gauss(f, &double_graded_partition(a, b, n, grading));
        if (cur - prev).abs() <= tol {
            return Ok(cur);
        }
        if n >= max_cells {
            return Err(Error::QuadratureFailure(format!(
                "graded mesh refinement stalled at {} cells (last change {:.3e})",
                n,
                (cur - prev).abs()
            )));
        }
        prev = cur;
    }
}

/// Adaptive Simpson integration to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(Error::QuadratureFailure(format!(
                "adaptive Simpson recursion limit reached on [{a:.6e}, {b:.6e}]"
            )));
        }
        let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
        let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
        Ok(l + r)
    }

    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}
