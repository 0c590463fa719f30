//! Simpson quadrature. The adaptive rule serves as an independent oracle for
//! the closed forms; the composite rule backs the tensor-product residuals.

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let c = 0.5 * (a + b);
    let fc = f(c);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    refine(&f, a, b, fa, fb, fc, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let d = 0.5 * (a + c);
    let e = 0.5 * (c + b);
    let fd = f(d);
    let fe = f(e);
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, c, fa, fc, fd, left, 0.5 * tol, depth - 1)
        + refine(f, c, b, fc, fb, fe, right, 0.5 * tol, depth - 1)
}

/// Composite Simpson weights for `intervals` (even) equal panels of width `h`.
pub fn simpson_weights(intervals: usize, h: f64) -> Vec<f64> {
    assert!(
        intervals >= 2 && intervals.is_multiple_of(2),
        "Simpson needs an even panel count"
    );
    (0..=intervals)
        .map(|i| {
            let w = if i == 0 || i == intervals {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

/// Composite Simpson integration with a fixed (even) number of panels.
pub fn composite_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    simpson_weights(intervals, h)
        .iter()
        .enumerate()
        .map(|(i, w)| w * f(a + i as f64 * h))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let v = composite_simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 4);
        assert!((v - 3.75).abs() < 1e-13);
        let v = adaptive_simpson(|x| x * x, 0.0, 3.0, 1e-12);
        assert!((v - 9.0).abs() < 1e-12);
    }

    #[test]
    fn handles_endpoint_singular_derivative() {
        // integral of sqrt(1 - x^2) over [-1, 1] is pi / 2
        let v = adaptive_simpson(|x: f64| (1.0 - x * x).max(0.0).sqrt(), -1.0, 1.0, 1e-12);
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }
}
