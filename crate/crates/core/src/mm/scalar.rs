//! Positive roots of the scalar optimality conditions of the dual update.

/// The unique `x > 0` with `4 lambda x^3 + 2 e x - 1 = 0`.
///
/// The cubic is `-1` at zero and convex on `x > 0`, so Newton iterations
/// started right of the root decrease monotonically onto it; a bisection
/// step is taken whenever Newton leaves the current bracket.
pub fn scalar_cubic_root(e: f64, lambda: f64) -> f64 {
    assert!(lambda > 0.0, "lambda must be positive, got {lambda}");
    let f = |x: f64| (4.0 * lambda * x * x + 2.0 * e) * x - 1.0;
    let df = |x: f64| 12.0 * lambda * x * x + 2.0 * e;

    let mut lo = 0.0_f64;
    let mut hi = f64::max(
        1.0,
        (0.25 / lambda).cbrt() + (f64::max(0.0, -e) / (2.0 * lambda)).sqrt(),
    );
    let mut x = hi;
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = df(x);
        let mut next = x - fx / d;
        if !(d > 0.0) || !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * next || hi - lo <= 4.0 * f64::EPSILON * hi {
            return next;
        }
        x = next;
    }
    x
}

/// The positive root `X = (-e + sqrt(e^2 + 8 lambda)) / (4 lambda)` of
/// `2 lambda X^2 + e X - 1 = 0`, evaluated without cancellation.
pub fn scalar_quadratic_root(e: f64, lambda: f64) -> f64 {
    assert!(lambda > 0.0, "lambda must be positive, got {lambda}");
    let s = e.hypot((8.0 * lambda).sqrt());
    if e > 0.0 {
        2.0 / (e + s)
    } else {
        (s - e) / (4.0 * lambda)
    }
}
