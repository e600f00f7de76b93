//! Safeguarded Newton-bisection for monotone scalar equations.

/// Finds a root of an increasing function on `[lo, hi]` given
/// `f(lo) <= 0 <= f(hi)`. `eval` returns `(f(s), f'(s))`. Newton steps that
/// leave the bracket, or a non-finite derivative, fall back to bisection.
pub(crate) fn newton_bisect<F>(eval: F, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> f64
where
    F: Fn(f64) -> (f64, f64),
{
    debug_assert!(lo <= hi);
    let (flo, _) = eval(lo);
    if flo >= 0.0 {
        return lo;
    }
    let (fhi, _) = eval(hi);
    if fhi <= 0.0 {
        return hi;
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..max_iter {
        let (f, df) = eval(s);
        if f == 0.0 {
            return s;
        }
        if f < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - f / df;
        let next = if df.is_finite() && df > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - s).abs();
        s = next;
        if step <= tol || hi - lo <= tol {
            return s;
        }
    }
    s
}
