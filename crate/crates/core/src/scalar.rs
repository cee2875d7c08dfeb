//! Safeguarded scalar root finding for increasing functions.

/// Root of an increasing `f` inside `[lo, hi]`, assuming `f(lo) <= 0 <= f(hi)`.
///
/// `f` returns `(value, derivative)`. Newton steps are taken when they stay
/// inside the current bracket, bisection otherwise; the endpoints themselves
/// are never evaluated, so open intervals with singular ends are fine.
pub fn increasing_root(
    f: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    guess: Option<f64>,
    max_iter: usize,
) -> Option<f64> {
    if hi <= lo {
        return Some(lo);
    }
    let mut x = match guess {
        Some(g) if g > lo && g < hi => g,
        _ => 0.5 * (lo + hi),
    };
    for _ in 0..max_iter {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Some(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let tol = 2.0 * f64::EPSILON * next.abs().max(1e-300);
        if (next - x).abs() <= tol || hi - lo <= tol {
            return Some(next);
        }
        x = next;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_root() {
        let r = increasing_root(|x| (x * x * x - 2.0, 3.0 * x * x), 0.0, 2.0, None, 200).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-15);
    }

    #[test]
    fn open_interval_with_singular_ends() {
        // atanh(x) = 3 on (-1, 1)
        let f = |x: f64| (x.atanh() - 3.0, 1.0 / (1.0 - x * x));
        let r = increasing_root(f, -1.0, 1.0, None, 200).unwrap();
        assert!((r - 3f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_bracket() {
        assert_eq!(increasing_root(|x| (x, 1.0), 0.0, 0.0, None, 10), Some(0.0));
    }
}
