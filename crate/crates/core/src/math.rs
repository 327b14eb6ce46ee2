//! Thin wrappers over `libm` so the rest of the crate reads like ordinary float code.

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[cfg(test)]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

/// Logistic function `1 / (1 + e^{-t})`, evaluated without overflow for any finite `t`.
#[inline]
pub(crate) fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + exp(-t))
    } else {
        let e = exp(t);
        e / (1.0 + e)
    }
}

/// `ln(logistic(t))`, accurate for large negative `t` where the logistic underflows.
#[inline]
pub(crate) fn log_logistic(t: f64) -> f64 {
    if t >= 0.0 {
        -ln_1p(exp(-t))
    } else {
        t - ln_1p(exp(t))
    }
}

/// Bisection on a bracket whose endpoints have opposite (or zero) signs.
///
/// Stops when the bracket is narrower than `xtol` or after the bracket stops shrinking
/// in floating point.
pub(crate) fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    if f(hi) == 0.0 {
        return hi;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid <= lo || mid >= hi {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_is_finite_at_extremes() {
        assert_eq!(logistic(-1e6), 0.0);
        assert_eq!(logistic(1e6), 1.0);
        assert!((logistic(0.0) - 0.5).abs() < 1e-15);
        assert!((log_logistic(-800.0) + 800.0).abs() < 1e-12);
        assert!(log_logistic(800.0).abs() < 1e-300);
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14);
        assert!((r - core::f64::consts::SQRT_2).abs() < 1e-13);
    }
}
