//! Small numeric helpers that work without `std`.

/// `⌈log₂ n⌉` for `n ≥ 1`, with `log2_ceil(1) = 0`.
pub fn log2_ceil(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// `log₂ n` as a float, clamped below at 1 so it can be used as a multiplier.
pub fn log2_at_least_one(n: usize) -> f64 {
    let l = libm::log2(n as f64);
    if l < 1.0 {
        1.0
    } else {
        l
    }
}

/// Natural logarithm, clamped below at 1.
pub fn ln_at_least_one(n: usize) -> f64 {
    let l = libm::log(n as f64);
    if l < 1.0 {
        1.0
    } else {
        l
    }
}

/// `n^e` as a float.
pub fn powf(n: usize, e: f64) -> f64 {
    libm::pow(n as f64, e)
}

/// `⌈n^e⌉` with a small tolerance so that exact powers are not bumped up by rounding noise.
pub fn pow_ceil(n: usize, e: f64) -> usize {
    let x = powf(n, e);
    let r = libm::round(x);
    if libm::fabs(x - r) < 1e-9 {
        r as usize
    } else {
        libm::ceil(x) as usize
    }
}

/// `⌈x⌉` for a nonnegative float.
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// `⌈x⌉` as an integer, saturating at zero for negative input.
pub fn ceil_usize(x: f64) -> usize {
    if x <= 0.0 {
        0
    } else {
        libm::ceil(x) as usize
    }
}

/// Natural logarithm.
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// Square root.
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log2_ceil_small() {
        assert_eq!(log2_ceil(1), 0);
        assert_eq!(log2_ceil(2), 1);
        assert_eq!(log2_ceil(3), 2);
        assert_eq!(log2_ceil(64), 6);
        assert_eq!(log2_ceil(65), 7);
    }

    #[test]
    fn pow_ceil_exact_powers() {
        assert_eq!(pow_ceil(256, 0.5), 16);
        assert_eq!(pow_ceil(64, 0.5), 8);
        assert_eq!(pow_ceil(128, 0.5), 12);
        assert_eq!(pow_ceil(16, 1.0), 16);
        assert_eq!(pow_ceil(256, 0.25), 4);
    }
}
