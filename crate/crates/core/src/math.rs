//! `libm` shims so the crate builds without `std`.

pub const TAU: f64 = core::f64::consts::TAU;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn exp_m1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

/// Reduces `x` into `[0, period)`.
#[inline]
pub fn wrap(x: f64, period: f64) -> f64 {
    let r = x - period * floor(x / period);
    // floor rounding can land exactly on `period`
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Shortest signed displacement from `a` to `b` on a circle of length `period`.
#[inline]
pub fn min_image(b_minus_a: f64, period: f64) -> f64 {
    let mut d = wrap(b_minus_a, period);
    if d > 0.5 * period {
        d -= period;
    }
    d
}
