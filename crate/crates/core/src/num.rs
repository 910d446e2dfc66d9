//! Scalar math shims over `libm` so the crate builds without `std`.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Modulus of a complex number.
#[inline]
pub fn cabs(z: crate::C64) -> f64 {
    libm::hypot(z.re, z.im)
}

/// `e^{i t}`.
#[inline]
pub fn cis(t: f64) -> crate::C64 {
    crate::C64::new(libm::cos(t), libm::sin(t))
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

/// Largest absolute entry; 0 for an empty slice.
pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(abs(*x)))
}

/// Smallest entry; +inf for an empty slice.
pub fn min(v: &[f64]) -> f64 {
    v.iter().fold(f64::INFINITY, |m, x| m.min(*x))
}

/// Largest entry; -inf for an empty slice.
pub fn max(v: &[f64]) -> f64 {
    v.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x))
}
