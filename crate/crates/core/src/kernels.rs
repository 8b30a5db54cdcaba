//! Fundamental solutions and their normal derivatives.
//!
//! Every kernel returns a [`KernelValue`] that has already passed through the
//! truncation rule, so a coincident pair `x = y` yields a finite (clamped)
//! value instead of an infinity or NaN.

use std::f64::consts::PI;

use num_complex::Complex64;

pub type KernelValue = Complex64;

/// Default clamp threshold for near-singular kernel evaluations.
pub const DEFAULT_BETA: f64 = 100_000.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationRule {
    beta: f64,
}

impl Default for TruncationRule {
    fn default() -> Self {
        Self { beta: DEFAULT_BETA }
    }
}

impl TruncationRule {
    pub fn new(beta: f64) -> Option<Self> {
        (beta > 0.0 && beta.is_finite()).then_some(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Clamp to `[-β, β]`; NaN maps to `β`.
    #[inline]
    pub fn clamp(&self, c: f64) -> f64 {
        if c.is_nan() {
            self.beta
        } else {
            c.max(-self.beta).min(self.beta)
        }
    }

    /// Real and imaginary parts are clamped independently.
    #[inline]
    pub fn truncate(&self, v: KernelValue) -> KernelValue {
        Complex64::new(self.clamp(v.re), self.clamp(v.im))
    }
}

#[inline]
fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

#[inline]
fn diff_dot(x: &[f64], y: &[f64], n: &[f64]) -> f64 {
    x.iter().zip(y).zip(n).map(|((a, b), c)| (a - b) * c).sum()
}

/// `-(1/2π) ln|x - y|`, as a bare real for inner loops.
#[inline]
pub fn laplace2d_re(x: &[f64], y: &[f64], rule: &TruncationRule) -> f64 {
    rule.clamp(-dist2(x, y).ln() / (4.0 * PI))
}

pub fn laplace2d(x: &[f64], y: &[f64], rule: &TruncationRule) -> KernelValue {
    Complex64::new(laplace2d_re(x, y, rule), 0.0)
}

/// `1 / (4π |x - y|)`.
#[inline]
pub fn laplace3d_re(x: &[f64], y: &[f64], rule: &TruncationRule) -> f64 {
    rule.clamp(1.0 / (4.0 * PI * dist2(x, y).sqrt()))
}

pub fn laplace3d(x: &[f64], y: &[f64], rule: &TruncationRule) -> KernelValue {
    Complex64::new(laplace3d_re(x, y, rule), 0.0)
}

/// `(1/8π) r² ln r`, extended by continuity to 0 at `r = 0`.
#[inline]
pub fn biharmonic2d_re(x: &[f64], y: &[f64], rule: &TruncationRule) -> f64 {
    let r2 = dist2(x, y);
    if r2 == 0.0 {
        return 0.0;
    }
    rule.clamp(r2 * r2.ln() / (16.0 * PI))
}

pub fn biharmonic2d(x: &[f64], y: &[f64], rule: &TruncationRule) -> KernelValue {
    Complex64::new(biharmonic2d_re(x, y, rule), 0.0)
}

/// `∂u*/∂n_x = (1/8π)(2 ln r + 1) (x - y)·n_x`.
#[inline]
pub fn biharmonic2d_dn_x_re(x: &[f64], y: &[f64], n_x: &[f64], rule: &TruncationRule) -> f64 {
    let r2 = dist2(x, y);
    if r2 == 0.0 {
        return 0.0;
    }
    rule.clamp((r2.ln() + 1.0) * diff_dot(x, y, n_x) / (8.0 * PI))
}

pub fn biharmonic2d_dn(x: &[f64], y: &[f64], n_x: &[f64], rule: &TruncationRule) -> KernelValue {
    Complex64::new(biharmonic2d_dn_x_re(x, y, n_x, rule), 0.0)
}

/// `∂u*/∂n_y = (1/8π)(2 ln r + 1) (y - x)·n_y`.
#[inline]
pub fn biharmonic2d_dn_y_re(x: &[f64], y: &[f64], n_y: &[f64], rule: &TruncationRule) -> f64 {
    biharmonic2d_dn_x_re(y, x, n_y, rule)
}

/// `∂²u*/∂n_x∂n_y = -(1/8π) [ 2 ((x-y)·n_x)((x-y)·n_y) / r² + (2 ln r + 1) n_x·n_y ]`.
///
/// Log-singular at `r = 0`, where it is clamped.
#[inline]
pub fn biharmonic2d_dn_xy_re(
    x: &[f64],
    y: &[f64],
    n_x: &[f64],
    n_y: &[f64],
    rule: &TruncationRule,
) -> f64 {
    let r2 = dist2(x, y);
    let nn: f64 = n_x.iter().zip(n_y).map(|(a, b)| a * b).sum();
    let cross = if r2 == 0.0 {
        0.0
    } else {
        2.0 * diff_dot(x, y, n_x) * diff_dot(x, y, n_y) / r2
    };
    rule.clamp(-(cross + (r2.ln() + 1.0) * nn) / (8.0 * PI))
}

/// `e^{ik|x-y|} / (4π|x-y|)`.
#[inline]
pub fn helmholtz3d(x: &[f64], y: &[f64], k: f64, rule: &TruncationRule) -> KernelValue {
    helmholtz3d_at(dist2(x, y).sqrt(), k, rule)
}

/// `(sin x, cos x)` without branches, for `|x| < 1e5`: reduction by
/// `π/2` in three parts, then the usual minimax kernels on `[-π/4, π/4]`.
/// Agrees with the library functions to a few ulp and vectorizes.
#[inline]
pub fn sincos(x: f64) -> (f64, f64) {
    const PIO2_1: f64 = 1.570_796_326_734_125_614_17e0;
    const PIO2_2: f64 = 6.077_100_506_303_965_976_6e-11;
    const PIO2_2T: f64 = 2.022_266_248_795_950_631_54e-21;
    const S: [f64; 6] = [
        -1.666_666_666_666_663_243_48e-1,
        8.333_333_333_322_489_461_24e-3,
        -1.984_126_982_985_794_931_34e-4,
        2.755_731_370_707_006_767_89e-6,
        -2.505_076_025_340_686_341_95e-8,
        1.589_690_995_211_550_102_21e-10,
    ];
    const C: [f64; 6] = [
        4.166_666_666_666_660_190_37e-2,
        -1.388_888_888_887_410_957_49e-3,
        2.480_158_728_947_672_941_78e-5,
        -2.755_731_435_139_066_330_35e-7,
        2.087_572_321_298_174_827_9e-9,
        -1.135_964_755_778_819_482_65e-11,
    ];
    // Adding 1.5·2^52 rounds to the nearest integer and leaves it in the
    // low mantissa bits.
    const SHIFT: f64 = 6_755_399_441_055_744.0;
    let shifted = x * std::f64::consts::FRAC_2_PI + SHIFT;
    let q = shifted - SHIFT;
    let y = ((x - q * PIO2_1) - q * PIO2_2) - q * PIO2_2T;
    let z = y * y;
    let sin = y + y * z * (S[0] + z * (S[1] + z * (S[2] + z * (S[3] + z * (S[4] + z * S[5])))));
    let hz = 0.5 * z;
    let w = 1.0 - hz;
    let cos = w + (((1.0 - w) - hz) + z * z * (C[0] + z * (C[1] + z * (C[2] + z * (C[3] + z * (C[4] + z * C[5]))))));
    let n = shifted.to_bits() as i64;
    let (a, b) = if n & 1 == 0 { (sin, cos) } else { (cos, sin) };
    let a = if n & 2 == 0 { a } else { -a };
    let b = if (n + 1) & 2 == 0 { b } else { -b };
    (a, b)
}

/// [`helmholtz3d`] as a function of the distance.
#[inline]
pub fn helmholtz3d_at(r: f64, k: f64, rule: &TruncationRule) -> KernelValue {
    let (s, c) = sincos(k * r);
    let scale = 1.0 / (4.0 * PI * r);
    rule.truncate(Complex64::new(c * scale, s * scale))
}
