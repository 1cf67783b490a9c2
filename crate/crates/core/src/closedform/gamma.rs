//! Complex log-Gamma by the Lanczos approximation (g = 7, n = 9).

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

const G: f64 = 7.0;
const COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(z)`; the imaginary part is some branch of `arg Γ(z)`, the real part
/// is `ln |Γ(z)|`. Uses reflection for `Re z < 1/2`.
pub fn ln_gamma(z: C64) -> C64 {
    if z.re < 0.5 {
        return C64::new(PI.ln(), 0.0) - (PI * z).sin().ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = C64::new(COEFFS[0], 0.0);
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        x += *c / (z + i as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// `Γ(x)` for real `x > 0`.
pub fn gamma(x: f64) -> f64 {
    ln_gamma(C64::new(x, 0.0)).re.exp()
}

/// `|Γ(z)|²`.
pub fn gamma_abs_sq(z: C64) -> f64 {
    (2.0 * ln_gamma(z).re).exp()
}
