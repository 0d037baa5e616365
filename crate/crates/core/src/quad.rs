//! Small quadrature and power-integral helpers.

/// 8-point Gauss–Legendre nodes and weights on [-1,1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// ∫_a^b f by 8-point Gauss–Legendre.
pub fn gauss8(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS.iter())
        .map(|(&t, &w)| w * f(m + h * t))
        .sum::<f64>()
        * h
}

/// Mean of |z|^p over the segment from z0 to z1 (z affine in the variable).
///
/// Stable for nearly equal endpoints.
pub fn mean_abs_pow(z0: f64, z1: f64, p: f64) -> f64 {
    if z0 == z1 {
        return z0.abs().powf(p);
    }
    if z0 * z1 > 0.0 {
        let (a, b) = if z0.abs() >= z1.abs() { (z0, z1) } else { (z1, z0) };
        let h = (b - a) / a;
        if h == 0.0 {
            return a.abs().powf(p);
        }
        // ((1+h)^{p+1} - 1) / ((p+1) h), h in (-1, 0]
        a.abs().powf(p) * ((p + 1.0) * h.ln_1p()).exp_m1() / ((p + 1.0) * h)
    } else {
        let g = |z: f64| z.signum() * z.abs().powf(p + 1.0) / (p + 1.0);
        (g(z1) - g(z0)) / (z1 - z0)
    }
}

/// Mean of sgn(z)|z|^{p} (odd power) over the segment from z0 to z1.
pub fn mean_signed_pow(z0: f64, z1: f64, p: f64) -> f64 {
    if z0 == z1 {
        return z0.signum() * z0.abs().powf(p);
    }
    if z0 * z1 > 0.0 {
        z0.signum() * mean_abs_pow(z0, z1, p)
    } else {
        // antiderivative |z|^{p+1}/(p+1) is even
        let g = |z: f64| z.abs().powf(p + 1.0) / (p + 1.0);
        (g(z1) - g(z0)) / (z1 - z0)
    }
}

/// The paper's convention z|z|^{ρ-2} = 0 at z = 0.
pub fn signed_pow(z: f64, p: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else {
        z.signum() * z.abs().powf(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_is_exact_for_degree_15() {
        let v = gauss8(-1.0, 2.0, |x| x.powi(15) + 3.0 * x.powi(4));
        let exact = (2f64.powi(16) - 1.0) / 16.0 + 3.0 * (32.0 + 1.0) / 5.0;
        assert!((v - exact).abs() < 1e-9 * exact.abs());
    }

    #[test]
    fn mean_abs_pow_matches_closed_form() {
        // ∫_1^3 z^2 dz / 2 = 13/3
        assert!((mean_abs_pow(1.0, 3.0, 2.0) - 13.0 / 3.0).abs() < 1e-14);
        // crossing zero: ∫_{-1}^{2} |z| dz / 3 = (0.5 + 2)/3
        assert!((mean_abs_pow(-1.0, 2.0, 1.0) - 2.5 / 3.0).abs() < 1e-14);
        let near = mean_abs_pow(1.0, 1.0 + 1e-12, 1.5);
        assert!((near - 1.0).abs() < 1e-11);
    }

    #[test]
    fn signed_mean_crossing() {
        // ∫_{-1}^{1} z dz = 0
        assert!(mean_signed_pow(-1.0, 1.0, 1.0).abs() < 1e-15);
        // ∫_{-1}^{3} sgn(z)|z|^2 dz /4 = (27 - 1)/3/4
        assert!((mean_signed_pow(-1.0, 3.0, 2.0) - 26.0 / 12.0).abs() < 1e-14);
    }
}
