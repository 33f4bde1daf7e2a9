//! Scalar special functions: `libm` for the error functions, `statrs` for
//! the inverse.

use statrs::function::erf;
use std::f64::consts::{PI, SQRT_2};

pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Complementary error function.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Error function.
#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
///
/// Direct product below `x = 25`, asymptotic series above (relative error
/// under `1e-16` there).
pub fn erfcx(x: f64) -> f64 {
    if x < 25.0 {
        if x < -26.0 {
            return f64::INFINITY;
        }
        return (x * x).exp() * libm::erfc(x);
    }
    let y = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..8 {
        term *= -((2 * k - 1) as f64) * y;
        sum += term;
    }
    sum / (x * PI.sqrt())
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function, accurate in both tails.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Inverse of [`norm_cdf`] on `(0, 1)`.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * erf::erfc_inv(2.0 * p);
    // one Newton step against the more accurate forward function
    let d = norm_pdf(x);
    if d > 0.0 && x.is_finite() {
        x - (norm_cdf(x) - p) / d
    } else {
        x
    }
}

/// Upper bivariate normal probability `P(X > h, Y > k)` for standard normals
/// with correlation `r` (Genz's algorithm, absolute accuracy near 1e-15).
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    use std::f64::consts::PI;
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY { 1.0 } else { norm_cdf(-k) };
    }
    if k == f64::NEG_INFINITY {
        return norm_cdf(-h);
    }
    if r == 0.0 {
        return norm_cdf(-h) * norm_cdf(-k);
    }
    const W6: [f64; 3] = [0.1713244923791705, 0.3607615730481384, 0.4679139345726904];
    const X6: [f64; 3] = [0.9324695142031522, 0.6612093864662647, 0.2386191860831970];
    const W12: [f64; 6] = [
        0.04717533638651177,
        0.1069393259953183,
        0.1600783285433464,
        0.2031674267230659,
        0.2334925365383547,
        0.2491470458134029,
    ];
    const X12: [f64; 6] = [
        0.9815606342467191,
        0.9041172563704750,
        0.7699026741943050,
        0.5873179542866171,
        0.3678314989981802,
        0.1252334085114692,
    ];
    const W20: [f64; 10] = [
        0.01761400713915212,
        0.04060142980038694,
        0.06267204833410906,
        0.08327674157670475,
        0.1019301198172404,
        0.1181945319615184,
        0.1316886384491766,
        0.1420961093183821,
        0.1491729864726037,
        0.1527533871307259,
    ];
    const X20: [f64; 10] = [
        0.9931285991850949,
        0.9639719272779138,
        0.9122344282513259,
        0.8391169718222188,
        0.7463319064601508,
        0.6360536807265150,
        0.5108670019508271,
        0.3737060887154196,
        0.2277858511416451,
        0.07652652113349733,
    ];
    let (w, x): (&[f64], &[f64]) = if r.abs() < 0.3 {
        (&W6, &X6)
    } else if r.abs() < 0.75 {
        (&W12, &X12)
    } else {
        (&W20, &X20)
    };
    let tp = 2.0 * PI;
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin() / 2.0;
        for i in 0..w.len() {
            for sgn in [-1.0, 1.0] {
                let sn = (asr * (1.0 + sgn * x[i])).sin();
                bvn += w[i] * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / tp + norm_cdf(-h) * norm_cdf(-k);
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let as_ = 1.0 - r * r;
            let mut a = as_.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 80.0;
            let asr = -(bs / as_ + hk) / 2.0;
            if asr > -100.0 {
                bvn = a * asr.exp() * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                let sp = tp.sqrt() * norm_cdf(-b / a);
                bvn -= (-hk / 2.0).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a /= 2.0;
            for i in 0..w.len() {
                for sgn in [-1.0, 1.0] {
                    let xs = (a * (1.0 + sgn * x[i])).powi(2);
                    let asr = -(bs / xs + hk) / 2.0;
                    if asr > -100.0 {
                        let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                        let rs = (1.0 - xs).sqrt();
                        let ep = (-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                        bvn += a * w[i] * asr.exp() * (ep - sp);
                    }
                }
            }
            bvn = -bvn / tp;
        }
        if r > 0.0 {
            bvn += norm_cdf(-h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let l = if h < 0.0 { norm_cdf(k) - norm_cdf(h) } else { norm_cdf(-h) - norm_cdf(-k) };
            bvn = l - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfcx_matches_product_across_switch() {
        for &x in &[0.0f64, 0.5, 3.0, 10.0, 24.9] {
            let direct = (x * x).exp() * erfc(x);
            assert!((erfcx(x) - direct).abs() <= 1e-13 * direct);
        }
        // continuity at the switch point
        let a = (24.999_f64 * 24.999).exp() * erfc(24.999);
        assert!((erfcx(25.0) / a - 1.0).abs() < 1e-4);
    }

    #[test]
    fn erfcx_reference_values() {
        // values from a 30-digit evaluation
        assert!((erfcx(1.0) - 0.427_583_576_155_807_0).abs() < 1e-15);
        assert!((erfcx(30.0) - 0.018_795_888_861_416_751).abs() < 1e-17);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &x in &[-8.0, -2.0, -0.1, 0.0, 1.3, 5.0] {
            let p = norm_cdf(x);
            assert!((norm_quantile(p) - x).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn bivariate_upper_reference_values() {
        // centred orthant: 1/4 + asin(r)/(2π)
        for r in [-0.95f64, -0.5, 0.1, 0.6, 0.93, 0.999] {
            let exact = 0.25 + r.asin() / (2.0 * std::f64::consts::PI);
            assert!((bvn_upper(0.0, 0.0, r) - exact).abs() < 1e-14, "{r}");
        }
        // independent limit and symmetry
        assert!((bvn_upper(0.4, -1.1, 0.0) - norm_cdf(-0.4) * norm_cdf(1.1)).abs() < 1e-16);
        assert!((bvn_upper(0.4, -1.1, 0.7) - bvn_upper(-1.1, 0.4, 0.7)).abs() < 1e-15);
        // P(X>h, Y>k) = 1 - Φ(h) - Φ(k) + P(X<h, Y<k), P(X<h,Y<k) = P(X>-h,Y>-k)
        let (h, k, r) = (0.3, -0.7, -0.94);
        let lhs = bvn_upper(h, k, r);
        let rhs = 1.0 - norm_cdf(h) - norm_cdf(k) + bvn_upper(-h, -k, r);
        assert!((lhs - rhs).abs() < 1e-14);
    }
}
