use std::f64::consts::{PI, SQRT_2};

use super::special::{beta_reg, erfc, gamma_p};
use crate::error::{domain, Result};

/// Standard normal CDF Φ(z).
pub fn std_normal_cdf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return domain(format!("normal cdf argument must be finite, got {z}"));
    }
    Ok(0.5 * erfc(-z / SQRT_2))
}

/// Inverse of Φ. Acklam's rational approximation polished by one Halley step.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("normal quantile needs p in (0,1), got {p}"));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    let e = 0.5 * erfc(-x / SQRT_2) - p;
    let u = e * (2.0 * PI).sqrt() * (x * x / 2.0).exp();
    Ok(x - u / (1.0 + x * u / 2.0))
}

/// Student-t CDF with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: usize) -> Result<f64> {
    if df < 1 {
        return domain("student-t degrees of freedom must be >= 1");
    }
    if t.is_nan() {
        return domain("student-t argument is NaN");
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 1.0 } else { 0.0 });
    }
    let nu = df as f64;
    let t2 = t * t;
    // lower tail P(T <= -|t|)
    let tail = if t2 < nu {
        0.5 * (1.0 - beta_reg(0.5, 0.5 * nu, t2 / (nu + t2)))
    } else {
        0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + t2))
    };
    Ok(if t > 0.0 { 1.0 - tail } else { tail })
}

/// Chi-square CDF with `df` degrees of freedom.
pub fn chi_square_cdf(x: f64, df: usize) -> Result<f64> {
    if df < 1 {
        return domain("chi-square degrees of freedom must be >= 1");
    }
    if x.is_nan() || x < 0.0 {
        return domain(format!("chi-square argument must be >= 0, got {x}"));
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(gamma_p(0.5 * df as f64, 0.5 * x))
}
