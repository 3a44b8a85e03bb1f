//! Scalar special functions used by the discretizers: the standard normal
//! CDF and the bivariate normal CDF (Genz's adaptation of the
//! Drezner-Wesolowsky algorithm, accurate to about 1e-15).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// P(X <= h, Y <= k) for standard bivariate normal with correlation rho.
pub fn bvn_cdf(h: f64, k: f64, rho: f64) -> f64 {
    bvnd(-h, -k, rho).clamp(0.0, 1.0)
}

// Gauss-Legendre abscissae/weights for 6-, 12- and 20-point rules.
const GL6: [(f64, f64); 3] = [
    (-0.932_469_514_203_152_2, 0.171_324_492_379_170_5),
    (-0.661_209_386_466_264_7, 0.360_761_573_048_138_4),
    (-0.238_619_186_083_197_0, 0.467_913_934_572_690_4),
];
const GL12: [(f64, f64); 6] = [
    (-0.981_560_634_246_719_1, 0.047_175_336_386_511_77),
    (-0.904_117_256_370_475_0, 0.106_939_325_995_318_3),
    (-0.769_902_674_194_305_0, 0.160_078_328_543_346_4),
    (-0.587_317_954_286_617_1, 0.203_167_426_723_065_9),
    (-0.367_831_498_998_180_2, 0.233_492_536_538_354_7),
    (-0.125_233_408_511_469_2, 0.249_147_045_813_402_9),
];
const GL20: [(f64, f64); 10] = [
    (-0.993_128_599_185_094_9, 0.017_614_007_139_152_12),
    (-0.963_971_927_277_913_8, 0.040_601_429_800_386_94),
    (-0.912_234_428_251_325_9, 0.062_672_048_334_109_06),
    (-0.839_116_971_822_218_8, 0.083_276_741_576_704_75),
    (-0.746_331_906_460_150_8, 0.101_930_119_817_240_4),
    (-0.636_053_680_726_515_0, 0.118_194_531_961_518_4),
    (-0.510_867_001_950_827_1, 0.131_688_638_449_176_6),
    (-0.373_706_088_715_419_6, 0.142_096_109_318_382_1),
    (-0.227_785_851_141_645_1, 0.149_172_986_472_603_7),
    (-0.076_526_521_133_497_33, 0.152_753_387_130_725_9),
];

/// P(X > dh, Y > dk) for standard bivariate normal with correlation r.
fn bvnd(dh: f64, dk: f64, r: f64) -> f64 {
    let twopi = 2.0 * PI;
    let rule: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let h = dh;
    let mut k = dk;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        if r.abs() > 0.0 {
            let hs = (h * h + k * k) / 2.0;
            let asr = r.asin();
            for &(x, w) in rule {
                for is in [-1.0f64, 1.0] {
                    let sn = (asr * (is * x + 1.0) / 2.0).sin();
                    bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                }
            }
            bvn = bvn * asr / (2.0 * twopi);
        }
        bvn + norm_cdf(-h) * norm_cdf(-k)
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let ass = (1.0 - r) * (1.0 + r);
            let mut a = ass.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            let asr = -(bs / ass + hk) / 2.0;
            if asr > -100.0 {
                bvn = a * asr.exp() * (1.0 - c * (bs - ass) * (1.0 - d * bs / 5.0) / 3.0
                    + c * d * ass * ass / 5.0);
            }
            if -hk < 100.0 {
                let b = bs.sqrt();
                let sp = (twopi).sqrt() * norm_cdf(-b / a);
                bvn -= (-hk / 2.0).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for &(x, w) in rule {
                for is in [-1.0f64, 1.0] {
                    let xs = (a * (is * x + 1.0)) * (a * (is * x + 1.0));
                    let rs = (1.0 - xs).sqrt();
                    let asr1 = -(bs / xs + hk) / 2.0;
                    if asr1 > -100.0 {
                        let sp = 1.0 + c * xs * (1.0 + d * xs);
                        let ep = (-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs;
                        bvn += a * w * asr1.exp() * (ep - sp);
                    }
                }
            }
            bvn = -bvn / twopi;
        }
        if r > 0.0 {
            bvn + norm_cdf(-h.max(k))
        } else {
            bvn = -bvn;
            if k > h {
                bvn += norm_cdf(k) - norm_cdf(h);
            }
            bvn
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn norm_cdf_values() {
        assert_abs_diff_eq!(norm_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(norm_cdf(1.959963984540054), 0.975, epsilon = 1e-12);
        assert_abs_diff_eq!(norm_cdf(-8.0), 6.22096057427178e-16, epsilon = 1e-18);
    }

    #[test]
    fn bvn_independent_factorizes() {
        for &h in &[-1.5, 0.0, 0.7, 2.3] {
            for &k in &[-2.0, -0.3, 1.1] {
                assert_abs_diff_eq!(
                    bvn_cdf(h, k, 0.0),
                    norm_cdf(h) * norm_cdf(k),
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn bvn_limits() {
        // rho -> 1: P(X<=h, Y<=k) -> Phi(min(h,k))
        assert_abs_diff_eq!(
            bvn_cdf(0.5, 1.2, 0.999999),
            norm_cdf(0.5),
            epsilon = 1e-4
        );
        // marginalizing: k -> inf
        assert_abs_diff_eq!(bvn_cdf(0.3, 30.0, 0.6), norm_cdf(0.3), epsilon = 1e-14);
        // symmetry in (h, k)
        assert_abs_diff_eq!(
            bvn_cdf(0.4, -0.9, 0.55),
            bvn_cdf(-0.9, 0.4, 0.55),
            epsilon = 1e-15
        );
    }

    #[test]
    fn bvn_against_quadrature_oracle() {
        // dense Simpson quadrature of phi(x) * Phi((k - rho x)/sqrt(1-rho^2))
        let oracle = |h: f64, k: f64, rho: f64| -> f64 {
            let n = 40_000;
            let lo = -9.0f64;
            let hi = h;
            let step = (hi - lo) / n as f64;
            let f = |x: f64| {
                let phi = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
                phi * norm_cdf((k - rho * x) / (1.0 - rho * rho).sqrt())
            };
            let mut s = f(lo) + f(hi);
            for i in 1..n {
                let x = lo + i as f64 * step;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
            }
            s * step / 3.0
        };
        for &(h, k, rho) in &[
            (0.0, 0.0, 0.5),
            (1.0, -0.5, 0.3),
            (-0.4, 0.8, -0.7),
            (0.2, 0.3, 0.95),
            (-1.0, -1.0, -0.95),
        ] {
            assert_abs_diff_eq!(bvn_cdf(h, k, rho), oracle(h, k, rho), epsilon = 1e-10);
        }
    }
}
