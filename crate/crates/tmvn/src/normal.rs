//! Scalar standard-normal primitives shared by the integrators and samplers.
//!
//! Everything here is tail-safe: upper-tail masses are computed through
//! `erfc` (no `1 - cdf` cancellation) and quantiles route through the
//! nearer tail, so probabilities down to the double-precision floor
//! (~1e-308) keep full relative accuracy.

use std::f64::consts::PI;

/// 1/sqrt(2), kept explicit to avoid recomputing.
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF `Phi(x)`.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Phi(x)` without cancellation.
#[inline]
pub fn cdf_bar(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `ln(1 - Phi(x))`, finite for arguments far beyond the range where the
/// tail mass itself underflows.
///
/// Below 30 standard deviations this is the log of the `erfc` form; past
/// that the standard asymptotic expansion of Mills' ratio takes over
/// (truncation error under 1e-12 relative at the switch point).
pub fn ln_cdf_bar(x: f64) -> f64 {
    if x < 30.0 {
        cdf_bar(x).ln()
    } else {
        let inv2 = 1.0 / (x * x);
        // 1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8
        let series = 1.0 + inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * 105.0)));
        -0.5 * x * x - x.ln() - 0.5 * (2.0 * PI).ln() + series.ln()
    }
}

/// `ln Phi(x)`.
#[inline]
pub fn ln_cdf(x: f64) -> f64 {
    ln_cdf_bar(-x)
}

/// Standard normal quantile `Phi^{-1}(p)` (Wichura's PPND16 rational
/// approximations, full double accuracy over (0, 1)).
pub fn inv_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return if p == 0.0 { f64::NEG_INFINITY } else { f64::NAN };
    }
    if p >= 1.0 {
        return if p == 1.0 { f64::INFINITY } else { f64::NAN };
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = polyeval(
            r,
            &[
                3.387_132_872_796_366_608e0,
                1.331_416_678_917_843_774_5e2,
                1.971_590_950_306_551_442_7e3,
                1.373_169_376_550_946_112_5e4,
                4.592_195_393_154_987_145_7e4,
                6.726_577_092_700_870_085_3e4,
                3.343_057_558_358_812_810_5e4,
                2.509_080_928_730_122_672_7e3,
            ],
        );
        let den = polyeval(
            r,
            &[
                1.0,
                4.231_333_070_160_091_125_2e1,
                6.871_870_074_920_579_083e2,
                5.394_196_021_424_751_107_7e3,
                2.121_379_430_158_659_586_7e4,
                3.930_789_580_009_271_061e4,
                2.872_908_573_572_194_267_4e4,
                5.226_495_278_852_854_561e3,
            ],
        );
        return q * num / den;
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        let num = polyeval(
            r,
            &[
                1.423_437_110_749_683_577_3e0,
                4.630_337_846_156_545_295_9e0,
                5.769_497_221_460_691_405_5e0,
                3.647_848_324_763_204_605e0,
                1.270_458_252_452_368_382_6e0,
                2.417_807_251_774_506_117_7e-1,
                2.272_384_498_926_918_458_3e-2,
                7.745_450_142_783_414_076_4e-4,
            ],
        );
        let den = polyeval(
            r,
            &[
                1.0,
                2.053_191_626_637_758_821_9e0,
                1.676_384_830_183_803_849_4e0,
                6.897_673_349_851_000_045_5e-1,
                1.481_039_764_274_800_745_9e-1,
                1.519_866_656_361_645_719_7e-2,
                5.475_938_084_995_344_946e-4,
                1.050_750_071_644_416_843_2e-9,
            ],
        );
        num / den
    } else {
        let r = r - 5.0;
        let num = polyeval(
            r,
            &[
                6.657_904_643_501_103_777_2e0,
                5.463_784_911_164_114_369_9e0,
                1.784_826_539_917_291_335_8e0,
                2.965_605_718_285_048_912_3e-1,
                2.653_218_952_657_612_309_3e-2,
                1.242_660_947_388_078_438_6e-3,
                2.711_555_568_743_487_578_2e-5,
                2.010_334_399_292_288_132_6e-7,
            ],
        );
        let den = polyeval(
            r,
            &[
                1.0,
                5.998_322_065_558_879_376_9e-1,
                1.369_298_809_227_358_053_1e-1,
                1.487_536_129_085_061_485_2e-2,
                7.868_691_311_456_132_591e-4,
                1.846_318_317_510_054_681_8e-5,
                1.421_511_758_316_445_888_7e-7,
                2.044_263_103_389_939_785_6e-15,
            ],
        );
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Quantile of the standard normal conditioned on exceeding `a`:
/// `Phi^{-1}(Phi(a) + u * (1 - Phi(a)))` for `u` in [0, 1).
///
/// Routed through whichever tail keeps full precision; once `a` is past
/// the representable range of the tail mass the conditional distribution
/// is replaced by its exponential tail limit.
pub fn truncated_lower_quantile(a: f64, u: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&u));
    if a >= 36.0 {
        // Phi_bar(a) underflows; Phi_bar(xi)/Phi_bar(a) = 1-u inverted
        // through the leading term of the tail expansion.
        return (a * a - 2.0 * libm::log1p(-u)).sqrt();
    }
    let upper = cdf_bar(a);
    let lower = cdf(a);
    let p = lower + u * upper;
    if p <= 0.5 {
        inv_cdf(p)
    } else {
        let q = upper * (1.0 - u);
        if q > 0.0 {
            -inv_cdf(q)
        } else {
            (a * a - 2.0 * libm::log1p(-u)).sqrt()
        }
    }
}

#[inline]
fn polyeval(x: f64, coeffs: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}
