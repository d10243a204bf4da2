//! Software emulation of reduced-precision storage formats.
//!
//! Values are always carried as `f64`; a format is a quantization lattice
//! plus overflow semantics. `quantize` rounds to the nearest representable
//! value of the format under round-to-nearest-even, which is what a native
//! conversion instruction would do. Passthrough formats (fp32/fp64 here)
//! leave the carrier untouched so "full precision" pipeline modes cost
//! nothing.

use num_complex::Complex64;

/// Descriptor of a floating-point storage format and its quantizer.
///
/// `mantissa_bits` counts explicit fraction bits (the hidden bit is not
/// included). `max_finite` is the largest representable magnitude; values
/// that round above it become ±infinity when `has_infinity`, else NaN
/// (the OCP FP8 E4M3 convention).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericFormat {
    pub name: &'static str,
    pub exponent_bits: u32,
    pub mantissa_bits: u32,
    pub max_finite: f64,
    pub min_normal: f64,
    pub has_infinity: bool,
    pub supports_subnormals: bool,
    /// Carrier-resolution formats: `quantize` is the identity.
    pub passthrough: bool,
}

/// IEEE 754 binary16.
pub const FP16: NumericFormat = NumericFormat {
    name: "fp16",
    exponent_bits: 5,
    mantissa_bits: 10,
    max_finite: 65504.0,
    min_normal: 6.103515625e-5, // 2^-14
    has_infinity: true,
    supports_subnormals: true,
    passthrough: false,
};

/// bfloat16: f32 exponent range, 7 fraction bits.
pub const BF16: NumericFormat = NumericFormat {
    name: "bf16",
    exponent_bits: 8,
    mantissa_bits: 7,
    max_finite: 3.3895313892515355e38, // (2 - 2^-7) * 2^127
    min_normal: 1.1754943508222875e-38, // 2^-126
    has_infinity: true,
    supports_subnormals: true,
    passthrough: false,
};

/// OCP FP8 E4M3. No infinities: the all-ones exponent carries normal
/// values up to 448 and the max-exponent/max-mantissa pattern is NaN.
pub const E4M3: NumericFormat = NumericFormat {
    name: "e4m3",
    exponent_bits: 4,
    mantissa_bits: 3,
    max_finite: 448.0,
    min_normal: 0.015625, // 2^-6
    has_infinity: false,
    supports_subnormals: true,
    passthrough: false,
};

/// OCP FP8 E5M2, IEEE-style with infinities.
pub const E5M2: NumericFormat = NumericFormat {
    name: "e5m2",
    exponent_bits: 5,
    mantissa_bits: 2,
    max_finite: 57344.0,
    min_normal: 6.103515625e-5, // 2^-14
    has_infinity: true,
    supports_subnormals: true,
    passthrough: false,
};

/// IEEE binary32 treated as carrier resolution: the pipeline's "full
/// precision" reference modes run straight f64 arithmetic.
pub const FP32: NumericFormat = NumericFormat {
    name: "fp32",
    exponent_bits: 8,
    mantissa_bits: 23,
    max_finite: f32::MAX as f64,
    min_normal: f32::MIN_POSITIVE as f64,
    has_infinity: true,
    supports_subnormals: true,
    passthrough: true,
};

/// IEEE binary64, the carrier itself.
pub const FP64: NumericFormat = NumericFormat {
    name: "fp64",
    exponent_bits: 11,
    mantissa_bits: 52,
    max_finite: f64::MAX,
    min_normal: f64::MIN_POSITIVE,
    has_infinity: true,
    supports_subnormals: true,
    passthrough: true,
};

/// All built-in formats, reduced-precision first.
pub fn format_table() -> Vec<NumericFormat> {
    vec![FP16, BF16, E4M3, E5M2, FP32, FP64]
}

/// Look a format up by its `name` field.
pub fn lookup(name: &str) -> Option<NumericFormat> {
    format_table().into_iter().find(|f| f.name == name)
}

/// 2^k for k in [-1074, 1023], exact.
#[inline]
pub(crate) fn exp2i(k: i32) -> f64 {
    debug_assert!((-1074..=1023).contains(&k));
    if k >= -1022 {
        f64::from_bits(((k + 1023) as u64) << 52)
    } else {
        // Subnormal doubles down to 2^-1074.
        f64::from_bits(1u64 << (k + 1074))
    }
}

/// floor(log2(a)) for finite a > 0, exact (handles subnormal doubles).
#[inline]
fn base2_exponent(a: f64) -> i32 {
    let bits = a.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i32;
    if raw != 0 {
        raw - 1023
    } else {
        let mant = bits & 0x000f_ffff_ffff_ffff;
        (63 - mant.leading_zeros() as i32) - 1074
    }
}

/// Round to the nearest integer, ties to even. `x` must be non-negative
/// and well below 2^52 so the exponent-alignment trick is exact.
#[inline]
fn round_ties_even_small(x: f64) -> f64 {
    const SHIFT: f64 = 1u64.wrapping_shl(52) as f64; // 2^52
    (x + SHIFT) - SHIFT
}

impl NumericFormat {
    /// Smallest normal exponent, 2 - 2^(exponent_bits - 1).
    #[inline]
    pub fn min_exponent(&self) -> i32 {
        2 - (1i32 << (self.exponent_bits - 1))
    }

    /// Round `x` to the nearest representable value under
    /// round-to-nearest-even. Total: NaN maps to NaN, infinities follow the
    /// format's overflow semantics, signed zero is preserved, subnormals
    /// are representable.
    pub fn quantize(&self, x: f64) -> f64 {
        self.quantize_impl(x, false)
    }

    /// Like `quantize`, but overflow clamps to ±max_finite instead of
    /// producing ±infinity/NaN. Sensitivity-check variant.
    pub fn quantize_saturating(&self, x: f64) -> f64 {
        self.quantize_impl(x, true)
    }

    fn quantize_impl(&self, x: f64, saturate: bool) -> f64 {
        if self.passthrough || x == 0.0 {
            return x; // signed zero preserved
        }
        if x.is_nan() {
            return f64::NAN;
        }
        if x.is_infinite() {
            if saturate {
                return x.signum() * self.max_finite;
            }
            return if self.has_infinity { x } else { f64::NAN };
        }

        let sign = if x < 0.0 { -1.0 } else { 1.0 };
        let a = x.abs();
        let e = base2_exponent(a);
        let emin = self.min_exponent();
        let mb = self.mantissa_bits as i32;

        // Position of the quantization step: 2^(e - mb) for normals, fixed
        // at 2^(emin - mb) in the subnormal range.
        let step = if e < emin { emin - mb } else { e - mb };

        if e < emin && !self.supports_subnormals {
            // Flush-to-zero lattice: only 0 and ±min_normal below emin.
            let r = round_ties_even_small(a * exp2i(-(emin - mb)));
            let back = r * exp2i(emin - mb);
            return if back < self.min_normal { sign * 0.0 } else { sign * self.min_normal };
        }

        // a * 2^-step lies in [2^mb, 2^(mb+1)) for normals (or below for
        // subnormals); both the scaling and the tie detection are exact.
        let scaled = a * exp2i(-step);
        let r = round_ties_even_small(scaled);
        let back = r * exp2i(step);

        if back > self.max_finite {
            if saturate {
                return sign * self.max_finite;
            }
            return if self.has_infinity {
                sign * f64::INFINITY
            } else {
                f64::NAN
            };
        }
        sign * back
    }

    /// Componentwise complex quantization.
    pub fn quantize_complex(&self, z: Complex64) -> Complex64 {
        if self.passthrough {
            return z;
        }
        Complex64::new(self.quantize(z.re), self.quantize(z.im))
    }
}

/// Quantize every element of a sequence in place.
pub fn quantize_slice(format: &NumericFormat, data: &mut [Complex64]) {
    if format.passthrough {
        return;
    }
    for z in data.iter_mut() {
        *z = format.quantize_complex(*z);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Enumeration oracle: decode every bit pattern of a small format to
    /// f64, then quantize by nearest-value search with ties to the even
    /// code. Independent of the production quantizer.
    struct EnumOracle {
        /// Sorted positive finite lattice (0 included).
        lattice: Vec<f64>,
        max_finite: f64,
        has_infinity: bool,
        /// Next point of the unbounded lattice above max_finite and the
        /// parity (evenness) of its significand, for the overflow tie rule.
        next_above_max: f64,
        next_is_even: bool,
    }

    impl EnumOracle {
        fn new(exponent_bits: u32, mantissa_bits: u32, e4m3_style: bool) -> Self {
            let bias = (1i32 << (exponent_bits - 1)) - 1;
            let emin = 1 - bias;
            let mb = mantissa_bits;
            let mut lattice = vec![0.0];
            let max_biased = (1u32 << exponent_bits) - 1;
            for be in 0..=max_biased {
                for m in 0..(1u32 << mb) {
                    if !e4m3_style && be == max_biased {
                        continue; // inf/NaN encodings
                    }
                    if e4m3_style && be == max_biased && m == (1u32 << mb) - 1 {
                        continue; // E4M3 NaN pattern
                    }
                    let v = if be == 0 {
                        (m as f64) * exp2i(emin - mb as i32)
                    } else {
                        (1.0 + (m as f64) * exp2i(-(mb as i32)))
                            * exp2i(be as i32 - bias)
                    };
                    lattice.push(v);
                }
            }
            lattice.sort_by(|a, b| a.partial_cmp(b).unwrap());
            lattice.dedup();
            let max_finite = *lattice.last().unwrap();
            // One step past the top of the lattice: the next binade start,
            // whose significand is even (carry into the hidden bit). For
            // E4M3 the next point shares the top binade and is odd.
            let (next_above_max, next_is_even) = if e4m3_style {
                // 448 = 14*32 -> next is 15*32 = 480, odd significand.
                (480.0, false)
            } else {
                let ulp = max_finite
                    - lattice[lattice.len() - 2];
                (max_finite + ulp, true)
            };
            EnumOracle {
                lattice,
                max_finite,
                has_infinity: !e4m3_style,
                next_above_max,
                next_is_even,
            }
        }

        fn quantize(&self, x: f64) -> f64 {
            if x.is_nan() {
                return f64::NAN;
            }
            if x.is_infinite() {
                return if self.has_infinity { x } else { f64::NAN };
            }
            let sign = if x < 0.0 || (x == 0.0 && x.is_sign_negative()) {
                -1.0
            } else {
                1.0
            };
            let a = x.abs();
            // Locate neighbours in the extended lattice (finite + one
            // virtual point above max).
            let mut lo = self.lattice[0];
            let mut hi = f64::INFINITY;
            let mut lo_even = true;
            for (i, &v) in self.lattice.iter().enumerate() {
                if v <= a {
                    lo = v;
                    lo_even = i % 2 == 0; // code 0 (zero) is even; codes ascend
                } else {
                    hi = v;
                    break;
                }
            }
            if hi.is_infinite() && a > self.max_finite {
                hi = self.next_above_max;
                debug_assert_eq!(self.next_is_even, !lo_even);
            }
            // Adjacent codes alternate parity, so a tie that does not go
            // to `lo` goes to `hi`.
            let pick = if a - lo < hi - a {
                lo
            } else if a - lo > hi - a {
                hi
            } else if lo_even {
                lo
            } else {
                hi
            };
            if pick > self.max_finite {
                return if self.has_infinity {
                    sign * f64::INFINITY
                } else {
                    f64::NAN
                };
            }
            sign * pick
        }
    }

    #[test]
    fn builtin_descriptors_match_definitions() {
        assert_eq!(FP16.exponent_bits, 5);
        assert_eq!(FP16.mantissa_bits, 10);
        assert_eq!(FP16.max_finite, 65504.0);
        const { assert!(FP16.has_infinity && !E4M3.has_infinity) };
        assert_eq!(BF16.exponent_bits, 8);
        assert_eq!(BF16.mantissa_bits, 7);
        assert_eq!(E4M3.exponent_bits, 4);
        assert_eq!(E4M3.mantissa_bits, 3);
        assert_eq!(E4M3.max_finite, 448.0);
        assert_eq!(E5M2.exponent_bits, 5);
        assert_eq!(E5M2.mantissa_bits, 2);
        assert_eq!(E5M2.max_finite, 57344.0);
        assert_eq!(lookup("fp16").unwrap().mantissa_bits, 10);
        assert_eq!(lookup("e5m2").unwrap().mantissa_bits, 2);
        assert!(lookup("nope").is_none());
    }

    #[test]
    fn fp32_fp64_are_passthrough() {
        for x in [0.1, -3.7e12, 1e-300, f64::INFINITY, -0.0] {
            assert_eq!(FP32.quantize(x).to_bits(), x.to_bits());
            assert_eq!(FP64.quantize(x).to_bits(), x.to_bits());
        }
        assert!(FP32.quantize(f64::NAN).is_nan());
    }

    #[test]
    fn fp16_spot_values() {
        assert_eq!(FP16.quantize(1.0), 1.0);
        assert_eq!(FP16.quantize(0.1), 0.0999755859375);
        assert_eq!(FP16.quantize(0.2), 0.199951171875);
        assert_eq!(FP16.quantize(70000.0), f64::INFINITY);
        assert_eq!(FP16.quantize(-70000.0), f64::NEG_INFINITY);
        assert_eq!(FP16.quantize(65504.0), 65504.0);
        // Rounding boundary: 65520 is a tie with the (even) next binade.
        assert_eq!(FP16.quantize(65519.999), 65504.0);
        assert_eq!(FP16.quantize(65520.0), f64::INFINITY);
        // Smallest subnormal is 2^-24; half of it rounds to zero (tie, even).
        assert_eq!(FP16.quantize(exp2i(-24)), exp2i(-24));
        assert_eq!(FP16.quantize(exp2i(-25)), 0.0);
        assert!(FP16.quantize(exp2i(-25) * 1.0001) > 0.0);
    }

    #[test]
    fn e4m3_overflow_is_nan() {
        assert!(E4M3.quantize(1000.0).is_nan());
        assert!(E4M3.quantize(-1000.0).is_nan());
        assert_eq!(E4M3.quantize(448.0), 448.0);
        // 464 ties between 448 (even significand) and 480 (odd): stays finite.
        assert_eq!(E4M3.quantize(464.0), 448.0);
        assert!(E4M3.quantize(464.001).is_nan());
        assert!(E4M3.quantize(f64::INFINITY).is_nan());
    }

    #[test]
    fn saturating_variant_clamps() {
        assert_eq!(E4M3.quantize_saturating(1000.0), 448.0);
        assert_eq!(E4M3.quantize_saturating(-1e9), -448.0);
        assert_eq!(FP16.quantize_saturating(70000.0), 65504.0);
        assert_eq!(FP16.quantize_saturating(f64::NEG_INFINITY), -65504.0);
    }

    #[test]
    fn signed_zero_and_specials() {
        assert_eq!(FP16.quantize(-0.0).to_bits(), (-0.0f64).to_bits());
        assert_eq!(FP16.quantize(0.0).to_bits(), 0.0f64.to_bits());
        // Tiny negatives underflow to negative zero.
        assert_eq!(FP16.quantize(-1e-300).to_bits(), (-0.0f64).to_bits());
        assert!(FP16.quantize(f64::NAN).is_nan());
        assert_eq!(FP16.quantize(f64::INFINITY), f64::INFINITY);
        assert!(E5M2.quantize(1e9).is_infinite());
    }

    #[test]
    fn quantize_complex_componentwise() {
        let z = Complex64::new(0.1, 0.2);
        let q = FP16.quantize_complex(z);
        assert_eq!(q, Complex64::new(0.0999755859375, 0.199951171875));
        let big = FP16.quantize_complex(Complex64::new(70000.0, -70000.0));
        assert_eq!(big.re, f64::INFINITY);
        assert_eq!(big.im, f64::NEG_INFINITY);
        assert_eq!(
            FP16.quantize_complex(Complex64::new(1.0, 0.0)),
            Complex64::new(1.0, 0.0)
        );
    }

    #[test]
    fn matches_enumeration_oracle() {
        let cases = [
            (FP16, EnumOracle::new(5, 10, false)),
            (E5M2, EnumOracle::new(5, 2, false)),
            (E4M3, EnumOracle::new(4, 3, true)),
        ];
        // Deterministic sweep: lattice points, midpoints, and offsets around
        // them, plus a coarse log sweep across the full range.
        for (fmt, oracle) in &cases {
            let mut probes: Vec<f64> = Vec::new();
            for w in oracle.lattice.windows(2) {
                let (a, b) = (w[0], w[1]);
                let mid = a + (b - a) / 2.0;
                probes.extend_from_slice(&[a, mid, mid * (1.0 + 1e-9), mid * (1.0 - 1e-9), b]);
            }
            probes.push(oracle.max_finite * 1.01);
            probes.push(oracle.max_finite * 10.0);
            probes.push((oracle.max_finite + oracle.next_above_max) / 2.0);
            for &p in &probes {
                for &x in &[p, -p] {
                    let got = fmt.quantize(x);
                    let want = oracle.quantize(x);
                    assert!(
                        got == want || (got.is_nan() && want.is_nan()),
                        "{}: quantize({x:e}) = {got:e}, oracle says {want:e}",
                        fmt.name
                    );
                }
            }
        }
    }

    #[test]
    fn exactness_on_small_integers() {
        for fmt in [FP16, BF16, E4M3, E5M2] {
            let top = 1u64 << (fmt.mantissa_bits + 1);
            for k in 0..=top {
                let x = k as f64;
                assert_eq!(fmt.quantize(x), x, "{} on {k}", fmt.name);
            }
        }
    }

    #[test]
    fn max_finite_round_trips() {
        for fmt in [FP16, BF16, E4M3, E5M2] {
            assert_eq!(fmt.quantize(fmt.max_finite), fmt.max_finite, "{}", fmt.name);
            assert_eq!(fmt.quantize(fmt.min_normal), fmt.min_normal, "{}", fmt.name);
        }
    }

    proptest! {
        #[test]
        fn idempotent(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            for fmt in [FP16, BF16, E4M3, E5M2] {
                let q = fmt.quantize(x);
                if q.is_finite() {
                    prop_assert_eq!(fmt.quantize(q).to_bits(), q.to_bits());
                }
            }
        }

        #[test]
        fn monotone(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for fmt in [FP16, BF16, E4M3, E5M2] {
                let (ql, qh) = (fmt.quantize(lo), fmt.quantize(hi));
                if ql.is_nan() || qh.is_nan() {
                    continue; // E4M3 overflow region has no order
                }
                prop_assert!(ql <= qh, "{}: q({lo}) = {ql} > q({hi}) = {qh}", fmt.name);
            }
        }

        #[test]
        fn relative_error_bound(x in 1e-3f64..1e3) {
            // Normal range for every built-in reduced format.
            for fmt in [FP16, BF16, E4M3, E5M2] {
                if x > fmt.max_finite || x < fmt.min_normal {
                    continue;
                }
                let q = fmt.quantize(x);
                let bound = exp2i(-(fmt.mantissa_bits as i32) - 1) * x * (1.0 + 1e-12);
                prop_assert!((q - x).abs() <= bound,
                    "{}: |q({x}) - {x}| = {} > {bound}", fmt.name, (q - x).abs());
            }
        }
    }
}
