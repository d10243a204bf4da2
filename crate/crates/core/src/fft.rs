//! Stockham autosort FFT parameterized by precision mode.
//!
//! The transform ping-pongs between two buffers and needs no bit-reversal
//! pass. Radix-2 is the baseline; radix-8 is available for lengths that are
//! powers of eight. Arithmetic is carried in f64 but every multiply, add,
//! and store is routed through the active mode's format quantizers, so the
//! numerical behaviour of a native reduced-precision kernel is reproduced
//! on any CPU.
//!
//! The inverse transform is realized as conj(FFT(conj z)) so the forward
//! butterfly is the only kernel. The 1/n inverse scale can be folded into
//! the conjugate pass (the block-floating-point shift) or applied at the
//! output, which reproduces the naive intermediate growth.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::formats::{NumericFormat, FP16, FP32, FP64};

/// Largest supported transform length.
pub const MAX_N: usize = 1 << 22;

/// The four pipeline precision modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrecisionMode {
    /// Everything at carrier precision; the reference path.
    Fp32,
    /// Storage, multiplies, and additions all quantized to fp16.
    PureFp16,
    /// fp16 storage, carrier-precision compute and accumulate.
    Fp16Storage,
    /// fp16 multiply operands, carrier-precision accumulation, fp16 storage.
    Fp16MulFp32Acc,
}

impl PrecisionMode {
    pub const ALL: [PrecisionMode; 4] = [
        PrecisionMode::Fp32,
        PrecisionMode::PureFp16,
        PrecisionMode::Fp16Storage,
        PrecisionMode::Fp16MulFp32Acc,
    ];

    pub fn formats(self) -> ModeFormats {
        match self {
            PrecisionMode::Fp32 => ModeFormats {
                storage: FP32,
                compute: FP32,
                accumulate: FP32,
            },
            PrecisionMode::PureFp16 => ModeFormats {
                storage: FP16,
                compute: FP16,
                accumulate: FP16,
            },
            PrecisionMode::Fp16Storage => ModeFormats {
                storage: FP16,
                compute: FP32,
                accumulate: FP32,
            },
            PrecisionMode::Fp16MulFp32Acc => ModeFormats {
                storage: FP16,
                compute: FP16,
                accumulate: FP32,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PrecisionMode::Fp32 => "fp32",
            PrecisionMode::PureFp16 => "pure-fp16",
            PrecisionMode::Fp16Storage => "fp16-storage",
            PrecisionMode::Fp16MulFp32Acc => "fp16-mul-fp32-acc",
        }
    }

    pub fn parse(s: &str) -> Option<PrecisionMode> {
        match s.replace('_', "-").as_str() {
            "fp32" => Some(PrecisionMode::Fp32),
            "pure-fp16" | "fp16" => Some(PrecisionMode::PureFp16),
            "fp16-storage" | "fp16-storage-fp32-compute" => Some(PrecisionMode::Fp16Storage),
            "fp16-mul-fp32-acc" | "fp16-multiply-fp32-accumulate" => {
                Some(PrecisionMode::Fp16MulFp32Acc)
            }
            _ => None,
        }
    }
}

impl std::fmt::Display for PrecisionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Storage / compute / accumulate format triple backing a transform.
///
/// Custom triples (e.g. FP8 storage with carrier compute for the format
/// sweep) are built directly; the four named modes convert via
/// [`PrecisionMode::formats`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeFormats {
    pub storage: NumericFormat,
    pub compute: NumericFormat,
    pub accumulate: NumericFormat,
}

impl ModeFormats {
    /// Storage-only emulation: values quantized at rest, arithmetic and
    /// twiddles at carrier precision.
    pub fn storage_only(storage: NumericFormat) -> Self {
        ModeFormats {
            storage,
            compute: FP64,
            accumulate: FP64,
        }
    }
}

impl From<PrecisionMode> for ModeFormats {
    fn from(m: PrecisionMode) -> Self {
        m.formats()
    }
}

/// Per-stage arithmetic observability: raw magnitudes before any format
/// rounding, stored magnitudes after, and counts of stored non-finite
/// components. Overflow is an observable here, not an error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct OpStats {
    /// Largest |value| handed to a quantizer (product, sum, or store input).
    pub max_abs_pre: f64,
    /// Largest finite |value| actually stored.
    pub max_abs_post: f64,
    /// Stored real components that are ±infinity.
    pub overflow_count: u64,
    /// Stored real components that are NaN.
    pub nan_count: u64,
}

impl OpStats {
    pub fn merge(&mut self, other: &OpStats) {
        self.max_abs_pre = self.max_abs_pre.max(other.max_abs_pre);
        self.max_abs_post = self.max_abs_post.max(other.max_abs_post);
        self.overflow_count += other.overflow_count;
        self.nan_count += other.nan_count;
    }

    pub fn merged<'a>(stats: impl IntoIterator<Item = &'a OpStats>) -> OpStats {
        let mut out = OpStats::default();
        for s in stats {
            out.merge(s);
        }
        out
    }
}

/// Mode arithmetic: every elementary operation quantizes per the format
/// triple and records magnitudes into an [`OpStats`].
pub(crate) struct Arith<'a> {
    m: ModeFormats,
    pub stats: &'a mut OpStats,
}

impl<'a> Arith<'a> {
    pub fn new(m: ModeFormats, stats: &'a mut OpStats) -> Self {
        Arith { m, stats }
    }

    #[inline]
    fn track_pre(&mut self, raw: f64) {
        let a = raw.abs();
        if a > self.stats.max_abs_pre {
            self.stats.max_abs_pre = a;
        }
    }

    /// Multiply in compute format, result rounded to accumulate format.
    #[inline]
    pub fn mul(&mut self, a: f64, b: f64) -> f64 {
        let raw = self.m.compute.quantize(a) * self.m.compute.quantize(b);
        self.track_pre(raw);
        self.m.accumulate.quantize(raw)
    }

    /// Add in accumulate format.
    #[inline]
    pub fn add(&mut self, a: f64, b: f64) -> f64 {
        let raw = a + b;
        self.track_pre(raw);
        self.m.accumulate.quantize(raw)
    }

    /// Round one real component to storage format and count the outcome.
    #[inline]
    pub fn store_re(&mut self, v: f64) -> f64 {
        self.track_pre(v);
        let q = self.m.storage.quantize(v);
        if q.is_nan() {
            self.stats.nan_count += 1;
        } else if q.is_infinite() {
            self.stats.overflow_count += 1;
        } else {
            let a = q.abs();
            if a > self.stats.max_abs_post {
                self.stats.max_abs_post = a;
            }
        }
        q
    }

    #[inline]
    pub fn store(&mut self, z: Complex64) -> Complex64 {
        Complex64::new(self.store_re(z.re), self.store_re(z.im))
    }

    /// Standard direct-multiply complex product: 4 multiplies, 2 adds.
    #[inline]
    pub fn cmul(&mut self, a: Complex64, b: Complex64) -> Complex64 {
        let rr = self.mul(a.re, b.re);
        let ii = self.mul(a.im, b.im);
        let ri = self.mul(a.re, b.im);
        let ir = self.mul(a.im, b.re);
        Complex64::new(self.add(rr, -ii), self.add(ri, ir))
    }

    #[inline]
    pub fn cadd(&mut self, a: Complex64, b: Complex64) -> Complex64 {
        Complex64::new(self.add(a.re, b.re), self.add(a.im, b.im))
    }

    #[inline]
    pub fn csub(&mut self, a: Complex64, b: Complex64) -> Complex64 {
        Complex64::new(self.add(a.re, -b.re), self.add(a.im, -b.im))
    }

    /// Multiply by c·(1 - i) or c·(-1 - i): two real multiplies, two adds.
    #[inline]
    fn mul_omega8(&mut self, z: Complex64, c: f64, negate_re: bool) -> Complex64 {
        let sum = self.add(z.re, z.im);
        let diff = self.add(z.im, -z.re);
        if negate_re {
            // z * (-c - ic) = c(y - x) - i c(x + y)
            Complex64::new(self.mul(c, diff), -self.mul(c, sum))
        } else {
            // z * (c - ic) = c(x + y) + i c(y - x)
            Complex64::new(self.mul(c, sum), self.mul(c, diff))
        }
    }
}

/// Multiplication by -i is an exact swap/negate; no arithmetic, no rounding.
#[inline]
fn mul_neg_i(z: Complex64) -> Complex64 {
    Complex64::new(z.im, -z.re)
}

#[inline]
fn mul_pos_i(z: Complex64) -> Complex64 {
    Complex64::new(-z.im, z.re)
}

/// Transform plan: length, radix decomposition, quantized twiddle table,
/// and the format triple. Immutable after construction; shareable across
/// threads.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    radix: usize,
    stages: u32,
    mode: ModeFormats,
    /// twiddles[k] = quantize(compute, e^(-2πik/n)); length n/2 for radix-2
    /// plans, n for radix-8 (whose butterflies index past the half circle).
    twiddles: Vec<Complex64>,
    /// √2/2 in compute format, the only irrational constant of the radix-8
    /// kernel.
    half_sqrt2: f64,
}

impl FftPlan {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radix(&self) -> usize {
        self.radix
    }

    pub fn stages(&self) -> u32 {
        self.stages
    }

    pub fn mode(&self) -> ModeFormats {
        self.mode
    }

    pub fn twiddles(&self) -> &[Complex64] {
        &self.twiddles
    }
}

/// Build a transform plan. `n` must be a power of `radix` (2 or 8),
/// at least `radix`, and at most [`MAX_N`]. Twiddles are generated by
/// binary64 trigonometry per element and quantized to the compute format;
/// no recurrence is used.
pub fn make_plan(n: usize, radix: usize, mode: impl Into<ModeFormats>) -> Result<FftPlan> {
    let mode = mode.into();
    if radix != 2 && radix != 8 {
        return Err(Error::InvalidPlan(format!(
            "radix must be 2 or 8, got {radix}"
        )));
    }
    if n < radix {
        return Err(Error::InvalidPlan(format!(
            "n must be at least the radix: n = {n}, radix = {radix}"
        )));
    }
    if n > MAX_N {
        return Err(Error::InvalidPlan(format!(
            "n must be at most {MAX_N}, got {n}"
        )));
    }
    let mut stages = 0u32;
    let mut m = n;
    while m > 1 {
        if !m.is_multiple_of(radix) {
            return Err(Error::InvalidPlan(format!(
                "n must be a power of radix {radix}: got {n}"
            )));
        }
        m /= radix;
        stages += 1;
    }

    let table_len = if radix == 2 { n / 2 } else { n };
    let mut twiddles = Vec::with_capacity(table_len);
    for k in 0..table_len {
        let theta = -TAU * (k as f64) / (n as f64);
        twiddles.push(mode.compute.quantize_complex(Complex64::new(
            theta.cos(),
            theta.sin(),
        )));
    }
    Ok(FftPlan {
        n,
        radix,
        stages,
        mode,
        twiddles,
        half_sqrt2: mode.compute.quantize(std::f64::consts::FRAC_1_SQRT_2),
    })
}

/// Transform output together with per-stage arithmetic statistics
/// (`stage_stats[s]` covers Stockham stage `s`, input re-quantization
/// excluded).
pub struct FftRun {
    pub data: Vec<Complex64>,
    pub stage_stats: Vec<OpStats>,
}

impl FftRun {
    /// All stages folded into one.
    pub fn aggregate(&self) -> OpStats {
        OpStats::merged(&self.stage_stats)
    }
}

fn check_len(plan: &FftPlan, data: &[Complex64]) -> Result<()> {
    if data.len() != plan.n {
        return Err(Error::LengthMismatch {
            expected: plan.n,
            got: data.len(),
        });
    }
    Ok(())
}

/// Unnormalized forward DFT, X[k] = Σ x[j]·e^(-2πijk/n), via Stockham
/// stages in the plan's precision mode. The input is re-quantized to the
/// storage format on entry so mode semantics hold regardless of caller
/// discipline. Specials (inf/NaN) propagate, never trapped.
pub fn fft_forward(plan: &FftPlan, data: &[Complex64]) -> Result<Vec<Complex64>> {
    Ok(fft_forward_traced(plan, data)?.data)
}

/// As [`fft_forward`] but returning per-stage statistics.
pub fn fft_forward_traced(plan: &FftPlan, data: &[Complex64]) -> Result<FftRun> {
    check_len(plan, data)?;
    let mut src: Vec<Complex64> = data
        .iter()
        .map(|&z| plan.mode.storage.quantize_complex(z))
        .collect();
    let mut dst = vec![Complex64::new(0.0, 0.0); plan.n];
    let mut stage_stats = Vec::with_capacity(plan.stages as usize);

    // n_stage: remaining sub-transform length; s: count of (interleaved)
    // sub-sequences already resolved. After each stage the buffers swap.
    let mut n_stage = plan.n;
    let mut s = 1usize;
    while n_stage > 1 {
        let mut stats = OpStats::default();
        {
            let mut ar = Arith::new(plan.mode, &mut stats);
            if plan.radix == 2 {
                stage_radix2(plan, &src, &mut dst, n_stage, s, &mut ar);
            } else {
                stage_radix8(plan, &src, &mut dst, n_stage, s, &mut ar);
            }
        }
        stage_stats.push(stats);
        n_stage /= plan.radix;
        s *= plan.radix;
        std::mem::swap(&mut src, &mut dst);
    }

    Ok(FftRun {
        data: src,
        stage_stats,
    })
}

/// One radix-2 Stockham DIF stage: dst[q + s(2p+0)] = a + b,
/// dst[q + s(2p+1)] = (a - b)·w_p, with w_p = e^(-2πip/n_stage).
fn stage_radix2(
    plan: &FftPlan,
    src: &[Complex64],
    dst: &mut [Complex64],
    n_stage: usize,
    s: usize,
    ar: &mut Arith,
) {
    let half = n_stage / 2;
    let stride = plan.n / n_stage;
    for p in 0..half {
        let w = plan.twiddles[p * stride];
        for q in 0..s {
            let a = src[q + s * p];
            let b = src[q + s * (p + half)];
            let sum = ar.cadd(a, b);
            let diff = ar.csub(a, b);
            let prod = ar.cmul(diff, w);
            dst[q + s * 2 * p] = ar.store(sum);
            dst[q + s * (2 * p + 1)] = ar.store(prod);
        }
    }
}

/// One radix-8 Stockham DIF stage. The 8-point kernel is three layers of
/// add/sub plus exact ±i swaps and two real multiplies by √2/2 per ω₈^±1
/// factor; output r then picks up the stage twiddle ω^(p·r).
fn stage_radix8(
    plan: &FftPlan,
    src: &[Complex64],
    dst: &mut [Complex64],
    n_stage: usize,
    s: usize,
    ar: &mut Arith,
) {
    let m = n_stage / 8;
    let stride = plan.n / n_stage;
    let c8 = plan.half_sqrt2;
    for p in 0..m {
        for q in 0..s {
            let a: [Complex64; 8] = std::array::from_fn(|t| src[q + s * (p + m * t)]);

            let t0 = ar.cadd(a[0], a[4]);
            let t1 = ar.cadd(a[1], a[5]);
            let t2 = ar.cadd(a[2], a[6]);
            let t3 = ar.cadd(a[3], a[7]);
            let d0 = ar.csub(a[0], a[4]);
            let d1 = ar.csub(a[1], a[5]);
            let d2 = ar.csub(a[2], a[6]);
            let d3 = ar.csub(a[3], a[7]);

            // Even outputs: DFT-4 of (t0..t3).
            let u0 = ar.cadd(t0, t2);
            let u2 = ar.csub(t0, t2);
            let u1 = ar.cadd(t1, t3);
            let u3 = ar.csub(t1, t3);
            let b0 = ar.cadd(u0, u1);
            let b4 = ar.csub(u0, u1);
            let b2 = ar.cadd(u2, mul_neg_i(u3));
            let b6 = ar.cadd(u2, mul_pos_i(u3));

            // Odd outputs: DFT-4 of d_t · ω₈^t.
            let c0 = d0;
            let c1 = ar.mul_omega8(d1, c8, false);
            let c2 = mul_neg_i(d2);
            let c3 = ar.mul_omega8(d3, c8, true);
            let v0 = ar.cadd(c0, c2);
            let v2 = ar.csub(c0, c2);
            let v1 = ar.cadd(c1, c3);
            let v3 = ar.csub(c1, c3);
            let b1 = ar.cadd(v0, v1);
            let b5 = ar.csub(v0, v1);
            let b3 = ar.cadd(v2, mul_neg_i(v3));
            let b7 = ar.cadd(v2, mul_pos_i(v3));

            let b = [b0, b1, b2, b3, b4, b5, b6, b7];
            for (r, &val) in b.iter().enumerate() {
                let out = if r == 0 || p == 0 {
                    val
                } else {
                    let w = plan.twiddles[(p * r * stride) % plan.n];
                    ar.cmul(val, w)
                };
                dst[q + s * (8 * p + r)] = ar.store(out);
            }
        }
    }
}

/// Quantize a sequence to the mode's storage format, recording stats:
/// models loading a buffer into reduced-precision memory.
pub(crate) fn store_pass(
    data: &[Complex64],
    mode: ModeFormats,
    stats: &mut OpStats,
) -> Vec<Complex64> {
    let mut ar = Arith::new(mode, stats);
    data.iter().map(|&z| ar.store(z)).collect()
}

/// Elementwise product against a prepared filter in mode arithmetic,
/// result stored: the matched-filter multiply step.
pub(crate) fn multiply_store(
    data: &[Complex64],
    filter: &[Complex64],
    mode: ModeFormats,
    stats: &mut OpStats,
) -> Vec<Complex64> {
    let mut ar = Arith::new(mode, stats);
    data.iter()
        .zip(filter)
        .map(|(&z, &h)| {
            let p = ar.cmul(z, h);
            ar.store(p)
        })
        .collect()
}

/// Scale-and-conjugate pass shared by the inverse paths: z ↦ conj(z)·scale,
/// stored in the mode's storage format. With scale = 1/n this is the
/// block-floating-point shift.
pub(crate) fn conj_scale_store(
    data: &[Complex64],
    scale: f64,
    mode: ModeFormats,
    stats: &mut OpStats,
) -> Vec<Complex64> {
    let mut ar = Arith::new(mode, stats);
    data.iter()
        .map(|z| ar.store(Complex64::new(z.re * scale, -z.im * scale)))
        .collect()
}

/// Where the inverse transform's 1/n scale is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseScaling {
    /// Folded into the pre-transform conjugate pass: the block shift.
    /// Bounds every intermediate by O(n) for a unit-scale spectrum.
    BlockShift,
    /// Conventional division at the output; intermediates grow to O(n²).
    DivideAtOutput,
    /// No scale at all: the caller owns the n-fold growth factor. A
    /// shift-less multi-transform pipeline is in this state between
    /// stages, which is what lets overflow cascade.
    Deferred,
}

/// Inverse DFT via conj(FFT(conj z)), in the plan's precision mode.
///
/// With `apply_block_shift` the 1/n scale is folded into the conjugate
/// pass before the transform, bounding every intermediate by O(n) for a
/// unit-scale spectrum. Without it the division happens at the output,
/// reproducing the naive O(n²) intermediate growth.
pub fn ifft_via_conj(
    plan: &FftPlan,
    data: &[Complex64],
    apply_block_shift: bool,
) -> Result<Vec<Complex64>> {
    let scaling = if apply_block_shift {
        InverseScaling::BlockShift
    } else {
        InverseScaling::DivideAtOutput
    };
    Ok(ifft_with_scaling(plan, data, scaling)?.data)
}

/// As [`ifft_via_conj`] but with an explicit scaling policy;
/// `stage_stats` is [pre-pass, transform stages..., finalize] so the
/// scale/conjugate passes are observable separately.
pub fn ifft_with_scaling(
    plan: &FftPlan,
    data: &[Complex64],
    scaling: InverseScaling,
) -> Result<FftRun> {
    check_len(plan, data)?;
    let n = plan.n;
    let inv_n = 1.0 / n as f64; // power of two, exactly representable

    let mut pre = OpStats::default();
    let scale = if scaling == InverseScaling::BlockShift {
        inv_n
    } else {
        1.0
    };
    let conjugated = conj_scale_store(data, scale, plan.mode, &mut pre);

    let run = fft_forward_traced(plan, &conjugated)?;

    let mut fin = OpStats::default();
    let out_scale = if scaling == InverseScaling::DivideAtOutput {
        inv_n
    } else {
        1.0
    };
    let output = conj_scale_store(&run.data, out_scale, plan.mode, &mut fin);

    let mut stage_stats = Vec::with_capacity(run.stage_stats.len() + 2);
    stage_stats.push(pre);
    stage_stats.extend(run.stage_stats);
    stage_stats.push(fin);
    Ok(FftRun {
        data: output,
        stage_stats,
    })
}

/// As [`ifft_via_conj`], returning per-stage statistics.
pub fn ifft_via_conj_traced(
    plan: &FftPlan,
    data: &[Complex64],
    apply_block_shift: bool,
) -> Result<FftRun> {
    let scaling = if apply_block_shift {
        InverseScaling::BlockShift
    } else {
        InverseScaling::DivideAtOutput
    };
    ifft_with_scaling(plan, data, scaling)
}

/// Direct O(n²) DFT summation at binary64: the ground truth for every
/// SQNR measurement. The phase table is built by f64 trigonometry and the
/// summation order is plain left-to-right.
pub fn dft_oracle(data: &[Complex64]) -> Vec<Complex64> {
    let n = data.len();
    if n == 0 {
        return Vec::new();
    }
    let table: Vec<Complex64> = (0..n)
        .map(|t| {
            let theta = -TAU * (t as f64) / (n as f64);
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect();
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &x) in data.iter().enumerate() {
                acc += x * table[(j * k) % n];
            }
            acc
        })
        .collect()
}

/// Inverse counterpart of [`dft_oracle`], normalized by 1/n.
pub fn idft_oracle(data: &[Complex64]) -> Vec<Complex64> {
    let n = data.len();
    let conj: Vec<Complex64> = data.iter().map(|z| z.conj()).collect();
    dft_oracle(&conj)
        .iter()
        .map(|z| z.conj() / n as f64)
        .collect()
}
