//! Fixed-shift block-floating-point schedule and the stage-by-stage
//! magnitude tracer.
//!
//! The inverse transform's growth factor is data-independent (exactly n),
//! so a single 1/n scale folded into the pre-inverse conjugate pass bounds
//! every intermediate; no conditional per-stage scaling is needed. The
//! tracer runs a matched-filter compression step by step, recording
//! magnitude statistics per named pipeline stage alongside a binary64
//! shadow execution that shows what the magnitudes reach when no format
//! ceiling is in the way.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::Result;
use crate::fft::{
    conj_scale_store, fft_forward_traced, make_plan, multiply_store, store_pass, FftPlan,
    ModeFormats, OpStats, PrecisionMode,
};

/// Magnitude statistics for one named pipeline stage.
#[derive(Debug, Clone, Serialize)]
pub struct StageTrace {
    pub stage_label: String,
    /// Largest finite magnitude actually stored in the active format.
    pub max_abs: f64,
    /// Largest raw magnitude handed to a quantizer inside the stage;
    /// stays visible even when the stored value is already ±infinity.
    pub max_abs_pre: f64,
    /// Stored real components that quantized to ±infinity.
    pub overflow_count: u64,
    /// Stored real components that are NaN.
    pub nan_count: u64,
    /// Magnitude the same stage reaches in unbounded binary64 arithmetic.
    pub theoretical_bound: f64,
}

impl StageTrace {
    fn from_stats(label: impl Into<String>, stats: &OpStats, shadow: &OpStats) -> Self {
        StageTrace {
            stage_label: label.into(),
            max_abs: stats.max_abs_post,
            max_abs_pre: stats.max_abs_pre,
            overflow_count: stats.overflow_count,
            nan_count: stats.nan_count,
            theoretical_bound: shadow.max_abs_pre.max(shadow.max_abs_post),
        }
    }
}

/// Full tracer output: per-stage rows plus the final sequence.
#[derive(Debug, Clone)]
pub struct TraceReport {
    pub stages: Vec<StageTrace>,
    pub output: Vec<Complex64>,
    /// Fraction of output samples with a NaN component.
    pub nan_fraction: f64,
}

/// The block shift: each sample z becomes conj(z)/n, quantized to the
/// active storage format. 1/n is a power of two, so the scale itself is
/// exact in any binary format; it commutes with the transform, making the
/// result equal to conventional output scaling.
pub fn block_shift_conjugate(
    data: &[Complex64],
    n: usize,
    mode: ModeFormats,
) -> (Vec<Complex64>, OpStats) {
    let mut stats = OpStats::default();
    let shifted = conj_scale_store(data, 1.0 / n as f64, mode, &mut stats);
    (shifted, stats)
}

/// Unit-amplitude linear-FM probe spanning the whole record with a small
/// time-bandwidth product. Its spectrum is a handful of near-coherent bins
/// at O(n) and its energy is n, so the unnormalized matched-filter product
/// reaches ~n²/2 and the inverse-transform intermediates reach n² — the
/// worst-case growth the fixed shift has to contain.
pub fn trace_probe(n: usize) -> Vec<Complex64> {
    const TIME_BANDWIDTH: f64 = 2.0;
    (0..n)
        .map(|j| {
            let t = j as f64 / n as f64 - 0.5;
            let phase = PI * TIME_BANDWIDTH * t * t;
            Complex64::new(phase.cos(), phase.sin())
        })
        .collect()
}

struct TracePath {
    plan: FftPlan,
    rows: Vec<(String, OpStats)>,
    output: Vec<Complex64>,
}

/// One full matched-filter pass (load, forward, multiply, conjugate/shift,
/// inverse) in the given mode, recording per-step and optionally per-FFT-
/// stage statistics.
fn run_trace_path(
    n: usize,
    mode: ModeFormats,
    probe: &[Complex64],
    filter: &[Complex64],
    with_shift: bool,
    per_fft_stage: bool,
) -> Result<TracePath> {
    let plan = make_plan(n, 2, mode)?;
    let mut rows: Vec<(String, OpStats)> = Vec::new();

    let mut input_stats = OpStats::default();
    let x = store_pass(probe, mode, &mut input_stats);
    rows.push(("input".into(), input_stats));

    let fwd = fft_forward_traced(&plan, &x)?;
    rows.push(("forward_fft".into(), fwd.aggregate()));
    if per_fft_stage {
        for (s, st) in fwd.stage_stats.iter().enumerate() {
            rows.push((format!("forward_fft/stage{s:02}"), *st));
        }
    }

    let mut h_stats = OpStats::default();
    let h = store_pass(filter, mode, &mut h_stats);
    let mut prod_stats = OpStats::default();
    let z = multiply_store(&fwd.data, &h, mode, &mut prod_stats);
    rows.push(("matched_filter_product".into(), prod_stats));

    let scale = if with_shift { 1.0 / n as f64 } else { 1.0 };
    let mut conj_stats = OpStats::default();
    let z2 = conj_scale_store(&z, scale, mode, &mut conj_stats);
    rows.push((
        if with_shift { "block_shift" } else { "conjugate" }.into(),
        conj_stats,
    ));

    let inv = fft_forward_traced(&plan, &z2)?;
    let out_scale = if with_shift { 1.0 } else { 1.0 / n as f64 };
    let mut fin_stats = OpStats::default();
    let output = conj_scale_store(&inv.data, out_scale, mode, &mut fin_stats);
    let mut inv_agg = inv.aggregate();
    inv_agg.merge(&fin_stats);
    rows.push(("inverse_fft".into(), inv_agg));
    if per_fft_stage {
        for (s, st) in inv.stage_stats.iter().enumerate() {
            rows.push((format!("inverse_fft/stage{s:02}"), *st));
        }
    }

    Ok(TracePath { plan, rows, output })
}

/// Run the matched-filter magnitude trace: forward FFT, filter multiply,
/// optional block shift, inverse, with a StageTrace recorded after each
/// step. Overflow is the observable, not an error. The filter is the
/// conjugate spectrum of the probe itself, optionally normalized to
/// max |H| = 1 (the quality configuration); unnormalized reproduces the
/// failure ledger.
pub fn trace_matched_filter(
    n: usize,
    mode: PrecisionMode,
    with_shift: bool,
    normalize_filter: bool,
) -> Result<TraceReport> {
    trace_matched_filter_detailed(n, mode, with_shift, normalize_filter, false)
}

/// As [`trace_matched_filter`], optionally adding one row per FFT stage
/// inside the two transforms.
pub fn trace_matched_filter_detailed(
    n: usize,
    mode: PrecisionMode,
    with_shift: bool,
    normalize_filter: bool,
    per_fft_stage: bool,
) -> Result<TraceReport> {
    let probe = trace_probe(n);

    // Filter prepared offline at carrier precision: conjugate spectrum of
    // the replica.
    let ref_plan = make_plan(n, 2, PrecisionMode::Fp32)?;
    let spectrum = crate::fft::fft_forward(&ref_plan, &probe)?;
    let mut filter: Vec<Complex64> = spectrum.iter().map(|z| z.conj()).collect();
    if normalize_filter {
        let peak = filter.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        if peak > 0.0 {
            for h in filter.iter_mut() {
                *h /= peak;
            }
        }
    }

    let quantized = run_trace_path(
        n,
        mode.formats(),
        &probe,
        &filter,
        with_shift,
        per_fft_stage,
    )?;
    let shadow = run_trace_path(
        n,
        PrecisionMode::Fp32.formats(),
        &probe,
        &filter,
        with_shift,
        per_fft_stage,
    )?;
    debug_assert_eq!(quantized.rows.len(), shadow.rows.len());
    let _ = &quantized.plan;

    let stages = quantized
        .rows
        .iter()
        .zip(&shadow.rows)
        .map(|((label, stats), (_, sh))| StageTrace::from_stats(label.clone(), stats, sh))
        .collect();

    let nan = quantized
        .output
        .iter()
        .filter(|z| z.re.is_nan() || z.im.is_nan())
        .count();
    let nan_fraction = nan as f64 / n as f64;

    Ok(TraceReport {
        stages,
        output: quantized.output,
        nan_fraction,
    })
}
