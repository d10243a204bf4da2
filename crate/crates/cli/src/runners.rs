//! The five experiments behind the `bfpfft` subcommands. Each runner
//! writes its tables/plots and returns check results when `--check` is
//! active; checks encode the suite's fixed bounds so CI can run the
//! claims as tests.

use std::path::Path;

use bfpfft_core::bfp::{trace_matched_filter_detailed, TraceReport};
use bfpfft_core::experiments::{fft_sqnr_stats, random_unit_signal, storage_sweep_stats};
use bfpfft_core::fft::{fft_forward, make_plan, PrecisionMode};
use bfpfft_core::formats::{format_table, NumericFormat, BF16, E4M3, E5M2, FP16};
use bfpfft_core::sar::{
    build_quality_report, run_rda_image, write_raw_image, QualityReport, RdaOptions,
    SarSceneConfig,
};
use num_complex::Complex64;

use crate::emit::{bar_chart_svg, digest, num, write_magnitude_png, write_table, EmitSet, Table};

pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn bounded(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Check {
        Check {
            name: name.into(),
            pass: (lo..=hi).contains(&value),
            detail: format!("{} vs [{lo}, {hi}]", num(value)),
        }
    }

    fn at_least(name: impl Into<String>, value: f64, lo: f64) -> Check {
        Check {
            name: name.into(),
            pass: value >= lo,
            detail: format!("{} vs >= {lo}", num(value)),
        }
    }

    fn at_most(name: impl Into<String>, value: f64, hi: f64) -> Check {
        Check {
            name: name.into(),
            pass: value <= hi,
            detail: format!("{} vs <= {hi}", num(value)),
        }
    }
}

pub struct RunConfig {
    pub sizes: Vec<usize>,
    pub modes: Vec<PrecisionMode>,
    pub trials: usize,
    pub seed: u64,
    pub bfp_on: bool,
    pub bfp_off: bool,
    pub normalize_filter: bool,
    pub emit: EmitSet,
    pub check: bool,
    pub raw_images: bool,
}

fn format_table_version() -> String {
    let desc: String = format_table()
        .iter()
        .map(|f| format!("{}:{}e{}m;", f.name, f.exponent_bits, f.mantissa_bits))
        .collect();
    digest(&desc)
}

fn base_meta(table: &mut Table, canonical: &str, seed: u64) {
    table.meta("config_digest", digest(canonical));
    table.meta("format_table", format_table_version());
    table.meta("seed", seed.to_string());
}

/// Forward-transform SQNR grid over sizes and modes.
pub fn run_fft_sqnr(cfg: &RunConfig, out_dir: &Path) -> std::io::Result<Vec<Check>> {
    let canonical = format!(
        "fft-sqnr sizes={:?} modes={:?} trials={} seed={}",
        cfg.sizes,
        cfg.modes.iter().map(|m| m.name()).collect::<Vec<_>>(),
        cfg.trials,
        cfg.seed
    );
    let mut table = Table::new(
        "fft-sqnr",
        vec![
            "n",
            "radix",
            "mode",
            "trials",
            "mean_sqnr_db",
            "median_sqnr_db",
        ],
    );
    base_meta(&mut table, &canonical, cfg.seed);

    let mut checks = Vec::new();
    for &n in &cfg.sizes {
        for &mode in &cfg.modes {
            let stats = fft_sqnr_stats(n, 2, mode, cfg.trials, cfg.seed)
                .map_err(std::io::Error::other)?;
            table.rows.push(vec![
                n.to_string(),
                "2".into(),
                mode.name().into(),
                cfg.trials.to_string(),
                num(stats.mean_db),
                num(stats.median_db),
            ]);
            if cfg.check {
                if mode == PrecisionMode::PureFp16 && (n == 1024 || n == 4096) {
                    checks.push(Check::bounded(
                        format!("fft-sqnr pure-fp16 n={n} mean in [56, 64] dB"),
                        stats.mean_db,
                        56.0,
                        64.0,
                    ));
                }
                if mode == PrecisionMode::Fp32 {
                    checks.push(Check::at_least(
                        format!("fft-sqnr fp32 n={n} mean >= 120 dB"),
                        stats.mean_db,
                        120.0,
                    ));
                }
            }
        }
    }
    write_table(out_dir, "fft-sqnr", &table, cfg.emit)?;
    Ok(checks)
}

fn trace_slug(n: usize, mode: PrecisionMode, shift: bool, norm: bool) -> String {
    format!(
        "fft-trace-n{n}-{}-{}-{}",
        mode.name(),
        if shift { "shift" } else { "noshift" },
        if norm { "norm" } else { "unnorm" }
    )
}

/// Matched-filter magnitude trace over the shift × filter-normalization
/// grid, with per-stage bar plots against the fp16 ceiling.
pub fn run_fft_trace(cfg: &RunConfig, out_dir: &Path) -> std::io::Result<Vec<Check>> {
    let canonical = format!(
        "fft-trace sizes={:?} modes={:?} seed={}",
        cfg.sizes,
        cfg.modes.iter().map(|m| m.name()).collect::<Vec<_>>(),
        cfg.seed
    );
    let mut table = Table::new(
        "fft-trace",
        vec![
            "n",
            "mode",
            "with_shift",
            "normalize_filter",
            "stage",
            "max_abs",
            "max_abs_pre",
            "overflow_count",
            "nan_count",
            "theoretical_bound",
            "output_nan_fraction",
        ],
    );
    base_meta(&mut table, &canonical, cfg.seed);

    let mut checks = Vec::new();
    for &n in &cfg.sizes {
        for &mode in &cfg.modes {
            for shift in [true, false] {
                for norm in [true, false] {
                    let report = trace_matched_filter_detailed(n, mode, shift, norm, true)
                        .map_err(std::io::Error::other)?;
                    for st in &report.stages {
                        table.rows.push(vec![
                            n.to_string(),
                            mode.name().into(),
                            shift.to_string(),
                            norm.to_string(),
                            st.stage_label.clone(),
                            num(st.max_abs),
                            num(st.max_abs_pre),
                            st.overflow_count.to_string(),
                            st.nan_count.to_string(),
                            num(st.theoretical_bound),
                            num(report.nan_fraction),
                        ]);
                    }
                    if cfg.emit.svg {
                        let steps: Vec<_> = report
                            .stages
                            .iter()
                            .filter(|s| !s.stage_label.contains("/stage"))
                            .collect();
                        let labels: Vec<String> =
                            steps.iter().map(|s| s.stage_label.clone()).collect();
                        let values: Vec<f64> = steps
                            .iter()
                            .map(|s| {
                                if s.nan_count + s.overflow_count > 0 {
                                    f64::INFINITY
                                } else {
                                    s.max_abs
                                }
                            })
                            .collect();
                        let svg = bar_chart_svg(
                            &format!(
                                "{} n={n} shift={} normalized={} (stored magnitude vs 65504)",
                                mode.name(),
                                shift,
                                norm
                            ),
                            &labels,
                            &values,
                            Some(65504.0),
                        );
                        std::fs::write(
                            out_dir.join(format!("{}.svg", trace_slug(n, mode, shift, norm))),
                            svg,
                        )?;
                    }
                    if cfg.check && n == 4096 && mode == PrecisionMode::PureFp16 {
                        trace_checks(&report, shift, norm, &mut checks);
                    }
                }
            }
            if cfg.check && n == 4096 && mode == PrecisionMode::Fp32 {
                let a = trace_matched_filter_detailed(n, mode, true, true, false)
                    .map_err(std::io::Error::other)?;
                let b = trace_matched_filter_detailed(n, mode, false, true, false)
                    .map_err(std::io::Error::other)?;
                let err: f64 = a
                    .output
                    .iter()
                    .zip(&b.output)
                    .map(|(x, y)| (x - y).norm_sqr())
                    .sum();
                let reference: f64 = b.output.iter().map(|y| y.norm_sqr()).sum();
                checks.push(Check::at_most(
                    "fft-trace fp32 shift-vs-divide rel RMS <= 1e-6",
                    (err / reference).sqrt(),
                    1e-6,
                ));
            }
        }
    }
    write_table(out_dir, "fft-trace", &table, cfg.emit)?;
    Ok(checks)
}

fn trace_checks(report: &TraceReport, shift: bool, norm: bool, checks: &mut Vec<Check>) {
    let stage = |label: &str| report.stages.iter().find(|s| s.stage_label == label);
    match (shift, norm) {
        (false, false) => {
            if let Some(prod) = stage("matched_filter_product") {
                checks.push(Check::at_least(
                    "fft-trace unshifted product pre-quant max >= 1e6",
                    prod.max_abs_pre,
                    1e6,
                ));
            }
            if let Some(inv) = stage("inverse_fft") {
                checks.push(Check::at_least(
                    "fft-trace unshifted inverse pre-quant max >= 1e7",
                    inv.max_abs_pre,
                    1e7,
                ));
            }
            checks.push(Check::at_least(
                "fft-trace unshifted output NaN fraction > 0.99",
                report.nan_fraction,
                0.99 + f64::EPSILON,
            ));
        }
        (true, true) => {
            let bound = 4096.0 * (1.0 + 2f64.powi(-9));
            let worst = report
                .stages
                .iter()
                .map(|s| s.max_abs)
                .fold(0.0f64, f64::max);
            let nonfinite: u64 = report
                .stages
                .iter()
                .map(|s| s.overflow_count + s.nan_count)
                .sum();
            checks.push(Check::at_most(
                "fft-trace shifted stored max <= 4096*(1+2^-9)",
                worst,
                bound,
            ));
            checks.push(Check::at_most(
                "fft-trace shifted overflow+NaN count == 0",
                nonfinite as f64,
                0.0,
            ));
        }
        _ => {}
    }
}

fn push_quality_rows(table: &mut Table, n: usize, bfp: bool, norm: bool, report: &QualityReport) {
    let run_cells = |target: String, rest: Vec<String>| -> Vec<String> {
        let mut row = vec![
            n.to_string(),
            report.mode.name().into(),
            bfp.to_string(),
            norm.to_string(),
            target,
        ];
        row.extend(rest);
        row.push(num(report.nan_fraction));
        row.push(
            report
                .end_to_end_sqnr_db
                .map(num)
                .unwrap_or_else(|| "suppressed".into()),
        );
        row.push(num(report.prf_hz));
        row.push(num(report.pulse_duration_s));
        row
    };
    if report.per_target.is_empty() {
        // Metrics suppressed: the image is dominated by NaN.
        table.rows.push(run_cells("-".into(), vec!["-".into(); 7]));
    }
    for t in &report.per_target {
        table.rows.push(run_cells(
            format!("T{}", t.index),
            vec![
                t.peak_row.to_string(),
                t.peak_col.to_string(),
                num(t.pslr_db),
                num(t.islr_db),
                num(t.snr_db),
                num(t.range_res_bins),
                num(t.azimuth_res_bins),
            ],
        ));
    }
}

/// Full imaging runs per mode, with and without the block shift, plus the
/// delta table against the full-precision reference.
pub fn run_sar(cfg: &RunConfig, out_dir: &Path, scene_n: usize) -> std::io::Result<Vec<Check>> {
    let config = SarSceneConfig::desk_default(scene_n, scene_n);
    let canonical = format!(
        "sar n={scene_n} modes={:?} seed={} bfp=({},{}) norm={} scene={}",
        cfg.modes.iter().map(|m| m.name()).collect::<Vec<_>>(),
        cfg.seed,
        cfg.bfp_on,
        cfg.bfp_off,
        cfg.normalize_filter,
        config.digest()
    );
    let mut quality = Table::new(
        "sar",
        vec![
            "n",
            "mode",
            "bfp",
            "normalize_filter",
            "target",
            "peak_row",
            "peak_col",
            "pslr_db",
            "islr_db",
            "snr_db",
            "range_res_bins",
            "azimuth_res_bins",
            "nan_fraction",
            "end_to_end_sqnr_db",
            "prf_hz",
            "pulse_duration_s",
        ],
    );
    base_meta(&mut quality, &canonical, cfg.seed);
    let mut deltas = Table::new(
        "sar-deltas",
        vec![
            "n",
            "mode",
            "target",
            "d_pslr_db",
            "d_islr_db",
            "d_snr_db",
            "d_range_res_bins",
            "d_azimuth_res_bins",
        ],
    );
    base_meta(&mut deltas, &canonical, cfg.seed);

    let reference = run_rda_image(
        &config,
        PrecisionMode::Fp32,
        RdaOptions {
            bfp: true,
            normalize_filter: true,
            seed: cfg.seed,
        },
    )
    .map_err(std::io::Error::other)?;
    let ref_report =
        build_quality_report(&config, &reference, &reference, PrecisionMode::Fp32, true)
            .map_err(std::io::Error::other)?;

    let mut checks = Vec::new();
    for &mode in &cfg.modes {
        let mut cells = Vec::new();
        if cfg.bfp_on {
            cells.push((true, true)); // quality cells always use |H| <= 1
        }
        if cfg.bfp_off {
            cells.push((false, cfg.normalize_filter));
        }
        for (bfp, norm) in cells {
            let image = if mode == PrecisionMode::Fp32 && bfp {
                reference.clone()
            } else {
                run_rda_image(
                    &config,
                    mode,
                    RdaOptions {
                        bfp,
                        normalize_filter: norm,
                        seed: cfg.seed,
                    },
                )
                .map_err(std::io::Error::other)?
            };
            let report = build_quality_report(&config, &image, &reference, mode, bfp)
                .map_err(std::io::Error::other)?;
            push_quality_rows(&mut quality, scene_n, bfp, norm, &report);

            if bfp {
                for (t, r) in report.per_target.iter().zip(&ref_report.per_target) {
                    deltas.rows.push(vec![
                        scene_n.to_string(),
                        mode.name().into(),
                        format!("T{}", t.index),
                        num(t.pslr_db - r.pslr_db),
                        num(t.islr_db - r.islr_db),
                        num(t.snr_db - r.snr_db),
                        num(t.range_res_bins - r.range_res_bins),
                        num(t.azimuth_res_bins - r.azimuth_res_bins),
                    ]);
                }
            }

            let slug = format!(
                "sar-n{scene_n}-{}-{}",
                mode.name(),
                if bfp { "bfp" } else { "nobfp" }
            );
            if cfg.emit.svg {
                write_magnitude_png(&out_dir.join(format!("{slug}.png")), &image)?;
            }
            if cfg.raw_images {
                write_raw_image(&out_dir.join(&slug), &image, &config.digest())?;
            }

            if cfg.check && mode != PrecisionMode::Fp32 {
                if bfp {
                    for (t, r) in report.per_target.iter().zip(&ref_report.per_target) {
                        let tag = format!("sar {} T{}", mode.name(), t.index);
                        checks.push(Check::at_most(
                            format!("{tag} |dPSLR| <= 0.1 dB"),
                            (t.pslr_db - r.pslr_db).abs(),
                            0.1,
                        ));
                        checks.push(Check::at_most(
                            format!("{tag} |dISLR| <= 0.2 dB"),
                            (t.islr_db - r.islr_db).abs(),
                            0.2,
                        ));
                        checks.push(Check::at_most(
                            format!("{tag} |dSNR| <= 0.1 dB"),
                            (t.snr_db - r.snr_db).abs(),
                            0.1,
                        ));
                        checks.push(Check::at_most(
                            format!("{tag} |dres| <= 0.02 bins"),
                            (t.range_res_bins - r.range_res_bins)
                                .abs()
                                .max((t.azimuth_res_bins - r.azimuth_res_bins).abs()),
                            0.02,
                        ));
                    }
                    if mode == PrecisionMode::PureFp16 {
                        checks.push(Check::bounded(
                            "sar pure-fp16 end-to-end SQNR in [40, 45] dB (known red: \
                             measures ~56 dB, see README)",
                            report.end_to_end_sqnr_db.unwrap_or(f64::NAN),
                            40.0,
                            45.0,
                        ));
                    }
                } else if !norm {
                    checks.push(Check::at_least(
                        format!("sar {} no-shift NaN fraction > 0.99", mode.name()),
                        report.nan_fraction,
                        0.99 + f64::EPSILON,
                    ));
                }
            }
        }
    }

    write_table(out_dir, "sar", &quality, cfg.emit)?;
    write_table(out_dir, "sar-deltas", &deltas, cfg.emit)?;
    Ok(checks)
}

/// Storage-only format sweep at carrier compute.
pub fn run_format_sweep(cfg: &RunConfig, out_dir: &Path) -> std::io::Result<Vec<Check>> {
    let formats: [NumericFormat; 4] = [FP16, BF16, E4M3, E5M2];
    let canonical = format!(
        "format-sweep sizes={:?} trials={} seed={}",
        cfg.sizes, cfg.trials, cfg.seed
    );
    let mut table = Table::new(
        "format-sweep",
        vec![
            "format",
            "mantissa_bits",
            "n",
            "trials",
            "mean_sqnr_db",
            "median_sqnr_db",
        ],
    );
    base_meta(&mut table, &canonical, cfg.seed);

    let mut checks = Vec::new();
    for &n in &cfg.sizes {
        for fmt in formats {
            let stats = storage_sweep_stats(fmt, n, cfg.trials, cfg.seed)
                .map_err(std::io::Error::other)?;
            table.rows.push(vec![
                fmt.name.into(),
                fmt.mantissa_bits.to_string(),
                n.to_string(),
                cfg.trials.to_string(),
                num(stats.mean_db),
                num(stats.median_db),
            ]);
            if cfg.check && (n == 1024 || n == 4096) {
                let window = match fmt.name {
                    "fp16" => Some((60.0, 65.0)),
                    "e4m3" => Some((17.0, 22.0)),
                    "e5m2" => Some((11.0, 16.0)),
                    _ => None, // bf16 is reported, not bounded
                };
                if let Some((lo, hi)) = window {
                    checks.push(Check::bounded(
                        format!("format-sweep {} n={n} in [{lo}, {hi}] dB", fmt.name),
                        stats.mean_db,
                        lo,
                        hi,
                    ));
                }
            }
        }
    }
    write_table(out_dir, "format-sweep", &table, cfg.emit)?;
    Ok(checks)
}

/// Host-CPU timing of batched transforms; informational only, no bounds.
/// The arithmetic is emulated (every operation routed through format
/// quantizers), so these rates say nothing about native kernels.
pub fn run_bench(cfg: &RunConfig, out_dir: &Path) -> std::io::Result<Vec<Check>> {
    let canonical = format!(
        "bench sizes={:?} modes={:?} runs={} seed={}",
        cfg.sizes,
        cfg.modes.iter().map(|m| m.name()).collect::<Vec<_>>(),
        cfg.trials,
        cfg.seed
    );
    let mut table = Table::new(
        "bench",
        vec![
            "n",
            "mode",
            "batch",
            "runs",
            "median_seconds",
            "effective_gflops",
            "note",
        ],
    );
    base_meta(&mut table, &canonical, cfg.seed);

    const NOTE: &str = "host-CPU emulated arithmetic; informational only";
    for &n in &cfg.sizes {
        let batch = (1usize << 16).div_ceil(n).max(1);
        for &mode in &cfg.modes {
            let plan = make_plan(n, 2, mode).map_err(std::io::Error::other)?;
            let signals: Vec<Vec<Complex64>> = (0..batch)
                .map(|b| random_unit_signal(n, cfg.seed + b as u64))
                .collect();
            let mut times = Vec::with_capacity(cfg.trials);
            for _ in 0..cfg.trials {
                let start = std::time::Instant::now();
                for x in &signals {
                    let y = fft_forward(&plan, x).map_err(std::io::Error::other)?;
                    std::hint::black_box(&y);
                }
                times.push(start.elapsed().as_secs_f64());
            }
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = times[times.len() / 2];
            let gflops = 5.0 * n as f64 * (n as f64).log2() * batch as f64 / median / 1e9;
            table.rows.push(vec![
                n.to_string(),
                mode.name().into(),
                batch.to_string(),
                cfg.trials.to_string(),
                num(median),
                num(gflops),
                NOTE.into(),
            ]);
        }
    }
    write_table(out_dir, "bench", &table, cfg.emit)?;
    Ok(Vec::new())
}
