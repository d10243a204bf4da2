//! Seeded experiment kernels shared by the command-line harness and the
//! acceptance suite: SQNR trials against the direct-summation reference
//! and the storage-only format round-trip sweep.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::fft::{dft_oracle, fft_forward, ifft_via_conj, make_plan, ModeFormats, PrecisionMode};
use crate::formats::NumericFormat;
use crate::metrics::sqnr_db;

/// Independent uniform real and imaginary parts on [-1, 1], seeded.
pub fn random_unit_signal(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut z = seed ^ trial.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^ (z >> 31)
}

/// Mean and median over a set of per-trial SQNR values.
#[derive(Debug, Clone)]
pub struct TrialStats {
    pub mean_db: f64,
    pub median_db: f64,
    pub per_trial_db: Vec<f64>,
}

fn summarize(mut values: Vec<f64>) -> TrialStats {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    values.shrink_to_fit();
    TrialStats {
        mean_db: mean,
        median_db: median,
        per_trial_db: values,
    }
}

/// Forward-transform SQNR for one random trial: the mode's transform of a
/// storage-quantized random signal against the binary64 direct summation
/// of the same input, scale-aligned.
pub fn fft_sqnr_trial(n: usize, radix: usize, mode: PrecisionMode, seed: u64) -> Result<f64> {
    let plan = make_plan(n, radix, mode)?;
    let storage = mode.formats().storage;
    let x: Vec<Complex64> = random_unit_signal(n, seed)
        .into_iter()
        .map(|z| storage.quantize_complex(z))
        .collect();
    let got = fft_forward(&plan, &x)?;
    let reference = dft_oracle(&x);
    Ok(sqnr_db(&reference, &got, true)?.db)
}

/// Seeded multi-trial forward-transform SQNR, trials in parallel.
pub fn fft_sqnr_stats(
    n: usize,
    radix: usize,
    mode: PrecisionMode,
    trials: usize,
    seed: u64,
) -> Result<TrialStats> {
    let values: Result<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| fft_sqnr_trial(n, radix, mode, trial_seed(seed, t)))
        .collect();
    Ok(summarize(values?))
}

/// One storage-only sweep trial: a forward transform with the input and
/// every stage store quantized to `format` but carrier-precision
/// arithmetic and twiddles (the format's best case), measured against the
/// binary64 transform of the raw signal.
pub fn storage_sweep_trial(format: NumericFormat, n: usize, seed: u64) -> Result<f64> {
    let plan = make_plan(n, 2, ModeFormats::storage_only(format))?;
    let x = random_unit_signal(n, seed);
    let got = fft_forward(&plan, &x)?;
    let reference = dft_oracle(&x);
    Ok(sqnr_db(&reference, &got, true)?.db)
}

/// Seeded multi-trial storage-only sweep SQNR.
pub fn storage_sweep_stats(
    format: NumericFormat,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<TrialStats> {
    let values: Result<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| storage_sweep_trial(format, n, trial_seed(seed, t)))
        .collect();
    Ok(summarize(values?))
}

/// Storage-only round trip (forward plus block-shifted inverse) against
/// the original signal: twice the store count of the sweep, a few dB
/// lower. The shift matters even at carrier compute: without it the
/// inverse intermediates overflow the narrow formats outright.
pub fn storage_roundtrip_trial(format: NumericFormat, n: usize, seed: u64) -> Result<f64> {
    let plan = make_plan(n, 2, ModeFormats::storage_only(format))?;
    let x = random_unit_signal(n, seed);
    let spectrum = fft_forward(&plan, &x)?;
    let back = ifft_via_conj(&plan, &spectrum, true)?;
    Ok(sqnr_db(&x, &back, true)?.db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{E4M3, E5M2, FP16};

    #[test]
    fn signal_is_seeded_and_bounded() {
        let a = random_unit_signal(64, 1);
        let b = random_unit_signal(64, 1);
        assert_eq!(a, b);
        assert_ne!(a, random_unit_signal(64, 2));
        assert!(a
            .iter()
            .all(|z| z.re.abs() <= 1.0 && z.im.abs() <= 1.0));
    }

    #[test]
    fn reference_mode_sqnr_is_enormous() {
        let s = fft_sqnr_stats(64, 2, PrecisionMode::Fp32, 3, 5).unwrap();
        assert!(s.mean_db > 120.0, "{}", s.mean_db);
    }

    #[test]
    fn storage_sweep_orders_by_mantissa() {
        let n = 256;
        let fp16 = storage_sweep_stats(FP16, n, 8, 3).unwrap().mean_db;
        let e4m3 = storage_sweep_stats(E4M3, n, 8, 3).unwrap().mean_db;
        let e5m2 = storage_sweep_stats(E5M2, n, 8, 3).unwrap().mean_db;
        assert!(fp16 > e4m3 && e4m3 > e5m2, "{fp16} / {e4m3} / {e5m2}");
        assert!(e5m2 > 5.0, "e5m2 collapsed entirely: {e5m2}");
    }

    #[test]
    fn roundtrip_loses_a_few_db_on_the_sweep() {
        let n = 256;
        let sweep = storage_sweep_stats(FP16, n, 8, 3).unwrap().mean_db;
        let rt = storage_roundtrip_trial(FP16, n, 3).unwrap();
        assert!(rt < sweep && rt > sweep - 6.0, "sweep {sweep}, round trip {rt}");
    }

    #[test]
    fn stats_median_and_mean() {
        let s = summarize(vec![1.0, 5.0, 3.0]);
        assert_eq!(s.median_db, 3.0);
        assert!((s.mean_db - 3.0).abs() < 1e-12);
        let s = summarize(vec![1.0, 2.0, 3.0, 10.0]);
        assert_eq!(s.median_db, 2.5);
    }
}
