//! Reduced-precision FFT and SAR imaging laboratory.
//!
//! The crate answers one question experimentally: when a spectral pipeline
//! is run in half precision, is the limit the mantissa or the exponent?
//! It provides:
//!
//! - software-emulated storage formats (fp16, bfloat16, FP8 E4M3/E5M2)
//!   as quantization lattices over an f64 carrier ([`formats`]);
//! - a Stockham autosort FFT whose multiplies, adds, and stores are
//!   routed through a precision mode's formats ([`fft`]);
//! - the fixed-shift block-floating-point schedule that folds the 1/n
//!   inverse scale into the pre-inverse conjugate pass, plus a magnitude
//!   tracer ([`bfp`]);
//! - a point-target Range-Doppler SAR pipeline in four precision modes
//!   ([`sar`]);
//! - scale-aligned SQNR and point-target quality metrics ([`metrics`]);
//! - seeded experiment kernels for the measurement harness
//!   ([`experiments`]).

pub mod bfp;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod formats;
pub mod metrics;
pub mod sar;

pub use error::{Error, Result};
pub use fft::{
    dft_oracle, fft_forward, idft_oracle, ifft_via_conj, make_plan, FftPlan, ModeFormats,
    OpStats, PrecisionMode,
};
pub use formats::{format_table, lookup, NumericFormat, BF16, E4M3, E5M2, FP16, FP32, FP64};
