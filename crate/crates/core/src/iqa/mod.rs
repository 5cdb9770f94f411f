//! Image-quality scoring of corrections against ground truth.
//!
//! Both images go through DRC and TV despeckling before PSNR and MS-SSIM
//! are computed, so scores reflect focus rather than speckle realization.

mod despeckle;
mod eval;
mod quality;

pub use despeckle::{despeckle, DespeckleConfig, LOG_EPSILON};
pub use eval::{
    evaluate, evaluate_images, records_to_csv, score, summarize, EvalRecord, EvalSummary, Method,
    MethodSummary, Stats, EVAL_CSV_HEADER,
};
pub use quality::{ms_ssim, ms_ssim_scales, psnr, MS_SSIM_WEIGHTS};
