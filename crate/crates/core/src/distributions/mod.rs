//! Distribution kernels shared by the emulator and the diagnostics.

mod cdf;
mod empirical;
mod ks;
mod moments;
mod shapes;
pub mod special;

pub use cdf::{chi_square_cdf, std_normal_cdf, std_normal_quantile, student_t_cdf};
pub use empirical::empirical_cdf;
pub use ks::{ks_pvalue, ks_statistic, ks_uniform_pvalue};
pub use moments::{
    sample_excess_kurtosis, sample_moments, sample_moments_with, sample_skewness, SampleMoments,
    SdConvention,
};
pub use shapes::{
    gen_normal_excess_kurtosis, kurtosis_to_beta, moment_matched, sample_gen_normal,
    sample_skew_normal, skew_normal_skewness, skewness_to_alpha, GenNormalParams, ShapeFamily,
    SkewNormalParams, GEN_NORMAL_MIN_EXCESS_KURTOSIS, SKEW_NORMAL_MAX_SKEWNESS,
};
