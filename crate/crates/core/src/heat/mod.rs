//! The exact hyperspherical heat kernel and its numerical oracles.

pub mod exact;
pub mod pde;

pub use exact::{
    g_exact, g_exact_scaled, g_exact_truncated, k_exact, k_exact_with, scaled_self_similarity,
    self_similarity_bound_check, sweet_spot_time, ExactKernelParams, SelfSimilarityCache, SelfSimilarityReport,
    SeriesResult, TruncationPolicy,
};
pub use pde::{pde_oracle, pde_oracle_uniformized, RadialHeatSolution, RefinedOracle};
