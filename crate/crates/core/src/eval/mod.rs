//! Masked-link evaluation: masking, hit@k, score separation, cross
//! validation and candidate ranking.

mod mask;
mod metrics;
mod protocol;

pub use mask::{mask_cells, mask_links, MaskSpec};
pub use metrics::{
    hit_at_k, per_positive_hit_at_k, quantile, separation_from_scores, separation_stats,
    ClassStats, SeparationStats,
};
pub use protocol::{
    cross_validate, rank_candidates, write_hit_tsv, write_violin_tsv, CvOptions, EvalReport, NegativePool,
    FoldResult, LinkPredictor, RankingRow, RankingTable,
};
