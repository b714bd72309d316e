//! Error metrics, Cramér-Rao bounds and design/identifiability checks.

mod crb;
mod identifiability;
mod metrics;

pub use crb::{crb_closed_form, crb_numerical, CrbMethod, CrbReport};
pub use identifiability::{
    check_design, khatri_rao_rank_check, Condition, DesignDims, DesignReport, KrRankCheck,
    LOOSE_RANK_TOL,
};
pub use metrics::{nmse, nmse_matrix};
