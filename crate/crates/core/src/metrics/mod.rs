//! Point-set discrepancies between clouds.

mod assignment;
mod chamfer;
mod emd;

pub use assignment::min_cost_assignment;
pub use chamfer::{
    chamfer_discrepancy, chamfer_points, chamfer_with, directed_mean, nearest_neighbors, ChamferVariant,
};
pub use emd::{
    earth_mover_distance, emd_approx, emd_exact, emd_points, Matching, SinkhornConfig, EXACT_EMD_MAX_POINTS,
};
