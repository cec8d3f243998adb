//! Files written next to every inversion: enough to recompute each reported
//! number with the core metric functions.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use sphinv_core::io::{encode_native_cloud, write_ply, NativeCloud, PlyEncoding};
use sphinv_model::checkpoint::ResultRecord;
use sphinv_model::editing::correspondence_colors;
use sphinv_model::inversion::{InversionConfig, InversionResult};

use crate::report;

/// Writes `{stem}result.pinv`, `{stem}reconstruction.ply` (colored by prior
/// position), `{stem}target.pinv` and `{stem}loss.csv` into `dir`.
pub fn write_inversion(
    dir: &Path,
    stem: &str,
    target: &NativeCloud,
    result: &InversionResult,
    cfg: &InversionConfig,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = |name: &str| dir.join(format!("{stem}{name}"));
    ResultRecord::new(result, cfg).write(path("result.pinv"))?;
    let colors = correspondence_colors(result.generator.sphere());
    fs::write(path("reconstruction.ply"), write_ply(&result.reconstruction, Some(&colors), PlyEncoding::Ascii))?;
    fs::write(path("target.pinv"), encode_native_cloud(target))?;
    fs::write(path("loss.csv"), report::loss_csv(&result.loss_history))?;
    Ok(())
}
