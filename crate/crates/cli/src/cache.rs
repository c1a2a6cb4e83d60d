//! On-disk cache of Green tables keyed by `(d, λ, sign, method, tolerance)`.
//! A cached table is reused only after its defect has been re-checked.

use std::path::{Path, PathBuf};

use latinv_core::geometry::SpectralParam;
use latinv_core::green::{box_offsets, r0_defect, GreenOptions, GreenTable};
use sha2::{Digest, Sha256};

use crate::output::{read_json, write_json};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    Disabled,
    Hit,
    Miss,
    /// A cached file existed but failed verification and was replaced.
    Rejected,
}

impl CacheStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CacheStatus::Disabled => "disabled",
            CacheStatus::Hit => "hit",
            CacheStatus::Miss => "miss",
            CacheStatus::Rejected => "rejected",
        }
    }
}

pub fn cache_path(dir: &Path, param: &SpectralParam, options: &GreenOptions) -> PathBuf {
    let key = format!(
        "d={};lambda={:016x};sign={};method={};tol={:016x}",
        param.d,
        param.lambda.to_bits(),
        param.sign.as_f64(),
        serde_json::to_string(&options.method).expect("method serializes"),
        options.tolerance.to_bits()
    );
    let h: String = Sha256::digest(key.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect();
    dir.join(format!("green-d{}-{h}.json", param.d))
}

/// Offsets at which a cached table is re-verified: the interior of its box.
fn verification_offsets(d: usize, radius: i64) -> Vec<latinv_core::lattice::LatticePoint> {
    box_offsets(d, (radius - 1).max(0))
}

/// A table holding every offset of sup norm at most `radius`, from the
/// cache when a verified copy exists.
pub fn load_or_build(
    cache: Option<&Path>,
    param: &SpectralParam,
    options: GreenOptions,
    radius: i64,
    defect_tol: f64,
) -> Result<(GreenTable, CacheStatus), CliError> {
    let Some(dir) = cache else {
        return Ok((GreenTable::with_radius(param, options, radius)?, CacheStatus::Disabled));
    };
    let path = cache_path(dir, param, &options);
    let mut status = CacheStatus::Miss;
    if path.exists() {
        status = CacheStatus::Rejected;
        if let Ok(t) = read_json::<GreenTable>(&path) {
            let same_key = t.param() == *param && t.options() == options;
            let complete = box_offsets(param.d, radius).iter().all(|k| t.contains(k));
            if same_key && complete {
                let defect = r0_defect(&t, &verification_offsets(param.d, radius))?;
                if defect <= defect_tol {
                    return Ok((t, CacheStatus::Hit));
                }
            }
        }
    }
    let t = GreenTable::with_radius(param, options, radius)?;
    write_json(&path, &t)?;
    Ok((t, status))
}
