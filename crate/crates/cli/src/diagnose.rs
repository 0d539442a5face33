use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cervdx::io::{read_case, read_mask, write_float_grid};
use cervdx::pipeline::{
    apply_slice_votes, diagnose_case, slice_herniation, DiagnoseParams, HEATMAP_FILE,
};
use cervdx::report::write_report;
use cervdx::HeatGrid;
use rayon::prelude::*;

use crate::overlay;

pub const REPORT_FILE: &str = "report.json";
pub const OVERLAY_FILE: &str = "overlay.png";

/// Inputs of one diagnosis. With three masks the middle one is the main
/// slice and the outer two only vote on herniation presence.
#[derive(Debug, Clone)]
pub struct DiagnoseInputs {
    pub image: PathBuf,
    pub masks: Vec<PathBuf>,
    pub meta: PathBuf,
}

/// Run one case and write `report.json`, `heatmap.f32` and `overlay.png`
/// under `out`. Returns the process exit code: 0 or 2.
pub fn cmd_diagnose(inputs: &DiagnoseInputs, out: &Path, params: &DiagnoseParams) -> Result<i32> {
    let (middle, sides) = match inputs.masks.as_slice() {
        [m] => (m, None),
        [l, m, r] => (m, Some([l, r])),
        other => bail!("expected 1 or 3 masks, got {}", other.len()),
    };
    let case = read_case(&inputs.image, middle, &inputs.meta)?;
    let mut dx = diagnose_case(&case, params)?;
    if let Some([l, r]) = sides {
        let side = |p: &PathBuf| -> Result<_> {
            let mask = read_mask(p)?;
            Ok(slice_herniation(&mask, case.orientation).map_err(|e| e.to_string()))
        };
        let (hl, hr) = (side(l)?, side(r)?);
        apply_slice_votes(
            &mut dx.report,
            [
                hl.as_ref().map_err(Clone::clone),
                hr.as_ref().map_err(Clone::clone),
            ],
        );
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_report(&dx.report, &out.join(REPORT_FILE))?;
    let (h, w) = case.image.dims();
    let heat = dx.heatmap.clone().unwrap_or_else(|| HeatGrid::zeros(h, w));
    write_float_grid(&heat, &out.join(HEATMAP_FILE))?;
    overlay::render(&case.image, &dx)
        .save(out.join(OVERLAY_FILE))
        .with_context(|| format!("writing overlay under {}", out.display()))?;
    Ok(dx.exit_code())
}

/// Diagnose every `<id>.meta.json` case under `cases` into `out/<id>/`.
/// Cases run in parallel; the returned exit code is the worst one.
pub fn cmd_diagnose_batch(cases: &Path, out: &Path, params: &DiagnoseParams) -> Result<i32> {
    let ids = crate::case_ids(cases, ".meta.json")?;
    if ids.is_empty() {
        bail!("no *.meta.json cases under {}", cases.display());
    }
    let codes: Vec<Result<i32>> = ids
        .par_iter()
        .map(|id| {
            let paths = cervdx::io::CasePaths::in_dir(cases, id);
            let inputs = DiagnoseInputs {
                image: paths.image,
                masks: vec![paths.mask],
                meta: paths.meta,
            };
            cmd_diagnose(&inputs, &out.join(id), params).with_context(|| format!("case {id}"))
        })
        .collect();
    let mut worst = 0;
    for c in codes {
        worst = worst.max(c?);
    }
    Ok(worst)
}
