use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cervdx::evaluation::{overlap_metrics, Overlap};
use cervdx::herniation::HerniationMask;
use cervdx::io::{read_mask, read_meta, CasePaths};
use cervdx::pipeline::slice_herniation;
use cervdx::{Grid, Orientation, SemanticMask, Tissue};
use rayon::prelude::*;
use serde::Serialize;

/// Class order of the output tables.
pub const CLASSES: [&str; 5] = ["IVD", "V", "SC", "CSF", "H"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegRow {
    pub case_id: String,
    pub class: String,
    pub dice: f64,
    pub jaccard: f64,
    pub precision: f64,
    pub recall: f64,
    pub both_empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    pub n: usize,
    pub dice: f64,
    pub jaccard: f64,
    pub precision: f64,
    pub recall: f64,
    pub both_empty: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegSummary {
    pub cases: usize,
    pub classes: BTreeMap<String, ClassSummary>,
    pub warnings: Vec<String>,
}

fn herniation_grid(
    mask: &SemanticMask,
    orientation: Orientation,
    who: &str,
    warnings: &mut Vec<String>,
) -> Grid<bool> {
    match slice_herniation(mask, orientation) {
        Ok(h) => h.mask().clone(),
        Err(e) => {
            warnings.push(format!("{who}: herniation taken as empty: {e}"));
            let (h, w) = mask.dims();
            HerniationMask::empty(h, w).mask().clone()
        }
    }
}

fn case_rows(pred_dir: &Path, gt_dir: &Path, id: &str) -> Result<(Vec<SegRow>, Vec<String>)> {
    let gp = CasePaths::in_dir(gt_dir, id);
    let pp = CasePaths::in_dir(pred_dir, id);
    let gt = read_mask(&gp.mask)?;
    let pred = read_mask(&pp.mask)?;
    let orientation = read_meta(&gp.meta, &gp.image)?.anterior_side;
    let mut warnings = Vec::new();
    let row = |class: &str, o: Overlap| SegRow {
        case_id: id.to_string(),
        class: class.to_string(),
        dice: o.dice,
        jaccard: o.jaccard,
        precision: o.precision,
        recall: o.recall,
        both_empty: o.both_empty,
    };
    let mut rows = Vec::new();
    for (name, t) in
        CLASSES[..4]
            .iter()
            .zip([Tissue::Disc, Tissue::Vertebra, Tissue::Cord, Tissue::Csf])
    {
        rows.push(row(name, overlap_metrics(&pred, &gt, &t)?));
    }
    let hp = herniation_grid(
        &pred,
        orientation,
        &format!("{id} prediction"),
        &mut warnings,
    );
    let hg = herniation_grid(
        &gt,
        orientation,
        &format!("{id} ground truth"),
        &mut warnings,
    );
    rows.push(row("H", overlap_metrics(&hp, &hg, &true)?));
    Ok((rows, warnings))
}

pub fn summarize(rows: &[SegRow], cases: usize, warnings: Vec<String>) -> SegSummary {
    let mut classes = BTreeMap::new();
    for class in CLASSES {
        let sel: Vec<&SegRow> = rows.iter().filter(|r| r.class == class).collect();
        let n = sel.len();
        let mean = |f: fn(&SegRow) -> f64| {
            if n == 0 {
                0.0
            } else {
                sel.iter().map(|r| f(r)).sum::<f64>() / n as f64
            }
        };
        classes.insert(
            class.to_string(),
            ClassSummary {
                n,
                dice: mean(|r| r.dice),
                jaccard: mean(|r| r.jaccard),
                precision: mean(|r| r.precision),
                recall: mean(|r| r.recall),
                both_empty: sel.iter().filter(|r| r.both_empty).count(),
            },
        );
    }
    SegSummary {
        cases,
        classes,
        warnings,
    }
}

/// Compare `<id>.mask.png` files of `pred_dir` against `gt_dir` and write
/// `seg_metrics.csv` plus `seg_summary.json`. Unmatched ids are an error
/// listing them.
pub fn cmd_eval_seg(pred_dir: &Path, gt_dir: &Path, out: &Path) -> Result<i32> {
    let pred_ids = crate::case_ids(pred_dir, ".mask.png")?;
    let gt_ids = crate::case_ids(gt_dir, ".mask.png")?;
    let unmatched: Vec<String> = pred_ids
        .iter()
        .filter(|i| !gt_ids.contains(i))
        .map(|i| format!("{i} (prediction only)"))
        .chain(
            gt_ids
                .iter()
                .filter(|i| !pred_ids.contains(i))
                .map(|i| format!("{i} (ground truth only)")),
        )
        .collect();
    if !unmatched.is_empty() {
        bail!("unmatched cases: {}", unmatched.join(", "));
    }
    if gt_ids.is_empty() {
        bail!("no *.mask.png cases under {}", gt_dir.display());
    }
    let per_case: Vec<Result<(Vec<SegRow>, Vec<String>)>> = gt_ids
        .par_iter()
        .map(|id| case_rows(pred_dir, gt_dir, id).with_context(|| format!("case {id}")))
        .collect();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for r in per_case {
        let (mut rs, mut ws) = r?;
        rows.append(&mut rs);
        warnings.append(&mut ws);
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let csv_path = out.join("seg_metrics.csv");
    let mut w = csv::Writer::from_path(&csv_path)
        .with_context(|| format!("writing {}", csv_path.display()))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    // full precision so the means can be checked against the CSV rows
    crate::write_pretty(
        &summarize(&rows, gt_ids.len(), warnings),
        &out.join("seg_summary.json"),
    )?;
    Ok(0)
}
