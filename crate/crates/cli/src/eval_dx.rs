use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cervdx::evaluation::{agreement_metrics, classification_metrics, Agreement, Classification};
use cervdx::geometry::KLineStatus;
use cervdx::report::{read_report, DxTruth};
use cervdx::DiscLevel;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DxMetrics {
    pub cases: usize,
    /// `None` when fewer than three paired values exist.
    pub cobb: Option<Agreement>,
    pub mscc: Option<Agreement>,
    pub herniation: Classification,
    pub k_line: Option<Classification>,
    pub hyperintensity: Classification,
    /// Per disc level.
    pub kang: Classification,
    pub kang_patient: Classification,
    pub notes: Vec<String>,
}

fn report_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            let r = path.join(crate::diagnose::REPORT_FILE);
            if r.is_file() {
                out.push(r);
            }
        } else if path.to_string_lossy().ends_with(".report.json") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn load_truths(dir: &Path) -> Result<BTreeMap<String, DxTruth>> {
    let mut out = BTreeMap::new();
    for id in crate::case_ids(dir, ".truth.json")? {
        let path = dir.join(format!("{id}.truth.json"));
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let t = DxTruth::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
        out.insert(t.case_id.clone(), t);
    }
    Ok(out)
}

fn agreement(
    pairs: &[(f64, f64)],
    what: &str,
    notes: &mut Vec<String>,
) -> Result<Option<Agreement>> {
    if pairs.len() < 3 {
        notes.push(format!(
            "{what}: {} pair(s), agreement not computed",
            pairs.len()
        ));
        return Ok(None);
    }
    let (a, m): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    Ok(Some(agreement_metrics(&a, &m)?))
}

/// Compare diagnoses against truths matched by case id.
pub fn evaluate(pairs: &[(DxTruth, DxTruth)]) -> Result<DxMetrics> {
    let mut notes = Vec::new();
    let mut cobb = Vec::new();
    let mut mscc = Vec::new();
    let (mut hp, mut ht) = (Vec::new(), Vec::new());
    let (mut kp, mut kt) = (Vec::new(), Vec::new());
    let (mut yp, mut yt) = (Vec::new(), Vec::new());
    let (mut gp, mut gt) = (Vec::new(), Vec::new());
    let (mut pp, mut pt) = (Vec::new(), Vec::new());
    let status = |s: KLineStatus| match s {
        KLineStatus::Positive => 0,
        KLineStatus::Negative => 1,
    };
    for (rep, truth) in pairs {
        let id = &truth.case_id;
        match (rep.cobb_c2_c7_deg, truth.cobb_c2_c7_deg) {
            (Some(a), Some(b)) => cobb.push((a, b)),
            (None, Some(_)) => notes.push(format!("{id}: Cobb angle missing from report")),
            _ => {}
        }
        for (l, &m) in &truth.mscc {
            match rep.mscc.get(l) {
                Some(&a) => mscc.push((a, m)),
                None => notes.push(format!("{id}: MSCC at {l} missing from report")),
            }
        }
        match (rep.k_line_status, truth.k_line_status) {
            (Some(a), Some(b)) => {
                kp.push(status(a));
                kt.push(status(b));
            }
            (None, Some(_)) => notes.push(format!("{id}: K-line missing from report")),
            _ => {}
        }
        for l in DiscLevel::ALL {
            let get_b =
                |m: &BTreeMap<DiscLevel, bool>| m.get(&l).copied().unwrap_or(false) as usize;
            hp.push(get_b(&rep.herniated));
            ht.push(get_b(&truth.herniated));
            yp.push(get_b(&rep.hyperintense));
            yt.push(get_b(&truth.hyperintense));
            if let Some(&g) = truth.kang_grades.get(&l) {
                gt.push(g as usize);
                gp.push(rep.kang_grades.get(&l).copied().unwrap_or(0) as usize);
            }
        }
        pp.push(rep.patient_grade as usize);
        pt.push(truth.patient_grade as usize);
    }
    let grades = ["0", "1", "2", "3"];
    Ok(DxMetrics {
        cases: pairs.len(),
        cobb: agreement(&cobb, "Cobb", &mut notes)?,
        mscc: agreement(&mscc, "MSCC", &mut notes)?,
        herniation: classification_metrics(&hp, &ht, &["absent", "present"])?,
        k_line: if kt.is_empty() {
            None
        } else {
            Some(classification_metrics(&kp, &kt, &["positive", "negative"])?)
        },
        hyperintensity: classification_metrics(&yp, &yt, &["normal", "hyperintense"])?,
        kang: classification_metrics(&gp, &gt, &grades)?,
        kang_patient: classification_metrics(&pp, &pt, &grades)?,
        notes,
    })
}

fn table_rows(m: &DxMetrics) -> Vec<(String, String, f64)> {
    let mut rows = Vec::new();
    let mut agree = |task: &str, a: &Option<Agreement>| {
        if let Some(a) = a {
            rows.push((task.to_string(), "mae".to_string(), a.mae));
            rows.push((task.to_string(), "mae_sd".to_string(), a.mae_sd));
            if let Some(r) = a.pearson_r {
                rows.push((task.to_string(), "pearson_r".to_string(), r));
            }
            if let Some(i) = a.icc {
                rows.push((task.to_string(), "icc".to_string(), i));
            }
        }
    };
    agree("cobb", &m.cobb);
    agree("mscc", &m.mscc);
    let mut class = |task: &str, c: &Classification| {
        rows.push((task.to_string(), "accuracy".into(), c.accuracy));
        rows.push((
            task.to_string(),
            "macro_precision".into(),
            c.macro_precision,
        ));
        rows.push((task.to_string(), "macro_recall".into(), c.macro_recall));
        rows.push((task.to_string(), "macro_f1".into(), c.macro_f1));
        for k in &c.per_class {
            rows.push((
                task.to_string(),
                format!("precision[{}]", k.label),
                k.precision,
            ));
            rows.push((task.to_string(), format!("recall[{}]", k.label), k.recall));
            rows.push((task.to_string(), format!("f1[{}]", k.label), k.f1));
        }
    };
    class("herniation", &m.herniation);
    if let Some(k) = &m.k_line {
        class("k_line", k);
    }
    class("hyperintensity", &m.hyperintensity);
    class("kang", &m.kang);
    class("kang_patient", &m.kang_patient);
    rows
}

fn write_confusion(c: &Classification, path: &Path) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let mut header = vec!["truth\\pred".to_string()];
    header.extend(c.confusion.labels.iter().cloned());
    w.write_record(&header)?;
    for (label, row) in c.confusion.labels.iter().zip(&c.confusion.counts) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `dx_metrics.json`, `dx_metrics.csv` and one confusion matrix CSV
/// per classification task.
pub fn cmd_eval_dx(report_dir: &Path, truth_dir: &Path, out: &Path) -> Result<i32> {
    let truths = load_truths(truth_dir)?;
    let mut reports = BTreeMap::new();
    for path in report_files(report_dir)? {
        let r = read_report(&path).with_context(|| format!("reading {}", path.display()))?;
        reports.insert(r.case_id.clone(), r.to_dx());
    }
    let unmatched: Vec<&String> = reports
        .keys()
        .filter(|k| !truths.contains_key(*k))
        .chain(truths.keys().filter(|k| !reports.contains_key(*k)))
        .collect();
    if !unmatched.is_empty() {
        bail!(
            "unmatched cases: {}",
            unmatched
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    if truths.is_empty() {
        bail!("no *.truth.json files under {}", truth_dir.display());
    }
    let pairs: Vec<(DxTruth, DxTruth)> = truths
        .into_iter()
        .map(|(id, t)| (reports.remove(&id).expect("matched above"), t))
        .collect();
    let m = evaluate(&pairs)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    crate::write_pretty(&m, &out.join("dx_metrics.json"))?;
    let path = out.join("dx_metrics.csv");
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["task", "metric", "value"])?;
    for (task, metric, value) in table_rows(&m) {
        w.write_record([task, metric, value.to_string()])?;
    }
    w.flush()?;
    write_confusion(&m.herniation, &out.join("confusion_herniation.csv"))?;
    if let Some(k) = &m.k_line {
        write_confusion(k, &out.join("confusion_k_line.csv"))?;
    }
    write_confusion(&m.hyperintensity, &out.join("confusion_hyperintensity.csv"))?;
    write_confusion(&m.kang, &out.join("confusion_kang.csv"))?;
    write_confusion(&m.kang_patient, &out.join("confusion_kang_patient.csv"))?;
    Ok(0)
}
