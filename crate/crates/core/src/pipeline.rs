//! One-case diagnosis: labeling, herniation, heatmap, geometry, signal and
//! Kang grading, collected into a [`DiagnosisReport`].

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{
    cobb_angles, k_line_status, modified_k_line, mscc_at_level, width_profile, CobbResult, KLine,
    MsccEntry, WidthSource,
};
use crate::heatmap::{generate_heatmap, HeatmapParams};
use crate::herniation::{extract_herniation, HerniationMask};
use crate::kang::assess;
use crate::labeling::{label_instances, Region};
use crate::report::{
    CobbSection, DiagnosisReport, HeatmapSection, HerniationLevel, HerniationSection, KLineSection,
    KangLevelReport, KangSection, ModuleError, Provenance, ReportParams, SegmentalAngle, T2Level,
    T2Section, Units, SCHEMA,
};
use crate::signal::{detect_hyperintensity, segment_indices, t2_si_curve, Thresholds};
use crate::types::{Case, DiscLevel, HeatGrid, InstanceMap, Orientation, SemanticMask};

pub const HEATMAP_FILE: &str = "heatmap.f32";

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiagnoseParams {
    pub heatmap: HeatmapParams,
    pub thresholds: Thresholds,
    pub width_source: WidthSource,
}

impl DiagnoseParams {
    pub fn validate(&self) -> Result<()> {
        self.heatmap.validate()?;
        let t = &self.thresholds;
        if !(t.t2mi_cut.is_finite() && t.rsci_cut.is_finite()) {
            return Err(Error::InvalidParameter("cutoffs must be finite".into()));
        }
        Ok(())
    }

    fn report_params(&self, slices: u8) -> ReportParams {
        ReportParams {
            sigma_scale: self.heatmap.sigma_scale,
            min_region_size: self.heatmap.min_region_size,
            t2mi_cut: self.thresholds.t2mi_cut,
            rsci_cut: self.thresholds.rsci_cut,
            rule: self.thresholds.rule,
            width_source: self.width_source,
            slices,
        }
    }
}

/// The report plus the intermediate products needed for rendering.
#[derive(Debug, Clone)]
pub struct Diagnosis {
    pub report: DiagnosisReport,
    pub instance_map: Option<InstanceMap>,
    pub herniation: Option<HerniationMask>,
    pub heatmap: Option<HeatGrid>,
    pub k_line: Option<KLine>,
    pub cobb: Option<CobbResult>,
}

impl Diagnosis {
    /// Exit status: 0 clean, 2 when any module failed on anatomy.
    pub fn exit_code(&self) -> i32 {
        if self.report.has_anatomy_error() {
            2
        } else {
            0
        }
    }
}

fn module_error(module: &str, e: &Error) -> ModuleError {
    ModuleError {
        module: module.to_string(),
        code: e.code().to_string(),
        message: e.to_string(),
    }
}

fn level_section(hern: &HerniationMask) -> HerniationSection {
    let levels = DiscLevel::ALL
        .iter()
        .map(|&level| {
            let pixels: Vec<(usize, usize)> = hern
                .at_level(level)
                .flat_map(|c| c.region.pixels().iter().copied())
                .collect();
            let region = Region::from_pixels(pixels);
            HerniationLevel {
                disc_level: level,
                present: region.is_some(),
                area_px: region.as_ref().map_or(0, Region::area),
                centroid: region.map(|r| {
                    let (y, x) = r.centroid();
                    [y, x]
                }),
                slice_votes: None,
            }
        })
        .collect();
    HerniationSection {
        levels,
        anterior_bulges: hern.anterior_bulges(),
        skipped_levels: hern.skipped().to_vec(),
    }
}

fn empty_report(case_id: &str, params: &DiagnoseParams) -> DiagnosisReport {
    DiagnosisReport {
        schema: SCHEMA.to_string(),
        case_id: case_id.to_string(),
        units: Units::default(),
        herniation: None,
        heatmap: None,
        mscc: None,
        k_line: None,
        cobb: None,
        t2: None,
        kang: None,
        provenance: Provenance {
            tool: "cervdx".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            parameters: params.report_params(1),
            warnings: Vec::new(),
            errors: Vec::new(),
        },
    }
}

/// Instance labels and herniation for one slice; used for side slices.
pub fn slice_herniation(mask: &SemanticMask, orientation: Orientation) -> Result<HerniationMask> {
    let labeling = label_instances(mask)?;
    Ok(extract_herniation(&labeling.map, orientation))
}

pub fn diagnose_case(case: &Case, params: &DiagnoseParams) -> Result<Diagnosis> {
    params.validate()?;
    let mut report = empty_report(&case.id, params);
    let mut out = Diagnosis {
        report: report.clone(),
        instance_map: None,
        herniation: None,
        heatmap: None,
        k_line: None,
        cobb: None,
    };
    let labeling = match label_instances(&case.mask) {
        Ok(l) => l,
        Err(e) => {
            report
                .provenance
                .errors
                .push(module_error("instance-labeling", &e));
            out.report = report;
            return Ok(out);
        }
    };
    let warnings = &mut report.provenance.warnings;
    warnings.extend(labeling.notes.iter().cloned());
    let map = labeling.map;
    let orientation = case.orientation;
    let spacing = case.spacing();

    let hern = extract_herniation(&map, orientation);
    for level in hern.skipped() {
        warnings.push(format!(
            "herniation not assessed at {level}: adjacent vertebra missing"
        ));
    }
    report.herniation = Some(level_section(&hern));

    let heat = generate_heatmap(&hern, &params.heatmap)?;
    let peak = heat
        .values()
        .as_slice()
        .iter()
        .fold(0.0f32, |a, &b| a.max(b));
    report.heatmap = Some(HeatmapSection {
        file: HEATMAP_FILE.to_string(),
        peak: peak as f64,
        components: hern
            .components()
            .iter()
            .filter(|c| c.region.area() >= params.heatmap.min_region_size)
            .count(),
    });

    match width_profile(&map, spacing, params.width_source) {
        Ok(profile) => {
            let mut entries = Vec::new();
            for level in DiscLevel::ALL {
                if hern.at_level(level).next().is_none() {
                    continue;
                }
                match mscc_at_level(&profile, &hern, &map, level) {
                    Ok(m) => entries.push(MsccEntry {
                        disc_level: level,
                        mscc_percent: m,
                    }),
                    Err(e) => report
                        .provenance
                        .warnings
                        .push(format!("MSCC unavailable at {level}: {e}")),
                }
            }
            report.mscc = Some(entries);
        }
        Err(e) => report.provenance.errors.push(module_error("geometry", &e)),
    }

    match modified_k_line(&map, orientation) {
        Ok(mut line) => {
            let status = k_line_status(&line, &hern);
            line.status = Some(status);
            let (a, b) = (line.p_c2(), line.p_c7());
            report.k_line = Some(KLineSection {
                c2: [a.y, a.x],
                c7: [b.y, b.x],
                status,
            });
            out.k_line = Some(line);
        }
        Err(e) => report.provenance.errors.push(module_error("geometry", &e)),
    }

    match cobb_angles(&map, orientation) {
        Ok(c) => {
            report.cobb = Some(CobbSection {
                c2_c7_deg: c.c2_c7_deg,
                segmental: c
                    .segmental_deg
                    .iter()
                    .map(|(&l, &a)| SegmentalAngle {
                        disc_level: l,
                        angle_deg: a,
                    })
                    .collect(),
            });
            out.cobb = Some(c);
        }
        Err(e) => report.provenance.errors.push(module_error("geometry", &e)),
    }

    let mut hyper = BTreeMap::new();
    match t2_si_curve(&case.image, &map) {
        Ok(curve) => {
            let idx = segment_indices(&curve, &map, &params.thresholds);
            hyper = detect_hyperintensity(&idx, &params.thresholds);
            report
                .provenance
                .warnings
                .extend(idx.warnings.iter().cloned());
            report.t2 = Some(T2Section {
                curve: curve.rows().to_vec(),
                levels: idx
                    .levels
                    .iter()
                    .map(|(&l, s)| T2Level {
                        disc_level: l,
                        t2_mi_percent: s.t2_mi,
                        rsci: s.rsci,
                        hyperintense: s.hyperintense,
                    })
                    .collect(),
            });
        }
        Err(e) => report.provenance.errors.push(module_error("signal", &e)),
    }

    let kang = assess(&map, &hern, spacing, orientation, &hyper);
    report
        .provenance
        .warnings
        .extend(kang.warnings.iter().cloned());
    report.kang = Some(KangSection {
        levels: kang
            .levels
            .iter()
            .map(|(&l, k)| KangLevelReport {
                disc_level: l,
                grade: k.grade,
                stenosis_ratio_percent: k.stenosis_ratio_percent,
                d_hern_mm: k.d_hern_mm,
                t2_hyper: k.t2_hyper,
            })
            .collect(),
        patient_grade: kang.patient_grade,
    });

    out.report = report;
    out.instance_map = Some(map);
    out.herniation = Some(hern);
    out.heatmap = Some(heat);
    Ok(out)
}

/// Replace per-level herniation presence by the majority over three slices
/// `[left, middle, right]`. A side slice that fails labeling votes absent
/// at every level and leaves a warning.
pub fn apply_slice_votes(
    report: &mut DiagnosisReport,
    sides: [Result<&HerniationMask, String>; 2],
) {
    report.provenance.parameters.slices = 3;
    let side_votes: Vec<BTreeMap<DiscLevel, bool>> = sides
        .iter()
        .enumerate()
        .map(|(i, s)| match s {
            Ok(h) => DiscLevel::ALL
                .iter()
                .map(|&l| (l, h.at_level(l).next().is_some()))
                .collect(),
            Err(msg) => {
                let name = if i == 0 { "first" } else { "third" };
                report
                    .provenance
                    .warnings
                    .push(format!("{name} slice counted as no herniation: {msg}"));
                BTreeMap::new()
            }
        })
        .collect();
    if let Some(section) = report.herniation.as_mut() {
        for level in &mut section.levels {
            let l = level.disc_level;
            let votes = [
                side_votes[0].get(&l).copied().unwrap_or(false),
                level.present,
                side_votes[1].get(&l).copied().unwrap_or(false),
            ];
            level.slice_votes = Some(votes);
            level.present = votes.iter().filter(|&&v| v).count() >= 2;
        }
    }
}
