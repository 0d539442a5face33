//! Diagnosis report schema `cervdx/1` and its canonical JSON encoding.
//!
//! Canonical form: object keys sorted, two-space indentation, every
//! non-integer number rounded to 6 significant digits and printed in plain
//! decimal notation, trailing newline. Writing the same report twice gives
//! identical bytes, and read → write reproduces a canonical file exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{KLineStatus, MsccEntry, WidthSource};
use crate::signal::CombineRule;
use crate::types::DiscLevel;

pub const SCHEMA: &str = "cervdx/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub sigma_scale: f64,
    pub min_region_size: usize,
    pub t2mi_cut: f64,
    pub rsci_cut: f64,
    pub rule: CombineRule,
    pub width_source: WidthSource,
    pub slices: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub length: String,
    pub angle: String,
    pub ratio: String,
    pub area: String,
}

impl Default for Units {
    fn default() -> Self {
        Units {
            length: "mm".into(),
            angle: "deg".into(),
            ratio: "percent".into(),
            area: "px".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HerniationLevel {
    pub disc_level: DiscLevel,
    pub present: bool,
    pub area_px: usize,
    /// `[y, x]` of the level's herniation pixels.
    pub centroid: Option<[f64; 2]>,
    /// Per-slice presence `[left, middle, right]` when three slices were
    /// supplied; `present` is then the majority.
    pub slice_votes: Option<[bool; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HerniationSection {
    pub levels: Vec<HerniationLevel>,
    pub anterior_bulges: usize,
    /// Levels not assessed because an adjacent vertebra is missing.
    pub skipped_levels: Vec<DiscLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSection {
    /// Path of the float-grid file, relative to the output directory.
    pub file: String,
    pub peak: f64,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KLineSection {
    /// `[y, x]` image coordinates.
    pub c2: [f64; 2],
    pub c7: [f64; 2],
    pub status: KLineStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentalAngle {
    pub disc_level: DiscLevel,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CobbSection {
    pub c2_c7_deg: f64,
    pub segmental: Vec<SegmentalAngle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2Level {
    pub disc_level: DiscLevel,
    pub t2_mi_percent: f64,
    pub rsci: Option<f64>,
    pub hyperintense: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2Section {
    /// `(row, mean intensity)` pairs of the cord signal curve.
    pub curve: Vec<(usize, f64)>,
    pub levels: Vec<T2Level>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KangLevelReport {
    pub disc_level: DiscLevel,
    pub grade: u8,
    pub stenosis_ratio_percent: Option<f64>,
    pub d_hern_mm: Option<f64>,
    pub t2_hyper: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KangSection {
    pub levels: Vec<KangLevelReport>,
    pub patient_grade: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleError {
    pub module: String,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub parameters: ReportParams,
    pub warnings: Vec<String>,
    pub errors: Vec<ModuleError>,
}

/// Sections are `null` when the anatomy they need could not be resolved;
/// the reason is in `provenance.errors`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub schema: String,
    pub case_id: String,
    pub units: Units,
    pub herniation: Option<HerniationSection>,
    pub heatmap: Option<HeatmapSection>,
    pub mscc: Option<Vec<MsccEntry>>,
    pub k_line: Option<KLineSection>,
    pub cobb: Option<CobbSection>,
    pub t2: Option<T2Section>,
    pub kang: Option<KangSection>,
    pub provenance: Provenance,
}

const REQUIRED: [&str; 11] = [
    "schema",
    "case_id",
    "units",
    "herniation",
    "heatmap",
    "mscc",
    "k_line",
    "cobb",
    "t2",
    "kang",
    "provenance",
];

impl DiagnosisReport {
    pub fn has_anatomy_error(&self) -> bool {
        self.provenance
            .errors
            .iter()
            .any(|e| e.code != "io" && e.code != "invalid_parameter")
    }

    pub fn to_canonical_json(&self) -> Result<String> {
        canonical_json(self)
    }

    /// Parse and check schema completeness. Keys may hold `null` but must be
    /// present.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Schema("report is not a JSON object".into()))?;
        for key in REQUIRED {
            if !obj.contains_key(key) {
                return Err(Error::Schema(format!("missing field `{key}`")));
            }
        }
        match obj.get("schema").and_then(Value::as_str) {
            Some(SCHEMA) => {}
            other => return Err(Error::Schema(format!("unsupported schema {other:?}"))),
        }
        if let Some(cobb) = obj.get("cobb").and_then(Value::as_object) {
            for key in ["c2_c7_deg", "segmental"] {
                if !cobb.contains_key(key) {
                    return Err(Error::Schema(format!("missing field `cobb.{key}`")));
                }
            }
        }
        serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))
    }

    /// Per-level indicators in the comparison form used by `DxTruth`.
    pub fn to_dx(&self) -> DxTruth {
        DxTruth {
            case_id: self.case_id.clone(),
            cobb_c2_c7_deg: self.cobb.as_ref().map(|c| c.c2_c7_deg),
            k_line_status: self.k_line.as_ref().map(|k| k.status),
            herniated: self
                .herniation
                .as_ref()
                .map(|h| h.levels.iter().map(|l| (l.disc_level, l.present)).collect())
                .unwrap_or_default(),
            mscc: self
                .mscc
                .as_ref()
                .map(|m| m.iter().map(|e| (e.disc_level, e.mscc_percent)).collect())
                .unwrap_or_default(),
            hyperintense: self
                .t2
                .as_ref()
                .map(|t| {
                    t.levels
                        .iter()
                        .map(|l| (l.disc_level, l.hyperintense))
                        .collect()
                })
                .unwrap_or_default(),
            kang_grades: self
                .kang
                .as_ref()
                .map(|k| k.levels.iter().map(|l| (l.disc_level, l.grade)).collect())
                .unwrap_or_default(),
            patient_grade: self.kang.as_ref().map_or(0, |k| k.patient_grade),
        }
    }
}

/// Reference indicators for one case, as consumed by diagnosis evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DxTruth {
    pub case_id: String,
    pub cobb_c2_c7_deg: Option<f64>,
    pub k_line_status: Option<KLineStatus>,
    pub herniated: BTreeMap<DiscLevel, bool>,
    pub mscc: BTreeMap<DiscLevel, f64>,
    pub hyperintense: BTreeMap<DiscLevel, bool>,
    pub kang_grades: BTreeMap<DiscLevel, u8>,
    pub patient_grade: u8,
}

impl DxTruth {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }
}

/// Round to 6 significant digits.
pub fn round_sig6(v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    format!("{v:.5e}").parse().expect("formatted float parses")
}

fn write_number(n: &serde_json::Number, out: &mut String) -> Result<()> {
    if n.is_i64() || n.is_u64() {
        out.push_str(&n.to_string());
        return Ok(());
    }
    let v = n
        .as_f64()
        .ok_or_else(|| Error::Schema(format!("unrepresentable number {n}")))?;
    out.push_str(&format!("{}", round_sig6(v)));
    Ok(())
}

fn write_value(v: &Value, indent: usize, out: &mut String) -> Result<()> {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(n, out)?,
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else if items.iter().all(|i| !i.is_array() && !i.is_object()) {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(item, indent, out)?;
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (i, item) in items.iter().enumerate() {
                    out.push_str(&pad(indent + 1));
                    write_value(item, indent + 1, out)?;
                    out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
                }
                out.push_str(&pad(indent));
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return Ok(());
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).expect("string serializes"));
                out.push_str(": ");
                write_value(&map[k.as_str()], indent + 1, out)?;
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
    Ok(())
}

/// Canonical JSON for any serializable value.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    let mut out = String::new();
    write_value(&v, 0, &mut out)?;
    out.push('\n');
    Ok(out)
}

pub fn write_report(report: &DiagnosisReport, path: &Path) -> Result<()> {
    let text = report.to_canonical_json()?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<DiagnosisReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DiagnosisReport::from_json(&text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = canonical_json(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> DiagnosisReport {
        DiagnosisReport {
            schema: SCHEMA.into(),
            case_id: "c1".into(),
            units: Units::default(),
            herniation: None,
            heatmap: None,
            mscc: Some(vec![
                MsccEntry {
                    disc_level: DiscLevel::C3C4,
                    mscc_percent: 100.0 / 3.0,
                },
                MsccEntry {
                    disc_level: DiscLevel::C5C6,
                    mscc_percent: 12.5,
                },
            ]),
            k_line: None,
            cobb: Some(CobbSection {
                c2_c7_deg: 20.000000001,
                segmental: vec![],
            }),
            t2: None,
            kang: None,
            provenance: Provenance {
                tool: "cervdx".into(),
                version: "0.1.0".into(),
                parameters: ReportParams {
                    sigma_scale: 1.5,
                    min_region_size: 10,
                    t2mi_cut: 23.7,
                    rsci_cut: 1.2,
                    rule: CombineRule::And,
                    width_source: WidthSource::Cord,
                    slices: 1,
                },
                warnings: vec![],
                errors: vec![],
            },
        }
    }

    #[test]
    fn sig6_rounding() {
        assert_eq!(round_sig6(100.0 / 3.0), 33.3333);
        assert_eq!(round_sig6(20.000000001), 20.0);
        assert_eq!(round_sig6(-0.000123456789), -0.000123457);
        assert_eq!(round_sig6(0.0), 0.0);
    }

    #[test]
    fn canonical_is_stable_and_sorted() {
        let r = sample();
        let a = r.to_canonical_json().unwrap();
        assert_eq!(a, r.to_canonical_json().unwrap());
        let back = DiagnosisReport::from_json(&a).unwrap();
        assert_eq!(back.to_canonical_json().unwrap(), a);
        assert!(a.find("\"case_id\"").unwrap() < a.find("\"cobb\"").unwrap());
        assert!(a.contains("\"c2_c7_deg\": 20,"));
        assert!(a.contains("\"mscc_percent\": 33.3333"));
    }

    #[test]
    fn mscc_entries_are_objects() {
        let v: Value = serde_json::from_str(&sample().to_canonical_json().unwrap()).unwrap();
        let m = v["mscc"].as_array().unwrap();
        assert_eq!(m.len(), 2);
        let keys: Vec<&String> = m[0].as_object().unwrap().keys().collect();
        assert_eq!(keys, ["disc_level", "mscc_percent"]);
    }

    #[test]
    fn missing_cobb_is_schema_error() {
        let mut v: Value = serde_json::to_value(sample()).unwrap();
        v.as_object_mut().unwrap().remove("cobb");
        let err = DiagnosisReport::from_json(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }
}
