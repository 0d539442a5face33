//! T2 signal over the cord: the per-row curve, per-level myelopathy index
//! (T2-MI), relative signal change index (RSCI) and the hyperintensity call.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::instance_region;
use crate::types::{DiscLevel, InstanceMap, IntensityImage, Vertebra, CORD_CODE};

/// Per-row mean T2 signal over cord pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct T2Curve {
    rows: Vec<(usize, f64)>,
    /// `(sum, count)` behind each mean.
    parts: Vec<(f64, f64)>,
}

impl T2Curve {
    pub fn from_rows(rows: Vec<(usize, f64)>) -> Result<Self> {
        if rows.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidParameter("curve rows must increase".into()));
        }
        if rows.iter().any(|r| !(r.1 >= 0.0)) {
            return Err(Error::InvalidParameter(
                "curve values must be non-negative".into(),
            ));
        }
        let parts = rows.iter().map(|r| (r.1, 1.0)).collect();
        Ok(T2Curve { rows, parts })
    }

    pub fn rows(&self) -> &[(usize, f64)] {
        &self.rows
    }

    /// Curve values for rows in `lo..=hi`.
    pub fn values_in(&self, (lo, hi): (usize, usize)) -> Vec<f64> {
        let start = self.rows.partition_point(|r| r.0 < lo);
        self.rows[start..]
            .iter()
            .take_while(|r| r.0 <= hi)
            .map(|r| r.1)
            .collect()
    }

    /// The curve divided by its peak row. Each value is one division of
    /// `sum_i·n_peak` by `n_i·sum_peak`, so when those products are exact
    /// (integer intensities) a positive rescaling of the image gives the
    /// identical result.
    fn peak_normalized(&self) -> T2Curve {
        let mut peak = 0;
        for (i, &(s, n)) in self.parts.iter().enumerate() {
            let (ps, pn) = self.parts[peak];
            if s * pn > ps * n {
                peak = i;
            }
        }
        let (ps, pn) = self.parts[peak];
        if !(ps > 0.0) {
            return self.clone();
        }
        let rows = self
            .rows
            .iter()
            .zip(&self.parts)
            .map(|(&(y, _), &(s, n))| (y, (s * pn) / (n * ps)))
            .collect();
        let parts = self.parts.iter().map(|&(s, n)| (s * pn, n * ps)).collect();
        T2Curve { rows, parts }
    }
}

pub fn t2_si_curve(image: &IntensityImage, map: &InstanceMap) -> Result<T2Curve> {
    let (h, w) = map.dims();
    if image.dims() != (h, w) {
        return Err(Error::DimensionMismatch {
            left: "image".into(),
            lh: image.dims().0,
            lw: image.dims().1,
            right: "instance map".into(),
            rh: h,
            rw: w,
        });
    }
    let (mut rows, mut parts) = (Vec::new(), Vec::new());
    for y in 0..h {
        let codes = map.codes().row(y);
        let vals = image.values().row(y);
        let (mut sum, mut n) = (0.0, 0usize);
        for x in 0..w {
            if codes[x] == CORD_CODE {
                sum += vals[x];
                n += 1;
            }
        }
        if n > 0 {
            rows.push((y, sum / n as f64));
            parts.push((sum, n as f64));
        }
    }
    if rows.is_empty() {
        return Err(Error::SpinalCordAbsent);
    }
    Ok(T2Curve { rows, parts })
}

fn centroid_row(map: &InstanceMap, v: Vertebra) -> Option<usize> {
    instance_region(map, v.code()).map(|r| r.centroid().0.round() as usize)
}

/// Inclusive row range per present disc level.
///
/// Adjacent present discs split at the midpoint between their bounding
/// boxes; a level without a neighbouring disc extends to the centroid row
/// of its adjacent vertebra. Spans never overlap.
pub fn segment_spans(map: &InstanceMap) -> BTreeMap<DiscLevel, (usize, usize)> {
    let boxes: Vec<Option<(usize, usize)>> = DiscLevel::ALL
        .iter()
        .map(|l| instance_region(map, l.code()).map(|r| (r.bbox().min_y, r.bbox().max_y)))
        .collect();
    let mut out = BTreeMap::new();
    let mut prev_end: Option<usize> = None;
    for (i, level) in DiscLevel::ALL.iter().enumerate() {
        let Some((lo, hi)) = boxes[i] else {
            continue;
        };
        let above = i.checked_sub(1).and_then(|j| boxes[j]);
        let below = boxes.get(i + 1).copied().flatten();
        let mut start = match above {
            Some((_, phi)) => (phi + lo) / 2 + 1,
            None => centroid_row(map, level.upper()).map_or(lo, |c| c.min(lo)),
        };
        let mut end = match below {
            Some((nlo, _)) => (hi + nlo) / 2,
            None => centroid_row(map, level.lower()).map_or(hi, |c| c.max(hi)),
        };
        if let Some(p) = prev_end {
            start = start.max(p + 1);
        }
        end = end.max(start);
        out.insert(*level, (start, end));
        prev_end = Some(end);
    }
    out
}

/// T2-MI in percent: `(max − min) / mean · 100`.
pub fn t2_mi_values(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "{} curve row(s) in span",
            values.len()
        )));
    }
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
    }
    let mean = sum / values.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::ZeroMean("T2 signal in span".into()));
    }
    Ok((hi - lo) / mean * 100.0)
}

pub fn t2_mi(curve: &T2Curve, span: (usize, usize)) -> Result<f64> {
    t2_mi_values(&curve.values_in(span))
}

/// RSCI at each position of an ordered T2-MI sequence; `None` at the two
/// ends, where the window sum is zero, and everywhere when fewer than three
/// values are given.
pub fn rsci(t2mi: &[f64]) -> Vec<Option<f64>> {
    let n = t2mi.len();
    (0..n)
        .map(|i| {
            if i == 0 || i + 1 >= n {
                return None;
            }
            let s = t2mi[i - 1] + t2mi[i] + t2mi[i + 1];
            (s > 0.0).then(|| 3.0 * t2mi[i] / s)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineRule {
    #[default]
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub t2mi_cut: f64,
    pub rsci_cut: f64,
    pub rule: CombineRule,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            t2mi_cut: 23.7,
            rsci_cut: 1.2,
            rule: CombineRule::And,
        }
    }
}

/// Decision for one level; without an RSCI only T2-MI is used.
pub fn is_hyperintense(t2_mi: f64, rsci: Option<f64>, th: &Thresholds) -> bool {
    let mi = t2_mi >= th.t2mi_cut;
    match rsci {
        None => mi,
        Some(r) => match th.rule {
            CombineRule::And => mi && r >= th.rsci_cut,
            CombineRule::Or => mi || r >= th.rsci_cut,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSignal {
    pub t2_mi: f64,
    pub rsci: Option<f64>,
    pub hyperintense: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentIndices {
    pub levels: BTreeMap<DiscLevel, LevelSignal>,
    pub warnings: Vec<String>,
}

pub fn detect_hyperintensity(
    indices: &SegmentIndices,
    th: &Thresholds,
) -> BTreeMap<DiscLevel, bool> {
    indices
        .levels
        .iter()
        .map(|(&l, s)| (l, is_hyperintense(s.t2_mi, s.rsci, th)))
        .collect()
}

/// Indices from precomputed per-level T2-MI values.
pub fn indices_from_t2mi(t2mi: &BTreeMap<DiscLevel, f64>, th: &Thresholds) -> SegmentIndices {
    let levels: Vec<DiscLevel> = t2mi.keys().copied().collect();
    let values: Vec<f64> = t2mi.values().copied().collect();
    let r = rsci(&values);
    let mut out = SegmentIndices::default();
    if values.len() < 3 {
        out.warnings.push(format!(
            "RSCI omitted: only {} level(s) measurable",
            values.len()
        ));
    }
    for (i, &l) in levels.iter().enumerate() {
        if r[i].is_none() && i > 0 && i + 1 < values.len() {
            out.warnings
                .push(format!("RSCI absent at {l}: zero window sum"));
        }
        out.levels.insert(
            l,
            LevelSignal {
                t2_mi: values[i],
                rsci: r[i],
                hyperintense: is_hyperintense(values[i], r[i], th),
            },
        );
    }
    out
}

/// Full per-level signal analysis on the peak-normalized curve.
pub fn segment_indices(curve: &T2Curve, map: &InstanceMap, th: &Thresholds) -> SegmentIndices {
    let norm = curve.peak_normalized();
    let mut t2mi = BTreeMap::new();
    let mut warnings = Vec::new();
    for (level, span) in segment_spans(map) {
        match t2_mi(&norm, span) {
            Ok(v) => {
                t2mi.insert(level, v);
            }
            Err(e) => warnings.push(format!("T2-MI unavailable at {level}: {e}")),
        }
    }
    let mut out = indices_from_t2mi(&t2mi, th);
    warnings.append(&mut out.warnings);
    out.warnings = warnings;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::types::Spacing;

    #[test]
    fn uniform_curve() {
        let map = InstanceMap::new(Grid::from_fn(
            6,
            6,
            |_, x| if x < 3 { CORD_CODE } else { 0 },
        ))
        .unwrap();
        let img = IntensityImage::new(Grid::filled(6, 6, 100.0), Spacing::new(1.0, 1.0).unwrap())
            .unwrap();
        let c = t2_si_curve(&img, &map).unwrap();
        assert!(c.rows().iter().all(|r| r.1 == 100.0));
    }

    #[test]
    fn mi_examples() {
        assert_eq!(t2_mi_values(&[5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert_eq!(t2_mi_values(&[80.0, 100.0, 120.0]).unwrap(), 40.0);
        assert!(t2_mi_values(&[0.0, 0.0]).is_err());
        assert!(t2_mi_values(&[1.0]).is_err());
    }

    #[test]
    fn rsci_examples() {
        assert_eq!(rsci(&[10.0, 40.0, 10.0]), vec![None, Some(2.0), None]);
        let r = rsci(&[7.3; 5]);
        assert!(r[1..4].iter().all(|&v| v == Some(1.0)));
        assert_eq!(rsci(&[1.0, 2.0]), vec![None, None]);
    }

    #[test]
    fn cutoffs() {
        let th = Thresholds::default();
        assert!(is_hyperintense(40.0, Some(2.0), &th));
        assert!(!is_hyperintense(40.0, Some(1.0), &th));
        assert!(!is_hyperintense(10.0, Some(2.0), &th));
        assert!(is_hyperintense(40.0, None, &th));
        let or = Thresholds {
            rule: CombineRule::Or,
            ..th
        };
        assert!(is_hyperintense(10.0, Some(2.0), &or));
    }

    fn disc_map(boxes: &[(u8, usize, usize)]) -> InstanceMap {
        let mut g = Grid::filled(120, 4, 0u8);
        for &(code, y0, y1) in boxes {
            for y in y0..=y1 {
                g.set(y, 0, code);
            }
        }
        InstanceMap::new(g).unwrap()
    }

    #[test]
    fn spans_tile_between_vertebrae() {
        let map = disc_map(&[
            (1, 0, 10),
            (7, 12, 15),
            (2, 17, 27),
            (8, 29, 32),
            (3, 34, 44),
        ]);
        let s = segment_spans(&map);
        assert_eq!(s[&DiscLevel::C2C3], (5, 22));
        assert_eq!(s[&DiscLevel::C3C4], (23, 39));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn overlapping_boxes_stay_disjoint() {
        let map = disc_map(&[(7, 10, 30), (8, 20, 40), (9, 25, 26)]);
        let s: Vec<(usize, usize)> = segment_spans(&map).into_values().collect();
        for w in s.windows(2) {
            assert!(w[0].1 < w[1].0);
        }
        assert!(s.iter().all(|r| r.0 <= r.1));
    }
}
