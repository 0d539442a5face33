//! Cord width profile, MSCC, the modified K-line and Cobb angles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::AnatomicalFrame;
use crate::herniation::HerniationMask;
use crate::labeling::instance_region;
use crate::raster::{ray_crossings, supercover};
use crate::rect::{footprint_rect, min_area_rect, Pt, RectEdge, RotatedRect};
use crate::types::{DiscLevel, InstanceMap, Orientation, Spacing, Vertebra, CORD_CODE, CSF_CODE};

/// Which pixels count toward the per-row width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WidthSource {
    /// Spinal cord only.
    #[default]
    Cord,
    /// Spinal cord plus CSF.
    Canal,
}

impl WidthSource {
    pub fn as_str(self) -> &'static str {
        match self {
            WidthSource::Cord => "cord",
            WidthSource::Canal => "canal",
        }
    }

    fn counts(self, code: u8) -> bool {
        code == CORD_CODE || (self == WidthSource::Canal && code == CSF_CODE)
    }
}

/// Per-row width over the rows that contain spinal cord.
#[derive(Debug, Clone, PartialEq)]
pub struct WidthProfile {
    rows: Vec<(usize, f64)>,
}

impl WidthProfile {
    pub fn from_rows(rows: Vec<(usize, f64)>) -> Result<Self> {
        if rows.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidParameter("profile rows must increase".into()));
        }
        if rows.iter().any(|r| !(r.1 >= 0.0)) {
            return Err(Error::InvalidParameter(
                "profile widths must be non-negative".into(),
            ));
        }
        Ok(WidthProfile { rows })
    }

    pub fn rows(&self) -> &[(usize, f64)] {
        &self.rows
    }

    pub fn width_at(&self, y: usize) -> Option<f64> {
        self.rows
            .binary_search_by_key(&y, |r| r.0)
            .ok()
            .map(|i| self.rows[i].1)
    }
}

pub fn width_profile(
    map: &InstanceMap,
    spacing: Spacing,
    source: WidthSource,
) -> Result<WidthProfile> {
    let (h, w) = map.dims();
    let mut rows = Vec::new();
    for y in 0..h {
        let row = &map.codes().row(y)[..w];
        if !row.contains(&CORD_CODE) {
            continue;
        }
        let n = row.iter().filter(|&&c| source.counts(c)).count();
        rows.push((y, n as f64 * spacing.x));
    }
    if rows.is_empty() {
        return Err(Error::SpinalCordAbsent);
    }
    Ok(WidthProfile { rows })
}

pub fn cord_width_profile(map: &InstanceMap, spacing: Spacing) -> Result<WidthProfile> {
    width_profile(map, spacing, WidthSource::Cord)
}

/// MSCC in percent from the compressed width and the two reference widths.
pub fn mscc_percent(d_i: f64, d_a: f64, d_b: f64) -> Result<f64> {
    let reference = (d_a + d_b) / 2.0;
    if !(reference > 0.0) {
        return Err(Error::DegenerateReference(format!(
            "mean reference width {reference}"
        )));
    }
    Ok((1.0 - d_i / reference) * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsccEntry {
    pub disc_level: DiscLevel,
    pub mscc_percent: f64,
}

fn vertebra_row(map: &InstanceMap, v: Vertebra) -> Result<usize> {
    let r = instance_region(map, v.code())
        .ok_or_else(|| Error::MissingAnatomy(format!("vertebra {v}")))?;
    Ok(r.centroid().0.round() as usize)
}

/// MSCC at one herniated level.
pub fn mscc_at_level(
    profile: &WidthProfile,
    hern: &HerniationMask,
    map: &InstanceMap,
    level: DiscLevel,
) -> Result<f64> {
    let mut d_i = f64::INFINITY;
    let mut any = false;
    for c in hern.at_level(level) {
        let b = c.region.bbox();
        for y in b.min_y..=b.max_y {
            any = true;
            let w = profile.width_at(y).ok_or(Error::OutsideProfile {
                level: level.name().to_string(),
            })?;
            d_i = d_i.min(w);
        }
    }
    if !any {
        return Err(Error::MissingAnatomy(format!("herniation at {level}")));
    }
    let width_at = |v: Vertebra| -> Result<f64> {
        let y = vertebra_row(map, v)?;
        profile.width_at(y).ok_or(Error::OutsideProfile {
            level: level.name().to_string(),
        })
    };
    mscc_percent(d_i, width_at(level.upper())?, width_at(level.lower())?)
}

/// MSCC for every disc level that has herniation, superior to inferior.
pub fn mscc(
    profile: &WidthProfile,
    hern: &HerniationMask,
    map: &InstanceMap,
) -> Result<Vec<MsccEntry>> {
    DiscLevel::ALL
        .iter()
        .filter(|&&l| hern.at_level(l).next().is_some())
        .map(|&l| {
            Ok(MsccEntry {
                disc_level: l,
                mscc_percent: mscc_at_level(profile, hern, map, l)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KLineStatus {
    Positive,
    Negative,
}

impl KLineStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            KLineStatus::Positive => "positive",
            KLineStatus::Negative => "negative",
        }
    }
}

/// Segment between the cord midpoints at C2 and C7.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KLine {
    frame: AnatomicalFrame,
    a: Pt,
    b: Pt,
    pub status: Option<KLineStatus>,
}

impl KLine {
    /// Build from canonical endpoints.
    pub fn from_canonical(frame: AnatomicalFrame, a: Pt, b: Pt) -> Self {
        KLine {
            frame,
            a,
            b,
            status: None,
        }
    }

    pub fn p_c2(&self) -> Pt {
        self.frame.point_to_image(self.a)
    }

    pub fn p_c7(&self) -> Pt {
        self.frame.point_to_image(self.b)
    }

    pub fn canonical(&self) -> (Pt, Pt) {
        (self.a, self.b)
    }

    pub fn frame(&self) -> &AnatomicalFrame {
        &self.frame
    }

    /// Image pixels the segment passes through (possibly off-grid).
    pub fn pixels(&self) -> Vec<(i64, i64)> {
        supercover(self.a, self.b)
            .into_iter()
            .map(|(y, u)| self.frame.to_image(y, u))
            .collect()
    }
}

fn vertebra_rect(frame: &AnatomicalFrame, map: &InstanceMap, v: Vertebra) -> Result<RotatedRect> {
    let r = instance_region(map, v.code())
        .ok_or_else(|| Error::MissingAnatomy(format!("vertebra {v}")))?;
    min_area_rect(&frame.region_points(&r))
}

/// Midpoint of the first cord chord crossed by the ray from `origin`
/// along `dir`, in canonical coordinates. Non-cord stretches shorter than
/// one pixel inside the chord are tolerated.
fn cord_chord_midpoint(
    frame: &AnatomicalFrame,
    map: &InstanceMap,
    origin: Pt,
    dir: (i64, i64),
) -> Option<Pt> {
    let (h, w) = map.dims();
    let d = Pt::new(dir.0 as f64, dir.1 as f64);
    let d = d.scale(1.0 / d.norm());
    let t_max = (h + w) as f64 * 2.0;
    let is_cord = |(cy, cu): (i64, i64)| {
        let (y, x) = frame.to_image(cy, cu);
        map.codes().get_signed(y, x) == Some(&CORD_CODE)
    };
    let mut chord: Option<(f64, f64)> = None;
    let mut gap = 0.0;
    for c in ray_crossings(origin, d, t_max) {
        if is_cord(c.pixel) {
            gap = 0.0;
            chord = Some(match chord {
                None => (c.t_enter, c.t_exit),
                Some((s, _)) => (s, c.t_exit),
            });
        } else if chord.is_some() {
            gap += c.t_exit - c.t_enter;
            if gap >= 1.0 {
                break;
            }
        }
    }
    chord.map(|(s, e)| origin.add(d.scale((s + e) / 2.0)))
}

pub fn modified_k_line(map: &InstanceMap, orientation: Orientation) -> Result<KLine> {
    if !map.contains_code(CORD_CODE) {
        return Err(Error::SpinalCordAbsent);
    }
    let frame = AnatomicalFrame::for_map(map, orientation);
    let c2 = vertebra_rect(&frame, map, Vertebra::C2)?;
    let c7 = vertebra_rect(&frame, map, Vertebra::C7)?;
    let (_, c2_post) = c2.edge(RectEdge::Superior);
    let a = cord_chord_midpoint(&frame, map, c2_post, c2.edge_direction(RectEdge::Superior))
        .ok_or(Error::EdgeMissesCord { vertebra: "C2" })?;
    let (_, c7_post) = c7.edge(RectEdge::Inferior);
    let b = cord_chord_midpoint(&frame, map, c7_post, c7.edge_direction(RectEdge::Inferior))
        .ok_or(Error::EdgeMissesCord { vertebra: "C7" })?;
    Ok(KLine::from_canonical(frame, a, b))
}

pub fn k_line_status(line: &KLine, hern: &HerniationMask) -> KLineStatus {
    let mask = hern.mask();
    for (y, x) in line.pixels() {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if mask.get_signed(y + dy, x + dx) == Some(&true) {
                    return KLineStatus::Negative;
                }
            }
        }
    }
    KLineStatus::Positive
}

/// Endplate angle in degrees in the canonical frame: the anterior-to-posterior
/// endplate direction measured from the posterior axis toward inferior.
pub fn endplate_angle_deg(rect: &RotatedRect, edge: RectEdge) -> f64 {
    rect.edge_angle_deg(edge)
}

fn wrap_deg(mut a: f64) -> f64 {
    while a > 90.0 {
        a -= 180.0;
    }
    while a <= -90.0 {
        a += 180.0;
    }
    a
}

#[derive(Debug, Clone, PartialEq)]
pub struct CobbResult {
    /// Positive for lordosis.
    pub c2_c7_deg: f64,
    pub segmental_deg: BTreeMap<DiscLevel, f64>,
    /// Endplate lines `(anterior, posterior)` in image coordinates:
    /// C2 inferior and C7 inferior.
    pub c2_line: (Pt, Pt),
    pub c7_line: (Pt, Pt),
}

/// Canonical footprint rectangles of all six vertebrae.
fn footprint_rects(map: &InstanceMap, frame: &AnatomicalFrame) -> Result<Vec<RotatedRect>> {
    Vertebra::ALL
        .iter()
        .map(|&v| {
            let r = instance_region(map, v.code())
                .ok_or_else(|| Error::MissingAnatomy(format!("vertebra {v}")))?;
            footprint_rect(&frame.region_points(&r))
        })
        .collect()
}

pub fn cobb_angles(map: &InstanceMap, orientation: Orientation) -> Result<CobbResult> {
    let frame = AnatomicalFrame::for_map(map, orientation);
    let rects = footprint_rects(map, &frame)?;
    let inf = |k: usize| endplate_angle_deg(&rects[k], RectEdge::Inferior);
    let sup = |k: usize| endplate_angle_deg(&rects[k], RectEdge::Superior);
    let segmental_deg = DiscLevel::ALL
        .iter()
        .map(|&l| (l, wrap_deg(inf(l.upper().index()) - sup(l.lower().index()))))
        .collect();
    let to_image = |r: &RotatedRect| {
        let (a, b) = r.edge(RectEdge::Inferior);
        (frame.point_to_image(a), frame.point_to_image(b))
    };
    Ok(CobbResult {
        c2_c7_deg: wrap_deg(inf(0) - inf(5)),
        segmental_deg,
        c2_line: to_image(&rects[0]),
        c7_line: to_image(&rects[5]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::herniation::extract_herniation;

    fn band(h: usize, w: usize, x0: usize, x1: usize) -> InstanceMap {
        InstanceMap::new(Grid::from_fn(h, w, |_, x| {
            if (x0..x1).contains(&x) {
                CORD_CODE
            } else {
                0
            }
        }))
        .unwrap()
    }

    #[test]
    fn straight_band_width() {
        let p = cord_width_profile(&band(20, 30, 5, 15), Spacing::new(1.0, 0.5).unwrap()).unwrap();
        assert_eq!(p.rows().len(), 20);
        assert!(p.rows().iter().all(|r| r.1 == 5.0));
    }

    #[test]
    fn canal_adds_csf() {
        let mut g = band(10, 30, 5, 15).codes().clone();
        g.set(3, 20, CSF_CODE);
        let map = InstanceMap::new(g).unwrap();
        let p = width_profile(&map, Spacing::new(1.0, 1.0).unwrap(), WidthSource::Canal).unwrap();
        assert_eq!(p.width_at(3), Some(11.0));
        assert_eq!(p.width_at(4), Some(10.0));
    }

    #[test]
    fn absent_cord() {
        let map = InstanceMap::new(Grid::filled(5, 5, 0)).unwrap();
        assert!(matches!(
            cord_width_profile(&map, Spacing::new(1.0, 1.0).unwrap()),
            Err(Error::SpinalCordAbsent)
        ));
    }

    #[test]
    fn mscc_substitution() {
        assert!((mscc_percent(6.0, 10.0, 8.0).unwrap() - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(mscc_percent(9.0, 10.0, 8.0).unwrap(), 0.0);
        assert_eq!(mscc_percent(0.0, 10.0, 8.0).unwrap(), 100.0);
        assert!(mscc_percent(1.0, 0.0, 0.0).is_err());
    }

    /// Column of blocks with a cord band; a posterior bump at C4/5 that
    /// pinches the cord.
    fn column_with_pinch() -> InstanceMap {
        let mut g = Grid::filled(200, 90, 0u8);
        for k in 0..6 {
            let y0 = 10 + 30 * k;
            for y in y0..y0 + 20 {
                for x in 20..50 {
                    g.set(y, x, k as u8 + 1);
                }
            }
            if k < 5 {
                for y in y0 + 20..y0 + 30 {
                    for x in 22..48 {
                        g.set(y, x, k as u8 + 7);
                    }
                }
            }
        }
        for y in 0..200 {
            for x in 55..65 {
                g.set(y, x, CORD_CODE);
            }
        }
        // bump rows 92..96 reaches x = 57, displacing cord
        for y in 92..96 {
            for x in 48..58 {
                g.set(y, x, 9);
            }
        }
        InstanceMap::new(g).unwrap()
    }

    #[test]
    fn mscc_on_pinched_cord() {
        let map = column_with_pinch();
        let hern = extract_herniation(&map, Orientation::Left);
        let p = cord_width_profile(&map, Spacing::new(0.5, 0.5).unwrap()).unwrap();
        let m = mscc(&p, &hern, &map).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].disc_level, DiscLevel::C4C5);
        // cord 10 px wide, 7 px at the bump
        assert!((m[0].mscc_percent - 30.0).abs() < 1e-9);
    }

    #[test]
    fn k_line_through_straight_cord() {
        let map = column_with_pinch();
        let line = modified_k_line(&map, Orientation::Left).unwrap();
        assert!((line.p_c2().x - 59.5).abs() < 1e-9);
        assert!((line.p_c7().x - 59.5).abs() < 1e-9);
        assert_eq!(line.p_c2().y, 10.0);
        assert_eq!(line.p_c7().y, 179.0);
        let hern = extract_herniation(&map, Orientation::Left);
        // bump ends at x = 57, two columns short of the line
        assert_eq!(k_line_status(&line, &hern), KLineStatus::Positive);
    }

    #[test]
    fn flat_endplates_give_zero_cobb() {
        let map = column_with_pinch();
        let c = cobb_angles(&map, Orientation::Left).unwrap();
        assert_eq!(c.c2_c7_deg, 0.0);
        assert!(c.segmental_deg.values().all(|&v| v == 0.0));
    }
}
