//! Kang grading per disc level and per patient.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::AnatomicalFrame;
use crate::herniation::HerniationMask;
use crate::labeling::{instance_region, Region};
use crate::rect::{min_area_rect, Pt};
use crate::types::{DiscLevel, InstanceMap, Orientation, Spacing, Vertebra, CORD_CODE};

/// `IVD_i ∩ H` for one level.
pub fn herniation_at_level(
    map: &InstanceMap,
    hern: &HerniationMask,
    level: DiscLevel,
) -> Option<Region> {
    let mask = hern.mask();
    let pixels: Vec<(usize, usize)> = map
        .pixels_of(level.code())
        .into_iter()
        .filter(|&(y, x)| *mask.get(y, x))
        .collect();
    Region::from_pixels(pixels)
}

/// Cord pixels with at least one non-cord 4-neighbour (or on the border).
fn cord_boundary(map: &InstanceMap) -> Vec<(usize, usize)> {
    let g = map.codes();
    let is_cord = |y: i64, x: i64| g.get_signed(y, x) == Some(&CORD_CODE);
    g.indexed()
        .filter(|&(_, _, &c)| c == CORD_CODE)
        .filter(|&(y, x, _)| {
            let (y, x) = (y as i64, x as i64);
            !(is_cord(y - 1, x) && is_cord(y + 1, x) && is_cord(y, x - 1) && is_cord(y, x + 1))
        })
        .map(|(y, x, _)| (y, x))
        .collect()
}

fn nearest_mm(p: Pt, targets: &[(usize, usize)], spacing: Spacing) -> f64 {
    targets
        .iter()
        .map(|&(y, x)| spacing.distance_mm(y as f64 - p.y, x as f64 - p.x))
        .fold(f64::INFINITY, f64::min)
}

/// Minimum distance in mm between the component and the cord; zero when
/// they overlap or touch under 8-adjacency.
pub fn herniation_cord_distance(
    map: &InstanceMap,
    component: &Region,
    spacing: Spacing,
) -> Result<f64> {
    let boundary = cord_boundary(map);
    if boundary.is_empty() {
        return Err(Error::SpinalCordAbsent);
    }
    let g = map.codes();
    let mut best = f64::INFINITY;
    for &(y, x) in component.pixels() {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if g.get_signed(y as i64 + dy, x as i64 + dx) == Some(&CORD_CODE) {
                    return Ok(0.0);
                }
            }
        }
        best = best.min(nearest_mm(Pt::new(y as f64, x as f64), &boundary, spacing));
    }
    Ok(best)
}

/// Distance in mm from the midpoint of the vertebra's posterior wall to
/// the nearest cord pixel.
pub fn reference_distance(
    map: &InstanceMap,
    vertebra: Vertebra,
    spacing: Spacing,
    orientation: Orientation,
) -> Result<f64> {
    let region = instance_region(map, vertebra.code())
        .ok_or_else(|| Error::MissingAnatomy(format!("vertebra {vertebra}")))?;
    let frame = AnatomicalFrame::for_map(map, orientation);
    let rect = min_area_rect(&frame.region_points(&region))?;
    let mid = frame.point_to_image(rect.corners[1].midpoint(rect.corners[2]));
    let boundary = cord_boundary(map);
    if boundary.is_empty() {
        return Err(Error::SpinalCordAbsent);
    }
    Ok(nearest_mm(mid, &boundary, spacing))
}

/// Stenosis ratio in percent from `d_hern` and the mean reference distance.
pub fn ratio_percent(d_hern_mm: f64, d_ref_mean_mm: f64) -> Result<f64> {
    if !(d_ref_mean_mm > 0.0) {
        return Err(Error::DegenerateReference(format!(
            "mean reference distance {d_ref_mean_mm}"
        )));
    }
    Ok((1.0 - d_hern_mm / d_ref_mean_mm) * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stenosis {
    pub ratio_percent: f64,
    pub d_hern_mm: f64,
    pub d_ref_mm: f64,
}

pub fn stenosis_ratio(
    map: &InstanceMap,
    component: &Region,
    level: DiscLevel,
    spacing: Spacing,
    orientation: Orientation,
) -> Result<Stenosis> {
    let d_hern_mm = herniation_cord_distance(map, component, spacing)?;
    let a = reference_distance(map, level.upper(), spacing, orientation)?;
    let b = reference_distance(map, level.lower(), spacing, orientation)?;
    let d_ref_mm = (a + b) / 2.0;
    Ok(Stenosis {
        ratio_percent: ratio_percent(d_hern_mm, d_ref_mm)?,
        d_hern_mm,
        d_ref_mm,
    })
}

/// The grade table: no herniation → 0; hyperintense → 3; contact → 2;
/// ratio ≥ 50% → 1; otherwise 0.
pub fn segment_grade(
    hern_present: bool,
    ratio_percent: Option<f64>,
    d_hern_mm: Option<f64>,
    t2_hyper: bool,
) -> u8 {
    if !hern_present {
        0
    } else if t2_hyper {
        3
    } else if d_hern_mm == Some(0.0) {
        2
    } else if ratio_percent.is_some_and(|r| r >= 50.0) {
        1
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KangLevel {
    pub grade: u8,
    pub stenosis_ratio_percent: Option<f64>,
    pub d_hern_mm: Option<f64>,
    pub t2_hyper: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KangAssessment {
    pub levels: BTreeMap<DiscLevel, KangLevel>,
    pub patient_grade: u8,
    pub warnings: Vec<String>,
}

pub fn patient_grade(levels: &BTreeMap<DiscLevel, KangLevel>) -> u8 {
    levels.values().map(|l| l.grade).max().unwrap_or(0)
}

/// Grade every disc level present in the map.
pub fn assess(
    map: &InstanceMap,
    hern: &HerniationMask,
    spacing: Spacing,
    orientation: Orientation,
    t2_hyper: &BTreeMap<DiscLevel, bool>,
) -> KangAssessment {
    let mut out = KangAssessment::default();
    for level in DiscLevel::ALL {
        if !map.contains_code(level.code()) {
            continue;
        }
        let hyper = t2_hyper.get(&level).copied().unwrap_or(false);
        let comp = herniation_at_level(map, hern, level);
        let (ratio, d_hern) = match &comp {
            None => (None, None),
            Some(c) => match stenosis_ratio(map, c, level, spacing, orientation) {
                Ok(s) => (Some(s.ratio_percent), Some(s.d_hern_mm)),
                Err(e) => {
                    out.warnings
                        .push(format!("stenosis ratio unavailable at {level}: {e}"));
                    (None, herniation_cord_distance(map, c, spacing).ok())
                }
            },
        };
        out.levels.insert(
            level,
            KangLevel {
                grade: segment_grade(comp.is_some(), ratio, d_hern, hyper),
                stenosis_ratio_percent: ratio,
                d_hern_mm: d_hern,
                t2_hyper: hyper,
            },
        );
    }
    out.patient_grade = patient_grade(&out.levels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grade_table() {
        assert_eq!(segment_grade(true, Some(10.0), Some(3.0), true), 3);
        assert_eq!(segment_grade(true, Some(100.0), Some(0.0), false), 2);
        assert_eq!(segment_grade(true, Some(40.0), Some(1.0), false), 0);
        assert_eq!(segment_grade(true, Some(50.0), Some(1.0), false), 1);
        assert_eq!(segment_grade(false, None, None, true), 0);
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(ratio_percent(2.0, (5.0 + 3.0) / 2.0).unwrap(), 50.0);
        assert_eq!(ratio_percent(4.0, 4.0).unwrap(), 0.0);
        assert_eq!(ratio_percent(0.0, 4.0).unwrap(), 100.0);
        assert!(ratio_percent(1.0, 0.0).is_err());
    }

    fn level(grade: u8) -> KangLevel {
        KangLevel {
            grade,
            stenosis_ratio_percent: None,
            d_hern_mm: None,
            t2_hyper: false,
        }
    }

    #[test]
    fn patient_is_max() {
        let m: BTreeMap<DiscLevel, KangLevel> = DiscLevel::ALL
            .iter()
            .zip([1, 2, 0, 3, 0])
            .map(|(&l, g)| (l, level(g)))
            .collect();
        assert_eq!(patient_grade(&m), 3);
        let one: BTreeMap<_, _> = [(DiscLevel::C3C4, level(1))].into_iter().collect();
        assert_eq!(patient_grade(&one), 1);
    }

    #[test]
    fn contact_distance_is_zero() {
        use crate::grid::Grid;
        let mut g = Grid::filled(10, 10, 0u8);
        for y in 0..10 {
            g.set(y, 6, CORD_CODE);
        }
        g.set(4, 5, 9);
        g.set(4, 2, 9);
        let map = InstanceMap::new(g).unwrap();
        let s = Spacing::new(0.5, 0.5).unwrap();
        let touching = Region::from_pixels(vec![(4, 5)]).unwrap();
        assert_eq!(herniation_cord_distance(&map, &touching, s).unwrap(), 0.0);
        let apart = Region::from_pixels(vec![(4, 2)]).unwrap();
        assert_eq!(herniation_cord_distance(&map, &apart, s).unwrap(), 2.0);
    }
}
