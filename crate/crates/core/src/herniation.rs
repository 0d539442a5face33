//! Posterior disc herniation from the vertebral reference lines.
//!
//! For each disc level a reference line joins the inferior-posterior corner
//! of the upper vertebra to the superior-posterior corner of the lower one.
//! Disc pixels strictly posterior to it are herniation.

use crate::error::Result;
use crate::frame::AnatomicalFrame;
use crate::grid::Grid;
use crate::labeling::{connected_components, instance_region, Connectivity, Region};
use crate::rect::{min_area_rect, Pt, RotatedRect};
use crate::types::{DiscLevel, InstanceMap, Orientation};

/// Components below this many pixels are discarded.
pub const HERNIATION_MIN_AREA: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct HerniationComponent {
    pub region: Region,
    pub level: DiscLevel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HerniationMask {
    mask: Grid<bool>,
    components: Vec<HerniationComponent>,
    skipped: Vec<DiscLevel>,
    anterior_bulges: usize,
}

impl HerniationMask {
    pub fn empty(height: usize, width: usize) -> Self {
        HerniationMask {
            mask: Grid::filled(height, width, false),
            components: Vec::new(),
            skipped: Vec::new(),
            anterior_bulges: 0,
        }
    }

    pub fn mask(&self) -> &Grid<bool> {
        &self.mask
    }

    pub fn components(&self) -> &[HerniationComponent] {
        &self.components
    }

    /// Disc levels present in the map but skipped for lack of a usable
    /// adjacent vertebra.
    pub fn skipped(&self) -> &[DiscLevel] {
        &self.skipped
    }

    /// Anterior protrusions of at least [`HERNIATION_MIN_AREA`] pixels; not
    /// part of the mask.
    pub fn anterior_bulges(&self) -> usize {
        self.anterior_bulges
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn at_level(&self, level: DiscLevel) -> impl Iterator<Item = &HerniationComponent> {
        self.components.iter().filter(move |c| c.level == level)
    }

    pub fn area_at(&self, level: DiscLevel) -> usize {
        self.at_level(level).map(|c| c.region.area()).sum()
    }

    /// Keep only the levels for which `keep` holds.
    pub fn retain_levels(&mut self, mut keep: impl FnMut(DiscLevel) -> bool) {
        let mask = &mut self.mask;
        self.components.retain(|c| {
            let k = keep(c.level);
            if !k {
                for &(y, x) in c.region.pixels() {
                    mask.set(y, x, false);
                }
            }
            k
        });
    }
}

/// Vertebra rectangle in canonical coordinates; `corners[1]` and
/// `corners[2]` are the posterior corners.
fn canonical_rect(frame: &AnatomicalFrame, region: &Region) -> Result<RotatedRect> {
    if region.area() < 3 {
        return Err(crate::Error::DegenerateRegion(format!(
            "area {} below 3",
            region.area()
        )));
    }
    min_area_rect(&frame.region_points(region))
}

/// Posterior corners `(inferior, superior)` of a vertebra, in image
/// coordinates.
pub fn posterior_corners(vertebra: &Region, orientation: Orientation) -> Result<(Pt, Pt)> {
    let frame = region_frame(vertebra, orientation);
    let r = canonical_rect(&frame, vertebra)?;
    Ok((
        frame.point_to_image(r.corners[2]),
        frame.point_to_image(r.corners[1]),
    ))
}

fn region_frame(region: &Region, orientation: Orientation) -> AnatomicalFrame {
    let b = region.bbox();
    AnatomicalFrame::from_bbox(b.min_y, b.min_x, b.max_x, orientation)
}

/// Reference lines of one level in canonical coordinates:
/// `(posterior_a, posterior_b, anterior_a, anterior_b)`.
pub(crate) fn level_lines(
    frame: &AnatomicalFrame,
    map: &InstanceMap,
    level: DiscLevel,
) -> Option<(Pt, Pt, Pt, Pt)> {
    let upper = instance_region(map, level.upper().code())?;
    let lower = instance_region(map, level.lower().code())?;
    let ru = canonical_rect(frame, &upper).ok()?;
    let rl = canonical_rect(frame, &lower).ok()?;
    Some((ru.corners[2], rl.corners[1], ru.corners[3], rl.corners[0]))
}

/// Signed side of `p` relative to the line `a → b`, with `a` above `b`:
/// positive when `p` is on the +u (posterior) side.
fn side(a: Pt, b: Pt, p: Pt) -> f64 {
    let d = b.sub(a);
    let r = p.sub(a);
    d.y * r.x - d.x * r.y
}

pub fn extract_herniation(map: &InstanceMap, orientation: Orientation) -> HerniationMask {
    let (h, w) = map.dims();
    let frame = AnatomicalFrame::for_map(map, orientation);
    let mut out = HerniationMask::empty(h, w);
    for level in DiscLevel::ALL {
        let Some(disc) = instance_region(map, level.code()) else {
            continue;
        };
        let Some((pa, pb, aa, ab)) = level_lines(&frame, map, level) else {
            out.skipped.push(level);
            continue;
        };
        let mut post = Grid::filled(h, w, false);
        let mut ante = Grid::filled(h, w, false);
        for &(y, x) in disc.pixels() {
            let (cy, cu) = frame.to_canonical(y, x);
            let p = Pt::new(cy as f64, cu as f64);
            if side(pa, pb, p) > 0.0 {
                post.set(y, x, true);
            } else if side(aa, ab, p) < 0.0 {
                ante.set(y, x, true);
            }
        }
        for region in connected_components(&post, Connectivity::Eight) {
            if region.area() < HERNIATION_MIN_AREA {
                continue;
            }
            for &(y, x) in region.pixels() {
                out.mask.set(y, x, true);
            }
            out.components.push(HerniationComponent { region, level });
        }
        out.anterior_bulges += connected_components(&ante, Connectivity::Eight)
            .iter()
            .filter(|r| r.area() >= HERNIATION_MIN_AREA)
            .count();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::CORD_CODE;

    /// Column of axis-aligned blocks: vertebrae rows 10..30, 40..60, ...,
    /// discs between; posterior face at x = 49 for anterior left.
    pub(crate) fn column(h: usize, w: usize, mirrored: bool) -> Grid<u8> {
        let mut g = Grid::filled(h, w, 0u8);
        let mut put = |y: usize, x: usize, c: u8| {
            let x = if mirrored { w - 1 - x } else { x };
            g.set(y, x, c);
        };
        for k in 0..6 {
            let y0 = 10 + 30 * k;
            for y in y0..y0 + 20 {
                for x in 20..50 {
                    put(y, x, k as u8 + 1);
                }
            }
            if k < 5 {
                for y in y0 + 20..y0 + 30 {
                    for x in 22..48 {
                        put(y, x, k as u8 + 7);
                    }
                }
            }
        }
        for y in 0..h {
            for x in 60..68 {
                put(y, x, CORD_CODE);
            }
        }
        g
    }

    fn add_bump(g: &mut Grid<u8>, code: u8, y0: usize, rows: usize, x0: usize, cols: usize) {
        for y in y0..y0 + rows {
            for x in x0..x0 + cols {
                g.set(y, x, code);
            }
        }
    }

    #[test]
    fn corners_follow_orientation() {
        let r = Region::from_pixels(
            (10..20)
                .flat_map(|y| (5..15).map(move |x| (y, x)))
                .collect(),
        )
        .unwrap();
        let (inf, sup) = posterior_corners(&r, Orientation::Left).unwrap();
        assert_eq!((inf, sup), (Pt::new(19.0, 14.0), Pt::new(10.0, 14.0)));
        let (inf, sup) = posterior_corners(&r, Orientation::Right).unwrap();
        assert_eq!((inf, sup), (Pt::new(19.0, 5.0), Pt::new(10.0, 5.0)));
    }

    #[test]
    fn clean_column_has_no_herniation() {
        let map = InstanceMap::new(column(200, 80, false)).unwrap();
        let h = extract_herniation(&map, Orientation::Left);
        assert!(h.is_empty());
        assert_eq!(h.anterior_bulges(), 0);
    }

    #[test]
    fn posterior_bump_is_found_at_its_level() {
        let mut g = column(200, 80, false);
        // disc C4/5 (code 9) occupies rows 90..100
        add_bump(&mut g, 9, 92, 5, 50, 8);
        let map = InstanceMap::new(g).unwrap();
        let h = extract_herniation(&map, Orientation::Left);
        assert_eq!(h.components().len(), 1);
        assert_eq!(h.components()[0].level, DiscLevel::C4C5);
        assert_eq!(h.components()[0].region.area(), 40);
        for (y, x, &v) in h.mask().indexed() {
            if v {
                assert_eq!(map.code(y, x), 9);
            }
        }
    }

    #[test]
    fn small_bump_is_dropped() {
        let mut g = column(200, 80, false);
        add_bump(&mut g, 9, 92, 2, 50, 4);
        let map = InstanceMap::new(g).unwrap();
        assert!(extract_herniation(&map, Orientation::Left).is_empty());
    }

    #[test]
    fn anterior_bulge_is_counted_not_masked() {
        let mut g = column(200, 80, false);
        add_bump(&mut g, 8, 62, 4, 14, 6);
        let map = InstanceMap::new(g).unwrap();
        let h = extract_herniation(&map, Orientation::Left);
        assert!(h.is_empty());
        assert_eq!(h.anterior_bulges(), 1);
    }

    #[test]
    fn mirror_equivariance() {
        let mut g = column(200, 80, false);
        add_bump(&mut g, 10, 122, 6, 48, 5);
        let mut gm = column(200, 80, true);
        add_bump(&mut gm, 10, 122, 6, 80 - 48 - 5, 5);
        let a = extract_herniation(&InstanceMap::new(g).unwrap(), Orientation::Left);
        let b = extract_herniation(&InstanceMap::new(gm).unwrap(), Orientation::Right);
        let mirrored = Grid::from_fn(200, 80, |y, x| *b.mask().get(y, 79 - x));
        assert_eq!(a.mask(), &mirrored);
        assert_eq!(a.components().len(), 1);
    }

    #[test]
    fn missing_vertebra_skips_level() {
        let mut g = column(200, 80, false);
        for v in g.as_slice().to_vec().iter().enumerate() {
            if *v.1 == 6 {
                let (y, x) = (v.0 / 80, v.0 % 80);
                g.set(y, x, 0);
            }
        }
        let map = InstanceMap::new(g).unwrap();
        let h = extract_herniation(&map, Orientation::Left);
        assert_eq!(h.skipped(), &[DiscLevel::C6C7]);
    }
}
