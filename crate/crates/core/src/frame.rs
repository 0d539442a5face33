//! Anatomical frame: integer re-origin plus a posterior-positive x axis.
//!
//! All anterior/posterior geometry is computed in this frame. Both the
//! shift and the optional mirror are integer maps, so a translated or a
//! mirrored-and-reoriented input yields bit-identical canonical coordinates.

use crate::labeling::Region;
use crate::rect::Pt;
use crate::types::{InstanceMap, Orientation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnatomicalFrame {
    origin_y: i64,
    origin_x: i64,
    sign: i64,
}

impl AnatomicalFrame {
    /// Frame anchored at the bounding box of all labeled pixels; the x origin
    /// is the most anterior labeled column.
    pub fn for_map(map: &InstanceMap, orientation: Orientation) -> Self {
        let (mut min_y, mut min_x, mut max_x) = (usize::MAX, usize::MAX, 0usize);
        for (y, x, &c) in map.codes().indexed() {
            if c != 0 {
                min_y = min_y.min(y);
                min_x = min_x.min(x);
                max_x = max_x.max(x);
            }
        }
        if min_y == usize::MAX {
            min_y = 0;
            min_x = 0;
            max_x = 0;
        }
        Self::from_bbox(min_y, min_x, max_x, orientation)
    }

    /// Frame anchored at the top row `min_y` and the anterior one of
    /// `min_x`/`max_x`.
    pub fn from_bbox(min_y: usize, min_x: usize, max_x: usize, orientation: Orientation) -> Self {
        let sign = orientation.posterior_sign();
        AnatomicalFrame {
            origin_y: min_y as i64,
            origin_x: if sign > 0 { min_x as i64 } else { max_x as i64 },
            sign,
        }
    }

    /// Posterior direction as a sign on image x.
    pub fn sign(&self) -> i64 {
        self.sign
    }

    /// Image pixel to canonical integer coordinates `(y, u)`.
    #[inline]
    pub fn to_canonical(&self, y: usize, x: usize) -> (i64, i64) {
        (
            y as i64 - self.origin_y,
            self.sign * (x as i64 - self.origin_x),
        )
    }

    /// Canonical integer coordinates back to an image pixel (may be off-grid).
    #[inline]
    pub fn to_image(&self, cy: i64, cu: i64) -> (i64, i64) {
        (cy + self.origin_y, self.origin_x + self.sign * cu)
    }

    /// Canonical real point to image coordinates.
    pub fn point_to_image(&self, p: Pt) -> Pt {
        Pt::new(
            p.y + self.origin_y as f64,
            self.origin_x as f64 + self.sign as f64 * p.x,
        )
    }

    pub fn region_points(&self, region: &Region) -> Vec<(i64, i64)> {
        region
            .pixels()
            .iter()
            .map(|&(y, x)| self.to_canonical(y, x))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn mirror_gives_identical_canonical_coordinates() {
        let mut g = Grid::filled(6, 10, 0u8);
        g.set(2, 3, 1);
        g.set(4, 6, 12);
        let map = InstanceMap::new(g.clone()).unwrap();
        let mirrored = InstanceMap::new(Grid::from_fn(6, 10, |y, x| *g.get(y, 9 - x))).unwrap();
        let f = AnatomicalFrame::for_map(&map, Orientation::Left);
        let fm = AnatomicalFrame::for_map(&mirrored, Orientation::Right);
        assert_eq!(f.to_canonical(2, 3), fm.to_canonical(2, 6));
        assert_eq!(f.to_canonical(4, 6), fm.to_canonical(4, 3));
        assert_eq!(f.to_canonical(4, 6), (2, 3));
        assert_eq!(fm.to_image(2, 3), (4, 3));
    }
}
