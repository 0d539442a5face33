//! Static RGB rendering of a diagnosis.
//!
//! Fixed colors, drawn in this order (later wins):
//!
//! | element                      | RGB             |
//! |------------------------------|-----------------|
//! | T2 image, scaled to its max  | gray            |
//! | vertebra boundaries          | (0, 200, 255)   |
//! | disc boundaries              | (0, 255, 0)     |
//! | cord boundary                | (255, 0, 255)   |
//! | CSF boundary                 | (0, 0, 255)     |
//! | herniation pixels            | (255, 0, 0)     |
//! | Cobb endplate lines (C2, C7) | (255, 128, 0)   |
//! | modified K-line              | (255, 255, 0)   |

use cervdx::pipeline::Diagnosis;
use cervdx::raster::supercover;
use cervdx::rect::Pt;
use cervdx::{InstanceMap, IntensityImage, CORD_CODE, CSF_CODE};
use image::{Rgb, RgbImage};

pub const VERTEBRA: [u8; 3] = [0, 200, 255];
pub const DISC: [u8; 3] = [0, 255, 0];
pub const CORD: [u8; 3] = [255, 0, 255];
pub const CSF: [u8; 3] = [0, 0, 255];
pub const HERNIATION: [u8; 3] = [255, 0, 0];
pub const COBB: [u8; 3] = [255, 128, 0];
pub const K_LINE: [u8; 3] = [255, 255, 0];

/// Cobb lines are extended this many pixels past each endplate corner.
const COBB_EXTENT: f64 = 20.0;

fn put(img: &mut RgbImage, y: i64, x: i64, c: [u8; 3]) {
    if y >= 0 && x >= 0 && (y as u32) < img.height() && (x as u32) < img.width() {
        img.put_pixel(x as u32, y as u32, Rgb(c));
    }
}

fn boundary_color(map: &InstanceMap, y: usize, x: usize) -> Option<[u8; 3]> {
    let g = map.codes();
    let c = *g.get(y, x);
    if c == 0 {
        return None;
    }
    let (yi, xi) = (y as i64, x as i64);
    let edge = [(-1, 0), (1, 0), (0, -1), (0, 1)]
        .iter()
        .any(|&(dy, dx)| g.get_signed(yi + dy, xi + dx) != Some(&c));
    if !edge {
        return None;
    }
    Some(match c {
        1..=6 => VERTEBRA,
        7..=11 => DISC,
        CORD_CODE => CORD,
        CSF_CODE => CSF,
        _ => return None,
    })
}

fn draw_segment(img: &mut RgbImage, a: Pt, b: Pt, c: [u8; 3]) {
    for (y, x) in supercover(a, b) {
        put(img, y, x, c);
    }
}

pub fn render(image: &IntensityImage, diagnosis: &Diagnosis) -> RgbImage {
    let (h, w) = image.dims();
    let values = image.values();
    let max = values.as_slice().iter().fold(0.0f64, |a, &b| a.max(b));
    let mut img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let v = *values.get(y as usize, x as usize);
        let g = if max > 0.0 {
            (v * 255.0 / max).round() as u8
        } else {
            0
        };
        Rgb([g, g, g])
    });
    if let Some(map) = &diagnosis.instance_map {
        for y in 0..h {
            for x in 0..w {
                if let Some(c) = boundary_color(map, y, x) {
                    put(&mut img, y as i64, x as i64, c);
                }
            }
        }
    }
    if let Some(hern) = &diagnosis.herniation {
        for (y, x, &v) in hern.mask().indexed() {
            if v {
                put(&mut img, y as i64, x as i64, HERNIATION);
            }
        }
    }
    if let Some(cobb) = &diagnosis.cobb {
        for (a, b) in [cobb.c2_line, cobb.c7_line] {
            let d = b.sub(a);
            let n = d.norm();
            if n > 0.0 {
                let e = d.scale(COBB_EXTENT / n);
                draw_segment(&mut img, a.sub(e), b.add(e), COBB);
            }
        }
    }
    if let Some(k) = &diagnosis.k_line {
        for (y, x) in k.pixels() {
            put(&mut img, y, x, K_LINE);
        }
    }
    img
}
