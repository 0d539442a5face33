//! Connected components and vertebra/disc instance labeling.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::types::{InstanceMap, SemanticMask, Tissue, CORD_CODE, CSF_CODE};

/// Candidate regions smaller than this are discarded before instance selection.
pub const MIN_CANDIDATE_AREA: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            Connectivity::Eight => &[
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ],
        }
    }
}

/// Axis-aligned inclusive bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub min_y: usize,
    pub min_x: usize,
    pub max_y: usize,
    pub max_x: usize,
}

impl BBox {
    pub fn height(&self) -> usize {
        self.max_y - self.min_y + 1
    }

    fn y_overlap(&self, other: &BBox) -> usize {
        let lo = self.min_y.max(other.min_y);
        let hi = self.max_y.min(other.max_y);
        if hi >= lo {
            hi - lo + 1
        } else {
            0
        }
    }
}

/// A set of pixels with cached area, centroid and bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pixels: Vec<(usize, usize)>,
    centroid: (f64, f64),
    bbox: BBox,
}

impl Region {
    /// Build from pixel coordinates `(y, x)`; duplicates are removed.
    pub fn from_pixels(mut pixels: Vec<(usize, usize)>) -> Option<Region> {
        if pixels.is_empty() {
            return None;
        }
        pixels.sort_unstable();
        pixels.dedup();
        let n = pixels.len() as f64;
        let (mut sy, mut sx) = (0.0, 0.0);
        let mut bbox = BBox {
            min_y: usize::MAX,
            min_x: usize::MAX,
            max_y: 0,
            max_x: 0,
        };
        for &(y, x) in &pixels {
            sy += y as f64;
            sx += x as f64;
            bbox.min_y = bbox.min_y.min(y);
            bbox.min_x = bbox.min_x.min(x);
            bbox.max_y = bbox.max_y.max(y);
            bbox.max_x = bbox.max_x.max(x);
        }
        Some(Region {
            pixels,
            centroid: (sy / n, sx / n),
            bbox,
        })
    }

    /// Pixels in row-major order.
    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    /// Real-valued mean of pixel coordinates, `(y, x)`.
    pub fn centroid(&self) -> (f64, f64) {
        self.centroid
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn contains(&self, y: usize, x: usize) -> bool {
        self.pixels.binary_search(&(y, x)).is_ok()
    }

    fn merged(&self, other: &Region) -> Region {
        let mut px = self.pixels.clone();
        px.extend_from_slice(&other.pixels);
        Region::from_pixels(px).expect("nonempty")
    }
}

fn centroid_order(a: &Region, b: &Region) -> Ordering {
    a.centroid
        .0
        .total_cmp(&b.centroid.0)
        .then(a.centroid.1.total_cmp(&b.centroid.1))
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        parent[i as usize] = parent[parent[i as usize] as usize];
        i = parent[i as usize];
    }
    i
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// Two-pass union-find labeling of the `true` pixels.
///
/// Regions are returned sorted by ascending centroid y, ties by centroid x.
pub fn connected_components(binary: &Grid<bool>, connectivity: Connectivity) -> Vec<Region> {
    let (h, w) = binary.dims();
    let mut labels = vec![0u32; h * w];
    // index 0 is the background sentinel
    let mut parent: Vec<u32> = vec![0];
    // Only already-visited neighbours (previous row, left) are needed on the
    // forward pass.
    let back: &[(i64, i64)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (0, -1)],
        Connectivity::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1)],
    };
    for y in 0..h {
        for x in 0..w {
            if !*binary.get(y, x) {
                continue;
            }
            let mut current = 0u32;
            for &(dy, dx) in back {
                let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                if ny < 0 || nx < 0 || nx as usize >= w {
                    continue;
                }
                let l = labels[ny as usize * w + nx as usize];
                if l == 0 {
                    continue;
                }
                if current == 0 {
                    current = l;
                } else if l != current {
                    union(&mut parent, current, l);
                }
            }
            if current == 0 {
                current = parent.len() as u32;
                parent.push(current);
            }
            labels[y * w + x] = current;
        }
    }
    let mut slot = vec![usize::MAX; parent.len()];
    let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let root = find(&mut parent, l) as usize;
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push((i / w, i % w));
    }
    let mut regions: Vec<Region> = groups.into_iter().filter_map(Region::from_pixels).collect();
    regions.sort_by(centroid_order);
    regions
}

/// Whether two pixels are neighbours under `connectivity`.
pub fn are_adjacent(a: (usize, usize), b: (usize, usize), connectivity: Connectivity) -> bool {
    let dy = a.0 as i64 - b.0 as i64;
    let dx = a.1 as i64 - b.1 as i64;
    connectivity.offsets().contains(&(dy, dx))
}

/// Instance map plus notes about repairs applied during selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    pub map: InstanceMap,
    pub notes: Vec<String>,
}

/// Merge components whose bounding boxes overlap in y by more than half of
/// the shorter box. Returns the merged list and the number of merges.
fn merge_split_fragments(mut regions: Vec<Region>) -> (Vec<Region>, usize) {
    let mut merges = 0;
    loop {
        let mut pair = None;
        'outer: for i in 0..regions.len() {
            for j in i + 1..regions.len() {
                let (a, b) = (regions[i].bbox, regions[j].bbox);
                let overlap = a.y_overlap(&b);
                if 2 * overlap > a.height().min(b.height()) {
                    pair = Some((i, j));
                    break 'outer;
                }
            }
        }
        match pair {
            Some((i, j)) => {
                let b = regions.remove(j);
                regions[i] = regions[i].merged(&b);
                merges += 1;
            }
            None => break,
        }
    }
    regions.sort_by(centroid_order);
    (regions, merges)
}

fn select_instances(
    mask: &SemanticMask,
    tissue: Tissue,
    class: &'static str,
    wanted: usize,
    notes: &mut Vec<String>,
) -> Result<Vec<Region>> {
    let binary = mask.map(|&t| t == tissue);
    let candidates: Vec<Region> = connected_components(&binary, Connectivity::Eight)
        .into_iter()
        .filter(|r| r.area() >= MIN_CANDIDATE_AREA)
        .collect();
    let (candidates, merges) = merge_split_fragments(candidates);
    if merges > 0 {
        notes.push(format!("{class}: merged {merges} split fragment(s)"));
    }
    if candidates.len() < wanted {
        return Err(Error::InsufficientAnatomy {
            class,
            found: candidates.len(),
        });
    }
    let mut by_size: Vec<usize> = (0..candidates.len()).collect();
    by_size.sort_by(|&a, &b| {
        candidates[b]
            .area()
            .cmp(&candidates[a].area())
            .then(centroid_order(&candidates[a], &candidates[b]))
    });
    let mut chosen: Vec<usize> = by_size[..wanted].to_vec();
    chosen.sort_unstable();
    // candidates are in centroid order, so the chosen indices must be a
    // consecutive run for the selection to be contiguous
    if chosen.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::NonContiguous { class });
    }
    let selected: Vec<Region> = chosen.iter().map(|&i| candidates[i].clone()).collect();
    if selected
        .windows(2)
        .any(|w| w[0].centroid.0.partial_cmp(&w[1].centroid.0) != Some(Ordering::Less))
    {
        return Err(Error::NonContiguous { class });
    }
    let dropped = candidates.len() - wanted;
    if dropped > 0 {
        notes.push(format!(
            "{class}: {dropped} extra candidate region(s) left unlabeled"
        ));
    }
    Ok(selected)
}

/// Assign vertebra codes 1..=6 and disc codes 7..=11 superior to inferior;
/// spinal cord becomes 12 and CSF 13. Unselected fragments become background.
pub fn label_instances(mask: &SemanticMask) -> Result<Labeling> {
    let mut notes = Vec::new();
    let vertebrae = select_instances(mask, Tissue::Vertebra, "V", 6, &mut notes)?;
    let discs = select_instances(mask, Tissue::Disc, "IVD", 5, &mut notes)?;
    let mut codes = mask.map(|&t| match t {
        Tissue::Cord => CORD_CODE,
        Tissue::Csf => CSF_CODE,
        _ => 0,
    });
    for (i, r) in vertebrae.iter().enumerate() {
        for &(y, x) in r.pixels() {
            codes.set(y, x, i as u8 + 1);
        }
    }
    for (i, r) in discs.iter().enumerate() {
        for &(y, x) in r.pixels() {
            codes.set(y, x, i as u8 + 7);
        }
    }
    Ok(Labeling {
        map: InstanceMap::new(codes)?,
        notes,
    })
}

/// Region of one instance code, if present.
pub fn instance_region(map: &InstanceMap, code: u8) -> Option<Region> {
    Region::from_pixels(map.pixels_of(code))
}
