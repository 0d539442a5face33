use std::collections::BTreeMap;

use cervdx::evaluation::{agreement_metrics, overlap_metrics, roc};
use cervdx::geometry::{mscc_percent, KLineStatus};
use cervdx::heatmap::{heatmap_f64, HeatmapParams};
use cervdx::io::{decode_float_grid, encode_float_grid};
use cervdx::labeling::{connected_components, Connectivity};
use cervdx::objectives::{heatmap_loss, sobel};
use cervdx::raster::{chebyshev_to_segment, supercover};
use cervdx::rect::{min_area_rect, Pt};
use cervdx::report::{canonical_json, round_sig6};
use cervdx::signal::{is_hyperintense, rsci, t2_mi_values, CombineRule, Thresholds};
use cervdx::{Grid, HeatGrid};
use proptest::collection::vec;
use proptest::prelude::*;

fn grid_strategy(h: usize, w: usize, density: f64) -> impl Strategy<Value = Grid<bool>> {
    vec(proptest::bool::weighted(density), h * w)
        .prop_map(move |v| Grid::from_vec(h, w, v).unwrap())
}

/// Component id per pixel by iterative flood fill; `None` for background.
fn flood_labels(g: &Grid<bool>, eight: bool) -> Grid<Option<usize>> {
    let (h, w) = g.dims();
    let mut lab = Grid::filled(h, w, None);
    let mut next = 0;
    for sy in 0..h {
        for sx in 0..w {
            if !*g.get(sy, sx) || lab.get(sy, sx).is_some() {
                continue;
            }
            let mut stack = vec![(sy, sx)];
            lab.set(sy, sx, Some(next));
            while let Some((y, x)) = stack.pop() {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if (dy == 0 && dx == 0) || (!eight && dy != 0 && dx != 0) {
                            continue;
                        }
                        let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                        if ny < 0 || nx < 0 || ny >= h as i64 || nx >= w as i64 {
                            continue;
                        }
                        let (ny, nx) = (ny as usize, nx as usize);
                        if *g.get(ny, nx) && lab.get(ny, nx).is_none() {
                            lab.set(ny, nx, Some(next));
                            stack.push((ny, nx));
                        }
                    }
                }
            }
            next += 1;
        }
    }
    lab
}

fn same_partition(g: &Grid<bool>, conn: Connectivity) -> bool {
    let oracle = flood_labels(g, conn == Connectivity::Eight);
    let regions = connected_components(g, conn);
    let mut mine = Grid::filled(g.height(), g.width(), None);
    for (i, r) in regions.iter().enumerate() {
        for &(y, x) in r.pixels() {
            if mine.get(y, x).is_some() {
                return false;
            }
            mine.set(y, x, Some(i));
        }
    }
    // bijection between label sets
    let mut fwd = BTreeMap::new();
    let mut back = BTreeMap::new();
    for (y, x, a) in oracle.indexed() {
        let b = *mine.get(y, x);
        match (a, b) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                if *fwd.entry(*a).or_insert(b) != b || *back.entry(b).or_insert(*a) != *a {
                    return false;
                }
            }
            _ => return false,
        }
    }
    true
}

fn direct_sobel(f: &Grid<f64>) -> Grid<f64> {
    let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    let ky = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
    let (h, w) = f.dims();
    Grid::from_fn(h, w, |y, x| {
        let (mut gx, mut gy) = (0.0, 0.0);
        for (i, dy) in (-1i64..=1).enumerate() {
            for (j, dx) in (-1i64..=1).enumerate() {
                let yy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                let xx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                let v = *f.get(yy, xx);
                gx += kx[i][j] * v;
                gy += ky[i][j] * v;
            }
        }
        (gx * gx + gy * gy).sqrt()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn components_partition_foreground(g in grid_strategy(16, 16, 0.45)) {
        prop_assert!(same_partition(&g, Connectivity::Eight));
        prop_assert!(same_partition(&g, Connectivity::Four));
    }

    #[test]
    fn heatmap_is_nonnegative_and_floors_small_regions(g in grid_strategy(20, 20, 0.3)) {
        let p = HeatmapParams::default();
        let h = heatmap_f64(&g, &p).unwrap();
        prop_assert!(h.as_slice().iter().all(|&v| v >= 0.0 && v.is_finite()));
        let big = connected_components(&g, Connectivity::Eight)
            .iter()
            .any(|r| r.area() >= p.min_region_size);
        prop_assert_eq!(big, h.as_slice().iter().any(|&v| v > 0.0));
    }

    #[test]
    fn mscc_is_scale_free(di in 0.1f64..20.0, da in 0.1f64..20.0, db in 0.1f64..20.0, c in 0.01f64..100.0) {
        let a = mscc_percent(di, da, db).unwrap();
        let b = mscc_percent(di * c, da * c, db * c).unwrap();
        prop_assert!((a - b).abs() <= 1e-9);
        if di <= da.min(db) {
            prop_assert!(a >= 0.0);
        }
    }

    #[test]
    fn rsci_of_constant_is_one(v in 0.5f64..500.0, n in 3usize..8) {
        let r = rsci(&vec![v; n]);
        for (i, x) in r.iter().enumerate() {
            if i == 0 || i + 1 == n {
                prop_assert!(x.is_none());
            } else {
                prop_assert_eq!(*x, Some(1.0));
            }
        }
    }

    #[test]
    fn t2mi_degree_zero(vals in vec(1.0f64..1000.0, 2..30)) {
        let a = t2_mi_values(&vals).unwrap();
        let scaled: Vec<f64> = vals.iter().map(|v| v * 4.0).collect();
        prop_assert_eq!(a, t2_mi_values(&scaled).unwrap());
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn hyperintensity_rules(mi in 0.0f64..60.0, r in 0.0f64..3.0) {
        let and = Thresholds::default();
        let or = Thresholds { rule: CombineRule::Or, ..and };
        let a = is_hyperintense(mi, Some(r), &and);
        let o = is_hyperintense(mi, Some(r), &or);
        prop_assert_eq!(a, mi >= 23.7 && r >= 1.2);
        prop_assert_eq!(o, mi >= 23.7 || r >= 1.2);
        prop_assert!(!a || o);
    }

    #[test]
    fn dice_jaccard_identity(a in grid_strategy(12, 12, 0.4), b in grid_strategy(12, 12, 0.4)) {
        let o = overlap_metrics(&a, &b, &true).unwrap();
        prop_assert!((o.dice - 2.0 * o.jaccard / (1.0 + o.jaccard)).abs() <= 1e-9);
        let s = overlap_metrics(&b, &a, &true).unwrap();
        prop_assert_eq!(o.dice, s.dice);
        prop_assert_eq!(o.precision, s.recall);
    }

    #[test]
    fn auc_is_mann_whitney(scores in vec((0u8..20, any::<bool>()), 2..60)) {
        let s: Vec<(f64, bool)> = scores.iter().map(|&(v, l)| (v as f64, l)).collect();
        let pos: Vec<f64> = s.iter().filter(|x| x.1).map(|x| x.0).collect();
        let neg: Vec<f64> = s.iter().filter(|x| !x.1).map(|x| x.0).collect();
        prop_assume!(!pos.is_empty() && !neg.is_empty());
        let mut wins = 0.0;
        for p in &pos {
            for n in &neg {
                wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
            }
        }
        let want = wins / (pos.len() * neg.len()) as f64;
        let r = roc(&s).unwrap();
        prop_assert!((r.auc - want).abs() <= 1e-9);
        prop_assert!(r.points.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
        prop_assert_eq!(*r.points.last().unwrap(), (1.0, 1.0));
    }

    #[test]
    fn sobel_matches_direct_convolution(v in vec(0.0f64..5.0, 9 * 11)) {
        let f = Grid::from_vec(9, 11, v).unwrap();
        let a = sobel(&f);
        let b = direct_sobel(&f);
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn heatmap_loss_is_a_metric(
        a in vec(0.0f32..10.0, 36),
        b in vec(0.0f32..10.0, 36),
        c in vec(0.0f32..10.0, 36),
    ) {
        let g = |v: Vec<f32>| HeatGrid::new(Grid::from_vec(6, 6, v).unwrap()).unwrap();
        let (a, b, c) = (g(a), g(b), g(c));
        let ab = heatmap_loss(&a, &b).unwrap();
        let bc = heatmap_loss(&b, &c).unwrap();
        let ac = heatmap_loss(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert_eq!(ab, heatmap_loss(&b, &a).unwrap());
        prop_assert_eq!(heatmap_loss(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn float_grid_round_trip(v in vec(0.0f32..1e6, 1..64), w in 1usize..8) {
        let h = v.len() / w;
        prop_assume!(h > 0);
        let g = HeatGrid::new(Grid::from_vec(h, w, v[..h * w].to_vec()).unwrap()).unwrap();
        let bytes = encode_float_grid(&g).unwrap();
        let back = decode_float_grid(&bytes).unwrap();
        prop_assert_eq!(encode_float_grid(&back).unwrap(), bytes);
        for (a, b) in g.values().as_slice().iter().zip(back.values().as_slice()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn sig6_is_idempotent(v in -1e9f64..1e9) {
        let r = round_sig6(v);
        prop_assert_eq!(round_sig6(r), r);
        prop_assert!((r - v).abs() <= v.abs() * 5e-6 + 1e-300);
        let text = canonical_json(&[v]).unwrap();
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(canonical_json(&back).unwrap(), text);
    }

    #[test]
    fn min_rect_contains_hull(pts in vec((-20i64..20, -20i64..20), 3..40)) {
        let distinct: std::collections::BTreeSet<_> = pts.iter().collect();
        prop_assume!(distinct.len() >= 3);
        let r = min_area_rect(&pts).unwrap();
        let (s1, s2) = r.sides();
        // every point lies inside the rectangle (within rounding)
        let c = r.center();
        let e1 = r.corners[1].sub(r.corners[0]);
        let e2 = r.corners[3].sub(r.corners[0]);
        for &(y, x) in &pts {
            let d = Pt::new(y as f64, x as f64).sub(c);
            if e1.norm() > 0.0 {
                prop_assert!(d.dot(e1).abs() / e1.norm() <= e1.norm() / 2.0 + 1e-6);
            }
            if e2.norm() > 0.0 {
                prop_assert!(d.dot(e2).abs() / e2.norm() <= e2.norm() / 2.0 + 1e-6);
            }
        }
        // never larger than the axis-aligned box
        let ys = pts.iter().map(|p| p.0);
        let xs = pts.iter().map(|p| p.1);
        let bbox = (ys.clone().max().unwrap() - ys.min().unwrap()) as f64
            * (xs.clone().max().unwrap() - xs.min().unwrap()) as f64;
        prop_assert!(s1 * s2 <= bbox + 1e-6);
    }

    #[test]
    fn supercover_agrees_with_chebyshev(
        ay in -10.0f64..10.0, ax in -10.0f64..10.0,
        by in -10.0f64..10.0, bx in -10.0f64..10.0,
    ) {
        let (a, b) = (Pt::new(ay, ax), Pt::new(by, bx));
        let cover: std::collections::BTreeSet<(i64, i64)> = supercover(a, b).into_iter().collect();
        for y in -12i64..=12 {
            for x in -12i64..=12 {
                let d = chebyshev_to_segment(Pt::new(y as f64, x as f64), a, b);
                if d < 0.5 - 1e-9 {
                    prop_assert!(cover.contains(&(y, x)));
                } else if d > 0.5 + 1e-9 {
                    prop_assert!(!cover.contains(&(y, x)));
                }
            }
        }
    }
}

#[test]
fn agreement_of_shifted_values() {
    let a = [10.0, 12.0, 15.0, 9.0, 20.0];
    let b: Vec<f64> = a.iter().map(|v| v + 3.0).collect();
    let s = agreement_metrics(&b, &a).unwrap();
    assert!((s.mae - 3.0).abs() < 1e-12);
    assert!(s.mae_sd.abs() < 1e-12);
    assert!((s.pearson_r.unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn k_line_status_serializes_lowercase() {
    assert_eq!(
        serde_json::to_string(&KLineStatus::Negative).unwrap(),
        "\"negative\""
    );
}
