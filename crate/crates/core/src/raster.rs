//! Exact segment rasterization against unit pixel squares.

use crate::rect::Pt;

/// Every pixel whose closed square `[c-0.5, c+0.5]^2` meets segment `a`–`b`.
///
/// Pixels are `(y, x)` integer centers, sorted row-major.
pub fn supercover(a: Pt, b: Pt) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let (ymin, ymax) = (a.y.min(b.y), a.y.max(b.y));
    let r0 = (ymin - 0.5).ceil() as i64;
    let r1 = (ymax + 0.5).floor() as i64;
    let d = b.sub(a);
    for r in r0..=r1 {
        let (lo, hi) = (r as f64 - 0.5, r as f64 + 0.5);
        let (t0, t1) = if d.y == 0.0 {
            (0.0, 1.0)
        } else {
            let ta = (lo - a.y) / d.y;
            let tb = (hi - a.y) / d.y;
            (ta.min(tb).max(0.0), ta.max(tb).min(1.0))
        };
        if t0 > t1 {
            continue;
        }
        let xa = a.x + d.x * t0;
        let xb = a.x + d.x * t1;
        let (xl, xr) = (xa.min(xb), xa.max(xb));
        let c0 = (xl - 0.5).ceil() as i64;
        let c1 = (xr + 0.5).floor() as i64;
        for c in c0..=c1 {
            out.push((r, c));
        }
    }
    out
}

/// A pixel crossed by a ray, with the parameter interval spent inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub pixel: (i64, i64),
    pub t_enter: f64,
    pub t_exit: f64,
}

/// Pixels crossed by `origin + t*dir` for `t` in `[0, t_max]`, ordered by
/// entry parameter. Pixels only touched at a corner are dropped.
pub fn ray_crossings(origin: Pt, dir: Pt, t_max: f64) -> Vec<Crossing> {
    let end = origin.add(dir.scale(t_max));
    let mut out: Vec<Crossing> = supercover(origin, end)
        .into_iter()
        .filter_map(|(y, x)| {
            let (mut t0, mut t1) = (0.0f64, t_max);
            for (o, d, c) in [(origin.y, dir.y, y as f64), (origin.x, dir.x, x as f64)] {
                if d == 0.0 {
                    if (o - c).abs() > 0.5 {
                        return None;
                    }
                } else {
                    let ta = (c - 0.5 - o) / d;
                    let tb = (c + 0.5 - o) / d;
                    t0 = t0.max(ta.min(tb));
                    t1 = t1.min(ta.max(tb));
                }
            }
            (t1 - t0 > 1e-9).then_some(Crossing {
                pixel: (y, x),
                t_enter: t0,
                t_exit: t1,
            })
        })
        .collect();
    out.sort_by(|a, b| a.t_enter.total_cmp(&b.t_enter));
    out
}

/// Chebyshev (L∞) distance from `p` to segment `a`–`b`.
pub fn chebyshev_to_segment(p: Pt, a: Pt, b: Pt) -> f64 {
    // max(|x(t)-px|, |y(t)-py|) is convex and piecewise linear in t; its
    // minimum lies at an endpoint or where a component changes slope or
    // where the two components cross.
    let d = b.sub(a);
    let f = |t: f64| {
        let q = a.add(d.scale(t));
        (q.y - p.y).abs().max((q.x - p.x).abs())
    };
    let mut cands = vec![0.0, 1.0];
    let ry = p.y - a.y;
    let rx = p.x - a.x;
    if d.y != 0.0 {
        cands.push(ry / d.y);
    }
    if d.x != 0.0 {
        cands.push(rx / d.x);
    }
    // |d.y t - ry| = |d.x t - rx|
    for s in [1.0, -1.0] {
        let den = d.y - s * d.x;
        if den != 0.0 {
            cands.push((ry - s * rx) / den);
        }
    }
    cands
        .into_iter()
        .filter(|t| (0.0..=1.0).contains(t))
        .map(f)
        .fold(f64::INFINITY, f64::min)
}

/// Euclidean distance from `p` to segment `a`–`b`.
pub fn euclid_to_segment(p: Pt, a: Pt, b: Pt) -> f64 {
    let d = b.sub(a);
    let len2 = d.dot(d);
    let t = if len2 == 0.0 {
        0.0
    } else {
        (p.sub(a).dot(d) / len2).clamp(0.0, 1.0)
    };
    p.distance(a.add(d.scale(t)))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force oracle: test every pixel in a window for square contact.
    fn brute(a: Pt, b: Pt) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        let y0 = a.y.min(b.y).floor() as i64 - 2;
        let y1 = a.y.max(b.y).ceil() as i64 + 2;
        let x0 = a.x.min(b.x).floor() as i64 - 2;
        let x1 = a.x.max(b.x).ceil() as i64 + 2;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let c = Pt::new(y as f64, x as f64);
                if chebyshev_to_segment(c, a, b) <= 0.5 + 1e-12 {
                    out.push((y, x));
                }
            }
        }
        out
    }

    #[test]
    fn horizontal_segment() {
        let px = supercover(Pt::new(2.0, 0.2), Pt::new(2.0, 3.7));
        assert_eq!(px, vec![(2, 0), (2, 1), (2, 2), (2, 3), (2, 4)]);
    }

    #[test]
    fn matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let a = Pt::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0));
            let b = Pt::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0));
            assert_eq!(supercover(a, b), brute(a, b), "{a:?} {b:?}");
        }
    }

    #[test]
    fn crossings_tile_the_ray() {
        let o = Pt::new(0.3, 0.1);
        let d = Pt::new(0.6, 0.8);
        let c = ray_crossings(o, d, 10.0);
        assert!((c[0].t_enter - 0.0).abs() < 1e-12);
        assert!((c.last().unwrap().t_exit - 10.0).abs() < 1e-12);
        for w in c.windows(2) {
            assert!((w[0].t_exit - w[1].t_enter).abs() < 1e-9);
        }
    }

    #[test]
    fn chebyshev_distance() {
        let a = Pt::new(0.0, 0.0);
        let b = Pt::new(10.0, 0.0);
        assert!((chebyshev_to_segment(Pt::new(5.0, 3.0), a, b) - 3.0).abs() < 1e-12);
        assert!((chebyshev_to_segment(Pt::new(12.0, 1.0), a, b) - 2.0).abs() < 1e-12);
        let d = chebyshev_to_segment(Pt::new(0.0, 2.0), Pt::new(0.0, 0.0), Pt::new(4.0, 4.0));
        assert!((d - 1.0).abs() < 1e-12);
    }
}
