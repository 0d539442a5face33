//! Synthetic sagittal spines with analytic ground truth.
//!
//! Geometry is laid out in a canonical `(y, u)` plane where `u` grows
//! posteriorly, then mapped to image columns by `x = u` (anterior left) or
//! `x = W − 1 − u` (anterior right). Vertebra `k` (C2 = 0) is a rectangle
//! tilted by `θ_k = c/2 − k·c/5` where `c` is the global curve; the inferior
//! endplate of C2 and that of C7 therefore differ by exactly `c`.
//!
//! Noise uses SplitMix64:
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! return z ^ (z >> 31)
//! ```
//!
//! with uniform reals taken as `(next >> 11) · 2^-53`, one draw per pixel in
//! row-major order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::KLineStatus;
use crate::grid::Grid;
use crate::kang::segment_grade;
use crate::raster::chebyshev_to_segment;
use crate::rect::Pt;
use crate::report::DxTruth;
use crate::signal::{segment_indices, T2Curve, Thresholds};
use crate::types::{
    Case, DiscLevel, InstanceMap, IntensityImage, Orientation, Spacing, CORD_CODE, CSF_CODE,
};

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CordSpec {
    pub base_width_mm: f64,
    /// Amplitude of the sinusoidal width modulation.
    pub amplitude_mm: f64,
    pub period_mm: f64,
    /// CSF gap between the posterior column line and the cord.
    pub gap_mm: f64,
    /// CSF band behind the cord.
    pub csf_posterior_mm: f64,
}

impl Default for CordSpec {
    fn default() -> Self {
        CordSpec {
            base_width_mm: 7.0,
            amplitude_mm: 0.0,
            period_mm: 40.0,
            gap_mm: 3.0,
            csf_posterior_mm: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HerniationDirective {
    pub level: DiscLevel,
    pub depth_mm: f64,
    pub width_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LesionDirective {
    pub level: DiscLevel,
    pub amplitude_ratio: f64,
    pub extent_rows: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TissueIntensity {
    pub background: f64,
    pub vertebra: f64,
    pub disc: f64,
    pub cord: f64,
    pub csf: f64,
}

impl Default for TissueIntensity {
    fn default() -> Self {
        TissueIntensity {
            background: 40.0,
            vertebra: 450.0,
            disc: 700.0,
            cord: 900.0,
            csf: 1800.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomSpec {
    pub id: String,
    pub seed: u64,
    /// `(height, width)`.
    pub canvas: [usize; 2],
    /// Isotropic pixel size.
    pub spacing_mm: f64,
    pub anterior_side: Orientation,
    /// Relative C2–C7 endplate angle; lordosis positive.
    pub global_curve_deg: f64,
    pub vertebra_count: usize,
    pub vertebra_height_mm: f64,
    pub vertebra_depth_mm: f64,
    pub disc_height_mm: f64,
    /// Distance in pixels between the disc and the column lines.
    pub disc_inset_px: f64,
    /// Shift of the column `(rows, posterior pixels)` from its centred place.
    pub offset_px: [f64; 2],
    pub cord: CordSpec,
    pub herniations: Vec<HerniationDirective>,
    pub lesions: Vec<LesionDirective>,
    pub intensity: TissueIntensity,
    /// Uniform ±5% multiplicative texture on intensities.
    pub noise: bool,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            id: "phantom".into(),
            seed: 0,
            canvas: [512, 512],
            spacing_mm: 0.5,
            anterior_side: Orientation::Left,
            global_curve_deg: 0.0,
            vertebra_count: 6,
            vertebra_height_mm: 14.0,
            vertebra_depth_mm: 16.0,
            disc_height_mm: 5.0,
            disc_inset_px: 2.0,
            offset_px: [0.0, 0.0],
            cord: CordSpec::default(),
            herniations: Vec::new(),
            lesions: Vec::new(),
            intensity: TissueIntensity::default(),
            noise: false,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.vertebra_count != 6 {
            return bad(format!(
                "vertebra_count must be 6, got {}",
                self.vertebra_count
            ));
        }
        if !(self.spacing_mm > 0.0) {
            return bad(format!(
                "spacing_mm must be positive, got {}",
                self.spacing_mm
            ));
        }
        if self.canvas[0] < 16 || self.canvas[1] < 16 {
            return bad(format!("canvas {:?} too small", self.canvas));
        }
        if !(self.global_curve_deg.abs() < 60.0) {
            return bad(format!(
                "global_curve_deg {} out of range",
                self.global_curve_deg
            ));
        }
        for (name, v) in [
            ("vertebra_height_mm", self.vertebra_height_mm),
            ("vertebra_depth_mm", self.vertebra_depth_mm),
            ("disc_height_mm", self.disc_height_mm),
            ("cord.base_width_mm", self.cord.base_width_mm),
            ("cord.period_mm", self.cord.period_mm),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.cord.amplitude_mm.abs() >= self.cord.base_width_mm {
            return bad("cord amplitude must be below the base width".into());
        }
        if !(self.cord.gap_mm >= 0.0
            && self.cord.csf_posterior_mm >= 0.0
            && self.disc_inset_px >= 0.0)
        {
            return bad("cord gaps and disc inset must be non-negative".into());
        }
        for h in &self.herniations {
            if !(h.depth_mm >= 0.0 && h.width_mm > 0.0) {
                return bad(format!("herniation at {} has invalid size", h.level));
            }
        }
        for l in &self.lesions {
            if !(l.amplitude_ratio > 0.0 && l.extent_rows > 0.0) {
                return bad(format!("lesion at {} has invalid parameters", l.level));
            }
        }
        let iv = self.intensity;
        for v in [iv.background, iv.vertebra, iv.disc, iv.cord, iv.csf] {
            if !(0.0..=40000.0).contains(&v) {
                return bad(format!("intensity {v} outside 0..=40000"));
            }
        }
        Ok(())
    }

    fn px(&self, mm: f64) -> f64 {
        mm / self.spacing_mm
    }
}

/// Per-level ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTruth {
    pub herniated: bool,
    /// Analytic half-ellipse area `π·depth·halfwidth/2` in pixels.
    pub herniation_area_px: f64,
    pub d_hern_mm: Option<f64>,
    pub d_ref_mm: f64,
    pub stenosis_ratio_percent: Option<f64>,
    pub mscc_percent: Option<f64>,
    pub t2_mi: Option<f64>,
    pub rsci: Option<f64>,
    pub hyperintense: bool,
    pub expected_grade: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomTruth {
    pub instance_map: InstanceMap,
    pub herniation: Grid<bool>,
    /// True corners per vertebra in image coordinates, ordered
    /// `[sup-anterior, sup-posterior, inf-posterior, inf-anterior]`.
    pub vertebra_corners: Vec<[Pt; 4]>,
    /// Endplate tilt per vertebra in degrees (both endplates).
    pub endplate_deg: Vec<f64>,
    pub cobb_c2_c7_deg: f64,
    pub segmental_deg: BTreeMap<DiscLevel, f64>,
    /// K-line endpoints `(C2, C7)` in image coordinates.
    pub k_line: (Pt, Pt),
    pub k_line_status: KLineStatus,
    pub levels: BTreeMap<DiscLevel, LevelTruth>,
    pub patient_grade: u8,
    pub spacing_mm: f64,
    pub cord: CordSpec,
}

impl PhantomTruth {
    /// Analytic cord width at image row `y`, before any herniation.
    pub fn cord_width_mm(&self, y: f64) -> f64 {
        cord_width_px(&self.cord, self.spacing_mm, y) * self.spacing_mm
    }

    pub fn summary(&self, case_id: &str) -> DxTruth {
        DxTruth {
            case_id: case_id.to_string(),
            cobb_c2_c7_deg: Some(self.cobb_c2_c7_deg),
            k_line_status: Some(self.k_line_status),
            herniated: self.levels.iter().map(|(&l, t)| (l, t.herniated)).collect(),
            mscc: self
                .levels
                .iter()
                .filter_map(|(&l, t)| t.mscc_percent.map(|m| (l, m)))
                .collect(),
            hyperintense: self
                .levels
                .iter()
                .map(|(&l, t)| (l, t.hyperintense))
                .collect(),
            kang_grades: self
                .levels
                .iter()
                .map(|(&l, t)| (l, t.expected_grade))
                .collect(),
            patient_grade: self.patient_grade,
        }
    }
}

fn cord_width_px(cord: &CordSpec, spacing: f64, y: f64) -> f64 {
    let phase = 2.0 * std::f64::consts::PI * y * spacing / cord.period_mm;
    (cord.base_width_mm + cord.amplitude_mm * phase.sin()) / spacing
}

/// Rotated vertebra in canonical coordinates.
#[derive(Debug, Clone, Copy)]
struct Block {
    center: Pt,
    /// Endplate direction, anterior to posterior.
    e: Pt,
    /// Column tangent, superior to inferior.
    t: Pt,
    half_h: f64,
    half_d: f64,
}

impl Block {
    fn corner(&self, sh: f64, sd: f64) -> Pt {
        self.center
            .add(self.t.scale(sh * self.half_h))
            .add(self.e.scale(sd * self.half_d))
    }

    /// `[sup-ant, sup-post, inf-post, inf-ant]`.
    fn corners(&self) -> [Pt; 4] {
        [
            self.corner(-1.0, -1.0),
            self.corner(-1.0, 1.0),
            self.corner(1.0, 1.0),
            self.corner(1.0, -1.0),
        ]
    }

    fn contains(&self, p: Pt) -> bool {
        let r = p.sub(self.center);
        r.dot(self.t).abs() <= self.half_h && r.dot(self.e).abs() <= self.half_d
    }
}

/// Signed distance of `p` from the directed line `a → b` (`a` superior),
/// positive on the posterior (+u) side.
fn signed_dist(a: Pt, b: Pt, p: Pt) -> f64 {
    let d = b.sub(a);
    (d.y * (p.x - a.x) - d.x * (p.y - a.y)) / d.norm()
}

/// Position along the line `a → b`, measured from the midpoint.
fn along(a: Pt, b: Pt, p: Pt) -> f64 {
    let d = b.sub(a);
    p.sub(a.midpoint(b)).dot(d) / d.norm()
}

struct Layout {
    blocks: Vec<Block>,
    /// Posterior column polyline, superior to inferior.
    post: Vec<Pt>,
}

impl Layout {
    fn new(spec: &PhantomSpec) -> Layout {
        let c = spec.global_curve_deg.to_radians();
        let theta = |k: f64| c / 2.0 - k * c / 5.0;
        let tangent = |th: f64| Pt::new(th.cos(), -th.sin());
        let endplate = |th: f64| Pt::new(th.sin(), th.cos());
        let (hh, hd, g) = (
            spec.px(spec.vertebra_height_mm) / 2.0,
            spec.px(spec.vertebra_depth_mm) / 2.0,
            spec.px(spec.disc_height_mm),
        );
        let mut blocks = Vec::with_capacity(6);
        let mut center = Pt::new(0.0, 0.0);
        for k in 0..6 {
            let th = theta(k as f64);
            if k > 0 {
                let prev = theta(k as f64 - 1.0);
                center = center
                    .add(tangent(prev).scale(hh))
                    .add(tangent((prev + th) / 2.0).scale(g))
                    .add(tangent(th).scale(hh));
            }
            blocks.push(Block {
                center,
                e: endplate(th),
                t: tangent(th),
                half_h: hh,
                half_d: hd,
            });
        }
        // centre the column vertically; anterior face at 30% of the width
        let (mut y0, mut y1, mut u0) = (f64::MAX, f64::MIN, f64::MAX);
        for b in &blocks {
            for p in b.corners() {
                y0 = y0.min(p.y);
                y1 = y1.max(p.y);
                u0 = u0.min(p.x);
            }
        }
        let shift = Pt::new(
            spec.canvas[0] as f64 / 2.0 - (y0 + y1) / 2.0 + spec.offset_px[0],
            0.3 * spec.canvas[1] as f64 - u0 + spec.offset_px[1],
        );
        for b in &mut blocks {
            b.center = b.center.add(shift);
        }
        let post = blocks
            .iter()
            .flat_map(|b| {
                let c = b.corners();
                [c[1], c[2]]
            })
            .collect();
        Layout { blocks, post }
    }

    /// Posterior column line at row `y`, extrapolated past the ends.
    fn post_u(&self, y: f64) -> f64 {
        let p = &self.post;
        let n = p.len();
        let seg = if y <= p[0].y {
            0
        } else if y >= p[n - 1].y {
            n - 2
        } else {
            (0..n - 1).find(|&i| y <= p[i + 1].y).unwrap_or(n - 2)
        };
        let (a, b) = (p[seg], p[seg + 1]);
        a.x + (b.x - a.x) * (y - a.y) / (b.y - a.y)
    }

    fn disc_lines(&self, level: DiscLevel) -> ((Pt, Pt), (Pt, Pt)) {
        let up = self.blocks[level.upper().index()].corners();
        let lo = self.blocks[level.lower().index()].corners();
        ((up[2], lo[1]), (up[3], lo[0]))
    }

    fn in_disc(&self, level: DiscLevel, inset: f64, p: Pt) -> bool {
        let up = &self.blocks[level.upper().index()];
        let lo = &self.blocks[level.lower().index()];
        let ((pa, pb), (aa, ab)) = self.disc_lines(level);
        p.sub(up.center).dot(up.t) > up.half_h
            && p.sub(lo.center).dot(lo.t) < -lo.half_h
            && signed_dist(pa, pb, p) <= -inset
            && signed_dist(aa, ab, p) >= inset
    }
}

struct Bump {
    level: DiscLevel,
    a: Pt,
    b: Pt,
    depth: f64,
    half_w: f64,
    strip_half: f64,
    inset: f64,
}

impl Bump {
    /// Part posterior to the reference line.
    fn in_ellipse(&self, p: Pt) -> bool {
        let s = signed_dist(self.a, self.b, p);
        let l = along(self.a, self.b, p);
        s > 0.0 && self.depth > 0.0 && (s / self.depth).powi(2) + (l / self.half_w).powi(2) <= 1.0
    }

    /// Connection between the disc body and the ellipse.
    fn in_strip(&self, p: Pt) -> bool {
        let s = signed_dist(self.a, self.b, p);
        let l = along(self.a, self.b, p);
        s <= 0.0 && s >= -(self.inset + 1.0) && l.abs() <= self.strip_half
    }
}

struct CordModel<'a> {
    layout: &'a Layout,
    cord: &'a CordSpec,
    spacing: f64,
}

impl CordModel<'_> {
    fn anterior(&self, y: f64) -> f64 {
        self.layout.post_u(y) + self.cord.gap_mm / self.spacing
    }

    fn width(&self, y: f64) -> f64 {
        cord_width_px(self.cord, self.spacing, y)
    }

    fn contains(&self, p: Pt) -> bool {
        let a = self.anterior(p.y);
        p.x >= a && p.x < a + self.width(p.y)
    }
}

fn to_x(u: i64, w: usize, side: Orientation) -> Option<usize> {
    if u < 0 || u >= w as i64 {
        return None;
    }
    Some(match side {
        Orientation::Left => u as usize,
        Orientation::Right => w - 1 - u as usize,
    })
}

fn to_image_pt(p: Pt, w: usize, side: Orientation) -> Pt {
    match side {
        Orientation::Left => p,
        Orientation::Right => Pt::new(p.y, (w - 1) as f64 - p.x),
    }
}

/// Midpoint of the first cord chord along `origin + t·dir` in the continuous
/// model.
fn analytic_chord(model: &CordModel, origin: Pt, dir: Pt) -> Option<Pt> {
    let step = 1e-3;
    let mut start = None;
    let mut t = 0.0;
    while t < 400.0 {
        let inside = model.contains(origin.add(dir.scale(t)));
        match (start, inside) {
            (None, true) => start = Some(t),
            (Some(s), false) => return Some(origin.add(dir.scale((s + t - step) / 2.0))),
            _ => {}
        }
        t += step;
    }
    None
}

/// Smallest distance in pixels between the bump ellipse and the cord
/// region, zero on overlap.
fn bump_cord_distance(model: &CordModel, bump: &Bump) -> f64 {
    let n = 720;
    let d = bump.b.sub(bump.a);
    let dir = d.scale(1.0 / d.norm());
    let normal = Pt::new(-dir.x, dir.y);
    let normal = if normal.x < 0.0 {
        normal.scale(-1.0)
    } else {
        normal
    };
    let mid = bump.a.midpoint(bump.b);
    let mut arc = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let phi = std::f64::consts::PI * i as f64 / n as f64;
        let p = mid
            .add(dir.scale(bump.half_w * phi.cos()))
            .add(normal.scale(bump.depth * phi.sin()));
        if model.contains(p) {
            return 0.0;
        }
        arc.push(p);
    }
    let y_lo = arc.iter().map(|p| p.y).fold(f64::MAX, f64::min) - 40.0;
    let y_hi = arc.iter().map(|p| p.y).fold(f64::MIN, f64::max) + 40.0;
    let mut best = f64::INFINITY;
    let mut y = y_lo;
    while y <= y_hi {
        let edge = Pt::new(y, model.anterior(y));
        for p in &arc {
            best = best.min(p.distance(edge));
        }
        y += 0.05;
    }
    best
}

/// Distance in pixels from a point to the cord's anterior boundary.
fn point_cord_distance(model: &CordModel, p: Pt) -> f64 {
    let mut best = f64::INFINITY;
    let mut y = p.y - 40.0;
    while y <= p.y + 40.0 {
        best = best.min(p.distance(Pt::new(y, model.anterior(y))));
        y += 0.01;
    }
    best
}

pub fn generate(spec: &PhantomSpec) -> Result<(Case, PhantomTruth)> {
    spec.validate()?;
    let [h, w] = spec.canvas;
    let side = spec.anterior_side;
    let layout = Layout::new(spec);
    let model = CordModel {
        layout: &layout,
        cord: &spec.cord,
        spacing: spec.spacing_mm,
    };
    let overflow = |what: &str| {
        Err(Error::GeometryOverflow(format!(
            "{what} leaves the {h}x{w} canvas"
        )))
    };
    for b in &layout.blocks {
        for p in b.corners() {
            if p.y < 1.0 || p.y > h as f64 - 2.0 || p.x < 1.0 || p.x > w as f64 - 2.0 {
                return overflow("vertebra");
            }
        }
    }
    let csf_post = spec.px(spec.cord.csf_posterior_mm);
    for y in 0..h {
        let y = y as f64;
        let far = model.anterior(y) + model.width(y) + csf_post;
        if model.layout.post_u(y) < 0.0 || far > w as f64 - 1.0 {
            return overflow("spinal canal");
        }
    }

    let bumps: Vec<Bump> = spec
        .herniations
        .iter()
        .map(|d| {
            let ((a, b), _) = layout.disc_lines(d.level);
            let half_w = spec.px(d.width_mm) / 2.0;
            Bump {
                level: d.level,
                a,
                b,
                depth: spec.px(d.depth_mm),
                half_w,
                strip_half: half_w.min(1.5),
                inset: spec.disc_inset_px,
            }
        })
        .collect();

    // columns outside this band hold only cord, CSF and background
    let corner_u = layout.blocks.iter().flat_map(|b| b.corners()).map(|p| p.x);
    let (band_lo, band_hi) =
        corner_u.fold((f64::MAX, f64::MIN), |(lo, hi), u| (lo.min(u), hi.max(u)));
    let reach = bumps.iter().map(|b| b.depth + b.half_w).fold(0.0, f64::max);
    let (band_lo, band_hi) = (band_lo - 1.0, band_hi + reach + 1.0);

    // canonical labels: instance codes
    let mut codes = Grid::filled(h, w, 0u8);
    let mut hern = Grid::filled(h, w, false);
    for y in 0..h {
        let cord_a = model.anterior(y as f64);
        let cord_b = cord_a + model.width(y as f64);
        let post = layout.post_u(y as f64);
        for u in 0..w as i64 {
            let p = Pt::new(y as f64, u as f64);
            let mut code = None;
            if p.x >= band_lo && p.x <= band_hi {
                if let Some(k) = layout.blocks.iter().position(|b| b.contains(p)) {
                    code = Some(k as u8 + 1);
                } else if let Some(l) = DiscLevel::ALL
                    .iter()
                    .find(|&&l| layout.in_disc(l, spec.disc_inset_px, p))
                {
                    code = Some(l.code());
                } else if let Some(b) = bumps.iter().find(|b| b.in_ellipse(p) || b.in_strip(p)) {
                    if b.in_ellipse(p) {
                        hern.set(y, to_x(u, w, side).expect("u in range"), true);
                    }
                    code = Some(b.level.code());
                }
            }
            let code = code.unwrap_or_else(|| {
                let uf = u as f64;
                if uf >= cord_a && uf < cord_b {
                    CORD_CODE
                } else if (uf > post && uf < cord_a) || (uf >= cord_b && uf < cord_b + csf_post) {
                    CSF_CODE
                } else {
                    0
                }
            });
            if code != 0 {
                codes.set(y, to_x(u, w, side).expect("u in range"), code);
            }
        }
    }
    // a bump ellipse pixel that landed on a vertebra or disc body is not
    // herniation
    for (y, x, v) in hern.clone().indexed() {
        if *v {
            let c = *codes.get(y, x);
            if !(7..=11).contains(&c) {
                hern.set(y, x, false);
            }
        }
    }
    let instance_map = InstanceMap::new(codes)?;

    // intensities
    let lesion_gain = |y: f64| -> f64 {
        let mut f = 1.0;
        for l in &spec.lesions {
            let up = &layout.blocks[l.level.upper().index()];
            let lo = &layout.blocks[l.level.lower().index()];
            let yc = (up.center.y + lo.center.y) / 2.0;
            let s = l.extent_rows / 4.0;
            if (y - yc).abs() <= l.extent_rows / 2.0 {
                f *= 1.0 + (l.amplitude_ratio - 1.0) * (-(y - yc).powi(2) / (2.0 * s * s)).exp();
            }
        }
        f
    };
    let iv = spec.intensity;
    let row_cord: Vec<f64> = (0..h)
        .map(|y| (iv.cord * lesion_gain(y as f64)).round())
        .collect();
    let mut rng = SplitMix64::new(spec.seed);
    let values = Grid::from_fn(h, w, |y, x| {
        let base = match *instance_map.codes().get(y, x) {
            0 => iv.background,
            1..=6 => iv.vertebra,
            7..=11 => iv.disc,
            CORD_CODE => row_cord[y],
            _ => iv.csf,
        };
        if spec.noise {
            let r = rng.next_f64();
            (base * (1.0 + 0.05 * (2.0 * r - 1.0)))
                .round()
                .clamp(0.0, 65535.0)
        } else {
            base
        }
    });
    let spacing = Spacing::new(spec.spacing_mm, spec.spacing_mm)?;
    let image = IntensityImage::new(values, spacing)?;
    let case = Case::new(spec.id.clone(), image, instance_map.to_semantic(), side)?;

    // truth
    let c = spec.global_curve_deg;
    let endplate_deg: Vec<f64> = (0..6).map(|k| c / 2.0 - k as f64 * c / 5.0).collect();
    let segmental_deg = DiscLevel::ALL
        .iter()
        .map(|&l| {
            (
                l,
                endplate_deg[l.upper().index()] - endplate_deg[l.lower().index()],
            )
        })
        .collect();
    let vertebra_corners: Vec<[Pt; 4]> = layout
        .blocks
        .iter()
        .map(|b| b.corners().map(|p| to_image_pt(p, w, side)))
        .collect();
    let c2 = &layout.blocks[0];
    let c7 = &layout.blocks[5];
    let ka = analytic_chord(&model, c2.corners()[1], c2.e)
        .ok_or_else(|| Error::GeometryOverflow("C2 endplate line misses the cord".into()))?;
    let kb = analytic_chord(&model, c7.corners()[2], c7.e)
        .ok_or_else(|| Error::GeometryOverflow("C7 endplate line misses the cord".into()))?;
    let k_line = (to_image_pt(ka, w, side), to_image_pt(kb, w, side));
    let k_negative = hern.indexed().any(|(y, x, &v)| {
        v && chebyshev_to_segment(Pt::new(y as f64, x as f64), k_line.0, k_line.1) <= 1.5
    });

    // signal truth from the analytic row means
    let curve_rows: Vec<(usize, f64)> = (0..h)
        .filter(|&y| instance_map.codes().row(y).contains(&CORD_CODE))
        .map(|y| (y, row_cord[y]))
        .collect();
    let curve = T2Curve::from_rows(curve_rows)?;
    let signal = segment_indices(&curve, &instance_map, &Thresholds::default());

    let mut levels = BTreeMap::new();
    for level in DiscLevel::ALL {
        let up = &layout.blocks[level.upper().index()];
        let lo = &layout.blocks[level.lower().index()];
        let d_ref_px = (point_cord_distance(&model, up.corners()[1].midpoint(up.corners()[2]))
            + point_cord_distance(&model, lo.corners()[1].midpoint(lo.corners()[2])))
            / 2.0;
        let bump = bumps.iter().find(|b| b.level == level && b.depth > 0.0);
        let hern_area: usize = hern
            .indexed()
            .filter(|&(y, x, &v)| v && *instance_map.codes().get(y, x) == level.code())
            .count();
        let herniated = bump.is_some() && hern_area >= crate::herniation::HERNIATION_MIN_AREA;
        let (d_hern_mm, ratio, mscc) = match bump {
            Some(b) if herniated => {
                let d = bump_cord_distance(&model, b);
                let ratio = (1.0 - d / d_ref_px) * 100.0;
                (
                    Some(d * spec.spacing_mm),
                    Some(ratio),
                    Some(analytic_mscc(&model, b, up, lo)),
                )
            }
            _ => (None, None, None),
        };
        let sig = signal.levels.get(&level);
        let hyper = sig.is_some_and(|s| s.hyperintense);
        levels.insert(
            level,
            LevelTruth {
                herniated,
                herniation_area_px: bump
                    .map_or(0.0, |b| std::f64::consts::PI * b.depth * b.half_w / 2.0),
                d_hern_mm,
                d_ref_mm: d_ref_px * spec.spacing_mm,
                stenosis_ratio_percent: ratio,
                mscc_percent: mscc,
                t2_mi: sig.map(|s| s.t2_mi),
                rsci: sig.and_then(|s| s.rsci),
                hyperintense: hyper,
                expected_grade: segment_grade(herniated, ratio, d_hern_mm, hyper),
            },
        );
    }
    let patient_grade = levels.values().map(|l| l.expected_grade).max().unwrap_or(0);
    let truth = PhantomTruth {
        instance_map,
        herniation: hern,
        vertebra_corners,
        endplate_deg,
        cobb_c2_c7_deg: c,
        segmental_deg,
        k_line,
        k_line_status: if k_negative {
            KLineStatus::Negative
        } else {
            KLineStatus::Positive
        },
        levels,
        patient_grade,
        spacing_mm: spec.spacing_mm,
        cord: spec.cord.clone(),
    };
    Ok((case, truth))
}

/// MSCC from the continuous model: the bump removes part of the cord
/// interval in each row it crosses.
fn analytic_mscc(model: &CordModel, bump: &Bump, up: &Block, lo: &Block) -> f64 {
    let width_with_bump = |y: f64| {
        let a = model.anterior(y);
        let wd = model.width(y);
        let steps = 2000;
        let covered = (0..steps)
            .filter(|&i| {
                let u = a + wd * (i as f64 + 0.5) / steps as f64;
                bump.in_ellipse(Pt::new(y, u))
            })
            .count();
        wd * (1.0 - covered as f64 / steps as f64)
    };
    let mut rows = Vec::new();
    let reach = bump.half_w + bump.depth + 2.0;
    let mid = bump.a.midpoint(bump.b);
    let mut y = (mid.y - reach).floor();
    while y <= mid.y + reach {
        let touched = (0..400).any(|i| {
            let u = mid.x - reach + 2.0 * reach * i as f64 / 400.0;
            bump.in_ellipse(Pt::new(y, u))
        });
        if touched {
            rows.push(y);
        }
        y += 1.0;
    }
    let d_i = rows
        .iter()
        .map(|&y| width_with_bump(y))
        .fold(f64::INFINITY, f64::min);
    let d_a = model.width(up.center.y.round());
    let d_b = model.width(lo.center.y.round());
    (1.0 - d_i / ((d_a + d_b) / 2.0)) * 100.0
}

impl SplitMix64 {
    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}

/// A randomized spec: curve in `[-25°, 25°]`, either orientation, up to
/// two herniations of depth ≤ 4 mm and at most one lesion.
pub fn random_spec(rng: &mut SplitMix64, id: impl Into<String>) -> PhantomSpec {
    let global_curve_deg = rng.uniform(-25.0, 25.0);
    let anterior_side = if rng.below(2) == 0 {
        Orientation::Left
    } else {
        Orientation::Right
    };
    let mut levels: Vec<DiscLevel> = DiscLevel::ALL.to_vec();
    let mut herniations = Vec::new();
    for _ in 0..rng.below(3) {
        let level = levels.remove(rng.below(levels.len() as u64) as usize);
        herniations.push(HerniationDirective {
            level,
            depth_mm: rng.uniform(0.5, 4.0),
            width_mm: rng.uniform(4.0, 8.0),
        });
    }
    let lesions = if rng.below(3) == 0 {
        vec![LesionDirective {
            level: DiscLevel::ALL[rng.below(5) as usize],
            amplitude_ratio: rng.uniform(1.5, 2.5),
            extent_rows: rng.uniform(10.0, 24.0),
        }]
    } else {
        Vec::new()
    };
    PhantomSpec {
        id: id.into(),
        seed: rng.next_u64(),
        global_curve_deg,
        anterior_side,
        offset_px: [rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)],
        herniations,
        lesions,
        noise: rng.below(2) == 0,
        ..Default::default()
    }
}

/// Serializable part of [`PhantomTruth`] (everything except the grids).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub dx: DxTruth,
    pub endplate_deg: Vec<f64>,
    pub segmental_deg: BTreeMap<DiscLevel, f64>,
    /// `[[y, x]; 2]` for C2 and C7.
    pub k_line: [[f64; 2]; 2],
    pub vertebra_corners: Vec<[[f64; 2]; 4]>,
    pub levels: BTreeMap<DiscLevel, LevelTruth>,
    pub spacing_mm: f64,
    pub cord: CordSpec,
}

impl PhantomTruth {
    pub fn record(&self, case_id: &str) -> TruthRecord {
        let yx = |p: Pt| [p.y, p.x];
        TruthRecord {
            dx: self.summary(case_id),
            endplate_deg: self.endplate_deg.clone(),
            segmental_deg: self.segmental_deg.clone(),
            k_line: [yx(self.k_line.0), yx(self.k_line.1)],
            vertebra_corners: self.vertebra_corners.iter().map(|c| c.map(yx)).collect(),
            levels: self.levels.clone(),
            spacing_mm: self.spacing_mm,
            cord: self.cord.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cobb_angles;
    use crate::labeling::label_instances;

    #[test]
    fn splitmix_reference_values() {
        // first outputs for seed 0 of the published reference sequence
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(r.next_u64(), 0x06C4_5D18_8009_454F);
        let mut r = SplitMix64::new(7);
        for _ in 0..100 {
            let v = r.next_f64();
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = PhantomSpec {
            noise: true,
            seed: 42,
            ..Default::default()
        };
        let (a, ta) = generate(&spec).unwrap();
        let (b, tb) = generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let (c, _) = generate(&PhantomSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a.image, c.image);
        assert_eq!(a.mask, c.mask);
    }

    #[test]
    fn labels_reproduce_truth() {
        let (case, truth) = generate(&PhantomSpec::default()).unwrap();
        assert_eq!(label_instances(&case.mask).unwrap().map, truth.instance_map);
    }

    #[test]
    fn curve_recovered() {
        let spec = PhantomSpec {
            global_curve_deg: 20.0,
            ..Default::default()
        };
        let (case, truth) = generate(&spec).unwrap();
        let c = cobb_angles(&truth.instance_map, case.orientation).unwrap();
        assert!((c.c2_c7_deg - 20.0).abs() <= 1.0, "{}", c.c2_c7_deg);
        assert_eq!(truth.endplate_deg[0] - truth.endplate_deg[5], 20.0);
    }

    #[test]
    fn mirrored_spec_mirrors_case() {
        let spec = PhantomSpec {
            global_curve_deg: 12.0,
            herniations: vec![HerniationDirective {
                level: DiscLevel::C4C5,
                depth_mm: 3.0,
                width_mm: 6.0,
            }],
            ..Default::default()
        };
        let (l, tl) = generate(&spec).unwrap();
        let (r, tr) = generate(&PhantomSpec {
            anterior_side: Orientation::Right,
            ..spec
        })
        .unwrap();
        let (h, w) = l.mask.dims();
        for y in 0..h {
            for x in 0..w {
                assert_eq!(l.mask.get(y, x), r.mask.get(y, w - 1 - x));
            }
        }
        assert_eq!(tl.levels, tr.levels);
        assert_eq!(tl.cobb_c2_c7_deg, tr.cobb_c2_c7_deg);
    }

    #[test]
    fn overflow_is_an_error() {
        let spec = PhantomSpec {
            canvas: [200, 200],
            ..Default::default()
        };
        assert!(matches!(generate(&spec), Err(Error::GeometryOverflow(_))));
    }

    #[test]
    fn bump_area_close_to_analytic() {
        // depth 5 px, half-width 5 px: analytic 39.3 px
        let spec = PhantomSpec {
            herniations: vec![HerniationDirective {
                level: DiscLevel::C4C5,
                depth_mm: 2.5,
                width_mm: 5.0,
            }],
            ..Default::default()
        };
        let (_, t) = generate(&spec).unwrap();
        let area = t.herniation.as_slice().iter().filter(|&&b| b).count() as f64;
        let want = t.levels[&DiscLevel::C4C5].herniation_area_px;
        assert!((area - want).abs() <= 0.15 * want, "{area} vs {want}");
    }
}
