//! Pathology heatmap: one isotropic Gaussian per herniation component, peak
//! `√|R|`, spread `σ_scale·√|R|`, summed over the full grid.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::herniation::HerniationMask;
use crate::labeling::{connected_components, Connectivity, Region};
use crate::types::HeatGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapParams {
    pub sigma_scale: f64,
    pub min_region_size: usize,
}

impl Default for HeatmapParams {
    fn default() -> Self {
        HeatmapParams {
            sigma_scale: 1.5,
            min_region_size: 10,
        }
    }
}

impl HeatmapParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_scale.is_finite() && self.sigma_scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma_scale must be positive, got {}",
                self.sigma_scale
            )));
        }
        if self.min_region_size < 1 {
            return Err(Error::InvalidParameter(
                "min_region_size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Value of one component's Gaussian at a real-valued point `(y, x)`.
pub fn component_value(region: &Region, sigma_scale: f64, y: f64, x: f64) -> f64 {
    let peak = (region.area() as f64).sqrt();
    let sigma = sigma_scale * peak;
    let (cy, cx) = region.centroid();
    let d2 = (y - cy).powi(2) + (x - cx).powi(2);
    (-d2 / (2.0 * sigma * sigma)).exp() * peak
}

/// Heatmap of a single region, accumulated into `acc`.
pub fn add_component(acc: &mut Grid<f64>, region: &Region, sigma_scale: f64) {
    let area = region.area() as f64;
    let peak = area.sqrt();
    let sigma = sigma_scale * peak;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let (cy, cx) = region.centroid();
    let w = acc.width();
    // exp separates over rows and columns
    let gx: Vec<f64> = (0..w)
        .map(|x| (-(x as f64 - cx).powi(2) * inv).exp())
        .collect();
    for y in 0..acc.height() {
        let gy = (-(y as f64 - cy).powi(2) * inv).exp() * peak;
        for (x, g) in gx.iter().enumerate() {
            *acc.get_mut(y, x) += gy * g;
        }
    }
}

/// Heatmap in double precision from an arbitrary binary mask.
pub fn heatmap_f64(binary: &Grid<bool>, params: &HeatmapParams) -> Result<Grid<f64>> {
    params.validate()?;
    let mut acc = Grid::filled(binary.height(), binary.width(), 0.0f64);
    for region in connected_components(binary, Connectivity::Eight) {
        if region.area() >= params.min_region_size {
            add_component(&mut acc, &region, params.sigma_scale);
        }
    }
    Ok(acc)
}

pub fn heatmap_from_binary(binary: &Grid<bool>, params: &HeatmapParams) -> Result<HeatGrid> {
    let acc = heatmap_f64(binary, params)?;
    HeatGrid::new(acc.map(|&v| v as f32))
}

pub fn generate_heatmap(hern: &HerniationMask, params: &HeatmapParams) -> Result<HeatGrid> {
    heatmap_from_binary(hern.mask(), params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(h: usize, w: usize, cy: f64, cx: f64, r2: f64) -> Grid<bool> {
        Grid::from_fn(h, w, |y, x| {
            (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2) <= r2
        })
    }

    #[test]
    fn empty_mask_is_zero() {
        let g = heatmap_from_binary(&Grid::filled(8, 8, false), &HeatmapParams::default()).unwrap();
        assert!(g.values().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn peak_and_sigma_radius() {
        // 5×5 block: 25 pixels centred on (100, 100)
        let m = Grid::from_fn(200, 200, |y, x| {
            (98..=102).contains(&y) && (98..=102).contains(&x)
        });
        let h = heatmap_f64(&m, &HeatmapParams::default()).unwrap();
        assert!((h.get(100, 100) - 5.0).abs() < 1e-12);
        let expect = 5.0 * (-0.5f64).exp();
        // exactly 7.5 px away is off-grid; check the closed form at 7 and 8
        for d in [7usize, 8] {
            let want = 5.0 * (-((d * d) as f64) / (2.0 * 7.5 * 7.5)).exp();
            assert!((h.get(100, 100 + d) - want).abs() < 1e-12);
        }
        assert!(expect > *h.get(100, 108) && expect < *h.get(100, 107));
        let region = connected_components(&m, Connectivity::Eight).remove(0);
        let v = component_value(&region, 1.5, 100.0, 107.5);
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn small_components_skipped() {
        let m = disk(40, 40, 20.0, 20.0, 2.0); // 9 px
        assert_eq!(m.as_slice().iter().filter(|&&b| b).count(), 9);
        let h = heatmap_f64(&m, &HeatmapParams::default()).unwrap();
        assert!(h.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_params() {
        let p = HeatmapParams {
            sigma_scale: 0.0,
            min_region_size: 10,
        };
        assert!(heatmap_f64(&Grid::filled(2, 2, false), &p).is_err());
    }
}
