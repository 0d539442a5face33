//! Training objectives evaluated on fixed grids: heatmap L1, cross-entropy
//! plus soft Dice, Sobel edge L1 and their weighted total.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::types::{HeatGrid, SemanticMask, Tissue};

pub const PROB_FLOOR: f64 = 1e-7;
pub const DICE_EPS: f64 = 1e-5;

/// Per-class probability grids in [`Tissue::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMaps {
    classes: [Grid<f64>; 5],
}

impl ProbMaps {
    pub fn new(classes: [Grid<f64>; 5]) -> Result<Self> {
        let (h, w) = classes[0].dims();
        if h == 0 || w == 0 {
            return Err(Error::DegenerateGrid);
        }
        for (i, c) in classes.iter().enumerate() {
            c.check_dims(&classes[0], Tissue::ALL[i].short_name(), "bg")?;
        }
        for y in 0..h {
            for x in 0..w {
                let mut sum = 0.0;
                for c in &classes {
                    let p = *c.get(y, x);
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::InvalidValue { y, x, value: p });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > 1e-5 {
                    return Err(Error::InvalidValue { y, x, value: sum });
                }
            }
        }
        Ok(ProbMaps { classes })
    }

    pub fn one_hot(mask: &SemanticMask) -> Self {
        ProbMaps {
            classes: Tissue::ALL.map(|t| mask.map(|&m| if m == t { 1.0 } else { 0.0 })),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.classes[0].dims()
    }

    pub fn class(&self, t: Tissue) -> &Grid<f64> {
        &self.classes[t.code() as usize]
    }

    /// Highest-probability class per pixel; ties go to the lower code.
    pub fn argmax(&self) -> SemanticMask {
        let (h, w) = self.dims();
        Grid::from_fn(h, w, |y, x| {
            let mut best = Tissue::Background;
            for t in Tissue::ALL {
                if *self.class(t).get(y, x) > *self.class(best).get(y, x) {
                    best = t;
                }
            }
            best
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_h: f64,
    pub lambda_e: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_h: 1.0,
            lambda_e: 1.0,
        }
    }
}

fn check_mask(pred: &ProbMaps, gt: &SemanticMask) -> Result<()> {
    pred.classes[0].check_dims(gt, "prediction", "ground truth")
}

/// Mean absolute difference.
pub fn heatmap_loss(pred: &HeatGrid, truth: &HeatGrid) -> Result<f64> {
    pred.values()
        .check_dims(truth.values(), "predicted heatmap", "true heatmap")?;
    let n = pred.values().as_slice().len() as f64;
    let sum: f64 = pred
        .values()
        .as_slice()
        .iter()
        .zip(truth.values().as_slice())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .sum();
    Ok(sum / n)
}

/// Mean negative log-likelihood of the true class.
pub fn ce_loss(pred: &ProbMaps, gt: &SemanticMask) -> Result<f64> {
    check_mask(pred, gt)?;
    let n = gt.as_slice().len() as f64;
    let sum: f64 = gt
        .indexed()
        .map(|(y, x, &t)| -pred.class(t).get(y, x).max(PROB_FLOOR).ln())
        .sum();
    Ok(sum / n)
}

/// `1 −` mean over the four foreground classes of the soft Dice score.
pub fn dice_loss(pred: &ProbMaps, gt: &SemanticMask) -> Result<f64> {
    check_mask(pred, gt)?;
    let mut total = 0.0;
    for t in Tissue::FOREGROUND {
        let p = pred.class(t);
        let (mut inter, mut sp, mut sg) = (0.0, 0.0, 0.0);
        for (y, x, &m) in gt.indexed() {
            let pv = *p.get(y, x);
            let g = if m == t { 1.0 } else { 0.0 };
            inter += pv * g;
            sp += pv;
            sg += g;
        }
        total += (2.0 * inter + DICE_EPS) / (sp + sg + DICE_EPS);
    }
    Ok(1.0 - total / Tissue::FOREGROUND.len() as f64)
}

pub fn seg_loss(pred: &ProbMaps, gt: &SemanticMask) -> Result<f64> {
    Ok(ce_loss(pred, gt)? + dice_loss(pred, gt)?)
}

/// 3×3 Sobel gradient magnitude with replicated borders.
pub fn sobel(field: &Grid<f64>) -> Grid<f64> {
    let (h, w) = field.dims();
    let at = |y: i64, x: i64| {
        *field.get(
            y.clamp(0, h as i64 - 1) as usize,
            x.clamp(0, w as i64 - 1) as usize,
        )
    };
    Grid::from_fn(h, w, |y, x| {
        let (y, x) = (y as i64, x as i64);
        let gx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1))
            - (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
        let gy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1))
            - (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
        (gx * gx + gy * gy).sqrt()
    })
}

pub fn sobel_edges(binary: &Grid<bool>) -> Grid<f64> {
    sobel(&binary.map(|&b| if b { 1.0 } else { 0.0 }))
}

/// Average over the four foreground classes of the mean L1 distance
/// between Sobel maps of the argmax prediction and the ground truth.
pub fn edge_loss(pred: &ProbMaps, gt: &SemanticMask) -> Result<f64> {
    check_mask(pred, gt)?;
    let arg = pred.argmax();
    let n = gt.as_slice().len() as f64;
    let mut total = 0.0;
    for t in Tissue::FOREGROUND {
        let ep = sobel_edges(&arg.map(|&m| m == t));
        let eg = sobel_edges(&gt.map(|&m| m == t));
        let l1: f64 = ep
            .as_slice()
            .iter()
            .zip(eg.as_slice())
            .map(|(a, b)| (a - b).abs())
            .sum();
        total += l1 / n;
    }
    Ok(0.25 * total)
}

pub fn total_loss(
    pred: &ProbMaps,
    gt: &SemanticMask,
    h_pred: &HeatGrid,
    h_true: &HeatGrid,
    w: &LossWeights,
) -> Result<f64> {
    if !(w.lambda_h >= 0.0 && w.lambda_e >= 0.0) {
        return Err(Error::InvalidParameter(
            "loss weights must be non-negative".into(),
        ));
    }
    Ok(seg_loss(pred, gt)?
        + w.lambda_h * heatmap_loss(h_pred, h_true)?
        + w.lambda_e * edge_loss(pred, gt)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask() -> SemanticMask {
        Grid::from_fn(8, 8, |y, x| Tissue::ALL[(y / 2 + x / 3) % 5])
    }

    #[test]
    fn perfect_prediction_is_zero() {
        let gt = mask();
        let p = ProbMaps::one_hot(&gt);
        assert_eq!(seg_loss(&p, &gt).unwrap(), 0.0);
        assert_eq!(edge_loss(&p, &gt).unwrap(), 0.0);
    }

    #[test]
    fn uniform_prediction_ce() {
        let gt = mask();
        let p = ProbMaps::new(std::array::from_fn(|_| Grid::filled(8, 8, 0.2))).unwrap();
        assert!((ce_loss(&p, &gt).unwrap() - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(ProbMaps::new(std::array::from_fn(|_| Grid::filled(2, 2, 0.3))).is_err());
    }

    #[test]
    fn step_edge() {
        let g = Grid::from_fn(5, 6, |_, x| x >= 3);
        let e = sobel_edges(&g);
        for y in 0..5 {
            assert_eq!(*e.get(y, 2), 4.0);
            assert_eq!(*e.get(y, 3), 4.0);
            assert_eq!(*e.get(y, 0), 0.0);
            assert_eq!(*e.get(y, 5), 0.0);
        }
    }

    #[test]
    fn heatmap_offset() {
        let a = HeatGrid::new(Grid::filled(3, 3, 1.0f32)).unwrap();
        let b = HeatGrid::new(Grid::filled(3, 3, 1.5f32)).unwrap();
        assert_eq!(heatmap_loss(&a, &b).unwrap(), 0.5);
        assert_eq!(heatmap_loss(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn zero_weights_reduce_to_seg() {
        let gt = mask();
        let p = ProbMaps::new(std::array::from_fn(|_| Grid::filled(8, 8, 0.2))).unwrap();
        let a = HeatGrid::zeros(8, 8);
        let b = HeatGrid::new(Grid::filled(8, 8, 2.0f32)).unwrap();
        let w = LossWeights {
            lambda_h: 0.0,
            lambda_e: 0.0,
        };
        assert_eq!(
            total_loss(&p, &gt, &a, &b, &w).unwrap(),
            seg_loss(&p, &gt).unwrap()
        );
    }
}
