//! Canonical data types and code tables.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Physical pixel size in millimeters, `(y, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spacing {
    pub y: f64,
    pub x: f64,
}

impl Spacing {
    pub fn new(y: f64, x: f64) -> Result<Self> {
        if !(y.is_finite() && x.is_finite() && y > 0.0 && x > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "spacing must be positive, got ({y}, {x})"
            )));
        }
        Ok(Spacing { y, x })
    }

    /// Physical distance between two pixel centers.
    pub fn distance_mm(&self, dy: f64, dx: f64) -> f64 {
        (dy * self.y).hypot(dx * self.x)
    }
}

/// Raw T2 signal image.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    values: Grid<f64>,
    spacing: Spacing,
}

impl IntensityImage {
    pub fn new(values: Grid<f64>, spacing: Spacing) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DegenerateGrid);
        }
        for (y, x, &v) in values.indexed() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidValue { y, x, value: v });
            }
        }
        Ok(IntensityImage { values, spacing })
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.values
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    /// Multiply every value by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        IntensityImage::new(self.values.map(|v| v * factor), self.spacing)
    }
}

/// Semantic class of a pixel in an annotated mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Tissue {
    Background = 0,
    Vertebra = 1,
    Disc = 2,
    Cord = 3,
    Csf = 4,
}

impl Tissue {
    pub const ALL: [Tissue; 5] = [
        Tissue::Background,
        Tissue::Vertebra,
        Tissue::Disc,
        Tissue::Cord,
        Tissue::Csf,
    ];

    pub const FOREGROUND: [Tissue; 4] = [Tissue::Vertebra, Tissue::Disc, Tissue::Cord, Tissue::Csf];

    pub fn from_code(code: u8) -> Option<Tissue> {
        Tissue::ALL.get(code as usize).copied()
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Tissue::Background => "BG",
            Tissue::Vertebra => "V",
            Tissue::Disc => "IVD",
            Tissue::Cord => "SC",
            Tissue::Csf => "CSF",
        }
    }
}

pub type SemanticMask = Grid<Tissue>;

/// Vertebral bodies carrying instance codes 1..=6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Vertebra {
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
}

impl Vertebra {
    pub const ALL: [Vertebra; 6] = [
        Vertebra::C2,
        Vertebra::C3,
        Vertebra::C4,
        Vertebra::C5,
        Vertebra::C6,
        Vertebra::C7,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_index(i: usize) -> Option<Vertebra> {
        Vertebra::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        ["C2", "C3", "C4", "C5", "C6", "C7"][self.index()]
    }
}

/// Intervertebral disc levels carrying instance codes 7..=11.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiscLevel {
    #[serde(rename = "C2/3")]
    C2C3,
    #[serde(rename = "C3/4")]
    C3C4,
    #[serde(rename = "C4/5")]
    C4C5,
    #[serde(rename = "C5/6")]
    C5C6,
    #[serde(rename = "C6/7")]
    C6C7,
}

impl DiscLevel {
    pub const ALL: [DiscLevel; 5] = [
        DiscLevel::C2C3,
        DiscLevel::C3C4,
        DiscLevel::C4C5,
        DiscLevel::C5C6,
        DiscLevel::C6C7,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> u8 {
        self.index() as u8 + 7
    }

    pub fn from_index(i: usize) -> Option<DiscLevel> {
        DiscLevel::ALL.get(i).copied()
    }

    pub fn from_code(code: u8) -> Option<DiscLevel> {
        code.checked_sub(7)
            .and_then(|i| DiscLevel::from_index(i as usize))
    }

    pub fn name(self) -> &'static str {
        ["C2/3", "C3/4", "C4/5", "C5/6", "C6/7"][self.index()]
    }

    pub fn parse(s: &str) -> Option<DiscLevel> {
        DiscLevel::ALL.into_iter().find(|l| l.name() == s)
    }

    pub fn upper(self) -> Vertebra {
        Vertebra::ALL[self.index()]
    }

    pub fn lower(self) -> Vertebra {
        Vertebra::ALL[self.index() + 1]
    }
}

impl fmt::Display for DiscLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Vertebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const CORD_CODE: u8 = 12;
pub const CSF_CODE: u8 = 13;

/// Per-pixel instance codes: 0 background, 1..=6 vertebrae, 7..=11 discs,
/// 12 spinal cord, 13 CSF.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMap {
    codes: Grid<u8>,
}

impl InstanceMap {
    pub fn new(codes: Grid<u8>) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::DegenerateGrid);
        }
        if let Some((y, x, &c)) = codes.indexed().find(|(_, _, &c)| c > CSF_CODE) {
            return Err(Error::InvalidValue {
                y,
                x,
                value: c as f64,
            });
        }
        Ok(InstanceMap { codes })
    }

    pub fn codes(&self) -> &Grid<u8> {
        &self.codes
    }

    pub fn dims(&self) -> (usize, usize) {
        self.codes.dims()
    }

    #[inline]
    pub fn code(&self, y: usize, x: usize) -> u8 {
        *self.codes.get(y, x)
    }

    /// Pixels `(y, x)` carrying `code`, row-major.
    pub fn pixels_of(&self, code: u8) -> Vec<(usize, usize)> {
        self.codes
            .indexed()
            .filter(|(_, _, &c)| c == code)
            .map(|(y, x, _)| (y, x))
            .collect()
    }

    pub fn contains_code(&self, code: u8) -> bool {
        self.codes.as_slice().contains(&code)
    }

    pub fn binary(&self, code: u8) -> Grid<bool> {
        self.codes.map(|&c| c == code)
    }

    /// Collapse instance codes back to semantic classes.
    pub fn to_semantic(&self) -> SemanticMask {
        self.codes.map(|&c| match c {
            1..=6 => Tissue::Vertebra,
            7..=11 => Tissue::Disc,
            CORD_CODE => Tissue::Cord,
            CSF_CODE => Tissue::Csf,
            _ => Tissue::Background,
        })
    }
}

/// Non-negative scalar field (pathology heatmap).
#[derive(Debug, Clone, PartialEq)]
pub struct HeatGrid {
    values: Grid<f32>,
}

impl HeatGrid {
    pub fn new(values: Grid<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DegenerateGrid);
        }
        for (y, x, &v) in values.indexed() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidValue {
                    y,
                    x,
                    value: v as f64,
                });
            }
        }
        Ok(HeatGrid { values })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        HeatGrid {
            values: Grid::filled(height, width, 0.0),
        }
    }

    pub fn values(&self) -> &Grid<f32> {
        &self.values
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        *self.values.get(y, x)
    }
}

/// Which image side faces the patient's front.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Left,
    Right,
}

impl Orientation {
    /// +1 when posterior is toward increasing `x`.
    pub fn posterior_sign(self) -> i64 {
        match self {
            Orientation::Left => 1,
            Orientation::Right => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::Left => Orientation::Right,
            Orientation::Right => Orientation::Left,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Left => "left",
            Orientation::Right => "right",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub id: String,
    pub image: IntensityImage,
    pub mask: SemanticMask,
    pub orientation: Orientation,
}

impl Case {
    pub fn new(
        id: impl Into<String>,
        image: IntensityImage,
        mask: SemanticMask,
        orientation: Orientation,
    ) -> Result<Self> {
        image.values().check_dims(&mask, "image", "mask")?;
        Ok(Case {
            id: id.into(),
            image,
            mask,
            orientation,
        })
    }

    pub fn spacing(&self) -> Spacing {
        self.image.spacing()
    }
}
