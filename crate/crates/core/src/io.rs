//! File IO: case triples (image, mask, meta sidecar) and the f32 grid container.
//!
//! Grid container layout:
//!
//! ```text
//! bytes 0..12   magic  b"CERVDXF32GRD"
//! bytes 12..16  format version, u32 little-endian (currently 1)
//! header line   {"dtype":"f32le","height":H,"width":W}\n
//! payload       H*W little-endian f32, row-major
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::types::{Case, HeatGrid, IntensityImage, Orientation, SemanticMask, Spacing, Tissue};

pub const GRID_MAGIC: &[u8; 12] = b"CERVDXF32GRD";
pub const GRID_VERSION: u32 = 1;

/// Sidecar metadata for one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMeta {
    pub id: String,
    pub spacing_mm: [f64; 2],
    pub anterior_side: Orientation,
}

pub fn read_case(image_path: &Path, mask_path: &Path, meta_path: &Path) -> Result<Case> {
    let meta = read_meta(meta_path, image_path)?;
    let spacing =
        Spacing::new(meta.spacing_mm[0], meta.spacing_mm[1]).map_err(|_| Error::MissingMeta {
            path: meta_path.to_path_buf(),
            field: "spacing_mm",
        })?;
    let values = read_intensity(image_path)?;
    let image = IntensityImage::new(values, spacing)?;
    let mask = read_mask(mask_path)?;
    if image.dims() != mask.dims() {
        let (lh, lw) = image.dims();
        let (rh, rw) = mask.dims();
        return Err(Error::DimensionMismatch {
            left: image_path.display().to_string(),
            lh,
            lw,
            right: mask_path.display().to_string(),
            rh,
            rw,
        });
    }
    Case::new(meta.id, image, mask, meta.anterior_side)
}

/// Parse a meta sidecar. `id` falls back to the image file stem.
pub fn read_meta(meta_path: &Path, image_path: &Path) -> Result<CaseMeta> {
    let text = fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: meta_path.to_path_buf(),
        source,
    })?;
    let missing = |field| Error::MissingMeta {
        path: meta_path.to_path_buf(),
        field,
    };
    let spacing = value
        .get("spacing_mm")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 2)
        .and_then(|a| Some([a[0].as_f64()?, a[1].as_f64()?]))
        .ok_or_else(|| missing("spacing_mm"))?;
    let anterior_side = match value.get("anterior_side").and_then(Value::as_str) {
        Some("left") => Orientation::Left,
        Some("right") => Orientation::Right,
        _ => return Err(missing("anterior_side")),
    };
    let id = match value.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(missing("id")),
        None => file_stem_id(image_path),
    };
    Ok(CaseMeta {
        id,
        spacing_mm: spacing,
        anterior_side,
    })
}

fn file_stem_id(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.split('.').next().unwrap_or_default().to_string()
}

fn open_image(path: &Path) -> Result<DynamicImage> {
    image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Read a 16-bit (or 8-bit) grayscale PNG/PGM as raw integer intensities.
pub fn read_intensity(path: &Path) -> Result<Grid<f64>> {
    let (h, w, data): (usize, usize, Vec<f64>) = match open_image(path)? {
        DynamicImage::ImageLuma16(buf) => (
            buf.height() as usize,
            buf.width() as usize,
            buf.into_raw().into_iter().map(f64::from).collect(),
        ),
        DynamicImage::ImageLuma8(buf) => (
            buf.height() as usize,
            buf.width() as usize,
            buf.into_raw().into_iter().map(f64::from).collect(),
        ),
        other => {
            return Err(Error::PixelFormat {
                path: path.to_path_buf(),
                format: format!("{:?}", other.color()),
            })
        }
    };
    if h == 0 || w == 0 {
        return Err(Error::DegenerateGrid);
    }
    Grid::from_vec(h, w, data)
}

/// Read an 8-bit grayscale PNG/PGM whose values are semantic codes 0..=4.
pub fn read_mask(path: &Path) -> Result<SemanticMask> {
    let buf = match open_image(path)? {
        DynamicImage::ImageLuma8(buf) => buf,
        other => {
            return Err(Error::PixelFormat {
                path: path.to_path_buf(),
                format: format!("{:?}", other.color()),
            })
        }
    };
    let (h, w) = (buf.height() as usize, buf.width() as usize);
    if h == 0 || w == 0 {
        return Err(Error::DegenerateGrid);
    }
    let mut tissues = Vec::with_capacity(h * w);
    for code in buf.into_raw() {
        let t = Tissue::from_code(code).ok_or_else(|| Error::UnknownCode {
            path: path.to_path_buf(),
            code,
        })?;
        tissues.push(t);
    }
    Grid::from_vec(h, w, tissues)
}

fn write_png<P: image::Pixel<Subpixel = S> + image::PixelWithColorType, S: image::Primitive>(
    buf: &ImageBuffer<P, Vec<S>>,
    path: &Path,
) -> Result<()>
where
    [S]: image::EncodableLayout,
{
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| match source {
            image::ImageError::IoError(e) => Error::io(path, e),
            other => Error::Image {
                path: path.to_path_buf(),
                source: other,
            },
        })
}

/// Write intensities as a 16-bit grayscale PNG; values must be integers in
/// `0..=65535` so the write is lossless.
pub fn write_intensity(values: &Grid<f64>, path: &Path) -> Result<()> {
    let mut raw = Vec::with_capacity(values.as_slice().len());
    for (y, x, &v) in values.indexed() {
        if !(0.0..=65535.0).contains(&v) || v.fract() != 0.0 {
            return Err(Error::InvalidValue { y, x, value: v });
        }
        raw.push(v as u16);
    }
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(values.width() as u32, values.height() as u32, raw)
            .ok_or(Error::DegenerateGrid)?;
    write_png(&buf, path)
}

pub fn write_mask(mask: &SemanticMask, path: &Path) -> Result<()> {
    write_codes(&mask.map(|t| t.code()), path)
}

/// Write an arbitrary 8-bit code grid (semantic or instance codes) as PNG.
pub fn write_codes(codes: &Grid<u8>, path: &Path) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(
        codes.width() as u32,
        codes.height() as u32,
        codes.as_slice().to_vec(),
    )
    .ok_or(Error::DegenerateGrid)?;
    write_png(&buf, path)
}

pub fn write_meta(meta: &CaseMeta, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(meta).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// File paths of a case triple written under one directory.
#[derive(Debug, Clone)]
pub struct CasePaths {
    pub image: PathBuf,
    pub mask: PathBuf,
    pub meta: PathBuf,
}

impl CasePaths {
    pub fn in_dir(dir: &Path, id: &str) -> Self {
        CasePaths {
            image: dir.join(format!("{id}.image.png")),
            mask: dir.join(format!("{id}.mask.png")),
            meta: dir.join(format!("{id}.meta.json")),
        }
    }
}

pub fn write_case(case: &Case, dir: &Path) -> Result<CasePaths> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = CasePaths::in_dir(dir, &case.id);
    write_intensity(case.image.values(), &paths.image)?;
    write_mask(&case.mask, &paths.mask)?;
    let s = case.spacing();
    write_meta(
        &CaseMeta {
            id: case.id.clone(),
            spacing_mm: [s.y, s.x],
            anterior_side: case.orientation,
        },
        &paths.meta,
    )?;
    Ok(paths)
}

pub fn encode_float_grid(grid: &HeatGrid) -> Result<Vec<u8>> {
    let (h, w) = grid.dims();
    if h == 0 || w == 0 {
        return Err(Error::DegenerateGrid);
    }
    let mut out = Vec::with_capacity(64 + h * w * 4);
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&GRID_VERSION.to_le_bytes());
    out.extend_from_slice(
        format!("{{\"dtype\":\"f32le\",\"height\":{h},\"width\":{w}}}\n").as_bytes(),
    );
    for &v in grid.values().as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_float_grid(bytes: &[u8]) -> Result<HeatGrid> {
    let bad = |m: &str| Error::Container(m.to_string());
    if bytes.len() < 16 || &bytes[..12] != GRID_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    if version != GRID_VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let rest = &bytes[16..];
    let nl = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("unterminated header"))?;
    #[derive(Deserialize)]
    struct Header {
        dtype: String,
        height: usize,
        width: usize,
    }
    let header: Header =
        serde_json::from_slice(&rest[..nl]).map_err(|e| Error::Container(e.to_string()))?;
    if header.dtype != "f32le" {
        return Err(Error::Container(format!(
            "unsupported dtype {}",
            header.dtype
        )));
    }
    if header.height == 0 || header.width == 0 {
        return Err(Error::DegenerateGrid);
    }
    let payload = &rest[nl + 1..];
    let n = header.height * header.width;
    if payload.len() != n * 4 {
        return Err(Error::Container(format!(
            "payload is {} bytes, expected {}",
            payload.len(),
            n * 4
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    HeatGrid::new(Grid::from_vec(header.height, header.width, values)?)
}

pub fn write_float_grid(grid: &HeatGrid, path: &Path) -> Result<()> {
    let bytes = encode_float_grid(grid)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_float_grid(path: &Path) -> Result<HeatGrid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_float_grid(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_meta_json(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("m.json");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn reads_valid_case() {
        let dir = tempfile::tempdir().unwrap();
        let img = Grid::from_fn(512, 512, |y, x| ((y * 3 + x) % 4000) as f64);
        let mask = Grid::from_fn(512, 512, |y, _| Tissue::from_code((y % 5) as u8).unwrap());
        write_intensity(&img, &dir.path().join("i.png")).unwrap();
        write_mask(&mask, &dir.path().join("k.png")).unwrap();
        let meta = write_meta_json(
            dir.path(),
            r#"{"spacing_mm":[0.57,0.57],"anterior_side":"left"}"#,
        );
        let case = read_case(&dir.path().join("i.png"), &dir.path().join("k.png"), &meta).unwrap();
        assert_eq!(case.image.dims(), (512, 512));
        assert_eq!(case.mask.dims(), (512, 512));
        assert_eq!(case.orientation, Orientation::Left);
        assert_eq!(case.id, "i");
        assert_eq!(case.image.values(), &img);
        assert_eq!(case.mask, mask);
    }

    #[test]
    fn rejects_unknown_code() {
        let dir = tempfile::tempdir().unwrap();
        let mut codes = Grid::filled(8, 8, 0u8);
        codes.set(3, 3, 9);
        let p = dir.path().join("k.png");
        write_codes(&codes, &p).unwrap();
        let err = read_mask(&p).unwrap_err();
        assert!(err.to_string().contains("unknown semantic code 9"), "{err}");
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        write_intensity(&Grid::filled(512, 512, 10.0), &dir.path().join("i.png")).unwrap();
        write_mask(
            &Grid::filled(256, 256, Tissue::Background),
            &dir.path().join("k.png"),
        )
        .unwrap();
        let meta = write_meta_json(
            dir.path(),
            r#"{"spacing_mm":[0.57,0.57],"anterior_side":"right","id":"a"}"#,
        );
        let err =
            read_case(&dir.path().join("i.png"), &dir.path().join("k.png"), &meta).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }), "{err}");
    }

    #[test]
    fn reports_missing_meta_field() {
        let dir = tempfile::tempdir().unwrap();
        let meta = write_meta_json(dir.path(), r#"{"spacing_mm":[0.5,0.5]}"#);
        let err = read_meta(&meta, Path::new("x.png")).unwrap_err();
        assert!(err.to_string().contains("anterior_side"), "{err}");
        let meta = write_meta_json(dir.path(), r#"{"spacing_mm":[0.5],"anterior_side":"left"}"#);
        let err = read_meta(&meta, Path::new("x.png")).unwrap_err();
        assert!(err.to_string().contains("spacing_mm"), "{err}");
    }

    #[test]
    fn reads_pgm_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("i.pgm");
        let mask_path = dir.path().join("k.pgm");
        // 16-bit binary PGM is big-endian.
        let mut img = b"P5\n3 2\n65535\n".to_vec();
        for v in [0u16, 1, 300, 4000, 65535, 7] {
            img.extend_from_slice(&v.to_be_bytes());
        }
        fs::write(&img_path, img).unwrap();
        let mut mask = b"P5\n3 2\n255\n".to_vec();
        mask.extend_from_slice(&[0, 1, 2, 3, 4, 0]);
        fs::write(&mask_path, mask).unwrap();
        let meta = write_meta_json(
            dir.path(),
            r#"{"spacing_mm":[1.0,0.5],"anterior_side":"left","id":"p"}"#,
        );
        let case = read_case(&img_path, &mask_path, &meta).unwrap();
        assert_eq!(
            case.image.values().as_slice(),
            &[0.0, 1.0, 300.0, 4000.0, 65535.0, 7.0]
        );
        assert_eq!(*case.mask.get(1, 0), Tissue::Cord);
        assert_eq!(case.spacing(), Spacing::new(1.0, 0.5).unwrap());
    }

    #[test]
    fn float_grid_two_by_two() {
        let g = HeatGrid::new(Grid::from_vec(2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap()).unwrap();
        let bytes = encode_float_grid(&g).unwrap();
        let header = b"{\"dtype\":\"f32le\",\"height\":2,\"width\":2}\n";
        assert_eq!(bytes.len(), 16 + header.len() + 16);
        assert_eq!(&bytes[16..16 + header.len()], header);
        let back = decode_float_grid(&bytes).unwrap();
        let same = back
            .values()
            .as_slice()
            .iter()
            .zip(g.values().as_slice())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same);
    }

    #[test]
    fn float_grid_degenerate() {
        let g = HeatGrid::zeros(0, 3);
        assert!(matches!(encode_float_grid(&g), Err(Error::DegenerateGrid)));
    }

    #[test]
    fn float_grid_rejects_corruption() {
        let g = HeatGrid::zeros(2, 2);
        let mut bytes = encode_float_grid(&g).unwrap();
        bytes.pop();
        assert!(decode_float_grid(&bytes).is_err());
        bytes[0] = b'X';
        assert!(decode_float_grid(&bytes).is_err());
    }

    #[test]
    fn intensity_write_rejects_fractional() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::from_vec(1, 2, vec![1.0, 2.5]).unwrap();
        assert!(write_intensity(&g, &dir.path().join("a.png")).is_err());
    }
}
