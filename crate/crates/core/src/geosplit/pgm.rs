use std::io::Write;
use std::path::Path;

use super::coverage::CoverageRaster;
use crate::error::{Error, Result};

/// Binary portable graymap, 8-bit, rows top to bottom.
pub fn write_pgm<W: Write>(mut w: W, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::ShapeMismatch(format!("{} pixels for a {width}x{height} image", pixels.len())));
    }
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(pixels)?;
    Ok(())
}

/// Gray levels for a train/val audit image: empty 0, train 96, val 176, both 255.
pub const LEVEL_TRAIN: u8 = 96;
pub const LEVEL_VAL: u8 = 176;
pub const LEVEL_BOTH: u8 = 255;

/// Renders one city's train and val coverage on their common bounding box,
/// north up.
pub fn render_split(train: Option<&CoverageRaster>, val: Option<&CoverageRaster>) -> (usize, usize, Vec<u8>) {
    let rasters: Vec<&CoverageRaster> = [train, val].into_iter().flatten().filter(|r| r.occupied() > 0).collect();
    if rasters.is_empty() {
        return (0, 0, Vec::new());
    }
    let x0 = rasters.iter().map(|r| r.origin().0).min().unwrap_or(0);
    let y0 = rasters.iter().map(|r| r.origin().1).min().unwrap_or(0);
    let x1 = rasters.iter().map(|r| r.origin().0 + r.width() as i64).max().unwrap_or(0);
    let y1 = rasters.iter().map(|r| r.origin().1 + r.height() as i64).max().unwrap_or(0);
    let (w, h) = ((x1 - x0) as usize, (y1 - y0) as usize);
    let mut px = vec![0u8; w * h];
    for row in 0..h {
        let y = y1 - 1 - row as i64;
        for col in 0..w {
            let x = x0 + col as i64;
            let t = train.is_some_and(|r| r.contains_lattice(x, y));
            let v = val.is_some_and(|r| r.contains_lattice(x, y));
            px[row * w + col] = match (t, v) {
                (true, true) => LEVEL_BOTH,
                (false, true) => LEVEL_VAL,
                (true, false) => LEVEL_TRAIN,
                _ => 0,
            };
        }
    }
    (w, h, px)
}

pub fn save_pgm(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_pgm(&mut f, width, height, pixels)?;
    f.flush()?;
    Ok(())
}
