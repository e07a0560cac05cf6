//! Files written by runs: snapshots, traces and PPM images.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::grid::Field;
use crate::timestepper::TraceRow;

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_field_csv(path: &Path, field: &Field, t: f64, name: &str) -> Result<()> {
    let mut out = create(path)?;
    field.write_csv(&mut out, t, name)?;
    out.flush()?;
    Ok(())
}

/// Two columns `t, int u`.
pub fn write_mass_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "# t, mass")?;
    for r in trace {
        writeln!(out, "{:.16e},{:.16e}", r.t, r.mass)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_extremes_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "# t, u_min, u_max, v_min, v_max")?;
    for r in trace {
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", r.t, r.u_min, r.u_max, r.v_min, r.v_max)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_table(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "# {header}")?;
    for r in rows {
        writeln!(out, "{}", r.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Anchors of the colormap, dark violet through teal to yellow.
const ANCHORS: [[f64; 3]; 9] = [
    [68.0, 1.0, 84.0],
    [71.0, 44.0, 122.0],
    [59.0, 81.0, 139.0],
    [44.0, 113.0, 142.0],
    [33.0, 144.0, 141.0],
    [39.0, 173.0, 129.0],
    [92.0, 200.0, 99.0],
    [170.0, 220.0, 50.0],
    [253.0, 231.0, 37.0],
];

/// The fixed 256-entry colormap.
pub fn colormap() -> [[u8; 3]; 256] {
    let mut table = [[0u8; 3]; 256];
    let segments = (ANCHORS.len() - 1) as f64;
    for (k, entry) in table.iter_mut().enumerate() {
        let s = k as f64 / 255.0 * segments;
        let a = (s.floor() as usize).min(ANCHORS.len() - 2);
        let frac = s - a as f64;
        for c in 0..3 {
            let v = ANCHORS[a][c] + frac * (ANCHORS[a + 1][c] - ANCHORS[a][c]);
            entry[c] = v.round() as u8;
        }
    }
    table
}

/// Colormap index of each cell, min-max normalized. A flat field maps to 0.
pub fn color_indices(f: &Field) -> Vec<u8> {
    let (lo, hi) = (f.min(), f.max());
    let span = hi - lo;
    f.values()
        .iter()
        .map(|&x| if span > 0.0 { ((x - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8 } else { 0 })
        .collect()
}

/// Sidecar path holding the normalization bounds of an image.
pub fn bounds_path(image: &Path) -> PathBuf {
    let mut s = image.as_os_str().to_owned();
    s.push(".bounds");
    PathBuf::from(s)
}

/// Binary PPM, one pixel per cell. The top image row is the largest `y`, so
/// `(0, 0)` sits at the bottom-left pixel.
pub fn emit_image(f: &Field, path: &Path) -> Result<()> {
    let g = f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let idx = color_indices(f);
    let map = colormap();
    let mut bytes = format!("P6\n{nx} {ny}\n255\n").into_bytes();
    bytes.reserve(3 * nx * ny);
    for j in (0..ny).rev() {
        for i in 0..nx {
            bytes.extend_from_slice(&map[idx[g.index(i, j)] as usize]);
        }
    }
    std::fs::write(path, bytes)?;
    std::fs::write(bounds_path(path), format!("min={:.16e}\nmax={:.16e}\n", f.min(), f.max()))?;
    Ok(())
}

/// Pixels of a P6 image written by [`emit_image`], as `(width, height, rgb)`.
pub fn read_ppm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = std::fs::read(path)?;
    let bad = || crate::error::Error::Validation(format!("{} is not a P6 image", path.display()));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P6" || fields[3] != "255" {
        return Err(bad());
    }
    let w: usize = fields[1].parse().map_err(|_| bad())?;
    let h: usize = fields[2].parse().map_err(|_| bad())?;
    let data = bytes.get(pos + 1..).ok_or_else(bad)?.to_vec();
    if data.len() != 3 * w * h {
        return Err(bad());
    }
    Ok((w, h, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn colormap_endpoints_and_monotone_brightness() {
        let m = colormap();
        assert_eq!(m[0], [68, 1, 84]);
        assert_eq!(m[255], [253, 231, 37]);
        let lum = |c: [u8; 3]| 0.2126 * c[0] as f64 + 0.7152 * c[1] as f64 + 0.0722 * c[2] as f64;
        assert!(m.windows(2).all(|w| lum(w[1]) >= lum(w[0]) - 1.0));
    }

    #[test]
    fn constant_field_is_uniform() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ppm");
        emit_image(&Field::constant(Grid::unit_square(8).unwrap(), 2.5), &path).unwrap();
        let (w, h, px) = read_ppm(&path).unwrap();
        assert_eq!((w, h), (8, 8));
        assert!(px.chunks(3).all(|p| p == px[..3].to_vec().as_slice()));
        let bounds = std::fs::read_to_string(bounds_path(&path)).unwrap();
        assert!(bounds.contains("min=2.5") && bounds.contains("max=2.5"));
    }

    #[test]
    fn spike_is_one_bright_pixel_at_its_corner() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.ppm");
        let g = Grid::unit_square(10).unwrap();
        let mut f = Field::zeros(g);
        f.values_mut()[g.index(0, 0)] = 1.0;
        emit_image(&f, &path).unwrap();
        let (w, h, px) = read_ppm(&path).unwrap();
        let bright: Vec<usize> = (0..w * h).filter(|&k| px[3 * k..3 * k + 3] == [253, 231, 37]).collect();
        // Bottom-left pixel: last row, first column.
        assert_eq!(bright, vec![(h - 1) * w]);
    }

    #[test]
    fn images_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::unit_square(12).unwrap();
        let f = Field::from_fn(g, |x, y| (3.0 * x).sin() + y * y);
        let (a, b) = (dir.path().join("a.ppm"), dir.path().join("b.ppm"));
        emit_image(&f, &a).unwrap();
        emit_image(&f, &b).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}
