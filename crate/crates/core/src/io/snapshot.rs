use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::{AxialField, Grid2D};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"AXNLS1\0\0";

/// Little-endian: magic, u32 n_r, u32 n_z, f64 dr, dz, r_max, z_half_width,
/// t, then the samples as (re, im) pairs, r index outer.
pub fn write_snapshot(u: &AxialField, mut w: impl Write) -> Result<()> {
    let g = &u.grid;
    let dim = |n: usize| u32::try_from(n).map_err(|_| Error::Shape(format!("dimension {n} exceeds u32")));
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&dim(g.n_r)?.to_le_bytes())?;
    w.write_all(&dim(g.n_z)?.to_le_bytes())?;
    for v in [g.dr, g.dz, g.r_max, g.z_half_width, u.time] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in &u.values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

pub fn read_snapshot(mut r: impl Read) -> Result<AxialField> {
    let magic: [u8; 8] = read_array(&mut r)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Parse { line: 0, msg: "not a snapshot file (bad magic)".into() });
    }
    let n_r = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let n_z = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let dr = read_f64(&mut r)?;
    let dz = read_f64(&mut r)?;
    let r_max = read_f64(&mut r)?;
    let z_half_width = read_f64(&mut r)?;
    let t = read_f64(&mut r)?;
    let grid = Grid2D::new(n_r, n_z, r_max, z_half_width)?;
    let tol = 1e-12 * (grid.dr + grid.dz);
    if (grid.dr - dr).abs() > tol || (grid.dz - dz).abs() > tol {
        return Err(Error::Inconsistency(format!(
            "snapshot spacings ({dr}, {dz}) disagree with its extents ({}, {})",
            grid.dr, grid.dz
        )));
    }
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = read_f64(&mut r)?;
        let im = read_f64(&mut r)?;
        values.push(C64::new(re, im));
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Parse { line: 0, msg: "trailing bytes after snapshot samples".into() });
    }
    AxialField::from_values(grid, values, t)
}

pub fn write_snapshot_file(u: &AxialField, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshot(u, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_snapshot_file(path: &Path) -> Result<AxialField> {
    read_snapshot(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AxialField {
        let g = Grid2D::new(7, 5, 3.0, 1.0).unwrap();
        let mut u = AxialField::from_fn(g, |r, z| C64::new(r - z, r * z + 0.1));
        u.time = 0.625;
        u
    }

    #[test]
    fn layout_and_round_trip() {
        let u = sample();
        let mut buf = Vec::new();
        write_snapshot(&u, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 8 + 40 + 16 * 35);
        assert_eq!(&buf[..8], b"AXNLS1\0\0");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 7);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), 0.5);
        // second sample is (i_r, i_z) = (0, 1)
        let off = 56 + 16;
        assert_eq!(f64::from_le_bytes(buf[off..off + 8].try_into().unwrap()), u.at(0, 1).re);
        let v = read_snapshot(&buf[..]).unwrap();
        assert_eq!(v.values, u.values);
        assert_eq!(v.time, u.time);
        assert!(v.grid.same_shape(&u.grid));
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let mut buf = Vec::new();
        write_snapshot(&sample(), &mut buf).unwrap();
        assert!(read_snapshot(&buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_snapshot(&extra[..]).is_err());
        let mut magic = buf.clone();
        magic[0] = b'X';
        assert!(matches!(read_snapshot(&magic[..]), Err(Error::Parse { .. })));
        let mut spacing = buf;
        spacing[16..24].copy_from_slice(&0.6f64.to_le_bytes());
        assert!(matches!(read_snapshot(&spacing[..]), Err(Error::Inconsistency(_))));
    }
}
