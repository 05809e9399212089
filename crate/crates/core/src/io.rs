//! Matrix and table export: CSV (row-major, 17 significant digits) and
//! the compact BGSP binary container.
//!
//! BGSP layout (little endian):
//!   bytes  0..4   magic "BGSP"
//!   bytes  4..8   format version (u32, currently 1)
//!   bytes  8..12  matrix dimension n (u32)
//!   bytes 12..16  basis-kind tag (u32: 0 torus, 1 radial channel,
//!                 2 cartesian box, 0xFFFF_FFFF unspecified)
//!   then n*n f64 entries, row major.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::basis::BasisKind;
use crate::error::{Error, Result};

pub const BGSP_MAGIC: &[u8; 4] = b"BGSP";
pub const BGSP_VERSION: u32 = 1;

pub fn kind_tag(kind: Option<BasisKind>) -> u32 {
    match kind {
        Some(BasisKind::PlaneWaveTorus) => 0,
        Some(BasisKind::RadialChannel) => 1,
        Some(BasisKind::CartesianBox) => 2,
        None => u32::MAX,
    }
}

/// All floating-point text output goes through this: 17 significant
/// digits round-trip f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

pub fn write_matrix_csv(path: &Path, mat: &DMatrix<f64>) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    for i in 0..mat.nrows() {
        let row: Vec<String> = (0..mat.ncols()).map(|j| fmt_f64(mat[(i, j)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Named columns of equal length.
pub fn write_table_csv(path: &Path, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
    if columns.len() != headers.len() {
        return Err(Error::Parse("header/column count mismatch".into()));
    }
    let rows = columns.first().map(|c| c.len()).unwrap_or(0);
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::Parse("ragged columns".into()));
    }
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "{}", headers.join(","))?;
    for i in 0..rows {
        let row: Vec<String> = columns.iter().map(|c| fmt_f64(c[i])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_bgsp(path: &Path, mat: &DMatrix<f64>, kind: Option<BasisKind>) -> Result<()> {
    if mat.nrows() != mat.ncols() {
        return Err(Error::Parse("BGSP container stores square matrices".into()));
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(BGSP_MAGIC)?;
    out.write_all(&BGSP_VERSION.to_le_bytes())?;
    out.write_all(&(mat.nrows() as u32).to_le_bytes())?;
    out.write_all(&kind_tag(kind).to_le_bytes())?;
    for i in 0..mat.nrows() {
        for j in 0..mat.ncols() {
            out.write_all(&mat[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_bgsp(path: &Path) -> Result<(DMatrix<f64>, u32)> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut header = [0u8; 16];
    file.read_exact(&mut header)?;
    if &header[0..4] != BGSP_MAGIC {
        return Err(Error::Parse("bad BGSP magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != BGSP_VERSION {
        return Err(Error::Parse(format!("unsupported BGSP version {}", version)));
    }
    let n = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let tag = u32::from_le_bytes(header[12..16].try_into().unwrap());
    let mut buf = vec![0u8; n * n * 8];
    file.read_exact(&mut buf)?;
    let mut mat = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let off = (i * n + j) * 8;
            mat[(i, j)] = f64::from_le_bytes(buf[off..off + 8].try_into().unwrap());
        }
    }
    Ok((mat, tag))
}

/// Two-column (r, V) CSV for tabulated potentials; a leading non-numeric
/// header row is allowed.
pub fn read_potential_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut rs = Vec::new();
    let mut vs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let a = parts.next().unwrap_or("").trim();
        let b = parts.next().unwrap_or("").trim();
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(r), Ok(v)) => {
                rs.push(r);
                vs.push(v);
            }
            _ if lineno == 0 => continue, // header
            _ => return Err(Error::Parse(format!("bad CSV row {}: {:?}", lineno + 1, line))),
        }
    }
    if rs.len() < 4 {
        return Err(Error::Parse("potential CSV needs at least 4 rows".into()));
    }
    Ok((rs, vs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bgsp_header_and_roundtrip() {
        let dir = std::env::temp_dir().join("bgsp_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("k.bgsp");
        let mat = DMatrix::from_row_slice(2, 2, &[1.5, -2.25, -2.25, std::f64::consts::PI]);
        write_bgsp(&path, &mat, Some(BasisKind::RadialChannel)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"BGSP");
        assert_eq!(bytes.len(), 16 + 4 * 8);
        let (back, tag) = read_bgsp(&path).unwrap();
        assert_eq!(tag, 1);
        assert_eq!(back, mat);
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for &v in &[std::f64::consts::PI, 1.0 / 3.0, 2.3e-17, -4.56e300, 0.1 + 0.2] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v, "round trip failed for {}", s);
        }
    }

    proptest! {
        #[test]
        fn bgsp_roundtrip_preserves_bits(vals in proptest::collection::vec(-1e6f64..1e6, 9)) {
            let dir = std::env::temp_dir().join("bgsp_io_prop");
            std::fs::create_dir_all(&dir).unwrap();
            let path = dir.join("m.bgsp");
            let mat = DMatrix::from_row_slice(3, 3, &vals);
            write_bgsp(&path, &mat, None).unwrap();
            let (back, tag) = read_bgsp(&path).unwrap();
            prop_assert_eq!(tag, u32::MAX);
            prop_assert_eq!(back, mat);
        }
    }
}
