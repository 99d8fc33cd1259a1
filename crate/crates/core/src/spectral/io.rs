//! MSR matrix files.
//!
//! * CSV: header `j,l,re,im`, one row per entry in row-major order, 1-based
//!   indices, values in shortest round-trip decimal form.
//! * Binary: `N²` little-endian `f64` pairs `(re, im)` in row-major order,
//!   no header; `N` is recovered from the length.
//!
//! Both formats round-trip bit-exactly.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{MsrMatrix, SpectralError};

pub fn encode_csv(m: &DMatrix<Complex64>) -> String {
    let mut out = String::from("j,l,re,im\n");
    for j in 0..m.nrows() {
        for l in 0..m.ncols() {
            let v = m[(j, l)];
            out.push_str(&format!("{},{},{:?},{:?}\n", j + 1, l + 1, v.re, v.im));
        }
    }
    out
}

fn square_side(count: usize) -> Option<usize> {
    let n = (count as f64).sqrt().round() as usize;
    (n > 0 && n * n == count).then_some(n)
}

pub fn decode_csv(text: &str) -> Result<DMatrix<Complex64>, SpectralError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| SpectralError::Format(e.to_string()))?;
    if headers != vec!["j", "l", "re", "im"] {
        return Err(SpectralError::Format(format!(
            "expected header j,l,re,im, got {:?}",
            headers
        )));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| SpectralError::Format(e.to_string()))?;
        if record.len() != 4 {
            return Err(SpectralError::Format(format!(
                "row {}: expected 4 fields",
                line + 2
            )));
        }
        let index = |i: usize| -> Result<usize, SpectralError> {
            record[i]
                .trim()
                .parse::<usize>()
                .map_err(|e| SpectralError::Format(format!("row {}: {e}", line + 2)))
        };
        let value = |i: usize| -> Result<f64, SpectralError> {
            let v: f64 = record[i]
                .trim()
                .parse()
                .map_err(|e| SpectralError::Format(format!("row {}: {e}", line + 2)))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(SpectralError::Format(format!(
                    "row {}: non-finite value",
                    line + 2
                )))
            }
        };
        rows.push((index(0)?, index(1)?, Complex64::new(value(2)?, value(3)?)));
    }
    let n = square_side(rows.len()).ok_or_else(|| {
        SpectralError::Format(format!(
            "{} entries do not form a square matrix",
            rows.len()
        ))
    })?;
    let mut m = DMatrix::zeros(n, n);
    let mut seen = vec![false; n * n];
    for (j, l, v) in rows {
        if j == 0 || l == 0 || j > n || l > n {
            return Err(SpectralError::Format(format!(
                "index ({j}, {l}) out of range 1..={n}"
            )));
        }
        let slot = (j - 1) * n + (l - 1);
        if std::mem::replace(&mut seen[slot], true) {
            return Err(SpectralError::Format(format!("duplicate entry ({j}, {l})")));
        }
        m[(j - 1, l - 1)] = v;
    }
    Ok(m)
}

pub fn encode_binary(m: &DMatrix<Complex64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 * m.len());
    for j in 0..m.nrows() {
        for l in 0..m.ncols() {
            let v = m[(j, l)];
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<DMatrix<Complex64>, SpectralError> {
    if !bytes.len().is_multiple_of(16) {
        return Err(SpectralError::Format(format!(
            "length {} is not a multiple of 16",
            bytes.len()
        )));
    }
    let count = bytes.len() / 16;
    let n = square_side(count).ok_or_else(|| {
        SpectralError::Format(format!("{count} entries do not form a square matrix"))
    })?;
    let mut values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for l in 0..n {
            let re = values.next().expect("length checked");
            let im = values.next().expect("length checked");
            if !re.is_finite() || !im.is_finite() {
                return Err(SpectralError::Format(format!(
                    "non-finite value at ({}, {})",
                    j + 1,
                    l + 1
                )));
            }
            m[(j, l)] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

enum Layout {
    Csv,
    Binary,
}

fn layout(path: &Path) -> Result<Layout, SpectralError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Ok(Layout::Csv),
        Some("bin") => Ok(Layout::Binary),
        other => Err(SpectralError::Extension(other.unwrap_or("").to_string())),
    }
}

/// Writes `k` as CSV or binary depending on the extension of `path`.
pub fn write_msr(path: &Path, k: &MsrMatrix) -> Result<(), SpectralError> {
    match layout(path)? {
        Layout::Csv => fs::write(path, encode_csv(k.entries()))?,
        Layout::Binary => fs::write(path, encode_binary(k.entries()))?,
    }
    Ok(())
}

/// Reads an MSR file; the direction set is the uniform set of matching size.
pub fn read_msr(path: &Path, omega: f64) -> Result<MsrMatrix, SpectralError> {
    let entries = match layout(path)? {
        Layout::Csv => decode_csv(&fs::read_to_string(path)?)?,
        Layout::Binary => decode_binary(&fs::read(path)?)?,
    };
    MsrMatrix::from_entries(entries, omega)
}

/// `index,sigma,sigma_normalized` with 1-based index and `σ / σ_1`.
pub fn singular_values_csv(sigma: &[f64]) -> String {
    let top = sigma.first().copied().unwrap_or(0.0);
    let mut out = String::from("index,sigma,sigma_normalized\n");
    for (i, &s) in sigma.iter().enumerate() {
        let normalized = if top > 0.0 { s / top } else { 0.0 };
        out.push_str(&format!("{},{:?},{:?}\n", i + 1, s, normalized));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(n: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |j, l| {
            Complex64::new((j as f64 + 0.1).sin() * 1e-7, (l as f64).exp() * 3.3)
        })
    }

    #[test]
    fn csv_header_and_order() {
        let text = encode_csv(&sample(2));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "j,l,re,im");
        assert!(lines[1].starts_with("1,1,"));
        assert!(lines[2].starts_with("1,2,"));
        assert!(lines[3].starts_with("2,1,"));
    }

    #[test]
    fn rejects_malformed_csv() {
        assert!(decode_csv("a,b,c,d\n1,1,0,0\n").is_err());
        assert!(decode_csv("j,l,re,im\n1,1,0,0\n1,2,0,0\n").is_err());
        assert!(decode_csv("j,l,re,im\n1,1,0,0\n1,1,0,0\n2,1,0,0\n2,2,0,0\n").is_err());
        assert!(decode_csv("j,l,re,im\n1,1,NaN,0\n").is_err());
        assert!(decode_csv("j,l,re,im\n0,1,0,0\n").is_err());
        assert!(decode_csv("j,l,re,im\n").is_err());
    }

    #[test]
    fn rejects_malformed_binary() {
        assert!(decode_binary(&[0u8; 15]).is_err());
        assert!(decode_binary(&[]).is_err());
        assert!(decode_binary(&[0u8; 32]).is_err());
        let mut nan = vec![0u8; 16];
        nan[..8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_binary(&nan).is_err());
    }

    #[test]
    fn file_extension_selects_layout() {
        let dir = tempfile::tempdir().unwrap();
        let k = MsrMatrix::from_entries(sample(3), 2.0).unwrap();
        for name in ["k.csv", "k.bin"] {
            let p = dir.path().join(name);
            write_msr(&p, &k).unwrap();
            assert_eq!(read_msr(&p, 2.0).unwrap(), k);
        }
        assert!(matches!(
            write_msr(&dir.path().join("k.txt"), &k),
            Err(SpectralError::Extension(_))
        ));
    }

    #[test]
    fn singular_values_table() {
        let text = singular_values_csv(&[2.0, 1.0, 0.0]);
        assert_eq!(
            text,
            "index,sigma,sigma_normalized\n1,2.0,1.0\n2,1.0,0.5\n3,0.0,0.0\n"
        );
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![
            -1e300..1e300f64,
            -1.0..1.0f64,
            Just(0.0),
            Just(-0.0),
            Just(f64::MIN_POSITIVE)
        ]
    }

    proptest! {
        #[test]
        fn both_layouts_round_trip_bit_exactly(n in 1usize..6, values in prop::collection::vec((finite(), finite()), 36)) {
            let m = DMatrix::from_fn(n, n, |j, l| { let (re, im) = values[j * n + l]; Complex64::new(re, im) });
            let from_csv = decode_csv(&encode_csv(&m)).unwrap();
            let from_bin = decode_binary(&encode_binary(&m)).unwrap();
            for (a, (b, c)) in m.iter().zip(from_csv.iter().zip(from_bin.iter())) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
                prop_assert_eq!(a.re.to_bits(), c.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), c.im.to_bits());
            }
        }
    }
}
