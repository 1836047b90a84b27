//! Little-endian binary container for operators and bases.
//!
//! Layout (all integers `u64`, all reals `f64`, little-endian):
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `PSDMAT\0\x01` |
//! | 1 | payload: 0 operator, 1 basis |
//! | 1 | spectrum kind tag (operator, 255 when unknown) or provenance tag (basis) |
//! | 6 | reserved, zero |
//! | 8 | rows |
//! | 8 | cols |
//! | 8 | seed |
//! | 8 | eps, NaN when absent |
//! | 8 | value count |
//! | 8 x count | values (eigenvalues for an operator, empty for a basis) |
//! | 8 x rows x cols | matrix, row-major (eigenvectors or basis columns) |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::model::{PsdOperator, SpectrumKind};
use crate::subspaces::{OrthonormalBasis, Provenance};

pub const MAGIC: [u8; 8] = *b"PSDMAT\0\x01";
const PAYLOAD_OPERATOR: u8 = 0;
const PAYLOAD_BASIS: u8 = 1;
const UNKNOWN_KIND: u8 = 255;

/// Either payload read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum MatFile {
    Operator(PsdOperator),
    Basis(OrthonormalBasis),
}

struct Header {
    payload: u8,
    sub_tag: u8,
    rows: usize,
    cols: usize,
    seed: u64,
    eps: Option<f64>,
    values: Vec<f64>,
}

fn put_u64(w: &mut impl Write, x: u64) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn put_f64(w: &mut impl Write, x: f64) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(f64::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("file is truncated".into())
    } else {
        e.into()
    }
}

fn write_all(w: &mut impl Write, h: &Header, m: &DenseMatrix) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&[h.payload, h.sub_tag, 0, 0, 0, 0, 0, 0])?;
    put_u64(w, h.rows as u64)?;
    put_u64(w, h.cols as u64)?;
    put_u64(w, h.seed)?;
    put_f64(w, h.eps.unwrap_or(f64::NAN))?;
    put_u64(w, h.values.len() as u64)?;
    for v in &h.values {
        put_f64(w, *v)?;
    }
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            put_f64(w, m[(i, j)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Serialize an operator (eigenvalues plus eigenvectors).
pub fn write_operator(w: &mut impl Write, a: &PsdOperator) -> Result<()> {
    let n = a.dim();
    let h = Header {
        payload: PAYLOAD_OPERATOR,
        sub_tag: a.kind().map_or(UNKNOWN_KIND, SpectrumKind::tag),
        rows: n,
        cols: n,
        seed: a.seed(),
        eps: None,
        values: a.eigenvalues().to_vec(),
    };
    write_all(w, &h, a.eigenvectors())
}

/// Serialize a basis with its provenance, seed and `eps`.
pub fn write_basis(w: &mut impl Write, q: &OrthonormalBasis) -> Result<()> {
    let h = Header {
        payload: PAYLOAD_BASIS,
        sub_tag: q.provenance.tag(),
        rows: q.n(),
        cols: q.k(),
        seed: q.seed,
        eps: q.eps,
        values: Vec::new(),
    };
    write_all(w, &h, q.matrix())
}

/// Parse either payload; the stored matrix is re-validated on the way in.
pub fn read(r: &mut impl Read) -> Result<MatFile> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut tags = [0u8; 8];
    r.read_exact(&mut tags).map_err(truncated)?;
    let rows = usize::try_from(get_u64(r)?).map_err(|_| Error::Format("rows overflow".into()))?;
    let cols = usize::try_from(get_u64(r)?).map_err(|_| Error::Format("cols overflow".into()))?;
    let seed = get_u64(r)?;
    let eps = get_f64(r)?;
    let count = get_u64(r)? as usize;
    if count > rows.max(cols) || rows.checked_mul(cols).is_none() {
        return Err(Error::Format("implausible sizes in header".into()));
    }
    let values = (0..count).map(|_| get_f64(r)).collect::<Result<Vec<_>>>()?;
    let mut m = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = get_f64(r)?;
        }
    }
    let h = Header {
        payload: tags[0],
        sub_tag: tags[1],
        rows,
        cols,
        seed,
        eps: (!eps.is_nan()).then_some(eps),
        values,
    };
    match h.payload {
        PAYLOAD_OPERATOR => {
            if h.rows != h.cols || h.values.len() != h.rows {
                return Err(Error::Format(
                    "operator must be square with n values".into(),
                ));
            }
            let kind = match h.sub_tag {
                UNKNOWN_KIND => None,
                t => Some(
                    SpectrumKind::from_tag(t)
                        .ok_or_else(|| Error::Format(format!("unknown spectrum tag {t}")))?,
                ),
            };
            Ok(MatFile::Operator(PsdOperator::from_parts(
                m, h.values, h.seed, kind,
            )?))
        }
        PAYLOAD_BASIS => {
            let provenance = Provenance::from_tag(h.sub_tag)
                .ok_or_else(|| Error::Format(format!("unknown provenance tag {}", h.sub_tag)))?;
            let mut q = OrthonormalBasis::external(m)?;
            q.provenance = provenance;
            q.seed = h.seed;
            q.eps = h.eps;
            Ok(MatFile::Basis(q))
        }
        p => Err(Error::Format(format!("unknown payload tag {p}"))),
    }
}

pub fn save_operator(path: impl AsRef<Path>, a: &PsdOperator) -> Result<()> {
    write_operator(&mut BufWriter::new(File::create(path)?), a)
}

pub fn save_basis(path: impl AsRef<Path>, q: &OrthonormalBasis) -> Result<()> {
    write_basis(&mut BufWriter::new(File::create(path)?), q)
}

pub fn load(path: impl AsRef<Path>) -> Result<MatFile> {
    read(&mut BufReader::new(File::open(path)?))
}

pub fn load_operator(path: impl AsRef<Path>) -> Result<PsdOperator> {
    match load(path)? {
        MatFile::Operator(a) => Ok(a),
        MatFile::Basis(_) => Err(Error::Format("expected an operator, found a basis".into())),
    }
}

pub fn load_basis(path: impl AsRef<Path>) -> Result<OrthonormalBasis> {
    match load(path)? {
        MatFile::Basis(q) => Ok(q),
        MatFile::Operator(_) => Err(Error::Format("expected a basis, found an operator".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_psd, SpectrumSpec};
    use crate::subspaces;

    #[test]
    fn operator_round_trip_is_bit_exact() {
        let a = make_psd(&SpectrumSpec::exponential(12, 1.0, 1e-6), 5).unwrap();
        let mut buf = Vec::new();
        write_operator(&mut buf, &a).unwrap();
        assert_eq!(&buf[..8], &MAGIC);
        assert_eq!(buf.len(), 56 + 8 * 12 + 8 * 144);
        match read(&mut buf.as_slice()).unwrap() {
            MatFile::Operator(b) => assert_eq!(a, b),
            other => panic!("wrong payload {other:?}"),
        }
    }

    #[test]
    fn basis_round_trip_keeps_metadata() {
        let a = make_psd(&SpectrumSpec::linear(10, 1.0, 0.1), 2).unwrap();
        let q = subspaces::epsilon_aligned_basis(&a, 3, 0.2, 9).unwrap();
        let mut buf = Vec::new();
        write_basis(&mut buf, &q).unwrap();
        match read(&mut buf.as_slice()).unwrap() {
            MatFile::Basis(r) => {
                assert_eq!(r.matrix(), q.matrix());
                assert_eq!(r.provenance, q.provenance);
                assert_eq!(r.seed, 9);
                assert_eq!(r.eps, Some(0.2));
            }
            other => panic!("wrong payload {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let a = make_psd(&SpectrumSpec::linear(4, 1.0, 0.1), 2).unwrap();
        let mut buf = Vec::new();
        write_operator(&mut buf, &a).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read(&mut bad.as_slice()), Err(Error::Format(_))));
        let cut = &buf[..buf.len() - 3];
        assert!(matches!(read(&mut &cut[..]), Err(Error::Format(_))));
    }
}
