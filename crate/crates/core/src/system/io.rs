//! Self-describing little-endian binary dump of a [`Scenario`].
//!
//! Layout: the 8-byte magic `IRSSCN\0\x01`, then records until end of file.
//! Each record is
//!
//! ```text
//! u32 name_len, name (UTF-8)
//! u8  kind            0 = text, 1 = f64 scalar, 2 = matrix, 3 = tensor
//! u32 ndims, u64 × ndims
//! payload
//! ```
//!
//! Text payloads are raw UTF-8 bytes (the single dim is the byte count).
//! Matrices and tensors are written row-major (last index fastest) as
//! `(re, im)` pairs of IEEE-754 doubles.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::channels::ChannelPair;
use super::scenario::{Links, Scenario};
use super::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::tensor::SignalTensor3;

pub const MAGIC: &[u8; 8] = b"IRSSCN\0\x01";

/// One decoded record payload.
#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Text(String),
    Scalar(f64),
    Matrix(ComplexMatrix),
    Tensor(SignalTensor3),
}

fn write_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Parse(format!("length {v} exceeds u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_header<W: Write>(w: &mut W, name: &str, kind: u8, dims: &[usize]) -> Result<()> {
    write_u32(w, name.len())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&[kind])?;
    write_u32(w, dims.len())?;
    for &d in dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    Ok(())
}

fn write_complex<W: Write>(w: &mut W, z: Complex64) -> Result<()> {
    w.write_all(&z.re.to_le_bytes())?;
    w.write_all(&z.im.to_le_bytes())?;
    Ok(())
}

pub fn write_record<W: Write>(w: &mut W, name: &str, record: &Record) -> Result<()> {
    match record {
        Record::Text(s) => {
            write_header(w, name, 0, &[s.len()])?;
            w.write_all(s.as_bytes())?;
        }
        Record::Scalar(x) => {
            write_header(w, name, 1, &[])?;
            w.write_all(&x.to_le_bytes())?;
        }
        Record::Matrix(m) => {
            write_header(w, name, 2, &[m.nrows(), m.ncols()])?;
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    write_complex(w, m[(i, j)])?;
                }
            }
        }
        Record::Tensor(t) => {
            let (l, tt, k) = t.dims();
            write_header(w, name, 3, &[l, tt, k])?;
            for a in 0..l {
                for b in 0..tt {
                    for c in 0..k {
                        write_complex(w, t.get(a, b, c))?;
                    }
                }
            }
        }
    }
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_complex<R: Read>(r: &mut R) -> Result<Complex64> {
    Ok(Complex64::new(read_f64(r)?, read_f64(r)?))
}

/// Reads the next record, or `None` at a clean end of input.
pub fn read_record<R: Read>(r: &mut R) -> Result<Option<(String, Record)>> {
    let mut len = [0u8; 4];
    match r.read(&mut len[..1])? {
        0 => return Ok(None),
        _ => r.read_exact(&mut len[1..])?,
    }
    let name_len = u32::from_le_bytes(len) as usize;
    let name = String::from_utf8(read_exact(r, name_len)?)
        .map_err(|e| Error::Parse(format!("record name: {e}")))?;
    let kind = read_exact(r, 1)?[0];
    let ndims = read_u32(r)?;
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        dims.push(u64::from_le_bytes(b) as usize);
    }
    let bad_dims = || Error::Parse(format!("record {name}: kind {kind} with dims {dims:?}"));
    let record = match (kind, dims.as_slice()) {
        (0, &[n]) => Record::Text(
            String::from_utf8(read_exact(r, n)?)
                .map_err(|e| Error::Parse(format!("record {name}: {e}")))?,
        ),
        (1, &[]) => Record::Scalar(read_f64(r)?),
        (2, &[rows, cols]) => {
            let mut m = ComplexMatrix::zeros(rows, cols);
            for i in 0..rows {
                for j in 0..cols {
                    m[(i, j)] = read_complex(r)?;
                }
            }
            Record::Matrix(m)
        }
        (3, &[l, t, k]) => {
            let mut y = SignalTensor3::zeros((l, t, k));
            for a in 0..l {
                for b in 0..t {
                    for c in 0..k {
                        y.set(a, b, c, read_complex(r)?);
                    }
                }
            }
            Record::Tensor(y)
        }
        _ => return Err(bad_dims()),
    };
    Ok(Some((name, record)))
}

/// Writes every field of `scenario` except the geometric parameterization.
pub fn export_scenario<W: Write>(scenario: &Scenario, w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    let config = toml::to_string(&scenario.config)
        .map_err(|e| Error::Parse(format!("config: {e}")))?;
    write_record(w, "config", &Record::Text(config))?;
    write_record(w, "sigma2", &Record::Scalar(scenario.sigma2))?;
    let matrices = [
        ("s_ideal", &scenario.s_ideal),
        ("s_actual", &scenario.s_actual),
        ("x", &scenario.x),
        ("h", &scenario.truth.h),
        ("g", &scenario.truth.g),
    ];
    for (name, m) in matrices {
        write_record(w, name, &Record::Matrix(m.clone()))?;
    }
    for (i, m) in scenario.links.bs_irs.iter().enumerate() {
        write_record(w, &format!("bs_irs.{i}"), &Record::Matrix(m.clone()))?;
    }
    for (i, m) in scenario.links.irs_ut.iter().enumerate() {
        write_record(w, &format!("irs_ut.{i}"), &Record::Matrix(m.clone()))?;
    }
    write_record(w, "noiseless", &Record::Tensor(scenario.noiseless.clone()))?;
    write_record(w, "noise", &Record::Tensor(scenario.noise.clone()))?;
    Ok(())
}

/// Inverse of [`export_scenario`]. The noisy tensor is rebuilt as
/// noiseless + noise.
pub fn import_scenario<R: Read>(r: &mut R) -> Result<Scenario> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse("not a scenario dump".into()));
    }
    let mut config = None;
    let mut sigma2 = None;
    let mut mats = std::collections::HashMap::new();
    let mut tensors = std::collections::HashMap::new();
    while let Some((name, rec)) = read_record(r)? {
        match rec {
            Record::Text(s) if name == "config" => {
                let cfg: SystemConfig =
                    toml::from_str(&s).map_err(|e| Error::Parse(format!("config: {e}")))?;
                config = Some(cfg);
            }
            Record::Scalar(x) if name == "sigma2" => sigma2 = Some(x),
            Record::Matrix(m) => {
                mats.insert(name, m);
            }
            Record::Tensor(t) => {
                tensors.insert(name, t);
            }
            _ => return Err(Error::Parse(format!("unexpected record {name}"))),
        }
    }
    let missing = |what: &str| Error::Parse(format!("missing record {what}"));
    let mut take = |name: &str| mats.remove(name).ok_or_else(|| missing(name));
    let s_ideal = take("s_ideal")?;
    let s_actual = take("s_actual")?;
    let x = take("x")?;
    let h = take("h")?;
    let g = take("g")?;
    let collect = |mats: &mut std::collections::HashMap<String, ComplexMatrix>, prefix: &str| {
        let mut out = Vec::new();
        while let Some(m) = mats.remove(&format!("{prefix}.{}", out.len())) {
            out.push(m);
        }
        out
    };
    let bs_irs = collect(&mut mats, "bs_irs");
    let irs_ut = collect(&mut mats, "irs_ut");
    let noiseless = tensors.remove("noiseless").ok_or_else(|| missing("noiseless"))?;
    let noise = tensors.remove("noise").ok_or_else(|| missing("noise"))?;
    let noisy = noiseless.add(&noise)?;
    Ok(Scenario {
        config: config.ok_or_else(|| missing("config"))?,
        truth: ChannelPair::new(h, g),
        links: Links { bs_irs, irs_ut },
        s_ideal,
        s_actual,
        x,
        noiseless,
        noise,
        noisy,
        sigma2: sigma2.ok_or_else(|| missing("sigma2"))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::build_scenario;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bitwise() {
        let cfg = SystemConfig::new(3, 2, 4, 4, 3).with_snr(7.0);
        let sc = build_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut buf = Vec::new();
        export_scenario(&sc, &mut buf).unwrap();
        let back = import_scenario(&mut buf.as_slice()).unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn matrix_payload_is_row_major() {
        let m = ComplexMatrix::from_row_slice(
            2,
            2,
            &[1.0, 2.0, 3.0, 4.0].map(|x| Complex64::new(x, -x)),
        );
        let mut buf = Vec::new();
        write_record(&mut buf, "m", &Record::Matrix(m)).unwrap();
        // 4 + 1 name, 1 kind, 4 + 16 dims
        let payload = &buf[26..];
        let first: Vec<f64> = payload
            .chunks(8)
            .take(4)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(first, vec![1.0, -1.0, 2.0, -2.0]);
    }

    #[test]
    fn golden_header_bytes() {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        write_record(&mut buf, "sigma2", &Record::Scalar(0.5)).unwrap();
        let expected: &[u8] = &[
            b'I', b'R', b'S', b'S', b'C', b'N', 0, 1, // magic
            6, 0, 0, 0, b's', b'i', b'g', b'm', b'a', b'2', // name
            1, // scalar
            0, 0, 0, 0, // no dims
            0, 0, 0, 0, 0, 0, 0xe0, 0x3f, // 0.5
        ];
        assert_eq!(buf, expected);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(import_scenario(&mut &b"NOTMAGIC"[..]).is_err());
        let cfg = SystemConfig::new(2, 2, 2, 2, 2);
        let sc = build_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let mut buf = Vec::new();
        export_scenario(&sc, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(import_scenario(&mut buf.as_slice()).is_err());
    }
}
