//! Minimal reader/writer for the NPY array format (little-endian `f4`/`f8`).

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil;

const MAGIC: &[u8] = b"\x93NUMPY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn descr(self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::F64 => "<f8",
        }
    }
}

/// A dense array widened to `f64`, stored row-major (C order).
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    /// Element type found on disk.
    pub dtype: Dtype,
}

struct Header {
    dtype: Dtype,
    fortran: bool,
    shape: Vec<usize>,
}

pub fn parse(bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::Npy("bad magic string".into()));
    }
    let major = bytes[6];
    let (header_len, start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(Error::Npy("truncated header".into()));
            }
            (
                u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
                12,
            )
        }
        v => return Err(Error::Npy(format!("unsupported format version {v}"))),
    };
    let end = start + header_len;
    if bytes.len() < end {
        return Err(Error::Npy("truncated header".into()));
    }
    let text = std::str::from_utf8(&bytes[start..end])
        .map_err(|_| Error::Npy("header is not valid text".into()))?;
    let header = parse_header(text)?;

    let count: usize = header.shape.iter().product();
    let expected = count * header.dtype.size();
    let payload = &bytes[end..];
    if payload.len() != expected {
        return Err(Error::Npy(format!(
            "payload length mismatch: expected {expected} bytes, found {}",
            payload.len()
        )));
    }
    let flat: Vec<f64> = match header.dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
    };
    let data = if header.fortran {
        fortran_to_c(&flat, &header.shape)
    } else {
        flat
    };
    Ok(NpyArray {
        shape: header.shape,
        data,
        dtype: header.dtype,
    })
}

fn parse_header(text: &str) -> Result<Header> {
    let bad = |m: &str| Error::Npy(format!("malformed header ({m}): {}", text.trim()));
    let descr = dict_value(text, "descr").ok_or_else(|| bad("no descr"))?;
    let descr = descr.trim().trim_matches(|c| c == '\'' || c == '"');
    let dtype = match descr {
        "<f4" => Dtype::F32,
        "<f8" => Dtype::F64,
        other => {
            return Err(Error::Npy(format!(
                "unsupported dtype {other:?}; expected <f4 or <f8"
            )))
        }
    };
    let fortran = match dict_value(text, "fortran_order").map(str::trim) {
        Some("True") => true,
        Some("False") => false,
        _ => return Err(bad("fortran_order")),
    };
    let shape_src = dict_value(text, "shape").ok_or_else(|| bad("no shape"))?;
    let inner = shape_src
        .trim()
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| bad("shape is not a tuple"))?;
    let shape = inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim_end_matches('L')
                .parse::<usize>()
                .map_err(|_| bad("shape entry"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Header {
        dtype,
        fortran,
        shape,
    })
}

/// Raw text of the value stored under `key` in a Python dict literal.
fn dict_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    let pos = text
        .find(&format!("'{key}'"))
        .or_else(|| text.find(&format!("\"{key}\"")))?;
    let rest = &text[pos + key.len() + 2..];
    let rest = rest.trim_start().strip_prefix(':')?.trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')')? + 1
    } else {
        rest.find([',', '}']).unwrap_or(rest.len())
    };
    Some(&rest[..end])
}

fn fortran_to_c(flat: &[f64], shape: &[usize]) -> Vec<f64> {
    let nd = shape.len();
    let mut out = vec![0.0; flat.len()];
    let mut idx = vec![0usize; nd];
    for slot in out.iter_mut() {
        let mut f_pos = 0;
        let mut stride = 1;
        for k in 0..nd {
            f_pos += idx[k] * stride;
            stride *= shape[k];
        }
        *slot = flat[f_pos];
        for k in (0..nd).rev() {
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

/// Serialises a C-ordered array as NPY v1.0 in the requested element type.
pub fn encode(shape: &[usize], data: &[f64], dtype: Dtype) -> Result<Vec<u8>> {
    if shape.iter().product::<usize>() != data.len() {
        return Err(Error::dims(format!(
            "shape {shape:?} does not match {} values",
            data.len()
        )));
    }
    let dims = match shape.len() {
        1 => format!("({},)", shape[0]),
        _ => format!(
            "({})",
            shape
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {dims}, }}",
        dtype.descr()
    );
    // pad so the payload starts on a 64-byte boundary; header ends with '\n'
    let unpadded = MAGIC.len() + 4 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');
    let header_len =
        u16::try_from(header.len()).map_err(|_| Error::Npy("header too long".into()))?;

    let mut out = Vec::with_capacity(MAGIC.len() + 4 + header.len() + data.len() * dtype.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match dtype {
        Dtype::F32 => data
            .iter()
            .for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
        Dtype::F64 => data
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<NpyArray> {
    let bytes = std::fs::read(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&bytes).map_err(|e| match e {
        Error::Npy(m) => Error::Npy(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write(path: &Path, shape: &[usize], data: &[f64], dtype: Dtype) -> Result<()> {
    fsutil::atomic_write(path, &encode(shape, data, dtype)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_both_precisions() {
        let data: Vec<f64> = (0..12).map(|i| i as f64 * 0.25 - 1.0).collect();
        for dtype in [Dtype::F32, Dtype::F64] {
            let bytes = encode(&[3, 4], &data, dtype).unwrap();
            let header_end = 10 + u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
            assert_eq!(header_end % 64, 0);
            let arr = parse(&bytes).unwrap();
            assert_eq!(arr.shape, vec![3, 4]);
            assert_eq!(arr.data, data);
            assert_eq!(arr.dtype, dtype);
        }
    }

    #[test]
    fn fortran_order_is_reordered() {
        // column-major payload of [[1,2,3],[4,5,6]]
        let mut bytes = encode(&[2, 3], &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0], Dtype::F64).unwrap();
        let text = String::from_utf8(bytes[10..64].to_vec()).unwrap();
        let patched = text.replace("'fortran_order': False", "'fortran_order': True ");
        bytes[10..64].copy_from_slice(patched.as_bytes());
        let arr = parse(&bytes).unwrap();
        assert_eq!(arr.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn fortran_reorder_three_dims() {
        let shape = [2, 3, 4];
        let c: Vec<f64> = (0..24).map(|i| i as f64).collect();
        let mut f = vec![0.0; 24];
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    f[i + 2 * j + 6 * k] = c[i * 12 + j * 4 + k];
                }
            }
        }
        assert_eq!(fortran_to_c(&f, &shape), c);
    }

    #[test]
    fn truncated_payload_reports_lengths() {
        let bytes = encode(&[3, 4], &[0.0; 12], Dtype::F64).unwrap();
        let err = parse(&bytes[..bytes.len() - 5]).unwrap_err().to_string();
        assert!(err.contains("expected 96 bytes"), "{err}");
        assert!(err.contains("found 91"), "{err}");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(parse(b"not an npy file at all").is_err());
        let bytes = encode(&[2], &[1.0, 2.0], Dtype::F64).unwrap();
        let mut big_endian = bytes.clone();
        let pos = big_endian.windows(3).position(|w| w == b"<f8").unwrap();
        big_endian[pos] = b'>';
        assert!(parse(&big_endian)
            .unwrap_err()
            .to_string()
            .contains("unsupported dtype"));
        let mut ints = bytes;
        ints[pos + 1] = b'i';
        assert!(parse(&ints).is_err());
    }
}
