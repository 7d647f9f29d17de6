//! Codes files: the magic `GMRACOD1`, `n: u64`, then per point the scale
//! (`i32` bits stored as `u32`), the cell index `u64`, the coefficient count
//! `u16` and the coefficients as `f64`, all little-endian.

use gmra::Encoding;

use crate::modelfile::{Reader, Writer};
use crate::CliError;

pub const CODES_MAGIC: &[u8; 8] = b"GMRACOD1";
/// Bytes before the first code.
pub const CODES_HEADER: usize = 16;

pub fn codes_to_bytes(codes: &[Encoding]) -> Result<Vec<u8>, CliError> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(CODES_MAGIC);
    w.usize(codes.len());
    for c in codes {
        let m = u16::try_from(c.coefficients.len()).map_err(|_| {
            CliError::Usage(format!(
                "{} coefficients do not fit the codes format",
                c.coefficients.len()
            ))
        })?;
        w.u32(c.scale as u32);
        w.usize(c.index);
        w.u16(m);
        w.f64s(&c.coefficients);
    }
    Ok(w.buf)
}

pub fn codes_from_bytes(bytes: &[u8]) -> Result<Vec<Encoding>, CliError> {
    let mut r = Reader::new(bytes);
    if r.bytes(8).map_err(|_| CliError::Data("not a codes file".into()))? != CODES_MAGIC {
        return Err(CliError::Data("not a codes file (bad magic)".into()));
    }
    let n = r.count(14)?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let scale = r.u32()? as i32;
        let index = r.usize()?;
        let m = r.u16()? as usize;
        let coefficients = r.f64s(m)?;
        out.push(Encoding {
            scale,
            index,
            coefficients,
        });
    }
    if r.remaining() != 0 {
        return Err(CliError::Data(format!(
            "{} trailing bytes after the codes",
            r.remaining()
        )));
    }
    Ok(out)
}
