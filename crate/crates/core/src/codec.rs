//! Little-endian helpers for the binary model files.
//!
//! Every model file opens with an ASCII magic line (`OPCLASS-NN1`,
//! `OPCLASS-RD1`, `OPCLASS-CL1`), followed by tagged, length-prefixed
//! payloads.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn write_magic<W: Write>(out: &mut W, magic: &str) -> Result<()> {
    out.write_all(magic.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_magic<R: Read>(input: &mut R, magic: &str) -> Result<()> {
    let mut buf = vec![0u8; magic.len() + 1];
    input
        .read_exact(&mut buf)
        .map_err(|_| Error::ModelFile(format!("missing `{magic}` header")))?;
    if &buf[..magic.len()] != magic.as_bytes() || buf[magic.len()] != b'\n' {
        return Err(Error::ModelFile(format!(
            "expected `{magic}` header, found `{}`",
            String::from_utf8_lossy(&buf).trim_end()
        )));
    }
    Ok(())
}

pub fn write_u64<W: Write>(out: &mut W, v: u64) -> Result<()> {
    out.write_u64::<LittleEndian>(v)?;
    Ok(())
}

pub fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    input.read_u64::<LittleEndian>().map_err(truncated)
}

pub fn read_len<R: Read>(input: &mut R) -> Result<usize> {
    let v = read_u64(input)?;
    usize::try_from(v).map_err(|_| Error::ModelFile(format!("length {v} out of range")))
}

pub fn write_f64s<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    write_u64(out, values.len() as u64)?;
    for &v in values {
        out.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

pub fn read_f64s<R: Read>(input: &mut R) -> Result<Vec<f64>> {
    let n = read_len(input)?;
    let mut values = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        values.push(input.read_f64::<LittleEndian>().map_err(truncated)?);
    }
    Ok(values)
}

pub fn write_usizes<W: Write>(out: &mut W, values: &[usize]) -> Result<()> {
    write_u64(out, values.len() as u64)?;
    for &v in values {
        write_u64(out, v as u64)?;
    }
    Ok(())
}

pub fn read_usizes<R: Read>(input: &mut R) -> Result<Vec<usize>> {
    let n = read_len(input)?;
    (0..n).map(|_| read_len(input)).collect()
}

pub fn write_str<W: Write>(out: &mut W, s: &str) -> Result<()> {
    write_u64(out, s.len() as u64)?;
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_str<R: Read>(input: &mut R) -> Result<String> {
    let n = read_len(input)?;
    let mut buf = vec![0u8; n];
    input.read_exact(&mut buf).map_err(truncated)?;
    String::from_utf8(buf).map_err(|_| Error::ModelFile("string is not UTF-8".into()))
}

/// A JSON document stored as a length-prefixed string.
pub fn write_json<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    let text = serde_json::to_string(value).map_err(|e| Error::ModelFile(e.to_string()))?;
    write_str(out, &text)
}

pub fn read_json<R: Read, T: DeserializeOwned>(input: &mut R) -> Result<T> {
    let text = read_str(input)?;
    serde_json::from_str(&text).map_err(|e| Error::ModelFile(e.to_string()))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::ModelFile("truncated file".into())
    } else {
        Error::Io(e)
    }
}
