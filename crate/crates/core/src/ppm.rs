//! Binary PPM (P6) frame I/O.
//!
//! Pixel origin is the top-left corner; x grows right, y grows down.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::imaging::Frame;

#[derive(Debug, Error)]
pub enum PpmError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a P6 ppm file (magic {0:?})")]
    BadMagic(String),
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("unsupported max value {0} (only 255 supported)")]
    BadMaxval(u32),
    #[error("truncated pixel data: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
}

pub fn write_frame(path: &Path, frame: &Frame) -> Result<(), PpmError> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    write!(f, "P6\n{} {}\n255\n", frame.width(), frame.height())?;
    f.write_all(frame.data())?;
    f.flush()?;
    Ok(())
}

pub fn read_frame(path: &Path) -> Result<Frame, PpmError> {
    let bytes = fs::read(path)?;
    parse(&bytes)
}

fn parse(bytes: &[u8]) -> Result<Frame, PpmError> {
    let mut pos = 0usize;

    // whitespace-separated header tokens, with `#` comments running to EOL
    let next_token = |pos: &mut usize| -> Result<String, PpmError> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(PpmError::BadHeader("unexpected end of header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };

    let magic = next_token(&mut pos)?;
    if magic != "P6" {
        return Err(PpmError::BadMagic(magic));
    }
    let parse_num = |tok: String| -> Result<u32, PpmError> {
        tok.parse()
            .map_err(|_| PpmError::BadHeader(format!("expected integer, got {tok:?}")))
    };
    let width = parse_num(next_token(&mut pos)?)?;
    let height = parse_num(next_token(&mut pos)?)?;
    let maxval = parse_num(next_token(&mut pos)?)?;
    if maxval != 255 {
        return Err(PpmError::BadMaxval(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let expected = width as usize * height as usize * 3;
    let data = bytes
        .get(pos..pos + expected)
        .ok_or(PpmError::Truncated {
            expected,
            got: bytes.len().saturating_sub(pos),
        })?
        .to_vec();
    Frame::new(width as usize, height as usize, data)
        .map_err(|e| PpmError::BadHeader(e.to_string()))
}
