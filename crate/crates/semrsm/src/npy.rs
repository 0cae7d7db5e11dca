//! Reader and writer for the subset of NPY used for interchange: format
//! version 1.0 (2.0 is also read), little-endian `<f4` / `<f8`, C order.
//! `f4` data is promoted to `f64` on read.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F4,
    F8,
}

impl Dtype {
    fn descr(self) -> &'static str {
        match self {
            Dtype::F4 => "<f4",
            Dtype::F8 => "<f8",
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F4 => 4,
            Dtype::F8 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub dtype: Dtype,
    pub data: Vec<f64>,
}

impl NpyArray {
    pub fn rank(&self) -> usize {
        self.shape.len()
    }
}

struct Header {
    dtype: Dtype,
    fortran_order: bool,
    shape: Vec<usize>,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

/// Value text following `'key':` in a header dict.
fn dict_value<'a>(header: &'a str, key: &str) -> Result<&'a str> {
    let pat = format!("'{key}'");
    let start = header
        .find(&pat)
        .or_else(|| header.find(&format!("\"{key}\"")))
        .ok_or_else(|| format_err(format!("header is missing '{key}'")))?;
    let rest = &header[start + pat.len()..];
    let rest = rest
        .trim_start()
        .strip_prefix(':')
        .ok_or_else(|| format_err(format!("expected ':' after '{key}'")))?;
    Ok(rest.trim_start())
}

fn parse_header(text: &str) -> Result<Header> {
    let text = text.trim();
    if !(text.starts_with('{') && text.ends_with('}')) {
        return Err(format_err("header is not a dict literal"));
    }

    let descr_text = dict_value(text, "descr")?;
    let quote = descr_text.chars().next().filter(|c| *c == '\'' || *c == '"');
    let quote = quote.ok_or_else(|| format_err("'descr' is not a string"))?;
    let end = descr_text[1..]
        .find(quote)
        .ok_or_else(|| format_err("unterminated 'descr'"))?;
    let dtype = match &descr_text[1..1 + end] {
        "<f8" => Dtype::F8,
        "<f4" => Dtype::F4,
        other => {
            return Err(format_err(format!(
                "unsupported dtype '{other}', expected '<f4' or '<f8'"
            )))
        }
    };

    let fortran_text = dict_value(text, "fortran_order")?;
    let fortran_order = if fortran_text.starts_with("False") {
        false
    } else if fortran_text.starts_with("True") {
        true
    } else {
        return Err(format_err("'fortran_order' must be True or False"));
    };

    let shape_text = dict_value(text, "shape")?;
    let shape_text = shape_text
        .strip_prefix('(')
        .ok_or_else(|| format_err("'shape' is not a tuple"))?;
    let close = shape_text.find(')').ok_or_else(|| format_err("unterminated 'shape'"))?;
    let shape = shape_text[..close]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.trim_end_matches('L').parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| format_err(format!("bad shape entry: {e}")))?;

    Ok(Header {
        dtype,
        fortran_order,
        shape,
    })
}

pub fn read_npy<R: Read>(mut reader: R) -> Result<NpyArray> {
    let mut magic = [0u8; 8];
    reader
        .read_exact(&mut magic)
        .map_err(|_| format_err("file too short for an NPY header"))?;
    if &magic[..6] != MAGIC {
        return Err(format_err("missing NPY magic bytes"));
    }
    let header_len = match (magic[6], magic[7]) {
        (1, 0) => {
            let mut b = [0u8; 2];
            reader
                .read_exact(&mut b)
                .map_err(|_| format_err("truncated header length"))?;
            u16::from_le_bytes(b) as usize
        }
        (2, 0) => {
            let mut b = [0u8; 4];
            reader
                .read_exact(&mut b)
                .map_err(|_| format_err("truncated header length"))?;
            u32::from_le_bytes(b) as usize
        }
        (major, minor) => return Err(format_err(format!("unsupported NPY version {major}.{minor}"))),
    };
    let mut header = vec![0u8; header_len];
    reader
        .read_exact(&mut header)
        .map_err(|_| format_err("truncated header"))?;
    let header = std::str::from_utf8(&header).map_err(|_| format_err("header is not ASCII"))?;
    let header = parse_header(header)?;
    if header.fortran_order {
        return Err(format_err("Fortran-ordered arrays are not supported"));
    }

    let count: usize = header.shape.iter().product();
    let mut raw = vec![0u8; count * header.dtype.size()];
    reader
        .read_exact(&mut raw)
        .map_err(|_| format_err(format!("expected {count} elements of data")))?;
    let data = match header.dtype {
        Dtype::F8 => raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Dtype::F4 => raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    Ok(NpyArray {
        shape: header.shape,
        dtype: header.dtype,
        data,
    })
}

pub fn read_npy_file(path: impl AsRef<Path>) -> Result<NpyArray> {
    let path = path.as_ref();
    let file = File::open(path).map_err(Error::io(path))?;
    read_npy(BufReader::new(file)).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_npy<W: Write>(mut writer: W, shape: &[usize], data: &[f64], dtype: Dtype) -> std::io::Result<()> {
    assert_eq!(
        shape.iter().product::<usize>(),
        data.len(),
        "shape does not match data length"
    );
    let shape_text = match shape {
        [single] => format!("({single},)"),
        _ => format!(
            "({})",
            shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {shape_text}, }}",
        dtype.descr()
    );
    // magic(6) + version(2) + len(2) + header + '\n' padded to a multiple of 64
    let unpadded = 10 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');

    writer.write_all(MAGIC)?;
    writer.write_all(&[1, 0])?;
    writer.write_all(&(header.len() as u16).to_le_bytes())?;
    writer.write_all(header.as_bytes())?;
    match dtype {
        Dtype::F8 => data.iter().try_for_each(|v| writer.write_all(&v.to_le_bytes()))?,
        Dtype::F4 => data
            .iter()
            .try_for_each(|v| writer.write_all(&(*v as f32).to_le_bytes()))?,
    }
    writer.flush()
}

pub fn write_npy_file(path: impl AsRef<Path>, shape: &[usize], data: &[f64], dtype: Dtype) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(Error::io(path))?;
    write_npy(BufWriter::new(file), shape, data, dtype).map_err(Error::io(path))
}
