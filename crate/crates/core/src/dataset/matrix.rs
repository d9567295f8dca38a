//! Little-endian binary feature matrices.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 8    | magic `II20MAT\0`             |
//! | 8      | 4    | format version (1)            |
//! | 12     | 4    | element width in bytes (4)    |
//! | 16     | 8    | row count                     |
//! | 24     | 8    | column count                  |
//! | 32     | ...  | row-major `f32` values        |

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{ByteOrder, LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub const MATRIX_MAGIC: [u8; 8] = *b"II20MAT\0";
pub const MATRIX_VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 32;
const ELEMENT_WIDTH: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixHeader {
    pub rows: u64,
    pub cols: u64,
    pub element_width: u32,
}

pub struct MatrixWriter {
    path: PathBuf,
    out: BufWriter<File>,
    cols: usize,
    rows: usize,
    written: usize,
    bytes: Vec<u8>,
}

impl MatrixWriter {
    pub fn create(path: impl AsRef<Path>, rows: usize, cols: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::with_capacity(1 << 20, file);
        let header = (|| -> io::Result<()> {
            out.write_all(&MATRIX_MAGIC)?;
            out.write_u32::<LittleEndian>(MATRIX_VERSION)?;
            out.write_u32::<LittleEndian>(ELEMENT_WIDTH)?;
            out.write_u64::<LittleEndian>(rows as u64)?;
            out.write_u64::<LittleEndian>(cols as u64)
        })();
        header.map_err(|e| Error::io(&path, e))?;
        Ok(MatrixWriter {
            path,
            out,
            cols,
            rows,
            written: 0,
            bytes: vec![0; cols * 4],
        })
    }

    pub fn write_row(&mut self, row: &[f32]) -> Result<()> {
        if row.len() != self.cols || self.written >= self.rows {
            return Err(Error::ShapeMismatch {
                path: self.path.clone(),
                row: self.written,
                detail: format!(
                    "writing a row of {} values into a {}x{} matrix",
                    row.len(),
                    self.rows,
                    self.cols
                ),
            });
        }
        LittleEndian::write_f32_into(row, &mut self.bytes);
        self.out
            .write_all(&self.bytes)
            .map_err(|e| Error::io(&self.path, e))?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.written != self.rows {
            return Err(Error::ShapeMismatch {
                path: self.path.clone(),
                row: self.written,
                detail: format!("only {} of {} rows written", self.written, self.rows),
            });
        }
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Streaming reader that validates every row as it goes.
pub struct MatrixReader {
    path: PathBuf,
    input: BufReader<File>,
    header: MatrixHeader,
    row: usize,
    bytes: Vec<u8>,
}

impl MatrixReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let file_len = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        let mut input = BufReader::with_capacity(1 << 20, file);

        let bad = |detail: String| Error::BadHeader {
            path: path.clone(),
            detail,
        };
        if file_len < HEADER_LEN {
            return Err(bad(format!("{file_len} bytes is shorter than the header")));
        }
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(|e| Error::io(&path, e))?;
        if magic != MATRIX_MAGIC {
            return Err(bad("wrong magic".into()));
        }
        let mut fields = [0u8; 24];
        input.read_exact(&mut fields).map_err(|e| Error::io(&path, e))?;
        let mut cursor = &fields[..];
        let version = cursor.read_u32::<LittleEndian>().unwrap();
        let element_width = cursor.read_u32::<LittleEndian>().unwrap();
        let rows = cursor.read_u64::<LittleEndian>().unwrap();
        let cols = cursor.read_u64::<LittleEndian>().unwrap();
        if version != MATRIX_VERSION {
            return Err(Error::Version {
                what: "feature matrix",
                found: version,
            });
        }
        if element_width != ELEMENT_WIDTH {
            return Err(bad(format!("element width {element_width}, expected 4")));
        }

        let row_bytes = cols * u64::from(element_width);
        let payload = file_len - HEADER_LEN;
        let expected = rows.checked_mul(row_bytes).ok_or_else(|| bad("dimensions overflow".into()))?;
        if payload != expected {
            let complete = payload.checked_div(row_bytes).unwrap_or(0);
            return Err(Error::ShapeMismatch {
                path,
                row: complete.min(rows) as usize,
                detail: format!(
                    "header declares {rows} rows of {cols} values but the file holds {payload} data bytes ({complete} complete rows)"
                ),
            });
        }

        Ok(MatrixReader {
            path,
            input,
            header: MatrixHeader {
                rows,
                cols,
                element_width,
            },
            row: 0,
            bytes: vec![0; row_bytes as usize],
        })
    }

    pub fn header(&self) -> MatrixHeader {
        self.header
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Read the next row into `out`, rejecting NaN and infinities.
    pub fn read_row(&mut self, out: &mut [f32]) -> Result<()> {
        if out.len() as u64 != self.header.cols || self.row as u64 >= self.header.rows {
            return Err(Error::ShapeMismatch {
                path: self.path.clone(),
                row: self.row,
                detail: "read past the declared shape".into(),
            });
        }
        self.input.read_exact(&mut self.bytes).map_err(|e| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                Error::ShapeMismatch {
                    path: self.path.clone(),
                    row: self.row,
                    detail: "file ends early".into(),
                }
            } else {
                Error::io(&self.path, e)
            }
        })?;
        LittleEndian::read_f32_into(&self.bytes, out);
        if let Some(column) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                path: self.path.clone(),
                row: self.row,
                column,
            });
        }
        self.row += 1;
        Ok(())
    }
}

/// Write a whole row-major matrix in one call.
pub fn write_matrix(path: impl AsRef<Path>, rows: usize, cols: usize, data: &[f32]) -> Result<()> {
    let mut w = MatrixWriter::create(path, rows, cols)?;
    for row in data.chunks_exact(cols.max(1)).take(rows) {
        w.write_row(row)?;
    }
    w.finish()
}

/// Read a whole matrix, returning its header and row-major values.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<(MatrixHeader, Vec<f32>)> {
    let mut r = MatrixReader::open(path)?;
    let h = r.header();
    let cols = h.cols as usize;
    let mut data = vec![0.0; h.rows as usize * cols];
    for row in data.chunks_exact_mut(cols.max(1)).take(h.rows as usize) {
        r.read_row(row)?;
    }
    Ok((h, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let data: Vec<f32> = (0..12).map(|i| i as f32 * 0.5 - 1.0).collect();
        write_matrix(&p, 3, 4, &data).unwrap();
        let (h, back) = read_matrix(&p).unwrap();
        assert_eq!((h.rows, h.cols, h.element_width), (3, 4, 4));
        assert_eq!(back, data);
        assert_eq!(std::fs::metadata(&p).unwrap().len(), HEADER_LEN + 48);
    }

    #[test]
    fn nan_reports_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let mut data = vec![0.0f32; 12];
        data[2 * 4 + 1] = f32::NAN;
        write_matrix(&p, 3, 4, &data).unwrap();
        match read_matrix(&p) {
            Err(Error::NonFinite { row, column, .. }) => assert_eq!((row, column), (2, 1)),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_is_a_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        write_matrix(&p, 3, 4, &[1.0; 12]).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 20]).unwrap();
        match MatrixReader::open(&p) {
            Err(Error::ShapeMismatch { row, .. }) => assert_eq!(row, 1),
            Err(e) => panic!("unexpected {e}"),
            Ok(_) => panic!("truncated file accepted"),
        }
    }

    #[test]
    fn wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        std::fs::write(&p, [0u8; 40]).unwrap();
        assert!(matches!(MatrixReader::open(&p), Err(Error::BadHeader { .. })));
    }
}
