//! Matrix Market exchange format.
//!
//! Matrices are read from `coordinate` or `array` files with `real` or
//! `integer` fields and `general`, `symmetric` or `skew-symmetric` storage.
//! `pattern` files are accepted only when [`ReadOptions::pattern_as_ones`] is
//! set. Vectors use the `array` format with a single column.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{AmgError, Result};
use crate::sparse::{CsrMatrix, TripletList};

#[derive(Debug, Clone, Copy, Default)]
pub struct ReadOptions {
    /// Load `pattern` files with every stored entry set to 1.
    pub pattern_as_ones: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

struct Header {
    format: Format,
    field: Field,
    symmetry: Symmetry,
}

fn io_err(path: &Path, source: std::io::Error) -> AmgError {
    AmgError::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    path: PathBuf,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn err(&self, msg: impl Into<String>) -> AmgError {
        AmgError::Parse {
            path: self.path.clone(),
            line: self.line_no,
            msg: msg.into(),
        }
    }

    fn next_raw(&mut self) -> Result<Option<String>> {
        match self.inner.next() {
            None => Ok(None),
            Some(line) => {
                self.line_no += 1;
                line.map(Some).map_err(|e| io_err(&self.path, e))
            }
        }
    }

    /// Next non-blank, non-comment line.
    fn next_data(&mut self) -> Result<Option<String>> {
        while let Some(line) = self.next_raw()? {
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            return Ok(Some(t.to_string()));
        }
        Ok(None)
    }

    fn expect_data(&mut self, what: &str) -> Result<String> {
        self.next_data()?
            .ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))
    }

    fn parse_usize(&self, tok: Option<&str>, what: &str) -> Result<usize> {
        let tok = tok.ok_or_else(|| self.err(format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| self.err(format!("invalid {what} '{tok}'")))
    }

    fn parse_f64(&self, tok: Option<&str>) -> Result<f64> {
        let tok = tok.ok_or_else(|| self.err("missing value"))?;
        tok.parse()
            .map_err(|_| self.err(format!("invalid value '{tok}'")))
    }
}

fn parse_header<R: BufRead>(lines: &mut Lines<R>, opts: ReadOptions) -> Result<Header> {
    let first = lines
        .next_raw()?
        .ok_or_else(|| lines.err("empty file"))?;
    let toks: Vec<String> = first.split_whitespace().map(str::to_lowercase).collect();
    if toks.len() != 5 || toks[0] != "%%matrixmarket" || toks[1] != "matrix" {
        return Err(lines.err("missing '%%MatrixMarket matrix' banner"));
    }
    let format = match toks[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        f => return Err(lines.err(format!("unsupported format '{f}'"))),
    };
    let field = match toks[3].as_str() {
        "real" | "double" | "integer" => Field::Real,
        "pattern" if opts.pattern_as_ones => Field::Pattern,
        "pattern" => {
            return Err(lines.err("pattern field requires the pattern-as-ones option"))
        }
        f => return Err(lines.err(format!("unsupported field type '{f}'"))),
    };
    if field == Field::Pattern && format == Format::Array {
        return Err(lines.err("pattern field is only valid with coordinate format"));
    }
    let symmetry = match toks[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        s => return Err(lines.err(format!("unsupported symmetry '{s}'"))),
    };
    Ok(Header {
        format,
        field,
        symmetry,
    })
}

/// Parse a matrix from any buffered reader; `path` is only used in messages.
pub fn parse_matrix_market<R: BufRead>(
    reader: R,
    path: &Path,
    opts: ReadOptions,
) -> Result<CsrMatrix> {
    let mut lines = Lines {
        inner: reader.lines(),
        path: path.to_path_buf(),
        line_no: 0,
    };
    let header = parse_header(&mut lines, opts)?;
    let size = lines.expect_data("size line")?;
    let mut toks = size.split_whitespace();
    let n_rows = lines.parse_usize(toks.next(), "row count")?;
    let n_cols = lines.parse_usize(toks.next(), "column count")?;
    if header.symmetry != Symmetry::General && n_rows != n_cols {
        return Err(lines.err("symmetric storage requires a square matrix"));
    }

    let mirror = |t: &mut TripletList, i: usize, j: usize, v: f64| -> Result<()> {
        t.push(i, j, v)?;
        if i != j {
            match header.symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => t.push(j, i, v)?,
                Symmetry::Skew => t.push(j, i, -v)?,
            }
        }
        Ok(())
    };

    let triplets = match header.format {
        Format::Coordinate => {
            let nnz = lines.parse_usize(toks.next(), "entry count")?;
            let mut t = TripletList::with_capacity(n_rows, n_cols, nnz);
            for _ in 0..nnz {
                let line = lines.expect_data("matrix entry")?;
                let mut it = line.split_whitespace();
                let i = lines.parse_usize(it.next(), "row index")?;
                let j = lines.parse_usize(it.next(), "column index")?;
                if i == 0 || j == 0 || i > n_rows || j > n_cols {
                    return Err(lines.err(format!(
                        "entry ({i}, {j}) outside {n_rows}x{n_cols} (indices are 1-based)"
                    )));
                }
                let v = match header.field {
                    Field::Real => lines.parse_f64(it.next())?,
                    Field::Pattern => 1.0,
                };
                mirror(&mut t, i - 1, j - 1, v)?;
            }
            t
        }
        Format::Array => {
            let mut t = TripletList::new(n_rows, n_cols);
            for j in 0..n_cols {
                let start = match header.symmetry {
                    Symmetry::General => 0,
                    Symmetry::Symmetric => j,
                    Symmetry::Skew => j + 1,
                };
                for i in start..n_rows {
                    let line = lines.expect_data("array value")?;
                    let v = lines.parse_f64(line.split_whitespace().next())?;
                    if v != 0.0 {
                        mirror(&mut t, i, j, v)?;
                    }
                }
            }
            t
        }
    };
    if lines.next_data()?.is_some() {
        return Err(lines.err("trailing data after last entry"));
    }
    Ok(triplets.to_csr())
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    read_matrix_market_with(path, ReadOptions::default())
}

pub fn read_matrix_market_with(path: impl AsRef<Path>, opts: ReadOptions) -> Result<CsrMatrix> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    parse_matrix_market(BufReader::new(f), path, opts)
}

/// Write in `coordinate real general` form with 17 significant digits.
pub fn write_matrix_market(a: &CsrMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    write_matrix_market_to(a, &mut w).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_matrix_market_to<W: Write>(a: &CsrMatrix, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for i in 0..a.n_rows() {
        for (j, v) in a.row(i) {
            writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

pub fn parse_vector<R: BufRead>(reader: R, path: &Path) -> Result<Vec<f64>> {
    let m = parse_matrix_market(reader, path, ReadOptions::default())?;
    if m.n_cols() != 1 {
        return Err(AmgError::Parse {
            path: path.to_path_buf(),
            line: 2,
            msg: format!("expected a single column, found {}", m.n_cols()),
        });
    }
    if m.n_rows() == 0 {
        return Err(AmgError::EmptyVector);
    }
    let mut v = vec![0.0; m.n_rows()];
    for (i, vi) in v.iter_mut().enumerate() {
        *vi = m.get(i, 0).unwrap_or(0.0);
    }
    Ok(v)
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    parse_vector(BufReader::new(f), path)
}

pub fn write_vector(v: &[f64], path: impl AsRef<Path>) -> Result<()> {
    if v.is_empty() {
        return Err(AmgError::EmptyVector);
    }
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    write_vector_to(v, &mut w).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_vector_to<W: Write>(v: &[f64], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", v.len())?;
    for x in v {
        writeln!(w, "{:.16e}", x)?;
    }
    Ok(())
}
