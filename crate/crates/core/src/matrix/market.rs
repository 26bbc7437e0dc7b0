//! MatrixMarket reader and writer for [`DenseMatrix`].
//!
//! Supports `array` and `coordinate` layouts with `real` or `integer` fields
//! and `general` or `symmetric` symmetry. Values are written in shortest
//! round-trip form, so save followed by load is exact at the element type.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Result, SpammError};
use crate::matrix::dense::{DenseMatrix, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarketLayout {
    #[default]
    Array,
    Coordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn format_err(line: usize, msg: impl Into<String>) -> SpammError {
    SpammError::Format {
        line,
        msg: msg.into(),
    }
}

/// Largest element count accepted from a size line.
const MAX_ELEMENTS: usize = 1 << 34;

pub fn read_market<T: Scalar>(reader: impl BufRead) -> Result<DenseMatrix<T>> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (lineno, header) = match lines.next() {
        Some((n, l)) => (n, l?),
        None => return Err(format_err(1, "empty file")),
    };
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(format_err(
            lineno,
            "expected '%%MatrixMarket matrix <layout> <field> <symmetry>'",
        ));
    }
    let layout = match tokens[2].as_str() {
        "array" => MarketLayout::Array,
        "coordinate" => MarketLayout::Coordinate,
        other => return Err(format_err(lineno, format!("unknown layout '{other}'"))),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => {
            return Err(format_err(
                lineno,
                format!("unsupported field '{other}', only real data is accepted"),
            ))
        }
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => {
            return Err(format_err(
                lineno,
                format!("unsupported symmetry '{other}'"),
            ))
        }
    };

    // data lines, comments and blanks removed
    let mut data = lines.filter_map(|(n, l)| match l {
        Ok(s) => {
            let t = s.trim();
            if t.is_empty() || t.starts_with('%') {
                None
            } else {
                Some(Ok((n, t.to_string())))
            }
        }
        Err(e) => Some(Err(SpammError::from(e))),
    });

    let (size_line, size) = data
        .next()
        .ok_or_else(|| format_err(lineno + 1, "missing size line"))??;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| format_err(size_line, "size line must hold non-negative integers"))?;
    let want = if layout == MarketLayout::Array { 2 } else { 3 };
    if dims.len() != want {
        return Err(format_err(
            size_line,
            format!("size line needs {want} integers"),
        ));
    }
    let (rows, cols) = (dims[0], dims[1]);
    let total = rows
        .checked_mul(cols)
        .filter(|&t| t <= MAX_ELEMENTS)
        .ok_or_else(|| format_err(size_line, format!("dimension overflow for {rows}x{cols}")))?;
    if symmetry == Symmetry::Symmetric && rows != cols {
        return Err(format_err(size_line, "symmetric matrix must be square"));
    }

    let parse_value = |n: usize, tok: &str| -> Result<T> {
        let v: T = tok
            .parse()
            .map_err(|_| format_err(n, format!("cannot parse value '{tok}'")))?;
        if !v.is_finite() {
            return Err(format_err(n, format!("non-finite value '{tok}'")));
        }
        Ok(v)
    };

    let mut out = vec![T::zero(); total];
    match layout {
        MarketLayout::Array => {
            // column-major; symmetric stores the lower triangle only
            let positions: Box<dyn Iterator<Item = (usize, usize)>> = match symmetry {
                Symmetry::General => {
                    Box::new((0..cols).flat_map(move |j| (0..rows).map(move |i| (i, j))))
                }
                Symmetry::Symmetric => {
                    Box::new((0..cols).flat_map(move |j| (j..rows).map(move |i| (i, j))))
                }
            };
            for (i, j) in positions {
                let (n, line) = data.next().ok_or_else(|| {
                    format_err(
                        0,
                        format!("array data ends before entry ({}, {})", i + 1, j + 1),
                    )
                })??;
                let mut toks = line.split_whitespace();
                let v = parse_value(n, toks.next().unwrap_or_default())?;
                if toks.next().is_some() {
                    return Err(format_err(n, "expected one value per line"));
                }
                out[i * cols + j] = v;
                if symmetry == Symmetry::Symmetric {
                    out[j * cols + i] = v;
                }
            }
        }
        MarketLayout::Coordinate => {
            let nnz = dims[2];
            for _ in 0..nnz {
                let (n, line) = data
                    .next()
                    .ok_or_else(|| format_err(0, format!("expected {nnz} coordinate entries")))??;
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(format_err(n, "coordinate entry needs 'row col value'"));
                }
                let idx = |t: &str| -> Result<usize> {
                    t.parse::<usize>()
                        .map_err(|_| format_err(n, format!("bad index '{t}'")))
                };
                let (i, j) = (idx(toks[0])?, idx(toks[1])?);
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(format_err(
                        n,
                        format!("entry ({i}, {j}) outside {rows}x{cols}"),
                    ));
                }
                let v = parse_value(n, toks[2])?;
                let (i, j) = (i - 1, j - 1);
                // duplicates accumulate
                out[i * cols + j] = out[i * cols + j] + v;
                if symmetry == Symmetry::Symmetric && i != j {
                    out[j * cols + i] = out[j * cols + i] + v;
                }
            }
        }
    }
    if let Some(extra) = data.next() {
        let (n, _) = extra?;
        return Err(format_err(n, "trailing data after the last entry"));
    }
    DenseMatrix::new(rows, cols, out)
}

pub fn write_market<T: Scalar>(
    w: &mut impl Write,
    m: &DenseMatrix<T>,
    layout: MarketLayout,
) -> Result<()> {
    let (rows, cols) = m.shape();
    match layout {
        MarketLayout::Array => {
            writeln!(w, "%%MatrixMarket matrix array real general")?;
            writeln!(w, "{rows} {cols}")?;
            for j in 0..cols {
                for i in 0..rows {
                    writeln!(w, "{:e}", m.get(i, j))?;
                }
            }
        }
        MarketLayout::Coordinate => {
            writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
            let nnz = m.as_slice().iter().filter(|v| !v.is_zero()).count();
            writeln!(w, "{rows} {cols} {nnz}")?;
            for j in 0..cols {
                for i in 0..rows {
                    let v = m.get(i, j);
                    if !v.is_zero() {
                        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn load_matrix<T: Scalar>(path: impl AsRef<Path>) -> Result<DenseMatrix<T>> {
    let f = File::open(path)?;
    read_market(BufReader::new(f))
}

pub fn save_matrix<T: Scalar>(
    path: impl AsRef<Path>,
    m: &DenseMatrix<T>,
    layout: MarketLayout,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_market(&mut w, m, layout)?;
    w.flush()?;
    Ok(())
}
