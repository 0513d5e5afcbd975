//! Matrix Market coordinate format.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::CrsMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmFormat {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmField {
    Real,
    Integer,
    Pattern,
    Complex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmSymmetry {
    General,
    Symmetric,
    SkewSymmetric,
    Hermitian,
}

/// The `%%MatrixMarket` banner line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixMarketHeader {
    pub format: MmFormat,
    pub field: MmField,
    pub symmetry: MmSymmetry,
}

fn mm_err(line: usize, message: impl Into<String>) -> Error {
    Error::MatrixMarket {
        line,
        message: message.into(),
    }
}

impl MatrixMarketHeader {
    pub fn parse(line: &str, line_no: usize) -> Result<Self> {
        let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
        if tokens.first().map(String::as_str) != Some("%%matrixmarket") {
            return Err(mm_err(line_no, "missing %%MatrixMarket banner"));
        }
        if tokens.len() != 5 {
            return Err(mm_err(line_no, "banner must have object, format, field, symmetry"));
        }
        if tokens[1] != "matrix" {
            return Err(mm_err(line_no, format!("unsupported object `{}`", tokens[1])));
        }
        let format = match tokens[2].as_str() {
            "coordinate" => MmFormat::Coordinate,
            "array" => MmFormat::Array,
            other => return Err(mm_err(line_no, format!("unknown format `{other}`"))),
        };
        let field = match tokens[3].as_str() {
            "real" | "double" => MmField::Real,
            "integer" => MmField::Integer,
            "pattern" => MmField::Pattern,
            "complex" => MmField::Complex,
            other => return Err(mm_err(line_no, format!("unknown field `{other}`"))),
        };
        let symmetry = match tokens[4].as_str() {
            "general" => MmSymmetry::General,
            "symmetric" => MmSymmetry::Symmetric,
            "skew-symmetric" => MmSymmetry::SkewSymmetric,
            "hermitian" => MmSymmetry::Hermitian,
            other => return Err(mm_err(line_no, format!("unknown symmetry `{other}`"))),
        };
        let header = Self {
            format,
            field,
            symmetry,
        };
        header.check_supported(line_no)?;
        Ok(header)
    }

    fn check_supported(&self, line_no: usize) -> Result<()> {
        if self.format != MmFormat::Coordinate {
            return Err(mm_err(line_no, "only coordinate format is supported"));
        }
        if self.field == MmField::Complex {
            return Err(mm_err(line_no, "complex matrices are not supported"));
        }
        if !matches!(self.symmetry, MmSymmetry::General | MmSymmetry::Symmetric) {
            return Err(mm_err(line_no, "only general and symmetric matrices are supported"));
        }
        Ok(())
    }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CrsMatrix> {
    let file = File::open(path)?;
    read_matrix_market_from(BufReader::new(file))
}

/// Parses a coordinate file. Rows come out sorted, duplicates summed, and
/// symmetric storage expanded to general.
pub fn read_matrix_market_from(reader: impl BufRead) -> Result<CrsMatrix> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (first_no, first) = match lines.next() {
        Some((n, l)) => (n, l?),
        None => return Err(mm_err(1, "empty file")),
    };
    let header = MatrixMarketHeader::parse(&first, first_no)?;

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut entries = 0usize;
    let mut last_line = first_no;

    for (line_no, line) in lines {
        let line = line?;
        last_line = line_no;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        let Some((nrows, ncols, nnz)) = size else {
            if tokens.len() != 3 {
                return Err(mm_err(line_no, "size line must be `rows cols entries`"));
            }
            let parse = |t: &str| {
                t.parse::<usize>()
                    .map_err(|_| mm_err(line_no, format!("invalid size `{t}`")))
            };
            let parsed = (parse(tokens[0])?, parse(tokens[1])?, parse(tokens[2])?);
            triplets.reserve(parsed.2);
            size = Some(parsed);
            continue;
        };

        let expected = if header.field == MmField::Pattern { 2 } else { 3 };
        if tokens.len() != expected {
            return Err(mm_err(
                line_no,
                format!("expected {expected} fields, found {}", tokens.len()),
            ));
        }
        entries += 1;
        if entries > nnz {
            return Err(mm_err(line_no, format!("more than the declared {nnz} entries")));
        }
        let index = |t: &str, bound: usize, what: &str| -> Result<usize> {
            let i: usize = t
                .parse()
                .map_err(|_| mm_err(line_no, format!("invalid {what} index `{t}`")))?;
            if i == 0 || i > bound {
                return Err(mm_err(
                    line_no,
                    format!("{what} index {i} out of range 1..={bound}"),
                ));
            }
            Ok(i - 1)
        };
        let r = index(tokens[0], nrows, "row")?;
        let c = index(tokens[1], ncols, "column")?;
        let v = match header.field {
            MmField::Pattern => 1.0,
            MmField::Integer => tokens[2]
                .parse::<i64>()
                .map_err(|_| mm_err(line_no, format!("invalid integer `{}`", tokens[2])))?
                as f64,
            _ => tokens[2]
                .parse::<f64>()
                .map_err(|_| mm_err(line_no, format!("invalid value `{}`", tokens[2])))?,
        };
        triplets.push((r, c, v));
        if header.symmetry == MmSymmetry::Symmetric && r != c {
            triplets.push((c, r, v));
        }
    }

    let Some((nrows, ncols, nnz)) = size else {
        return Err(mm_err(last_line, "missing size line"));
    };
    if entries != nnz {
        return Err(mm_err(
            last_line,
            format!("declared {nnz} entries but found {entries}"),
        ));
    }
    CrsMatrix::from_triplets(nrows, ncols, triplets)
}

/// Writes `a` as `coordinate real general` with shortest round-trip values.
pub fn write_matrix_market(a: &CrsMatrix, mut w: impl Write) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (r, c, v) in a.triplets() {
        writeln!(w, "{} {} {:?}", r + 1, c + 1, v)?;
    }
    Ok(())
}
