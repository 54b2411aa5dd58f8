use std::io::{BufRead, Write};

use super::ProblemError;
use crate::linalg::SparseMatrix;

/// Parses LIBSVM text: one sample per line, `label idx:val idx:val ...` with
/// 1-based, strictly increasing feature indices. Blank lines and `#`
/// comments are skipped. The column count is the largest index seen.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<(SparseMatrix, Vec<f64>), ProblemError> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut cols = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.map_err(|e| ProblemError::Io(e.to_string()))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label: f64 = label_tok.parse().map_err(|_| ProblemError::Parse {
            line: line_no,
            message: format!("invalid label {label_tok:?}"),
        })?;
        if !label.is_finite() {
            return Err(ProblemError::Parse {
                line: line_no,
                message: format!("non-finite label {label_tok:?}"),
            });
        }
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let bad = || ProblemError::Parse {
                line: line_no,
                message: format!("malformed feature {tok:?}"),
            };
            let (idx, val) = tok.split_once(':').ok_or_else(bad)?;
            let idx: usize = idx.parse().map_err(|_| bad())?;
            let val: f64 = val.parse().map_err(|_| bad())?;
            if idx == 0 || !val.is_finite() {
                return Err(bad());
            }
            if idx <= last {
                return Err(ProblemError::Parse {
                    line: line_no,
                    message: format!("index {idx} not increasing (previous {last})"),
                });
            }
            last = idx;
            cols = cols.max(idx);
            row.push((idx - 1, val));
        }
        labels.push(label);
        rows.push(row);
    }
    let x = SparseMatrix::from_rows(cols, rows)?;
    Ok((x, labels))
}

pub fn parse_libsvm_str(text: &str) -> Result<(SparseMatrix, Vec<f64>), ProblemError> {
    parse_libsvm(text.as_bytes())
}

/// Writes the canonical form read back by [`parse_libsvm`]. Floats use the
/// shortest representation that round-trips.
pub fn write_libsvm<W: Write>(mut w: W, x: &SparseMatrix, y: &[f64]) -> std::io::Result<()> {
    for (i, label) in y.iter().enumerate() {
        write!(w, "{label}")?;
        for (j, v) in x.row(i) {
            write!(w, " {}:{v}", j + 1)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_basic_row() {
        let (x, y) = parse_libsvm_str("1 1:0.5 3:2.0\n").unwrap();
        assert_eq!(y, vec![1.0]);
        assert_eq!(x.to_dense().row(0), &[0.5, 0.0, 2.0]);
    }

    #[test]
    fn label_only_row() {
        let (x, y) = parse_libsvm_str("1 2:1\n-1\n").unwrap();
        assert_eq!(y, vec![1.0, -1.0]);
        assert_eq!(x.to_dense().row(1), &[0.0, 0.0]);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_libsvm_str("1 a:b\n").unwrap_err();
        assert!(matches!(err, ProblemError::Parse { line: 1, .. }));
        let err = parse_libsvm_str("1 1:1\n2 3:1 2:1\n").unwrap_err();
        assert!(matches!(err, ProblemError::Parse { line: 2, .. }));
        let err = parse_libsvm_str("x 1:1\n").unwrap_err();
        assert!(matches!(err, ProblemError::Parse { line: 1, .. }));
        let err = parse_libsvm_str("1 0:1\n").unwrap_err();
        assert!(matches!(err, ProblemError::Parse { line: 1, .. }));
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(
            rows in prop::collection::vec(
                (-10.0f64..10.0, prop::collection::btree_map(0usize..12, -5.0f64..5.0, 0..6)),
                1..8,
            )
        ) {
            let labels: Vec<f64> = rows.iter().map(|(l, _)| *l).collect();
            let entries: Vec<Vec<(usize, f64)>> = rows
                .iter()
                .map(|(_, m)| m.iter().filter(|(_, v)| **v != 0.0).map(|(&j, &v)| (j, v)).collect())
                .collect();
            let cols = entries.iter().flatten().map(|(j, _)| j + 1).max().unwrap_or(0);
            let x = SparseMatrix::from_rows(cols, entries).unwrap();
            let mut buf = Vec::new();
            write_libsvm(&mut buf, &x, &labels).unwrap();
            let (x2, y2) = parse_libsvm(buf.as_slice()).unwrap();
            prop_assert_eq!(x2, x);
            prop_assert_eq!(y2, labels);
        }
    }
}
