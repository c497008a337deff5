use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rewards::Label;

/// Parsing options for LIBSVM text.
#[derive(Debug, Clone, Default)]
pub struct LibsvmOptions {
    /// Feature dimension; inferred from the largest index when absent.
    pub expected_dim: Option<usize>,
    /// Label treated as positive when the file is multi-class; every other
    /// label becomes negative.
    pub positive_class: Option<String>,
}

enum RawLabel {
    Binary(Label),
    Other(String),
}

fn parse_label(tok: &str) -> Option<RawLabel> {
    let v: f64 = tok.parse().ok()?;
    Some(if v == 1.0 {
        RawLabel::Binary(Label::Pos)
    } else if v == 0.0 || v == -1.0 {
        RawLabel::Binary(Label::Neg)
    } else {
        RawLabel::Other(tok.to_string())
    })
}

/// Parses LIBSVM sparse text (`label idx:value ...`, 1-based ascending
/// indices) into a dense dataset. Labels `+1`/`1` map to positive, `0`/`-1`
/// to negative.
pub fn parse_libsvm<R: BufRead>(reader: R, name: &str, opts: &LibsvmOptions) -> Result<Dataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;

    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let ltok = toks.next().expect("non-empty line has a token");
        let label = match (&opts.positive_class, parse_label(ltok)) {
            (Some(pc), _) => {
                let same = match (ltok.parse::<f64>(), pc.parse::<f64>()) {
                    (Ok(a), Ok(b)) => a == b,
                    _ => ltok == pc,
                };
                if same {
                    Label::Pos
                } else {
                    Label::Neg
                }
            }
            (None, Some(RawLabel::Binary(l))) => l,
            (None, Some(RawLabel::Other(s))) => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!(
                        "label {s} is not binary; supply a positive class to binarize"
                    ),
                })
            }
            (None, None) => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("non-numeric label {ltok:?}"),
                })
            }
        };

        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in toks {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("expected index:value, got {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("non-numeric index {idx:?}"),
            })?;
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("non-numeric value {val:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: "indices are 1-based".into(),
                });
            }
            if idx <= last {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("index {idx} is not ascending (previous {last})"),
                });
            }
            if !val.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("non-finite value at index {idx}"),
                });
            }
            if let Some(d) = opts.expected_dim {
                if idx > d {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("index {idx} exceeds dimension {d}"),
                    });
                }
            }
            last = idx;
            row.push((idx, val));
        }
        max_index = max_index.max(last);
        rows.push(row);
        labels.push(label);
    }

    let dim = opts.expected_dim.unwrap_or(max_index);
    let mut features = vec![0.0; dim * rows.len()];
    for (r, row) in rows.iter().enumerate() {
        for &(idx, val) in row {
            features[r * dim + idx - 1] = val;
        }
    }
    Dataset::new(name, dim, features, labels)
}

pub fn read_libsvm_file(path: &Path, opts: &LibsvmOptions) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::Parse {
        line: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "libsvm".into());
    parse_libsvm(BufReader::new(file), &name, opts)
}

/// Writes `data` in LIBSVM format, omitting zero entries.
pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> std::io::Result<()> {
    for i in 0..data.len() {
        let label = if data.label(i).is_pos() { "+1" } else { "-1" };
        write!(out, "{label}")?;
        for (j, &v) in data.row(i).iter().enumerate() {
            if v != 0.0 {
                write!(out, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}
