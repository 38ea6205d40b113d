use std::path::Path;

use super::EmbeddingSet;
use crate::error::{Error, Result};

/// Reads a CSV file with a header row. Every column except `label_column`
/// must be numeric; the label column, when named, must hold non-negative
/// integers.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read(file, name, label_column)
}

pub(crate) fn read<R: std::io::Read>(
    input: R,
    name: String,
    label_column: Option<&str>,
) -> Result<EmbeddingSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let label_idx = match label_column {
        Some(col) => Some(
            headers
                .iter()
                .position(|h| h == col)
                .ok_or_else(|| Error::Format(format!("no column named '{col}'")))?,
        ),
        None => None,
    };
    let d = headers.len() - usize::from(label_idx.is_some());
    if d == 0 {
        return Err(Error::Format("no numeric columns".into()));
    }

    let mut data = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    let mut n = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        // header is line 1
        let row = i + 2;
        for (j, cell) in record.iter().enumerate() {
            if Some(j) == label_idx {
                let label = cell.parse::<u32>().map_err(|_| Error::Parse {
                    row,
                    column: j + 1,
                    message: format!("label '{cell}' is not a non-negative integer"),
                })?;
                labels.as_mut().unwrap().push(label);
            } else {
                let value = cell.parse::<f64>().map_err(|_| Error::Parse {
                    row,
                    column: j + 1,
                    message: format!("'{cell}' is not a number"),
                })?;
                data.push(value);
            }
        }
        n += 1;
    }
    EmbeddingSet::new(name, n, d, data, labels)
}

/// Writes columns `d0..d{d-1}` plus a trailing `label` column when the set is
/// labeled. Values use the shortest representation that parses back exactly.
pub fn save_csv(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{other:?}")),
    })?;
    let mut header: Vec<String> = (0..set.dim()).map(|j| format!("d{j}")).collect();
    if set.labels().is_some() {
        header.push("label".into());
    }
    let io_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{other:?}")),
    };
    writer.write_record(&header).map_err(io_err)?;
    for i in 0..set.len() {
        let mut record: Vec<String> = set.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(labels) = set.labels() {
            record.push(labels[i].to_string());
        }
        writer.write_record(&record).map_err(io_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(e: csv::Error) -> Error {
    let position = e.position().map(|p| p.line());
    match e.into_kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::Format(format!(
            "ragged row at line {}: {len} fields, expected {expected_len}",
            position.unwrap_or(0)
        )),
        csv::ErrorKind::Io(io) => Error::Format(format!("read failed: {io}")),
        other => Error::Format(format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, label: Option<&str>) -> Result<EmbeddingSet> {
        read(text.as_bytes(), "t".into(), label)
    }

    #[test]
    fn reads_rows_in_order() {
        let set = parse("a,b\n0,1\n2,3", None).unwrap();
        assert_eq!((set.len(), set.dim()), (2, 2));
        assert_eq!(set.row(0), &[0.0, 1.0]);
        assert_eq!(set.row(1), &[2.0, 3.0]);
        assert!(set.labels().is_none());
    }

    #[test]
    fn label_column_becomes_labels() {
        let set = parse("a,b,y\n0,1,7", Some("y")).unwrap();
        assert_eq!(set.dim(), 2);
        assert_eq!(set.labels(), Some(&[7][..]));
    }

    #[test]
    fn label_column_may_sit_anywhere() {
        let set = parse("y,a,b\n4,0.5,1.5\n2,2,3", Some("y")).unwrap();
        assert_eq!(set.row(0), &[0.5, 1.5]);
        assert_eq!(set.labels(), Some(&[4, 2][..]));
    }

    #[test]
    fn ragged_rows_are_format_errors() {
        assert!(matches!(parse("a,b\n0\n", None), Err(Error::Format(_))));
    }

    #[test]
    fn non_numeric_cell_reports_location() {
        match parse("a,b\n0,1\n2,x\n", None) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_label_column_is_rejected() {
        assert!(parse("a,b\n0,1", Some("y")).is_err());
    }

    #[test]
    fn save_then_load_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let set = EmbeddingSet::from_rows("s", &[vec![0.1, 1.0 / 3.0], vec![-7e-300, 2.5e10]])
            .unwrap()
            .with_labels(vec![1, 9])
            .unwrap();
        save_csv(&set, &path).unwrap();
        let back = load_csv(&path, Some("label")).unwrap();
        assert_eq!(back.data(), set.data());
        assert_eq!(back.labels(), set.labels());
    }
}
