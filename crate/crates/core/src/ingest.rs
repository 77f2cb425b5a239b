//! CSV ingestion.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::config::ColumnMap;
use crate::error::{Result, RkdError};
use crate::sample::Sample;
use crate::scalar::Real;

/// Read a headed CSV file. Rows are reported as file line numbers (the
/// header is line 1).
pub fn ingest<T: Real>(path: impl AsRef<Path>, columns: &ColumnMap, kink_location: f64) -> Result<Sample<T>> {
    let file = File::open(path.as_ref()).map_err(|e| RkdError::Io(format!("{}: {e}", path.as_ref().display())))?;
    ingest_reader(file, columns, kink_location)
}

pub fn ingest_reader<T: Real, R: Read>(reader: R, columns: &ColumnMap, kink_location: f64) -> Result<Sample<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(1, "header", e.to_string()))?.clone();
    if headers.is_empty() {
        return Err(RkdError::EmptyFile);
    }
    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| RkdError::Parse {
            row: 1,
            column: name.to_string(),
            message: "column not found in header".into(),
        })
    };
    let iy = find(&columns.outcome)?;
    let id = find(&columns.treatment)?;
    let ix = find(&columns.running)?;

    let (mut y, mut d, mut x) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            parse_err(row, "record", e.to_string())
        })?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        let real = |i: usize, name: &str| -> Result<f64> {
            let raw = rec.get(i).unwrap_or("");
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(row, name, format!("'{raw}' is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(row, name, format!("'{raw}' is not finite")))
            }
        };
        y.push(T::lit(real(iy, &columns.outcome)?));
        x.push(T::lit(real(ix, &columns.running)? - kink_location));
        let raw = rec.get(id).unwrap_or("");
        let treated = match raw.parse::<f64>() {
            Ok(v) if v == 0.0 => false,
            Ok(v) if v == 1.0 => true,
            Ok(_) => {
                return Err(RkdError::NonBinaryTreatment {
                    row,
                    value: raw.to_string(),
                })
            }
            Err(_) => match raw.to_ascii_lowercase().as_str() {
                "true" => true,
                "false" => false,
                _ => {
                    return Err(RkdError::NonBinaryTreatment {
                        row,
                        value: raw.to_string(),
                    })
                }
            },
        };
        d.push(treated);
    }
    if y.is_empty() {
        return Err(RkdError::EmptyFile);
    }
    Sample::new(y, d, x)
}

fn parse_err(row: usize, column: &str, message: String) -> RkdError {
    RkdError::Parse {
        row,
        column: column.to_string(),
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str, kink: f64) -> Result<Sample<f64>> {
        ingest_reader(s.as_bytes(), &ColumnMap::default(), kink)
    }

    #[test]
    fn three_rows() {
        let s = read("y,d,x\n1.0,0,0.5\n2.0,1,-0.5\n3,1,0\n", 0.0).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.d, vec![false, true, true]);
        assert_eq!(s.y, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn non_binary_names_row() {
        let e = read("y,d,x\n1,0,0\n1,2,0\n", 0.0).unwrap_err();
        assert_eq!(
            e,
            RkdError::NonBinaryTreatment {
                row: 3,
                value: "2".into()
            }
        );
    }

    #[test]
    fn recenters() {
        let s = read("y,d,x\n1,0,5\n1,1,7.5\n", 5.0).unwrap();
        assert_eq!(s.x, vec![0.0, 2.5]);
    }

    #[test]
    fn parse_error_location() {
        match read("y,d,x\n1,0,0\n1,1,abc\n", 0.0).unwrap_err() {
            RkdError::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "x");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn empty_and_missing_column() {
        assert_eq!(read("y,d,x\n", 0.0).unwrap_err(), RkdError::EmptyFile);
        assert_eq!(read("", 0.0).unwrap_err(), RkdError::EmptyFile);
        assert!(matches!(read("y,t,x\n1,0,0\n", 0.0), Err(RkdError::Parse { .. })));
    }

    #[test]
    fn custom_columns() {
        let cols = ColumnMap {
            outcome: "wage".into(),
            treatment: "union".into(),
            running: "age".into(),
        };
        let s: Sample<f32> = ingest_reader("age,union,wage\n30,1,10\n".as_bytes(), &cols, 30.0).unwrap();
        assert_eq!((s.y[0], s.d[0], s.x[0]), (10.0, true, 0.0));
    }
}
