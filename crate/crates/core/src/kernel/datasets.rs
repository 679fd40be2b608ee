//! Bundled dataset snapshots for `load_dataset`.

use crate::kernel::{Column, TableExtract};
use crate::value::{DType, Scalar};

const WINE_CSV: &str = include_str!("../../data/wine.csv");
const IRIS_CSV: &str = include_str!("../../data/iris.csv");

pub const DATASET_NAMES: [&str; 2] = ["wine", "iris"];

pub fn raw_csv(name: &str) -> Option<&'static str> {
    match name {
        "wine" => Some(WINE_CSV),
        "iris" => Some(IRIS_CSV),
        _ => None,
    }
}

/// Loads a bundled dataset. A column is numeric when every cell parses as a
/// finite number, text otherwise.
pub fn load(name: &str) -> Option<TableExtract> {
    let text = raw_csv(name)?;
    Some(parse_csv(text).expect("bundled dataset is well-formed"))
}

pub fn parse_csv(text: &str) -> Result<TableExtract, csv::Error> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let records: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>()?;
    let numeric: Vec<bool> = (0..headers.len())
        .map(|c| {
            records.iter().all(|r| {
                r.get(c)
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .is_some_and(f64::is_finite)
            })
        })
        .collect();
    let columns = headers
        .iter()
        .zip(&numeric)
        .map(|(h, &n)| Column::new(h.clone(), if n { DType::Number } else { DType::Text }))
        .collect();
    let rows = records
        .iter()
        .map(|r| {
            r.iter()
                .zip(&numeric)
                .map(|(v, &n)| {
                    if n {
                        Scalar::Number(v.trim().parse().expect("checked numeric"))
                    } else {
                        Scalar::Text(v.to_string())
                    }
                })
                .collect()
        })
        .collect();
    Ok(TableExtract { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_shapes() {
        assert_eq!(load("wine").unwrap().shape(), (178, 13));
        assert_eq!(load("iris").unwrap().shape(), (150, 4));
        assert!(load("titanic").is_none());
    }

    #[test]
    fn bundled_tables_are_valid() {
        for name in DATASET_NAMES {
            let t = load(name).unwrap();
            t.validate().unwrap();
            assert!(t.columns.iter().all(|c| c.dtype == DType::Number));
        }
    }

    #[test]
    fn text_columns_detected() {
        let t = parse_csv("a,b\n1,x\n2,y\n").unwrap();
        assert_eq!(t.columns[1].dtype, DType::Text);
        assert_eq!(t.rows[1][0], Scalar::Number(2.0));
    }
}
