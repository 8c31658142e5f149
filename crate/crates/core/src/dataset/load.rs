use std::io::Read;
use std::path::Path;

use super::schema::{ColumnKind, FeatureSchema};
use crate::error::{Error, Result};

/// A typed raw column; `None` marks a missing cell.
#[derive(Clone, Debug, PartialEq)]
pub enum RawColumn {
    Numeric(Vec<Option<f64>>),
    Text(Vec<Option<String>>),
}

impl RawColumn {
    pub fn len(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.len(),
            RawColumn::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn missing_count(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.iter().filter(|c| c.is_none()).count(),
            RawColumn::Text(v) => v.iter().filter(|c| c.is_none()).count(),
        }
    }
}

/// Columns in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub columns: Vec<(String, RawColumn)>,
    pub n_rows: usize,
}

impl RawTable {
    pub fn column(&self, name: &str) -> Option<&RawColumn> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "null" | "none" | "?"
    )
}

pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<RawTable> {
    let file = std::fs::File::open(path)?;
    load_csv_reader(file, schema)
}

/// Parses a comma-separated table with a header row; numeric columns are
/// typed according to `schema`, every other column is kept as text.
pub fn load_csv_reader<R: Read>(reader: R, schema: &FeatureSchema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::EmptyFile);
    }
    for h in &header {
        if schema.kind(h).is_none() {
            return Err(Error::UnknownColumn(h.clone()));
        }
    }
    for declared in schema.columns.keys() {
        if !header.contains(declared) {
            return Err(Error::Schema(format!("column `{declared}` missing from file")));
        }
    }

    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); header.len()];
    for rec in rdr.records() {
        let rec = rec?;
        for (c, col) in cells.iter_mut().enumerate() {
            let cell = rec.get(c).unwrap_or("");
            col.push((!is_missing(cell)).then(|| cell.to_string()));
        }
    }
    let n_rows = cells.first().map_or(0, Vec::len);
    if n_rows == 0 {
        return Err(Error::EmptyFile);
    }

    let mut columns = Vec::with_capacity(header.len());
    for (name, col) in header.into_iter().zip(cells) {
        let typed = if schema.kind(&name) == Some(ColumnKind::Numeric) {
            let mut values = Vec::with_capacity(col.len());
            for (row, cell) in col.into_iter().enumerate() {
                values.push(match cell {
                    None => None,
                    Some(s) => Some(s.parse::<f64>().map_err(|_| Error::UnparseableNumeric {
                        column: name.clone(),
                        row: row + 1,
                        value: s.clone(),
                    })?),
                });
            }
            RawColumn::Numeric(values)
        } else {
            RawColumn::Text(col)
        };
        columns.push((name, typed));
    }
    Ok(RawTable { columns, n_rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> FeatureSchema {
        FeatureSchema::from_toml_str(
            r#"
            target = "y"
            favorable = "1"
            protected = "age"
            protected_threshold = 25
            [columns]
            y = "categorical"
            age = "numeric"
            job = "categorical"
            "#,
        )
        .unwrap()
    }

    #[test]
    fn header_only_is_empty_file() {
        let err = load_csv_reader("y,age,job\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::EmptyFile));
    }

    #[test]
    fn unknown_column_rejected() {
        let err = load_csv_reader("y,age,job,extra\n1,30,a,b\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::UnknownColumn(c) if c == "extra"));
    }

    #[test]
    fn bad_numeric_rejected() {
        let err = load_csv_reader("y,age,job\n1,old,a\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::UnparseableNumeric { row: 1, .. }));
    }

    #[test]
    fn missing_cells_flagged() {
        let t = load_csv_reader("y,age,job\n1,,a\n0,30,NA\n".as_bytes(), &schema()).unwrap();
        assert_eq!(t.n_rows, 2);
        assert_eq!(t.column("age"), Some(&RawColumn::Numeric(vec![None, Some(30.0)])));
        assert_eq!(t.column("job").unwrap().missing_count(), 1);
    }
}
