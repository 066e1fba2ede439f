use std::io::Read;
use std::path::Path;

use super::schema::Binned;
use super::{Dataset, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// How many rows may be dropped for out-of-domain cells before loading
    /// fails with [`Error::UnknownCategory`]. The default of zero makes any
    /// rejection fatal.
    pub max_rejected_rows: usize,
}

/// Read an RFC-4180 CSV file with a header row, binning each cell into its
/// attribute's declared domain. Columns not named in the schema are ignored.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema, options: LoadOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    load_csv_from_reader(file, schema, options)
}

pub fn load_csv_from_reader<R: Read>(
    reader: R,
    schema: &Schema,
    options: LoadOptions,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let positions = schema
        .attributes()
        .iter()
        .map(|attr| {
            headers
                .iter()
                .position(|h| h.trim() == attr.name)
                .ok_or_else(|| Error::MissingColumn(attr.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut columns: Vec<Vec<u32>> = vec![Vec::new(); schema.len()];
    let mut rejected = 0usize;
    let mut first_rejection: Option<(usize, String, String)> = None;
    let mut row_buf = Vec::with_capacity(schema.len());

    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        row_buf.clear();
        let mut keep = true;
        for (attr, pos) in schema.attributes().iter().zip(&positions) {
            let cell = record.get(*pos).ok_or_else(|| Error::Parse {
                row,
                column: attr.name.clone(),
                message: "row is shorter than the header".into(),
            })?;
            match attr.bin(cell) {
                Binned::Index(ix) => row_buf.push(ix),
                Binned::Rejected => {
                    if first_rejection.is_none() {
                        first_rejection = Some((row, attr.name.clone(), cell.to_string()));
                    }
                    keep = false;
                    break;
                }
                Binned::Unparsable(message) => {
                    return Err(Error::Parse {
                        row,
                        column: attr.name.clone(),
                        message,
                    })
                }
            }
        }
        if keep {
            for (col, v) in columns.iter_mut().zip(&row_buf) {
                col.push(*v);
            }
        } else {
            rejected += 1;
            if rejected > options.max_rejected_rows {
                let (row, column, value) = first_rejection.expect("recorded above");
                return Err(Error::UnknownCategory {
                    row,
                    column,
                    value,
                    rejected,
                    limit: options.max_rejected_rows,
                });
            }
        }
    }
    Dataset::new(schema.clone(), columns)
}
