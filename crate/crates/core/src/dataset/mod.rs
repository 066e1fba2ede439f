//! Schema, ingestion, clustering functions and columnar counts.

mod clustering;
mod counts;
mod ingest;
mod schema;

pub use clustering::{ClusterPartition, ClusteringFunction};
pub use counts::{cluster_histograms, AttrCounts, CountTable};
pub use ingest::{load_csv, load_csv_from_reader, LoadOptions};
pub use schema::{AttrId, AttributeDef, BinningKind, BinningRule, OutOfRange, Schema};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Count array over one attribute's full declared domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram<T> {
    pub attribute: AttrId,
    pub counts: Vec<T>,
}

impl<T: Copy> Histogram<T> {
    pub fn new(attribute: AttrId, counts: Vec<T>) -> Self {
        Self { attribute, counts }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn check_same_domain<U>(&self, other: &Histogram<U>) -> Result<()> {
        if self.attribute != other.attribute || self.counts.len() != other.counts.len() {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }

    pub fn map<U>(&self, f: impl Fn(T) -> U) -> Histogram<U> {
        Histogram {
            attribute: self.attribute,
            counts: self.counts.iter().map(|c| f(*c)).collect(),
        }
    }
}

impl Histogram<u64> {
    pub fn zeros(attribute: AttrId, len: usize) -> Self {
        Self::new(attribute, vec![0; len])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_scalar<S: Scalar>(&self) -> Histogram<S> {
        self.map(S::from_count)
    }
}

impl<S: Scalar> Histogram<S> {
    pub fn scalar_total(&self) -> S {
        crate::scalar::sum(self.counts.iter().copied())
    }
}

/// Immutable columnar table of domain-value indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    columns: Vec<Vec<u32>>,
    len: usize,
}

impl Dataset {
    pub fn new(schema: Schema, columns: Vec<Vec<u32>>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::LengthMismatch {
                expected: schema.len(),
                actual: columns.len(),
            });
        }
        let len = columns.first().map_or(0, Vec::len);
        for (attr, column) in schema.attributes().iter().zip(&columns) {
            if column.len() != len {
                return Err(Error::LengthMismatch {
                    expected: len,
                    actual: column.len(),
                });
            }
            let size = attr.domain_size() as u32;
            if let Some(row) = column.iter().position(|v| *v >= size) {
                return Err(Error::Parse {
                    row,
                    column: attr.name.clone(),
                    message: format!("index {} outside domain of size {size}", column[row]),
                });
            }
        }
        Ok(Self {
            schema,
            columns,
            len,
        })
    }

    pub fn empty(schema: Schema) -> Self {
        let columns = vec![Vec::new(); schema.len()];
        Self {
            schema,
            columns,
            len: 0,
        }
    }

    /// Build from row-major tuples of domain indices.
    pub fn from_rows(schema: Schema, rows: &[Vec<u32>]) -> Result<Self> {
        let mut columns = vec![Vec::with_capacity(rows.len()); schema.len()];
        for row in rows {
            if row.len() != schema.len() {
                return Err(Error::LengthMismatch {
                    expected: schema.len(),
                    actual: row.len(),
                });
            }
            for (col, v) in columns.iter_mut().zip(row) {
                col.push(*v);
            }
        }
        Self::new(schema, columns)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn column(&self, attr: AttrId) -> Result<&[u32]> {
        self.columns
            .get(attr.0)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownAttribute(attr.to_string()))
    }

    pub fn row(&self, index: usize) -> Vec<u32> {
        self.columns.iter().map(|c| c[index]).collect()
    }

    /// Neighbouring dataset with `row` appended.
    pub fn with_row_added(&self, row: &[u32]) -> Result<Self> {
        let mut columns = self.columns.clone();
        if row.len() != columns.len() {
            return Err(Error::LengthMismatch {
                expected: columns.len(),
                actual: row.len(),
            });
        }
        for (col, v) in columns.iter_mut().zip(row) {
            col.push(*v);
        }
        Self::new(self.schema.clone(), columns)
    }

    /// Neighbouring dataset with row `index` removed.
    pub fn with_row_removed(&self, index: usize) -> Self {
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.remove(index);
                c
            })
            .collect();
        Self {
            schema: self.schema.clone(),
            columns,
            len: self.len - 1,
        }
    }

    pub fn histogram(&self, attr: AttrId) -> Result<Histogram<u64>> {
        let column = self.column(attr)?;
        let mut h = Histogram::zeros(attr, self.schema.domain_size(attr)?);
        for v in column {
            h.counts[*v as usize] += 1;
        }
        Ok(h)
    }

    /// Histogram restricted to the given row indices.
    pub fn histogram_of_rows(&self, attr: AttrId, rows: &[usize]) -> Result<Histogram<u64>> {
        let column = self.column(attr)?;
        let mut h = Histogram::zeros(attr, self.schema.domain_size(attr)?);
        for r in rows {
            h.counts[column[*r] as usize] += 1;
        }
        Ok(h)
    }
}
