//! Numeric encoding of typed rows for model consumption.
//!
//! Each numeric column is min-max scaled to `[0, 1]` using bounds measured by
//! [`Encoder::fit`]. Each categorical column becomes a one-hot block in its
//! declared value order. Blocks are laid out in schema column order, so the
//! encoded width is the sum of the per-column widths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::schema::{ColumnKind, Schema};
use super::table::{Cell, DatasetTable, Provenance, Row};

/// Observed range of a numeric column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericBounds {
    pub lo: f64,
    pub hi: f64,
}

/// Fitted row encoder. Carries the schema it was fitted for plus per-column
/// numeric bounds; categorical columns need no fitted state.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    schema: Schema,
    bounds: Vec<Option<NumericBounds>>,
    offsets: Vec<usize>,
    warnings: Vec<String>,
}

impl Encoder {
    /// Measures numeric bounds on `table`. Constant numeric columns encode to
    /// zero and are reported through [`Encoder::warnings`].
    pub fn fit(table: &DatasetTable) -> Result<Encoder> {
        if table.n_rows() == 0 {
            return Err(Error::param("table", "cannot fit an encoder on an empty table"));
        }
        let schema = table.schema().clone();
        let mut bounds = Vec::with_capacity(schema.len());
        let mut warnings = Vec::new();
        for (i, col) in schema.columns().iter().enumerate() {
            match col.kind {
                ColumnKind::Numeric => {
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for row in table.rows() {
                        let v = row.cells[i].as_numeric().expect("numeric column holds numeric cells");
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    if lo == hi {
                        warnings.push(format!(
                            "numeric column \"{}\" is constant ({lo}); it encodes to 0",
                            col.name
                        ));
                    }
                    bounds.push(Some(NumericBounds { lo, hi }));
                }
                ColumnKind::Categorical(_) => bounds.push(None),
            }
        }
        Ok(Encoder { offsets: block_offsets(&schema), schema, bounds, warnings })
    }

    /// Rebuilds an encoder from stored parts, e.g. out of a checkpoint.
    pub fn from_parts(schema: Schema, bounds: Vec<Option<NumericBounds>>) -> Result<Encoder> {
        if bounds.len() != schema.len() {
            return Err(Error::param(
                "bounds",
                format!("{} entries for {} columns", bounds.len(), schema.len()),
            ));
        }
        for (i, (col, b)) in schema.columns().iter().zip(&bounds).enumerate() {
            match (&col.kind, b) {
                (ColumnKind::Numeric, Some(b)) => {
                    if !b.lo.is_finite() || !b.hi.is_finite() || b.lo > b.hi {
                        return Err(Error::param("bounds", format!("column {i} has invalid range")));
                    }
                }
                (ColumnKind::Categorical(_), None) => {}
                _ => return Err(Error::param("bounds", format!("column {i} does not match its kind"))),
            }
        }
        Ok(Encoder { offsets: block_offsets(&schema), schema, bounds, warnings: Vec::new() })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn bounds(&self) -> &[Option<NumericBounds>] {
        &self.bounds
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Encoded width of a full row.
    pub fn width(&self) -> usize {
        *self.offsets.last().expect("schema is non-empty")
    }

    /// Encoded width of the feature part (every column except the label).
    pub fn feature_width(&self) -> usize {
        self.width() - self.schema.column(self.schema.label_index()).kind.encoded_width()
    }

    /// Half-open encoded range `[start, end)` of column `col`.
    pub fn block_range(&self, col: usize) -> (usize, usize) {
        (self.offsets[col], self.offsets[col + 1])
    }

    fn encode_cell_into(&self, col: usize, cell: &Cell, out: &mut [f64]) {
        match (cell, &self.bounds[col]) {
            (Cell::Numeric { value, .. }, Some(b)) => {
                out[0] = if b.hi > b.lo { (value - b.lo) / (b.hi - b.lo) } else { 0.0 };
            }
            (Cell::Categorical(idx), None) => out[*idx] = 1.0,
            _ => unreachable!("push_row enforces cell kinds"),
        }
    }

    fn encode_columns(&self, table: &DatasetTable, skip_label: bool) -> Result<Matrix> {
        if table.schema() != &self.schema {
            return Err(Error::param("table", "schema differs from the one the encoder was fitted on"));
        }
        let label = self.schema.label_index();
        let cols: Vec<usize> = (0..self.schema.len()).filter(|&c| !(skip_label && c == label)).collect();
        let width: usize =
            cols.iter().map(|&c| self.schema.column(c).kind.encoded_width()).sum();
        let mut m = Matrix::zeros(table.n_rows(), width);
        for (r, row) in table.rows().iter().enumerate() {
            let dest = m.row_mut(r);
            let mut at = 0;
            for &c in &cols {
                let w = self.schema.column(c).kind.encoded_width();
                self.encode_cell_into(c, &row.cells[c], &mut dest[at..at + w]);
                at += w;
            }
        }
        Ok(m)
    }

    /// Encodes every column, one row per matrix row.
    pub fn encode(&self, table: &DatasetTable) -> Result<Matrix> {
        self.encode_columns(table, false)
    }

    /// Encodes every column except the label.
    pub fn encode_features(&self, table: &DatasetTable) -> Result<Matrix> {
        self.encode_columns(table, true)
    }

    /// Label column as a 0/1 vector; 1 marks the positive class (the second
    /// declared label value).
    pub fn labels(&self, table: &DatasetTable) -> Result<Vec<f64>> {
        if table.schema() != &self.schema {
            return Err(Error::param("table", "schema differs from the one the encoder was fitted on"));
        }
        let label = self.schema.label_index();
        Ok(table
            .rows()
            .iter()
            .map(|row| {
                let idx = row.cells[label].as_categorical().expect("label cell is categorical");
                if idx == 1 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect())
    }

    /// Decodes full-width encoded rows back into typed rows.
    ///
    /// Numeric slots are clamped to `[0, 1]` before inverse scaling; one-hot
    /// blocks decode by argmax with ties going to the lowest index.
    pub fn decode_rows(&self, encoded: &Matrix, provenance: Provenance) -> Result<Vec<Row>> {
        if encoded.cols() != self.width() {
            return Err(Error::shape(
                "decode_rows",
                format!("{}x{}", encoded.rows(), encoded.cols()),
                format!("_x{}", self.width()),
            ));
        }
        let mut rows = Vec::with_capacity(encoded.rows());
        for r in 0..encoded.rows() {
            let src = encoded.row(r);
            let mut cells = Vec::with_capacity(self.schema.len());
            for c in 0..self.schema.len() {
                let (start, end) = self.block_range(c);
                let block = &src[start..end];
                match &self.bounds[c] {
                    Some(b) => {
                        let unit = block[0].clamp(0.0, 1.0);
                        cells.push(Cell::numeric(b.lo + unit * (b.hi - b.lo)));
                    }
                    None => cells.push(Cell::categorical(argmax(block))),
                }
            }
            rows.push(Row { cells, provenance });
        }
        Ok(rows)
    }
}

/// Prefix sums of encoded block widths; `offsets[len]` is the total width.
fn block_offsets(schema: &Schema) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(schema.len() + 1);
    let mut at = 0;
    offsets.push(0);
    for col in schema.columns() {
        at += col.kind.encoded_width();
        offsets.push(at);
    }
    offsets
}

/// Index of the largest element; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
