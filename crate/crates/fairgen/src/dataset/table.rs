//! Typed row storage with CSV ingest, group predicates, stratified splits,
//! and synthetic-row augmentation.
//!
//! Numeric cells remember the exact text they were parsed from, so a table
//! loaded from CSV and written back reproduces its values byte for byte.
//! Every saved file carries a trailing `provenance` column recording whether
//! each row came from the source data or from a generator.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::schema::{ColumnKind, Schema};

/// Where a row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Synthetic,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Synthetic => "synthetic",
        }
    }

    fn parse(text: &str) -> Option<Provenance> {
        match text {
            "original" => Some(Provenance::Original),
            "synthetic" => Some(Provenance::Synthetic),
            _ => None,
        }
    }
}

/// One value in a row.
///
/// Numeric cells keep the source lexeme alongside the parsed value so that
/// saving a loaded table changes no bytes. Categorical cells store the index
/// into the column's declared value list.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Numeric { value: f64, lexeme: String },
    Categorical(usize),
}

impl Cell {
    /// Numeric cell with a canonical lexeme (shortest round-tripping digits).
    pub fn numeric(value: f64) -> Cell {
        Cell::Numeric { value, lexeme: format_numeric(value) }
    }

    pub fn categorical(index: usize) -> Cell {
        Cell::Categorical(index)
    }

    pub fn as_numeric(&self) -> Option<f64> {
        match self {
            Cell::Numeric { value, .. } => Some(*value),
            Cell::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<usize> {
        match self {
            Cell::Numeric { .. } => None,
            Cell::Categorical(index) => Some(*index),
        }
    }
}

/// Canonical text form of a numeric value. `{}` on f64 emits the shortest
/// digit string that parses back to the same bits.
pub fn format_numeric(value: f64) -> String {
    format!("{value}")
}

/// One dataset row: cells in schema column order plus a provenance tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub cells: Vec<Cell>,
    pub provenance: Provenance,
}

/// A schema plus the rows that conform to it.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    schema: Schema,
    rows: Vec<Row>,
}

impl DatasetTable {
    pub fn new(schema: Schema) -> DatasetTable {
        DatasetTable { schema, rows: Vec::new() }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Appends a row after checking it against the schema.
    pub fn push_row(&mut self, row: Row) -> Result<()> {
        if row.cells.len() != self.schema.len() {
            return Err(Error::param(
                "row",
                format!("has {} cells but the schema has {} columns", row.cells.len(), self.schema.len()),
            ));
        }
        for (i, cell) in row.cells.iter().enumerate() {
            let col = self.schema.column(i);
            match (&col.kind, cell) {
                (ColumnKind::Numeric, Cell::Numeric { value, .. }) => {
                    if !value.is_finite() {
                        return Err(Error::param("row", format!("non-finite value in column \"{}\"", col.name)));
                    }
                }
                (ColumnKind::Categorical(values), Cell::Categorical(idx)) => {
                    if *idx >= values.len() {
                        return Err(Error::param(
                            "row",
                            format!("category index {idx} out of range for column \"{}\"", col.name),
                        ));
                    }
                }
                _ => {
                    return Err(Error::param("row", format!("cell type mismatch in column \"{}\"", col.name)));
                }
            }
        }
        self.rows.push(row);
        Ok(())
    }

    /// Reads a CSV file whose header matches the schema's column names in
    /// order, with an optional trailing `provenance` column. Rows without a
    /// provenance column are tagged [`Provenance::Original`].
    pub fn load_csv(path: &Path, schema: &Schema) -> Result<DatasetTable> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_path(path)?;
        let mut records = reader.records();

        let header = match records.next() {
            Some(record) => record?,
            None => return Err(Error::Ingest { line: 1, reason: "file is empty".into() }),
        };
        let expected: Vec<&str> = schema.columns().iter().map(|c| c.name.as_str()).collect();
        let got: Vec<&str> = header.iter().collect();
        let has_provenance = match got.len() {
            n if n == expected.len() => false,
            n if n == expected.len() + 1 && got[expected.len()] == "provenance" => true,
            _ => {
                return Err(Error::Ingest {
                    line: 1,
                    reason: format!(
                        "header has {} columns but the schema declares {}",
                        got.len(),
                        expected.len()
                    ),
                })
            }
        };
        for (i, name) in expected.iter().enumerate() {
            if got[i] != *name {
                return Err(Error::Ingest {
                    line: 1,
                    reason: format!("header column {} is \"{}\" but the schema declares \"{}\"", i + 1, got[i], name),
                });
            }
        }

        let mut table = DatasetTable::new(schema.clone());
        for record in records {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let want = expected.len() + usize::from(has_provenance);
            if record.len() != want {
                return Err(Error::Ingest {
                    line,
                    reason: format!("row has {} fields, expected {want}", record.len()),
                });
            }
            let mut cells = Vec::with_capacity(schema.len());
            for (i, field) in record.iter().take(schema.len()).enumerate() {
                cells.push(parse_cell(field, schema, i, line)?);
            }
            let provenance = if has_provenance {
                let field = &record[schema.len()];
                Provenance::parse(field).ok_or_else(|| Error::Ingest {
                    line,
                    reason: format!("unknown provenance \"{field}\" (expected \"original\" or \"synthetic\")"),
                })?
            } else {
                Provenance::Original
            };
            table.rows.push(Row { cells, provenance });
        }
        if table.rows.is_empty() {
            return Err(Error::Ingest { line: 1, reason: "file contains no data rows".into() });
        }
        Ok(table)
    }

    /// Writes the table as CSV with a trailing `provenance` column. The write
    /// is atomic: the file appears complete or not at all.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = self.schema.columns().iter().map(|c| c.name.as_str()).collect();
        header.push("provenance");
        writer.write_record(&header)?;
        for row in &self.rows {
            let mut record: Vec<&str> = Vec::with_capacity(row.cells.len() + 1);
            for (i, cell) in row.cells.iter().enumerate() {
                match (cell, &self.schema.column(i).kind) {
                    (Cell::Numeric { lexeme, .. }, _) => record.push(lexeme),
                    (Cell::Categorical(idx), ColumnKind::Categorical(values)) => record.push(&values[*idx]),
                    (Cell::Categorical(_), ColumnKind::Numeric) => {
                        return Err(Error::param("table", "categorical cell in numeric column"))
                    }
                }
            }
            record.push(row.provenance.as_str());
            writer.write_record(&record)?;
        }
        let bytes = writer.into_inner().map_err(|e| Error::param("csv", e.to_string()))?;
        crate::artifact::atomic_write(path, &bytes)
    }

    /// Indices of rows matching the predicate.
    pub fn filter(&self, predicate: &GroupPredicate) -> Result<Vec<usize>> {
        let bound = predicate.bind(&self.schema)?;
        Ok((0..self.rows.len()).filter(|&i| bound.matches(&self.rows[i])).collect())
    }

    /// Number of rows matching the predicate.
    pub fn group_count(&self, predicate: &GroupPredicate) -> Result<usize> {
        Ok(self.filter(predicate)?.len())
    }

    /// New table containing clones of the rows at `indices`.
    pub fn subset(&self, indices: &[usize]) -> DatasetTable {
        DatasetTable {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Splits into train/validation/test parts, stratified by label so each
    /// part preserves the class balance as closely as counting allows.
    ///
    /// All three fractions must be positive and sum to 1. Within each label
    /// stratum, rows are shuffled, apportioned by largest remainder, and the
    /// resulting parts keep the original row order. Errors if any part ends
    /// up empty.
    pub fn split(
        &self,
        fractions: (f64, f64, f64),
        rng: &mut crate::numerics::SeededRng,
    ) -> Result<(DatasetTable, DatasetTable, DatasetTable)> {
        let fracs = [fractions.0, fractions.1, fractions.2];
        for (i, f) in fracs.iter().enumerate() {
            if !f.is_finite() || *f <= 0.0 {
                return Err(Error::param("fractions", format!("part {} must be positive, got {f}", i + 1)));
            }
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::param("fractions", format!("must sum to 1, got {sum}")));
        }

        let label_col = self.schema.label_index();
        let mut strata: Vec<Vec<usize>> = vec![Vec::new(), Vec::new()];
        for (i, row) in self.rows.iter().enumerate() {
            let class = row.cells[label_col].as_categorical().expect("label cell is categorical");
            strata[class].push(i);
        }

        let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for stratum in &mut strata {
            rng.shuffle(stratum);
            let counts = largest_remainder(stratum.len(), &fracs);
            let mut offset = 0;
            for (part, &count) in parts.iter_mut().zip(&counts) {
                part.extend_from_slice(&stratum[offset..offset + count]);
                offset += count;
            }
        }
        for part in &mut parts {
            part.sort_unstable();
        }
        let [train, val, test] = parts;
        for (name, part) in [("train", &train), ("validation", &val), ("test", &test)] {
            if part.is_empty() {
                return Err(Error::param(
                    "fractions",
                    format!("{name} part is empty for {} rows", self.rows.len()),
                ));
            }
        }
        Ok((self.subset(&train), self.subset(&val), self.subset(&test)))
    }

    /// Appends synthetic rows from `pool` according to `plan`.
    ///
    /// For each plan entry, the target count is `round(fraction * n)` where
    /// `n` is the number of original-provenance rows here that match the
    /// entry's group. Pool rows are consumed in order, each at most once, and
    /// appended with synthetic provenance. Existing rows are not touched.
    /// Errors if the pool runs short for any entry.
    pub fn augment(&self, pool: &DatasetTable, plan: &AugmentationPlan) -> Result<DatasetTable> {
        if pool.schema != self.schema {
            return Err(Error::param("pool", "schema differs from the table being augmented"));
        }
        let mut out = self.clone();
        let mut consumed = vec![false; pool.rows.len()];
        for entry in &plan.entries {
            if !entry.fraction.is_finite() || entry.fraction < 0.0 {
                return Err(Error::param("fraction", format!("must be non-negative, got {}", entry.fraction)));
            }
            let bound = entry.group.bind(&self.schema)?;
            let group_size = self
                .rows
                .iter()
                .filter(|r| r.provenance == Provenance::Original && bound.matches(r))
                .count();
            let needed = (entry.fraction * group_size as f64).round() as usize;
            let mut taken = 0;
            for (i, row) in pool.rows.iter().enumerate() {
                if taken == needed {
                    break;
                }
                if consumed[i] || !bound.matches(row) {
                    continue;
                }
                consumed[i] = true;
                let mut row = row.clone();
                row.provenance = Provenance::Synthetic;
                out.rows.push(row);
                taken += 1;
            }
            if taken < needed {
                return Err(Error::PoolShortfall {
                    predicate: entry.group.to_string(),
                    needed,
                    available: taken,
                });
            }
        }
        Ok(out)
    }
}

fn parse_cell(field: &str, schema: &Schema, col: usize, line: u64) -> Result<Cell> {
    let spec = schema.column(col);
    match &spec.kind {
        ColumnKind::Numeric => {
            let value = f64::from_str(field).map_err(|_| Error::Ingest {
                line,
                reason: format!("cannot parse \"{field}\" as a number in column \"{}\"", spec.name),
            })?;
            if !value.is_finite() {
                return Err(Error::Ingest {
                    line,
                    reason: format!("non-finite value \"{field}\" in column \"{}\"", spec.name),
                });
            }
            Ok(Cell::Numeric { value, lexeme: field.to_owned() })
        }
        ColumnKind::Categorical(values) => {
            let index = values.iter().position(|v| v == field).ok_or_else(|| Error::Ingest {
                line,
                reason: format!("unknown value \"{field}\" for column \"{}\"", spec.name),
            })?;
            Ok(Cell::Categorical(index))
        }
    }
}

/// Apportions `n` items across parts by quota, assigning leftovers to the
/// largest fractional remainders (ties to the earlier part).
fn largest_remainder(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for i in 0..(n - assigned) {
        counts[order[i % order.len()]] += 1;
    }
    counts
}

/// Conjunction of `column=value` terms over sensitive categorical columns.
///
/// Parsed from text like `"Gender=Female,Ethnicity=AfricanAmerican"`. Parsing
/// checks syntax only; [`GroupPredicate::bind`] resolves the terms against a
/// schema and rejects unknown columns, non-sensitive columns, and undeclared
/// values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPredicate {
    terms: Vec<(String, String)>,
}

impl GroupPredicate {
    /// Single-term predicate `column=value`.
    pub fn single(column: &str, value: &str) -> GroupPredicate {
        GroupPredicate { terms: vec![(column.to_owned(), value.to_owned())] }
    }

    pub fn terms(&self) -> &[(String, String)] {
        &self.terms
    }

    /// Resolves column and value names against a schema.
    pub fn bind(&self, schema: &Schema) -> Result<BoundPredicate> {
        let mut pairs = Vec::with_capacity(self.terms.len());
        for (column, value) in &self.terms {
            let col = schema
                .find(column)
                .ok_or_else(|| Error::param("group", format!("unknown column \"{column}\"")))?;
            let spec = schema.column(col);
            if !spec.sensitive {
                return Err(Error::param("group", format!("column \"{column}\" is not marked sensitive")));
            }
            let values = match &spec.kind {
                ColumnKind::Categorical(values) => values,
                ColumnKind::Numeric => {
                    return Err(Error::param("group", format!("column \"{column}\" is not categorical")))
                }
            };
            let idx = values.iter().position(|v| v == value).ok_or_else(|| {
                Error::param("group", format!("column \"{column}\" has no value \"{value}\""))
            })?;
            pairs.push((col, idx));
        }
        Ok(BoundPredicate { pairs })
    }
}

impl FromStr for GroupPredicate {
    type Err = Error;

    fn from_str(text: &str) -> Result<GroupPredicate> {
        let mut terms = Vec::new();
        for part in text.split(',') {
            let part = part.trim();
            let (column, value) = part.split_once('=').ok_or_else(|| {
                Error::param("group", format!("term \"{part}\" is not of the form column=value"))
            })?;
            let (column, value) = (column.trim(), value.trim());
            if column.is_empty() || value.is_empty() {
                return Err(Error::param("group", format!("term \"{part}\" has an empty column or value")));
            }
            if terms.iter().any(|(c, _): &(String, String)| c == column) {
                return Err(Error::param("group", format!("column \"{column}\" appears twice")));
            }
            terms.push((column.to_owned(), value.to_owned()));
        }
        if terms.is_empty() {
            return Err(Error::param("group", "predicate is empty"));
        }
        Ok(GroupPredicate { terms })
    }
}

impl fmt::Display for GroupPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (column, value)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{column}={value}")?;
        }
        Ok(())
    }
}

impl Serialize for GroupPredicate {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for GroupPredicate {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A predicate resolved to (column index, value index) pairs for fast row tests.
#[derive(Debug)]
pub struct BoundPredicate {
    pairs: Vec<(usize, usize)>,
}

impl BoundPredicate {
    pub fn matches(&self, row: &Row) -> bool {
        self.pairs.iter().all(|&(col, val)| row.cells[col] == Cell::Categorical(val))
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// Which groups to augment and by how much.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub entries: Vec<PlanEntry>,
}

/// One group plus the synthetic fraction to add, relative to the group's
/// original row count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub group: GroupPredicate,
    pub fraction: f64,
}
