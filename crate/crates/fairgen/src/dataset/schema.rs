//! Column metadata for tabular datasets.
//!
//! A [`Schema`] declares every column up front: its name, whether it holds
//! numbers or one of a closed set of category strings, and two role flags.
//! Columns marked `sensitive` define the population groups that bias audits
//! and synthesis conditions can refer to. Exactly one column carries the
//! `label` flag and must be categorical with exactly two values; the second
//! declared value is treated as the positive class throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a column holds: free numeric values or a closed set of categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    /// Declared category values, in a fixed order that encoders rely on.
    Categorical(Vec<String>),
}

impl ColumnKind {
    pub fn is_numeric(&self) -> bool {
        matches!(self, ColumnKind::Numeric)
    }

    /// Number of encoded slots this kind occupies: 1 for numeric, one per
    /// declared value for categorical.
    pub fn encoded_width(&self) -> usize {
        match self {
            ColumnKind::Numeric => 1,
            ColumnKind::Categorical(values) => values.len(),
        }
    }
}

/// One declared column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Sensitive columns define population groups; they must be categorical.
    #[serde(default)]
    pub sensitive: bool,
    /// The prediction target; exactly one column carries this flag.
    #[serde(default)]
    pub label: bool,
}

impl ColumnSpec {
    pub fn numeric(name: &str) -> Self {
        ColumnSpec { name: name.to_owned(), kind: ColumnKind::Numeric, sensitive: false, label: false }
    }

    pub fn categorical(name: &str, values: &[&str]) -> Self {
        ColumnSpec {
            name: name.to_owned(),
            kind: ColumnKind::Categorical(values.iter().map(|v| (*v).to_owned()).collect()),
            sensitive: false,
            label: false,
        }
    }

    pub fn sensitive(mut self) -> Self {
        self.sensitive = true;
        self
    }

    pub fn label(mut self) -> Self {
        self.label = true;
        self
    }
}

/// Ordered set of column declarations. Construct via [`Schema::new`], which
/// validates the invariants the rest of the crate assumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    columns: Vec<ColumnSpec>,
}

impl Schema {
    /// Validates and wraps the column list.
    ///
    /// Rejected: empty schemas, duplicate column names, duplicate values
    /// within a categorical column, empty value lists, sensitive numeric
    /// columns, and anything other than exactly one two-valued categorical
    /// label column.
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Schema> {
        if columns.is_empty() {
            return Err(Error::SchemaInvalid("schema declares no columns".into()));
        }
        for (i, col) in columns.iter().enumerate() {
            if col.name.is_empty() {
                return Err(Error::SchemaInvalid(format!("column {i} has an empty name")));
            }
            if columns[..i].iter().any(|c| c.name == col.name) {
                return Err(Error::SchemaInvalid(format!("duplicate column name \"{}\"", col.name)));
            }
            if let ColumnKind::Categorical(values) = &col.kind {
                if values.is_empty() {
                    return Err(Error::SchemaInvalid(format!(
                        "categorical column \"{}\" declares no values",
                        col.name
                    )));
                }
                for (j, v) in values.iter().enumerate() {
                    if values[..j].contains(v) {
                        return Err(Error::SchemaInvalid(format!(
                            "categorical column \"{}\" declares value \"{v}\" twice",
                            col.name
                        )));
                    }
                }
            }
            if col.sensitive && col.kind.is_numeric() {
                return Err(Error::SchemaInvalid(format!(
                    "sensitive column \"{}\" must be categorical",
                    col.name
                )));
            }
        }
        let labels: Vec<&ColumnSpec> = columns.iter().filter(|c| c.label).collect();
        match labels.as_slice() {
            [] => return Err(Error::SchemaInvalid("no column is marked as the label".into())),
            [only] => match &only.kind {
                ColumnKind::Categorical(values) if values.len() == 2 => {}
                _ => {
                    return Err(Error::SchemaInvalid(format!(
                        "label column \"{}\" must be categorical with exactly two values",
                        only.name
                    )))
                }
            },
            many => {
                let names: Vec<&str> = many.iter().map(|c| c.name.as_str()).collect();
                return Err(Error::SchemaInvalid(format!(
                    "multiple columns are marked as the label: {}",
                    names.join(", ")
                )));
            }
        }
        Ok(Schema { columns })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, index: usize) -> &ColumnSpec {
        &self.columns[index]
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Index of the unique label column.
    pub fn label_index(&self) -> usize {
        self.columns.iter().position(|c| c.label).expect("validated schema has a label")
    }

    /// The two declared label values; the second is the positive class.
    pub fn label_values(&self) -> &[String] {
        match &self.columns[self.label_index()].kind {
            ColumnKind::Categorical(values) => values,
            ColumnKind::Numeric => unreachable!("validated schema label is categorical"),
        }
    }

    pub fn sensitive_indices(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.sensitive)
            .map(|(i, _)| i)
            .collect()
    }

    /// Stable hash of the schema definition, for artifact compatibility checks.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("schema serializes");
        crate::artifact::sha256_hex(json.as_bytes())[..16].to_owned()
    }

    pub fn load(path: &std::path::Path) -> Result<Schema> {
        let bytes = std::fs::read(path)?;
        let raw: RawSchema = serde_json::from_slice(&bytes)?;
        Schema::new(raw.columns)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        crate::artifact::write_json(path, self)
    }
}

/// Deserialization half-way house so `Schema::load` always revalidates.
#[derive(Deserialize)]
struct RawSchema {
    columns: Vec<ColumnSpec>,
}
