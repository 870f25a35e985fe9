//! Tabular data handling: schemas, typed tables, CSV I/O, group predicates,
//! stratified splitting, augmentation, and numeric encoding.

mod encode;
mod schema;
mod table;

pub use encode::{argmax, Encoder, NumericBounds};
pub use schema::{ColumnKind, ColumnSpec, Schema};
pub use table::{
    format_numeric, AugmentationPlan, BoundPredicate, Cell, DatasetTable, GroupPredicate, PlanEntry,
    Provenance, Row,
};
