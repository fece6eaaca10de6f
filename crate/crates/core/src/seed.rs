//! Built-in catalog and rate snapshot.

use crate::catalog::Catalog;
use crate::money::RateTable;

pub const CATALOG_JSON: &str = include_str!("../data/catalog.json");
pub const RATES_JSON: &str = include_str!("../data/rates.json");

pub fn catalog() -> Catalog {
    Catalog::from_slice(CATALOG_JSON.as_bytes()).expect("built-in catalog is valid")
}

pub fn rates() -> RateTable {
    RateTable::from_slice(RATES_JSON.as_bytes()).expect("built-in rate snapshot is valid")
}
