//! Cost models for integrated-circuit fabrication and a multi-criteria
//! ranking of CMOS technology nodes against a design's requirements.
//!
//! Money is exact throughout: amounts are integer minor units, exchange rates
//! are decimals, and per-unit costs are integer micro-units.

pub mod catalog;
pub mod cost;
pub mod silicon;
pub mod money;
pub mod seed;
pub mod selection;
pub mod serde_num;

pub use catalog::{find_technologies, load_catalog, validate_node, AddOn, AddOnKind, Catalog, CatalogError, FieldFilter, TechnologyNode};
pub use cost::{CostBreakdown, CostError};
pub use silicon::{WaferSpec, YieldModel, YieldParams};
pub use money::{convert, load_rates, Currency, ExchangeRate, Money, MoneyError, RateTable};
pub use selection::{preset_weights, select, BusinessCategory, CostInputs, DesignSpec, MarketOrientation, ScoredCandidate, SelectionError, SelectionReport, SelectionStatus, Weights};

