//! Technology catalog: the foundry process offerings every estimate reads.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Money;
use crate::serde_num;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CatalogError {
    #[error("malformed catalog: {0}")]
    Parse(String),
    #[error("invalid node {id:?}: {}", render_violations(.violations))]
    Invalid { id: String, violations: Vec<Violation> },
    #[error("duplicate technology id {0:?}")]
    DuplicateId(String),
    #[error("unknown technology {0:?}")]
    UnknownTechnology(String),
    #[error("unknown field {0:?} in filter")]
    UnknownField(String),
    #[error("bad filter {0:?}: {1}")]
    BadFilter(String, String),
}

fn render_violations(violations: &[Violation]) -> String {
    violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AddOnKind {
    #[serde(rename = "HV")]
    HighVoltage,
    #[serde(rename = "NVM")]
    NonVolatileMemory,
    #[serde(rename = "OPTO")]
    Opto,
    #[serde(rename = "SOI")]
    SiliconOnInsulator,
}

impl AddOnKind {
    pub const ALL: [AddOnKind; 4] =
        [AddOnKind::HighVoltage, AddOnKind::NonVolatileMemory, AddOnKind::Opto, AddOnKind::SiliconOnInsulator];

    pub fn code(&self) -> &'static str {
        match self {
            AddOnKind::HighVoltage => "HV",
            AddOnKind::NonVolatileMemory => "NVM",
            AddOnKind::Opto => "OPTO",
            AddOnKind::SiliconOnInsulator => "SOI",
        }
    }
}

impl fmt::Display for AddOnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for AddOnKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AddOnKind::ALL
            .into_iter()
            .find(|k| k.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown add-on {s:?} (expected HV, NVM, OPTO or SOI)"))
    }
}

/// Optional process feature billed per mm² on top of the base MPW price.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddOn {
    pub kind: AddOnKind,
    pub surcharge_per_mm2: Money,
}

/// One foundry process offering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechnologyNode {
    pub id: String,
    pub foundry: String,
    pub node_nm: u32,
    #[serde(with = "serde_num")]
    pub core_voltage_v: Decimal,
    #[serde(with = "serde_num")]
    pub io_voltage_v: Decimal,
    #[serde(with = "serde_num")]
    pub mim_cap_density_ff_um2: Decimal,
    #[serde(with = "serde_num")]
    pub min_area_mm2: Decimal,
    pub mpw_price_per_mm2: Money,
    /// Dedicated full-mask-set NRE.
    pub mask_cost: Money,
    /// Price of one processed wafer.
    pub wafer_cost: Money,
    #[serde(with = "serde_num")]
    pub wafer_diameter_mm: Decimal,
    pub shuttles_per_year: u32,
    /// Maximum practical switching frequency.
    #[serde(with = "serde_num")]
    pub f_max_hz: Decimal,
    /// Dies delivered per MPW seat.
    pub samples_per_seat: u32,
    /// Set when some values are representative placeholders rather than quoted prices.
    #[serde(default)]
    pub illustrative: bool,
    #[serde(default)]
    pub addons: Vec<AddOn>,
}

impl TechnologyNode {
    pub fn addon(&self, kind: AddOnKind) -> Option<&AddOn> {
        self.addons.iter().find(|a| a.kind == kind)
    }

    pub fn supports(&self, kind: AddOnKind) -> bool {
        self.addon(kind).is_some()
    }
}

/// A violated node invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Violation { field: field.to_owned(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Checks every node invariant; an empty list means the node is valid.
pub fn validate_node(node: &TechnologyNode) -> Vec<Violation> {
    let mut out = Vec::new();
    if node.id.trim().is_empty() {
        out.push(Violation::new("id", "must not be empty"));
    }
    if node.node_nm == 0 {
        out.push(Violation::new("node_nm", "must be positive"));
    }
    if node.core_voltage_v <= Decimal::ZERO {
        out.push(Violation::new("core_voltage_v", "must be positive"));
    }
    if node.io_voltage_v <= Decimal::ZERO {
        out.push(Violation::new("io_voltage_v", "must be positive"));
    } else if node.io_voltage_v < node.core_voltage_v {
        out.push(Violation::new(
            "io_voltage_v",
            format!("{} V is below the core voltage {} V", node.io_voltage_v, node.core_voltage_v),
        ));
    }
    if node.mim_cap_density_ff_um2 < Decimal::ZERO {
        out.push(Violation::new("mim_cap_density_ff_um2", "must not be negative"));
    }
    if node.min_area_mm2 <= Decimal::ZERO {
        out.push(Violation::new("min_area_mm2", "must be positive"));
    }
    for (field, money) in
        [("mpw_price_per_mm2", &node.mpw_price_per_mm2), ("mask_cost", &node.mask_cost), ("wafer_cost", &node.wafer_cost)]
    {
        if money.amount_minor < 0 {
            out.push(Violation::new(field, "must not be negative"));
        }
    }
    if node.wafer_diameter_mm <= Decimal::ZERO {
        out.push(Violation::new("wafer_diameter_mm", "must be positive"));
    }
    if node.f_max_hz <= Decimal::ZERO {
        out.push(Violation::new("f_max_hz", "must be positive"));
    }
    if node.samples_per_seat == 0 {
        out.push(Violation::new("samples_per_seat", "must be at least 1"));
    }
    let mut seen = HashSet::new();
    for addon in &node.addons {
        if !seen.insert(addon.kind) {
            out.push(Violation::new("addons", format!("{} listed twice", addon.kind)));
        }
        if addon.surcharge_per_mm2.amount_minor < 0 {
            out.push(Violation::new("addons", format!("{} surcharge must not be negative", addon.kind)));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    pub version: String,
    pub currency_note: String,
    pub nodes: Vec<TechnologyNode>,
}

impl Catalog {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CatalogError> {
        let catalog: Catalog = serde_json::from_slice(bytes).map_err(|e| CatalogError::Parse(e.to_string()))?;
        catalog.check()?;
        Ok(catalog)
    }

    fn check(&self) -> Result<(), CatalogError> {
        let mut ids = HashSet::new();
        for node in &self.nodes {
            let violations = validate_node(node);
            if !violations.is_empty() {
                return Err(CatalogError::Invalid { id: node.id.clone(), violations });
            }
            if !ids.insert(node.id.as_str()) {
                return Err(CatalogError::DuplicateId(node.id.clone()));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&TechnologyNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn require(&self, id: &str) -> Result<&TechnologyNode, CatalogError> {
        self.get(id).ok_or_else(|| CatalogError::UnknownTechnology(id.to_owned()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }
}

/// Reads and validates a catalog document.
pub fn load_catalog(mut source: impl Read) -> Result<Catalog, CatalogError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes).map_err(|e| CatalogError::Parse(e.to_string()))?;
    Catalog::from_slice(&bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl FilterOp {
    fn symbol(&self) -> &'static str {
        match self {
            FilterOp::Eq => "=",
            FilterOp::Ne => "!=",
            FilterOp::Lt => "<",
            FilterOp::Le => "<=",
            FilterOp::Gt => ">",
            FilterOp::Ge => ">=",
        }
    }

    fn holds(&self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            FilterOp::Eq => ord == Equal,
            FilterOp::Ne => ord != Equal,
            FilterOp::Lt => ord == Less,
            FilterOp::Le => ord != Greater,
            FilterOp::Gt => ord == Greater,
            FilterOp::Ge => ord != Less,
        }
    }
}

/// One `field op value` clause over a [`TechnologyNode`] field.
///
/// Money fields compare by major-unit amount and ignore the currency. On
/// `addons`, `=` means "lists this add-on" and `!=` means "does not".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldFilter {
    pub field: String,
    pub op: FilterOp,
    pub value: String,
}

#[derive(Clone, Copy)]
enum FieldKind {
    Text,
    Int,
    Number,
    Money,
    Flag,
    AddOns,
}

const FIELDS: &[(&str, FieldKind)] = &[
    ("id", FieldKind::Text),
    ("foundry", FieldKind::Text),
    ("node_nm", FieldKind::Int),
    ("core_voltage_v", FieldKind::Number),
    ("io_voltage_v", FieldKind::Number),
    ("mim_cap_density_ff_um2", FieldKind::Number),
    ("min_area_mm2", FieldKind::Number),
    ("mpw_price_per_mm2", FieldKind::Money),
    ("mask_cost", FieldKind::Money),
    ("wafer_cost", FieldKind::Money),
    ("wafer_diameter_mm", FieldKind::Number),
    ("shuttles_per_year", FieldKind::Int),
    ("f_max_hz", FieldKind::Number),
    ("samples_per_seat", FieldKind::Int),
    ("illustrative", FieldKind::Flag),
    ("addons", FieldKind::AddOns),
];

enum Operand {
    Text(String),
    Number(Decimal),
    Flag(bool),
    AddOn(AddOnKind),
}

impl FieldFilter {
    pub fn new(field: impl Into<String>, op: FilterOp, value: impl Into<String>) -> Self {
        FieldFilter { field: field.into(), op, value: value.into() }
    }

    /// Parses `field<op>value`, e.g. `node_nm=180` or `shuttles_per_year>=12`.
    pub fn parse(expr: &str) -> Result<Self, CatalogError> {
        let pos = expr
            .find(['=', '!', '<', '>'])
            .ok_or_else(|| CatalogError::BadFilter(expr.to_owned(), "expected field<op>value".into()))?;
        let (field, rest) = expr.split_at(pos);
        let (op, value) = [
            (">=", FilterOp::Ge),
            ("<=", FilterOp::Le),
            ("!=", FilterOp::Ne),
            ("=", FilterOp::Eq),
            (">", FilterOp::Gt),
            ("<", FilterOp::Lt),
        ]
        .into_iter()
        .find_map(|(sym, op)| rest.strip_prefix(sym).map(|v| (op, v)))
        .ok_or_else(|| CatalogError::BadFilter(expr.to_owned(), "unknown operator".into()))?;
        Ok(FieldFilter::new(field.trim(), op, value.trim()))
    }

    fn kind(&self) -> Result<FieldKind, CatalogError> {
        FIELDS
            .iter()
            .find(|(name, _)| *name == self.field)
            .map(|(_, kind)| *kind)
            .ok_or_else(|| CatalogError::UnknownField(self.field.clone()))
    }

    fn bad(&self, why: impl Into<String>) -> CatalogError {
        CatalogError::BadFilter(self.to_string(), why.into())
    }

    fn operand(&self) -> Result<Operand, CatalogError> {
        let kind = self.kind()?;
        let ordered = !matches!(self.op, FilterOp::Eq | FilterOp::Ne);
        match kind {
            FieldKind::Text => Ok(Operand::Text(self.value.clone())),
            FieldKind::Int | FieldKind::Number | FieldKind::Money => Decimal::from_str(&self.value)
                .or_else(|_| Decimal::from_scientific(&self.value))
                .map(Operand::Number)
                .map_err(|_| self.bad("expected a number")),
            FieldKind::Flag if ordered => Err(self.bad("only = and != apply to flags")),
            FieldKind::Flag => self.value.parse().map(Operand::Flag).map_err(|_| self.bad("expected true or false")),
            FieldKind::AddOns if ordered => Err(self.bad("only = and != apply to add-ons")),
            FieldKind::AddOns => self.value.parse().map(Operand::AddOn).map_err(|e: String| self.bad(e)),
        }
    }

    fn matches(&self, node: &TechnologyNode, operand: &Operand) -> bool {
        let number = |v: Decimal| match operand {
            Operand::Number(x) => self.op.holds(v.cmp(x)),
            _ => false,
        };
        match (self.field.as_str(), operand) {
            ("id", Operand::Text(x)) => self.op.holds(node.id.as_str().cmp(x.as_str())),
            ("foundry", Operand::Text(x)) => self.op.holds(node.foundry.as_str().cmp(x.as_str())),
            ("node_nm", _) => number(node.node_nm.into()),
            ("core_voltage_v", _) => number(node.core_voltage_v),
            ("io_voltage_v", _) => number(node.io_voltage_v),
            ("mim_cap_density_ff_um2", _) => number(node.mim_cap_density_ff_um2),
            ("min_area_mm2", _) => number(node.min_area_mm2),
            ("mpw_price_per_mm2", _) => number(node.mpw_price_per_mm2.to_major()),
            ("mask_cost", _) => number(node.mask_cost.to_major()),
            ("wafer_cost", _) => number(node.wafer_cost.to_major()),
            ("wafer_diameter_mm", _) => number(node.wafer_diameter_mm),
            ("shuttles_per_year", _) => number(node.shuttles_per_year.into()),
            ("f_max_hz", _) => number(node.f_max_hz),
            ("samples_per_seat", _) => number(node.samples_per_seat.into()),
            ("illustrative", Operand::Flag(x)) => self.op.holds(node.illustrative.cmp(x)),
            ("addons", Operand::AddOn(kind)) => (self.op == FilterOp::Eq) == node.supports(*kind),
            _ => false,
        }
    }
}

impl fmt::Display for FieldFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.field, self.op.symbol(), self.value)
    }
}

/// Nodes satisfying every clause, in catalog order.
pub fn find_technologies<'a>(
    catalog: &'a Catalog,
    filters: &[FieldFilter],
) -> Result<Vec<&'a TechnologyNode>, CatalogError> {
    let operands = filters.iter().map(FieldFilter::operand).collect::<Result<Vec<_>, _>>()?;
    Ok(catalog
        .nodes
        .iter()
        .filter(|node| filters.iter().zip(&operands).all(|(f, op)| f.matches(node, op)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn node() -> TechnologyNode {
        seed::catalog().require("tsmc180gp").unwrap().clone()
    }

    #[test]
    fn seed_node_is_valid() {
        assert!(validate_node(&node()).is_empty());
    }

    #[test]
    fn zero_min_area_is_one_violation() {
        let mut n = node();
        n.min_area_mm2 = Decimal::ZERO;
        let v = validate_node(&n);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "min_area_mm2");
    }

    #[test]
    fn io_below_core_is_one_violation() {
        let mut n = node();
        n.io_voltage_v = Decimal::ONE;
        let v = validate_node(&n);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "io_voltage_v");
    }

    #[test]
    fn reports_every_violation() {
        let mut n = node();
        n.node_nm = 0;
        n.samples_per_seat = 0;
        n.mask_cost.amount_minor = -1;
        let fields: Vec<_> = validate_node(&n).into_iter().map(|v| v.field).collect();
        assert_eq!(fields, ["node_nm", "mask_cost", "samples_per_seat"]);
    }

    #[test]
    fn validation_is_pure() {
        let mut n = node();
        n.wafer_diameter_mm = Decimal::ZERO;
        assert_eq!(validate_node(&n), validate_node(&n));
    }

    #[test]
    fn loads_two_node_document() {
        let full = seed::catalog();
        let subset = Catalog {
            version: "t".into(),
            currency_note: String::new(),
            nodes: vec![full.require("tsmc180gp").unwrap().clone(), full.require("gf12").unwrap().clone()],
        };
        let loaded = load_catalog(subset.to_json_pretty().as_bytes()).unwrap();
        assert_eq!(loaded.nodes.len(), 2);
        assert_eq!(loaded, subset);
    }

    #[test]
    fn empty_node_list_is_fine() {
        let c = load_catalog(&br#"{"version":"1","currency_note":"","nodes":[]}"#[..]).unwrap();
        assert!(c.nodes.is_empty());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let n = node();
        let c = Catalog { version: "1".into(), currency_note: String::new(), nodes: vec![n.clone(), n] };
        assert_eq!(
            load_catalog(c.to_json_pretty().as_bytes()),
            Err(CatalogError::DuplicateId("tsmc180gp".into()))
        );
    }

    #[test]
    fn invalid_node_error_names_id_and_field() {
        let mut n = node();
        n.min_area_mm2 = Decimal::ZERO;
        let c = Catalog { version: "1".into(), currency_note: String::new(), nodes: vec![n] };
        let err = load_catalog(c.to_json_pretty().as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tsmc180gp") && msg.contains("min_area_mm2"), "{msg}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v = serde_json::to_value(seed::catalog()).unwrap();
        v["nodes"][0]["metal_layers"] = 6.into();
        assert!(matches!(Catalog::from_slice(v.to_string().as_bytes()), Err(CatalogError::Parse(_))));
        let mut v = serde_json::to_value(seed::catalog()).unwrap();
        v["source"] = "web".into();
        assert!(matches!(Catalog::from_slice(v.to_string().as_bytes()), Err(CatalogError::Parse(_))));
    }

    #[test]
    fn malformed_document_is_a_parse_error() {
        assert!(matches!(load_catalog(&b"{\"nodes\": ["[..]), Err(CatalogError::Parse(_))));
        let bad_currency = seed::CATALOG_JSON.replacen("\"USD\"", "\"usd\"", 1);
        assert!(matches!(Catalog::from_slice(bad_currency.as_bytes()), Err(CatalogError::Parse(_))));
    }

    #[test]
    fn filter_by_node_size() {
        let c = seed::catalog();
        let hits = find_technologies(&c, &[FieldFilter::parse("node_nm=180").unwrap()]).unwrap();
        let ids: Vec<_> = hits.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["tsmc180gp"]);
    }

    #[test]
    fn empty_filter_is_identity() {
        let c = seed::catalog();
        let hits = find_technologies(&c, &[]).unwrap();
        assert_eq!(hits.len(), c.nodes.len());
        assert!(hits.iter().zip(&c.nodes).all(|(a, b)| *a == b));
    }

    #[test]
    fn filter_by_shuttle_cadence() {
        let c = seed::catalog();
        let hits = find_technologies(&c, &[FieldFilter::parse("shuttles_per_year>=12").unwrap()]).unwrap();
        assert!(!hits.is_empty());
        assert!(hits.iter().all(|n| n.shuttles_per_year >= 12));
        let ids: Vec<_> = hits.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["tsmc180gp", "tsmc65"]);
    }

    #[test]
    fn filter_on_money_addons_and_flags() {
        let c = seed::catalog();
        let cheap = find_technologies(&c, &[FieldFilter::parse("mask_cost<100000").unwrap()]).unwrap();
        assert!(cheap.iter().all(|n| n.mask_cost.to_major() < Decimal::from(100_000)));
        let hv = find_technologies(&c, &[FieldFilter::parse("addons=hv").unwrap()]).unwrap();
        assert!(!hv.is_empty() && hv.iter().all(|n| n.supports(AddOnKind::HighVoltage)));
        let no_hv = find_technologies(&c, &[FieldFilter::parse("addons!=HV").unwrap()]).unwrap();
        assert_eq!(hv.len() + no_hv.len(), c.nodes.len());
        let ill = find_technologies(&c, &[FieldFilter::parse("illustrative=true").unwrap()]).unwrap();
        assert_eq!(ill.len(), c.nodes.iter().filter(|n| n.illustrative).count());
    }

    #[test]
    fn filter_errors() {
        let c = seed::catalog();
        assert_eq!(
            find_technologies(&c, &[FieldFilter::parse("metal_layers=6").unwrap()]),
            Err(CatalogError::UnknownField("metal_layers".into()))
        );
        assert!(matches!(
            find_technologies(&c, &[FieldFilter::parse("node_nm=abc").unwrap()]),
            Err(CatalogError::BadFilter(..))
        ));
        assert!(matches!(
            find_technologies(&c, &[FieldFilter::parse("addons>HV").unwrap()]),
            Err(CatalogError::BadFilter(..))
        ));
        assert!(FieldFilter::parse("node_nm").is_err());
        // Unknown fields are reported even against an empty catalog.
        let empty = Catalog { version: String::new(), currency_note: String::new(), nodes: vec![] };
        assert!(find_technologies(&empty, &[FieldFilter::parse("bogus=1").unwrap()]).is_err());
    }

    #[test]
    fn filter_parse_round_trips_through_display() {
        for expr in ["node_nm=180", "f_max_hz>=1e9", "id!=gf12", "min_area_mm2<2", "wafer_cost<=500"] {
            assert_eq!(FieldFilter::parse(expr).unwrap().to_string(), expr);
        }
    }
}
