//! Request handling shared by the HTTP service and the CLI's `--json` mode.
//!
//! Every handler returns a typed response; both front ends serialize it with
//! `serde_json`, whose maps keep keys sorted, so identical scenarios produce
//! identical bytes.

use std::fmt;
use std::sync::Arc;

use fabdecide_core::cost::{self, BreakEvenInputs, BreakEvenReport, CostBreakdown, CostExtras, DEFAULT_SCAN_LIMIT};
use fabdecide_core::money::{convert, convert_micros, ExchangeRate};
use fabdecide_core::selection::{self, CostInputs, SelectionReport};
use fabdecide_core::silicon::{GeometryError, DEFAULT_EDGE_EXCLUSION_MM, DEFAULT_SCRIBE_MM};
use fabdecide_core::{
    find_technologies, serde_num, AddOnKind, Catalog, CatalogError, CostError, Currency, DesignSpec, FieldFilter,
    Money, MoneyError, RateTable, SelectionError, TechnologyNode, WaferSpec, Weights, YieldModel, YieldParams,
};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// A failed request: HTTP status, a stable machine-readable code and a
/// human-readable message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: u16,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: u16, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(400, "invalid_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(404, "not_found", message)
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "status": self.status, "code": self.code, "message": self.message } })
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.message, self.code)
    }
}

impl std::error::Error for ApiError {}

impl From<CatalogError> for ApiError {
    fn from(e: CatalogError) -> Self {
        let code = match e {
            CatalogError::UnknownTechnology(_) => return ApiError::new(404, "unknown_technology", e.to_string()),
            CatalogError::UnknownField(_) | CatalogError::BadFilter(..) => "bad_filter",
            CatalogError::Parse(_) | CatalogError::Invalid { .. } | CatalogError::DuplicateId(_) => {
                return ApiError::new(500, "catalog_error", e.to_string())
            }
        };
        ApiError::new(400, code, e.to_string())
    }
}

impl From<MoneyError> for ApiError {
    fn from(e: MoneyError) -> Self {
        let (status, code) = match e {
            MoneyError::MissingRate { .. } => (422, "missing_rate"),
            MoneyError::CurrencyMismatch { .. } => (422, "currency_mismatch"),
            MoneyError::Overflow => (422, "overflow"),
            _ => (400, "invalid_request"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<CostError> for ApiError {
    fn from(e: CostError) -> Self {
        let (status, code) = match &e {
            CostError::Money(m) => return m.clone().into(),
            CostError::Geometry(GeometryError::NonPositiveUsableDiameter(_)) => (422, "infeasible_geometry"),
            CostError::Geometry(_) => (400, "invalid_request"),
            CostError::UnsupportedAddon { .. } => (422, "unsupported_addon"),
            CostError::InfeasibleYield { .. } => (422, "infeasible_yield"),
            CostError::ZeroShuttles => (422, "no_shuttles"),
            CostError::ZeroSamplesPerSeat => (422, "no_mpw_samples"),
            CostError::ZeroDesigns | CostError::ZeroVolume | CostError::ZeroWafers | CostError::ZeroScanLimit => {
                (400, "invalid_request")
            }
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<SelectionError> for ApiError {
    fn from(e: SelectionError) -> Self {
        match e {
            SelectionError::InvalidSpec(_) | SelectionError::InvalidWeights(_) => ApiError::invalid(e.to_string()),
            SelectionError::DictatedNode(_) => ApiError::new(400, "dictated_node", e.to_string()),
            SelectionError::EmptyCandidates => ApiError::new(422, "no_candidates", e.to_string()),
            SelectionError::Cost { technology, source } => {
                let inner = ApiError::from(source);
                ApiError { message: format!("{technology}: {}", inner.message), ..inner }
            }
            SelectionError::Money(m) => m.into(),
            SelectionError::Catalog(c) => c.into(),
        }
    }
}

/// Wafer geometry overrides; unset fields take the technology's diameter and
/// the default edge exclusion and scribe width.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaferOverrides {
    #[serde(default, with = "serde_num::option", skip_serializing_if = "Option::is_none")]
    pub diameter_mm: Option<Decimal>,
    #[serde(default, with = "serde_num::option", skip_serializing_if = "Option::is_none")]
    pub edge_exclusion_mm: Option<Decimal>,
    #[serde(default, with = "serde_num::option", skip_serializing_if = "Option::is_none")]
    pub scribe_mm: Option<Decimal>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YieldOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<YieldModel>,
    #[serde(default, with = "serde_num::option", skip_serializing_if = "Option::is_none")]
    pub d0_per_mm2: Option<Decimal>,
}

/// Body of every POST endpoint. Estimates name a `technology_id`; selection
/// carries a full `spec`. Fields an endpoint does not use are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub technology_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<DesignSpec>,
    #[serde(default, with = "serde_num::option", skip_serializing_if = "Option::is_none")]
    pub die_area_mm2: Option<Decimal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wafer: Option<WaferOverrides>,
    #[serde(rename = "yield", default, skip_serializing_if = "Option::is_none")]
    pub yield_overrides: Option<YieldOverrides>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub addons: Vec<AddOnKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub currency_target: Option<Currency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Weights>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_limit: Option<u64>,
    /// Replaces the geometry-and-yield estimate in break-even analysis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub good_dies_per_wafer: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eda_nre: Option<Money>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packaging_per_unit: Option<Money>,
    /// Extra volumes at which break-even reports both cost curves.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sample_volumes: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    EstimateMpw,
    EstimateProduction,
    Breakeven,
    Select,
}

impl Endpoint {
    pub const ALL: [Endpoint; 4] =
        [Endpoint::EstimateMpw, Endpoint::EstimateProduction, Endpoint::Breakeven, Endpoint::Select];

    pub fn path(&self) -> &'static str {
        match self {
            Endpoint::EstimateMpw => "/v1/estimate/mpw",
            Endpoint::EstimateProduction => "/v1/estimate/production",
            Endpoint::Breakeven => "/v1/breakeven",
            Endpoint::Select => "/v1/select",
        }
    }

    fn accepts(&self) -> &'static [&'static str] {
        match self {
            Endpoint::EstimateMpw => &["technology_id", "die_area_mm2", "addons", "currency_target"],
            Endpoint::EstimateProduction => &[
                "technology_id",
                "die_area_mm2",
                "volume",
                "wafer",
                "yield",
                "currency_target",
                "eda_nre",
                "packaging_per_unit",
            ],
            Endpoint::Breakeven => &[
                "technology_id",
                "die_area_mm2",
                "wafer",
                "yield",
                "addons",
                "scan_limit",
                "good_dies_per_wafer",
                "sample_volumes",
            ],
            Endpoint::Select => &["spec", "weights", "wafer", "yield", "currency_target"],
        }
    }
}

impl ScenarioRequest {
    fn present_fields(&self) -> Vec<&'static str> {
        let flags = [
            ("technology_id", self.technology_id.is_some()),
            ("spec", self.spec.is_some()),
            ("die_area_mm2", self.die_area_mm2.is_some()),
            ("volume", self.volume.is_some()),
            ("wafer", self.wafer.is_some()),
            ("yield", self.yield_overrides.is_some()),
            ("addons", !self.addons.is_empty()),
            ("currency_target", self.currency_target.is_some()),
            ("weights", self.weights.is_some()),
            ("scan_limit", self.scan_limit.is_some()),
            ("good_dies_per_wafer", self.good_dies_per_wafer.is_some()),
            ("eda_nre", self.eda_nre.is_some()),
            ("packaging_per_unit", self.packaging_per_unit.is_some()),
            ("sample_volumes", !self.sample_volumes.is_empty()),
        ];
        flags.into_iter().filter(|(_, set)| *set).map(|(name, _)| name).collect()
    }

    /// Rejects fields that `endpoint` would otherwise silently ignore.
    pub fn check_fields(&self, endpoint: Endpoint) -> Result<(), ApiError> {
        let accepted = endpoint.accepts();
        match self.present_fields().into_iter().find(|f| !accepted.contains(f)) {
            Some(field) => Err(ApiError::invalid(format!("field {field:?} does not apply to {}", endpoint.path()))),
            None => Ok(()),
        }
    }

    fn technology_id(&self) -> Result<&str, ApiError> {
        self.technology_id.as_deref().ok_or_else(|| ApiError::invalid("technology_id is required"))
    }

    fn die_area(&self) -> Result<Decimal, ApiError> {
        match self.die_area_mm2 {
            Some(a) if a > Decimal::ZERO => Ok(a),
            Some(_) => Err(ApiError::invalid("die_area_mm2 must be positive")),
            None => Err(ApiError::invalid("die_area_mm2 is required")),
        }
    }

    fn wafer_for(&self, tech: &TechnologyNode) -> Result<WaferSpec, ApiError> {
        let o = self.wafer.unwrap_or_default();
        let wafer = WaferSpec {
            diameter_mm: o.diameter_mm.unwrap_or(tech.wafer_diameter_mm),
            edge_exclusion_mm: o.edge_exclusion_mm.unwrap_or(DEFAULT_EDGE_EXCLUSION_MM),
            scribe_mm: o.scribe_mm.unwrap_or(DEFAULT_SCRIBE_MM),
        };
        if wafer.diameter_mm <= Decimal::ZERO {
            return Err(ApiError::invalid("wafer.diameter_mm must be positive"));
        }
        if wafer.edge_exclusion_mm < Decimal::ZERO || wafer.scribe_mm < Decimal::ZERO {
            return Err(ApiError::invalid("wafer edge exclusion and scribe must not be negative"));
        }
        Ok(wafer)
    }

    fn yield_params(&self) -> Result<YieldParams, ApiError> {
        let o = self.yield_overrides.unwrap_or_default();
        let defaults = YieldParams::default();
        let params = YieldParams {
            model: o.model.unwrap_or(defaults.model),
            d0_per_mm2: o.d0_per_mm2.unwrap_or(defaults.d0_per_mm2),
        };
        if params.d0_per_mm2 < Decimal::ZERO {
            return Err(ApiError::invalid("yield.d0_per_mm2 must not be negative"));
        }
        Ok(params)
    }
}

/// A converted amount and the rate that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversion {
    pub amount: Money,
    pub rate: ExchangeRate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MpwEstimate {
    pub technology_id: String,
    #[serde(with = "serde_num")]
    pub die_area_mm2: Decimal,
    #[serde(with = "serde_num")]
    pub billed_area_mm2: Decimal,
    pub addons: Vec<AddOnKind>,
    pub seat_cost: Money,
    pub samples_per_seat: u32,
    pub converted: Option<Conversion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvertedProduction {
    pub total: Money,
    pub unit_cost_micro: i64,
    pub rate: ExchangeRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionEstimate {
    #[serde(flatten)]
    pub breakdown: CostBreakdown,
    pub wafer: WaferSpec,
    #[serde(rename = "yield")]
    pub yield_params: YieldParams,
    pub converted: Option<ConvertedProduction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub volume: u64,
    pub mpw_total: Money,
    pub dedicated_total: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakevenEstimate {
    pub technology_id: String,
    #[serde(flatten)]
    pub report: BreakEvenReport,
    pub curve: Vec<CurvePoint>,
}

/// Stateless request handlers over an immutable catalog.
#[derive(Debug, Clone)]
pub struct Api {
    catalog: Arc<Catalog>,
}

impl Api {
    pub fn new(catalog: Catalog) -> Self {
        Api { catalog: Arc::new(catalog) }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    fn tech(&self, id: &str) -> Result<&TechnologyNode, ApiError> {
        Ok(self.catalog.require(id)?)
    }

    /// Catalog listing, optionally narrowed by filters such as `node_nm<=180`.
    pub fn technologies(&self, filters: &[String]) -> Result<Value, ApiError> {
        let parsed = filters.iter().map(|f| FieldFilter::parse(f)).collect::<Result<Vec<_>, _>>()?;
        let nodes = find_technologies(&self.catalog, &parsed)?;
        Ok(json!({
            "version": self.catalog.version,
            "currency_note": self.catalog.currency_note,
            "technologies": nodes,
        }))
    }

    pub fn technology(&self, id: &str) -> Result<Value, ApiError> {
        to_value(self.tech(id)?)
    }

    pub fn estimate_mpw(&self, req: &ScenarioRequest, rates: &RateTable) -> Result<MpwEstimate, ApiError> {
        req.check_fields(Endpoint::EstimateMpw)?;
        let tech = self.tech(req.technology_id()?)?;
        let area = req.die_area()?;
        let seat_cost = cost::mpw_seat_cost(tech, area, &req.addons)?;
        let converted = match req.currency_target {
            Some(target) => {
                let rate = rates.require(seat_cost.currency, target)?;
                Some(Conversion { amount: convert(&seat_cost, &rate)?, rate })
            }
            None => None,
        };
        Ok(MpwEstimate {
            technology_id: tech.id.clone(),
            die_area_mm2: area,
            billed_area_mm2: cost::mpw_billed_area(area, tech.min_area_mm2),
            addons: req.addons.clone(),
            seat_cost,
            samples_per_seat: tech.samples_per_seat,
            converted,
        })
    }

    pub fn estimate_production(
        &self,
        req: &ScenarioRequest,
        rates: &RateTable,
    ) -> Result<ProductionEstimate, ApiError> {
        req.check_fields(Endpoint::EstimateProduction)?;
        let tech = self.tech(req.technology_id()?)?;
        let area = req.die_area()?;
        let volume = req.volume.ok_or_else(|| ApiError::invalid("volume is required"))?;
        let wafer = req.wafer_for(tech)?;
        let yield_params = req.yield_params()?;
        let extras = CostExtras { eda_nre: req.eda_nre, packaging_per_unit: req.packaging_per_unit };
        let breakdown = cost::production_cost(tech, area, volume, &wafer, &yield_params, &extras)?;
        let converted = match req.currency_target {
            Some(target) => {
                let rate = rates.require(breakdown.currency, target)?;
                Some(ConvertedProduction {
                    total: convert(&breakdown.total, &rate)?,
                    unit_cost_micro: convert_micros(breakdown.unit_cost_micro, &rate)?,
                    rate,
                })
            }
            None => None,
        };
        Ok(ProductionEstimate { breakdown, wafer, yield_params, converted })
    }

    pub fn breakeven(&self, req: &ScenarioRequest) -> Result<BreakevenEstimate, ApiError> {
        req.check_fields(Endpoint::Breakeven)?;
        let tech = self.tech(req.technology_id()?)?;
        let area = req.die_area()?;
        let inputs = match req.good_dies_per_wafer {
            Some(good) => {
                if req.wafer.is_some() || req.yield_overrides.is_some() {
                    return Err(ApiError::invalid("good_dies_per_wafer replaces the wafer and yield settings"));
                }
                let seat = cost::mpw_seat_cost(tech, area, &req.addons)?;
                BreakEvenInputs::new(tech.mask_cost, tech.wafer_cost, good, seat, tech.samples_per_seat)?
            }
            None => BreakEvenInputs::for_technology(
                tech,
                area,
                &req.wafer_for(tech)?,
                &req.yield_params()?,
                &req.addons,
            )?,
        };
        let report = cost::breakeven_scan(&inputs, req.scan_limit.unwrap_or(DEFAULT_SCAN_LIMIT))?;
        let curve = req
            .sample_volumes
            .iter()
            .map(|&volume| {
                if volume == 0 {
                    return Err(ApiError::invalid("sample volumes must be at least 1"));
                }
                Ok(CurvePoint {
                    volume,
                    mpw_total: inputs.mpw_total(volume)?,
                    dedicated_total: inputs.dedicated_total(volume)?,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BreakevenEstimate { technology_id: tech.id.clone(), report, curve })
    }

    pub fn select(&self, req: &ScenarioRequest, rates: &RateTable) -> Result<SelectionReport, ApiError> {
        req.check_fields(Endpoint::Select)?;
        let spec = req.spec.as_ref().ok_or_else(|| ApiError::invalid("spec is required"))?;
        let o = req.wafer.unwrap_or_default();
        if o.diameter_mm.is_some() {
            return Err(ApiError::invalid("wafer.diameter_mm does not apply to selection; each node uses its own"));
        }
        let inputs = CostInputs {
            edge_exclusion_mm: o.edge_exclusion_mm.unwrap_or(DEFAULT_EDGE_EXCLUSION_MM),
            scribe_mm: o.scribe_mm.unwrap_or(DEFAULT_SCRIBE_MM),
            yield_params: req.yield_params()?,
            extras: CostExtras::default(),
            comparison_currency: req.currency_target,
        };
        if inputs.edge_exclusion_mm < Decimal::ZERO || inputs.scribe_mm < Decimal::ZERO {
            return Err(ApiError::invalid("wafer edge exclusion and scribe must not be negative"));
        }
        Ok(selection::select(&self.catalog, spec, req.weights, &inputs, rates)?)
    }

    /// Dispatches a parsed request to `endpoint` and renders the result.
    pub fn post(&self, endpoint: Endpoint, req: &ScenarioRequest, rates: &RateTable) -> Result<Value, ApiError> {
        match endpoint {
            Endpoint::EstimateMpw => to_value(&self.estimate_mpw(req, rates)?),
            Endpoint::EstimateProduction => to_value(&self.estimate_production(req, rates)?),
            Endpoint::Breakeven => to_value(&self.breakeven(req)?),
            Endpoint::Select => to_value(&self.select(req, rates)?),
        }
    }

    pub fn post_json(&self, endpoint: Endpoint, body: &[u8], rates: &RateTable) -> Result<Value, ApiError> {
        self.post(endpoint, &parse_request(body)?, rates)
    }
}

pub fn parse_request(body: &[u8]) -> Result<ScenarioRequest, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        let code = if e.is_data() { "invalid_request" } else { "malformed_body" };
        ApiError::new(400, code, e.to_string())
    })
}

pub fn to_value<T: Serialize + ?Sized>(value: &T) -> Result<Value, ApiError> {
    serde_json::to_value(value).map_err(|e| ApiError::new(500, "internal", e.to_string()))
}

/// Rate table as served by `GET /v1/rates`.
pub fn rates_body(table: &RateTable, source: &str, warning: Option<&str>) -> Value {
    let mut body = table.to_snapshot_value();
    body["source"] = json!(source);
    body["warning"] = json!(warning);
    body
}

pub fn health_body(catalog: &Catalog, rates_as_of: &str) -> Value {
    json!({
        "status": "ok",
        "catalog_version": catalog.version,
        "technologies": catalog.nodes.len(),
        "rates_as_of": rates_as_of,
    })
}
