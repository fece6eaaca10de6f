//! Technology selection: hard-requirement filtering followed by a weighted
//! min-max score over five criteria (unit cost, voltage complexity, passives,
//! maximum frequency, time to market).
//!
//! Normalization and scoring run on exact rationals, so scaling one raw
//! criterion by a positive constant across all candidates leaves normalized
//! values, scores and ranks bit-identical.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{AddOnKind, Catalog, CatalogError, TechnologyNode};
use crate::cost::{self, CostBreakdown, CostError, CostExtras};
use crate::money::{convert_micros, Currency, MoneyError, RateTable};
use crate::serde_num;
use crate::silicon::{WaferSpec, YieldParams, DEFAULT_EDGE_EXCLUSION_MM, DEFAULT_SCRIBE_MM};

/// Attached to every ranked report.
pub const COMPLEXITY_NOTE: &str =
    "complexity_index is a proxy: the core-voltage deficit (required - core) / core, 0 when the core voltage suffices";

const WEIGHT_SUM_TOLERANCE: Decimal = Decimal::from_parts(1, 0, 0, false, 9);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("invalid design spec: {0}")]
    InvalidSpec(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("{0} designs use a node dictated by the foundry or SoC owner; no ranking applies")]
    DictatedNode(BusinessCategory),
    #[error("no candidates to score")]
    EmptyCandidates,
    #[error("cost of {technology:?}: {source}")]
    Cost { technology: String, source: CostError },
    #[error(transparent)]
    Money(#[from] MoneyError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusinessCategory {
    /// End-customer product.
    Cat1,
    /// Stand-alone IC sold to product makers.
    Cat2,
    /// IP block; the foundry picks the node.
    Cat3,
    /// IC for a specific SoC; its owner picks the node.
    Cat4,
}

impl BusinessCategory {
    pub fn node_is_dictated(&self) -> bool {
        matches!(self, BusinessCategory::Cat3 | BusinessCategory::Cat4)
    }
}

impl fmt::Display for BusinessCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BusinessCategory::Cat1 => "cat1",
            BusinessCategory::Cat2 => "cat2",
            BusinessCategory::Cat3 => "cat3",
            BusinessCategory::Cat4 => "cat4",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarketOrientation {
    CostOriented,
    PerformanceOriented,
}

/// What the design needs from a process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    #[serde(with = "serde_num")]
    pub required_f_hz: Decimal,
    #[serde(with = "serde_num")]
    pub required_voltage_v: Decimal,
    #[serde(with = "serde_num", default)]
    pub required_cap_density_ff_um2: Decimal,
    #[serde(default)]
    pub required_addons: Vec<AddOnKind>,
    #[serde(with = "serde_num")]
    pub die_area_mm2: Decimal,
    pub volume_forecast: u64,
    pub business_category: BusinessCategory,
    pub market_orientation: MarketOrientation,
    /// Node chosen by the foundry or SoC owner; required for cat3/cat4 only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictated_node: Option<String>,
}

impl DesignSpec {
    pub fn validate(&self) -> Result<(), SelectionError> {
        let fail = |m: &str| Err(SelectionError::InvalidSpec(m.to_owned()));
        if self.required_f_hz <= Decimal::ZERO {
            return fail("required_f_hz must be positive");
        }
        if self.required_voltage_v <= Decimal::ZERO {
            return fail("required_voltage_v must be positive");
        }
        if self.required_cap_density_ff_um2 < Decimal::ZERO {
            return fail("required_cap_density_ff_um2 must not be negative");
        }
        if self.die_area_mm2 <= Decimal::ZERO {
            return fail("die_area_mm2 must be positive");
        }
        if self.volume_forecast == 0 {
            return fail("volume_forecast must be at least 1");
        }
        match (self.business_category.node_is_dictated(), &self.dictated_node) {
            (true, None) => fail("cat3/cat4 specs must name dictated_node"),
            (false, Some(_)) => fail("dictated_node applies only to cat3/cat4 specs"),
            _ => Ok(()),
        }
    }
}

/// Criterion weights in the order unit cost, complexity, passives, f_max,
/// time to market.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    #[serde(with = "serde_num")]
    pub unit_cost_w: Decimal,
    #[serde(with = "serde_num")]
    pub complexity_w: Decimal,
    #[serde(with = "serde_num")]
    pub passives_w: Decimal,
    #[serde(with = "serde_num")]
    pub f_max_w: Decimal,
    #[serde(with = "serde_num")]
    pub time_to_market_w: Decimal,
}

impl Weights {
    /// Builds weights from hundredths, e.g. `[50, 15, 10, 10, 15]`.
    const fn percent(w: [u32; 5]) -> Self {
        Weights {
            unit_cost_w: Decimal::from_parts(w[0], 0, 0, false, 2),
            complexity_w: Decimal::from_parts(w[1], 0, 0, false, 2),
            passives_w: Decimal::from_parts(w[2], 0, 0, false, 2),
            f_max_w: Decimal::from_parts(w[3], 0, 0, false, 2),
            time_to_market_w: Decimal::from_parts(w[4], 0, 0, false, 2),
        }
    }

    pub fn new(values: [Decimal; 5]) -> Result<Self, SelectionError> {
        let w = Weights {
            unit_cost_w: values[0],
            complexity_w: values[1],
            passives_w: values[2],
            f_max_w: values[3],
            time_to_market_w: values[4],
        };
        w.validate()?;
        Ok(w)
    }

    pub fn as_array(&self) -> [Decimal; 5] {
        [self.unit_cost_w, self.complexity_w, self.passives_w, self.f_max_w, self.time_to_market_w]
    }

    pub fn validate(&self) -> Result<(), SelectionError> {
        let values = self.as_array();
        if values.iter().any(|w| *w < Decimal::ZERO) {
            return Err(SelectionError::InvalidWeights("weights must not be negative".into()));
        }
        let sum: Decimal = values.iter().sum();
        if (sum - Decimal::ONE).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(SelectionError::InvalidWeights(format!("weights sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Preset weights for the business categories that choose their own node.
pub fn preset_weights(category: BusinessCategory, orientation: MarketOrientation) -> Result<Weights, SelectionError> {
    use BusinessCategory::*;
    use MarketOrientation::*;
    Ok(match (category, orientation) {
        (Cat1, CostOriented) => Weights::percent([50, 15, 10, 10, 15]),
        (Cat1, PerformanceOriented) => Weights::percent([15, 15, 15, 40, 15]),
        (Cat2, CostOriented) => Weights::percent([40, 20, 10, 15, 15]),
        (Cat2, PerformanceOriented) => Weights::percent([20, 20, 15, 30, 15]),
        (Cat3 | Cat4, _) => return Err(SelectionError::DictatedNode(category)),
    })
}

/// Nodes meeting the frequency, add-on and capacitor-density requirements,
/// in catalog order.
pub fn filter_candidates<'a>(catalog: &'a Catalog, spec: &DesignSpec) -> Vec<&'a TechnologyNode> {
    catalog
        .nodes
        .iter()
        .filter(|n| n.f_max_hz >= spec.required_f_hz)
        .filter(|n| spec.required_addons.iter().all(|k| n.supports(*k)))
        .filter(|n| n.mim_cap_density_ff_um2 >= spec.required_cap_density_ff_um2)
        .collect()
}

/// Relative shortfall of the core voltage against the design's voltage.
pub fn complexity_index(tech: &TechnologyNode, spec: &DesignSpec) -> Decimal {
    let deficit = (spec.required_voltage_v - tech.core_voltage_v).max(Decimal::ZERO);
    deficit / tech.core_voltage_v
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCriteria {
    /// Micro-units of the comparison currency per good die.
    #[serde(with = "serde_num")]
    pub unit_cost_micro: Decimal,
    #[serde(with = "serde_num")]
    pub complexity_index: Decimal,
    #[serde(with = "serde_num")]
    pub cap_density: Decimal,
    #[serde(with = "serde_num")]
    pub f_max_hz: Decimal,
    #[serde(with = "serde_num")]
    pub wait_days: Decimal,
}

impl RawCriteria {
    pub fn as_array(&self) -> [Decimal; 5] {
        [self.unit_cost_micro, self.complexity_index, self.cap_density, self.f_max_hz, self.wait_days]
    }
}

/// Per-criterion scores in `[0, 1]`; higher is better for all five.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCriteria {
    pub unit_cost: f64,
    pub complexity: f64,
    pub passives: f64,
    pub f_max: f64,
    pub time_to_market: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub technology_id: String,
    pub criteria: RawCriteria,
    pub normalized: NormalizedCriteria,
    pub score: f64,
    pub rank: u32,
    /// Native-currency production cost at the forecast volume.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostBreakdown>,
}

/// Criteria where larger raw values are better.
const BENEFIT: [bool; 5] = [false, false, true, true, false];

fn ratio(d: Decimal) -> BigRational {
    BigRational::new(BigInt::from(d.mantissa()), BigInt::from(10u8).pow(d.scale()))
}

fn normalize_column(values: &[BigRational], benefit: bool) -> Vec<BigRational> {
    let min = values.iter().min().expect("non-empty column");
    let max = values.iter().max().expect("non-empty column");
    let span = max - min;
    if span.is_zero() {
        return vec![BigRational::new(1.into(), 2.into()); values.len()];
    }
    values
        .iter()
        .map(|v| if benefit { (v - min) / &span } else { (max - v) / &span })
        .collect()
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("bounded rational")
}

/// Normalizes, scores and ranks candidates from their raw criteria.
///
/// Ranks descend by score; equal scores fall back to ascending id.
pub fn rank_criteria(
    rows: Vec<(String, RawCriteria)>,
    weights: &Weights,
) -> Result<Vec<ScoredCandidate>, SelectionError> {
    if rows.is_empty() {
        return Err(SelectionError::EmptyCandidates);
    }
    weights.validate()?;
    let columns: Vec<Vec<BigRational>> = (0..5)
        .map(|c| {
            let raw: Vec<BigRational> = rows.iter().map(|(_, r)| ratio(r.as_array()[c])).collect();
            normalize_column(&raw, BENEFIT[c])
        })
        .collect();
    let w: Vec<BigRational> = weights.as_array().into_iter().map(ratio).collect();
    let scores: Vec<BigRational> = (0..rows.len())
        .map(|i| (0..5).fold(BigRational::zero(), |acc, c| acc + &w[c] * &columns[c][i]))
        .collect();

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| match scores[b].cmp(&scores[a]) {
        Ordering::Equal => rows[a].0.cmp(&rows[b].0),
        other => other,
    });

    let mut ranked = Vec::with_capacity(rows.len());
    for (position, &i) in order.iter().enumerate() {
        let (id, criteria) = &rows[i];
        ranked.push(ScoredCandidate {
            technology_id: id.clone(),
            criteria: criteria.clone(),
            normalized: NormalizedCriteria {
                unit_cost: to_f64(&columns[0][i]),
                complexity: to_f64(&columns[1][i]),
                passives: to_f64(&columns[2][i]),
                f_max: to_f64(&columns[3][i]),
                time_to_market: to_f64(&columns[4][i]),
            },
            score: to_f64(&scores[i]),
            rank: position as u32 + 1,
            cost: None,
        });
    }
    Ok(ranked)
}

/// Wafer edge/scribe, yield and currency settings used to cost candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostInputs {
    pub edge_exclusion_mm: Decimal,
    pub scribe_mm: Decimal,
    pub yield_params: YieldParams,
    pub extras: CostExtras,
    /// Currency unit costs are compared in. When unset, candidates sharing a
    /// currency compare natively; mixed currencies go to the first currency
    /// (alphabetically) every candidate has a direct rate into.
    pub comparison_currency: Option<Currency>,
}

impl Default for CostInputs {
    fn default() -> Self {
        CostInputs {
            edge_exclusion_mm: DEFAULT_EDGE_EXCLUSION_MM,
            scribe_mm: DEFAULT_SCRIBE_MM,
            yield_params: YieldParams::default(),
            extras: CostExtras::default(),
            comparison_currency: None,
        }
    }
}

impl CostInputs {
    pub fn wafer_for(&self, tech: &TechnologyNode) -> WaferSpec {
        WaferSpec {
            diameter_mm: tech.wafer_diameter_mm,
            edge_exclusion_mm: self.edge_exclusion_mm,
            scribe_mm: self.scribe_mm,
        }
    }

    pub fn production_cost(&self, tech: &TechnologyNode, spec: &DesignSpec) -> Result<CostBreakdown, SelectionError> {
        cost::production_cost(
            tech,
            spec.die_area_mm2,
            spec.volume_forecast,
            &self.wafer_for(tech),
            &self.yield_params,
            &self.extras,
        )
        .map_err(|source| SelectionError::Cost { technology: tech.id.clone(), source })
    }
}

fn comparison_currency(
    native: &BTreeSet<Currency>,
    requested: Option<Currency>,
    rates: &RateTable,
) -> Result<Currency, SelectionError> {
    if let Some(c) = requested {
        return Ok(c);
    }
    if native.len() == 1 {
        return Ok(*native.iter().next().expect("one currency"));
    }
    let targets: BTreeSet<Currency> =
        rates.iter().map(|r| r.to_currency).chain(native.iter().copied()).collect();
    targets
        .into_iter()
        .find(|t| native.iter().all(|c| rates.get(*c, *t).is_some()))
        .ok_or_else(|| {
            let mut it = native.iter();
            let from = *it.next().expect("non-empty");
            let to = *it.next().expect("mixed");
            MoneyError::MissingRate { from, to }.into()
        })
}

/// Costs every candidate at the spec's volume and ranks them.
pub fn score_candidates(
    candidates: &[&TechnologyNode],
    spec: &DesignSpec,
    weights: &Weights,
    inputs: &CostInputs,
    rates: &RateTable,
) -> Result<(Currency, Vec<ScoredCandidate>), SelectionError> {
    if candidates.is_empty() {
        return Err(SelectionError::EmptyCandidates);
    }
    let costs =
        candidates.iter().map(|t| inputs.production_cost(t, spec)).collect::<Result<Vec<_>, _>>()?;
    let native: BTreeSet<Currency> = costs.iter().map(|c| c.currency).collect();
    let currency = comparison_currency(&native, inputs.comparison_currency, rates)?;

    let mut rows = Vec::with_capacity(candidates.len());
    for (tech, breakdown) in candidates.iter().zip(&costs) {
        let rate = rates.require(breakdown.currency, currency)?;
        let wait_days = cost::expected_shuttle_wait(tech.shuttles_per_year)
            .map_err(|source| SelectionError::Cost { technology: tech.id.clone(), source })?;
        rows.push((
            tech.id.clone(),
            RawCriteria {
                unit_cost_micro: convert_micros(breakdown.unit_cost_micro, &rate)?.into(),
                complexity_index: complexity_index(tech, spec),
                cap_density: tech.mim_cap_density_ff_um2,
                f_max_hz: tech.f_max_hz,
                wait_days,
            },
        ));
    }
    let mut ranked = rank_criteria(rows, weights)?;
    for candidate in &mut ranked {
        candidate.cost = costs.iter().find(|c| c.technology_id == candidate.technology_id).cloned();
    }
    Ok((currency, ranked))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStatus {
    Ranked,
    NoFeasibleTechnology,
    Dictated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub status: SelectionStatus,
    pub weights: Option<Weights>,
    pub comparison_currency: Option<Currency>,
    pub candidates: Vec<ScoredCandidate>,
    /// Cost of the externally chosen node for cat3/cat4 specs.
    pub dictated: Option<CostBreakdown>,
    pub notes: Vec<String>,
}

/// Filter, score and rank; cat3/cat4 specs return their dictated node's cost.
pub fn select(
    catalog: &Catalog,
    spec: &DesignSpec,
    weights: Option<Weights>,
    inputs: &CostInputs,
    rates: &RateTable,
) -> Result<SelectionReport, SelectionError> {
    spec.validate()?;
    if let Some(id) = spec.dictated_node.as_deref() {
        let tech = catalog.require(id)?;
        let breakdown = inputs.production_cost(tech, spec)?;
        return Ok(SelectionReport {
            status: SelectionStatus::Dictated,
            weights: None,
            comparison_currency: Some(breakdown.currency),
            candidates: Vec::new(),
            dictated: Some(breakdown),
            notes: vec![format!("{} designs do not choose their node; {id} is used as given", spec.business_category)],
        });
    }
    let weights = match weights {
        Some(w) => {
            w.validate()?;
            w
        }
        None => preset_weights(spec.business_category, spec.market_orientation)?,
    };
    let candidates = filter_candidates(catalog, spec);
    if candidates.is_empty() {
        return Ok(SelectionReport {
            status: SelectionStatus::NoFeasibleTechnology,
            weights: Some(weights),
            comparison_currency: None,
            candidates: Vec::new(),
            dictated: None,
            notes: vec!["no technology meets the frequency, add-on and capacitor-density requirements".into()],
        });
    }
    let (currency, ranked) = score_candidates(&candidates, spec, &weights, inputs, rates)?;
    Ok(SelectionReport {
        status: SelectionStatus::Ranked,
        weights: Some(weights),
        comparison_currency: Some(currency),
        candidates: ranked,
        dictated: None,
        notes: vec![COMPLEXITY_NOTE.into()],
    })
}
