//! Pricing arithmetic: MPW seats, mask sharing, prototype runs, volume
//! production, dedicated-vs-MPW break-even and shuttle waiting time.

use std::collections::BTreeSet;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{AddOnKind, TechnologyNode};
use crate::money::{div_round_half_up, Currency, Money, MoneyError};
use crate::serde_num;
use crate::silicon::{self, GeometryError, WaferSpec, YieldParams};

pub const DEFAULT_SCAN_LIMIT: u64 = 10_000_000;
pub const DAYS_PER_YEAR: u32 = 365;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error(transparent)]
    Money(#[from] MoneyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("technology {technology:?} does not offer add-on {addon}")]
    UnsupportedAddon { technology: String, addon: AddOnKind },
    #[error("number of designs sharing the mask set must be at least 1")]
    ZeroDesigns,
    #[error("volume must be at least 1")]
    ZeroVolume,
    #[error("wafer count must be at least 1")]
    ZeroWafers,
    #[error("expected good dies per wafer is {good:.4}; at least 1 is required")]
    InfeasibleYield { good: f64 },
    #[error("shuttles per year must be at least 1")]
    ZeroShuttles,
    #[error("scan limit must be at least 1")]
    ZeroScanLimit,
    #[error("samples per seat must be at least 1")]
    ZeroSamplesPerSeat,
}

/// Area an MPW seat is billed for: the die area, but never below the
/// foundry's minimum.
pub fn mpw_billed_area(die_area_mm2: Decimal, min_area_mm2: Decimal) -> Decimal {
    die_area_mm2.max(min_area_mm2)
}

/// Price of one MPW seat including per-mm² add-on surcharges.
pub fn mpw_seat_cost(tech: &TechnologyNode, die_area_mm2: Decimal, addons: &[AddOnKind]) -> Result<Money, CostError> {
    if die_area_mm2 <= Decimal::ZERO {
        return Err(GeometryError::NonPositiveDieArea(die_area_mm2).into());
    }
    let mut price_per_mm2 = tech.mpw_price_per_mm2;
    for kind in addons.iter().collect::<BTreeSet<_>>() {
        let addon = tech
            .addon(*kind)
            .ok_or_else(|| CostError::UnsupportedAddon { technology: tech.id.clone(), addon: *kind })?;
        price_per_mm2 = price_per_mm2.checked_add(&addon.surcharge_per_mm2)?;
    }
    Ok(price_per_mm2.scale(mpw_billed_area(die_area_mm2, tech.min_area_mm2))?)
}

/// One design's share of a mask set split across `n_designs` designs.
pub fn shared_mask_share(mask_cost: &Money, n_designs: u32) -> Result<Money, CostError> {
    if n_designs == 0 {
        return Err(CostError::ZeroDesigns);
    }
    let share = div_round_half_up(mask_cost.amount_minor as i128, n_designs as i128);
    Ok(Money::new(share as i64, mask_cost.currency))
}

/// Dedicated mask set plus `n_wafers` processed wafers.
pub fn prototype_run_cost(tech: &TechnologyNode, n_wafers: u64) -> Result<Money, CostError> {
    if n_wafers == 0 {
        return Err(CostError::ZeroWafers);
    }
    Ok(tech.mask_cost.checked_add(&tech.wafer_cost.checked_mul(n_wafers)?)?)
}

/// Flat costs outside fabrication proper. Both default to zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostExtras {
    /// One-off EDA and design cost, added to the NRE.
    #[serde(default)]
    pub eda_nre: Option<Money>,
    /// Packaging and test per shipped unit.
    #[serde(default)]
    pub packaging_per_unit: Option<Money>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub technology_id: String,
    pub currency: Currency,
    pub volume: u64,
    /// Mask set plus any EDA NRE.
    pub nre: Money,
    pub wafers_used: u64,
    pub wafer_total: Money,
    pub packaging_total: Money,
    pub gross_dies_per_wafer: u64,
    pub yield_fraction: f64,
    pub good_dies_per_wafer: f64,
    /// Millionths of a major currency unit per good die.
    pub unit_cost_micro: i64,
    pub total: Money,
}

/// Wafers needed so that the expected good dies cover `volume`.
fn wafers_needed(volume: u64, good_dies_per_wafer: f64) -> u64 {
    (volume as f64 / good_dies_per_wafer).ceil() as u64
}

/// Dedicated-mask production cost of `volume` good dies.
pub fn production_cost(
    tech: &TechnologyNode,
    die_area_mm2: Decimal,
    volume: u64,
    wafer: &WaferSpec,
    yield_params: &YieldParams,
    extras: &CostExtras,
) -> Result<CostBreakdown, CostError> {
    if volume == 0 {
        return Err(CostError::ZeroVolume);
    }
    let gross = silicon::gross_dies_per_wafer(wafer, die_area_mm2)?;
    let yield_fraction = silicon::fab_yield(die_area_mm2, yield_params);
    let good = silicon::good_dies_per_wafer(gross, yield_fraction);
    if good < 1.0 {
        return Err(CostError::InfeasibleYield { good });
    }
    let currency = tech.mask_cost.currency;
    let nre = match extras.eda_nre {
        Some(eda) => tech.mask_cost.checked_add(&eda)?,
        None => tech.mask_cost,
    };
    let wafers_used = wafers_needed(volume, good);
    let wafer_total = tech.wafer_cost.checked_mul(wafers_used)?;
    let packaging_total = match extras.packaging_per_unit {
        Some(per_unit) => per_unit.checked_mul(volume)?,
        None => Money::zero(currency),
    };
    let total = nre.checked_add(&wafer_total)?.checked_add(&packaging_total)?;
    let unit_cost_micro = div_round_half_up(total.to_micros(), volume as i128);
    Ok(CostBreakdown {
        technology_id: tech.id.clone(),
        currency,
        volume,
        nre,
        wafers_used,
        wafer_total,
        packaging_total,
        gross_dies_per_wafer: gross,
        yield_fraction,
        good_dies_per_wafer: good,
        unit_cost_micro: i64::try_from(unit_cost_micro).map_err(|_| MoneyError::Overflow)?,
        total,
    })
}

/// The two cost curves compared by the break-even search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakEvenInputs {
    pub mask_cost: Money,
    pub wafer_cost: Money,
    pub good_dies_per_wafer: f64,
    pub seat_cost: Money,
    pub samples_per_seat: u32,
}

impl BreakEvenInputs {
    pub fn new(
        mask_cost: Money,
        wafer_cost: Money,
        good_dies_per_wafer: f64,
        seat_cost: Money,
        samples_per_seat: u32,
    ) -> Result<Self, CostError> {
        for other in [&wafer_cost, &seat_cost] {
            if other.currency != mask_cost.currency {
                return Err(MoneyError::CurrencyMismatch { expected: mask_cost.currency, found: other.currency }.into());
            }
        }
        if !(good_dies_per_wafer >= 1.0) {
            return Err(CostError::InfeasibleYield { good: good_dies_per_wafer });
        }
        if samples_per_seat == 0 {
            return Err(CostError::ZeroSamplesPerSeat);
        }
        Ok(BreakEvenInputs { mask_cost, wafer_cost, good_dies_per_wafer, seat_cost, samples_per_seat })
    }

    /// Curves for `tech`: the dedicated path uses the wafer geometry and
    /// yield, the MPW path buys seats of `samples_per_seat` dies each.
    pub fn for_technology(
        tech: &TechnologyNode,
        die_area_mm2: Decimal,
        wafer: &WaferSpec,
        yield_params: &YieldParams,
        addons: &[AddOnKind],
    ) -> Result<Self, CostError> {
        let gross = silicon::gross_dies_per_wafer(wafer, die_area_mm2)?;
        let good = silicon::good_dies_per_wafer(gross, silicon::fab_yield(die_area_mm2, yield_params));
        let seat = mpw_seat_cost(tech, die_area_mm2, addons)?;
        Self::new(tech.mask_cost, tech.wafer_cost, good, seat, tech.samples_per_seat)
    }

    fn dedicated_minor(&self, volume: u64) -> i128 {
        self.mask_cost.amount_minor as i128
            + wafers_needed(volume, self.good_dies_per_wafer) as i128 * self.wafer_cost.amount_minor as i128
    }

    fn mpw_minor(&self, volume: u64) -> i128 {
        volume.div_ceil(self.samples_per_seat as u64) as i128 * self.seat_cost.amount_minor as i128
    }

    fn money(&self, minor: i128) -> Result<Money, CostError> {
        let minor = i64::try_from(minor).map_err(|_| MoneyError::Overflow)?;
        Ok(Money::new(minor, self.mask_cost.currency))
    }

    /// Mask set plus enough wafers for `volume` expected good dies.
    pub fn dedicated_total(&self, volume: u64) -> Result<Money, CostError> {
        self.money(self.dedicated_minor(volume))
    }

    /// Enough MPW seats to receive `volume` dies.
    pub fn mpw_total(&self, volume: u64) -> Result<Money, CostError> {
        self.money(self.mpw_minor(volume))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakEvenReport {
    /// Smallest volume at which the dedicated run is no dearer than MPW seats.
    pub breakeven_volume: Option<u64>,
    /// Totals at the break-even volume, or at `scan_limit` when there is none.
    pub mpw_total_at_breakeven: Money,
    pub dedicated_total_at_breakeven: Money,
    pub scan_limit: u64,
    pub good_dies_per_wafer: f64,
    pub seat_cost: Money,
    pub samples_per_seat: u32,
}

/// Finds the smallest `V` in `1..=scan_limit` with
/// `dedicated_total(V) <= mpw_total(V)`.
///
/// Both totals are non-decreasing step functions, so the first crossing can
/// only happen at `V = 1` or right after the MPW total steps up, i.e. at
/// `V = k * samples_per_seat + 1`. Only those volumes are visited; the result
/// equals a scan over every volume.
pub fn breakeven_scan(inputs: &BreakEvenInputs, scan_limit: u64) -> Result<BreakEvenReport, CostError> {
    if scan_limit == 0 {
        return Err(CostError::ZeroScanLimit);
    }
    let step = inputs.samples_per_seat as u64;
    let found = std::iter::once(1)
        .chain((1..).map_while(|k: u64| k.checked_mul(step).and_then(|v| v.checked_add(1))))
        .take_while(|v| *v <= scan_limit)
        .find(|v| inputs.dedicated_minor(*v) <= inputs.mpw_minor(*v));
    let at = found.unwrap_or(scan_limit);
    Ok(BreakEvenReport {
        breakeven_volume: found,
        mpw_total_at_breakeven: inputs.mpw_total(at)?,
        dedicated_total_at_breakeven: inputs.dedicated_total(at)?,
        scan_limit,
        good_dies_per_wafer: inputs.good_dies_per_wafer,
        seat_cost: inputs.seat_cost,
        samples_per_seat: inputs.samples_per_seat,
    })
}

pub fn breakeven_volume(
    tech: &TechnologyNode,
    die_area_mm2: Decimal,
    wafer: &WaferSpec,
    yield_params: &YieldParams,
    addons: &[AddOnKind],
    scan_limit: u64,
) -> Result<BreakEvenReport, CostError> {
    let inputs = BreakEvenInputs::for_technology(tech, die_area_mm2, wafer, yield_params, addons)?;
    breakeven_scan(&inputs, scan_limit)
}

/// Mean days until the next shuttle when tape-out readiness falls uniformly
/// between evenly spaced shuttles.
pub fn expected_shuttle_wait(shuttles_per_year: u32) -> Result<Decimal, CostError> {
    if shuttles_per_year == 0 {
        return Err(CostError::ZeroShuttles);
    }
    Ok(Decimal::from(DAYS_PER_YEAR) / Decimal::from(2 * shuttles_per_year as u64))
}

/// Shuttle wait as reported over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuttleWait {
    pub shuttles_per_year: u32,
    #[serde(with = "serde_num")]
    pub expected_wait_days: Decimal,
}
