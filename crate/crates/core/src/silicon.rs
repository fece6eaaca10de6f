//! Dies-per-wafer geometry and random-defect yield.
//!
//! Dies are squares of side `sqrt(area)`; the scribe lane widens the pitch to
//! `sqrt(area) + scribe`. The usable wafer is the disc left after removing the
//! edge-exclusion ring.

use std::f64::consts::PI;
use std::fmt;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::serde_num;

pub const DEFAULT_EDGE_EXCLUSION_MM: Decimal = Decimal::from_parts(3, 0, 0, false, 0);
pub const DEFAULT_SCRIBE_MM: Decimal = Decimal::from_parts(1, 0, 0, false, 1);
pub const DEFAULT_D0_PER_MM2: Decimal = Decimal::from_parts(1, 0, 0, false, 3);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("die area must be positive, got {0} mm²")]
    NonPositiveDieArea(Decimal),
    #[error("usable wafer diameter must be positive, got {0} mm (diameter minus twice the edge exclusion)")]
    NonPositiveUsableDiameter(Decimal),
    #[error("{0} must not be negative")]
    Negative(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaferSpec {
    #[serde(with = "serde_num")]
    pub diameter_mm: Decimal,
    #[serde(with = "serde_num")]
    pub edge_exclusion_mm: Decimal,
    #[serde(with = "serde_num")]
    pub scribe_mm: Decimal,
}

impl WaferSpec {
    /// A wafer of the given diameter with default edge exclusion and scribe.
    pub fn with_defaults(diameter_mm: Decimal) -> Self {
        WaferSpec { diameter_mm, edge_exclusion_mm: DEFAULT_EDGE_EXCLUSION_MM, scribe_mm: DEFAULT_SCRIBE_MM }
    }

    pub fn bare(diameter_mm: Decimal) -> Self {
        WaferSpec { diameter_mm, edge_exclusion_mm: Decimal::ZERO, scribe_mm: Decimal::ZERO }
    }

    pub fn usable_diameter(&self) -> Result<Decimal, GeometryError> {
        if self.edge_exclusion_mm < Decimal::ZERO {
            return Err(GeometryError::Negative("edge_exclusion_mm"));
        }
        if self.scribe_mm < Decimal::ZERO {
            return Err(GeometryError::Negative("scribe_mm"));
        }
        let usable = self.diameter_mm - self.edge_exclusion_mm * Decimal::TWO;
        if usable <= Decimal::ZERO {
            return Err(GeometryError::NonPositiveUsableDiameter(usable));
        }
        Ok(usable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YieldModel {
    #[default]
    Poisson,
    Murphy,
}

impl fmt::Display for YieldModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            YieldModel::Poisson => "poisson",
            YieldModel::Murphy => "murphy",
        })
    }
}

impl std::str::FromStr for YieldModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(YieldModel::Poisson),
            "murphy" => Ok(YieldModel::Murphy),
            _ => Err(format!("unknown yield model {s:?} (expected poisson or murphy)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YieldParams {
    pub model: YieldModel,
    /// Random defect density, defects per mm².
    #[serde(with = "serde_num")]
    pub d0_per_mm2: Decimal,
}

impl Default for YieldParams {
    fn default() -> Self {
        YieldParams { model: YieldModel::Poisson, d0_per_mm2: DEFAULT_D0_PER_MM2 }
    }
}

fn check_area(die_area_mm2: Decimal) -> Result<(), GeometryError> {
    if die_area_mm2 <= Decimal::ZERO {
        return Err(GeometryError::NonPositiveDieArea(die_area_mm2));
    }
    Ok(())
}

fn to_f64(d: Decimal) -> f64 {
    d.to_f64().expect("decimal fits in f64")
}

/// Estimated whole dies per wafer: usable disc area over die area, minus the
/// dies lost along the circumference.
pub fn gross_dies_per_wafer(wafer: &WaferSpec, die_area_mm2: Decimal) -> Result<u64, GeometryError> {
    check_area(die_area_mm2)?;
    let usable = to_f64(wafer.usable_diameter()?);
    let pitch = to_f64(die_area_mm2).sqrt() + to_f64(wafer.scribe_mm);
    let cell_area = pitch * pitch;
    let disc_area = PI * (usable / 2.0).powi(2);
    if cell_area > disc_area {
        return Ok(0);
    }
    let estimate = disc_area / cell_area - PI * usable / (2.0 * cell_area).sqrt();
    Ok(estimate.floor().max(0.0) as u64)
}

/// Square of the die pitch, exact whenever the pitch is a decimal.
enum PitchSquared {
    Exact(Decimal),
    Approx(f64),
}

/// `sqrt(value)` when it is itself a finite decimal.
fn exact_sqrt(value: Decimal) -> Option<Decimal> {
    let value = value.normalize();
    let mut mantissa = u128::try_from(value.mantissa()).ok()?;
    let mut scale = value.scale();
    if scale % 2 == 1 {
        mantissa *= 10;
        scale += 1;
    }
    let root = mantissa.isqrt();
    (root * root == mantissa).then(|| Decimal::from_i128_with_scale(root as i128, scale / 2))
}

fn pitch_squared(die_area_mm2: Decimal, scribe_mm: Decimal) -> PitchSquared {
    if scribe_mm.is_zero() {
        return PitchSquared::Exact(die_area_mm2);
    }
    if let Some(side) = exact_sqrt(die_area_mm2) {
        let pitch = side + scribe_mm;
        return PitchSquared::Exact(pitch * pitch);
    }
    // Irrational pitch: k * pitch² never equals the rational radius², so f64
    // comparison cannot land on a tie.
    let pitch = to_f64(die_area_mm2).sqrt() + to_f64(scribe_mm);
    PitchSquared::Approx(pitch * pitch)
}

/// Exact count of dies on a square grid anchored with one die corner at the
/// wafer center, keeping dies whose four corners lie in the closed usable disc.
pub fn grid_placement_oracle(wafer: &WaferSpec, die_area_mm2: Decimal) -> Result<u64, GeometryError> {
    check_area(die_area_mm2)?;
    let radius = wafer.usable_diameter()? / Decimal::TWO;
    let radius_sq = radius * radius;
    let pitch_sq = pitch_squared(die_area_mm2, wafer.scribe_mm);
    // Die (i, j) of a quadrant has its far corner at ((i+1)p, (j+1)p).
    let fits = |k: u64| match &pitch_sq {
        PitchSquared::Exact(p2) => Decimal::from(k) * *p2 <= radius_sq,
        PitchSquared::Approx(p2) => k as f64 * p2 <= to_f64(radius_sq),
    };
    let mut per_quadrant = 0u64;
    let mut column = 1u64;
    while fits(column * column + 1) {
        let mut row = 1u64;
        while fits(column * column + row * row) {
            row += 1;
        }
        per_quadrant += row - 1;
        column += 1;
    }
    Ok(4 * per_quadrant)
}

/// Fraction of dies free of random defects, in `(0, 1]`.
pub fn fab_yield(area_mm2: Decimal, params: &YieldParams) -> f64 {
    let expected_defects = to_f64((area_mm2 * params.d0_per_mm2).max(Decimal::ZERO));
    let y = match params.model {
        YieldModel::Poisson => (-expected_defects).exp(),
        YieldModel::Murphy if expected_defects == 0.0 => 1.0,
        YieldModel::Murphy => {
            let t = -(-expected_defects).exp_m1() / expected_defects;
            t * t
        }
    };
    y.clamp(f64::MIN_POSITIVE, 1.0)
}

/// Expected good dies per wafer (not floored).
pub fn good_dies_per_wafer(gross: u64, yield_fraction: f64) -> f64 {
    gross as f64 * yield_fraction
}
