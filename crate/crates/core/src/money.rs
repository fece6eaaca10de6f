//! Exact money arithmetic and currency conversion.
//!
//! Amounts are integer minor units tagged with an ISO-4217 code. Exchange
//! rates are exact decimals; the only rounding step is round-half-up (away
//! from zero) when a converted or scaled value is brought back to minor units.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Micro-units (millionths of a major unit) per major unit.
pub const MICROS_PER_MAJOR: i64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MoneyError {
    #[error("invalid currency code {0:?}: expected three uppercase ASCII letters")]
    InvalidCurrency(String),
    #[error("currency mismatch: expected {expected}, found {found}")]
    CurrencyMismatch { expected: Currency, found: Currency },
    #[error("no exchange rate from {from} to {to}")]
    MissingRate { from: Currency, to: Currency },
    #[error("malformed rate snapshot: {0}")]
    Parse(String),
    #[error("duplicate rate for pair {from}->{to}")]
    DuplicatePair { from: Currency, to: Currency },
    #[error("rate for {from}->{to} must be positive, got {rate}")]
    NonPositiveRate { from: Currency, to: Currency, rate: Decimal },
    #[error("rate from {0} to itself must be exactly 1")]
    NonUnitIdentityRate(Currency),
    #[error("monetary amount overflow")]
    Overflow,
}

/// ISO-4217 currency code.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Currency([u8; 3]);

impl Currency {
    pub const USD: Currency = Currency(*b"USD");
    pub const EUR: Currency = Currency(*b"EUR");
    pub const EGP: Currency = Currency(*b"EGP");

    pub fn new(code: &str) -> Result<Self, MoneyError> {
        let bytes = code.as_bytes();
        if bytes.len() != 3 || !bytes.iter().all(u8::is_ascii_uppercase) {
            return Err(MoneyError::InvalidCurrency(code.to_owned()));
        }
        Ok(Currency([bytes[0], bytes[1], bytes[2]]))
    }

    pub fn as_str(&self) -> &str {
        // Constructed only from ASCII uppercase.
        std::str::from_utf8(&self.0).unwrap()
    }

    /// Number of decimal digits in the minor unit.
    pub fn minor_exponent(&self) -> u32 {
        match self.as_str() {
            "BIF" | "CLP" | "DJF" | "GNF" | "ISK" | "JPY" | "KMF" | "KRW" | "PYG" | "RWF" | "UGX"
            | "VND" | "VUV" | "XAF" | "XOF" | "XPF" => 0,
            "BHD" | "IQD" | "JOD" | "KWD" | "LYD" | "OMR" | "TND" => 3,
            _ => 2,
        }
    }

    /// Micro-units per minor unit (100 for two-digit currencies).
    pub fn micros_per_minor(&self) -> i64 {
        10i64.pow(6 - self.minor_exponent())
    }
}

impl fmt::Display for Currency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Currency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Currency({})", self.as_str())
    }
}

impl FromStr for Currency {
    type Err = MoneyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Currency::new(s)
    }
}

impl TryFrom<String> for Currency {
    type Error = MoneyError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Currency::new(&value)
    }
}

impl From<Currency> for String {
    fn from(c: Currency) -> String {
        c.as_str().to_owned()
    }
}

/// An exact amount of money in minor units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Money {
    pub amount_minor: i64,
    pub currency: Currency,
}

impl Money {
    pub const fn new(amount_minor: i64, currency: Currency) -> Self {
        Money { amount_minor, currency }
    }

    pub const fn zero(currency: Currency) -> Self {
        Money { amount_minor: 0, currency }
    }

    /// Parses a major-unit decimal such as `1100.00`. Extra precision is
    /// rounded half-up to the minor unit.
    pub fn from_major(amount: Decimal, currency: Currency) -> Result<Self, MoneyError> {
        let minor = amount * pow10(currency.minor_exponent());
        Ok(Money::new(round_to_i64(minor)?, currency))
    }

    /// Amount in major units, exact.
    pub fn to_major(&self) -> Decimal {
        Decimal::from_i128_with_scale(self.amount_minor as i128, self.currency.minor_exponent())
    }

    fn ensure_same(&self, other: &Money) -> Result<(), MoneyError> {
        if self.currency != other.currency {
            return Err(MoneyError::CurrencyMismatch { expected: self.currency, found: other.currency });
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Money) -> Result<Money, MoneyError> {
        self.ensure_same(other)?;
        let amount = self.amount_minor.checked_add(other.amount_minor).ok_or(MoneyError::Overflow)?;
        Ok(Money::new(amount, self.currency))
    }

    pub fn checked_sub(&self, other: &Money) -> Result<Money, MoneyError> {
        self.ensure_same(other)?;
        let amount = self.amount_minor.checked_sub(other.amount_minor).ok_or(MoneyError::Overflow)?;
        Ok(Money::new(amount, self.currency))
    }

    pub fn checked_mul(&self, factor: u64) -> Result<Money, MoneyError> {
        let amount = i64::try_from(factor)
            .ok()
            .and_then(|f| self.amount_minor.checked_mul(f))
            .ok_or(MoneyError::Overflow)?;
        Ok(Money::new(amount, self.currency))
    }

    /// Multiplies by an exact decimal factor, rounding half-up to minor units.
    pub fn scale(&self, factor: Decimal) -> Result<Money, MoneyError> {
        let product = Decimal::from(self.amount_minor)
            .checked_mul(factor)
            .ok_or(MoneyError::Overflow)?;
        Ok(Money::new(round_to_i64(product)?, self.currency))
    }

    /// Amount in micro-units of the major unit.
    pub fn to_micros(&self) -> i128 {
        self.amount_minor as i128 * self.currency.micros_per_minor() as i128
    }
}

impl fmt::Display for Money {
    /// `1100.00 USD`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", format_fixed(self.amount_minor as i128, self.currency.minor_exponent()), self.currency)
    }
}

/// Renders an integer count of `10^-scale` units with exactly `scale` digits.
pub fn format_fixed(units: i128, scale: u32) -> String {
    let sign = if units < 0 { "-" } else { "" };
    let abs = units.unsigned_abs();
    if scale == 0 {
        return format!("{sign}{abs}");
    }
    let div = 10u128.pow(scale);
    format!("{sign}{}.{:0width$}", abs / div, abs % div, width = scale as usize)
}

/// Renders micro-units of a currency, e.g. `$4.514000` or `4.514000 EUR`.
pub fn format_micros(micros: i64, currency: Currency) -> String {
    let body = format_fixed(micros as i128, 6);
    if currency == Currency::USD {
        match body.strip_prefix('-') {
            Some(rest) => format!("-${rest}"),
            None => format!("${body}"),
        }
    } else {
        format!("{body} {currency}")
    }
}

pub(crate) fn pow10(exp: u32) -> Decimal {
    Decimal::from_i128_with_scale(10i128.pow(exp), 0)
}

/// Round half-up (away from zero at the midpoint) to an integer.
pub(crate) fn round_to_i64(value: Decimal) -> Result<i64, MoneyError> {
    value
        .round_dp_with_strategy(0, RoundingStrategy::MidpointAwayFromZero)
        .to_i64()
        .ok_or(MoneyError::Overflow)
}

/// Integer division rounded half-up (away from zero), for `divisor > 0`.
pub(crate) fn div_round_half_up(numerator: i128, divisor: i128) -> i128 {
    debug_assert!(divisor > 0);
    let q = numerator / divisor;
    let r = numerator % divisor;
    if 2 * r.abs() >= divisor {
        q + numerator.signum()
    } else {
        q
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeRate {
    pub from_currency: Currency,
    pub to_currency: Currency,
    pub rate: Decimal,
    pub as_of: String,
}

impl ExchangeRate {
    pub fn new(from: Currency, to: Currency, rate: Decimal, as_of: impl Into<String>) -> Result<Self, MoneyError> {
        if rate <= Decimal::ZERO {
            return Err(MoneyError::NonPositiveRate { from, to, rate });
        }
        if from == to && rate != Decimal::ONE {
            return Err(MoneyError::NonUnitIdentityRate(from));
        }
        Ok(ExchangeRate { from_currency: from, to_currency: to, rate, as_of: as_of.into() })
    }

    pub fn identity(currency: Currency) -> Self {
        ExchangeRate { from_currency: currency, to_currency: currency, rate: Decimal::ONE, as_of: String::new() }
    }
}

/// Converts `amount` at `rate`, rounding half-up to the target's minor unit.
pub fn convert(amount: &Money, rate: &ExchangeRate) -> Result<Money, MoneyError> {
    if amount.currency != rate.from_currency {
        return Err(MoneyError::CurrencyMismatch { expected: rate.from_currency, found: amount.currency });
    }
    let from_exp = rate.from_currency.minor_exponent();
    let to_exp = rate.to_currency.minor_exponent();
    let mut value = Decimal::from(amount.amount_minor).checked_mul(rate.rate).ok_or(MoneyError::Overflow)?;
    if to_exp > from_exp {
        value = value.checked_mul(pow10(to_exp - from_exp)).ok_or(MoneyError::Overflow)?;
    } else if from_exp > to_exp {
        value *= Decimal::new(1, from_exp - to_exp);
    }
    Ok(Money::new(round_to_i64(value)?, rate.to_currency))
}

/// Converts a micro-unit amount at `rate`, rounding half-up to whole micro-units.
pub fn convert_micros(micros: i64, rate: &ExchangeRate) -> Result<i64, MoneyError> {
    let value = Decimal::from(micros).checked_mul(rate.rate).ok_or(MoneyError::Overflow)?;
    round_to_i64(value)
}

/// A snapshot of exchange rates keyed by ordered currency pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RateTable {
    pub as_of: String,
    rates: BTreeMap<(Currency, Currency), ExchangeRate>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotDoc {
    #[serde(default)]
    as_of: String,
    rates: Vec<SnapshotRate>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotRate {
    from: String,
    to: String,
    rate: String,
}

impl RateTable {
    pub fn new(as_of: impl Into<String>) -> Self {
        RateTable { as_of: as_of.into(), rates: BTreeMap::new() }
    }

    pub fn insert(&mut self, rate: ExchangeRate) -> Result<(), MoneyError> {
        let key = (rate.from_currency, rate.to_currency);
        if self.rates.contains_key(&key) {
            return Err(MoneyError::DuplicatePair { from: key.0, to: key.1 });
        }
        self.rates.insert(key, rate);
        Ok(())
    }

    /// Looks up a rate; `X -> X` is always available at 1.
    pub fn get(&self, from: Currency, to: Currency) -> Option<ExchangeRate> {
        if from == to {
            return Some(self.rates.get(&(from, to)).cloned().unwrap_or_else(|| ExchangeRate::identity(from)));
        }
        self.rates.get(&(from, to)).cloned()
    }

    pub fn require(&self, from: Currency, to: Currency) -> Result<ExchangeRate, MoneyError> {
        self.get(from, to).ok_or(MoneyError::MissingRate { from, to })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ExchangeRate> {
        self.rates.values()
    }

    /// Parses a snapshot document (see the README for the shape).
    pub fn from_slice(bytes: &[u8]) -> Result<Self, MoneyError> {
        let doc: SnapshotDoc = serde_json::from_slice(bytes).map_err(|e| MoneyError::Parse(e.to_string()))?;
        let mut table = RateTable::new(doc.as_of.clone());
        for entry in doc.rates {
            let from = Currency::new(&entry.from)?;
            let to = Currency::new(&entry.to)?;
            let rate = Decimal::from_str(entry.rate.trim())
                .map_err(|e| MoneyError::Parse(format!("rate {:?} for {from}->{to}: {e}", entry.rate)))?;
            table.insert(ExchangeRate::new(from, to, rate, doc.as_of.clone())?)?;
        }
        Ok(table)
    }

    pub fn to_snapshot_value(&self) -> serde_json::Value {
        let doc = SnapshotDoc {
            as_of: self.as_of.clone(),
            rates: self
                .rates
                .values()
                .map(|r| SnapshotRate {
                    from: r.from_currency.to_string(),
                    to: r.to_currency.to_string(),
                    rate: r.rate.to_string(),
                })
                .collect(),
        };
        serde_json::to_value(doc).expect("snapshot serializes")
    }
}

/// Reads a rate snapshot document from `source`.
pub fn load_rates(mut source: impl Read) -> Result<RateTable, MoneyError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes).map_err(|e| MoneyError::Parse(e.to_string()))?;
    RateTable::from_slice(&bytes)
}
