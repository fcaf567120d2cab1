//! Test identity and conditions: who ran the test, on what cell, and how.
//!
//! Test names in the wild follow an underscore-delimited grammar,
//! `LAB_FORM_CHEM_TEMPC_LO-HI_CHG-DISC`, e.g.
//! `HNEI_18650_NMC_LCO_25C_0-100_0.5-1.5C`. [`parse_test_name`] decodes that
//! grammar; anything it cannot decode must be supplied by the manifest.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::IngestError;

/// Cathode chemistry of the cell under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Chemistry {
    #[serde(rename = "LCO")]
    Lco,
    #[serde(rename = "NMC_LCO")]
    NmcLco,
    #[serde(rename = "LFP")]
    Lfp,
    #[serde(rename = "NCA")]
    Nca,
    #[serde(rename = "NMC")]
    Nmc,
    #[serde(rename = "OTHER")]
    Other,
}

impl Chemistry {
    /// Token used inside the underscore-delimited test-name grammar.
    pub fn grammar_token(self) -> &'static str {
        match self {
            Chemistry::Lco => "LCO",
            Chemistry::NmcLco => "NMC_LCO",
            Chemistry::Lfp => "LFP",
            Chemistry::Nca => "NCA",
            Chemistry::Nmc => "NMC",
            Chemistry::Other => "OTHER",
        }
    }

    fn from_grammar_token(token: &str) -> Option<Self> {
        match token {
            "LCO" => Some(Chemistry::Lco),
            "NMC_LCO" => Some(Chemistry::NmcLco),
            "LFP" => Some(Chemistry::Lfp),
            "NCA" => Some(Chemistry::Nca),
            "NMC" => Some(Chemistry::Nmc),
            "OTHER" => Some(Chemistry::Other),
            _ => None,
        }
    }
}

impl fmt::Display for Chemistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Hyphenated form for human-facing tables; the grammar keeps underscores.
        let s = match self {
            Chemistry::NmcLco => "NMC-LCO",
            other => other.grammar_token(),
        };
        f.write_str(s)
    }
}

impl FromStr for Chemistry {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "NMC-LCO" => Ok(Chemistry::NmcLco),
            other => Chemistry::from_grammar_token(other)
                .ok_or_else(|| format!("unknown chemistry '{other}'")),
        }
    }
}

/// SOC window cycled during the test, in percent of nominal capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocWindow {
    pub low_pct: f64,
    pub high_pct: f64,
}

impl SocWindow {
    pub fn new(low_pct: f64, high_pct: f64) -> Self {
        Self { low_pct, high_pct }
    }

    /// Depth of discharge implied by the window, in percent.
    pub fn dod_percent(&self) -> f64 {
        self.high_pct - self.low_pct
    }

    pub fn is_valid(&self) -> bool {
        self.low_pct.is_finite()
            && self.high_pct.is_finite()
            && self.low_pct >= 0.0
            && self.low_pct < self.high_pct
            && self.high_pct <= 100.0
    }
}

/// Identity and conditions of one aging test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgingTestMeta {
    pub test_id: String,
    pub lab: String,
    pub form_factor: String,
    pub chemistry: Chemistry,
    pub ambient_temp_c: f64,
    pub soc_window: SocWindow,
    pub charge_rate_c: f64,
    pub discharge_rate_c: f64,
    pub nominal_capacity_ah: f64,
    pub replicate_tag: String,
}

impl AgingTestMeta {
    /// Depth of discharge of the test's SOC window, in percent.
    pub fn dod_percent(&self) -> f64 {
        self.soc_window.dod_percent()
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let fail = |reason: &str| {
            Err(IngestError::InvalidMeta {
                test: self.test_id.clone(),
                reason: reason.to_string(),
            })
        };
        if !self.soc_window.is_valid() {
            return fail("SOC window must satisfy 0 <= low < high <= 100");
        }
        if !(self.charge_rate_c > 0.0 && self.charge_rate_c.is_finite()) {
            return fail("charge rate must be strictly positive");
        }
        if !(self.discharge_rate_c > 0.0 && self.discharge_rate_c.is_finite()) {
            return fail("discharge rate must be strictly positive");
        }
        if !(self.nominal_capacity_ah > 0.0 && self.nominal_capacity_ah.is_finite()) {
            return fail("nominal capacity must be strictly positive");
        }
        if !self.ambient_temp_c.is_finite() {
            return fail("ambient temperature must be finite");
        }
        Ok(())
    }
}

/// Fields recoverable from a grammar-conforming test name.
///
/// Nominal capacity never appears in names and must come from the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedName {
    pub lab: String,
    pub form_factor: String,
    pub chemistry: Chemistry,
    pub ambient_temp_c: f64,
    pub soc_window: SocWindow,
    pub charge_rate_c: f64,
    pub discharge_rate_c: f64,
}

impl ParsedName {
    /// Re-serialize into the underscore-delimited grammar.
    pub fn to_name(&self) -> String {
        format!(
            "{}_{}_{}_{}C_{}-{}_{}-{}C",
            self.lab,
            self.form_factor,
            self.chemistry.grammar_token(),
            fmt_grammar_number(self.ambient_temp_c),
            fmt_grammar_number(self.soc_window.low_pct),
            fmt_grammar_number(self.soc_window.high_pct),
            fmt_grammar_number(self.charge_rate_c),
            fmt_grammar_number(self.discharge_rate_c),
        )
    }
}

/// Canonical number form inside test names: shortest decimal, no exponent.
fn fmt_grammar_number(x: f64) -> String {
    format!("{x}")
}

/// Decode a `LAB_FORM_CHEM_TEMPC_LO-HI_CHG-DISC` test name.
///
/// The chemistry token may itself contain underscores (`NMC_LCO`), so the
/// name is parsed from both ends: two leading tokens, three trailing tokens,
/// chemistry in between.
pub fn parse_test_name(name: &str) -> Result<ParsedName, IngestError> {
    let unrecognized = || IngestError::UnrecognizedName {
        name: name.to_string(),
    };

    let tokens: Vec<&str> = name.split('_').collect();
    if tokens.len() < 6 {
        return Err(unrecognized());
    }
    let lab = tokens[0];
    let form_factor = tokens[1];
    let n = tokens.len();
    let temp_token = tokens[n - 3];
    let window_token = tokens[n - 2];
    let rates_token = tokens[n - 1];
    let chem_token = tokens[2..n - 3].join("_");

    if lab.is_empty() || form_factor.is_empty() {
        return Err(unrecognized());
    }
    let chemistry = Chemistry::from_grammar_token(&chem_token).ok_or_else(unrecognized)?;

    let temp_str = temp_token.strip_suffix('C').ok_or_else(unrecognized)?;
    let ambient_temp_c: f64 = temp_str.parse().map_err(|_| unrecognized())?;
    if !ambient_temp_c.is_finite() {
        return Err(unrecognized());
    }

    // SOC bounds are nonnegative, so splitting the window on '-' is safe.
    let (low, high) = window_token.split_once('-').ok_or_else(unrecognized)?;
    let soc_window = SocWindow::new(
        low.parse().map_err(|_| unrecognized())?,
        high.parse().map_err(|_| unrecognized())?,
    );
    if !soc_window.is_valid() {
        return Err(unrecognized());
    }

    let rates_str = rates_token.strip_suffix('C').ok_or_else(unrecognized)?;
    let (chg, dis) = rates_str.split_once('-').ok_or_else(unrecognized)?;
    let charge_rate_c: f64 = chg.parse().map_err(|_| unrecognized())?;
    let discharge_rate_c: f64 = dis.parse().map_err(|_| unrecognized())?;
    if !(charge_rate_c > 0.0 && charge_rate_c.is_finite()) {
        return Err(unrecognized());
    }
    if !(discharge_rate_c > 0.0 && discharge_rate_c.is_finite()) {
        return Err(unrecognized());
    }

    Ok(ParsedName {
        lab: lab.to_string(),
        form_factor: form_factor.to_string(),
        chemistry,
        ambient_temp_c,
        soc_window,
        charge_rate_c,
        discharge_rate_c,
    })
}
