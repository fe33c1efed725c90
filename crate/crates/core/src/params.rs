//! LoRa transmission parameters and the sets a node may choose from.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Spreading factors covered by the sensitivity and SINR tables.
pub const SPREADING_FACTORS: [u8; 6] = [7, 8, 9, 10, 11, 12];
/// Bandwidths covered by the sensitivity table, in Hz.
pub const BANDWIDTHS_HZ: [u32; 3] = [125_000, 250_000, 500_000];
/// Default carrier frequencies: 470.1 MHz to 471.5 MHz in 200 kHz steps.
pub const DEFAULT_CARRIERS_HZ: [u32; 8] = [
    470_100_000,
    470_300_000,
    470_500_000,
    470_700_000,
    470_900_000,
    471_100_000,
    471_300_000,
    471_500_000,
];
/// Default transmit power levels in dBm.
pub const DEFAULT_TX_POWERS_DBM: [i8; 7] = [2, 4, 6, 8, 10, 12, 14];

/// Accepted transmit power range for configured domains, in dBm.
pub const TX_POWER_RANGE_DBM: core::ops::RangeInclusive<i8> = 0..=20;
/// Accepted carrier frequency range for configured domains, in Hz.
pub const CARRIER_RANGE_HZ: core::ops::RangeInclusive<u32> = 137_000_000..=1_020_000_000;

/// The configuration of one packet: spreading factor, bandwidth, carrier
/// frequency and transmit power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LoRaParams {
    pub sf: u8,
    pub bw_hz: u32,
    pub cf_hz: u32,
    pub tp_dbm: i8,
}

impl LoRaParams {
    pub const fn new(sf: u8, bw_hz: u32, cf_hz: u32, tp_dbm: i8) -> Self {
        Self {
            sf,
            bw_hz,
            cf_hz,
            tp_dbm,
        }
    }

    /// Checks that SF and BW fall inside the modelled tables.
    pub fn validate(&self) -> Result<()> {
        if !SPREADING_FACTORS.contains(&self.sf) {
            return Err(Error::InvalidParameter(format!(
                "spreading factor {} not in 7..=12",
                self.sf
            )));
        }
        if !BANDWIDTHS_HZ.contains(&self.bw_hz) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth {} Hz not one of 125/250/500 kHz",
                self.bw_hz
            )));
        }
        Ok(())
    }
}

/// Which of the four bandit dimensions a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Dimension {
    Sf,
    Bw,
    Cf,
    Tp,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [Dimension::Sf, Dimension::Bw, Dimension::Cf, Dimension::Tp];
}

/// The parameter values available to every node, in a fixed order.
///
/// Arm `i` of a bandit corresponds to element `i` of the matching list.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ParamDomains {
    pub sf: Vec<u8>,
    pub bw_hz: Vec<u32>,
    pub cf_hz: Vec<u32>,
    pub tp_dbm: Vec<i8>,
}

impl Default for ParamDomains {
    fn default() -> Self {
        Self {
            sf: SPREADING_FACTORS.to_vec(),
            bw_hz: BANDWIDTHS_HZ.to_vec(),
            cf_hz: DEFAULT_CARRIERS_HZ.to_vec(),
            tp_dbm: DEFAULT_TX_POWERS_DBM.to_vec(),
        }
    }
}

impl ParamDomains {
    /// Validates every list; errors name the offending field under `prefix`.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        check_list(
            prefix,
            "sf",
            &self.sf,
            |v| SPREADING_FACTORS.contains(v),
            "7..=12",
        )?;
        check_list(
            prefix,
            "bw_hz",
            &self.bw_hz,
            |v| BANDWIDTHS_HZ.contains(v),
            "125000, 250000 or 500000",
        )?;
        check_list(
            prefix,
            "cf_hz",
            &self.cf_hz,
            |v| CARRIER_RANGE_HZ.contains(v),
            "137 MHz..=1020 MHz",
        )?;
        check_list(
            prefix,
            "tp_dbm",
            &self.tp_dbm,
            |v| TX_POWER_RANGE_DBM.contains(v),
            "0..=20 dBm",
        )?;
        Ok(())
    }

    pub fn len(&self, dim: Dimension) -> usize {
        match dim {
            Dimension::Sf => self.sf.len(),
            Dimension::Bw => self.bw_hz.len(),
            Dimension::Cf => self.cf_hz.len(),
            Dimension::Tp => self.tp_dbm.len(),
        }
    }

    /// Builds parameters from one arm index per dimension.
    ///
    /// Panics if an index is out of range.
    pub fn params_at(&self, sf: usize, bw: usize, cf: usize, tp: usize) -> LoRaParams {
        LoRaParams::new(self.sf[sf], self.bw_hz[bw], self.cf_hz[cf], self.tp_dbm[tp])
    }

    pub fn contains(&self, p: &LoRaParams) -> bool {
        self.sf.contains(&p.sf)
            && self.bw_hz.contains(&p.bw_hz)
            && self.cf_hz.contains(&p.cf_hz)
            && self.tp_dbm.contains(&p.tp_dbm)
    }

    pub fn max_tp(&self) -> i8 {
        self.tp_dbm
            .iter()
            .copied()
            .max()
            .unwrap_or(DEFAULT_TX_POWERS_DBM[6])
    }
}

fn check_list<T: PartialEq + core::fmt::Debug>(
    prefix: &str,
    name: &str,
    values: &[T],
    allowed: impl Fn(&T) -> bool,
    expect: &str,
) -> Result<()> {
    let field = if prefix.is_empty() {
        alloc::string::String::from(name)
    } else {
        format!("{prefix}.{name}")
    };
    if values.is_empty() {
        return Err(Error::config(field, "must not be empty"));
    }
    for (i, v) in values.iter().enumerate() {
        if !allowed(v) {
            return Err(Error::config(
                format!("{field}[{i}]"),
                format!("value {v:?} outside allowed set ({expect})"),
            ));
        }
        if values[..i].contains(v) {
            return Err(Error::config(
                format!("{field}[{i}]"),
                format!("duplicate value {v:?}"),
            ));
        }
    }
    Ok(())
}
