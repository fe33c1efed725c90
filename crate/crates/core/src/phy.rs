//! Analytical link model: airtime, receiver thresholds, log-distance path
//! loss, SINR and per-packet energy.
//!
//! Everything here is a pure function. Random draws (shadowing, noise
//! jitter) are sampled by the caller and passed in.

use crate::error::{Error, Result};
use crate::params::LoRaParams;
use alloc::format;

/// Thermal noise density at room temperature, dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

/// Receiver sensitivity in dBm, rows SF7..SF12, columns 125/250/500 kHz.
const SENSITIVITY_DBM: [[f64; 3]; 6] = [
    [-123.0, -120.0, -116.0],
    [-126.0, -123.0, -119.0],
    [-129.0, -125.0, -122.0],
    [-132.0, -128.0, -125.0],
    [-133.0, -130.0, -128.0],
    [-136.0, -133.0, -130.0],
];

/// Minimum SINR in dB for SF7..SF12.
const SINR_THRESHOLD_DB: [f64; 6] = [-7.5, -10.0, -12.5, -15.0, -17.5, -20.0];

/// How a transmitted packet ended up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PacketFate {
    Received,
    CollisionLoss,
    SignalLoss,
}

impl PacketFate {
    /// Collision takes precedence when both loss conditions hold.
    pub fn from_flags(collided: bool, signal_lost: bool) -> Self {
        if collided {
            PacketFate::CollisionLoss
        } else if signal_lost {
            PacketFate::SignalLoss
        } else {
            PacketFate::Received
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PacketFate::Received => "received",
            PacketFate::CollisionLoss => "collision_loss",
            PacketFate::SignalLoss => "signal_loss",
        }
    }
}

/// Propagation, receiver and framing constants of the channel.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ChannelModelConfig {
    /// Mean path loss at the reference distance, dB.
    pub mean_path_loss_d0_db: f64,
    /// Reference distance, m.
    pub d0_m: f64,
    /// Path-loss exponent.
    pub gamma: f64,
    /// Shadowing standard deviation, dB.
    pub shadowing_sigma_db: f64,
    /// Standard deviation of the per-reception noise floor jitter, dB.
    pub noise_sigma_db: f64,
    /// Receiver noise figure, dB.
    pub noise_figure_db: f64,
    pub preamble_symbols: u32,
    pub crc: bool,
    /// Implicit header mode (H = 1). The default explicit header is H = 0.
    pub implicit_header: bool,
    /// Low data rate optimisation (DE = 1).
    pub low_data_rate_opt: bool,
    /// Coding rate index 1..=4 for 4/5..4/8.
    pub coding_rate: u32,
    /// Distances below this are clamped before the log-distance formula, m.
    pub min_distance_m: f64,
    /// Power margin a co-SF co-channel packet needs to survive a collision, dB.
    pub capture_threshold_db: f64,
}

impl Default for ChannelModelConfig {
    fn default() -> Self {
        Self {
            mean_path_loss_d0_db: 128.95,
            d0_m: 1000.0,
            gamma: 2.32,
            shadowing_sigma_db: 7.8,
            noise_sigma_db: 1.0,
            noise_figure_db: 6.0,
            preamble_symbols: 8,
            crc: true,
            implicit_header: false,
            low_data_rate_opt: false,
            coding_rate: 1,
            min_distance_m: 1.0,
            capture_threshold_db: 6.0,
        }
    }
}

impl ChannelModelConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let f = |name: &str| {
            if prefix.is_empty() {
                alloc::string::String::from(name)
            } else {
                format!("{prefix}.{name}")
            }
        };
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(f(name), "must be finite"))
            }
        };
        finite("mean_path_loss_d0_db", self.mean_path_loss_d0_db)?;
        finite("noise_figure_db", self.noise_figure_db)?;
        finite("capture_threshold_db", self.capture_threshold_db)?;
        if !(self.d0_m > 0.0 && self.d0_m.is_finite()) {
            return Err(Error::config(f("d0_m"), "must be > 0"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::config(f("gamma"), "must be > 0"));
        }
        if !(self.shadowing_sigma_db >= 0.0 && self.shadowing_sigma_db.is_finite()) {
            return Err(Error::config(f("shadowing_sigma_db"), "must be >= 0"));
        }
        if !(self.noise_sigma_db >= 0.0 && self.noise_sigma_db.is_finite()) {
            return Err(Error::config(f("noise_sigma_db"), "must be >= 0"));
        }
        if self.preamble_symbols < 1 {
            return Err(Error::config(f("preamble_symbols"), "must be >= 1"));
        }
        if !(1..=4).contains(&self.coding_rate) {
            return Err(Error::config(f("coding_rate"), "must be in 1..=4"));
        }
        if !(self.min_distance_m > 0.0 && self.min_distance_m.is_finite()) {
            return Err(Error::config(f("min_distance_m"), "must be > 0"));
        }
        Ok(())
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    libm::pow(10.0, dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * libm::log10(mw)
}

fn sf_index(sf: u8) -> Result<usize> {
    match sf {
        7..=12 => Ok(usize::from(sf - 7)),
        _ => Err(Error::InvalidParameter(format!(
            "spreading factor {sf} not in 7..=12"
        ))),
    }
}

fn bw_index(bw_hz: u32) -> Result<usize> {
    match bw_hz {
        125_000 => Ok(0),
        250_000 => Ok(1),
        500_000 => Ok(2),
        _ => Err(Error::InvalidParameter(format!(
            "bandwidth {bw_hz} Hz not one of 125/250/500 kHz"
        ))),
    }
}

/// Number of payload symbols for a packet of `payload_bytes` bytes.
pub fn payload_symbols(payload_bytes: u32, p: &LoRaParams, cfg: &ChannelModelConfig) -> Result<u32> {
    sf_index(p.sf)?;
    if payload_bytes == 0 {
        return Err(Error::InvalidParameter("payload must be at least 1 byte".into()));
    }
    let sf = i64::from(p.sf);
    let de = i64::from(cfg.low_data_rate_opt);
    let denom = 4 * (sf - 2 * de);
    if denom <= 0 {
        return Err(Error::InvalidParameter(format!(
            "SF {} with low data rate optimisation leaves no symbol bits",
            p.sf
        )));
    }
    let numer = 8 * i64::from(payload_bytes) - 4 * sf + 28 + 16 * i64::from(cfg.crc)
        - 20 * i64::from(cfg.implicit_header);
    let blocks = numer.div_euclid(denom) + i64::from(numer.rem_euclid(denom) != 0);
    let extra = (blocks * (i64::from(cfg.coding_rate) + 4)).max(0);
    Ok(8 + extra as u32)
}

/// Symbol duration 2^SF / BW, seconds.
pub fn symbol_time(p: &LoRaParams) -> f64 {
    f64::from(1u32 << p.sf) / f64::from(p.bw_hz)
}

/// Preamble plus payload duration, seconds.
pub fn time_on_air(payload_bytes: u32, p: &LoRaParams, cfg: &ChannelModelConfig) -> Result<f64> {
    p.validate()?;
    let n_pay = payload_symbols(payload_bytes, p, cfg)?;
    // symbol counts are exact quarters, so this rounds once
    let symbols = f64::from(cfg.preamble_symbols) + 4.25 + f64::from(n_pay);
    Ok(symbols * f64::from(1u32 << p.sf) / f64::from(p.bw_hz))
}

pub fn receiver_sensitivity(sf: u8, bw_hz: u32) -> Result<f64> {
    Ok(SENSITIVITY_DBM[sf_index(sf)?][bw_index(bw_hz)?])
}

pub fn sinr_threshold(sf: u8) -> Result<f64> {
    Ok(SINR_THRESHOLD_DB[sf_index(sf)?])
}

/// Mean log-distance path loss (no shadowing) at `distance_m`, dB.
pub fn mean_path_loss(distance_m: f64, cfg: &ChannelModelConfig) -> f64 {
    let d = distance_m.max(cfg.min_distance_m);
    cfg.mean_path_loss_d0_db + 10.0 * cfg.gamma * libm::log10(d / cfg.d0_m)
}

/// RSSI at the gateway for a node `distance_m` away, with an externally
/// drawn shadowing sample in dB.
pub fn rssi_at_gateway(
    p: &LoRaParams,
    distance_m: f64,
    shadow_sample_db: f64,
    cfg: &ChannelModelConfig,
) -> f64 {
    f64::from(p.tp_dbm) - mean_path_loss(distance_m, cfg) - shadow_sample_db
}

/// Thermal noise floor −174 + 10·log10(BW) + NF, dBm.
pub fn thermal_noise_dbm(bw_hz: u32, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_HZ + 10.0 * libm::log10(f64::from(bw_hz)) + noise_figure_db
}

/// SINR in dB, summing interferers and noise in the linear domain.
pub fn compute_sinr(target_rssi_dbm: f64, interferer_rssis_dbm: &[f64], noise_dbm: f64) -> f64 {
    if interferer_rssis_dbm.is_empty() {
        return target_rssi_dbm - noise_dbm;
    }
    let interference: f64 = interferer_rssis_dbm.iter().map(|&r| dbm_to_mw(r)).sum();
    mw_to_dbm(dbm_to_mw(target_rssi_dbm) / (interference + dbm_to_mw(noise_dbm)))
}

/// `true` when the packet clears both the sensitivity and SINR thresholds.
pub fn decode_check(target_rssi_dbm: f64, sinr_db: f64, p: &LoRaParams) -> Result<bool> {
    let rs = receiver_sensitivity(p.sf, p.bw_hz)?;
    let req = sinr_threshold(p.sf)?;
    Ok(target_rssi_dbm >= rs && sinr_db >= req)
}

/// Transmit energy in mJ: linear TX power (mW) times airtime (s).
pub fn packet_energy(p: &LoRaParams, toa_s: f64) -> f64 {
    dbm_to_mw(f64::from(p.tp_dbm)) * toa_s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(sf: u8, bw: u32, tp: i8) -> LoRaParams {
        LoRaParams::new(sf, bw, 470_100_000, tp)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn payload_symbols_examples() {
        let cfg = ChannelModelConfig::default();
        assert_eq!(payload_symbols(20, &p(7, 125_000, 14), &cfg).unwrap(), 43);
        assert_eq!(payload_symbols(20, &p(12, 125_000, 14), &cfg).unwrap(), 28);
    }

    #[test]
    fn payload_symbols_clamps_negative_blocks() {
        // implicit header, no CRC, SF12, 1 byte: 8 - 48 + 28 - 20 < 0
        let cfg = ChannelModelConfig {
            crc: false,
            implicit_header: true,
            ..Default::default()
        };
        assert_eq!(payload_symbols(1, &p(12, 125_000, 14), &cfg).unwrap(), 8);
    }

    #[test]
    fn payload_symbols_rejects_bad_input() {
        let cfg = ChannelModelConfig::default();
        assert!(payload_symbols(20, &p(13, 125_000, 14), &cfg).is_err());
        assert!(payload_symbols(0, &p(7, 125_000, 14), &cfg).is_err());
    }

    #[test]
    fn airtime_examples() {
        let cfg = ChannelModelConfig::default();
        assert_eq!(symbol_time(&p(7, 125_000, 14)), 0.001024);
        let toa = time_on_air(20, &p(7, 125_000, 14), &cfg).unwrap();
        assert!(close(toa, 0.056576, 1e-12), "{toa}");
        let half = time_on_air(20, &p(7, 250_000, 14), &cfg).unwrap();
        assert_eq!(half * 2.0, toa);
    }

    #[test]
    fn table_lookups() {
        assert_eq!(receiver_sensitivity(7, 125_000).unwrap(), -123.0);
        assert_eq!(receiver_sensitivity(12, 125_000).unwrap(), -136.0);
        assert_eq!(receiver_sensitivity(9, 500_000).unwrap(), -122.0);
        assert!(receiver_sensitivity(6, 125_000).is_err());
        assert!(receiver_sensitivity(7, 200_000).is_err());
        assert_eq!(sinr_threshold(7).unwrap(), -7.5);
        assert_eq!(sinr_threshold(10).unwrap(), -15.0);
        assert_eq!(sinr_threshold(12).unwrap(), -20.0);
        assert!(sinr_threshold(13).is_err());
    }

    #[test]
    fn rssi_examples() {
        let cfg = ChannelModelConfig::default();
        let r = rssi_at_gateway(&p(7, 125_000, 14), 1000.0, 0.0, &cfg);
        assert!(close(r, -114.95, 1e-12));
        for tp in [2, 4, 6, 8, 10, 12, 14] {
            let r = rssi_at_gateway(&p(7, 125_000, tp), 1000.0, 0.0, &cfg);
            assert_eq!(r, f64::from(tp) - 128.95);
        }
        let r = rssi_at_gateway(&p(7, 125_000, 14), 2000.0, 0.0, &cfg);
        assert!((r - -121.93389589940435).abs() < 1e-9, "{r}");
        // clamped at 1 m
        let at0 = rssi_at_gateway(&p(7, 125_000, 14), 0.0, 0.0, &cfg);
        let at1 = rssi_at_gateway(&p(7, 125_000, 14), 1.0, 0.0, &cfg);
        assert_eq!(at0, at1);
        assert!(at0.is_finite());
    }

    #[test]
    fn sinr_examples() {
        assert!(close(compute_sinr(-110.0, &[], -120.0), 10.0, 1e-12));
        // noise 300 dB below the interferer is negligible
        assert!(compute_sinr(-110.0, &[-110.0], -400.0).abs() < 1e-9);
        let noise = thermal_noise_dbm(125_000, 6.0);
        assert!((noise - -117.03089986991944).abs() < 1e-9);
        let s = compute_sinr(-110.0, &[-113.0, -113.0], noise);
        assert!((s - -0.7935714178257203).abs() < 1e-9, "{s}");
    }

    #[test]
    fn decode_examples() {
        let sf7 = p(7, 125_000, 14);
        assert!(decode_check(-114.95, 20.0, &sf7).unwrap());
        assert!(!decode_check(-124.0, 50.0, &sf7).unwrap());
        assert!(!decode_check(-100.0, -8.0, &sf7).unwrap());
        assert!(decode_check(-123.0, -7.5, &sf7).unwrap());
    }

    #[test]
    fn energy_examples() {
        let e = packet_energy(&p(7, 125_000, 14), 0.056576);
        assert!((e - 1.4211248674908596).abs() < 1e-12, "{e}");
        assert_eq!(packet_energy(&p(7, 125_000, 0), 1.0), 1.0);
        let mut last = 0.0;
        for tp in 0..=20 {
            let e = packet_energy(&p(7, 125_000, tp), 0.1);
            assert!(e > last);
            last = e;
        }
    }

    #[test]
    fn fate_precedence() {
        assert_eq!(PacketFate::from_flags(true, true), PacketFate::CollisionLoss);
        assert_eq!(PacketFate::from_flags(false, true), PacketFate::SignalLoss);
        assert_eq!(PacketFate::from_flags(false, false), PacketFate::Received);
    }

    #[test]
    fn channel_config_validation() {
        ChannelModelConfig::default().validate("channel").unwrap();
        let bad = ChannelModelConfig {
            gamma: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            bad.validate("channel"),
            Err(Error::InvalidConfig { ref field, .. }) if field == "channel.gamma"
        ));
    }
}
