//! Link model checked against an independent airtime oracle and the
//! LoRa sensitivity and SINR threshold tables.

use dlora_core::phy::{self, ChannelModelConfig};
use dlora_core::LoRaParams;
use proptest::prelude::*;

/// Airtime evaluated in floating point straight from the framing formula,
/// without sharing code with the crate.
#[allow(clippy::too_many_arguments)]
fn oracle_toa(ps: u32, sf: u8, bw: u32, n_pre: u32, crc: u32, h: u32, de: u32, cr: u32) -> f64 {
    let sf_f = sf as f64;
    let num = 8.0 * ps as f64 - 4.0 * sf_f + 28.0 + 16.0 * crc as f64 - 20.0 * h as f64;
    let den = 4.0 * (sf_f - 2.0 * de as f64);
    let n_pay = 8.0 + ((num / den).ceil() * (cr as f64 + 4.0)).max(0.0);
    let t_sym = 2f64.powi(sf as i32) / bw as f64;
    (n_pre as f64 + 4.25) * t_sym + n_pay * t_sym
}

fn p(sf: u8, bw: u32, tp: i8) -> LoRaParams {
    LoRaParams::new(sf, bw, 470_100_000, tp)
}

const SFS: [u8; 6] = [7, 8, 9, 10, 11, 12];
const BWS: [u32; 3] = [125_000, 250_000, 500_000];

#[test]
fn sensitivity_table_exact() {
    let expected = [
        (125_000, [-123.0, -126.0, -129.0, -132.0, -133.0, -136.0]),
        (250_000, [-120.0, -123.0, -125.0, -128.0, -130.0, -133.0]),
        (500_000, [-116.0, -119.0, -122.0, -125.0, -128.0, -130.0]),
    ];
    for (bw, row) in expected {
        for (sf, rs) in SFS.iter().zip(row) {
            assert_eq!(phy::receiver_sensitivity(*sf, bw).unwrap(), rs, "SF{sf} {bw}");
        }
    }
}

#[test]
fn sinr_threshold_table_exact() {
    let expected = [-7.5, -10.0, -12.5, -15.0, -17.5, -20.0];
    for (sf, t) in SFS.iter().zip(expected) {
        assert_eq!(phy::sinr_threshold(*sf).unwrap(), t);
    }
}

/// Values computed once with exact rational arithmetic and frozen here.
#[test]
fn frozen_airtimes_at_20_bytes() {
    let frozen = [
        (7, 125_000, 43, 0.056576),
        (8, 125_000, 38, 0.102912),
        (9, 125_000, 33, 0.185344),
        (10, 125_000, 33, 0.370688),
        (11, 125_000, 28, 0.659456),
        (12, 125_000, 28, 1.318912),
        (7, 500_000, 43, 0.014144),
        (12, 250_000, 28, 0.659456),
    ];
    let cfg = ChannelModelConfig::default();
    for (sf, bw, sym, toa) in frozen {
        let q = p(sf, bw, 14);
        assert_eq!(phy::payload_symbols(20, &q, &cfg).unwrap(), sym);
        let got = phy::time_on_air(20, &q, &cfg).unwrap();
        assert!(((got - toa) / toa).abs() < 1e-12, "SF{sf}/{bw}: {got} vs {toa}");
    }
}

#[test]
fn airtime_matches_oracle_on_full_grid() {
    let cfg = ChannelModelConfig::default();
    for ps in [1, 20, 255] {
        for sf in SFS {
            for bw in BWS {
                let got = phy::time_on_air(ps, &p(sf, bw, 14), &cfg).unwrap();
                let want = oracle_toa(ps, sf, bw, 8, 1, 0, 0, 1);
                assert!(((got - want) / want).abs() < 1e-12, "PS{ps} SF{sf} {bw}");
                let sym = phy::payload_symbols(ps, &p(sf, bw, 14), &cfg).unwrap();
                let direct = (8.0 + 4.25 + sym as f64) * 2f64.powi(sf as i32) / bw as f64;
                assert!(((got - direct) / direct).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn airtime_matches_oracle_with_non_default_framing() {
    let cfg = ChannelModelConfig {
        preamble_symbols: 12,
        crc: false,
        implicit_header: true,
        low_data_rate_opt: true,
        coding_rate: 4,
        ..Default::default()
    };
    for ps in [1, 7, 64, 255] {
        for sf in SFS {
            let got = phy::time_on_air(ps, &p(sf, 125_000, 14), &cfg).unwrap();
            let want = oracle_toa(ps, sf, 125_000, 12, 0, 1, 1, 4);
            assert!(((got - want) / want).abs() < 1e-12, "PS{ps} SF{sf}");
        }
    }
}

#[test]
fn sinr_matches_linear_brute_force() {
    let noise = phy::thermal_noise_dbm(125_000, 6.0);
    let lin = |d: f64| 10f64.powf(d / 10.0);
    let want = 10.0 * (lin(-110.0) / (lin(-113.0) + lin(-113.0) + lin(noise))).log10();
    let got = phy::compute_sinr(-110.0, &[-113.0, -113.0], noise);
    assert!((got - want).abs() < 1e-9);
}

proptest! {
    #[test]
    fn payload_symbols_non_increasing_in_sf(ps in 1u32..=255) {
        let cfg = ChannelModelConfig::default();
        let positive = |sf: u8| 8 * ps as i64 - 4 * sf as i64 + 28 + 16 > 0;
        for w in SFS.windows(2) {
            if positive(w[0]) && positive(w[1]) {
                let a = phy::payload_symbols(ps, &p(w[0], 125_000, 14), &cfg).unwrap();
                let b = phy::payload_symbols(ps, &p(w[1], 125_000, 14), &cfg).unwrap();
                prop_assert!(b <= a, "PS{} SF{}:{} SF{}:{}", ps, w[0], a, w[1], b);
            }
        }
    }

    #[test]
    fn empty_interference_is_rssi_minus_noise(rssi in -150.0f64..-50.0, noise in -130.0f64..-90.0) {
        prop_assert_eq!(phy::compute_sinr(rssi, &[], noise), rssi - noise);
    }

    #[test]
    fn decode_is_monotone(
        rssi in -140.0f64..-100.0,
        sinr in -25.0f64..10.0,
        d_rssi in 0.0f64..20.0,
        d_sinr in 0.0f64..20.0,
        sf_i in 0usize..6,
        bw_i in 0usize..3,
    ) {
        let q = p(SFS[sf_i], BWS[bw_i], 14);
        if phy::decode_check(rssi, sinr, &q).unwrap() {
            prop_assert!(phy::decode_check(rssi + d_rssi, sinr + d_sinr, &q).unwrap());
        }
    }

    #[test]
    fn energy_is_additive_in_airtime(tp in 0i8..=20, a in 1e-4f64..2.0, b in 1e-4f64..2.0) {
        let q = p(7, 125_000, tp);
        let sum = phy::packet_energy(&q, a) + phy::packet_energy(&q, b);
        let joint = phy::packet_energy(&q, a + b);
        prop_assert!(((sum - joint) / joint).abs() < 1e-12);
    }

    #[test]
    fn doubling_bandwidth_halves_airtime(ps in 1u32..=255, sf_i in 0usize..6) {
        let cfg = ChannelModelConfig::default();
        let slow = phy::time_on_air(ps, &p(SFS[sf_i], 125_000, 14), &cfg).unwrap();
        let fast = phy::time_on_air(ps, &p(SFS[sf_i], 250_000, 14), &cfg).unwrap();
        prop_assert_eq!(slow, 2.0 * fast);
    }
}
