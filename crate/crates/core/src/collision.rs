//! Packet collision rule: a packet is lost to collision when another
//! transmission overlaps it in time, uses the same spreading factor, sits
//! inside the carrier guard band, and the packet cannot capture the
//! receiver over it.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::params::LoRaParams;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Transmission {
    pub packet_id: u64,
    pub node_id: u32,
    pub params: LoRaParams,
    /// Start time, s.
    pub start: f64,
    /// End time (start + airtime), s.
    pub end: f64,
    /// RSSI at the gateway, fixed for the whole transmission, dBm.
    pub rssi_dbm: f64,
}

/// Minimum carrier separation for two signals to not collide, keyed on the
/// wider bandwidth.
pub fn cf_guard_hz(bw_hz: u32) -> u32 {
    match bw_hz {
        b if b >= 500_000 => 120_000,
        b if b >= 250_000 => 60_000,
        _ => 30_000,
    }
}

/// Half-open interval intersection of `[start, end)`.
pub fn timing_overlap(a: &Transmission, b: &Transmission) -> bool {
    a.start < b.end && b.start < a.end
}

pub fn cf_collision(a: &Transmission, b: &Transmission) -> bool {
    a.params.cf_hz.abs_diff(b.params.cf_hz) < cf_guard_hz(a.params.bw_hz.max(b.params.bw_hz))
}

pub fn sf_collision(a: &Transmission, b: &Transmission) -> bool {
    a.params.sf == b.params.sf
}

/// The symmetric pre-capture relation: time, SF and CF all collide.
pub fn conflicts(a: &Transmission, b: &Transmission) -> bool {
    a.packet_id != b.packet_id && timing_overlap(a, b) && sf_collision(a, b) && cf_collision(a, b)
}

/// Whether `b` counts as inter-SF interference for `a` in the SINR sum.
pub fn interferes(a: &Transmission, b: &Transmission) -> bool {
    a.packet_id != b.packet_id && timing_overlap(a, b) && !sf_collision(a, b) && cf_collision(a, b)
}

/// `true` when `a` survives: it is at least `capture_threshold_db` above
/// every collider. Vacuously true with no colliders.
pub fn power_capture(a: &Transmission, colliders: &[Transmission], capture_threshold_db: f64) -> bool {
    colliders
        .iter()
        .all(|c| a.rssi_dbm >= c.rssi_dbm + capture_threshold_db)
}

/// Collision flag for `target` against a set of candidate transmissions.
/// Candidates that do not conflict with `target` (including `target`
/// itself) are ignored.
pub fn is_collided<'a>(
    target: &Transmission,
    candidates: impl IntoIterator<Item = &'a Transmission>,
    capture_threshold_db: f64,
) -> bool {
    let mut strongest: Option<f64> = None;
    for c in candidates {
        if conflicts(target, c) {
            strongest = Some(strongest.map_or(c.rssi_dbm, |s: f64| s.max(c.rssi_dbm)));
        }
    }
    match strongest {
        None => false,
        Some(s) => target.rssi_dbm < s + capture_threshold_db,
    }
}

/// Collision flag of every transmission in `batch`, keyed by packet id.
pub fn resolve_collisions(batch: &[Transmission], capture_threshold_db: f64) -> BTreeMap<u64, bool> {
    let mut order: Vec<usize> = (0..batch.len()).collect();
    order.sort_by(|&i, &j| batch[i].start.total_cmp(&batch[j].start));

    // strongest conflicting RSSI per transmission
    let mut strongest: Vec<Option<f64>> = alloc::vec![None; batch.len()];
    for (pos, &i) in order.iter().enumerate() {
        let a = &batch[i];
        for &j in &order[pos + 1..] {
            let b = &batch[j];
            if b.start >= a.end {
                break;
            }
            if conflicts(a, b) {
                strongest[i] = Some(strongest[i].map_or(b.rssi_dbm, |s| s.max(b.rssi_dbm)));
                strongest[j] = Some(strongest[j].map_or(a.rssi_dbm, |s| s.max(a.rssi_dbm)));
            }
        }
    }

    batch
        .iter()
        .zip(strongest)
        .map(|(t, s)| {
            let collided = s.is_some_and(|s| t.rssi_dbm < s + capture_threshold_db);
            (t.packet_id, collided)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tx(id: u64, sf: u8, bw: u32, cf: u32, start: f64, end: f64, rssi: f64) -> Transmission {
        Transmission {
            packet_id: id,
            node_id: id as u32,
            params: LoRaParams::new(sf, bw, cf, 14),
            start,
            end,
            rssi_dbm: rssi,
        }
    }

    const CF: u32 = 470_100_000;

    #[test]
    fn timing_examples() {
        let a = tx(0, 7, 125_000, CF, 0.0, 0.05, -100.0);
        assert!(timing_overlap(&a, &tx(1, 7, 125_000, CF, 0.04, 0.09, -100.0)));
        assert!(!timing_overlap(&a, &tx(1, 7, 125_000, CF, 0.05, 0.10, -100.0)));
        assert!(timing_overlap(&a, &tx(1, 7, 125_000, CF, 0.01, 0.02, -100.0)));
    }

    #[test]
    fn cf_examples() {
        let a = tx(0, 7, 125_000, CF, 0.0, 1.0, -100.0);
        assert!(cf_collision(&a, &tx(1, 7, 125_000, CF, 0.0, 1.0, -100.0)));
        assert!(cf_collision(&a, &tx(1, 7, 500_000, CF, 0.0, 1.0, -100.0)));
        assert!(!cf_collision(
            &a,
            &tx(1, 7, 125_000, CF + 200_000, 0.0, 1.0, -100.0)
        ));
        assert!(!cf_collision(
            &a,
            &tx(1, 7, 500_000, CF + 200_000, 0.0, 1.0, -100.0)
        ));
        assert!(cf_collision(
            &a,
            &tx(1, 7, 500_000, CF + 100_000, 0.0, 1.0, -100.0)
        ));
        // 250 kHz guard is 60 kHz
        assert!(cf_collision(
            &a,
            &tx(1, 7, 250_000, CF + 59_999, 0.0, 1.0, -100.0)
        ));
        assert!(!cf_collision(
            &a,
            &tx(1, 7, 250_000, CF + 60_000, 0.0, 1.0, -100.0)
        ));
    }

    #[test]
    fn sf_examples() {
        let a = tx(0, 7, 125_000, CF, 0.0, 1.0, -100.0);
        let b = tx(1, 7, 125_000, CF, 0.0, 1.0, -100.0);
        let c = tx(2, 8, 125_000, CF, 0.0, 1.0, -100.0);
        assert!(sf_collision(&a, &b));
        assert!(!sf_collision(&a, &c));
        assert_eq!(sf_collision(&a, &c), sf_collision(&c, &a));
    }

    #[test]
    fn capture_examples() {
        let a = tx(0, 7, 125_000, CF, 0.0, 1.0, -100.0);
        assert!(power_capture(&a, &[tx(1, 7, 125_000, CF, 0.0, 1.0, -107.0)], 6.0));
        let b = tx(1, 7, 125_000, CF, 0.0, 1.0, -100.0);
        assert!(!power_capture(&a, &[b], 6.0));
        assert!(!power_capture(&b, &[a], 6.0));
        assert!(power_capture(&a, &[], 6.0));
    }

    #[test]
    fn resolve_examples() {
        let a = tx(0, 7, 125_000, CF, 0.0, 0.05, -100.0);
        let b = tx(1, 7, 125_000, CF, 0.0, 0.05, -100.0);
        let r = resolve_collisions(&[a, b], 6.0);
        assert!(r[&0] && r[&1]);

        let c = tx(1, 7, 125_000, 471_500_000, 0.0, 0.05, -100.0);
        let r = resolve_collisions(&[a, c], 6.0);
        assert!(!r[&0] && !r[&1]);

        let strong = tx(0, 9, 125_000, CF, 0.0, 0.2, -90.0);
        let w1 = tx(1, 9, 125_000, CF, 0.05, 0.25, -100.0);
        let w2 = tx(2, 9, 125_000, CF, 0.1, 0.3, -100.0);
        let r = resolve_collisions(&[w2, strong, w1], 6.0);
        assert!(!r[&0]);
        assert!(r[&1] && r[&2]);
    }

    #[test]
    fn online_matches_batch_on_example() {
        let batch = vec![
            tx(0, 9, 125_000, CF, 0.0, 0.2, -90.0),
            tx(1, 9, 125_000, CF, 0.05, 0.25, -100.0),
            tx(2, 10, 125_000, CF, 0.1, 0.3, -100.0),
        ];
        let r = resolve_collisions(&batch, 6.0);
        for t in &batch {
            assert_eq!(is_collided(t, &batch, 6.0), r[&t.packet_id]);
        }
    }
}
