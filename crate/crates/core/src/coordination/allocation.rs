//! Greedy risk-weighted zone allocation.
//!
//! Each zone carries a risk `R` and a coverage gain `g` in [0, 1]. Sending
//! `m` UAVs to a zone is worth `R * (1 - (1 - g)^m)`: the first UAV captures
//! `R * g` and each further one captures a geometrically shrinking share of
//! what is left. UAVs are placed one at a time on the zone with the largest
//! marginal value, which costs O(N * |Z|).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneScore {
    pub risk: f64,
    pub gain: f64,
}

/// Value of adding one more UAV to a zone that already has `m`.
#[inline]
pub fn marginal(z: ZoneScore, m: u32) -> f64 {
    z.risk * z.gain * (1.0 - z.gain).powi(m as i32)
}

/// Objective for a full assignment given per-zone UAV counts.
pub fn objective(zones: &[ZoneScore], counts: &[u32]) -> f64 {
    zones
        .iter()
        .zip(counts)
        .map(|(z, &m)| z.risk * (1.0 - (1.0 - z.gain).powi(m as i32)))
        .sum()
}

/// Assign each UAV in `uavs` (processed in the given order) to a zone.
/// `occupied[z]` counts UAVs already working zone `z` and is taken into
/// account for the marginal value. Ties go to the lowest zone index.
pub fn allocate_zones(zones: &[ZoneScore], uavs: &[u32], occupied: &[u32]) -> Result<Vec<(u32, usize)>> {
    if zones.is_empty() {
        return Err(Error::NoZones);
    }
    let mut counts: Vec<u32> = if occupied.len() == zones.len() { occupied.to_vec() } else { vec![0; zones.len()] };
    let mut out = Vec::with_capacity(uavs.len());
    for &u in uavs {
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (z, score) in zones.iter().enumerate() {
            let v = marginal(*score, counts[z]);
            if v > best_v {
                best_v = v;
                best = z;
            }
        }
        counts[best] += 1;
        out.push((u, best));
    }
    Ok(out)
}
