//! Regional inertia metrics and what-if studies.
//!
//! Effective regional inertia is the arithmetic mean of the member-bus nodal
//! inertias; conventional regional inertia is the plain sum of the source
//! inertia constants inside the region.  The minimum-device-inertia criterion
//! compares the divider/SPC weight products before and after attaching a
//! device template: its own inertia cancels out of those weights, so the
//! bound is exact rather than iterative.

use rayon::prelude::*;
use serde::Serialize;

use crate::inertia::{nodal_inertia, InertiaProfile};
use crate::model::{BusId, InertialDevice, Snapshot, SourceRef};
use crate::partition::PartitionResult;
use crate::ComputeError;

#[derive(Debug, Clone, Serialize)]
pub struct RegionInertia {
    pub region: usize,
    pub buses: Vec<BusId>,
    /// mean nodal inertia over member buses, seconds
    pub h_eff: f64,
    /// sum of source inertia constants at member buses, seconds
    pub h_conv: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionalReport {
    pub regions: Vec<RegionInertia>,
}

/// Effective and conventional inertia per region of `partition`.
pub fn regional_inertia(
    profile: &InertiaProfile,
    partition: &PartitionResult,
    snapshot: &Snapshot,
) -> Result<RegionalReport, ComputeError> {
    let mut regions = Vec::with_capacity(partition.regions.len());
    for (r, members) in partition.regions.iter().enumerate() {
        let mut sum = 0.0;
        for bus in members {
            let h = profile.h_at(*bus).ok_or_else(|| {
                ComputeError::UndefinedInertia(*bus, "no nodal inertia for region member".into())
            })?;
            sum += h;
        }
        let h_eff = sum / members.len() as f64;
        let case = snapshot.case();
        let h_conv = case
            .machines
            .iter()
            .filter(|m| members.contains(&m.bus))
            .map(|m| m.inertia_h)
            .sum::<f64>()
            + case
                .devices
                .iter()
                .filter(|d| d.inertia_h > 0.0 && members.contains(&d.bus))
                .map(|d| d.inertia_h)
                .sum::<f64>();
        regions.push(RegionInertia { region: r, buses: members.clone(), h_eff, h_conv });
    }
    Ok(RegionalReport { regions })
}

impl RegionalReport {
    pub fn region(&self, r: usize) -> Option<&RegionInertia> {
        self.regions.get(r)
    }

    /// Index of the region with the highest effective inertia.
    pub fn max_h_eff_region(&self) -> Option<usize> {
        self.regions
            .iter()
            .max_by(|a, b| a.h_eff.total_cmp(&b.h_eff))
            .map(|r| r.region)
    }

    /// (ΔH_eff, ΔH_conv) per region relative to `base` (matched by index).
    pub fn deltas(&self, base: &RegionalReport) -> Vec<(usize, f64, f64)> {
        self.regions
            .iter()
            .zip(&base.regions)
            .map(|(new, old)| (new.region, new.h_eff - old.h_eff, new.h_conv - old.h_conv))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("region,n_buses,h_eff_seconds,h_conv_seconds\n");
        for r in &self.regions {
            out.push_str(&format!("{},{},{},{}\n", r.region, r.buses.len(), r.h_eff, r.h_conv));
        }
        out
    }

    pub fn to_json(&self, digest: &str) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            version: &'a str,
            config_digest: &'a str,
            regions: &'a [RegionInertia],
        }
        let mut s = serde_json::to_string_pretty(&Out {
            version: crate::VERSION,
            config_digest: digest,
            regions: &self.regions,
        })
        .expect("report serialization");
        s.push('\n');
        s
    }
}

/// Weight products entering the minimum-inertia bound.
#[derive(Debug, Clone, Serialize)]
pub struct FTerms {
    /// per existing source: (source, F before, F' after)
    pub existing: Vec<(SourceRef, f64, f64)>,
    /// F of the attached device itself (from the updated matrices)
    pub device: f64,
}

#[derive(Debug, Clone, Serialize)]
pub enum MinInertiaOutcome {
    /// smallest device inertia that does not degrade the bus
    Finite(f64),
    /// the weight redistribution cannot be compensated by any inertia value
    NoFiniteImprovement,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinInertiaResult {
    pub bus: BusId,
    pub outcome: MinInertiaOutcome,
    pub f_terms: FTerms,
    /// Σ (F - F')/H over existing sources
    pub denominator: f64,
}

impl MinInertiaResult {
    pub fn to_json(&self, digest: &str) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            version: &'a str,
            config_digest: &'a str,
            #[serde(flatten)]
            result: &'a MinInertiaResult,
        }
        let mut s = serde_json::to_string_pretty(&Out {
            version: crate::VERSION,
            config_digest: digest,
            result: self,
        })
        .expect("min inertia serialization");
        s.push('\n');
        s
    }
}

/// Minimum inertia a device must bring so that attaching it at `bus` does not
/// reduce the nodal inertia there.  The template's `inertia_h` is irrelevant:
/// the divider and SPC weights depend only on susceptances, voltages and
/// angles.
pub fn min_device_inertia(
    snapshot: &Snapshot,
    bus: BusId,
    template: &InertialDevice,
) -> Result<MinInertiaResult, ComputeError> {
    let j = snapshot
        .bus_index(bus)
        .ok_or_else(|| ComputeError::Invalid(format!("unknown bus {bus}")))?;
    let base = nodal_inertia(snapshot)?;
    let mut device = template.clone();
    device.bus = bus;
    if device.inertia_h <= 0.0 {
        device.inertia_h = 1.0; // placeholder, cancels out of the weights
    }
    let attached = snapshot.attach_device(device).map_err(|e| ComputeError::Invalid(e.to_string()))?;
    let after = nodal_inertia(&attached)?;

    let sources = snapshot.sources();
    let ns = sources.len();
    debug_assert_eq!(after.divider.sources.len(), ns + 1);
    let mut existing = Vec::with_capacity(ns);
    let mut denominator = 0.0;
    for (k, s) in sources.iter().enumerate() {
        let f_before = base.divider.matrix[(j, k)] * base.spc.matrix[(k, j)];
        let f_after = after.divider.matrix[(j, k)] * after.spc.matrix[(k, j)];
        existing.push((s.reference, f_before, f_after));
        denominator += (f_before - f_after) / s.inertia_h;
    }
    let f_device = after.divider.matrix[(j, ns)] * after.spc.matrix[(ns, j)];
    let outcome = if denominator > 0.0 {
        MinInertiaOutcome::Finite(f_device / denominator)
    } else {
        MinInertiaOutcome::NoFiniteImprovement
    };
    Ok(MinInertiaResult {
        bus,
        outcome,
        f_terms: FTerms { existing, device: f_device },
        denominator,
    })
}

/// Nodal inertia at every bus for each device inertia value in `h_grid`.
#[derive(Debug, Clone)]
pub struct DeviceSweep {
    pub bus: BusId,
    pub bus_ids: Vec<BusId>,
    pub h_grid: Vec<f64>,
    /// one nodal-inertia vector per grid point
    pub profiles: Vec<Vec<f64>>,
}

pub fn device_h_sweep(
    snapshot: &Snapshot,
    bus: BusId,
    template: &InertialDevice,
    h_grid: &[f64],
) -> Result<DeviceSweep, ComputeError> {
    if h_grid.iter().any(|&h| !(h > 0.0)) {
        return Err(ComputeError::Invalid("device inertia grid values must be > 0".into()));
    }
    if snapshot.bus_index(bus).is_none() {
        return Err(ComputeError::Invalid(format!("unknown bus {bus}")));
    }
    let profiles: Result<Vec<Vec<f64>>, ComputeError> = h_grid
        .par_iter()
        .map(|&h_dev| {
            let mut device = template.clone();
            device.bus = bus;
            device.inertia_h = h_dev;
            let attached = snapshot
                .attach_device(device)
                .map_err(|e| ComputeError::Invalid(e.to_string()))?;
            Ok(nodal_inertia(&attached)?.h)
        })
        .collect();
    Ok(DeviceSweep {
        bus,
        bus_ids: snapshot.buses().iter().map(|b| b.id).collect(),
        h_grid: h_grid.to_vec(),
        profiles: profiles?,
    })
}

impl DeviceSweep {
    pub fn h_at_connection(&self) -> Vec<f64> {
        let i = self
            .bus_ids
            .iter()
            .position(|&b| b == self.bus)
            .expect("connection bus is part of the sweep");
        self.profiles.iter().map(|p| p[i]).collect()
    }

    /// Long-format CSV: one row per (grid point, bus).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h_device_seconds,bus_id,h_seconds\n");
        for (g, profile) in self.h_grid.iter().zip(&self.profiles) {
            for (b, h) in self.bus_ids.iter().zip(profile) {
                out.push_str(&format!("{g},{b},{h}\n"));
            }
        }
        out
    }
}

/// Regional inertia as one branch's reactance is scaled; the partition stays
/// frozen at the base case so the numbers are comparable across grid points.
#[derive(Debug, Clone)]
pub struct ReactanceSweep {
    pub from: BusId,
    pub to: BusId,
    pub region: usize,
    pub alphas: Vec<f64>,
    pub h_eff: Vec<f64>,
    pub h_conv: Vec<f64>,
}

pub fn reactance_sweep(
    snapshot: &Snapshot,
    from: BusId,
    to: BusId,
    alphas: &[f64],
    partition: &PartitionResult,
    region: usize,
) -> Result<ReactanceSweep, ComputeError> {
    if region >= partition.regions.len() {
        return Err(ComputeError::Invalid(format!("region {region} does not exist")));
    }
    let rows: Result<Vec<(f64, f64)>, ComputeError> = alphas
        .par_iter()
        .map(|&alpha| {
            let scaled = snapshot
                .scale_branch_reactance(from, to, alpha)
                .map_err(|e| ComputeError::Invalid(e.to_string()))?;
            let profile = nodal_inertia(&scaled)?;
            let report = regional_inertia(&profile, partition, &scaled)?;
            let r = &report.regions[region];
            Ok((r.h_eff, r.h_conv))
        })
        .collect();
    let rows = rows?;
    Ok(ReactanceSweep {
        from,
        to,
        region,
        alphas: alphas.to_vec(),
        h_eff: rows.iter().map(|r| r.0).collect(),
        h_conv: rows.iter().map(|r| r.1).collect(),
    })
}

impl ReactanceSweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,region,h_eff_seconds,h_conv_seconds\n");
        for ((a, e), c) in self.alphas.iter().zip(&self.h_eff).zip(&self.h_conv) {
            out.push_str(&format!("{a},{},{e},{c}\n", self.region));
        }
        out
    }
}
