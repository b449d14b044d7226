//! Classical multi-machine time-domain simulation, linearized at the
//! snapshot's operating point.
//!
//! The model keeps one second-order swing state per source.  The
//! synchronizing-coefficient matrix comes from Kron-reducing the plain
//! susceptance network onto the source internal nodes and weighting the
//! equivalent couplings with the EMFs and angle cosines; a load step at a bus
//! is mapped onto the sources through the synchronizing-power coefficients of
//! that bus; bus frequencies are read out through the frequency divider.
//! Units follow the library convention `M = diag(H)`, so a load step `ΔP` at
//! a bus with nodal inertia `h` produces an initial RoCoF of `ΔP/h` per
//! second there.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::inertia::{augmented_susceptance, build_frequency_divider, build_spc};
use crate::la;
use crate::model::{BusId, Snapshot, SourceRef};
use crate::partition::PartitionResult;
use crate::ComputeError;

/// Linearized classical model: swing states per source plus the read-out and
/// injection maps.
#[derive(Debug, Clone)]
pub struct ClassicalModel {
    pub sources: Vec<SourceRef>,
    /// H per source, seconds
    pub inertia: DVector<f64>,
    pub damping: DVector<f64>,
    /// synchronizing coefficients over the reduced source network, zero row
    /// sums at the linearization point
    pub k_s: DMatrix<f64>,
    /// n_bus x n_src frequency divider (bus read-out)
    pub divider: DMatrix<f64>,
    /// n_src x n_bus synchronizing-power coefficients (injection map)
    pub spc: DMatrix<f64>,
    pub bus_ids: Vec<BusId>,
    /// system angular frequency, rad/s
    pub omega_s: f64,
}

pub fn assemble_model(snapshot: &Snapshot) -> Result<ClassicalModel, ComputeError> {
    let sources = snapshot.sources();
    if sources.is_empty() {
        return Err(ComputeError::NoInertialSource);
    }
    let n = snapshot.n_buses();
    let ns = sources.len();
    let aug = augmented_susceptance(snapshot, &sources);
    let keep: Vec<usize> = (n..n + ns).collect();
    let reduced = la::kron_reduce(&aug, &keep).map_err(ComputeError::La)?;
    let mut k_s = DMatrix::zeros(ns, ns);
    for i in 0..ns {
        for j in 0..ns {
            if i != j {
                let b_equiv = -reduced[(i, j)];
                k_s[(i, j)] = sources[i].emf
                    * sources[j].emf
                    * b_equiv
                    * (sources[i].angle - sources[j].angle).cos();
            }
        }
    }
    for i in 0..ns {
        k_s[(i, i)] = -k_s.row(i).sum();
    }
    let divider = build_frequency_divider(snapshot)?;
    let spc = build_spc(snapshot)?;
    Ok(ClassicalModel {
        sources: sources.iter().map(|s| s.reference).collect(),
        inertia: DVector::from_iterator(ns, sources.iter().map(|s| s.inertia_h)),
        damping: DVector::from_iterator(ns, sources.iter().map(|s| s.damping_d)),
        k_s,
        divider: divider.matrix,
        spc: spc.matrix,
        bus_ids: snapshot.buses().iter().map(|b| b.id).collect(),
        omega_s: 2.0 * std::f64::consts::PI * snapshot.case().system.frequency_hz,
    })
}

/// Trajectories of one simulation run.  Speeds and frequencies are per-unit
/// deviations; columns are time samples.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub time: Vec<f64>,
    /// n_src x T rotor speed deviations
    pub rotor_speed: DMatrix<f64>,
    /// n_bus x T bus frequency deviations (divider read-out)
    pub bus_freq: DMatrix<f64>,
    pub bus_ids: Vec<BusId>,
    pub sources: Vec<SourceRef>,
    pub dt: f64,
}

/// Fixed-step RK4 integration of the linear swing model with a constant load
/// step `delta_p` (positive = added load) at `bus` from t = 0.
pub fn simulate_load_step(
    model: &ClassicalModel,
    bus: BusId,
    delta_p: f64,
    horizon: f64,
    dt: f64,
) -> Result<SimResult, ComputeError> {
    if !(dt > 0.0) || !(horizon >= dt) {
        return Err(ComputeError::Invalid(format!("bad time grid: dt={dt}, horizon={horizon}")));
    }
    let j = model
        .bus_ids
        .iter()
        .position(|&b| b == bus)
        .ok_or_else(|| ComputeError::Invalid(format!("unknown bus {bus}")))?;
    let ns = model.sources.len();
    let steps = (horizon / dt).round() as usize;

    // per-source constant accelerating power: -ΔS[:,j] * ΔP
    let p_inj: DVector<f64> = DVector::from_fn(ns, |k, _| -model.spc[(k, j)] * delta_p);

    // x = [Δδ; Δω]; dδ/dt = ω_s Δω; H dω/dt = K_s Δδ - D Δω + p_inj
    let deriv = |x: &DVector<f64>| -> DVector<f64> {
        let delta = x.rows(0, ns);
        let omega = x.rows(ns, ns);
        let accel = &model.k_s * delta;
        let mut dx = DVector::zeros(2 * ns);
        for k in 0..ns {
            dx[k] = model.omega_s * omega[k];
            dx[ns + k] = (accel[k] - model.damping[k] * omega[k] + p_inj[k]) / model.inertia[k];
        }
        dx
    };

    let mut x = DVector::zeros(2 * ns);
    let mut time = Vec::with_capacity(steps + 1);
    let mut rotor = DMatrix::zeros(ns, steps + 1);
    for s in 0..=steps {
        let t = s as f64 * dt;
        time.push(t);
        for k in 0..ns {
            rotor[(k, s)] = x[ns + k];
        }
        if x.amax() > 1e6 {
            return Err(ComputeError::Diverged(t));
        }
        if s < steps {
            let k1 = deriv(&x);
            let k2 = deriv(&(&x + &k1 * (dt / 2.0)));
            let k3 = deriv(&(&x + &k2 * (dt / 2.0)));
            let k4 = deriv(&(&x + &k3 * dt));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        }
    }
    let bus_freq = &model.divider * &rotor;
    Ok(SimResult {
        time,
        rotor_speed: rotor,
        bus_freq,
        bus_ids: model.bus_ids.clone(),
        sources: model.sources.clone(),
        dt,
    })
}

impl SimResult {
    /// One-sided RoCoF over the first integration step, per bus (pu/s).
    pub fn initial_rocof(&self) -> DVector<f64> {
        let ncols = self.bus_freq.ncols();
        assert!(ncols >= 2, "simulation has no steps");
        (self.bus_freq.column(1) - self.bus_freq.column(0)) / self.dt
    }

    pub fn initial_rocof_at(&self, bus: BusId) -> Option<f64> {
        let i = self.bus_ids.iter().position(|&b| b == bus)?;
        Some(self.initial_rocof()[i])
    }

    /// `time,bus_<id>,...` wide CSV of bus frequency deviations.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s");
        for b in &self.bus_ids {
            out.push_str(&format!(",bus_{b}"));
        }
        out.push('\n');
        for (s, t) in self.time.iter().enumerate() {
            out.push_str(&format!("{t}"));
            for i in 0..self.bus_ids.len() {
                out.push_str(&format!(",{}", self.bus_freq[(i, s)]));
            }
            out.push('\n');
        }
        out
    }

    /// Per-bus initial RoCoF plus per-region averages when a partition is given.
    pub fn to_summary_json(&self, digest: &str, partition: Option<&PartitionResult>) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            version: &'a str,
            config_digest: &'a str,
            dt: f64,
            horizon: f64,
            initial_rocof_by_bus: Vec<(u32, f64)>,
            #[serde(skip_serializing_if = "Option::is_none")]
            regional_initial_rocof: Option<Vec<(usize, f64)>>,
        }
        let rocof = self.initial_rocof();
        let regional = partition.map(|p| {
            (0..p.regions.len())
                .map(|r| {
                    let members: Vec<usize> = (0..self.bus_ids.len())
                        .filter(|&i| p.region_of(self.bus_ids[i]) == Some(r))
                        .collect();
                    let avg = members.iter().map(|&i| rocof[i]).sum::<f64>() / members.len() as f64;
                    (r, avg)
                })
                .collect()
        });
        let summary = Summary {
            version: crate::VERSION,
            config_digest: digest,
            dt: self.dt,
            horizon: *self.time.last().unwrap_or(&0.0),
            initial_rocof_by_bus: self
                .bus_ids
                .iter()
                .zip(rocof.iter())
                .map(|(b, r)| (b.0, *r))
                .collect(),
            regional_initial_rocof: regional,
        };
        let mut s = serde_json::to_string_pretty(&summary).expect("summary serialization");
        s.push('\n');
        s
    }
}

/// Unweighted mean of the member-bus frequency traces of one region.
pub fn regional_average_frequency(
    result: &SimResult,
    partition: &PartitionResult,
    region: usize,
) -> Result<Vec<f64>, ComputeError> {
    let members: Vec<usize> = (0..result.bus_ids.len())
        .filter(|&i| partition.region_of(result.bus_ids[i]) == Some(region))
        .collect();
    if members.is_empty() {
        return Err(ComputeError::Invalid(format!("region {region} has no member buses")));
    }
    Ok((0..result.time.len())
        .map(|s| members.iter().map(|&i| result.bus_freq[(i, s)]).sum::<f64>() / members.len() as f64)
        .collect())
}
