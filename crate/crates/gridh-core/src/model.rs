//! Network data model, case-file loading, and snapshot construction.
//!
//! A [`GridCase`] is the static description (buses, branches, machines,
//! inertial devices) plus the solved operating point (bus voltages and angles,
//! machine injections).  A [`Snapshot`] is a validated case with every source
//! EMF populated; it is immutable and is the input to all analytics.
//!
//! The network is treated as lossless: branch resistances present in a case
//! file are dropped with a warning, since every downstream formula works on
//! pure susceptances.  Angles are degrees in the file and radians in memory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Bus identifier as it appears in the case file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum CaseError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("reference error: {0}")]
    Reference(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemInfo {
    pub name: String,
    pub base_mva: f64,
    pub frequency_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub name: String,
    /// per unit
    pub voltage_mag: f64,
    /// degrees in the file; use [`Bus::voltage_ang`] for radians
    pub voltage_ang_deg: f64,
    /// per unit on the system base
    #[serde(default)]
    pub p_load: f64,
    #[serde(default)]
    pub q_load: f64,
}

impl Bus {
    pub fn voltage_ang(&self) -> f64 {
        self.voltage_ang_deg.to_radians()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub from: BusId,
    pub to: BusId,
    /// per unit, > 0
    pub reactance: f64,
    #[serde(default = "default_true")]
    pub status: bool,
}

fn default_true() -> bool {
    true
}

impl Branch {
    pub fn susceptance(&self) -> f64 {
        1.0 / self.reactance
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyncMachine {
    pub id: u32,
    pub bus: BusId,
    /// seconds on the system base
    pub inertia_h: f64,
    /// pu torque per pu speed deviation
    pub damping_d: f64,
    /// transient reactance, per unit
    pub xd_prime: f64,
    pub p_gen: f64,
    pub q_gen: f64,
    /// derived at snapshot construction
    #[serde(skip)]
    pub emf_mag: f64,
    #[serde(skip)]
    pub rotor_angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    SynchronousCondenser,
    SynchronousMotor,
    GridForming,
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DeviceKind::SynchronousCondenser => "synchronous_condenser",
            DeviceKind::SynchronousMotor => "synchronous_motor",
            DeviceKind::GridForming => "grid_forming",
        };
        f.write_str(s)
    }
}

/// An inertial device: synchronous condenser/motor or a grid-forming inverter
/// reduced to its virtual inertia, internal voltage and coupling reactance.
/// For a GFM, `inertia_h = T_w / m_p` and `damping_d = 1/m_p`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InertialDevice {
    pub id: u32,
    pub bus: BusId,
    pub kind: DeviceKind,
    /// seconds; zero means no inertial response (the device is then excluded
    /// from the source set entirely and only its injection matters)
    pub inertia_h: f64,
    pub damping_d: f64,
    /// per unit, > 0
    pub coupling_reactance: f64,
    /// internal voltage if regulated (e.g. a GFM's Q-V droop setpoint);
    /// derived from the terminal conditions when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emf_mag: Option<f64>,
    #[serde(default)]
    pub p_inject: f64,
    #[serde(skip)]
    pub emf_eff: f64,
    #[serde(skip)]
    pub internal_angle: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCase {
    pub system: SystemInfo,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub machines: Vec<SyncMachine>,
    #[serde(default)]
    pub devices: Vec<InertialDevice>,
}

/// Identifies an inertial source (row/column of the divider and SPC matrices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SourceRef {
    Machine(u32),
    Device(u32),
}

impl fmt::Display for SourceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceRef::Machine(id) => write!(f, "machine {id}"),
            SourceRef::Device(id) => write!(f, "device {id}"),
        }
    }
}

/// A frequency source seen by the analytics: an EMF `emf∠angle` behind
/// `reactance` connected at `bus` (index into `Snapshot::buses`).
#[derive(Debug, Clone, Copy)]
pub struct Source {
    pub reference: SourceRef,
    pub bus: usize,
    pub inertia_h: f64,
    pub damping_d: f64,
    pub reactance: f64,
    pub emf: f64,
    pub angle: f64,
}

impl GridCase {
    /// Structural and physical validation.  Multiple electrical islands are
    /// accepted as long as every island contains at least one inertial source
    /// (that is what the analytics actually require); a bus with no path to
    /// any source is rejected.
    pub fn validate(&self) -> Result<(), CaseError> {
        if self.system.base_mva <= 0.0 || !self.system.base_mva.is_finite() {
            return Err(CaseError::Invariant("system base_mva must be positive".into()));
        }
        if self.system.frequency_hz <= 0.0 {
            return Err(CaseError::Invariant("frequency_hz must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        for b in &self.buses {
            if !seen.insert(b.id) {
                return Err(CaseError::Invariant(format!("duplicate bus id {}", b.id)));
            }
            if !(b.voltage_mag > 0.0) || !b.voltage_mag.is_finite() {
                return Err(CaseError::Invariant(format!(
                    "bus {}: voltage_mag must be > 0",
                    b.id
                )));
            }
            if !b.voltage_ang_deg.is_finite() || !b.p_load.is_finite() || !b.q_load.is_finite() {
                return Err(CaseError::Invariant(format!("bus {}: non-finite field", b.id)));
            }
        }
        let bus_ids: BTreeSet<BusId> = self.buses.iter().map(|b| b.id).collect();
        for br in &self.branches {
            if br.from == br.to {
                return Err(CaseError::Invariant(format!(
                    "branch {}-{} connects a bus to itself",
                    br.from, br.to
                )));
            }
            if !(br.reactance > 0.0) || !br.reactance.is_finite() {
                return Err(CaseError::Invariant(format!(
                    "branch {}-{}: reactance must be > 0 (lossless network)",
                    br.from, br.to
                )));
            }
            for end in [br.from, br.to] {
                if !bus_ids.contains(&end) {
                    return Err(CaseError::Reference(format!(
                        "branch {}-{} references unknown bus {}",
                        br.from, br.to, end
                    )));
                }
            }
        }
        let mut mach_ids = BTreeSet::new();
        for m in &self.machines {
            if !mach_ids.insert(m.id) {
                return Err(CaseError::Invariant(format!("duplicate machine id {}", m.id)));
            }
            if !bus_ids.contains(&m.bus) {
                return Err(CaseError::Reference(format!(
                    "machine {} references unknown bus {}",
                    m.id, m.bus
                )));
            }
            if !(m.inertia_h > 0.0) || !(m.xd_prime > 0.0) {
                return Err(CaseError::Invariant(format!(
                    "machine {}: inertia_h and xd_prime must be > 0",
                    m.id
                )));
            }
            if m.damping_d < 0.0 {
                return Err(CaseError::Invariant(format!(
                    "machine {}: damping_d must be >= 0",
                    m.id
                )));
            }
        }
        let mut dev_ids = BTreeSet::new();
        for d in &self.devices {
            if !dev_ids.insert(d.id) {
                return Err(CaseError::Invariant(format!("duplicate device id {}", d.id)));
            }
            if !bus_ids.contains(&d.bus) {
                return Err(CaseError::Reference(format!(
                    "device {} references unknown bus {}",
                    d.id, d.bus
                )));
            }
            if d.inertia_h < 0.0 || !(d.coupling_reactance > 0.0) {
                return Err(CaseError::Invariant(format!(
                    "device {}: inertia_h must be >= 0 and coupling_reactance > 0",
                    d.id
                )));
            }
            if let Some(e) = d.emf_mag {
                if !(e > 0.0) {
                    return Err(CaseError::Invariant(format!(
                        "device {}: emf_mag must be > 0",
                        d.id
                    )));
                }
            }
        }
        let has_inertia = self.machines.iter().any(|m| m.inertia_h > 0.0)
            || self.devices.iter().any(|d| d.inertia_h > 0.0);
        if !has_inertia {
            return Err(CaseError::Invariant(
                "case has no machine or device with inertia_h > 0".into(),
            ));
        }
        self.check_islands()
    }

    fn check_islands(&self) -> Result<(), CaseError> {
        let index: BTreeMap<BusId, usize> =
            self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for br in self.branches.iter().filter(|b| b.status) {
            let (f, t) = (index[&br.from], index[&br.to]);
            adj[f].push(t);
            adj[t].push(f);
        }
        let mut grounded = vec![false; n];
        let mut stack: Vec<usize> = self
            .machines
            .iter()
            .filter(|m| m.inertia_h > 0.0)
            .map(|m| index[&m.bus])
            .chain(
                self.devices
                    .iter()
                    .filter(|d| d.inertia_h > 0.0)
                    .map(|d| index[&d.bus]),
            )
            .collect();
        for &s in &stack {
            grounded[s] = true;
        }
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !grounded[j] {
                    grounded[j] = true;
                    stack.push(j);
                }
            }
        }
        if let Some(i) = grounded.iter().position(|g| !g) {
            return Err(CaseError::Invariant(format!(
                "bus {} has no electrical path to any inertial source",
                self.buses[i].id
            )));
        }
        Ok(())
    }
}

/// Parse a case from JSON text.  Branch resistances, if present, are dropped
/// with a warning; unknown fields elsewhere are rejected.
pub fn load_case_str(text: &str) -> Result<GridCase, CaseError> {
    #[derive(Deserialize)]
    struct RawBranch {
        from: BusId,
        to: BusId,
        reactance: f64,
        #[serde(default)]
        resistance: Option<f64>,
        #[serde(default = "default_true")]
        status: bool,
    }
    #[derive(Deserialize)]
    struct RawCase {
        system: SystemInfo,
        buses: Vec<Bus>,
        branches: Vec<RawBranch>,
        machines: Vec<SyncMachine>,
        #[serde(default)]
        devices: Vec<InertialDevice>,
    }

    let raw: RawCase = serde_json::from_str(text).map_err(|e| CaseError::Parse(e.to_string()))?;
    let mut dropped = 0usize;
    let branches = raw
        .branches
        .into_iter()
        .map(|b| {
            if b.resistance.unwrap_or(0.0) != 0.0 {
                dropped += 1;
            }
            Branch { from: b.from, to: b.to, reactance: b.reactance, status: b.status }
        })
        .collect();
    if dropped > 0 {
        log::warn!(
            "dropped resistance on {dropped} branch(es): the network model is lossless"
        );
    }
    let case = GridCase {
        system: raw.system,
        buses: raw.buses,
        branches,
        machines: raw.machines,
        devices: raw.devices,
    };
    case.validate()?;
    Ok(case)
}

/// Load and validate a case file.
pub fn load_case<P: AsRef<Path>>(path: P) -> Result<GridCase, CaseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CaseError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    load_case_str(&text)
}

/// Serialize a case back to the file format.
pub fn serialize_case(case: &GridCase) -> String {
    let mut s = serde_json::to_string_pretty(case).expect("case serialization cannot fail");
    s.push('\n');
    s
}

/// A validated case with all source EMFs populated at the operating point.
/// Immutable: the what-if operations return new snapshots.
#[derive(Debug, Clone)]
pub struct Snapshot {
    case: GridCase,
    provenance: Vec<String>,
    index: BTreeMap<BusId, usize>,
}

impl Snapshot {
    /// Validate `case`, compute internal EMFs, and freeze the result.
    pub fn new(case: GridCase, origin: impl Into<String>) -> Result<Self, CaseError> {
        case.validate()?;
        let mut snap = Snapshot {
            index: case.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect(),
            case,
            provenance: vec![origin.into()],
        };
        snap.compute_internal_emf()?;
        Ok(snap)
    }

    /// Load a case file and build its snapshot in one step.
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, CaseError> {
        let case = load_case(&path)?;
        Snapshot::new(case, path.as_ref().display().to_string())
    }

    /// Classical-model initialization `E∠δ = V∠θ + jX·I` with
    /// `I = (P - jQ)/V*` from the terminal conditions.  Devices with a
    /// regulated internal voltage instead get their angle from the power
    /// transfer relation `P = E·V·sin(δ-θ)/X`.
    fn compute_internal_emf(&mut self) -> Result<(), CaseError> {
        use num_complex::Complex64;
        let index = self.index.clone();
        for m in &mut self.case.machines {
            let b = &self.case.buses[index[&m.bus]];
            let vc = Complex64::from_polar(b.voltage_mag, b.voltage_ang());
            let current = Complex64::new(m.p_gen, -m.q_gen) / vc.conj();
            let emf = vc + Complex64::new(0.0, m.xd_prime) * current;
            m.emf_mag = emf.norm();
            m.rotor_angle = emf.arg();
            if !(m.emf_mag > 0.0) {
                return Err(CaseError::Invariant(format!(
                    "machine {}: computed internal EMF is zero",
                    m.id
                )));
            }
        }
        for d in &mut self.case.devices {
            let b = &self.case.buses[index[&d.bus]];
            match d.emf_mag {
                Some(e) => {
                    let ratio = d.p_inject * d.coupling_reactance / (e * b.voltage_mag);
                    if ratio.abs() > 1.0 {
                        return Err(CaseError::Invariant(format!(
                            "device {}: p_inject not transferable through coupling_reactance \
                             at emf_mag {}",
                            d.id, e
                        )));
                    }
                    d.emf_eff = e;
                    d.internal_angle = b.voltage_ang() + ratio.asin();
                }
                None => {
                    let vc = Complex64::from_polar(b.voltage_mag, b.voltage_ang());
                    let current = Complex64::new(d.p_inject, 0.0) / vc.conj();
                    let emf = vc + Complex64::new(0.0, d.coupling_reactance) * current;
                    d.emf_eff = emf.norm();
                    d.internal_angle = emf.arg();
                }
            }
        }
        Ok(())
    }

    pub fn case(&self) -> &GridCase {
        &self.case
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub fn n_buses(&self) -> usize {
        self.case.buses.len()
    }

    pub fn buses(&self) -> &[Bus] {
        &self.case.buses
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn bus_id(&self, index: usize) -> BusId {
        self.case.buses[index].id
    }

    /// In-service branches as (bus index, bus index, susceptance).
    pub fn branch_susceptances(&self) -> Vec<(usize, usize, f64)> {
        self.case
            .branches
            .iter()
            .filter(|b| b.status)
            .map(|b| (self.index[&b.from], self.index[&b.to], b.susceptance()))
            .collect()
    }

    /// The frequency sources: machines plus devices with nonzero inertia.
    /// Zero-inertia devices provide no inertial response and no EMF node;
    /// their injection is already embedded in the operating point.
    pub fn sources(&self) -> Vec<Source> {
        let mut out = Vec::new();
        for m in &self.case.machines {
            out.push(Source {
                reference: SourceRef::Machine(m.id),
                bus: self.index[&m.bus],
                inertia_h: m.inertia_h,
                damping_d: m.damping_d,
                reactance: m.xd_prime,
                emf: m.emf_mag,
                angle: m.rotor_angle,
            });
        }
        for d in &self.case.devices {
            if d.inertia_h > 0.0 {
                out.push(Source {
                    reference: SourceRef::Device(d.id),
                    bus: self.index[&d.bus],
                    inertia_h: d.inertia_h,
                    damping_d: d.damping_d,
                    reactance: d.coupling_reactance,
                    emf: d.emf_eff,
                    angle: d.internal_angle,
                });
            }
        }
        out
    }

    /// Content digest of the underlying case (provenance excluded), used to
    /// verify that what-if operations never mutate their input.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serialize_case(&self.case).as_bytes());
        hex_string(&hasher.finalize())
    }

    /// New snapshot with `device` attached at its bus as an EMF behind the
    /// coupling reactance.  The original snapshot is unchanged.
    pub fn attach_device(&self, device: InertialDevice) -> Result<Snapshot, CaseError> {
        if self.case.devices.iter().any(|d| d.id == device.id) {
            return Err(CaseError::Invariant(format!("duplicate device id {}", device.id)));
        }
        if !self.index.contains_key(&device.bus) {
            return Err(CaseError::Reference(format!(
                "device {} references unknown bus {}",
                device.id, device.bus
            )));
        }
        let mut case = self.case.clone();
        let tag = format!(
            "+device(id={} kind={} bus={} H={} X={})",
            device.id, device.kind, device.bus, device.inertia_h, device.coupling_reactance
        );
        case.devices.push(device);
        let mut snap = Snapshot::new(case, self.provenance[0].clone())?;
        snap.provenance = self.provenance.clone();
        snap.provenance.push(tag);
        Ok(snap)
    }

    /// New snapshot with the reactance of branch `from`-`to` (all parallel
    /// circuits, either orientation) multiplied by `alpha`.
    pub fn scale_branch_reactance(
        &self,
        from: BusId,
        to: BusId,
        alpha: f64,
    ) -> Result<Snapshot, CaseError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(CaseError::Invariant(format!(
                "reactance scale factor must be positive and finite, got {alpha}"
            )));
        }
        let mut case = self.case.clone();
        let mut hits = 0;
        for br in &mut case.branches {
            if (br.from == from && br.to == to) || (br.from == to && br.to == from) {
                br.reactance *= alpha;
                hits += 1;
            }
        }
        if hits == 0 {
            return Err(CaseError::Reference(format!("no branch between {from} and {to}")));
        }
        let mut snap = Snapshot::new(case, self.provenance[0].clone())?;
        snap.provenance = self.provenance.clone();
        snap.provenance.push(format!("+scale({from}-{to}, x{alpha})"));
        Ok(snap)
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        use fmt::Write;
        write!(s, "{b:02x}").unwrap();
    }
    s
}
