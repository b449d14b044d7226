//! `gridh` — nodal inertia, coherency regions, regional inertia and what-if
//! studies from a case file, with deterministic file outputs.
//!
//! Exit codes: 0 success, 1 computational failure, 2 input error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use gridh_core::inertia::nodal_inertia;
use gridh_core::model::{self, DeviceKind, InertialDevice, Snapshot};
use gridh_core::partition::{partition, PartitionConfig};
use gridh_core::provenance::{config_digest, csv_header};
use gridh_core::regional::{
    device_h_sweep, min_device_inertia, reactance_sweep, regional_inertia,
};
use gridh_core::sim::{assemble_model, simulate_load_step};
use gridh_core::{BusId, CaseError, ComputeError};

#[derive(Parser)]
#[command(name = "gridh", version, about = "Grid inertia distribution and regional analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Args)]
struct CommonOpts {
    /// Case file (JSON)
    #[arg(long)]
    case: PathBuf,
    /// Output directory (created if missing)
    #[arg(long)]
    out: PathBuf,
    /// Output formats to write where both exist
    #[arg(long, value_enum, default_value = "both")]
    format: Format,
}

#[derive(Args)]
struct PartitionOpts {
    /// Random seed for the clustering
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Smallest region count to score
    #[arg(long, default_value_t = 2)]
    r_min: usize,
    /// Largest region count to score
    #[arg(long, default_value_t = 10)]
    r_max: usize,
    /// Use the damped quadratic eigenproblem instead of the undamped pencil
    #[arg(long, default_value_t = false)]
    damped: bool,
}

impl PartitionOpts {
    fn config(&self) -> PartitionConfig {
        PartitionConfig {
            r_min: self.r_min,
            r_max: self.r_max,
            seed: self.seed,
            include_damping: self.damped,
        }
    }
}

#[derive(Args)]
struct DeviceOpts {
    /// Coupling reactance of the device template, per unit
    #[arg(long, default_value_t = 0.1)]
    device_x: f64,
    /// Active power injection of the device, per unit
    #[arg(long, default_value_t = 0.0)]
    device_p: f64,
    /// Damping/droop constant (1/m_p for a grid-forming inverter)
    #[arg(long, default_value_t = 10.0)]
    device_d: f64,
    /// Regulated internal voltage; derived from the terminal when omitted
    #[arg(long)]
    device_emf: Option<f64>,
    /// Device class (affects reporting only)
    #[arg(long, value_enum, default_value = "grid-forming")]
    device_kind: KindArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    SynchronousCondenser,
    SynchronousMotor,
    GridForming,
}

impl DeviceOpts {
    fn template(&self, bus: BusId) -> InertialDevice {
        InertialDevice {
            id: 9000,
            bus,
            kind: match self.device_kind {
                KindArg::SynchronousCondenser => DeviceKind::SynchronousCondenser,
                KindArg::SynchronousMotor => DeviceKind::SynchronousMotor,
                KindArg::GridForming => DeviceKind::GridForming,
            },
            inertia_h: 0.0,
            damping_d: self.device_d,
            coupling_reactance: self.device_x,
            emf_mag: self.device_emf,
            p_inject: self.device_p,
            emf_eff: 0.0,
            internal_angle: 0.0,
        }
    }

    fn digest_entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("device_x", self.device_x.to_string()),
            ("device_p", self.device_p.to_string()),
            ("device_d", self.device_d.to_string()),
            ("device_emf", format!("{:?}", self.device_emf)),
        ]
    }
}

#[derive(Subcommand)]
enum Command {
    /// Nodal inertia distribution: CSV plus a full audit dump
    Inertia {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Coherent-region partition: labels, diagnostics, DOT export
    Partition {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        part: PartitionOpts,
    },
    /// What-if studies for new devices and line reactance changes
    Whatif {
        #[command(subcommand)]
        study: Study,
    },
    /// Classical swing simulation of a load step
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        part: PartitionOpts,
        /// Disturbance bus
        #[arg(long)]
        bus: u32,
        /// Load step magnitude, per unit (positive = added load)
        #[arg(long)]
        dp: f64,
        /// Integration step, seconds
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Simulation horizon, seconds
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
    },
}

#[derive(Subcommand)]
enum Study {
    /// Nodal inertia at every bus as the device inertia sweeps a grid
    DeviceSweep {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        device: DeviceOpts,
        /// Connection bus
        #[arg(long)]
        bus: u32,
        /// Device inertia grid, seconds (comma separated)
        #[arg(long, value_delimiter = ',', required = true)]
        h_grid: Vec<f64>,
    },
    /// Minimum device inertia that does not degrade the connection bus
    MinH {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        device: DeviceOpts,
        /// Connection bus
        #[arg(long)]
        bus: u32,
    },
    /// Regional inertia as one branch reactance is scaled
    LineSweep {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        part: PartitionOpts,
        /// Branch end buses
        #[arg(long)]
        from: u32,
        #[arg(long)]
        to: u32,
        /// Scale factors (comma separated)
        #[arg(long, value_delimiter = ',', required = true)]
        alpha_grid: Vec<f64>,
        /// Track the region containing this bus (default: the --to bus)
        #[arg(long)]
        region_bus: Option<u32>,
    },
}

enum CliError {
    Input(String),
    Compute(String),
}

impl From<CaseError> for CliError {
    fn from(e: CaseError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ComputeError> for CliError {
    fn from(e: ComputeError) -> Self {
        match &e {
            // precondition violations (unknown bus, empty ranges, bad grids)
            ComputeError::Invalid(_) => CliError::Input(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Compute(msg)) => {
            eprintln!("error (computation): {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error (input): {msg}");
            ExitCode::from(2)
        }
    }
}

fn load(common: &CommonOpts) -> Result<(Snapshot, String), CliError> {
    let bytes = std::fs::read(&common.case).map_err(|e| {
        CliError::Input(format!("cannot read {}: {e}", common.case.display()))
    })?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let case_digest = format!("{:x}", hasher.finalize());
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::Input("case file is not valid UTF-8".into()))?;
    let case = model::load_case_str(&text)?;
    let snap = Snapshot::new(case, common.case.display().to_string())?;
    Ok((snap, case_digest))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Inertia { common } => {
            let (snap, case_digest) = load(&common)?;
            let digest = config_digest([
                ("command", "inertia".to_string()),
                ("case", case_digest),
            ]);
            let profile = nodal_inertia(&snap)?;
            if common.format != Format::Json {
                let csv = format!("{}{}", csv_header(&digest), profile.to_csv());
                write_file(&common.out, "inertia.csv", &csv)?;
            }
            if common.format != Format::Csv {
                write_file(&common.out, "inertia_audit.json", &profile.to_audit_json(&digest))?;
            }
            Ok(())
        }
        Command::Partition { common, part } => {
            let (snap, case_digest) = load(&common)?;
            let digest = config_digest([
                ("command", "partition".to_string()),
                ("case", case_digest),
                ("seed", part.seed.to_string()),
                ("r_min", part.r_min.to_string()),
                ("r_max", part.r_max.to_string()),
                ("damped", part.damped.to_string()),
            ]);
            let profile = nodal_inertia(&snap)?;
            let result = partition(&snap, &profile, &part.config())?;
            let report = regional_inertia(&profile, &result, &snap)?;
            if common.format != Format::Json {
                let csv = format!("{}{}", csv_header(&digest), result.to_csv());
                write_file(&common.out, "partition.csv", &csv)?;
                let csv = format!("{}{}", csv_header(&digest), report.to_csv());
                write_file(&common.out, "regional.csv", &csv)?;
            }
            if common.format != Format::Csv {
                write_file(&common.out, "partition.json", &result.to_json(&digest))?;
                write_file(&common.out, "regional.json", &report.to_json(&digest))?;
            }
            write_file(&common.out, "partition.dot", &result.to_dot(&snap, &digest))?;
            println!(
                "selected k = {} embedding modes, r = {} regions (seed {})",
                result.k, result.r, result.seed
            );
            Ok(())
        }
        Command::Whatif { study } => run_study(study),
        Command::Simulate { common, part, bus, dp, dt, horizon } => {
            let (snap, case_digest) = load(&common)?;
            let digest = config_digest([
                ("command", "simulate".to_string()),
                ("case", case_digest),
                ("bus", bus.to_string()),
                ("dp", dp.to_string()),
                ("dt", dt.to_string()),
                ("horizon", horizon.to_string()),
                ("seed", part.seed.to_string()),
            ]);
            let profile = nodal_inertia(&snap)?;
            let regions = partition(&snap, &profile, &part.config())?;
            let model = assemble_model(&snap)?;
            let result = simulate_load_step(&model, BusId(bus), dp, horizon, dt)?;
            if common.format != Format::Json {
                let csv = format!("{}{}", csv_header(&digest), result.to_csv());
                write_file(&common.out, "sim_frequencies.csv", &csv)?;
            }
            if common.format != Format::Csv {
                write_file(
                    &common.out,
                    "sim_summary.json",
                    &result.to_summary_json(&digest, Some(&regions)),
                )?;
            }
            Ok(())
        }
    }
}

fn run_study(study: Study) -> Result<(), CliError> {
    match study {
        Study::DeviceSweep { common, device, bus, h_grid } => {
            let (snap, case_digest) = load(&common)?;
            let mut entries = vec![
                ("command", "whatif device-sweep".to_string()),
                ("case", case_digest),
                ("bus", bus.to_string()),
                ("h_grid", format!("{h_grid:?}")),
            ];
            entries.extend(device.digest_entries());
            let digest = config_digest(entries);
            let sweep = device_h_sweep(&snap, BusId(bus), &device.template(BusId(bus)), &h_grid)?;
            let csv = format!("{}{}", csv_header(&digest), sweep.to_csv());
            write_file(&common.out, "device_sweep.csv", &csv)?;
            Ok(())
        }
        Study::MinH { common, device, bus } => {
            let (snap, case_digest) = load(&common)?;
            let mut entries = vec![
                ("command", "whatif min-h".to_string()),
                ("case", case_digest),
                ("bus", bus.to_string()),
            ];
            entries.extend(device.digest_entries());
            let digest = config_digest(entries);
            let result = min_device_inertia(&snap, BusId(bus), &device.template(BusId(bus)))?;
            write_file(&common.out, "min_inertia.json", &result.to_json(&digest))?;
            match &result.outcome {
                gridh_core::regional::MinInertiaOutcome::Finite(h) => {
                    println!("minimum device inertia at bus {bus}: {h:.4} s");
                }
                gridh_core::regional::MinInertiaOutcome::NoFiniteImprovement => {
                    println!(
                        "no finite device inertia improves bus {bus} \
                         (weight-sum denominator {:.3e} <= 0)",
                        result.denominator
                    );
                }
            }
            Ok(())
        }
        Study::LineSweep { common, part, from, to, alpha_grid, region_bus } => {
            let (snap, case_digest) = load(&common)?;
            let digest = config_digest([
                ("command", "whatif line-sweep".to_string()),
                ("case", case_digest),
                ("from", from.to_string()),
                ("to", to.to_string()),
                ("alpha_grid", format!("{alpha_grid:?}")),
                ("seed", part.seed.to_string()),
            ]);
            let profile = nodal_inertia(&snap)?;
            let regions = partition(&snap, &profile, &part.config())?;
            let anchor = BusId(region_bus.unwrap_or(to));
            let region = regions
                .region_of(anchor)
                .ok_or_else(|| CliError::Input(format!("unknown bus {anchor}")))?;
            let sweep =
                reactance_sweep(&snap, BusId(from), BusId(to), &alpha_grid, &regions, region)?;
            let mut csv = format!("{}{}", csv_header(&digest), sweep.to_csv());
            let mut note = String::new();
            let _ = writeln!(
                note,
                "# region {region} tracks bus {anchor}; members: {:?}",
                regions.regions[region].iter().map(|b| b.0).collect::<Vec<_>>()
            );
            csv.push_str(&note);
            write_file(&common.out, "line_sweep.csv", &csv)?;
            Ok(())
        }
    }
}
