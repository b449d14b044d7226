//! Property tests for the structural invariants of the analytics on randomly
//! generated (but physically sane) networks.

use gridh_core::inertia::nodal_inertia;
use gridh_core::la;
use gridh_core::model::{Branch, Bus, BusId, GridCase, Snapshot, SyncMachine, SystemInfo};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct RandomNet {
    n: usize,
    extra_edges: Vec<(usize, usize)>,
    reactances: Vec<f64>,
    machine_buses: Vec<usize>,
    inertias: Vec<f64>,
    voltages: Vec<f64>,
    angles_deg: Vec<f64>,
}

fn random_net() -> impl Strategy<Value = RandomNet> {
    (4usize..10)
        .prop_flat_map(|n| {
            let edges = prop::collection::vec((0..n, 0..n), 0..2 * n);
            let reactances = prop::collection::vec(0.02f64..0.5, 3 * n);
            let machines = prop::collection::vec(0..n, 1..4);
            let inertias = prop::collection::vec(1.0f64..80.0, 4);
            let voltages = prop::collection::vec(0.95f64..1.06, n);
            let angles = prop::collection::vec(-12.0f64..12.0, n);
            (Just(n), edges, reactances, machines, inertias, voltages, angles)
        })
        .prop_map(|(n, extra_edges, reactances, machine_buses, inertias, voltages, angles_deg)| {
            RandomNet { n, extra_edges, reactances, machine_buses, inertias, voltages, angles_deg }
        })
}

fn build_snapshot(net: &RandomNet) -> Snapshot {
    let mut branches = Vec::new();
    let mut xs = net.reactances.iter().cycle();
    // spanning chain keeps the graph connected
    for i in 1..net.n {
        branches.push(Branch {
            from: BusId(i as u32),
            to: BusId(i as u32 + 1),
            reactance: *xs.next().unwrap(),
            status: true,
        });
    }
    for &(a, b) in &net.extra_edges {
        if a != b {
            branches.push(Branch {
                from: BusId(a as u32 + 1),
                to: BusId(b as u32 + 1),
                reactance: *xs.next().unwrap(),
                status: true,
            });
        }
    }
    let buses = (0..net.n)
        .map(|i| Bus {
            id: BusId(i as u32 + 1),
            name: format!("bus {}", i + 1),
            voltage_mag: net.voltages[i],
            voltage_ang_deg: net.angles_deg[i],
            p_load: 0.0,
            q_load: 0.0,
        })
        .collect();
    let mut machine_buses = net.machine_buses.clone();
    machine_buses.sort_unstable();
    machine_buses.dedup();
    let machines = machine_buses
        .iter()
        .enumerate()
        .map(|(k, &b)| SyncMachine {
            id: k as u32 + 1,
            bus: BusId(b as u32 + 1),
            inertia_h: net.inertias[k % net.inertias.len()],
            damping_d: 0.0,
            xd_prime: 0.1,
            p_gen: 0.0,
            q_gen: 0.0,
            emf_mag: 0.0,
            rotor_angle: 0.0,
        })
        .collect();
    let case = GridCase {
        system: SystemInfo {
            name: "random".into(),
            base_mva: 100.0,
            frequency_hz: 60.0,
            note: None,
        },
        buses,
        branches,
        machines,
        devices: vec![],
    };
    Snapshot::new(case, "proptest").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Divider rows and SPC columns are stochastic on any connected network.
    #[test]
    fn divider_and_spc_are_stochastic(net in random_net()) {
        let snap = build_snapshot(&net);
        let profile = nodal_inertia(&snap).unwrap();
        prop_assert!(profile.stochasticity_defect() < 1e-9,
            "defect {}", profile.stochasticity_defect());
    }

    /// The closed-form h equals the per-bus scalar evaluation everywhere.
    #[test]
    fn matrix_and_scalar_h_agree(net in random_net()) {
        let snap = build_snapshot(&net);
        let profile = nodal_inertia(&snap).unwrap();
        let sources = snap.sources();
        for j in 0..snap.n_buses() {
            let inv: f64 = sources.iter().enumerate()
                .map(|(k, s)| profile.divider.matrix[(j, k)]
                     * profile.spc.matrix[(k, j)] / s.inertia_h)
                .sum();
            if profile.h[j].is_finite() {
                prop_assert!((1.0 / inv / profile.h[j] - 1.0).abs() < 1e-10);
            }
        }
    }

    /// Kron reduction commutes with splitting the elimination set.
    #[test]
    fn kron_two_stage_equals_one_stage(
        weights in prop::collection::vec(0.1f64..30.0, 15),
        shunts in prop::collection::vec(0.05f64..2.0, 6),
    ) {
        let n = 6;
        let mut b = DMatrix::zeros(n, n);
        let mut w = weights.iter().cycle();
        for i in 0..n {
            for j in (i + 1)..n {
                let x = *w.next().unwrap();
                b[(i, i)] += x;
                b[(j, j)] += x;
                b[(i, j)] -= x;
                b[(j, i)] -= x;
            }
        }
        for i in 0..n {
            b[(i, i)] += shunts[i];
        }
        let direct = la::kron_reduce(&b, &[0, 1, 2]).unwrap();
        let staged = la::kron_reduce(&la::kron_reduce(&b, &[0, 1, 2, 3]).unwrap(), &[0, 1, 2]).unwrap();
        prop_assert!((direct - staged).amax() < 1e-10);
    }

    /// Pencil eigenvalues are nonnegative with exactly one trivial mode on a
    /// connected graph, regardless of the weighting.
    #[test]
    fn pencil_spectrum_nonnegative(
        weights in prop::collection::vec(0.1f64..30.0, 8),
        inertia in prop::collection::vec(0.5f64..500.0, 9),
    ) {
        let n = 9;
        let mut l = DMatrix::zeros(n, n);
        let mut w = weights.iter().cycle();
        for i in 1..n {
            let x = *w.next().unwrap();
            l[(i - 1, i - 1)] += x;
            l[(i, i)] += x;
            l[(i - 1, i)] -= x;
            l[(i, i - 1)] -= x;
        }
        let nd = DVector::from_vec(inertia);
        let modes = la::eig_sym_pencil(&l, &nd).unwrap();
        let max = modes.last().unwrap().0;
        prop_assert!(modes[0].0.abs() <= 1e-10 * max.max(1.0));
        for (mu, _) in &modes {
            prop_assert!(*mu > -1e-10 * max.max(1.0));
        }
        prop_assert!(modes[1].0 > 1e-8 * max);
    }
}
