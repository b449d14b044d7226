//! Nodal inertia distribution.
//!
//! Three ingredients, all evaluated at the snapshot's operating point:
//!
//! * the frequency-divider matrix `D_div` mapping source rotor-speed
//!   deviations to bus frequency deviations (row-stochastic),
//! * the synchronizing-power-coefficient matrix `ΔS` giving the fraction of a
//!   sudden bus disturbance each source picks up instantaneously
//!   (column-stochastic), built per bus by Kron-reducing the susceptance
//!   network onto the sources plus that bus,
//! * the closed-form nodal inertia `h = K_h ⊘ F_h` assembled from the
//!   equivalent susceptances, the divider and the source inertias.
//!
//! Damping/droop constants never enter `h`; they only produce the diagonal
//! damping-distribution matrix `R` used by the damped spectral mode.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::la;
use crate::model::{BusId, Snapshot, Source, SourceRef};
use crate::ComputeError;

/// Row-stochastic map from source rotor speeds to bus frequencies.
#[derive(Debug, Clone)]
pub struct FreqDivider {
    /// n_bus x n_src
    pub matrix: DMatrix<f64>,
    pub sources: Vec<SourceRef>,
}

/// Column-stochastic synchronizing-power coefficients, with the equivalent
/// susceptances kept for audit.
#[derive(Debug, Clone)]
pub struct SpcMatrix {
    /// n_src x n_bus; column j sums to 1
    pub matrix: DMatrix<f64>,
    /// n_src x n_bus equivalent susceptances from the per-bus Kron reductions
    pub equiv_susceptance: DMatrix<f64>,
    pub sources: Vec<SourceRef>,
}

/// Nodal inertia vector plus every intermediate matrix, for audit dumps.
/// `h` is in seconds; buses where the weighted sum is nonpositive (possible
/// only at extreme operating points) carry `NaN` and are listed in `invalid`.
#[derive(Debug, Clone)]
pub struct InertiaProfile {
    pub bus_ids: Vec<BusId>,
    pub h: Vec<f64>,
    pub invalid: Vec<(BusId, String)>,
    /// n_src x n_bus: equivalent susceptance weighted by source EMF and the
    /// angle cosine (the SPC numerators, terminal voltage cancelled)
    pub k_matrix: DMatrix<f64>,
    /// column sums of `k_matrix`
    pub k_h: DVector<f64>,
    /// n_bus x n_src frequency-sensitivity matrix
    pub f_matrix: DMatrix<f64>,
    /// row sums of `f_matrix`
    pub f_h: DVector<f64>,
    /// diagonal of the damping-distribution matrix R
    pub r_diag: DVector<f64>,
    pub divider: FreqDivider,
    pub spc: SpcMatrix,
}

/// Plain-susceptance Laplacian over buses (0..n) followed by source internal
/// nodes (n..n+ns): branches weigh 1/x, each source hangs behind its
/// transient or coupling reactance.
pub(crate) fn augmented_susceptance(snapshot: &Snapshot, sources: &[Source]) -> DMatrix<f64> {
    let n = snapshot.n_buses();
    let ns = sources.len();
    let mut l = DMatrix::zeros(n + ns, n + ns);
    let add = |l: &mut DMatrix<f64>, i: usize, j: usize, w: f64| {
        l[(i, i)] += w;
        l[(j, j)] += w;
        l[(i, j)] -= w;
        l[(j, i)] -= w;
    };
    for (f, t, b) in snapshot.branch_susceptances() {
        add(&mut l, f, t, b);
    }
    for (k, s) in sources.iter().enumerate() {
        add(&mut l, s.bus, n + k, 1.0 / s.reactance);
    }
    l
}

/// Build the frequency-divider matrix: solve the bus block of the augmented
/// susceptance system for each source column.
pub fn build_frequency_divider(snapshot: &Snapshot) -> Result<FreqDivider, ComputeError> {
    let sources = snapshot.sources();
    if sources.is_empty() {
        return Err(ComputeError::NoInertialSource);
    }
    let n = snapshot.n_buses();
    let ns = sources.len();
    let aug = augmented_susceptance(snapshot, &sources);
    let l_bb = aug.view((0, 0), (n, n)).into_owned();
    let l_bg = aug.view((0, n), (n, ns)).into_owned();
    let lu = l_bb.lu();
    let d = lu
        .solve(&(-l_bg))
        .ok_or_else(|| ComputeError::SingularNetwork("bus block not invertible".into()))?;
    if d.iter().any(|v| !v.is_finite()) {
        return Err(ComputeError::SingularNetwork(
            "divider solve produced non-finite entries".into(),
        ));
    }
    Ok(FreqDivider { matrix: d, sources: sources.iter().map(|s| s.reference).collect() })
}

/// Build the SPC matrix: for every bus, Kron-reduce the augmented network
/// onto sources plus that bus and normalize the EMF/voltage/cosine-weighted
/// couplings so each column sums to one.
pub fn build_spc(snapshot: &Snapshot) -> Result<SpcMatrix, ComputeError> {
    let sources = snapshot.sources();
    if sources.is_empty() {
        return Err(ComputeError::NoInertialSource);
    }
    let n = snapshot.n_buses();
    let ns = sources.len();
    let aug = augmented_susceptance(snapshot, &sources);
    let src_idx: Vec<usize> = (n..n + ns).collect();

    // (equivalent susceptances, SPC numerators) per bus
    type SpcColumn = (Vec<f64>, Vec<f64>);
    let columns: Result<Vec<SpcColumn>, ComputeError> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut keep = src_idx.clone();
            keep.push(j);
            let reduced = la::kron_reduce(&aug, &keep).map_err(ComputeError::La)?;
            let theta = snapshot.buses()[j].voltage_ang();
            let mut bt = vec![0.0; ns];
            let mut num = vec![0.0; ns];
            for k in 0..ns {
                bt[k] = -reduced[(k, ns)];
                num[k] = bt[k] * sources[k].emf * (sources[k].angle - theta).cos();
            }
            Ok((bt, num))
        })
        .collect();
    let columns = columns?;

    let mut equiv = DMatrix::zeros(ns, n);
    let mut spc = DMatrix::zeros(ns, n);
    for (j, (bt, num)) in columns.iter().enumerate() {
        let total: f64 = num.iter().sum();
        if total.abs() < 1e-12 {
            return Err(ComputeError::UndefinedInertia(
                snapshot.bus_id(j),
                "synchronizing-power weights sum to zero".into(),
            ));
        }
        for k in 0..ns {
            equiv[(k, j)] = bt[k];
            spc[(k, j)] = num[k] / total;
        }
    }
    Ok(SpcMatrix {
        matrix: spc,
        equiv_susceptance: equiv,
        sources: sources.iter().map(|s| s.reference).collect(),
    })
}

/// Closed-form nodal inertia and the damping distribution.
///
/// `K[k,j] = E_k B̃[k,j] cos(δ_k − θ_j)`; `K_h` its column sums;
/// `F = (D_div ∘ Kᵀ) M⁻¹` with `M = diag(H)`; `F_h` its row sums;
/// `h = K_h ⊘ F_h`.  Per bus this equals `1 / Σ_k D_div[j,k] ΔS[k,j] / H_k`.
pub fn nodal_inertia(snapshot: &Snapshot) -> Result<InertiaProfile, ComputeError> {
    let sources = snapshot.sources();
    if sources.iter().all(|s| s.inertia_h <= 0.0) {
        return Err(ComputeError::NoInertialSource);
    }
    let divider = build_frequency_divider(snapshot)?;
    let spc = build_spc(snapshot)?;
    let n = snapshot.n_buses();
    let ns = sources.len();

    let mut k_matrix = DMatrix::zeros(ns, n);
    for j in 0..n {
        let theta = snapshot.buses()[j].voltage_ang();
        for (k, s) in sources.iter().enumerate() {
            k_matrix[(k, j)] = s.emf * spc.equiv_susceptance[(k, j)] * (s.angle - theta).cos();
        }
    }
    let k_h = DVector::from_fn(n, |j, _| k_matrix.column(j).sum());
    let mut f_matrix = DMatrix::zeros(n, ns);
    for j in 0..n {
        for (k, s) in sources.iter().enumerate() {
            f_matrix[(j, k)] = divider.matrix[(j, k)] * k_matrix[(k, j)] / s.inertia_h;
        }
    }
    let f_h = DVector::from_fn(n, |j, _| f_matrix.row(j).sum());

    let mut h = vec![f64::NAN; n];
    let mut invalid = Vec::new();
    for j in 0..n {
        let hj = k_h[j] / f_h[j];
        if hj.is_finite() && hj > 0.0 && k_h[j] > 0.0 {
            h[j] = hj;
        } else {
            invalid.push((
                snapshot.bus_id(j),
                format!("nonpositive inertia weight sum (K_h = {:.3e}, F_h = {:.3e})", k_h[j], f_h[j]),
            ));
        }
    }

    let r_diag = DVector::from_fn(n, |j, _| {
        sources
            .iter()
            .enumerate()
            .map(|(k, s)| divider.matrix[(j, k)] * s.damping_d / s.inertia_h)
            .sum()
    });

    Ok(InertiaProfile {
        bus_ids: snapshot.buses().iter().map(|b| b.id).collect(),
        h,
        invalid,
        k_matrix,
        k_h,
        f_matrix,
        f_h,
        r_diag,
        divider,
        spc,
    })
}

/// Diagonal damping-distribution matrix `R = diag((D_div D) M⁻¹ 1)`.
pub fn damping_distribution(snapshot: &Snapshot) -> Result<DVector<f64>, ComputeError> {
    Ok(nodal_inertia(snapshot)?.r_diag)
}

impl InertiaProfile {
    /// Largest stochasticity defect: max over divider row sums and SPC column
    /// sums of |sum - 1|.  Bounded by [`tol::STOCHASTIC_SUM`](la::tol::STOCHASTIC_SUM)
    /// on healthy data.
    pub fn stochasticity_defect(&self) -> f64 {
        let rows = (0..self.divider.matrix.nrows())
            .map(|j| (self.divider.matrix.row(j).sum() - 1.0).abs())
            .fold(0.0f64, f64::max);
        let cols = (0..self.spc.matrix.ncols())
            .map(|j| (self.spc.matrix.column(j).sum() - 1.0).abs())
            .fold(0.0f64, f64::max);
        rows.max(cols)
    }

    pub fn h_at(&self, bus: BusId) -> Option<f64> {
        let i = self.bus_ids.iter().position(|&b| b == bus)?;
        let v = self.h[i];
        v.is_finite().then_some(v)
    }

    /// `bus_id,h_seconds` CSV body (header comment prepended by the caller).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bus_id,h_seconds\n");
        for (id, h) in self.bus_ids.iter().zip(&self.h) {
            if h.is_finite() {
                out.push_str(&format!("{id},{h}\n"));
            } else {
                out.push_str(&format!("{id},\n"));
            }
        }
        out
    }

    /// Full audit dump: divider, SPC, equivalent susceptances, K/F matrices
    /// and the damping diagonal.
    pub fn to_audit_json(&self, digest: &str) -> String {
        #[derive(Serialize)]
        struct Audit<'a> {
            version: &'a str,
            config_digest: &'a str,
            sources: Vec<String>,
            bus_ids: &'a [BusId],
            h_seconds: &'a [f64],
            invalid_buses: Vec<(BusId, &'a str)>,
            d_div: Vec<Vec<f64>>,
            delta_s: Vec<Vec<f64>>,
            equiv_susceptance: Vec<Vec<f64>>,
            k_matrix: Vec<Vec<f64>>,
            k_h: Vec<f64>,
            f_matrix: Vec<Vec<f64>>,
            f_h: Vec<f64>,
            r_diag: Vec<f64>,
        }
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
        };
        let audit = Audit {
            version: crate::VERSION,
            config_digest: digest,
            sources: self.divider.sources.iter().map(|s| s.to_string()).collect(),
            bus_ids: &self.bus_ids,
            h_seconds: &self.h,
            invalid_buses: self.invalid.iter().map(|(b, r)| (*b, r.as_str())).collect(),
            d_div: rows(&self.divider.matrix),
            delta_s: rows(&self.spc.matrix),
            equiv_susceptance: rows(&self.spc.equiv_susceptance),
            k_matrix: rows(&self.k_matrix),
            k_h: self.k_h.iter().copied().collect(),
            f_matrix: rows(&self.f_matrix),
            f_h: self.f_h.iter().copied().collect(),
            r_diag: self.r_diag.iter().copied().collect(),
        };
        let mut s = serde_json::to_string_pretty(&audit).expect("audit serialization");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::la::tol;
    use crate::model::{load_case_str, DeviceKind, InertialDevice, Snapshot};
    use approx::assert_relative_eq;

    fn case_path(name: &str) -> String {
        format!("{}/../../cases/{name}.json", env!("CARGO_MANIFEST_DIR"))
    }

    fn single_machine_case() -> Snapshot {
        let case = load_case_str(
            r#"{
            "system": {"name": "one", "base_mva": 100.0, "frequency_hz": 60.0},
            "buses": [
              {"id": 1, "name": "gen", "voltage_mag": 1.0, "voltage_ang_deg": 0.0},
              {"id": 2, "name": "load", "voltage_mag": 1.0, "voltage_ang_deg": -1.0, "p_load": 0.3},
              {"id": 3, "name": "far", "voltage_mag": 1.0, "voltage_ang_deg": -2.0}
            ],
            "branches": [
              {"from": 1, "to": 2, "reactance": 0.05},
              {"from": 2, "to": 3, "reactance": 0.08}
            ],
            "machines": [{"id": 1, "bus": 1, "inertia_h": 6.5, "damping_d": 2.0,
                          "xd_prime": 0.25, "p_gen": 0.3, "q_gen": 0.05}]
        }"#,
        )
        .unwrap();
        Snapshot::new(case, "test").unwrap()
    }

    /// Two identical machines at the ends of a symmetric line; bus 2 is the
    /// electrical midpoint.
    fn symmetric_twin_case() -> Snapshot {
        let case = load_case_str(
            r#"{
            "system": {"name": "twin", "base_mva": 100.0, "frequency_hz": 60.0},
            "buses": [
              {"id": 1, "name": "a", "voltage_mag": 1.0, "voltage_ang_deg": 0.0},
              {"id": 2, "name": "mid", "voltage_mag": 1.0, "voltage_ang_deg": 0.0},
              {"id": 3, "name": "b", "voltage_mag": 1.0, "voltage_ang_deg": 0.0}
            ],
            "branches": [
              {"from": 1, "to": 2, "reactance": 0.1},
              {"from": 2, "to": 3, "reactance": 0.1}
            ],
            "machines": [
              {"id": 1, "bus": 1, "inertia_h": 4.0, "damping_d": 1.0,
               "xd_prime": 0.2, "p_gen": 0.0, "q_gen": 0.0},
              {"id": 2, "bus": 3, "inertia_h": 4.0, "damping_d": 1.0,
               "xd_prime": 0.2, "p_gen": 0.0, "q_gen": 0.0}
            ]
        }"#,
        )
        .unwrap();
        Snapshot::new(case, "test").unwrap()
    }

    #[test]
    fn single_source_divider_rows_are_one() {
        let snap = single_machine_case();
        let d = build_frequency_divider(&snap).unwrap();
        assert_eq!(d.matrix.ncols(), 1);
        for j in 0..3 {
            assert_relative_eq!(d.matrix[(j, 0)], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn symmetric_midpoint_splits_half_half() {
        let snap = symmetric_twin_case();
        let d = build_frequency_divider(&snap).unwrap();
        assert_relative_eq!(d.matrix[(1, 0)], 0.5, epsilon = 1e-12);
        assert_relative_eq!(d.matrix[(1, 1)], 0.5, epsilon = 1e-12);
        let spc = build_spc(&snap).unwrap();
        assert_relative_eq!(spc.matrix[(0, 1)], 0.5, epsilon = 1e-12);
        assert_relative_eq!(spc.matrix[(1, 1)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn single_source_spc_is_one_everywhere() {
        let snap = single_machine_case();
        let spc = build_spc(&snap).unwrap();
        for j in 0..3 {
            assert_relative_eq!(spc.matrix[(0, j)], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ieee39_divider_and_spc_are_stochastic() {
        let snap = Snapshot::load(case_path("ieee39")).unwrap();
        let profile = nodal_inertia(&snap).unwrap();
        assert!(
            profile.stochasticity_defect() < tol::STOCHASTIC_SUM,
            "defect {}",
            profile.stochasticity_defect()
        );
    }

    #[test]
    fn isolated_machine_bus_has_h_equal_to_inertia() {
        // machine bus connected through a very weak line: nodal inertia at the
        // machine bus approaches H (M = diag(H) convention)
        let case = load_case_str(
            r#"{
            "system": {"name": "weak", "base_mva": 100.0, "frequency_hz": 60.0},
            "buses": [
              {"id": 1, "name": "m", "voltage_mag": 1.0, "voltage_ang_deg": 0.0},
              {"id": 2, "name": "far", "voltage_mag": 1.0, "voltage_ang_deg": 0.0}
            ],
            "branches": [{"from": 1, "to": 2, "reactance": 1000.0}],
            "machines": [
              {"id": 1, "bus": 1, "inertia_h": 7.25, "damping_d": 0.0,
               "xd_prime": 0.0001, "p_gen": 0.0, "q_gen": 0.0},
              {"id": 2, "bus": 2, "inertia_h": 3.0, "damping_d": 0.0,
               "xd_prime": 0.0001, "p_gen": 0.0, "q_gen": 0.0}
            ]
        }"#,
        )
        .unwrap();
        let snap = Snapshot::new(case, "test").unwrap();
        let profile = nodal_inertia(&snap).unwrap();
        assert_relative_eq!(profile.h[0], 7.25, max_relative = 1e-3);
    }

    #[test]
    fn scalar_and_matrix_paths_agree() {
        let snap = Snapshot::load(case_path("ieee39")).unwrap();
        let profile = nodal_inertia(&snap).unwrap();
        let sources = snap.sources();
        for j in 0..snap.n_buses() {
            let inv: f64 = sources
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    profile.divider.matrix[(j, k)] * profile.spc.matrix[(k, j)] / s.inertia_h
                })
                .sum();
            let scalar = 1.0 / inv;
            assert_relative_eq!(scalar, profile.h[j], max_relative = 1e-10);
        }
    }

    #[test]
    fn ieee39_extremes_match_published_distribution() {
        let snap = Snapshot::load(case_path("ieee39")).unwrap();
        let profile = nodal_inertia(&snap).unwrap();
        let argmax = profile
            .bus_ids
            .iter()
            .zip(&profile.h)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert_eq!(*argmax.0, BusId(9));
        let gen_buses = [30u32, 31, 32, 33, 34, 35, 36, 37, 38, 39];
        let gen_min = gen_buses
            .iter()
            .map(|&b| (b, profile.h_at(BusId(b)).unwrap()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert_eq!(gen_min.0, 36);
    }

    #[test]
    fn damping_zero_gives_zero_r() {
        let snap = Snapshot::load(case_path("ieee39")).unwrap(); // fixture has D = 0
        let r = damping_distribution(&snap).unwrap();
        assert!(r.amax() == 0.0);
    }

    #[test]
    fn damping_single_source_is_d_over_h() {
        let snap = single_machine_case();
        let r = damping_distribution(&snap).unwrap();
        for j in 0..3 {
            assert_relative_eq!(r[j], 2.0 / 6.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn damping_monotone_in_inverse_droop() {
        // GFM with droop m_p contributes D = 1/m_p; R grows as droop tightens
        let snap = Snapshot::load(case_path("wscc9")).unwrap();
        let mut last = None;
        for inv_mp in [2.0, 5.0, 10.0, 20.0] {
            let with_dev = snap
                .attach_device(InertialDevice {
                    id: 7,
                    bus: BusId(8),
                    kind: DeviceKind::GridForming,
                    inertia_h: 5.0,
                    damping_d: inv_mp,
                    coupling_reactance: 0.2,
                    emf_mag: None,
                    p_inject: 0.0,
                    emf_eff: 0.0,
                    internal_angle: 0.0,
                })
                .unwrap();
            let r = damping_distribution(&with_dev).unwrap();
            let total = r.sum();
            if let Some(prev) = last {
                assert!(total > prev, "R not monotone in 1/m_p");
            }
            last = Some(total);
        }
    }

    #[test]
    fn h_is_independent_of_source_damping() {
        let snap = Snapshot::load(case_path("wscc9")).unwrap();
        let base = nodal_inertia(&snap).unwrap();
        let mut case = snap.case().clone();
        for (i, m) in case.machines.iter_mut().enumerate() {
            m.damping_d = 3.7 + 1.3 * i as f64;
        }
        let perturbed = Snapshot::new(case, "test").unwrap();
        let profile = nodal_inertia(&perturbed).unwrap();
        for j in 0..snap.n_buses() {
            assert_relative_eq!(profile.h[j], base.h[j], max_relative = 1e-12);
        }
    }

    #[test]
    fn stressed_operating_point_flags_undefined_bus() {
        let snap = Snapshot::load(case_path("stressed3")).unwrap();
        let profile = nodal_inertia(&snap).unwrap();
        assert!(profile.invalid.iter().any(|(b, _)| *b == BusId(2)));
        assert!(profile.h_at(BusId(2)).is_none());
        assert!(profile.h_at(BusId(3)).is_some());
    }

    #[test]
    fn csv_export_has_one_row_per_bus() {
        let snap = Snapshot::load(case_path("wscc9")).unwrap();
        let profile = nodal_inertia(&snap).unwrap();
        let csv = profile.to_csv();
        assert_eq!(csv.lines().count(), 10);
        assert!(csv.starts_with("bus_id,h_seconds"));
    }
}
