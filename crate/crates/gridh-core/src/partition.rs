//! Coherency partitioning of the full bus graph.
//!
//! The network graph carries the operating-point-weighted Laplacian `L`
//! (edge weight `V_i V_j B_ij cos(θ_i − θ_j)`), the nodal-inertia diagonal
//! `N = diag(h)` and, when damping is included, the damping diagonal `R`.
//! The spectral problem is the quadratic pencil `(λ²N + λR + L)φ = 0`; with
//! `R = 0` it collapses to the symmetric-definite pencil `(L, N)` with purely
//! imaginary eigenvalues `±j√μ`.
//!
//! The embedding dimension comes from the largest relative eigengap.  The gap
//! index is counted in the full ascending spectrum, where the trivial uniform
//! mode occupies the first slot; the embedding then stacks that many
//! *informative* (nontrivial) eigenvectors, which reproduces the published
//! usage of the heuristic.  The region count is chosen by silhouette score
//! over a configurable range, and regions are post-processed so that each one
//! is an electrically connected area.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::inertia::InertiaProfile;
use crate::la::{self, tol};
use crate::model::{BusId, Snapshot};
use crate::ComputeError;

/// Operating-point-weighted bus Laplacian.
#[derive(Debug, Clone)]
pub struct NetworkLaplacian {
    pub matrix: DMatrix<f64>,
}

pub fn build_laplacian(snapshot: &Snapshot) -> NetworkLaplacian {
    let n = snapshot.n_buses();
    let buses = snapshot.buses();
    let mut l = DMatrix::zeros(n, n);
    for (f, t, b) in snapshot.branch_susceptances() {
        let w = buses[f].voltage_mag
            * buses[t].voltage_mag
            * b
            * (buses[f].voltage_ang() - buses[t].voltage_ang()).cos();
        l[(f, f)] += w;
        l[(t, t)] += w;
        l[(f, t)] -= w;
        l[(t, f)] -= w;
    }
    NetworkLaplacian { matrix: l }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMode {
    UndampedPencil,
    DampedQep,
}

/// Spectral embedding of the buses plus the selection diagnostics.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    /// selected dimension (gap index in the full spectrum; equals the number
    /// of stacked nontrivial eigenvectors)
    pub k: usize,
    /// n_bus x k coordinates
    pub coords: DMatrix<f64>,
    /// |λ| of all modes, ascending (one entry per mode of the pencil)
    pub magnitudes: Vec<f64>,
    /// (gap index in the full ascending spectrum, relative gap value)
    pub gaps: Vec<(usize, f64)>,
    /// number of trivial (numerically zero) modes skipped by the embedding
    pub trivial_modes: usize,
    pub mode: SpectralMode,
}

/// Rotate a complex eigenvector onto its best real axis and take real parts.
/// For an undamped system this recovers the underlying real eigenvector up to
/// sign while keeping the participation sign pattern that the elementwise
/// modulus would destroy.
fn phase_aligned_real(v: &DVector<la::C64>) -> DVector<f64> {
    let sum_sq: la::C64 = v.iter().map(|c| c * c).sum();
    let phase = 0.5 * sum_sq.arg();
    let rot = la::C64::from_polar(1.0, -phase);
    DVector::from_fn(v.len(), |i, _| (v[i] * rot).re)
}

/// Solve the spectral problem and select the embedding dimension.
pub fn spectral_modes(
    snapshot: &Snapshot,
    profile: &InertiaProfile,
    include_damping: bool,
) -> Result<SpectralEmbedding, ComputeError> {
    let n = snapshot.n_buses();
    if let Some((bus, reason)) = profile.invalid.first() {
        return Err(ComputeError::UndefinedInertia(*bus, reason.clone()));
    }
    let lap = build_laplacian(snapshot);
    let n_diag = DVector::from_vec(profile.h.clone());

    // (|λ|, participation vector) per mode, ascending
    let modes: Vec<(f64, DVector<f64>)> = if include_damping {
        let n_mat = DMatrix::from_diagonal(&n_diag);
        let r_mat = DMatrix::from_diagonal(&profile.r_diag);
        let pairs = la::eig_qep(&n_mat, &r_mat, &lap.matrix)?;
        reduce_conjugate_pairs(&pairs, &n_diag)
    } else {
        la::eig_sym_pencil(&lap.matrix, &n_diag)?
            .into_iter()
            .map(|(mu, phi)| (mu.max(0.0).sqrt(), phi))
            .collect()
    };

    let max_mag = modes.last().map(|m| m.0).unwrap_or(0.0);
    if max_mag <= 0.0 {
        return Err(ComputeError::DegenerateEmbedding("spectrum is entirely zero".into()));
    }
    // compare squared magnitudes: for the pencil route |λ| = sqrt(μ), and a
    // numerically-zero μ must still register as a trivial mode
    let trivial = modes
        .iter()
        .take_while(|m| m.0 * m.0 <= tol::TRIVIAL_MODE * max_mag * max_mag)
        .count();
    let nontrivial = &modes[trivial..];
    let span = (nontrivial.len().saturating_sub(1)).min(12);
    if span == 0 {
        return Err(ComputeError::DegenerateEmbedding("fewer than two nontrivial modes".into()));
    }
    let mut gaps = Vec::with_capacity(span);
    for i in 0..span {
        let gamma = (nontrivial[i + 1].0 - nontrivial[i].0) / nontrivial[i].0;
        gaps.push((trivial + i + 1, gamma));
    }
    let k = gaps
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(idx, _)| *idx)
        .expect("span >= 1");

    let mut coords = DMatrix::zeros(n, k);
    for (c, mode) in nontrivial.iter().take(k).enumerate() {
        for i in 0..n {
            coords[(i, c)] = mode.1[i];
        }
    }
    Ok(SpectralEmbedding {
        k,
        coords,
        magnitudes: modes.iter().map(|m| m.0).collect(),
        gaps,
        trivial_modes: trivial,
        mode: if include_damping { SpectralMode::DampedQep } else { SpectralMode::UndampedPencil },
    })
}

/// Collapse the 2n QEP eigenpairs into one representative per conjugate pair.
/// Vectors are phase-aligned and rescaled to unit N-norm so the undamped QEP
/// reproduces the pencil route's embedding exactly.
fn reduce_conjugate_pairs(
    pairs: &[la::EigenPair],
    n_diag: &DVector<f64>,
) -> Vec<(f64, DVector<f64>)> {
    let mut used = vec![false; pairs.len()];
    let mut out = Vec::with_capacity(pairs.len() / 2);
    for i in 0..pairs.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let lam = pairs[i].value;
        // nearest unused conjugate partner
        let mut best: Option<(usize, f64)> = None;
        for (j, other) in pairs.iter().enumerate().skip(i + 1) {
            if used[j] {
                continue;
            }
            let d = (other.value - lam.conj()).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let rep = if let Some((j, d)) = best {
            if d <= 1e-6 * (1.0 + lam.norm()) {
                used[j] = true;
                if lam.im >= 0.0 { i } else { j }
            } else {
                i
            }
        } else {
            i
        };
        let mut v = phase_aligned_real(&pairs[rep].vector);
        let n_norm: f64 = v.iter().zip(n_diag.iter()).map(|(x, w)| x * x * w).sum();
        if n_norm > 0.0 {
            v /= n_norm.sqrt();
        }
        out.push((pairs[rep].value.norm(), v));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

#[derive(Debug, Clone)]
pub struct PartitionConfig {
    pub r_min: usize,
    pub r_max: usize,
    pub seed: u64,
    pub include_damping: bool,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig { r_min: 2, r_max: 10, seed: 42, include_damping: false }
    }
}

/// Bus-to-region map with the selection diagnostics.
#[derive(Debug, Clone)]
pub struct PartitionResult {
    pub bus_ids: Vec<BusId>,
    /// region index per bus, aligned with `bus_ids`
    pub labels: Vec<usize>,
    /// member buses per region, regions ordered by their smallest bus id
    pub regions: Vec<Vec<BusId>>,
    pub r: usize,
    pub k: usize,
    /// silhouette score for every candidate region count (before repair)
    pub silhouette_by_r: Vec<(usize, f64)>,
    pub trivial_modes: usize,
    pub gaps: Vec<(usize, f64)>,
    pub mode: SpectralMode,
    pub seed: u64,
}

impl PartitionResult {
    pub fn region_of(&self, bus: BusId) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == bus).map(|i| self.labels[i])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bus_id,region\n");
        for (id, l) in self.bus_ids.iter().zip(&self.labels) {
            out.push_str(&format!("{id},{l}\n"));
        }
        out
    }

    pub fn to_json(&self, digest: &str) -> String {
        #[derive(Serialize)]
        struct Diag<'a> {
            version: &'a str,
            config_digest: &'a str,
            mode: SpectralMode,
            seed: u64,
            k: usize,
            r: usize,
            trivial_modes: usize,
            eigengaps: &'a [(usize, f64)],
            silhouette_by_r: &'a [(usize, f64)],
            regions: Vec<Vec<u32>>,
        }
        let diag = Diag {
            version: crate::VERSION,
            config_digest: digest,
            mode: self.mode,
            seed: self.seed,
            k: self.k,
            r: self.r,
            trivial_modes: self.trivial_modes,
            eigengaps: &self.gaps,
            silhouette_by_r: &self.silhouette_by_r,
            regions: self.regions.iter().map(|r| r.iter().map(|b| b.0).collect()).collect(),
        };
        let mut s = serde_json::to_string_pretty(&diag).expect("diagnostics serialization");
        s.push('\n');
        s
    }

    /// Region-colored graph for external rendering.
    pub fn to_dot(&self, snapshot: &Snapshot, digest: &str) -> String {
        const PALETTE: [&str; 12] = [
            "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
            "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
        ];
        let mut out = format!(
            "// gridh {} config_digest={digest}\ngraph regions {{\n  node [style=filled, shape=circle];\n",
            crate::VERSION
        );
        for (i, id) in self.bus_ids.iter().enumerate() {
            let color = PALETTE[self.labels[i] % PALETTE.len()];
            out.push_str(&format!("  b{id} [label=\"{id}\", fillcolor=\"{color}\"];\n"));
        }
        for br in snapshot.case().branches.iter().filter(|b| b.status) {
            out.push_str(&format!("  b{} -- b{};\n", br.from, br.to));
        }
        out.push_str("}\n");
        out
    }
}

/// Cluster the spectral embedding, pick the region count by silhouette, and
/// repair electrically disconnected regions.
pub fn partition(
    snapshot: &Snapshot,
    profile: &InertiaProfile,
    config: &PartitionConfig,
) -> Result<PartitionResult, ComputeError> {
    let n = snapshot.n_buses();
    let embedding = spectral_modes(snapshot, profile, config.include_damping)?;
    let coords = &embedding.coords;

    let spread = (0..n)
        .flat_map(|i| (0..embedding.k).map(move |d| (i, d)))
        .map(|(i, d)| (coords[(i, d)] - coords[(0, d)]).abs())
        .fold(0.0f64, f64::max);
    if spread < 1e-14 {
        return Err(ComputeError::DegenerateEmbedding("all embedding rows identical".into()));
    }

    let r_min = config.r_min.max(2);
    let r_max = config.r_max.min(n.saturating_sub(1));
    if r_min > r_max {
        return Err(ComputeError::Invalid(format!(
            "region count range [{}, {}] is empty for {n} buses",
            config.r_min, config.r_max
        )));
    }
    let mut scored: Vec<(usize, f64, Vec<usize>)> = Vec::new();
    for r in r_min..=r_max {
        let km = match la::kmeans(coords, r, config.seed) {
            Ok(km) => km,
            Err(la::LaError::ClusterCount { .. }) => break,
            Err(e) => return Err(ComputeError::La(e)),
        };
        let score = la::silhouette(coords, &km.labels).map_err(ComputeError::La)?;
        scored.push((r, score, km.labels));
    }
    let Some(best) = scored.iter().max_by(|a, b| match a.1.total_cmp(&b.1) {
        std::cmp::Ordering::Equal => b.0.cmp(&a.0), // tie -> smaller r
        other => other,
    }) else {
        return Err(ComputeError::DegenerateEmbedding("no feasible region count".into()));
    };

    let mut labels = best.2.clone();
    repair_connectivity(snapshot, &mut labels);
    let (labels, regions) = canonicalize(snapshot, labels);

    Ok(PartitionResult {
        bus_ids: snapshot.buses().iter().map(|b| b.id).collect(),
        r: regions.len(),
        labels,
        regions,
        k: embedding.k,
        silhouette_by_r: scored.iter().map(|(r, s, _)| (*r, *s)).collect(),
        trivial_modes: embedding.trivial_modes,
        gaps: embedding.gaps.clone(),
        mode: embedding.mode,
        seed: config.seed,
    })
}

/// Reassign electrically disconnected fragments of each region to the
/// neighboring region with the strongest total boundary susceptance; a
/// fragment with no neighbor at all becomes its own region.
pub(crate) fn repair_connectivity(snapshot: &Snapshot, labels: &mut [usize]) {
    let n = labels.len();
    let edges = snapshot.branch_susceptances();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(f, t, b) in &edges {
        adj[f].push((t, b));
        adj[t].push((f, b));
    }
    let mut next_label = labels.iter().copied().max().unwrap_or(0) + 1;
    for _ in 0..10 * n.max(1) {
        let mut changed = false;
        let present: Vec<usize> = {
            let mut v: Vec<usize> = labels.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        };
        for &region in &present {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == region).collect();
            if members.is_empty() {
                continue;
            }
            let fragments = components_within(&members, &adj, labels, region);
            if fragments.len() <= 1 {
                continue;
            }
            // keep the largest fragment (ties: the one holding the smallest bus index)
            let keep = fragments
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| {
                    a.len().cmp(&b.len()).then_with(|| {
                        b.iter().min().cmp(&a.iter().min())
                    })
                })
                .map(|(i, _)| i)
                .expect("at least two fragments");
            for (fi, frag) in fragments.iter().enumerate() {
                if fi == keep {
                    continue;
                }
                let mut boundary: BTreeMap<usize, f64> = BTreeMap::new();
                for &i in frag {
                    for &(j, b) in &adj[i] {
                        if labels[j] != region {
                            *boundary.entry(labels[j]).or_insert(0.0) += b;
                        }
                    }
                }
                let target = boundary
                    .iter()
                    .max_by(|a, b| a.1.total_cmp(b.1).then_with(|| b.0.cmp(a.0)))
                    .map(|(&l, _)| l);
                let new_label = match target {
                    Some(l) => l,
                    None => {
                        let l = next_label;
                        next_label += 1;
                        l
                    }
                };
                for &i in frag {
                    labels[i] = new_label;
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

fn components_within(
    members: &[usize],
    adj: &[Vec<(usize, f64)>],
    labels: &[usize],
    region: usize,
) -> Vec<Vec<usize>> {
    let mut seen: BTreeMap<usize, bool> = members.iter().map(|&m| (m, false)).collect();
    let mut out = Vec::new();
    for &start in members {
        if seen[&start] {
            continue;
        }
        let mut comp = vec![start];
        seen.insert(start, true);
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for &(j, _) in &adj[i] {
                if labels[j] == region && seen.get(&j) == Some(&false) {
                    seen.insert(j, true);
                    comp.push(j);
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Renumber regions by their smallest member bus id and collect memberships.
fn canonicalize(snapshot: &Snapshot, labels: Vec<usize>) -> (Vec<usize>, Vec<Vec<BusId>>) {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut ordered: Vec<Vec<usize>> = groups.into_values().collect();
    ordered.sort_by_key(|members| members.iter().map(|&i| snapshot.bus_id(i)).min());
    let mut new_labels = vec![0usize; labels.len()];
    let mut regions = Vec::with_capacity(ordered.len());
    for (new, members) in ordered.iter().enumerate() {
        let mut ids: Vec<BusId> = members.iter().map(|&i| snapshot.bus_id(i)).collect();
        ids.sort();
        for &i in members {
            new_labels[i] = new;
        }
        regions.push(ids);
    }
    (new_labels, regions)
}
