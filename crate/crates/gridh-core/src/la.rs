//! Dense linear-algebra kernels: Kron reduction, the symmetric-definite
//! pencil, the quadratic eigenvalue problem, k-means and silhouette scoring.
//!
//! Matrix storage is nalgebra's `DMatrix`; problem sizes here are a few
//! hundred at most, so everything is direct and dense.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type C64 = Complex<f64>;

/// Central tolerance table for the numerical kernels and their invariants.
pub mod tol {
    /// Symmetry defect accepted after a Kron reduction.
    pub const KRON_SYMMETRY: f64 = 1e-10;
    /// N-orthonormality defect of pencil eigenvectors.
    pub const PENCIL_ORTHO: f64 = 1e-8;
    /// QEP residual bound, relative to the stiffness-norm scale.
    pub const QEP_RESIDUAL: f64 = 1e-8;
    /// Relative change of the k-means objective that counts as converged.
    pub const KMEANS_REL_CHANGE: f64 = 1e-8;
    pub const KMEANS_MAX_ITERS: usize = 300;
    /// Row-sum / column-sum defect allowed for the divider and SPC matrices.
    pub const STOCHASTIC_SUM: f64 = 1e-9;
    /// |λ| below `TRIVIAL_MODE * |λ_max|` counts as a trivial (zero) mode.
    pub const TRIVIAL_MODE: f64 = 1e-8;
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum LaError {
    #[error("eliminated block is singular in Kron reduction")]
    SingularBlock,
    #[error("matrix dimensions do not agree: {0}")]
    Dimension(String),
    #[error("inertia weight matrix has a nonpositive entry at index {0}")]
    NonPositiveWeight(usize),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("eigensolver did not converge")]
    EigenFailed,
    #[error("QEP eigenvector residual above tolerance for eigenvalue {0}")]
    QepResidual(C64),
    #[error("need at least {need} distinct points for {need} clusters, found {found}")]
    ClusterCount { need: usize, found: usize },
    #[error("silhouette needs at least two nonempty clusters")]
    SingleCluster,
    #[error("points contain non-finite coordinates")]
    NonFinite,
}

/// Schur complement of `b` onto `keep`: eliminates every other index while
/// preserving the terminal relation between kept-node injections and angles.
pub fn kron_reduce(b: &DMatrix<f64>, keep: &[usize]) -> Result<DMatrix<f64>, LaError> {
    let n = b.nrows();
    if b.ncols() != n {
        return Err(LaError::Dimension(format!("{}x{}", b.nrows(), b.ncols())));
    }
    let mut is_kept = vec![false; n];
    for &k in keep {
        if k >= n {
            return Err(LaError::Dimension(format!("keep index {k} out of range")));
        }
        is_kept[k] = true;
    }
    let elim: Vec<usize> = (0..n).filter(|&i| !is_kept[i]).collect();
    if elim.is_empty() {
        return Ok(b.clone());
    }
    let b_kk = b.select_rows(keep.iter()).select_columns(keep.iter());
    let b_kr = b.select_rows(keep.iter()).select_columns(elim.iter());
    let b_rk = b.select_rows(elim.iter()).select_columns(keep.iter());
    let b_rr = b.select_rows(elim.iter()).select_columns(elim.iter());
    let lu = b_rr.lu();
    let x = lu.solve(&b_rk).ok_or(LaError::SingularBlock)?;
    let mut s = b_kk - b_kr * x;
    // the Schur complement of a symmetric matrix is symmetric; kill the
    // round-off asymmetry so downstream symmetry checks are exact
    let st = s.transpose();
    s = (s + st) * 0.5;
    Ok(s)
}

/// Generalized symmetric eigenproblem `L φ = μ N φ` for diagonal positive `N`,
/// solved by whitening with `N^{-1/2}`.  Returns (μ, φ) pairs with μ ascending
/// and eigenvectors N-orthonormal.
pub fn eig_sym_pencil(
    l: &DMatrix<f64>,
    n_diag: &DVector<f64>,
) -> Result<Vec<(f64, DVector<f64>)>, LaError> {
    let n = l.nrows();
    if l.ncols() != n || n_diag.len() != n {
        return Err(LaError::Dimension(format!("L {}x{}, N {}", l.nrows(), l.ncols(), n_diag.len())));
    }
    for (i, &w) in n_diag.iter().enumerate() {
        if !(w > 0.0) || !w.is_finite() {
            return Err(LaError::NonPositiveWeight(i));
        }
    }
    let w: DVector<f64> = n_diag.map(|v| 1.0 / v.sqrt());
    let mut lw = DMatrix::from_fn(n, n, |i, j| l[(i, j)] * w[i] * w[j]);
    let lwt = lw.transpose();
    lw = (lw + lwt) * 0.5;
    let eig = nalgebra::linalg::SymmetricEigen::try_new(lw, 1e-14, 0).ok_or(LaError::EigenFailed)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut out = Vec::with_capacity(n);
    for &i in &order {
        let psi = eig.eigenvectors.column(i);
        let phi = DVector::from_fn(n, |r, _| psi[r] * w[r]);
        out.push((eig.eigenvalues[i], phi));
    }
    Ok(out)
}

/// One solution of the quadratic eigenvalue problem `(λ²N + λR + L)φ = 0`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: C64,
    /// unit 2-norm
    pub vector: DVector<C64>,
}

/// All `2n` eigenpairs of `(λ²N + λR + L)φ = 0` for positive-definite `N`,
/// via companion linearization of the monic form (eigenvalues) and inverse
/// iteration on `Q(λ)` (eigenvectors).  Sorted by |λ| ascending.
pub fn eig_qep(
    n_mat: &DMatrix<f64>,
    r_mat: &DMatrix<f64>,
    l_mat: &DMatrix<f64>,
) -> Result<Vec<EigenPair>, LaError> {
    let n = n_mat.nrows();
    if n_mat.ncols() != n || r_mat.nrows() != n || r_mat.ncols() != n || l_mat.nrows() != n
        || l_mat.ncols() != n
    {
        return Err(LaError::Dimension("QEP matrices must be square and same size".into()));
    }
    let chol = n_mat.clone().cholesky().ok_or(LaError::NotPositiveDefinite)?;
    // whiten with the Cholesky factor (N = C Cᵀ) and rescale eigenvalues to
    // O(1); both steps only condition the companion matrix, the eigenvectors
    // are recovered from the original problem below
    let c_factor = chol.l();
    let half = |m: &DMatrix<f64>| -> Result<DMatrix<f64>, LaError> {
        let x = c_factor.solve_lower_triangular(m).ok_or(LaError::NotPositiveDefinite)?;
        let y = c_factor
            .solve_lower_triangular(&x.transpose())
            .ok_or(LaError::NotPositiveDefinite)?;
        Ok(y.transpose())
    };
    let l_white = half(l_mat)?;
    let r_white = half(r_mat)?;
    let gamma = l_white.amax().sqrt().max(f64::MIN_POSITIVE.sqrt());

    let mut comp = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        comp[(i, n + i)] = 1.0;
        for j in 0..n {
            comp[(n + i, j)] = -l_white[(i, j)] / (gamma * gamma);
            comp[(n + i, n + j)] = -r_white[(i, j)] / gamma;
        }
    }
    let schur = nalgebra::linalg::Schur::try_new(comp, 1e-14, 200_000).ok_or(LaError::EigenFailed)?;
    let mut values: Vec<C64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|lam| lam * gamma)
        .collect();
    values.sort_by(|a, b| {
        (a.norm(), a.re, a.im)
            .partial_cmp(&(b.norm(), b.re, b.im))
            .expect("eigenvalues are finite")
    });

    let l_norm = l_mat.amax();
    let n_norm = n_mat.amax();
    let r_norm = r_mat.amax();
    let mut rng = ChaCha8Rng::seed_from_u64(0x51E9_0001);
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(2 * n);
    for &lam in &values {
        let scale = l_norm + lam.norm_sqr() * n_norm + lam.norm() * r_norm;
        let q = DMatrix::from_fn(n, n, |i, j| {
            C64::new(l_mat[(i, j)], 0.0)
                + lam * lam * C64::new(n_mat[(i, j)], 0.0)
                + lam * C64::new(r_mat[(i, j)], 0.0)
        });
        // eigenvectors already found for (numerically) this same eigenvalue,
        // to deflate repeated roots
        let same: Vec<&DVector<C64>> = pairs
            .iter()
            .filter(|p| (p.value - lam).norm() <= 1e-9 * (1.0 + lam.norm()))
            .map(|p| &p.vector)
            .collect();
        let vec = qep_vector(&q, scale, &same, &mut rng)
            .ok_or(LaError::QepResidual(lam))?;
        pairs.push(EigenPair { value: lam, vector: vec });
    }
    Ok(pairs)
}

/// Inverse iteration with a tiny diagonal shift; `None` if no vector reaches
/// the residual tolerance after a few restarts.
fn qep_vector(
    q: &DMatrix<C64>,
    scale: f64,
    deflate: &[&DVector<C64>],
    rng: &mut ChaCha8Rng,
) -> Option<DVector<C64>> {
    let n = q.nrows();
    let tol = tol::QEP_RESIDUAL * scale;
    for attempt in 0..4 {
        let sigma = 1e-12 * scale * 10f64.powi(attempt) + f64::MIN_POSITIVE;
        let mut shifted = q.clone();
        for i in 0..n {
            shifted[(i, i)] += C64::new(sigma, sigma);
        }
        let lu = shifted.lu();
        let mut v = DVector::from_fn(n, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        for u in deflate {
            let proj = u.dotc(&v);
            v -= *u * proj;
        }
        if v.norm() == 0.0 {
            continue;
        }
        v /= C64::from(v.norm());
        let mut best: Option<(f64, DVector<C64>)> = None;
        for _ in 0..6 {
            let Some(mut x) = lu.solve(&v) else { break };
            for u in deflate {
                let proj = u.dotc(&x);
                x -= *u * proj;
            }
            let nrm = x.norm();
            if !nrm.is_finite() || nrm == 0.0 {
                break;
            }
            v = x / C64::from(nrm);
            let res = (q * &v).norm();
            if best.as_ref().is_none_or(|(r, _)| res < *r) {
                best = Some((res, v.clone()));
            }
            if res <= tol * 1e-3 {
                break;
            }
        }
        if let Some((res, vec)) = best {
            if res <= tol {
                return Some(vec);
            }
        }
    }
    None
}

/// Result of a k-means run.
#[derive(Debug, Clone)]
pub struct KmeansResult {
    /// cluster index per input point, in input order
    pub labels: Vec<usize>,
    /// r x dim
    pub centroids: DMatrix<f64>,
    /// within-cluster sum of squares after the final iteration
    pub objective: f64,
    /// objective after each Lloyd iteration (non-increasing)
    pub objective_trace: Vec<f64>,
}

/// Seeded, order-independent k-means: the best of ten k-means++ initialized
/// Lloyd runs by final objective.  Points are the rows of `points`.  For a
/// fixed seed the resulting partition is invariant under permutation of the
/// input rows.
pub fn kmeans(points: &DMatrix<f64>, r: usize, seed: u64) -> Result<KmeansResult, LaError> {
    const KMEANS_RESTARTS: u64 = 10;
    let mut best: Option<KmeansResult> = None;
    for restart in 0..KMEANS_RESTARTS {
        let run = kmeans_once(points, r, seed.wrapping_add(restart))?;
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn kmeans_once(points: &DMatrix<f64>, r: usize, seed: u64) -> Result<KmeansResult, LaError> {
    let n = points.nrows();
    let dim = points.ncols();
    if points.iter().any(|v| !v.is_finite()) {
        return Err(LaError::NonFinite);
    }
    let row = |i: usize| points.row(i);
    // canonical point order: lexicographic by coordinates, so that seeding and
    // accumulation do not depend on the caller's row order
    let mut canon: Vec<usize> = (0..n).collect();
    canon.sort_by(|&a, &b| {
        for d in 0..dim {
            match points[(a, d)].total_cmp(&points[(b, d)]) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        std::cmp::Ordering::Equal
    });
    let mut distinct = 0usize;
    for (pos, &i) in canon.iter().enumerate() {
        if pos == 0 || (0..dim).any(|d| points[(i, d)] != points[(canon[pos - 1], d)]) {
            distinct += 1;
        }
    }
    if r == 0 || r > distinct {
        return Err(LaError::ClusterCount { need: r, found: distinct });
    }

    let dist2 = |i: usize, c: &DVector<f64>| -> f64 {
        let mut s = 0.0;
        for d in 0..dim {
            let diff = points[(i, d)] - c[d];
            s += diff * diff;
        }
        s
    };

    // k-means++ over the canonical order
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<DVector<f64>> = Vec::with_capacity(r);
    let first = canon[rng.gen_range(0..n)];
    centroids.push(row(first).transpose());
    let mut d2: Vec<f64> = canon.iter().map(|&i| dist2(i, &centroids[0])).collect();
    while centroids.len() < r {
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = canon[0];
            for (pos, &i) in canon.iter().enumerate() {
                target -= d2[pos];
                if target <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // numerically identical leftovers; take the first canonical point
            // not already a centroid
            *canon
                .iter()
                .find(|&&i| centroids.iter().all(|c| dist2(i, c) > 0.0))
                .expect("checked r <= distinct points")
        };
        let c = row(chosen).transpose();
        for (pos, &i) in canon.iter().enumerate() {
            d2[pos] = d2[pos].min(dist2(i, &c));
        }
        centroids.push(c);
    }

    let mut labels = vec![0usize; n];
    let mut objective = f64::INFINITY;
    let mut trace = Vec::new();
    for _ in 0..tol::KMEANS_MAX_ITERS {
        // assignment (ties toward lowest centroid index)
        for &i in &canon {
            let mut best = (f64::INFINITY, 0usize);
            for (c, cent) in centroids.iter().enumerate() {
                let d = dist2(i, cent);
                if d < best.0 {
                    best = (d, c);
                }
            }
            labels[i] = best.1;
        }
        // empty clusters adopt the worst-fitted point
        loop {
            let mut counts = vec![0usize; r];
            for &i in &canon {
                counts[labels[i]] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else { break };
            let &worst = canon
                .iter()
                .max_by(|&&a, &&b| {
                    dist2(a, &centroids[labels[a]])
                        .total_cmp(&dist2(b, &centroids[labels[b]]))
                })
                .expect("nonempty point set");
            labels[worst] = empty;
            centroids[empty] = row(worst).transpose();
        }
        // update step, accumulated in canonical order
        let mut sums = vec![DVector::zeros(dim); r];
        let mut counts = vec![0usize; r];
        for &i in &canon {
            sums[labels[i]] += row(i).transpose();
            counts[labels[i]] += 1;
        }
        for c in 0..r {
            if counts[c] > 0 {
                centroids[c] = &sums[c] / counts[c] as f64;
            }
        }
        let new_obj: f64 = canon.iter().map(|&i| dist2(i, &centroids[labels[i]])).sum();
        trace.push(new_obj);
        if objective.is_finite() {
            let denom = objective.max(f64::MIN_POSITIVE);
            if (objective - new_obj).abs() <= tol::KMEANS_REL_CHANGE * denom {
                objective = new_obj;
                break;
            }
        }
        objective = new_obj;
    }
    let mut cent = DMatrix::zeros(r, dim);
    for c in 0..r {
        for d in 0..dim {
            cent[(c, d)] = centroids[c][d];
        }
    }
    Ok(KmeansResult { labels, centroids: cent, objective, objective_trace: trace })
}

/// Mean silhouette coefficient of a labeling; singleton clusters contribute 0,
/// and so do points whose intra- and inter-cluster distances are all zero.
pub fn silhouette(points: &DMatrix<f64>, labels: &[usize]) -> Result<f64, LaError> {
    let n = points.nrows();
    if labels.len() != n {
        return Err(LaError::Dimension("labels/points length mismatch".into()));
    }
    let clusters: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    if clusters.len() < 2 {
        return Err(LaError::SingleCluster);
    }
    let dim = points.ncols();
    let dist = |a: usize, b: usize| -> f64 {
        let mut s = 0.0;
        for d in 0..dim {
            let diff = points[(a, d)] - points[(b, d)];
            s += diff * diff;
        }
        s.sqrt()
    };
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        let own_count = labels.iter().filter(|&&l| l == own).count();
        if own_count <= 1 {
            continue; // contributes 0
        }
        let a: f64 = (0..n)
            .filter(|&j| j != i && labels[j] == own)
            .map(|j| dist(i, j))
            .sum::<f64>()
            / (own_count - 1) as f64;
        let b = clusters
            .iter()
            .filter(|&&c| c != own)
            .map(|&c| {
                let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                members.iter().map(|&j| dist(i, j)).sum::<f64>() / members.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}
