//! Cluster prediction for graphs with a spanning tree.
//!
//! Order the Laplacian spectrum as `0, λ₂ … λ_{α−1}, λ_α … λ_N`, where the
//! middle block collects eigenvalues whose pencil `A − λF` is not Hurwitz.
//! Take any `T` with `TL = Φ` (`Φ` the cyclic difference matrix) and a modal
//! matrix `Q` with `Q⁻¹LQ = diag(ordered spectrum)`. Agents `i` and `i+1`
//! (cyclically) agree iff row `i` of `Ψ = TQ` vanishes on columns `2 … α−1`.
//!
//! Only diagonalizable Laplacians are supported; defective ones are rejected.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::VertexSet;
use crate::spectral::{inf_norm, SpectralReport, C64};

/// Default relative tolerance for the zero pattern of `Ψ`.
pub const DEFAULT_PSI_TOL: f64 = 1e-6;

/// Largest accepted condition number of the modal matrix.
pub const MAX_MODAL_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("Laplacian has no zero eigenvalue")]
    NoZeroEigenvalue,
    #[error("Laplacian has {count} zero eigenvalues; the graph has no spanning tree")]
    MultipleZeroEigenvalues { count: usize },
    #[error("TL = Φ is infeasible: residual {residual:e} exceeds {limit:e}")]
    Infeasible { residual: f64, limit: f64 },
    #[error("unsupported: defective Laplacian ({0})")]
    Defective(String),
}

/// Positions of the Laplacian eigenvalues after ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectrumOrdering {
    /// `permutation[pos]` is the index into `SpectralReport::entries`.
    pub permutation: Vec<usize>,
    /// 1-based position of the first Hurwitz shift (`N + 1` if none).
    pub alpha: usize,
}

impl SpectrumOrdering {
    pub fn ordered_lambdas(&self, report: &SpectralReport) -> Vec<C64> {
        self.permutation
            .iter()
            .map(|&k| report.entries[k].lambda)
            .collect()
    }

    /// 0-based columns of `Ψ` that must vanish for agreement.
    pub fn zero_columns(&self) -> std::ops::Range<usize> {
        1..self.alpha - 1
    }
}

fn phase(z: C64) -> f64 {
    let p = z.arg();
    if p < 0.0 {
        p + TAU
    } else {
        p
    }
}

/// Zero first, then non-Hurwitz shifts, then Hurwitz shifts; ties within a
/// block broken by modulus and then phase in `[0, 2π)`.
pub fn order_spectrum(report: &SpectralReport) -> Result<SpectrumOrdering, ClusterError> {
    let zeros: Vec<usize> = (0..report.entries.len())
        .filter(|&k| report.entries[k].is_zero)
        .collect();
    match zeros.len() {
        0 => return Err(ClusterError::NoZeroEigenvalue),
        1 => {}
        count => return Err(ClusterError::MultipleZeroEigenvalues { count }),
    }
    let key = |&k: &usize| {
        let l = report.entries[k].lambda;
        (l.norm(), phase(l))
    };
    let by_key = |a: &usize, b: &usize| {
        let (ma, pa) = key(a);
        let (mb, pb) = key(b);
        ma.total_cmp(&mb).then(pa.total_cmp(&pb))
    };
    let mut unstable: Vec<usize> = (0..report.entries.len())
        .filter(|&k| !report.entries[k].is_zero && !report.entries[k].verdict.is_hurwitz)
        .collect();
    let mut stable: Vec<usize> = (0..report.entries.len())
        .filter(|&k| !report.entries[k].is_zero && report.entries[k].verdict.is_hurwitz)
        .collect();
    unstable.sort_by(by_key);
    stable.sort_by(by_key);

    let alpha = 2 + unstable.len();
    let mut permutation = zeros;
    permutation.extend(unstable);
    permutation.extend(stable);
    Ok(SpectrumOrdering { permutation, alpha })
}

/// Cyclic difference matrix: row `i` is `eᵢ − eᵢ₊₁`, with row `N` equal to `e_N − e₁`.
pub fn cyclic_difference(n: usize) -> DMatrix<f64> {
    let mut phi = DMatrix::zeros(n, n);
    for i in 0..n {
        phi[(i, i)] += 1.0;
        phi[(i, (i + 1) % n)] -= 1.0;
    }
    phi
}

fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = smax * f64::EPSILON * m.nrows().max(m.ncols()) as f64 * 10.0;
    svd.pseudo_inverse(cutoff.max(f64::MIN_POSITIVE))
        .expect("SVD computed with both factors")
}

/// Minimum-Frobenius-norm solution of `TL = Φ`.
pub fn solve_t(l: &DMatrix<f64>) -> Result<DMatrix<f64>, ClusterError> {
    let n = l.nrows();
    let phi = cyclic_difference(n);
    let t = &phi * pseudo_inverse(l);
    let residual = inf_norm(&(&t * l - &phi));
    let limit = 1e-8 * inf_norm(l).max(1.0);
    if residual > limit {
        return Err(ClusterError::Infeasible { residual, limit });
    }
    Ok(t)
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

fn complex_inf_norm(m: &DMatrix<C64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Eigenvector matrix with columns in `ordering` order, each of unit norm;
/// the first column is the normalised all-ones vector.
pub fn modal_matrix(
    l: &DMatrix<f64>,
    report: &SpectralReport,
    ordering: &SpectrumOrdering,
) -> Result<DMatrix<C64>, ClusterError> {
    let n = l.nrows();
    let scale = inf_norm(l).max(1.0);
    let lambdas = ordering.ordered_lambdas(report);
    let lc = to_complex(l);
    let mut q = DMatrix::<C64>::zeros(n, n);
    q.column_mut(0).fill(C64::new(1.0 / (n as f64).sqrt(), 0.0));

    let cluster_tol = 1e-6 * scale;
    let mut pos = 1;
    while pos < n {
        let mut end = pos + 1;
        while end < n && (lambdas[end] - lambdas[pos]).norm() <= cluster_tol {
            end += 1;
        }
        let size = end - pos;
        let mu: C64 = lambdas[pos..end].iter().sum::<C64>() / size as f64;
        let shifted = &lc - DMatrix::<C64>::identity(n, n) * mu;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        let worst = svd.singular_values[idx[size - 1]];
        if worst > 1e-6 * scale {
            return Err(ClusterError::Defective(format!(
                "eigenvalue {mu:.6} of multiplicity {size} has a deficient eigenspace \
                 (singular value {worst:.3e})"
            )));
        }
        for (offset, &k) in idx[..size].iter().enumerate() {
            let v = v_t.row(k).transpose().map(|z| z.conj());
            q.column_mut(pos + offset).copy_from(&v);
        }
        pos = end;
    }

    let sv = q.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if cond > MAX_MODAL_CONDITION {
        return Err(ClusterError::Defective(format!(
            "eigenvector matrix condition number {cond:.3e}"
        )));
    }

    let reconstructed = q
        .clone()
        .lu()
        .solve(&(&lc * &q))
        .ok_or_else(|| ClusterError::Defective("singular eigenvector matrix".into()))?;
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambdas));
    let residual = complex_inf_norm(&(reconstructed - diag));
    if residual > 1e-6 * scale {
        return Err(ClusterError::Defective(format!(
            "diagonalisation residual {residual:.3e}"
        )));
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPrediction {
    /// Cyclic neighbour pairs `(i, i+1)` and `(N, 1)` predicted to agree.
    pub agreeing_pairs: Vec<(usize, usize)>,
    /// Connected components of the cyclic chain restricted to agreeing pairs.
    pub partition: Vec<VertexSet>,
    pub psi: DMatrix<C64>,
    pub alpha: usize,
}

/// Row-pattern test on `Ψ = TQ`.
pub fn agreement_test(
    t: &DMatrix<f64>,
    q: &DMatrix<C64>,
    ordering: &SpectrumOrdering,
    tol: f64,
) -> ClusterPrediction {
    let n = t.nrows();
    let psi = to_complex(t) * q;
    let cols = ordering.zero_columns();
    let agrees: Vec<bool> = (0..n)
        .map(|i| {
            let row_max = psi.row(i).iter().map(|z| z.norm()).fold(0.0, f64::max);
            let limit = tol * row_max.max(1.0);
            cols.clone().all(|j| psi[(i, j)].norm() < limit)
        })
        .collect();

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut agreeing_pairs = Vec::new();
    for (i, &ok) in agrees.iter().enumerate() {
        let j = (i + 1) % n;
        if ok {
            if i != j {
                agreeing_pairs.push((i + 1, j + 1));
            }
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            parent[ri] = rj;
        }
    }
    let partition = blocks(&mut parent, find);
    ClusterPrediction {
        agreeing_pairs,
        partition,
        psi,
        alpha: ordering.alpha,
    }
}

fn blocks(parent: &mut [usize], find: fn(&mut [usize], usize) -> usize) -> Vec<VertexSet> {
    let n = parent.len();
    let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        let r = find(parent, v);
        by_root[r].push(v + 1);
    }
    let mut out: Vec<VertexSet> = by_root
        .into_iter()
        .filter(|b| !b.is_empty())
        .map(VertexSet::from_sorted)
        .collect();
    out.sort_by_key(VertexSet::smallest);
    out
}

/// Intermediate products of a cluster prediction.
#[derive(Debug, Clone)]
pub struct ClusterAnalysis {
    pub ordering: SpectrumOrdering,
    pub t: DMatrix<f64>,
    pub q: DMatrix<C64>,
    pub t_residual: f64,
    pub prediction: ClusterPrediction,
}

pub fn predict_clusters(
    l: &DMatrix<f64>,
    report: &SpectralReport,
    tol: f64,
) -> Result<ClusterAnalysis, ClusterError> {
    let ordering = order_spectrum(report)?;
    let t = solve_t(l)?;
    let q = modal_matrix(l, report, &ordering)?;
    let t_residual = inf_norm(&(&t * l - cyclic_difference(l.nrows())));
    let prediction = agreement_test(&t, &q, &ordering, tol);
    Ok(ClusterAnalysis {
        ordering,
        t,
        q,
        t_residual,
        prediction,
    })
}

/// Basis of `{v : vᵀL = 0}` as columns.
pub fn left_null_space(l: &DMatrix<f64>) -> DMatrix<f64> {
    let lt = l.transpose();
    let n = l.nrows();
    let svd = lt.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = 1e-9 * smax.max(1.0);
    let cols: Vec<_> = (0..n)
        .filter(|&k| svd.singular_values[k] <= cutoff)
        .map(|k| v_t.row(k).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilityReport {
    pub trials: usize,
    /// Trials whose agreeing pairs differed from the unperturbed prediction.
    pub flips: usize,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.flips == 0
    }
}

/// Re-runs the row-pattern test with other feasible `T` (rows shifted by
/// left null vectors of `L`) and rescaled columns of `Q`, counting verdict
/// changes.
pub fn perturbation_stability(
    analysis: &ClusterAnalysis,
    l: &DMatrix<f64>,
    tol: f64,
    trials: usize,
    seed: u64,
) -> StabilityReport {
    let n = l.nrows();
    let null = left_null_space(l);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flips = 0;
    for _ in 0..trials {
        let coeffs = DMatrix::from_fn(n, null.ncols(), |_, _| rng.random_range(-5.0..5.0));
        let t = &analysis.t + coeffs * null.transpose();
        let mut q = analysis.q.clone();
        for mut col in q.column_iter_mut() {
            let s = C64::from_polar(rng.random_range(0.2..5.0), rng.random_range(0.0..TAU));
            col *= s;
        }
        let p = agreement_test(&t, &q, &analysis.ordering, tol);
        if p.agreeing_pairs != analysis.prediction.agreeing_pairs {
            flips += 1;
        }
    }
    StabilityReport { trials, flips }
}
