//! Laplacian spectra, the shifted pencil `A − λF`, and Hurwitz verdicts.

mod eigen;

use std::cmp::Ordering;

use nalgebra::{Complex, DMatrix};
use thiserror::Error;

pub type C64 = Complex<f64>;

/// Real parts must be below `-HURWITZ_EPS` for a spectrum to count as Hurwitz.
pub const HURWITZ_EPS: f64 = 1e-9;

/// Relative tolerance for Laplacian zero eigenvalues, scaled by `max(1, ‖L‖∞)`.
pub const ZERO_EIGENVALUE_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has no rows")]
    Empty,
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("QR iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("eigenvalue sum {sum} disagrees with trace {trace}")]
    TraceMismatch { trace: f64, sum: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Multiset of eigenvalues sorted by (real part, imaginary part).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    values: Vec<C64>,
}

fn cmp_complex(a: &C64, b: &C64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

impl ComplexSpectrum {
    pub fn new(mut values: Vec<C64>) -> Self {
        values.sort_by(cmp_complex);
        Self { values }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_real_part(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> C64 {
        self.values.iter().sum()
    }

    pub fn product(&self) -> C64 {
        self.values.iter().product()
    }

    pub fn conj(&self) -> Self {
        Self::new(self.values.iter().map(|v| v.conj()).collect())
    }

    /// Whether every value can be matched one-to-one with a distinct value of
    /// `other` within `tol`.
    pub fn embeds_in(&self, other: &ComplexSpectrum, tol: f64) -> bool {
        multiset_embeds(&self.values, &other.values, tol)
    }

    /// Same multiset as `other` within `tol`.
    pub fn approx_eq(&self, other: &ComplexSpectrum, tol: f64) -> bool {
        self.len() == other.len() && self.embeds_in(other, tol)
    }

    /// Whether non-real values come in conjugate pairs within `tol`.
    pub fn is_conjugate_closed(&self, tol: f64) -> bool {
        let conj: Vec<C64> = self.values.iter().map(|v| v.conj()).collect();
        multiset_embeds(&self.values, &conj, tol)
    }
}

/// Bipartite matching (augmenting paths) of `sub` into `full` where an edge
/// means the values are within `tol`.
pub fn multiset_embeds(sub: &[C64], full: &[C64], tol: f64) -> bool {
    if sub.len() > full.len() {
        return false;
    }
    let adj: Vec<Vec<usize>> = sub
        .iter()
        .map(|s| {
            (0..full.len())
                .filter(|&j| (full[j] - s).norm() <= tol)
                .collect()
        })
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; full.len()];

    fn augment(
        i: usize,
        adj: &[Vec<usize>],
        owner: &mut [Option<usize>],
        seen: &mut [bool],
    ) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|k| augment(k, adj, owner, seen)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }

    (0..sub.len()).all(|i| {
        let mut seen = vec![false; full.len()];
        augment(i, &adj, &mut owner, &mut seen)
    })
}

/// Eigenvalues of a real square matrix.
///
/// The result is checked against `trace(m)`; a mismatch beyond
/// `1e-8·max(1, ‖m‖∞)` is reported as an error rather than returned.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<ComplexSpectrum, SpectralError> {
    let values = eigen::real_eigenvalues(m)?;
    let spectrum = ComplexSpectrum::new(values);
    let trace = m.trace();
    let sum = spectrum.sum();
    let scale = inf_norm(m).max(1.0);
    if (sum.re - trace).abs() > 1e-8 * scale || sum.im.abs() > 1e-8 * scale {
        return Err(SpectralError::TraceMismatch { trace, sum: sum.re });
    }
    Ok(spectrum)
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Real `2d×2d` embedding of the complex matrix `A − λF`:
/// `[[A − Re(λ)F, Im(λ)F], [−Im(λ)F, A − Re(λ)F]]`.
///
/// Its spectrum is `spec(A − λF) ∪ conj(spec(A − λF))`.
pub fn complex_shift(a: &DMatrix<f64>, f: &DMatrix<f64>, lambda: C64) -> DMatrix<f64> {
    let d = a.nrows();
    let diag = a - f * lambda.re;
    let off = f * lambda.im;
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    out.view_mut((0, 0), (d, d)).copy_from(&diag);
    out.view_mut((d, d), (d, d)).copy_from(&diag);
    out.view_mut((0, d), (d, d)).copy_from(&off);
    out.view_mut((d, 0), (d, d)).copy_from(&(-off));
    out
}

/// `A − λF` in complex arithmetic.
pub fn shifted_matrix(a: &DMatrix<f64>, f: &DMatrix<f64>, lambda: C64) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        C64::new(a[(i, j)], 0.0) - lambda * f[(i, j)]
    })
}

/// Eigenvalues of `A − λF`, computed through the real embedding and halved
/// back to `d` values.
pub fn shifted_spectrum(
    a: &DMatrix<f64>,
    f: &DMatrix<f64>,
    lambda: C64,
) -> Result<ComplexSpectrum, SpectralError> {
    let embedded = eigenvalues(&complex_shift(a, f, lambda))?;
    Ok(halve_embedding(&embedded, &shifted_matrix(a, f, lambda)))
}

fn smallest_singular_value(m: &DMatrix<C64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Splits the embedding spectrum into conjugate pairs and keeps, from each
/// pair, the member that is an eigenvalue of `m`. Pairs where both members
/// qualify alternate, starting with the nonnegative imaginary part.
fn halve_embedding(embedded: &ComplexSpectrum, m: &DMatrix<C64>) -> ComplexSpectrum {
    let vals = embedded.values();
    let mut used = vec![false; vals.len()];
    let mut pairs: Vec<C64> = Vec::with_capacity(vals.len() / 2);
    for i in 0..vals.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let target = vals[i].conj();
        let partner = (0..vals.len()).filter(|&j| !used[j]).min_by(|&a, &b| {
            (vals[a] - target)
                .norm()
                .total_cmp(&(vals[b] - target).norm())
        });
        if let Some(j) = partner {
            used[j] = true;
            // representative: average the pair, imaginary part made nonnegative
            let rep = (vals[i] + vals[j].conj()) * 0.5;
            pairs.push(C64::new(rep.re, rep.im.abs()));
        }
    }
    pairs.sort_by(cmp_complex);

    let d = m.nrows();
    let scale = m
        .row_iter()
        .map(|r| r.iter().map(|x| x.norm()).sum::<f64>())
        .fold(1.0, f64::max);
    let identity = DMatrix::<C64>::identity(d, d);
    let mut alternate_upper = true;
    let mut kept = Vec::with_capacity(pairs.len());
    for mu in pairs {
        if mu.im == 0.0 {
            kept.push(mu);
            continue;
        }
        let s_upper = smallest_singular_value(&(m - &identity * mu));
        let s_lower = smallest_singular_value(&(m - &identity * mu.conj()));
        let tie = s_upper.max(s_lower) <= 1e-6 * scale;
        let take_upper = if tie {
            let t = alternate_upper;
            alternate_upper = !alternate_upper;
            t
        } else {
            s_upper <= s_lower
        };
        kept.push(if take_upper { mu } else { mu.conj() });
    }
    ComplexSpectrum::new(kept)
}

/// Stability verdict for `ẋ = Mx` given `spec(M)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurwitzVerdict {
    pub max_real_part: f64,
    pub is_hurwitz: bool,
    pub is_marginal: bool,
}

pub fn hurwitz(spectrum: &ComplexSpectrum, eps: f64) -> HurwitzVerdict {
    let max_real_part = spectrum.max_real_part();
    HurwitzVerdict {
        max_real_part,
        is_hurwitz: max_real_part < -eps,
        is_marginal: max_real_part.abs() <= eps,
    }
}

/// One Laplacian eigenvalue with the spectrum of its shifted pencil.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftEntry {
    pub lambda: C64,
    pub is_zero: bool,
    /// `spec(A − λF)`; equals `spec(A)` for zero entries.
    pub shifted: ComplexSpectrum,
    pub verdict: HurwitzVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub laplacian_spectrum: ComplexSpectrum,
    /// One entry per Laplacian eigenvalue, in `laplacian_spectrum` order.
    pub entries: Vec<ShiftEntry>,
    pub a_spectrum: ComplexSpectrum,
    pub a_verdict: HurwitzVerdict,
    pub zero_tol: f64,
}

impl SpectralReport {
    pub fn nonzero_entries(&self) -> impl Iterator<Item = &ShiftEntry> {
        self.entries.iter().filter(|e| !e.is_zero)
    }

    pub fn zero_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_zero).count()
    }

    /// Hurwitz flags of every nonzero-λ shift, in entry order.
    pub fn nonzero_shift_verdicts(&self) -> Vec<bool> {
        self.nonzero_entries()
            .map(|e| e.verdict.is_hurwitz)
            .collect()
    }

    pub fn all_nonzero_shifts_hurwitz(&self) -> bool {
        self.nonzero_entries().all(|e| e.verdict.is_hurwitz)
    }
}

pub fn zero_tolerance(l: &DMatrix<f64>) -> f64 {
    ZERO_EIGENVALUE_RTOL * inf_norm(l).max(1.0)
}

/// Laplacian spectrum together with a Hurwitz verdict on `A − λᵢF` for every
/// eigenvalue `λᵢ`.
pub fn spectral_report(
    a: &DMatrix<f64>,
    f: &DMatrix<f64>,
    l: &DMatrix<f64>,
) -> Result<SpectralReport, SpectralError> {
    let d = a.nrows();
    if a.ncols() != d || f.nrows() != d || f.ncols() != d {
        return Err(SpectralError::Dimension(format!(
            "A is {}x{}, F is {}x{}",
            a.nrows(),
            a.ncols(),
            f.nrows(),
            f.ncols()
        )));
    }
    if l.nrows() != l.ncols() {
        return Err(SpectralError::Dimension(format!(
            "L is {}x{}",
            l.nrows(),
            l.ncols()
        )));
    }
    let laplacian_spectrum = eigenvalues(l)?;
    let a_spectrum = eigenvalues(a)?;
    let a_verdict = hurwitz(&a_spectrum, HURWITZ_EPS);
    let zero_tol = zero_tolerance(l);

    let mut entries = Vec::with_capacity(laplacian_spectrum.len());
    for &lambda in laplacian_spectrum.values() {
        let is_zero = lambda.norm() <= zero_tol;
        let (shifted, verdict) = if is_zero {
            (a_spectrum.clone(), a_verdict)
        } else {
            let s = shifted_spectrum(a, f, lambda)?;
            let v = hurwitz(&s, HURWITZ_EPS);
            (s, v)
        };
        entries.push(ShiftEntry {
            lambda,
            is_zero,
            shifted,
            verdict,
        });
    }
    Ok(SpectralReport {
        laplacian_spectrum,
        entries,
        a_spectrum,
        a_verdict,
        zero_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn spectrum_close(got: &ComplexSpectrum, want: &[C64], tol: f64) {
        assert!(
            got.approx_eq(&ComplexSpectrum::new(want.to_vec()), tol),
            "got {:?}, want {:?}",
            got.values(),
            want
        );
    }

    fn a1() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0])
    }

    fn f1() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, -0.5, -0.5])
    }

    #[rustfmt::skip]
    fn l_example1() -> DMatrix<f64> {
        DMatrix::from_row_slice(6, 6, &[
            3., -1., -1., -1., 0., 0.,
            -1., 2., -1., 0., 0., 0.,
            0., -1., 2., 0., 0., -1.,
            0., -1., -1., 4., -1., -1.,
            -1., 0., 0., 0., 1., 0.,
            0., 0., 0., -1., -1., 2.,
        ])
    }

    #[test]
    fn triangular_matrix() {
        spectrum_close(
            &eigenvalues(&a1()).unwrap(),
            &[c(-1.0, 0.0), c(-2.0, 0.0)],
            1e-12,
        );
    }

    #[test]
    fn example1_laplacian() {
        let s = eigenvalues(&l_example1()).unwrap();
        spectrum_close(
            &s,
            &[
                c(3.96, 0.56),
                c(3.96, -0.56),
                c(3.0, 0.0),
                c(1.53, 0.51),
                c(1.53, -0.51),
                c(0.0, 0.0),
            ],
            0.01,
        );
    }

    #[test]
    fn rotation_has_imaginary_pair() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        spectrum_close(
            &eigenvalues(&m).unwrap(),
            &[c(0.0, 1.0), c(0.0, -1.0)],
            1e-14,
        );
    }

    #[test]
    fn zero_and_scalar_matrices() {
        spectrum_close(
            &eigenvalues(&DMatrix::zeros(3, 3)).unwrap(),
            &[c(0.0, 0.0); 3],
            0.0,
        );
        spectrum_close(
            &eigenvalues(&DMatrix::from_element(1, 1, 4.5)).unwrap(),
            &[c(4.5, 0.0)],
            0.0,
        );
    }

    #[test]
    fn companion_matrix_roots() {
        // x^4 - 10x^3 + 35x^2 - 50x + 24 = (x-1)(x-2)(x-3)(x-4)
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            10., -35., 50., -24.,
            1., 0., 0., 0.,
            0., 1., 0., 0.,
            0., 0., 1., 0.,
        ]);
        let want: Vec<C64> = (1..=4).map(|k| c(k as f64, 0.0)).collect();
        spectrum_close(&eigenvalues(&m).unwrap(), &want, 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            eigenvalues(&DMatrix::zeros(2, 3)),
            Err(SpectralError::NotSquare { .. })
        ));
        assert_eq!(
            eigenvalues(&DMatrix::zeros(0, 0)),
            Err(SpectralError::Empty)
        );
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = f64::INFINITY;
        assert_eq!(eigenvalues(&m), Err(SpectralError::NonFinite));
    }

    #[test]
    fn complex_shift_real_lambda_is_block_diagonal() {
        let e = complex_shift(&a1(), &f1(), c(2.0, 0.0));
        let m = a1() - f1() * 2.0;
        assert_eq!(e.view((0, 0), (2, 2)), m.view((0, 0), (2, 2)));
        assert_eq!(e.view((2, 2), (2, 2)), m.view((0, 0), (2, 2)));
        assert!(e.view((0, 2), (2, 2)).iter().all(|&x| x == 0.0));
        assert!(e.view((2, 0), (2, 2)).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn complex_shift_of_identity() {
        let d = 3;
        let e = complex_shift(
            &DMatrix::identity(d, d),
            &DMatrix::zeros(d, d),
            c(0.3, -2.0),
        );
        spectrum_close(&eigenvalues(&e).unwrap(), &vec![c(1.0, 0.0); 2 * d], 1e-12);
    }

    #[test]
    fn example1_embedding_contains_listed_values() {
        let e = complex_shift(&a1(), &f1(), c(1.535, 0.513));
        let s = eigenvalues(&e).unwrap();
        assert!(ComplexSpectrum::new(vec![c(-0.02, 0.16), c(-1.44, 0.35)]).embeds_in(&s, 0.01));
    }

    #[test]
    fn halving_picks_the_right_conjugate() {
        let lambda = c(3.965, 0.561);
        let s = shifted_spectrum(&a1(), &f1(), lambda).unwrap();
        spectrum_close(&s, &[c(0.80, -1.03), c(0.17, 1.60)], 0.01);
        let s = shifted_spectrum(&a1(), &f1(), lambda.conj()).unwrap();
        spectrum_close(&s, &[c(0.80, 1.03), c(0.17, -1.60)], 0.01);
    }

    #[test]
    fn halving_real_lambda_keeps_both_conjugates() {
        // λ = 3 gives a real matrix with eigenvalues ±i/√2
        let s = shifted_spectrum(&a1(), &f1(), c(3.0, 0.0)).unwrap();
        let r = 0.5f64.sqrt();
        spectrum_close(&s, &[c(0.0, r), c(0.0, -r)], 1e-9);
    }

    #[test]
    fn hurwitz_verdicts() {
        let v = hurwitz(&ComplexSpectrum::from_real(&[-1.0, -2.0]), HURWITZ_EPS);
        assert!(v.is_hurwitz && !v.is_marginal);
        let v = hurwitz(
            &ComplexSpectrum::new(vec![c(0.0, 0.71), c(0.0, -0.71)]),
            HURWITZ_EPS,
        );
        assert!(!v.is_hurwitz && v.is_marginal);
        let v = hurwitz(
            &ComplexSpectrum::new(vec![c(0.5, 1.32), c(0.5, -1.32)]),
            HURWITZ_EPS,
        );
        assert!(!v.is_hurwitz && !v.is_marginal);
        let v = hurwitz(&ComplexSpectrum::from_real(&[-1.0, 0.0]), HURWITZ_EPS);
        assert!(!v.is_hurwitz && v.is_marginal);
    }

    #[test]
    fn report_example1_lambda3_is_marginal() {
        let r = spectral_report(&a1(), &f1(), &l_example1()).unwrap();
        assert_eq!(r.entries.len(), 6);
        assert_eq!(r.zero_count(), 1);
        let e3 = r
            .entries
            .iter()
            .find(|e| (e.lambda - c(3.0, 0.0)).norm() < 1e-6)
            .unwrap();
        assert!(!e3.verdict.is_hurwitz && e3.verdict.is_marginal);
        let zero = r.entries.iter().find(|e| e.is_zero).unwrap();
        assert_eq!(zero.shifted, r.a_spectrum);
    }

    #[test]
    fn report_rejects_mismatched_dimensions() {
        let err = spectral_report(&a1(), &DMatrix::zeros(3, 3), &l_example1());
        assert!(matches!(err, Err(SpectralError::Dimension(_))));
    }

    #[test]
    fn multiset_matching_needs_distinct_partners() {
        let full = [c(1.0, 0.0), c(2.0, 0.0)];
        assert!(multiset_embeds(&[c(1.0, 0.0)], &full, 1e-9));
        assert!(!multiset_embeds(&[c(1.0, 0.0), c(1.0, 0.0)], &full, 1e-9));
        // greedy would take 1.0 for the first and strand the second
        let full = [c(1.0, 0.0), c(1.4, 0.0)];
        assert!(multiset_embeds(&[c(1.2, 0.0), c(0.9, 0.0)], &full, 0.25));
    }
}
