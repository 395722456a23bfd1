//! Balanced panels and principal-component factor extraction.
//!
//! A `Panel` holds N series observed over T periods, standardized per series
//! (mean zero, unit sample variance) at construction. Factors are estimated
//! by principal components under the normalization F'F / T = I_k:
//!
//! * factors are √T times the top-k orthonormal eigenvectors of the T×T
//!   Gram matrix X'X;
//! * loadings are Λ = X F / T;
//! * when N < T the same quantities are recovered from the N×N Gram matrix
//!   X X' through the singular value relation, which is cheaper and must
//!   agree with the T×T route to high precision.
//!
//! The number of factors is selected by minimizing an information criterion
//! ln V(k) + k · penalty(N, T) over k = 1..k_max, where V(k) is the mean
//! squared idiosyncratic residual. The selector never returns 0; a panel
//! with no factor structure still reports the single best-fitting component.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Eigenvalues below `max(N, T) · λ_max · RANK_EPS` are treated as zero when
/// a factor normalization would divide by them.
const RANK_EPS: f64 = 1e-12;

/// Balanced N×T panel, standardized per series.
#[derive(Debug, Clone)]
pub struct Panel {
    values: Array2<f64>,
    series_ids: Vec<String>,
    periods: Vec<String>,
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl Panel {
    /// Builds a panel from raw N×T values, standardizing each series to mean
    /// zero and unit sample variance (T − 1 denominator).
    ///
    /// Rejects panels with fewer than two periods, non-finite cells, or a
    /// series with zero variance; the error names the offending series.
    pub fn from_raw(
        values: Array2<f64>,
        series_ids: Vec<String>,
        periods: Vec<String>,
    ) -> Result<Self> {
        let (n, t) = values.dim();
        if n == 0 || t < 2 {
            return Err(Error::Load(format!(
                "panel must have at least 1 series and 2 periods, got {n}x{t}"
            )));
        }
        if series_ids.len() != n {
            return Err(Error::Load(format!(
                "panel has {n} series but {} series ids",
                series_ids.len()
            )));
        }
        if periods.len() != t {
            return Err(Error::Load(format!(
                "panel has {t} periods but {} period labels",
                periods.len()
            )));
        }
        let mut standardized = values;
        let mut means = Vec::with_capacity(n);
        let mut scales = Vec::with_capacity(n);
        for (i, mut row) in standardized.rows_mut().into_iter().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Load(format!(
                    "missing or non-finite value for series {} at period {}",
                    series_ids[i], periods[j]
                )));
            }
            let mean = row.sum() / t as f64;
            let ss: f64 = row.iter().map(|v| (v - mean) * (v - mean)).sum();
            let var = ss / (t as f64 - 1.0);
            if var <= 0.0 {
                return Err(Error::Load(format!(
                    "series {} has zero variance",
                    series_ids[i]
                )));
            }
            let scale = var.sqrt();
            row.mapv_inplace(|v| (v - mean) / scale);
            means.push(mean);
            scales.push(scale);
        }
        Ok(Panel {
            values: standardized,
            series_ids,
            periods,
            means,
            scales,
        })
    }

    /// Number of series N.
    pub fn n_series(&self) -> usize {
        self.values.nrows()
    }

    /// Number of periods T.
    pub fn n_periods(&self) -> usize {
        self.values.ncols()
    }

    /// Standardized values, N×T.
    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    /// Period labels, length T.
    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    /// Series identifiers, length N.
    pub fn series_ids(&self) -> &[String] {
        &self.series_ids
    }

    /// Pre-standardization series means.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Pre-standardization series sample standard deviations.
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }
}

/// Which Gram matrix the eigendecomposition runs on.
///
/// Both routes recover the same factors and loadings up to floating error;
/// `extract_factors` picks the smaller side, and tests drive both explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramSide {
    /// Eigendecompose the T×T matrix X'X.
    TimeByTime,
    /// Eigendecompose the N×N matrix X X'.
    SeriesBySeries,
}

/// Estimated factor structure of a panel.
#[derive(Debug, Clone)]
pub struct FactorModel {
    factors: Array2<f64>,
    loadings: Array2<f64>,
    eigenvalues: Vec<f64>,
    periods: Vec<String>,
}

impl FactorModel {
    /// Estimated factors, T×k, normalized so F'F / T = I_k.
    pub fn factors(&self) -> ArrayView2<'_, f64> {
        self.factors.view()
    }

    /// Estimated loadings, N×k.
    pub fn loadings(&self) -> ArrayView2<'_, f64> {
        self.loadings.view()
    }

    /// Top-k eigenvalues of the panel Gram matrix, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Period labels aligned with the factor rows.
    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    /// Number of extracted factors.
    pub fn k(&self) -> usize {
        self.factors.ncols()
    }

    /// Common component Λ F', N×T.
    pub fn common_component(&self) -> Array2<f64> {
        self.loadings.dot(&self.factors.t())
    }
}

/// Extracts k principal-component factors, choosing the cheaper Gram side.
pub fn extract_factors(panel: &Panel, k: usize) -> Result<FactorModel> {
    let side = if panel.n_periods() <= panel.n_series() {
        GramSide::TimeByTime
    } else {
        GramSide::SeriesBySeries
    };
    extract_factors_via(panel, k, side)
}

/// Extracts k factors through an explicitly chosen Gram side.
///
/// Public as a verification hook: the two sides must agree within 1e-8 on
/// factors, loadings, and eigenvalues (after the sign convention below).
/// Each factor column is flipped, together with its loading column, so the
/// loading column sums to a nonnegative value.
pub fn extract_factors_via(panel: &Panel, k: usize, side: GramSide) -> Result<FactorModel> {
    let n = panel.n_series();
    let t = panel.n_periods();
    let k_cap = n.min(t);
    if k == 0 || k > k_cap {
        return Err(Error::Parameter(format!(
            "factor count k must be in 1..={k_cap} for a {n}x{t} panel, got {k}"
        )));
    }
    let x = panel.values();
    let t_f = t as f64;
    let (eigenvalues, factors) = match side {
        GramSide::TimeByTime => {
            // The Gram product X'X is only materialized when the exact
            // decomposition runs; the iterative path needs products X'(Xq).
            let apply = |q: &Array2<f64>| x.t().dot(&x.dot(q));
            let diag: Vec<f64> = (0..t).map(|j| x.column(j).dot(&x.column(j))).collect();
            let (vals, vecs) = top_eigenpairs_op(&apply, &diag, t, k, || x.t().dot(&x))?;
            // F = √T · U_k.
            let mut factors = vecs;
            factors.mapv_inplace(|v| v * t_f.sqrt());
            (vals, factors)
        }
        GramSide::SeriesBySeries => {
            let apply = |q: &Array2<f64>| x.dot(&x.t().dot(q));
            let diag: Vec<f64> = (0..n).map(|i| x.row(i).dot(&x.row(i))).collect();
            let (vals, vecs) = top_eigenpairs_op(&apply, &diag, n, k, || x.dot(&x.t()))?;
            let lambda_max = vals[0].max(f64::MIN_POSITIVE);
            // F = √T · X' V_k diag(1/√λ_j): singular value relation between
            // the two Gram matrices, valid only where λ_j is clearly nonzero.
            let mut factors = x.t().dot(&vecs);
            for (j, mut col) in factors.columns_mut().into_iter().enumerate() {
                let lam = vals[j];
                if lam <= RANK_EPS * lambda_max * n.max(t) as f64 {
                    return Err(Error::Singular(format!(
                        "panel Gram matrix has numerical rank below requested k={k} \
                         (eigenvalue {j} is {lam:.3e})"
                    )));
                }
                let scale = t_f.sqrt() / lam.sqrt();
                col.mapv_inplace(|v| v * scale);
            }
            (vals, factors)
        }
    };
    let mut factors = factors;
    // Λ = X F / T.
    let mut loadings = x.dot(&factors);
    loadings.mapv_inplace(|v| v / t_f);
    // Sign convention: each loading column sums to a nonnegative value.
    for j in 0..k {
        let col_sum: f64 = loadings.column(j).sum();
        if col_sum < 0.0 {
            loadings.column_mut(j).mapv_inplace(|v| -v);
            factors.column_mut(j).mapv_inplace(|v| -v);
        }
    }
    Ok(FactorModel {
        factors,
        loadings,
        eigenvalues,
        periods: panel.periods().to_vec(),
    })
}

/// Below this Gram dimension the full symmetric decomposition is cheap
/// enough that the iterative path buys nothing.
const FULL_EIG_MAX_DIM: usize = 256;
/// Subspace vectors carried beyond the requested k; the extra directions
/// absorb the trailing spectrum and speed up convergence of the leading k.
const SUBSPACE_BLOCK_EXTRA: usize = 8;
/// Relative residual ‖G y − θ y‖ / θ_max certifying a converged Ritz pair.
const SUBSPACE_TOL: f64 = 1e-11;
const SUBSPACE_MAX_ITERS: usize = 100;

/// Top-k eigenpairs of a symmetric positive semidefinite matrix,
/// eigenvalues descending, eigenvectors as orthonormal columns.
fn top_eigenpairs(gram: &Array2<f64>, k: usize) -> Result<(Vec<f64>, Array2<f64>)> {
    let m = gram.nrows();
    let diag: Vec<f64> = (0..m).map(|i| gram[(i, i)]).collect();
    top_eigenpairs_op(&|q| gram.dot(q), &diag, m, k, || gram.to_owned())
}

/// Top-k eigenpairs of the operator `apply` (a symmetric PSD matrix given
/// by its action on a block of columns).
///
/// Small problems, and requests for a sizable fraction of the spectrum, go
/// straight to the full decomposition. Larger ones run a block subspace
/// iteration whose result carries a residual certificate; whenever the
/// certificate cannot be produced the full decomposition of `build_gram()`
/// decides, so accuracy never depends on the iteration converging.
fn top_eigenpairs_op(
    apply: &dyn Fn(&Array2<f64>) -> Array2<f64>,
    diag: &[f64],
    m: usize,
    k: usize,
    build_gram: impl FnOnce() -> Array2<f64>,
) -> Result<(Vec<f64>, Array2<f64>)> {
    if m <= FULL_EIG_MAX_DIM || 4 * k >= m {
        return full_eigenpairs(&build_gram(), k);
    }
    match subspace_eigenpairs(apply, diag, m, k) {
        Some(pair) => Ok(pair),
        None => full_eigenpairs(&build_gram(), k),
    }
}

/// Exact route: full symmetric decomposition, then the leading k pairs.
fn full_eigenpairs(gram: &Array2<f64>, k: usize) -> Result<(Vec<f64>, Array2<f64>)> {
    let m = gram.nrows();
    // Symmetrize exactly so the eigensolver sees a symmetric matrix even
    // after floating error in the Gram products.
    let sym = DMatrix::from_fn(m, m, |r, c| 0.5 * (gram[(r, c)] + gram[(c, r)]));
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues of a symmetric matrix are finite")
    });
    let mut values = Vec::with_capacity(k);
    let mut vectors = Array2::zeros((m, k));
    for (slot, &idx) in order.iter().take(k).enumerate() {
        values.push(eig.eigenvalues[idx]);
        for r in 0..m {
            vectors[(r, slot)] = eig.eigenvectors[(r, idx)];
        }
    }
    Ok((values, vectors))
}

/// Iterative route: block subspace iteration with Rayleigh–Ritz extraction.
///
/// Returns `None` unless every requested Ritz pair carries the residual
/// certificate ‖G y_j − θ_j y_j‖ ≤ SUBSPACE_TOL · θ_0; a `None` means the
/// caller must decide by the exact route, never that the answer is "close
/// enough". The starting block is deterministic (the Gram columns with the
/// largest diagonal), so repeated runs are bitwise identical.
fn subspace_eigenpairs(
    apply: &dyn Fn(&Array2<f64>) -> Array2<f64>,
    diag: &[f64],
    m: usize,
    k: usize,
) -> Option<(Vec<f64>, Array2<f64>)> {
    let b = (k + SUBSPACE_BLOCK_EXTRA).min(m);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &c| diag[c].total_cmp(&diag[a]).then(a.cmp(&c)));
    let mut seed = Array2::zeros((m, b));
    for (j, &i) in order.iter().take(b).enumerate() {
        seed[(i, j)] = 1.0;
    }
    // apply(coordinate block) = selected Gram columns: one power step built
    // into the start. A block that cannot be orthonormalized (numerically
    // rank-deficient operator) aborts to the exact route.
    let mut q = orthonormalize(apply(&seed))?;
    let mut best_residual = f64::INFINITY;
    let mut stagnant = 0usize;
    for _ in 0..SUBSPACE_MAX_ITERS {
        let z = apply(&q);
        let small = q.t().dot(&z);
        let sym = DMatrix::from_fn(b, b, |r, c| 0.5 * (small[(r, c)] + small[(c, r)]));
        let eig = SymmetricEigen::new(sym);
        let mut ord: Vec<usize> = (0..b).collect();
        ord.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
        let theta: Vec<f64> = ord.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut rotation = Array2::zeros((b, b));
        for (slot, &idx) in ord.iter().enumerate() {
            for r in 0..b {
                rotation[(r, slot)] = eig.eigenvectors[(r, idx)];
            }
        }
        let ritz = q.dot(&rotation);
        let g_ritz = z.dot(&rotation);
        let scale = theta[0].abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for j in 0..k {
            let mut r2 = 0.0;
            for row in 0..m {
                let d = g_ritz[(row, j)] - theta[j] * ritz[(row, j)];
                r2 += d * d;
            }
            worst = worst.max(r2.sqrt());
        }
        if worst <= SUBSPACE_TOL * scale {
            let values = theta[..k].to_vec();
            let mut vectors = Array2::zeros((m, k));
            for j in 0..k {
                for row in 0..m {
                    vectors[(row, j)] = ritz[(row, j)];
                }
            }
            return Some((values, vectors));
        }
        if worst >= 0.9 * best_residual {
            stagnant += 1;
            if stagnant >= 10 {
                return None;
            }
        } else {
            stagnant = 0;
        }
        best_residual = best_residual.min(worst);
        // Next block: power step already applied to the Ritz basis.
        q = orthonormalize(g_ritz)?;
    }
    None
}

/// Modified Gram–Schmidt with a second sweep per column; `None` marks a
/// numerically dependent column (post-projection norm below 1e-10 of the
/// original), which callers treat as "use the exact route".
fn orthonormalize(mut block: Array2<f64>) -> Option<Array2<f64>> {
    let b = block.ncols();
    for j in 0..b {
        let pre_norm = block.column(j).dot(&block.column(j)).sqrt();
        for _sweep in 0..2 {
            for i in 0..j {
                let proj = block.column(i).dot(&block.column(j));
                let basis = block.column(i).to_owned();
                block
                    .column_mut(j)
                    .zip_mut_with(&basis, |v, &u| *v -= proj * u);
            }
        }
        let post_norm = block.column(j).dot(&block.column(j)).sqrt();
        if !(post_norm > 1e-10 * pre_norm) || pre_norm == 0.0 {
            return None;
        }
        block.column_mut(j).mapv_inplace(|v| v / post_norm);
    }
    Some(block)
}

/// Mean squared idiosyncratic residual V(k) = ‖X − Λ F'‖² / (N T),
/// computed directly from the definition.
pub fn residual_variance(panel: &Panel, k: usize) -> Result<f64> {
    let model = extract_factors(panel, k)?;
    let residual = &panel.values() - &model.common_component();
    let (n, t) = residual.dim();
    Ok(residual.iter().map(|v| v * v).sum::<f64>() / (n * t) as f64)
}

/// Penalty g(N, T) in the information criterion ln V(k) + k · g(N, T).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IcPenalty {
    /// ((N + T) / (N T)) · ln(N T / (N + T)).
    P1,
    /// ((N + T) / (N T)) · ln(min{N, T}), the default.
    #[default]
    P2,
    /// ln(min{N, T}) / min{N, T}.
    P3,
}

impl IcPenalty {
    /// Penalty value for a panel of the given dimensions.
    pub fn value(&self, n: usize, t: usize) -> f64 {
        let (n, t) = (n as f64, t as f64);
        let min_nt = n.min(t);
        match self {
            IcPenalty::P1 => ((n + t) / (n * t)) * ((n * t) / (n + t)).ln(),
            IcPenalty::P2 => ((n + t) / (n * t)) * min_nt.ln(),
            IcPenalty::P3 => min_nt.ln() / min_nt,
        }
    }
}

/// One row of the factor-count selection profile.
#[derive(Debug, Clone, Copy)]
pub struct IcRow {
    /// Candidate factor count.
    pub k: usize,
    /// Mean squared residual V(k).
    pub v: f64,
    /// Criterion value ln V(k) + k · penalty.
    pub ic: f64,
}

/// Information-criterion profile over k = 1..=k_max.
///
/// V(k) is computed from the Gram spectrum: V(k) = (‖X‖² − Σ_{j≤k} λ_j)/(N T),
/// which matches the residual definition because the factors are the top
/// eigenvectors. A V(k) that underflows to zero (noiseless panel of rank ≤ k)
/// yields ic = −∞, so exact fits are always preferred.
pub fn ic_profile(panel: &Panel, k_max: usize, penalty: IcPenalty) -> Result<Vec<IcRow>> {
    let n = panel.n_series();
    let t = panel.n_periods();
    let k_cap = n.min(t);
    if k_max == 0 || k_max > k_cap {
        return Err(Error::Parameter(format!(
            "k_max must be in 1..={k_cap} for a {n}x{t} panel, got {k_max}"
        )));
    }
    let x = panel.values();
    let gram = if t <= n {
        x.t().dot(&x)
    } else {
        x.dot(&x.t())
    };
    let total_ss: f64 = x.iter().map(|v| v * v).sum();
    let (eigenvalues, _) = top_eigenpairs(&gram, k_max)?;
    let pen = penalty.value(n, t);
    let nt = (n * t) as f64;
    let mut rows = Vec::with_capacity(k_max);
    let mut explained = 0.0;
    for (j, lam) in eigenvalues.iter().enumerate() {
        explained += lam;
        let v = ((total_ss - explained) / nt).max(0.0);
        let ic = if v > 0.0 {
            v.ln() + (j + 1) as f64 * pen
        } else {
            f64::NEG_INFINITY
        };
        rows.push(IcRow { k: j + 1, v, ic });
    }
    Ok(rows)
}

/// Number of factors minimizing the information criterion over 1..=k_max.
///
/// Ties and exact fits resolve to the smallest such k; the result is never 0.
pub fn select_num_factors(panel: &Panel, k_max: usize, penalty: IcPenalty) -> Result<usize> {
    let profile = ic_profile(panel, k_max, penalty)?;
    let mut best = &profile[0];
    for row in &profile[1..] {
        if row.ic < best.ic {
            best = row;
        }
    }
    Ok(best.k)
}
