//! Shared oracles for the integration and acceptance suites.
//!
//! Everything here is written independently of the library internals it
//! checks: the eigensolver is a cyclic Jacobi sweep, the quantile-regression
//! reference enumerates basic solutions, and the test-statistic reference is
//! a direct double loop over the defining sums. Agreement between these and
//! the production implementations is the point of the comparison, so none of
//! this code may call the routine it oracles.

#![allow(dead_code)]

use std::path::PathBuf;

use ndarray::{Array2, ArrayView2};

use faqar::qar::tick_loss;
use faqar::rng::{standard_normal, uniform01, Streams};
use faqar::spec_test::{FunctionalForm, GammaPoint};

/// Absolute path of a bundled fixture file.
pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

// ---------------------------------------------------------------------------
// Eigensolver oracle: cyclic Jacobi rotations
// ---------------------------------------------------------------------------

/// Full symmetric eigendecomposition by cyclic Jacobi sweeps; returns all
/// eigenvalues in descending order with matching eigenvector columns.
pub fn jacobi_eigenpairs(sym: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let m = sym.nrows();
    assert_eq!(m, sym.ncols(), "square input");
    let mut a = sym.clone();
    let mut v = Array2::<f64>::eye(m);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..m {
            for q in (p + 1)..m {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(&a)) {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..m {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = c * aip - s * aiq;
                    a[(i, q)] = s * aip + c * aiq;
                }
                for j in 0..m {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = c * apj - s * aqj;
                    a[(q, j)] = s * apj + c * aqj;
                }
                for i in 0..m {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Array2::<f64>::zeros((m, m));
    for (col, &src) in order.iter().enumerate() {
        for row in 0..m {
            vectors[(row, col)] = v[(row, src)];
        }
    }
    (values, vectors)
}

fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Quantile-regression oracles
// ---------------------------------------------------------------------------

/// Total tick loss of a coefficient vector on a design.
pub fn total_tick_loss(
    response: &[f64],
    design: ArrayView2<'_, f64>,
    tau: f64,
    beta: &[f64],
) -> f64 {
    response
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let fitted: f64 = design.row(i).iter().zip(beta).map(|(x, b)| x * b).sum();
            tick_loss(y - fitted, tau)
        })
        .sum()
}

/// Minimum tick loss over every basic solution: each subset of d rows that
/// forms an invertible d-square system gives one candidate interpolating
/// vertex. With a full-column-rank design the optimum of the quantile LP is
/// attained at such a vertex, so this enumeration brackets the solver.
pub fn exhaustive_tick_min(response: &[f64], design: ArrayView2<'_, f64>, tau: f64) -> f64 {
    let t_eff = design.nrows();
    let d = design.ncols();
    assert!(d >= 1 && t_eff >= d, "need at least d rows");
    let mut best = f64::INFINITY;
    let mut subset: Vec<usize> = (0..d).collect();
    loop {
        if let Some(beta) = solve_subset(response, design, &subset) {
            let loss = total_tick_loss(response, design, tau, &beta);
            if loss < best {
                best = loss;
            }
        }
        // Advance the lexicographic d-subset of 0..t_eff.
        let mut i = d;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if subset[i] != i + t_eff - d {
                subset[i] += 1;
                for j in i + 1..d {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Solves the d×d interpolation system for the given row subset; None when
/// the subset is numerically singular.
fn solve_subset(
    response: &[f64],
    design: ArrayView2<'_, f64>,
    rows: &[usize],
) -> Option<Vec<f64>> {
    let d = rows.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(d, d);
    let mut b = nalgebra::DVector::<f64>::zeros(d);
    for (i, &r) in rows.iter().enumerate() {
        for c in 0..d {
            a[(i, c)] = design[(r, c)];
        }
        b[i] = response[r];
    }
    let lu = a.full_piv_lu();
    // Reject ill-conditioned subsets: they are not meaningful vertices.
    let min_pivot = (0..d)
        .map(|i| lu.u()[(i, i)].abs())
        .fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-10) {
        return None;
    }
    lu.solve(&b).map(|x| x.iter().copied().collect())
}

/// Subgradient optimality of a fitted coefficient vector.
///
/// Zero-residual rows may take any subgradient weight in [τ−1, τ]. When the
/// zero set has exactly d rows forming an invertible system, the weights are
/// solved exactly and checked against the box; otherwise the weaker (still
/// necessary) coordinatewise directional-derivative test is applied.
pub fn subgradient_optimal(
    response: &[f64],
    design: ArrayView2<'_, f64>,
    tau: f64,
    beta: &[f64],
    zero_tol: f64,
    tol: f64,
) -> bool {
    let t_eff = design.nrows();
    let d = design.ncols();
    let scale: f64 = response.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let mut zero_rows = Vec::new();
    // Gradient contribution of the strictly nonzero residuals.
    let mut g = vec![0.0; d];
    for i in 0..t_eff {
        let fitted: f64 = design.row(i).iter().zip(beta).map(|(x, b)| x * b).sum();
        let u = response[i] - fitted;
        if u.abs() <= zero_tol * scale {
            zero_rows.push(i);
        } else {
            let psi = if u > 0.0 { tau } else { tau - 1.0 };
            for c in 0..d {
                g[c] += psi * design[(i, c)];
            }
        }
    }
    if zero_rows.len() == d {
        let mut a = nalgebra::DMatrix::<f64>::zeros(d, d);
        let rhs = nalgebra::DVector::from_iterator(d, g.iter().map(|v| -v));
        for (col, &r) in zero_rows.iter().enumerate() {
            for c in 0..d {
                a[(c, col)] = design[(r, c)];
            }
        }
        if let Some(zeta) = a.full_piv_lu().solve(&rhs) {
            if zeta.iter().all(|&z| z >= tau - 1.0 - tol && z <= tau + tol) {
                return true;
            }
        }
    }
    // Coordinatewise directional derivatives must be nonnegative both ways.
    for c in 0..d {
        for sign in [1.0, -1.0] {
            let mut deriv = 0.0;
            for i in 0..t_eff {
                let fitted: f64 =
                    design.row(i).iter().zip(beta).map(|(x, b)| x * b).sum();
                let u = response[i] - fitted;
                let s = sign * design[(i, c)];
                if u.abs() <= zero_tol * scale {
                    deriv += if s > 0.0 { (1.0 - tau) * s } else { -tau * s };
                } else if u > 0.0 {
                    deriv += -tau * s;
                } else {
                    deriv += (1.0 - tau) * s;
                }
            }
            if deriv < -tol * scale {
                return false;
            }
        }
    }
    true
}

/// A random full-rank quantile-regression instance.
pub struct QrInstance {
    pub response: Vec<f64>,
    pub design: Array2<f64>,
    pub tau: f64,
}

/// Generates a small random instance with an intercept column and
/// independent continuous regressors/noise, so ties and rank deficiency
/// have probability zero.
pub fn random_qr_instance(streams: &Streams, index: u64, t_eff: usize, d: usize) -> QrInstance {
    let mut rng = streams.stream("qr-instance", index);
    let mut design = Array2::<f64>::zeros((t_eff, d));
    let mut response = Vec::with_capacity(t_eff);
    for i in 0..t_eff {
        design[(i, 0)] = 1.0;
        for c in 1..d {
            design[(i, c)] = standard_normal(&mut rng);
        }
        let signal: f64 = (0..d).map(|c| 0.5 * design[(i, c)]).sum();
        response.push(signal + standard_normal(&mut rng));
    }
    let tau = 0.1 + 0.8 * uniform01(&mut rng);
    QrInstance {
        response,
        design,
        tau,
    }
}

// ---------------------------------------------------------------------------
// Test-statistic oracles: direct double loops
// ---------------------------------------------------------------------------

/// Inputs for the naive empirical-process computation, all primitive.
pub struct NaiveSurfaceInput<'a> {
    /// Response rows of the regression frame.
    pub response: &'a [f64],
    /// Design rows of the regression frame.
    pub design: ArrayView2<'a, f64>,
    /// Fitted coefficients, one row per quantile level.
    pub coefficients: ArrayView2<'a, f64>,
    /// Quantile levels.
    pub tau_grid: &'a [f64],
    /// Full series values, for the lagged-history weight terms.
    pub full_series: &'a [f64],
    /// Offset of frame row 0 in the full series (the response index).
    pub start: usize,
    /// Full-length factor columns aligned with the series, if any.
    pub factors: Option<ArrayView2<'a, f64>>,
    /// Weight decay exponent.
    pub kappa: f64,
    /// History truncation.
    pub max_lag: usize,
    /// Weight coefficients to evaluate.
    pub cells: &'a [GammaPoint],
}

/// Empirical process surface computed exactly as defined: for every (τ, Γ)
/// pair, a fresh pass recomputes the weight of every row by direct summation
/// and accumulates (indicator − τ)·w / √T_eff.
pub fn naive_surface(input: &NaiveSurfaceInput<'_>) -> Array2<f64> {
    let t_eff = input.response.len();
    let m = input.tau_grid.len();
    let mut values = Array2::<f64>::zeros((m, input.cells.len()));
    for (q, &tau) in input.tau_grid.iter().enumerate() {
        for (cidx, cell) in input.cells.iter().enumerate() {
            let mut sum = 0.0;
            for i in 0..t_eff {
                let fitted: f64 = input
                    .design
                    .row(i)
                    .iter()
                    .zip(input.coefficients.row(q).iter())
                    .map(|(x, b)| x * b)
                    .sum();
                let u = input.response[i] - fitted;
                let indicator = if u <= 0.0 { 1.0 } else { 0.0 };
                let t0 = input.start + i;
                let mut by = 0.0;
                let mut bf = 0.0;
                if t0 > 0 {
                    for j in 0..=input.max_lag.min(t0 - 1) {
                        by += ((j + 1) as f64).powf(-input.kappa)
                            * input.full_series[t0 - 1 - j].atan();
                    }
                    if let Some(factors) = input.factors {
                        for j in 0..=input.max_lag.min(t0 - 1) {
                            let decay = ((j + 1) as f64).powf(-input.kappa);
                            for col in 0..factors.ncols() {
                                bf += decay * factors[(t0 - 1 - j, col)].atan();
                            }
                        }
                    }
                }
                let w = (cell.gamma_y * by + cell.gamma_f * bf).exp();
                sum += (indicator - tau) * w;
            }
            values[(q, cidx)] = sum / (t_eff as f64).sqrt();
        }
    }
    values
}

/// CvM functional by direct accumulation.
pub fn naive_cvm(values: ArrayView2<'_, f64>, form: FunctionalForm) -> f64 {
    let mut sum = 0.0;
    let mut count = 0.0;
    for &v in values.iter() {
        sum += match form {
            FunctionalForm::Squared => v * v,
            FunctionalForm::Literal => v,
        };
        count += 1.0;
    }
    sum / count
}

/// KS functional by direct accumulation: for the squared form, the largest
/// per-τ mean of squares; for the literal form, the largest |S| anywhere.
pub fn naive_ks(values: ArrayView2<'_, f64>, form: FunctionalForm) -> f64 {
    match form {
        FunctionalForm::Squared => {
            let mut best = f64::NEG_INFINITY;
            for row in values.rows() {
                let mean: f64 = row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64;
                if mean > best {
                    best = mean;
                }
            }
            best
        }
        FunctionalForm::Literal => {
            let mut best = f64::NEG_INFINITY;
            for &v in values.iter() {
                if v.abs() > best {
                    best = v.abs();
                }
            }
            best
        }
    }
}

// ---------------------------------------------------------------------------
// Small data generators
// ---------------------------------------------------------------------------

/// Gaussian AR(1) series y_t = c + a·y_{t−1} + ε_t with labeled periods.
pub fn ar1_series(streams: &Streams, index: u64, t_len: usize, c: f64, a: f64) -> (Vec<f64>, Vec<String>) {
    let mut rng = streams.stream("ar1-series", index);
    let mut values = Vec::with_capacity(t_len);
    let mut prev = c / (1.0 - a);
    for _ in 0..t_len {
        let next = c + a * prev + standard_normal(&mut rng);
        values.push(next);
        prev = next;
    }
    let periods = (0..t_len).map(|i| format!("p{:04}", i + 1)).collect();
    (values, periods)
}
