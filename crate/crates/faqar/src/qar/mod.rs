//! Quantile autoregression estimation by tick-loss minimization.
//!
//! A `RegressionFrame` packages the lagged design of a univariate series,
//! optionally augmented with estimated factor regressors. Coefficients at a
//! quantile level τ minimize the tick loss Σ_t ρ_τ(y_t − x_t'θ) with
//! ρ_τ(u) = u · (τ − 1{u < 0}); the solver is a primal-dual interior point
//! method on the LP reformulation, finished by a vertex polish step so the
//! reported solution is a basic solution of the LP (see `solver`).
//!
//! Conventions:
//! * design column 0 is the intercept, columns 1..=p are lags y_{t−1}..y_{t−p},
//!   remaining columns are factor values dated t−1;
//! * rows are indexed by the response period; `row_origin` maps a row back to
//!   its position in the full series so weight builders can reach history;
//! * grid fits are independent across τ and may run concurrently; results do
//!   not depend on evaluation order.

mod solver;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub use solver::coordinate_optimality_gap;

/// Tick loss ρ_τ(u) = u · (τ − 1{u < 0}).
pub fn tick_loss(u: f64, tau: f64) -> f64 {
    u * (tau - if u < 0.0 { 1.0 } else { 0.0 })
}

/// Tick-loss objective of `theta` on an explicit design.
pub fn tick_objective(
    design: ArrayView2<'_, f64>,
    response: &[f64],
    theta: &[f64],
    tau: f64,
) -> f64 {
    solver::objective(design, response, theta, tau)
}

/// Univariate series with period labels.
#[derive(Debug, Clone)]
pub struct SeriesData {
    values: Vec<f64>,
    periods: Vec<String>,
}

impl SeriesData {
    /// Builds a labeled series; values must be finite and labels must match
    /// one-to-one.
    pub fn new(values: Vec<f64>, periods: Vec<String>) -> Result<Self> {
        if values.len() != periods.len() {
            return Err(Error::Load(format!(
                "series has {} values but {} period labels",
                values.len(),
                periods.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Load(format!(
                "missing or non-finite value at period {}",
                periods[i]
            )));
        }
        Ok(SeriesData { values, periods })
    }

    /// Series values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Period labels.
    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the series holds no observations.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Factor values over time with period labels, T×k.
#[derive(Debug, Clone)]
pub struct FactorData {
    values: Array2<f64>,
    periods: Vec<String>,
}

impl FactorData {
    /// Builds labeled factor data; row count must match the label count.
    pub fn new(values: Array2<f64>, periods: Vec<String>) -> Result<Self> {
        if values.nrows() != periods.len() {
            return Err(Error::Load(format!(
                "factor matrix has {} rows but {} period labels",
                values.nrows(),
                periods.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Load("factor matrix contains non-finite values".into()));
        }
        Ok(FactorData { values, periods })
    }

    /// Factor values, T×k.
    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    /// Period labels, length T.
    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    /// Number of factors k.
    pub fn k(&self) -> usize {
        self.values.ncols()
    }

    /// Number of periods T.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    /// Whether the factor path covers no periods.
    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }
}

/// Lagged regression design for a quantile autoregression.
#[derive(Debug, Clone)]
pub struct RegressionFrame {
    response: Vec<f64>,
    design: Array2<f64>,
    p: usize,
    k: usize,
    start: usize,
    periods: Vec<String>,
    y_full: Vec<f64>,
    full_periods: Vec<String>,
}

impl RegressionFrame {
    /// Response vector, length T_eff.
    pub fn response(&self) -> &[f64] {
        &self.response
    }

    /// Design matrix, T_eff × d, intercept in column 0.
    pub fn design(&self) -> ArrayView2<'_, f64> {
        self.design.view()
    }

    /// Effective sample size T_eff.
    pub fn t_eff(&self) -> usize {
        self.response.len()
    }

    /// Number of design columns d = 1 + p + k.
    pub fn d(&self) -> usize {
        self.design.ncols()
    }

    /// Autoregressive order p.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of factor regressors (0 when factors only condition weights).
    pub fn k(&self) -> usize {
        self.k
    }

    /// Period labels of the response rows.
    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    /// Full original series, including presample history.
    pub fn full_series(&self) -> &[f64] {
        &self.y_full
    }

    /// Period labels of the full original series.
    pub fn full_periods(&self) -> &[String] {
        &self.full_periods
    }

    /// Index of row `i`'s response in the full series.
    pub fn row_origin(&self, i: usize) -> usize {
        self.start + i
    }
}

/// Builds the lagged frame of order `p`, optionally augmenting the design
/// with one-period-lagged factors.
///
/// Responses start at the first period with full lag history (and at least
/// one factor lag when factors are regressors). Factors must carry exactly
/// the series' period index; a shifted or truncated index is rejected.
pub fn build_frame(
    y: &SeriesData,
    p: usize,
    factors: Option<&FactorData>,
) -> Result<RegressionFrame> {
    let t = y.len();
    let k = factors.map_or(0, |f| f.k());
    if let Some(f) = factors {
        if f.periods() != y.periods() {
            return Err(Error::Alignment(format!(
                "factor period index does not match the series ({} vs {} periods{})",
                f.periods().len(),
                t,
                first_label_mismatch(f.periods(), y.periods())
                    .map(|(i, a, b)| format!("; first mismatch at position {i}: {a:?} vs {b:?}"))
                    .unwrap_or_default()
            )));
        }
        if k == 0 {
            return Err(Error::Parameter(
                "factor data has zero columns; pass None instead".into(),
            ));
        }
    }
    let start = if k > 0 { p.max(1) } else { p };
    let d = 1 + p + k;
    if t <= start || t - start < d {
        return Err(Error::Parameter(format!(
            "series of length {t} is too short for p={p} with {k} factor regressors \
             (need at least {} usable rows)",
            d
        )));
    }
    let t_eff = t - start;
    let mut design = Array2::zeros((t_eff, d));
    let mut response = Vec::with_capacity(t_eff);
    let mut periods = Vec::with_capacity(t_eff);
    for i in 0..t_eff {
        let t0 = start + i;
        response.push(y.values()[t0]);
        periods.push(y.periods()[t0].clone());
        design[(i, 0)] = 1.0;
        for lag in 1..=p {
            design[(i, lag)] = y.values()[t0 - lag];
        }
        if let Some(f) = factors {
            for j in 0..k {
                design[(i, 1 + p + j)] = f.values()[(t0 - 1, j)];
            }
        }
    }
    Ok(RegressionFrame {
        response,
        design,
        p,
        k,
        start,
        periods,
        y_full: y.values().to_vec(),
        full_periods: y.periods().to_vec(),
    })
}

fn first_label_mismatch<'a>(
    a: &'a [String],
    b: &'a [String],
) -> Option<(usize, &'a str, &'a str)> {
    a.iter()
        .zip(b.iter())
        .enumerate()
        .find(|(_, (x, y))| x != y)
        .map(|(i, (x, y))| (i, x.as_str(), y.as_str()))
}

/// Result of a single-quantile fit.
#[derive(Debug, Clone)]
pub struct QuantileFit {
    /// Estimated coefficients, length d.
    pub coefficients: Vec<f64>,
    /// Tick-loss objective at the estimate.
    pub objective: f64,
    /// Interior point iterations used.
    pub iterations: usize,
    /// Whether the vertex polish produced a basic solution of the LP.
    pub vertex: bool,
}

/// Coefficient path over a τ grid.
#[derive(Debug, Clone)]
pub struct QuantileFitPath {
    tau_grid: Vec<f64>,
    coefficients: Array2<f64>,
    objectives: Vec<f64>,
    iterations: Vec<usize>,
    crossings: usize,
}

impl QuantileFitPath {
    /// The τ grid, strictly increasing inside (0, 1).
    pub fn tau_grid(&self) -> &[f64] {
        &self.tau_grid
    }

    /// Coefficients, m × d, row q for τ_q.
    pub fn coefficients(&self) -> ArrayView2<'_, f64> {
        self.coefficients.view()
    }

    /// Tick-loss objectives per grid point.
    pub fn objectives(&self) -> &[f64] {
        &self.objectives
    }

    /// Interior point iteration counts per grid point.
    pub fn iterations(&self) -> &[usize] {
        &self.iterations
    }

    /// Number of (row, adjacent-τ) pairs where the fitted conditional
    /// quantile decreases in τ. Purely diagnostic; nothing is re-ordered.
    pub fn crossings(&self) -> usize {
        self.crossings
    }

    /// Predicted conditional quantiles on a design, rows × m.
    pub fn predict(&self, design: ArrayView2<'_, f64>) -> Array2<f64> {
        design.dot(&self.coefficients.t())
    }

    /// Wraps externally supplied coefficients as a path, evaluating the
    /// tick-loss objectives and crossing count on the given data.
    ///
    /// Iteration counts are zero because nothing was solved here.
    pub fn from_coefficients(
        tau_grid: Vec<f64>,
        coefficients: Array2<f64>,
        design: ArrayView2<'_, f64>,
        response: &[f64],
    ) -> Result<Self> {
        validate_tau_grid(&tau_grid)?;
        if coefficients.nrows() != tau_grid.len() {
            return Err(Error::Parameter(format!(
                "{} coefficient rows for {} grid points",
                coefficients.nrows(),
                tau_grid.len()
            )));
        }
        if coefficients.ncols() != design.ncols() {
            return Err(Error::Parameter(format!(
                "coefficients have {} columns but the design has {}",
                coefficients.ncols(),
                design.ncols()
            )));
        }
        if design.nrows() != response.len() {
            return Err(Error::Parameter(format!(
                "design has {} rows but response has {} entries",
                design.nrows(),
                response.len()
            )));
        }
        let objectives = tau_grid
            .iter()
            .enumerate()
            .map(|(q, &tau)| {
                let theta: Vec<f64> = coefficients.row(q).to_vec();
                tick_objective(design, response, &theta, tau)
            })
            .collect();
        let iterations = vec![0; tau_grid.len()];
        let mut path = QuantileFitPath {
            tau_grid,
            coefficients,
            objectives,
            iterations,
            crossings: 0,
        };
        path.crossings = count_crossings(&path.predict(design));
        Ok(path)
    }
}

/// Counts (row, adjacent-τ) pairs whose predicted quantile decreases in τ
/// beyond a relative tolerance.
fn count_crossings(predictions: &Array2<f64>) -> usize {
    let m = predictions.ncols();
    let mut crossings = 0;
    for row in predictions.rows() {
        for q in 1..m {
            let scale = 1.0 + row[q - 1].abs().max(row[q].abs());
            if row[q] < row[q - 1] - 1e-9 * scale {
                crossings += 1;
            }
        }
    }
    crossings
}

/// Validates a τ grid: nonempty, strictly inside (0, 1), strictly increasing.
pub fn validate_tau_grid(tau_grid: &[f64]) -> Result<()> {
    if tau_grid.is_empty() {
        return Err(Error::Parameter("tau grid is empty".into()));
    }
    for &tau in tau_grid {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Parameter(format!(
                "tau grid values must lie strictly inside (0, 1), got {tau}"
            )));
        }
    }
    if tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter(
            "tau grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Evenly spaced τ grid with `m` points over [lo, hi].
pub fn tau_grid(m: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::Parameter("tau grid needs at least one point".into()));
    }
    let grid: Vec<f64> = if m == 1 {
        vec![lo]
    } else {
        (0..m)
            .map(|q| lo + (hi - lo) * q as f64 / (m - 1) as f64)
            .collect()
    };
    validate_tau_grid(&grid)?;
    Ok(grid)
}

/// Fits a single quantile level on an explicit design.
pub fn fit_quantile_design(
    design: ArrayView2<'_, f64>,
    response: &[f64],
    tau: f64,
) -> Result<QuantileFit> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Parameter(format!(
            "tau must lie strictly inside (0, 1), got {tau}"
        )));
    }
    if design.nrows() != response.len() {
        return Err(Error::Parameter(format!(
            "design has {} rows but response has {} entries",
            design.nrows(),
            response.len()
        )));
    }
    if design.nrows() < design.ncols() {
        return Err(Error::Parameter(format!(
            "underdetermined fit: {} rows for {} coefficients",
            design.nrows(),
            design.ncols()
        )));
    }
    solver::solve(design, response, tau)
}

/// Fits a single quantile level on a frame.
pub fn fit_quantile(frame: &RegressionFrame, tau: f64) -> Result<QuantileFit> {
    fit_quantile_design(frame.design(), frame.response(), tau)
}

/// Fits every level of a τ grid on an explicit design.
///
/// Levels are independent and evaluated in parallel; the output is ordered
/// by the grid, so results are identical under any thread schedule.
pub fn fit_path_design(
    design: ArrayView2<'_, f64>,
    response: &[f64],
    tau_grid: &[f64],
) -> Result<Vec<QuantileFit>> {
    validate_tau_grid(tau_grid)?;
    tau_grid
        .par_iter()
        .map(|&tau| fit_quantile_design(design, response, tau))
        .collect()
}

/// Fits the full coefficient path of a frame over a τ grid.
pub fn fit_path(frame: &RegressionFrame, tau_grid: &[f64]) -> Result<QuantileFitPath> {
    let fits = fit_path_design(frame.design(), frame.response(), tau_grid)?;
    let m = fits.len();
    let d = frame.d();
    let mut coefficients = Array2::zeros((m, d));
    let mut objectives = Vec::with_capacity(m);
    let mut iterations = Vec::with_capacity(m);
    for (q, fit) in fits.iter().enumerate() {
        for j in 0..d {
            coefficients[(q, j)] = fit.coefficients[j];
        }
        objectives.push(fit.objective);
        iterations.push(fit.iterations);
    }
    let mut path = QuantileFitPath {
        tau_grid: tau_grid.to_vec(),
        coefficients,
        objectives,
        iterations,
        crossings: 0,
    };
    path.crossings = count_crossings(&path.predict(frame.design()));
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normal, uniform01, Streams};
    use approx::assert_abs_diff_eq;

    fn labeled(values: Vec<f64>) -> SeriesData {
        let periods = (0..values.len()).map(|i| format!("t{i}")).collect();
        SeriesData::new(values, periods).unwrap()
    }

    #[test]
    fn frame_layout_orders_intercept_lags_factors() {
        let y = labeled(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let factors = FactorData::new(
            Array2::from_shape_fn((8, 1), |(i, _)| 10.0 + i as f64),
            y.periods().to_vec(),
        )
        .unwrap();
        let frame = build_frame(&y, 2, Some(&factors)).unwrap();
        assert_eq!(frame.t_eff(), 6);
        assert_eq!(frame.d(), 4);
        assert_eq!(frame.k(), 1);
        // Row 0 responds at t = 2: lags are y_1, y_0 and the factor is F_1.
        assert_eq!(frame.response()[0], 3.0);
        assert_eq!(frame.design()[(0, 0)], 1.0);
        assert_eq!(frame.design()[(0, 1)], 2.0);
        assert_eq!(frame.design()[(0, 2)], 1.0);
        assert_eq!(frame.design()[(0, 3)], 11.0);
        assert_eq!(frame.row_origin(0), 2);
        assert_eq!(frame.periods()[0], "t2");
    }

    #[test]
    fn misaligned_factor_index_is_rejected() {
        let y = labeled(vec![1.0; 10]);
        let mut shifted = y.periods().to_vec();
        shifted.rotate_left(1);
        let factors =
            FactorData::new(Array2::zeros((10, 1)), shifted).unwrap();
        let err = build_frame(&y, 1, Some(&factors)).unwrap_err();
        assert!(matches!(err, Error::Alignment(_)), "{err}");
    }

    #[test]
    fn too_short_series_is_rejected() {
        let y = labeled(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            build_frame(&y, 3, None),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn intercept_only_flat_optimum_returns_upper_vertex() {
        // τ = 0.25 on y = (1, 2, 3, 4): every θ₀ in [1, 2] attains the
        // optimal objective 1.5; the polish resolves the tie to the upper
        // vertex θ₀ = 2.
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let design = Array2::from_elem((4, 1), 1.0);
        let fit = fit_quantile_design(design.view(), &y, 0.25).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.objective, 1.5, epsilon = 1e-9);
        assert!(fit.vertex);
    }

    #[test]
    fn intercept_only_median_is_the_sample_median() {
        let y = vec![5.0, 1.0, 9.0, 2.0, 7.0];
        let design = Array2::from_elem((5, 1), 1.0);
        let fit = fit_quantile_design(design.view(), &y, 0.5).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 5.0, epsilon = 1e-9);
    }

    #[test]
    fn quantile_counting_condition_holds() {
        // At an optimum the share of strictly negative residuals is at most
        // τ, and the share of nonpositive residuals at least τ.
        let mut rng = Streams::new(3).stream("qar-count", 0);
        let n = 200;
        let design = Array2::from_shape_fn((n, 3), |(_, j)| {
            if j == 0 {
                1.0
            } else {
                standard_normal(&mut rng)
            }
        });
        let response: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        for &tau in &[0.1, 0.37, 0.5, 0.83] {
            let fit = fit_quantile_design(design.view(), &response, tau).unwrap();
            let mut neg = 0usize;
            let mut nonpos = 0usize;
            for i in 0..n {
                let pred: f64 = (0..3).map(|j| design[(i, j)] * fit.coefficients[j]).sum();
                let r = response[i] - pred;
                if r < -1e-9 {
                    neg += 1;
                }
                if r <= 1e-9 {
                    nonpos += 1;
                }
            }
            let bound = tau * n as f64;
            assert!(neg as f64 <= bound + 1e-6, "tau={tau}: {neg} > {bound}");
            assert!(nonpos as f64 >= bound - 1e-6, "tau={tau}: {nonpos} < {bound}");
        }
    }

    #[test]
    fn static_design_fit_is_affine_equivariant() {
        let mut rng = Streams::new(4).stream("qar-equi", 0);
        let n = 80;
        let design = Array2::from_shape_fn((n, 2), |(_, j)| {
            if j == 0 {
                1.0
            } else {
                standard_normal(&mut rng)
            }
        });
        let response: Vec<f64> = (0..n).map(|_| 3.0 * standard_normal(&mut rng)).collect();
        let (a, b) = (2.5, -4.0);
        let mapped: Vec<f64> = response.iter().map(|y| a * y + b).collect();
        let base = fit_quantile_design(design.view(), &response, 0.3).unwrap();
        let moved = fit_quantile_design(design.view(), &mapped, 0.3).unwrap();
        assert_abs_diff_eq!(
            moved.coefficients[0],
            a * base.coefficients[0] + b,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(moved.coefficients[1], a * base.coefficients[1], epsilon = 1e-9);
    }

    #[test]
    fn ar1_slope_is_recovered_at_the_median() {
        // y_t = 10 + 0.5 y_{t−1} + Φ⁻¹(u_t): a location-shift QAR(1) whose
        // slope is 0.5 at every quantile.
        let mut rng = Streams::new(5).stream("qar-dgp", 0);
        let t = 2000;
        let mut y = vec![20.0];
        for _ in 1..t {
            let eps = crate::dist::inv_norm_cdf(uniform01(&mut rng)).unwrap();
            let prev = *y.last().unwrap();
            y.push(10.0 + 0.5 * prev + eps);
        }
        let frame = build_frame(&labeled(y), 1, None).unwrap();
        let fit = fit_quantile(&frame, 0.5).unwrap();
        assert!(
            (fit.coefficients[1] - 0.5).abs() < 0.05,
            "slope {}",
            fit.coefficients[1]
        );
        // Local grid refinement around the optimum: no nearby point beats it.
        let theta = &fit.coefficients;
        for di in -4i32..=4 {
            for dj in -4i32..=4 {
                let cand = [
                    theta[0] + di as f64 * 0.05,
                    theta[1] + dj as f64 * 0.01,
                ];
                let obj = tick_objective(frame.design(), frame.response(), &cand, 0.5);
                assert!(obj >= fit.objective - 1e-9 * (1.0 + fit.objective));
            }
        }
    }

    #[test]
    fn rank_deficient_design_fails_loudly() {
        let mut design = Array2::zeros((10, 3));
        for i in 0..10 {
            design[(i, 0)] = 1.0;
            design[(i, 1)] = i as f64;
            design[(i, 2)] = 2.0 * i as f64; // collinear with column 1
        }
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let err = fit_quantile_design(design.view(), &y, 0.5).unwrap_err();
        assert!(matches!(err, Error::Singular(_)), "{err}");
    }

    #[test]
    fn tau_grid_is_validated() {
        assert!(validate_tau_grid(&[]).is_err());
        assert!(validate_tau_grid(&[0.0, 0.5]).is_err());
        assert!(validate_tau_grid(&[0.5, 0.5]).is_err());
        assert!(validate_tau_grid(&[0.2, 0.1]).is_err());
        assert!(validate_tau_grid(&[0.1, 0.5, 0.9]).is_ok());
        let grid = tau_grid(17, 0.1, 0.9).unwrap();
        assert_eq!(grid.len(), 17);
        assert_abs_diff_eq!(grid[0], 0.1);
        assert_abs_diff_eq!(grid[16], 0.9);
        assert_abs_diff_eq!(grid[1] - grid[0], 0.05, epsilon = 1e-12);
    }

    #[test]
    fn path_intercept_increases_in_tau() {
        // The population intercept is 10 + Φ⁻¹(τ). Slope noise leaks into
        // the intercept scaled by the series mean (≈ 20), so the sample has
        // to be large enough for the 0.67 population gaps to dominate.
        let mut rng = Streams::new(6).stream("qar-path", 0);
        let t = 20_000;
        let mut y = vec![20.0];
        for _ in 1..t {
            let eps = crate::dist::inv_norm_cdf(uniform01(&mut rng)).unwrap();
            let prev = *y.last().unwrap();
            y.push(10.0 + 0.5 * prev + eps);
        }
        let frame = build_frame(&labeled(y), 1, None).unwrap();
        let path = fit_path(&frame, &[0.25, 0.5, 0.75]).unwrap();
        let c = path.coefficients();
        assert!(c[(0, 0)] < c[(1, 0)] && c[(1, 0)] < c[(2, 0)], "{c:?}");
        assert_eq!(path.objectives().len(), 3);
    }

    #[test]
    fn path_is_deterministic_across_runs() {
        let mut rng = Streams::new(7).stream("qar-det", 0);
        let y: Vec<f64> = (0..120).map(|_| standard_normal(&mut rng)).collect();
        let frame = build_frame(&labeled(y), 2, None).unwrap();
        let grid = tau_grid(9, 0.1, 0.9).unwrap();
        let a = fit_path(&frame, &grid).unwrap();
        let b = fit_path(&frame, &grid).unwrap();
        assert_eq!(
            a.coefficients().as_slice().unwrap(),
            b.coefficients().as_slice().unwrap()
        );
    }
}
