//! Pairwise iid bootstrap inference for the specification test.
//!
//! Because the weighted quantile marks form a martingale difference
//! sequence under either null, resampling single rows with replacement
//! preserves first-order validity. Each replication draws T_eff − 1 row
//! indices and keeps every row's tuple intact: response, design row, and
//! the precomputed weight basis (so weights are resampled, never
//! recomputed on the shuffled history). The same draws serve every Γ
//! cell of a replication. The quantile path is refitted on the resampled
//! rows, and the replicated process is recentered with the original
//! sample's average summand, so its expectation across replications on a
//! fixed sample is zero cell by cell:
//!
//! S*(τ, Γ) = T_d^(−1/2) Σ_i [(1{y*_i − x*_i′θ̂*(τ) ≤ 0} − τ)·w*_i(Γ) − m̄(τ, Γ)],
//!
//! where T_d is the drawn count and m̄ is the original sample's mean
//! weighted mark. The same KS/CvM functionals as the original statistic
//! reduce each replication to a pair of numbers; p-values count the
//! replications at or above the original statistic.
//!
//! Invariants maintained here:
//! - identical (data, config, seed) produce a bit-identical result under
//!   any thread schedule: replication r uses an RNG stream derived from
//!   (seed, r), and the stored bootstrap arrays are sorted;
//! - p = #{boot ≥ original}/B exactly, so 0 ≤ p ≤ 1, and p = 1 whenever
//!   the original statistic is 0 with the squared functionals;
//! - the critical value is the empirical (1−α) percentile of the sorted
//!   bootstrap array, with its rank chosen so that original > critical
//!   exactly when p < α;
//! - a replication whose refit fails (rank-deficient or non-converged
//!   resample) is redrawn from its own stream and counted, never
//!   silently dropped; results are all-or-nothing.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qar::{fit_path_design, FactorData, QuantileFitPath, RegressionFrame};
use crate::rng::{bounded_index, Streams};
use crate::spec_test::{
    cvm_functional, empirical_process, gamma_cells, ks_functional, marks_from, surface_values,
    weight_basis, FunctionalForm, GammaPoint, NullHypothesis, TestSurface, WeightBasis,
    WeightConfig,
};

/// Redraw budget per replication before giving up.
const MAX_REDRAWS: usize = 32;

/// Bootstrap run configuration.
#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    /// Number of replications B.
    pub replications: usize,
    /// Seed of the replication RNG streams.
    pub seed: u64,
    /// Significance level α.
    pub alpha: f64,
}

impl BootstrapConfig {
    /// Checks the field invariants: B ≥ 1 and 0 < α < 1.
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Parameter(
                "bootstrap needs at least one replication".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Parameter(format!(
                "significance level must lie strictly inside (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Bootstrap distribution summary for one test.
#[derive(Debug, Clone)]
pub struct BootstrapResult {
    /// CvM statistic of the original sample.
    pub original_cvm: f64,
    /// KS statistic of the original sample.
    pub original_ks: f64,
    /// Replicated CvM statistics, sorted ascending.
    pub boot_cvm: Vec<f64>,
    /// Replicated KS statistics, sorted ascending.
    pub boot_ks: Vec<f64>,
    /// Share of replications with CvM* ≥ the original CvM.
    pub p_cvm: f64,
    /// Share of replications with KS* ≥ the original KS.
    pub p_ks: f64,
    /// Empirical (1−α) percentile of the CvM replications.
    pub critical_cvm: f64,
    /// Empirical (1−α) percentile of the KS replications.
    pub critical_ks: f64,
    /// Significance level the critical values refer to.
    pub alpha: f64,
    /// Total replications redrawn after refit failures.
    pub redraws: usize,
}

impl BootstrapResult {
    /// Whether the CvM test rejects at level α.
    pub fn reject_cvm(&self) -> bool {
        self.p_cvm < self.alpha
    }

    /// Whether the KS test rejects at level α.
    pub fn reject_ks(&self) -> bool {
        self.p_ks < self.alpha
    }
}

/// Everything a full test run produces.
#[derive(Debug, Clone)]
pub struct TestRun {
    /// Quantile path fitted on the original sample.
    pub path: QuantileFitPath,
    /// Original weighted empirical process surface and functionals.
    pub surface: TestSurface,
    /// Bootstrap distribution, p-values, and critical values.
    pub bootstrap: BootstrapResult,
}

/// Rows drawn for one replication, tuples kept intact.
#[derive(Debug, Clone)]
pub struct ResampledRows {
    /// Resampled design matrix, T_d × d.
    pub design: Array2<f64>,
    /// Resampled responses, length T_d.
    pub response: Vec<f64>,
    /// Resampled lagged-response weight basis.
    pub by: Vec<f64>,
    /// Resampled factor weight basis.
    pub bf: Vec<f64>,
    /// The draw indices, length T_d.
    pub indices: Vec<usize>,
}

/// Draws T_eff − 1 row indices iid uniformly with replacement.
fn draw_indices(t_eff: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..t_eff - 1).map(|_| bounded_index(rng, t_eff)).collect()
}

/// Resamples frame rows and their weight basis at explicit indices.
///
/// Test hook: forcing the indices makes any draw reproducible.
pub fn resample_with_indices(
    frame: &RegressionFrame,
    basis: &WeightBasis,
    indices: &[usize],
) -> Result<ResampledRows> {
    if basis.by().len() != frame.t_eff() {
        return Err(Error::Parameter(format!(
            "weight basis covers {} rows but the frame has {}",
            basis.by().len(),
            frame.t_eff()
        )));
    }
    if indices.is_empty() {
        return Err(Error::Parameter("no rows drawn".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= frame.t_eff()) {
        return Err(Error::Parameter(format!(
            "draw index {bad} out of range for {} rows",
            frame.t_eff()
        )));
    }
    let d = frame.d();
    let mut design = Array2::zeros((indices.len(), d));
    let mut response = Vec::with_capacity(indices.len());
    let mut by = Vec::with_capacity(indices.len());
    let mut bf = Vec::with_capacity(indices.len());
    for (row, &i) in indices.iter().enumerate() {
        for j in 0..d {
            design[(row, j)] = frame.design()[(i, j)];
        }
        response.push(frame.response()[i]);
        by.push(basis.by()[i]);
        bf.push(basis.bf()[i]);
    }
    Ok(ResampledRows {
        design,
        response,
        by,
        bf,
        indices: indices.to_vec(),
    })
}

/// Draws one replication's rows: T_eff − 1 indices from `rng`.
pub fn resample_rows(
    frame: &RegressionFrame,
    basis: &WeightBasis,
    rng: &mut impl Rng,
) -> Result<ResampledRows> {
    if frame.t_eff() < 2 {
        return Err(Error::Parameter(
            "resampling needs at least two frame rows".into(),
        ));
    }
    let indices = draw_indices(frame.t_eff(), rng);
    resample_with_indices(frame, basis, &indices)
}

/// One recentered bootstrap replication.
#[derive(Debug, Clone)]
pub struct BootstrapReplicate {
    /// Recentered process values S*, m × G.
    pub values: Array2<f64>,
    /// CvM functional of the replicated surface.
    pub cvm: f64,
    /// KS functional of the replicated surface.
    pub ks: f64,
}

/// Precomputed original-sample context shared by all replications.
struct BootContext<'a> {
    frame: &'a RegressionFrame,
    basis: WeightBasis,
    cells: Vec<GammaPoint>,
    tau_grid: Vec<f64>,
    /// m̄(τ, Γ) scaled for recentering: m̄ = S_original/√T_eff.
    center: Array2<f64>,
    form: FunctionalForm,
}

fn build_context<'a>(
    frame: &'a RegressionFrame,
    surface: &TestSurface,
    factors: Option<&FactorData>,
    weight_cfg: &WeightConfig,
) -> Result<BootContext<'a>> {
    let basis = weight_basis(frame, factors, weight_cfg)?;
    let cells = gamma_cells(weight_cfg, factors.is_some())?;
    let center = surface.values().to_owned() / (frame.t_eff() as f64).sqrt();
    Ok(BootContext {
        frame,
        basis,
        cells,
        tau_grid: surface.tau_grid().to_vec(),
        center,
        form: surface.form(),
    })
}

/// Refits the quantile path on explicit rows, as an m × d matrix.
fn refit_coefficients(
    design: ArrayView2<'_, f64>,
    response: &[f64],
    tau_grid: &[f64],
) -> Result<Array2<f64>> {
    let fits = fit_path_design(design, response, tau_grid)?;
    let mut coefficients = Array2::zeros((fits.len(), design.ncols()));
    for (q, fit) in fits.iter().enumerate() {
        for (j, &value) in fit.coefficients.iter().enumerate() {
            coefficients[(q, j)] = value;
        }
    }
    Ok(coefficients)
}

fn replicate_at(ctx: &BootContext<'_>, indices: &[usize]) -> Result<BootstrapReplicate> {
    let rows = resample_with_indices(ctx.frame, &ctx.basis, indices)?;
    let coefficients = refit_coefficients(rows.design.view(), &rows.response, &ctx.tau_grid)?;
    let marks = marks_from(
        rows.design.view(),
        &rows.response,
        &ctx.tau_grid,
        coefficients.view(),
    );
    let resampled_basis = WeightBasis::from_parts(rows.by, rows.bf);
    // surface_values scales by the drawn count; recentering subtracts
    // √T_d·m̄ from each cell.
    let raw = surface_values(&marks, &resampled_basis, &ctx.cells)?;
    let drawn_scale = (indices.len() as f64).sqrt();
    let values = raw - &ctx.center * drawn_scale;
    let cvm = cvm_functional(values.view(), ctx.form)?;
    let ks = ks_functional(values.view(), ctx.form)?;
    if !cvm.is_finite() || !ks.is_finite() {
        return Err(Error::Numeric("non-finite bootstrap functional".into()));
    }
    Ok(BootstrapReplicate { values, cvm, ks })
}

fn replicate_drawing(
    ctx: &BootContext<'_>,
    rng: &mut impl Rng,
) -> Result<(f64, f64, usize)> {
    let mut redraws = 0;
    loop {
        let indices = draw_indices(ctx.frame.t_eff(), rng);
        match replicate_at(ctx, &indices) {
            Ok(rep) => return Ok((rep.cvm, rep.ks, redraws)),
            Err(Error::Singular(_)) | Err(Error::Numeric(_)) if redraws < MAX_REDRAWS => {
                redraws += 1;
            }
            Err(e) => return Err(e),
            // A refit that keeps failing after many fresh draws points at
            // the data, not bad luck.
        }
    }
}

/// Computes one recentered replication at forced draw indices.
///
/// The √ normalizer uses the drawn count, so forcing the identity draw
/// over all T_eff rows reproduces the original surface exactly and the
/// recentered process is identically zero.
pub fn bootstrap_statistic_at(
    frame: &RegressionFrame,
    path: &QuantileFitPath,
    factors: Option<&FactorData>,
    weight_cfg: &WeightConfig,
    null: NullHypothesis,
    form: FunctionalForm,
    indices: &[usize],
) -> Result<BootstrapReplicate> {
    let surface = empirical_process(frame, path, factors, weight_cfg, null, form)?;
    let ctx = build_context(frame, &surface, factors, weight_cfg)?;
    replicate_at(&ctx, indices)
}

/// Draws and computes one replication's (CvM*, KS*), counting redraws.
pub fn bootstrap_statistic(
    frame: &RegressionFrame,
    path: &QuantileFitPath,
    factors: Option<&FactorData>,
    weight_cfg: &WeightConfig,
    null: NullHypothesis,
    form: FunctionalForm,
    rng: &mut impl Rng,
) -> Result<(f64, f64, usize)> {
    let surface = empirical_process(frame, path, factors, weight_cfg, null, form)?;
    let ctx = build_context(frame, &surface, factors, weight_cfg)?;
    replicate_drawing(&ctx, rng)
}

/// Share of sorted bootstrap values at or above the original statistic.
fn p_value(original: f64, sorted_boot: &[f64]) -> f64 {
    let count = sorted_boot.iter().filter(|&&b| b >= original).count();
    count as f64 / sorted_boot.len() as f64
}

/// Empirical (1−α) percentile of a sorted bootstrap array.
///
/// The rank is floor((1−α)·B) + 1 (1-based, capped at B), which makes
/// original > critical equivalent to p < α.
fn critical_value(sorted_boot: &[f64], alpha: f64) -> f64 {
    let b = sorted_boot.len();
    let rank = (((1.0 - alpha) * b as f64).floor() as usize + 1).min(b);
    sorted_boot[rank - 1]
}

/// Runs the full test: path fit, original surface, B bootstrap
/// replications, p-values, and critical values.
pub fn run_test(
    frame: &RegressionFrame,
    factors: Option<&FactorData>,
    weight_cfg: &WeightConfig,
    boot_cfg: &BootstrapConfig,
    null: NullHypothesis,
    form: FunctionalForm,
    tau_grid: &[f64],
) -> Result<TestRun> {
    boot_cfg.validate()?;
    if frame.t_eff() < 2 || frame.t_eff() - 1 < frame.d() {
        return Err(Error::Parameter(format!(
            "frame with {} rows cannot support refits on {} drawn rows of width {}",
            frame.t_eff(),
            frame.t_eff().saturating_sub(1),
            frame.d()
        )));
    }
    let path = crate::qar::fit_path(frame, tau_grid)?;
    let surface = empirical_process(frame, &path, factors, weight_cfg, null, form)?;
    let ctx = build_context(frame, &surface, factors, weight_cfg)?;

    let streams = Streams::new(boot_cfg.seed);
    let draws: Vec<(f64, f64, usize)> = (0..boot_cfg.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = streams.stream("bootstrap-replication", r as u64);
            replicate_drawing(&ctx, &mut rng)
        })
        .collect::<Result<_>>()?;

    let mut boot_cvm: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let mut boot_ks: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let redraws = draws.iter().map(|d| d.2).sum();
    boot_cvm.sort_unstable_by(f64::total_cmp);
    boot_ks.sort_unstable_by(f64::total_cmp);

    let bootstrap = BootstrapResult {
        original_cvm: surface.cvm(),
        original_ks: surface.ks(),
        p_cvm: p_value(surface.cvm(), &boot_cvm),
        p_ks: p_value(surface.ks(), &boot_ks),
        critical_cvm: critical_value(&boot_cvm, boot_cfg.alpha),
        critical_ks: critical_value(&boot_ks, boot_cfg.alpha),
        boot_cvm,
        boot_ks,
        alpha: boot_cfg.alpha,
        redraws,
    };
    Ok(TestRun {
        path,
        surface,
        bootstrap,
    })
}
