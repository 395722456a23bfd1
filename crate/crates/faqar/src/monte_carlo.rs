//! Size and power study harness for the specification tests.
//!
//! Two data-generating processes drive the study. Both draw υ_t iid
//! Uniform(0,1) and build a location-scale quantile autoregression
//!
//! Case 1:  y_t = 10 + Φ⁻¹(υ_t) + 0.5·y_{t−1}
//! Case 2:  y_t = 10 + Φ⁻¹(υ_t) + 0.5·y_{t−1} + 0.8·F_{1,t−1}
//!
//! so the pure autoregression null holds in Case 1 and fails in Case 2,
//! while the factor-augmented null holds in both. Factors are never
//! observed: a companion panel X_it = λ_i·F_t + e_it with λ_i iid
//! N(1,1), e_it iid N(0,1), F_t iid N(0,1), and N = T forces the tests
//! to run on estimated factors. The harness simulates, extracts factors,
//! runs the bootstrap tests, and tabulates rejection frequencies per
//! (case, T, null, functional) cell.
//!
//! Invariants maintained here:
//! - every random component (υ, factor path, loadings, panel noise,
//!   bootstrap) draws from its own labeled stream, so Case 2 with
//!   β₁ = 0 reproduces Case 1's series bit for bit under the same seed;
//! - a fixed seed reproduces the whole table bit-identically under any
//!   thread schedule;
//! - rejection frequencies lie in [0, 1] and count exactly the
//!   configured number of replications; failed replications are redrawn
//!   from fresh streams and counted, never silently dropped.

use ndarray::Array2;
use rayon::prelude::*;

use crate::bootstrap::{run_test, BootstrapConfig};
use crate::dist::inv_norm_cdf;
use crate::error::{Error, Result};
use crate::panel::{extract_factors, Panel};
use crate::qar::{build_frame, fit_path, tau_grid, FactorData, SeriesData};
use crate::rng::{standard_normal, uniform01, Streams};
use crate::spec_test::{
    empirical_process, FunctionalForm, NullHypothesis, WeightConfig,
};

/// Fresh-stream attempts per replication before the run aborts.
const MAX_ATTEMPTS: u64 = 8;

/// Which data-generating process to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgpCase {
    /// Pure quantile autoregression; both nulls hold.
    Case1,
    /// Factor-augmented process; the pure autoregression null fails.
    Case2,
}

impl DgpCase {
    /// Short label used in tables.
    pub fn label(self) -> &'static str {
        match self {
            DgpCase::Case1 => "case1",
            DgpCase::Case2 => "case2",
        }
    }
}

/// Simulation design for one sample size.
#[derive(Debug, Clone)]
pub struct DgpSpec {
    /// Which process to simulate.
    pub case: DgpCase,
    /// Retained sample size T.
    pub t_len: usize,
    /// Autoregressive slope, |rho1| < 1.
    pub rho1: f64,
    /// Factor slope; only Case 2 applies it.
    pub beta1: f64,
    /// Cross-section size of the companion panel.
    pub panel_n: usize,
    /// Periods simulated and discarded before the sample, at least 100.
    pub burn_in: usize,
    /// Standard deviation of the panel noise e_it; 0 gives a noiseless
    /// panel with exactly recoverable factors.
    pub panel_noise: f64,
}

impl DgpSpec {
    /// The study's design at sample size `t_len`: ρ₁ = 0.5, β₁ = 0.8,
    /// N = T, burn-in 200, unit panel noise.
    pub fn new(case: DgpCase, t_len: usize) -> Self {
        DgpSpec {
            case,
            t_len,
            rho1: 0.5,
            beta1: 0.8,
            panel_n: t_len,
            burn_in: 200,
            panel_noise: 1.0,
        }
    }

    /// Checks the field invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.rho1.abs() < 1.0) {
            return Err(Error::Parameter(format!(
                "autoregressive slope must satisfy |rho1| < 1, got {}",
                self.rho1
            )));
        }
        if self.burn_in < 100 {
            return Err(Error::Parameter(format!(
                "burn-in must be at least 100 periods, got {}",
                self.burn_in
            )));
        }
        if self.t_len < 10 {
            return Err(Error::Parameter(format!(
                "sample size {} is too small to test",
                self.t_len
            )));
        }
        if self.panel_n < 2 {
            return Err(Error::Parameter(format!(
                "panel needs at least two series, got {}",
                self.panel_n
            )));
        }
        if !(self.panel_noise >= 0.0) {
            return Err(Error::Parameter(format!(
                "panel noise scale must be nonnegative, got {}",
                self.panel_noise
            )));
        }
        Ok(())
    }
}

/// One simulated replication: the series, the unobserved true factors,
/// and the companion panel the tests must estimate factors from.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    /// Simulated series, length T.
    pub y: SeriesData,
    /// True factor path over the retained periods, T × 1.
    pub true_factors: FactorData,
    /// Companion panel, N series × T periods.
    pub panel: Panel,
}

/// Simulates one replication of the process.
///
/// All components draw from streams labeled by purpose and indexed by
/// `index`, so any single replication can be regenerated in isolation
/// and Case 1 equals Case 2 with β₁ = 0.
pub fn simulate_dgp(spec: &DgpSpec, streams: &Streams, index: u64) -> Result<SimulatedData> {
    spec.validate()?;
    let total = spec.burn_in + spec.t_len;
    let mut factor_rng = streams.stream("dgp-factors", index);
    let factor_path: Vec<f64> = (0..total).map(|_| standard_normal(&mut factor_rng)).collect();

    let beta = match spec.case {
        DgpCase::Case1 => 0.0,
        DgpCase::Case2 => spec.beta1,
    };
    let mut upsilon_rng = streams.stream("dgp-upsilon", index);
    let mut y = Vec::with_capacity(total);
    // Start at the stationary mean of the factor-free process.
    y.push(20.0);
    for t in 1..total {
        let shock = inv_norm_cdf(uniform01(&mut upsilon_rng))?;
        let value = 10.0 + shock + spec.rho1 * y[t - 1] + beta * factor_path[t - 1];
        y.push(value);
    }

    let periods: Vec<String> = (0..spec.t_len).map(|t| format!("t{t:05}")).collect();
    let y_kept = SeriesData::new(y[spec.burn_in..].to_vec(), periods.clone())?;
    let mut factor_column = Array2::zeros((spec.t_len, 1));
    for t in 0..spec.t_len {
        factor_column[(t, 0)] = factor_path[spec.burn_in + t];
    }
    let true_factors = FactorData::new(factor_column, periods.clone())?;

    let mut loading_rng = streams.stream("dgp-loadings", index);
    let loadings: Vec<f64> = (0..spec.panel_n)
        .map(|_| 1.0 + standard_normal(&mut loading_rng))
        .collect();
    let mut noise_rng = streams.stream("dgp-panel-noise", index);
    let mut values = Array2::zeros((spec.panel_n, spec.t_len));
    for i in 0..spec.panel_n {
        for t in 0..spec.t_len {
            let noise = spec.panel_noise * standard_normal(&mut noise_rng);
            values[(i, t)] = loadings[i] * true_factors.values()[(t, 0)] + noise;
        }
    }
    let series_ids: Vec<String> = (0..spec.panel_n).map(|i| format!("x{i:04}")).collect();
    let panel = Panel::from_raw(values, series_ids, periods)?;

    Ok(SimulatedData {
        y: y_kept,
        true_factors,
        panel,
    })
}

/// Which functional a table row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatFunctional {
    /// Cramér-von Mises.
    Cvm,
    /// Kolmogorov-Smirnov.
    Ks,
}

impl StatFunctional {
    /// Short label used in tables.
    pub fn label(self) -> &'static str {
        match self {
            StatFunctional::Cvm => "cvm",
            StatFunctional::Ks => "ks",
        }
    }
}

/// One experiment cell: a design and the null to test on it.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    /// Simulation design.
    pub dgp: DgpSpec,
    /// Null hypothesis the cell tests.
    pub null: NullHypothesis,
}

/// Study-wide configuration.
#[derive(Debug, Clone)]
pub struct McConfig {
    /// Monte Carlo replications per cell.
    pub mc_reps: usize,
    /// Bootstrap replications per test.
    pub boot_reps: usize,
    /// Nominal significance level.
    pub alpha: f64,
    /// Master seed; every stream derives from it.
    pub seed: u64,
    /// Number of τ grid points over [0.1, 0.9].
    pub tau_points: usize,
    /// Autoregressive order fitted by the tests.
    pub p: usize,
    /// Number of factors extracted from the companion panel.
    pub k: usize,
    /// Weight family for the test statistics.
    pub weights: WeightConfig,
    /// Functional aggregation.
    pub form: FunctionalForm,
}

impl McConfig {
    /// The study defaults at a given scale: 17 τ points, p = 1, k = 1,
    /// 30 shared Γ points over [0, 3], α = 0.05, squared functionals.
    pub fn at_scale(scale: Scale, seed: u64) -> Self {
        McConfig {
            mc_reps: scale.mc_reps(),
            boot_reps: scale.boot_reps(),
            alpha: 0.05,
            seed,
            tau_points: 17,
            p: 1,
            k: 1,
            weights: WeightConfig::default(),
            form: FunctionalForm::Squared,
        }
    }

    /// Checks the field invariants.
    pub fn validate(&self) -> Result<()> {
        if self.mc_reps == 0 {
            return Err(Error::Parameter(
                "study needs at least one replication".into(),
            ));
        }
        if self.boot_reps == 0 {
            return Err(Error::Parameter(
                "tests need at least one bootstrap replication".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Parameter(format!(
                "significance level must lie strictly inside (0, 1), got {}",
                self.alpha
            )));
        }
        if self.tau_points == 0 {
            return Err(Error::Parameter("tau grid needs at least one point".into()));
        }
        if self.k == 0 {
            return Err(Error::Parameter(
                "at least one factor must be extracted".into(),
            ));
        }
        self.weights.validate()
    }
}

/// Replication budget presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// 200 Monte Carlo × 99 bootstrap replications: tractable on a
    /// workstation, binomial error ≈ ±0.03 around a 5% size.
    Desk,
    /// 1000 × 300, the study's full budget. Expect hours, not minutes.
    Full,
}

impl Scale {
    /// Monte Carlo replications at this scale.
    pub fn mc_reps(self) -> usize {
        match self {
            Scale::Desk => 200,
            Scale::Full => 1000,
        }
    }

    /// Bootstrap replications at this scale.
    pub fn boot_reps(self) -> usize {
        match self {
            Scale::Desk => 99,
            Scale::Full => 300,
        }
    }
}

/// One tabulated cell.
#[derive(Debug, Clone)]
pub struct RejectionRow {
    /// Simulated process.
    pub case: DgpCase,
    /// Sample size.
    pub t_len: usize,
    /// Null tested.
    pub null: NullHypothesis,
    /// Functional the frequency refers to.
    pub functional: StatFunctional,
    /// Share of replications rejecting at the nominal level.
    pub rejection_frequency: f64,
    /// Replications that needed a fresh draw after a failure.
    pub failures: usize,
}

/// Full study output.
#[derive(Debug, Clone)]
pub struct RejectionTable {
    /// One row per (cell, functional).
    pub rows: Vec<RejectionRow>,
    /// Monte Carlo replications per cell.
    pub mc_reps: usize,
    /// Bootstrap replications per test.
    pub boot_reps: usize,
    /// Nominal significance level.
    pub nominal_alpha: f64,
}

fn null_label(null: NullHypothesis) -> &'static str {
    match null {
        NullHypothesis::FactorsInWeightsOnly => "qar",
        NullHypothesis::FactorsAsRegressors => "fa-qar",
    }
}

impl RejectionTable {
    /// CSV rendering, one row per cell and functional.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "case,t,null,functional,rejection_frequency,mc_reps,boot_reps,alpha,failures\n",
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{},{},{},{}\n",
                row.case.label(),
                row.t_len,
                null_label(row.null),
                row.functional.label(),
                row.rejection_frequency,
                self.mc_reps,
                self.boot_reps,
                self.nominal_alpha,
                row.failures
            ));
        }
        out
    }

    /// Aligned plain-text rendering: one block per (case, null), sample
    /// sizes as rows, KS and CvM as columns.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "Rejection frequencies at alpha = {} ({} MC x {} bootstrap)\n",
            self.nominal_alpha, self.mc_reps, self.boot_reps
        );
        let mut blocks: Vec<(DgpCase, NullHypothesis)> = Vec::new();
        for row in &self.rows {
            if !blocks.contains(&(row.case, row.null)) {
                blocks.push((row.case, row.null));
            }
        }
        for (case, null) in blocks {
            let fitted = match null {
                NullHypothesis::FactorsInWeightsOnly => "pure autoregression fitted",
                NullHypothesis::FactorsAsRegressors => "factor-augmented model fitted",
            };
            out.push_str(&format!("\n{} ({})\n", case.label(), fitted));
            out.push_str(&format!("{:>6}  {:>7}  {:>7}\n", "T", "KS", "CvM"));
            let mut t_values: Vec<usize> = self
                .rows
                .iter()
                .filter(|r| r.case == case && r.null == null)
                .map(|r| r.t_len)
                .collect();
            t_values.sort_unstable();
            t_values.dedup();
            for t in t_values {
                let pick = |functional: StatFunctional| {
                    self.rows
                        .iter()
                        .find(|r| {
                            r.case == case
                                && r.null == null
                                && r.t_len == t
                                && r.functional == functional
                        })
                        .map(|r| format!("{:.3}", r.rejection_frequency))
                        .unwrap_or_else(|| "-".into())
                };
                out.push_str(&format!(
                    "{:>6}  {:>7}  {:>7}\n",
                    t,
                    pick(StatFunctional::Ks),
                    pick(StatFunctional::Cvm)
                ));
            }
        }
        out
    }
}

/// Runs one replication of one cell: simulate, extract factors, test.
/// Returns the two rejection indicators (CvM, KS).
fn run_cell_replication(
    spec: &ExperimentSpec,
    cfg: &McConfig,
    streams: &Streams,
    index: u64,
) -> Result<(bool, bool)> {
    let data = simulate_dgp(&spec.dgp, streams, index)?;
    let model = extract_factors(&data.panel, cfg.k)?;
    let estimated = FactorData::new(model.factors().to_owned(), data.y.periods().to_vec())?;
    let frame = match spec.null {
        NullHypothesis::FactorsInWeightsOnly => build_frame(&data.y, cfg.p, None)?,
        NullHypothesis::FactorsAsRegressors => build_frame(&data.y, cfg.p, Some(&estimated))?,
    };
    let grid = tau_grid(cfg.tau_points, 0.1, 0.9)?;
    let boot_cfg = BootstrapConfig {
        replications: cfg.boot_reps,
        seed: streams.derive_seed("mc-bootstrap", index),
        alpha: cfg.alpha,
    };
    let run = run_test(
        &frame,
        Some(&estimated),
        &cfg.weights,
        &boot_cfg,
        spec.null,
        cfg.form,
        &grid,
    )?;
    Ok((run.bootstrap.reject_cvm(), run.bootstrap.reject_ks()))
}

/// Runs the study and tabulates rejection frequencies.
///
/// Replications run in parallel; each derives its streams from
/// (seed, cell, replication, attempt), so the table is reproducible
/// under any schedule. A failed replication is redrawn from the next
/// attempt stream and counted in `failures`.
pub fn run_experiment(specs: &[ExperimentSpec], cfg: &McConfig) -> Result<RejectionTable> {
    cfg.validate()?;
    if specs.is_empty() {
        return Err(Error::Parameter("no experiment cells requested".into()));
    }
    let mut rows = Vec::with_capacity(specs.len() * 2);
    for (cell, spec) in specs.iter().enumerate() {
        spec.dgp.validate()?;
        if spec.null == NullHypothesis::FactorsAsRegressors && cfg.k == 0 {
            return Err(Error::Parameter(
                "factor-augmented cells need extracted factors".into(),
            ));
        }
        let streams = Streams::new(cfg.seed ^ (cell as u64).wrapping_mul(0x9E3779B97F4A7C15));
        let outcomes: Vec<(bool, bool, usize)> = (0..cfg.mc_reps)
            .into_par_iter()
            .map(|rep| {
                let mut failures = 0;
                loop {
                    let index = rep as u64 * MAX_ATTEMPTS + failures as u64;
                    match run_cell_replication(spec, cfg, &streams, index) {
                        Ok((cvm, ks)) => return Ok((cvm, ks, failures)),
                        Err(e) => {
                            failures += 1;
                            if failures as u64 >= MAX_ATTEMPTS {
                                return Err(e);
                            }
                        }
                    }
                }
            })
            .collect::<Result<_>>()?;
        let cvm_rate = outcomes.iter().filter(|o| o.0).count() as f64 / cfg.mc_reps as f64;
        let ks_rate = outcomes.iter().filter(|o| o.1).count() as f64 / cfg.mc_reps as f64;
        let failures = outcomes.iter().map(|o| o.2).sum();
        rows.push(RejectionRow {
            case: spec.dgp.case,
            t_len: spec.dgp.t_len,
            null: spec.null,
            functional: StatFunctional::Cvm,
            rejection_frequency: cvm_rate,
            failures,
        });
        rows.push(RejectionRow {
            case: spec.dgp.case,
            t_len: spec.dgp.t_len,
            null: spec.null,
            functional: StatFunctional::Ks,
            rejection_frequency: ks_rate,
            failures,
        });
    }
    Ok(RejectionTable {
        rows,
        mc_reps: cfg.mc_reps,
        boot_reps: cfg.boot_reps,
        nominal_alpha: cfg.alpha,
    })
}

/// The full study grid: both cases at T ∈ {100, 300, 500, 1000} under
/// the pure autoregression null, plus the factor-augmented null on
/// Case 2 at T = 300.
pub fn study_cells() -> Vec<ExperimentSpec> {
    let mut cells = Vec::new();
    for case in [DgpCase::Case1, DgpCase::Case2] {
        for t in [100, 300, 500, 1000] {
            cells.push(ExperimentSpec {
                dgp: DgpSpec::new(case, t),
                null: NullHypothesis::FactorsInWeightsOnly,
            });
        }
    }
    cells.push(ExperimentSpec {
        dgp: DgpSpec::new(DgpCase::Case2, 300),
        null: NullHypothesis::FactorsAsRegressors,
    });
    cells
}

/// One row of the factor-replacement convergence table.
#[derive(Debug, Clone)]
pub struct FactorGapRow {
    /// Panel cross-section size.
    pub n: usize,
    /// Sample size.
    pub t_len: usize,
    /// Median |CvM(estimated) − CvM(aligned true)| across replications.
    pub median_cvm_gap: f64,
    /// Median |KS(estimated) − KS(aligned true)| across replications.
    pub median_ks_gap: f64,
    /// Replications behind the medians.
    pub reps: usize,
}

/// Measures how much replacing true factors with estimated ones moves
/// the test statistics, across panel sizes.
///
/// Estimated factors recover the truth only up to an affine map (panel
/// standardization demeans each series, and principal components fix
/// scale and rotation), so the true factors are first aligned to the
/// estimated ones by least squares on [1, F]. The reported gap is the
/// absolute difference of the functionals computed from estimated and
/// aligned-true factor weights on the same fitted path; it must shrink
/// as the panel grows and vanish on a noiseless panel.
pub fn factor_gap_check(
    template: &DgpSpec,
    k: usize,
    sizes: &[(usize, usize)],
    reps: usize,
    seed: u64,
) -> Result<Vec<FactorGapRow>> {
    if reps == 0 {
        return Err(Error::Parameter("gap check needs replications".into()));
    }
    if k == 0 {
        return Err(Error::Parameter(
            "at least one factor must be extracted".into(),
        ));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for (size_idx, &(n, t)) in sizes.iter().enumerate() {
        if n < t {
            return Err(Error::Parameter(format!(
                "factor gap check needs N >= T, got ({n}, {t})"
            )));
        }
        let mut spec = template.clone();
        spec.panel_n = n;
        spec.t_len = t;
        spec.validate()?;
        let streams = Streams::new(seed ^ (size_idx as u64).wrapping_mul(0x9E3779B97F4A7C15));
        let gaps: Vec<(f64, f64)> = (0..reps)
            .into_par_iter()
            .map(|rep| replication_gap(&spec, k, &streams, rep as u64))
            .collect::<Result<_>>()?;
        let mut cvm_gaps: Vec<f64> = gaps.iter().map(|g| g.0).collect();
        let mut ks_gaps: Vec<f64> = gaps.iter().map(|g| g.1).collect();
        cvm_gaps.sort_unstable_by(f64::total_cmp);
        ks_gaps.sort_unstable_by(f64::total_cmp);
        rows.push(FactorGapRow {
            n,
            t_len: t,
            median_cvm_gap: median_of_sorted(&cvm_gaps),
            median_ks_gap: median_of_sorted(&ks_gaps),
            reps,
        });
    }
    Ok(rows)
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn replication_gap(spec: &DgpSpec, k: usize, streams: &Streams, index: u64) -> Result<(f64, f64)> {
    let data = simulate_dgp(spec, streams, index)?;
    let model = extract_factors(&data.panel, k)?;
    let estimated = FactorData::new(model.factors().to_owned(), data.y.periods().to_vec())?;
    let aligned = affine_align(&data.true_factors, &estimated)?;

    let frame = build_frame(&data.y, 1, None)?;
    let grid = tau_grid(17, 0.1, 0.9)?;
    let path = fit_path(&frame, &grid)?;
    let cfg = WeightConfig::default();
    let with_estimated = empirical_process(
        &frame,
        &path,
        Some(&estimated),
        &cfg,
        NullHypothesis::FactorsInWeightsOnly,
        FunctionalForm::Squared,
    )?;
    let with_true = empirical_process(
        &frame,
        &path,
        Some(&aligned),
        &cfg,
        NullHypothesis::FactorsInWeightsOnly,
        FunctionalForm::Squared,
    )?;
    Ok((
        (with_estimated.cvm() - with_true.cvm()).abs(),
        (with_estimated.ks() - with_true.ks()).abs(),
    ))
}

/// Maps the true factors onto the estimated ones by least squares on
/// [1, F], returning the fitted values as factor data.
fn affine_align(true_factors: &FactorData, estimated: &FactorData) -> Result<FactorData> {
    let t = true_factors.len();
    if estimated.len() != t {
        return Err(Error::Parameter(format!(
            "factor paths of different lengths: {} vs {}",
            t,
            estimated.len()
        )));
    }
    let k_true = true_factors.k();
    let k_hat = estimated.k();
    let cols = 1 + k_true;
    let mut design = nalgebra::DMatrix::zeros(t, cols);
    for row in 0..t {
        design[(row, 0)] = 1.0;
        for j in 0..k_true {
            design[(row, 1 + j)] = true_factors.values()[(row, j)];
        }
    }
    let mut target = nalgebra::DMatrix::zeros(t, k_hat);
    for row in 0..t {
        for j in 0..k_hat {
            target[(row, j)] = estimated.values()[(row, j)];
        }
    }
    let gram = design.transpose() * &design;
    let moment = design.transpose() * &target;
    let solution = nalgebra::Cholesky::new(gram)
        .ok_or_else(|| Error::Singular("degenerate factor alignment design".into()))?
        .solve(&moment);
    let fitted = design * solution;
    let mut aligned = Array2::zeros((t, k_hat));
    for row in 0..t {
        for j in 0..k_hat {
            aligned[(row, j)] = fitted[(row, j)];
        }
    }
    FactorData::new(aligned, estimated.periods().to_vec())
}
