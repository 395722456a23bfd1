//! Tick-loss LP solver: primal-dual interior point plus vertex polish.
//!
//! The fit solves
//!
//! ```text
//! min_{θ, u, v}  τ·1'u + (1−τ)·1'v   s.t.  Xθ + u − v = y,  u ≥ 0,  v ≥ 0,
//! ```
//!
//! whose dual multipliers λ live in the box [τ−1, τ] with X'λ = 0. The
//! interior point loop is a Mehrotra-style predictor-corrector on the KKT
//! system; each iteration factors the d×d matrix X'·diag(1/e)·X once.
//!
//! Interior point iterates approach the analytic center of the optimal face,
//! not a vertex. The polish step enumerates small-|residual| row bases near
//! the face, solves each exactly, and keeps the best basic solution, so the
//! reported estimate is a vertex of the LP whose objective is no worse than
//! the interior point's. When several vertices tie (flat optimum), the
//! lexicographically largest coefficient vector wins, which makes ties
//! deterministic and resolves the intercept-only case to the upper endpoint.
//!
//! Rank deficiency of the design is detected upfront by a column-pivoted QR
//! and reported as an error rather than silently regularized.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::qar::QuantileFit;

/// Relative duality gap at which the interior point loop stops.
const GAP_TOL: f64 = 1e-9;
/// Fraction-to-boundary multiplier for step lengths.
const STEP_SHRINK: f64 = 0.9995;
/// Interior point iteration cap.
const MAX_ITER: usize = 120;
/// Relative tolerance for accepting a polished vertex over the IP objective.
const POLISH_TOL: f64 = 1e-8;
/// Largest number of candidate bases the polish enumerates exhaustively.
const POLISH_BUDGET: usize = 6000;

/// Tick-loss objective Σ ρ_τ(y_i − x_i'θ).
pub(crate) fn objective(
    design: ArrayView2<'_, f64>,
    response: &[f64],
    theta: &[f64],
    tau: f64,
) -> f64 {
    let mut total = 0.0;
    for (i, &y) in response.iter().enumerate() {
        let mut pred = 0.0;
        for (j, &th) in theta.iter().enumerate() {
            pred += design[(i, j)] * th;
        }
        let u = y - pred;
        total += u * (tau - if u < 0.0 { 1.0 } else { 0.0 });
    }
    total
}

/// Smallest one-sided directional derivative of the tick objective at
/// `theta` over the coordinate directions ±e_j, normalized by the column
/// scale. Nonnegative (within solver tolerance) at an optimum.
pub fn coordinate_optimality_gap(
    design: ArrayView2<'_, f64>,
    response: &[f64],
    theta: &[f64],
    tau: f64,
) -> f64 {
    let n = design.nrows();
    let d = design.ncols();
    let scale_y = response.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let zero_tol = 1e-7 * scale_y;
    let mut worst = f64::INFINITY;
    for j in 0..d {
        // Directional derivative along ±e_j: rows with nonzero residual
        // contribute their fixed slope, rows at zero residual contribute
        // the worst-case (positive) kink term.
        let mut col_scale = 0.0f64;
        let mut slope = 0.0;
        let mut kink_pos = 0.0; // extra derivative along +e_j
        let mut kink_neg = 0.0; // extra derivative along −e_j
        for i in 0..n {
            let mut pred = 0.0;
            for (jj, &th) in theta.iter().enumerate() {
                pred += design[(i, jj)] * th;
            }
            let r = response[i] - pred;
            let g = design[(i, j)];
            col_scale = col_scale.max(g.abs());
            if r > zero_tol {
                slope += -tau * g;
            } else if r < -zero_tol {
                slope += (1.0 - tau) * g;
            } else {
                kink_pos += (1.0 - tau) * g.max(0.0) + tau * (-g).max(0.0);
                kink_neg += (1.0 - tau) * (-g).max(0.0) + tau * g.max(0.0);
            }
        }
        let norm = (n as f64) * col_scale.max(1e-12);
        worst = worst.min((slope + kink_pos) / norm);
        worst = worst.min((-slope + kink_neg) / norm);
    }
    worst
}

/// Full solve: rank check, interior point, then vertex polish.
pub(crate) fn solve(
    design: ArrayView2<'_, f64>,
    response: &[f64],
    tau: f64,
) -> Result<QuantileFit> {
    check_rank(design)?;
    let (theta_ip, iterations) = interior_point(design, response, tau)?;
    let obj_ip = objective(design, response, &theta_ip, tau);
    match polish(design, response, tau, &theta_ip) {
        Some((theta, obj)) if obj <= obj_ip + POLISH_TOL * (1.0 + obj_ip.abs()) => {
            Ok(QuantileFit {
                coefficients: theta,
                objective: obj,
                iterations,
                vertex: true,
            })
        }
        _ => Ok(QuantileFit {
            coefficients: theta_ip,
            objective: obj_ip,
            iterations,
            vertex: false,
        }),
    }
}

/// Rejects rank-deficient designs via column-pivoted QR.
fn check_rank(design: ArrayView2<'_, f64>) -> Result<()> {
    let n = design.nrows();
    let d = design.ncols();
    let mat = DMatrix::from_fn(n, d, |i, j| design[(i, j)]);
    let qr = mat.col_piv_qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    if lead == 0.0 {
        return Err(Error::Singular(
            "design matrix is identically zero".into(),
        ));
    }
    let tol = lead * (n.max(d) as f64) * f64::EPSILON * 16.0;
    for j in 0..d {
        if r[(j, j)].abs() <= tol {
            return Err(Error::Singular(format!(
                "design matrix is rank deficient (pivot {j} of {d} has magnitude \
                 {:.3e} against leading pivot {lead:.3e})",
                r[(j, j)].abs()
            )));
        }
    }
    Ok(())
}

/// Mehrotra predictor-corrector on the tick-loss LP.
///
/// Returns the (near-optimal, non-vertex) coefficient iterate and the number
/// of iterations. Errors with a gap trace if the loop fails to converge.
fn interior_point(
    design: ArrayView2<'_, f64>,
    response: &[f64],
    tau: f64,
) -> Result<(Vec<f64>, usize)> {
    let n = design.nrows();
    let d = design.ncols();
    let nf = n as f64;

    // Least squares warm start; u − v matches the residual exactly, so the
    // initial point is primal feasible.
    let mut theta = least_squares(design, response);
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut lambda = vec![0.0; n];
    let mut resid_scale = 0.0f64;
    for i in 0..n {
        let r = response[i] - row_dot(design, i, &theta);
        resid_scale += r.abs();
    }
    let margin = 1.0 + 0.1 * resid_scale / nf;
    for i in 0..n {
        let r = response[i] - row_dot(design, i, &theta);
        u[i] = r.max(0.0) + margin;
        v[i] = (-r).max(0.0) + margin;
    }

    let mut trace: Vec<(usize, f64)> = Vec::new();
    for iter in 0..MAX_ITER {
        // Dual slacks are determined by λ.
        let s_u: Vec<f64> = lambda.iter().map(|l| tau - l).collect();
        let s_v: Vec<f64> = lambda.iter().map(|l| (1.0 - tau) + l).collect();

        let obj_p: f64 = u.iter().map(|x| tau * x).sum::<f64>()
            + v.iter().map(|x| (1.0 - tau) * x).sum::<f64>();
        let obj_d: f64 = lambda.iter().zip(response).map(|(l, y)| l * y).sum();
        let gap = obj_p - obj_d;
        trace.push((iter, gap));
        if gap.abs() <= GAP_TOL * (1.0 + obj_p.abs()) {
            return Ok((theta, iter));
        }

        // Residuals (feasibility drifts only through damped steps).
        let mut rp = vec![0.0; n];
        for i in 0..n {
            rp[i] = response[i] - row_dot(design, i, &theta) - u[i] + v[i];
        }
        let mut rd = vec![0.0; d];
        for j in 0..d {
            let mut acc = 0.0;
            for i in 0..n {
                acc -= design[(i, j)] * lambda[i];
            }
            rd[j] = acc;
        }

        let e: Vec<f64> = (0..n)
            .map(|i| u[i] / s_u[i] + v[i] / s_v[i])
            .collect();
        let normal = factor_normal_matrix(design, &e).ok_or_else(|| {
            Error::Numeric(format!(
                "interior point normal matrix lost positive definiteness at \
                 iteration {iter} (gap trace {:?})",
                tail(&trace)
            ))
        })?;

        let mu = (dot(&u, &s_u) + dot(&v, &s_v)) / (2.0 * nf);

        // Predictor: pure Newton step toward complementarity zero.
        let rc_u_aff: Vec<f64> = (0..n).map(|i| -u[i] * s_u[i]).collect();
        let rc_v_aff: Vec<f64> = (0..n).map(|i| -v[i] * s_v[i]).collect();
        let aff = newton_step(
            design, &normal, &e, &rp, &rd, &s_u, &s_v, &u, &v, &rc_u_aff, &rc_v_aff,
        );
        let (ap_aff, ad_aff) = step_lengths(&u, &v, &s_u, &s_v, &aff, 1.0);
        let gap_aff = predicted_gap(&u, &v, &s_u, &s_v, &aff, ap_aff, ad_aff);
        let gap_now = dot(&u, &s_u) + dot(&v, &s_v);
        let sigma = if gap_now > 0.0 {
            ((gap_aff / gap_now).max(0.0).powi(3)).clamp(1e-6, 0.9)
        } else {
            0.1
        };

        // Corrector: recenter toward σμ and absorb the predictor's
        // second-order complementarity error.
        let rc_u: Vec<f64> = (0..n)
            .map(|i| sigma * mu - u[i] * s_u[i] + aff.du[i] * aff.dlambda[i])
            .collect();
        let rc_v: Vec<f64> = (0..n)
            .map(|i| sigma * mu - v[i] * s_v[i] - aff.dv[i] * aff.dlambda[i])
            .collect();
        let step = newton_step(
            design, &normal, &e, &rp, &rd, &s_u, &s_v, &u, &v, &rc_u, &rc_v,
        );
        let (ap, ad) = step_lengths(&u, &v, &s_u, &s_v, &step, STEP_SHRINK);
        if ap <= 1e-13 && ad <= 1e-13 {
            // Stalled: accept if already acceptably close, else fail.
            if gap.abs() <= 1e-6 * (1.0 + obj_p.abs()) {
                return Ok((theta, iter));
            }
            return Err(Error::Numeric(format!(
                "interior point stalled at iteration {iter} with relative gap \
                 {:.3e} (gap trace {:?})",
                gap / (1.0 + obj_p.abs()),
                tail(&trace)
            )));
        }
        for j in 0..d {
            theta[j] += ap * step.dtheta[j];
        }
        for i in 0..n {
            u[i] += ap * step.du[i];
            v[i] += ap * step.dv[i];
            lambda[i] += ad * step.dlambda[i];
        }
    }
    Err(Error::Numeric(format!(
        "interior point did not converge within {MAX_ITER} iterations \
         (gap trace {:?})",
        tail(&trace)
    )))
}

struct Direction {
    dtheta: Vec<f64>,
    dlambda: Vec<f64>,
    du: Vec<f64>,
    dv: Vec<f64>,
}

/// Solves one KKT Newton system given the factored normal matrix.
#[allow(clippy::too_many_arguments)]
fn newton_step(
    design: ArrayView2<'_, f64>,
    normal: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    e: &[f64],
    rp: &[f64],
    rd: &[f64],
    s_u: &[f64],
    s_v: &[f64],
    u: &[f64],
    v: &[f64],
    rc_u: &[f64],
    rc_v: &[f64],
) -> Direction {
    let n = design.nrows();
    let d = design.ncols();
    // h = rp − rc_u/s_u + rc_v/s_v; solve (X'E⁻¹X) Δθ = X'(h/e) − rd.
    let mut h = vec![0.0; n];
    for i in 0..n {
        h[i] = rp[i] - rc_u[i] / s_u[i] + rc_v[i] / s_v[i];
    }
    let mut rhs = DVector::zeros(d);
    for j in 0..d {
        let mut acc = 0.0;
        for i in 0..n {
            acc += design[(i, j)] * h[i] / e[i];
        }
        rhs[j] = acc - rd[j];
    }
    let dtheta_v = normal.solve(&rhs);
    let dtheta: Vec<f64> = (0..d).map(|j| dtheta_v[j]).collect();
    let mut dlambda = vec![0.0; n];
    let mut du = vec![0.0; n];
    let mut dv = vec![0.0; n];
    for i in 0..n {
        let xdth = row_dot(design, i, &dtheta);
        dlambda[i] = (h[i] - xdth) / e[i];
        du[i] = (rc_u[i] + u[i] * dlambda[i]) / s_u[i];
        dv[i] = (rc_v[i] - v[i] * dlambda[i]) / s_v[i];
    }
    Direction {
        dtheta,
        dlambda,
        du,
        dv,
    }
}

/// Cholesky factorization of X'·diag(1/e)·X.
fn factor_normal_matrix(
    design: ArrayView2<'_, f64>,
    e: &[f64],
) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = design.nrows();
    let d = design.ncols();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..n {
        let w = 1.0 / e[i];
        for a in 0..d {
            let xa = design[(i, a)];
            if xa == 0.0 {
                continue;
            }
            for b in a..d {
                m[(a, b)] += w * xa * design[(i, b)];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    nalgebra::Cholesky::new(m)
}

/// Primal and dual step lengths keeping (u, v) and (s_u, s_v) positive.
fn step_lengths(
    u: &[f64],
    v: &[f64],
    s_u: &[f64],
    s_v: &[f64],
    dir: &Direction,
    shrink: f64,
) -> (f64, f64) {
    let mut ap = 1.0f64 / shrink;
    let mut ad = 1.0f64 / shrink;
    for i in 0..u.len() {
        if dir.du[i] < 0.0 {
            ap = ap.min(-u[i] / dir.du[i]);
        }
        if dir.dv[i] < 0.0 {
            ap = ap.min(-v[i] / dir.dv[i]);
        }
        // Δs_u = −Δλ and Δs_v = +Δλ.
        if dir.dlambda[i] > 0.0 {
            ad = ad.min(s_u[i] / dir.dlambda[i]);
        }
        if dir.dlambda[i] < 0.0 {
            ad = ad.min(s_v[i] / -dir.dlambda[i]);
        }
    }
    ((shrink * ap).min(1.0), (shrink * ad).min(1.0))
}

/// Complementarity gap after a hypothetical (ap, ad) step.
fn predicted_gap(
    u: &[f64],
    v: &[f64],
    s_u: &[f64],
    s_v: &[f64],
    dir: &Direction,
    ap: f64,
    ad: f64,
) -> f64 {
    let mut gap = 0.0;
    for i in 0..u.len() {
        let un = u[i] + ap * dir.du[i];
        let vn = v[i] + ap * dir.dv[i];
        let sun = s_u[i] - ad * dir.dlambda[i];
        let svn = s_v[i] + ad * dir.dlambda[i];
        gap += un * sun + vn * svn;
    }
    gap
}

/// Least squares warm start via normal equations; falls back to zero when
/// the Cholesky fails (the IP loop tolerates any interior start).
fn least_squares(design: ArrayView2<'_, f64>, response: &[f64]) -> Vec<f64> {
    let n = design.nrows();
    let d = design.ncols();
    let mut m = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    for i in 0..n {
        for a in 0..d {
            let xa = design[(i, a)];
            rhs[a] += xa * response[i];
            for b in a..d {
                m[(a, b)] += xa * design[(i, b)];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    match nalgebra::Cholesky::new(m) {
        Some(ch) => {
            let sol = ch.solve(&rhs);
            (0..d).map(|j| sol[j]).collect()
        }
        None => vec![0.0; d],
    }
}

fn row_dot(design: ArrayView2<'_, f64>, i: usize, theta: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (j, &th) in theta.iter().enumerate() {
        acc += design[(i, j)] * th;
    }
    acc
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn tail(trace: &[(usize, f64)]) -> Vec<(usize, f64)> {
    trace.iter().rev().take(3).rev().copied().collect()
}

/// Vertex polish: enumerate bases drawn from the smallest-|residual| rows
/// around the interior point iterate, solve each exactly, and return the
/// best basic solution. Ties resolve to the lexicographically largest
/// coefficient vector.
fn polish(
    design: ArrayView2<'_, f64>,
    response: &[f64],
    tau: f64,
    theta_ip: &[f64],
) -> Option<(Vec<f64>, f64)> {
    let n = design.nrows();
    let d = design.ncols();
    let mut order: Vec<usize> = (0..n).collect();
    let residual = |i: usize| (response[i] - row_dot(design, i, theta_ip)).abs();
    order.sort_by(|&a, &b| {
        residual(a)
            .partial_cmp(&residual(b))
            .expect("residuals are finite")
    });
    let pool_len = n.min((2 * d + 4).max(d + 3));
    let pool = &order[..pool_len];
    if binomial(pool_len, d) <= POLISH_BUDGET {
        let mut candidates: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut subset: Vec<usize> = (0..d).collect();
        loop {
            let rows: Vec<usize> = subset.iter().map(|&s| pool[s]).collect();
            if let Some(theta) = solve_basis(design, response, &rows) {
                let obj = objective(design, response, &theta, tau);
                candidates.push((theta, obj));
            }
            if !advance_subset(&mut subset, pool_len, d) {
                break;
            }
        }
        let min_obj = candidates
            .iter()
            .map(|(_, o)| *o)
            .fold(f64::INFINITY, f64::min);
        // Among vertices tied at the minimum, prefer the lexicographically
        // largest coefficient vector (the upper vertex of a flat optimum).
        let window = 1e-9 * (1.0 + min_obj.abs());
        candidates
            .into_iter()
            .filter(|(_, o)| *o <= min_obj + window)
            .reduce(|best, cand| if lex_greater(&cand.0, &best.0) { cand } else { best })
    } else {
        // Too many combinations: greedily assemble one independent basis
        // from the smallest-residual rows and take its exact solution.
        let mut rows: Vec<usize> = Vec::with_capacity(d);
        for &i in &order {
            rows.push(i);
            if !rows_independent(design, &rows) {
                rows.pop();
            }
            if rows.len() == d {
                break;
            }
        }
        let theta = solve_basis(design, response, &rows)?;
        let obj = objective(design, response, &theta, tau);
        Some((theta, obj))
    }
}

/// True when the selected rows of the design are linearly independent.
fn rows_independent(design: ArrayView2<'_, f64>, rows: &[usize]) -> bool {
    let r = rows.len();
    let d = design.ncols();
    if r > d {
        return false;
    }
    // QR of the d×r transpose of the selected rows: full column rank iff
    // every R diagonal is meaningfully nonzero.
    let m = DMatrix::from_fn(d, r, |a, b| design[(rows[b], a)]);
    let qr = m.col_piv_qr();
    let rr = qr.r();
    let lead = rr[(0, 0)].abs();
    if lead == 0.0 {
        return false;
    }
    (0..r).all(|j| rr[(j, j)].abs() > 1e-12 * lead)
}

/// Solves the d×d system picked out by `rows`; `None` when near singular.
fn solve_basis(
    design: ArrayView2<'_, f64>,
    response: &[f64],
    rows: &[usize],
) -> Option<Vec<f64>> {
    let d = design.ncols();
    if rows.len() != d {
        return None;
    }
    let m = DMatrix::from_fn(d, d, |a, b| design[(rows[a], b)]);
    let rhs = DVector::from_fn(d, |a, _| response[rows[a]]);
    let lu = m.full_piv_lu();
    let max_piv = (0..d)
        .map(|j| lu.u()[(j, j)].abs())
        .fold(0.0f64, f64::max);
    let min_piv = (0..d)
        .map(|j| lu.u()[(j, j)].abs())
        .fold(f64::INFINITY, f64::min);
    if !(min_piv > 1e-12 * max_piv.max(1e-300)) {
        return None;
    }
    let sol = lu.solve(&rhs)?;
    Some((0..d).map(|j| sol[j]).collect())
}

/// True when `a` is lexicographically greater than `b` beyond float noise.
fn lex_greater(a: &[f64], b: &[f64]) -> bool {
    for (&x, &y) in a.iter().zip(b) {
        let tol = 1e-12 * (1.0 + x.abs().max(y.abs()));
        if x > y + tol {
            return true;
        }
        if x < y - tol {
            return false;
        }
    }
    false
}

/// Advances `subset` to the next size-d combination of 0..pool_len.
fn advance_subset(subset: &mut [usize], pool_len: usize, d: usize) -> bool {
    let mut i = d;
    while i > 0 {
        i -= 1;
        if subset[i] < pool_len - (d - i) {
            subset[i] += 1;
            for j in i + 1..d {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}
