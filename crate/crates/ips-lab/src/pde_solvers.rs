//! Deterministic solvers for the fixed-point problems: the two-dimensional
//! semilinear matrix flow, the p* boundary-value ODE by shooting, and the
//! semilinear Cauchy equation of the super-Wright-Fisher log-Laplace
//! semigroup.
//!
//! The diffusion coefficients vanish on the relevant boundaries, so no
//! boundary conditions are imposed: boundary nodes evolve by the reaction
//! term plus one-sided (quadratic-extrapolation) second differences.

use crate::error::{Error, Result};
use crate::wf_renorm::CatalyzingFn;

/// Function sampled on the uniform grid over `[0, 1]`.
#[derive(Clone, Debug)]
pub struct GridFn1D {
    pub values: Vec<f64>,
}

impl GridFn1D {
    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Self {
        GridFn1D {
            values: (0..=m).map(|i| f(i as f64 / m as f64)).collect(),
        }
    }

    pub fn constant(m: usize, v: f64) -> Self {
        GridFn1D {
            values: vec![v; m + 1],
        }
    }

    pub fn m(&self) -> usize {
        self.values.len() - 1
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.m() as f64
    }

    pub fn sup_distance(&self, other: &GridFn1D) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn to_catalyzing(&self) -> CatalyzingFn {
        CatalyzingFn::from_values(self.values.iter().map(|&v| v.max(0.0)).collect())
    }

    pub fn from_catalyzing(p: &CatalyzingFn) -> Self {
        GridFn1D {
            values: p.values().to_vec(),
        }
    }
}

/// Symmetric nonnegative-definite 2x2 matrix field on the unit square,
/// `(m+1)^2` nodes in row-major order (index `i1 * (m+1) + i2`).
#[derive(Clone, Debug)]
pub struct DiffMatrixField {
    pub m: usize,
    pub w11: Vec<f64>,
    pub w12: Vec<f64>,
    pub w22: Vec<f64>,
}

impl DiffMatrixField {
    pub fn from_fns(
        m: usize,
        f11: impl Fn(f64, f64) -> f64,
        f12: impl Fn(f64, f64) -> f64,
        f22: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let n = (m + 1) * (m + 1);
        let mut w11 = Vec::with_capacity(n);
        let mut w12 = Vec::with_capacity(n);
        let mut w22 = Vec::with_capacity(n);
        for i1 in 0..=m {
            let x1 = i1 as f64 / m as f64;
            for i2 in 0..=m {
                let x2 = i2 as f64 / m as f64;
                w11.push(f11(x1, x2));
                w12.push(f12(x1, x2));
                w22.push(f22(x1, x2));
            }
        }
        DiffMatrixField { m, w11, w12, w22 }
    }

    /// Standard uncoupled Wright-Fisher fixed point
    /// `diag(x1(1-x1), x2(1-x2))`.
    pub fn wright_fisher_pair(m: usize) -> Self {
        DiffMatrixField::from_fns(
            m,
            |x1, _| x1 * (1.0 - x1),
            |_, _| 0.0,
            |_, x2| x2 * (1.0 - x2),
        )
    }

    /// Catalytic matrix `diag(alpha x1(1-x1), p(x1) x2(1-x2))`.
    pub fn catalytic(m: usize, alpha: f64, p: &CatalyzingFn) -> Self {
        DiffMatrixField::from_fns(
            m,
            move |x1, _| alpha * x1 * (1.0 - x1),
            |_, _| 0.0,
            move |x1, x2| p.eval(x1) * x2 * (1.0 - x2),
        )
    }

    pub fn idx(&self, i1: usize, i2: usize) -> usize {
        i1 * (self.m + 1) + i2
    }

    pub fn sup_distance(&self, other: &DiffMatrixField) -> f64 {
        let d = |a: &[f64], b: &[f64]| -> f64 {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        d(&self.w11, &other.w11)
            .max(d(&self.w12, &other.w12))
            .max(d(&self.w22, &other.w22))
    }

    pub fn max_entry(&self) -> f64 {
        self.w11
            .iter()
            .chain(&self.w12)
            .chain(&self.w22)
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    fn max_spectral_radius(&self) -> f64 {
        let mut rho: f64 = 0.0;
        for i in 0..self.w11.len() {
            let (a, b, c) = (self.w11[i], self.w12[i], self.w22[i]);
            let mean = 0.5 * (a + c);
            let disc = (0.5 * (a - c)).powi(2) + b * b;
            rho = rho.max(mean.abs() + disc.sqrt());
        }
        rho
    }

    /// Clips negative eigenvalues to zero at every node; returns the largest
    /// clip magnitude.
    fn project_nonnegative(&mut self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.w11.len() {
            let (a, b, c) = (self.w11[i], self.w12[i], self.w22[i]);
            let mean = 0.5 * (a + c);
            let disc = ((0.5 * (a - c)).powi(2) + b * b).sqrt();
            let lo = mean - disc;
            if lo < 0.0 {
                worst = worst.max(-lo);
                let hi = (mean + disc).max(0.0);
                // eigenvector for the positive eigenvalue
                let (vx, vy) = if b.abs() > 1e-300 {
                    (b, hi - a)
                } else if a >= c {
                    (1.0, 0.0)
                } else {
                    (0.0, 1.0)
                };
                let norm = (vx * vx + vy * vy).sqrt();
                if norm > 0.0 {
                    let (ux, uy) = (vx / norm, vy / norm);
                    self.w11[i] = hi * ux * ux;
                    self.w12[i] = hi * ux * uy;
                    self.w22[i] = hi * uy * uy;
                } else {
                    self.w11[i] = 0.0;
                    self.w12[i] = 0.0;
                    self.w22[i] = 0.0;
                }
            }
        }
        worst
    }
}

/// First derivative along one axis with quadratic one-sided stencils at the
/// edges; `get(k)` indexes along the axis.
#[inline]
fn d1(get: impl Fn(usize) -> f64, k: usize, m: usize, h: f64) -> f64 {
    if k == 0 {
        (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h)
    } else if k == m {
        (3.0 * get(m) - 4.0 * get(m - 1) + get(m - 2)) / (2.0 * h)
    } else {
        (get(k + 1) - get(k - 1)) / (2.0 * h)
    }
}

/// Second derivative along one axis; at the edges the ghost value comes from
/// quadratic extrapolation, which collapses to the shifted 3-point stencil.
#[inline]
fn d2(get: impl Fn(usize) -> f64, k: usize, m: usize, h: f64) -> f64 {
    let hh = h * h;
    if k == 0 {
        (get(0) - 2.0 * get(1) + get(2)) / hh
    } else if k == m {
        (get(m) - 2.0 * get(m - 1) + get(m - 2)) / hh
    } else {
        (get(k + 1) - 2.0 * get(k) + get(k - 1)) / hh
    }
}

/// Discrete generator `(1/2) sum_ij w_ij d_i d_j f + f` applied to one
/// component field.
fn flow_operator(w: &DiffMatrixField, comp: &[f64], out: &mut [f64]) {
    let m = w.m;
    let h = 1.0 / m as f64;
    for i1 in 0..=m {
        for i2 in 0..=m {
            let id = w.idx(i1, i2);
            let f11 = d2(|k| comp[w.idx(k, i2)], i1, m, h);
            let f22 = d2(|k| comp[w.idx(i1, k)], i2, m, h);
            // mixed derivative: d/dx2 of d/dx1
            let f12 = d1(|k2| d1(|k1| comp[w.idx(k1, k2)], i1, m, h), i2, m, h);
            out[id] = 0.5 * (w.w11[id] * f11 + 2.0 * w.w12[id] * f12 + w.w22[id] * f22)
                + comp[id];
        }
    }
}

pub struct FlowResult {
    pub field: DiffMatrixField,
    /// Largest projection clip applied in any single step.
    pub max_clip: f64,
    /// Sup-norm change over the final unit of time.
    pub last_unit_change: f64,
    pub steps: usize,
}

/// Explicit Euler integration of the matrix flow
/// `dw/dt = (1/2) sum w_ij d_i d_j w + w`, with the time step adapted to
/// `h^2 / (4 max spectral radius)` and nonnegative-definite projection after
/// every step. Aborts when entries exceed 1e3.
pub fn flow_solve(w0: &DiffMatrixField, t_end: f64) -> Result<FlowResult> {
    let m = w0.m;
    let h = 1.0 / m as f64;
    let mut w = w0.clone();
    let n = (m + 1) * (m + 1);
    let mut rhs11 = vec![0.0; n];
    let mut rhs12 = vec![0.0; n];
    let mut rhs22 = vec![0.0; n];
    let mut c11 = vec![0.0; n];
    let mut c12 = vec![0.0; n];
    let mut c22 = vec![0.0; n];
    let mut t = 0.0;
    let mut max_clip: f64 = 0.0;
    let mut steps = 0usize;
    let mut unit_ref = w.clone();
    let mut unit_mark = 0.0f64;
    let mut last_unit_change = f64::INFINITY;
    while t < t_end {
        let rho = w.max_spectral_radius().max(1e-9);
        let dt = (h * h / (4.0 * rho)).min(t_end - t).min(0.05);
        c11.copy_from_slice(&w.w11);
        c12.copy_from_slice(&w.w12);
        c22.copy_from_slice(&w.w22);
        flow_operator(&w, &c11, &mut rhs11);
        flow_operator(&w, &c12, &mut rhs12);
        flow_operator(&w, &c22, &mut rhs22);
        for i in 0..n {
            w.w11[i] += dt * rhs11[i];
            w.w12[i] += dt * rhs12[i];
            w.w22[i] += dt * rhs22[i];
        }
        max_clip = max_clip.max(w.project_nonnegative());
        t += dt;
        steps += 1;
        if w.max_entry() > 1e3 {
            return Err(Error::invalid(format!(
                "flow blow-up at t = {t}: entries exceed 1e3"
            )));
        }
        if t - unit_mark >= 1.0 {
            last_unit_change = w.sup_distance(&unit_ref);
            unit_ref = w.clone();
            unit_mark = t;
        }
    }
    Ok(FlowResult {
        field: w,
        max_clip,
        last_unit_change,
        steps,
    })
}

/// Max over interior nodes of the discrete asymptotic fixed-point residual
/// `(1/2) sum w_ij d_i d_j w + w`, over all three components.
pub fn flow_residual(w: &DiffMatrixField) -> f64 {
    let m = w.m;
    let n = (m + 1) * (m + 1);
    let mut r11 = vec![0.0; n];
    let mut r12 = vec![0.0; n];
    let mut r22 = vec![0.0; n];
    flow_operator(w, &w.w11, &mut r11);
    flow_operator(w, &w.w12, &mut r12);
    flow_operator(w, &w.w22, &mut r22);
    let mut worst: f64 = 0.0;
    for i1 in 1..m {
        for i2 in 1..m {
            let id = w.idx(i1, i2);
            worst = worst
                .max(r11[id].abs())
                .max(r12[id].abs())
                .max(r22[id].abs());
        }
    }
    worst
}

pub struct PStarSolution {
    pub grid: GridFn1D,
    /// Shooting slope at the left boundary (class-dependent orientation).
    pub slope: f64,
    /// Max of the ODE residual over the fine interior grid.
    pub residual: f64,
    /// Deviation from the boundary relation `p''(0) + 2 alpha p'(0) = 0`,
    /// extrapolated to the boundary.
    pub boundary_gap: f64,
}

const SHOOT_EPS: f64 = 1e-4;
const SHOOT_DX: f64 = 1e-4;

/// Integrates `p'' = -2 alpha p (1 - p) / (x (1 - x))` from the series start
/// `p(eps) = s eps - alpha s eps^2` and returns the extrapolated value at
/// `x = 1`, with +-1 sentinels for overshoot (p > 1) and undershoot
/// (p' < 0 while p < 1 for the increasing class, p < 0 for the hump class).
fn shoot(alpha: f64, s: f64, increasing_target: bool) -> (f64, Vec<f64>) {
    let mut x = SHOOT_EPS;
    let mut p = s * SHOOT_EPS - alpha * s * SHOOT_EPS * SHOOT_EPS;
    let mut q = s - 2.0 * alpha * s * SHOOT_EPS;
    let f = |x: f64, p: f64| -> f64 {
        let denom = (x * (1.0 - x)).max(1e-300);
        -2.0 * alpha * p * (1.0 - p) / denom
    };
    let mut trace = Vec::with_capacity(((1.0 - 2.0 * SHOOT_EPS) / SHOOT_DX) as usize + 2);
    trace.push(p);
    while x < 1.0 - SHOOT_EPS - 0.5 * SHOOT_DX {
        let h = SHOOT_DX;
        let k1p = q;
        let k1q = f(x, p);
        let k2p = q + 0.5 * h * k1q;
        let k2q = f(x + 0.5 * h, p + 0.5 * h * k1p);
        let k3p = q + 0.5 * h * k2q;
        let k3q = f(x + 0.5 * h, p + 0.5 * h * k2p);
        let k4p = q + h * k3q;
        let k4q = f(x + h, p + h * k3p);
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        x += h;
        trace.push(p);
        if p > 1.0 + 1e-9 {
            return (1.0, trace); // overshoot sentinel
        }
        if increasing_target {
            if q < 0.0 && p < 1.0 - 1e-9 {
                return (-1.0, trace); // turned around before reaching 1
            }
        } else if p < -1e-12 {
            return (-1.0, trace); // crossed zero before x = 1
        }
    }
    let value_at_one = p + q * SHOOT_EPS;
    let target = if increasing_target {
        value_at_one - 1.0
    } else {
        // symmetric hump: aim for p(1) = 0 approached from above
        value_at_one
    };
    (target.clamp(-1.0, 1.0), trace)
}

/// Fixed points of the semilinear equation
/// `x(1-x) p''/2 + alpha p (1 - p) = 0` with boundary class `(l, r)`,
/// solved by bisection on the shooting slope. The result is sampled on a
/// 41-point grid.
pub fn pstar_shoot(alpha: f64, class: (u8, u8)) -> Result<PStarSolution> {
    if alpha <= 0.0 {
        return Err(Error::invalid("alpha must be positive"));
    }
    let m = 40;
    match class {
        (1, 1) => Ok(PStarSolution {
            grid: GridFn1D::constant(m, 1.0),
            slope: 0.0,
            residual: 0.0,
            boundary_gap: 0.0,
        }),
        (0, 0) if alpha <= 1.0 => Ok(PStarSolution {
            grid: GridFn1D::constant(m, 0.0),
            slope: 0.0,
            residual: 0.0,
            boundary_gap: 0.0,
        }),
        (0, 1) | (0, 0) => shoot_class(alpha, class.1 == 1, false),
        (1, 0) => {
            // mirror of (0, 1)
            let sol = shoot_class(alpha, true, true)?;
            Ok(sol)
        }
        _ => Err(Error::invalid("boundary class entries must be 0 or 1")),
    }
}

fn shoot_class(alpha: f64, increasing: bool, mirrored: bool) -> Result<PStarSolution> {
    let (mut lo, mut hi) = (1e-3, 50.0);
    let eval = |s: f64| shoot(alpha, s, increasing).0;
    let (glo, ghi) = (eval(lo), eval(hi));
    if !(glo < 0.0 && ghi > 0.0) {
        return Err(Error::BracketFailure(format!(
            "shooting bracket [{lo}, {hi}] gives target values ({glo}, {ghi})"
        )));
    }
    // spot-check monotonicity of the endpoint value across the bracket
    let mut prev = glo;
    for k in 1..=8 {
        let s = lo * (hi / lo).powf(k as f64 / 9.0);
        let g = eval(s);
        if g < prev - 1e-6 {
            return Err(Error::BracketFailure(format!(
                "endpoint value not monotone in the slope near s = {s}"
            )));
        }
        prev = g;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    let (_, trace) = shoot(alpha, s, increasing);
    // sample onto the 41-point grid; endpoints from the boundary class
    let m = 40;
    let fine_at = |x: f64| -> f64 {
        if x <= SHOOT_EPS {
            return s * x;
        }
        let pos = (x - SHOOT_EPS) / SHOOT_DX;
        let i = (pos.floor() as usize).min(trace.len() - 2);
        let frac = pos - i as f64;
        (trace[i] * (1.0 - frac) + trace[i + 1] * frac).clamp(0.0, 1.0)
    };
    let mut values: Vec<f64> = (0..=m)
        .map(|i| {
            let x = i as f64 / m as f64;
            if mirrored {
                fine_at(1.0 - x)
            } else {
                fine_at(x)
            }
        })
        .collect();
    values[0] = if mirrored {
        if increasing {
            1.0
        } else {
            0.0
        }
    } else {
        0.0
    };
    let last = values.len() - 1;
    values[last] = if mirrored {
        0.0
    } else if increasing {
        1.0
    } else {
        0.0
    };
    // residual of the fine trace via centered second differences
    let mut residual: f64 = 0.0;
    let start = (0.01 / SHOOT_DX) as usize;
    let end = trace.len().saturating_sub(start.max(2));
    for i in start.max(1)..end.min(trace.len() - 1) {
        let x = SHOOT_EPS + i as f64 * SHOOT_DX;
        let pdd = (trace[i - 1] - 2.0 * trace[i] + trace[i + 1]) / (SHOOT_DX * SHOOT_DX);
        let r = 0.5 * x * (1.0 - x) * pdd + alpha * trace[i] * (1.0 - trace[i]);
        residual = residual.max(r.abs());
    }
    // boundary relation p''(0) = -2 alpha p'(0), extrapolated from small x
    let gap_at = |x: f64| -> f64 {
        let i = ((x - SHOOT_EPS) / SHOOT_DX) as usize;
        let p = trace[i];
        let dp = (trace[i + 1] - trace[i - 1]) / (2.0 * SHOOT_DX);
        let pdd = -2.0 * alpha * p * (1.0 - p) / (x * (1.0 - x));
        pdd + 2.0 * alpha * dp
    };
    let boundary_gap = (2.0 * gap_at(0.005) - gap_at(0.01)).abs();
    Ok(PStarSolution {
        grid: GridFn1D { values },
        slope: s,
        residual,
        boundary_gap,
    })
}

pub struct CauchyResult {
    pub final_state: GridFn1D,
    pub snapshots: Vec<(f64, GridFn1D)>,
    pub steps: usize,
}

/// Method-of-lines solution of `du/dt = x(1-x) u''/2 + alpha u (1-u)`. The
/// diffusion coefficient vanishes at the endpoints, which therefore evolve
/// by the reaction alone. The explicit Euler step obeys the monotonicity
/// restriction `dt (2 c_max / h^2 + 2 alpha max(1, |u|)) <= 0.9`, so
/// comparison of ordered initial data is exact.
pub fn cauchy_solve(
    f: &GridFn1D,
    alpha: f64,
    t_end: f64,
    snapshot_times: &[f64],
) -> Result<CauchyResult> {
    if f.values.iter().any(|&v| v < 0.0) {
        return Err(Error::invalid("initial data must be nonnegative"));
    }
    if alpha <= 0.0 {
        return Err(Error::invalid("alpha must be positive"));
    }
    let m = f.m();
    let h = 1.0 / m as f64;
    let coeffs: Vec<f64> = (0..=m)
        .map(|i| {
            let x = i as f64 / m as f64;
            0.5 * x * (1.0 - x)
        })
        .collect();
    let cmax = 0.125;
    let guard = 10.0 * f.sup_norm().max(1.0);
    let mut u = f.values.clone();
    let mut next = vec![0.0; m + 1];
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut snaps: Vec<(f64, GridFn1D)> = Vec::new();
    let mut snap_iter = snapshot_times.iter().peekable();
    loop {
        while let Some(&&ts) = snap_iter.peek() {
            if t >= ts - 1e-12 {
                snaps.push((ts, GridFn1D { values: u.clone() }));
                snap_iter.next();
            } else {
                break;
            }
        }
        if t >= t_end {
            break;
        }
        let umax = u.iter().cloned().fold(0.0f64, f64::max).max(1.0);
        let dt = (0.9 / (2.0 * cmax / (h * h) + 2.0 * alpha * umax)).min(t_end - t);
        for i in 0..=m {
            let diff = if i == 0 || i == m {
                0.0
            } else {
                coeffs[i] * (u[i - 1] - 2.0 * u[i] + u[i + 1]) / (h * h)
            };
            next[i] = u[i] + dt * (diff + alpha * u[i] * (1.0 - u[i]));
        }
        std::mem::swap(&mut u, &mut next);
        t += dt;
        steps += 1;
        if u.iter().any(|&v| v > guard || !v.is_finite()) {
            return Err(Error::invalid(format!("cauchy solution left guard at t = {t}")));
        }
    }
    Ok(CauchyResult {
        final_state: GridFn1D { values: u },
        snapshots: snaps,
        steps,
    })
}

pub struct GammaZeroBridge {
    pub iterated: GridFn1D,
    pub cauchy: GridFn1D,
    pub sup_difference: f64,
}

/// Compares `n` iterations of the Monte-Carlo operator at a small `gamma`
/// against the Cauchy flow at `t = n gamma` (the small-gamma limit of the
/// renormalization iteration), on the shared grid.
pub fn gamma_zero_limit_check(
    p0: &CatalyzingFn,
    gamma_small: f64,
    n: usize,
    mc: usize,
    seed: u64,
) -> Result<GammaZeroBridge> {
    let gammas = vec![gamma_small; n];
    let estimator = if p0.values().iter().all(|&v| v <= 1.0) {
        crate::wf_renorm::UEstimator::Product
    } else {
        crate::wf_renorm::UEstimator::LogLaplace
    };
    let iterates = crate::wf_renorm::iterate_renorm(p0, &gammas, mc, estimator, seed)?;
    let iterated = GridFn1D::from_catalyzing(&iterates.last().unwrap().p);
    let t_star = gamma_small * n as f64;
    let cauchy = cauchy_solve(&GridFn1D::from_catalyzing(p0), 1.0, t_star, &[])?.final_state;
    let sup_difference = iterated.sup_distance(&cauchy);
    Ok(GammaZeroBridge {
        iterated,
        cauchy,
        sup_difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case1_fixed_point_is_discretely_stationary() {
        // second differences of quadratics are exact, so the residual
        // vanishes up to rounding and the flow does not move
        let w = DiffMatrixField::wright_fisher_pair(20);
        assert!(flow_residual(&w) < 1e-10);
        let out = flow_solve(&w, 2.0).unwrap();
        assert!(out.field.sup_distance(&w) < 1e-9, "moved {}", out.field.sup_distance(&w));
    }

    #[test]
    fn zero_field_residual() {
        let w = DiffMatrixField::from_fns(10, |_, _| 0.0, |_, _| 0.0, |_, _| 0.0);
        assert!(flow_residual(&w) == 0.0);
    }

    #[test]
    fn flow_converges_to_case1_from_scaled_start() {
        let w0 = DiffMatrixField::from_fns(
            20,
            |x1, _| 2.0 * x1 * (1.0 - x1),
            |_, _| 0.0,
            |_, x2| 0.5 * x2 * (1.0 - x2),
        );
        let out = flow_solve(&w0, 15.0).unwrap();
        let target = DiffMatrixField::wright_fisher_pair(20);
        assert!(
            out.field.sup_distance(&target) < 1e-2,
            "distance {}",
            out.field.sup_distance(&target)
        );
        assert!(out.max_clip < 1e-6, "clip {}", out.max_clip);
    }

    #[test]
    fn pstar_class_11_and_00_degenerate() {
        let sol = pstar_shoot(1.0, (1, 1)).unwrap();
        assert!(sol.grid.values.iter().all(|&v| v == 1.0));
        let sol = pstar_shoot(0.5, (0, 0)).unwrap();
        assert!(sol.grid.values.iter().all(|&v| v == 0.0));
        let sol = pstar_shoot(1.0, (0, 0)).unwrap();
        assert!(sol.grid.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pstar_class_01_shape() {
        for &alpha in &[1.0, 2.0] {
            let sol = pstar_shoot(alpha, (0, 1)).unwrap();
            let v = &sol.grid.values;
            assert_eq!(v.len(), 41);
            assert_eq!(v[0], 0.0);
            assert_eq!(v[40], 1.0);
            // nondecreasing and concave on the grid
            for w in v.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "not monotone: {w:?}");
            }
            for w in v.windows(3) {
                assert!(w[2] - 2.0 * w[1] + w[0] < 1e-4, "not concave: {w:?}");
            }
            assert!(sol.residual < 1e-6, "alpha={alpha} residual {}", sol.residual);
            assert!(
                sol.boundary_gap < 1e-3,
                "alpha={alpha} boundary gap {}",
                sol.boundary_gap
            );
        }
    }

    #[test]
    fn pstar_class_00_supercritical_hump() {
        let sol = pstar_shoot(2.0, (0, 0)).unwrap();
        let v = &sol.grid.values;
        assert!(v.iter().cloned().fold(0.0f64, f64::max) > 0.05);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[40], 0.0);
        // symmetric about 1/2 within solver tolerance
        for i in 0..=40 {
            assert!((v[i] - v[40 - i]).abs() < 1e-3, "asymmetry at {i}");
        }
        assert!(sol.residual < 1e-6);
    }

    #[test]
    fn pstar_class_10_is_mirror() {
        let a = pstar_shoot(2.0, (0, 1)).unwrap();
        let b = pstar_shoot(2.0, (1, 0)).unwrap();
        for i in 0..=40 {
            assert!((a.grid.values[i] - b.grid.values[40 - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn cauchy_zero_stays_zero() {
        let f = GridFn1D::constant(40, 0.0);
        let out = cauchy_solve(&f, 1.0, 3.0, &[]).unwrap();
        assert!(out.final_state.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cauchy_pstar_is_stationary() {
        let p = pstar_shoot(1.0, (0, 1)).unwrap();
        let out = cauchy_solve(&p.grid, 1.0, 5.0, &[]).unwrap();
        let d = out.final_state.sup_distance(&p.grid);
        assert!(d < 1e-3, "moved {d}");
    }

    #[test]
    fn cauchy_comparison_principle_exact() {
        let f = GridFn1D::from_fn(40, |x| 0.3 * x);
        let g = GridFn1D::from_fn(40, |x| x);
        let uf = cauchy_solve(&f, 2.0, 1.5, &[0.5, 1.0]).unwrap();
        let ug = cauchy_solve(&g, 2.0, 1.5, &[0.5, 1.0]).unwrap();
        for (a, b) in uf
            .final_state
            .values
            .iter()
            .zip(&ug.final_state.values)
        {
            assert!(a <= b);
        }
        for ((_, sf), (_, sg)) in uf.snapshots.iter().zip(&ug.snapshots) {
            for (a, b) in sf.values.iter().zip(&sg.values) {
                assert!(a <= b);
            }
        }
    }

    #[test]
    fn cauchy_uniform_bound_from_huge_data() {
        // u_t <= beta / (alpha (1 - e^(-beta t))) for constant-rate
        // comparison; for alpha = 1 the barrier is 1 / (1 - e^(-t))
        let f = GridFn1D::constant(40, 1e6);
        for &t in &[0.5, 1.0, 2.0] {
            let out = cauchy_solve(&f, 1.0, t, &[]).unwrap();
            let barrier = 1.0 / (1.0 - (-t).exp()) + 1e-2;
            assert!(
                out.final_state.sup_norm() <= barrier,
                "t={t}: {} > {barrier}",
                out.final_state.sup_norm()
            );
        }
    }

    #[test]
    fn cauchy_grid_refinement_stable() {
        // halving h changes the reported limit by well under the acceptance
        // tolerance
        let run = |m: usize| -> GridFn1D {
            let f = GridFn1D::from_fn(m, |x| x * x);
            cauchy_solve(&f, 2.0, 20.0, &[]).unwrap().final_state
        };
        let coarse = run(40);
        let fine = run(80);
        let mut worst: f64 = 0.0;
        for i in 0..=40 {
            worst = worst.max((coarse.values[i] - fine.values[2 * i]).abs());
        }
        assert!(worst < 3e-3, "refinement shift {worst}");
    }
}
