//! Wright-Fisher diffusion machinery and Monte-Carlo renormalization.
//!
//! The rescaled renormalization transformation acting on catalyzing
//! functions is realized as a log-Laplace operator of stationary
//! Wright-Fisher path functionals. Two independent estimators are provided:
//! the exponential path-integral form and a product form over an embedded
//! Poisson sampling of the path. The stationary path at negative times is
//! simulated forward, which is justified by stationarity plus reversibility
//! of the one-dimensional equilibrium; both the constant-function closed
//! form and the cross-estimator agreement guard that choice.

use crate::error::{Error, Result};
use crate::rngutil::{exp_mean, stream_rng};
use crate::stats::{batch_means, mean_se, Estimate};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

/// Nonnegative function on `[0, 1]` sampled on a uniform grid, evaluated
/// between nodes by linear interpolation.
#[derive(Clone, Debug)]
pub struct CatalyzingFn {
    values: Vec<f64>,
}

impl CatalyzingFn {
    pub fn from_values(values: Vec<f64>) -> Self {
        assert!(values.len() >= 2);
        assert!(values.iter().all(|&v| v >= 0.0));
        CatalyzingFn { values }
    }

    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..=m)
            .map(|i| f(i as f64 / m as f64).max(0.0))
            .collect();
        CatalyzingFn { values }
    }

    pub fn constant(m: usize, r: f64) -> Self {
        CatalyzingFn::from_values(vec![r; m + 1])
    }

    /// h_00(x) = x(1-x)
    pub fn h00(m: usize) -> Self {
        CatalyzingFn::from_fn(m, |x| x * (1.0 - x))
    }

    /// h_01(x) = 1 - (1-x)^7
    pub fn h01(m: usize) -> Self {
        CatalyzingFn::from_fn(m, |x| 1.0 - (1.0 - x).powi(7))
    }

    /// h_1(x) = x
    pub fn h1(m: usize) -> Self {
        CatalyzingFn::from_fn(m, |x| x)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid_len(&self) -> usize {
        self.values.len()
    }

    pub fn grid_x(&self, i: usize) -> f64 {
        i as f64 / (self.values.len() - 1) as f64
    }

    /// Class tag `(1{p(0) > 0}, 1{p(1) > 0})`.
    pub fn class_tag(&self) -> (bool, bool) {
        (
            self.values[0] > 0.0,
            *self.values.last().unwrap() > 0.0,
        )
    }

    pub fn eval(&self, x: f64) -> f64 {
        let m = self.values.len() - 1;
        let t = x.clamp(0.0, 1.0) * m as f64;
        let i = (t.floor() as usize).min(m - 1);
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    pub fn sup_distance(&self, other: &CatalyzingFn) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Migration constants with the derived rescaling sequence
/// `s_n = sum_{k<n} 1/c_k`, `sbar_n = beta + s_n`, `gamma_n = 1/(sbar_n c_n)`.
pub struct GammaSchedule {
    pub c: Vec<f64>,
    pub beta: f64,
}

impl GammaSchedule {
    pub fn new(c: Vec<f64>, beta: f64) -> Result<Self> {
        if beta <= 0.0 || c.iter().any(|&x| x <= 0.0) {
            return Err(Error::invalid("schedule needs beta > 0 and c_k > 0"));
        }
        Ok(GammaSchedule { c, beta })
    }

    /// Geometric schedule `c_k = (1 + gamma_star)^(-k)`; with `beta = 1` the
    /// derived gammas are identically `gamma_star`.
    pub fn geometric(gamma_star: f64, beta: f64, n: usize) -> Result<Self> {
        if gamma_star <= 0.0 {
            return Err(Error::invalid("gamma_star must be positive"));
        }
        let c = (0..n)
            .map(|k| (1.0 + gamma_star).powi(-(k as i32)))
            .collect();
        GammaSchedule::new(c, beta)
    }

    pub fn gammas(&self) -> Vec<f64> {
        let mut s = 0.0;
        let mut out = Vec::with_capacity(self.c.len());
        for &ck in &self.c {
            out.push(1.0 / ((self.beta + s) * ck));
            s += 1.0 / ck;
        }
        out
    }
}

/// Draw from the stationary law of the drifted Wright-Fisher diffusion
/// `dy = (1/gamma)(x - y) dt + sqrt(2 y (1-y)) dB`: a Beta(x/gamma,
/// (1-x)/gamma) variable, degenerating to the point mass at `x` on the
/// boundary.
pub fn beta_stationary_sample(x: f64, gamma: f64, rng: &mut impl Rng) -> f64 {
    assert!((0.0..=1.0).contains(&x) && gamma > 0.0);
    if x <= 0.0 || x >= 1.0 {
        return x;
    }
    Beta::new(x / gamma, (1.0 - x) / gamma)
        .expect("valid beta shapes")
        .sample(rng)
}

/// Exact n-th moment of the stationary law:
/// `prod_{k=0}^{n-1} (x + k gamma) / (1 + k gamma)`.
pub fn beta_moment(x: f64, gamma: f64, n: u32) -> f64 {
    (0..n)
        .map(|k| (x + k as f64 * gamma) / (1.0 + k as f64 * gamma))
        .product()
}

/// Moment of `y(1-y)` under the size-biased transition kernel
/// `K(x, dy) ~ y(1-y) Gamma^gamma_x(dy)`:
/// `(x(1-x) + gamma(1+gamma)) / ((1+2 gamma)(1+3 gamma))`.
pub fn kyy_moment(x: f64, gamma: f64) -> f64 {
    (x * (1.0 - x) + gamma * (1.0 + gamma)) / ((1.0 + 2.0 * gamma) * (1.0 + 3.0 * gamma))
}

/// Rejection sampler for the size-biased kernel at interior `x`.
pub fn size_biased_stationary_sample(x: f64, gamma: f64, rng: &mut impl Rng) -> f64 {
    assert!(x > 0.0 && x < 1.0);
    loop {
        let y = beta_stationary_sample(x, gamma, rng);
        if rng.random::<f64>() < 4.0 * y * (1.0 - y) {
            return y;
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct WfPathParams {
    /// Drift strength `1/gamma` toward the attraction point.
    pub gamma: f64,
    /// Attraction point in `[0, 1]`.
    pub x: f64,
    pub dt: f64,
    /// Distance to a trap below which a driftless path counts as absorbed.
    pub absorb_tol: f64,
}

impl WfPathParams {
    pub fn new(x: f64, gamma: f64) -> Self {
        WfPathParams {
            gamma,
            x,
            dt: (gamma / 200.0).min(1e-3),
            absorb_tol: 1e-12,
        }
    }
}

#[inline]
fn wf_step(y: f64, x: f64, gamma: f64, dt: f64, rng: &mut impl Rng) -> f64 {
    let noise: f64 = StandardNormal.sample(rng);
    let drift = (x - y) / gamma;
    let diff = (2.0 * y * (1.0 - y) * dt).max(0.0).sqrt() * noise;
    (y + drift * dt + diff).clamp(0.0, 1.0)
}

/// Stationary path sampled at multiples of `dt` over `[0, duration]`; the
/// initial point is an exact equilibrium draw, so by reversibility the
/// output also represents the path at negative times.
pub fn wf_stationary_path(
    params: &WfPathParams,
    duration: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let steps = (duration / params.dt).ceil() as usize;
    let mut y = beta_stationary_sample(params.x, params.gamma, rng);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y);
    if params.x <= 0.0 || params.x >= 1.0 {
        // boundary attraction points are traps of the equilibrium
        out.resize(steps + 1, y);
        return out;
    }
    for _ in 0..steps {
        y = wf_step(y, params.x, params.gamma, params.dt, rng);
        out.push(y);
    }
    out
}

/// One sample of the log-Laplace integrand at attraction point `x`:
/// `(1/gamma + 1)(1 - exp(-2 int_0^{tau/2} p(y(s)) ds))` with
/// `tau ~ Exp(mean gamma)` and `y` a stationary path.
fn log_laplace_sample(
    p: &CatalyzingFn,
    x: f64,
    gamma: f64,
    dt: f64,
    rng: &mut impl Rng,
) -> f64 {
    let tau = exp_mean(rng, gamma);
    let half = tau / 2.0;
    let mut y = beta_stationary_sample(x, gamma, rng);
    let mut integral = 0.0;
    let mut s = 0.0;
    let interior = x > 0.0 && x < 1.0;
    while s < half {
        let step = dt.min(half - s);
        let y_next = if interior {
            let noise: f64 = StandardNormal.sample(rng);
            let drift = (x - y) / gamma;
            (y + drift * step + (2.0 * y * (1.0 - y) * step).max(0.0).sqrt() * noise)
                .clamp(0.0, 1.0)
        } else {
            y
        };
        integral += 0.5 * (p.eval(y) + p.eval(y_next)) * step;
        y = y_next;
        s += step;
    }
    (1.0 / gamma + 1.0) * (1.0 - (-2.0 * integral).exp())
}

/// Monte-Carlo application of the log-Laplace renormalization operator on
/// the grid; returns the renormalized function and per-point standard
/// errors.
pub fn u_gamma_apply(
    p: &CatalyzingFn,
    gamma: f64,
    mc: usize,
    seed: u64,
) -> (CatalyzingFn, Vec<f64>) {
    assert!(gamma > 0.0 && mc >= 2);
    let dt = (gamma / 200.0).min(1e-3);
    let npoints = p.grid_len();
    let mut values = Vec::with_capacity(npoints);
    let mut ses = Vec::with_capacity(npoints);
    for g in 0..npoints {
        let x = p.grid_x(g);
        let mut rng = stream_rng(seed, g as u64);
        let samples: Vec<f64> = (0..mc)
            .map(|_| log_laplace_sample(p, x, gamma, dt, &mut rng))
            .collect();
        let e = mean_se(&samples);
        values.push(e.value.max(0.0));
        ses.push(e.se);
    }
    (CatalyzingFn::from_values(values), ses)
}

/// One sample of the embedded product estimator at `x`:
/// `1 - prod_{k >= 0: sigma_k < tau} (1 - f(y(sigma_k)))` with `sigma_0 = 0`,
/// increments Exp(mean 1/2) and `tau ~ Exp(mean gamma/2)`.
fn product_sample(f: &CatalyzingFn, x: f64, gamma: f64, dt: f64, rng: &mut impl Rng) -> f64 {
    let tau = exp_mean(rng, gamma / 2.0);
    let mut y = beta_stationary_sample(x, gamma, rng);
    let interior = x > 0.0 && x < 1.0;
    let mut prod = 1.0 - f.eval(y);
    let mut s = 0.0;
    loop {
        let next = s + exp_mean(rng, 0.5);
        if next >= tau {
            break;
        }
        if interior {
            let mut pos = s;
            while pos < next {
                let step = dt.min(next - pos);
                y = wf_step_var(y, x, gamma, step, rng);
                pos += step;
            }
        }
        prod *= 1.0 - f.eval(y);
        s = next;
        if prod == 0.0 {
            break;
        }
    }
    1.0 - prod
}

#[inline]
fn wf_step_var(y: f64, x: f64, gamma: f64, step: f64, rng: &mut impl Rng) -> f64 {
    let noise: f64 = StandardNormal.sample(rng);
    (y + (x - y) / gamma * step + (2.0 * y * (1.0 - y) * step).max(0.0).sqrt() * noise)
        .clamp(0.0, 1.0)
}

/// Product-form estimator of the renormalization operator for functions
/// with values in `[0, 1]`; independent of the path-integral route.
pub fn u_gamma_apply_product(
    f: &CatalyzingFn,
    gamma: f64,
    mc: usize,
    seed: u64,
) -> Result<(CatalyzingFn, Vec<f64>)> {
    if f.values().iter().any(|&v| v > 1.0 + 1e-12) {
        return Err(Error::invalid(
            "product estimator needs values in [0, 1]",
        ));
    }
    let dt = (gamma / 200.0).min(1e-3);
    let npoints = f.grid_len();
    let mut values = Vec::with_capacity(npoints);
    let mut ses = Vec::with_capacity(npoints);
    for g in 0..npoints {
        let x = f.grid_x(g);
        let mut rng = stream_rng(seed, g as u64);
        let samples: Vec<f64> = (0..mc)
            .map(|_| product_sample(f, x, gamma, dt, &mut rng))
            .collect();
        let e = mean_se(&samples);
        values.push(e.value.clamp(0.0, 1.0));
        ses.push(e.se);
    }
    Ok((CatalyzingFn::from_values(values), ses))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UEstimator {
    LogLaplace,
    /// Valid for `[0, 1]`-valued functions only; lower variance for small
    /// gamma because it avoids the `(1/gamma + 1)` amplification.
    Product,
}

pub struct RenormIterate {
    pub p: CatalyzingFn,
    pub se: Vec<f64>,
}

/// Iterated renormalization `U_{gamma_{n-1}} o ... o U_{gamma_0} (p0)`,
/// grid to grid.
pub fn iterate_renorm(
    p0: &CatalyzingFn,
    gammas: &[f64],
    mc: usize,
    estimator: UEstimator,
    seed: u64,
) -> Result<Vec<RenormIterate>> {
    let mut current = p0.clone();
    let mut out = Vec::with_capacity(gammas.len());
    for (k, &gamma) in gammas.iter().enumerate() {
        let (next, se) = match estimator {
            UEstimator::LogLaplace => u_gamma_apply(&current, gamma, mc, seed ^ (k as u64) << 32),
            UEstimator::Product => {
                u_gamma_apply_product(&current, gamma, mc, seed ^ (k as u64) << 32)?
            }
        };
        current = next.clone();
        out.push(RenormIterate { p: next, se });
    }
    Ok(out)
}

/// Terminal reservoir count of the ancestral jump chain started from
/// `(phi, psi) = (n, 0)`: coalescence at rate `phi(phi-1)`, migration to the
/// reservoir at rate `phi/gamma`.
pub fn ancestral_chain(n: u32, gamma: f64, rng: &mut impl Rng) -> u32 {
    assert!(gamma > 0.0);
    let mut phi = n;
    let mut psi = 0u32;
    while phi > 0 {
        let p = phi as f64;
        let coal = p * (p - 1.0);
        let res = p / gamma;
        if rng.random::<f64>() * (coal + res) < coal {
            phi -= 1;
        } else {
            phi -= 1;
            psi += 1;
        }
    }
    psi
}

/// Exact mean of the terminal reservoir count:
/// `sum_{i=0}^{m-1} 1/(1 + i gamma)`.
pub fn ancestral_mean(m: u32, gamma: f64) -> f64 {
    (0..m).map(|i| 1.0 / (1.0 + i as f64 * gamma)).sum()
}

pub struct CatalyticEquilibrium {
    /// Time-averaged deviation of each component from its attraction point.
    pub mean_dev: (Estimate, Estimate),
    /// Time average of `alpha y1 (1 - y1)` (the 11-entry of the matrix).
    pub w11: Estimate,
    /// Time average of `p(y1) y2 (1 - y2)` (the 22-entry).
    pub w22: Estimate,
    /// Time average of `y1 (1 - y1)` alone.
    pub y1_var: Estimate,
}

/// Equilibrium sampling of the catalytic two-component SDE
/// `dy1 = c (x1 - y1) dt + sqrt(2 alpha y1 (1-y1)) dB1`,
/// `dy2 = c (x2 - y2) dt + sqrt(2 p(y1) y2 (1-y2)) dB2`,
/// discarding a burn-in and time-averaging the renormalization integrands.
#[allow(clippy::too_many_arguments)]
pub fn catalytic_equilibrium(
    x: (f64, f64),
    c: f64,
    alpha: f64,
    p: &CatalyzingFn,
    dt: f64,
    burn: f64,
    duration: f64,
    rng: &mut impl Rng,
) -> CatalyticEquilibrium {
    assert!(c > 0.0 && alpha > 0.0 && dt > 0.0);
    // start the catalyst from its exact equilibrium (Beta with gamma =
    // alpha/c after time rescaling); the reactant starts at its mean
    let gamma1 = alpha / c;
    let mut y1 = beta_stationary_sample(x.0, gamma1, rng);
    let mut y2 = x.1;
    let burn_steps = (burn / dt).ceil() as usize;
    let steps = (duration / dt).ceil() as usize;
    let mut dev1 = Vec::with_capacity(steps);
    let mut dev2 = Vec::with_capacity(steps);
    let mut w11 = Vec::with_capacity(steps);
    let mut w22 = Vec::with_capacity(steps);
    let mut y1v = Vec::with_capacity(steps);
    for step in 0..burn_steps + steps {
        let n1: f64 = StandardNormal.sample(rng);
        let n2: f64 = StandardNormal.sample(rng);
        let d1 = c * (x.0 - y1) * dt + (2.0 * alpha * y1 * (1.0 - y1) * dt).max(0.0).sqrt() * n1;
        let d2 = c * (x.1 - y2) * dt
            + (2.0 * p.eval(y1) * y2 * (1.0 - y2) * dt).max(0.0).sqrt() * n2;
        y1 = (y1 + d1).clamp(0.0, 1.0);
        y2 = (y2 + d2).clamp(0.0, 1.0);
        if step >= burn_steps {
            dev1.push(y1 - x.0);
            dev2.push(y2 - x.1);
            w11.push(alpha * y1 * (1.0 - y1));
            w22.push(p.eval(y1) * y2 * (1.0 - y2));
            y1v.push(y1 * (1.0 - y1));
        }
    }
    let nb = 40;
    CatalyticEquilibrium {
        mean_dev: (batch_means(&dev1, nb), batch_means(&dev2, nb)),
        w11: batch_means(&w11, nb),
        w22: batch_means(&w22, nb),
        y1_var: batch_means(&y1v, nb),
    }
}

/// Survival-type probability `P[Y_T((0, 1]) > 0]` for binary splitting
/// Wright-Fisher diffusions (motion generator `x(1-x)/2 d^2/dx^2`, splitting
/// rate `alpha`). Particles absorbed at 1 decide the event immediately;
/// particles absorbed at 0 are discarded.
pub fn binsplit_survival(
    alpha: f64,
    x0: f64,
    t_end: f64,
    dt: f64,
    reps: usize,
    guard: usize,
    seed: u64,
) -> Result<Estimate> {
    assert!(alpha > 0.0 && (0.0..=1.0).contains(&x0));
    let tol = 1e-12;
    let mut hits = Vec::with_capacity(reps);
    for r in 0..reps {
        let mut rng = stream_rng(seed, r as u64);
        let mut particles = vec![x0];
        let mut survived = x0 >= 1.0 - tol;
        let mut t = 0.0;
        while !survived && !particles.is_empty() && t < t_end {
            t += dt;
            let mut next = Vec::with_capacity(particles.len() + 1);
            for &p in &particles {
                let noise: f64 = StandardNormal.sample(&mut rng);
                let y = (p + (p * (1.0 - p) * dt).max(0.0).sqrt() * noise).clamp(0.0, 1.0);
                if y >= 1.0 - tol {
                    survived = true;
                    break;
                }
                if y <= tol {
                    continue;
                }
                next.push(y);
                if rng.random::<f64>() < alpha * dt {
                    next.push(y);
                }
            }
            if survived {
                break;
            }
            particles = next;
            if particles.len() > guard {
                return Err(Error::PopulationGuard(format!(
                    "binary splitting population exceeded {guard}"
                )));
            }
        }
        hits.push(if survived || !particles.is_empty() {
            1.0
        } else {
            0.0
        });
    }
    Ok(mean_se(&hits))
}

/// Absorption check for the driftless Wright-Fisher diffusion: estimates
/// `P[y_t > 0]` from `y_0 = x` (upper bound `(4/t + 2) x`).
pub fn driftless_wf_positive_prob(
    x: f64,
    t: f64,
    dt: f64,
    reps: usize,
    seed: u64,
) -> Estimate {
    let tol = 1e-12;
    let mut hits = Vec::with_capacity(reps);
    for r in 0..reps {
        let mut rng = stream_rng(seed, r as u64);
        let mut y = x;
        let steps = (t / dt).ceil() as usize;
        for _ in 0..steps {
            if y <= tol || y >= 1.0 - tol {
                break;
            }
            let noise: f64 = StandardNormal.sample(&mut rng);
            y = (y + (y * (1.0 - y) * dt).max(0.0).sqrt() * noise).clamp(0.0, 1.0);
        }
        hits.push(if y > tol { 1.0 } else { 0.0 });
    }
    mean_se(&hits)
}

/// Closed form for the operator applied to the constant function `r`:
/// `(1 + gamma) / (1/r + gamma)`.
pub fn constant_closed_form(r: f64, gamma: f64) -> f64 {
    (1.0 + gamma) / (1.0 / r + gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_boundary_points_are_deterministic() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..100 {
            assert_eq!(beta_stationary_sample(0.0, 1.0, &mut rng), 0.0);
            assert_eq!(beta_stationary_sample(1.0, 0.5, &mut rng), 1.0);
        }
    }

    #[test]
    fn beta_sample_moments() {
        let mut rng = stream_rng(2, 0);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| beta_stationary_sample(0.5, 1.0, &mut rng))
            .collect();
        let m1 = mean_se(&samples);
        assert!((m1.value - 0.5).abs() < 4.0 * m1.se);
        let sq: Vec<f64> = samples.iter().map(|y| y * y).collect();
        let m2 = mean_se(&sq);
        assert!((m2.value - 0.375).abs() < 4.0 * m2.se, "{}", m2.value);
    }

    #[test]
    fn beta_moment_formula() {
        assert!((beta_moment(0.3, 0.7, 1) - 0.3).abs() < 1e-15);
        assert!((beta_moment(0.5, 1.0, 2) - 0.375).abs() < 1e-15);
        // fixed shape identity m1 - m2 = x(1-x)/(1+gamma) on a grid
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            for &gamma in &[0.25, 0.5, 1.0, 2.0, 5.0] {
                let lhs = beta_moment(x, gamma, 1) - beta_moment(x, gamma, 2);
                let rhs = x * (1.0 - x) / (1.0 + gamma);
                assert!((lhs - rhs).abs() < 1e-12, "x={x} gamma={gamma}");
            }
        }
    }

    #[test]
    fn stationary_path_time_averages() {
        let params = WfPathParams::new(0.3, 1.0);
        let mut rng = stream_rng(3, 0);
        let path = wf_stationary_path(&params, 50.0, &mut rng);
        let e = batch_means(&path, 25);
        assert!((e.value - 0.3).abs() < 4.0 * e.se, "{} ({})", e.value, e.se);
        let params = WfPathParams::new(0.5, 1.0);
        let path = wf_stationary_path(&params, 50.0, &mut rng);
        let prod: Vec<f64> = path.iter().map(|&y| y * (1.0 - y)).collect();
        let e = batch_means(&prod, 25);
        assert!((e.value - 0.125).abs() < 4.0 * e.se, "{} ({})", e.value, e.se);
    }

    #[test]
    fn trap_attraction_point_constant_path() {
        let params = WfPathParams::new(1.0, 0.5);
        let mut rng = stream_rng(4, 0);
        let path = wf_stationary_path(&params, 2.0, &mut rng);
        assert!(path.iter().all(|&y| y == 1.0));
    }

    #[test]
    fn log_laplace_constant_closed_form() {
        // p = r: result must be (1+gamma)/(1/r+gamma)
        for &(r, gamma) in &[(1.0, 1.0), (2.0, 1.0), (0.5, 0.5)] {
            let p = CatalyzingFn::constant(10, r);
            let (out, se) = u_gamma_apply(&p, gamma, 8000, 99);
            let exact = constant_closed_form(r, gamma);
            for (g, (&v, &s)) in out.values().iter().zip(&se).enumerate() {
                assert!(
                    (v - exact).abs() < 4.0 * s,
                    "r={r} gamma={gamma} point {g}: {v} vs {exact} (se {s})"
                );
            }
        }
    }

    #[test]
    fn log_laplace_zero_function() {
        let p = CatalyzingFn::constant(6, 0.0);
        let (out, _) = u_gamma_apply(&p, 1.0, 100, 5);
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn product_estimator_trivial_cases() {
        let one = CatalyzingFn::constant(6, 1.0);
        let (out, _) = u_gamma_apply_product(&one, 1.0, 500, 6).unwrap();
        assert!(out.values().iter().all(|&v| v == 1.0));
        let zero = CatalyzingFn::constant(6, 0.0);
        let (out, _) = u_gamma_apply_product(&zero, 1.0, 500, 7).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
        let over = CatalyzingFn::constant(6, 1.5);
        assert!(u_gamma_apply_product(&over, 1.0, 10, 8).is_err());
    }

    #[test]
    fn product_estimator_constant_closed_form() {
        let p = CatalyzingFn::constant(8, 0.5);
        let (out, se) = u_gamma_apply_product(&p, 1.0, 20000, 9).unwrap();
        let exact = constant_closed_form(0.5, 1.0);
        for (&v, &s) in out.values().iter().zip(&se) {
            assert!((v - exact).abs() < 4.0 * s, "{v} vs {exact} (se {s})");
        }
    }

    #[test]
    fn estimators_agree_on_identity_function() {
        let m = 10;
        let f = CatalyzingFn::h1(m);
        let (a, sa) = u_gamma_apply(&f, 1.0, 12000, 10);
        let (b, sb) = u_gamma_apply_product(&f, 1.0, 12000, 11).unwrap();
        let mut num = 0.0;
        let mut var = 0.0;
        for i in 0..=m {
            num += a.values()[i] - b.values()[i];
            var += sa[i] * sa[i] + sb[i] * sb[i];
        }
        let z = num / var.sqrt();
        assert!(z.abs() < 4.0, "pooled z = {z}");
    }

    #[test]
    fn ancestral_chain_trivial_and_moments() {
        let mut rng = stream_rng(12, 0);
        for _ in 0..50 {
            assert_eq!(ancestral_chain(1, 1.0, &mut rng), 1);
        }
        // E[psi_inf] for (m, gamma) = (2, 1) is 1 + 1/2
        assert!((ancestral_mean(2, 1.0) - 1.5).abs() < 1e-15);
        let samples: Vec<f64> = (0..40000)
            .map(|_| ancestral_chain(2, 1.0, &mut rng) as f64)
            .collect();
        let e = mean_se(&samples);
        assert!((e.value - 1.5).abs() < 4.0 * e.se, "{}", e.value);
    }

    #[test]
    fn ancestral_moment_duality() {
        // E[x^(psi_inf)] from (3, 0) equals the third stationary moment
        let mut rng = stream_rng(13, 0);
        let x: f64 = 0.5;
        let samples: Vec<f64> = (0..60000)
            .map(|_| x.powi(ancestral_chain(3, 1.0, &mut rng) as i32))
            .collect();
        let e = mean_se(&samples);
        let exact = beta_moment(0.5, 1.0, 3);
        assert!(
            (e.value - exact).abs() < 4.0 * e.se,
            "{} vs {exact}",
            e.value
        );
    }

    #[test]
    fn kyy_closed_form_values() {
        assert!((kyy_moment(0.0, 1.0) - 1.0 / 6.0).abs() < 1e-15);
        // rejection sampler matches the closed form at interior points
        let mut rng = stream_rng(14, 0);
        for &(x, gamma) in &[(0.3, 1.0), (0.5, 0.5), (0.7, 2.0)] {
            let samples: Vec<f64> = (0..30000)
                .map(|_| {
                    let y = size_biased_stationary_sample(x, gamma, &mut rng);
                    y * (1.0 - y)
                })
                .collect();
            let e = mean_se(&samples);
            let exact = kyy_moment(x, gamma);
            assert!(
                (e.value - exact).abs() < 4.0 * e.se,
                "x={x} gamma={gamma}: {} vs {exact}",
                e.value
            );
        }
    }

    #[test]
    fn geometric_schedule_gamma_constant() {
        let sched = GammaSchedule::geometric(1.0, 1.0, 12).unwrap();
        for g in sched.gammas() {
            assert!((g - 1.0).abs() < 1e-12);
        }
        let sched = GammaSchedule::geometric(0.5, 1.0, 12).unwrap();
        for g in sched.gammas() {
            assert!((g - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn driftless_absorption_bound() {
        for &(x, t) in &[(0.05, 1.0), (0.1, 2.0)] {
            let e = driftless_wf_positive_prob(x, t, 1e-3, 4000, 15);
            let bound = (4.0 / t + 2.0) * x;
            assert!(
                e.value <= bound + 4.0 * e.se,
                "x={x} t={t}: {} vs {bound}",
                e.value
            );
        }
    }

    #[test]
    fn binsplit_traps() {
        let e = binsplit_survival(1.0, 0.0, 5.0, 1e-3, 200, 10000, 16).unwrap();
        assert_eq!(e.value, 0.0);
        let e = binsplit_survival(1.0, 1.0, 5.0, 1e-3, 200, 10000, 17).unwrap();
        assert_eq!(e.value, 1.0);
    }

    #[test]
    fn catalytic_equilibrium_first_component() {
        // y1 alone is a Wright-Fisher diffusion with gamma = alpha/c = 1:
        // time average of y1(1-y1) = x1(1-x1)/(1+1) = 0.125
        let p = CatalyzingFn::h1(40);
        let mut rng = stream_rng(18, 0);
        let eq = catalytic_equilibrium((0.5, 0.5), 1.0, 1.0, &p, 1e-3, 50.0, 1500.0, &mut rng);
        assert!(
            (eq.y1_var.value - 0.125).abs() < 4.0 * eq.y1_var.se,
            "{} ({})",
            eq.y1_var.value,
            eq.y1_var.se
        );
        // mean of each component is its attraction point
        assert!(eq.mean_dev.0.value.abs() < 4.0 * eq.mean_dev.0.se);
        assert!(eq.mean_dev.1.value.abs() < 4.0 * eq.mean_dev.1.se);
    }
}
