//! Harris graphical representation of the contact process.
//!
//! One realization holds all Poisson marks (recoveries, infection arrows) on
//! the window times `[0, T]`, merged into a single time-ordered event queue.
//! Forward infection paths and dual (time-reversed, arrow-reversed) paths
//! are both deterministic sweeps over that queue, which is what makes the
//! duality identity exact per realization rather than only in law.

use crate::bitset::BitSet;
use crate::error::{Error, Result};
use crate::lattice::{reverse_kernel, GroupLattice, Kernel, LatticeKind};
use crate::rngutil::{exp_mean, poisson, stream_rng};
use crate::stats::{bootstrap_ci, ls_slope, mean_se, ratio_estimate, Estimate};
use rand::Rng;

/// Subset of window sites.
pub type SiteSet = BitSet;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EventKind {
    Recovery(u32),
    Arrow(u32, u32),
}

#[derive(Clone, Copy, Debug)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Realized Poisson marks on `window x [0, horizon]`.
pub struct GraphicalRep {
    n_sites: usize,
    horizon: f64,
    events: Vec<Event>,
    recovery_counts: Vec<usize>,
    arrow_counts: Vec<(usize, usize, usize)>,
}

impl GraphicalRep {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn recovery_count(&self, site: usize) -> usize {
        self.recovery_counts[site]
    }

    pub fn arrow_counts(&self) -> &[(usize, usize, usize)] {
        &self.arrow_counts
    }
}

/// Samples the independent Poisson channels: recovery marks at rate `delta`
/// per site, arrow marks at rate `a(i, j)` per ordered pair.
pub fn sample_graphical(
    lat: &GroupLattice,
    kernel: &Kernel,
    delta: f64,
    horizon: f64,
    rng: &mut impl Rng,
) -> GraphicalRep {
    assert!(horizon > 0.0 && delta >= 0.0);
    let n = lat.n_sites();
    let mut events = Vec::new();
    let mut recovery_counts = vec![0usize; n];
    for (i, slot) in recovery_counts.iter_mut().enumerate() {
        let count = poisson(rng, delta * horizon) as usize;
        *slot = count;
        for _ in 0..count {
            events.push(Event {
                time: rng.random::<f64>() * horizon,
                kind: EventKind::Recovery(i as u32),
            });
        }
    }
    let mut arrow_counts = Vec::new();
    for i in 0..n {
        for &(j, rate) in kernel.out_rates(i) {
            let count = poisson(rng, rate * horizon) as usize;
            arrow_counts.push((i, j, count));
            for _ in 0..count {
                events.push(Event {
                    time: rng.random::<f64>() * horizon,
                    kind: EventKind::Arrow(i as u32, j as u32),
                });
            }
        }
    }
    events.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    GraphicalRep {
        n_sites: n,
        horizon,
        events,
        recovery_counts,
        arrow_counts,
    }
}

fn first_event_after(events: &[Event], t: f64) -> usize {
    events.partition_point(|e| e.time <= t)
}

/// Forward configuration eta^{A x {t0}}_t, sweeping events in `(t0, t0+t]`.
pub fn forward(rep: &GraphicalRep, a: &SiteSet, t0: f64, t: f64) -> Result<SiteSet> {
    if t0 < 0.0 || t < 0.0 || t0 + t > rep.horizon * (1.0 + 1e-12) {
        return Err(Error::OutOfHorizon(format!(
            "forward query [{t0}, {}] outside [0, {}]",
            t0 + t,
            rep.horizon
        )));
    }
    let mut state = a.clone();
    let mut idx = first_event_after(&rep.events, t0);
    let end = t0 + t;
    while idx < rep.events.len() && rep.events[idx].time <= end {
        apply_forward(&mut state, rep.events[idx].kind);
        idx += 1;
    }
    Ok(state)
}

#[inline]
fn apply_forward(state: &mut SiteSet, kind: EventKind) {
    match kind {
        EventKind::Recovery(i) => state.remove(i as usize),
        EventKind::Arrow(i, j) => {
            if state.contains(i as usize) {
                state.insert(j as usize);
            }
        }
    }
}

/// Dual configuration eta-dagger^{B x {t1}}_s: the set of sites at time
/// `t1 - s` from which a path reaches `B x {t1}`. Sweeps the same events in
/// reverse with arrows reversed.
pub fn dual_backward(rep: &GraphicalRep, b: &SiteSet, t1: f64, s: f64) -> Result<SiteSet> {
    if s < 0.0 || t1 - s < 0.0 || t1 > rep.horizon * (1.0 + 1e-12) {
        return Err(Error::OutOfHorizon(format!(
            "dual query [{}, {t1}] outside [0, {}]",
            t1 - s,
            rep.horizon
        )));
    }
    let mut state = b.clone();
    let start = first_event_after(&rep.events, t1 - s);
    let end = first_event_after(&rep.events, t1);
    for idx in (start..end).rev() {
        match rep.events[idx].kind {
            EventKind::Recovery(i) => state.remove(i as usize),
            EventKind::Arrow(i, j) => {
                if state.contains(j as usize) {
                    state.insert(i as usize);
                }
            }
        }
    }
    Ok(state)
}

/// Left-translates a configuration: `{g s : s in set}`.
pub fn translate(lat: &GroupLattice, set: &SiteSet, g: usize) -> SiteSet {
    let mut out = BitSet::new(set.capacity());
    for s in set.iter() {
        out.insert(lat.group_mul(g, s).expect("translation needs a group"));
    }
    out
}

/// Per-replica sizes |eta^A_t| on a time grid; one sweep per replica.
pub fn size_series(
    lat: &GroupLattice,
    kernel: &Kernel,
    delta: f64,
    a: &SiteSet,
    t_grid: &[f64],
    reps: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    size_series_range(lat, kernel, delta, a, t_grid, seed, 0..reps as u64)
}

/// Same, for an explicit range of replica stream ids, so batched callers can
/// extend a run without re-simulating earlier replicas.
pub fn size_series_range(
    lat: &GroupLattice,
    kernel: &Kernel,
    delta: f64,
    a: &SiteSet,
    t_grid: &[f64],
    seed: u64,
    rep_range: std::ops::Range<u64>,
) -> Vec<Vec<usize>> {
    let horizon = *t_grid.last().unwrap();
    rep_range
        .map(|r| {
            let mut rng = stream_rng(seed, r);
            let rep = sample_graphical(lat, kernel, delta, horizon, &mut rng);
            let mut state = a.clone();
            let mut out = Vec::with_capacity(t_grid.len());
            let mut idx = 0usize;
            for &t in t_grid {
                while idx < rep.events.len() && rep.events[idx].time <= t {
                    apply_forward(&mut state, rep.events[idx].kind);
                    idx += 1;
                }
                out.push(state.count());
            }
            out
        })
        .collect()
}

pub struct GrowthRateReport {
    pub rate: f64,
    /// 95% bootstrap confidence interval for the rate.
    pub ci: (f64, f64),
    /// A-priori bracket `[-delta, |a| - delta]`.
    pub bracket: (f64, f64),
    pub means: Vec<Estimate>,
    pub t_grid: Vec<f64>,
}

/// Least-squares slope of `log E|eta^A_t|` over the last half of the grid,
/// with a percentile bootstrap confidence interval over replicas.
pub fn estimate_growth_rate(
    lat: &GroupLattice,
    kernel: &Kernel,
    delta: f64,
    a: &SiteSet,
    t_grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<GrowthRateReport> {
    assert!(t_grid.windows(2).all(|w| w[0] < w[1]), "grid must increase");
    let sizes = size_series(lat, kernel, delta, a, t_grid, reps, seed);
    let ncols = t_grid.len();
    let col_samples = |col: usize, idx: &[usize]| -> f64 {
        idx.iter().map(|&r| sizes[r][col] as f64).sum::<f64>() / idx.len() as f64
    };
    let all: Vec<usize> = (0..reps).collect();
    let fit_start = ncols / 2;
    let slope_of = |idx: &[usize]| -> Option<f64> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for col in fit_start..ncols {
            let m = col_samples(col, idx);
            if m > 0.0 {
                xs.push(t_grid[col]);
                ys.push(m.ln());
            }
        }
        if xs.len() < 2 {
            None
        } else {
            Some(ls_slope(&xs, &ys).0)
        }
    };
    let rate = slope_of(&all).ok_or_else(|| {
        Error::DegenerateFit("all replicas extinct over the fit range".into())
    })?;
    let mut rng = stream_rng(seed, u64::MAX);
    let ci = bootstrap_ci(reps, 200, 0.95, &mut rng, slope_of);
    let means = (0..ncols)
        .map(|col| {
            let vals: Vec<f64> = sizes.iter().map(|row| row[col] as f64).collect();
            mean_se(&vals)
        })
        .collect();
    Ok(GrowthRateReport {
        rate,
        ci,
        bracket: (-delta, kernel.total() - delta),
        means,
        t_grid: t_grid.to_vec(),
    })
}

/// Unbiased estimator of `pi_lambda(A) = int_0^inf E|eta^A_t| e^(-lambda t) dt`:
/// mean of `|eta^A_tau|` with `tau ~ Exp(mean 1/lambda)`, divided by lambda.
/// Each replica's representation extends to its own `tau`, so no horizon
/// truncation is incurred.
pub fn pi_lambda_hat(
    lat: &GroupLattice,
    kernel: &Kernel,
    delta: f64,
    a: &SiteSet,
    lambda: f64,
    reps: usize,
    seed: u64,
) -> Estimate {
    assert!(lambda > 0.0);
    let sizes: Vec<f64> = (0..reps)
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let tau = exp_mean(&mut rng, 1.0 / lambda);
            if a.is_empty() || tau == 0.0 {
                return a.count() as f64;
            }
            let rep = sample_graphical(lat, kernel, delta, tau, &mut rng);
            forward(&rep, a, 0.0, tau).unwrap().count() as f64
        })
        .collect();
    let e = mean_se(&sizes);
    Estimate {
        value: e.value / lambda,
        se: e.se / lambda,
    }
}

/// One draw from the Campbell (size-biased) law: a typical time, a typical
/// infected site, and the configuration that carried them.
pub struct CampbellSample {
    pub site: usize,
    pub tau: f64,
    pub config: SiteSet,
    /// Importance weight of the winning configuration, `|eta^A_tau|`.
    pub weight: f64,
    /// Batches rejected because every configuration was empty.
    pub retries: usize,
}

/// Self-normalized importance resampling with an explicit batch size: draw
/// `batch` pairs `(rep, tau ~ Exp(mean 1/lambda))`, pick one with probability
/// proportional to `|eta^A_tau|`, then a uniform site of the winner.
pub fn campbell_sample(
    lat: &GroupLattice,
    kernel: &Kernel,
    delta: f64,
    a: &SiteSet,
    lambda: f64,
    batch: usize,
    rng: &mut impl Rng,
) -> Result<CampbellSample> {
    assert!(batch >= 1 && lambda > 0.0 && !a.is_empty());
    let mut retries = 0usize;
    loop {
        let mut draws = Vec::with_capacity(batch);
        let mut total = 0.0f64;
        for _ in 0..batch {
            let tau = exp_mean(rng, 1.0 / lambda);
            let rep = sample_graphical(lat, kernel, delta, tau.max(1e-12), rng);
            let config = forward(&rep, a, 0.0, tau.max(1e-12)).unwrap();
            total += config.count() as f64;
            draws.push((tau, config));
        }
        if total == 0.0 {
            retries += 1;
            if retries > 1000 {
                return Err(Error::DegenerateFit(
                    "campbell batch empty after 1000 retries".into(),
                ));
            }
            continue;
        }
        let mut pick = rng.random::<f64>() * total;
        for (tau, config) in draws {
            let w = config.count() as f64;
            if w > 0.0 && pick < w {
                let k = rng.random_range(0..config.count());
                let site = config.iter().nth(k).unwrap();
                return Ok(CampbellSample {
                    site,
                    tau,
                    config,
                    weight: w,
                    retries,
                });
            }
            pick -= w;
        }
        unreachable!("resampling pick fell off the batch");
    }
}

/// Campbell expectation of a site functional by the self-normalized
/// importance scheme, averaging over every infected site of every replica
/// instead of resampling one winner. `g` receives the candidate site, the
/// typical time, the configuration from `a`, and the configuration started
/// from the full window on the same realization.
pub fn campbell_expect(
    lat: &GroupLattice,
    kernel: &Kernel,
    delta: f64,
    a: &SiteSet,
    lambda: f64,
    reps: usize,
    seed: u64,
    mut g: impl FnMut(usize, f64, &SiteSet, &SiteSet) -> f64,
) -> Estimate {
    let mut num = Vec::with_capacity(reps);
    let mut den = Vec::with_capacity(reps);
    for r in 0..reps {
        let mut rng = stream_rng(seed, r as u64);
        let tau = exp_mean(&mut rng, 1.0 / lambda).max(1e-12);
        let rep = sample_graphical(lat, kernel, delta, tau, &mut rng);
        let mut from_a = a.clone();
        let mut from_all = BitSet::full(lat.n_sites());
        let mut idx = 0usize;
        while idx < rep.events.len() && rep.events[idx].time <= tau {
            apply_forward(&mut from_a, rep.events[idx].kind);
            apply_forward(&mut from_all, rep.events[idx].kind);
            idx += 1;
        }
        let mut s = 0.0;
        for i in from_a.iter() {
            s += g(i, tau, &from_a, &from_all);
        }
        num.push(s);
        den.push(from_a.count() as f64);
    }
    ratio_estimate(&num, &den, 40.min(reps / 2))
}

pub struct CharCheck {
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub z: f64,
}

/// Checks the characterization of the law seen from a typical infected site:
/// the Campbell probability that `A` misses `iota^{-1} eta^{{0}}_tau` equals
/// `pibar-dagger(A u {0}) - pibar-dagger(A)`, estimated independently.
pub fn char_check(
    lat: &GroupLattice,
    kernel: &Kernel,
    delta: f64,
    a: &SiteSet,
    lambda: f64,
    reps: usize,
    seed: u64,
) -> CharCheck {
    let origin = lat.origin();
    let origin_set = BitSet::from_sites(lat.n_sites(), &[origin]);
    // lhs: A n iota^{-1} eta = empty  <=>  iota a not in eta for all a in A
    let a_sites: Vec<usize> = a.iter().collect();
    let lhs = campbell_expect(
        lat,
        kernel,
        delta,
        &origin_set,
        lambda,
        reps,
        seed,
        |iota, _tau, eta, _| {
            let miss = a_sites
                .iter()
                .all(|&s| !eta.contains(lat.group_mul(iota, s).unwrap()));
            if miss {
                1.0
            } else {
                0.0
            }
        },
    );
    // rhs via the reversed kernel, three independent estimators
    let kd = reverse_kernel(kernel);
    let mut a_with_origin = a.clone();
    a_with_origin.insert(origin);
    let pi_union = pi_lambda_hat(lat, &kd, delta, &a_with_origin, lambda, reps, seed ^ 0x1111);
    let pi_a = if a.is_empty() {
        Estimate::exact(0.0)
    } else {
        pi_lambda_hat(lat, &kd, delta, a, lambda, reps, seed ^ 0x2222)
    };
    let pi_origin = pi_lambda_hat(lat, &kd, delta, &origin_set, lambda, reps, seed ^ 0x3333);
    let u = pi_union.value - pi_a.value;
    let su = (pi_union.se * pi_union.se + pi_a.se * pi_a.se).sqrt();
    let v = pi_origin.value;
    let rhs = Estimate {
        value: u / v,
        se: ((su / v).powi(2) + (u * pi_origin.se / (v * v)).powi(2)).sqrt(),
    };
    let z = lhs.z_against(&rhs);
    CharCheck { lhs, rhs, z }
}

pub struct TypicalSiteLaw {
    /// Campbell-weighted empirical law of `iota^{-1} eta^A_tau n Delta`,
    /// indexed by bitmask over the offsets.
    pub law: Vec<f64>,
    /// Same-realization law of `iota^{-1} eta^Lambda_tau n Delta` (the
    /// finite-window stand-in for the upper invariant configuration, started
    /// from the full window at time 0).
    pub law_upper: Vec<f64>,
    /// Campbell probability that the two windows agree on Delta.
    pub agreement: Estimate,
}

/// Law of the process seen from a typical infected site, restricted to the
/// finite window `Delta` (given as site offsets), plus the overlap statistic
/// with the full-window configuration on the same realization.
pub fn typical_site_law(
    lat: &GroupLattice,
    kernel: &Kernel,
    delta: f64,
    a: &SiteSet,
    lambda: f64,
    window_offsets: &[usize],
    reps: usize,
    seed: u64,
) -> TypicalSiteLaw {
    let ncells = 1usize << window_offsets.len();
    let mut law_w = vec![0.0f64; ncells];
    let mut law_u = vec![0.0f64; ncells];
    let mut total_w = 0.0f64;
    let mut agree_num = Vec::with_capacity(reps);
    let mut agree_den = Vec::with_capacity(reps);
    for r in 0..reps {
        let mut rng = stream_rng(seed, r as u64);
        let tau = exp_mean(&mut rng, 1.0 / lambda).max(1e-12);
        let rep = sample_graphical(lat, kernel, delta, tau, &mut rng);
        let mut from_a = a.clone();
        let mut from_all = BitSet::full(lat.n_sites());
        let mut idx = 0usize;
        while idx < rep.events.len() && rep.events[idx].time <= tau {
            apply_forward(&mut from_a, rep.events[idx].kind);
            apply_forward(&mut from_all, rep.events[idx].kind);
            idx += 1;
        }
        let mut agree = 0.0;
        for iota in from_a.iter() {
            let mut mask_a = 0usize;
            let mut mask_u = 0usize;
            for (bit, &off) in window_offsets.iter().enumerate() {
                let site = lat.group_mul(iota, off).unwrap();
                if from_a.contains(site) {
                    mask_a |= 1 << bit;
                }
                if from_all.contains(site) {
                    mask_u |= 1 << bit;
                }
            }
            law_w[mask_a] += 1.0;
            law_u[mask_u] += 1.0;
            total_w += 1.0;
            if mask_a == mask_u {
                agree += 1.0;
            }
        }
        agree_num.push(agree);
        agree_den.push(from_a.count() as f64);
    }
    if total_w > 0.0 {
        for v in law_w.iter_mut().chain(law_u.iter_mut()) {
            *v /= total_w;
        }
    }
    TypicalSiteLaw {
        law: law_w,
        law_upper: law_u,
        agreement: ratio_estimate(&agree_num, &agree_den, 40.min(reps / 2)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CouplingOutcome {
    /// First time the two configurations coincide as nonempty sets.
    Coupled { time: f64 },
    /// One process died while the configurations still differed.
    ExtinctUncoupled { time: f64 },
    NotByHorizon,
}

/// First meeting time of `eta^{{i}}` and `eta^{{j}}` on the shared
/// realization; nearest-neighbor one-dimensional kernels only.
pub fn onedim_coupling_time(
    lat: &GroupLattice,
    kernel: &Kernel,
    rep: &GraphicalRep,
    i: usize,
    j: usize,
) -> Result<CouplingOutcome> {
    match lat.kind {
        LatticeKind::Torus { dim: 1, len } => {
            let ok = kernel
                .base()
                .iter()
                .all(|&(k, _)| k == 1 || k == len - 1);
            if !ok {
                return Err(Error::invalid(
                    "coupling time requires a nearest-neighbor kernel",
                ));
            }
        }
        _ => {
            return Err(Error::invalid(
                "coupling time requires a one-dimensional torus",
            ))
        }
    }
    if i == j {
        return Ok(CouplingOutcome::Coupled { time: 0.0 });
    }
    let mut eta_i = BitSet::from_sites(lat.n_sites(), &[i]);
    let mut eta_j = BitSet::from_sites(lat.n_sites(), &[j]);
    for ev in &rep.events {
        apply_forward(&mut eta_i, ev.kind);
        apply_forward(&mut eta_j, ev.kind);
        let ei = eta_i.is_empty();
        let ej = eta_j.is_empty();
        if eta_i == eta_j && !ei {
            return Ok(CouplingOutcome::Coupled { time: ev.time });
        }
        if ei || ej {
            return Ok(CouplingOutcome::ExtinctUncoupled { time: ev.time });
        }
    }
    Ok(CouplingOutcome::NotByHorizon)
}
