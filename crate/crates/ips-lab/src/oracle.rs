//! Exact transient analysis of tiny continuous-time Markov chains.
//!
//! Contact and capped branching-coalescing processes on a handful of sites
//! are expanded into explicit generator matrices, and `exp(tQ)' p0` is
//! evaluated by uniformization with a certified truncation error. This is
//! the ground truth every statistical check is measured against.

use crate::bitset::BitSet;
use crate::error::{Error, Result};
use crate::lattice::{GroupLattice, Kernel};
use statrs::function::gamma::ln_gamma;

/// Bijection between subsets of the window and state indices.
#[derive(Clone, Copy)]
pub struct SubsetSpace {
    pub n_sites: usize,
}

impl SubsetSpace {
    pub fn size(&self) -> usize {
        1usize << self.n_sites
    }

    pub fn encode(&self, set: &BitSet) -> usize {
        let mut idx = 0usize;
        for i in set.iter() {
            idx |= 1 << i;
        }
        idx
    }

    pub fn decode(&self, idx: usize) -> BitSet {
        let mut s = BitSet::new(self.n_sites);
        for i in 0..self.n_sites {
            if idx & (1 << i) != 0 {
                s.insert(i);
            }
        }
        s
    }
}

/// Bijection between per-site counts `0..=cap` and state indices
/// (mixed-radix little-endian).
#[derive(Clone, Copy)]
pub struct CappedCountSpace {
    pub n_sites: usize,
    pub cap: u32,
}

impl CappedCountSpace {
    pub fn size(&self) -> usize {
        (self.cap as usize + 1).pow(self.n_sites as u32)
    }

    pub fn encode(&self, counts: &[u32]) -> usize {
        let radix = self.cap as usize + 1;
        counts
            .iter()
            .rev()
            .fold(0usize, |acc, &c| acc * radix + c as usize)
    }

    pub fn decode(&self, idx: usize) -> Vec<u32> {
        let radix = self.cap as usize + 1;
        let mut v = Vec::with_capacity(self.n_sites);
        let mut x = idx;
        for _ in 0..self.n_sites {
            v.push((x % radix) as u32);
            x /= radix;
        }
        v
    }
}

/// Sparse CTMC generator; diagonal entries are the negated row sums.
pub struct GeneratorMatrix {
    pub m: usize,
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn new(m: usize) -> Self {
        GeneratorMatrix {
            m,
            rows: vec![Vec::new(); m],
            diag: vec![0.0; m],
        }
    }

    pub fn add_rate(&mut self, from: usize, to: usize, rate: f64) {
        debug_assert!(rate >= 0.0 && from != to);
        if rate > 0.0 {
            self.rows[from].push((to, rate));
            self.diag[from] -= rate;
        }
    }

    pub fn diag(&self, s: usize) -> f64 {
        self.diag[s]
    }

    pub fn off_diagonal(&self, s: usize) -> &[(usize, f64)] {
        &self.rows[s]
    }

    /// Maximum |diagonal| entry.
    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().map(|d| -d).fold(0.0, f64::max)
    }

    /// Row-sum defect (should be ~0 by construction).
    pub fn max_row_defect(&self) -> f64 {
        self.rows
            .iter()
            .zip(&self.diag)
            .map(|(row, d)| (row.iter().map(|&(_, r)| r).sum::<f64>() + d).abs())
            .fold(0.0, f64::max)
    }
}

/// Probability vector over states.
pub struct DistributionVector {
    pub p: Vec<f64>,
}

impl DistributionVector {
    pub fn point_mass(m: usize, state: usize) -> Self {
        let mut p = vec![0.0; m];
        p[state] = 1.0;
        DistributionVector { p }
    }

    pub fn check(&self) -> Result<()> {
        if self.p.iter().any(|&x| x < -1e-12) {
            return Err(Error::invalid("negative probability entry"));
        }
        let s: f64 = self.p.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("distribution sums to {s}")));
        }
        Ok(())
    }
}

/// Contact-process generator on subsets of the window: recovery at rate
/// `delta` per infected site, infection along kernel rates from infected to
/// healthy sites. Killed-boundary leak needs no extra terms (infections
/// leaving the window are simply lost).
pub fn contact_generator(
    lat: &GroupLattice,
    kernel: &Kernel,
    delta: f64,
) -> Result<GeneratorMatrix> {
    let n = lat.n_sites();
    if n > 14 {
        return Err(Error::StateSpaceTooLarge(format!(
            "contact oracle supports at most 14 sites, got {n}"
        )));
    }
    if delta < 0.0 {
        return Err(Error::invalid("recovery rate must be nonnegative"));
    }
    let space = SubsetSpace { n_sites: n };
    let m = space.size();
    let mut q = GeneratorMatrix::new(m);
    for state in 0..m {
        for i in 0..n {
            if state & (1 << i) != 0 {
                if delta > 0.0 {
                    q.add_rate(state, state & !(1 << i), delta);
                }
                for &(j, r) in kernel.out_rates(i) {
                    if state & (1 << j) == 0 {
                        q.add_rate(state, state | (1 << j), r);
                    }
                }
            }
        }
    }
    Ok(q)
}

/// Branching-coalescing generator on capped per-site counts: migration
/// a(i,j)x(i), branching b*x(i) (suppressed when the site is at the cap, as
/// is migration into a capped site), coalescence c*x(i)(x(i)-1), death
/// d*x(i).
pub fn braco_generator(
    lat: &GroupLattice,
    kernel: &Kernel,
    b: f64,
    c: f64,
    d: f64,
    cap: u32,
) -> Result<GeneratorMatrix> {
    let n = lat.n_sites();
    let space = CappedCountSpace { n_sites: n, cap };
    let radix = cap as usize + 1;
    if (radix as f64).powi(n as i32) > 1e5 {
        return Err(Error::StateSpaceTooLarge(format!(
            "(cap+1)^n = {radix}^{n} exceeds 1e5"
        )));
    }
    if b < 0.0 || c < 0.0 || d < 0.0 {
        return Err(Error::invalid("rates must be nonnegative"));
    }
    let m = space.size();
    let mut q = GeneratorMatrix::new(m);
    let pow: Vec<usize> = (0..n).map(|i| radix.pow(i as u32)).collect();
    for state in 0..m {
        let x = space.decode(state);
        for i in 0..n {
            let xi = x[i] as f64;
            if x[i] == 0 {
                continue;
            }
            // migration; moves into capped sites are suppressed
            for &(j, r) in kernel.out_rates(i) {
                if x[j] < cap {
                    q.add_rate(state, state - pow[i] + pow[j], r * xi);
                }
            }
            if b > 0.0 && x[i] < cap {
                q.add_rate(state, state + pow[i], b * xi);
            }
            if c > 0.0 && x[i] >= 2 {
                q.add_rate(state, state - pow[i], c * xi * (xi - 1.0));
            }
            if d > 0.0 {
                q.add_rate(state, state - pow[i], d * xi);
            }
        }
    }
    Ok(q)
}

/// Transient distribution exp(tQ)' p0 by uniformization.
///
/// The uniformization rate is `max |diag| * (1 + 1e-6)`; the Poisson series
/// is truncated once the accumulated weight reaches `1 - tol`, which bounds
/// the l1 error by `tol`.
pub fn transient_distribution(
    q: &GeneratorMatrix,
    p0: &DistributionVector,
    t: f64,
    tol: f64,
) -> Result<DistributionVector> {
    if tol <= 0.0 {
        return Err(Error::invalid("tol must be positive"));
    }
    if t < 0.0 {
        return Err(Error::invalid("time must be nonnegative"));
    }
    let m = q.m;
    assert_eq!(p0.p.len(), m);
    let rate = q.max_exit_rate() * (1.0 + 1e-6);
    if t == 0.0 || rate == 0.0 {
        return Ok(DistributionVector { p: p0.p.clone() });
    }
    let lam = rate * t;
    // v_k = (P')^k p0 where P = I + Q / rate
    let mut v = p0.p.clone();
    let mut acc = vec![0.0f64; m];
    let mut cum = 0.0f64;
    let log_lam = lam.ln();
    let mut k = 0usize;
    loop {
        let logw = -lam + k as f64 * log_lam - ln_gamma(k as f64 + 1.0);
        let w = logw.exp();
        if w > 0.0 {
            for (a, &x) in acc.iter_mut().zip(&v) {
                *a += w * x;
            }
            cum += w;
        }
        if cum >= 1.0 - tol {
            break;
        }
        if k > 1_000_000 {
            return Err(Error::invalid("uniformization failed to converge"));
        }
        // v <- P' v: (P'v)[s'] = sum_s P[s, s'] v[s]
        let mut next = vec![0.0f64; m];
        for s in 0..m {
            let vs = v[s];
            if vs == 0.0 {
                continue;
            }
            next[s] += (1.0 + q.diag(s) / rate) * vs;
            for &(sp, r) in q.off_diagonal(s) {
                next[sp] += r / rate * vs;
            }
        }
        v = next;
        k += 1;
    }
    Ok(DistributionVector { p: acc })
}

/// Probability that the configuration misses `target` entirely, i.e.
/// P[eta_t n target = empty] for a subset-space distribution.
pub fn prob_avoiding(space: SubsetSpace, dist: &DistributionVector, target: &BitSet) -> f64 {
    let mask = space.encode(target);
    dist.p
        .iter()
        .enumerate()
        .filter(|&(s, _)| s & mask == 0)
        .map(|(_, &p)| p)
        .sum()
}

/// Expected number of occupied sites of a subset-space distribution.
pub fn expected_size(space: SubsetSpace, dist: &DistributionVector) -> f64 {
    dist.p
        .iter()
        .enumerate()
        .map(|(s, &p)| (s & ((1usize << space.n_sites) - 1)).count_ones() as f64 * p)
        .sum()
}

/// Expected count at one site of a capped-count-space distribution.
pub fn expected_site_count(space: CappedCountSpace, dist: &DistributionVector, site: usize) -> f64 {
    let radix = space.cap as usize + 1;
    let pow = radix.pow(site as u32);
    dist.p
        .iter()
        .enumerate()
        .map(|(s, &p)| ((s / pow) % radix) as f64 * p)
        .sum()
}

/// E[(1-phi)^X] under a capped-count-space distribution.
pub fn expected_thinning_void(
    space: CappedCountSpace,
    dist: &DistributionVector,
    phi: &[f64],
) -> f64 {
    dist.p
        .iter()
        .enumerate()
        .map(|(s, &p)| {
            let x = space.decode(s);
            let prod: f64 = x
                .iter()
                .zip(phi)
                .map(|(&xi, &f)| (1.0 - f).powi(xi as i32))
                .product();
            prod * p
        })
        .sum()
}

/// Markov-style tail certificate: P[total population ever needed above
/// `cap`] bounded through the factorial-moment bound
/// E|X_t|^(k) <= |x0|^(k) e^(kbt), minimized over k.
pub fn cap_exceedance_bound(x0_total: u32, b: f64, t: f64, cap: u32) -> f64 {
    let mut best = f64::INFINITY;
    for k in 1..=60usize {
        // log of rising factorial z^(k) = z (z+1) ... (z+k-1)
        let rising = |z: f64| -> f64 { ln_gamma(z + k as f64) - ln_gamma(z) };
        let log_bound = rising(x0_total as f64) + k as f64 * b * t - rising(cap as f64);
        best = best.min(log_bound.exp());
    }
    best.min(1.0)
}

/// Smallest cap whose exceedance certificate is below `target`.
pub fn certified_cap(x0_total: u32, b: f64, t: f64, target: f64) -> u32 {
    let mut cap = x0_total.max(4);
    while cap_exceedance_bound(x0_total, b, t, cap) > target {
        cap *= 2;
        if cap > 1 << 20 {
            break;
        }
    }
    cap
}
