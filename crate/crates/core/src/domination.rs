//! Dominating tail sequences and the renewal regularity constant.
//!
//! Two conditions make the simultaneous renewal time integrable:
//!
//! * a non-increasing summable sequence `G_n` bounding every conditional
//!   renewal tail `P(next gap > n | renewal at t in state x)`, uniformly over
//!   `t` and `x ∈ C` (with `G_n = G_0` for `n < 0`);
//! * a constant `γ > 0` and a threshold `n₀` with
//!   `P(X_{n+t} ∈ C | X_n ∈ C) >= γ` for every base time `n >= n₀` and lag
//!   `t >= 0`.
//!
//! For birth-death chains the first is supplied by the return time of a ±1
//! random walk reflected at the origin, the second by a closed form in the
//! holding probability at 0.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSchedule;
use crate::seed::{self, path_rng};
use crate::simulate::{check_distribution, survival_curve, ChainWalker};

/// Tolerance on `p(1 - p) >= sup α(1 - α)`.
pub const VARIANCE_TOLERANCE: f64 = 1e-12;

/// Number of standard errors the empirical checkers allow.
pub const SE_MULTIPLIER: f64 = 3.0;

fn check_walk_p(p: f64) -> Result<()> {
    if p > 0.5 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "walk down-probability p = {p} must lie in (1/2, 1) for the return-time \
             generating function to define a probability distribution"
        )))
    }
}

/// Return-time law `f_0..=f_n` of a ±1 walk on the nonnegative integers that
/// leaves 0 upward and then steps down with probability `p`.
///
/// These are the coefficients of `F(s) = (1 - sqrt(1 - 4p(1-p)s²)) / (2(1-p))`:
/// `f_{2k} = C(2k, k) / (2k - 1) · (p(1-p))^k / (2(1-p))`, odd terms zero,
/// `Σ f_k = 1` for `p > 1/2`. Evaluated through the ratio
/// `f_{2k+2} / f_{2k} = 4p(1-p)(2k-1)/(2k+2)`, which never overflows.
pub fn first_return_coefficients(p: f64, n: usize) -> Result<Vec<f64>> {
    check_walk_p(p)?;
    let r = 4.0 * p * (1.0 - p);
    let mut f = vec![0.0; n + 1];
    if n >= 2 {
        f[2] = p;
        let mut k = 1;
        while 2 * k + 2 <= n {
            let kf = k as f64;
            f[2 * k + 2] = f[2 * k] * r * (2.0 * kf - 1.0) / (2.0 * kf + 2.0);
            k += 1;
        }
    }
    Ok(f)
}

/// Same coefficients by power-series arithmetic: the square root of
/// `1 - 4p(1-p)s²` via `g_m = (h_m - Σ_{0<i<m} g_i g_{m-i}) / 2`, then
/// `(1 - g) / (2(1-p))`.
pub fn first_return_series(p: f64, n: usize) -> Result<Vec<f64>> {
    check_walk_p(p)?;
    let mut h = vec![0.0; n + 1];
    h[0] = 1.0;
    if n >= 2 {
        h[2] = -4.0 * p * (1.0 - p);
    }
    let mut g = vec![0.0; n + 1];
    g[0] = 1.0;
    for m in 1..=n {
        let conv: f64 = (1..m).map(|i| g[i] * g[m - i]).sum();
        g[m] = (h[m] - conv) / 2.0;
    }
    let q2 = 2.0 * (1.0 - p);
    Ok((0..=n)
        .map(|m| {
            if m == 0 {
                (1.0 - g[0]) / q2
            } else {
                -g[m] / q2
            }
        })
        .collect())
}

/// A non-increasing nonnegative sequence `G_0..=G_N` with a certified bound
/// on what lies beyond `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominatingSequence {
    g: Vec<f64>,
    m_partial: f64,
    tail_bound: Option<f64>,
}

impl DominatingSequence {
    /// Checks monotonicity and sign.
    pub fn new(g: Vec<f64>, tail_bound: Option<f64>) -> Result<Self> {
        if g.is_empty() {
            return Err(Error::domain("dominating sequence is empty"));
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain(format!(
                "G_{i} = {} is not a nonnegative number",
                g[i]
            )));
        }
        if let Some(i) = g.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::domain(format!(
                "G increases at n = {}: {} > {}",
                i + 1,
                g[i + 1],
                g[i]
            )));
        }
        let m_partial = g.iter().sum();
        Ok(DominatingSequence {
            g,
            m_partial,
            tail_bound,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.g
    }

    /// Last stored index `N`.
    pub fn last_index(&self) -> usize {
        self.g.len() - 1
    }

    pub fn g0(&self) -> f64 {
        self.g[0]
    }

    /// `G_n`; negative indices resolve to `G_0`, indices past `N` to `G_N`
    /// (an upper bound, since the sequence is non-increasing).
    pub fn at(&self, n: i64) -> f64 {
        if n <= 0 {
            self.g[0]
        } else {
            let n = n as usize;
            self.g[n.min(self.g.len() - 1)]
        }
    }

    pub fn m_partial(&self) -> f64 {
        self.m_partial
    }

    pub fn tail_bound(&self) -> Option<f64> {
        self.tail_bound
    }

    /// `m = Σ_{n>=0} G_n`, when the tail is certified.
    pub fn m(&self) -> Option<f64> {
        self.tail_bound.map(|t| self.m_partial + t)
    }
}

/// `G_n = Σ_{k>n} f_k / p` from the reflected walk's return-time law.
///
/// Terms beyond `n_terms` are bounded with `f_{2k+2} <= 4p(1-p) f_{2k}`:
/// each stored `G_n` includes that remainder, so it is an upper bound on the
/// exact value, and the tail `Σ_{n>N} G_n` is bounded by
/// `2 f_K r / ((1 - r)² p)` with `K` the last even index and `r = 4p(1-p)`.
pub fn random_walk_domination(p: f64, n_terms: usize) -> Result<DominatingSequence> {
    if n_terms < 2 {
        return Err(Error::domain("need at least two return-time coefficients"));
    }
    let f = first_return_coefficients(p, n_terms)?;
    let r = 4.0 * p * (1.0 - p);
    let last_even = n_terms - n_terms % 2;
    let f_last = f[last_even];
    let remainder = f_last * r / (1.0 - r);
    let mut g = vec![0.0; n_terms + 1];
    let mut acc = remainder;
    for n in (0..=n_terms).rev() {
        g[n] = acc / p;
        acc += f[n];
    }
    let tail = 2.0 * f_last * r / ((1.0 - r) * (1.0 - r) * p);
    DominatingSequence::new(g, Some(tail))
}

/// `p(1 - p) >= sup_{t,j} α_{tj}(1 - α_{tj})`.
pub fn domination_valid_for(p: f64, alpha_sup_product: f64) -> bool {
    p * (1.0 - p) + VARIANCE_TOLERANCE >= alpha_sup_product
}

/// Empirical conditional renewal tails for one start time, maximized over
/// the start states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenewalTailRow {
    pub t: usize,
    /// `Ĝ_n^{(t)}` for `n = 0..=horizon`.
    pub g: Vec<f64>,
    pub se: Vec<f64>,
    /// Start state attaining the maximum at each `n`.
    pub argmax: Vec<usize>,
    /// Paths whose gap exceeded the horizon.
    pub censored: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenewalTailSurface {
    pub horizon: usize,
    pub n_paths: usize,
    pub rows: Vec<RenewalTailRow>,
}

/// Monte Carlo estimate of `Ĝ_n^{(t)} = sup_{x} P(next renewal gap > n | X_t = x)`.
pub fn estimate_renewal_tails(
    schedule: &KernelSchedule,
    t_grid: &[usize],
    x_grid: &[usize],
    horizon: usize,
    n_paths: usize,
    seed: u64,
) -> Result<RenewalTailSurface> {
    let space = schedule.space();
    if let Some(&x) = x_grid
        .iter()
        .find(|&&x| x >= space.size() || !space.in_target(x))
    {
        return Err(Error::domain(format!(
            "start state {x} is not in the target set"
        )));
    }
    if x_grid.is_empty() || t_grid.is_empty() {
        return Err(Error::domain("renewal-tail grids must be nonempty"));
    }
    if n_paths == 0 || horizon == 0 {
        return Err(Error::domain("n_paths and horizon must be positive"));
    }
    let base = seed::derive_seed(seed, seed::stream::RENEWAL_TAILS);
    let mut rows = Vec::with_capacity(t_grid.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        let mut best: Option<RenewalTailRow> = None;
        for (xi, &x) in x_grid.iter().enumerate() {
            let cell = seed::derive_seed(base, (ti * x_grid.len() + xi) as u64);
            let gaps: Vec<Option<usize>> = (0..n_paths as u64)
                .into_par_iter()
                .map(|i| {
                    let mut w = ChainWalker::at(schedule, x, t, path_rng(cell, i, 0));
                    (1..=horizon).find(|_| {
                        w.step();
                        w.in_target()
                    })
                })
                .collect();
            let observed: Vec<usize> = gaps.iter().flatten().copied().collect();
            let censored = n_paths - observed.len();
            let curve = survival_curve(&observed, censored, horizon);
            match &mut best {
                None => {
                    best = Some(RenewalTailRow {
                        t,
                        g: curve.iter().map(|c| c.p).collect(),
                        se: curve.iter().map(|c| c.se).collect(),
                        argmax: vec![x; horizon + 1],
                        censored,
                    })
                }
                Some(row) => {
                    for (n, c) in curve.iter().enumerate() {
                        if c.p > row.g[n] {
                            row.g[n] = c.p;
                            row.se[n] = c.se;
                            row.argmax[n] = x;
                        }
                    }
                    row.censored = row.censored.max(censored);
                }
            }
        }
        rows.push(best.expect("x_grid is nonempty"));
    }
    Ok(RenewalTailSurface {
        horizon,
        n_paths,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFlag {
    pub t: usize,
    pub n: usize,
    pub estimate: f64,
    pub se: f64,
    pub dominating: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionAReport {
    pub pass: bool,
    pub checked_points: usize,
    pub flags: Vec<TailFlag>,
}

/// Flags every `(t, n)` with `Ĝ_n^{(t)} - 3·SE > G_n`.
pub fn check_condition_a(surface: &RenewalTailSurface, g: &DominatingSequence) -> ConditionAReport {
    let mut flags = Vec::new();
    let mut checked = 0;
    for row in &surface.rows {
        for (n, (&est, &se)) in row.g.iter().zip(&row.se).enumerate() {
            checked += 1;
            let dom = g.at(n as i64);
            if est - SE_MULTIPLIER * se > dom {
                flags.push(TailFlag {
                    t: row.t,
                    n,
                    estimate: est,
                    se,
                    dominating: dom,
                });
            }
        }
    }
    ConditionAReport {
        pass: flags.is_empty(),
        checked_points: checked,
        flags,
    }
}

/// Where a regularity constant came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum CertificateSource {
    Analytic {
        gamma0: f64,
        mu_hat: f64,
    },
    Empirical {
        t_grid: Vec<usize>,
        lag_grid: Vec<usize>,
        n_paths: usize,
        reading: ConditionBReading,
        min_estimate: f64,
    },
    /// Supplied directly by the user.
    Given,
}

/// `γ` and `n₀` such that the chain returns to `C` with probability at
/// least `γ` after any lag, from any base time at or after `n₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityCertificate {
    pub gamma: f64,
    pub n0: usize,
    pub provenance: CertificateSource,
}

impl RegularityCertificate {
    pub fn given(gamma: f64, n0: usize) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(RegularityCertificate {
            gamma,
            n0,
            provenance: CertificateSource::Given,
        })
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("gamma = {gamma} must lie in (0, 1]")))
    }
}

/// `γ₀ = min(inf_t α_{t0}, inf_t β_{t0})`.
pub fn gamma0(alpha_inf: f64, beta_inf: f64) -> Result<f64> {
    for v in [alpha_inf, beta_inf] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::domain(format!(
                "holding probability at the origin must be positive (got {v})"
            )));
        }
    }
    Ok(alpha_inf.min(beta_inf))
}

/// `γ = γ₀^{μ̂/γ₀}` with `n₀ = 0`.
pub fn gamma_analytic(gamma0: f64, mu_hat: f64) -> Result<RegularityCertificate> {
    if !(gamma0 > 0.0 && gamma0 <= 1.0) {
        return Err(Error::domain(format!(
            "gamma0 = {gamma0} must lie in (0, 1]"
        )));
    }
    if !(mu_hat >= 1.0 && mu_hat.is_finite()) {
        return Err(Error::domain(format!(
            "mu_hat = {mu_hat} must be at least 1"
        )));
    }
    Ok(RegularityCertificate {
        gamma: gamma0.powf(mu_hat / gamma0),
        n0: 0,
        provenance: CertificateSource::Analytic { gamma0, mu_hat },
    })
}

/// Which index plays the base time in the regularity inequality.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionBReading {
    /// Base time `n >= n₀`, any lag.
    #[default]
    BaseTime,
    /// Any base time, lag `>= n₀`.
    Lag,
}

/// What the regularity estimator conditions on.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "initial", rename_all = "snake_case")]
pub enum Conditioning {
    /// Start the chain in each `x ∈ C` at the base time; the worst state wins.
    #[default]
    StartInState,
    /// Run from time 0 with this law and condition on `X_n ∈ C`.
    FromInitial(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPoint {
    pub base: usize,
    pub lag: usize,
    /// Start state, for [`Conditioning::StartInState`].
    pub state: Option<usize>,
    pub observations: usize,
    pub estimate: f64,
    pub se: f64,
}

impl GammaPoint {
    pub fn lower(&self) -> f64 {
        self.estimate - SE_MULTIPLIER * self.se
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    pub points: Vec<GammaPoint>,
    /// Grid points whose conditioning event was never observed.
    pub flagged: Vec<GammaPoint>,
    /// Smallest raw estimate over observed points.
    pub min_estimate: f64,
    /// Smallest `estimate - 3·SE`.
    pub min_lower: f64,
    /// Issued when nothing is flagged and `min_lower > 0`.
    pub certificate: Option<RegularityCertificate>,
}

/// Settings for [`estimate_gamma`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaGrid {
    pub n0_candidate: usize,
    pub t_grid: Vec<usize>,
    pub lag_grid: Vec<usize>,
    pub n_paths: usize,
    #[serde(default)]
    pub reading: ConditionBReading,
    #[serde(default)]
    pub conditioning: Conditioning,
}

impl GammaGrid {
    fn pairs(&self) -> Vec<(usize, Vec<usize>)> {
        let n0 = self.n0_candidate;
        self.t_grid
            .iter()
            .filter(|&&b| self.reading == ConditionBReading::Lag || b >= n0)
            .map(|&b| {
                let lags = self
                    .lag_grid
                    .iter()
                    .copied()
                    .filter(|&l| self.reading == ConditionBReading::BaseTime || l >= n0)
                    .collect();
                (b, lags)
            })
            .filter(|(_, lags): &(usize, Vec<usize>)| !lags.is_empty())
            .collect()
    }
}

fn bernoulli_point(
    base: usize,
    lag: usize,
    state: Option<usize>,
    hits: usize,
    obs: usize,
) -> GammaPoint {
    let (estimate, se) = if obs == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let p = hits as f64 / obs as f64;
        (p, (p * (1.0 - p) / obs as f64).sqrt())
    };
    GammaPoint {
        base,
        lag,
        state,
        observations: obs,
        estimate,
        se,
    }
}

/// Monte Carlo lower bound on the regularity constant over a grid of base
/// times and lags.
pub fn estimate_gamma(
    schedule: &KernelSchedule,
    grid: &GammaGrid,
    seed: u64,
) -> Result<GammaEstimate> {
    if grid.t_grid.is_empty() || grid.lag_grid.is_empty() {
        return Err(Error::domain("regularity grids must be nonempty"));
    }
    if grid.n_paths == 0 {
        return Err(Error::domain("n_paths must be positive"));
    }
    let pairs = grid.pairs();
    if pairs.is_empty() {
        return Err(Error::domain("no grid point satisfies the n0 restriction"));
    }
    let base_seed = seed::derive_seed(seed, seed::stream::GAMMA);
    let space = schedule.space();
    let mut points = Vec::new();
    for (bi, (base, lags)) in pairs.iter().enumerate() {
        let max_lag = *lags.iter().max().expect("nonempty");
        let cell = seed::derive_seed(base_seed, bi as u64);
        match &grid.conditioning {
            Conditioning::StartInState => {
                for (xi, &x) in space.target().iter().enumerate() {
                    let stream = seed::derive_seed(cell, xi as u64);
                    let visits = count_visits(grid.n_paths, lags, max_lag, |i| {
                        Some(ChainWalker::at(schedule, x, *base, path_rng(stream, i, 0)))
                    });
                    for (li, &lag) in lags.iter().enumerate() {
                        points.push(bernoulli_point(
                            *base,
                            lag,
                            Some(x),
                            visits[li],
                            grid.n_paths,
                        ));
                    }
                }
            }
            Conditioning::FromInitial(initial) => {
                check_distribution(initial, schedule.size())?;
                let conditioned: Vec<Option<Vec<bool>>> = (0..grid.n_paths as u64)
                    .into_par_iter()
                    .map(|i| {
                        let mut w = ChainWalker::new(schedule, initial, path_rng(cell, i, 0));
                        while w.time() < *base {
                            w.step();
                        }
                        if !w.in_target() {
                            return None;
                        }
                        Some(lag_hits(&mut w, lags, max_lag))
                    })
                    .collect();
                let obs = conditioned.iter().flatten().count();
                for (li, &lag) in lags.iter().enumerate() {
                    let hits = conditioned.iter().flatten().filter(|h| h[li]).count();
                    points.push(bernoulli_point(*base, lag, None, hits, obs));
                }
            }
        }
    }
    let (flagged, observed): (Vec<GammaPoint>, Vec<GammaPoint>) =
        points.into_iter().partition(|p| p.observations == 0);
    let min_estimate = observed
        .iter()
        .map(|p| p.estimate)
        .fold(f64::INFINITY, f64::min);
    let min_lower = observed
        .iter()
        .map(GammaPoint::lower)
        .fold(f64::INFINITY, f64::min);
    let certificate = (flagged.is_empty() && min_lower > 0.0).then(|| RegularityCertificate {
        gamma: min_lower.min(1.0),
        n0: grid.n0_candidate,
        provenance: CertificateSource::Empirical {
            t_grid: grid.t_grid.clone(),
            lag_grid: grid.lag_grid.clone(),
            n_paths: grid.n_paths,
            reading: grid.reading,
            min_estimate,
        },
    });
    Ok(GammaEstimate {
        points: observed,
        flagged,
        min_estimate,
        min_lower,
        certificate,
    })
}

fn lag_hits(w: &mut ChainWalker<'_>, lags: &[usize], max_lag: usize) -> Vec<bool> {
    let mut at_lag = vec![false; max_lag + 1];
    at_lag[0] = w.in_target();
    for slot in at_lag.iter_mut().skip(1) {
        w.step();
        *slot = w.in_target();
    }
    lags.iter().map(|&l| at_lag[l]).collect()
}

fn count_visits<'a, F>(n_paths: usize, lags: &[usize], max_lag: usize, start: F) -> Vec<usize>
where
    F: Fn(u64) -> Option<ChainWalker<'a>> + Sync,
{
    let hits: Vec<Vec<bool>> = (0..n_paths as u64)
        .into_par_iter()
        .filter_map(|i| start(i).map(|mut w| lag_hits(&mut w, lags, max_lag)))
        .collect();
    (0..lags.len())
        .map(|li| hits.iter().filter(|h| h[li]).count())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Matrix, StateSpace};
    use approx::assert_abs_diff_eq;

    /// Brute force: every path of the reflected walk that leaves 0 upward at
    /// step 1 and first comes back at step `n`.
    fn enumerate_return(p: f64, n: usize) -> f64 {
        let q = 1.0 - p;
        if n < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for mask in 0u32..(1 << (n - 1)) {
            let (mut h, mut w, mut ok) = (1i32, 1.0, true);
            for i in 0..n - 1 {
                if mask >> i & 1 == 1 {
                    h += 1;
                    w *= q;
                } else {
                    h -= 1;
                    w *= p;
                }
                if h == 0 && i != n - 2 {
                    ok = false;
                    break;
                }
            }
            if ok && h == 0 {
                total += w;
            }
        }
        total
    }

    fn binom(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn coefficients_match_enumeration() {
        for &p in &[0.6, 0.75, 0.9] {
            let f = first_return_coefficients(p, 16).unwrap();
            for (n, &fn_) in f.iter().enumerate().take(17) {
                assert_abs_diff_eq!(fn_, enumerate_return(p, n), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn low_order_coefficients() {
        let f = first_return_coefficients(0.75, 6).unwrap();
        assert_eq!(f[1], 0.0);
        assert_eq!(f[3], 0.0);
        assert_abs_diff_eq!(f[2], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(f[4], 0.140625, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_binomial_agrees() {
        let p = 0.7;
        let f = first_return_coefficients(p, 40).unwrap();
        for k in 1..=20u64 {
            let cf = binom(2 * k, k) / (2 * k - 1) as f64 * (p * (1.0 - p)).powi(k as i32)
                / (2.0 * (1.0 - p));
            assert_abs_diff_eq!(f[2 * k as usize], cf, epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_bad_p() {
        assert!(first_return_coefficients(0.5, 10).is_err());
        assert!(first_return_coefficients(1.0, 10).is_err());
        assert!(random_walk_domination(0.3, 10).is_err());
    }

    #[test]
    fn domination_values() {
        let g = random_walk_domination(0.75, 400).unwrap();
        assert_abs_diff_eq!(g.g0(), 1.0 / 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(g.at(1), 1.0 / 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(g.at(2), (1.0 - 0.75) / 0.75, epsilon = 1e-12);
        assert_eq!(g.at(-5), g.g0());
        // m = E[return time] / p = 2/(2p - 1).
        assert_abs_diff_eq!(g.m().unwrap(), 4.0, epsilon = 1e-9);
        assert!(g.m().unwrap() >= 4.0 - 1e-12);
    }

    #[test]
    fn domination_tail_is_certified_even_when_short() {
        for &n in &[2usize, 3, 10, 41] {
            let g = random_walk_domination(0.75, n).unwrap();
            assert!(
                g.m().unwrap() >= 4.0 - 1e-12,
                "n = {n}: m = {}",
                g.m().unwrap()
            );
        }
    }

    #[test]
    fn validity_examples() {
        assert!(domination_valid_for(0.75, 0.1875));
        assert!(!domination_valid_for(0.9, 0.2));
        assert!(domination_valid_for(0.6, 0.24));
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma0(0.6, 0.7).unwrap(), 0.6);
        assert_eq!(gamma0(0.5, 0.5).unwrap(), 0.5);
        assert!(gamma0(0.0, 0.5).is_err());
        assert_abs_diff_eq!(
            gamma_analytic(0.5, 2.0).unwrap().gamma,
            0.0625,
            epsilon = 1e-15
        );
        assert_eq!(gamma_analytic(1.0, 7.0).unwrap().gamma, 1.0);
        let g = gamma_analytic(0.6, 5.0).unwrap();
        assert_abs_diff_eq!(g.gamma, 0.6f64.powf(5.0 / 0.6), epsilon = 1e-15);
        // 0.6^(25/3) = 0.014166; the quoted 0.01418 is a rounded figure.
        assert_abs_diff_eq!(g.gamma, 0.01418, epsilon = 2e-5);
        assert_eq!(g.n0, 0);
        assert!(gamma_analytic(0.5, 0.5).is_err());
    }

    #[test]
    fn sequence_constructor_rejects_increase() {
        assert!(DominatingSequence::new(vec![1.0, 0.5, 0.6], None).is_err());
        assert!(DominatingSequence::new(vec![1.0, -0.1], None).is_err());
        assert!(DominatingSequence::new(vec![], None).is_err());
        let g = DominatingSequence::new(vec![1.0, 0.5], None).unwrap();
        assert_eq!(g.m(), None);
        assert_eq!(g.at(10), 0.5);
    }

    fn hom(rows: &[&[f64]]) -> KernelSchedule {
        let m = Matrix::from_rows(rows).unwrap();
        KernelSchedule::homogeneous(StateSpace::new(m.rows(), [0]).unwrap(), m).unwrap()
    }

    #[test]
    fn absorbed_chain_tails_vanish() {
        let s = hom(&[&[1.0, 0.0], &[0.5, 0.5]]);
        let surf = estimate_renewal_tails(&s, &[0, 3], &[0], 20, 200, 1).unwrap();
        for row in &surf.rows {
            assert_eq!(row.g[0], 1.0);
            assert!(row.g[1..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn renewal_tails_reject_states_outside_target() {
        let s = hom(&[&[1.0, 0.0], &[0.5, 0.5]]);
        assert!(estimate_renewal_tails(&s, &[0], &[1], 20, 10, 1).is_err());
    }

    #[test]
    fn geometric_tails_match_exact() {
        // Staying in C has probability 0.5; otherwise state 1 returns at once.
        let s = hom(&[&[0.5, 0.5], &[1.0, 0.0]]);
        let surf = estimate_renewal_tails(&s, &[0], &[0], 10, 40_000, 9).unwrap();
        let row = &surf.rows[0];
        let exact = [1.0, 0.5, 0.0];
        for (n, &e) in exact.iter().enumerate() {
            assert!((row.g[n] - e).abs() <= 3.0 * row.se[n] + 1e-12, "n = {n}");
        }
    }

    #[test]
    fn condition_a_failures_and_passes() {
        let s = hom(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let surf = estimate_renewal_tails(&s, &[0, 1], &[0], 30, 2000, 4).unwrap();
        let zero = DominatingSequence::new(vec![0.0; 31], Some(0.0)).unwrap();
        assert!(!check_condition_a(&surf, &zero).pass);
        let ones = DominatingSequence::new(vec![1.0; 31], None).unwrap();
        assert!(check_condition_a(&surf, &ones).pass);
    }

    fn grid(t: Vec<usize>, lags: Vec<usize>, n_paths: usize) -> GammaGrid {
        GammaGrid {
            n0_candidate: 0,
            t_grid: t,
            lag_grid: lags,
            n_paths,
            reading: ConditionBReading::BaseTime,
            conditioning: Conditioning::StartInState,
        }
    }

    #[test]
    fn gamma_absorbed_is_one() {
        let s = hom(&[&[1.0, 0.0], &[0.5, 0.5]]);
        let est = estimate_gamma(&s, &grid(vec![0, 5], vec![0, 1, 7], 300), 2).unwrap();
        assert_eq!(est.min_lower, 1.0);
        assert_eq!(est.certificate.unwrap().gamma, 1.0);
    }

    #[test]
    fn gamma_iid_chain() {
        let s = hom(&[&[0.3, 0.7], &[0.3, 0.7]]);
        let est = estimate_gamma(&s, &grid(vec![0, 4], vec![0, 1, 2, 5], 20_000), 3).unwrap();
        assert!(
            (est.min_estimate - 0.3).abs() < 0.015,
            "{}",
            est.min_estimate
        );
        let c = est.certificate.unwrap();
        assert!(c.gamma < est.min_estimate);
    }

    #[test]
    fn gamma_rejects_periodic_chain() {
        let s = hom(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let est = estimate_gamma(&s, &grid(vec![0, 1, 2], vec![0, 1, 2], 100), 3).unwrap();
        assert!(est.min_estimate < 0.01);
        assert!(est.certificate.is_none());
    }

    #[test]
    fn gamma_flags_unobserved_conditioning() {
        // Started at 1, the alternating chain is never in C at even times.
        let s = hom(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let mut g = grid(vec![2], vec![0, 1], 50);
        g.conditioning = Conditioning::FromInitial(vec![0.0, 1.0]);
        let est = estimate_gamma(&s, &g, 3).unwrap();
        assert_eq!(est.flagged.len(), 2);
        assert!(est.certificate.is_none());
    }

    #[test]
    fn swapped_reading_filters_lags() {
        let mut g = grid(vec![0, 1, 2], vec![0, 1, 2, 3], 10);
        g.n0_candidate = 2;
        assert_eq!(g.pairs().len(), 1);
        g.reading = ConditionBReading::Lag;
        let pairs = g.pairs();
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[0].1, vec![2, 3]);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn closed_form_matches_series(p in 0.5001f64..0.9999) {
            let a = first_return_coefficients(p, 60).unwrap();
            let b = first_return_series(p, 60).unwrap();
            for k in 0..=60 {
                prop_assert!((a[k] - b[k]).abs() <= 1e-12, "k = {}: {} vs {}", k, a[k], b[k]);
            }
        }

        #[test]
        fn partial_sums_monotone_below_one(p in 0.51f64..0.99) {
            let f = first_return_coefficients(p, 400).unwrap();
            let mut acc = 0.0;
            for &x in &f {
                prop_assert!(x >= 0.0);
                acc += x;
                prop_assert!(acc <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn domination_nonincreasing(p in 0.51f64..0.99, n in 2usize..300) {
            let g = random_walk_domination(p, n).unwrap();
            prop_assert!(g.values().windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(g.values().iter().all(|&v| v >= 0.0));
            prop_assert_eq!(g.at(-1), g.g0());
        }

        #[test]
        fn gamma_analytic_monotone(g0 in 0.05f64..0.95, d in 0.001f64..0.04, mu in 1.0f64..20.0, dm in 0.01f64..5.0) {
            let base = gamma_analytic(g0, mu).unwrap().gamma;
            prop_assert!(gamma_analytic(g0 + d, mu).unwrap().gamma >= base);
            prop_assert!(gamma_analytic(g0, mu + dm).unwrap().gamma <= base);
        }
    }
}
