//! Path sampling, renewal extraction, the simultaneous renewal time and the
//! alternating renewal-trial construction.
//!
//! Renewal times are indexed from zero: `tau[0] = theta[0]` is the first
//! visit to `C` (zero when the chain starts there) and
//! `tau[k] = theta[0] + ... + theta[k]`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSchedule;
use crate::report::{Estimate, Provenance};
use crate::seed::{self, path_rng};

/// Tolerance on the total mass of initial distributions.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-12;

/// Checks that `v` is a probability vector over `size` states.
pub fn check_distribution(v: &[f64], size: usize) -> Result<()> {
    if v.len() != size {
        return Err(Error::InvalidDistribution(format!(
            "length {} does not match {size} states",
            v.len()
        )));
    }
    if let Some((i, x)) = v
        .iter()
        .enumerate()
        .find(|(_, x)| !x.is_finite() || **x < 0.0)
    {
        return Err(Error::InvalidDistribution(format!("entry {i} is {x}")));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(Error::InvalidDistribution(format!(
            "entries sum to {total}"
        )));
    }
    Ok(())
}

/// Point mass at `state`.
pub fn dirac(size: usize, state: usize) -> Vec<f64> {
    let mut v = vec![0.0; size];
    v[state] = 1.0;
    v
}

fn draw_from(v: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in v.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// One chain advancing through its schedule.
#[derive(Clone, Debug)]
pub struct ChainWalker<'a> {
    schedule: &'a KernelSchedule,
    rng: ChaCha8Rng,
    state: usize,
    time: usize,
}

impl<'a> ChainWalker<'a> {
    /// Starts at time 0 with `X_0 ~ initial`.
    pub fn new(schedule: &'a KernelSchedule, initial: &[f64], mut rng: ChaCha8Rng) -> Self {
        let state = draw_from(initial, rng.gen::<f64>());
        ChainWalker {
            schedule,
            rng,
            state,
            time: 0,
        }
    }

    /// Starts in `state` at time `time`.
    pub fn at(schedule: &'a KernelSchedule, state: usize, time: usize, rng: ChaCha8Rng) -> Self {
        ChainWalker {
            schedule,
            rng,
            state,
            time,
        }
    }

    #[inline]
    pub fn state(&self) -> usize {
        self.state
    }

    #[inline]
    pub fn time(&self) -> usize {
        self.time
    }

    #[inline]
    pub fn in_target(&self) -> bool {
        self.schedule.space().in_target(self.state)
    }

    /// `X_{t+1} ~ P_t(X_t, ·)`.
    #[inline]
    pub fn step(&mut self) -> usize {
        let u = self.rng.gen::<f64>();
        self.state = self
            .schedule
            .kernel_at(self.time)
            .sample_next(self.state, u);
        self.time += 1;
        self.state
    }
}

/// `X_0, ..., X_horizon`, a deterministic function of `seed`.
pub fn sample_path(
    schedule: &KernelSchedule,
    initial: &[f64],
    seed: u64,
    horizon: usize,
) -> Result<Vec<usize>> {
    check_distribution(initial, schedule.size())?;
    let mut walker = ChainWalker::new(schedule, initial, path_rng(seed, 0, 0));
    let mut path = Vec::with_capacity(horizon + 1);
    path.push(walker.state());
    for _ in 0..horizon {
        path.push(walker.step());
    }
    Ok(path)
}

/// Renewal intervals and times read off one observed path.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Renewals {
    pub theta: Vec<usize>,
    pub tau: Vec<usize>,
    /// Last observed time; renewals after it are unknown.
    pub observed_until: usize,
}

/// Visits of `path` to the target set of `space`.
pub fn extract_renewals(path: &[usize], in_target: impl Fn(usize) -> bool) -> Renewals {
    let tau: Vec<usize> = path
        .iter()
        .enumerate()
        .filter(|&(_, &x)| in_target(x))
        .map(|(t, _)| t)
        .collect();
    Renewals {
        theta: thetas(&tau),
        tau,
        observed_until: path.len().saturating_sub(1),
    }
}

fn thetas(tau: &[usize]) -> Vec<usize> {
    let mut prev = 0;
    tau.iter()
        .map(|&t| {
            let d = t - prev;
            prev = t;
            d
        })
        .collect()
}

/// Smallest `t > 0` present in both sorted renewal-time lists.
pub fn simultaneous_renewal_time(tau1: &[usize], tau2: &[usize]) -> Option<usize> {
    let (mut i, mut j) = (0, 0);
    while i < tau1.len() && j < tau2.len() {
        let (a, b) = (tau1[i], tau2[j]);
        if a == b && a > 0 {
            return Some(a);
        }
        if a <= b {
            i += 1;
        } else {
            j += 1;
        }
    }
    None
}

/// Alternating renewal trials.
///
/// Trial 0 waits for the first renewal of chain 1 (index `>= 1`) beyond
/// `n0`. Trial `k >= 1` hands over to the other chain (chain 2 on odd `k`),
/// which looks for its first renewal that either coincides with the previous
/// trial's endpoint or lies more than `n0` steps after it. The search is by
/// time: renewal indices of the two chains are never compared. `b[k]` is the distance covered; the sequence stops at
/// the first `b[k] == 0`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSequence {
    pub nu: Vec<usize>,
    pub b: Vec<usize>,
    /// `s[k] = b[0] + ... + b[k]`.
    pub s: Vec<usize>,
    /// Index of the first zero `b`; `None` when the data ran out first.
    pub tau_trials: Option<usize>,
}

impl TrialSequence {
    /// `b[k]`, continued by zeros after `tau_trials`.
    pub fn b_at(&self, k: usize) -> Option<usize> {
        match (self.b.get(k), self.tau_trials) {
            (Some(&b), _) => Some(b),
            (None, Some(_)) => Some(0),
            (None, None) => None,
        }
    }

    /// `T' = s[tau_trials]`, the endpoint of the successful trial.
    pub fn t_prime(&self) -> Option<usize> {
        self.tau_trials.map(|k| self.s[k])
    }
}

/// Builds the trial sequence from the two renewal-time lists.
pub fn trial_sequence(tau1: &[usize], tau2: &[usize], n0: usize) -> TrialSequence {
    let mut out = TrialSequence::default();
    let Some(nu0) = (1..tau1.len()).find(|&j| tau1[j] > n0) else {
        return out;
    };
    let mut last_time = tau1[nu0];
    out.nu.push(nu0);
    out.b.push(last_time);
    out.s.push(last_time);
    let mut k = 1;
    loop {
        let chain = if k % 2 == 1 { tau2 } else { tau1 };
        let from = chain.partition_point(|&t| t < last_time);
        let found = (from..chain.len()).find(|&j| {
            let d = chain[j] - last_time;
            d == 0 || d > n0
        });
        let Some(nu) = found else {
            return out;
        };
        let b = chain[nu] - last_time;
        out.nu.push(nu);
        out.b.push(b);
        out.s.push(last_time + b);
        if b == 0 {
            out.tau_trials = Some(k);
            return out;
        }
        last_time = chain[nu];
        k += 1;
    }
}

/// Everything recorded about one simulated pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenewalTrace {
    pub chain1: Renewals,
    pub chain2: Renewals,
    /// Simultaneous renewal time; `None` when censored at `horizon`.
    pub t: Option<usize>,
    pub trials: TrialSequence,
    pub horizon: usize,
}

impl RenewalTrace {
    pub fn censored(&self) -> bool {
        self.t.is_none()
    }

    pub fn theta0(&self) -> (Option<usize>, Option<usize>) {
        (
            self.chain1.theta.first().copied(),
            self.chain2.theta.first().copied(),
        )
    }
}

/// Two independent chains with their starting laws and Monte Carlo settings.
#[derive(Clone, Debug)]
pub struct SimulationPlan {
    pub schedule1: KernelSchedule,
    pub schedule2: KernelSchedule,
    pub initial1: Vec<f64>,
    pub initial2: Vec<f64>,
    pub horizon: usize,
    pub n_paths: usize,
    pub master_seed: u64,
    /// Threshold of the trial construction.
    pub n0: usize,
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<()> {
        for (i, s) in [&self.schedule1, &self.schedule2].into_iter().enumerate() {
            let report = crate::kernel::validate_schedule(s);
            if !report.is_valid() {
                return Err(Error::InvalidSchedule(report).context(format!("chain {}", i + 1)));
            }
        }
        check_distribution(&self.initial1, self.schedule1.size())
            .map_err(|e| e.context("initial distribution of chain 1"))?;
        check_distribution(&self.initial2, self.schedule2.size())
            .map_err(|e| e.context("initial distribution of chain 2"))?;
        if self.horizon == 0 {
            return Err(Error::domain("horizon must be at least 1"));
        }
        if self.n_paths == 0 {
            return Err(Error::domain("n_paths must be at least 1"));
        }
        Ok(())
    }

    /// Simulates path `index` until its trial sequence terminates or the
    /// horizon is reached.
    pub fn trace(&self, index: u64) -> RenewalTrace {
        let seed = seed::derive_seed(self.master_seed, seed::stream::PAIR_PATHS);
        let mut w1 = ChainWalker::new(&self.schedule1, &self.initial1, path_rng(seed, index, 0));
        let mut w2 = ChainWalker::new(&self.schedule2, &self.initial2, path_rng(seed, index, 1));
        let mut tau1 = Vec::new();
        let mut tau2 = Vec::new();
        if w1.in_target() {
            tau1.push(0);
        }
        if w2.in_target() {
            tau2.push(0);
        }
        let mut t_sim = None;
        let mut window = self.horizon.min(64);
        loop {
            while w1.time() < window {
                w1.step();
                w2.step();
                let (a, b) = (w1.in_target(), w2.in_target());
                if a {
                    tau1.push(w1.time());
                }
                if b {
                    tau2.push(w2.time());
                }
                if a && b && t_sim.is_none() {
                    t_sim = Some(w1.time());
                }
            }
            if t_sim.is_some() {
                let trials = trial_sequence(&tau1, &tau2, self.n0);
                if trials.tau_trials.is_some() || window == self.horizon {
                    return self.finish(tau1, tau2, t_sim, trials, window);
                }
            } else if window == self.horizon {
                let trials = trial_sequence(&tau1, &tau2, self.n0);
                return self.finish(tau1, tau2, None, trials, window);
            }
            window = (window * 2).min(self.horizon);
        }
    }

    fn finish(
        &self,
        tau1: Vec<usize>,
        tau2: Vec<usize>,
        t: Option<usize>,
        trials: TrialSequence,
        window: usize,
    ) -> RenewalTrace {
        RenewalTrace {
            chain1: Renewals {
                theta: thetas(&tau1),
                tau: tau1,
                observed_until: window,
            },
            chain2: Renewals {
                theta: thetas(&tau2),
                tau: tau2,
                observed_until: window,
            },
            t,
            trials,
            horizon: self.horizon,
        }
    }
}

/// Applies `f` to every path's trace in parallel; output is in path order.
pub fn map_traces<R, F>(plan: &SimulationPlan, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(u64, &RenewalTrace) -> R + Sync,
{
    plan.validate()?;
    Ok((0..plan.n_paths as u64)
        .into_par_iter()
        .map(|i| f(i, &plan.trace(i)))
        .collect())
}

/// Per-path summary, one CSV row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSummary {
    pub path_id: u64,
    #[serde(rename = "T")]
    pub t: Option<usize>,
    pub theta0_1: Option<usize>,
    pub theta0_2: Option<usize>,
    pub tau_trials: Option<usize>,
    pub censored: bool,
}

/// One point of an empirical survival curve `P̂(X > n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub n: usize,
    pub p: f64,
    pub se: f64,
}

/// Survival curve `P̂(X > n)`, `n = 0..=max_n`, from observed values and
/// a count of right-censored ones (censored values exceed every `n`).
pub fn survival_curve(values: &[usize], censored: usize, max_n: usize) -> Vec<TailPoint> {
    let total = (values.len() + censored) as f64;
    let mut hist = vec![0usize; max_n + 2];
    for &v in values {
        hist[v.min(max_n + 1)] += 1;
    }
    let mut above = values.len() + censored;
    (0..=max_n)
        .map(|n| {
            above -= hist[n];
            let p = above as f64 / total;
            TailPoint {
                n,
                p,
                se: (p * (1.0 - p) / total).sqrt(),
            }
        })
        .collect()
}

/// Monte Carlo summary of `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtEstimate {
    pub n_paths: usize,
    /// Mean of `min(T, horizon + 1)`; only a lower bound on `E[T]` when
    /// `censored > 0`.
    pub mean: Estimate,
    pub lower_bound_only: bool,
    pub censored: usize,
    pub censoring_rate: f64,
    pub max_observed: Option<usize>,
    pub tail: Vec<TailPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<Vec<PathSummary>>,
}

/// Estimates `E[T]`, its standard error and the survival curve of `T`.
pub fn estimate_et(plan: &SimulationPlan, keep_paths: bool) -> Result<EtEstimate> {
    let paths = map_traces(plan, |i, tr| {
        let (a, b) = tr.theta0();
        PathSummary {
            path_id: i,
            t: tr.t,
            theta0_1: a,
            theta0_2: b,
            tau_trials: tr.trials.tau_trials,
            censored: tr.censored(),
        }
    })?;
    summarize(plan, paths, keep_paths)
}

fn summarize(
    plan: &SimulationPlan,
    paths: Vec<PathSummary>,
    keep_paths: bool,
) -> Result<EtEstimate> {
    let n = paths.len();
    let observed: Vec<usize> = paths.iter().filter_map(|p| p.t).collect();
    let censored = n - observed.len();
    if observed.is_empty() {
        return Err(Error::AllCensored {
            paths: n,
            horizon: plan.horizon,
        });
    }
    let cap = (plan.horizon + 1) as f64;
    let values = paths.iter().map(|p| p.t.map_or(cap, |t| t as f64));
    let (mean, se) = mean_and_se(values, n);
    let max_observed = observed.iter().copied().max();
    let max_n = if censored > 0 {
        plan.horizon
    } else {
        max_observed.unwrap_or(0)
    };
    Ok(EtEstimate {
        n_paths: n,
        mean: Estimate::mc(mean, se),
        lower_bound_only: censored > 0,
        censored,
        censoring_rate: censored as f64 / n as f64,
        max_observed,
        tail: survival_curve(&observed, censored, max_n),
        paths: keep_paths.then_some(paths),
    })
}

/// Sample mean and its standard error (unbiased variance).
pub fn mean_and_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (nf - 1.0) / nf).sqrt())
}

impl EtEstimate {
    pub fn provenance(&self) -> Provenance {
        self.mean.provenance
    }
}
