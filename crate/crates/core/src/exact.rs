//! Exact distribution propagation for small finite chains.
//!
//! This is the brute-force oracle the Monte Carlo estimators are checked
//! against. A single chain is propagated with absorption at `C` from time 0
//! (first hitting time), the independent pair on the product space with
//! absorption at `C × C` from time 1 (simultaneous renewal time).
//!
//! Expectations are reported as brackets. The lower end is the truncated
//! tail sum `Σ_{n<=H} P(X > n)`. The upper end needs a bound on the mass
//! beyond the horizon `H`: once both schedules are periodic, the survival
//! operator over one block of `B` steps starting at `H` repeats, and if its
//! largest row sum `ρ` is below one then `Σ_{n>=H} P(X > n) <= B P(X > H) / (1 - ρ)`.
//! Without such a contraction the upper end is unbounded.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KernelSchedule, Matrix, StateSpace};
use crate::report::{Bound, Estimate};
use crate::simulate::check_distribution;

/// Default limit on `size₁ × size₂` for [`product_tail`].
pub const DEFAULT_PRODUCT_CAP: usize = 10_000;

/// Mass-conservation tolerance checked at every propagation step.
pub const MASS_TOLERANCE: f64 = 1e-10;

const TARGET_CONTRACTION: f64 = 0.5;
const MAX_BLOCK: usize = 1 << 14;

/// `P(X = n)` for `n = 0..=horizon`, plus the mass not yet absorbed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionTable {
    pub mass: Vec<f64>,
    pub residual: f64,
}

impl DistributionTable {
    pub fn horizon(&self) -> usize {
        self.mass.len() - 1
    }

    /// `|Σ mass + residual - 1|`.
    pub fn conservation_error(&self) -> f64 {
        (self.mass.iter().sum::<f64>() + self.residual - 1.0).abs()
    }
}

/// Contraction of the survival operator past the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCertificate {
    /// Block length in steps; a multiple of the tail period.
    pub block: usize,
    /// Largest probability, over unabsorbed states, of surviving one block.
    pub contraction: f64,
}

/// Exact law of an absorption time together with its expectation bracket.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionLaw {
    pub table: DistributionTable,
    /// `P(X > n)` for `n = 0..=horizon`.
    pub survival: Vec<f64>,
    pub expectation: Estimate,
    pub certificate: Option<TailCertificate>,
}

impl AbsorptionLaw {
    pub fn mean_lower(&self) -> f64 {
        self.expectation.value
    }

    pub fn mean_upper(&self) -> f64 {
        self.expectation.upper_value()
    }
}

fn trivial_schedule() -> KernelSchedule {
    KernelSchedule::homogeneous(
        StateSpace::new(1, [0]).expect("one-state space"),
        Matrix::identity(1),
    )
    .expect("identity is stochastic")
}

/// Independent pair acting on the flattened product space `x1 * n2 + x2`.
struct Pair<'a> {
    s1: &'a KernelSchedule,
    s2: &'a KernelSchedule,
    n1: usize,
    n2: usize,
    absorbing: Vec<bool>,
}

impl<'a> Pair<'a> {
    fn new(s1: &'a KernelSchedule, s2: &'a KernelSchedule) -> Self {
        let (n1, n2) = (s1.size(), s2.size());
        let mut absorbing = vec![false; n1 * n2];
        for &a in s1.space().target() {
            for &b in s2.space().target() {
                absorbing[a * n2 + b] = true;
            }
        }
        Pair {
            s1,
            s2,
            n1,
            n2,
            absorbing,
        }
    }

    fn len(&self) -> usize {
        self.n1 * self.n2
    }

    /// `v ↦ v (P1_t ⊗ P2_t)`.
    fn forward(&self, v: &[f64], t: usize, tmp: &mut [f64], out: &mut [f64]) {
        let (p1, p2, n2) = (self.s1.kernel_at(t), self.s2.kernel_at(t), self.n2);
        tmp.fill(0.0);
        for x1 in 0..self.n1 {
            let row = &v[x1 * n2..(x1 + 1) * n2];
            let dst = &mut tmp[x1 * n2..(x1 + 1) * n2];
            for (x2, &m) in row.iter().enumerate() {
                if m != 0.0 {
                    for &(y2, p) in p2.nonzero(x2) {
                        dst[y2] += m * p;
                    }
                }
            }
        }
        out.fill(0.0);
        for x1 in 0..self.n1 {
            for &(y1, p) in p1.nonzero(x1) {
                let (src, dst) = (x1 * n2, y1 * n2);
                for x2 in 0..n2 {
                    out[dst + x2] += p * tmp[src + x2];
                }
            }
        }
    }

    /// `h ↦ (P1_t ⊗ P2_t) h`.
    fn backward(&self, h: &[f64], t: usize, tmp: &mut [f64], out: &mut [f64]) {
        let (p1, p2, n2) = (self.s1.kernel_at(t), self.s2.kernel_at(t), self.n2);
        for y1 in 0..self.n1 {
            for x2 in 0..n2 {
                tmp[y1 * n2 + x2] = p2
                    .nonzero(x2)
                    .iter()
                    .map(|&(y2, p)| p * h[y1 * n2 + y2])
                    .sum();
            }
        }
        for x1 in 0..self.n1 {
            for x2 in 0..n2 {
                out[x1 * n2 + x2] = p1
                    .nonzero(x1)
                    .iter()
                    .map(|&(y1, p)| p * tmp[y1 * n2 + x2])
                    .sum();
            }
        }
    }

    /// Drops absorbed mass, returning how much was removed.
    fn absorb(&self, v: &mut [f64]) -> f64 {
        let mut hit = 0.0;
        for (x, m) in v.iter_mut().enumerate() {
            if self.absorbing[x] {
                hit += *m;
                *m = 0.0;
            }
        }
        hit
    }

    fn period(&self) -> usize {
        lcm(self.s1.tail_period(), self.s2.tail_period())
    }

    fn tail_start(&self) -> usize {
        self.s1.tail_start().max(self.s2.tail_start())
    }

    /// Largest one-block survival probability from time `start`.
    fn block_contraction(&self, start: usize, block: usize) -> f64 {
        let n = self.len();
        let mut h: Vec<f64> = self
            .absorbing
            .iter()
            .map(|&a| if a { 0.0 } else { 1.0 })
            .collect();
        let mut tmp = vec![0.0; n];
        let mut out = vec![0.0; n];
        for s in (start..start + block).rev() {
            self.backward(&h, s, &mut tmp, &mut out);
            std::mem::swap(&mut h, &mut out);
            for (x, v) in h.iter_mut().enumerate() {
                if self.absorbing[x] {
                    *v = 0.0;
                }
            }
        }
        h.into_iter().fold(0.0, f64::max)
    }

    fn certificate(&self, horizon: usize) -> Option<TailCertificate> {
        if horizon < self.tail_start() {
            return None;
        }
        let period = self.period();
        let mut block = period;
        let mut best: Option<TailCertificate> = None;
        while block <= MAX_BLOCK.max(period) {
            let rho = self.block_contraction(horizon, block);
            if rho < 1.0 {
                let cert = TailCertificate {
                    block,
                    contraction: rho,
                };
                let better = best.is_none_or(|b| {
                    (block as f64) / (1.0 - rho) < (b.block as f64) / (1.0 - b.contraction)
                });
                if better {
                    best = Some(cert);
                }
                if rho <= TARGET_CONTRACTION {
                    break;
                }
            }
            block *= 2;
        }
        best
    }

    /// Propagates `initial`; absorption is applied from time `absorb_from`.
    fn propagate(
        &self,
        initial: Vec<f64>,
        absorb_from: usize,
        horizon: usize,
    ) -> Result<AbsorptionLaw> {
        let n = self.len();
        let mut v = initial;
        let mut tmp = vec![0.0; n];
        let mut out = vec![0.0; n];
        let mut mass = Vec::with_capacity(horizon + 1);
        let mut survival = Vec::with_capacity(horizon + 1);
        let mut absorbed_total = 0.0;
        for t in 0..=horizon {
            if t > 0 {
                self.forward(&v, t - 1, &mut tmp, &mut out);
                std::mem::swap(&mut v, &mut out);
            }
            let hit = if t >= absorb_from {
                self.absorb(&mut v)
            } else {
                0.0
            };
            absorbed_total += hit;
            mass.push(hit);
            let alive: f64 = v.iter().sum();
            if (absorbed_total + alive - 1.0).abs() > MASS_TOLERANCE {
                return Err(Error::domain(format!(
                    "mass not conserved at step {t}: {}",
                    absorbed_total + alive
                )));
            }
            survival.push(alive);
        }
        let residual = survival[horizon];
        let lower: f64 = survival.iter().sum();
        let (upper, certificate) = if residual == 0.0 {
            (Bound::Finite(lower), None)
        } else {
            match self.certificate(horizon) {
                Some(c) => {
                    let head: f64 = survival[..horizon].iter().sum();
                    let tail = c.block as f64 * residual / (1.0 - c.contraction);
                    (Bound::Finite(head + tail), Some(c))
                }
                None => (Bound::Unbounded, None),
            }
        };
        Ok(AbsorptionLaw {
            table: DistributionTable { mass, residual },
            survival,
            expectation: Estimate::exact_bracket(lower, upper),
            certificate,
        })
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Law of the first hitting time `θ₀ = inf{t >= 0 : X_t ∈ C}`, with `C` the
/// schedule's target set.
pub fn hitting_time_distribution(
    schedule: &KernelSchedule,
    initial: &[f64],
    horizon: usize,
) -> Result<AbsorptionLaw> {
    check_distribution(initial, schedule.size())?;
    if horizon == 0 {
        return Err(Error::domain("horizon must be at least 1"));
    }
    let trivial = trivial_schedule();
    let pair = Pair::new(schedule, &trivial);
    pair.propagate(initial.to_vec(), 0, horizon)
}

/// Law of the simultaneous renewal time `T = inf{t > 0 : X¹_t ∈ C, X²_t ∈ C}`
/// of two independent chains.
pub fn product_tail(
    schedule1: &KernelSchedule,
    schedule2: &KernelSchedule,
    initial1: &[f64],
    initial2: &[f64],
    horizon: usize,
    cap: usize,
) -> Result<AbsorptionLaw> {
    check_distribution(initial1, schedule1.size())?;
    check_distribution(initial2, schedule2.size())?;
    if horizon == 0 {
        return Err(Error::domain("horizon must be at least 1"));
    }
    let states = schedule1.size() * schedule2.size();
    if states > cap {
        return Err(Error::ProductTooLarge { states, cap });
    }
    let pair = Pair::new(schedule1, schedule2);
    let n2 = schedule2.size();
    let mut v = vec![0.0; states];
    for (x1, &a) in initial1.iter().enumerate() {
        for (x2, &b) in initial2.iter().enumerate() {
            v[x1 * n2 + x2] = a * b;
        }
    }
    pair.propagate(v, 1, horizon)
}

/// `E[θ₀]` for a time-homogeneous kernel by solving `(I - Q) h = 1` on the
/// states outside `C`.
pub fn expected_hitting_time_linear(
    matrix: &Matrix,
    space: &StateSpace,
    initial: &[f64],
) -> Result<f64> {
    check_distribution(initial, space.size())?;
    let outside: Vec<usize> = (0..space.size()).filter(|&x| !space.in_target(x)).collect();
    let k = outside.len();
    if k == 0 {
        return Ok(0.0);
    }
    let a = DMatrix::from_fn(k, k, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - matrix.get(outside[i], outside[j])
    });
    let h = a
        .lu()
        .solve(&DVector::from_element(k, 1.0))
        .ok_or_else(|| Error::domain("target set is not reached almost surely"))?;
    if h.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::domain("target set is not reached almost surely"));
    }
    Ok(outside
        .iter()
        .zip(h.iter())
        .map(|(&x, &hx)| initial[x] * hx)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Tail;
    use crate::simulate::dirac;
    use approx::assert_abs_diff_eq;

    fn hom(rows: &[&[f64]], target: &[usize]) -> KernelSchedule {
        let m = Matrix::from_rows(rows).unwrap();
        KernelSchedule::homogeneous(
            StateSpace::new(m.rows(), target.iter().copied()).unwrap(),
            m,
        )
        .unwrap()
    }

    #[test]
    fn geometric_hitting_time() {
        let s = hom(&[&[1.0, 0.0], &[0.5, 0.5]], &[0]);
        let law = hitting_time_distribution(&s, &dirac(2, 1), 200).unwrap();
        assert_eq!(law.table.mass[0], 0.0);
        for n in 1..=30 {
            assert_abs_diff_eq!(law.table.mass[n], 0.5f64.powi(n as i32), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(law.mean_lower(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(law.mean_upper(), 2.0, epsilon = 1e-12);
        let linear = expected_hitting_time_linear(s.kernel_at(0), s.space(), &dirac(2, 1)).unwrap();
        assert_abs_diff_eq!(linear, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn start_in_target() {
        let s = hom(&[&[0.5, 0.5], &[0.5, 0.5]], &[0]);
        let law = hitting_time_distribution(&s, &dirac(2, 0), 10).unwrap();
        assert_eq!(law.table.mass[0], 1.0);
        assert_eq!(law.mean_lower(), 0.0);
        assert_eq!(law.mean_upper(), 0.0);
    }

    #[test]
    fn absorbing_outside_target_is_unbounded() {
        let s = hom(&[&[1.0, 0.0], &[0.0, 1.0]], &[0]);
        let law = hitting_time_distribution(&s, &dirac(2, 1), 50).unwrap();
        assert_eq!(law.table.residual, 1.0);
        assert_eq!(law.expectation.upper, Some(Bound::Unbounded));
        assert!(expected_hitting_time_linear(s.kernel_at(0), s.space(), &dirac(2, 1)).is_err());
    }

    #[test]
    fn pair_absorbed_in_target() {
        let s = hom(&[&[1.0, 0.0], &[0.5, 0.5]], &[0]);
        let law =
            product_tail(&s, &s, &dirac(2, 0), &dirac(2, 0), 10, DEFAULT_PRODUCT_CAP).unwrap();
        assert_eq!(law.survival[0], 1.0);
        assert!(law.survival[1..].iter().all(|&p| p == 0.0));
        assert_eq!(law.mean_lower(), 1.0);
        assert_eq!(law.mean_upper(), 1.0);
    }

    #[test]
    fn pair_with_opposite_parity_never_meets() {
        let s = hom(&[&[0.0, 1.0], &[1.0, 0.0]], &[0]);
        let law =
            product_tail(&s, &s, &dirac(2, 0), &dirac(2, 1), 100, DEFAULT_PRODUCT_CAP).unwrap();
        assert_eq!(law.table.residual, 1.0);
        assert_eq!(law.expectation.upper, Some(Bound::Unbounded));
    }

    #[test]
    fn product_cap_enforced() {
        let s = hom(&[&[1.0, 0.0], &[0.5, 0.5]], &[0]);
        let e = product_tail(&s, &s, &dirac(2, 0), &dirac(2, 0), 10, 3).unwrap_err();
        assert!(matches!(e, Error::ProductTooLarge { states: 4, cap: 3 }));
    }

    #[test]
    fn bracket_contains_truth_with_short_horizon() {
        // E[θ₀] = 2 exactly; a horizon of 5 leaves residual 1/32.
        let s = hom(&[&[1.0, 0.0], &[0.5, 0.5]], &[0]);
        let law = hitting_time_distribution(&s, &dirac(2, 1), 5).unwrap();
        assert!(law.table.residual > 0.0);
        assert!(law.mean_lower() <= 2.0 && 2.0 <= law.mean_upper());
        assert!(law.certificate.is_some());
    }

    #[test]
    fn horizon_inside_body_has_no_certificate() {
        let space = StateSpace::new(2, [0]).unwrap();
        let m = Matrix::from_rows(&[[1.0, 0.0], [0.5, 0.5]]).unwrap();
        let s = KernelSchedule::new(space, vec![m.clone(); 10], Tail::Constant(m)).unwrap();
        let law = hitting_time_distribution(&s, &dirac(2, 1), 5).unwrap();
        assert_eq!(law.expectation.upper, Some(Bound::Unbounded));
    }

    #[test]
    fn lcm_of_periods() {
        assert_eq!(lcm(2, 3), 6);
        assert_eq!(lcm(4, 6), 12);
        assert_eq!(lcm(1, 5), 5);
    }
}
