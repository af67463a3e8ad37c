//! Time-inhomogeneous transition kernels on finite state spaces.
//!
//! A [`KernelSchedule`] is a finite `body` of matrices for times
//! `0..body.len()` followed by a `tail` that governs every later time. A
//! periodic tail is indexed by absolute time: for `t >= body.len()` the
//! kernel is `tail[t % period]`, so a schedule whose body is empty is simply
//! `P_t = tail[t % period]`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums of user-supplied matrices must be within this distance of 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// States `0..size` together with the target set `C`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSpace {
    size: usize,
    target: Vec<usize>,
    in_target: Vec<bool>,
}

impl StateSpace {
    pub fn new(size: usize, target: impl IntoIterator<Item = usize>) -> Result<Self> {
        if size == 0 {
            return Err(Error::StateSpace(
                "state space must have at least one state".into(),
            ));
        }
        let mut in_target = vec![false; size];
        let mut members = Vec::new();
        for x in target {
            if x >= size {
                return Err(Error::StateSpace(format!(
                    "target state {x} outside 0..{size}"
                )));
            }
            if !in_target[x] {
                in_target[x] = true;
                members.push(x);
            }
        }
        if members.is_empty() {
            return Err(Error::StateSpace("target set is empty".into()));
        }
        members.sort_unstable();
        Ok(StateSpace {
            size,
            target: members,
            in_target,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Members of `C`, ascending.
    pub fn target(&self) -> &[usize] {
        &self.target
    }

    #[inline]
    pub fn in_target(&self, state: usize) -> bool {
        self.in_target[state]
    }

    /// Same states with a different target set.
    pub fn with_target(&self, target: impl IntoIterator<Item = usize>) -> Result<Self> {
        StateSpace::new(self.size, target)
    }
}

/// Dense row-major matrix plus the nonzero pattern of each row, which is
/// what the samplers and the sparse propagators walk.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    nonzero: Vec<Vec<(usize, f64)>>,
}

impl Matrix {
    /// Builds a matrix from rows; rows must all have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(Error::InvalidSchedule(ValidationReport {
                    violations: vec![Violation::RaggedRow {
                        row: i,
                        len: row.len(),
                        expected: n_cols,
                    }],
                }));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix::from_parts(n_rows, n_cols, data))
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Matrix::from_parts(n, n, data)
    }

    fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        let nonzero = (0..rows)
            .map(|i| {
                data[i * cols..(i + 1) * cols]
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect();
        Matrix {
            rows,
            cols,
            data,
            nonzero,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Nonzero `(column, value)` pairs of row `i`, ascending by column.
    #[inline]
    pub fn nonzero(&self, i: usize) -> &[(usize, f64)] {
        &self.nonzero[i]
    }

    /// Inverse-CDF draw from row `from` given `u` in `[0, 1)`.
    #[inline]
    pub fn sample_next(&self, from: usize, u: f64) -> usize {
        let row = &self.nonzero[from];
        let mut acc = 0.0;
        for &(j, p) in row {
            acc += p;
            if u < acc {
                return j;
            }
        }
        // u landed in the rounding gap below 1.
        row.last().map_or(from, |&(j, _)| j)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Rule for times at or after the end of the body.
#[derive(Clone, Debug, PartialEq)]
pub enum Tail {
    Constant(Matrix),
    /// `P_t = matrices[t % matrices.len()]`.
    Periodic(Vec<Matrix>),
}

impl Tail {
    pub fn period(&self) -> usize {
        match self {
            Tail::Constant(_) => 1,
            Tail::Periodic(ms) => ms.len().max(1),
        }
    }
}

/// Location of a matrix inside a schedule, used in violation reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "part", content = "index", rename_all = "snake_case")]
pub enum MatrixRef {
    Body(usize),
    Tail(usize),
}

impl fmt::Display for MatrixRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixRef::Body(t) => write!(f, "body[{t}]"),
            MatrixRef::Tail(i) => write!(f, "tail[{i}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Shape {
        matrix: MatrixRef,
        rows: usize,
        cols: usize,
        expected: usize,
    },
    RaggedRow {
        row: usize,
        len: usize,
        expected: usize,
    },
    NonFinite {
        matrix: MatrixRef,
        row: usize,
        col: usize,
    },
    NegativeEntry {
        matrix: MatrixRef,
        row: usize,
        col: usize,
        value: f64,
    },
    EntryAboveOne {
        matrix: MatrixRef,
        row: usize,
        col: usize,
        value: f64,
    },
    RowSum {
        matrix: MatrixRef,
        row: usize,
        sum: f64,
    },
    EmptyPeriodicTail,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape {
                matrix,
                rows,
                cols,
                expected,
            } => write!(
                f,
                "{matrix}: shape {rows}x{cols}, expected {expected}x{expected}"
            ),
            Violation::RaggedRow { row, len, expected } => {
                write!(f, "row {row} has {len} entries, expected {expected}")
            }
            Violation::NonFinite { matrix, row, col } => {
                write!(f, "{matrix}: non-finite entry at ({row}, {col})")
            }
            Violation::NegativeEntry {
                matrix,
                row,
                col,
                value,
            } => write!(f, "{matrix}: negative entry {value} at ({row}, {col})"),
            Violation::EntryAboveOne {
                matrix,
                row,
                col,
                value,
            } => write!(f, "{matrix}: entry {value} above 1 at ({row}, {col})"),
            Violation::RowSum { matrix, row, sum } => {
                write!(f, "{matrix}: row {row} sums to {sum}")
            }
            Violation::EmptyPeriodicTail => write!(f, "periodic tail has no matrices"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Family of one-step kernels `P_t`, defined for every `t >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSchedule {
    space: StateSpace,
    body: Vec<Matrix>,
    tail: Tail,
}

impl KernelSchedule {
    /// Validated constructor.
    pub fn new(space: StateSpace, body: Vec<Matrix>, tail: Tail) -> Result<Self> {
        let schedule = KernelSchedule { space, body, tail };
        let report = validate_schedule(&schedule);
        if report.is_valid() {
            Ok(schedule)
        } else {
            Err(Error::InvalidSchedule(report))
        }
    }

    /// Skips validation; [`validate_schedule`] reports what is wrong.
    pub fn new_unvalidated(space: StateSpace, body: Vec<Matrix>, tail: Tail) -> Self {
        KernelSchedule { space, body, tail }
    }

    /// Time-homogeneous schedule.
    pub fn homogeneous(space: StateSpace, matrix: Matrix) -> Result<Self> {
        KernelSchedule::new(space, Vec::new(), Tail::Constant(matrix))
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn size(&self) -> usize {
        self.space.size()
    }

    pub fn body(&self) -> &[Matrix] {
        &self.body
    }

    pub fn tail(&self) -> &Tail {
        &self.tail
    }

    /// First time index governed by the tail.
    pub fn tail_start(&self) -> usize {
        self.body.len()
    }

    pub fn tail_period(&self) -> usize {
        self.tail.period()
    }

    /// `P_t`.
    #[inline]
    pub fn kernel_at(&self, t: usize) -> &Matrix {
        if t < self.body.len() {
            return &self.body[t];
        }
        match &self.tail {
            Tail::Constant(m) => m,
            Tail::Periodic(ms) => &ms[t % ms.len()],
        }
    }

    /// Same kernels, different target set.
    pub fn with_target(&self, target: impl IntoIterator<Item = usize>) -> Result<Self> {
        Ok(KernelSchedule {
            space: self.space.with_target(target)?,
            body: self.body.clone(),
            tail: self.tail.clone(),
        })
    }

    fn matrices(&self) -> impl Iterator<Item = (MatrixRef, &Matrix)> {
        let body = self
            .body
            .iter()
            .enumerate()
            .map(|(t, m)| (MatrixRef::Body(t), m));
        let tail: Vec<&Matrix> = match &self.tail {
            Tail::Constant(m) => vec![m],
            Tail::Periodic(ms) => ms.iter().collect(),
        };
        body.chain(
            tail.into_iter()
                .enumerate()
                .map(|(i, m)| (MatrixRef::Tail(i), m)),
        )
    }
}

/// Lists every shape, sign and row-sum problem in the schedule.
pub fn validate_schedule(schedule: &KernelSchedule) -> ValidationReport {
    let n = schedule.size();
    let mut violations = Vec::new();
    if let Tail::Periodic(ms) = &schedule.tail {
        if ms.is_empty() {
            violations.push(Violation::EmptyPeriodicTail);
        }
    }
    for (at, m) in schedule.matrices() {
        if m.rows() != n || m.cols() != n {
            violations.push(Violation::Shape {
                matrix: at,
                rows: m.rows(),
                cols: m.cols(),
                expected: n,
            });
            continue;
        }
        for i in 0..n {
            let mut sum = 0.0;
            let mut finite = true;
            for (j, &v) in m.row(i).iter().enumerate() {
                if !v.is_finite() {
                    violations.push(Violation::NonFinite {
                        matrix: at,
                        row: i,
                        col: j,
                    });
                    finite = false;
                    continue;
                }
                if v < 0.0 {
                    violations.push(Violation::NegativeEntry {
                        matrix: at,
                        row: i,
                        col: j,
                        value: v,
                    });
                } else if v > 1.0 {
                    violations.push(Violation::EntryAboveOne {
                        matrix: at,
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                sum += v;
            }
            if finite && (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                violations.push(Violation::RowSum {
                    matrix: at,
                    row: i,
                    sum,
                });
            }
        }
    }
    ValidationReport { violations }
}

/// Down-probabilities `α_{tj}` for a single time step: one value for all
/// states below the cap, or one value per state `0..cap`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaRow {
    Uniform(f64),
    PerState(Vec<f64>),
}

impl AlphaRow {
    #[inline]
    pub fn at(&self, j: usize) -> f64 {
        match self {
            AlphaRow::Uniform(a) => *a,
            AlphaRow::PerState(v) => v[j],
        }
    }

    fn values(&self, cap: usize) -> Vec<f64> {
        (0..cap).map(|j| self.at(j)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "alphas", rename_all = "snake_case")]
pub enum AlphaTail {
    Constant(AlphaRow),
    /// Indexed by absolute time, like [`Tail::Periodic`].
    Periodic(Vec<AlphaRow>),
}

/// Truncated birth-death chain on `0..=cap` with `C = {0}`.
///
/// At time `t`, an interior state `j` moves to `j - 1` with probability
/// `α_{tj}` and to `j + 1` otherwise; state 0 stays put with `α_{t0}` and
/// moves to 1 otherwise; the cap state moves down with probability 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathSpec {
    /// `α_{t·}` for `t < alpha_table.len()`.
    #[serde(default)]
    pub alpha_table: Vec<AlphaRow>,
    pub tail: AlphaTail,
    pub cap: usize,
}

impl BirthDeathSpec {
    /// Homogeneous chain with `α_{tj} = alpha` everywhere below the cap.
    pub fn constant(alpha: f64, cap: usize) -> Self {
        BirthDeathSpec {
            alpha_table: Vec::new(),
            tail: AlphaTail::Constant(AlphaRow::Uniform(alpha)),
            cap,
        }
    }

    /// `α_{tj} = alphas[t % alphas.len()]`.
    pub fn periodic(alphas: &[f64], cap: usize) -> Self {
        BirthDeathSpec {
            alpha_table: Vec::new(),
            tail: AlphaTail::Periodic(alphas.iter().map(|&a| AlphaRow::Uniform(a)).collect()),
            cap,
        }
    }

    fn rows(&self) -> impl Iterator<Item = &AlphaRow> {
        let tail: Vec<&AlphaRow> = match &self.tail {
            AlphaTail::Constant(r) => vec![r],
            AlphaTail::Periodic(rs) => rs.iter().collect(),
        };
        self.alpha_table.iter().chain(tail)
    }

    fn check(&self) -> Result<()> {
        if self.cap < 2 {
            return Err(Error::domain(format!(
                "birth-death cap must be at least 2, got {}",
                self.cap
            )));
        }
        if let AlphaTail::Periodic(rs) = &self.tail {
            if rs.is_empty() {
                return Err(Error::domain("periodic alpha tail is empty"));
            }
        }
        for row in self.rows() {
            if let AlphaRow::PerState(v) = row {
                if v.len() != self.cap {
                    return Err(Error::domain(format!(
                        "per-state alpha row has {} entries, expected cap = {}",
                        v.len(),
                        self.cap
                    )));
                }
            }
            for j in 0..self.cap {
                let a = row.at(j);
                if !(a > 0.0 && a < 1.0) {
                    return Err(Error::domain(format!(
                        "alpha = {a} at state {j} is outside (0, 1)"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Every `α_{tj}` that occurs, over all times and states below the cap.
    pub fn all_alphas(&self) -> Vec<f64> {
        self.rows().flat_map(|r| r.values(self.cap)).collect()
    }

    /// `inf_t α_{t0}`.
    pub fn inf_alpha0(&self) -> f64 {
        self.rows().map(|r| r.at(0)).fold(f64::INFINITY, f64::min)
    }

    /// `sup_{t,j} α_{tj}(1 - α_{tj})`.
    pub fn sup_alpha_variance(&self) -> f64 {
        self.all_alphas()
            .into_iter()
            .map(|a| a * (1.0 - a))
            .fold(0.0, f64::max)
    }

    /// `inf_{t, j >= 1} α_{tj}`: the weakest downward pull off the origin.
    pub fn inf_interior_alpha(&self) -> f64 {
        self.rows()
            .flat_map(|r| (1..self.cap).map(move |j| r.at(j)))
            .fold(f64::INFINITY, f64::min)
    }
}

fn birth_death_matrix(row: &AlphaRow, cap: usize) -> Matrix {
    let n = cap + 1;
    let mut data = vec![0.0; n * n];
    let a0 = row.at(0);
    data[0] = a0;
    data[1] = 1.0 - a0;
    for j in 1..cap {
        let a = row.at(j);
        data[j * n + j - 1] = a;
        data[j * n + j + 1] = 1.0 - a;
    }
    data[cap * n + cap - 1] = 1.0;
    Matrix::from_parts(n, n, data)
}

/// Kernel schedule of a truncated birth-death chain, target set `{0}`.
pub fn birth_death_schedule(spec: &BirthDeathSpec) -> Result<KernelSchedule> {
    spec.check()?;
    let space = StateSpace::new(spec.cap + 1, [0])?;
    let body = spec
        .alpha_table
        .iter()
        .map(|r| birth_death_matrix(r, spec.cap))
        .collect();
    let tail = match &spec.tail {
        AlphaTail::Constant(r) => Tail::Constant(birth_death_matrix(r, spec.cap)),
        AlphaTail::Periodic(rs) => {
            Tail::Periodic(rs.iter().map(|r| birth_death_matrix(r, spec.cap)).collect())
        }
    };
    KernelSchedule::new(space, body, tail)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn identity_is_valid() {
        let s = KernelSchedule::homogeneous(StateSpace::new(3, [0]).unwrap(), Matrix::identity(3));
        assert!(s.is_ok());
    }

    #[test]
    fn reports_row_sum() {
        let space = StateSpace::new(2, [0]).unwrap();
        let bad = m(&[&[0.6, 0.5], &[0.0, 1.0]]);
        let s = KernelSchedule::new_unvalidated(space, vec![], Tail::Constant(bad));
        let report = validate_schedule(&s);
        assert_eq!(report.violations.len(), 1);
        let text = report.violations[0].to_string();
        assert!(text.contains("row 0 sums to 1.1"), "{text}");
    }

    #[test]
    fn reports_negative_entry() {
        let space = StateSpace::new(2, [0]).unwrap();
        let bad = m(&[&[1.1, -0.1], &[0.0, 1.0]]);
        let s = KernelSchedule::new_unvalidated(space, vec![], Tail::Constant(bad));
        let report = validate_schedule(&s);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NegativeEntry { .. })));
        assert!(report.to_string().contains("negative entry"));
    }

    #[test]
    fn reports_shape_and_empty_tail() {
        let space = StateSpace::new(3, [0]).unwrap();
        let s = KernelSchedule::new_unvalidated(
            space,
            vec![Matrix::identity(2)],
            Tail::Periodic(vec![]),
        );
        let report = validate_schedule(&s);
        assert!(report.violations.contains(&Violation::EmptyPeriodicTail));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Shape { expected: 3, .. })));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0]]).is_err());
    }

    #[test]
    fn kernel_at_body_and_tails() {
        let space = StateSpace::new(2, [0]).unwrap();
        let a = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let b = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let d = m(&[&[0.5, 0.5], &[0.5, 0.5]]);

        let s =
            KernelSchedule::new(space.clone(), vec![a.clone()], Tail::Constant(b.clone())).unwrap();
        assert_eq!(s.kernel_at(0), &a);
        assert_eq!(s.kernel_at(1), &b);

        let s = KernelSchedule::new(
            space.clone(),
            vec![a.clone()],
            Tail::Periodic(vec![b.clone(), d.clone()]),
        )
        .unwrap();
        assert_eq!(s.kernel_at(0), &a);
        assert_eq!(s.kernel_at(3), &d);
        assert_eq!(s.kernel_at(2), &b);

        let s = KernelSchedule::new(space, vec![], Tail::Constant(b.clone())).unwrap();
        assert_eq!(s.kernel_at(1_000_000), &b);
    }

    #[test]
    fn periodic_tail_repeats() {
        let spec = BirthDeathSpec {
            alpha_table: vec![AlphaRow::Uniform(0.9), AlphaRow::Uniform(0.6)],
            tail: AlphaTail::Periodic(vec![
                AlphaRow::Uniform(0.7),
                AlphaRow::Uniform(0.8),
                AlphaRow::Uniform(0.75),
            ]),
            cap: 4,
        };
        let s = birth_death_schedule(&spec).unwrap();
        for t in s.tail_start()..40 {
            assert_eq!(s.kernel_at(t), s.kernel_at(t + s.tail_period()));
        }
    }

    #[test]
    fn birth_death_rows() {
        let s = birth_death_schedule(&BirthDeathSpec::constant(0.75, 3)).unwrap();
        let p = s.kernel_at(0);
        assert_eq!(p.row(1), &[0.75, 0.0, 0.25, 0.0]);
        assert_eq!(p.row(0), &[0.75, 0.25, 0.0, 0.0]);
        assert_eq!(p.row(3), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(s.space().target(), &[0]);
    }

    #[test]
    fn birth_death_rejects_bad_alpha() {
        assert!(birth_death_schedule(&BirthDeathSpec::constant(1.0, 3)).is_err());
        assert!(birth_death_schedule(&BirthDeathSpec::constant(0.0, 3)).is_err());
        assert!(birth_death_schedule(&BirthDeathSpec::constant(0.5, 1)).is_err());
        let spec = BirthDeathSpec {
            alpha_table: vec![AlphaRow::PerState(vec![0.5, 0.5])],
            tail: AlphaTail::Constant(AlphaRow::Uniform(0.7)),
            cap: 3,
        };
        assert!(birth_death_schedule(&spec).is_err());
    }

    #[test]
    fn birth_death_summaries() {
        let spec = BirthDeathSpec {
            alpha_table: vec![AlphaRow::PerState(vec![0.6, 0.9, 0.8])],
            tail: AlphaTail::Periodic(vec![AlphaRow::Uniform(0.7), AlphaRow::Uniform(0.8)]),
            cap: 3,
        };
        assert_eq!(spec.inf_alpha0(), 0.6);
        assert!((spec.sup_alpha_variance() - 0.24).abs() < 1e-15);
        assert_eq!(spec.inf_interior_alpha(), 0.7);
    }

    #[test]
    fn sample_next_walks_cdf() {
        let p = m(&[&[0.25, 0.0, 0.75], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert_eq!(p.sample_next(0, 0.0), 0);
        assert_eq!(p.sample_next(0, 0.2499), 0);
        assert_eq!(p.sample_next(0, 0.25), 2);
        assert_eq!(p.sample_next(0, 0.999_999_999), 2);
        assert_eq!(p.sample_next(1, 0.5), 1);
    }

    #[test]
    fn state_space_checks() {
        assert!(StateSpace::new(0, [0]).is_err());
        assert!(StateSpace::new(3, []).is_err());
        assert!(StateSpace::new(3, [3]).is_err());
        let s = StateSpace::new(4, [2, 0, 2]).unwrap();
        assert_eq!(s.target(), &[0, 2]);
        assert!(s.in_target(2) && !s.in_target(1));
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn alpha_row(cap: usize) -> impl Strategy<Value = AlphaRow> {
        prop_oneof![
            (0.01f64..0.99).prop_map(AlphaRow::Uniform),
            proptest::collection::vec(0.01f64..0.99, cap).prop_map(AlphaRow::PerState),
        ]
    }

    proptest! {
        #[test]
        fn birth_death_rows_are_stochastic(
            cap in 2usize..12,
            seed_rows in proptest::collection::vec(0.01f64..0.99, 1..6),
            t in 0usize..50,
        ) {
            let spec = BirthDeathSpec::periodic(&seed_rows, cap);
            let s = birth_death_schedule(&spec).unwrap();
            prop_assert!(validate_schedule(&s).is_valid());
            let p = s.kernel_at(t);
            for i in 0..=cap {
                prop_assert!(p.nonzero(i).len() <= 2);
                let sum: f64 = p.row(i).iter().sum();
                prop_assert_eq!(sum, 1.0);
            }
        }

        #[test]
        fn per_state_tables_validate(cap in 2usize..8, rows in proptest::collection::vec(alpha_row(7), 1..4)) {
            let rows: Vec<AlphaRow> = rows
                .into_iter()
                .map(|r| match r {
                    AlphaRow::PerState(v) => AlphaRow::PerState(v[..cap].to_vec()),
                    u => u,
                })
                .collect();
            let spec = BirthDeathSpec {
                alpha_table: rows.clone(),
                tail: AlphaTail::Constant(rows[0].clone()),
                cap,
            };
            let s = birth_death_schedule(&spec).unwrap();
            for t in 0..rows.len() + 3 {
                let p = s.kernel_at(t);
                for i in 0..=cap {
                    let sum: f64 = p.row(i).iter().sum();
                    prop_assert!((sum - 1.0).abs() <= ROW_SUM_TOLERANCE);
                }
            }
        }
    }
}
