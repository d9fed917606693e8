//! Comparison of experiments.
//!
//! An experiment is a Markov matrix `B` (states x signals). A decision maker
//! with payoff `U` (actions x states) and prior `p` picks a row-stochastic
//! decision rule `D` (signals x actions) maximizing `tr(B D U P)` with
//! `P = diag(p)`. `B` is more informative than `C` when it never yields a
//! smaller maximum, which holds exactly when `C = B M` for some Markov `M`.

pub mod simplex;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::dist::DiscreteDist;
use crate::error::{Error, Result};
use crate::par::{stream_rng, Execution};

/// Row-sum tolerance for Markov matrices.
pub const ROW_SUM_TOLERANCE: f64 = 1e-10;

/// Default feasibility tolerance of [`factorize`].
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Largest `rows * cols` accepted by the dense LP.
pub const MAX_LP_SIZE: usize = 400;

/// Row-stochastic matrix. Serialized as a JSON array of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct MarkovMatrix(DMatrix<f64>);

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let q = rows.first().map_or(0, Vec::len);
    if n == 0 || q == 0 {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != q) {
        return Err(Error::InvalidMatrix(format!(
            "row {i} has {} entries, expected {q}",
            rows[i].len()
        )));
    }
    Ok(DMatrix::from_fn(n, q, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl TryFrom<Vec<Vec<f64>>> for MarkovMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        MarkovMatrix::from_rows(&rows)
    }
}

impl From<MarkovMatrix> for Vec<Vec<f64>> {
    fn from(m: MarkovMatrix) -> Self {
        matrix_to_rows(&m.0)
    }
}

impl MarkovMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::InvalidMatrix("empty matrix".into()));
        }
        for (i, row) in m.row_iter().enumerate() {
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidMatrix(format!("row {i} has entry {v}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidMatrix(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Binary experiment with row 0 = `q` (null hypothesis) and row 1 = `p`.
    pub fn binary_experiment(p: &DiscreteDist, q: &DiscreteDist) -> Result<Self> {
        p.check_same_labels(q)?;
        let n = p.len();
        Ok(Self(DMatrix::from_fn(2, n, |i, j| {
            if i == 0 {
                q.probs()[j]
            } else {
                p.probs()[j]
            }
        })))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.0)
    }

    /// `self * other`, itself a Markov matrix (a garbling of `self`).
    pub fn compose(&self, other: &MarkovMatrix) -> Result<MarkovMatrix> {
        if self.ncols() != other.nrows() {
            return Err(Error::Dimension(format!(
                "{}x{} times {}x{}",
                self.nrows(),
                self.ncols(),
                other.nrows(),
                other.ncols()
            )));
        }
        Ok(MarkovMatrix(&self.0 * &other.0))
    }
}

/// Payoff matrix `U` (actions x states) and prior over states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PayoffRepr", into = "PayoffRepr")]
pub struct PayoffSpec {
    payoff: DMatrix<f64>,
    prior: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PayoffRepr {
    payoff: Vec<Vec<f64>>,
    prior: Vec<f64>,
}

impl TryFrom<PayoffRepr> for PayoffSpec {
    type Error = Error;

    fn try_from(r: PayoffRepr) -> Result<Self> {
        PayoffSpec::new(matrix_from_rows(&r.payoff)?, r.prior)
    }
}

impl From<PayoffSpec> for PayoffRepr {
    fn from(s: PayoffSpec) -> Self {
        PayoffRepr {
            payoff: matrix_to_rows(&s.payoff),
            prior: s.prior,
        }
    }
}

impl PayoffSpec {
    pub fn new(payoff: DMatrix<f64>, prior: Vec<f64>) -> Result<Self> {
        if payoff.ncols() != prior.len() {
            return Err(Error::Dimension(format!(
                "payoff has {} state columns, prior has {} entries",
                payoff.ncols(),
                prior.len()
            )));
        }
        if payoff.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite payoff".into()));
        }
        if prior.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::InvalidDistribution(
                "prior has a negative entry".into(),
            ));
        }
        let s: f64 = prior.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("prior sums to {s}")));
        }
        Ok(Self { payoff, prior })
    }

    pub fn payoff(&self) -> &DMatrix<f64> {
        &self.payoff
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn actions(&self) -> usize {
        self.payoff.nrows()
    }

    /// `diag(prior)`.
    pub fn prior_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.prior))
    }
}

/// Optimal decision rule: action chosen for each signal.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub value: f64,
    pub actions: Vec<usize>,
}

fn check_conform(b: &MarkovMatrix, spec: &PayoffSpec) -> Result<()> {
    if b.nrows() != spec.prior.len() {
        return Err(Error::Dimension(format!(
            "experiment has {} states, payoff has {}",
            b.nrows(),
            spec.prior.len()
        )));
    }
    Ok(())
}

/// Maximizes `tr(B D U P)` over decision rules. The objective is linear in
/// `D` and separates over signals, so picking the best action per signal
/// (lowest index on ties) is optimal.
pub fn optimal_decision(b: &MarkovMatrix, spec: &PayoffSpec) -> Result<Decision> {
    check_conform(b, spec)?;
    let bm = b.matrix();
    let u = &spec.payoff;
    let mut value = 0.0;
    let mut actions = Vec::with_capacity(b.ncols());
    for j in 0..b.ncols() {
        let mut best = (0, f64::NEG_INFINITY);
        for k in 0..u.nrows() {
            let gain: f64 = (0..b.nrows())
                .map(|i| spec.prior[i] * bm[(i, j)] * u[(k, i)])
                .sum();
            if gain > best.1 {
                best = (k, gain);
            }
        }
        value += best.1;
        actions.push(best.0);
    }
    Ok(Decision { value, actions })
}

/// `F(B, U, P) = max_D tr(B D U P)`.
pub fn max_expected_payoff(b: &MarkovMatrix, spec: &PayoffSpec) -> Result<f64> {
    Ok(optimal_decision(b, spec)?.value)
}

/// Frobenius inner product `<A, B> = sum_ij A_ij B_ij`.
pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "inner product of mismatched shapes");
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// A garbling `M` with `B M ≈ C`.
#[derive(Clone, Debug, PartialEq)]
pub struct Factorization {
    pub garbling: MarkovMatrix,
    /// `max |B M - C|`.
    pub residual: f64,
}

/// Searches for a Markov `M` with `B M = C` by phase-1 linear programming.
///
/// Variables are the entries of `M`; constraints are `B M = C` entrywise and
/// unit row sums of `M`. Returns `None` when the optimal artificial sum
/// exceeds `tol`.
pub fn factorize(b: &MarkovMatrix, c: &MarkovMatrix, tol: f64) -> Result<Option<Factorization>> {
    let (n, q, qc) = (b.nrows(), b.ncols(), c.ncols());
    if c.nrows() != n {
        return Err(Error::Dimension(format!(
            "experiments have {n} and {} states",
            c.nrows()
        )));
    }
    if n * q > MAX_LP_SIZE || n * qc > MAX_LP_SIZE || q * qc > MAX_LP_SIZE {
        return Err(Error::Dimension(format!(
            "factorization of {n}x{q} into {n}x{qc} exceeds the dense LP limit {MAX_LP_SIZE}"
        )));
    }
    let vars = q * qc;
    let rows = n * qc + q;
    let mut a = vec![0.0; rows * vars];
    let mut rhs = vec![0.0; rows];
    let (bm, cm) = (b.matrix(), c.matrix());
    for i in 0..n {
        for k in 0..qc {
            let r = i * qc + k;
            for j in 0..q {
                a[r * vars + j * qc + k] = bm[(i, j)];
            }
            rhs[r] = cm[(i, k)];
        }
    }
    for j in 0..q {
        let r = n * qc + j;
        for k in 0..qc {
            a[r * vars + j * qc + k] = 1.0;
        }
        rhs[r] = 1.0;
    }
    let sol = simplex::phase_one(&a, &rhs, rows, vars)?;
    if sol.infeasibility > tol {
        return Ok(None);
    }
    let mut m = DMatrix::from_fn(q, qc, |j, k| sol.x[j * qc + k].max(0.0));
    for mut row in m.row_iter_mut() {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row /= s;
        }
    }
    let residual = (bm * &m - cm).amax();
    Ok(Some(Factorization {
        garbling: MarkovMatrix(m),
        residual,
    }))
}

/// A decision problem on which `C` beats `B`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PayoffWitness {
    pub trial: usize,
    pub payoff: Vec<Vec<f64>>,
    pub prior: Vec<f64>,
    pub payoff_b: f64,
    pub payoff_c: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// `C = B M`; sufficient for informativeness.
    MoreInformative(Factorization),
    /// Some sampled decision problem has `F(C) > F(B) + tol`.
    NotMoreInformative(PayoffWitness),
    /// No factorization and no counterexample among the sampled payoffs.
    Undetermined { trials: usize },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::MoreInformative(_) => "MoreInformative",
            Verdict::NotMoreInformative(_) => "NotMoreInformative",
            Verdict::Undetermined { .. } => "Undetermined",
        }
    }
}

/// Rows drawn uniformly from the probability simplex.
pub fn random_markov<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> MarkovMatrix {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        let row = random_simplex(rng, cols);
        for (j, v) in row.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    MarkovMatrix(m)
}

/// Uniform point on the probability simplex (normalized exponentials).
pub fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Payoff entries i.i.d. uniform on `[-1, 1]` and a prior uniform on the simplex.
pub fn random_payoff<R: Rng>(rng: &mut R, actions: usize, states: usize) -> PayoffSpec {
    let payoff = DMatrix::from_fn(actions, states, |_, _| rng.random_range(-1.0..=1.0));
    let prior = random_simplex(rng, states);
    PayoffSpec { payoff, prior }
}

pub fn is_more_informative(
    b: &MarkovMatrix,
    c: &MarkovMatrix,
    payoff_trials: usize,
    seed: u64,
    tol: f64,
) -> Result<Verdict> {
    is_more_informative_with(b, c, payoff_trials, seed, tol, Execution::default())
}

/// Tries the factorization first, then trial 0 (identity payoff, uniform
/// prior) and `payoff_trials` seeded random decision problems.
pub fn is_more_informative_with(
    b: &MarkovMatrix,
    c: &MarkovMatrix,
    payoff_trials: usize,
    seed: u64,
    tol: f64,
    exec: Execution,
) -> Result<Verdict> {
    if let Some(f) = factorize(b, c, tol)? {
        return Ok(Verdict::MoreInformative(f));
    }
    let n = b.nrows();
    let actions = n.max(c.ncols()).max(2);
    let spec_for = |t: usize| {
        if t == 0 {
            let payoff = DMatrix::from_fn(actions, n, |k, i| if k == i { 1.0 } else { 0.0 });
            PayoffSpec {
                payoff,
                prior: vec![1.0 / n as f64; n],
            }
        } else {
            random_payoff(&mut stream_rng(seed, t as u64), actions, n)
        }
    };
    let outcomes = exec.map(payoff_trials + 1, |t| -> Result<Option<PayoffWitness>> {
        let spec = spec_for(t);
        let fb = max_expected_payoff(b, &spec)?;
        let fc = max_expected_payoff(c, &spec)?;
        Ok((fc > fb + tol).then(|| PayoffWitness {
            trial: t,
            payoff: matrix_to_rows(&spec.payoff),
            prior: spec.prior.clone(),
            payoff_b: fb,
            payoff_c: fc,
        }))
    });
    for o in outcomes {
        if let Some(w) = o? {
            return Ok(Verdict::NotMoreInformative(w));
        }
    }
    Ok(Verdict::Undetermined {
        trials: payoff_trials + 1,
    })
}
