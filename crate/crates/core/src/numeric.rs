//! Parameters, covariance matrices and numeric effect recovery.
//!
//! Matrices indexed by observed nodes use the graph's observed order.
//! `Λ` is `n × n` with `Λ[u, w] = λ_{uw}` for an edge `u -> w`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, LatentDigraph, NodeSet, DEFAULT_TREK_BOUND};
use crate::lsc::{verify_certificate, LscCertificate, LscError};

pub type Matrix = DMatrix<f64>;

/// Determinants below this (in absolute value) count as singular when
/// sampling.
pub const REGULARITY_TOL: f64 = 1e-6;
/// Recovery aborts a step whose system has a larger condition number.
pub const CONDITION_ABORT: f64 = 1e12;
/// Scaled determinants and relative singular values below this are zero.
pub const ZERO_TOL: f64 = 1e-9;
const MAX_TRIES: usize = 100;
/// Draws with `I − Λ_LL` or `I − Λ̄` worse conditioned than this are
/// treated as near-singular and redrawn.
pub const SAMPLING_CONDITION_LIMIT: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Lsc(#[from] LscError),
    #[error("no regular parameters after {tries} draws: det({which}) = {det:e}")]
    NotRegular { which: &'static str, det: f64, tries: usize },
    #[error("singular matrix {0}")]
    Singular(&'static str),
    #[error("step for {v}: system is numerically singular (condition number {condition:e})")]
    SingularStep { v: String, condition: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },
    #[error("certificate does not verify: {0}")]
    Unverifiable(String),
    #[error("vanishing denominator {0:e}")]
    VanishingDenominator(f64),
    #[error("latent variance of {0} is not 1")]
    LatentVarianceNotUnit(String),
    #[error("{0} has a semi-direct effect on itself")]
    SelfEffect(String),
    #[error("malformed matrix: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    /// Magnitude range of edge coefficients; the sign is uniform.
    pub coef_range: (f64, f64),
    pub var_range: (f64, f64),
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { coef_range: (0.5, 1.5), var_range: (0.5, 1.5) }
    }
}

/// Edge coefficients aligned with `g.edges()` and node variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    pub lambda: Vec<f64>,
    pub phi: Vec<f64>,
    pub seed: u64,
    /// Draws rejected as non-regular before this one.
    pub retries: usize,
}

impl ParameterPoint {
    pub fn lambda_matrix(&self, g: &LatentDigraph) -> Matrix {
        let n = g.n_nodes();
        let mut m = Matrix::zeros(n, n);
        for (&(u, w), &l) in g.edges().iter().zip(&self.lambda) {
            m[(u, w)] = l;
        }
        m
    }

    pub fn coefficient(&self, g: &LatentDigraph, u: usize, w: usize) -> Option<f64> {
        g.edge_index(u, w).map(|e| self.lambda[e])
    }

    /// Same point with every latent variance set to 1.
    pub fn with_unit_latent_variances(&self, g: &LatentDigraph) -> Self {
        let mut p = self.clone();
        for h in g.latent() {
            p.phi[h] = 1.0;
        }
        p
    }

    fn check(&self, g: &LatentDigraph) -> Result<(), NumericError> {
        if self.lambda.len() != g.edges().len() || self.phi.len() != g.n_nodes() {
            return Err(NumericError::Dimension {
                expected: format!("{} edges, {} nodes", g.edges().len(), g.n_nodes()),
                actual: format!("{} coefficients, {} variances", self.lambda.len(), self.phi.len()),
            });
        }
        Ok(())
    }
}

fn blocks(g: &LatentDigraph, lambda: &Matrix) -> (Matrix, Matrix, Matrix, Matrix) {
    let (no, nl) = (g.n_observed(), g.n_latent());
    (
        lambda.view((0, 0), (no, no)).into_owned(),
        lambda.view((0, no), (no, nl)).into_owned(),
        lambda.view((no, 0), (nl, no)).into_owned(),
        lambda.view((no, no), (nl, nl)).into_owned(),
    )
}

#[cfg(test)]
fn regularity_dets(g: &LatentDigraph, p: &ParameterPoint) -> (f64, f64) {
    let (a, b) = regularity_matrices(g, p);
    (a.determinant(), b.map_or(0.0, |b| b.determinant()))
}

/// `I − Λ_LL` and, when defined, `I − Λ̄`.
fn regularity_matrices(g: &LatentDigraph, p: &ParameterPoint) -> (Matrix, Option<Matrix>) {
    let (_, _, _, ll) = blocks(g, &p.lambda_matrix(g));
    let nl = g.n_latent();
    let no = g.n_observed();
    let bar = semi_direct_matrix(g, p).ok().map(|lb| Matrix::identity(no, no) - lb);
    (Matrix::identity(nl, nl) - ll, bar)
}

/// Uniform coefficients with random sign and uniform variances, redrawn
/// until `I − Λ_LL` and `I − Λ̄` are invertible and well conditioned.
pub fn sample_parameters(g: &LatentDigraph, seed: u64, cfg: &SamplingConfig) -> Result<ParameterPoint, NumericError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c0, c1) = cfg.coef_range;
    let (v0, v1) = cfg.var_range;
    let mut last = ("I - Λ_LL", 0.0);
    for retries in 0..MAX_TRIES {
        let lambda = g
            .edges()
            .iter()
            .map(|_| {
                let x = rng.random_range(c0..=c1);
                if rng.random_bool(0.5) { -x } else { x }
            })
            .collect();
        let phi = (0..g.n_nodes()).map(|_| rng.random_range(v0..=v1)).collect();
        let p = ParameterPoint { lambda, phi, seed, retries };
        let (ll, bar) = regularity_matrices(g, &p);
        let det_ll = ll.determinant();
        let det_bar = bar.as_ref().map_or(0.0, |b| b.determinant());
        if det_ll.abs() <= REGULARITY_TOL || condition_number(&ll) > SAMPLING_CONDITION_LIMIT {
            last = ("I - Λ_LL", det_ll);
        } else if det_bar.abs() <= REGULARITY_TOL
            || bar.as_ref().is_none_or(|b| condition_number(b) > SAMPLING_CONDITION_LIMIT)
        {
            last = ("I - Λ̄", det_bar);
        } else {
            return Ok(p);
        }
    }
    Err(NumericError::NotRegular { which: last.0, det: last.1, tries: MAX_TRIES })
}

/// `(I − Λ_LL)^{-1}`.
fn latent_inverse(ll: Matrix) -> Result<Matrix, NumericError> {
    let n = ll.nrows();
    (Matrix::identity(n, n) - ll).try_inverse().ok_or(NumericError::Singular("I - Λ_LL"))
}

/// `Λ̄ = Λ_OO + Λ_OL (I − Λ_LL)^{-1} Λ_LO`.
pub fn semi_direct_matrix(g: &LatentDigraph, p: &ParameterPoint) -> Result<Matrix, NumericError> {
    p.check(g)?;
    let (oo, ol, lo, ll) = blocks(g, &p.lambda_matrix(g));
    Ok(oo + ol * latent_inverse(ll)? * lo)
}

/// `Ω = Λ_LOᵀ (I − Λ_LL)^{-T} Φ_LL (I − Λ_LL)^{-1} Λ_LO + Φ_OO`.
pub fn omega_matrix(g: &LatentDigraph, p: &ParameterPoint) -> Result<Matrix, NumericError> {
    p.check(g)?;
    let (_, _, lo, ll) = blocks(g, &p.lambda_matrix(g));
    let no = g.n_observed();
    let phi_ll = Matrix::from_diagonal(&nalgebra::DVector::from_iterator(g.n_latent(), g.latent().map(|h| p.phi[h])));
    let phi_oo = Matrix::from_diagonal(&nalgebra::DVector::from_iterator(no, g.observed().map(|v| p.phi[v])));
    let t = latent_inverse(ll)? * lo;
    Ok(t.transpose() * phi_ll * t + phi_oo)
}

fn inverse_of_i_minus(m: &Matrix, what: &'static str) -> Result<Matrix, NumericError> {
    let n = m.nrows();
    (Matrix::identity(n, n) - m).try_inverse().ok_or(NumericError::Singular(what))
}

/// `Σ = (I − Λ̄)^{-T} Ω (I − Λ̄)^{-1}`.
pub fn sigma_matrix(g: &LatentDigraph, p: &ParameterPoint) -> Result<Matrix, NumericError> {
    let inv = inverse_of_i_minus(&semi_direct_matrix(g, p)?, "I - Λ̄")?;
    Ok(inv.transpose() * omega_matrix(g, p)? * inv)
}

/// `[(I − Λ)^{-T} Φ (I − Λ)^{-1}]_{O,O}` over the full graph.
pub fn sigma_full(g: &LatentDigraph, p: &ParameterPoint) -> Result<Matrix, NumericError> {
    p.check(g)?;
    let inv = inverse_of_i_minus(&p.lambda_matrix(g), "I - Λ")?;
    let phi = Matrix::from_diagonal(&nalgebra::DVector::from_vec(p.phi.clone()));
    let full = inv.transpose() * phi * inv;
    let no = g.n_observed();
    Ok(full.view((0, 0), (no, no)).into_owned())
}

/// Sum of trek monomials `φ_top Π λ` over all treks, observed entries only.
pub fn trek_rule_sigma(g: &LatentDigraph, p: &ParameterPoint) -> Result<Matrix, NumericError> {
    p.check(g)?;
    let no = g.n_observed();
    let mut s = Matrix::zeros(no, no);
    for v in g.observed() {
        for w in v..no {
            let mut total = 0.0;
            for t in g.enumerate_treks(v, w, DEFAULT_TREK_BOUND)? {
                total += p.phi[t.top()] * t.edges().map(|(a, b)| p.coefficient(g, a, b).unwrap()).product::<f64>();
            }
            s[(v, w)] = total;
            s[(w, v)] = total;
        }
    }
    Ok(s)
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Largest `|a − b|` entrywise.
pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    max_abs(&(a - b))
}

pub fn is_positive_definite(m: &Matrix) -> bool {
    m.nrows() == m.ncols() && max_abs_diff(m, &m.transpose()) <= 1e-12 * max_abs(m).max(1.0) && m.clone().cholesky().is_some()
}

pub fn condition_number(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 { f64::INFINITY } else { max / min }
}

/// Numerical rank with tolerance `ZERO_TOL · σ_max`.
pub fn numerical_rank(m: &Matrix) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    sv.iter().filter(|&&s| s > ZERO_TOL * max).count()
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix, NumericError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(NumericError::Malformed("rows of different length".into()));
    }
    Ok(Matrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// Row-major JSON array.
pub fn matrix_to_json(m: &Matrix) -> String {
    serde_json::to_string(&matrix_to_rows(m)).expect("matrix serialization cannot fail")
}

pub fn matrix_from_json(text: &str) -> Result<Matrix, NumericError> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(text).map_err(|e| NumericError::Malformed(e.to_string()))?;
    matrix_from_rows(&rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub v: String,
    /// Size of the square system; 0 for nodes without semi-direct parents.
    pub size: usize,
    pub condition: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub lambda_bar_hat: Matrix,
    pub omega_hat: Matrix,
    pub steps: Vec<StepRecord>,
    pub max_error_lambda_bar: Option<f64>,
    pub max_error_omega: Option<f64>,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    observed: &'a [String],
    lambda_bar_hat: Vec<Vec<f64>>,
    omega_hat: Vec<Vec<f64>>,
    steps: &'a [StepRecord],
    #[serde(skip_serializing_if = "Option::is_none")]
    max_error_lambda_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_error_omega: Option<f64>,
}

impl RecoveryReport {
    /// Fills the error fields from the generating point.
    pub fn compare(&mut self, lambda_bar: &Matrix, omega: &Matrix) {
        self.max_error_lambda_bar = Some(max_abs_diff(&self.lambda_bar_hat, lambda_bar));
        self.max_error_omega = Some(max_abs_diff(&self.omega_hat, omega));
    }

    pub fn max_condition(&self) -> f64 {
        self.steps.iter().map(|s| s.condition).fold(1.0, f64::max)
    }

    pub fn to_json(&self, g: &LatentDigraph) -> String {
        let doc = ReportDoc {
            observed: &g.names()[..g.n_observed()],
            lambda_bar_hat: matrix_to_rows(&self.lambda_bar_hat),
            omega_hat: matrix_to_rows(&self.omega_hat),
            steps: &self.steps,
            max_error_lambda_bar: self.max_error_lambda_bar,
            max_error_omega: self.max_error_omega,
        };
        serde_json::to_string_pretty(&doc).expect("report serialization cannot fail")
    }
}

/// The square system `(A B)` and right-hand side `c` for one step, built
/// from the current estimate `lb` of `Λ̄`. Rows follow `Y` in node order,
/// columns `pa̅(v)` then `Z`.
pub fn step_system(
    g: &LatentDigraph,
    sigma: &Matrix,
    lb: &Matrix,
    v: usize,
    y: &NodeSet,
    z: &NodeSet,
    y1: &NodeSet,
) -> (Matrix, nalgebra::DVector<f64>) {
    let no = g.n_observed();
    let i_minus = Matrix::identity(no, no) - lb;
    let left = i_minus.transpose() * sigma;
    let both = &left * &i_minus;
    let right = sigma * &i_minus;
    let pa: Vec<usize> = g.semi_direct_parents_of(v).ones().collect();
    let zs: Vec<usize> = z.ones().collect();
    let ys: Vec<usize> = y.ones().collect();
    let cols = pa.len() + zs.len();
    let mut m = Matrix::zeros(ys.len(), cols);
    let mut c = nalgebra::DVector::zeros(ys.len());
    for (i, &yi) in ys.iter().enumerate() {
        let in_elr = y1.contains(yi);
        for (j, &pj) in pa.iter().enumerate() {
            m[(i, j)] = if in_elr { left[(yi, pj)] } else { sigma[(yi, pj)] };
        }
        for (j, &zj) in zs.iter().enumerate() {
            m[(i, pa.len() + j)] = if in_elr { both[(yi, zj)] } else { right[(yi, zj)] };
        }
        c[i] = if in_elr { left[(yi, v)] } else { sigma[(yi, v)] };
    }
    (m, c)
}

/// Solves the certificate steps in order and returns `Λ̄̂` and
/// `Ω̂ = (I − Λ̄̂)ᵀ Σ (I − Λ̄̂)`.
pub fn recover_effects(g: &LatentDigraph, cert: &LscCertificate, sigma: &Matrix) -> Result<RecoveryReport, NumericError> {
    let no = g.n_observed();
    if sigma.nrows() != no || sigma.ncols() != no {
        return Err(NumericError::Dimension {
            expected: format!("{no}x{no}"),
            actual: format!("{}x{}", sigma.nrows(), sigma.ncols()),
        });
    }
    if let Err(f) = verify_certificate(g, cert)? {
        return Err(NumericError::Unverifiable(f.to_string()));
    }
    if !cert.is_complete(g) {
        return Err(NumericError::Unverifiable("some observed node has no step".into()));
    }
    let mut lb = Matrix::zeros(no, no);
    let mut steps = Vec::with_capacity(cert.steps.len());
    for t in &cert.steps {
        let pa: Vec<usize> = g.semi_direct_parents_of(t.v).ones().collect();
        if pa.is_empty() {
            steps.push(StepRecord { v: g.name(t.v).to_string(), size: 0, condition: 1.0, residual: 0.0 });
            continue;
        }
        let (m, c) = step_system(g, sigma, &lb, t.v, &t.y, &t.z, &t.y_elr(g));
        let condition = condition_number(&m);
        if condition.is_nan() || condition > CONDITION_ABORT {
            return Err(NumericError::SingularStep { v: g.name(t.v).to_string(), condition });
        }
        let x = m
            .clone()
            .col_piv_qr()
            .solve(&c)
            .ok_or_else(|| NumericError::SingularStep { v: g.name(t.v).to_string(), condition })?;
        let residual = (&m * &x - &c).norm();
        for (j, &pj) in pa.iter().enumerate() {
            lb[(pj, t.v)] = x[j];
        }
        steps.push(StepRecord { v: g.name(t.v).to_string(), size: m.nrows(), condition, residual });
    }
    let i_minus = Matrix::identity(no, no) - &lb;
    let omega_hat = i_minus.transpose() * sigma * &i_minus;
    Ok(RecoveryReport { lambda_bar_hat: lb, omega_hat, steps, max_error_lambda_bar: None, max_error_omega: None })
}

/// `ω_ad ω_bc / (ω_ab ω_cd − ω_ad ω_bc)` read from a recovered `Ω̂`.
/// With unit latent variances on the air-pollution graph and
/// `(a, b, c, d) = (CO, NO2, sI, CRP)` this is `λ²_{AP,I}`.
pub fn latent_effect_ratio(g: &LatentDigraph, omega: &Matrix, names: [&str; 4]) -> Result<f64, NumericError> {
    let mut idx = [0usize; 4];
    for (k, name) in names.iter().enumerate() {
        let v = g.node_or_err(name)?;
        if !g.is_observed(v) {
            return Err(GraphError::NotObserved(name.to_string()).into());
        }
        idx[k] = v;
    }
    let [a, b, c, d] = idx;
    let num = omega[(a, d)] * omega[(b, c)];
    let den = omega[(a, b)] * omega[(c, d)] - num;
    if den.abs() <= REGULARITY_TOL {
        return Err(NumericError::VanishingDenominator(den));
    }
    Ok(num / den)
}

/// Full pipeline for the latent-effect formula: `Σ` from `p`, recovery
/// along `cert`, then [`latent_effect_ratio`] on `Ω̂`. Requires unit latent
/// variances.
pub fn verify_latent_effect_formula(
    g: &LatentDigraph,
    cert: &LscCertificate,
    p: &ParameterPoint,
    names: [&str; 4],
) -> Result<f64, NumericError> {
    if let Some(h) = g.latent().find(|&h| p.phi[h] != 1.0) {
        return Err(NumericError::LatentVarianceNotUnit(g.name(h).to_string()));
    }
    let sigma = sigma_matrix(g, p)?;
    let report = recover_effects(g, cert, &sigma)?;
    latent_effect_ratio(g, &report.omega_hat, names)
}

/// Host graph with two edge subsets and the index sets of the block matrix
/// `M = L_{V,A∪B}ᵀ Φ R_{V,C∪D}`, where rows `A` use `(I − Λ₁)^{-T}`,
/// rows `B` use `(I − Λ)^{-T}`, columns `C` use `(I − Λ)^{-1}` and
/// columns `D` use `(I − Λ₂)^{-1}`.
#[derive(Debug, Clone)]
pub struct SubgraphTrekMatrixSpec {
    pub graph: LatentDigraph,
    /// Edge masks aligned with `graph.edges()`.
    pub d1: Vec<bool>,
    pub d2: Vec<bool>,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub c: Vec<usize>,
    pub d: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetVerdict {
    /// Some trial gave a scaled determinant above [`ZERO_TOL`].
    NonzeroWitnessed { trial: usize, det: f64 },
    AllZero,
}

impl SubgraphTrekMatrixSpec {
    fn validate(&self) -> Result<(), NumericError> {
        let n = self.graph.n_nodes();
        let m = self.graph.edges().len();
        if self.d1.len() != m || self.d2.len() != m {
            return Err(NumericError::Dimension { expected: format!("{m} edge flags"), actual: format!("{}, {}", self.d1.len(), self.d2.len()) });
        }
        let rows = self.a.len() + self.b.len();
        let cols = self.c.len() + self.d.len();
        if rows != cols {
            return Err(NumericError::Dimension { expected: format!("{rows} columns"), actual: format!("{cols}") });
        }
        if self.a.iter().any(|x| self.b.contains(x)) || self.c.iter().any(|x| self.d.contains(x)) {
            return Err(NumericError::Malformed("row or column blocks overlap".into()));
        }
        if let Some(&v) = self.a.iter().chain(&self.b).chain(&self.c).chain(&self.d).find(|&&v| v >= n) {
            return Err(GraphError::UnknownNode(format!("#{v}")).into());
        }
        Ok(())
    }

    fn masked(&self, p: &ParameterPoint, mask: Option<&[bool]>) -> Matrix {
        let n = self.graph.n_nodes();
        let mut m = Matrix::zeros(n, n);
        for (e, &(u, w)) in self.graph.edges().iter().enumerate() {
            if mask.is_none_or(|k| k[e]) {
                m[(u, w)] = p.lambda[e];
            }
        }
        m
    }

    /// `M` at `p`, or `None` if a factor is singular.
    pub fn matrix(&self, p: &ParameterPoint) -> Option<Matrix> {
        let n = self.graph.n_nodes();
        let inv = |m: Matrix| (Matrix::identity(n, n) - m).try_inverse();
        let full = inv(self.masked(p, None))?;
        let g1 = inv(self.masked(p, Some(&self.d1)))?;
        let g2 = inv(self.masked(p, Some(&self.d2)))?;
        let phi = Matrix::from_diagonal(&nalgebra::DVector::from_vec(p.phi.clone()));
        let k = self.a.len() + self.b.len();
        let mut l = Matrix::zeros(n, k);
        for (j, &x) in self.a.iter().enumerate() {
            l.set_column(j, &g1.column(x));
        }
        for (j, &x) in self.b.iter().enumerate() {
            l.set_column(self.a.len() + j, &full.column(x));
        }
        let mut r = Matrix::zeros(n, k);
        for (j, &x) in self.c.iter().enumerate() {
            r.set_column(j, &full.column(x));
        }
        for (j, &x) in self.d.iter().enumerate() {
            r.set_column(self.c.len() + j, &g2.column(x));
        }
        Some(l.transpose() * phi * r)
    }

    /// `L_{S,A∪B}` at `p`.
    pub fn left_factor(&self, p: &ParameterPoint, s: &[usize]) -> Option<Matrix> {
        let n = self.graph.n_nodes();
        let inv = |m: Matrix| (Matrix::identity(n, n) - m).try_inverse();
        let full = inv(self.masked(p, None))?;
        let g1 = inv(self.masked(p, Some(&self.d1)))?;
        let cols: Vec<(usize, &Matrix)> = self.a.iter().map(|&x| (x, &g1)).chain(self.b.iter().map(|&x| (x, &full))).collect();
        Some(Matrix::from_fn(s.len(), cols.len(), |i, j| cols[j].1[(s[i], cols[j].0)]))
    }
}

/// Determinant after scaling rows, then columns, to unit max-norm.
pub fn scaled_determinant(m: &Matrix) -> f64 {
    let mut m = m.clone();
    for mut row in m.row_iter_mut() {
        let s = row.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if s > 0.0 {
            row /= s;
        }
    }
    for mut col in m.column_iter_mut() {
        let s = col.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if s > 0.0 {
            col /= s;
        }
    }
    m.determinant()
}

fn det_trials(
    graph: &LatentDigraph,
    trials: usize,
    seed: u64,
    eval: impl Fn(&ParameterPoint) -> Option<Matrix>,
) -> Result<DetVerdict, NumericError> {
    let cfg = SamplingConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let p = sample_any(graph, rng.random(), &cfg);
        if let Some(m) = eval(&p) {
            let det = scaled_determinant(&m);
            if det.abs() > ZERO_TOL {
                return Ok(DetVerdict::NonzeroWitnessed { trial, det });
            }
        }
    }
    Ok(DetVerdict::AllZero)
}

/// Random coefficients without regularity requirements on the latent
/// blocks; singular factors are skipped when evaluated.
fn sample_any(g: &LatentDigraph, seed: u64, cfg: &SamplingConfig) -> ParameterPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c0, c1) = cfg.coef_range;
    let lambda = g
        .edges()
        .iter()
        .map(|_| {
            let x = rng.random_range(c0..=c1);
            if rng.random_bool(0.5) { -x } else { x }
        })
        .collect();
    let phi = (0..g.n_nodes()).map(|_| rng.random_range(cfg.var_range.0..=cfg.var_range.1)).collect();
    ParameterPoint { lambda, phi, seed, retries: 0 }
}

/// Evaluates `det(M)` at `trials` random points.
pub fn subgraph_trek_det_check(spec: &SubgraphTrekMatrixSpec, trials: usize, seed: u64) -> Result<DetVerdict, NumericError> {
    spec.validate()?;
    det_trials(&spec.graph, trials, seed, |p| spec.matrix(p))
}

/// Evaluates `det(L_{S,A∪B})` at `trials` random points.
pub fn left_factor_det_check(spec: &SubgraphTrekMatrixSpec, s: &[usize], trials: usize, seed: u64) -> Result<DetVerdict, NumericError> {
    spec.validate()?;
    if s.len() != spec.a.len() + spec.b.len() {
        return Err(NumericError::Dimension { expected: format!("|S| = {}", spec.a.len() + spec.b.len()), actual: s.len().to_string() });
    }
    det_trials(&spec.graph, trials, seed, |p| spec.left_factor(p, s))
}

/// Observed nodes outside `Z ∪ {v}` that `(H1, H2)` trek separates from
/// `Z ∪ {v}` in the latent subgraph.
pub fn separated_set(g: &LatentDigraph, v: usize, z: &NodeSet, h1: &NodeSet, h2: &NodeSet) -> NodeSet {
    let g_lat = g.latent_subgraph();
    let mut zv = z.clone();
    zv.insert(v);
    let mut x = g.empty_set();
    for u in g.observed().filter(|&u| !zv.contains(u)) {
        if g_lat.trek_separates(&g.set_of([u]), &zv, h1, h2) {
            x.insert(u);
        }
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankCheck {
    pub rank: usize,
    /// `|Z|`, the bound the rank must respect.
    pub bound: usize,
    pub rows: usize,
}

impl RankCheck {
    pub fn holds(&self) -> bool {
        self.rank <= self.bound
    }
}

/// Numerical rank of `Ω_{X, Z∪{v}}` for the separated set `X`.
pub fn separation_rank(
    g: &LatentDigraph,
    p: &ParameterPoint,
    v: usize,
    z: &NodeSet,
    h1: &NodeSet,
    h2: &NodeSet,
) -> Result<RankCheck, NumericError> {
    let omega = omega_matrix(g, p)?;
    let xs: Vec<usize> = separated_set(g, v, z, h1, h2).ones().collect();
    let mut cols: Vec<usize> = z.ones().collect();
    cols.push(v);
    let sub = Matrix::from_fn(xs.len(), cols.len(), |i, j| omega[(xs[i], cols[j])]);
    Ok(RankCheck { rank: numerical_rank(&sub), bound: z.count_ones(..), rows: xs.len() })
}

/// Parameters on the canonical graph with the same `Σ`:
/// `Λ'_OO = Λ̄`, `Λ'_LO = (I − Λ_LL)^{-1} Λ_LO`, other blocks zero, `Φ' = Φ`.
pub fn canonical_parameters(g: &LatentDigraph, p: &ParameterPoint) -> Result<(LatentDigraph, ParameterPoint), NumericError> {
    p.check(g)?;
    let gcan = g.canonicalize();
    let lb = semi_direct_matrix(g, p)?;
    if let Some(v) = g.observed().find(|&v| lb[(v, v)] != 0.0) {
        return Err(NumericError::SelfEffect(g.name(v).to_string()));
    }
    let (_, _, lo, ll) = blocks(g, &p.lambda_matrix(g));
    let lo_can = latent_inverse(ll)? * lo;
    let no = g.n_observed();
    let lambda = gcan
        .edges()
        .iter()
        .map(|&(u, w)| if g.is_observed(u) { lb[(u, w)] } else { lo_can[(u - no, w)] })
        .collect();
    Ok((gcan, ParameterPoint { lambda, phi: p.phi.clone(), seed: p.seed, retries: p.retries }))
}
