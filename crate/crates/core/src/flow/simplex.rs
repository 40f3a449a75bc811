//! Dense two-phase primal simplex over exact rationals with Bland's rule.
//!
//! Arithmetic is generic over [`Exact`]. The solver first runs with
//! `Ratio<i128>`; any overflow aborts and the caller repeats the solve with
//! `BigRational`.

use num_rational::{BigRational, Ratio};
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, Zero};

/// Exact field arithmetic where every operation may report overflow.
pub trait Exact: Clone + PartialOrd + std::fmt::Debug {
    fn from_int(v: i64) -> Self;
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn is_positive(&self) -> bool;
    fn is_negative(&self) -> bool;
    fn add(&self, o: &Self) -> Option<Self>;
    fn sub(&self, o: &Self) -> Option<Self>;
    fn mul(&self, o: &Self) -> Option<Self>;
    fn div(&self, o: &Self) -> Option<Self>;
    fn neg(&self) -> Option<Self>;
    fn to_big(&self) -> BigRational;
}

impl Exact for Ratio<i128> {
    fn from_int(v: i64) -> Self {
        Ratio::from_integer(v as i128)
    }
    fn zero() -> Self {
        Zero::zero()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn add(&self, o: &Self) -> Option<Self> {
        self.checked_add(o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        self.checked_sub(o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        self.checked_mul(o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        self.checked_div(o)
    }
    fn neg(&self) -> Option<Self> {
        Some(Ratio::new_raw(self.numer().checked_neg()?, *self.denom()))
    }
    fn to_big(&self) -> BigRational {
        BigRational::new((*self.numer()).into(), (*self.denom()).into())
    }
}

impl Exact for BigRational {
    fn from_int(v: i64) -> Self {
        BigRational::from_integer(v.into())
    }
    fn zero() -> Self {
        Zero::zero()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn add(&self, o: &Self) -> Option<Self> {
        Some(self + o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        Some(self - o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        Some(self * o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        if Zero::is_zero(o) {
            None
        } else {
            Some(self / o)
        }
    }
    fn neg(&self) -> Option<Self> {
        Some(-self.clone())
    }
    fn to_big(&self) -> BigRational {
        self.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Sparse row `Σ coeffs · x (sense) rhs` with integer data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, i64)>,
    pub sense: Sense,
    pub rhs: i64,
}

/// `maximize c·x  s.t. rows, x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram {
    pub n_vars: usize,
    pub objective: Vec<i64>,
    pub rows: Vec<LpRow>,
}

#[derive(Debug, Clone)]
pub enum LpOutcome<T> {
    Optimal { value: T, x: Vec<T> },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overflow;

pub struct SimplexRun<T> {
    pub outcome: LpOutcome<T>,
    pub pivots: u64,
}

struct Tableau<T> {
    /// `m` rows of `ncols + 1` entries; the last entry is the rhs.
    a: Vec<Vec<T>>,
    /// Reduced costs (maximization form: entering columns are negative).
    obj: Vec<T>,
    basis: Vec<usize>,
    ncols: usize,
    pivots: u64,
}

impl<T: Exact> Tableau<T> {
    fn pivot(&mut self, r: usize, c: usize) -> Result<(), Overflow> {
        self.pivots += 1;
        let p = self.a[r][c].clone();
        let width = self.ncols + 1;
        for j in 0..width {
            if !self.a[r][j].is_zero() {
                self.a[r][j] = self.a[r][j].div(&p).ok_or(Overflow)?;
            }
        }
        let prow = self.a[r].clone();
        let nz: Vec<usize> = (0..width).filter(|&j| !prow[j].is_zero()).collect();
        for i in 0..self.a.len() {
            if i == r || self.a[i][c].is_zero() {
                continue;
            }
            let f = self.a[i][c].clone();
            for &j in &nz {
                let d = f.mul(&prow[j]).ok_or(Overflow)?;
                self.a[i][j] = self.a[i][j].sub(&d).ok_or(Overflow)?;
            }
        }
        if !self.obj[c].is_zero() {
            let f = self.obj[c].clone();
            for &j in &nz {
                let d = f.mul(&prow[j]).ok_or(Overflow)?;
                self.obj[j] = self.obj[j].sub(&d).ok_or(Overflow)?;
            }
        }
        self.basis[r] = c;
        Ok(())
    }

    /// Runs Bland's rule over columns `allowed`. Returns false if unbounded.
    fn optimize(&mut self, allowed: &dyn Fn(usize) -> bool) -> Result<bool, Overflow> {
        loop {
            let Some(c) = (0..self.ncols).find(|&j| allowed(j) && self.obj[j].is_negative()) else {
                return Ok(true);
            };
            let mut best: Option<(usize, T)> = None;
            for i in 0..self.a.len() {
                let aic = &self.a[i][c];
                if !aic.is_positive() {
                    continue;
                }
                let ratio = self.a[i][self.ncols].div(aic).ok_or(Overflow)?;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, c)?,
            }
        }
    }
}

type SparseRow = (Vec<(usize, i64)>, Sense, i64);

/// Solves `lp` exactly. `fixed[j] = Some(v)` substitutes `x_j = v`.
pub fn solve<T: Exact>(lp: &LinearProgram, fixed: &[Option<bool>]) -> Result<SimplexRun<T>, Overflow> {
    let n = lp.n_vars;
    // substitute fixed variables and normalize to rhs >= 0
    let mut rows: Vec<SparseRow> = Vec::with_capacity(lp.rows.len());
    let mut const_obj = 0i64;
    for (j, f) in fixed.iter().enumerate() {
        if *f == Some(true) {
            const_obj += lp.objective[j];
        }
    }
    for row in &lp.rows {
        let mut rhs = row.rhs;
        let mut coeffs = Vec::with_capacity(row.coeffs.len());
        for &(j, c) in &row.coeffs {
            match fixed.get(j).copied().flatten() {
                Some(true) => rhs -= c,
                Some(false) => {}
                None => coeffs.push((j, c)),
            }
        }
        let mut sense = row.sense;
        if coeffs.is_empty() {
            let ok = match sense {
                Sense::Le => 0 <= rhs,
                Sense::Ge => 0 >= rhs,
                Sense::Eq => rhs == 0,
            };
            if !ok {
                return Ok(SimplexRun { outcome: LpOutcome::Infeasible, pivots: 0 });
            }
            continue;
        }
        if rhs < 0 {
            rhs = -rhs;
            for c in coeffs.iter_mut() {
                c.1 = -c.1;
            }
            sense = match sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
        rows.push((coeffs, sense, rhs));
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let ncols = n + n_slack + n_art;
    let art_start = n + n_slack;
    let mut a = vec![vec![T::zero(); ncols + 1]; m];
    let mut basis = vec![0; m];
    let (mut s_idx, mut a_idx) = (n, art_start);
    for (i, (coeffs, sense, rhs)) in rows.iter().enumerate() {
        for &(j, c) in coeffs {
            a[i][j] = a[i][j].add(&T::from_int(c)).ok_or(Overflow)?;
        }
        a[i][ncols] = T::from_int(*rhs);
        match sense {
            Sense::Le => {
                a[i][s_idx] = T::from_int(1);
                basis[i] = s_idx;
                s_idx += 1;
            }
            Sense::Ge => {
                a[i][s_idx] = T::from_int(-1);
                s_idx += 1;
                a[i][a_idx] = T::from_int(1);
                basis[i] = a_idx;
                a_idx += 1;
            }
            Sense::Eq => {
                a[i][a_idx] = T::from_int(1);
                basis[i] = a_idx;
                a_idx += 1;
            }
        }
    }
    let mut tab = Tableau { a, obj: vec![T::zero(); ncols + 1], basis, ncols, pivots: 0 };

    // phase I: maximize -Σ artificials
    if n_art > 0 {
        for j in art_start..ncols {
            tab.obj[j] = T::from_int(1);
        }
        for i in 0..m {
            if tab.basis[i] >= art_start {
                for j in 0..=ncols {
                    if !tab.a[i][j].is_zero() {
                        tab.obj[j] = tab.obj[j].sub(&tab.a[i][j]).ok_or(Overflow)?;
                    }
                }
            }
        }
        tab.optimize(&|_| true)?;
        if !tab.obj[ncols].is_zero() {
            return Ok(SimplexRun { outcome: LpOutcome::Infeasible, pivots: tab.pivots });
        }
        // drive remaining artificials out of the basis, dropping redundant rows
        let mut i = 0;
        while i < tab.a.len() {
            if tab.basis[i] >= art_start {
                match (0..art_start).find(|&j| !tab.a[i][j].is_zero()) {
                    Some(j) => {
                        tab.pivot(i, j)?;
                        i += 1;
                    }
                    None => {
                        tab.a.remove(i);
                        tab.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    // phase II
    tab.obj = vec![T::zero(); ncols + 1];
    for j in 0..n {
        if lp.objective[j] != 0 && fixed.get(j).copied().flatten().is_none() {
            tab.obj[j] = T::from_int(-lp.objective[j]);
        }
    }
    for i in 0..tab.a.len() {
        let b = tab.basis[i];
        if !tab.obj[b].is_zero() {
            let f = tab.obj[b].clone();
            for j in 0..=ncols {
                if !tab.a[i][j].is_zero() {
                    let d = f.mul(&tab.a[i][j]).ok_or(Overflow)?;
                    tab.obj[j] = tab.obj[j].sub(&d).ok_or(Overflow)?;
                }
            }
        }
    }
    if !tab.optimize(&|j| j < art_start)? {
        return Ok(SimplexRun { outcome: LpOutcome::Unbounded, pivots: tab.pivots });
    }
    let mut x = vec![T::zero(); n];
    for (j, f) in fixed.iter().enumerate().take(n) {
        if *f == Some(true) {
            x[j] = T::from_int(1);
        }
    }
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.a[i][ncols].clone();
        }
    }
    let value = tab.obj[ncols].add(&T::from_int(const_obj)).ok_or(Overflow)?;
    Ok(SimplexRun { outcome: LpOutcome::Optimal { value, x }, pivots: tab.pivots })
}

/// Solves with `Ratio<i128>`, falling back to `BigRational` on overflow.
/// The flag reports whether the fallback was used.
pub fn solve_exact(lp: &LinearProgram, fixed: &[Option<bool>]) -> (LpOutcome<BigRational>, u64, bool) {
    match solve::<Ratio<i128>>(lp, fixed) {
        Ok(run) => {
            let outcome = match run.outcome {
                LpOutcome::Optimal { value, x } => LpOutcome::Optimal {
                    value: value.to_big(),
                    x: x.iter().map(Exact::to_big).collect(),
                },
                LpOutcome::Infeasible => LpOutcome::Infeasible,
                LpOutcome::Unbounded => LpOutcome::Unbounded,
            };
            (outcome, run.pivots, false)
        }
        Err(Overflow) => {
            let run = solve::<BigRational>(lp, fixed).expect("big rationals cannot overflow");
            (run.outcome, run.pivots, true)
        }
    }
}

/// Checks `x` against every row exactly.
pub fn is_feasible(lp: &LinearProgram, x: &[BigRational]) -> bool {
    if x.len() != lp.n_vars || x.iter().any(Signed::is_negative) {
        return false;
    }
    lp.rows.iter().all(|row| {
        let lhs: BigRational = row
            .coeffs
            .iter()
            .map(|&(j, c)| &x[j] * BigRational::from_integer(c.into()))
            .fold(<BigRational as Zero>::zero(), |a, b| a + b);
        let rhs = BigRational::from_integer(row.rhs.into());
        match row.sense {
            Sense::Le => lhs <= rhs,
            Sense::Ge => lhs >= rhs,
            Sense::Eq => lhs == rhs,
        }
    })
}

pub fn objective_value(lp: &LinearProgram, x: &[BigRational]) -> BigRational {
    lp.objective
        .iter()
        .zip(x)
        .filter(|(c, _)| **c != 0)
        .map(|(&c, v)| v * BigRational::from_integer(c.into()))
        .fold(<BigRational as Zero>::zero(), |a, b| a + b)
}
