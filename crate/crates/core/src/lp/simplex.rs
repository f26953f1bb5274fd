//! Bounded-variable two-phase primal simplex on a dense tableau.
//!
//! Every original variable is mapped onto one or two internal columns with a
//! zero lower bound (shifted, mirrored, or split when free). Rows are scaled
//! to unit max-norm, given a slack when they are inequalities, and flipped so
//! the right-hand side is non-negative. Rows whose slack cannot serve as the
//! starting basic column receive an artificial.

use crate::error::LpError;
use crate::scalar::Scalar;

use super::{LinearProgram, LpSolution, LpStatus, Relation};

/// Tied pivots weaker than this fraction of the strongest are passed over.
const WEAK_PIVOT_RATIO: f64 = 1e-3;
/// Pivots below this magnitude are avoided while another improving column
/// exists.
const STABLE_PIVOT: f64 = 1e-7;
/// Reduced costs this small may be left unexploited when only unstable
/// pivots could act on them.
const NOISE_REDUCED_COST: f64 = 1e-6;
/// Largest constraint violation accepted in a reported optimum, relative to
/// the right-hand sides.
const ACCEPT_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct Tolerances<T> {
    /// Primal feasibility (phase-one residual, bound slack).
    pub feasibility: T,
    /// Reduced-cost threshold for optimality.
    pub optimality: T,
    /// Smallest admissible pivot magnitude.
    pub pivot: T,
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        let floor = T::tolerance_floor();
        Self {
            feasibility: T::lit(1e-8).max(floor),
            optimality: T::lit(1e-9).max(floor),
            pivot: T::lit(1e-10).max(floor),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pricing {
    /// Lowest-index improving column; lowest-index leaving row on ties.
    Bland,
    /// Most negative reduced cost (lowest index on ties), switching to Bland's
    /// rule while a run of degenerate pivots is in progress.
    DantzigBland,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T> {
    pub tol: Tolerances<T>,
    pub pricing: Pricing,
    /// `None` picks a limit proportional to the tableau size.
    pub max_iterations: Option<usize>,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self { tol: Tolerances::default(), pricing: Pricing::Bland, max_iterations: None }
    }
}

pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpSolution<T>, LpError> {
    solve_lp_with(lp, &SolverOptions::default())
}

pub fn solve_lp_with<T: Scalar>(
    lp: &LinearProgram<T>,
    opts: &SolverOptions<T>,
) -> Result<LpSolution<T>, LpError> {
    lp.validate()?;
    let mut tab = Tableau::build(lp, opts)?;
    let limit = opts.max_iterations.unwrap_or(200 * (tab.m + tab.n) + 1000);

    // phase one
    if tab.has_artificials() {
        tab.load_phase_one_costs();
        match tab.iterate(limit)? {
            Outcome::Optimal => {}
            Outcome::Unbounded => {
                return Err(LpError::Numerical("phase one reported an unbounded ray".into()))
            }
        }
        let infeasibility = tab.artificial_level();
        if infeasibility > opts.tol.feasibility {
            return Ok(tab.finish_without_point(LpStatus::Infeasible));
        }
        tab.drive_out_artificials();
    }

    tab.load_phase_two_costs();
    match tab.iterate(limit)? {
        Outcome::Optimal => {
            let sol = tab.finish_optimal(lp);
            let scale = lp.constraints().iter().fold(T::one(), |acc, c| acc.max(c.rhs.abs()));
            let residual = lp.primal_residual(&sol.primal);
            if residual > T::lit(ACCEPT_RESIDUAL).max(opts.tol.feasibility) * scale {
                return Err(LpError::Numerical(format!("final point violates the constraints by {residual}")));
            }
            Ok(sol)
        }
        Outcome::Unbounded => Ok(tab.finish_without_point(LpStatus::Unbounded)),
    }
}

#[derive(Debug, Clone, Copy)]
enum ColMap<T> {
    /// `x = lower + col`
    Shift { col: usize, lower: T },
    /// `x = upper - col`
    Mirror { col: usize, upper: T },
    /// `x = pos - neg`
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic(usize),
    AtLower,
    AtUpper,
}

enum Outcome {
    Optimal,
    Unbounded,
}

struct Tableau<T> {
    m: usize,
    n: usize,
    /// Row-major `m × n` coefficients of `B⁻¹A`.
    a: Vec<T>,
    /// Current value of the basic column of each row.
    beta: Vec<T>,
    basis: Vec<usize>,
    state: Vec<State>,
    upper: Vec<T>,
    cost2: Vec<T>,
    cost: Vec<T>,
    /// Reduced costs of the active phase.
    d: Vec<T>,
    artificial_start: usize,
    /// Column holding `B⁻¹eᵢ` for row `i`.
    identity: Vec<usize>,
    /// Row multiplier applied while building (scale × sign).
    row_factor: Vec<T>,
    maps: Vec<ColMap<T>>,
    tol: Tolerances<T>,
    pricing: Pricing,
    phase_two: bool,
    iterations: usize,
}

impl<T: Scalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>, opts: &SolverOptions<T>) -> Result<Self, LpError> {
        let z = T::zero();
        let m = lp.num_constraints();
        let mut maps = Vec::with_capacity(lp.num_vars());
        let mut upper = Vec::new();
        let mut cost2 = Vec::new();
        for (j, v) in lp.vars().iter().enumerate() {
            let c = lp.objective()[j];
            if v.lower.is_finite() {
                maps.push(ColMap::Shift { col: upper.len(), lower: v.lower });
                upper.push(v.upper - v.lower);
                cost2.push(c);
            } else if v.upper.is_finite() {
                maps.push(ColMap::Mirror { col: upper.len(), upper: v.upper });
                upper.push(T::infinity());
                cost2.push(-c);
            } else {
                let pos = upper.len();
                maps.push(ColMap::Split { pos, neg: pos + 1 });
                upper.push(T::infinity());
                upper.push(T::infinity());
                cost2.push(c);
                cost2.push(-c);
            }
        }
        let structural = upper.len();

        // dense structural rows and shifted right-hand sides
        let mut rows = vec![vec![z; structural]; m];
        let mut rhs = vec![z; m];
        for (i, con) in lp.constraints().iter().enumerate() {
            let mut b = con.rhs;
            for &(v, coef) in &con.terms {
                match maps[v.0] {
                    ColMap::Shift { col, lower } => {
                        rows[i][col] = rows[i][col] + coef;
                        b = b - coef * lower;
                    }
                    ColMap::Mirror { col, upper } => {
                        rows[i][col] = rows[i][col] - coef;
                        b = b - coef * upper;
                    }
                    ColMap::Split { pos, neg } => {
                        rows[i][pos] = rows[i][pos] + coef;
                        rows[i][neg] = rows[i][neg] - coef;
                    }
                }
            }
            rhs[i] = b;
        }

        let slack_count = lp.constraints().iter().filter(|c| c.relation != Relation::Eq).count();
        let mut row_factor = vec![T::one(); m];
        let mut slack_col = vec![None; m];
        let mut slack_sign = vec![z; m];
        let mut next = structural;
        for (i, con) in lp.constraints().iter().enumerate() {
            let norm = rows[i].iter().fold(z, |acc, &v| acc.max(v.abs()));
            let scale = if norm > z { T::one() / norm } else { T::one() };
            let sign = if rhs[i] < z { -T::one() } else { T::one() };
            row_factor[i] = scale * sign;
            match con.relation {
                Relation::Le => {
                    slack_col[i] = Some(next);
                    slack_sign[i] = sign;
                    next += 1;
                }
                Relation::Ge => {
                    slack_col[i] = Some(next);
                    slack_sign[i] = -sign;
                    next += 1;
                }
                Relation::Eq => {}
            }
        }
        debug_assert_eq!(next, structural + slack_count);
        let artificial_start = next;
        let mut identity = vec![0; m];
        let mut art_rows = Vec::new();
        for i in 0..m {
            match slack_col[i] {
                Some(col) if slack_sign[i] > z => identity[i] = col,
                _ => {
                    identity[i] = next;
                    art_rows.push(i);
                    next += 1;
                }
            }
        }
        let n = next;
        for _ in structural..artificial_start {
            upper.push(T::infinity());
            cost2.push(z);
        }
        for _ in artificial_start..n {
            upper.push(T::infinity());
            cost2.push(z);
        }

        let mut a = vec![z; m * n];
        let mut beta = vec![z; m];
        for i in 0..m {
            let f = row_factor[i];
            let row = &mut a[i * n..(i + 1) * n];
            for (dst, &src) in row.iter_mut().zip(&rows[i]) {
                *dst = src * f;
            }
            if let Some(col) = slack_col[i] {
                row[col] = slack_sign[i];
            }
            if identity[i] >= artificial_start {
                row[identity[i]] = T::one();
            }
            beta[i] = rhs[i] * f;
        }
        let mut state = vec![State::AtLower; n];
        let basis = identity.clone();
        for (i, &col) in basis.iter().enumerate() {
            state[col] = State::Basic(i);
        }

        Ok(Self {
            m,
            n,
            a,
            beta,
            basis,
            state,
            upper,
            cost2,
            cost: vec![z; n],
            d: vec![z; n],
            artificial_start,
            identity,
            row_factor,
            maps,
            tol: opts.tol,
            pricing: opts.pricing,
            phase_two: false,
            iterations: 0,
        })
    }

    fn has_artificials(&self) -> bool {
        self.artificial_start < self.n
    }

    fn is_artificial(&self, col: usize) -> bool {
        col >= self.artificial_start
    }

    fn load_phase_one_costs(&mut self) {
        let z = T::zero();
        for j in 0..self.n {
            self.cost[j] = if self.is_artificial(j) { T::one() } else { z };
        }
        self.phase_two = false;
        self.recompute_reduced_costs();
    }

    fn load_phase_two_costs(&mut self) {
        self.cost.copy_from_slice(&self.cost2);
        self.phase_two = true;
        // artificials are pinned at zero from here on
        for j in self.artificial_start..self.n {
            self.upper[j] = T::zero();
        }
        self.recompute_reduced_costs();
    }

    fn recompute_reduced_costs(&mut self) {
        let n = self.n;
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == T::zero() {
                continue;
            }
            let row = &self.a[i * n..(i + 1) * n];
            for (dj, &aij) in self.d.iter_mut().zip(row) {
                *dj = *dj - cb * aij;
            }
        }
    }

    fn artificial_level(&self) -> T {
        self.basis
            .iter()
            .zip(&self.beta)
            .filter(|(&col, _)| self.is_artificial(col))
            .fold(T::zero(), |acc, (_, &v)| acc.max(v.abs()))
    }

    /// Pivots zero-level artificials out of the basis where a structural or
    /// slack column can replace them; rows where none can are redundant.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let row = &self.a[r * self.n..(r + 1) * self.n];
            let candidate = (0..self.artificial_start)
                .find(|&j| !matches!(self.state[j], State::Basic(_)) && row[j].abs() > self.tol.pivot);
            if let Some(q) = candidate {
                let entering_value = match self.state[q] {
                    State::AtUpper => self.upper[q],
                    _ => T::zero(),
                };
                let leaving = self.basis[r];
                self.state[leaving] = State::AtLower;
                self.pivot(r, q);
                self.beta[r] = entering_value;
            }
        }
    }

    fn choose_entering(&self, bland: bool, skip: &[usize]) -> Option<(usize, T)> {
        let tol = self.tol.optimality;
        let limit = if self.phase_two { self.artificial_start } else { self.n };
        let mut best: Option<(usize, T)> = None;
        let mut best_mag = T::zero();
        for j in 0..limit {
            let dir = match self.state[j] {
                State::Basic(_) => continue,
                State::AtLower if self.d[j] < -tol && self.upper[j] > T::zero() => T::one(),
                State::AtUpper if self.d[j] > tol => -T::one(),
                _ => continue,
            };
            if skip.contains(&j) {
                continue;
            }
            if bland {
                return Some((j, dir));
            }
            let mag = self.d[j].abs();
            if mag > best_mag {
                best_mag = mag;
                best = Some((j, dir));
            }
        }
        best
    }

    /// Ratio test for entering column `q` moving in direction `dir`: the
    /// blocking step and leaving row (with whether it leaves at its upper
    /// bound). Among rows that block within a small tie band, the lowest
    /// basic index wins, passing over pivots much weaker than the strongest
    /// tied one.
    fn ratio_test(&self, q: usize, dir: T) -> (T, Option<(usize, bool)>) {
        let n = self.n;
        let mut limits: Vec<(usize, T, bool)> = Vec::new();
        for i in 0..self.m {
            let aiq = self.a[i * n + q];
            if aiq.abs() <= self.tol.pivot {
                continue;
            }
            let rate = dir * aiq;
            if rate > T::zero() {
                limits.push((i, self.beta[i].max(T::zero()) / rate, false));
            } else {
                let ub = self.upper[self.basis[i]];
                if ub.is_finite() {
                    limits.push((i, (ub - self.beta[i]).max(T::zero()) / (-rate), true));
                }
            }
        }
        let t_block = limits.iter().fold(T::infinity(), |acc, &(_, t, _)| acc.min(t));
        let band = t_block + self.tol.pivot * T::one().max(t_block);
        let strongest = limits
            .iter()
            .filter(|&&(_, t, _)| t <= band)
            .fold(T::zero(), |acc, &(i, _, _)| acc.max(self.a[i * n + q].abs()));
        let mut leave: Option<(usize, bool)> = None;
        let mut t_min = T::infinity();
        for &(i, t, to_upper) in &limits {
            if t > band || self.a[i * n + q].abs() < strongest * T::lit(WEAK_PIVOT_RATIO) {
                continue;
            }
            if leave.map_or(true, |(r, _)| self.basis[i] < self.basis[r]) {
                leave = Some((i, to_upper));
                t_min = t;
            }
        }
        (t_min, leave)
    }

    fn iterate(&mut self, limit: usize) -> Result<Outcome, LpError> {
        let mut degenerate_run = 0usize;
        let mut skip: Vec<usize> = Vec::new();
        loop {
            if self.iterations >= limit {
                return Err(LpError::IterationLimit(limit));
            }
            let bland = match self.pricing {
                Pricing::Bland => true,
                Pricing::DantzigBland => degenerate_run > 8,
            };
            let Some((q, dir)) = self.choose_entering(bland, &skip) else {
                // columns passed over for weak pivots only carry reduced
                // costs at noise level
                if let Some(&j) = skip.iter().find(|&&j| self.d[j].abs() > T::lit(NOISE_REDUCED_COST)) {
                    return Err(LpError::Numerical(format!(
                        "column {j} improves the objective but admits no stable pivot"
                    )));
                }
                return Ok(Outcome::Optimal);
            };

            let (t_min, leave) = self.ratio_test(q, dir);
            let own = self.upper[q];
            if own <= t_min {
                // bound flip, no basis change
                if !own.is_finite() {
                    return Ok(Outcome::Unbounded);
                }
                self.iterations += 1;
                self.apply_step(q, dir, own);
                self.state[q] = if dir > T::zero() { State::AtUpper } else { State::AtLower };
                degenerate_run = 0;
                skip.clear();
                continue;
            }
            let Some((r, to_upper)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            if !t_min.is_finite() {
                return Ok(Outcome::Unbounded);
            }
            let n = self.n;
            let pivot = self.a[r * n + q];
            if pivot.abs() < T::lit(STABLE_PIVOT) {
                skip.push(q);
                continue;
            }
            self.iterations += 1;
            skip.clear();
            if t_min <= self.tol.feasibility {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.apply_step(q, dir, t_min);
            let entering_value = if dir > T::zero() { t_min } else { own - t_min };
            let leaving = self.basis[r];
            self.state[leaving] = if to_upper { State::AtUpper } else { State::AtLower };
            self.pivot(r, q);
            self.beta[r] = entering_value;
        }
    }

    fn apply_step(&mut self, q: usize, dir: T, t: T) {
        if t == T::zero() {
            return;
        }
        let n = self.n;
        for i in 0..self.m {
            let aiq = self.a[i * n + q];
            if aiq != T::zero() {
                self.beta[i] = self.beta[i] - dir * t * aiq;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.n;
        let p = self.a[r * n + q];
        let inv = T::one() / p;
        {
            let row = &mut self.a[r * n..(r + 1) * n];
            for v in row.iter_mut() {
                *v = *v * inv;
            }
            row[q] = T::one();
        }
        let (head, tail) = self.a.split_at_mut(r * n);
        let (pivot_row, rest) = tail.split_at_mut(n);
        let eliminate = |row: &mut [T]| {
            let f = row[q];
            if f != T::zero() {
                for (v, &pr) in row.iter_mut().zip(pivot_row.iter()) {
                    *v = *v - f * pr;
                }
                row[q] = T::zero();
            }
        };
        head.chunks_exact_mut(n).for_each(eliminate);
        rest.chunks_exact_mut(n).for_each(eliminate);
        let f = self.d[q];
        if f != T::zero() {
            for (v, &pr) in self.d.iter_mut().zip(pivot_row.iter()) {
                *v = *v - f * pr;
            }
            self.d[q] = T::zero();
        }
        self.basis[r] = q;
        self.state[q] = State::Basic(r);
    }

    fn column_values(&self) -> Vec<T> {
        (0..self.n)
            .map(|j| match self.state[j] {
                State::Basic(i) => self.beta[i],
                State::AtLower => T::zero(),
                State::AtUpper => self.upper[j],
            })
            .collect()
    }

    fn finish_without_point(&self, status: LpStatus) -> LpSolution<T> {
        LpSolution {
            status,
            primal: Vec::new(),
            objective: match status {
                LpStatus::Unbounded => T::neg_infinity(),
                _ => T::infinity(),
            },
            duals: Vec::new(),
            iterations: self.iterations,
        }
    }

    fn finish_optimal(&self, lp: &LinearProgram<T>) -> LpSolution<T> {
        let cols = self.column_values();
        let primal: Vec<T> = self
            .maps
            .iter()
            .map(|map| match *map {
                ColMap::Shift { col, lower } => lower + cols[col],
                ColMap::Mirror { col, upper } => upper - cols[col],
                ColMap::Split { pos, neg } => cols[pos] - cols[neg],
            })
            .collect();
        let duals = (0..self.m).map(|i| -self.d[self.identity[i]] * self.row_factor[i]).collect();
        LpSolution {
            status: LpStatus::Optimal,
            objective: lp.objective_value(&primal),
            primal,
            duals,
            iterations: self.iterations,
        }
    }
}
