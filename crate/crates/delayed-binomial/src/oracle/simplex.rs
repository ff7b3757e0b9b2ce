//! Dense two-phase simplex solver over free variables.
//!
//! Self-contained so the brute-force oracles are deterministic: no external
//! solver, plain dense tableau, pivot tolerance 1e-11. Entering columns use
//! Dantzig's rule for speed and fall back to Bland's rule permanently once a
//! long degenerate stall is detected, which guarantees termination.

use crate::error::EngineError;

const TOL: f64 = 1e-11;
/// Reduced-cost threshold for entering columns. Looser than the pivot
/// tolerance: reduced costs accumulate round-off proportional to the row
/// scale, and chasing noise-negative columns stalls or falsely reports
/// unboundedness.
const COST_TOL: f64 = 1e-9;
/// Minimum magnitude accepted for a pivot element. Pivoting on smaller
/// entries scales rows by their reciprocal and destroys the tableau.
const PIVOT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const STALL_LIMIT: usize = 40;
/// Unconditional switch to Bland's rule after this many pivots: round-off can
/// alternate degenerate and near-degenerate pivots without tripping the
/// stall counter.
const BLAND_AFTER: usize = 50_000;
/// Hard iteration cap; hitting it is reported as degeneracy, never absorbed.
const MAX_PIVOTS: usize = 2_000_000;

/// Direction of one inequality row `a · x {<=, >=} b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
}

/// A linear program over free (sign-unrestricted) variables:
/// minimize `c · x` subject to the inequality rows.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub n_vars: usize,
    pub minimize: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Cmp, f64)>,
}

/// Solver outcome. `Unbounded` carries an improving ray in the original
/// variable space (a feasible point plus any positive multiple of the ray
/// stays feasible with objective decreasing without bound).
#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal { objective: f64, x: Vec<f64> },
    Unbounded { x: Vec<f64>, ray: Vec<f64> },
    Infeasible,
}

struct Tableau {
    /// `m x (width + 1)` rows; last column is the RHS.
    rows: Vec<Vec<f64>>,
    /// Reduced-cost row for the active objective (same width).
    cost: Vec<f64>,
    /// Basic variable (column index) of each row.
    basis: Vec<usize>,
    width: usize,
    bland: bool,
    stall: usize,
    pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col];
        let inv = 1.0 / piv;
        for v in self.rows[row].iter_mut() {
            *v *= inv;
        }
        let prow = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let factor = r[col];
            if factor != 0.0 {
                for (v, p) in r.iter_mut().zip(&prow) {
                    *v -= factor * p;
                }
                r[col] = 0.0; // kill residual round-off in the pivot column
            }
        }
        let factor = self.cost[col];
        if factor != 0.0 {
            for (v, p) in self.cost.iter_mut().zip(&prow) {
                *v -= factor * p;
            }
            self.cost[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Run simplex iterations until optimal/unbounded.
    /// `allowed` masks columns eligible to enter (used to freeze artificials).
    fn optimize(&mut self, allowed: &[bool]) -> Result<Option<usize>, EngineError> {
        loop {
            self.pivots += 1;
            if self.pivots > MAX_PIVOTS {
                return Err(EngineError::LpDegenerate(
                    "iteration cap exceeded".to_string(),
                ));
            }
            if self.pivots > BLAND_AFTER {
                self.bland = true;
            }
            // Entering column.
            let enter = if self.bland {
                (0..self.width).find(|&j| allowed[j] && self.cost[j] < -COST_TOL)
            } else {
                let mut best = None;
                let mut best_val = -COST_TOL;
                for j in 0..self.width {
                    if allowed[j] && self.cost[j] < best_val {
                        best_val = self.cost[j];
                        best = Some(j);
                    }
                }
                best
            };
            let Some(enter) = enter else {
                return Ok(None); // optimal
            };
            // Two-pass ratio test. Pass 1 finds the minimum ratio; pass 2
            // picks, among rows within a tolerance of it, the largest pivot
            // element. Tiny pivots amplify round-off catastrophically, so
            // pivot magnitude beats index-based tie-breaking for stability.
            let mut min_ratio = f64::INFINITY;
            for r in &self.rows {
                if r[enter] > PIVOT_TOL {
                    min_ratio = min_ratio.min((r[self.width] / r[enter]).max(0.0));
                }
            }
            if min_ratio == f64::INFINITY {
                return Ok(Some(enter)); // unbounded along `enter`
            }
            let cutoff = min_ratio + TOL * (1.0 + min_ratio);
            let mut leave = 0usize;
            let mut best_piv = 0.0f64;
            for (i, r) in self.rows.iter().enumerate() {
                if r[enter] > PIVOT_TOL && (r[self.width] / r[enter]).max(0.0) <= cutoff {
                    let better = r[enter] > best_piv
                        || (r[enter] == best_piv && self.basis[i] < self.basis[leave]);
                    if better {
                        best_piv = r[enter];
                        leave = i;
                    }
                }
            }
            let best_ratio = (self.rows[leave][self.width] / self.rows[leave][enter]).max(0.0);
            if best_ratio < TOL {
                self.stall += 1;
                if self.stall > STALL_LIMIT {
                    self.bland = true;
                }
            } else {
                self.stall = 0;
            }
            self.pivot(leave, enter);
        }
    }
}

/// Solve the LP. Errors only on irrecoverable numerical degeneracy.
pub fn solve(p: &LpProblem) -> Result<LpOutcome, EngineError> {
    let n = p.n_vars;
    assert_eq!(p.minimize.len(), n);
    let m = p.rows.len();
    // Standard form: x_j = y_{2j} - y_{2j+1}, y >= 0; one slack/surplus per
    // row; artificials appended as needed.
    let n_split = 2 * n;
    let width_guess = n_split + m;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut art_of_row: Vec<Option<usize>> = vec![None; m];
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    let mut n_art = 0usize;

    for (ri, (a, cmp, b)) in p.rows.iter().enumerate() {
        assert_eq!(a.len(), n);
        // Row equilibration: divide by the largest coefficient magnitude so
        // pivot and feasibility tolerances act on comparable scales.
        let scale = a
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(b.abs())
            .max(1e-300);
        let mut flip = 1.0 / scale;
        let mut cmp = *cmp;
        if *b < 0.0 || (*b == 0.0 && cmp == Cmp::Ge) {
            // Negative RHS rows flip so b >= 0; zero-RHS >= rows flip into
            // <= rows, which start feasible and need no artificial.
            flip = -flip;
            cmp = match cmp {
                Cmp::Le => Cmp::Ge,
                Cmp::Ge => Cmp::Le,
            };
        }
        let mut row = vec![0.0; width_guess + 1];
        for (j, &aj) in a.iter().enumerate() {
            row[2 * j] = flip * aj;
            row[2 * j + 1] = -flip * aj;
        }
        let slack_col = n_split + ri;
        match cmp {
            Cmp::Le => {
                row[slack_col] = 1.0;
            }
            Cmp::Ge => {
                row[slack_col] = -1.0;
                art_of_row[ri] = Some(n_art);
                n_art += 1;
            }
        }
        row[width_guess] = flip * b;
        rows.push(row);
        basis.push(usize::MAX); // filled below
    }

    // Append artificial columns.
    let width = width_guess + n_art;
    for (ri, row) in rows.iter_mut().enumerate() {
        let rhs = row.pop().expect("rhs present");
        row.resize(width, 0.0);
        if let Some(ai) = art_of_row[ri] {
            row[width_guess + ai] = 1.0;
            basis[ri] = width_guess + ai;
        } else {
            basis[ri] = n_split + ri;
        }
        row.push(rhs);
    }

    let mut t = Tableau {
        rows,
        cost: vec![0.0; width + 1],
        basis,
        width,
        bland: false,
        stall: 0,
        pivots: 0,
    };

    // Phase 1: minimize the sum of artificials.
    if n_art > 0 {
        let mut cost = vec![0.0; width + 1];
        for j in width_guess..width {
            cost[j] = 1.0;
        }
        // Reduce against the artificial basis rows.
        for (ri, &b) in t.basis.iter().enumerate() {
            if b >= width_guess {
                for (c, v) in cost.iter_mut().zip(t.rows[ri].iter()) {
                    *c -= v;
                }
            }
        }
        t.cost = cost;
        let allowed = vec![true; width];
        let stalled = t.optimize(&allowed)?.is_some();
        // The phase-1 objective is bounded below by zero, so an "unbounded"
        // report can only be reduced-cost noise; accept the basis if it is
        // already feasible and refuse to guess otherwise.
        if -t.cost[width] > 1e-8 {
            return if stalled {
                Err(EngineError::LpDegenerate(
                    "phase 1 stalled away from feasibility".to_string(),
                ))
            } else {
                Ok(LpOutcome::Infeasible)
            };
        }
        // Pivot remaining artificials out of the basis where possible.
        for ri in 0..m {
            if t.basis[ri] >= width_guess {
                if let Some(col) = (0..width_guess).find(|&j| t.rows[ri][j].abs() > 1e-9) {
                    t.pivot(ri, col);
                }
                // A fully zero row is redundant; its artificial stays basic
                // at value ~0 and is frozen below.
            }
        }
    }

    // Phase 2: the real objective over split variables; artificials frozen.
    let mut cost = vec![0.0; width + 1];
    for (j, &cj) in p.minimize.iter().enumerate() {
        cost[j * 2] = cj;
        cost[j * 2 + 1] = -cj;
    }
    for (ri, &b) in t.basis.iter().enumerate() {
        if cost[b] != 0.0 {
            let factor = cost[b];
            for (c, v) in cost.iter_mut().zip(t.rows[ri].iter()) {
                *c -= factor * v;
            }
            cost[b] = 0.0;
        }
    }
    t.cost = cost;
    t.bland = false;
    t.stall = 0;
    let mut allowed = vec![true; width];
    for a in allowed.iter_mut().skip(width_guess) {
        *a = false;
    }
    let unbounded = t.optimize(&allowed)?;

    let extract = |t: &Tableau| -> Vec<f64> {
        let mut y = vec![0.0; width];
        for (ri, &b) in t.basis.iter().enumerate() {
            y[b] = t.rows[ri][width];
        }
        (0..n).map(|j| y[2 * j] - y[2 * j + 1]).collect()
    };

    match unbounded {
        None => {
            let x = extract(&t);
            let objective: f64 = x.iter().zip(&p.minimize).map(|(a, b)| a * b).sum();
            Ok(LpOutcome::Optimal { objective, x })
        }
        Some(enter) => {
            // Improving ray: entering variable 1, basics move by -column.
            let mut dy = vec![0.0; width];
            dy[enter] = 1.0;
            for (ri, &b) in t.basis.iter().enumerate() {
                dy[b] = -t.rows[ri][enter];
            }
            let ray: Vec<f64> = (0..n).map(|j| dy[2 * j] - dy[2 * j + 1]).collect();
            Ok(LpOutcome::Unbounded { x: extract(&t), ray })
        }
    }
}
