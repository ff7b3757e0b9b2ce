//! Exact brute-force references on small trees: full path enumeration of the
//! portfolio dynamics, the min-max linear program computing the
//! super-replication price from its definition, and an arbitrage search.
//!
//! Portfolio accounting is self-financing with compounded trading cash: over
//! one period `V_{k+1} = e^r V_k + Δ_k (S_{k+1} - e^r S_k)`, seeded by
//! `V_H = e^{rH} x0 + Δ_H S_H`. Equivalently, in telescoped form,
//! `V_N = e^{rN} x0 + Σ_l e^{r(N-l)} S_l (Δ_{(l-1)∨H} - Δ_l) + S_N Δ_{N-1}`.
//! This convention is the one under which the `H = 0` oracle price coincides
//! with the classical binomial price and the blockwise hedge stays path-wise
//! feasible at nonzero rates.

pub mod simplex;

use serde::Serialize;

use crate::direct::direct_price;
use crate::dp::{backward_induct, ValueSurface};
use crate::error::EngineError;
use crate::lattice::{eval_payoff, MarketParams, PayoffSpec};
use simplex::{Cmp, LpOutcome, LpProblem};

/// Hard cap for `2^N` path enumeration.
pub const ENUM_CAP: usize = 24;
/// Hard cap for the LP oracles (variable count `2 + Σ 2^{k-H}`).
pub const LP_CAP: usize = 12;

/// One market scenario: the sequence of `N` moves (1 = up, 0 = down).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub moves: Vec<u8>,
}

impl Path {
    /// Path from the low `n` bits of `mask`; bit `n-1-k` is move `k`, so
    /// enumerating masks `0..2^n` walks all paths with move 0 most
    /// significant.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Path {
            moves: (0..n).map(|k| ((mask >> (n - 1 - k)) & 1) as u8).collect(),
        }
    }

    /// Up-count after the first `k` moves.
    pub fn ups(&self, k: usize) -> usize {
        self.moves[..k].iter().map(|&m| m as usize).sum()
    }

    /// History index of the first `m` moves (move 0 most significant).
    fn history(&self, m: usize) -> usize {
        self.moves[..m].iter().fold(0, |h, &b| (h << 1) | b as usize)
    }
}

/// A delay-adapted trading strategy: `deltas[m]` maps the `2^m` histories of
/// the first `m` moves to the share count held from time `k = m + H` to
/// `k + 1`. `Δ_k ≡ 0` for `k < H` is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyTable {
    pub x0: f64,
    pub deltas: Vec<Vec<f64>>,
}

impl StrategyTable {
    fn checked(&self, params: &MarketParams) -> Result<(), EngineError> {
        let levels = params.n_periods - params.delay;
        if self.deltas.len() != levels {
            return Err(EngineError::MalformedStrategy(format!(
                "expected {} delta levels, got {}",
                levels,
                self.deltas.len()
            )));
        }
        for (m, row) in self.deltas.iter().enumerate() {
            if row.len() != 1 << m {
                return Err(EngineError::MalformedStrategy(format!(
                    "level {m} needs {} histories, got {}",
                    1usize << m,
                    row.len()
                )));
            }
        }
        Ok(())
    }

    /// Share count at time `k >= H` on this path.
    fn delta(&self, params: &MarketParams, path: &Path, k: usize) -> f64 {
        let m = k - params.delay;
        self.deltas[m][path.history(m)]
    }
}

/// The blockwise-assembled strategy of a value surface: `x0` from the root
/// block, and the share count for each observed history from the block rooted
/// at the corresponding node.
pub fn strategy_from_surface(_params: &MarketParams, surface: &ValueSurface) -> StrategyTable {
    let mut deltas = Vec::with_capacity(surface.levels.len());
    for (m, row) in surface.levels.iter().enumerate() {
        let mut level = vec![0.0; 1 << m];
        for (hist, slot) in level.iter_mut().enumerate() {
            let ups = (hist as u64).count_ones() as usize;
            *slot = row[ups].delta_star;
        }
        deltas.push(level);
    }
    StrategyTable {
        x0: surface.levels[0][0].x0_star,
        deltas,
    }
}

/// Portfolio value `V_k` of a strategy on a path.
///
/// For `k < H` the portfolio is not yet observable and is reported as the
/// discounted seed `e^{-r(H-k)} V_H`.
pub fn portfolio_value(
    params: &MarketParams,
    strategy: &StrategyTable,
    path: &Path,
    k: usize,
) -> Result<f64, EngineError> {
    strategy.checked(params)?;
    let n = params.n_periods;
    if path.moves.len() != n {
        return Err(EngineError::MalformedStrategy(format!(
            "path length {} does not match n_periods {n}",
            path.moves.len()
        )));
    }
    if k > n {
        return Err(EngineError::OutOfRange {
            what: "portfolio time k",
            value: k as i64,
            min: 0,
            max: n as i64,
        });
    }
    let h = params.delay;
    let g = params.growth();
    let price = |l: usize| -> f64 {
        params.node_price(crate::lattice::LatticeNode {
            ups: path.ups(l),
            downs: l - path.ups(l),
        })
    };
    let mut v = (params.r * h as f64).exp() * strategy.x0 + strategy.delta(params, path, h) * price(h);
    if k < h {
        return Ok((-params.r * (h - k) as f64).exp() * v);
    }
    for l in h..k {
        let dl = strategy.delta(params, path, l);
        v = g * v + dl * (price(l + 1) - g * price(l));
    }
    Ok(v)
}

/// Path-wise super-replication check by full enumeration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SuperrepReport {
    /// True iff `V_N >= Φ(S_N) - 1e-9` on every path.
    pub feasible: bool,
    /// `min` over paths of `V_N - Φ(S_N)`.
    pub worst_slack: f64,
    /// `max` over paths of the initial value `V_0`.
    pub initial_worst: f64,
}

pub fn superrep_check(
    params: &MarketParams,
    spec: &PayoffSpec,
    strategy: &StrategyTable,
) -> Result<SuperrepReport, EngineError> {
    params.checked()?;
    spec.checked(params)?;
    strategy.checked(params)?;
    let n = params.n_periods;
    if n > ENUM_CAP {
        return Err(EngineError::SizeCap {
            what: "path enumeration n_periods",
            cap: ENUM_CAP,
            value: n,
        });
    }
    let mut worst_slack = f64::INFINITY;
    let mut initial_worst = f64::NEG_INFINITY;
    for mask in 0..(1u64 << n) {
        let path = Path::from_mask(mask, n);
        let vn = portfolio_value(params, strategy, &path, n)?;
        let phi = eval_payoff(spec, params, path.ups(n))?;
        worst_slack = worst_slack.min(vn - phi);
        let v0 = portfolio_value(params, strategy, &path, 0)?;
        initial_worst = initial_worst.max(v0);
    }
    Ok(SuperrepReport {
        feasible: worst_slack >= -1e-9,
        worst_slack,
        initial_worst,
    })
}

/// Variable layout shared by the two LPs: `x0` first, then one share-count
/// variable per (level, history). `offset` shifts everything when a leading
/// variable (the min-max `t`) is prepended.
struct VarLayout {
    offset: usize,
    level_start: Vec<usize>,
    n_vars: usize,
}

impl VarLayout {
    fn new(params: &MarketParams, offset: usize) -> Self {
        let levels = params.n_periods - params.delay;
        let mut level_start = Vec::with_capacity(levels);
        let mut next = offset + 1; // x0 sits at `offset`
        for m in 0..levels {
            level_start.push(next);
            next += 1 << m;
        }
        VarLayout {
            offset,
            level_start,
            n_vars: next,
        }
    }

    fn x0(&self) -> usize {
        self.offset
    }

    fn delta(&self, params: &MarketParams, path: &Path, k: usize) -> usize {
        let m = k - params.delay;
        self.level_start[m] + path.history(m)
    }
}

/// Fill `row` with the coefficients of `V_N` on `path` (telescoped form).
fn terminal_value_coeffs(params: &MarketParams, layout: &VarLayout, path: &Path, row: &mut [f64]) {
    let n = params.n_periods;
    let h = params.delay;
    let price = |l: usize| -> f64 {
        params.node_price(crate::lattice::LatticeNode {
            ups: path.ups(l),
            downs: l - path.ups(l),
        })
    };
    row[layout.x0()] = (params.r * n as f64).exp();
    for l in h..n {
        let grow = (params.r * (n - l) as f64).exp();
        let sl = price(l);
        row[layout.delta(params, path, l)] -= grow * sl;
        let lm = if l > h { l - 1 } else { h }; // (l-1) ∨ H
        row[layout.delta(params, path, lm)] += grow * sl;
    }
    row[layout.delta(params, path, n - 1)] += price(n);
}

/// Exact super-replication price from the definition: minimize the worst
/// initial value `t` over all delay-adapted strategies whose terminal value
/// dominates the claim on every path.
pub fn minmax_lp_oracle(params: &MarketParams, spec: &PayoffSpec) -> Result<f64, EngineError> {
    params.checked()?;
    spec.checked(params)?;
    let n = params.n_periods;
    if n > LP_CAP {
        return Err(EngineError::SizeCap {
            what: "min-max LP n_periods",
            cap: LP_CAP,
            value: n,
        });
    }
    let h = params.delay;
    let layout = VarLayout::new(params, 1); // variable 0 is t
    let mut rows = Vec::with_capacity((h + 1) + (1usize << n));

    // t >= V_0 for each of the H+1 distinct observable first prices:
    // -t + x0 + e^{-rH} S_H Δ_H <= 0.
    for j in 0..=h {
        let mut row = vec![0.0; layout.n_vars];
        row[0] = -1.0;
        row[layout.x0()] = 1.0;
        let s_h = params.s0 * params.u.powi(j as i32) * params.d.powi((h - j) as i32);
        // Δ_H has a single (empty) history; any path gives the same index.
        row[layout.level_start[0]] = (-params.r * h as f64).exp() * s_h;
        rows.push((row, Cmp::Le, 0.0));
    }
    for mask in 0..(1u64 << n) {
        let path = Path::from_mask(mask, n);
        let mut row = vec![0.0; layout.n_vars];
        terminal_value_coeffs(params, &layout, &path, &mut row);
        let phi = eval_payoff(spec, params, path.ups(n))?;
        rows.push((row, Cmp::Ge, phi));
    }

    let mut minimize = vec![0.0; layout.n_vars];
    minimize[0] = 1.0;
    match simplex::solve(&LpProblem {
        n_vars: layout.n_vars,
        minimize,
        rows,
    })? {
        LpOutcome::Optimal { objective, .. } => Ok(objective),
        LpOutcome::Unbounded { .. } => Err(EngineError::LpDegenerate(
            "min-max LP reported unbounded".to_string(),
        )),
        LpOutcome::Infeasible => Err(EngineError::LpDegenerate(
            "min-max LP reported infeasible".to_string(),
        )),
    }
}

/// Result of the arbitrage LP.
#[derive(Debug, Clone)]
pub struct ArbitrageReport {
    pub arbitrage_found: bool,
    /// A strategy with `V_0 <= 0` everywhere and strictly positive total
    /// terminal value, when one exists.
    pub certificate: Option<StrategyTable>,
}

/// Search for an arbitrage: maximize `Σ_ω V_N(ω)` subject to `V_0(ω) <= 0`
/// and `V_N(ω) >= 0` for all paths. By positive homogeneity any strictly
/// positive optimum (or an unbounded ray) rescales into an arbitrage in the
/// definition's sense, after tightening `max V_0` to zero with a cash shift.
///
/// Parameters are only checked structurally (`s0 > 0 < d < u`), not for the
/// rate window — detecting the arbitrage that an out-of-window rate creates
/// is the point of this oracle.
pub fn arbitrage_search(params: &MarketParams) -> Result<ArbitrageReport, EngineError> {
    let structural = params.s0 > 0.0
        && params.d > 0.0
        && params.u > params.d
        && params.n_periods >= 1
        && params.delay + 1 <= params.n_periods;
    if !structural {
        return Err(EngineError::InvalidParams(vec![
            "arbitrage search needs s0 > 0, 0 < d < u, 1 <= H + 1 <= N".to_string(),
        ]));
    }
    let n = params.n_periods;
    if n > LP_CAP {
        return Err(EngineError::SizeCap {
            what: "arbitrage LP n_periods",
            cap: LP_CAP,
            value: n,
        });
    }
    let h = params.delay;
    let layout = VarLayout::new(params, 0);
    let mut rows = Vec::with_capacity((h + 1) + (1usize << n));
    for j in 0..=h {
        let mut row = vec![0.0; layout.n_vars];
        row[layout.x0()] = 1.0;
        let s_h = params.s0 * params.u.powi(j as i32) * params.d.powi((h - j) as i32);
        row[layout.level_start[0]] = (-params.r * h as f64).exp() * s_h;
        rows.push((row, Cmp::Le, 0.0));
    }
    let mut minimize = vec![0.0; layout.n_vars]; // minimize -Σ V_N
    for mask in 0..(1u64 << n) {
        let path = Path::from_mask(mask, n);
        let mut row = vec![0.0; layout.n_vars];
        terminal_value_coeffs(params, &layout, &path, &mut row);
        for (c, v) in minimize.iter_mut().zip(&row) {
            *c -= v;
        }
        rows.push((row, Cmp::Ge, 0.0));
    }

    let to_strategy = |x: &[f64]| -> StrategyTable {
        let levels = n - h;
        let mut deltas = Vec::with_capacity(levels);
        for m in 0..levels {
            let start = layout.level_start[m];
            deltas.push(x[start..start + (1 << m)].to_vec());
        }
        StrategyTable { x0: x[layout.x0()], deltas }
    };

    match simplex::solve(&LpProblem {
        n_vars: layout.n_vars,
        minimize,
        rows,
    })? {
        LpOutcome::Optimal { objective, x } => {
            let gain = -objective;
            if gain > 1e-9 {
                Ok(ArbitrageReport {
                    arbitrage_found: true,
                    certificate: Some(to_strategy(&x)),
                })
            } else {
                Ok(ArbitrageReport {
                    arbitrage_found: false,
                    certificate: None,
                })
            }
        }
        LpOutcome::Unbounded { ray, .. } => Ok(ArbitrageReport {
            arbitrage_found: true,
            certificate: Some(to_strategy(&ray)),
        }),
        LpOutcome::Infeasible => Err(EngineError::LpDegenerate(
            "arbitrage LP reported infeasible (zero strategy is feasible)".to_string(),
        )),
    }
}

/// Cross-method verification bundle serialized by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub feasible: bool,
    pub worst_slack: f64,
    pub initial_worst: f64,
    pub price_lp: f64,
    pub price_dp: f64,
    pub price_direct: f64,
    pub max_abs_diff: f64,
}

/// Run the full oracle suite on one instance: DP and direct prices, the LP
/// price, and the path-wise check of the assembled hedge.
pub fn verification_report(
    params: &MarketParams,
    spec: &PayoffSpec,
) -> Result<VerificationReport, EngineError> {
    let surface = backward_induct(params, spec)?;
    let price_dp = surface.price;
    let price_direct = direct_price(params, spec)?;
    let price_lp = minmax_lp_oracle(params, spec)?;
    let strategy = strategy_from_surface(params, &surface);
    let check = superrep_check(params, spec, &strategy)?;
    let max_abs_diff = (price_dp - price_direct)
        .abs()
        .max((price_dp - price_lp).abs());
    Ok(VerificationReport {
        feasible: check.feasible,
        worst_slack: check.worst_slack,
        initial_worst: check.initial_worst,
        price_lp,
        price_dp,
        price_direct,
        max_abs_diff,
    })
}
