//! Super-replication by backward induction over `(H+1)`-period blocks.
//!
//! With an execution delay of `H` periods, the hedge ratio chosen when the
//! block root is observed stays frozen for `H + 1` periods. Over one block the
//! cheapest dominating portfolio is the chord through the block's two extreme
//! payoffs, and for convex claims only the extreme leaves of each block ever
//! matter, so the whole tree reduces to a backward sweep over block roots
//! carrying a pair of values (`value_up`, `value_down`) per root.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::EngineError;
use crate::lattice::{
    check_convexity, delay_measures, eval_payoff, LatticeNode, MarketParams, PayoffSpec,
};

/// Optimal chord across one `(H+1)`-period block.
///
/// The line `y = e^{r(H+1)} x0_star + delta_star · x` passes through both
/// extreme payoff points `(root·u^{H+1}, payoff_up)` and
/// `(root·d^{H+1}, payoff_down)`. `value_up` / `value_down` are the block
/// values seen from the two extreme observable prices `root·u^H`, `root·d^H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSolution {
    /// Initial risk-free investment of the block.
    pub x0_star: f64,
    /// Share count held throughout the block (signed).
    pub delta_star: f64,
    /// Block value at the up-extreme observable price.
    pub value_up: f64,
    /// Block value at the down-extreme observable price.
    pub value_down: f64,
}

/// Block solutions for every root node, plus the resulting price.
///
/// Level `m` (time `k = m + H`) holds one [`BlockSolution`] per root node
/// `(a, b)` with `a + b = m`, stored densely by up-count `a`.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    /// `levels[m][a]` is the block rooted at node `(a, m - a)`.
    pub levels: Vec<Vec<BlockSolution>>,
    /// Super-replication price `e^{-rH} · max(value_up, value_down)` at the
    /// root `(0, 0)`.
    pub price: f64,
    /// Delay the surface was built with (block length minus one).
    pub delay: usize,
}

/// Solve one block: chord parameters plus the two extreme values
/// `e^{-r} (p_j · payoff_up + q_j · payoff_down)` for `j = H` (up) and
/// `j = 0` (down).
pub fn solve_block(
    root_price: f64,
    payoff_up: f64,
    payoff_down: f64,
    params: &MarketParams,
) -> Result<BlockSolution, EngineError> {
    let m = delay_measures(params)?;
    Ok(solve_block_inner(
        root_price,
        payoff_up,
        payoff_down,
        &BlockConsts::new(params, &m),
    ))
}

/// Per-lattice constants hoisted out of the inner block loop.
struct BlockConsts {
    u_pow: f64,
    d_pow: f64,
    disc_block: f64,
    disc_step: f64,
    p_u: f64,
    q_u: f64,
    p_d: f64,
    q_d: f64,
}

impl BlockConsts {
    fn new(params: &MarketParams, m: &crate::lattice::DelayMeasure) -> Self {
        let h1 = (params.delay + 1) as i32;
        BlockConsts {
            u_pow: params.u.powi(h1),
            d_pow: params.d.powi(h1),
            disc_block: (-params.r * h1 as f64).exp(),
            disc_step: (-params.r).exp(),
            p_u: m.p_u(),
            q_u: m.q_u(),
            p_d: m.p_d(),
            q_d: m.q_d(),
        }
    }
}

fn solve_block_inner(
    root_price: f64,
    payoff_up: f64,
    payoff_down: f64,
    c: &BlockConsts,
) -> BlockSolution {
    let denom = c.u_pow - c.d_pow;
    BlockSolution {
        delta_star: (payoff_up - payoff_down) / (root_price * denom),
        x0_star: c.disc_block * (c.u_pow * payoff_down - c.d_pow * payoff_up) / denom,
        value_up: c.disc_step * (c.p_u * payoff_up + c.q_u * payoff_down),
        value_down: c.disc_step * (c.p_d * payoff_up + c.q_d * payoff_down),
    }
}

/// Full backward sweep producing the value surface and the price.
///
/// Terminal blocks (roots at time `N - H - 1`) take the claim itself as block
/// payoff; an earlier block's up-leaf payoff is `value_up` of the child root
/// `(a+1, b)` and its down-leaf payoff is `value_down` of `(a, b+1)`. Interior
/// leaves never enter: convexity puts the binding constraints at the extremes.
pub fn backward_induct(
    params: &MarketParams,
    spec: &PayoffSpec,
) -> Result<ValueSurface, EngineError> {
    params.checked()?;
    spec.checked(params)?;
    if !check_convexity(spec, params) {
        return Err(EngineError::NonConvexPayoff);
    }
    let n = params.n_periods;
    let h = params.delay;
    let top = n - h - 1; // deepest root level
    let measure = delay_measures(params)?;
    let consts = BlockConsts::new(params, &measure);

    let mut levels: Vec<Vec<BlockSolution>> = vec![Vec::new(); top + 1];
    for m in (0..=top).rev() {
        let mut row = Vec::with_capacity(m + 1);
        for a in 0..=m {
            let root = params.node_price(LatticeNode {
                ups: a,
                downs: m - a,
            });
            let (pay_up, pay_down) = if m == top {
                (
                    eval_payoff(spec, params, a + h + 1)?,
                    eval_payoff(spec, params, a)?,
                )
            } else {
                (levels[m + 1][a + 1].value_up, levels[m + 1][a].value_down)
            };
            row.push(solve_block_inner(root, pay_up, pay_down, &consts));
        }
        debug_assert!(
            row_payoffs_convex(params, m, &row),
            "block payoffs lost convexity at level {m}"
        );
        levels[m] = row;
    }

    let root = levels[0][0];
    let price = (-params.r * h as f64).exp() * root.value_up.max(root.value_down);
    Ok(ValueSurface {
        levels,
        price,
        delay: h,
    })
}

/// Debug check: the pair values at a level, read as a claim on the root
/// price, keep nondecreasing secant slopes. Convexity is guaranteed by the
/// structure of the recursion; release builds trust it.
fn row_payoffs_convex(params: &MarketParams, m: usize, row: &[BlockSolution]) -> bool {
    // Check value_up and value_down separately as functions of the root price.
    for pick in [|b: &BlockSolution| b.value_up, |b: &BlockSolution| b.value_down] {
        let mut prev: Option<(f64, f64, f64)> = None; // (x, y, slope)
        for (a, b) in row.iter().enumerate() {
            let x = params.node_price(LatticeNode {
                ups: a,
                downs: m - a,
            });
            let y = pick(b);
            if let Some((px, py, ps)) = prev {
                let s = (y - py) / (x - px);
                if s - ps < -1e-9 * (1.0 + y.abs()) {
                    return false;
                }
                prev = Some((x, y, s));
            } else {
                prev = Some((x, y, f64::NEG_INFINITY));
            }
        }
    }
    true
}

/// Per-block optimal line parameters, keyed by root node `(a, b)`.
///
/// The entry at `(0, 0)` is the time-0 strategy `(x0_star, Δ_H_star)` whose
/// worst-case initial value equals the price.
pub fn hedge_plan(surface: &ValueSurface) -> BTreeMap<(usize, usize), (f64, f64)> {
    let mut plan = BTreeMap::new();
    for (m, row) in surface.levels.iter().enumerate() {
        for (a, b) in row.iter().enumerate() {
            plan.insert((a, m - a), (b.x0_star, b.delta_star));
        }
    }
    plan
}

/// CSV export of the surface: `level,a,b,value_up,value_down,x0_star,delta_star`,
/// where `level` is the root time `k = m + H`.
pub fn surface_to_csv(surface: &ValueSurface) -> String {
    let mut out = String::from("level,a,b,value_up,value_down,x0_star,delta_star\n");
    for (m, row) in surface.levels.iter().enumerate() {
        for (a, b) in row.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                m + surface.delay,
                a,
                m - a,
                fmt12(b.value_up),
                fmt12(b.value_down),
                fmt12(b.x0_star),
                fmt12(b.delta_star),
            )
            .expect("string write");
        }
    }
    out
}

/// 12-significant-digit formatting used by all CSV/JSON output.
pub(crate) fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let s = format!("{x:.11e}");
    // Trim trailing zeros in the mantissa for readability: 5.60000000000e0 -> 5.6e0.
    if let Some(epos) = s.find('e') {
        let (mant, exp) = s.split_at(epos);
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        format!("{mant}{exp}")
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::crr_price;

    fn worked() -> (MarketParams, PayoffSpec) {
        (
            MarketParams {
                s0: 4.0,
                u: 2.0,
                d: 0.5,
                r: 0.0,
                n_periods: 2,
                delay: 1,
            },
            PayoffSpec::call(4.0),
        )
    }

    #[test]
    fn solve_block_worked_example() {
        let (p, _) = worked();
        let b = solve_block(4.0, 12.0, 0.0, &p).unwrap();
        assert!((b.delta_star - 0.8).abs() < 1e-15);
        assert!((b.x0_star + 0.8).abs() < 1e-15);
        assert!((b.value_up - 5.6).abs() < 1e-14);
        assert!((b.value_down - 0.8).abs() < 1e-14);
    }

    #[test]
    fn solve_block_constant_and_linear_claims() {
        let p = MarketParams {
            s0: 10.0,
            u: 1.2,
            d: 0.85,
            r: 0.03,
            n_periods: 4,
            delay: 2,
        };
        let b = solve_block(10.0, 7.0, 7.0, &p).unwrap();
        assert_eq!(b.delta_star, 0.0);
        assert!((b.x0_star - (-0.03f64 * 3.0).exp() * 7.0).abs() < 1e-14);
        assert!((b.value_up - (-0.03f64).exp() * 7.0).abs() < 1e-14);
        assert!((b.value_up - b.value_down).abs() < 1e-14);

        // Linear claim: the block values reproduce the asset itself,
        // value_up = root·u^H (martingale identity of the delay measures).
        let root = 10.0;
        let up = root * p.u.powi(3);
        let dn = root * p.d.powi(3);
        let b = solve_block(root, up, dn, &p).unwrap();
        assert!((b.value_up - root * p.u * p.u).abs() < 1e-12);
        assert!((b.value_down - root * p.d * p.d).abs() < 1e-12);
    }

    #[test]
    fn backward_induct_worked_example() {
        let (p, spec) = worked();
        let s = backward_induct(&p, &spec).unwrap();
        assert!((s.price - 5.6).abs() < 1e-14);
        assert_eq!(s.levels.len(), 1);
        let plan = hedge_plan(&s);
        assert_eq!(plan.len(), 1);
        let (x0, delta) = plan[&(0, 0)];
        assert!((x0 + 0.8).abs() < 1e-15);
        assert!((delta - 0.8).abs() < 1e-15);
    }

    #[test]
    fn h0_reduces_to_crr() {
        let p = MarketParams {
            s0: 4.0,
            u: 2.0,
            d: 0.5,
            r: 0.1,
            n_periods: 6,
            delay: 0,
        };
        for spec in [
            PayoffSpec::call(4.0),
            PayoffSpec::put(5.0),
            PayoffSpec::call(0.5),
        ] {
            let dp = backward_induct(&p, &spec).unwrap().price;
            let crr = crr_price(&p, &spec).unwrap();
            assert!((dp - crr).abs() < 1e-12, "{spec:?}: {dp} vs {crr}");
        }
    }

    #[test]
    fn equality_at_block_extremes() {
        let p = MarketParams {
            s0: 30.0,
            u: 1.25,
            d: 0.8,
            r: 0.02,
            n_periods: 7,
            delay: 2,
        };
        let spec = PayoffSpec::call(31.0);
        let s = backward_induct(&p, &spec).unwrap();
        let h1 = (p.delay + 1) as f64;
        let top = s.levels.len() - 1;
        for (m, row) in s.levels.iter().enumerate() {
            for (a, b) in row.iter().enumerate() {
                let root = p.node_price(LatticeNode {
                    ups: a,
                    downs: m - a,
                });
                let (pay_up, pay_down) = if m == top {
                    (
                        eval_payoff(&spec, &p, a + p.delay + 1).unwrap(),
                        eval_payoff(&spec, &p, a).unwrap(),
                    )
                } else {
                    (
                        s.levels[m + 1][a + 1].value_up,
                        s.levels[m + 1][a].value_down,
                    )
                };
                let grow = (p.r * h1).exp();
                let line_up = grow * b.x0_star + b.delta_star * root * p.u.powi(p.delay as i32 + 1);
                let line_dn = grow * b.x0_star + b.delta_star * root * p.d.powi(p.delay as i32 + 1);
                assert!((line_up - pay_up).abs() <= 1e-10 * (1.0 + pay_up.abs()));
                assert!((line_dn - pay_down).abs() <= 1e-10 * (1.0 + pay_down.abs()));
            }
        }
    }

    #[test]
    fn price_monotone_in_delay_and_dominates_crr() {
        let p0 = MarketParams {
            s0: 20.0,
            u: 1.3,
            d: 0.75,
            r: 0.01,
            n_periods: 8,
            delay: 0,
        };
        let spec = PayoffSpec::call(21.0);
        let crr = crr_price(&p0, &spec).unwrap();
        let mut last = f64::NEG_INFINITY;
        for h in 0..8 {
            let mut p = p0;
            p.delay = h;
            let price = backward_induct(&p, &spec).unwrap().price;
            assert!(price >= last - 1e-12, "H={h}");
            assert!(price >= crr - 1e-12);
            last = price;
        }
    }

    #[test]
    fn interior_leaves_are_never_binding() {
        // Re-run the recursion while also propagating interior-leaf values
        // (max over the two adjacent next-level roots); the extreme values
        // must not move, and every block's chord must dominate its interior
        // leaf payoffs.
        let p = MarketParams {
            s0: 16.0,
            u: 1.5,
            d: 0.6,
            r: 0.04,
            n_periods: 6,
            delay: 2,
        };
        let spec = PayoffSpec::call(15.0);
        let s = backward_induct(&p, &spec).unwrap();
        let meas = delay_measures(&p).unwrap();

        let top = s.levels.len() - 1;
        let h = p.delay;
        // vals[a][j]: value of the block rooted at up-count `a`, seen from
        // observable position j (0 = down-extreme, h = up-extreme).
        let mut next: Vec<Vec<f64>> = Vec::new();
        for lvl in (0..=top).rev() {
            // Block payoff at leaf up-count `c` of the block rooted at `a`.
            let leaf = |a: usize, c: usize| -> f64 {
                if lvl == top {
                    eval_payoff(&spec, &p, c).unwrap()
                } else if c == a {
                    next[a][0]
                } else if c == a + h + 1 {
                    next[a + 1][h]
                } else {
                    let i = c - a; // 1..=h
                    next[a + 1][i - 1].max(next[a][i])
                }
            };
            let mut vals: Vec<Vec<f64>> = Vec::new();
            for a in 0..=lvl {
                let (g_up, g_dn) = (leaf(a, a + h + 1), leaf(a, a));
                let per_j: Vec<f64> = (0..=h)
                    .map(|j| {
                        (-p.r).exp() * (meas.probs_up[j] * g_up + meas.probs_down[j] * g_dn)
                    })
                    .collect();
                // The stored chord must dominate the interior leaf payoffs.
                let b = s.levels[lvl][a];
                let root = p.node_price(LatticeNode {
                    ups: a,
                    downs: lvl - a,
                });
                for i in 1..=h {
                    let x = root * p.u.powi(i as i32) * p.d.powi((h + 1 - i) as i32);
                    let line = (p.r * (h + 1) as f64).exp() * b.x0_star + b.delta_star * x;
                    assert!(line >= leaf(a, a + i) - 1e-10, "lvl={lvl} a={a} i={i}");
                }
                vals.push(per_j);
            }
            for (a, v) in vals.iter().enumerate() {
                let b = s.levels[lvl][a];
                assert!((v[h] - b.value_up).abs() < 1e-12 * (1.0 + b.value_up.abs()));
                assert!((v[0] - b.value_down).abs() < 1e-12 * (1.0 + b.value_down.abs()));
            }
            next = vals;
        }
    }

    #[test]
    fn csv_shape() {
        let (p, spec) = worked();
        let s = backward_induct(&p, &spec).unwrap();
        let csv = surface_to_csv(&s);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "level,a,b,value_up,value_down,x0_star,delta_star"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("1,0,0,"), "{row}");
        assert!(row.contains("5.6e0"), "{row}");
    }

    #[test]
    fn rejects_nonconvex_payoff() {
        let (p, _) = worked();
        let bad = PayoffSpec::table(vec![0.0, 9.0, 0.0]);
        assert!(matches!(
            backward_induct(&p, &bad),
            Err(EngineError::NonConvexPayoff)
        ));
    }
}
