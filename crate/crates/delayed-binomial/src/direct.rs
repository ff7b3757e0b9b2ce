//! Direct pricing through the two-state move chain.
//!
//! Conditioned on the first observable move, the sequence of up/down moves is
//! a two-state Markov chain whose transition probabilities are the extreme
//! delay measures, with the last `H + 1` moves collapsing into a single
//! all-up/all-down block. The terminal up-count distribution of that chain
//! prices the claim in one forward pass — `O(Ñ²)` time, `O(Ñ)` memory — which
//! is what scales to the large step counts the smile experiments need.
//!
//! The closed-form combinatorial expressions for the same distributions
//! (counting maximal runs of consecutive moves) are implemented alongside as
//! a cross-check; the forward recursion is authoritative.

use std::fmt::Write as _;

use crate::dp::fmt12;
use crate::error::EngineError;
use crate::lattice::{
    check_convexity, delay_measures, eval_payoff, LatticeNode, MarketParams, PayoffSpec,
};
use crate::numeric::binomial;

/// Initial (conditioning) state of the move chain: the direction of the first
/// observable move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    Up,
    Down,
}

/// The conditioned move chain over `n_eff = N - k` effective steps.
///
/// Transition rows: from a last move down, up with probability `p_d`; from a
/// last move up, up with probability `p_u`. The final effective step is the
/// terminal block of `H + 1` identical moves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSpec {
    pub p_u: f64,
    pub q_u: f64,
    pub p_d: f64,
    pub q_d: f64,
    /// Effective step count `Ñ = N - k`.
    pub n_eff: usize,
    pub delay: usize,
}

impl ChainSpec {
    /// Chain for pricing at time `k` (requires `H <= k <= N - 1`).
    pub fn from_params(params: &MarketParams, k: usize) -> Result<Self, EngineError> {
        params.checked()?;
        if k < params.delay || k >= params.n_periods {
            return Err(EngineError::OutOfRange {
                what: "pricing time k",
                value: k as i64,
                min: params.delay as i64,
                max: params.n_periods as i64 - 1,
            });
        }
        let m = delay_measures(params)?;
        Ok(ChainSpec {
            p_u: m.p_u(),
            q_u: m.q_u(),
            p_d: m.p_d(),
            q_d: m.q_d(),
            n_eff: params.n_periods - k,
            delay: params.delay,
        })
    }

    fn checked(&self) -> Result<(), EngineError> {
        let ok = self.n_eff >= 1
            && (self.p_u + self.q_u - 1.0).abs() < 1e-12
            && (self.p_d + self.q_d - 1.0).abs() < 1e-12
            && [self.p_u, self.p_d].iter().all(|p| *p > 0.0 && *p < 1.0);
        if ok {
            Ok(())
        } else {
            Err(EngineError::InvalidConfig(format!("invalid chain: {self:?}")))
        }
    }
}

/// Exact distribution of the terminal up-count (over `Ñ + H` move
/// coordinates), conditioned on the initial chain state.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalDistribution {
    /// `probs[i]` = probability of `i` total up-moves, `i = 0..=Ñ+H`.
    pub probs: Vec<f64>,
    pub conditioned_on: InitialState,
}

/// Forward recursion over (up-count, last-move) states: `Ñ - 1` ordinary
/// steps, then the terminal block of `H + 1` identical moves.
pub fn forward_distribution(
    chain: &ChainSpec,
    initial_state: InitialState,
) -> Result<TerminalDistribution, EngineError> {
    chain.checked()?;
    let nt = chain.n_eff;
    let h = chain.delay;
    // up[i] / dn[i]: mass with i up-moves so far and last move up / down.
    let mut up = vec![0.0f64; nt];
    let mut dn = vec![0.0f64; nt];
    match initial_state {
        InitialState::Up => up[0] = 1.0,
        InitialState::Down => dn[0] = 1.0,
    }
    let mut new_up = vec![0.0f64; nt];
    for step in 0..nt - 1 {
        new_up[..=step + 1].fill(0.0);
        for i in (0..=step).rev() {
            new_up[i + 1] = chain.p_u * up[i] + chain.p_d * dn[i];
            // Last move down: up-count unchanged; safe to update in place.
            dn[i] = chain.q_u * up[i] + chain.q_d * dn[i];
        }
        std::mem::swap(&mut up, &mut new_up);
    }
    let mut probs = vec![0.0f64; nt + h + 1];
    for i in 0..nt {
        probs[i + h + 1] += chain.p_u * up[i] + chain.p_d * dn[i];
        probs[i] += chain.q_u * up[i] + chain.q_d * dn[i];
    }
    Ok(TerminalDistribution {
        probs,
        conditioned_on: initial_state,
    })
}

/// Closed-form distribution conditioned on an initial up state.
///
/// Piecewise in the terminal up-count `i`, built from run-counting terms
/// `f(i,j)` (paths whose terminal block goes up) and `h(i,j)` (block goes
/// down), where `j` counts maximal runs. Out-of-range binomial coefficients
/// vanish, which silently truncates every sum; branch precedence matters in
/// the small-`Ñ`/large-`H` corners and follows the forward oracle.
pub fn lemma1_distribution(chain: &ChainSpec) -> Result<TerminalDistribution, EngineError> {
    chain.checked()?;
    let nt = chain.n_eff as i64;
    let h = chain.delay as i64;
    let (pu, qu, pd, qd) = (chain.p_u, chain.q_u, chain.p_d, chain.q_d);
    let pw = |b: f64, e: i64| b.powi(e as i32);

    let f = |i: i64, j: i64| -> f64 {
        binomial(nt + h - i - 1, j - 1)
            * binomial(i - h, j)
            * pw(qu, j)
            * pw(qd, nt + h - i - j)
            * pw(pu, i - j - h)
            * pw(pd, j)
    };
    let hh = |i: i64, j: i64| -> f64 {
        binomial(nt - i - 2, j - 1)
            * binomial(i, j - 1)
            * pw(qu, j)
            * pw(qd, nt - i - j)
            * pw(pu, i - j + 1)
            * pw(pd, j - 1)
            + binomial(nt - i - 2, j - 1)
                * (binomial(i + 1, j) - binomial(i, j - 1))
                * pw(qu, j + 1)
                * pw(qd, nt - i - j - 1)
                * pw(pu, i - j)
                * pw(pd, j)
    };
    let sum = |lo: i64, hi: i64, term: &dyn Fn(i64) -> f64| -> f64 {
        (lo..=hi).map(term).sum()
    };

    let mut probs = Vec::with_capacity((nt + h + 1) as usize);
    for i in 0..=nt + h {
        let v = if i == nt + h {
            pw(pu, nt)
        } else if i >= nt {
            sum(1, (i - h).min(nt + h - i), &|j| f(i, j))
        } else if i == nt - 1 {
            pw(pu, nt - 1) * qu + sum(1, (nt - h - 1).min(h + 1), &|j| f(i, j))
        } else if i >= h + 1 {
            sum(1, (i + 1).min(nt - i - 1), &|j| hh(i, j))
                + sum(1, (i - h).min(nt + h - i), &|j| f(i, j))
        } else {
            sum(1, (i + 1).min(nt - i - 1), &|j| hh(i, j))
        };
        probs.push(v);
    }
    Ok(TerminalDistribution {
        probs,
        conditioned_on: InitialState::Up,
    })
}

/// Closed-form distribution conditioned on an initial down state
/// (counting maximal upward runs instead of downward ones).
pub fn lemma2_distribution(chain: &ChainSpec) -> Result<TerminalDistribution, EngineError> {
    chain.checked()?;
    let nt = chain.n_eff as i64;
    let h = chain.delay as i64;
    let (pu, qu, pd, qd) = (chain.p_u, chain.q_u, chain.p_d, chain.q_d);
    let pw = |b: f64, e: i64| b.powi(e as i32);

    let ft = |i: i64, j: i64| -> f64 {
        binomial(i - h - 2, j - 1)
            * binomial(nt + h - i, j - 1)
            * pw(qu, j - 1)
            * pw(qd, nt + h - i - j + 1)
            * pw(pu, i - j - h)
            * pw(pd, j)
            + binomial(i - h - 2, j - 1)
                * (binomial(nt + h - i + 1, j) - binomial(nt + h - i, j - 1))
                * pw(qu, j)
                * pw(qd, nt + h - i - j)
                * pw(pu, i - j - h - 1)
                * pw(pd, j + 1)
    };
    let ht = |i: i64, j: i64| -> f64 {
        binomial(i - 1, j - 1)
            * binomial(nt - i, j)
            * pw(qu, j)
            * pw(qd, nt - i - j)
            * pw(pu, i - j)
            * pw(pd, j)
    };
    let sum = |lo: i64, hi: i64, term: &dyn Fn(i64) -> f64| -> f64 {
        (lo..=hi).map(term).sum()
    };

    let mut probs = Vec::with_capacity((nt + h + 1) as usize);
    for i in 0..=nt + h {
        let v = if i == 0 {
            pw(qd, nt)
        } else if i == h + 1 {
            pw(qd, nt - 1) * pd + sum(1, (h + 1).min(nt - h - 1), &|j| ht(i, j))
        } else if i <= h {
            sum(1, i.min(nt - i), &|j| ht(i, j))
        } else if i <= nt - 1 {
            sum(1, i.min(nt - i), &|j| ht(i, j))
                + sum(1, (i - h - 1).min(nt + h - i + 1), &|j| ft(i, j))
        } else {
            sum(1, (i - h - 1).min(nt + h - i + 1), &|j| ft(i, j))
        };
        probs.push(v);
    }
    Ok(TerminalDistribution {
        probs,
        conditioned_on: InitialState::Down,
    })
}

/// Which realization of the terminal distributions to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistMethod {
    /// Forward chain recursion (production path, authoritative).
    #[default]
    Forward,
    /// Closed-form combinatorial expressions (verification mode).
    ClosedForm,
}

/// Value pair at time `k` for a block whose root is `root` (so
/// `root.depth() == k - H`): expectations of the discounted claim under the
/// chain conditioned on an initial up / down state.
pub fn direct_values(
    params: &MarketParams,
    spec: &PayoffSpec,
    k: usize,
    root: LatticeNode,
) -> Result<(f64, f64), EngineError> {
    direct_values_via(params, spec, k, root, DistMethod::Forward)
}

/// [`direct_values`] with an explicit distribution method.
pub fn direct_values_via(
    params: &MarketParams,
    spec: &PayoffSpec,
    k: usize,
    root: LatticeNode,
    method: DistMethod,
) -> Result<(f64, f64), EngineError> {
    spec.checked(params)?;
    if !check_convexity(spec, params) {
        return Err(EngineError::NonConvexPayoff);
    }
    let chain = ChainSpec::from_params(params, k)?;
    if root.depth() != k - params.delay {
        return Err(EngineError::OutOfRange {
            what: "root depth",
            value: root.depth() as i64,
            min: (k - params.delay) as i64,
            max: (k - params.delay) as i64,
        });
    }
    let (dist_up, dist_dn) = match method {
        DistMethod::Forward => (
            forward_distribution(&chain, InitialState::Up)?,
            forward_distribution(&chain, InitialState::Down)?,
        ),
        DistMethod::ClosedForm => (lemma1_distribution(&chain)?, lemma2_distribution(&chain)?),
    };
    let disc = (-params.r * chain.n_eff as f64).exp();
    let mut acc_up = 0.0;
    let mut acc_dn = 0.0;
    for i in 0..dist_up.probs.len() {
        // Terminal up-count = root ups + chain ups.
        let phi = eval_payoff(spec, params, root.ups + i)?;
        acc_up += dist_up.probs[i] * phi;
        acc_dn += dist_dn.probs[i] * phi;
    }
    Ok((disc * acc_up, disc * acc_dn))
}

/// Super-replication price by the direct method:
/// `e^{-rH} · max` of the two conditional values at `k = H`.
pub fn direct_price(params: &MarketParams, spec: &PayoffSpec) -> Result<f64, EngineError> {
    let h = params.delay;
    let (vu, vd) = direct_values(params, spec, h, LatticeNode { ups: 0, downs: 0 })?;
    Ok((-params.r * h as f64).exp() * vu.max(vd))
}

/// CSV export of a conditioned distribution pair: `i,prob_up,prob_down`.
pub fn distributions_to_csv(up: &TerminalDistribution, down: &TerminalDistribution) -> String {
    assert_eq!(up.probs.len(), down.probs.len());
    let mut out = String::from("i,prob_up,prob_down\n");
    for (i, (pu, pd)) in up.probs.iter().zip(&down.probs).enumerate() {
        writeln!(out, "{i},{},{}", fmt12(*pu), fmt12(*pd)).expect("string write");
    }
    out
}
