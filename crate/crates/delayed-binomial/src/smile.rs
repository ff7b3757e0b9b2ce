//! Implied-volatility smiles from super-replication prices.
//!
//! At finite step counts the delay enlarges and distorts the effective
//! volatility, so inverting super-replication prices through Black-Scholes
//! produces strike-dependent implied vols; as the step count grows the curve
//! flattens toward the enlarged level `sqrt(2H+1)·σ`.

use std::fmt::Write as _;

use crate::asymptotics::{build_scaling, bs_price, OptionKind};
use crate::direct::{forward_distribution, ChainSpec, InitialState};
use crate::dp::fmt12;
use crate::error::EngineError;

/// Outcome marker of one implied-vol inversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IvFlag {
    Ok,
    BelowIntrinsic,
    AboveBound,
}

impl IvFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            IvFlag::Ok => "ok",
            IvFlag::BelowIntrinsic => "below_intrinsic",
            IvFlag::AboveBound => "above_bound",
        }
    }
}

/// Result of inverting one price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IvResult {
    Vol(f64),
    BelowIntrinsic,
    AboveBound,
}

impl IvResult {
    pub fn vol(&self) -> Option<f64> {
        match self {
            IvResult::Vol(v) => Some(*v),
            _ => None,
        }
    }

    pub fn flag(&self) -> IvFlag {
        match self {
            IvResult::Vol(_) => IvFlag::Ok,
            IvResult::BelowIntrinsic => IvFlag::BelowIntrinsic,
            IvResult::AboveBound => IvFlag::AboveBound,
        }
    }
}

/// Black-Scholes implied volatility by bracketed bisection on
/// `σ ∈ [1e-6, 10]`: at most 200 iterations, stopping when
/// `|bs_price(σ) - price| <= 1e-10 · s0`. Prices outside the attainable band
/// come back flagged instead of erroring.
pub fn implied_vol(
    price: f64,
    s0: f64,
    strike: f64,
    r_annual: f64,
    horizon: f64,
    kind: OptionKind,
) -> Result<IvResult, EngineError> {
    if !(price >= 0.0) {
        return Err(EngineError::InvalidConfig(format!(
            "implied_vol needs price >= 0, got {price}"
        )));
    }
    let df = (-r_annual * horizon).exp();
    let (lower, upper) = match kind {
        OptionKind::Call => ((s0 - strike * df).max(0.0), s0),
        OptionKind::Put => ((strike * df - s0).max(0.0), strike * df),
    };
    if price < lower {
        return Ok(IvResult::BelowIntrinsic);
    }
    if price >= upper {
        return Ok(IvResult::AboveBound);
    }
    let (mut lo, mut hi) = (1e-6f64, 10.0f64);
    let tol = 1e-10 * s0;
    let value = |sig: f64| bs_price(s0, strike, r_annual, sig, horizon, kind);
    if price <= value(lo)? {
        return Ok(IvResult::Vol(lo));
    }
    if price >= value(hi)? {
        // Inside the theoretical band but beyond σ = 10.
        return Ok(IvResult::AboveBound);
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let v = value(mid)?;
        if (v - price).abs() <= tol {
            return Ok(IvResult::Vol(mid));
        }
        if v < price {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(IvResult::Vol(mid))
}

/// Scaling inputs shared by every strike of one smile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmileBase {
    pub s0: f64,
    pub sigma: f64,
    pub r_annual: f64,
    pub horizon: f64,
    pub h_periods: usize,
    pub n: usize,
}

/// One strike of a smile curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmilePoint {
    pub strike: f64,
    pub price_call: f64,
    pub price_put: f64,
    pub iv_call: Option<f64>,
    pub iv_put: Option<f64>,
    pub flag_call: IvFlag,
    pub flag_put: IvFlag,
}

/// Default grid: 41 linearly spaced strikes on `[0.6 s0, 1.4 s0]`.
pub fn default_strike_grid(s0: f64) -> Vec<f64> {
    (0..41)
        .map(|i| s0 * (0.6 + 0.8 * i as f64 / 40.0))
        .collect()
}

/// Smile across a strike grid.
///
/// The terminal distributions are strike-independent, so they are computed
/// once per curve and reused for every strike — this is what keeps large `n`
/// affordable. The lattice drift is pinned to the rate (the prices the delay
/// measures produce do not depend on a subjective drift).
pub fn smile_curve(base: &SmileBase, strikes: &[f64]) -> Result<Vec<SmilePoint>, EngineError> {
    if strikes.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
        return Err(EngineError::InvalidConfig("strikes must be positive".to_string()));
    }
    let seq = build_scaling(
        base.n,
        base.r_annual,
        base.sigma,
        base.r_annual,
        base.h_periods,
        base.horizon,
    )?;
    let params = seq.market_params(base.s0);
    let chain = ChainSpec::from_params(&params, base.h_periods)?;
    let dist_up = forward_distribution(&chain, InitialState::Up)?;
    let dist_dn = forward_distribution(&chain, InitialState::Down)?;
    let terminal: Vec<f64> = (0..=base.n)
        .map(|i| params.terminal_price(i).expect("in range"))
        .collect();
    debug_assert_eq!(terminal.len(), dist_up.probs.len());
    let disc = (-params.r * base.n as f64).exp();

    let mut points = Vec::with_capacity(strikes.len());
    for &k in strikes {
        let mut call = (0.0f64, 0.0f64); // (E | up, E | down)
        let mut put = (0.0f64, 0.0f64);
        for (i, s) in terminal.iter().enumerate() {
            let c = (s - k).max(0.0);
            let p = (k - s).max(0.0);
            call.0 += dist_up.probs[i] * c;
            call.1 += dist_dn.probs[i] * c;
            put.0 += dist_up.probs[i] * p;
            put.1 += dist_dn.probs[i] * p;
        }
        let price_call = disc * call.0.max(call.1);
        let price_put = disc * put.0.max(put.1);
        let iv_c = implied_vol(price_call, base.s0, k, base.r_annual, base.horizon, OptionKind::Call)?;
        let iv_p = implied_vol(price_put, base.s0, k, base.r_annual, base.horizon, OptionKind::Put)?;
        points.push(SmilePoint {
            strike: k,
            price_call,
            price_put,
            iv_call: iv_c.vol(),
            iv_put: iv_p.vol(),
            flag_call: iv_c.flag(),
            flag_put: iv_p.flag(),
        });
    }
    Ok(points)
}

/// CSV export: `strike,price_call,price_put,iv_call,iv_put,flag_call,flag_put`.
/// Flagged strikes stay in the table (iv printed as `nan`) so rows align.
pub fn smile_to_csv(points: &[SmilePoint]) -> String {
    let mut out = String::from("strike,price_call,price_put,iv_call,iv_put,flag_call,flag_put\n");
    for p in points {
        let iv = |v: Option<f64>| v.map(fmt12).unwrap_or_else(|| "nan".to_string());
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt12(p.strike),
            fmt12(p.price_call),
            fmt12(p.price_put),
            iv(p.iv_call),
            iv(p.iv_put),
            p.flag_call.as_str(),
            p.flag_put.as_str(),
        )
        .expect("string write");
    }
    out
}
