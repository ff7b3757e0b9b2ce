//! The binomial market with delayed information: parameters, payoffs, and the
//! delay pricing measures.

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::numeric;

/// A recombining binomial lattice with execution delay.
///
/// The asset moves by ratio `u` or `d` each period over `n_periods` periods,
/// cash grows at the continuously compounded per-period rate `r`, and the
/// hedger observes prices with a lag of `delay` periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Initial asset price.
    pub s0: f64,
    /// Up ratio per period.
    pub u: f64,
    /// Down ratio per period.
    pub d: f64,
    /// Per-period continuously compounded rate; discounting is by `e^{-rk}`.
    pub r: f64,
    /// Number of periods `N`.
    pub n_periods: usize,
    /// Information delay `H` in periods.
    pub delay: usize,
}

impl MarketParams {
    /// Growth factor `e^r` of one period of cash.
    pub fn growth(&self) -> f64 {
        self.r.exp()
    }

    /// All violated model invariants, as human-readable labels.
    /// Empty iff the parameters are valid.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.s0.is_finite() && self.s0 > 0.0) {
            v.push(format!("s0 must be positive and finite, got {}", self.s0));
        }
        if !(self.d.is_finite() && self.d > 0.0) {
            v.push(format!("d must be positive and finite, got {}", self.d));
        }
        if !(self.u.is_finite() && self.u > self.d) {
            v.push(format!("need 0 < d < u, got d={}, u={}", self.d, self.u));
        }
        if !self.r.is_finite() {
            v.push(format!("r must be finite, got {}", self.r));
        } else {
            let g = self.growth();
            if !(self.d < g && g < self.u) {
                v.push(format!(
                    "rate window violated: need d < e^r < u, got d={}, e^r={g}, u={}",
                    self.d, self.u
                ));
            }
        }
        if self.n_periods < 1 {
            v.push("n_periods must be at least 1".to_string());
        }
        if self.delay + 1 > self.n_periods {
            v.push(format!(
                "delay exceeds n_periods - 1: H={}, N={}",
                self.delay, self.n_periods
            ));
        }
        v
    }

    /// `Ok(())` when valid, otherwise the full violation list.
    pub fn checked(&self) -> Result<(), EngineError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(EngineError::InvalidParams(v))
        }
    }

    /// Price at a lattice node, `s0 · u^a · d^b`. Computed in log-space when
    /// the node is deeper than 1000 periods to avoid over/underflow.
    pub fn node_price(&self, node: LatticeNode) -> f64 {
        let (a, b) = (node.ups, node.downs);
        if a + b > 1000 {
            (self.s0.ln() + a as f64 * self.u.ln() + b as f64 * self.d.ln()).exp()
        } else {
            self.s0 * self.u.powi(a as i32) * self.d.powi(b as i32)
        }
    }

    /// Terminal price after `up_count` up-moves out of `n_periods`.
    pub fn terminal_price(&self, up_count: usize) -> Result<f64, EngineError> {
        if up_count > self.n_periods {
            return Err(EngineError::OutOfRange {
                what: "terminal up-count",
                value: up_count as i64,
                min: 0,
                max: self.n_periods as i64,
            });
        }
        Ok(self.node_price(LatticeNode {
            ups: up_count,
            downs: self.n_periods - up_count,
        }))
    }
}

/// A node of the recombining lattice, identified by move counts rather than
/// price so that lattices with `u·d = 1` (price collisions) stay unambiguous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeNode {
    pub ups: usize,
    pub downs: usize,
}

impl LatticeNode {
    pub fn depth(&self) -> usize {
        self.ups + self.downs
    }
}

/// Payoff family of a European claim on the terminal price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffKind {
    Call,
    Put,
    Table,
}

/// A convex terminal claim: a call, a put, or a table of values indexed by
/// terminal up-count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec {
    pub kind: PayoffKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<f64>>,
}

impl PayoffSpec {
    pub fn call(strike: f64) -> Self {
        PayoffSpec {
            kind: PayoffKind::Call,
            strike: Some(strike),
            table: None,
        }
    }

    pub fn put(strike: f64) -> Self {
        PayoffSpec {
            kind: PayoffKind::Put,
            strike: Some(strike),
            table: None,
        }
    }

    pub fn table(values: Vec<f64>) -> Self {
        PayoffSpec {
            kind: PayoffKind::Table,
            strike: None,
            table: Some(values),
        }
    }

    /// Structural consistency with a lattice: strike present for call/put,
    /// table of length `N + 1` for tabulated claims.
    pub fn checked(&self, params: &MarketParams) -> Result<(), EngineError> {
        match self.kind {
            PayoffKind::Call | PayoffKind::Put => {
                let k = self.strike.ok_or_else(|| {
                    EngineError::InvalidPayoff("call/put payoff requires a strike".into())
                })?;
                if !(k.is_finite() && k >= 0.0) {
                    return Err(EngineError::InvalidPayoff(format!(
                        "strike must be finite and nonnegative, got {k}"
                    )));
                }
            }
            PayoffKind::Table => {
                let t = self
                    .table
                    .as_ref()
                    .ok_or_else(|| EngineError::InvalidPayoff("table payoff requires values".into()))?;
                if t.len() != params.n_periods + 1 {
                    return Err(EngineError::InvalidPayoff(format!(
                        "table length {} does not match n_periods + 1 = {}",
                        t.len(),
                        params.n_periods + 1
                    )));
                }
                if t.iter().any(|v| !v.is_finite()) {
                    return Err(EngineError::InvalidPayoff("table contains non-finite values".into()));
                }
            }
        }
        Ok(())
    }
}

/// Terminal payoff for a given up-count.
pub fn eval_payoff(
    spec: &PayoffSpec,
    params: &MarketParams,
    up_count: usize,
) -> Result<f64, EngineError> {
    spec.checked(params)?;
    match spec.kind {
        PayoffKind::Call => {
            let s = params.terminal_price(up_count)?;
            Ok((s - spec.strike.unwrap()).max(0.0))
        }
        PayoffKind::Put => {
            let s = params.terminal_price(up_count)?;
            Ok((spec.strike.unwrap() - s).max(0.0))
        }
        PayoffKind::Table => {
            let t = spec.table.as_ref().unwrap();
            t.get(up_count).copied().ok_or(EngineError::OutOfRange {
                what: "terminal up-count",
                value: up_count as i64,
                min: 0,
                max: params.n_periods as i64,
            })
        }
    }
}

/// Discrete convexity of the claim in the terminal price: secant slopes
/// between consecutive terminal nodes must be nondecreasing.
///
/// Slope differences down to `-1e-12` are accepted to absorb float noise on
/// large tables.
pub fn check_convexity(spec: &PayoffSpec, params: &MarketParams) -> bool {
    let n = params.n_periods;
    if spec.checked(params).is_err() {
        return false;
    }
    let mut prev_slope = f64::NEG_INFINITY;
    let mut prev_x = 0.0;
    let mut prev_y = 0.0;
    for i in 0..=n {
        let x = params.terminal_price(i).expect("in range");
        let y = eval_payoff(spec, params, i).expect("checked");
        if i > 0 {
            let slope = (y - prev_y) / (x - prev_x);
            if slope - prev_slope < -1e-12 {
                return false;
            }
            prev_slope = slope;
        }
        prev_x = x;
        prev_y = y;
    }
    true
}

/// The `H + 1` pricing probabilities attached to the possible positions of
/// the first observed price inside a delay block.
///
/// `probs_up[j] = (u^j d^{H-j} e^r - d^{H+1}) / (u^{H+1} - d^{H+1})` for
/// `j = 0..=H`; `probs_down[j] = 1 - probs_up[j]` exactly. The extremes give
/// the two-state chain parameters: `p_u = probs_up[H]`, `p_d = probs_up[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayMeasure {
    pub probs_up: Vec<f64>,
    pub probs_down: Vec<f64>,
}

impl DelayMeasure {
    pub fn p_u(&self) -> f64 {
        *self.probs_up.last().unwrap()
    }
    pub fn p_d(&self) -> f64 {
        self.probs_up[0]
    }
    pub fn q_u(&self) -> f64 {
        *self.probs_down.last().unwrap()
    }
    pub fn q_d(&self) -> f64 {
        self.probs_down[0]
    }
}

/// Construct the delay measures for valid parameters.
pub fn delay_measures(params: &MarketParams) -> Result<DelayMeasure, EngineError> {
    params.checked()?;
    let h = params.delay;
    let (u, d, g) = (params.u, params.d, params.growth());
    // u^{H+1} and d^{H+1} in log-space for very long blocks.
    let pow = |base: f64, e: usize| -> f64 {
        if e > 1000 {
            (e as f64 * base.ln()).exp()
        } else {
            base.powi(e as i32)
        }
    };
    let denom = pow(u, h + 1) - pow(d, h + 1);
    let dh1 = pow(d, h + 1);
    let mut probs_up = Vec::with_capacity(h + 1);
    let mut probs_down = Vec::with_capacity(h + 1);
    for j in 0..=h {
        let p = (pow(u, j) * pow(d, h - j) * g - dh1) / denom;
        probs_up.push(p);
        probs_down.push(1.0 - p);
    }
    Ok(DelayMeasure {
        probs_up,
        probs_down,
    })
}

/// Classical Cox-Ross-Rubinstein price of the claim, ignoring the delay:
/// `e^{-rN} Σ_i C(N,i) p^i (1-p)^{N-i} Φ(S_0 u^i d^{N-i})` with
/// `p = (e^r - d)/(u - d)`. This is the `H = 0` baseline.
pub fn crr_price(params: &MarketParams, spec: &PayoffSpec) -> Result<f64, EngineError> {
    let mut p0 = *params;
    p0.delay = 0;
    p0.checked()?;
    spec.checked(params)?;
    let n = params.n_periods;
    let p = (params.growth() - params.d) / (params.u - params.d);
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut acc = 0.0;
    for i in 0..=n {
        let phi = eval_payoff(spec, params, i)?;
        if phi == 0.0 {
            continue;
        }
        let lw = numeric::ln_choose(n as u64, i as u64) + i as f64 * lp + (n - i) as f64 * lq;
        acc += lw.exp() * phi;
    }
    Ok((-params.r * n as f64).exp() * acc)
}
