//! The diffusive scaling regime: per-step parameters shrinking like
//! `δ_n = 1/√n`, the chain probabilities with their expansions, Monte Carlo
//! chain simulation, and the Black-Scholes reference pricer.
//!
//! As `n` grows with the delay `H` held fixed, the conditioned move chain's
//! terminal log-price converges to a Gaussian with variance `(2H+1)σ²T`: the
//! delay enlarges the effective volatility to `sqrt(2H+1)·σ`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::direct::direct_price;
use crate::dp::fmt12;
use crate::error::EngineError;
use crate::lattice::{MarketParams, PayoffSpec};
use crate::numeric::norm_cdf;

/// European option direction for the Black-Scholes reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

/// One member of the scaling family: annualized inputs plus every derived
/// per-step quantity at step count `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingSequence {
    pub n: usize,
    pub mu: f64,
    pub sigma: f64,
    pub r_annual: f64,
    pub h_periods: usize,
    pub horizon: f64,
    /// `1/√n`.
    pub delta_n: f64,
    /// Per-step drift `μ T δ_n²`.
    pub mu_n: f64,
    /// Per-step move size `σ √T δ_n`.
    pub sigma_n: f64,
    pub u_n: f64,
    pub d_n: f64,
    /// Per-step rate `r T δ_n²`.
    pub r_n: f64,
    /// Real-time span of the delay, `H T δ_n²` years.
    pub h_time: f64,
    /// Up probability from an up state, `(u_n^H e^{r_n} - d_n^{H+1}) / (u_n^{H+1} - d_n^{H+1})`.
    pub p_nu: f64,
    /// Up probability from a down state.
    pub p_nd: f64,
    /// `p_nu - p_nd`; tends to `H/(H+1)`.
    pub lambda_n: f64,
    /// First-order coefficient of the expansion: `p_nu ≈ (2H+1)/(2(H+1)) + phi·δ_n`.
    pub phi: f64,
}

/// Smallest `n` at which the rate window `d_n < e^{r_n} < u_n` holds.
/// The window reduces to `|μ - r| √T δ_n < σ`, so the threshold is explicit.
pub fn min_valid_n(mu: f64, sigma: f64, r_annual: f64, horizon: f64) -> usize {
    let bound = (mu - r_annual).abs().powi(2) * horizon / (sigma * sigma);
    let mut n = (bound.floor() as usize + 1).max(1);
    // The analytic threshold can land one short when `bound` is an exact
    // integer up to rounding; step forward until the strict window holds.
    while !rate_window_holds(n, mu, sigma, r_annual, horizon) {
        n += 1;
    }
    n
}

/// Strict `d_n < e^{r_n} < u_n`, tested on the exponents.
fn rate_window_holds(n: usize, mu: f64, sigma: f64, r_annual: f64, horizon: f64) -> bool {
    let delta_n = 1.0 / (n as f64).sqrt();
    let mu_n = mu * horizon * delta_n * delta_n;
    let sigma_n = sigma * horizon.sqrt() * delta_n;
    let r_n = r_annual * horizon * delta_n * delta_n;
    mu_n - sigma_n < r_n && r_n < mu_n + sigma_n
}

/// Construct the scaling member at step count `n`.
pub fn build_scaling(
    n: usize,
    mu: f64,
    sigma: f64,
    r_annual: f64,
    h_periods: usize,
    horizon: f64,
) -> Result<ScalingSequence, EngineError> {
    if n < 1 || !(sigma > 0.0) || !(horizon > 0.0) {
        return Err(EngineError::InvalidConfig(format!(
            "scaling needs n >= 1, sigma > 0, horizon > 0 (got n={n}, sigma={sigma}, horizon={horizon})"
        )));
    }
    let delta_n = 1.0 / (n as f64).sqrt();
    let mu_n = mu * horizon * delta_n * delta_n;
    let sigma_n = sigma * horizon.sqrt() * delta_n;
    let u_n = (mu_n + sigma_n).exp();
    let d_n = (mu_n - sigma_n).exp();
    let r_n = r_annual * horizon * delta_n * delta_n;
    let g = r_n.exp();
    if !rate_window_holds(n, mu, sigma, r_annual, horizon) {
        return Err(EngineError::ScalingInvalid {
            n,
            min_valid_n: min_valid_n(mu, sigma, r_annual, horizon),
        });
    }
    let h = h_periods as i32;
    let den = u_n.powi(h + 1) - d_n.powi(h + 1);
    let p_nu = (u_n.powi(h) * g - d_n.powi(h + 1)) / den;
    let p_nd = (d_n.powi(h) * g - d_n.powi(h + 1)) / den;
    let hf = h_periods as f64;
    let c1 = (mu - r_annual) / (2.0 * (hf + 1.0) * sigma)
        + (2.0 * hf + 1.0) / (4.0 * (hf + 1.0)) * sigma;
    Ok(ScalingSequence {
        n,
        mu,
        sigma,
        r_annual,
        h_periods,
        horizon,
        delta_n,
        mu_n,
        sigma_n,
        u_n,
        d_n,
        r_n,
        h_time: hf * horizon * delta_n * delta_n,
        p_nu,
        p_nd,
        lambda_n: p_nu - p_nd,
        phi: -c1 * horizon.sqrt(),
    })
}

impl ScalingSequence {
    /// The lattice this scaling member defines.
    pub fn market_params(&self, s0: f64) -> MarketParams {
        MarketParams {
            s0,
            u: self.u_n,
            d: self.d_n,
            r: self.r_n,
            n_periods: self.n,
            delay: self.h_periods,
        }
    }
}

/// Residuals of the chain probabilities against leading + first-order terms
/// of their expansion; both shrink like `δ_n²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionResiduals {
    pub res_pu: f64,
    pub res_pd: f64,
}

pub fn expansion_check(seq: &ScalingSequence) -> ExpansionResiduals {
    let h = seq.h_periods as f64;
    let first = seq.phi * seq.delta_n;
    ExpansionResiduals {
        res_pu: seq.p_nu - ((2.0 * h + 1.0) / (2.0 * (h + 1.0)) + first),
        res_pd: seq.p_nd - (1.0 / (2.0 * (h + 1.0)) + first),
    }
}

/// Paths per independently seeded simulation block. Fixed so that results do
/// not depend on how blocks are spread across threads.
const SIM_BLOCK: u64 = 4096;

/// Thread budget honoring `DELAYED_BINOMIAL_THREADS` (unset or 0 = one per
/// available core).
pub fn thread_budget() -> usize {
    let auto = || {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    };
    match std::env::var("DELAYED_BINOMIAL_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => auto(),
            Ok(k) => k,
        },
        Err(_) => auto(),
    }
}

/// Sample terminal `log(S_n / S_0)` under the pricing chain: a uniform
/// initial state, `n - H - 1` ordinary moves, then the terminal block of
/// `H + 1` identical moves.
///
/// Deterministic per seed: block `b` of `SIM_BLOCK` paths draws from a
/// ChaCha12 stream derived as `(seed, b)`, independent of the thread
/// partitioning.
pub fn simulate_chain(
    seq: &ScalingSequence,
    paths: usize,
    seed: u64,
) -> Result<Vec<f64>, EngineError> {
    if seq.n < seq.h_periods + 2 {
        return Err(EngineError::OutOfRange {
            what: "scaling step count n (need n >= H + 2 for the chain)",
            value: seq.n as i64,
            min: seq.h_periods as i64 + 2,
            max: i64::MAX,
        });
    }
    if paths == 0 {
        return Err(EngineError::InvalidConfig("paths must be >= 1".to_string()));
    }
    let n_blocks = (paths as u64).div_ceil(SIM_BLOCK);
    let threads = thread_budget().min(n_blocks as usize).max(1);
    let mut out = vec![0.0f64; paths];

    let run_block = |block: u64, buf: &mut [f64]| {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(block + 1);
        let h = seq.h_periods;
        let ordinary = seq.n - h - 1;
        for slot in buf.iter_mut() {
            let mut last_up = rng.gen::<f64>() < 0.5;
            let mut ups = 0usize;
            for _ in 0..ordinary {
                let p = if last_up { seq.p_nu } else { seq.p_nd };
                last_up = rng.gen::<f64>() < p;
                ups += last_up as usize;
            }
            let p = if last_up { seq.p_nu } else { seq.p_nd };
            if rng.gen::<f64>() < p {
                ups += h + 1;
            }
            let x_sum = 2.0 * ups as f64 - seq.n as f64;
            *slot = seq.n as f64 * seq.mu_n + seq.sigma_n * x_sum;
        }
    };

    // Hand out whole blocks round-robin to keep the (seed, block) contract.
    std::thread::scope(|scope| {
        let mut chunks: Vec<(u64, &mut [f64])> = Vec::new();
        let mut rest = out.as_mut_slice();
        let mut block = 0u64;
        while !rest.is_empty() {
            let take = rest.len().min(SIM_BLOCK as usize);
            let (head, tail) = rest.split_at_mut(take);
            chunks.push((block, head));
            rest = tail;
            block += 1;
        }
        let mut handles = Vec::new();
        let per_thread = chunks.len().div_ceil(threads);
        while !chunks.is_empty() {
            let mine: Vec<_> = chunks
                .drain(..per_thread.min(chunks.len()))
                .collect();
            handles.push(scope.spawn(move || {
                for (b, buf) in mine {
                    run_block(b, buf);
                }
            }));
        }
        for h in handles {
            h.join().expect("simulation thread panicked");
        }
    });
    Ok(out)
}

/// Black-Scholes price of a European call/put. Degenerate inputs
/// (`sigma <= 0` or `horizon <= 0`) return the discounted intrinsic value so
/// root-finder brackets can touch `σ → 0`.
pub fn bs_price(
    s0: f64,
    strike: f64,
    r_annual: f64,
    sigma_annual: f64,
    horizon: f64,
    kind: OptionKind,
) -> Result<f64, EngineError> {
    if !(s0 > 0.0 && strike >= 0.0) || !s0.is_finite() || !strike.is_finite() {
        return Err(EngineError::InvalidConfig(format!(
            "bs_price needs s0 > 0 and strike >= 0, got s0={s0}, strike={strike}"
        )));
    }
    let df = (-r_annual * horizon.max(0.0)).exp();
    if sigma_annual <= 0.0 || horizon <= 0.0 || strike == 0.0 {
        let fwd_intrinsic = match kind {
            OptionKind::Call => (s0 - strike * df).max(0.0),
            OptionKind::Put => (strike * df - s0).max(0.0),
        };
        return Ok(fwd_intrinsic);
    }
    let vol = sigma_annual * horizon.sqrt();
    let d1 = ((s0 / strike).ln() + (r_annual + 0.5 * sigma_annual * sigma_annual) * horizon) / vol;
    let d2 = d1 - vol;
    Ok(match kind {
        OptionKind::Call => s0 * norm_cdf(d1) - strike * df * norm_cdf(d2),
        OptionKind::Put => strike * df * norm_cdf(-d2) - s0 * norm_cdf(-d1),
    })
}

/// One row of the convergence sweep CSV.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub n: usize,
    pub delta_n: f64,
    pub p_nu: f64,
    pub p_nd: f64,
    pub res_pu: f64,
    pub res_pd: f64,
    pub lambda_n: f64,
    pub price_model: f64,
    pub price_bs_enlarged: f64,
    pub gap: f64,
}

/// Build one convergence row: lattice price of the claim at this `n` against
/// the Black-Scholes price at the enlarged volatility `sqrt(2H+1)·σ`.
pub fn convergence_row(
    seq: &ScalingSequence,
    s0: f64,
    strike: f64,
    kind: OptionKind,
) -> Result<ConvergenceRow, EngineError> {
    let params = seq.market_params(s0);
    let spec = match kind {
        OptionKind::Call => PayoffSpec::call(strike),
        OptionKind::Put => PayoffSpec::put(strike),
    };
    let price_model = direct_price(&params, &spec)?;
    let enlarged = (2.0 * seq.h_periods as f64 + 1.0).sqrt() * seq.sigma;
    let price_bs = bs_price(s0, strike, seq.r_annual, enlarged, seq.horizon, kind)?;
    let res = expansion_check(seq);
    Ok(ConvergenceRow {
        n: seq.n,
        delta_n: seq.delta_n,
        p_nu: seq.p_nu,
        p_nd: seq.p_nd,
        res_pu: res.res_pu,
        res_pd: res.res_pd,
        lambda_n: seq.lambda_n,
        price_model,
        price_bs_enlarged: price_bs,
        gap: price_model - price_bs,
    })
}

/// CSV of a convergence sweep. Rows where the scaling is invalid at `n`
/// carry `nan` in every derived column instead of aborting the sweep.
pub fn convergence_csv(rows: &[Result<ConvergenceRow, (usize, EngineError)>]) -> String {
    let mut out =
        String::from("n,delta_n,p_nu,p_nd,res_pu,res_pd,lambda_n,price_model,price_bs_enlarged,gap\n");
    for row in rows {
        match row {
            Ok(r) => writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.n,
                fmt12(r.delta_n),
                fmt12(r.p_nu),
                fmt12(r.p_nd),
                fmt12(r.res_pu),
                fmt12(r.res_pd),
                fmt12(r.lambda_n),
                fmt12(r.price_model),
                fmt12(r.price_bs_enlarged),
                fmt12(r.gap),
            )
            .expect("string write"),
            Err((n, _)) => writeln!(out, "{n},nan,nan,nan,nan,nan,nan,nan,nan,nan")
                .expect("string write"),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_direct_substitution() {
        let s = build_scaling(100, 0.0, 0.1, 0.0, 1, 1.0).unwrap();
        assert!((s.delta_n - 0.1).abs() < 1e-15);
        assert!((s.sigma_n - 0.01).abs() < 1e-15);
        assert!((s.u_n - 0.01f64.exp()).abs() < 1e-15);
        assert!((s.d_n - (-0.01f64).exp()).abs() < 1e-15);
        assert!((s.h_time - 0.01).abs() < 1e-15);
    }

    #[test]
    fn lambda_tends_to_delay_fraction() {
        let mut gap_prev = f64::INFINITY;
        for n in [100, 400, 1600, 6400] {
            let s = build_scaling(n, 0.03, 0.15, 0.01, 1, 1.0).unwrap();
            let gap = (s.lambda_n - 0.5).abs();
            assert!(gap < gap_prev);
            gap_prev = gap;
        }
        assert!(gap_prev < 1e-4);
    }

    #[test]
    fn invalid_window_reports_threshold() {
        // Large drift against tiny sigma: invalid at small n.
        let err = build_scaling(4, 2.0, 0.1, 0.0, 1, 1.0).unwrap_err();
        match err {
            EngineError::ScalingInvalid { n, min_valid_n } => {
                assert_eq!(n, 4);
                assert!(build_scaling(min_valid_n, 2.0, 0.1, 0.0, 1, 1.0).is_ok());
                assert!(min_valid_n == 1 || build_scaling(min_valid_n - 1, 2.0, 0.1, 0.0, 1, 1.0).is_err());
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn residual_ratio_near_four() {
        for (mu, sigma, r, h) in [(0.0, 0.1, 0.0, 1usize), (0.05, 0.2, 0.01, 2)] {
            let mut prev: Option<ExpansionResiduals> = None;
            for n in [100, 400, 1600, 6400] {
                let s = build_scaling(n, mu, sigma, r, h, 1.0).unwrap();
                let res = expansion_check(&s);
                if let Some(p) = prev {
                    let ru = p.res_pu / res.res_pu;
                    let rd = p.res_pd / res.res_pd;
                    assert!((2.5..=6.0).contains(&ru), "ratio_u={ru}");
                    assert!((2.5..=6.0).contains(&rd), "ratio_d={rd}");
                }
                prev = Some(res);
            }
        }
    }

    #[test]
    fn expansion_leading_terms_h1() {
        let s = build_scaling(6400, 0.0, 0.1, 0.0, 1, 1.0).unwrap();
        // H = 1: leading terms 3/4 and 1/4.
        assert!((s.p_nu - 0.75).abs() < 0.01);
        assert!((s.p_nd - 0.25).abs() < 0.01);
        // With mu = r, phi reduces to the pure volatility term.
        assert!((s.phi + 3.0 / 8.0 * 0.1).abs() < 1e-15);
    }

    #[test]
    fn simulation_is_deterministic_and_partition_independent() {
        let s = build_scaling(64, 0.0, 0.2, 0.0, 1, 1.0).unwrap();
        let a = simulate_chain(&s, 10_000, 7).unwrap();
        let b = simulate_chain(&s, 10_000, 7).unwrap();
        assert_eq!(a, b);
        let c = simulate_chain(&s, 10_000, 8).unwrap();
        assert_ne!(a, c);
        // Prefix stability: fewer paths reproduce the same leading blocks.
        let d = simulate_chain(&s, 5_000, 7).unwrap();
        assert_eq!(&a[..4096], &d[..4096]);
    }

    #[test]
    fn simulated_variance_matches_enlarged_vol() {
        let s = build_scaling(1024, 0.0, 0.1, 0.0, 1, 1.0).unwrap();
        let xs = simulate_chain(&s, 100_000, 42).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        // Target variance (2H+1) σ² T = 0.03; SE of the sample variance of a
        // near-Gaussian is ~ var·√(2/(n-1)).
        let se = var * (2.0 / (xs.len() as f64 - 1.0)).sqrt();
        assert!(
            (var - 0.03).abs() < 4.0 * se + 2e-4,
            "var={var}, se={se}"
        );
    }

    #[test]
    fn bs_reference_values() {
        // ATM call, r = 0: s0 (2Φ(σ√T/2) - 1).
        let sig = 0.1732051;
        let got = bs_price(40.0, 40.0, 0.0, sig, 1.0, OptionKind::Call).unwrap();
        let want = 40.0 * (2.0 * norm_cdf(sig / 2.0) - 1.0);
        assert!((got - want).abs() < 1e-12);
        assert!((got - 2.76050244354).abs() < 5e-9);

        // Put-call parity.
        for k in [30.0, 40.0, 55.0] {
            let c = bs_price(40.0, k, 0.03, 0.25, 2.0, OptionKind::Call).unwrap();
            let p = bs_price(40.0, k, 0.03, 0.25, 2.0, OptionKind::Put).unwrap();
            assert!((c - p - (40.0 - k * (-0.06f64).exp())).abs() < 1e-12);
        }

        // Degenerate sigma: discounted intrinsic.
        let v = bs_price(40.0, 35.0, 0.05, 0.0, 1.0, OptionKind::Call).unwrap();
        assert!((v - (40.0 - 35.0 * (-0.05f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn convergence_csv_shape() {
        let rows: Vec<Result<ConvergenceRow, (usize, EngineError)>> = vec![
            convergence_row(
                &build_scaling(100, 0.0, 0.1, 0.0, 1, 1.0).unwrap(),
                40.0,
                40.0,
                OptionKind::Call,
            )
            .map_err(|e| (100, e)),
            Err((4, EngineError::ScalingInvalid { n: 4, min_valid_n: 10 })),
        ];
        let csv = convergence_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("n,delta_n,"));
        assert!(lines[1].starts_with("100,"));
        assert_eq!(lines[2], "4,nan,nan,nan,nan,nan,nan,nan,nan,nan");
    }
}
