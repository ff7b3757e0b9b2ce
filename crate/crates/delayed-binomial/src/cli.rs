//! Command-line front end: `price`, `verify`, `converge`, `smile`.
//!
//! Configuration comes from an optional JSON file (`--config path.json`) with
//! flag overrides (`--n`, `--strike`, `--h`); precedence is flags > file >
//! defaults. Exit codes: 0 success, 1 failed check, 2 invalid configuration,
//! 3 size caps / validity-window failures. All floating output is printed
//! with 12 significant digits; identical config and seed produce
//! byte-identical output. `DELAYED_BINOMIAL_THREADS` caps parallelism
//! (0 = auto); only Monte Carlo simulation is threaded.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::asymptotics::{build_scaling, convergence_csv, convergence_row, OptionKind};
use crate::direct::direct_price;
use crate::dp::backward_induct;
use crate::error::EngineError;
use crate::lattice::{MarketParams, PayoffKind, PayoffSpec};
use crate::oracle::{arbitrage_search, verification_report};
use crate::smile::{default_strike_grid, smile_curve, smile_to_csv, SmileBase};

/// Documented default seed recorded in configs; commands that need
/// randomness derive their streams from it.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "delayed-binomial", version, about = "Super-replication pricing with delayed information")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Price a claim by backward induction and the direct chain method.
    Price(CommonArgs),
    /// Cross-check DP/direct/LP prices and the hedge on a small tree.
    Verify(CommonArgs),
    /// Sweep the scaling family and tabulate convergence diagnostics.
    Converge(CommonArgs),
    /// Generate an implied-volatility smile table.
    Smile(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the period / step count.
    #[arg(long)]
    n: Option<usize>,
    /// Override the strike (collapses a smile grid to one strike).
    #[arg(long)]
    strike: Option<f64>,
    /// Override the information delay H.
    #[arg(long = "h", value_name = "DELAY")]
    delay: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Scaling-family inputs as they appear in the config file.
#[derive(Debug, Clone, Copy, Deserialize)]
struct ScalingConfig {
    s0: f64,
    #[serde(default)]
    mu: f64,
    sigma: f64,
    #[serde(default)]
    r_annual: f64,
    h_periods: usize,
    #[serde(default = "one")]
    horizon: f64,
    n: usize,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    market: Option<MarketParams>,
    scaling: Option<ScalingConfig>,
    payoff: Option<PayoffSpec>,
    output_path: Option<PathBuf>,
    // Parsed for forward compatibility with simulation-backed commands; the
    // deterministic commands below never consult it.
    #[allow(dead_code)]
    seed: Option<u64>,
    strikes: Option<Vec<f64>>,
    n_values: Option<Vec<usize>>,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I>(args: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // Help/version are successful exits; usage errors are config errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (common, runner): (&CommonArgs, fn(&RunConfig, &CommonArgs) -> Result<(String, i32), EngineError>) =
        match &cli.command {
            Command::Price(c) => (c, cmd_price),
            Command::Verify(c) => (c, cmd_verify),
            Command::Converge(c) => (c, cmd_converge),
            Command::Smile(c) => (c, cmd_smile),
        };
    let config = match load_config(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match runner(&config, common) {
        Ok((output, code)) => {
            let target = common.output.clone().or(config.output_path.clone());
            match target {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, output) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return 1;
                    }
                }
                None => print!("{output}"),
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, EngineError> {
    let mut config: RunConfig = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| EngineError::InvalidConfig(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| EngineError::InvalidConfig(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    // Flag overrides.
    if let Some(n) = common.n {
        if let Some(m) = config.market.as_mut() {
            m.n_periods = n;
        }
        if let Some(s) = config.scaling.as_mut() {
            s.n = n;
        }
        // With no market or scaling section yet, the override applies to the
        // command's built-in defaults (see `cmd_smile`).
    }
    if let Some(h) = common.delay {
        if let Some(m) = config.market.as_mut() {
            m.delay = h;
        }
        if let Some(s) = config.scaling.as_mut() {
            s.h_periods = h;
        }
    }
    if let Some(k) = common.strike {
        if let Some(p) = config.payoff.as_mut() {
            if p.kind != PayoffKind::Table {
                p.strike = Some(k);
            }
        } else {
            config.payoff = Some(PayoffSpec::call(k));
        }
        config.strikes = Some(vec![k]);
    }
    Ok(config)
}

fn require_market(config: &RunConfig) -> Result<MarketParams, EngineError> {
    config
        .market
        .ok_or_else(|| EngineError::InvalidConfig("this command needs a `market` section".to_string()))
}

fn require_payoff(config: &RunConfig) -> Result<PayoffSpec, EngineError> {
    config
        .payoff
        .clone()
        .ok_or_else(|| EngineError::InvalidConfig("this command needs a `payoff` section".to_string()))
}

/// Round to 12 significant digits so serialized floats are reproducible.
fn sig12(x: f64) -> Value {
    if x == 0.0 || !x.is_finite() {
        return json!(x);
    }
    let mag = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(11 - mag);
    json!((x * scale).round() / scale)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn cmd_price(config: &RunConfig, _common: &CommonArgs) -> Result<(String, i32), EngineError> {
    let params = require_market(config)?;
    let spec = require_payoff(config)?;
    let surface = backward_induct(&params, &spec)?;
    let direct = direct_price(&params, &spec)?;
    let gap = (surface.price - direct).abs();
    let root = surface.levels[0][0];
    let n_blocks: usize = surface.levels.iter().map(|l| l.len()).sum();
    let report = json!({
        "price_dp": sig12(surface.price),
        "price_direct": sig12(direct),
        "max_abs_diff": sig12(gap),
        "hedge": {
            "blocks": n_blocks,
            "x0_star": sig12(root.x0_star),
            "delta_star": sig12(root.delta_star),
            "value_up": sig12(root.value_up),
            "value_down": sig12(root.value_down),
        },
    });
    Ok((pretty(&report), if gap > 1e-8 { 1 } else { 0 }))
}

fn cmd_verify(config: &RunConfig, _common: &CommonArgs) -> Result<(String, i32), EngineError> {
    let params = require_market(config)?;
    let violations = params.validate();
    let structural = params.s0 > 0.0
        && params.d > 0.0
        && params.u > params.d
        && params.n_periods >= 1
        && params.delay + 1 <= params.n_periods;
    if !violations.is_empty() {
        if !structural {
            return Err(EngineError::InvalidParams(violations));
        }
        // Rate outside the window: no pricing, but the arbitrage oracle must
        // flag it.
        let arb = arbitrage_search(&params)?;
        let report = json!({
            "violations": violations,
            "arbitrage_found": arb.arbitrage_found,
        });
        return Ok((pretty(&report), if arb.arbitrage_found { 1 } else { 0 }));
    }
    let spec = require_payoff(config)?;
    let rep = verification_report(&params, &spec)?;
    let arb = arbitrage_search(&params)?;
    let pass = rep.feasible
        && !arb.arbitrage_found
        && (rep.price_dp - rep.price_direct).abs() <= 1e-8
        // The LP optimum can never exceed the value of a feasible strategy.
        && rep.price_lp <= rep.price_dp + 1e-8;
    let report = json!({
        "feasible": rep.feasible,
        "worst_slack": sig12(rep.worst_slack),
        "initial_worst": sig12(rep.initial_worst),
        "price_lp": sig12(rep.price_lp),
        "price_dp": sig12(rep.price_dp),
        "price_direct": sig12(rep.price_direct),
        "max_abs_diff": sig12(rep.max_abs_diff),
        "arbitrage_found": arb.arbitrage_found,
    });
    Ok((pretty(&report), if pass { 0 } else { 1 }))
}

fn cmd_converge(config: &RunConfig, _common: &CommonArgs) -> Result<(String, i32), EngineError> {
    let scaling = config
        .scaling
        .ok_or_else(|| EngineError::InvalidConfig("converge needs a `scaling` section".to_string()))?;
    let n_values = config
        .n_values
        .clone()
        .unwrap_or_else(|| vec![100, 400, 1600, 6400]);
    let (strike, kind) = payoff_for_scaling(config, scaling.s0)?;
    let rows: Vec<_> = n_values
        .iter()
        .map(|&n| {
            build_scaling(
                n,
                scaling.mu,
                scaling.sigma,
                scaling.r_annual,
                scaling.h_periods,
                scaling.horizon,
            )
            .and_then(|seq| convergence_row(&seq, scaling.s0, strike, kind))
            .map_err(|e| (n, e))
        })
        .collect();
    Ok((convergence_csv(&rows), 0))
}

/// Strike and direction for scaling-based commands: the configured payoff if
/// any (tables are not scalable across n), else an at-the-money call.
fn payoff_for_scaling(config: &RunConfig, s0: f64) -> Result<(f64, OptionKind), EngineError> {
    match &config.payoff {
        None => Ok((s0, OptionKind::Call)),
        Some(p) => match p.kind {
            PayoffKind::Call => Ok((p.strike.unwrap_or(s0), OptionKind::Call)),
            PayoffKind::Put => Ok((p.strike.unwrap_or(s0), OptionKind::Put)),
            PayoffKind::Table => Err(EngineError::InvalidConfig(
                "scaling sweeps need a call or put payoff".to_string(),
            )),
        },
    }
}

fn cmd_smile(config: &RunConfig, common: &CommonArgs) -> Result<(String, i32), EngineError> {
    // Default: the finite-n experiment parameters (sigma=0.1, T=1, r=0,
    // s0=40, n=100, H=1).
    let mut scaling = config.scaling.unwrap_or(ScalingConfig {
        s0: 40.0,
        mu: 0.0,
        sigma: 0.1,
        r_annual: 0.0,
        h_periods: 1,
        horizon: 1.0,
        n: 100,
    });
    if let Some(n) = common.n {
        scaling.n = n;
    }
    if let Some(h) = common.delay {
        scaling.h_periods = h;
    }
    let base = SmileBase {
        s0: scaling.s0,
        sigma: scaling.sigma,
        r_annual: scaling.r_annual,
        horizon: scaling.horizon,
        h_periods: scaling.h_periods,
        n: scaling.n,
    };
    let strikes = config
        .strikes
        .clone()
        .unwrap_or_else(|| default_strike_grid(base.s0));
    let points = smile_curve(&base, &strikes)?;
    Ok((smile_to_csv(&points), 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> RunConfig {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn worked_price_report() {
        let config = parse(
            r#"{"market": {"s0": 4, "u": 2, "d": 0.5, "r": 0, "n_periods": 2, "delay": 1},
                "payoff": {"kind": "call", "strike": 4}}"#,
        );
        let (out, code) = cmd_price(&config, &dummy_args()).unwrap();
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["price_dp"], json!(5.6));
        assert_eq!(v["price_direct"], json!(5.6));
        assert_eq!(v["hedge"]["x0_star"], json!(-0.8));
        assert_eq!(v["hedge"]["delta_star"], json!(0.8));
    }

    fn dummy_args() -> CommonArgs {
        CommonArgs {
            config: None,
            n: None,
            strike: None,
            delay: None,
            output: None,
        }
    }

    #[test]
    fn verify_report_small_tree() {
        let config = parse(
            r#"{"market": {"s0": 4, "u": 2, "d": 0.5, "r": 0.05, "n_periods": 3, "delay": 1},
                "payoff": {"kind": "call", "strike": 4}}"#,
        );
        let (out, code) = cmd_verify(&config, &dummy_args()).unwrap();
        assert_eq!(code, 0, "{out}");
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["feasible"], json!(true));
        assert_eq!(v["arbitrage_found"], json!(false));
    }

    #[test]
    fn verify_flags_out_of_window_rate() {
        let config = parse(
            r#"{"market": {"s0": 4, "u": 1.05, "d": 0.9, "r": 0.2, "n_periods": 3, "delay": 1}}"#,
        );
        let (out, code) = cmd_verify(&config, &dummy_args()).unwrap();
        assert_eq!(code, 1);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["arbitrage_found"], json!(true));
    }

    #[test]
    fn verify_size_cap_exit_code() {
        let config = parse(
            r#"{"market": {"s0": 4, "u": 2, "d": 0.5, "r": 0, "n_periods": 30, "delay": 1},
                "payoff": {"kind": "call", "strike": 4}}"#,
        );
        let err = cmd_verify(&config, &dummy_args()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn malformed_config_is_exit_2() {
        let dir = std::env::temp_dir().join("delayed-binomial-cli-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("broken.json");
        std::fs::write(&path, "{not json").unwrap();
        let code = run([
            "delayed-binomial".to_string(),
            "price".to_string(),
            "--config".to_string(),
            path.display().to_string(),
        ]);
        assert_eq!(code, 2);
    }

    #[test]
    fn smile_default_and_overrides() {
        let config = RunConfig::default();
        let (out, code) = cmd_smile(&config, &dummy_args()).unwrap();
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 42); // header + 41 strikes

        let config = parse(r#"{"strikes": [40.0], "scaling": {"s0": 40, "sigma": 0.1, "h_periods": 0, "n": 50}}"#);
        let (out, _) = cmd_smile(&config, &dummy_args()).unwrap();
        assert_eq!(out.lines().count(), 2);
    }

    #[test]
    fn converge_single_row() {
        let config = parse(
            r#"{"scaling": {"s0": 40, "sigma": 0.1, "h_periods": 1, "n": 100},
                "n_values": [100]}"#,
        );
        let (out, code) = cmd_converge(&config, &dummy_args()).unwrap();
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("100,"));
    }

    #[test]
    fn determinism_byte_identical() {
        let config = parse(r#"{"scaling": {"s0": 40, "sigma": 0.1, "h_periods": 1, "n": 60}}"#);
        let (a, _) = cmd_smile(&config, &dummy_args()).unwrap();
        let (b, _) = cmd_smile(&config, &dummy_args()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seed_default_documented() {
        assert_eq!(DEFAULT_SEED, 42);
        let config = parse(r#"{"seed": 7}"#);
        assert_eq!(config.seed, Some(7));
    }
}
