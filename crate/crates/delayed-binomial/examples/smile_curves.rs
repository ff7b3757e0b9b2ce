//! Implied-volatility smiles at finite n: with a one-period delay the model
//! prices carry a skew well above the base volatility; without delay the
//! curve is flat at the base volatility.

use delayed_binomial::smile::{smile_curve, SmileBase};

fn main() {
    let base = SmileBase {
        s0: 40.0,
        sigma: 0.1,
        r_annual: 0.0,
        horizon: 1.0,
        h_periods: 1,
        n: 100,
    };
    let strikes = [30.0, 34.0, 38.0, 40.0, 42.0, 46.0, 50.0];

    println!("H = 1 (delayed), base sigma = {}", base.sigma);
    println!("{:>7} {:>10} {:>10} {:>9} {:>9}", "strike", "call", "put", "iv_call", "iv_put");
    for p in smile_curve(&base, &strikes).unwrap() {
        println!(
            "{:>7.1} {:>10.5} {:>10.5} {:>9} {:>9}",
            p.strike,
            p.price_call,
            p.price_put,
            p.iv_call.map_or("-".to_string(), |v| format!("{v:.5}")),
            p.iv_put.map_or("-".to_string(), |v| format!("{v:.5}")),
        );
    }

    let flat = SmileBase { h_periods: 0, ..base };
    println!("\nH = 0 (no delay): implied vols collapse to the base volatility");
    for p in smile_curve(&flat, &[34.0, 40.0, 46.0]).unwrap() {
        println!(
            "  K = {:>4.1}: iv_call = {}",
            p.strike,
            p.iv_call.map_or("-".to_string(), |v| format!("{v:.5}"))
        );
    }
}
