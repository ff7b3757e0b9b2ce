//! The diffusive scaling limit: as the step count n grows with the delay H
//! fixed, the super-replication price of an at-the-money call converges to
//! the Black-Scholes price at the enlarged volatility sqrt(2H+1)·sigma.

use delayed_binomial::asymptotics::{build_scaling, convergence_csv, convergence_row, OptionKind};

fn main() {
    let (mu, sigma, r, h, t) = (0.0, 0.1, 0.0, 1, 1.0);
    let s0 = 40.0;

    let rows: Vec<_> = [100usize, 400, 1600, 6400]
        .iter()
        .map(|&n| {
            build_scaling(n, mu, sigma, r, h, t)
                .and_then(|seq| convergence_row(&seq, s0, s0, OptionKind::Call))
                .map_err(|e| (n, e))
        })
        .collect();

    print!("{}", convergence_csv(&rows));

    println!("\nenlarged volatility sqrt(2H+1)*sigma = {:.6}", ((2 * h + 1) as f64).sqrt() * sigma);
    for row in rows.into_iter().flatten() {
        println!(
            "n = {:>5}: model = {:.6}, bs = {:.6}, gap = {:+.6}",
            row.n, row.price_model, row.price_bs_enlarged, row.gap
        );
    }
}
