//! Monte Carlo simulation of the conditioned move chain under the scaling
//! family. The sample variance of the terminal log-return matches the
//! enlarged-volatility prediction (2H+1)·sigma²·T, and runs are
//! reproducible per seed (set DELAYED_BINOMIAL_THREADS to cap parallelism).

use delayed_binomial::asymptotics::{build_scaling, simulate_chain, thread_budget};

fn main() {
    let (mu, sigma, r, h, t) = (0.0, 0.1, 0.0, 1usize, 1.0);
    let seq = build_scaling(4096, mu, sigma, r, h, t).unwrap();
    let paths = 100_000;
    let seed = 42;

    println!("threads: {}", thread_budget());
    let xs = simulate_chain(&seq, paths, seed).unwrap();

    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    let target = (2 * h + 1) as f64 * sigma * sigma * t;

    println!("paths           : {paths}");
    println!("sample mean     : {mean:+.6}");
    println!("sample variance : {var:.6}");
    println!("target (2H+1)σ²T: {target:.6}");

    let again = simulate_chain(&seq, paths, seed).unwrap();
    println!("reproducible    : {}", xs == again);
}
