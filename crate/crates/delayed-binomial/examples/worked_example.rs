//! The two-period worked example with a one-period information delay:
//! s0 = 4, u = 2, d = 1/2, r = 0, call struck at 4.
//!
//! With delay H = 1 the hedger rebalances on stale prices, so the
//! super-replication price (5.6) sits well above the classical no-delay
//! price (4/3).

use delayed_binomial::dp::{backward_induct, hedge_plan};
use delayed_binomial::lattice::{crr_price, delay_measures, MarketParams, PayoffSpec};

fn main() {
    let params = MarketParams {
        s0: 4.0,
        u: 2.0,
        d: 0.5,
        r: 0.0,
        n_periods: 2,
        delay: 1,
    };
    let spec = PayoffSpec::call(4.0);

    let measure = delay_measures(&params).unwrap();
    println!("delay measure (H = 1):");
    for (j, (pu, pd)) in measure.probs_up.iter().zip(&measure.probs_down).enumerate() {
        println!("  j = {j}: p_up = {pu:.6}, p_down = {pd:.6}");
    }

    let surface = backward_induct(&params, &spec).unwrap();
    println!("\nsuper-replication price: {}", surface.price);

    let root = surface.levels[0][0];
    println!("root block: x0* = {}, delta* = {}", root.x0_star, root.delta_star);

    println!("\nhedge plan (root ups, downs) -> (x0, delta):");
    for ((a, b), (x0, delta)) in hedge_plan(&surface) {
        println!("  ({a}, {b}) -> ({x0:.6}, {delta:.6})");
    }

    let no_delay = MarketParams { delay: 0, ..params };
    println!("\nclassical price without delay: {}", crr_price(&no_delay, &spec).unwrap());
}
