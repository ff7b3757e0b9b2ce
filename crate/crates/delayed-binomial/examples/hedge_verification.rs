//! Assemble the blockwise hedge into a full strategy table, then check it
//! pathwise: the portfolio must end at or above the claim on every one of
//! the 2^N price paths, and reducing the initial capital must break that.
//! Also runs the arbitrage searcher inside and outside the rate window.

use delayed_binomial::dp::backward_induct;
use delayed_binomial::lattice::{MarketParams, PayoffSpec};
use delayed_binomial::oracle::{arbitrage_search, strategy_from_surface, superrep_check};

fn main() {
    let params = MarketParams {
        s0: 100.0,
        u: 1.3,
        d: 0.85,
        r: 0.02,
        n_periods: 8,
        delay: 2,
    };
    let spec = PayoffSpec::put(95.0);

    let surface = backward_induct(&params, &spec).unwrap();
    let strategy = strategy_from_surface(&params, &surface);
    let report = superrep_check(&params, &spec, &strategy).unwrap();
    println!("price             : {:.9}", surface.price);
    println!("feasible          : {}", report.feasible);
    println!("worst slack       : {:.3e}", report.worst_slack);
    println!("worst initial V_0 : {:.9}", report.initial_worst);

    // Minimality: shave a little off x0 and some path must fail.
    let mut lean = strategy.clone();
    lean.x0 -= 1e-3 * params.s0;
    let lean_report = superrep_check(&params, &spec, &lean).unwrap();
    println!("\nafter reducing x0 by 0.1% of s0:");
    println!("feasible          : {}", lean_report.feasible);
    println!("worst slack       : {:.3e}", lean_report.worst_slack);

    let arb = arbitrage_search(&params).unwrap();
    println!("\narbitrage in the rate window: {}", arb.arbitrage_found);

    let bad = MarketParams { r: 0.5, ..params };
    let arb = arbitrage_search(&bad).unwrap();
    println!("arbitrage with e^r > u      : {}", arb.arbitrage_found);
}
