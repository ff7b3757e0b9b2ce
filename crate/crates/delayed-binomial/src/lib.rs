//! Super-replication pricing in a binomial market with delayed information.
//!
//! The market is a recombining binomial lattice over `N` periods where orders
//! decided at time `t` execute at the price prevailing at `t + H`: the hedger
//! observes the asset with a delay of `H` periods. European convex claims
//! admit an explicit super-replication price under this friction. This crate
//! computes that price and the associated hedge by two independent methods:
//!
//! * [`dp`] — backward induction over `(H+1)`-period blocks, each solved in
//!   closed form by the optimal chord through the block's extreme payoffs;
//! * [`direct`] — a two-state Markov chain over up/down moves whose terminal
//!   distribution prices the claim in a single forward pass, with closed-form
//!   combinatorial expressions kept alongside as cross-checks.
//!
//! Brute-force references live in [`oracle`]: full path enumeration of the
//! portfolio dynamics, a min-max linear program built directly from the
//! super-replication definition, and an arbitrage search. The [`asymptotics`]
//! module implements the diffusive scaling regime in which the price converges
//! to a Black-Scholes value with enlarged volatility `sqrt(2H+1)·σ`, and
//! [`smile`] extracts the implied-volatility curves that this enlargement
//! produces at finite step counts.
//!
//! A thin CLI (subcommands `price`, `verify`, `converge`, `smile`) wraps the
//! library; see [`cli`].

pub mod asymptotics;
pub mod cli;
pub mod direct;
pub mod dp;
pub mod error;
pub mod lattice;
pub mod numeric;
pub mod oracle;
pub mod smile;

pub use error::EngineError;
pub use lattice::{DelayMeasure, LatticeNode, MarketParams, PayoffSpec};
