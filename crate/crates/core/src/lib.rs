//! Platform-assisted sealed-bid auctions.
//!
//! * [`domain`]: discrete value spaces, priors, virtual values and reserves.
//! * [`mechanism`]: second price with reserve, the ascending auction, the
//!   optimal-payment oracle and the ideal functionality.
//! * [`incentives`]: coalition utilities and the incentive-compatibility
//!   falsification harness.
//! * [`crypto`]: timed commitments, Merkle vector commitments, Reed–Solomon
//!   codes, retrievability challenges and the outcome relation.
//! * [`netproto`]: the commit/challenge/reveal protocol as role state
//!   machines over a simulated round network, plus scripted attacks.

// error variants carry exact rationals
#![allow(clippy::result_large_err)]

pub mod crypto;
pub mod domain;
pub mod incentives;
pub mod mechanism;
pub mod netproto;
pub mod rational;
pub mod trace;

pub use domain::{DiscreteDistribution, ValueDomain};
pub use mechanism::{AuctionOutcome, AuctionRules, BidVector, CoinString, Identity};
pub use rational::{rat, Rational};
pub use trace::{Blockchain, Decision, ExecutionTrace, Party};
