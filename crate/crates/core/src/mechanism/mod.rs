//! Ideal auctions: second price with reserve, the ascending auction, the
//! optimal-payment oracle and the trusted-functionality execution loop.

mod ascending;
mod ideal;
mod optimal;
mod second_price;
mod types;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::domain::{DomainError, ValueDomain};
use crate::rational::Rational;

pub use ascending::{AscendingAuction, AscendingResult, AscendingStrategy, Silent, TruthfulBidder};
pub use ideal::{
    ideal_outcome_distribution, run_ideal_auction, HonestHook, IdealReport, IdealResult,
    StrategicHook, StrategicView,
};
pub use optimal::{
    expected_virtual_surplus, for_each_profile, optimal_payment, optimal_payment_for,
    DEFAULT_ENUMERATION_BOUND,
};
pub use second_price::SecondPrice;
pub use types::{AuctionOutcome, Bid, BidVector, CoinString, Identity, PrivateOutcome};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MechanismError {
    #[error("bid {value} from {bidder} is not a tick of the domain")]
    InvalidBid { bidder: Identity, value: Rational },
    #[error("identity {0} appears more than once")]
    DuplicateIdentity(Identity),
    #[error("the seller identity cannot submit a bid")]
    SellerBid,
    #[error("reserve {0} is not a tick of the domain")]
    InvalidReserve(Rational),
    #[error("k must be positive")]
    ZeroCapacity,
    #[error("allocation decreases from {low} to {high} between own bids")]
    NonMonotoneAllocation { low: Rational, high: Rational },
    #[error("enumeration of {size} profiles exceeds the bound {bound}")]
    EnumerationTooLarge { size: u128, bound: u128 },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// A sealed-bid rule set `(x, p, μ_S)` with its tie-breaking randomness.
pub trait AuctionRules: Send + Sync {
    fn name(&self) -> &str;

    fn domain(&self) -> &ValueDomain;

    fn capacity(&self) -> usize;

    /// One realization with randomness derived from `coin`.
    fn run(&self, bids: &BidVector, coin: &CoinString) -> Result<AuctionOutcome, MechanismError>;

    /// Every realization of the internal randomness with its exact probability.
    fn outcome_distribution(
        &self,
        bids: &BidVector,
    ) -> Result<Vec<(Rational, AuctionOutcome)>, MechanismError>;

    fn expected_outcome(&self, bids: &BidVector) -> Result<ExpectedOutcome, MechanismError> {
        Ok(ExpectedOutcome::from_distribution(
            &self.outcome_distribution(bids)?,
        ))
    }
}

/// Allocation probabilities and expected payments.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExpectedOutcome {
    pub allocation: BTreeMap<Identity, Rational>,
    pub payment: BTreeMap<Identity, Rational>,
    pub items_sold: Rational,
    pub seller_revenue: Rational,
    pub platform_revenue: Rational,
}

impl ExpectedOutcome {
    pub fn from_distribution(dist: &[(Rational, AuctionOutcome)]) -> Self {
        let mut e = ExpectedOutcome::default();
        for (w, o) in dist {
            for (id, x) in &o.allocations {
                let slot = e.allocation.entry(*id).or_default();
                if *x == 1 {
                    *slot += w;
                }
            }
            for (id, p) in &o.payments {
                *e.payment.entry(*id).or_default() += w * p;
            }
            e.items_sold += w * &Rational::from(o.items_sold);
            e.seller_revenue += w * &o.seller_revenue;
            e.platform_revenue += w * &o.platform_revenue;
        }
        e
    }

    pub fn allocation(&self, id: Identity) -> Rational {
        self.allocation.get(&id).cloned().unwrap_or_default()
    }

    pub fn payment(&self, id: Identity) -> Rational {
        self.payment.get(&id).cloned().unwrap_or_default()
    }
}

pub(crate) fn check_bids(domain: &ValueDomain, bids: &BidVector) -> Result<(), MechanismError> {
    for b in bids.entries() {
        if !domain.contains(&b.value) {
            return Err(MechanismError::InvalidBid {
                bidder: b.bidder,
                value: b.value.clone(),
            });
        }
    }
    Ok(())
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::new(), &mut out);
    }
    out
}
