use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::IncentiveError;
use crate::mechanism::{AuctionOutcome, Identity};
use crate::rational::Rational;
use crate::trace::ExecutionTrace;

/// A set of strategic players and the true values of its buyer members.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coalition {
    pub includes_platform: bool,
    pub includes_seller: bool,
    pub true_values: BTreeMap<Identity, Rational>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoalitionKind {
    Buyer,
    Seller,
    Platform,
    PlatformSeller,
    PlatformBuyers(usize),
}

impl Coalition {
    pub fn buyer(id: Identity, value: Rational) -> Self {
        Coalition {
            true_values: [(id, value)].into(),
            ..Default::default()
        }
    }

    pub fn seller() -> Self {
        Coalition {
            includes_seller: true,
            ..Default::default()
        }
    }

    pub fn platform() -> Self {
        Coalition {
            includes_platform: true,
            ..Default::default()
        }
    }

    pub fn platform_seller() -> Self {
        Coalition {
            includes_platform: true,
            includes_seller: true,
            ..Default::default()
        }
    }

    pub fn platform_buyers(members: BTreeMap<Identity, Rational>) -> Self {
        Coalition {
            includes_platform: true,
            true_values: members,
            ..Default::default()
        }
    }

    pub fn buyer_members(&self) -> BTreeSet<Identity> {
        self.true_values.keys().copied().collect()
    }

    pub fn kind(&self) -> Result<CoalitionKind, IncentiveError> {
        if self.true_values.keys().any(|id| id.is_seller()) {
            return Err(IncentiveError::InvalidCoalition(
                "identity 0 is the seller".into(),
            ));
        }
        let c = self.true_values.len();
        match (self.includes_platform, self.includes_seller, c) {
            (false, false, 1) => Ok(CoalitionKind::Buyer),
            (false, true, 0) => Ok(CoalitionKind::Seller),
            (true, false, 0) => Ok(CoalitionKind::Platform),
            (true, true, 0) => Ok(CoalitionKind::PlatformSeller),
            (true, false, c) => Ok(CoalitionKind::PlatformBuyers(c)),
            _ => Err(IncentiveError::InvalidCoalition(self.to_string())),
        }
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.includes_platform {
            parts.push("platform".to_string());
        }
        if self.includes_seller {
            parts.push("seller".to_string());
        }
        parts.extend(self.true_values.keys().map(|id| format!("buyer:{id}")));
        if parts.is_empty() {
            parts.push("empty".into());
        }
        write!(f, "{}", parts.join("+"))
    }
}

/// Utility of a completed auction. Every identity in `outcome` outside
/// `honest` is controlled by the coalition (members and fabricated ones).
///
/// Items landing on controlled identities go to the highest-valued members,
/// at most one each. Payments by controlled identities are a cost unless the
/// platform and seller both sit in the coalition, where they circulate.
pub fn outcome_utility(
    outcome: &AuctionOutcome,
    honest: &BTreeSet<Identity>,
    coalition: &Coalition,
) -> Rational {
    let mut honest_items = 0usize;
    let mut honest_paid = Rational::zero();
    let mut controlled_paid = Rational::zero();
    for (id, &x) in &outcome.allocations {
        if honest.contains(id) {
            honest_items += x as usize;
            honest_paid += outcome.payment(*id);
        } else {
            controlled_paid += outcome.payment(*id);
        }
    }
    let won = outcome.items_sold.saturating_sub(honest_items);
    let mut values: Vec<&Rational> = coalition.true_values.values().collect();
    values.sort_by(|a, b| b.cmp(a));
    let value: Rational = values.into_iter().take(won).sum();
    match (coalition.includes_platform, coalition.includes_seller) {
        (true, true) => honest_paid + value,
        (true, false) => honest_paid - &outcome.seller_revenue + value,
        (false, true) => &outcome.seller_revenue - &controlled_paid + value,
        (false, false) => value - controlled_paid,
    }
}

/// Utility on a recorded execution; zero on an unsafe or aborted trace.
pub fn coalition_utility(trace: &ExecutionTrace, coalition: &Coalition) -> Rational {
    match &trace.outcome {
        Some(outcome) if trace.is_safe() => {
            let honest: BTreeSet<Identity> = trace.honest_buyers().collect();
            outcome_utility(outcome, &honest, coalition)
        }
        _ => Rational::zero(),
    }
}
