use std::collections::BTreeSet;
use std::fmt;

use super::{NetError, ProtocolConfig};
use crate::mechanism::{BidVector, Identity};
use crate::rational::Rational;
use crate::trace::Party;

/// Scripted deviations. Targets left as `None` are resolved against the
/// buyer set of the run: victims default to the lowest buyer identity,
/// corrupted buyers to the highest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AdversaryScript {
    /// Corrupt platform sends the victim a statement with a different `r_P`.
    DigestEquivocation {
        victim: Option<Identity>,
    },
    /// Corrupt platform changes the target's outcome. With `recommit` the
    /// changed outcome vector is committed in `digest′`; otherwise only the
    /// delivered `out_i` changes.
    OutcomeMutation {
        target: Option<Identity>,
        recommit: bool,
    },
    /// Corrupt platform leaves the victim's tuple out of the list.
    DroppedHonestTuple {
        victim: Option<Identity>,
    },
    /// Corrupt platform commits to bids of fabricated buyers.
    FakeBidInjection {
        bids: Vec<Rational>,
    },
    /// Corrupt buyer commits but never opens.
    WithholdOpening {
        buyer: Option<Identity>,
    },
    /// Corrupt buyer sends a commitment that fails the structural check.
    GarbageCommitment {
        buyer: Option<Identity>,
    },
    /// Corrupt seller commits shill bids under fresh buyer identities.
    SellerShill {
        bids: Vec<Rational>,
    },
    Composite(Vec<AdversaryScript>),
}

/// Resolved behaviour handed to the roles.
#[derive(Clone, Debug, Default)]
pub(crate) struct Plan {
    pub corrupted: BTreeSet<Party>,
    pub equivocate: Option<Party>,
    pub mutate: Option<(Identity, bool)>,
    pub drop: Option<Identity>,
    pub fake_bids: Vec<Rational>,
    pub withhold: BTreeSet<Identity>,
    pub garbage: BTreeSet<Identity>,
    pub shill_bids: Vec<Rational>,
}

fn lowest(values: &BidVector) -> Identity {
    values.identities().min().unwrap_or(Identity::SELLER)
}

fn highest(values: &BidVector) -> Result<Identity, NetError> {
    values
        .identities()
        .max()
        .ok_or_else(|| NetError::AdversaryInvalid("no buyer to corrupt".into()))
}

impl AdversaryScript {
    pub fn name(&self) -> String {
        match self {
            AdversaryScript::DigestEquivocation { .. } => "digest-equivocation".into(),
            AdversaryScript::OutcomeMutation { recommit: true, .. } => "mutate-outcome".into(),
            AdversaryScript::OutcomeMutation {
                recommit: false, ..
            } => "mutate-delivered-outcome".into(),
            AdversaryScript::DroppedHonestTuple { .. } => "drop-tuple".into(),
            AdversaryScript::FakeBidInjection { .. } => "fake-bids".into(),
            AdversaryScript::WithholdOpening { .. } => "withhold-opening".into(),
            AdversaryScript::GarbageCommitment { .. } => "garbage-commitment".into(),
            AdversaryScript::SellerShill { .. } => "seller-shill".into(),
            AdversaryScript::Composite(parts) => {
                parts.iter().map(|p| p.name()).collect::<Vec<_>>().join("+")
            }
        }
    }

    /// Script by name with default targets; fake and shill bids sit at the
    /// top of the domain.
    pub fn from_name(name: &str, config: &ProtocolConfig) -> Option<Self> {
        let top = config.domain.top().clone();
        Some(match name {
            "digest-equivocation" => AdversaryScript::DigestEquivocation { victim: None },
            "mutate-outcome" => AdversaryScript::OutcomeMutation {
                target: None,
                recommit: true,
            },
            "mutate-delivered-outcome" => AdversaryScript::OutcomeMutation {
                target: None,
                recommit: false,
            },
            "drop-tuple" => AdversaryScript::DroppedHonestTuple { victim: None },
            "fake-bids" => AdversaryScript::FakeBidInjection { bids: vec![top] },
            "withhold-opening" => AdversaryScript::WithholdOpening { buyer: None },
            "garbage-commitment" => AdversaryScript::GarbageCommitment { buyer: None },
            "seller-shill" => AdversaryScript::SellerShill { bids: vec![top] },
            _ => return None,
        })
    }

    pub const NAMES: [&'static str; 8] = [
        "digest-equivocation",
        "mutate-outcome",
        "mutate-delivered-outcome",
        "drop-tuple",
        "fake-bids",
        "withhold-opening",
        "garbage-commitment",
        "seller-shill",
    ];

    /// Whether the script makes some honest outcome wrong, so that the run
    /// must end unsafe.
    pub fn breaks_honest_outcome(&self) -> bool {
        match self {
            AdversaryScript::DigestEquivocation { .. }
            | AdversaryScript::OutcomeMutation { .. }
            | AdversaryScript::DroppedHonestTuple { .. } => true,
            AdversaryScript::Composite(parts) => parts.iter().any(Self::breaks_honest_outcome),
            _ => false,
        }
    }

    pub fn corrupted(&self, values: &BidVector) -> Result<BTreeSet<Party>, NetError> {
        Ok(self.plan(values)?.corrupted)
    }

    pub(crate) fn plan(&self, values: &BidVector) -> Result<Plan, NetError> {
        let mut plan = Plan::default();
        self.fill(values, &mut plan)?;
        let corrupt_buyers: BTreeSet<Identity> =
            plan.withhold.union(&plan.garbage).copied().collect();
        let victims = plan
            .equivocate
            .and_then(Party::identity)
            .into_iter()
            .chain(plan.mutate.map(|m| m.0))
            .chain(plan.drop);
        for v in victims {
            if corrupt_buyers.contains(&v) {
                return Err(NetError::AdversaryInvalid(format!(
                    "victim {v} is itself corrupted"
                )));
            }
        }
        Ok(plan)
    }

    fn fill(&self, values: &BidVector, plan: &mut Plan) -> Result<(), NetError> {
        match self {
            AdversaryScript::DigestEquivocation { victim } => {
                plan.corrupted.insert(Party::Platform);
                plan.equivocate = Some(Party::from_identity(
                    victim.unwrap_or_else(|| lowest(values)),
                ));
            }
            AdversaryScript::OutcomeMutation { target, recommit } => {
                plan.corrupted.insert(Party::Platform);
                plan.mutate = Some((target.unwrap_or_else(|| lowest(values)), *recommit));
            }
            AdversaryScript::DroppedHonestTuple { victim } => {
                plan.corrupted.insert(Party::Platform);
                plan.drop = Some(victim.unwrap_or_else(|| lowest(values)));
            }
            AdversaryScript::FakeBidInjection { bids } => {
                plan.corrupted.insert(Party::Platform);
                plan.fake_bids.extend(bids.iter().cloned());
            }
            AdversaryScript::WithholdOpening { buyer } => {
                let id = buyer.map_or_else(|| highest(values), Ok)?;
                plan.corrupted.insert(Party::Buyer(id));
                plan.withhold.insert(id);
            }
            AdversaryScript::GarbageCommitment { buyer } => {
                let id = buyer.map_or_else(|| highest(values), Ok)?;
                plan.corrupted.insert(Party::Buyer(id));
                plan.garbage.insert(id);
            }
            AdversaryScript::SellerShill { bids } => {
                plan.corrupted.insert(Party::Seller);
                plan.shill_bids.extend(bids.iter().cloned());
            }
            AdversaryScript::Composite(parts) => {
                for p in parts {
                    p.fill(values, plan)?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for AdversaryScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Every named script with default targets.
pub fn attack_suite(config: &ProtocolConfig) -> Vec<AdversaryScript> {
    AdversaryScript::NAMES
        .iter()
        .filter_map(|n| AdversaryScript::from_name(n, config))
        .collect()
}
