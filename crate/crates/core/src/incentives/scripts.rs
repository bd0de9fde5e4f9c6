use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::{Coalition, CoalitionKind, IncentiveError};
use crate::domain::{DiscreteDistribution, ValueDomain};
use crate::mechanism::Identity;
use crate::rational::Rational;

/// What a coalition submits to the ideal auction instead of its truthful bids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Deviation {
    /// Bid per member; `None` means the member stays out.
    pub member_bids: BTreeMap<Identity, Option<Rational>>,
    /// Extra bids under fabricated identities.
    pub fake_bids: Vec<Rational>,
    /// Extra fabricated bids drawn independently from a prior.
    pub simulated: Option<(DiscreteDistribution, usize)>,
    /// Abort whenever the realized coalition utility is below this.
    pub abort_below: Option<Rational>,
}

impl Deviation {
    pub fn truthful(coalition: &Coalition) -> Self {
        Deviation {
            member_bids: coalition
                .true_values
                .iter()
                .map(|(id, v)| (*id, Some(v.clone())))
                .collect(),
            ..Default::default()
        }
    }
}

/// User-supplied deviation; it may only touch the levers in [`Deviation`].
pub trait CustomScript: Send + Sync {
    fn name(&self) -> String;

    fn apply(&self, coalition: &Coalition, deviation: &mut Deviation);
}

#[derive(Clone)]
pub enum StrategyScript {
    InputReplace {
        member: Identity,
        bid: Rational,
    },
    InjectFakeBids {
        bids: Vec<Rational>,
    },
    DropOut {
        member: Identity,
    },
    AbortAfterOutcome {
        below: Rational,
    },
    /// Real-protocol only: the platform reports a different payment.
    PlatformOutcomeMutation {
        target: Identity,
        payment: Rational,
    },
    /// The platform invents `count` buyers with values drawn from `dist`.
    PlatformSimulateWorld {
        dist: DiscreteDistribution,
        count: usize,
    },
    SellerShillBids {
        bids: Vec<Rational>,
    },
    Composite(Vec<StrategyScript>),
    Custom(Arc<dyn CustomScript>),
}

fn join(bids: &[Rational]) -> String {
    bids.iter()
        .map(|b| b.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for StrategyScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyScript::InputReplace { member, bid } => {
                write!(f, "input-replace({member}→{bid})")
            }
            StrategyScript::InjectFakeBids { bids } => write!(f, "inject-fake({})", join(bids)),
            StrategyScript::DropOut { member } => write!(f, "drop-out({member})"),
            StrategyScript::AbortAfterOutcome { below } => write!(f, "abort-below({below})"),
            StrategyScript::PlatformOutcomeMutation { target, payment } => {
                write!(f, "mutate-outcome({target}→{payment})")
            }
            StrategyScript::PlatformSimulateWorld { count, .. } => {
                write!(f, "simulate-world({count})")
            }
            StrategyScript::SellerShillBids { bids } => write!(f, "seller-shill({})", join(bids)),
            StrategyScript::Composite(parts) => {
                let names: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
                write!(f, "{}", names.join("+"))
            }
            StrategyScript::Custom(c) => write!(f, "custom({})", c.name()),
        }
    }
}

impl fmt::Debug for StrategyScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StrategyScript({self})")
    }
}

impl StrategyScript {
    /// Applies the script to `deviation`, rejecting levers the coalition lacks.
    pub fn apply(
        &self,
        coalition: &Coalition,
        deviation: &mut Deviation,
    ) -> Result<(), IncentiveError> {
        let refuse = || IncentiveError::InvalidScriptForCoalition {
            script: self.to_string(),
            coalition: coalition.to_string(),
        };
        match self {
            StrategyScript::InputReplace { member, bid } => {
                if !coalition.true_values.contains_key(member) {
                    return Err(refuse());
                }
                deviation.member_bids.insert(*member, Some(bid.clone()));
            }
            StrategyScript::DropOut { member } => {
                if !coalition.true_values.contains_key(member) {
                    return Err(refuse());
                }
                deviation.member_bids.insert(*member, None);
            }
            StrategyScript::InjectFakeBids { bids } => {
                deviation.fake_bids.extend(bids.iter().cloned())
            }
            StrategyScript::SellerShillBids { bids } => {
                if !coalition.includes_seller {
                    return Err(refuse());
                }
                deviation.fake_bids.extend(bids.iter().cloned());
            }
            StrategyScript::AbortAfterOutcome { below } => {
                if !coalition.includes_platform {
                    return Err(refuse());
                }
                deviation.abort_below = Some(below.clone());
            }
            StrategyScript::PlatformSimulateWorld { dist, count } => {
                if !coalition.includes_platform {
                    return Err(refuse());
                }
                deviation.simulated = Some((dist.clone(), *count));
            }
            StrategyScript::PlatformOutcomeMutation { .. } => {
                if !coalition.includes_platform {
                    return Err(refuse());
                }
                return Err(IncentiveError::RequiresProtocol(self.to_string()));
            }
            StrategyScript::Composite(parts) => {
                for p in parts {
                    p.apply(coalition, deviation)?;
                }
            }
            StrategyScript::Custom(c) => c.apply(coalition, deviation),
        }
        Ok(())
    }
}

/// The standard deviation suite for a coalition over `domain`. `prior`
/// enables the world-simulation script.
pub fn standard_suite(
    coalition: &Coalition,
    domain: &ValueDomain,
    prior: Option<&DiscreteDistribution>,
) -> Result<Vec<StrategyScript>, IncentiveError> {
    let ticks = domain.ticks();
    let fakes = || {
        ticks.iter().map(|b| StrategyScript::InjectFakeBids {
            bids: vec![b.clone()],
        })
    };
    let fakes_with_abort = || {
        ticks.iter().map(|b| {
            StrategyScript::Composite(vec![
                StrategyScript::InjectFakeBids {
                    bids: vec![b.clone()],
                },
                StrategyScript::AbortAfterOutcome {
                    below: Rational::zero(),
                },
            ])
        })
    };
    let mut suite = Vec::new();
    match coalition.kind()? {
        CoalitionKind::Buyer => {
            let m = *coalition.true_values.keys().next().expect("one member");
            suite.extend(ticks.iter().map(|b| StrategyScript::InputReplace {
                member: m,
                bid: b.clone(),
            }));
            suite.push(StrategyScript::DropOut { member: m });
            suite.extend(fakes());
        }
        CoalitionKind::Seller => {
            suite.extend(ticks.iter().map(|b| StrategyScript::SellerShillBids {
                bids: vec![b.clone()],
            }));
        }
        CoalitionKind::Platform | CoalitionKind::PlatformSeller => {
            suite.extend(fakes());
            suite.extend(fakes_with_abort());
        }
        CoalitionKind::PlatformBuyers(_) => {
            for &m in coalition.true_values.keys() {
                suite.extend(ticks.iter().map(|b| StrategyScript::InputReplace {
                    member: m,
                    bid: b.clone(),
                }));
                suite.push(StrategyScript::DropOut { member: m });
                // price shading: member bids b, platform plants b′
                for b in ticks {
                    for f in ticks {
                        suite.push(StrategyScript::Composite(vec![
                            StrategyScript::InputReplace {
                                member: m,
                                bid: b.clone(),
                            },
                            StrategyScript::InjectFakeBids {
                                bids: vec![f.clone()],
                            },
                        ]));
                    }
                }
            }
            suite.extend(fakes());
            suite.extend(fakes_with_abort());
        }
    }
    if coalition.includes_platform {
        if let Some(dist) = prior {
            suite.push(StrategyScript::PlatformSimulateWorld {
                dist: dist.clone(),
                count: 1,
            });
        }
    }
    Ok(suite)
}
