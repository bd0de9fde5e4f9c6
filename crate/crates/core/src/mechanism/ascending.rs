use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;

use super::{check_bids, combinations, AuctionRules, MechanismError};
use super::{AuctionOutcome, BidVector, CoinString, Identity};
use crate::domain::{DiscreteDistribution, ValueDomain};
use crate::rational::Rational;
use crate::trace::{Decision, ExecutionTrace, Party, Recipient};

/// Buyer behaviour in the ascending auction.
pub trait AscendingStrategy {
    /// Whether to register given the opening price.
    fn register(&mut self, opening: &Rational) -> bool;

    /// `Some(true)` sends ok, `Some(false)` sends ⊥, `None` stays silent.
    fn respond(&mut self, price: &Rational) -> Option<bool>;
}

/// Registers iff `value ≥ opening`, stays in while `value > price`.
#[derive(Clone, Debug)]
pub struct TruthfulBidder {
    pub value: Rational,
}

impl AscendingStrategy for TruthfulBidder {
    fn register(&mut self, opening: &Rational) -> bool {
        self.value >= *opening
    }

    fn respond(&mut self, price: &Rational) -> Option<bool> {
        Some(self.value > *price)
    }
}

/// Never registers and never answers.
#[derive(Clone, Debug, Default)]
pub struct Silent;

impl AscendingStrategy for Silent {
    fn register(&mut self, _opening: &Rational) -> bool {
        false
    }

    fn respond(&mut self, _price: &Rational) -> Option<bool> {
        None
    }
}

#[derive(Clone, Debug)]
pub struct AscendingResult {
    /// Index of the tick posted as the final round, or `None` when ⊥ was posted.
    pub final_round: Option<usize>,
    pub outcome: AuctionOutcome,
    pub trace: ExecutionTrace,
    /// Item count announced to the seller.
    pub seller_notice: usize,
    /// The literal rule would have announced `k` but fewer droppers existed.
    pub short_of_droppers: bool,
}

/// Ascending-price auction with reserve and zero platform fee.
#[derive(Clone, Debug)]
pub struct AscendingAuction {
    domain: ValueDomain,
    opening_index: usize,
    k: usize,
}

enum Ending {
    Stopped {
        round: usize,
        remaining: Vec<Identity>,
        droppers: Vec<Identity>,
    },
    NoSale,
}

const REGISTER_ROUND: u32 = 0;

fn round_number(tick_index: usize) -> u32 {
    tick_index as u32 + 1
}

impl AscendingAuction {
    pub fn new(domain: ValueDomain, reserve: Rational, k: usize) -> Result<Self, MechanismError> {
        if k == 0 {
            return Err(MechanismError::ZeroCapacity);
        }
        let opening_index = domain
            .index_of(&reserve)
            .ok_or(MechanismError::InvalidReserve(reserve))?;
        Ok(AscendingAuction {
            domain,
            opening_index,
            k,
        })
    }

    /// Opening price at the smallest tick with a nonnegative virtual value.
    pub fn with_prior(dist: &DiscreteDistribution, k: usize) -> Result<Self, MechanismError> {
        AscendingAuction::new(dist.domain().clone(), dist.reserve()?, k)
    }

    pub fn opening_price(&self) -> &Rational {
        self.domain.value(self.opening_index)
    }

    fn play(
        &self,
        participants: &[Identity],
        strategies: &mut BTreeMap<Identity, Box<dyn AscendingStrategy + '_>>,
        trace: &mut ExecutionTrace,
    ) -> Ending {
        let opening = self.opening_price().clone();
        let mut registered: BTreeSet<Identity> = BTreeSet::new();
        for id in participants {
            let strategy = strategies.get_mut(id).expect("strategy per participant");
            if strategy.register(&opening) {
                registered.insert(*id);
                trace.record(
                    REGISTER_ROUND,
                    Party::Buyer(*id),
                    Recipient::To(Party::Platform),
                    "register",
                    b"register".to_vec(),
                );
            }
        }
        let mut active = registered;
        for tau in self.opening_index..self.domain.len() {
            let price = self.domain.value(tau);
            let round = round_number(tau);
            let mut droppers = Vec::new();
            for id in active.clone() {
                let reply = strategies.get_mut(&id).expect("strategy").respond(price);
                match reply {
                    Some(true) => trace.record(
                        round,
                        Party::Buyer(id),
                        Recipient::To(Party::Platform),
                        "bid",
                        b"ok".to_vec(),
                    ),
                    Some(false) => {
                        trace.record(
                            round,
                            Party::Buyer(id),
                            Recipient::To(Party::Platform),
                            "bid",
                            b"bot".to_vec(),
                        );
                        droppers.push(id);
                    }
                    None => droppers.push(id),
                }
            }
            for id in &droppers {
                active.remove(id);
            }
            if active.len() <= self.k {
                return Ending::Stopped {
                    round: tau,
                    remaining: active.into_iter().collect(),
                    droppers,
                };
            }
        }
        Ending::NoSale
    }

    fn settle(
        &self,
        participants: &[Identity],
        ending: &Ending,
        chosen: &[Identity],
        trace: &mut ExecutionTrace,
    ) -> (Option<usize>, AuctionOutcome, usize, bool) {
        let mut outcome = AuctionOutcome::empty(participants.iter().copied());
        let (round, remaining) = match ending {
            Ending::NoSale => {
                let last = round_number(self.domain.len() - 1);
                trace.chain.post(last, Party::Platform, b"bot".to_vec());
                trace.record(
                    last,
                    Party::Platform,
                    Recipient::Broadcast,
                    "post",
                    b"bot".to_vec(),
                );
                return (None, outcome, 0, false);
            }
            Ending::Stopped {
                round, remaining, ..
            } => (*round, remaining),
        };
        let chain_round = round_number(round);
        let tau_bytes = (round as u64).to_be_bytes().to_vec();
        trace
            .chain
            .post(chain_round, Party::Platform, tau_bytes.clone());
        trace.record(
            chain_round,
            Party::Platform,
            Recipient::Broadcast,
            "post",
            tau_bytes,
        );
        let price = self.domain.value(round).clone();
        let winners: BTreeSet<Identity> = remaining.iter().chain(chosen).copied().collect();
        for id in participants {
            let msg = if winners.contains(id) {
                b"stop:1".to_vec()
            } else {
                b"stop:0".to_vec()
            };
            trace.record(
                chain_round,
                Party::Platform,
                Recipient::To(Party::Buyer(*id)),
                "stop",
                msg,
            );
        }
        let literal_notice = if round != self.opening_index {
            self.k
        } else {
            remaining.len()
        };
        let short = winners.len() < literal_notice;
        trace.record(
            chain_round,
            Party::Platform,
            Recipient::To(Party::Seller),
            "stop",
            format!("stop:{}", winners.len()).into_bytes(),
        );
        for id in &winners {
            outcome.allocations.insert(*id, 1);
            outcome.payments.insert(*id, price.clone());
        }
        outcome.items_sold = winners.len();
        outcome.seller_revenue = &price * &Rational::from(winners.len());
        (Some(round), outcome, winners.len(), short)
    }

    fn droppers_to_promote(&self, ending: &Ending) -> (Vec<Identity>, usize) {
        match ending {
            Ending::Stopped {
                round,
                remaining,
                droppers,
            } if *round != self.opening_index => {
                let mut pool = droppers.clone();
                pool.sort();
                let need = (self.k - remaining.len()).min(pool.len());
                (pool, need)
            }
            _ => (Vec::new(), 0),
        }
    }

    /// Runs the auction. Buyers without an entry in `overrides` bid truthfully.
    pub fn run_with_strategies(
        &self,
        values: &BidVector,
        overrides: BTreeMap<Identity, Box<dyn AscendingStrategy + '_>>,
        coin: &CoinString,
    ) -> Result<AscendingResult, MechanismError> {
        check_bids(&self.domain, values)?;
        let participants: Vec<Identity> = {
            let mut ids: Vec<Identity> = values.identities().collect();
            ids.extend(overrides.keys().copied());
            ids.sort();
            ids.dedup();
            ids
        };
        let mut trace = ExecutionTrace::default();
        trace.honest.insert(Party::Platform);
        trace.honest.insert(Party::Seller);
        let mut strategies: BTreeMap<Identity, Box<dyn AscendingStrategy + '_>> = BTreeMap::new();
        for b in values.entries() {
            strategies.insert(
                b.bidder,
                Box::new(TruthfulBidder {
                    value: b.value.clone(),
                }),
            );
        }
        for id in &participants {
            if !overrides.contains_key(id) {
                trace.honest.insert(Party::Buyer(*id));
            }
        }
        strategies.extend(overrides);

        let ending = self.play(&participants, &mut strategies, &mut trace);
        let (mut pool, need) = self.droppers_to_promote(&ending);
        pool.shuffle(&mut coin.rng("ascending/droppers"));
        pool.truncate(need);
        let (final_round, outcome, seller_notice, short) =
            self.settle(&participants, &ending, &pool, &mut trace);
        if short {
            trace
                .notes
                .push("fewer droppers than k − |R|; seller told the actual count".into());
        }

        // A player accepts iff it got a stop in the posted round, or no stop and ⊥ was posted.
        let stopped = final_round.is_some();
        for party in participants
            .iter()
            .map(|id| Party::Buyer(*id))
            .chain([Party::Seller])
        {
            let decision = if stopped
                || trace.chain.entries().last().map(|e| e.payload.as_slice()) == Some(b"bot")
            {
                Decision::Accept
            } else {
                Decision::Reject("no stop and no ⊥ on chain".into())
            };
            trace.decide(party, decision);
        }
        trace.decide(Party::Platform, Decision::Accept);
        for (party, po) in participants
            .iter()
            .map(|id| (Party::Buyer(*id), outcome.private_outcome(*id)))
            .chain([(Party::Seller, outcome.private_outcome(Identity::SELLER))])
        {
            trace.private_outcomes.insert(party, po);
        }
        trace.outcome = Some(outcome.clone());
        Ok(AscendingResult {
            final_round,
            outcome,
            trace,
            seller_notice,
            short_of_droppers: short,
        })
    }
}

impl AuctionRules for AscendingAuction {
    fn name(&self) -> &str {
        "ascending"
    }

    fn domain(&self) -> &ValueDomain {
        &self.domain
    }

    fn capacity(&self) -> usize {
        self.k
    }

    fn run(&self, bids: &BidVector, coin: &CoinString) -> Result<AuctionOutcome, MechanismError> {
        Ok(self
            .run_with_strategies(bids, BTreeMap::new(), coin)?
            .outcome)
    }

    fn outcome_distribution(
        &self,
        bids: &BidVector,
    ) -> Result<Vec<(Rational, AuctionOutcome)>, MechanismError> {
        check_bids(&self.domain, bids)?;
        let participants: Vec<Identity> = {
            let mut ids: Vec<Identity> = bids.identities().collect();
            ids.sort();
            ids
        };
        let mut strategies: BTreeMap<Identity, Box<dyn AscendingStrategy>> = bids
            .entries()
            .iter()
            .map(|b| {
                (
                    b.bidder,
                    Box::new(TruthfulBidder {
                        value: b.value.clone(),
                    }) as Box<dyn AscendingStrategy>,
                )
            })
            .collect();
        let mut scratch = ExecutionTrace::default();
        let ending = self.play(&participants, &mut strategies, &mut scratch);
        let (pool, need) = self.droppers_to_promote(&ending);
        let subsets = combinations(pool.len(), need);
        let weight = Rational::new(1, subsets.len() as i64);
        Ok(subsets
            .into_iter()
            .map(|subset| {
                let chosen: Vec<Identity> = subset.into_iter().map(|i| pool[i]).collect();
                let (_, outcome, _, _) = self.settle(
                    &participants,
                    &ending,
                    &chosen,
                    &mut ExecutionTrace::default(),
                );
                (weight.clone(), outcome)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn auction(k: usize) -> AscendingAuction {
        AscendingAuction::new(ValueDomain::grid(11).unwrap(), rat("0.2"), k).unwrap()
    }

    fn coin() -> CoinString {
        CoinString::from_bytes(vec![5; 16])
    }

    #[test]
    fn stops_when_remaining_fit() {
        let values = BidVector::from_values(&[rat("0.7"), rat("0.4"), rat("0.4")]);
        let r = auction(1)
            .run_with_strategies(&values, BTreeMap::new(), &coin())
            .unwrap();
        assert_eq!(r.final_round, Some(4));
        assert!(r.outcome.allocated(Identity(1)));
        assert_eq!(r.outcome.payment(Identity(1)), rat("0.4"));
        assert_eq!(r.outcome.items_sold, 1);
        assert_eq!(r.outcome.seller_revenue, rat("0.4"));
        assert!(r.trace.is_safe());
        assert_eq!(r.seller_notice, 1);
    }

    #[test]
    fn nobody_registers() {
        let values = BidVector::from_values(&[rat("0.1"), rat("0")]);
        let r = auction(1)
            .run_with_strategies(&values, BTreeMap::new(), &coin())
            .unwrap();
        assert_eq!(r.final_round, Some(2));
        assert_eq!(r.outcome.items_sold, 0);
        assert!(r.outcome.seller_revenue.is_zero());
        assert!(r.trace.is_safe());
        assert!(!r.trace.messages.iter().any(|m| m.step == "register"));
    }

    #[test]
    fn two_units_two_buyers_clear_at_opening_price() {
        // |R| = 2 ≤ k already in the opening round
        let values = BidVector::from_values(&[rat("0.9"), rat("0.9")]);
        let r = auction(2)
            .run_with_strategies(&values, BTreeMap::new(), &coin())
            .unwrap();
        assert_eq!(r.final_round, Some(2));
        assert_eq!(r.outcome.items_sold, 2);
        assert_eq!(r.outcome.payment(Identity(1)), rat("0.2"));
        assert_eq!(r.outcome.payment(Identity(2)), rat("0.2"));
    }

    #[test]
    fn simultaneous_drop_promotes_droppers() {
        // three buyers at 0.9 and k = 2: all drop at 0.9, two are picked
        let values = BidVector::from_values(&[rat("0.9"), rat("0.9"), rat("0.9")]);
        let a = auction(2);
        let r = a
            .run_with_strategies(&values, BTreeMap::new(), &coin())
            .unwrap();
        assert_eq!(r.final_round, Some(9));
        assert_eq!(r.outcome.items_sold, 2);
        assert_eq!(r.outcome.seller_revenue, rat("1.8"));
        let dist = a.outcome_distribution(&values).unwrap();
        assert_eq!(dist.len(), 3);
        let e = a.expected_outcome(&values).unwrap();
        for i in 1..=3 {
            assert_eq!(e.allocation(Identity(i)), rat("2/3"));
        }
    }

    #[test]
    fn opening_value_registers_then_drops() {
        let values = BidVector::from_values(&[rat("0.2"), rat("0.5")]);
        let r = auction(1)
            .run_with_strategies(&values, BTreeMap::new(), &coin())
            .unwrap();
        assert_eq!(r.final_round, Some(2));
        assert!(r.outcome.allocated(Identity(2)));
        assert!(!r.outcome.allocated(Identity(1)));
        assert_eq!(r.outcome.payment(Identity(2)), rat("0.2"));
        assert_eq!(
            r.trace
                .messages
                .iter()
                .filter(|m| m.step == "register")
                .count(),
            2
        );
    }

    struct AlwaysOk;
    impl AscendingStrategy for AlwaysOk {
        fn register(&mut self, _: &Rational) -> bool {
            true
        }
        fn respond(&mut self, _: &Rational) -> Option<bool> {
            Some(true)
        }
    }

    #[test]
    fn never_dropping_buyers_force_bot() {
        let values = BidVector::default();
        let mut overrides: BTreeMap<Identity, Box<dyn AscendingStrategy>> = BTreeMap::new();
        overrides.insert(Identity(1), Box::new(AlwaysOk));
        overrides.insert(Identity(2), Box::new(AlwaysOk));
        let r = auction(1)
            .run_with_strategies(&values, overrides, &coin())
            .unwrap();
        assert_eq!(r.final_round, None);
        assert_eq!(r.outcome.items_sold, 0);
        assert!(r.trace.is_safe());
        assert_eq!(r.trace.chain.entries().last().unwrap().payload, b"bot");
    }

    #[test]
    fn silent_buyer_is_dropped() {
        let values = BidVector::from_values(&[rat("0.6")]);
        let mut overrides: BTreeMap<Identity, Box<dyn AscendingStrategy>> = BTreeMap::new();
        overrides.insert(Identity(9), Box::new(Silent));
        let r = auction(1)
            .run_with_strategies(&values, overrides, &coin())
            .unwrap();
        assert!(r.outcome.allocated(Identity(1)));
        assert!(!r.outcome.allocated(Identity(9)));
        assert!(!r.trace.honest.contains(&Party::Buyer(Identity(9))));
    }
}
