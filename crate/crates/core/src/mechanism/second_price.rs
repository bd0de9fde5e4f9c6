use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use super::{check_bids, combinations, AuctionRules, MechanismError};
use super::{AuctionOutcome, Bid, BidVector, CoinString, Identity};
use crate::domain::{DiscreteDistribution, ValueDomain};
use crate::rational::Rational;

/// k-unit second-price auction with reserve; the platform keeps nothing.
#[derive(Clone, Debug)]
pub struct SecondPrice {
    domain: ValueDomain,
    reserve: Rational,
    k: usize,
}

impl SecondPrice {
    pub fn new(domain: ValueDomain, reserve: Rational, k: usize) -> Result<Self, MechanismError> {
        if k == 0 {
            return Err(MechanismError::ZeroCapacity);
        }
        if !domain.contains(&reserve) {
            return Err(MechanismError::InvalidReserve(reserve));
        }
        Ok(SecondPrice { domain, reserve, k })
    }

    /// Reserve taken from the prior's virtual values.
    pub fn with_prior(dist: &DiscreteDistribution, k: usize) -> Result<Self, MechanismError> {
        SecondPrice::new(dist.domain().clone(), dist.reserve()?, k)
    }

    pub fn reserve(&self) -> &Rational {
        &self.reserve
    }

    fn eligible(&self, bids: &BidVector) -> Vec<Bid> {
        let mut kept: Vec<Bid> = bids
            .entries()
            .iter()
            .filter(|b| b.value >= self.reserve)
            .cloned()
            .collect();
        kept.sort_by_key(|b| b.bidder);
        kept
    }

    /// Outcome for a fixed set of confirmed bidders. `ranked` holds the
    /// eligible bids sorted by value, descending.
    fn settle(&self, bids: &BidVector, ranked: &[Bid], confirmed: &[Identity]) -> AuctionOutcome {
        let mut out = AuctionOutcome::empty(bids.identities());
        let m = ranked.len();
        let k_eff = self.k.min(m);
        if k_eff == 0 {
            return out;
        }
        let boundary = if m <= self.k {
            self.reserve.clone()
        } else {
            ranked[k_eff].value.clone()
        };
        let total_at_boundary = ranked.iter().filter(|b| b.value == boundary).count();
        let confirmed_set: BTreeSet<Identity> = confirmed.iter().copied().collect();
        let confirmed_at_boundary = ranked
            .iter()
            .filter(|b| confirmed_set.contains(&b.bidder) && b.value == boundary)
            .count();
        let q = Rational::new(
            confirmed_at_boundary as i64 + 1,
            total_at_boundary as i64 + 1,
        );
        let mut revenue = Rational::zero();
        for b in ranked.iter().filter(|b| confirmed_set.contains(&b.bidder)) {
            let pay = if b.value == boundary {
                boundary.clone()
            } else {
                let next = self.domain.next_tick(&boundary).expect(
                    "a confirmed bid above the boundary implies the boundary is not the top tick",
                );
                &boundary * &q + next * (Rational::one() - &q)
            };
            out.allocations.insert(b.bidder, 1);
            revenue += &pay;
            out.payments.insert(b.bidder, pay);
        }
        out.items_sold = confirmed_set.len();
        out.seller_revenue = revenue;
        out.platform_revenue = Rational::zero();
        out
    }
}

impl AuctionRules for SecondPrice {
    fn name(&self) -> &str {
        "second-price"
    }

    fn domain(&self) -> &ValueDomain {
        &self.domain
    }

    fn capacity(&self) -> usize {
        self.k
    }

    fn run(&self, bids: &BidVector, coin: &CoinString) -> Result<AuctionOutcome, MechanismError> {
        check_bids(&self.domain, bids)?;
        let mut ranked = self.eligible(bids);
        ranked.shuffle(&mut coin.rng("second-price/tie-break"));
        // stable: the shuffle decides the order inside each tie group
        ranked.sort_by(|a, b| b.value.cmp(&a.value));
        let confirmed: Vec<Identity> = ranked
            .iter()
            .take(self.k.min(ranked.len()))
            .map(|b| b.bidder)
            .collect();
        Ok(self.settle(bids, &ranked, &confirmed))
    }

    fn outcome_distribution(
        &self,
        bids: &BidVector,
    ) -> Result<Vec<(Rational, AuctionOutcome)>, MechanismError> {
        check_bids(&self.domain, bids)?;
        let mut ranked = self.eligible(bids);
        ranked.sort_by(|a, b| b.value.cmp(&a.value));
        let k_eff = self.k.min(ranked.len());
        if k_eff == 0 {
            return Ok(vec![(Rational::one(), self.settle(bids, &ranked, &[]))]);
        }
        let cutoff = ranked[k_eff - 1].value.clone();
        let above: Vec<Identity> = ranked
            .iter()
            .filter(|b| b.value > cutoff)
            .map(|b| b.bidder)
            .collect();
        let group: Vec<Identity> = ranked
            .iter()
            .filter(|b| b.value == cutoff)
            .map(|b| b.bidder)
            .collect();
        let subsets = combinations(group.len(), k_eff - above.len());
        let weight = Rational::new(1, subsets.len() as i64);
        Ok(subsets
            .into_iter()
            .map(|subset| {
                let mut confirmed = above.clone();
                confirmed.extend(subset.into_iter().map(|i| group[i]));
                (weight.clone(), self.settle(bids, &ranked, &confirmed))
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn grid10() -> ValueDomain {
        ValueDomain::grid(11).unwrap()
    }

    fn bids(entries: &[(u64, &str)]) -> BidVector {
        BidVector::new(
            entries
                .iter()
                .map(|(i, v)| (Identity(*i), rat(v)))
                .collect(),
        )
        .unwrap()
    }

    fn coin(b: u8) -> CoinString {
        CoinString::from_bytes(vec![b; 16])
    }

    #[test]
    fn winner_pays_blend_of_second_bid_and_next_tick() {
        let sp = SecondPrice::new(grid10(), rat("0.2"), 1).unwrap();
        let out = sp.run(&bids(&[(1, "0.5"), (2, "0.3")]), &coin(0)).unwrap();
        assert!(out.allocated(Identity(1)));
        assert!(!out.allocated(Identity(2)));
        assert_eq!(out.payment(Identity(1)), rat("0.35"));
        assert_eq!(out.seller_revenue, rat("0.35"));
        assert_eq!(out.items_sold, 1);
        assert!(out.platform_revenue.is_zero());
    }

    #[test]
    fn everything_below_reserve() {
        let sp = SecondPrice::new(grid10(), rat("0.2"), 1).unwrap();
        let out = sp.run(&bids(&[(1, "0.1")]), &coin(0)).unwrap();
        assert_eq!(out.items_sold, 0);
        assert!(out.seller_revenue.is_zero());
        assert_eq!(out.allocations.get(&Identity(1)), Some(&0));
    }

    #[test]
    fn lone_bidder_pays_reserve() {
        let sp = SecondPrice::new(grid10(), rat("0.2"), 1).unwrap();
        let out = sp.run(&bids(&[(1, "0.5")]), &coin(0)).unwrap();
        assert!(out.allocated(Identity(1)));
        assert_eq!(out.payment(Identity(1)), rat("0.2"));
    }

    #[test]
    fn tie_at_top_is_split_evenly() {
        let sp = SecondPrice::new(grid10(), rat("0.2"), 1).unwrap();
        let b = bids(&[(1, "0.4"), (2, "0.4")]);
        let dist = sp.outcome_distribution(&b).unwrap();
        assert_eq!(dist.len(), 2);
        for (w, o) in &dist {
            assert_eq!(*w, rat("1/2"));
            assert_eq!(o.items_sold, 1);
            assert_eq!(o.seller_revenue, rat("0.4"));
        }
        let e = sp.expected_outcome(&b).unwrap();
        assert_eq!(e.allocation(Identity(1)), rat("1/2"));
        assert_eq!(e.allocation(Identity(2)), rat("1/2"));
        // both coin-driven winners appear across a handful of coins
        let winners: BTreeSet<Identity> = (0..32u8)
            .map(|c| {
                let o = sp.run(&b, &coin(c)).unwrap();
                assert_eq!(o.seller_revenue, rat("0.4"));
                *o.allocations.iter().find(|(_, x)| **x == 1).unwrap().0
            })
            .collect();
        assert_eq!(winners.len(), 2);
    }

    #[test]
    fn three_way_boundary_uses_q() {
        // b₂ = 0.4, A = 2, α = 0, q = 1/3: pay 0.4/3 + 0.5·2/3 = 7/15
        let sp = SecondPrice::new(grid10(), rat("0.2"), 1).unwrap();
        let out = sp
            .run(&bids(&[(1, "0.7"), (2, "0.4"), (3, "0.4")]), &coin(9))
            .unwrap();
        assert_eq!(out.payment(Identity(1)), rat("7/15"));
    }

    #[test]
    fn confirmed_at_boundary_pays_boundary() {
        // k = 2, bids 0.6, 0.4, 0.4: one 0.4 is confirmed and pays 0.4;
        // α = 1, A = 2, q = 2/3, the 0.6 bid pays 0.4·2/3 + 0.5/3 = 13/30
        let sp = SecondPrice::new(grid10(), rat("0.2"), 2).unwrap();
        let b = bids(&[(1, "0.6"), (2, "0.4"), (3, "0.4")]);
        for (_, o) in sp.outcome_distribution(&b).unwrap() {
            assert_eq!(o.payment(Identity(1)), rat("13/30"));
            let tied_winner = if o.allocated(Identity(2)) { 2 } else { 3 };
            assert_eq!(o.payment(Identity(tied_winner)), rat("0.4"));
            assert!(o.validate().is_ok());
        }
    }

    #[test]
    fn rejects_off_grid_bids() {
        let sp = SecondPrice::new(grid10(), rat("0.2"), 1).unwrap();
        assert!(matches!(
            sp.run(&bids(&[(1, "0.55")]), &coin(0)),
            Err(MechanismError::InvalidBid { .. })
        ));
        assert!(SecondPrice::new(grid10(), rat("0.25"), 1).is_err());
        assert!(SecondPrice::new(grid10(), rat("0.2"), 0).is_err());
    }

    #[test]
    fn top_tick_boundary_never_needs_successor() {
        let sp = SecondPrice::new(grid10(), rat("0.2"), 1).unwrap();
        let b = bids(&[(1, "1"), (2, "1")]);
        for (_, o) in sp.outcome_distribution(&b).unwrap() {
            assert_eq!(o.seller_revenue, rat("1"));
        }
    }
}
