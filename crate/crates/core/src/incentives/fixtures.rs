//! Deliberately flawed rules used to show the harness can see violations.

use crate::domain::ValueDomain;
use crate::mechanism::{
    AuctionOutcome, AuctionRules, BidVector, CoinString, MechanismError, SecondPrice,
};
use crate::rational::Rational;

/// Second-price allocation, but every winner pays its own bid.
#[derive(Clone, Debug)]
pub struct FirstPriceFixture {
    inner: SecondPrice,
}

impl FirstPriceFixture {
    pub fn new(domain: ValueDomain, reserve: Rational, k: usize) -> Result<Self, MechanismError> {
        Ok(FirstPriceFixture {
            inner: SecondPrice::new(domain, reserve, k)?,
        })
    }

    fn reprice(bids: &BidVector, mut out: AuctionOutcome) -> AuctionOutcome {
        for b in bids.entries() {
            if out.allocated(b.bidder) {
                out.payments.insert(b.bidder, b.value.clone());
            }
        }
        out.seller_revenue = out.total_payments();
        out
    }
}

impl AuctionRules for FirstPriceFixture {
    fn name(&self) -> &str {
        "first-price-fixture"
    }

    fn domain(&self) -> &ValueDomain {
        self.inner.domain()
    }

    fn capacity(&self) -> usize {
        self.inner.capacity()
    }

    fn run(&self, bids: &BidVector, coin: &CoinString) -> Result<AuctionOutcome, MechanismError> {
        Ok(Self::reprice(bids, self.inner.run(bids, coin)?))
    }

    fn outcome_distribution(
        &self,
        bids: &BidVector,
    ) -> Result<Vec<(Rational, AuctionOutcome)>, MechanismError> {
        Ok(self
            .inner
            .outcome_distribution(bids)?
            .into_iter()
            .map(|(w, o)| (w, Self::reprice(bids, o)))
            .collect())
    }
}

/// Second price where the platform keeps `tick/2` of every sale.
#[derive(Clone, Debug)]
pub struct TickSkimmingFixture {
    inner: SecondPrice,
    skim: Rational,
}

impl TickSkimmingFixture {
    pub fn new(domain: ValueDomain, reserve: Rational, k: usize) -> Result<Self, MechanismError> {
        let skim = domain.tick() / Rational::from(2i64);
        Ok(TickSkimmingFixture {
            inner: SecondPrice::new(domain, reserve, k)?,
            skim,
        })
    }

    pub fn skim(&self) -> &Rational {
        &self.skim
    }

    fn skim_off(&self, mut out: AuctionOutcome) -> AuctionOutcome {
        let total = out.total_payments();
        let wanted = &self.skim * &Rational::from(out.items_sold);
        let kept = if wanted > total {
            total.clone()
        } else {
            wanted
        };
        out.seller_revenue = &total - &kept;
        out.platform_revenue = kept;
        out
    }
}

impl AuctionRules for TickSkimmingFixture {
    fn name(&self) -> &str {
        "tick-skimming-fixture"
    }

    fn domain(&self) -> &ValueDomain {
        self.inner.domain()
    }

    fn capacity(&self) -> usize {
        self.inner.capacity()
    }

    fn run(&self, bids: &BidVector, coin: &CoinString) -> Result<AuctionOutcome, MechanismError> {
        Ok(self.skim_off(self.inner.run(bids, coin)?))
    }

    fn outcome_distribution(
        &self,
        bids: &BidVector,
    ) -> Result<Vec<(Rational, AuctionOutcome)>, MechanismError> {
        Ok(self
            .inner
            .outcome_distribution(bids)?
            .into_iter()
            .map(|(w, o)| (w, self.skim_off(o)))
            .collect())
    }
}
