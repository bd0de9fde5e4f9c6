//! The trusted auction functionality: collect bids, let the platform and seller
//! inject their own, compute the outcome, then let the platform approve or abort.

use std::collections::BTreeMap;

use super::{AuctionOutcome, AuctionRules, BidVector, CoinString, Identity, MechanismError};
use crate::rational::Rational;

/// What the strategic side learns after the outcome is computed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategicView {
    pub items_sold: usize,
    pub seller_revenue: Rational,
    pub platform_revenue: Rational,
    /// Outcome for each injected bid, keyed by its identity.
    pub injected: BTreeMap<Identity, (bool, Rational)>,
}

/// Strategic behaviour available in the ideal world.
pub trait StrategicHook {
    /// Bids injected after learning how many honest bids arrived.
    fn inject(&mut self, honest_count: usize) -> Vec<(Identity, Rational)> {
        let _ = honest_count;
        Vec::new()
    }

    /// `true` sends ok, `false` aborts.
    fn approve(&mut self, view: &StrategicView) -> bool {
        let _ = view;
        true
    }
}

/// Injects nothing and always approves.
#[derive(Clone, Copy, Debug, Default)]
pub struct HonestHook;

impl StrategicHook for HonestHook {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IdealResult {
    Completed(AuctionOutcome),
    /// Everyone's utility is zero.
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdealReport {
    pub honest_count: usize,
    pub injected: Vec<(Identity, Rational)>,
    pub coin: CoinString,
}

fn view_of(outcome: &AuctionOutcome, injected: &[(Identity, Rational)]) -> StrategicView {
    StrategicView {
        items_sold: outcome.items_sold,
        seller_revenue: outcome.seller_revenue.clone(),
        platform_revenue: outcome.platform_revenue.clone(),
        injected: injected
            .iter()
            .map(|(id, _)| (*id, (outcome.allocated(*id), outcome.payment(*id))))
            .collect(),
    }
}

/// One execution of the ideal auction with the given joint coin.
pub fn run_ideal_auction(
    rules: &dyn AuctionRules,
    honest_bids: &BidVector,
    hook: &mut dyn StrategicHook,
    coin: &CoinString,
) -> Result<(IdealResult, IdealReport), MechanismError> {
    let injected = hook.inject(honest_bids.len());
    let all = honest_bids.extended(&injected)?;
    let outcome = rules.run(&all, coin)?;
    let ok = hook.approve(&view_of(&outcome, &injected));
    let report = IdealReport {
        honest_count: honest_bids.len(),
        injected,
        coin: coin.clone(),
    };
    let result = if ok {
        IdealResult::Completed(outcome)
    } else {
        IdealResult::Aborted
    };
    Ok((result, report))
}

/// Every realization of the ideal auction with its exact probability; aborted
/// realizations appear as `None`.
pub fn ideal_outcome_distribution(
    rules: &dyn AuctionRules,
    honest_bids: &BidVector,
    hook: &mut dyn StrategicHook,
) -> Result<Vec<(Rational, Option<AuctionOutcome>)>, MechanismError> {
    let injected = hook.inject(honest_bids.len());
    let all = honest_bids.extended(&injected)?;
    Ok(rules
        .outcome_distribution(&all)?
        .into_iter()
        .map(|(w, o)| {
            let ok = hook.approve(&view_of(&o, &injected));
            (w, ok.then_some(o))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ValueDomain;
    use crate::mechanism::SecondPrice;
    use crate::rational::rat;

    fn rules() -> SecondPrice {
        SecondPrice::new(ValueDomain::grid(11).unwrap(), rat("0.2"), 1).unwrap()
    }

    fn honest() -> BidVector {
        BidVector::new(vec![(Identity(1), rat("0.5")), (Identity(2), rat("0.3"))]).unwrap()
    }

    struct Inject(Vec<(Identity, Rational)>);
    impl StrategicHook for Inject {
        fn inject(&mut self, _: usize) -> Vec<(Identity, Rational)> {
            self.0.clone()
        }
    }

    struct Abort;
    impl StrategicHook for Abort {
        fn approve(&mut self, _: &StrategicView) -> bool {
            false
        }
    }

    #[test]
    fn honest_hook_matches_rules() {
        let coin = CoinString::from_bytes(vec![3; 16]);
        let (res, report) = run_ideal_auction(&rules(), &honest(), &mut HonestHook, &coin).unwrap();
        assert_eq!(
            res,
            IdealResult::Completed(rules().run(&honest(), &coin).unwrap())
        );
        assert_eq!(report.honest_count, 2);
        assert!(report.injected.is_empty());
    }

    #[test]
    fn injected_top_bid_displaces_winner() {
        let coin = CoinString::from_bytes(vec![3; 16]);
        let mut hook = Inject(vec![(Identity(99), rat("1"))]);
        let (res, _) = run_ideal_auction(&rules(), &honest(), &mut hook, &coin).unwrap();
        let IdealResult::Completed(o) = res else {
            panic!("aborted")
        };
        assert!(o.allocated(Identity(99)));
        assert!(!o.allocated(Identity(1)));
        // b₂ = 0.5, A = 1, α = 0, q = 1/2 → 0.5·½ + 0.6·½
        assert_eq!(o.payment(Identity(99)), rat("0.55"));
    }

    #[test]
    fn abort_zeroes_everything() {
        let coin = CoinString::from_bytes(vec![3; 16]);
        let (res, _) = run_ideal_auction(&rules(), &honest(), &mut Abort, &coin).unwrap();
        assert_eq!(res, IdealResult::Aborted);
        let dist = ideal_outcome_distribution(&rules(), &honest(), &mut Abort).unwrap();
        assert!(dist.iter().all(|(_, o)| o.is_none()));
    }

    #[test]
    fn duplicate_injected_identity_is_an_error() {
        let coin = CoinString::from_bytes(vec![3; 16]);
        let mut hook = Inject(vec![(Identity(1), rat("1"))]);
        assert_eq!(
            run_ideal_auction(&rules(), &honest(), &mut hook, &coin).unwrap_err(),
            MechanismError::DuplicateIdentity(Identity(1))
        );
    }
}
