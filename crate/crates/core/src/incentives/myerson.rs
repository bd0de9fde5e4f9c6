use serde::Serialize;

use super::IncentiveError;
use crate::domain::{DiscreteDistribution, ValueDomain};
use crate::mechanism::for_each_profile;
use crate::mechanism::{AuctionRules, BidVector, Identity};
use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Monotonicity,
    Sandwich,
}

/// A bid pair `low < high` at which a condition fails. `others` is empty in
/// the Bayesian check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MyersonViolation {
    pub kind: ViolationKind,
    pub bidder: Identity,
    pub others: Vec<Rational>,
    pub low: Rational,
    pub high: Rational,
    pub x_low: Rational,
    pub x_high: Rational,
    pub p_low: Rational,
    pub p_high: Rational,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MyersonReport {
    pub profiles_checked: u64,
    pub pairs_checked: u64,
    pub violations: u64,
    pub first: Option<MyersonViolation>,
}

impl MyersonReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn scan(
        &mut self,
        domain: &ValueDomain,
        bidder: Identity,
        others: &[Rational],
        x: &[Rational],
        p: &[Rational],
    ) {
        self.profiles_checked += 1;
        let ticks = domain.ticks();
        for lo in 0..ticks.len() {
            for hi in lo + 1..ticks.len() {
                self.pairs_checked += 1;
                let dx = &x[hi] - &x[lo];
                let dp = &p[hi] - &p[lo];
                let kind = if dx.is_negative() {
                    Some(ViolationKind::Monotonicity)
                } else if &ticks[lo] * &dx > dp || dp > &ticks[hi] * &dx {
                    Some(ViolationKind::Sandwich)
                } else {
                    None
                };
                if let Some(kind) = kind {
                    self.violations += 1;
                    if self.first.is_none() {
                        self.first = Some(MyersonViolation {
                            kind,
                            bidder,
                            others: others.to_vec(),
                            low: ticks[lo].clone(),
                            high: ticks[hi].clone(),
                            x_low: x[lo].clone(),
                            x_high: x[hi].clone(),
                            p_low: p[lo].clone(),
                            p_high: p[hi].clone(),
                        });
                    }
                }
            }
        }
    }
}

/// Bid vector with `own` at `position` and `others` filling the remaining
/// slots, identities `1..=n`.
fn profile(position: usize, own: &Rational, others: &[Rational]) -> BidVector {
    let mut values = others.to_vec();
    values.insert(position, own.clone());
    BidVector::from_values(&values)
}

fn curves(
    rules: &dyn AuctionRules,
    position: usize,
    others: &[Rational],
) -> Result<(Vec<Rational>, Vec<Rational>), IncentiveError> {
    let id = Identity(position as u64 + 1);
    let mut xs = Vec::new();
    let mut ps = Vec::new();
    for b in rules.domain().ticks() {
        let e = rules.expected_outcome(&profile(position, b, others))?;
        xs.push(e.allocation(id));
        ps.push(e.payment(id));
    }
    Ok((xs, ps))
}

/// Monotone allocation and the payment sandwich
/// `b·(x(b′)−x(b)) ≤ p(b′)−p(b) ≤ b′·(x(b′)−x(b))` for every bidder, every
/// profile of the other `n − 1` bids and every pair `b < b′`, in expectation
/// over tie-breaks.
pub fn myerson_check(
    rules: &dyn AuctionRules,
    n: usize,
    bound: u128,
) -> Result<MyersonReport, IncentiveError> {
    if n == 0 {
        return Err(IncentiveError::InvalidParameter(
            "n must be positive".into(),
        ));
    }
    let domain = rules.domain().clone();
    let grid = DiscreteDistribution::uniform(domain.clone());
    let mut report = MyersonReport::default();
    for position in 0..n {
        let mut err = None;
        for_each_profile(&grid, n - 1, bound, |_, idx| {
            let others: Vec<Rational> = idx.iter().map(|&i| domain.value(i).clone()).collect();
            match curves(rules, position, &others) {
                Ok((x, p)) => report.scan(&domain, Identity(position as u64 + 1), &others, &x, &p),
                Err(e) => err = Some(e),
            }
            Ok(())
        })?;
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(report)
}

/// The same conditions on interim curves, averaging the other bids over `𝒟ⁿ⁻¹`.
pub fn myerson_check_bayesian(
    rules: &dyn AuctionRules,
    dist: &DiscreteDistribution,
    n: usize,
    bound: u128,
) -> Result<MyersonReport, IncentiveError> {
    if n == 0 {
        return Err(IncentiveError::InvalidParameter(
            "n must be positive".into(),
        ));
    }
    let domain = rules.domain().clone();
    let t = domain.len();
    let mut report = MyersonReport::default();
    for position in 0..n {
        let mut xs = vec![Rational::zero(); t];
        let mut ps = vec![Rational::zero(); t];
        let mut err = None;
        for_each_profile(dist, n - 1, bound, |w, idx| {
            let others: Vec<Rational> = idx
                .iter()
                .map(|&i| dist.domain().value(i).clone())
                .collect();
            match curves(rules, position, &others) {
                Ok((x, p)) => {
                    for j in 0..t {
                        xs[j] += w * &x[j];
                        ps[j] += w * &p[j];
                    }
                }
                Err(e) => err = Some(e),
            }
            Ok(())
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        report.scan(&domain, Identity(position as u64 + 1), &[], &xs, &ps);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::incentives::FirstPriceFixture;
    use crate::mechanism::{AscendingAuction, SecondPrice};
    use crate::rational::rat;

    #[test]
    fn second_price_hand_example() {
        let rules = SecondPrice::new(ValueDomain::grid(11).unwrap(), rat("0.2"), 1).unwrap();
        let (x, p) = curves(&rules, 0, &[rat("0.3")]).unwrap();
        assert_eq!(
            (x[2].clone(), p[2].clone()),
            (Rational::zero(), Rational::zero())
        );
        assert_eq!((x[3].clone(), p[3].clone()), (rat("1/2"), rat("0.15")));
        assert_eq!((x[4].clone(), p[4].clone()), (Rational::one(), rat("0.35")));
        let report = myerson_check(&rules, 2, 1_000_000).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.profiles_checked, 22);
    }

    #[test]
    fn shipped_mechanisms_pass_small_grids() {
        let d = ValueDomain::grid(5).unwrap();
        for k in 1..=2 {
            let sp = SecondPrice::new(d.clone(), rat("0.25"), k).unwrap();
            let asc = AscendingAuction::new(d.clone(), rat("0.25"), k).unwrap();
            for n in 1..=3 {
                assert!(myerson_check(&sp, n, 1_000_000).unwrap().passed());
                assert!(myerson_check(&asc, n, 1_000_000).unwrap().passed());
            }
        }
    }

    #[test]
    fn first_price_breaks_the_sandwich() {
        let d = ValueDomain::grid(5).unwrap();
        let fp = FirstPriceFixture::new(d.clone(), rat("0"), 1).unwrap();
        let report = myerson_check(&fp, 2, 1_000_000).unwrap();
        assert!(!report.passed());
        assert_eq!(report.first.unwrap().kind, ViolationKind::Sandwich);
        let dist = DiscreteDistribution::uniform(d);
        assert!(!myerson_check_bayesian(&fp, &dist, 2, 1_000_000)
            .unwrap()
            .passed());
    }

    #[test]
    fn bayesian_second_price() {
        let d = ValueDomain::new(vec![rat("0"), rat("0.5"), rat("1")]).unwrap();
        let dist = DiscreteDistribution::new(d, vec![rat("0.2"), rat("0.5"), rat("0.3")]).unwrap();
        let rules = SecondPrice::with_prior(&dist, 1).unwrap();
        assert!(myerson_check_bayesian(&rules, &dist, 3, 1_000_000)
            .unwrap()
            .passed());
    }
}
