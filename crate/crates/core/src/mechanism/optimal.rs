use super::{AuctionRules, BidVector, Identity, MechanismError};
use crate::domain::{DiscreteDistribution, ValueDomain};
use crate::rational::Rational;

/// Largest number of value profiles exact enumeration will visit by default.
pub const DEFAULT_ENUMERATION_BOUND: u128 = 1_000_000;

/// Revenue-optimal payment for a monotone allocation:
/// `p(θᵗ) = θᵗ·x(θᵗ) − Σ_{j=1..t} (θʲ − θʲ⁻¹)·x(θʲ⁻¹)` over tick indices `0..=t`.
///
/// `allocation` maps an own bid to its allocation probability with the other
/// bids held fixed.
pub fn optimal_payment<F>(
    domain: &ValueDomain,
    mut allocation: F,
    own_bid: &Rational,
) -> Result<Rational, MechanismError>
where
    F: FnMut(&Rational) -> Result<Rational, MechanismError>,
{
    let t = domain
        .index_of(own_bid)
        .ok_or_else(|| crate::domain::DomainError::NotATick(own_bid.clone()))?;
    let ticks = domain.ticks();
    let mut x_prev = allocation(&ticks[0])?;
    let mut area = Rational::zero();
    for j in 1..=t {
        area += &(&ticks[j] - &ticks[j - 1]) * &x_prev;
        let x = allocation(&ticks[j])?;
        if x < x_prev {
            return Err(MechanismError::NonMonotoneAllocation {
                low: ticks[j - 1].clone(),
                high: ticks[j].clone(),
            });
        }
        x_prev = x;
    }
    Ok(&ticks[t] * &x_prev - area)
}

/// [`optimal_payment`] for buyer `bidder` under `rules`, with allocation
/// probabilities taken over the rules' tie-breaking randomness.
pub fn optimal_payment_for(
    rules: &dyn AuctionRules,
    bidder: Identity,
    others: &BidVector,
    own_bid: &Rational,
) -> Result<Rational, MechanismError> {
    optimal_payment(
        rules.domain(),
        |b| {
            let bids = others.with_bid(bidder, Some(b.clone()));
            Ok(rules.expected_outcome(&bids)?.allocation(bidder))
        },
        own_bid,
    )
}

/// Calls `visit(weight, tick_indices)` for every profile in `𝒟ⁿ`.
pub fn for_each_profile<F>(
    dist: &DiscreteDistribution,
    n: usize,
    bound: u128,
    mut visit: F,
) -> Result<(), MechanismError>
where
    F: FnMut(&Rational, &[usize]) -> Result<(), MechanismError>,
{
    let t = dist.domain().len();
    let size = (t as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > bound {
        return Err(MechanismError::EnumerationTooLarge { size, bound });
    }
    let mut idx = vec![0usize; n];
    loop {
        let w: Rational = idx
            .iter()
            .fold(Rational::one(), |acc, &i| acc * dist.density(i));
        if !w.is_zero() {
            visit(&w, &idx)?;
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(());
            }
            idx[pos] += 1;
            if idx[pos] < t {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Exact `E_{b ~ 𝒟ⁿ}[x_i(b)·φ(b_i)]` where bidder `i` is identity `position + 1`
/// in profiles built by [`BidVector::from_values`].
pub fn expected_virtual_surplus<F>(
    dist: &DiscreteDistribution,
    mut allocation: F,
    position: usize,
    n: usize,
    bound: u128,
) -> Result<Rational, MechanismError>
where
    F: FnMut(&BidVector) -> Result<Rational, MechanismError>,
{
    assert!(position < n, "bidder position out of range");
    let phi = dist.virtual_values()?;
    let domain = dist.domain();
    let mut total = Rational::zero();
    for_each_profile(dist, n, bound, |w, idx| {
        let values: Vec<Rational> = idx.iter().map(|&i| domain.value(i).clone()).collect();
        let x = allocation(&BidVector::from_values(&values))?;
        total += &(w * &x) * &phi[idx[position]];
        Ok(())
    })?;
    Ok(total)
}
