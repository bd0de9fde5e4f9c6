//! Comparisons between protocol runs and the ideal auction.

use std::collections::BTreeMap;

use super::{
    run_protocol, run_protocol_with, AdversaryScript, NetError, ProtocolConfig, RunOptions,
};
use crate::incentives::{coalition_utility, Coalition};
use crate::mechanism::{
    run_ideal_auction, AuctionOutcome, AuctionRules, BidVector, CoinString, HonestHook,
    IdealResult, Identity,
};
use crate::rational::Rational;
use crate::trace::{ExecutionTrace, Party};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivalenceMismatch {
    pub trial: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub trials: usize,
    pub mismatches: Vec<EquivalenceMismatch>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Checks one honest trace against the ideal auction run on the same joint
/// coin.
pub fn compare_with_ideal(
    rules: &dyn AuctionRules,
    values: &BidVector,
    trace: &ExecutionTrace,
) -> Result<(), String> {
    if !trace.is_safe() {
        return Err(format!("honest run rejected: {:?}", trace.decisions));
    }
    let real = trace.outcome.as_ref().ok_or("no outcome")?;
    let coin = trace.joint_coin.as_ref().ok_or("no joint coin")?;
    let ideal = match run_ideal_auction(rules, values, &mut HonestHook, coin) {
        Ok((IdealResult::Completed(o), _)) => o,
        Ok((IdealResult::Aborted, _)) => return Err("honest ideal run aborted".into()),
        Err(e) => return Err(e.to_string()),
    };
    if &ideal != real {
        return Err(format!(
            "outcomes differ: real {} ideal {}",
            real.to_json(),
            ideal.to_json()
        ));
    }
    for p in &trace.honest {
        let Some(id) = p.identity() else { continue };
        let expected = ideal.private_outcome(id);
        if trace.private_outcomes.get(p) != Some(&expected) {
            return Err(format!(
                "{p} received {:?}, ideal {:?}",
                trace.private_outcomes.get(p),
                expected
            ));
        }
    }
    ideal.validate()?;
    if !ideal.individually_rational(values) {
        return Err("outcome is not individually rational".into());
    }
    Ok(())
}

/// Runs the honest protocol `trials` times with consecutive seeds and
/// compares each run with the ideal auction on the same joint coin.
pub fn honest_equivalence(
    config: &ProtocolConfig,
    values: &BidVector,
    trials: usize,
) -> Result<EquivalenceReport, NetError> {
    let rules = config.rules()?;
    let mut report = EquivalenceReport {
        trials,
        mismatches: Vec::new(),
    };
    for trial in 0..trials {
        let seed = config.seed.wrapping_add(trial as u64);
        let cfg = config.clone().with_seed(seed);
        let trace = run_protocol(&cfg, values, None)?;
        if let Err(reason) = compare_with_ideal(rules.as_ref(), values, &trace) {
            report.mismatches.push(EquivalenceMismatch {
                trial,
                seed,
                reason,
            });
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistributionReport {
    pub coins: usize,
    /// Outcome law of the protocol over every platform coin.
    pub real: Vec<(Rational, AuctionOutcome)>,
    /// Outcome law of the ideal auction over every joint coin.
    pub ideal: Vec<(Rational, AuctionOutcome)>,
    /// Law of the rules with exactly uniform tie-breaking.
    pub exact: Vec<(Rational, AuctionOutcome)>,
    pub unsafe_runs: usize,
}

impl DistributionReport {
    pub fn equal(&self) -> bool {
        self.unsafe_runs == 0 && self.real == self.ideal
    }
}

fn tally(outcomes: Vec<AuctionOutcome>) -> Vec<(Rational, AuctionOutcome)> {
    let total = outcomes.len() as i64;
    let mut counts: BTreeMap<String, (i64, AuctionOutcome)> = BTreeMap::new();
    for o in outcomes {
        counts.entry(o.to_json()).or_insert((0, o)).0 += 1;
    }
    counts
        .into_values()
        .map(|(c, o)| (Rational::new(c, total), o))
        .collect()
}

fn coin_from_index(index: usize, bytes: usize) -> CoinString {
    let full = (index as u64).to_be_bytes();
    CoinString::from_bytes(full[8 - bytes..].to_vec())
}

/// Exhaustive comparison for short coins: the protocol is run once for every
/// value of the platform coin, which makes the joint coin range over every
/// value once, and the ideal auction once for every joint coin.
pub fn distribution_equivalence(
    config: &ProtocolConfig,
    values: &BidVector,
) -> Result<DistributionReport, NetError> {
    if config.coin_bits > 16 {
        return Err(NetError::ConfigInvalid(format!(
            "exhaustive comparison needs coins of at most 16 bits, got {}",
            config.coin_bits
        )));
    }
    let rules = config.rules()?;
    let bytes = config.coin_bytes();
    let coins = 1usize << config.coin_bits;
    let mut real = Vec::with_capacity(coins);
    let mut ideal = Vec::with_capacity(coins);
    let mut unsafe_runs = 0;
    for c in 0..coins {
        let coin = coin_from_index(c, bytes);
        let opts = RunOptions {
            platform_coin: Some(coin.clone()),
        };
        let trace = run_protocol_with(config, values, None, &opts)?;
        if !trace.is_safe() {
            unsafe_runs += 1;
        }
        if let Some(o) = trace.outcome {
            real.push(o);
        }
        ideal.push(rules.run(values, &coin)?);
    }
    Ok(DistributionReport {
        coins,
        real: tally(real),
        ideal: tally(ideal),
        exact: rules.outcome_distribution(values)?,
        unsafe_runs,
    })
}

/// Probability that each bidder receives an item.
pub fn winner_marginals(dist: &[(Rational, AuctionOutcome)]) -> BTreeMap<Identity, Rational> {
    let mut m: BTreeMap<Identity, Rational> = BTreeMap::new();
    for (p, o) in dist {
        for (id, &x) in &o.allocations {
            let e = m.entry(*id).or_default();
            if x == 1 {
                *e = &*e + p;
            }
        }
    }
    m
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolUtilityReport {
    pub script: String,
    pub trials: usize,
    pub honest_mean: Rational,
    pub deviating_mean: Rational,
    pub unsafe_runs: usize,
    pub violated: bool,
}

/// Coalition utility of a scripted deviation against honest play, averaged
/// over `trials` coupled seeds.
pub fn protocol_utility_check(
    config: &ProtocolConfig,
    values: &BidVector,
    script: &AdversaryScript,
    coalition: &Coalition,
    trials: usize,
) -> Result<ProtocolUtilityReport, NetError> {
    let corrupted = script.corrupted(values)?;
    let allowed = |p: &Party| match p {
        Party::Platform => coalition.includes_platform,
        Party::Seller => coalition.includes_seller,
        Party::Buyer(id) => coalition.true_values.contains_key(id),
    };
    if let Some(p) = corrupted.iter().find(|p| !allowed(p)) {
        return Err(NetError::AdversaryInvalid(format!(
            "{script} corrupts {p}, outside {coalition}"
        )));
    }
    let mut honest = Rational::zero();
    let mut deviating = Rational::zero();
    let mut unsafe_runs = 0;
    for t in 0..trials {
        let cfg = config.clone().with_seed(config.seed.wrapping_add(t as u64));
        honest += coalition_utility(&run_protocol(&cfg, values, None)?, coalition);
        let trace = run_protocol(&cfg, values, Some(script))?;
        if !trace.is_safe() {
            unsafe_runs += 1;
        }
        deviating += coalition_utility(&trace, coalition);
    }
    let n = Rational::from_integer(trials.max(1) as i64);
    let honest_mean = &honest / &n;
    let deviating_mean = &deviating / &n;
    Ok(ProtocolUtilityReport {
        script: script.name(),
        trials,
        violated: deviating_mean > honest_mean,
        honest_mean,
        deviating_mean,
        unsafe_runs,
    })
}
