use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::scripts::{Deviation, StrategyScript};
use super::{outcome_utility, Coalition, IncentiveError, Z_99};
use crate::domain::DiscreteDistribution;
use crate::mechanism::for_each_profile;
use crate::mechanism::{AuctionRules, BidVector, CoinString, Identity, MechanismError};
use crate::rational::Rational;

/// Whose values are fixed and whose are drawn.
#[derive(Clone, Debug)]
pub enum IcSetting {
    /// Honest buyers bid exactly these values.
    ExPost { others: BidVector },
    /// `honest_count` honest buyers with values drawn from `dist`.
    Bayesian {
        dist: DiscreteDistribution,
        honest_count: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IcMode {
    /// Exhaustive over priors and tie-breaks; fails above `bound` profiles.
    Exact { bound: u128 },
    /// Seeded sampling with a 99% normal half-width on the utility gain.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportMode {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub script: String,
    #[serde(rename = "honest")]
    pub honest_expected: Rational,
    #[serde(rename = "deviating")]
    pub deviating_expected: Rational,
    pub mode: ReportMode,
    pub samples: usize,
    /// Zero in exact mode.
    pub half_width: f64,
    pub violated: bool,
}

struct Instance<'a> {
    rules: &'a dyn AuctionRules,
    coalition: &'a Coalition,
    fake_base: u64,
    coin_bits: usize,
}

const COIN_BITS: usize = 128;

impl Instance<'_> {
    fn submitted(
        &self,
        honest: &[(Identity, Rational)],
        dev: &Deviation,
        simulated: &[Rational],
    ) -> Result<BidVector, MechanismError> {
        let mut entries: Vec<(Identity, Rational)> = honest.to_vec();
        entries.extend(
            dev.member_bids
                .iter()
                .filter_map(|(id, b)| b.clone().map(|b| (*id, b))),
        );
        let fakes = dev.fake_bids.iter().chain(simulated);
        entries.extend(
            fakes
                .enumerate()
                .map(|(j, b)| (Identity(self.fake_base + j as u64), b.clone())),
        );
        BidVector::new(entries)
    }

    fn utility(
        &self,
        outcome: &crate::mechanism::AuctionOutcome,
        honest: &BTreeSet<Identity>,
        dev: &Deviation,
    ) -> Rational {
        let u = outcome_utility(outcome, honest, self.coalition);
        match &dev.abort_below {
            Some(t) if u < *t => Rational::zero(),
            _ => u,
        }
    }

    /// Exact expectation over tie-breaks and simulated bidders.
    fn exact(
        &self,
        honest: &[(Identity, Rational)],
        dev: &Deviation,
        bound: u128,
    ) -> Result<Rational, IncentiveError> {
        let honest_ids: BTreeSet<Identity> = honest.iter().map(|(id, _)| *id).collect();
        let mut total = Rational::zero();
        let mut eval = |w: &Rational, simulated: &[Rational]| -> Result<(), MechanismError> {
            let bids = self.submitted(honest, dev, simulated)?;
            for (p, o) in self.rules.outcome_distribution(&bids)? {
                total += &(w * &p) * &self.utility(&o, &honest_ids, dev);
            }
            Ok(())
        };
        match &dev.simulated {
            Some((dist, count)) => {
                let domain = dist.domain();
                for_each_profile(dist, *count, bound, |w, idx| {
                    let sim: Vec<Rational> = idx.iter().map(|&i| domain.value(i).clone()).collect();
                    eval(w, &sim)
                })?;
            }
            None => eval(&Rational::one(), &[])?,
        }
        Ok(total)
    }

    /// One sampled realization: (honest utility, deviating utility) on a shared coin.
    fn sample<R: Rng>(
        &self,
        honest: &[(Identity, Rational)],
        dev: &Deviation,
        rng: &mut R,
    ) -> Result<(Rational, Rational), IncentiveError> {
        let honest_ids: BTreeSet<Identity> = honest.iter().map(|(id, _)| *id).collect();
        let coin = CoinString::random(self.coin_bits, rng);
        let truthful = Deviation::truthful(self.coalition);
        let h = self
            .rules
            .run(&self.submitted(honest, &truthful, &[])?, &coin)?;
        let simulated = match &dev.simulated {
            Some((dist, count)) => draw(dist, *count, rng),
            None => Vec::new(),
        };
        let d = self
            .rules
            .run(&self.submitted(honest, dev, &simulated)?, &coin)?;
        Ok((
            self.utility(&h, &honest_ids, &truthful),
            self.utility(&d, &honest_ids, dev),
        ))
    }
}

fn draw<R: Rng>(dist: &DiscreteDistribution, count: usize, rng: &mut R) -> Vec<Rational> {
    let weights: Vec<f64> = dist.pmf().iter().map(Rational::to_f64).collect();
    let index = WeightedIndex::new(&weights).expect("pmf has positive mass");
    (0..count)
        .map(|_| dist.domain().value(index.sample(rng)).clone())
        .collect()
}

/// Running sums for one stratum of (honest, deviating) pairs.
#[derive(Default)]
struct Stratum {
    n: usize,
    honest: Rational,
    deviating: Rational,
    gain_sum: f64,
    gain_sq: f64,
}

impl Stratum {
    fn push(&mut self, (h, d): (Rational, Rational)) {
        let g = (&d - &h).to_f64();
        self.n += 1;
        self.gain_sum += g;
        self.gain_sq += g * g;
        self.honest += h;
        self.deviating += d;
    }

    fn variance_of_mean(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let mean = self.gain_sum / n;
        ((self.gain_sq - n * mean * mean) / (n - 1.0)).max(0.0) / n
    }
}

fn honest_ids(coalition: &Coalition, count: usize) -> Vec<Identity> {
    (1u64..)
        .map(Identity)
        .filter(|id| !coalition.true_values.contains_key(id))
        .take(count)
        .collect()
}

/// Expected coalition utility with and without each script.
pub fn check_ic(
    rules: &dyn AuctionRules,
    coalition: &Coalition,
    scripts: &[StrategyScript],
    setting: &IcSetting,
    mode: IcMode,
) -> Result<Vec<UtilityReport>, IncentiveError> {
    coalition.kind()?;
    let fixed_honest: Vec<Identity> = match setting {
        IcSetting::ExPost { others } => {
            if let Some(id) = others
                .identities()
                .find(|id| coalition.true_values.contains_key(id))
            {
                return Err(IncentiveError::InvalidParameter(format!(
                    "{id} is both honest and a coalition member"
                )));
            }
            others.identities().collect()
        }
        IcSetting::Bayesian { honest_count, .. } => honest_ids(coalition, *honest_count),
    };
    let max_id = fixed_honest
        .iter()
        .chain(coalition.true_values.keys())
        .map(|id| id.0)
        .max()
        .unwrap_or(0);
    let inst = Instance {
        rules,
        coalition,
        fake_base: max_id + 1,
        coin_bits: COIN_BITS,
    };
    let mut deviations = Vec::with_capacity(scripts.len());
    for s in scripts {
        let mut d = Deviation::truthful(coalition);
        s.apply(coalition, &mut d)?;
        deviations.push(d);
    }
    let truthful = Deviation::truthful(coalition);
    let mut reports = Vec::with_capacity(scripts.len());
    match mode {
        IcMode::Exact { bound } => {
            let expect = |dev: &Deviation| -> Result<Rational, IncentiveError> {
                match setting {
                    IcSetting::ExPost { others } => {
                        let honest: Vec<(Identity, Rational)> = others
                            .entries()
                            .iter()
                            .map(|b| (b.bidder, b.value.clone()))
                            .collect();
                        inst.exact(&honest, dev, bound)
                    }
                    IcSetting::Bayesian { dist, honest_count } => {
                        let domain = dist.domain();
                        let mut total = Rational::zero();
                        let mut err = None;
                        for_each_profile(dist, *honest_count, bound, |w, idx| {
                            let honest: Vec<(Identity, Rational)> = fixed_honest
                                .iter()
                                .zip(idx)
                                .map(|(id, &i)| (*id, domain.value(i).clone()))
                                .collect();
                            match inst.exact(&honest, dev, bound) {
                                Ok(u) => total += w * &u,
                                Err(e) => err = Some(e),
                            }
                            Ok(())
                        })?;
                        match err {
                            Some(e) => Err(e),
                            None => Ok(total),
                        }
                    }
                }
            };
            let honest = expect(&truthful)?;
            for (s, d) in scripts.iter().zip(&deviations) {
                let deviating = expect(d)?;
                reports.push(UtilityReport {
                    script: s.to_string(),
                    violated: deviating > honest,
                    honest_expected: honest.clone(),
                    deviating_expected: deviating,
                    mode: ReportMode::Exact,
                    samples: 0,
                    half_width: 0.0,
                });
            }
        }
        IcMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(IncentiveError::InvalidParameter(
                    "samples must be positive".into(),
                ));
            }
            for (j, (s, d)) in scripts.iter().zip(&deviations).enumerate() {
                let mut rng = ChaCha20Rng::seed_from_u64(
                    seed ^ (j as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
                );
                let (honest, deviating, var, used) = match setting {
                    IcSetting::ExPost { others } => {
                        let fixed: Vec<(Identity, Rational)> = others
                            .entries()
                            .iter()
                            .map(|b| (b.bidder, b.value.clone()))
                            .collect();
                        let mut st = Stratum::default();
                        for _ in 0..samples {
                            st.push(inst.sample(&fixed, d, &mut rng)?);
                        }
                        let n = Rational::from(st.n);
                        (
                            &st.honest / &n,
                            &st.deviating / &n,
                            st.variance_of_mean(),
                            st.n,
                        )
                    }
                    IcSetting::Bayesian { dist, .. } => {
                        stratified(&inst, dist, &fixed_honest, d, samples, &mut rng)?
                    }
                };
                let half = Z_99 * var.sqrt();
                let gain = (&deviating - &honest).to_f64();
                reports.push(UtilityReport {
                    script: s.to_string(),
                    violated: gain > half,
                    honest_expected: honest,
                    deviating_expected: deviating,
                    mode: ReportMode::MonteCarlo,
                    samples: used,
                    half_width: half,
                });
            }
        }
    }
    Ok(reports)
}

/// Stratified on the first honest buyer's tick with proportional allocation.
fn stratified<R: Rng>(
    inst: &Instance<'_>,
    dist: &DiscreteDistribution,
    ids: &[Identity],
    dev: &Deviation,
    samples: usize,
    rng: &mut R,
) -> Result<(Rational, Rational, f64, usize), IncentiveError> {
    let domain = dist.domain();
    let profile = |rng: &mut R, first: Option<usize>| -> Vec<(Identity, Rational)> {
        let mut values = draw(dist, ids.len(), rng);
        if let (Some(i), Some(v)) = (first, values.first_mut()) {
            *v = domain.value(i).clone();
        }
        ids.iter().copied().zip(values).collect()
    };
    if ids.is_empty() {
        let mut st = Stratum::default();
        for _ in 0..samples {
            let p = profile(rng, None);
            st.push(inst.sample(&p, dev, rng)?);
        }
        let n = Rational::from(st.n);
        return Ok((
            &st.honest / &n,
            &st.deviating / &n,
            st.variance_of_mean(),
            st.n,
        ));
    }
    let (mut honest, mut deviating, mut var, mut used) =
        (Rational::zero(), Rational::zero(), 0.0, 0);
    for (i, f) in dist.pmf().iter().enumerate() {
        if f.is_zero() {
            continue;
        }
        let n_h = ((samples as f64 * f.to_f64()).round() as usize).max(2);
        let mut st = Stratum::default();
        for _ in 0..n_h {
            let p = profile(rng, Some(i));
            st.push(inst.sample(&p, dev, rng)?);
        }
        let n = Rational::from(st.n);
        honest += f * &(&st.honest / &n);
        deviating += f * &(&st.deviating / &n);
        var += f.to_f64().powi(2) * st.variance_of_mean();
        used += st.n;
    }
    Ok((honest, deviating, var, used))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ValueDomain;
    use crate::incentives::standard_suite;
    use crate::mechanism::SecondPrice;
    use crate::rational::rat;

    fn sp() -> SecondPrice {
        SecondPrice::new(ValueDomain::grid(11).unwrap(), rat("0.2"), 1).unwrap()
    }

    fn replace(bid: &str) -> StrategyScript {
        StrategyScript::InputReplace {
            member: Identity(1),
            bid: rat(bid),
        }
    }

    #[test]
    fn single_buyer_replacements() {
        let rules = sp();
        let c = Coalition::buyer(Identity(1), rat("0.5"));
        let others = BidVector::new(vec![(Identity(2), rat("0.3"))]).unwrap();
        let scripts = [replace("0.4"), replace("0.2"), replace("1")];
        let r = check_ic(
            &rules,
            &c,
            &scripts,
            &IcSetting::ExPost { others },
            IcMode::Exact { bound: 1_000_000 },
        )
        .unwrap();
        let got: Vec<(Rational, Rational, bool)> = r
            .iter()
            .map(|u| {
                (
                    u.honest_expected.clone(),
                    u.deviating_expected.clone(),
                    u.violated,
                )
            })
            .collect();
        assert_eq!(
            got,
            vec![
                (rat("0.15"), rat("0.15"), false),
                (rat("0.15"), rat("0"), false),
                (rat("0.15"), rat("0.15"), false),
            ]
        );
    }

    #[test]
    fn shill_bidding_pays_ex_post_but_not_in_expectation() {
        let rules = sp();
        let d = rules.domain().clone();
        let others = BidVector::new(vec![(Identity(1), rat("1"))]).unwrap();
        let shill = [StrategyScript::SellerShillBids {
            bids: vec![rat("0.9")],
        }];
        let r = check_ic(
            &rules,
            &Coalition::seller(),
            &shill,
            &IcSetting::ExPost { others },
            IcMode::Exact { bound: 1_000_000 },
        )
        .unwrap();
        assert!(r[0].violated);
        let dist = DiscreteDistribution::uniform(d.clone());
        let rules = SecondPrice::with_prior(&dist, 1).unwrap();
        let suite = standard_suite(&Coalition::seller(), &d, None).unwrap();
        let setting = IcSetting::Bayesian {
            dist,
            honest_count: 2,
        };
        let r = check_ic(
            &rules,
            &Coalition::seller(),
            &suite,
            &setting,
            IcMode::Exact { bound: 1_000_000 },
        )
        .unwrap();
        assert!(r.iter().all(|u| !u.violated), "{r:?}");
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let rules = sp();
        let c = Coalition::buyer(Identity(1), rat("0.4"));
        let others =
            BidVector::new(vec![(Identity(2), rat("0.4")), (Identity(3), rat("0.4"))]).unwrap();
        let scripts = [replace("0.3"), replace("0.5")];
        let setting = IcSetting::ExPost { others };
        let exact = check_ic(
            &rules,
            &c,
            &scripts,
            &setting,
            IcMode::Exact { bound: 1000 },
        )
        .unwrap();
        let mc = check_ic(
            &rules,
            &c,
            &scripts,
            &setting,
            IcMode::MonteCarlo {
                samples: 400,
                seed: 3,
            },
        )
        .unwrap();
        for (e, m) in exact.iter().zip(&mc) {
            let exact_gain = (&e.deviating_expected - &e.honest_expected).to_f64();
            let mc_gain = (&m.deviating_expected - &m.honest_expected).to_f64();
            assert!(
                (exact_gain - mc_gain).abs() <= m.half_width + 1e-9,
                "{e:?} {m:?}"
            );
            assert!(!m.violated);
        }
    }

    #[test]
    fn bayesian_monte_carlo_runs() {
        let d = ValueDomain::grid(5).unwrap();
        let dist = DiscreteDistribution::uniform(d.clone());
        let rules = SecondPrice::with_prior(&dist, 1).unwrap();
        let c = Coalition::platform_seller();
        let suite = standard_suite(&c, &d, Some(&dist)).unwrap();
        let setting = IcSetting::Bayesian {
            dist,
            honest_count: 2,
        };
        let exact = check_ic(&rules, &c, &suite, &setting, IcMode::Exact { bound: 1000 }).unwrap();
        assert!(exact.iter().all(|u| !u.violated), "{exact:?}");
        let mc = check_ic(
            &rules,
            &c,
            &suite,
            &setting,
            IcMode::MonteCarlo {
                samples: 200,
                seed: 9,
            },
        )
        .unwrap();
        assert_eq!(mc.len(), suite.len());
        assert!(mc
            .iter()
            .all(|u| u.samples >= 200 && u.mode == ReportMode::MonteCarlo));
    }
}
