use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::{IcMode, IncentiveError, ReportMode, Z_99};
use crate::domain::{DiscreteDistribution, ValueDomain};
use crate::mechanism::for_each_profile;
use crate::mechanism::{AscendingAuction, AuctionRules, BidVector, CoinString, SecondPrice};
use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlatformRevenueReport {
    pub rules: String,
    pub n: usize,
    pub k: usize,
    pub tick: Rational,
    /// Exact expectation, or the sample mean.
    pub expected: Rational,
    /// `tick · k · (ln n + 3)`.
    pub bound: f64,
    pub mode: ReportMode,
    pub samples: usize,
    pub half_width: f64,
    /// No realization gave the platform anything.
    pub always_zero: bool,
    pub within_bound: bool,
}

fn weighted_index(dist: &DiscreteDistribution) -> WeightedIndex<f64> {
    let w: Vec<f64> = dist.pmf().iter().map(Rational::to_f64).collect();
    WeightedIndex::new(w).expect("pmf has positive mass")
}

/// Calls `visit(weight, values)` for each profile of `𝒟ⁿ`, exhaustively or
/// by seeded sampling with weight `1/samples`.
fn for_each_row<F>(
    dist: &DiscreteDistribution,
    n: usize,
    mode: IcMode,
    mut visit: F,
) -> Result<(), IncentiveError>
where
    F: FnMut(&Rational, Vec<crate::rational::Rational>) -> Result<(), IncentiveError>,
{
    let domain = dist.domain();
    match mode {
        IcMode::Exact { bound } => {
            let mut err = None;
            for_each_profile(dist, n, bound, |w, idx| {
                if err.is_none() {
                    if let Err(e) = visit(w, idx.iter().map(|&i| domain.value(i).clone()).collect())
                    {
                        err = Some(e);
                    }
                }
                Ok(())
            })?;
            err.map_or(Ok(()), Err)
        }
        IcMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(IncentiveError::InvalidParameter(
                    "samples must be positive".into(),
                ));
            }
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let index = weighted_index(dist);
            let w = Rational::new(1, samples as i64);
            for _ in 0..samples {
                let values = (0..n)
                    .map(|_| domain.value(index.sample(&mut rng)).clone())
                    .collect();
                visit(&w, values)?;
            }
            Ok(())
        }
    }
}

/// Expected platform revenue under `𝒟ⁿ` against `tick · k · (ln n + 3)`.
/// Exact mode averages over tie-breaks too; sampling draws one coin per row.
pub fn platform_revenue_bound(
    rules: &dyn AuctionRules,
    dist: &DiscreteDistribution,
    n: usize,
    mode: IcMode,
) -> Result<PlatformRevenueReport, IncentiveError> {
    if n == 0 {
        return Err(IncentiveError::InvalidParameter(
            "n must be positive".into(),
        ));
    }
    let k = rules.capacity();
    let tick = dist.domain().tick();
    let bound = tick.to_f64() * k as f64 * ((n as f64).ln() + 3.0);
    let mut expected = Rational::zero();
    let mut always_zero = true;
    let (mut sum, mut sq, mut count) = (0.0f64, 0.0f64, 0usize);
    let mut coin_rng = ChaCha20Rng::seed_from_u64(match mode {
        IcMode::MonteCarlo { seed, .. } => seed ^ 0x5a5a,
        IcMode::Exact { .. } => 0,
    });
    for_each_row(dist, n, mode, |w, values| {
        let bids = BidVector::from_values(&values);
        let revenue = match mode {
            IcMode::Exact { .. } => {
                let mut r = Rational::zero();
                for (p, o) in rules.outcome_distribution(&bids)? {
                    always_zero &= o.platform_revenue.is_zero();
                    r += &p * &o.platform_revenue;
                }
                r
            }
            IcMode::MonteCarlo { .. } => {
                let o = rules.run(&bids, &CoinString::random(128, &mut coin_rng))?;
                always_zero &= o.platform_revenue.is_zero();
                let x = o.platform_revenue.to_f64();
                sum += x;
                sq += x * x;
                count += 1;
                o.platform_revenue
            }
        };
        expected += w * &revenue;
        Ok(())
    })?;
    let (report_mode, half_width) = match mode {
        IcMode::Exact { .. } => (ReportMode::Exact, 0.0),
        IcMode::MonteCarlo { .. } => {
            let m = count as f64;
            let mean = sum / m;
            let var = if count > 1 {
                ((sq - m * mean * mean) / (m - 1.0)).max(0.0)
            } else {
                0.0
            };
            (ReportMode::MonteCarlo, Z_99 * (var / m).sqrt())
        }
    };
    Ok(PlatformRevenueReport {
        rules: rules.name().to_string(),
        n,
        k,
        within_bound: expected.to_f64() <= bound,
        tick,
        expected,
        bound,
        mode: report_mode,
        samples: count,
        half_width,
        always_zero,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RevenueRow {
    pub values: Vec<Rational>,
    pub probability: Rational,
    pub ascending: Rational,
    pub second_price: Rational,
    /// `Σ` of the `k` largest nonnegative virtual values.
    pub optimal: Rational,
    /// `|ascending − second_price| ≤ k · tick`.
    pub within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RevenueComparison {
    pub k: usize,
    pub n: usize,
    pub tick: Rational,
    pub sampled: bool,
    pub rows: Vec<RevenueRow>,
    pub expected_ascending: Rational,
    pub expected_second_price: Rational,
    pub expected_optimal: Rational,
}

impl RevenueComparison {
    /// Second-price expected revenue equals the virtual-surplus optimum.
    pub fn optimal_matches(&self) -> bool {
        self.expected_second_price == self.expected_optimal
    }

    pub fn all_within_bound(&self) -> bool {
        self.rows.iter().all(|r| r.within_bound)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "values",
            "probability",
            "ascending",
            "second_price",
            "optimal",
            "within_bound",
        ])
        .expect("in-memory write");
        let fmt = |v: &[Rational]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        for r in &self.rows {
            w.write_record([
                fmt(&r.values),
                r.probability.to_string(),
                r.ascending.to_string(),
                r.second_price.to_string(),
                r.optimal.to_string(),
                r.within_bound.to_string(),
            ])
            .expect("in-memory write");
        }
        w.write_record([
            "expected".to_string(),
            "1".to_string(),
            self.expected_ascending.to_string(),
            self.expected_second_price.to_string(),
            self.expected_optimal.to_string(),
            self.all_within_bound().to_string(),
        ])
        .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

/// Revenues of the ascending auction, second price and the virtual-surplus
/// optimum, both at the prior's reserve, per value profile and in expectation.
pub fn revenue_compare(
    dist: &DiscreteDistribution,
    k: usize,
    n: usize,
    mode: IcMode,
) -> Result<RevenueComparison, IncentiveError> {
    let sp = SecondPrice::with_prior(dist, k)?;
    let asc = AscendingAuction::with_prior(dist, k)?;
    let tick = dist.domain().tick();
    let slack = &tick * &Rational::from(k);
    let phi_plus: Vec<Rational> = (0..dist.domain().len())
        .map(|i| match dist.virtual_value(i) {
            Ok(v) if !v.is_negative() => v,
            _ => Rational::zero(),
        })
        .collect();
    let mut rows = Vec::new();
    let (mut e_asc, mut e_sp, mut e_opt) = (Rational::zero(), Rational::zero(), Rational::zero());
    for_each_row(dist, n, mode, |w, values| {
        let bids = BidVector::from_values(&values);
        let ascending = asc.expected_outcome(&bids)?.seller_revenue;
        let second_price = sp.expected_outcome(&bids)?.seller_revenue;
        let mut phis: Vec<&Rational> = values
            .iter()
            .map(|v| &phi_plus[dist.domain().index_of(v).expect("profile values are ticks")])
            .collect();
        phis.sort_by(|a, b| b.cmp(a));
        let optimal: Rational = phis.into_iter().take(k).sum();
        e_asc += w * &ascending;
        e_sp += w * &second_price;
        e_opt += w * &optimal;
        rows.push(RevenueRow {
            within_bound: (&ascending - &second_price).abs() <= slack,
            values,
            probability: w.clone(),
            ascending,
            second_price,
            optimal,
        });
        Ok(())
    })?;
    Ok(RevenueComparison {
        k,
        n,
        tick,
        sampled: matches!(mode, IcMode::MonteCarlo { .. }),
        rows,
        expected_ascending: e_asc,
        expected_second_price: e_sp,
        expected_optimal: e_opt,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TickLemmaReport {
    pub pairs_checked: usize,
    /// Pairs `(b, b′)` with `μ(b′) − μ(b) > tick · |x(b′) − x(b)|`.
    pub failures: Vec<(Rational, Rational)>,
}

impl TickLemmaReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks `μ(b′) − μ(b) ≤ tick · |x(b′) − x(b)|` over all tick pairs, after
/// confirming `x` is monotone and `p` satisfies the payment sandwich.
pub fn revenue_tick_lemma_check<X, P, M>(
    domain: &ValueDomain,
    x: X,
    p: P,
    mu: M,
) -> Result<TickLemmaReport, IncentiveError>
where
    X: Fn(&Rational) -> Rational,
    P: Fn(&Rational) -> Rational,
    M: Fn(&Rational) -> Rational,
{
    let ticks = domain.ticks();
    let xs: Vec<Rational> = ticks.iter().map(&x).collect();
    let ps: Vec<Rational> = ticks.iter().map(&p).collect();
    let ms: Vec<Rational> = ticks.iter().map(&mu).collect();
    let tick = domain.tick();
    let mut report = TickLemmaReport {
        pairs_checked: 0,
        failures: Vec::new(),
    };
    for lo in 0..ticks.len() {
        for hi in lo + 1..ticks.len() {
            let dx = &xs[hi] - &xs[lo];
            let dp = &ps[hi] - &ps[lo];
            let hypothesis = if dx.is_negative() {
                Some("allocation decreases")
            } else if &ticks[lo] * &dx > dp || dp > &ticks[hi] * &dx {
                Some("payment sandwich fails")
            } else {
                None
            };
            if let Some(reason) = hypothesis {
                return Err(IncentiveError::HypothesisViolated {
                    low: ticks[lo].clone(),
                    high: ticks[hi].clone(),
                    reason: reason.into(),
                });
            }
            report.pairs_checked += 1;
            if &ms[hi] - &ms[lo] > &tick * &dx.abs() {
                report.failures.push((ticks[lo].clone(), ticks[hi].clone()));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::incentives::TickSkimmingFixture;
    use crate::rational::rat;

    fn three() -> ValueDomain {
        ValueDomain::new(vec![rat("0"), rat("0.5"), rat("1")]).unwrap()
    }

    const EXACT: IcMode = IcMode::Exact { bound: 1_000_000 };

    #[test]
    fn single_uniform_buyer() {
        let dist = DiscreteDistribution::uniform(three());
        let cmp = revenue_compare(&dist, 1, 1, EXACT).unwrap();
        assert_eq!(cmp.expected_optimal, rat("1/3"));
        assert_eq!(cmp.expected_second_price, rat("1/3"));
        assert!(cmp.optimal_matches());
        let csv = cmp.to_csv();
        assert!(csv.starts_with("values,probability,ascending,second_price,optimal,within_bound\n"));
        // a value equal to the opening price drops in the first round
        assert!(csv.contains("1/2,1/3,0,1/2,0,true"), "{csv}");
        assert!(csv.contains("expected,1,1/6,1/3,1/3,true"), "{csv}");
    }

    #[test]
    fn point_mass_at_zero() {
        let dist = DiscreteDistribution::new(three(), vec![rat("1"), rat("0"), rat("0")]).unwrap();
        let cmp = revenue_compare(&dist, 1, 2, EXACT).unwrap();
        assert_eq!(cmp.rows.len(), 1);
        assert!(cmp.rows[0].ascending.is_zero() && cmp.rows[0].second_price.is_zero());
        assert!(cmp.expected_optimal.is_zero());
    }

    #[test]
    fn shipped_rules_leave_platform_nothing() {
        let dist = DiscreteDistribution::uniform(ValueDomain::grid(6).unwrap());
        let sp = SecondPrice::with_prior(&dist, 1).unwrap();
        let r = platform_revenue_bound(&sp, &dist, 3, EXACT).unwrap();
        assert!(r.expected.is_zero() && r.always_zero && r.within_bound);
        let asc = AscendingAuction::with_prior(&dist, 2).unwrap();
        assert!(
            platform_revenue_bound(&asc, &dist, 3, EXACT)
                .unwrap()
                .always_zero
        );
    }

    #[test]
    fn skimming_fixture_stays_under_the_bound() {
        let dist = DiscreteDistribution::uniform(ValueDomain::grid(11).unwrap());
        let f =
            TickSkimmingFixture::new(dist.domain().clone(), dist.reserve().unwrap(), 1).unwrap();
        let r = platform_revenue_bound(&f, &dist, 4, EXACT).unwrap();
        assert!(!r.always_zero);
        assert!(r.expected > Rational::zero() && r.expected <= rat("0.05"));
        assert!(r.within_bound);
        let mc = platform_revenue_bound(
            &f,
            &dist,
            4,
            IcMode::MonteCarlo {
                samples: 500,
                seed: 1,
            },
        )
        .unwrap();
        assert!((mc.expected.to_f64() - r.expected.to_f64()).abs() <= mc.half_width + 1e-12);
    }

    #[test]
    fn tick_lemma_fixtures() {
        let d = three();
        let x = |b: &Rational| {
            if *b >= rat("0.5") {
                Rational::one()
            } else {
                Rational::zero()
            }
        };
        let p = |b: &Rational| {
            if *b >= rat("0.5") {
                rat("0.5")
            } else {
                Rational::zero()
            }
        };
        // μ rises by exactly one tick where x jumps
        let at_bound = revenue_tick_lemma_check(&d, x, p, |b| {
            if *b >= rat("0.5") {
                rat("0.5")
            } else {
                Rational::zero()
            }
        })
        .unwrap();
        assert!(at_bound.passed());
        let too_much = revenue_tick_lemma_check(&d, x, p, |b| {
            if *b >= rat("0.5") {
                rat("1")
            } else {
                Rational::zero()
            }
        })
        .unwrap();
        assert_eq!(
            too_much.failures,
            vec![(rat("0"), rat("0.5")), (rat("0"), rat("1"))]
        );
        let bad =
            revenue_tick_lemma_check(&d, |b| Rational::one() - b.clone(), p, |_| Rational::zero());
        assert!(matches!(
            bad,
            Err(IncentiveError::HypothesisViolated { .. })
        ));
    }
}
