use super::adversary::Plan;
use super::roles::{Action, Bidder, Env, Envelope, Platform};
use super::{setup, AdversaryScript, NetError, ProtocolConfig};
use crate::crypto::{RelationContext, TransparentAok};
use crate::mechanism::{BidVector, CoinString};
use crate::trace::{Decision, ExecutionTrace, Party, Recipient};

/// Knobs for analysis runs.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Replaces the honest platform's coin `r_P`.
    pub platform_coin: Option<CoinString>,
}

pub fn run_protocol(
    config: &ProtocolConfig,
    values: &BidVector,
    adversary: Option<&AdversaryScript>,
) -> Result<ExecutionTrace, NetError> {
    run_protocol_with(config, values, adversary, &RunOptions::default())
}

pub fn run_protocol_with(
    config: &ProtocolConfig,
    values: &BidVector,
    adversary: Option<&AdversaryScript>,
    options: &RunOptions,
) -> Result<ExecutionTrace, NetError> {
    config.validate()?;
    for b in values.entries() {
        if b.bidder.is_seller() {
            return Err(NetError::ConfigInvalid(
                "identity 0 is reserved for the seller".into(),
            ));
        }
        if !config.domain.contains(&b.value) {
            return Err(NetError::ConfigInvalid(format!(
                "value {} of {} is not a tick",
                b.value, b.bidder
            )));
        }
    }
    if let Some(c) = &options.platform_coin {
        if c.len_bits() != config.coin_bits {
            return Err(NetError::LengthMismatch);
        }
    }
    let plan = match adversary {
        Some(a) => a.plan(values)?,
        None => Plan::default(),
    };
    if let Some(v) = plan
        .fake_bids
        .iter()
        .chain(&plan.shill_bids)
        .find(|v| !config.domain.contains(v))
    {
        return Err(NetError::AdversaryInvalid(format!(
            "injected value {v} is not a tick"
        )));
    }

    let crs = setup(config)?;
    let rules = config.rules()?;
    let ctx = RelationContext {
        crs: &crs,
        rules: rules.as_ref(),
        coin_bytes: config.coin_bytes(),
    };
    let mut bidders = vec![Bidder::seller(config.seed, &plan)];
    for b in values.entries() {
        bidders.push(Bidder::buyer(b.bidder, b.value.clone(), config.seed, &plan));
    }
    let players: Vec<Party> = bidders.iter().map(|b| b.party).collect();
    let env = Env::new(config, &crs, TransparentAok::new(ctx), players);
    let mut platform = Platform::new(config.seed, &plan, options.platform_coin.clone());

    let mut trace = ExecutionTrace::default();
    if let Some(a) = adversary {
        trace.notes.push(format!("adversary: {a}"));
    }
    let mut pending: Vec<Envelope> = Vec::new();
    let last = config.deadlines.t4;
    for round in 1..=last + 1 {
        let delivered = std::mem::take(&mut pending);
        let inbox =
            |p: Party| -> Vec<&Envelope> { delivered.iter().filter(|e| e.to == p).collect() };
        let mut actions: Vec<(Party, Action)> = Vec::new();
        if round <= last {
            actions.extend(
                platform
                    .act(round, &inbox(Party::Platform), &env)
                    .into_iter()
                    .map(|a| (Party::Platform, a)),
            );
        }
        for b in &mut bidders {
            let acts = b.act(round, &inbox(b.party), &env);
            actions.extend(acts.into_iter().map(|a| (b.party, a)));
        }
        for (from, action) in actions {
            match action {
                Action::Send(to, message) => {
                    let payload = message.to_bytes(&env.aok, &crs);
                    trace.record(round, from, Recipient::To(to), message.step(), payload);
                    pending.push(Envelope { from, to, message });
                }
                Action::Post(payload) => {
                    trace.record(
                        round,
                        from,
                        Recipient::Broadcast,
                        "chain-post",
                        payload.clone(),
                    );
                    trace.chain.post(round, from, payload);
                }
            }
        }
    }

    let decide_round = last + 1;
    for b in &bidders {
        let d = b.decide(trace.chain.visible_at(decide_round));
        trace.decide(b.party, d);
        if let Some(out) = &b.received {
            trace.private_outcomes.insert(b.party, out.clone());
        }
    }
    trace.decide(
        Party::Platform,
        if platform.posted_bottom() {
            Decision::Reject("posted bottom".into())
        } else {
            Decision::Accept
        },
    );
    trace.honest = bidders
        .iter()
        .map(|b| b.party)
        .chain(std::iter::once(Party::Platform))
        .filter(|p| !plan.corrupted.contains(p))
        .collect();
    trace.outcome = platform.outcome.take();
    trace.joint_coin = platform.joint_coin.take();
    trace.notes.append(&mut platform.notes);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ValueDomain;
    use crate::mechanism::{Identity, PrivateOutcome};
    use crate::rational::rat;

    fn config(seed: u64) -> ProtocolConfig {
        ProtocolConfig::new(ValueDomain::grid(11).unwrap(), rat("0.2"), 1)
            .test_profile()
            .with_seed(seed)
    }

    fn values(v: &[&str]) -> BidVector {
        BidVector::from_values(&v.iter().map(|s| rat(s)).collect::<Vec<_>>())
    }

    #[test]
    fn honest_run_accepts_and_charges_the_blend() {
        let trace = run_protocol(&config(7), &values(&["0.5", "0.3"]), None).unwrap();
        assert!(trace.is_safe(), "{:?}", trace.decisions);
        let out = trace.outcome.as_ref().unwrap();
        assert!(out.allocated(Identity(1)));
        assert_eq!(out.payment(Identity(1)), rat("0.35"));
        assert!(out.platform_revenue.is_zero());
        assert_eq!(
            trace.private_outcomes[&Party::Buyer(Identity(1))],
            PrivateOutcome::Buyer {
                allocated: true,
                payment: rat("0.35")
            }
        );
        assert_eq!(trace.chain.entries().len(), 1);
    }

    #[test]
    fn same_seed_gives_identical_traces() {
        let a = run_protocol(&config(3), &values(&["0.5", "0.3", "0.9"]), None).unwrap();
        let b = run_protocol(&config(3), &values(&["0.5", "0.3", "0.9"]), None).unwrap();
        assert_eq!(a.to_jsonl(true), b.to_jsonl(true));
        let c = run_protocol(&config(4), &values(&["0.5", "0.3", "0.9"]), None).unwrap();
        assert_ne!(a.to_jsonl(true), c.to_jsonl(true));
    }

    #[test]
    fn withheld_opening_is_forced_and_stays_safe() {
        let adv = AdversaryScript::WithholdOpening { buyer: None };
        let trace = run_protocol(&config(7), &values(&["0.5", "0.3"]), Some(&adv)).unwrap();
        assert!(trace.is_safe(), "{:?}", trace.decisions);
        assert!(!trace.honest.contains(&Party::Buyer(Identity(2))));
        // the forced bid still counts
        assert_eq!(trace.outcome.unwrap().payment(Identity(1)), rat("0.35"));
        assert!(!trace
            .private_outcomes
            .contains_key(&Party::Buyer(Identity(2))));
    }

    #[test]
    fn platform_attacks_that_break_outcomes_are_detected() {
        let vals = values(&["0.5", "0.3"]);
        for name in [
            "mutate-outcome",
            "mutate-delivered-outcome",
            "digest-equivocation",
            "drop-tuple",
        ] {
            let adv = AdversaryScript::from_name(name, &config(1)).unwrap();
            let trace = run_protocol(&config(11), &vals, Some(&adv)).unwrap();
            assert!(!trace.is_safe(), "{name} went unnoticed");
            assert!(
                !trace
                    .decision(Party::Buyer(Identity(1)))
                    .unwrap()
                    .is_accept(),
                "{name}: victim accepted"
            );
        }
    }

    #[test]
    fn recommitted_mutation_fails_everyone() {
        let adv = AdversaryScript::from_name("mutate-outcome", &config(1)).unwrap();
        let trace = run_protocol(&config(5), &values(&["0.5", "0.3"]), Some(&adv)).unwrap();
        for p in &trace.honest {
            if *p != Party::Platform {
                assert!(!trace.decision(*p).unwrap().is_accept());
            }
        }
    }

    #[test]
    fn benign_deviations_keep_the_run_safe() {
        let vals = values(&["0.5", "0.3", "0.7"]);
        for name in ["fake-bids", "garbage-commitment", "seller-shill"] {
            let adv = AdversaryScript::from_name(name, &config(1)).unwrap();
            let trace = run_protocol(&config(13), &vals, Some(&adv)).unwrap();
            assert!(trace.is_safe(), "{name}: {:?}", trace.decisions);
            trace.outcome.as_ref().unwrap().validate().unwrap();
        }
    }

    #[test]
    fn garbage_commitment_is_filtered() {
        let adv = AdversaryScript::GarbageCommitment {
            buyer: Some(Identity(2)),
        };
        let trace = run_protocol(&config(2), &values(&["0.3", "0.9"]), Some(&adv)).unwrap();
        let out = trace.outcome.unwrap();
        assert!(!out.allocations.contains_key(&Identity(2)));
        assert!(out.allocated(Identity(1)));
        assert_eq!(out.payment(Identity(1)), rat("0.2"));
    }

    #[test]
    fn fake_bids_raise_the_price() {
        let adv = AdversaryScript::FakeBidInjection {
            bids: vec![rat("0.6")],
        };
        let trace = run_protocol(&config(2), &values(&["0.8"]), Some(&adv)).unwrap();
        assert!(trace.is_safe());
        assert_eq!(trace.outcome.unwrap().payment(Identity(1)), rat("0.65"));
    }

    #[test]
    fn rejects_bad_inputs() {
        let bad = BidVector::new(vec![(Identity(1), rat("0.55"))]).unwrap();
        assert!(matches!(
            run_protocol(&config(1), &bad, None),
            Err(NetError::ConfigInvalid(_))
        ));
        let opts = RunOptions {
            platform_coin: Some(CoinString::zeros(8)),
        };
        assert!(matches!(
            run_protocol_with(&config(1), &values(&["0.5"]), None, &opts),
            Err(NetError::LengthMismatch)
        ));
    }

    #[test]
    fn ascending_rules_run_inside_the_protocol() {
        let cfg = config(9).with_mechanism(super::super::MechanismKind::Ascending);
        let trace = run_protocol(&cfg, &values(&["0.5", "0.3"]), None).unwrap();
        assert!(trace.is_safe());
        let out = trace.outcome.unwrap();
        assert!(out.allocated(Identity(1)));
        assert_eq!(out.payment(Identity(1)), rat("0.3"));
    }
}
