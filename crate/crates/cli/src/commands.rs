use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use sealbid::crypto::{
    nitc_com, nitc_fdec, nitc_gen, NitcCrs, DEFAULT_MODULUS_BITS, TEST_PROFILE_BITS,
};
use sealbid::domain::load_document;
use sealbid::incentives::{
    check_ic, standard_suite, Coalition, FirstPriceFixture, IcMode, IcSetting, IncentiveError,
    UtilityReport,
};
use sealbid::mechanism::{AscendingAuction, SecondPrice, DEFAULT_ENUMERATION_BOUND};
use sealbid::netproto::{run_protocol, AdversaryScript, MechanismKind, NetError, ProtocolConfig};
use sealbid::trace::ExecutionTrace;
use sealbid::{AuctionRules, BidVector, DiscreteDistribution, Identity, Rational, ValueDomain};

use crate::options::{
    BenchArgs, Cli, Command, DomainArgs, FileConfig, RevenueArgs, RunArgs, SweepArgs,
};
use crate::CliError;

struct Globals {
    seed: Option<u64>,
    out: Option<PathBuf>,
    test_profile: bool,
}

impl Globals {
    fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| {
            CliError::Config("this experiment is randomized and needs --seed".into())
        })
    }
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let globals = Globals {
        seed: cli.seed.or(file.seed),
        out: cli.out.clone().or_else(|| file.out.clone()),
        test_profile: cli.test_profile || file.test_profile.unwrap_or(false),
    };
    match cli.command {
        Command::Run(a) => cmd_run(a, &file, &globals),
        Command::IcSweep(a) => cmd_ic_sweep(a, &file, &globals),
        Command::Revenue(a) => cmd_revenue(a, &file, &globals),
        Command::BenchFdec(a) => cmd_bench_fdec(a, &file, &globals),
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn parse_list(s: &str) -> Result<Vec<Rational>, CliError> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse::<Rational>().map_err(config_err))
        .collect()
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Prior over the configured domain.
fn distribution(d: &DomainArgs) -> Result<DiscreteDistribution, CliError> {
    if let Some(path) = &d.dist {
        if !path.exists() {
            return Err(CliError::Config(format!(
                "{} does not exist",
                path.display()
            )));
        }
        return load_document(path).map_err(config_err);
    }
    let domain = match &d.domain {
        Some(list) => ValueDomain::new(parse_list(list)?).map_err(config_err)?,
        None => ValueDomain::grid(d.ticks.unwrap_or(11)).map_err(config_err)?,
    };
    match &d.pmf {
        Some(pmf) => DiscreteDistribution::new(domain, parse_list(pmf)?).map_err(config_err),
        None => Ok(DiscreteDistribution::uniform(domain)),
    }
}

fn reserve(d: &DomainArgs, dist: &DiscreteDistribution) -> Result<Rational, CliError> {
    match &d.reserve {
        Some(r) => r.parse().map_err(config_err),
        None => dist.reserve().map_err(config_err),
    }
}

fn net_err(e: NetError) -> CliError {
    match e {
        NetError::ConfigInvalid(_) | NetError::AdversaryInvalid(_) | NetError::LengthMismatch => {
            config_err(e)
        }
        other => CliError::Internal(other.to_string()),
    }
}

fn cmd_run(a: RunArgs, file: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let d = a.domain.merge(file);
    let seed = g.seed()?;
    let dist = distribution(&d)?;
    let mechanism = d.mechanism.as_deref().unwrap_or("second-price");
    let kind = MechanismKind::parse(mechanism)
        .ok_or_else(|| config_err(format!("unknown mechanism {mechanism}")))?;
    let mut config =
        ProtocolConfig::new(dist.domain().clone(), reserve(&d, &dist)?, d.k.unwrap_or(1))
            .with_mechanism(kind)
            .with_seed(seed);
    if g.test_profile {
        config = config.test_profile();
    }
    if let Some(bits) = a.coin_bits.or(file.coin_bits) {
        config.coin_bits = bits;
    }
    let bids = a
        .bids
        .or_else(|| file.bids.clone())
        .ok_or_else(|| config_err("--bids is required"))?;
    let values = BidVector::from_values(&parse_list(&bids)?);
    let adversary = match a.adversary.or_else(|| file.adversary.clone()).as_deref() {
        None | Some("none") => None,
        Some(name) => Some(AdversaryScript::from_name(name, &config).ok_or_else(|| {
            config_err(format!(
                "unknown adversary {name}; expected one of {}",
                AdversaryScript::NAMES.join(", ")
            ))
        })?),
    };
    let trace = run_protocol(&config, &values, adversary.as_ref()).map_err(net_err)?;
    let full = a.full || file.full.unwrap_or(false);
    if let Some(out) = &g.out {
        emit(Some(out), &trace.to_jsonl(full))?;
    }
    print!("{}", summary(kind, adversary.as_ref(), &trace));
    Ok(())
}

fn summary(
    kind: MechanismKind,
    adversary: Option<&AdversaryScript>,
    trace: &ExecutionTrace,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mechanism: {}", kind.label());
    let _ = writeln!(
        s,
        "adversary: {}",
        adversary.map_or("none".to_string(), |a| a.name())
    );
    let _ = writeln!(s, "safe: {}", trace.is_safe());
    match &trace.outcome {
        Some(o) => {
            let _ = writeln!(s, "items sold: {}", o.items_sold);
            for (id, &x) in &o.allocations {
                if x == 1 {
                    let _ = writeln!(s, "  buyer:{id} wins, pays {}", o.payment(*id).to_decimal());
                } else {
                    let _ = writeln!(s, "  buyer:{id} loses");
                }
            }
            let _ = writeln!(s, "seller revenue: {}", o.seller_revenue.to_decimal());
            let _ = writeln!(s, "platform revenue: {}", o.platform_revenue.to_decimal());
        }
        None => {
            let _ = writeln!(s, "outcome: none");
        }
    }
    let _ = writeln!(s, "decisions:");
    for (p, d) in &trace.decisions {
        let tag = if trace.honest.contains(p) {
            ""
        } else {
            " [corrupted]"
        };
        match d {
            sealbid::Decision::Accept => {
                let _ = writeln!(s, "  {p}: accept{tag}");
            }
            sealbid::Decision::Reject(r) => {
                let _ = writeln!(s, "  {p}: reject ({r}){tag}");
            }
        }
    }
    s
}

fn sweep_rules(
    d: &DomainArgs,
    dist: &DiscreteDistribution,
) -> Result<(String, Box<dyn AuctionRules>), CliError> {
    let name = d.mechanism.clone().unwrap_or_else(|| "second-price".into());
    let (domain, reserve, k) = (dist.domain().clone(), reserve(d, dist)?, d.k.unwrap_or(1));
    let rules: Box<dyn AuctionRules> = match name.as_str() {
        "second-price" => Box::new(SecondPrice::new(domain, reserve, k).map_err(config_err)?),
        "ascending" => Box::new(AscendingAuction::new(domain, reserve, k).map_err(config_err)?),
        "first-price" => Box::new(FirstPriceFixture::new(domain, reserve, k).map_err(config_err)?),
        other => return Err(config_err(format!("unknown mechanism {other}"))),
    };
    Ok((name, rules))
}

fn coalitions(
    which: &str,
    domain: &ValueDomain,
    ex_post: bool,
) -> Result<Vec<Coalition>, CliError> {
    let member = Identity(1);
    let per_value = |f: &dyn Fn(Rational) -> Coalition| {
        domain.ticks().iter().cloned().map(f).collect::<Vec<_>>()
    };
    let buyers = || per_value(&|v| Coalition::buyer(member, v));
    let platform_buyer = || per_value(&|v| Coalition::platform_buyers([(member, v)].into()));
    Ok(match which {
        "buyer" => buyers(),
        "seller" => vec![Coalition::seller()],
        "platform" => vec![Coalition::platform()],
        "platform-seller" => vec![Coalition::platform_seller()],
        "platform-buyer" => platform_buyer(),
        "all" => {
            let mut all = buyers();
            all.push(Coalition::platform());
            // seller-side properties are Bayesian claims
            if !ex_post {
                all.push(Coalition::seller());
                all.push(Coalition::platform_seller());
            }
            all.extend(platform_buyer());
            all
        }
        other => return Err(config_err(format!("unknown coalition {other}"))),
    })
}

fn incentive_err(e: IncentiveError) -> CliError {
    match e {
        IncentiveError::Mechanism(m) => CliError::Internal(m.to_string()),
        other => config_err(other),
    }
}

/// Every honest profile of `count` buyers with identities after `first`.
fn all_profiles(
    domain: &ValueDomain,
    count: usize,
    first: u64,
) -> Result<Vec<BidVector>, CliError> {
    let size = (domain.len() as u128)
        .checked_pow(count as u32)
        .unwrap_or(u128::MAX);
    if size > 100_000 {
        return Err(config_err(format!(
            "{size} ex-post profiles; pass --others or shrink the instance"
        )));
    }
    let mut out = vec![Vec::new()];
    for _ in 0..count {
        out = out
            .into_iter()
            .flat_map(|p: Vec<Rational>| {
                domain.ticks().iter().map(move |t| {
                    let mut q = p.clone();
                    q.push(t.clone());
                    q
                })
            })
            .collect();
    }
    out.into_iter()
        .map(|vals| {
            let entries = vals
                .into_iter()
                .enumerate()
                .map(|(i, v)| (Identity(first + i as u64), v))
                .collect();
            BidVector::new(entries).map_err(config_err)
        })
        .collect()
}

fn cmd_ic_sweep(a: SweepArgs, file: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let d = a.domain.merge(file);
    let dist = distribution(&d)?;
    let (name, rules) = sweep_rules(&d, &dist)?;
    let n = a.n.or(file.n).unwrap_or(2);
    let setting = a
        .setting
        .or_else(|| file.setting.clone())
        .unwrap_or_else(|| "bayesian".into());
    let ex_post = match setting.as_str() {
        "bayesian" => false,
        "ex-post" => true,
        other => return Err(config_err(format!("unknown setting {other}"))),
    };
    let mode_name = a
        .mode
        .or_else(|| file.mode.clone())
        .unwrap_or_else(|| "exact".into());
    let mode = match mode_name.as_str() {
        "exact" => IcMode::Exact {
            bound: DEFAULT_ENUMERATION_BOUND,
        },
        "monte-carlo" => IcMode::MonteCarlo {
            samples: a.samples.or(file.samples).unwrap_or(2000),
            seed: g.seed()?,
        },
        other => return Err(config_err(format!("unknown mode {other}"))),
    };
    let scripts_sel = a
        .scripts
        .or_else(|| file.scripts.clone())
        .unwrap_or_else(|| "standard".into());
    if !matches!(scripts_sel.as_str(), "standard" | "none") {
        return Err(config_err(format!("unknown script set {scripts_sel}")));
    }
    let which = a
        .coalition
        .or_else(|| file.coalition.clone())
        .unwrap_or_else(|| "all".into());
    let others = a.others.or_else(|| file.others.clone());

    let mut checks = Vec::new();
    let mut violations = 0usize;
    if scripts_sel == "standard" {
        for coalition in coalitions(&which, dist.domain(), ex_post)? {
            let members = coalition.true_values.len();
            let honest = n
                .checked_sub(members)
                .ok_or_else(|| config_err(format!("n = {n} is smaller than the coalition")))?;
            let suite =
                standard_suite(&coalition, dist.domain(), Some(&dist)).map_err(incentive_err)?;
            let settings: Vec<(Option<BidVector>, IcSetting)> = if ex_post {
                let profiles = match &others {
                    Some(list) => {
                        let vals = parse_list(list)?;
                        let entries = vals
                            .into_iter()
                            .enumerate()
                            .map(|(i, v)| (Identity(2 + i as u64), v))
                            .collect();
                        vec![BidVector::new(entries).map_err(config_err)?]
                    }
                    None => all_profiles(dist.domain(), honest, 2)?,
                };
                profiles
                    .into_iter()
                    .map(|p| (Some(p.clone()), IcSetting::ExPost { others: p }))
                    .collect()
            } else {
                vec![(
                    None,
                    IcSetting::Bayesian {
                        dist: dist.clone(),
                        honest_count: honest,
                    },
                )]
            };
            for (profile, setting) in settings {
                let reports: Vec<UtilityReport> =
                    check_ic(rules.as_ref(), &coalition, &suite, &setting, mode)
                        .map_err(incentive_err)?;
                violations += reports.iter().filter(|r| r.violated).count();
                let values: BTreeMap<String, String> = coalition
                    .true_values
                    .iter()
                    .map(|(id, v)| (id.to_string(), v.to_string()))
                    .collect();
                checks.push(json!({
                    "coalition": coalition.to_string(),
                    "values": values,
                    "others": profile.map(|p| p.entries().iter().map(|b| b.value.to_string()).collect::<Vec<_>>()),
                    "reports": reports,
                }));
            }
        }
    }
    let report = json!({
        "mechanism": name,
        "setting": setting,
        "n": n,
        "k": rules.capacity(),
        "ticks": dist.domain().ticks().iter().map(|t| t.to_string()).collect::<Vec<_>>(),
        "mode": mode_name,
        "checks": checks,
        "violations": violations,
        "verdict": if violations == 0 { "no violation found".to_string() } else { format!("{violations} violations found") },
    });
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Internal(e.to_string()))?
        + "\n";
    emit(g.out.as_deref(), &text)
}

fn cmd_revenue(a: RevenueArgs, file: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let d = a.domain.merge(file);
    let dist = distribution(&d)?;
    let mode = match a
        .mode
        .or_else(|| file.mode.clone())
        .as_deref()
        .unwrap_or("exact")
    {
        "exact" => IcMode::Exact {
            bound: DEFAULT_ENUMERATION_BOUND,
        },
        "monte-carlo" => IcMode::MonteCarlo {
            samples: a.samples.or(file.samples).unwrap_or(2000),
            seed: g.seed()?,
        },
        other => return Err(config_err(format!("unknown mode {other}"))),
    };
    let n = a.n.or(file.n).unwrap_or(1);
    let table = sealbid::incentives::revenue_compare(&dist, d.k.unwrap_or(1), n, mode)
        .map_err(incentive_err)?;
    emit(g.out.as_deref(), &table.to_csv())
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}

fn cmd_bench_fdec(a: BenchArgs, file: &FileConfig, g: &Globals) -> Result<(), CliError> {
    let seed = g.seed.unwrap_or(0);
    let logs: Vec<u32> = a
        .t_log2
        .or_else(|| file.t_log2.clone())
        .unwrap_or_else(|| "10,14,18".into())
        .split(',')
        .map(|x| x.trim().parse::<u32>().map_err(config_err))
        .collect::<Result<_, _>>()?;
    if logs.is_empty() || logs.iter().any(|&l| l > 40) {
        return Err(config_err("difficulty exponents must lie in 0..=40"));
    }
    let repeats = a.repeats.or(file.repeats).unwrap_or(3).max(1);
    let default_bits = if g.test_profile {
        TEST_PROFILE_BITS
    } else {
        DEFAULT_MODULUS_BITS
    };
    let bits = a.bits.or(file.bits).unwrap_or(default_bits);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let base = nitc_gen(bits, 1, &mut rng).map_err(config_err)?;
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for &l in &logs {
        let t = 1u64 << l;
        let crs =
            NitcCrs::from_public(base.modulus.clone(), base.base.clone(), t).map_err(config_err)?;
        let mut runs = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let msg = format!("bench {l} {r}").into_bytes();
            let (cm, proof, _) =
                nitc_com(&crs, &msg, &mut rng).map_err(|e| CliError::Internal(e.to_string()))?;
            let start = Instant::now();
            let opened =
                nitc_fdec(&crs, &cm, &proof).map_err(|e| CliError::Internal(e.to_string()))?;
            runs.push(start.elapsed().as_secs_f64() * 1e3);
            if opened.message != msg {
                return Err(CliError::Internal(
                    "forced decryption returned a different message".into(),
                ));
            }
        }
        let m = median(&mut runs.clone());
        medians.push(m);
        rows.push(json!({ "log2_t": l, "t": t, "runs_ms": runs, "median_ms": m }));
    }
    let ratio = medians.last().unwrap() / medians.first().unwrap().max(1e-9);
    let report = json!({
        "modulus_bits": bits,
        "repeats": repeats,
        "rows": rows,
        "ratio_last_to_first": ratio,
    });
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Internal(e.to_string()))?
        + "\n";
    emit(g.out.as_deref(), &text)
}
