use std::collections::BTreeMap;
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use sealbid::crypto::rs::{codeword_len, guaranteed_threshold};
use sealbid::crypto::{
    com_vf, dec_vf, fdec_vf, nitc_com, nitc_fdec, rs_encode, rs_recons, vc_digest, vc_open, vc_vf,
    NitcCrs, FIELD_MODULUS,
};
use sealbid::mechanism::{AscendingAuction, SecondPrice};
use sealbid::netproto::{setup, ProtocolConfig};
use sealbid::{rat, AuctionRules, BidVector, CoinString, Rational, ValueDomain};

fn crs() -> &'static NitcCrs {
    static CRS: OnceLock<NitcCrs> = OnceLock::new();
    CRS.get_or_init(|| {
        let config = ProtocolConfig::new(ValueDomain::grid(2).unwrap(), rat("0"), 1).test_profile();
        (*setup(&config).unwrap()).clone()
    })
}

fn small_rational() -> impl Strategy<Value = Rational> {
    (-1000i64..1000, 1i64..200).prop_map(|(n, d)| Rational::new(n, d))
}

fn instance() -> impl Strategy<Value = (usize, usize, usize, Vec<usize>, [u8; 16])> {
    (2usize..=11).prop_flat_map(|t| {
        (
            Just(t),
            0..t,
            1usize..=3,
            proptest::collection::vec(0..t, 0..=7),
            any::<[u8; 16]>(),
        )
    })
}

proptest! {
    #[test]
    fn rational_field_laws(a in small_rational(), b in small_rational(), c in small_rational()) {
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert_eq!(&(&a - &b) + &b, a.clone());
        if !b.is_zero() {
            prop_assert_eq!(&(&a / &b) * &b, a.clone());
        }
    }

    #[test]
    fn rational_text_round_trips(a in small_rational()) {
        prop_assert_eq!(a.to_string().parse::<Rational>().unwrap(), a.clone());
        prop_assert_eq!(a.to_decimal().parse::<Rational>().unwrap(), a);
    }

    #[test]
    fn rs_recovers_from_any_threshold_subset(
        message in proptest::collection::vec(0u32..FIELD_MODULUS, 1..40),
        seed in any::<u64>(),
    ) {
        let code = rs_encode(&message).unwrap();
        let n = codeword_len(message.len());
        prop_assert_eq!(code.symbols.len(), n);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
        let keep = guaranteed_threshold(n) + (seed as usize % (n - guaranteed_threshold(n) + 1));
        let known: BTreeMap<usize, u32> = order[..keep].iter().map(|&i| (i, code.symbols[i])).collect();
        prop_assert_eq!(rs_recons(&known, message.len()).unwrap(), message);
    }

    #[test]
    fn rs_rejects_a_corrupted_extra_symbol(message in proptest::collection::vec(0u32..FIELD_MODULUS, 2..20)) {
        let code = rs_encode(&message).unwrap();
        let mut known: BTreeMap<usize, u32> = code.symbols.iter().copied().enumerate().collect();
        let last = code.symbols.len() - 1;
        known.insert(last, (code.symbols[last] + 1) % FIELD_MODULUS);
        prop_assert!(rs_recons(&known, message.len()).is_err());
    }

    #[test]
    fn vc_openings_verify_and_bind(
        leaves in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..24), 1..40),
        picks in proptest::collection::vec(any::<prop::sample::Index>(), 1..6),
    ) {
        let len = leaves.len();
        let (digest, tree) = vc_digest(leaves.clone());
        let query: Vec<usize> = picks.iter().map(|p| p.index(len)).collect();
        let proof = vc_open(&tree, &query).unwrap();
        let answers: Vec<Vec<u8>> = query.iter().map(|&i| leaves[i].clone()).collect();
        prop_assert!(vc_vf(len, &digest, &query, &answers, &proof));
        let mut forged = answers.clone();
        forged[0].push(0xff);
        prop_assert!(!vc_vf(len, &digest, &query, &forged, &proof));
        prop_assert!(!vc_vf(len + 1, &digest, &query, &answers, &proof));
    }

    #[test]
    fn coin_xor_is_an_involution(a in any::<[u8; 16]>(), b in any::<[u8; 16]>()) {
        let (a, b) = (CoinString::from_bytes(a.to_vec()), CoinString::from_bytes(b.to_vec()));
        let ab = CoinString::xor_all(&[a.clone(), b.clone()]).unwrap();
        prop_assert_eq!(CoinString::xor_all(&[ab, b]).unwrap(), a);
    }

    #[test]
    fn outcomes_are_feasible_and_individually_rational((t, r, k, idx, coin) in instance()) {
        let domain = ValueDomain::grid(t).unwrap();
        let reserve = domain.value(r).clone();
        let values: Vec<Rational> = idx.iter().map(|&i| domain.value(i).clone()).collect();
        let bids = BidVector::from_values(&values);
        let coin = CoinString::from_bytes(coin.to_vec());
        let sp = SecondPrice::new(domain.clone(), reserve.clone(), k).unwrap();
        let asc = AscendingAuction::new(domain, reserve, k).unwrap();
        for rules in [&sp as &dyn AuctionRules, &asc] {
            let out = rules.run(&bids, &coin).unwrap();
            prop_assert!(out.validate().is_ok(), "{}: {:?}", rules.name(), out.validate());
            prop_assert!(out.items_sold <= k);
            prop_assert!(out.individually_rational(&bids));
            prop_assert!(out.platform_revenue.is_zero());
            prop_assert_eq!(&rules.run(&bids, &coin).unwrap(), &out);
            let total: Rational = rules.outcome_distribution(&bids).unwrap().into_iter().map(|(p, _)| p).sum();
            prop_assert_eq!(total, Rational::one());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nitc_round_trip(message in proptest::collection::vec(any::<u8>(), 0..80), seed in any::<u64>()) {
        let crs = crs();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (cm, proof, opening) = nitc_com(crs, &message, &mut rng).unwrap();
        prop_assert!(com_vf(crs, &cm, &proof));
        prop_assert!(dec_vf(crs, &cm, &message, &opening));
        let forced = nitc_fdec(crs, &cm, &proof).unwrap();
        prop_assert!(forced.consistent);
        prop_assert_eq!(&forced.message, &message);
        prop_assert!(fdec_vf(crs, &cm, &message, &forced.proof));
        let mut other = message.clone();
        other.push(1);
        prop_assert!(!dec_vf(crs, &cm, &other, &opening));
        prop_assert!(!fdec_vf(crs, &cm, &other, &forced.proof));
    }
}
