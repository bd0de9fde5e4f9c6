//! Probabilistic primality and safe-prime generation.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

const SMALL_PRIMES: [u32; 167] = [
    3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307,
    311, 313, 317, 331, 337, 347, 349, 353, 359, 367, 373, 379, 383, 389, 397, 401, 409, 419, 421,
    431, 433, 439, 443, 449, 457, 461, 463, 467, 479, 487, 491, 499, 503, 509, 521, 523, 541, 547,
    557, 563, 569, 571, 577, 587, 593, 599, 601, 607, 613, 617, 619, 631, 641, 643, 647, 653, 659,
    661, 673, 677, 683, 691, 701, 709, 719, 727, 733, 739, 743, 751, 757, 761, 769, 773, 787, 797,
    809, 811, 821, 823, 827, 829, 839, 853, 857, 859, 863, 877, 881, 883, 887, 907, 911, 919, 929,
    937, 941, 947, 953, 967, 971, 977, 983, 991, 997,
];

// Deterministic witnesses; these alone decide primality below 3.3·10²⁴.
const FIXED_BASES: [u32; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];

fn miller_rabin_round(n: &BigUint, n_minus_1: &BigUint, d: &BigUint, s: u64, a: &BigUint) -> bool {
    let mut x = a.modpow(d, n);
    if x.is_one() || &x == n_minus_1 {
        return true;
    }
    for _ in 1..s {
        x = &x * &x % n;
        if &x == n_minus_1 {
            return true;
        }
        if x.is_one() {
            return false;
        }
    }
    false
}

/// Miller–Rabin with fixed small bases plus `extra_rounds` random bases.
pub fn is_probable_prime<R: RngCore + ?Sized>(
    n: &BigUint,
    extra_rounds: usize,
    rng: &mut R,
) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    if n.is_even() {
        return n == &two;
    }
    for &p in &SMALL_PRIMES {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().expect("n - 1 is nonzero");
    let d = &n_minus_1 >> s;
    for &a in &FIXED_BASES {
        if !miller_rabin_round(n, &n_minus_1, &d, s, &BigUint::from(a)) {
            return false;
        }
    }
    for _ in 0..extra_rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        if !miller_rabin_round(n, &n_minus_1, &d, s, &a) {
            return false;
        }
    }
    true
}

/// Smallest prime strictly greater than `n` (deterministic bases only).
pub fn next_prime(n: &BigUint) -> BigUint {
    let mut c = n + 1u32;
    if c.is_even() && c != BigUint::from(2u32) {
        c += 1u32;
    }
    let mut no_rng = rand::rngs::mock::StepRng::new(0, 0);
    while !is_probable_prime(&c, 0, &mut no_rng) {
        c += 2u32;
    }
    c
}

/// Random safe prime `p = 2q + 1` with exactly `bits` bits.
pub fn safe_prime<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    assert!(bits >= 16, "safe primes below 16 bits are not supported");
    loop {
        // q has bits-1 bits with the top bit set, and is odd
        let mut q = rng.gen_biguint(bits - 1);
        q.set_bit(bits - 2, true);
        q.set_bit(0, true);
        // sieve q and 2q + 1 together
        if SMALL_PRIMES.iter().any(|&sp| {
            let r = (&q % sp).to_u32().expect("small remainder");
            r == 0 || r == (sp - 1) / 2
        }) {
            continue;
        }
        let p = (&q << 1u32) + 1u32;
        if !is_probable_prime(&q, 4, rng) {
            continue;
        }
        if is_probable_prime(&p, 4, rng) {
            return p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn trial_division(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn agrees_with_trial_division() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for n in 0u64..5000 {
            assert_eq!(
                is_probable_prime(&BigUint::from(n), 2, &mut rng),
                trial_division(n),
                "n = {n}"
            );
        }
    }

    #[test]
    fn carmichael_numbers_are_composite() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for n in [561u64, 1105, 1729, 2465, 2821, 6601, 8911, 41041, 825265] {
            assert!(!is_probable_prime(&BigUint::from(n), 2, &mut rng));
        }
    }

    #[test]
    fn next_prime_steps() {
        assert_eq!(next_prime(&BigUint::from(1u32)), BigUint::from(2u32));
        assert_eq!(next_prime(&BigUint::from(2u32)), BigUint::from(3u32));
        assert_eq!(next_prime(&BigUint::from(13u32)), BigUint::from(17u32));
        assert_eq!(next_prime(&BigUint::from(7918u32)), BigUint::from(7919u32));
    }

    #[test]
    fn safe_prime_structure() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let p = safe_prime(32, &mut rng);
        assert_eq!(p.bits(), 32);
        let q = (&p - 1u32) >> 1u32;
        let q64 = q.to_u64().unwrap();
        let p64 = p.to_u64().unwrap();
        assert!(trial_division_u64(q64));
        assert!(trial_division_u64(p64));
    }

    fn trial_division_u64(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2u64;
        while d.saturating_mul(d) <= n {
            if n.is_multiple_of(d) {
                return false;
            }
            d += if d == 2 { 1 } else { 2 };
        }
        true
    }
}
