//! Systematic Reed–Solomon erasure code over GF(65537).
//!
//! A message of `L` symbols is the value table of the degree-`< L` polynomial
//! on points `0..L`; the codeword extends it to `0..⌈3L/2⌉`.

use std::collections::BTreeMap;

use super::CryptoError;

pub const FIELD_MODULUS: u32 = 65537;
const P: u64 = FIELD_MODULUS as u64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RsCodeword {
    pub symbols: Vec<u32>,
    pub message_len: usize,
}

impl RsCodeword {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Each symbol as a 4-byte big-endian vector-commitment leaf.
    pub fn leaves(&self) -> Vec<Vec<u8>> {
        self.symbols
            .iter()
            .map(|s| s.to_be_bytes().to_vec())
            .collect()
    }
}

pub fn codeword_len(message_len: usize) -> usize {
    (3 * message_len).div_ceil(2)
}

/// Smallest number of known positions the code guarantees to decode from.
pub fn guaranteed_threshold(codeword_len: usize) -> usize {
    (2 * codeword_len).div_ceil(3)
}

fn pow(mut b: u64, mut e: u64) -> u64 {
    let mut acc = 1;
    b %= P;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % P;
        }
        b = b * b % P;
        e >>= 1;
    }
    acc
}

fn inv(x: u64) -> u64 {
    debug_assert!(!x.is_multiple_of(P));
    pow(x, P - 2)
}

fn sub(a: u64, b: u64) -> u64 {
    (a + P - b % P) % P
}

/// Barycentric interpolation through `(xs[j], ys[j])`, evaluated at each of `at`.
fn interpolate(xs: &[u64], ys: &[u64], at: impl Iterator<Item = u64>) -> Vec<u64> {
    let n = xs.len();
    let weights: Vec<u64> = (0..n)
        .map(|j| {
            let d = (0..n)
                .filter(|&m| m != j)
                .fold(1u64, |acc, m| acc * sub(xs[j], xs[m]) % P);
            inv(d)
        })
        .collect();
    let mut diffs = vec![0u64; n];
    let mut prefix = vec![0u64; n];
    at.map(|x| {
        if let Some(j) = xs.iter().position(|&xj| xj == x) {
            return ys[j];
        }
        for j in 0..n {
            diffs[j] = sub(x, xs[j]);
        }
        // batch inversion of all x − x_j
        let mut acc = 1u64;
        for j in 0..n {
            prefix[j] = acc;
            acc = acc * diffs[j] % P;
        }
        let mut inv_acc = inv(acc);
        let (mut num, mut den) = (0u64, 0u64);
        for j in (0..n).rev() {
            let inv_d = inv_acc * prefix[j] % P;
            inv_acc = inv_acc * diffs[j] % P;
            let t = weights[j] * inv_d % P;
            num = (num + t * ys[j]) % P;
            den = (den + t) % P;
        }
        num * inv(den) % P
    })
    .collect()
}

pub fn rs_encode(message: &[u32]) -> Result<RsCodeword, CryptoError> {
    if message.is_empty() {
        return Err(CryptoError::EmptyMessage);
    }
    if let Some(&s) = message.iter().find(|&&s| s >= FIELD_MODULUS) {
        return Err(CryptoError::SymbolOutOfField(s));
    }
    let l = message.len();
    let n = codeword_len(l);
    let xs: Vec<u64> = (0..l as u64).collect();
    let ys: Vec<u64> = message.iter().map(|&s| s as u64).collect();
    let parity = interpolate(&xs, &ys, l as u64..n as u64);
    let mut symbols = message.to_vec();
    symbols.extend(parity.into_iter().map(|s| s as u32));
    Ok(RsCodeword {
        symbols,
        message_len: l,
    })
}

/// Recovers the message from erasures. Known symbols beyond the first `L`
/// must agree with the interpolant.
pub fn rs_recons(
    known: &BTreeMap<usize, u32>,
    message_len: usize,
) -> Result<Vec<u32>, CryptoError> {
    if message_len == 0 {
        return Err(CryptoError::EmptyMessage);
    }
    let n = codeword_len(message_len);
    if let Some((&index, _)) = known.iter().find(|(&i, _)| i >= n) {
        return Err(CryptoError::IndexOutOfRange { index, len: n });
    }
    if let Some((_, &s)) = known.iter().find(|(_, &s)| s >= FIELD_MODULUS) {
        return Err(CryptoError::SymbolOutOfField(s));
    }
    if known.len() < message_len {
        return Err(CryptoError::InsufficientSymbols {
            known: known.len(),
            needed: message_len,
        });
    }
    let basis: Vec<(usize, u32)> = known
        .iter()
        .take(message_len)
        .map(|(&i, &s)| (i, s))
        .collect();
    let xs: Vec<u64> = basis.iter().map(|&(i, _)| i as u64).collect();
    let ys: Vec<u64> = basis.iter().map(|&(_, s)| s as u64).collect();
    let extra: Vec<(usize, u32)> = known
        .iter()
        .skip(message_len)
        .map(|(&i, &s)| (i, s))
        .collect();
    let points = (0..message_len as u64).chain(extra.iter().map(|&(i, _)| i as u64));
    let values = interpolate(&xs, &ys, points);
    let (message, check) = values.split_at(message_len);
    if check.iter().zip(&extra).any(|(&v, &(_, s))| v != s as u64) {
        return Err(CryptoError::InconsistentSymbols);
    }
    Ok(message.iter().map(|&v| v as u32).collect())
}

/// A 4-byte big-endian length prefix followed by the payload, packed into
/// 2-byte symbols (the last one zero-padded).
pub fn bytes_to_symbols(payload: &[u8]) -> Vec<u32> {
    let mut framed = (payload.len() as u32).to_be_bytes().to_vec();
    framed.extend_from_slice(payload);
    framed
        .chunks(2)
        .map(|c| ((c[0] as u32) << 8) | c.get(1).copied().unwrap_or(0) as u32)
        .collect()
}

pub fn symbols_to_bytes(symbols: &[u32]) -> Result<Vec<u8>, CryptoError> {
    let mut raw = Vec::with_capacity(symbols.len() * 2);
    for &s in symbols {
        if s > 0xffff {
            return Err(CryptoError::SymbolOutOfField(s));
        }
        raw.extend_from_slice(&(s as u16).to_be_bytes());
    }
    if raw.len() < 4 {
        return Err(CryptoError::Decode("missing length prefix"));
    }
    let len = u32::from_be_bytes(raw[..4].try_into().expect("4 bytes")) as usize;
    let body = &raw[4..];
    if len > body.len() || body.len() - len > 1 {
        return Err(CryptoError::Decode(
            "length prefix disagrees with symbol count",
        ));
    }
    Ok(body[..len].to_vec())
}
