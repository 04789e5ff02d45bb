//! Synthetic datasets: Boolean functions, nested majority functions and
//! Markov-chain strings, with their exact reference classifiers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::encode::{encode_boolean, encode_symbolic, Sample};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Truth table of a function of `n <= 3` variables; bit `m` of `table` is
/// the value at the assignment with `z_(i+1) = (m >> i) & 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BooleanFunction {
    pub n: usize,
    pub table: u8,
}

impl BooleanFunction {
    pub fn from_fn(n: usize, f: impl Fn(&[bool]) -> bool) -> Self {
        let mut table = 0u8;
        for m in 0..1usize << n {
            if f(&assignment(n, m)) {
                table |= 1 << m;
            }
        }
        BooleanFunction { n, table }
    }

    pub fn value(&self, bits: &[bool]) -> bool {
        let m = bits.iter().enumerate().fold(0, |acc, (i, &b)| acc | (b as usize) << i);
        (self.table >> m) & 1 == 1
    }

    /// Named representatives: `f0`, `f1`, `fplus` (parity), `ftimes` (AND)
    /// for two variables; `f1`, `fmaj` (majority), `fplus` for three.
    pub fn named(n: usize, name: &str) -> Result<Self> {
        let f: fn(&[bool]) -> bool = match (n, name) {
            (2, "f0") => |_| false,
            (2 | 3, "f1") => |z| z[0],
            (2 | 3, "fplus") => |z| z.iter().filter(|&&b| b).count() % 2 == 1,
            (2, "ftimes") => |z| z[0] && z[1],
            (3, "fmaj") => |z| z.iter().filter(|&&b| b).count() >= 2,
            _ => return Err(Error::InvalidSpec(format!("no function named `{name}` for N = {n}"))),
        };
        Ok(Self::from_fn(n, f))
    }

    /// All `2^n` items as samples, in assignment order; class = value.
    pub fn samples(&self) -> Vec<Sample> {
        (0..1usize << self.n)
            .map(|m| {
                let bits = assignment(self.n, m);
                Sample::new(encode_boolean(&bits), self.value(&bits) as usize)
            })
            .collect()
    }
}

/// Bits of assignment `m` over `n` variables, `z1` first.
pub fn assignment(n: usize, m: usize) -> Vec<bool> {
    (0..n).map(|i| (m >> i) & 1 == 1).collect()
}

/// All `2^(2^n)` functions, indexed by truth table.
pub fn enumerate_boolean_functions(n: usize) -> Result<Vec<BooleanFunction>> {
    if n == 0 || n > 3 {
        return Err(Error::InvalidSpec(format!("function enumeration supports 1 <= N <= 3, got {n}")));
    }
    Ok((0..1usize << (1 << n))
        .map(|t| BooleanFunction { n, table: t as u8 })
        .collect())
}

/// Nested majority function `f^n_a` over `p - 1` arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NmfSpec {
    pub p: usize,
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub n: usize,
}

fn is_prime(p: usize) -> bool {
    p >= 2 && (2..).take_while(|k| k * k <= p).all(|k| p % k != 0)
}

impl NmfSpec {
    pub fn validate(&self) -> Result<()> {
        if !is_prime(self.p) || self.p < 5 {
            return Err(Error::InvalidSpec(format!("p must be a prime >= 5, got {}", self.p)));
        }
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            if v == 0 || v >= self.p {
                return Err(Error::InvalidSpec(format!("{name} must lie in 1..p-1, got {v}")));
            }
        }
        Ok(())
    }

    pub fn num_args(&self) -> usize {
        self.p - 1
    }

    /// Evaluates `f^n_a(z)` level by level over all indices. `z[k - 1]` is
    /// argument `z_k`.
    pub fn eval(&self, z: &[bool]) -> Result<bool> {
        self.validate()?;
        if z.len() != self.p - 1 {
            return Err(Error::Dimension {
                what: "NMF arguments",
                expected: self.p - 1,
                got: z.len(),
            });
        }
        Ok(self.eval_unchecked(z))
    }

    fn eval_unchecked(&self, z: &[bool]) -> bool {
        let p = self.p;
        let mut level: Vec<bool> = core::iter::once(false).chain(z.iter().copied()).collect();
        let mut next = vec![false; p];
        for _ in 0..self.n {
            for a in 1..p {
                let mut votes = 0;
                for k in 1..=3 {
                    let idx = k * a * self.b % p;
                    debug_assert!(idx != 0);
                    let flip = (k * a * self.c % p) % 2 == 1;
                    votes += (level[idx] ^ flip) as u32;
                }
                next[a] = votes >= 2;
            }
            core::mem::swap(&mut level, &mut next);
        }
        level[self.a]
    }

    /// `count` samples with uniformly random arguments; class = value.
    pub fn dataset(&self, count: usize, seed: u64) -> Result<Vec<Sample>> {
        self.validate()?;
        let mut rng = SeededRng::new(seed);
        let mut z = vec![false; self.p - 1];
        Ok((0..count)
            .map(|_| {
                z.iter_mut().for_each(|b| *b = rng.bit());
                Sample::new(encode_boolean(&z), self.eval_unchecked(&z) as usize)
            })
            .collect())
    }
}

/// Transition numerators (over 10) of the class-1 chain; row = current symbol.
pub const MARKOV_T: [[u8; 4]; 4] = [[1, 2, 1, 6], [3, 1, 4, 2], [4, 1, 4, 1], [2, 6, 1, 1]];

pub const MARKOV_ALPHABET: &[u8; 4] = b"ABCD";

/// Numerator of `P(next = j | current = i)` in chain `class` (0 uses `T`,
/// 1 uses its transpose).
#[inline]
pub fn markov_transition(class: usize, i: usize, j: usize) -> u8 {
    if class == 0 {
        MARKOV_T[i][j]
    } else {
        MARKOV_T[j][i]
    }
}

/// One string of symbol indices `0..4` from chain `class`.
pub fn markov_string(class: usize, length: usize, rng: &mut SeededRng) -> Vec<u8> {
    let mut s = Vec::with_capacity(length);
    if length == 0 {
        return s;
    }
    let mut cur = rng.below(4);
    s.push(cur as u8);
    for _ in 1..length {
        let mut r = rng.below(10) as u8;
        let mut next = 0;
        loop {
            let t = markov_transition(class, cur, next);
            if r < t {
                break;
            }
            r -= t;
            next += 1;
        }
        cur = next;
        s.push(cur as u8);
    }
    s
}

/// `count` strings as `(class, symbols)`, classes drawn uniformly.
pub fn markov_generate(length: usize, count: usize, seed: u64) -> Vec<(usize, Vec<u8>)> {
    let mut rng = SeededRng::new(seed);
    (0..count)
        .map(|_| {
            let class = rng.below(2);
            (class, markov_string(class, length, &mut rng))
        })
        .collect()
}

/// One-hot encoded Markov samples.
pub fn markov_dataset(length: usize, count: usize, seed: u64) -> Vec<Sample> {
    markov_generate(length, count, seed)
        .into_iter()
        .map(|(class, s)| {
            let text: Vec<u8> = s.iter().map(|&k| MARKOV_ALPHABET[k as usize]).collect();
            Sample::new(encode_symbolic(&text, MARKOV_ALPHABET).expect("alphabet symbols"), class)
        })
        .collect()
}

/// Likelihood numerators of `s` under both chains (the common factor
/// `1 / (4 * 10^(len-1))` is dropped).
pub fn markov_likelihoods(s: &[u8]) -> (u128, u128) {
    let mut l = (1u128, 1u128);
    for w in s.windows(2) {
        let (i, j) = (w[0] as usize, w[1] as usize);
        l.0 *= MARKOV_T[i][j] as u128;
        l.1 *= MARKOV_T[j][i] as u128;
    }
    l
}

/// Credit given to a class-1 string whose likelihood is equal under both chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LikelihoodTie {
    /// Scored 1/2, as an unbiased coin flip.
    Half,
    /// Scored as a hit: the classifier picks class 1 on equality.
    Hit,
}

impl LikelihoodTie {
    /// Credit in halves.
    fn halves(self) -> u128 {
        match self {
            LikelihoodTie::Half => 1,
            LikelihoodTie::Hit => 2,
        }
    }
}

/// Exact true-positive rate of the likelihood-ratio classifier on class-1
/// strings, by enumerating all `4^length` strings.
pub fn markov_optimal_rate_exact(length: usize, tie: LikelihoodTie) -> Result<f64> {
    if length == 0 || length > 14 {
        return Err(Error::InvalidSpec(format!("exact enumeration supports lengths 1..=14, got {length}")));
    }
    fn walk(depth: usize, last: usize, p1: u64, p2: u64, acc: &mut (u128, u128)) {
        if depth == 0 {
            if p1 > p2 {
                acc.0 += p1 as u128;
            } else if p1 == p2 {
                acc.1 += p1 as u128;
            }
            return;
        }
        for next in 0..4 {
            walk(
                depth - 1,
                next,
                p1 * MARKOV_T[last][next] as u64,
                p2 * MARKOV_T[next][last] as u64,
                acc,
            );
        }
    }
    let mut acc = (0u128, 0u128);
    for first in 0..4 {
        walk(length - 1, first, 1, 1, &mut acc);
    }
    let total = 4u128 * 10u128.pow(length as u32 - 1);
    Ok((2 * acc.0 + tie.halves() * acc.1) as f64 / (2 * total) as f64)
}

/// Monte Carlo estimate of the same rate from `samples` class-1 strings.
pub fn markov_optimal_rate_mc(length: usize, samples: usize, seed: u64, tie: LikelihoodTie) -> Result<f64> {
    if length == 0 || length > 50 {
        return Err(Error::InvalidSpec(format!("Monte Carlo supports lengths 1..=50, got {length}")));
    }
    let mut rng = SeededRng::new(seed);
    let mut score = 0u64;
    for _ in 0..samples {
        let s = markov_string(0, length, &mut rng);
        let (l1, l2) = markov_likelihoods(&s);
        score += if l1 > l2 {
            2
        } else if l1 == l2 {
            tie.halves() as u64
        } else {
            0
        };
    }
    Ok(score as f64 / (2 * samples) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct recursive reading of the recurrence, without reuse.
    fn nmf_naive(spec: &NmfSpec, level: usize, a: usize, z: &[bool]) -> bool {
        if level == 0 {
            return z[a - 1];
        }
        let p = spec.p;
        let arg = |k: usize| {
            let inner = nmf_naive(spec, level - 1, k * a * spec.b % p, z);
            inner ^ ((k * a * spec.c % p) % 2 == 1)
        };
        let (x, y, w) = (arg(1), arg(2), arg(3));
        (x && y) || (y && w) || (w && x)
    }

    #[test]
    fn nmf_base_case() {
        let spec = NmfSpec { p: 7, a: 1, b: 2, c: 3, n: 0 };
        let z = [true, false, false, true, true, false];
        assert!(spec.eval(&z).unwrap());
        let spec = NmfSpec { a: 2, ..spec };
        assert!(!spec.eval(&z).unwrap());
    }

    #[test]
    fn nmf_matches_naive_recursion() {
        let spec = NmfSpec { p: 31, a: 1, b: 2, c: 3, n: 1 };
        let mut rng = SeededRng::new(5);
        for _ in 0..10_000 {
            let z: Vec<bool> = (0..30).map(|_| rng.bit()).collect();
            assert_eq!(spec.eval(&z).unwrap(), nmf_naive(&spec, 1, 1, &z));
        }
        let spec = NmfSpec { n: 3, ..spec };
        for _ in 0..200 {
            let z: Vec<bool> = (0..30).map(|_| rng.bit()).collect();
            assert_eq!(spec.eval(&z).unwrap(), nmf_naive(&spec, 3, 1, &z));
        }
    }

    #[test]
    fn nmf_negation_symmetry() {
        let mut rng = SeededRng::new(9);
        for n in 0..5 {
            let spec = NmfSpec { p: 13, a: 4, b: 5, c: 2, n };
            for _ in 0..200 {
                let z: Vec<bool> = (0..12).map(|_| rng.bit()).collect();
                let nz: Vec<bool> = z.iter().map(|b| !b).collect();
                assert_eq!(spec.eval(&z).unwrap(), !spec.eval(&nz).unwrap());
            }
        }
    }

    #[test]
    fn nmf_rejects_bad_specs() {
        assert!(NmfSpec { p: 9, a: 1, b: 2, c: 3, n: 1 }.validate().is_err());
        assert!(NmfSpec { p: 7, a: 0, b: 2, c: 3, n: 1 }.validate().is_err());
        assert!(NmfSpec { p: 3, a: 1, b: 2, c: 1, n: 1 }.validate().is_err());
    }

    #[test]
    fn nmf_dataset_shape() {
        let spec = NmfSpec { p: 31, a: 1, b: 2, c: 3, n: 1 };
        assert!(spec.dataset(0, 1).unwrap().is_empty());
        let data = spec.dataset(20, 1).unwrap();
        assert!(data.iter().all(|s| s.input.len() == 60 && s.input.iter().sum::<f64>() == 30.0));
        assert_eq!(data, spec.dataset(20, 1).unwrap());
    }

    #[test]
    fn named_functions() {
        let xor = BooleanFunction::named(2, "fplus").unwrap();
        assert!(!xor.value(&[true, true]));
        assert!(xor.value(&[true, false]));
        let maj = BooleanFunction::named(3, "fmaj").unwrap();
        assert!(maj.value(&[true, false, true]));
        assert_eq!(enumerate_boolean_functions(3).unwrap().len(), 256);
        assert_eq!(enumerate_boolean_functions(2).unwrap().len(), 16);
        assert!(enumerate_boolean_functions(4).is_err());
        assert_eq!(BooleanFunction::named(2, "f0").unwrap().table, 0);
    }

    #[test]
    fn transition_rows_are_stochastic_both_ways() {
        for i in 0..4 {
            assert_eq!(MARKOV_T[i].iter().map(|&v| v as u32).sum::<u32>(), 10);
            assert_eq!((0..4).map(|j| MARKOV_T[j][i] as u32).sum::<u32>(), 10);
        }
    }

    #[test]
    fn single_symbol_rate_is_half() {
        assert_eq!(markov_optimal_rate_exact(1, LikelihoodTie::Half).unwrap(), 0.5);
        assert_eq!(markov_optimal_rate_exact(1, LikelihoodTie::Hit).unwrap(), 1.0);
    }

    #[test]
    fn tie_rules_bracket_each_other() {
        for len in 2..7 {
            let half = markov_optimal_rate_exact(len, LikelihoodTie::Half).unwrap();
            let hit = markov_optimal_rate_exact(len, LikelihoodTie::Hit).unwrap();
            assert!(half <= hit);
        }
        let a = markov_optimal_rate_exact(6, LikelihoodTie::Hit).unwrap();
        let b = markov_optimal_rate_mc(6, 200_000, 7, LikelihoodTie::Hit).unwrap();
        assert!((a - b).abs() < 0.005, "{a} {b}");
    }

    #[test]
    fn bigram_frequencies() {
        let mut rng = SeededRng::new(3);
        for class in 0..2 {
            let mut counts = [[0u32; 4]; 4];
            let mut total = 0;
            for _ in 0..2000 {
                let s = markov_string(class, 50, &mut rng);
                for w in s.windows(2) {
                    counts[w[0] as usize][w[1] as usize] += 1;
                    total += 1;
                }
            }
            for i in 0..4 {
                for j in 0..4 {
                    let p = markov_transition(class, i, j) as f64 / 40.0;
                    let f = counts[i][j] as f64 / total as f64;
                    let sigma = libm::sqrt(p * (1.0 - p) / total as f64);
                    assert!((f - p).abs() < 4.0 * sigma + 1e-3, "class {class} ({i},{j}): {f} vs {p}");
                }
            }
        }
    }
}
