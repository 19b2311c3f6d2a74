//! Permutations, integer partitions and irreducible characters of S_n.

use std::collections::HashMap;
use std::fmt;
use std::sync::{OnceLock, RwLock};

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weakly decreasing positive parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    /// Build from parts in any order; zeros are dropped.
    pub fn new(mut parts: Vec<u32>) -> Self {
        parts.retain(|&p| p > 0);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Self { parts }
    }

    /// Build from parts that must already be weakly decreasing and sum to `n`.
    pub fn checked(parts: Vec<u32>, n: u32) -> Result<Self> {
        if parts.contains(&0) {
            return Err(Error::Domain("partition parts must be positive".into()));
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Domain("partition parts must be weakly decreasing".into()));
        }
        let total: u32 = parts.iter().sum();
        if total != n {
            return Err(Error::Domain(format!("partition sums to {total}, expected {n}")));
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn size(&self) -> u32 {
        self.parts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// z_μ = Π_l l^{m_l} m_l!, the centraliser order of the class μ.
    pub fn centralizer_order(&self) -> u128 {
        let mut z: u128 = 1;
        let mut i = 0;
        while i < self.parts.len() {
            let l = self.parts[i];
            let mut m = 0u128;
            while i < self.parts.len() && self.parts[i] == l {
                m += 1;
                i += 1;
                z *= l as u128 * m;
            }
        }
        z
    }

    /// Number of permutations of cycle type μ, n!/z_μ.
    pub fn class_size(&self) -> u128 {
        factorial(self.size()) / self.centralizer_order()
    }

    /// Sign of any permutation with this cycle type.
    pub fn sign(&self) -> i32 {
        let even_cycles = self.parts.iter().filter(|&&p| p % 2 == 0).count();
        if even_cycles % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// Dimension f^λ of the irreducible representation, by the hook length formula.
    pub fn dimension(&self) -> u128 {
        let n = self.size();
        let conj = self.conjugate();
        let mut hooks: u128 = 1;
        for (i, &row) in self.parts.iter().enumerate() {
            for j in 0..row as usize {
                let arm = row as usize - j - 1;
                let leg = conj.parts[j] as usize - i - 1;
                hooks *= (arm + leg + 1) as u128;
            }
        }
        factorial(n) / hooks
    }

    pub fn conjugate(&self) -> Partition {
        let width = self.parts.first().copied().unwrap_or(0);
        let parts = (0..width)
            .map(|j| self.parts.iter().filter(|&&p| p > j).count() as u32)
            .collect();
        Partition { parts }
    }

    /// Content polynomial C_λ(N) = Π_{boxes (i,j)} (N + j − i).
    pub fn content_product(&self, n_channels: i64) -> BigInt {
        let mut acc = BigInt::from(1);
        for (i, &row) in self.parts.iter().enumerate() {
            for j in 0..row as i64 {
                acc *= BigInt::from(n_channels + j - i as i64);
            }
        }
        acc
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

pub fn factorial(n: u32) -> u128 {
    (1..=n as u128).product()
}

/// All partitions of `n`, in reverse lexicographic order ((n) first).
pub fn partitions(n: u32) -> Vec<Partition> {
    fn rec(remaining: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Partition>) {
        if remaining == 0 {
            out.push(Partition { parts: cur.clone() });
            return;
        }
        for p in (1..=remaining.min(max)).rev() {
            cur.push(p);
            rec(remaining - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

/// Calls `f` on every permutation of `0..n` in lexicographic order.
pub fn for_each_permutation<F: FnMut(&[usize])>(n: usize, mut f: F) {
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        f(&p);
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            return;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).expect("pivot exists");
        p.swap(i - 1, j);
        p[i..].reverse();
    }
}

/// Cycle type of a permutation given in one-line notation.
pub fn cycle_type(p: &[usize]) -> Partition {
    let mut seen = vec![false; p.len()];
    let mut parts = Vec::new();
    for start in 0..p.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = p[i];
            len += 1;
        }
        parts.push(len);
    }
    Partition::new(parts)
}

pub fn parity(p: &[usize]) -> i32 {
    cycle_type(p).sign()
}

type CharacterKey = (Vec<u32>, Vec<u32>);

fn character_cache() -> &'static RwLock<HashMap<CharacterKey, i64>> {
    static CACHE: OnceLock<RwLock<HashMap<CharacterKey, i64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Irreducible character χ^λ(μ) by the Murnaghan–Nakayama rule, memoised.
pub fn character(lambda: &Partition, mu: &Partition) -> Result<i64> {
    if lambda.size() != mu.size() {
        return Err(Error::Domain(format!(
            "character needs partitions of equal size, got {lambda} and {mu}"
        )));
    }
    Ok(character_rec(&lambda.parts, &mu.parts))
}

fn character_rec(lambda: &[u32], mu: &[u32]) -> i64 {
    if mu.is_empty() {
        return if lambda.is_empty() { 1 } else { 0 };
    }
    let key = (lambda.to_vec(), mu.to_vec());
    if let Some(&v) = character_cache().read().expect("cache poisoned").get(&key) {
        return v;
    }
    let r = mu[0];
    let rest = &mu[1..];
    let len = lambda.len() as u32;
    // β-numbers, strictly decreasing
    let beta: Vec<u32> = lambda
        .iter()
        .enumerate()
        .map(|(i, &l)| l + len - 1 - i as u32)
        .collect();
    let mut total = 0i64;
    for (idx, &b) in beta.iter().enumerate() {
        if b < r {
            continue;
        }
        let target = b - r;
        if beta.contains(&target) {
            continue;
        }
        let between = beta.iter().filter(|&&x| x > target && x < b).count();
        let sign = if between % 2 == 0 { 1 } else { -1 };
        let mut nb = beta.clone();
        nb[idx] = target;
        nb.sort_unstable_by(|a, b| b.cmp(a));
        let new_lambda: Vec<u32> = nb
            .iter()
            .enumerate()
            .map(|(i, &x)| x - (len - 1 - i as u32))
            .filter(|&p| p > 0)
            .collect();
        total += sign * character_rec(&new_lambda, rest);
    }
    character_cache()
        .write()
        .expect("cache poisoned")
        .insert(key, total);
    total
}
