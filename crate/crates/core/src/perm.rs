//! Permutations, inversion vectors, and Mallows sampling.
//!
//! A permutation of `{1, …, n}` is stored with both its forward map and its
//! inverse. The inversion vector `ℓ = (ℓ_1, …, ℓ_n)` with `0 ≤ ℓ_i ≤ i−1`
//! encodes a permutation bijectively: decoding assigns values from `n`
//! downward, with `ℓ_i` counting how many smaller-indexed positions receive a
//! value above `σ(i)` among those still available. The Mallows measure with
//! parameter `q` weights `σ` by `q^{Inv(σ)}`, which factorizes over `ℓ` into
//! independent truncated geometrics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rng;

/// A permutation of `{1, …, n}`, with O(1) access to both directions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    forward: Vec<u32>,
    inverse: Vec<u32>,
}

impl Permutation {
    /// Identity permutation on `{1, …, n}`.
    pub fn identity(n: usize) -> Self {
        let forward: Vec<u32> = (1..=n as u32).collect();
        Permutation {
            inverse: forward.clone(),
            forward,
        }
    }

    /// Build from a one-line notation `[σ(1), …, σ(n)]` (1-based values).
    pub fn from_one_line(values: &[u32]) -> Result<Self, Error> {
        let n = values.len();
        let mut inverse = vec![0u32; n];
        let mut seen = vec![false; n];
        for (pos, &v) in values.iter().enumerate() {
            if v == 0 || v as usize > n || seen[v as usize - 1] {
                return Err(Error::InvalidParameter(format!(
                    "not a permutation of 1..={n}: value {v} at position {}",
                    pos + 1
                )));
            }
            seen[v as usize - 1] = true;
            inverse[v as usize - 1] = pos as u32 + 1;
        }
        Ok(Permutation {
            forward: values.to_vec(),
            inverse,
        })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// `σ(i)` for 1-based `i`.
    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.forward[i - 1] as usize
    }

    /// `σ⁻¹(v)` for 1-based `v`.
    #[inline]
    pub fn position_of(&self, v: usize) -> usize {
        self.inverse[v - 1] as usize
    }

    /// One-line notation as a slice of 1-based values.
    pub fn one_line(&self) -> &[u32] {
        &self.forward
    }

    /// Swap the values at positions `i` and `j` (1-based), updating both maps.
    pub fn swap_positions(&mut self, i: usize, j: usize) {
        self.forward.swap(i - 1, j - 1);
        let (vi, vj) = (self.forward[i - 1], self.forward[j - 1]);
        self.inverse[vi as usize - 1] = i as u32;
        self.inverse[vj as usize - 1] = j as u32;
    }

    /// Number of inversions, O(n log n) via merge counting.
    pub fn inversions(&self) -> u64 {
        let mut buf: Vec<u32> = self.forward.clone();
        let mut scratch = vec![0u32; buf.len()];
        merge_count(&mut buf, &mut scratch)
    }

    /// Quadratic inversion count; reference implementation for tests.
    pub fn inversions_quadratic(&self) -> u64 {
        let mut count = 0u64;
        for i in 0..self.forward.len() {
            for j in i + 1..self.forward.len() {
                if self.forward[i] > self.forward[j] {
                    count += 1;
                }
            }
        }
        count
    }

    /// Encode into the inversion vector, O(n log n).
    ///
    /// `ℓ_i` counts positions `k < position_of(v)` holding values larger than
    /// `v` where `v` runs over values in decreasing order of assignment; in
    /// one-line terms, `ℓ_i = #{k < σ⁻¹(x_i) : σ(k) > x_i}` read off the
    /// decode order. Equivalently computed below directly from the decode
    /// bijection by running it backwards with a Fenwick tree.
    pub fn to_inversion_vector(&self) -> InversionVector {
        let n = self.len();
        let mut fen = Fenwick::new(n);
        // Multiset of values not yet consumed by the reverse pass.
        for v in 1..=n {
            fen.add(v, 1);
        }
        let mut ells = vec![0u32; n];
        // Invert `decode` stage by stage: stage i fixes σ(i) = x_{i−ℓ_i}
        // where x_1 < … < x_i are the values unassigned before stage i,
        // so ℓ_i = i − (ascending rank of σ(i) among them).
        for i in (1..=n).rev() {
            let v = self.apply(i);
            let rank = fen.prefix_sum(v); // unassigned values ≤ v, inclusive
            ells[i - 1] = (i as u32) - rank as u32;
            fen.add(v, -1);
        }
        InversionVector { ells }
    }
}

fn merge_count(buf: &mut [u32], scratch: &mut [u32]) -> u64 {
    let n = buf.len();
    if n <= 1 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (lo, hi) = buf.split_at_mut(mid);
        merge_count(lo, &mut scratch[..mid]) + merge_count(hi, &mut scratch[mid..])
    };
    let (mut i, mut j, mut k) = (0usize, mid, 0usize);
    while i < mid && j < n {
        if buf[i] <= buf[j] {
            scratch[k] = buf[i];
            i += 1;
        } else {
            scratch[k] = buf[j];
            j += 1;
            inv += (mid - i) as u64;
        }
        k += 1;
    }
    scratch[k..k + mid - i].copy_from_slice(&buf[i..mid]);
    let k2 = k + mid - i;
    scratch[k2..k2 + n - j].copy_from_slice(&buf[j..n]);
    buf.copy_from_slice(&scratch[..n]);
    inv
}

/// Inversion vector `(ℓ_1, …, ℓ_n)` with `0 ≤ ℓ_i ≤ i−1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InversionVector {
    ells: Vec<u32>,
}

impl InversionVector {
    pub fn new(ells: Vec<u32>) -> Result<Self, Error> {
        for (idx, &l) in ells.iter().enumerate() {
            if l as usize > idx {
                return Err(Error::InadmissibleInversionVector {
                    index: idx + 1,
                    value: l,
                });
            }
        }
        Ok(InversionVector { ells })
    }

    pub fn zeros(n: usize) -> Self {
        InversionVector { ells: vec![0; n] }
    }

    pub fn len(&self) -> usize {
        self.ells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ells.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> u32 {
        self.ells[i - 1]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.ells
    }

    /// Total inversions `Inv(σ) = Σ ℓ_i`.
    pub fn total(&self) -> u64 {
        self.ells.iter().map(|&l| l as u64).sum()
    }

    /// Decode into a permutation, O(n log n).
    ///
    /// Stage `i = n, n−1, …, 1`: let `x_1 < … < x_i` be the values not yet
    /// assigned; set `σ(i) = x_{i−ℓ_i}`. In particular `σ(n) = n − ℓ_n`.
    pub fn decode(&self) -> Permutation {
        let n = self.ells.len();
        let mut fen = Fenwick::new(n);
        for v in 1..=n {
            fen.add(v, 1);
        }
        let mut forward = vec![0u32; n];
        for i in (1..=n).rev() {
            let rank = i - self.ells[i - 1] as usize;
            let v = fen.select(rank);
            forward[i - 1] = v as u32;
            fen.add(v, -1);
        }
        Permutation::from_one_line(&forward).expect("decode produces a permutation")
    }

    /// Mixed-radix rank: index of this vector in lexicographic order over all
    /// admissible vectors of the same length. Bijective with permutations of
    /// size `n`, used to index exact finite distributions.
    pub fn lehmer_rank(&self) -> u64 {
        let mut rank = 0u64;
        for (idx, &l) in self.ells.iter().enumerate() {
            rank = rank * (idx as u64 + 1) + l as u64;
        }
        rank
    }

    pub fn from_lehmer_rank(mut rank: u64, n: usize) -> Self {
        let mut ells = vec![0u32; n];
        for i in (1..=n).rev() {
            ells[i - 1] = (rank % i as u64) as u32;
            rank /= i as u64;
        }
        InversionVector { ells }
    }
}

/// Fenwick tree over `1..=n` supporting point updates, prefix sums, and
/// selection of the k-th set element.
pub struct Fenwick {
    tree: Vec<i64>,
    mask: usize,
}

impl Fenwick {
    pub fn new(n: usize) -> Self {
        let mask = if n == 0 {
            0
        } else {
            1usize << (usize::BITS - 1 - (n as usize).leading_zeros())
        };
        Fenwick {
            tree: vec![0; n + 1],
            mask,
        }
    }

    pub fn add(&mut self, mut i: usize, delta: i64) {
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over `1..=i`.
    pub fn prefix_sum(&self, mut i: usize) -> i64 {
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    /// Smallest index `p` with `prefix_sum(p) ≥ k` (k ≥ 1); all counts must
    /// be non-negative for this to be meaningful.
    pub fn select(&self, k: usize) -> usize {
        let mut pos = 0usize;
        let mut remaining = k as i64;
        let mut step = self.mask;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] < remaining {
                pos = next;
                remaining -= self.tree[next];
            }
            step >>= 1;
        }
        pos + 1
    }
}

/// Switch to the uniform branch for `|q − 1|` below this; the truncated
/// geometric is numerically flat there and the closed-form inverse loses
/// precision.
const Q_UNIFORM_EPS: f64 = 1e-12;

/// Draw `ℓ_i` from the truncated geometric on `{0, …, i−1}` with weight
/// `q^ℓ` (normalized), by inverse CDF.
pub fn sample_truncated_geometric<R: Rng + ?Sized>(rng: &mut R, i: usize, q: f64) -> u32 {
    debug_assert!(i >= 1);
    if i == 1 {
        return 0;
    }
    if (q - 1.0).abs() < Q_UNIFORM_EPS {
        return rng.random_range(0..i as u32);
    }
    // For q > 1 the weights q^ℓ are the reflection ℓ ↦ (i−1)−ℓ of the q' = 1/q
    // case, so sample with q' < 1 and reflect.
    let (qq, reflect) = if q < 1.0 { (q, false) } else { (1.0 / q, true) };
    let u: f64 = rng.random::<f64>();
    // CDF(j) = (1 − qq^{j+1}) / (1 − qq^i); invert for j.
    let log_q = qq.ln();
    let denom = -f64::exp_m1(i as f64 * log_q); // 1 − qq^i > 0
    let target = -f64::ln_1p(-u * denom) / log_q; // solves qq^{x} = 1 − u·denom
    let mut j = (target - 1.0).ceil().max(0.0) as i64;
    // Fix up potential off-by-one from rounding: j is correct iff
    // CDF(j−1) < u ≤ CDF(j).
    let cdf = |j: i64| -> f64 {
        if j < 0 {
            0.0
        } else {
            f64::exp_m1((j + 1) as f64 * log_q) / f64::exp_m1(i as f64 * log_q)
        }
    };
    while j > 0 && cdf(j - 1) >= u {
        j -= 1;
    }
    while (j as usize) < i - 1 && cdf(j) < u {
        j += 1;
    }
    let j = j.clamp(0, i as i64 - 1) as u32;
    if reflect {
        (i as u32 - 1) - j
    } else {
        j
    }
}

/// Probability mass of `ℓ_i = j` under the truncated geometric with
/// parameter `q` on `{0, …, i−1}`.
pub fn truncated_geometric_pmf(i: usize, j: u32, q: f64) -> f64 {
    debug_assert!((j as usize) < i);
    if (q - 1.0).abs() < Q_UNIFORM_EPS {
        return 1.0 / i as f64;
    }
    let log_q = q.ln();
    // q^j (1 − q) / (1 − q^i), stable on both sides of 1.
    let num = (j as f64 * log_q).exp() * (-f64::exp_m1(log_q));
    num / (-f64::exp_m1(i as f64 * log_q))
}

/// Sample a Mallows(n, q) permutation via the inversion-vector bijection.
pub fn sample_mallows<R: Rng + ?Sized>(rng: &mut R, n: usize, q: f64) -> Permutation {
    let ells: Vec<u32> = (1..=n)
        .map(|i| sample_truncated_geometric(rng, i, q))
        .collect();
    InversionVector { ells }.decode()
}

/// Sample using a derived stream per element index, so that draws for a given
/// `(master, replica)` are scheduling-independent.
pub fn sample_mallows_streamed(master: u64, replica: u64, n: usize, q: f64) -> Permutation {
    let ells: Vec<u32> = (1..=n)
        .map(|i| {
            let mut r = rng::derive_rng(master, &[rng::tag::SAMPLE, replica, i as u64]);
            sample_truncated_geometric(&mut r, i, q)
        })
        .collect();
    InversionVector { ells }.decode()
}

/// `log Z_{n,q}` where `Z_{n,q} = Π_{i=1}^n (1 + q + … + q^{i−1})`.
pub fn log_partition(n: usize, q: f64) -> f64 {
    if (q - 1.0).abs() < Q_UNIFORM_EPS {
        return (1..=n).map(|i| (i as f64).ln()).sum();
    }
    let log_q = q.ln();
    (1..=n)
        .map(|i| {
            // (q^i − 1)/(q − 1) = expm1(i log q)/expm1(log q)
            (f64::exp_m1(i as f64 * log_q) / f64::exp_m1(log_q)).ln()
        })
        .sum()
}

/// `log π_{n,q}(σ) = Inv(σ)·log q − log Z_{n,q}`.
pub fn mallows_log_pmf(sigma: &Permutation, q: f64) -> f64 {
    let n = sigma.len();
    if (q - 1.0).abs() < Q_UNIFORM_EPS {
        return -log_partition(n, q);
    }
    sigma.inversions() as f64 * q.ln() - log_partition(n, q)
}

/// Exact Mallows pmf over all `n!` permutations, indexed by Lehmer rank.
/// Limited to small `n`; errors beyond `n = 9`.
pub fn enumerate_mallows(n: usize, q: f64) -> Result<Vec<f64>, Error> {
    if n > 9 {
        return Err(Error::EnumerationTooLarge { n, max: 9 });
    }
    let total: u64 = (1..=n as u64).product();
    let log_z = log_partition(n, q);
    let log_q = q.ln();
    let uniform = (q - 1.0).abs() < Q_UNIFORM_EPS;
    let mut pmf = Vec::with_capacity(total as usize);
    for rank in 0..total {
        let iv = InversionVector::from_lehmer_rank(rank, n);
        let lp = if uniform {
            -log_z
        } else {
            iv.total() as f64 * log_q - log_z
        };
        pmf.push(lp.exp());
    }
    Ok(pmf)
}
