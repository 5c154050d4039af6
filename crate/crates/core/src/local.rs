//! The ℤ-indexed local machinery: reconstruction of a bijection of ℤ from
//! left-inversion counts, lazily extended windows of independent limiting
//! birth paths, transposition verification of jumps, the shifted finite
//! process, and the dependent-thinning coupling between the two.
//!
//! Reconstruction identity: `Σ_t(i) = i + r_i(t) − ℓ_i(t)`, where the right
//! inversion count is accumulated by the scan
//! `ℓ_i^(i) = ℓ_i`, `ℓ_i^(j+1) = ℓ_i^(j) + 1{ℓ_i^(j) ≥ ℓ_{j+1}}`,
//! `r_i = Σ_{j>i} 1{ℓ_i^(j−1) < ℓ_j}` — each rightward step either adds a
//! right inversion or raises the running reverse-rank proxy `ℓ_i^(·)` by one.
//!
//! Certification: once the running value reaches `m` with
//! `t^{m+1}/(1−t)² < 1e−9`, further contributions would each require a
//! geometric(1−t) variable to exceed `m`, so the scan stops and the value is
//! flagged `Exact` (with that audited residual probability); scans cut short
//! by the window-extension cap are flagged `Truncated`, never silently.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::birth::{self, JumpPath};
use crate::error::Error;
use crate::rng;

/// Residual probability budget under which a scan result is called exact.
pub const CERT_RESIDUAL: f64 = 1e-9;

/// Default cap on the total number of window indices.
pub const DEFAULT_WINDOW_CAP: usize = 100_000;

/// Smallest `m` such that `t^{m+1}/(1−t)² ≤ CERT_RESIDUAL`.
pub fn certification_threshold(t: f64) -> u64 {
    if t <= 0.0 {
        return 0;
    }
    debug_assert!(t < 1.0);
    let m = ((CERT_RESIDUAL * (1.0 - t) * (1.0 - t)).ln() / t.ln() - 1.0).ceil();
    m.max(0.0) as u64
}

/// Whether a reconstructed value is provably (up to the audited residual)
/// stable under any window extension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certification {
    Exact,
    Truncated,
}

/// The running sequence `ℓ_i^(i), ℓ_i^(i+1), …` given `ℓ_i` and the
/// left-inversion values at indices `i+1, i+2, …`.
pub fn ell_hat_sequence(ell_i: u64, ells_right: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(ells_right.len() + 1);
    let mut hat = ell_i;
    out.push(hat);
    for &l in ells_right {
        if hat >= l {
            hat += 1;
        }
        out.push(hat);
    }
    out
}

/// Exact right-inversion count for index `idx` of a finite left-inversion
/// array embedded in ℤ with zeros outside: the scan over the remaining
/// entries is exact because every contribution past the array would need a
/// zero to exceed a nonnegative running value.
pub fn right_inversions_finite(ells: &[u64], idx: usize) -> u64 {
    let mut hat = ells[idx];
    let mut r = 0;
    for &l in &ells[idx + 1..] {
        if hat < l {
            r += 1;
        } else {
            hat += 1;
        }
    }
    r
}

/// A slice of a reconstructed bijection of ℤ on `domain = lo..=lo+len−1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZPermutationSlice {
    pub lo: i64,
    pub values: Vec<i64>,
    pub flags: Vec<Certification>,
}

impl ZPermutationSlice {
    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    pub fn value(&self, i: i64) -> Option<i64> {
        let k = i.checked_sub(self.lo)?;
        (0..self.values.len() as i64)
            .contains(&k)
            .then(|| self.values[k as usize])
    }

    pub fn flag(&self, i: i64) -> Option<Certification> {
        let k = i.checked_sub(self.lo)?;
        self.flags.get(k as usize).copied()
    }

    pub fn all_exact(&self) -> bool {
        self.flags.iter().all(|&f| f == Certification::Exact)
    }
}

/// A lazily extended window of independent limiting birth paths indexed by
/// ℤ, all driven by per-index streams of `(master, replica)`.
pub struct ZWindow {
    master: u64,
    replica: u64,
    t_horizon: f64,
    lo: i64,
    paths: Vec<JumpPath>,
    cap: usize,
}

impl ZWindow {
    pub fn new(
        master: u64,
        replica: u64,
        t_horizon: f64,
        cap: usize,
    ) -> Result<Self, Error> {
        if !(0.0..1.0).contains(&t_horizon) {
            return Err(Error::InvalidParameter(format!(
                "window horizon must be in [0,1), got {t_horizon}"
            )));
        }
        Ok(ZWindow {
            master,
            replica,
            t_horizon,
            lo: 0,
            paths: Vec::new(),
            cap,
        })
    }

    pub fn t_horizon(&self) -> f64 {
        self.t_horizon
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.paths.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    fn simulate_index(&self, i: i64) -> JumpPath {
        let mut r = rng::derive_rng(
            self.master,
            &[rng::tag::LOCAL_WINDOW, self.replica, rng::index_tag(i)],
        );
        birth::simulate_limiting_by_timechange(&mut r, self.t_horizon, birth::DEFAULT_EXPLOSION_CAP)
            .expect("horizon < 1 validated at construction")
    }

    /// Materialize every index of `lo..=hi`, extending in both directions.
    pub fn ensure(&mut self, lo: i64, hi: i64) -> Result<(), Error> {
        if lo > hi {
            return Ok(());
        }
        if self.paths.is_empty() {
            self.lo = lo;
            self.paths = (lo..=hi).map(|i| self.simulate_index(i)).collect();
        } else {
            while self.lo > lo {
                let i = self.lo - 1;
                self.paths.insert(0, self.simulate_index(i));
                self.lo = i;
                self.check_cap()?;
            }
            while self.hi() < hi {
                let i = self.hi() + 1;
                self.paths.push(self.simulate_index(i));
                self.check_cap()?;
            }
        }
        self.check_cap()
    }

    fn check_cap(&self) -> Result<(), Error> {
        if self.paths.len() > self.cap {
            Err(Error::WindowExhausted { cap: self.cap })
        } else {
            Ok(())
        }
    }

    pub fn path(&self, i: i64) -> Option<&JumpPath> {
        let k = i.checked_sub(self.lo)?;
        if k < 0 {
            return None;
        }
        self.paths.get(k as usize)
    }

    /// `ℓ_i(t)` (or the left limit), materializing the index if needed.
    pub fn ell(&mut self, i: i64, t: f64, before: bool) -> Result<u64, Error> {
        self.ensure(i, i)?;
        let p = self.path(i).unwrap();
        if before {
            p.state_before(t)
        } else {
            p.state_at(t)
        }
    }

    /// Certified right-inversion count at `(i, t)`, auto-extending rightward.
    pub fn right_inversions(
        &mut self,
        i: i64,
        t: f64,
        before: bool,
    ) -> Result<(u64, Certification), Error> {
        let m_stop = certification_threshold(t);
        let mut hat = self.ell(i, t, before)?;
        let mut r = 0u64;
        let mut j = i;
        loop {
            if hat >= m_stop {
                return Ok((r, Certification::Exact));
            }
            j += 1;
            if j > self.hi() {
                // Geometric doubling of the materialized range.
                let grow = (self.len() as i64).max(64);
                if self.ensure(self.lo, self.hi().max(i) + grow).is_err() {
                    return Ok((r, Certification::Truncated));
                }
            }
            let lj = self.ell(j, t, before)?;
            if hat < lj {
                r += 1;
            } else {
                hat += 1;
            }
        }
    }

    /// Reconstructed slice `Σ_t` on `dlo..=dhi` (or its left limit at `t`).
    pub fn sigma_slice_at(
        &mut self,
        t: f64,
        dlo: i64,
        dhi: i64,
        before: bool,
    ) -> Result<ZPermutationSlice, Error> {
        if t > self.t_horizon {
            return Err(Error::HorizonExceeded {
                query: t,
                horizon: self.t_horizon,
            });
        }
        self.ensure(dlo, dhi)?;
        let mut values = Vec::with_capacity((dhi - dlo + 1).max(0) as usize);
        let mut flags = Vec::with_capacity(values.capacity());
        for i in dlo..=dhi {
            let ell = self.ell(i, t, before)?;
            let (r, cert) = self.right_inversions(i, t, before)?;
            values.push(i + r as i64 - ell as i64);
            flags.push(cert);
        }
        Ok(ZPermutationSlice {
            lo: dlo,
            values,
            flags,
        })
    }

    pub fn sigma_slice(&mut self, t: f64, dlo: i64, dhi: i64) -> Result<ZPermutationSlice, Error> {
        self.sigma_slice_at(t, dlo, dhi, false)
    }

    /// All jump times (with their index) of the materialized paths in
    /// `dlo..=dhi` up to `t_max`, time-ordered.
    pub fn events(&mut self, dlo: i64, dhi: i64, t_max: f64) -> Result<Vec<(f64, i64)>, Error> {
        self.ensure(dlo, dhi)?;
        let mut ev = Vec::new();
        for i in dlo..=dhi {
            for &s in self.path(i).unwrap().jump_times() {
                if s <= t_max {
                    ev.push((s, i));
                }
            }
        }
        ev.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        Ok(ev)
    }

    /// Verify every jump of an index in `dlo..=dhi` up to `t_max` acts on the
    /// reconstruction as a single transposition, and log it.
    ///
    /// For a jump of `ℓ_i` at time `s` the partner is the index `i′ ≤ i`
    /// holding the largest value below `Σ_{s−}(i)`; equivalently, the value
    /// of reverse rank `ℓ_i(s−) + 2` among `(Σ_{s−}(j))_{j ≤ i}`. The slice
    /// is re-extended leftward until the partner is inside it and the left
    /// margin is clear of values that could outrank it.
    pub fn jump_log(
        &mut self,
        dlo: i64,
        dhi: i64,
        t_max: f64,
    ) -> Result<Vec<TranspositionEvent>, Error> {
        let events = self.events(dlo, dhi, t_max)?;
        let mut log = Vec::with_capacity(events.len());
        let m_stop = certification_threshold(t_max) as i64;
        for (s, i) in events {
            let mut ext = 16i64;
            let ev = loop {
                let lo_ext = dlo.min(i - m_stop - ext);
                let pre = self.sigma_slice_at(s, lo_ext, dhi.max(i), true)?;
                let post = self.sigma_slice_at(s, lo_ext, dhi.max(i), false)?;
                if !(pre.all_exact() && post.all_exact()) {
                    return Err(Error::WindowExhausted { cap: self.cap });
                }
                let mut changed: Vec<i64> = (lo_ext..=dhi.max(i))
                    .filter(|&j| pre.value(j) != post.value(j))
                    .collect();
                changed.sort_unstable();
                match changed.len() {
                    2 => {
                        let (a, b) = (changed[0], changed[1]);
                        if pre.value(a) != post.value(b) || pre.value(b) != post.value(a) {
                            return Err(Error::TranspositionCheck {
                                time: s,
                                detail: format!(
                                    "indices {a},{b} changed without swapping values"
                                ),
                            });
                        }
                        if b != i {
                            return Err(Error::TranspositionCheck {
                                time: s,
                                detail: format!(
                                    "jumping index {i} not the right endpoint of swap {a},{b}"
                                ),
                            });
                        }
                        // Partner-rank check: the incoming value must have
                        // reverse rank ℓ_i(s−)+2 among values at indices ≤ i.
                        let v_new = post.value(i).unwrap();
                        let k = self.ell(i, s, true)?;
                        let rank = (lo_ext..=i)
                            .filter(|&j| pre.value(j).unwrap() >= v_new)
                            .count() as u64;
                        if rank != k + 2 {
                            return Err(Error::TranspositionCheck {
                                time: s,
                                detail: format!(
                                    "partner value {v_new} has reverse rank {rank}, expected {}",
                                    k + 2
                                ),
                            });
                        }
                        // Before the jump the left partner holds the smaller
                        // value; the jump moves the larger value leftward.
                        break TranspositionEvent {
                            time: s,
                            left: a,
                            right: b,
                            value_high: pre.value(b).unwrap(),
                            value_low: pre.value(a).unwrap(),
                        };
                    }
                    1 => {
                        // Partner fell left of the slice; widen and retry.
                        ext *= 2;
                        if (i - m_stop - ext) < -(self.cap as i64) {
                            return Err(Error::WindowExhausted { cap: self.cap });
                        }
                    }
                    k => {
                        return Err(Error::TranspositionCheck {
                            time: s,
                            detail: format!("{k} indices changed"),
                        });
                    }
                }
            };
            log.push(ev);
        }
        Ok(log)
    }
}

/// One verified transposition event of the reconstructed process.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TranspositionEvent {
    pub time: f64,
    pub left: i64,
    pub right: i64,
    pub value_high: i64,
    pub value_low: i64,
}

/// The finite process recentred at `k_n`: `Σ^n_t(i) = σ^n_t(k_n+i) − k_n`
/// when `k_n + i ∈ [n]`, and `i` otherwise.
pub struct ShiftedFiniteProcess {
    pp: crate::process::MallowsProcessPath,
    n: usize,
    k_n: i64,
}

impl ShiftedFiniteProcess {
    pub fn simulate(
        master: u64,
        replica: u64,
        n: usize,
        k_n: i64,
        t_horizon: f64,
    ) -> Result<Self, Error> {
        if !(0.0..1.0).contains(&t_horizon) {
            return Err(Error::InvalidParameter(format!(
                "shifted process horizon must be in [0,1), got {t_horizon}"
            )));
        }
        Ok(ShiftedFiniteProcess {
            pp: crate::process::MallowsProcessPath::simulate(master, replica, n, t_horizon)?,
            n,
            k_n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `ℓ` of the shifted index (zero outside `[n]`).
    pub fn ell(&self, i: i64, t: f64) -> Result<u64, Error> {
        let fi = self.k_n + i;
        if fi < 1 || fi > self.n as i64 {
            return Ok(0);
        }
        self.pp.component(fi as usize).state_at(t)
    }

    /// Values of `Σ^n_t` on `dlo..=dhi`.
    pub fn slice(&self, t: f64, dlo: i64, dhi: i64) -> Result<Vec<i64>, Error> {
        let sigma = self.pp.permutation_at(t)?;
        Ok((dlo..=dhi)
            .map(|i| {
                let fi = self.k_n + i;
                if fi < 1 || fi > self.n as i64 {
                    i
                } else {
                    sigma.apply(fi as usize) as i64 - self.k_n
                }
            })
            .collect())
    }
}

/// Outcome of one coupled realization of the limiting and finite processes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CouplingRecord {
    pub n: usize,
    pub k_n: i64,
    pub window_lo: i64,
    pub window_hi: i64,
    pub t_horizon: f64,
    /// per window index: the two reconstructions agree at every event time
    pub per_index_agree: Vec<bool>,
    pub all_agree: bool,
    pub max_ratio: f64,
    pub proposed: u64,
    pub accepted: u64,
}

/// Couple the limiting window process with the finite system of size `n`
/// recentred at `k_n`, by dependent thinning on shared randomness: the
/// `(j+1)`-st jump of the limiting path at (shifted) index `m`, occurring at
/// time `s` from state `j`, is kept for the finite process iff
/// `U_{m,j} ≤ p_{k_n+m}(X_{m,j}, s) / ((j+1)/(1−s))`, where `X_{m,j}` counts
/// previously kept jumps. The ratio is in `[0,1]` by monotone domination;
/// any violation is a hard error.
pub fn coupled_simulation(
    master: u64,
    replica: u64,
    n: usize,
    k_n: i64,
    window_lo: i64,
    window_hi: i64,
    t_horizon: f64,
) -> Result<CouplingRecord, Error> {
    if !(0.0..1.0).contains(&t_horizon) {
        return Err(Error::InvalidParameter(format!(
            "coupling horizon must be in [0,1), got {t_horizon}"
        )));
    }
    if window_lo > window_hi {
        return Err(Error::InvalidParameter("empty coupling window".into()));
    }
    let mut win = ZWindow::new(master, replica, t_horizon, DEFAULT_WINDOW_CAP)?;
    let mut thinned: BTreeMap<i64, JumpPath> = BTreeMap::new();
    let mut max_ratio = 0.0f64;
    let mut proposed = 0u64;
    let mut accepted = 0u64;

    // Thin the limiting path at shifted index m into the finite ℓ^n path.
    let mut thin = |win: &mut ZWindow,
                    thinned: &mut BTreeMap<i64, JumpPath>,
                    m: i64|
     -> Result<(), Error> {
        if thinned.contains_key(&m) {
            return Ok(());
        }
        win.ensure(m, m)?;
        let fi = k_n + m;
        let mut kept = Vec::new();
        let mut x = 0u64;
        for (j, &s) in win.path(m).unwrap().jump_times().iter().enumerate() {
            let p = if fi >= 1 && fi <= n as i64 {
                birth::rate_finite(fi as u64, x, s)
            } else {
                0.0
            };
            let q_rate = (j as f64 + 1.0) / (1.0 - s);
            let ratio = p / q_rate;
            if ratio > 1.0 + 1e-9 {
                return Err(Error::CouplingRatio {
                    element: m,
                    jump: j,
                    ratio,
                });
            }
            proposed += 1;
            if ratio > max_ratio {
                max_ratio = ratio;
            }
            let u = rng::derive_uniform(
                master,
                &[
                    rng::tag::COUPLING_UNIFORM,
                    replica,
                    rng::index_tag(m),
                    j as u64,
                ],
            );
            if u <= ratio {
                kept.push(s);
                x += 1;
                accepted += 1;
            }
        }
        thinned.insert(m, JumpPath::new(kept, t_horizon)?);
        Ok(())
    };

    // Certified scan over the thinned data (ℓ^n ≤ ℓ pointwise, and zero
    // outside [n], so the same stopping rule applies).
    let m_stop = certification_threshold(t_horizon);
    let mut fin_sigma = |win: &mut ZWindow,
                         thinned: &mut BTreeMap<i64, JumpPath>,
                         i: i64,
                         t: f64|
     -> Result<i64, Error> {
        thin(win, thinned, i)?;

        // own thinned state
        let ell_i = thinned[&i].state_at(t)?;
        let mut hat = ell_i;
        let mut r = 0u64;
        let mut j = i;
        loop {
            if hat >= m_stop || k_n + j > n as i64 {
                // Past index n the embedded ℓ^n vanish identically, so the
                // scan is exact from there on.
                break;
            }
            j += 1;
            thin(win, thinned, j)?;
            let lj = thinned[&j].state_at(t)?;
            if hat < lj {
                r += 1;
            } else {
                hat += 1;
            }
        }
        Ok(i + r as i64 - ell_i as i64)
    };

    // Force materialization wide enough for both reconstructions at the
    // horizon, then compare the window slices at every jump time of the
    // materialized range. Scans at intermediate times may extend the range
    // further, introducing new event times, so re-check until the range is
    // stable (deterministic — extension depends only on the derived paths).
    for i in window_lo..=window_hi {
        let _ = win.right_inversions(i, t_horizon, false)?;
        let _ = fin_sigma(&mut win, &mut thinned, i, t_horizon)?;
    }
    let width = (window_hi - window_lo + 1) as usize;
    let mut per_index_agree;
    loop {
        let range = (win.lo(), win.hi());
        let mut check_times: Vec<f64> = win
            .events(range.0, range.1, t_horizon)?
            .into_iter()
            .map(|(s, _)| s)
            .collect();
        check_times.push(t_horizon);

        per_index_agree = vec![true; width];
        for &s in &check_times {
            let lim = win.sigma_slice(s, window_lo, window_hi)?;
            if !lim.all_exact() {
                return Err(Error::WindowExhausted {
                    cap: DEFAULT_WINDOW_CAP,
                });
            }
            for (k, i) in (window_lo..=window_hi).enumerate() {
                if !per_index_agree[k] {
                    continue;
                }
                let fin = fin_sigma(&mut win, &mut thinned, i, s)?;
                if lim.value(i) != Some(fin) {
                    per_index_agree[k] = false;
                }
            }
        }
        if (win.lo(), win.hi()) == range {
            break;
        }
    }
    let all_agree = per_index_agree.iter().all(|&b| b);
    Ok(CouplingRecord {
        n,
        k_n,
        window_lo,
        window_hi,
        t_horizon,
        per_index_agree,
        all_agree,
        max_ratio,
        proposed,
        accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::{InversionVector, Permutation};

    #[test]
    fn hat_sequence_all_zeros() {
        // every step increments: ℓ_i^(i+k) = k
        let hat = ell_hat_sequence(0, &[0, 0, 0, 0]);
        assert_eq!(hat, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn hat_sequence_hand_example() {
        // ℓ ≡ 0 except ℓ_1 = 1; from i = 0: 0, 0, 1, 2, …
        let hat = ell_hat_sequence(0, &[1, 0, 0]);
        assert_eq!(hat, vec![0, 0, 1, 2]);
    }

    #[test]
    fn hat_steps_are_zero_or_one() {
        let mut r = crate::rng::derive_rng(5, &[0]);
        use rand::Rng;
        for _ in 0..200 {
            let ells: Vec<u64> = (0..30).map(|_| r.random_range(0..5)).collect();
            let hat = ell_hat_sequence(ells[0], &ells[1..]);
            for (k, w) in hat.windows(2).enumerate() {
                let step = w[1] - w[0];
                assert!(step <= 1);
                assert_eq!(step == 1, w[0] >= ells[k + 1]);
            }
        }
    }

    #[test]
    fn adjacent_transposition_hand_example() {
        // ℓ ≡ 0 except ℓ_1 = 1 ⇒ σ(0) = 1, σ(1) = 0, identity elsewhere.
        let ells = [0u64, 0, 0, 1, 0, 0]; // indices −2..=3 with ℓ_1 = 1
        let sigma: Vec<i64> = (0..ells.len())
            .map(|k| {
                let i = k as i64 - 2;
                i + right_inversions_finite(&ells, k) as i64 - ells[k] as i64
            })
            .collect();
        assert_eq!(sigma, [-2, -1, 1, 0, 2, 3]);
    }

    #[test]
    fn recursion_matches_direct_count_exhaustive_s6() {
        // Embed each σ ∈ S_6 in ℤ (identity outside); the scan over the
        // embedded ℓ array must reproduce directly counted right inversions,
        // and the reconstruction must return σ itself.
        let total: u64 = (1..=6).product();
        for rank in 0..total {
            let p = InversionVector::from_lehmer_rank(rank, 6).decode();
            let pad = 3usize;
            let m = 6 + 2 * pad;
            let mut ells = vec![0u64; m];
            let iv = p.to_inversion_vector();
            for i in 1..=6 {
                ells[pad + i - 1] = iv.get(i) as u64;
            }
            // value of embedded index k (0-based): identity outside the core
            let val = |k: usize| -> i64 {
                if k < pad || k >= pad + 6 {
                    k as i64
                } else {
                    pad as i64 + p.apply(k - pad + 1) as i64 - 1
                }
            };
            for k in 0..m {
                let direct = (k + 1..m).filter(|&j| val(j) < val(k)).count() as u64;
                assert_eq!(
                    right_inversions_finite(&ells, k),
                    direct,
                    "rank={rank} k={k}"
                );
                let rec = k as i64 + right_inversions_finite(&ells, k) as i64 - ells[k] as i64;
                assert_eq!(rec, val(k), "rank={rank} k={k}");
            }
        }
    }

    #[test]
    fn hat_reverse_rank_characterization_s6() {
        // ℓ_i^(j) + 1 equals the reverse rank of σ(i) among (σ(k))_{k≤j}.
        let total: u64 = (1..=6).product();
        for rank in 0..total {
            let p = InversionVector::from_lehmer_rank(rank, 6).decode();
            let iv = p.to_inversion_vector();
            let ells: Vec<u64> = (1..=6).map(|i| iv.get(i) as u64).collect();
            for i in 1..=6usize {
                let hat = ell_hat_sequence(ells[i - 1], &ells[i..]);
                for (off, &h) in hat.iter().enumerate() {
                    let j = i + off;
                    let rev_rank = (1..=j).filter(|&k| p.apply(k) >= p.apply(i)).count() as u64;
                    assert_eq!(h + 1, rev_rank, "rank={rank} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn monotone_comparison_property() {
        // Hat sequences driven by pointwise-smaller data from a no-smaller
        // start stay above: if a(k) ≤ b(k) for all k and u ≥ v, then the hat
        // sequence of (u, a) dominates that of (v, b) pointwise. (At a step
        // where the lower one increments, v̂ ≥ b_k ≥ a_k forces û ≥ v̂ ≥ a_k,
        // so the upper one increments too.)
        let mut r = crate::rng::derive_rng(6, &[1]);
        use rand::Rng;
        for _ in 0..500 {
            let b: Vec<u64> = (0..40).map(|_| r.random_range(0..4)).collect();
            let a: Vec<u64> = b.iter().map(|&x| r.random_range(0..=x)).collect();
            let v = b[0];
            let u = v + r.random_range(0..3);
            let upper = ell_hat_sequence(u, &a[1..]);
            let lower = ell_hat_sequence(v, &b[1..]);
            for k in 0..lower.len() {
                assert!(upper[k] >= lower[k], "k={k}");
            }
        }
    }

    #[test]
    fn certification_threshold_values() {
        assert_eq!(certification_threshold(0.0), 0);
        let m = certification_threshold(0.8);
        assert!((100..=120).contains(&m), "m={m}");
        let m5 = certification_threshold(0.5);
        assert!((25..=40).contains(&m5), "m={m5}");
    }

    #[test]
    fn slice_at_time_zero_is_identity() {
        let mut w = ZWindow::new(9, 0, 0.5, 10_000).unwrap();
        let s = w.sigma_slice(0.0, -5, 5).unwrap();
        assert!(s.all_exact());
        assert_eq!(s.values, (-5..=5).collect::<Vec<i64>>());
    }

    #[test]
    fn slice_values_distinct_and_stable_under_extension() {
        for rep in 0..50 {
            let mut w = ZWindow::new(10, rep, 0.6, 50_000).unwrap();
            let s1 = w.sigma_slice(0.6, -8, 8).unwrap();
            assert!(s1.all_exact());
            let mut vals = s1.values.clone();
            vals.sort_unstable();
            vals.dedup();
            assert_eq!(vals.len(), s1.values.len(), "rep={rep}");
            // extend both sides, recompute: exact values must not move
            w.ensure(-200, w.hi() + 200).unwrap();
            let s2 = w.sigma_slice(0.6, -8, 8).unwrap();
            assert_eq!(s1.values, s2.values, "rep={rep}");
        }
    }

    #[test]
    fn slice_is_balanced() {
        // #{i ≤ 0 : Σ(i) ≥ 1} = #{i ≥ 1 : Σ(i) ≤ 0} on a window wide enough
        // to contain all origin crossings.
        for rep in 0..30 {
            let mut w = ZWindow::new(11, rep, 0.5, 50_000).unwrap();
            let s = w.sigma_slice(0.5, -60, 60).unwrap();
            assert!(s.all_exact());
            let up = (-60..=0).filter(|&i| s.value(i).unwrap() >= 1).count();
            let down = (1..=60).filter(|&i| s.value(i).unwrap() <= 0).count();
            assert_eq!(up, down, "rep={rep}");
        }
    }

    #[test]
    fn ell_marginal_geometric() {
        let t = 0.6;
        let m = 40_000;
        let mut counts = vec![0u64; 30];
        for rep in 0..m {
            let mut w = ZWindow::new(12, rep, t, 10_000).unwrap();
            let l = w.ell(0, t, false).unwrap() as usize;
            counts[l.min(29)] += 1;
        }
        let cdf: Vec<f64> = (0..30)
            .map(|j| {
                if j == 29 {
                    1.0
                } else {
                    1.0 - t.powi(j as i32 + 1)
                }
            })
            .collect();
        let (d, p) = crate::stats::ks_one_sample_discrete(&counts, &cdf);
        assert!(p > 1e-3, "d={d} p={p}");
    }

    #[test]
    fn restriction_marginal_matches_finite_law() {
        // Relabeled restriction of Σ_t to a length-3 interval is Mallows(3, t).
        let t = 0.5;
        let m = 30_000;
        let pmf = crate::perm::enumerate_mallows(3, t).unwrap();
        let mut counts = vec![0u64; 6];
        for rep in 0..m {
            let mut w = ZWindow::new(13, rep, t, 50_000).unwrap();
            let s = w.sigma_slice(t, 1, 3).unwrap();
            assert!(s.all_exact());
            // relabel by rank
            let mut sorted = s.values.clone();
            sorted.sort_unstable();
            let rel: Vec<u32> = s
                .values
                .iter()
                .map(|v| (sorted.iter().position(|w| w == v).unwrap() + 1) as u32)
                .collect();
            let rank = Permutation::from_one_line(&rel)
                .unwrap()
                .to_inversion_vector()
                .lehmer_rank();
            counts[rank as usize] += 1;
        }
        let (_, _, p) = crate::stats::chi_square_gof(&counts, &pmf, 5.0).unwrap();
        assert!(p > 1e-3, "p={p}");
    }

    #[test]
    fn jump_log_transpositions_verify() {
        let mut total = 0usize;
        for rep in 0..40 {
            let mut w = ZWindow::new(14, rep, 0.7, 50_000).unwrap();
            let log = w.jump_log(-4, 4, 0.7).unwrap();
            for ev in &log {
                assert!(ev.left <= ev.right);
                assert!(ev.value_high > ev.value_low);
            }
            total += log.len();
        }
        assert!(total > 50, "expected a non-trivial number of events, got {total}");
    }

    #[test]
    fn first_jump_time_survival() {
        // P(no jump of ℓ_i by t) = 1 − t: the first-jump time is uniform.
        let m = 30_000;
        let mut times: Vec<f64> = Vec::new();
        for rep in 0..m {
            let mut w = ZWindow::new(15, rep, 0.95, 10_000).unwrap();
            w.ensure(0, 0).unwrap();
            if let Some(&s) = w.path(0).unwrap().jump_times().first() {
                times.push(s);
            }
        }
        // Condition on a jump before 0.95: CDF is t/0.95 on [0, 0.95].
        let (d, p) = crate::stats::ks_one_sample_continuous(&mut times, |x| {
            (x / 0.95).clamp(0.0, 1.0)
        });
        assert!(p > 1e-3, "d={d} p={p}");
    }

    #[test]
    fn shifted_process_convention_outside_range() {
        let sp = ShiftedFiniteProcess::simulate(16, 0, 10, 5, 0.5).unwrap();
        let s = sp.slice(0.5, -10, 10).unwrap();
        for (k, i) in (-10..=10).enumerate() {
            let fi = 5 + i;
            if !(1..=10).contains(&fi) {
                assert_eq!(s[k], i);
            }
        }
        assert_eq!(sp.ell(-9, 0.5).unwrap(), 0);
    }

    #[test]
    fn shifted_process_identity_at_zero() {
        let sp = ShiftedFiniteProcess::simulate(17, 0, 12, 6, 0.4).unwrap();
        assert_eq!(sp.slice(0.0, -3, 3).unwrap(), (-3..=3).collect::<Vec<i64>>());
    }

    #[test]
    fn coupling_ratios_bounded_and_reproducible() {
        let r1 = coupled_simulation(18, 0, 100, 50, -3, 3, 0.6).unwrap();
        let r2 = coupled_simulation(18, 0, 100, 50, -3, 3, 0.6).unwrap();
        assert!(r1.max_ratio <= 1.0 + 1e-9);
        assert!(r1.proposed >= r1.accepted);
        assert_eq!(r1.per_index_agree, r2.per_index_agree);
        assert_eq!(r1.max_ratio, r2.max_ratio);
    }

    #[test]
    fn coupling_agreement_improves_with_n() {
        let reps = 60u64;
        let rate = |n: usize| -> f64 {
            let mut agree = 0usize;
            for rep in 0..reps {
                let r = coupled_simulation(19, rep, n, n as i64 / 2, -2, 2, 0.5).unwrap();
                if r.all_agree {
                    agree += 1;
                }
            }
            agree as f64 / reps as f64
        };
        let small = rate(30);
        let large = rate(500);
        assert!(
            large >= small && large > 0.8,
            "small={small} large={large}"
        );
    }

    #[test]
    fn thinned_marginal_truncated_geometric() {
        // The kept-jump process at shifted index m (finite index i = k_n+m)
        // must have the truncated geometric marginal of ℓ^n_i at time t.
        let (n, k_n, m_idx, t) = (20usize, 10i64, -2i64, 0.5f64);
        let i_fin = (k_n + m_idx) as usize; // 8
        let m = 30_000;
        let mut counts = vec![0u64; i_fin];
        for rep in 0..m {
            // Run the thinning exactly as `coupled_simulation` does (same
            // derived streams and acceptance rule), standalone for speed.
            let mut w = ZWindow::new(20, rep, t, 10_000).unwrap();
            w.ensure(m_idx, m_idx).unwrap();
            let mut x = 0u64;
            for (j, &s) in w.path(m_idx).unwrap().jump_times().iter().enumerate() {
                let p = crate::birth::rate_finite(i_fin as u64, x, s);
                let q_rate = (j as f64 + 1.0) / (1.0 - s);
                let u = crate::rng::derive_uniform(
                    20,
                    &[
                        crate::rng::tag::COUPLING_UNIFORM,
                        rep,
                        crate::rng::index_tag(m_idx),
                        j as u64,
                    ],
                );
                if u <= p / q_rate {
                    x += 1;
                }
            }
            counts[(x as usize).min(i_fin - 1)] += 1;
        }
        let probs: Vec<f64> = (0..i_fin as u32)
            .map(|j| crate::perm::truncated_geometric_pmf(i_fin, j, t))
            .collect();
        let (_, _, p) = crate::stats::chi_square_gof(&counts, &probs, 5.0).unwrap();
        assert!(p > 1e-3, "p={p}");
    }
}
