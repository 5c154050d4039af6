//! Distributional test statistics used by the verification experiments.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::Error;

/// Total variation distance `½ Σ |p_k − q_k|` between two pmfs over the same
/// index set.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

/// Pearson chi-square goodness-of-fit of observed counts against expected
/// probabilities. Cells with expected count below `min_expected` are pooled
/// into the following cell. Returns `(statistic, dof, p_value)`.
pub fn chi_square_gof(
    counts: &[u64],
    expected_probs: &[f64],
    min_expected: f64,
) -> Result<(f64, usize, f64), Error> {
    if counts.len() != expected_probs.len() || counts.is_empty() {
        return Err(Error::InvalidParameter(
            "chi-square needs matching non-empty cell arrays".into(),
        ));
    }
    let n: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    let mut pooled_obs = 0.0;
    let mut pooled_exp = 0.0;
    for (&c, &p) in counts.iter().zip(expected_probs) {
        pooled_obs += c as f64;
        pooled_exp += p * n as f64;
        if pooled_exp >= min_expected {
            stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
            cells += 1;
            pooled_obs = 0.0;
            pooled_exp = 0.0;
        }
    }
    // Fold a trailing underfull remainder into the last counted cell.
    if pooled_exp > 0.0 && cells > 0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
    }
    if cells < 2 {
        return Err(Error::InvalidParameter(
            "chi-square needs at least two cells after pooling".into(),
        ));
    }
    let dof = cells - 1;
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| Error::InvalidParameter(format!("chi-square dof: {e}")))?;
    let p_value = 1.0 - dist.cdf(stat);
    Ok((stat, dof, p_value))
}

/// One-sample Kolmogorov–Smirnov statistic of a sample against a continuous
/// CDF, plus the asymptotic p-value `Q_KS(√m · D)`.
pub fn ks_one_sample_continuous<F: Fn(f64) -> f64>(sample: &mut [f64], cdf: F) -> (f64, f64) {
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max((k as f64 + 1.0) / m - f).max(f - k as f64 / m);
    }
    (d, kolmogorov_sf(m.sqrt() * d))
}

/// One-sample KS statistic against a discrete CDF given as cumulative
/// probabilities over ordered support points. The asymptotic continuous
/// p-value is conservative for discrete distributions.
pub fn ks_one_sample_discrete(counts: &[u64], cdf: &[f64]) -> (f64, f64) {
    debug_assert_eq!(counts.len(), cdf.len());
    let m: u64 = counts.iter().sum();
    let mut cum = 0u64;
    let mut d: f64 = 0.0;
    for (&c, &f) in counts.iter().zip(cdf) {
        cum += c;
        d = d.max((cum as f64 / m as f64 - f).abs());
    }
    (d, kolmogorov_sf((m as f64).sqrt() * d))
}

/// Two-sample KS statistic and asymptotic p-value.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> (f64, f64) {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    (d, kolmogorov_sf(ne * d))
}

/// Kolmogorov distribution survival function
/// `Q(x) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2 k² x²)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 1e-3 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Energy distance between two samples:
/// `2 E|X−Y| − E|X−X'| − E|Y−Y'|` (non-negative, zero iff equal laws).
pub fn energy_distance(a: &[f64], b: &[f64]) -> f64 {
    let cross = mean_abs_cross(a, b);
    let within_a = mean_abs_cross(a, a);
    let within_b = mean_abs_cross(b, b);
    (2.0 * cross - within_a - within_b).max(0.0)
}

fn mean_abs_cross(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut s = 0.0;
    for &x in a {
        for &y in b {
            s += (x - y).abs();
        }
    }
    s / (a.len() as f64 * b.len() as f64)
}

/// Empirical quantile (linear interpolation between order statistics).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bootstrap percentile confidence interval for the sample median.
pub fn bootstrap_median_ci(
    sample: &[f64],
    resamples: usize,
    level: f64,
    master: u64,
) -> (f64, f64) {
    use rand::Rng;
    let mut medians = Vec::with_capacity(resamples);
    let mut buf = vec![0.0; sample.len()];
    for r in 0..resamples {
        let mut rng = crate::rng::derive_rng(master, &[crate::rng::tag::BOOTSTRAP, r as u64]);
        for slot in buf.iter_mut() {
            *slot = sample[rng.random_range(0..sample.len())];
        }
        buf.sort_by(|a, b| a.partial_cmp(b).unwrap());
        medians.push(quantile(&buf, 0.5));
    }
    medians.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = (1.0 - level) / 2.0;
    (quantile(&medians, alpha), quantile(&medians, 1.0 - alpha))
}
