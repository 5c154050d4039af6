//! Deterministic macroscopic-limit objects and the experiments that compare
//! them with simulation: limit trajectories `z_{x,a}(t)`, the fluid-limit
//! rate `λ_x(y,t)` and its ODE, the two-parameter density `ρ_β`, rectangle
//! statistics for empirical permutation measures, and sup-deviation /
//! random-particle Monte Carlo experiments.
//!
//! All removable singularities (`t → 0`, `β → 0`) switch to 3-term series
//! below 1e−4, where double-precision cancellation in the closed forms
//! exceeds the series truncation error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::perm::Permutation;
use crate::process::{MallowsProcessPath, Replayer};
use crate::rng;
use crate::stats;

/// Switch point between closed forms and series in the time-like parameter.
pub const T_SERIES_EPS: f64 = 1e-4;
/// Same for the density parameter β.
pub const BETA_SERIES_EPS: f64 = 1e-4;

/// `log(e^a + e^b)` without overflow; tolerates −∞ inputs.
#[inline]
fn lse2(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + f64::ln_1p((lo - hi).exp())
}

/// Limit trajectory of the element starting at macroscopic position `x`
/// with location `a` at time 0:
/// `z_{x,a}(t) = (1/t) log((e^{xt}(1−a) + a e^t)/(e^{xt}(1−a) + a))`,
/// continued through `t = 0` by `z_{x,a}(0) = a`.
pub fn z_curve(x: f64, a: f64, t: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&a));
    if t.abs() < T_SERIES_EPS {
        // z = a + t·a(1−a)(1−2x)/2 + t²·a(6a²x² − 6a²x + 2a² − 9ax² + 9ax
        //     − 3a + 3x² − 3x + 1)/6 + O(t³)
        let c1 = a * (1.0 - a) * (1.0 - 2.0 * x) / 2.0;
        let c2 = a
            * (6.0 * a * a * x * x - 6.0 * a * a * x + 2.0 * a * a - 9.0 * a * x * x
                + 9.0 * a * x
                - 3.0 * a
                + 3.0 * x * x
                - 3.0 * x
                + 1.0)
            / 6.0;
        return a + t * c1 + t * t * c2;
    }
    let log_one_minus_a = f64::ln_1p(-a);
    let log_a = a.ln();
    let num = lse2(x * t + log_one_minus_a, t + log_a);
    let den = lse2(x * t + log_one_minus_a, log_a);
    ((num - den) / t).clamp(0.0, 1.0)
}

/// Parameters of a limit trajectory.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LimitCurve {
    pub x: f64,
    pub a: f64,
}

impl LimitCurve {
    pub fn eval(&self, t: f64) -> f64 {
        z_curve(self.x, self.a, t)
    }
}

/// Fluid-limit jump rate
/// `λ_x(y,t) = (1/t)(−y + x e^{tx}(1 − e^{−ty})/(e^{tx} − 1))`,
/// with `λ_x(y,0) = ½ y(x−y)` and the `x = 0` limit
/// `λ_0(y,t) = (1/t)(−y + (1 − e^{−ty})/t)`.
pub fn lambda_rate(x: f64, y: f64, t: f64) -> f64 {
    if t.abs() < T_SERIES_EPS {
        // y(12(x−y) + 2t(x−y)(x−2y) − t²y(x−y)²)/24 + O(t³); valid for all x.
        let d = x - y;
        return y * (12.0 * d + 2.0 * t * d * (x - 2.0 * y) - t * t * y * d * d) / 24.0;
    }
    // x e^{tx}/(e^{tx}−1) = −x/expm1(−tx), stable uniformly in x > 0.
    let g = if x == 0.0 {
        1.0 / t
    } else {
        -x / f64::exp_m1(-t * x)
    };
    (-y + g * (-f64::exp_m1(-t * y))) / t
}

/// Explicit solution of `ẏ = λ_x(y, t)` with `y(0) = x(1−a)`:
/// `y(t) = (1/t) log(a + (1−a) e^{tx})`.
pub fn explicit_ode_solution(x: f64, a: f64, t: f64) -> f64 {
    if t.abs() < T_SERIES_EPS {
        return (1.0 - a) * x + t * x * x * a * (1.0 - a) / 2.0;
    }
    lse2(a.ln(), f64::ln_1p(-a) + t * x) / t
}

/// Classical fixed-step RK4 for `ẏ = λ_x(y, t)` from `t_span.0` to
/// `t_span.1`; returns the sampled `(t, y)` polyline. The solution is
/// clamped into the invariant region `[0, x]` after each step.
pub fn ode_solve(
    x: f64,
    y0: f64,
    t_span: (f64, f64),
    step: f64,
) -> Result<Vec<(f64, f64)>, Error> {
    if step <= 0.0 {
        return Err(Error::InvalidParameter("RK4 step must be positive".into()));
    }
    if !(0.0..=x).contains(&y0) {
        return Err(Error::InvalidParameter(format!(
            "y0 = {y0} outside [0, x = {x}]"
        )));
    }
    let (t0, t1) = t_span;
    let span = t1 - t0;
    let n_steps = (span.abs() / step).ceil().max(1.0) as usize;
    let h = span / n_steps as f64;
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut t = t0;
    let mut y = y0;
    out.push((t, y));
    for _ in 0..n_steps {
        let k1 = lambda_rate(x, y, t);
        let k2 = lambda_rate(x, y + 0.5 * h * k1, t + 0.5 * h);
        let k3 = lambda_rate(x, y + 0.5 * h * k2, t + 0.5 * h);
        let k4 = lambda_rate(x, y + h * k3, t + h);
        y = (y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).clamp(0.0, x);
        t += h;
        out.push((t, y));
    }
    Ok(out)
}

/// Two-parameter density on `[0,1]²`:
/// `ρ_β(x,y) = (β/2) sinh(β/2) / (e^{−β/4} cosh(β(x−y)/2)
///             − e^{β/4} cosh(β(x+y−1)/2))²`, with `ρ_0 ≡ 1`.
pub fn rho_density(beta: f64, x: f64, y: f64) -> f64 {
    if beta.abs() < BETA_SERIES_EPS {
        // 1 + β(x + y − 2xy − ½) + β²(3x²y² − 3x²y + x²/2 − 3xy² + 3xy
        //   − x/2 + y²/2 − y/2 + 1/12) + O(β³)
        let c1 = x + y - 2.0 * x * y - 0.5;
        let c2 = 3.0 * x * x * y * y - 3.0 * x * x * y + 0.5 * x * x - 3.0 * x * y * y
            + 3.0 * x * y
            - 0.5 * x
            + 0.5 * y * y
            - 0.5 * y
            + 1.0 / 12.0;
        return 1.0 + beta * c1 + beta * beta * c2;
    }
    let inner = (-beta / 4.0).exp() * (beta * (x - y) / 2.0).cosh()
        - (beta / 4.0).exp() * (beta * (x + y - 1.0) / 2.0).cosh();
    (beta / 2.0) * (beta / 2.0).sinh() / (inner * inner)
}

/// Strip mass `F_x(z) = ∫_{[0,x]×[z,1]} ρ_t`, in closed form
/// `(1/t) log(e^{xt}(e^t−1) / (e^{(x+z)t} − e^{xt} − e^{zt} + e^t))`,
/// continued through `t = 0` by `x(1−z)`. Strictly decreasing in `z`,
/// from `F_x(0) = x` to `F_x(1) = 0`.
pub fn f_map(x: f64, t: f64, z: f64) -> f64 {
    if t.abs() < T_SERIES_EPS {
        // x(1−z) + t·xz(z−1)(x−1)/2 − t²·xz(z−1)(2z−1)(2x−1)(x−1)/12 + O(t³)
        let c1 = x * z * (z - 1.0) * (x - 1.0) / 2.0;
        let c2 = -x * z * (z - 1.0) * (2.0 * z - 1.0) * (2.0 * x - 1.0) * (x - 1.0) / 12.0;
        return x * (1.0 - z) + t * c1 + t * t * c2;
    }
    // Denominator factored as (e^{xt}−1)(e^{zt}−1) + (e^t−1); for t < 0 both
    // numerator and denominator are negative, so the ratio stays positive.
    let num = (x * t).exp() * f64::exp_m1(t);
    let den = f64::exp_m1(x * t) * f64::exp_m1(z * t) + f64::exp_m1(t);
    ((num / den).ln() / t).clamp(0.0, x.min(1.0))
}

/// Inverse of `z ↦ F_x(z)` by bisection to 1e−12.
pub fn f_inverse(x: f64, t: f64, w: f64) -> Result<f64, Error> {
    if !(0.0..=x + 1e-12).contains(&w) {
        return Err(Error::InvalidParameter(format!(
            "F-inverse target {w} outside [0, {x}]"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64); // F decreasing: F(lo)=x ≥ w ≥ F(hi)=0
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f_map(x, t, mid) >= w {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Cumulative density mass `M(u, v) = ∫_{[0,u]×[0,v]} ρ_t = u − F_u(v)`.
pub fn rho_box_integral(beta: f64, u: f64, v: f64) -> f64 {
    if u <= 0.0 || v <= 0.0 {
        return 0.0;
    }
    (u - f_map(u.min(1.0), beta, v.min(1.0))).max(0.0)
}

/// An axis-aligned rectangle `[a,b] × [c,d] ⊆ [0,1]²`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Rect {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Empirical rectangle mass
/// `Δ_R(σ) = (1/n) #{i : i/n ∈ [a,b], σ(i)/n ∈ [c,d]}`.
pub fn delta_rect(p: &Permutation, rect: Rect) -> f64 {
    let n = p.len();
    if n == 0 || rect.b < rect.a || rect.d < rect.c {
        return 0.0;
    }
    let mut count = 0usize;
    for i in 1..=n {
        let x = i as f64 / n as f64;
        let y = p.apply(i) as f64 / n as f64;
        if rect.a <= x && x <= rect.b && rect.c <= y && y <= rect.d {
            count += 1;
        }
    }
    count as f64 / n as f64
}

/// Density mass on the `(k+1)×(k+1)` lattice of grid corners:
/// `corner[a][c] = ∫_{[0, a/k]×[0, c/k]} ρ_β`. Precompute once and reuse
/// across replicas of a discrepancy experiment.
pub fn permuton_corner_masses(beta: f64, k: usize) -> Vec<Vec<f64>> {
    (0..=k)
        .map(|a| {
            (0..=k)
                .map(|c| rho_box_integral(beta, a as f64 / k as f64, c as f64 / k as f64))
                .collect()
        })
        .collect()
}

/// Max over all grid-corner rectangles of `|Δ_R − ∫_R ρ_β|` given
/// precomputed corner masses (an approximation of the rectangle-sup
/// distance between the empirical measure of `p` and the density).
pub fn box_discrepancy_with(p: &Permutation, corners: &[Vec<f64>]) -> f64 {
    let k = corners.len() - 1;
    let n = p.len();
    // Four cumulative point counts at corners, distinguishing closed/open
    // boundaries so closed rectangles count boundary atoms correctly:
    // le_le[a][c] = #{i : i/n ≤ a/k, σ(i)/n ≤ c/k}, etc.
    // Built by marking each point's threshold corner, then prefix-summing.
    let mut grids = vec![vec![vec![0i64; k + 2]; k + 2]; 4];
    for i in 1..=n {
        let x = i as f64 / n as f64;
        let y = p.apply(i) as f64 / n as f64;
        // The point contributes to corner (a, c) of grid (≤,≤) iff a ≥ the
        // smallest corner index with a/k ≥ x, i.e. a ≥ ceil(x·k); mark that
        // threshold cell and prefix-sum later.
        let a_le = (x * k as f64).ceil() as usize; // first a with a/k ≥ x
        let a_lt = {
            let s = x * k as f64;
            if s.fract() == 0.0 {
                s as usize + 1
            } else {
                s.ceil() as usize
            }
        }; // first a with a/k > x
        let c_le = (y * k as f64).ceil() as usize;
        let c_lt = {
            let s = y * k as f64;
            if s.fract() == 0.0 {
                s as usize + 1
            } else {
                s.ceil() as usize
            }
        };
        for (g, (ai, ci)) in [(a_le, c_le), (a_lt, c_le), (a_le, c_lt), (a_lt, c_lt)]
            .into_iter()
            .enumerate()
        {
            if ai <= k + 1 && ci <= k + 1 {
                grids[g][ai][ci] += 1;
            }
        }
    }
    for g in grids.iter_mut() {
        for a in 0..=k {
            for c in 0..=k {
                let below = if a > 0 { g[a - 1][c] } else { 0 };
                let left = if c > 0 { g[a][c - 1] } else { 0 };
                let diag = if a > 0 && c > 0 { g[a - 1][c - 1] } else { 0 };
                g[a][c] += below + left - diag;
            }
        }
    }
    let le_le = &grids[0];
    let lt_le = &grids[1];
    let le_lt = &grids[2];
    let lt_lt = &grids[3];

    let nf = n as f64;
    let mut worst = 0.0f64;
    // For fixed column band (c, d), the rectangle statistic separates into
    // P(b) − Q(a) with a ≤ b; sweep b keeping running min/max of Q.
    for c in 0..k {
        for d in c + 1..=k {
            let p_of = |b: usize| -> f64 {
                (le_le[b][d] - le_lt[b][c]) as f64 / nf
                    - (corners[b][d] - corners[b][c])
            };
            let q_of = |a: usize| -> f64 {
                (lt_le[a][d] - lt_lt[a][c]) as f64 / nf
                    - (corners[a][d] - corners[a][c])
            };
            let mut q_min = f64::INFINITY;
            let mut q_max = f64::NEG_INFINITY;
            for b in 0..=k {
                let q = q_of(b);
                q_min = q_min.min(q);
                q_max = q_max.max(q);
                let pv = p_of(b);
                worst = worst.max(pv - q_min).max(q_max - pv);
            }
        }
    }
    worst
}

/// Convenience wrapper computing the corner masses on the fly.
pub fn box_discrepancy(p: &Permutation, beta: f64, grid_k: usize) -> f64 {
    box_discrepancy_with(p, &permuton_corner_masses(beta, grid_k))
}

/// Per-replica summary of the sup-deviation statistic.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicaDeviation {
    pub replica: u64,
    /// max over interior elements of sup_t |X_i(t) − z_{x_i, a_i}(t)|
    pub max_sup_dev: f64,
    /// median of the per-element sups
    pub p50: f64,
    /// 95th percentile of the per-element sups
    pub p95: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeviationReport {
    pub n: usize,
    pub t_max: f64,
    pub alpha: f64,
    pub replicas: Vec<ReplicaDeviation>,
    /// set when the interior index range (αn, (1−α)n) contains no element
    pub no_interior_elements: bool,
}

impl DeviationReport {
    pub fn max_devs(&self) -> Vec<f64> {
        self.replicas.iter().map(|r| r.max_sup_dev).collect()
    }
}

/// Compare every interior element's rescaled trajectory on `t ∈ [−T, T]`
/// with its limit curve `z_{i/n, X_i(0)}`, taking the sup over a uniform
/// `grid_size`-point t-grid plus every jump time (both one-sided limits).
pub fn sup_deviation_experiment(
    master: u64,
    n: usize,
    t_max: f64,
    alpha: f64,
    replicas: u64,
    grid_size: usize,
) -> Result<DeviationReport, Error> {
    if !(0.0..0.5).contains(&alpha) || t_max <= 0.0 || grid_size < 2 {
        return Err(Error::InvalidParameter(
            "need 0 ≤ alpha < 1/2, t_max > 0, grid_size ≥ 2".into(),
        ));
    }
    let interior: Vec<usize> = (1..=n)
        .filter(|&i| {
            let z = i as f64;
            z > alpha * n as f64 && z < (1.0 - alpha) * n as f64
        })
        .collect();
    if interior.is_empty() {
        return Ok(DeviationReport {
            n,
            t_max,
            alpha,
            replicas: Vec::new(),
            no_interior_elements: true,
        });
    }
    let rows: Vec<ReplicaDeviation> = (0..replicas)
        .into_par_iter()
        .map(|rep| sup_deviation_single(master, rep, n, t_max, &interior, grid_size))
        .collect::<Result<_, _>>()?;
    Ok(DeviationReport {
        n,
        t_max,
        alpha,
        replicas: rows,
        no_interior_elements: false,
    })
}

fn sup_deviation_single(
    master: u64,
    replica: u64,
    n: usize,
    t_max: f64,
    interior: &[usize],
    grid_size: usize,
) -> Result<ReplicaDeviation, Error> {
    let nf = n as f64;
    let q_hi = (t_max / nf).exp();
    let q_lo = (-t_max / nf).exp();
    let pp = MallowsProcessPath::simulate(master, replica, n, q_hi)?;

    // Pass 1: anchor values a_i = X_i(0) = σ_{q=1}(i)/n.
    let mut replay = Replayer::new(&pp)?;
    replay.advance_to(1.0);
    let a: Vec<f64> = (1..=n)
        .map(|i| replay.current().apply(i) as f64 / nf)
        .collect();

    let mut interior_flag = vec![false; n + 1];
    for &i in interior {
        interior_flag[i] = true;
    }
    let mut sup = vec![0.0f64; n + 1];
    let mut bump = |i: usize, pos: f64, t: f64| {
        if interior_flag[i] {
            let z = z_curve(i as f64 / nf, a[i - 1], t);
            let d = (pos - z).abs();
            if d > sup[i] {
                sup[i] = d;
            }
        }
    };

    // Pass 2: walk the merged event sequence and the uniform t-grid together.
    let mut replay = Replayer::new(&pp)?;
    replay.advance_to(q_lo);
    let mut next_grid = 0usize;
    let grid_t = |k: usize| -> f64 {
        -t_max + 2.0 * t_max * k as f64 / (grid_size - 1) as f64
    };
    loop {
        let ev = replay.peek().filter(|&(q, _)| q <= q_hi);
        let ev_t = ev.map(|(q, _)| nf * q.ln());
        let gr_t = (next_grid < grid_size).then(|| grid_t(next_grid));
        match (ev_t, gr_t) {
            (Some(te), Some(tg)) if te <= tg => {
                let (_, i) = ev.unwrap();
                bump(i, replay.current().apply(i) as f64 / nf, te);
                let (_, _, partner) = replay.step().unwrap();
                bump(partner, replay.current().apply(partner) as f64 / nf, te);
                bump(i, replay.current().apply(i) as f64 / nf, te);
            }
            (_, Some(tg)) => {
                for &i in interior {
                    bump(i, replay.current().apply(i) as f64 / nf, tg);
                }
                next_grid += 1;
            }
            (Some(te), None) => {
                let (_, i) = ev.unwrap();
                bump(i, replay.current().apply(i) as f64 / nf, te);
                let (_, _, partner) = replay.step().unwrap();
                bump(partner, replay.current().apply(partner) as f64 / nf, te);
                bump(i, replay.current().apply(i) as f64 / nf, te);
            }
            (None, None) => break,
        }
    }

    let mut devs: Vec<f64> = interior.iter().map(|&i| sup[i]).collect();
    devs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(ReplicaDeviation {
        replica,
        max_sup_dev: *devs.last().unwrap(),
        p50: stats::quantile(&devs, 0.5),
        p95: stats::quantile(&devs, 0.95),
    })
}

/// One time-slice comparison from the random-particle experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParticleSliceStat {
    pub t: f64,
    pub ks_distance: f64,
    pub ks_p_value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParticleReport {
    pub n: usize,
    pub slices: Vec<ParticleSliceStat>,
    /// multivariate energy distance between the two trajectory samples
    pub energy_distance: f64,
}

/// Track a uniformly chosen element of each simulated system on a fixed
/// t-grid, and compare its finite-dimensional law against trajectories
/// `t ↦ z_{X,A}(t)` with `X, A` independent uniform on [0,1].
pub fn random_particle_experiment(
    master: u64,
    n: usize,
    t_grid: &[f64],
    replicas: u64,
) -> Result<ParticleReport, Error> {
    if t_grid.is_empty() {
        return Ok(ParticleReport {
            n,
            slices: Vec::new(),
            energy_distance: 0.0,
        });
    }
    let nf = n as f64;
    let q_hi = t_grid
        .iter()
        .fold(1.0f64, |m, &t| m.max((t / nf).exp()));
    let sims: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>, Error> {
            let pp = MallowsProcessPath::simulate(master, rep, n, q_hi)?;
            let mut r = rng::derive_rng(master, &[rng::tag::PARTICLE, rep, 0]);
            use rand::Rng;
            let i = r.random_range(1..=n);
            Ok(pp.trajectory(i, t_grid)?.positions)
        })
        .collect::<Result<_, _>>()?;
    let limits: Vec<Vec<f64>> = (0..replicas)
        .map(|rep| {
            let mut r = rng::derive_rng(master, &[rng::tag::PARTICLE, rep, 1]);
            use rand::Rng;
            let x: f64 = r.random();
            let a: f64 = r.random();
            t_grid.iter().map(|&t| z_curve(x, a, t)).collect()
        })
        .collect();

    let mut slices = Vec::with_capacity(t_grid.len());
    for (k, &t) in t_grid.iter().enumerate() {
        let mut s1: Vec<f64> = sims.iter().map(|v| v[k]).collect();
        let mut s2: Vec<f64> = limits.iter().map(|v| v[k]).collect();
        let (d, p) = stats::ks_two_sample(&mut s1, &mut s2);
        slices.push(ParticleSliceStat {
            t,
            ks_distance: d,
            ks_p_value: p,
        });
    }
    Ok(ParticleReport {
        n,
        slices,
        energy_distance: energy_distance_multi(&sims, &limits),
    })
}

/// Energy distance `2E‖X−Y‖ − E‖X−X′‖ − E‖Y−Y′‖` between two samples of
/// vectors, Euclidean norm.
pub fn energy_distance_multi(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let dist = |u: &[f64], v: &[f64]| -> f64 {
        u.iter()
            .zip(v)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mean_cross = |s: &[Vec<f64>], t: &[Vec<f64>]| -> f64 {
        if s.is_empty() || t.is_empty() {
            return 0.0;
        }
        let mut acc = 0.0;
        for u in s {
            for v in t {
                acc += dist(u, v);
            }
        }
        acc / (s.len() as f64 * t.len() as f64)
    };
    (2.0 * mean_cross(a, b) - mean_cross(a, a) - mean_cross(b, b)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_at_zero_is_a() {
        for &x in &[0.0, 0.2, 0.5, 1.0] {
            for &a in &[0.0, 0.3, 1.0] {
                assert_eq!(z_curve(x, a, 0.0), a);
            }
        }
    }

    #[test]
    fn z_limits_at_infinity() {
        // Approach to the limits is O(1/t) with explicit first-order term
        // ln(a/(1−a))/t; check the corrected value tightly at t = ±50 and
        // the raw limit loosely at t = ±10⁶.
        for &x in &[0.2, 0.5, 0.8] {
            for &a in &[0.2f64, 0.5, 0.8] {
                let corr = (a / (1.0 - a)).ln() / 50.0;
                assert!((z_curve(x, a, 50.0) - (1.0 - x + corr)).abs() < 1e-5);
                assert!((z_curve(x, a, -50.0) - (x + corr)).abs() < 1e-5);
                assert!((z_curve(x, a, 1e6) - (1.0 - x)).abs() < 1e-5);
                assert!((z_curve(x, a, -1e6) - x).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn z_reversal_identity() {
        for xi in 0..20 {
            for ai in 0..20 {
                for ti in 0..20 {
                    let x = xi as f64 / 19.0;
                    let a = ai as f64 / 19.0;
                    let t = -3.0 + 6.0 * ti as f64 / 19.0;
                    let lhs = 1.0 - z_curve(x, 1.0 - a, -t);
                    let rhs = z_curve(x, a, t);
                    assert!((lhs - rhs).abs() < 1e-12, "x={x} a={a} t={t}");
                }
            }
        }
    }

    #[test]
    fn z_series_matches_closed_form_at_branch() {
        for &x in &[0.1, 0.5, 0.9] {
            for &a in &[0.2, 0.7] {
                for &t in &[1e-4, -1e-4, 2e-4, -2e-4] {
                    let series = {
                        let c1 = a * (1.0 - a) * (1.0 - 2.0 * x) / 2.0;
                        a + t * c1
                    };
                    assert!((z_curve(x, a, t) - series).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn z_monotone_in_a() {
        for ti in 0..10 {
            let t = -4.0 + 8.0 * ti as f64 / 9.0;
            for xi in 0..=10 {
                let x = xi as f64 / 10.0;
                let mut prev = -1.0;
                for ai in 0..=50 {
                    let z = z_curve(x, ai as f64 / 50.0, t);
                    assert!(z >= prev - 1e-12);
                    prev = z;
                }
            }
        }
    }

    #[test]
    fn lambda_special_values() {
        assert!((lambda_rate(0.6, 0.2, 0.0) - 0.5 * 0.2 * 0.4).abs() < 1e-15);
        for &t in &[-2.0, 0.0, 1.0, 3.0] {
            assert!(lambda_rate(0.5, 0.5, t).abs() < 1e-12);
            assert!(lambda_rate(0.5, 0.0, t).abs() < 1e-14);
        }
    }

    #[test]
    fn lambda_x_zero_branch() {
        // λ_0(y,t) = (1/t)(−y + (1−e^{−ty})/t)
        for &t in &[0.5, 2.0, -1.0] {
            for &y in &[0.1, 0.6, 1.0] {
                let expected = (-y + (-f64::exp_m1(-t * y)) / t) / t;
                assert!((lambda_rate(0.0, y, t) - expected).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn lambda_continuous_at_series_branch() {
        // Series and closed form evaluated at the same t, just above the
        // switch point, must agree to well under the series truncation error.
        for &x in &[0.0f64, 0.3, 0.9] {
            for &y in &[0.1f64, 0.5] {
                for &t in &[1.2e-4, -1.2e-4] {
                    let d = x - y;
                    let series =
                        y * (12.0 * d + 2.0 * t * d * (x - 2.0 * y) - t * t * y * d * d) / 24.0;
                    let closed = lambda_rate(x, y, t);
                    assert!((series - closed).abs() < 1e-11, "x={x} y={y} t={t}");
                }
            }
        }
    }

    #[test]
    fn lambda_lipschitz_on_box() {
        // Finite-difference gradient in (x, y) bounded over [0,1]² × [0,5].
        let h = 1e-5;
        let mut max_grad = 0.0f64;
        for xi in 0..=20 {
            for yi in 0..=20 {
                for ti in 0..=10 {
                    let x = xi as f64 / 20.0;
                    let y = yi as f64 / 20.0;
                    let t = ti as f64 / 2.0;
                    let gx = (lambda_rate((x + h).min(1.0), y, t)
                        - lambda_rate((x - h).max(0.0), y, t))
                        / (2.0 * h);
                    let gy = (lambda_rate(x, (y + h).min(1.0), t)
                        - lambda_rate(x, (y - h).max(0.0), t))
                        / (2.0 * h);
                    max_grad = max_grad.max(gx.abs()).max(gy.abs());
                }
            }
        }
        assert!(max_grad < 10.0, "max |∇λ| = {max_grad}");
    }

    #[test]
    fn ode_constant_solutions() {
        let sol = ode_solve(0.6, 0.6, (0.0, 5.0), 1e-2).unwrap();
        assert!(sol.iter().all(|&(_, y)| (y - 0.6).abs() < 1e-9));
        let sol = ode_solve(0.6, 0.0, (0.0, 5.0), 1e-2).unwrap();
        assert!(sol.iter().all(|&(_, y)| y.abs() < 1e-12));
    }

    #[test]
    fn ode_matches_explicit_solution() {
        for &x in &[0.25, 0.7] {
            for &a in &[0.2, 0.8] {
                let y0 = x * (1.0 - a);
                let sol = ode_solve(x, y0, (0.0, 5.0), 1e-3).unwrap();
                for &(t, y) in sol.iter().step_by(250) {
                    let exact = explicit_ode_solution(x, a, t);
                    assert!((y - exact).abs() < 1e-8, "x={x} a={a} t={t}");
                }
            }
        }
    }

    #[test]
    fn ode_stays_in_invariant_region() {
        let sol = ode_solve(0.5, 0.25, (0.0, 8.0), 1e-3).unwrap();
        for &(_, y) in &sol {
            assert!(y > 0.0 && y < 0.5);
        }
    }

    #[test]
    fn rho_uniform_at_zero() {
        for xi in 0..=10 {
            for yi in 0..=10 {
                let v = rho_density(0.0, xi as f64 / 10.0, yi as f64 / 10.0);
                assert!((v - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rho_symmetries() {
        for &beta in &[0.5, 2.0, 10.0] {
            for xi in 0..=12 {
                for yi in 0..=12 {
                    let x = xi as f64 / 12.0;
                    let y = yi as f64 / 12.0;
                    let v = rho_density(beta, x, y);
                    assert!((v - rho_density(beta, y, x)).abs() < 1e-12 * v.abs());
                    assert!(
                        (v - rho_density(beta, 1.0 - x, 1.0 - y)).abs() < 1e-10 * v.abs().max(1.0)
                    );
                    assert!(v > 0.0);
                }
            }
        }
    }

    #[test]
    fn rho_corner_closed_form() {
        for &beta in &[0.3, 1.0, 4.0, 10.0] {
            let expected = beta * f64::exp_m1(beta)
                / (beta.exp() + (-beta).exp() - 2.0);
            let got = rho_density(beta, 1.0, 0.0);
            assert!(
                (got - expected).abs() < 1e-10 * expected,
                "beta={beta}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn rho_marginals_integrate_to_one() {
        // Composite Simpson over y for several x; 1e−6 target.
        let simpson = |beta: f64, x: f64| -> f64 {
            let m = 2000usize;
            let h = 1.0 / m as f64;
            let mut s = rho_density(beta, x, 0.0) + rho_density(beta, x, 1.0);
            for k in 1..m {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                s += w * rho_density(beta, x, k as f64 * h);
            }
            s * h / 3.0
        };
        for &beta in &[0.5, 2.0, 10.0] {
            for &x in &[0.1, 0.5, 0.85] {
                let v = simpson(beta, x);
                assert!((v - 1.0).abs() < 1e-6, "beta={beta} x={x}: {v}");
            }
        }
    }

    #[test]
    fn f_map_endpoints() {
        for &x in &[0.2, 0.7, 1.0] {
            for &t in &[-3.0, 0.0, 0.5, 4.0] {
                assert!(f_map(x, t, 1.0).abs() < 1e-12);
                assert!((f_map(x, t, 0.0) - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn f_map_strictly_decreasing_in_z() {
        for &t in &[-2.0, 0.0, 1.0, 3.0] {
            let mut prev = f64::INFINITY;
            for zi in 0..=40 {
                let v = f_map(0.6, t, zi as f64 / 40.0);
                assert!(v < prev + 1e-12);
                prev = v;
            }
        }
    }

    #[test]
    fn f_of_z_curve_is_explicit_solution() {
        for xi in 1..=8 {
            for ai in 0..=8 {
                for ti in 0..=8 {
                    let x = xi as f64 / 8.0;
                    let a = ai as f64 / 8.0;
                    let t = -2.0 + 4.5 * ti as f64 / 8.0;
                    let lhs = f_map(x, t, z_curve(x, a, t));
                    let rhs = explicit_ode_solution(x, a, t);
                    assert!((lhs - rhs).abs() < 1e-10, "x={x} a={a} t={t}: {lhs} {rhs}");
                }
            }
        }
    }

    #[test]
    fn f_inverse_roundtrip() {
        for &t in &[-1.0, 0.0, 2.0] {
            for zi in 0..=10 {
                let z = zi as f64 / 10.0;
                let w = f_map(0.8, t, z);
                let back = f_inverse(0.8, t, w).unwrap();
                assert!((back - z).abs() < 1e-9, "t={t} z={z} back={back}");
            }
        }
        assert!(f_inverse(0.5, 1.0, 0.9).is_err());
    }

    #[test]
    fn delta_rect_basics() {
        let p = Permutation::from_one_line(&[2, 1, 3, 4]).unwrap();
        assert_eq!(
            delta_rect(&p, Rect { a: 0.0, b: 1.0, c: 0.0, d: 1.0 }),
            1.0
        );
        assert_eq!(
            delta_rect(&p, Rect { a: 0.9, b: 0.1, c: 0.0, d: 1.0 }),
            0.0
        );
    }

    #[test]
    fn delta_rect_reads_left_inversions() {
        // R = [0, i/n] × [σ(i)/n, 1] has mass (ℓ_i + 1)/n.
        let p = Permutation::from_one_line(&[3, 1, 4, 2, 5]).unwrap();
        let iv = p.to_inversion_vector();
        let n = 5.0;
        for i in 1..=5usize {
            let r = Rect {
                a: 0.0,
                b: i as f64 / n,
                c: p.apply(i) as f64 / n,
                d: 1.0,
            };
            assert!(
                (delta_rect(&p, r) - (iv.get(i) as f64 + 1.0) / n).abs() < 1e-12,
                "i={i}"
            );
        }
    }

    #[test]
    fn corner_masses_consistent_with_uniform() {
        let corners = permuton_corner_masses(0.0, 10);
        for a in 0..=10 {
            for c in 0..=10 {
                let expected = (a as f64 / 10.0) * (c as f64 / 10.0);
                assert!((corners[a][c] - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn box_discrepancy_identity_vs_uniform() {
        // The identity permutation concentrates on the diagonal; against the
        // uniform density the worst rectangle (the lower-left triangle side)
        // carries discrepancy ≈ 1/4 at the [0,½]×[0,½] corner rectangle.
        let n = 400;
        let id = Permutation::identity(n);
        let d = box_discrepancy(&id, 0.0, 50);
        assert!((d - 0.25).abs() < 0.02, "d={d}");
    }

    #[test]
    fn box_discrepancy_of_matching_sample_is_small() {
        // A Mallows(n, q) draw with β = n(q−1) ≈ 0 against ρ_0.
        let mut r = crate::rng::derive_rng(31, &[0]);
        let p = crate::perm::sample_mallows(&mut r, 500, 1.0);
        let d = box_discrepancy(&p, 0.0, 50);
        assert!(d < 0.1, "d={d}");
    }

    #[test]
    fn sup_deviation_no_interior_flag() {
        let rep = sup_deviation_experiment(1, 1, 1.0, 0.4, 2, 8).unwrap();
        assert!(rep.no_interior_elements);
        assert!(rep.replicas.is_empty());
    }

    #[test]
    fn sup_deviation_moderate_n() {
        let rep = sup_deviation_experiment(42, 150, 1.5, 0.1, 4, 128).unwrap();
        assert!(!rep.no_interior_elements);
        assert_eq!(rep.replicas.len(), 4);
        for r in &rep.replicas {
            assert!(r.max_sup_dev > 0.0 && r.max_sup_dev < 0.5, "{r:?}");
            assert!(r.p50 <= r.p95 && r.p95 <= r.max_sup_dev);
        }
    }

    #[test]
    fn random_particle_time_zero_uniform() {
        let rep = random_particle_experiment(7, 100, &[0.0], 800).unwrap();
        assert_eq!(rep.slices.len(), 1);
        // Both marginals uniform on [0,1] (up to 1/n): KS should be small and
        // the p-value non-degenerate.
        assert!(rep.slices[0].ks_distance < 0.08, "{:?}", rep.slices[0]);
        assert!(rep.energy_distance < 0.05, "{}", rep.energy_distance);
    }

    #[test]
    fn random_particle_empty_grid() {
        let rep = random_particle_experiment(7, 50, &[], 10).unwrap();
        assert!(rep.slices.is_empty());
        assert_eq!(rep.energy_distance, 0.0);
    }
}
