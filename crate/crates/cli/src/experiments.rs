//! The five experiment runners. Each consumes a resolved config, runs the
//! replica loop (replica-level parallelism with per-replica derived rng
//! streams, so results are identical at any thread count), and returns a
//! typed report.

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::report::*;
use mallows_core::{birth, global, local, perm, process, rng, stats, Error};
use rayon::prelude::*;

const SAMPLE_CHUNK: u64 = 1_000;

pub fn run_sample(cfg: &ExperimentConfig) -> Result<Report<SampleRow>, Error> {
    let key = (cfg.experiment.as_str().to_string(), cfg.seed, cfg.n);
    if cfg.replicas == 0 {
        return Ok(Report::new(cfg.clone(), Vec::new()));
    }
    let oracle = if cfg.n <= 9 {
        Some(perm::enumerate_mallows(cfg.n, cfg.q)?)
    } else {
        None
    };
    let chunks = cfg.replicas.div_ceil(SAMPLE_CHUNK);
    let cells = oracle.as_ref().map_or(1, |o| o.len());
    // (histogram over ranks when the oracle exists, total inversions)
    let (counts, inv_sum) = (0..chunks)
        .into_par_iter()
        .fold(
            || (vec![0u64; cells], 0u64),
            |(mut acc, mut inv), chunk| {
                let mut r = rng::derive_rng(cfg.seed, &[rng::tag::SAMPLE, chunk]);
                let lo = chunk * SAMPLE_CHUNK;
                let hi = (lo + SAMPLE_CHUNK).min(cfg.replicas);
                for _ in lo..hi {
                    let s = perm::sample_mallows(&mut r, cfg.n, cfg.q);
                    inv += s.inversions();
                    if oracle.is_some() {
                        acc[s.to_inversion_vector().lehmer_rank() as usize] += 1;
                    }
                }
                (acc, inv)
            },
        )
        .reduce(
            || (vec![0u64; cells], 0u64),
            |(mut a, ia), (b, ib)| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                (a, ia + ib)
            },
        );
    let tv = oracle.map(|pmf| {
        let emp: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 / cfg.replicas as f64)
            .collect();
        stats::total_variation(&emp, &pmf)
    });
    let rows = vec![SampleRow {
        experiment: key.0,
        seed: key.1,
        n: key.2,
        q: cfg.q,
        replicas: cfg.replicas,
        tv_vs_oracle: tv,
        mean_inversions: inv_sum as f64 / cfg.replicas as f64,
    }];
    Ok(Report::new(cfg.clone(), rows).with("replicas", cfg.replicas as f64))
}

/// Trajectory dump of `sample --trajectory-elements`: positions of the
/// requested elements along the evolving permutation, on a uniform t-grid
/// over [−t_max, t_max].
pub fn run_trajectories(cfg: &ExperimentConfig) -> Result<Report<TrajectoryRow>, Error> {
    let t_grid: Vec<f64> = (0..cfg.grid_size)
        .map(|k| -cfg.t_max + 2.0 * cfg.t_max * k as f64 / (cfg.grid_size - 1) as f64)
        .collect();
    let q_hi = (cfg.t_max / cfg.n as f64).exp();
    let per_replica: Vec<Vec<TrajectoryRow>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|rep| {
            let path = process::MallowsProcessPath::simulate(cfg.seed, rep, cfg.n, q_hi)?;
            let mut rows = Vec::new();
            for &i in &cfg.trajectory_elements {
                let tr = path.trajectory(i, &t_grid)?;
                for (&t, &pos) in tr.times.iter().zip(&tr.positions) {
                    rows.push(TrajectoryRow {
                        experiment: cfg.experiment.as_str().to_string(),
                        seed: cfg.seed,
                        n: cfg.n,
                        replica: rep,
                        i,
                        t,
                        position: pos,
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_, Error>>()?;
    let rows: Vec<TrajectoryRow> = per_replica.into_iter().flatten().collect();
    let count = rows.len() as f64;
    Ok(Report::new(cfg.clone(), rows).with("points", count))
}

pub fn run_global_verify(cfg: &ExperimentConfig) -> Result<Report<DeviationRow>, Error> {
    let dev = global::sup_deviation_experiment(
        cfg.seed,
        cfg.n,
        cfg.t_max,
        cfg.alpha,
        cfg.replicas,
        cfg.grid_size,
    )?;
    let rows: Vec<DeviationRow> = dev
        .replicas
        .iter()
        .map(|r| DeviationRow {
            experiment: cfg.experiment.as_str().to_string(),
            seed: cfg.seed,
            n: cfg.n,
            replica: r.replica,
            max_sup_dev: r.max_sup_dev,
            p50: r.p50,
            p95: r.p95,
        })
        .collect();
    let mut maxes = dev.max_devs();
    maxes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if maxes.is_empty() {
        f64::NAN
    } else {
        stats::quantile(&maxes, 0.5)
    };
    Ok(Report::new(cfg.clone(), rows).with("median_max_sup_dev", median))
}

pub fn run_local_verify(cfg: &ExperimentConfig) -> Result<Report<LocalRow>, Error> {
    let rows: Vec<LocalRow> = (0..cfg.replicas)
        .into_par_iter()
        .map(|rep| {
            let mut w =
                local::ZWindow::new(cfg.seed, rep, cfg.t_max, local::DEFAULT_WINDOW_CAP)?;
            let log = w.jump_log(cfg.window_lo, cfg.window_hi, cfg.t_max)?;
            let slice = w.sigma_slice(cfg.t_max, cfg.window_lo, cfg.window_hi)?;
            Ok(LocalRow {
                experiment: cfg.experiment.as_str().to_string(),
                seed: cfg.seed,
                n: 0,
                replica: rep,
                t_horizon: cfg.t_max,
                events: log.len() as u64,
                all_exact: slice.all_exact(),
            })
        })
        .collect::<Result<_, Error>>()?;
    let events: u64 = rows.iter().map(|r| r.events).sum();
    Ok(Report::new(cfg.clone(), rows).with("total_events", events as f64))
}

pub fn run_coupling(cfg: &ExperimentConfig) -> Result<Report<CouplingRow>, Error> {
    let k_n = cfg.effective_k_n();
    let rows: Vec<CouplingRow> = (0..cfg.replicas)
        .into_par_iter()
        .map(|rep| {
            let rec = local::coupled_simulation(
                cfg.seed,
                rep,
                cfg.n,
                k_n,
                cfg.window_lo,
                cfg.window_hi,
                cfg.t_max,
            )?;
            Ok(CouplingRow {
                experiment: cfg.experiment.as_str().to_string(),
                seed: cfg.seed,
                n: cfg.n,
                replica: rep,
                k_n,
                window_lo: cfg.window_lo,
                window_hi: cfg.window_hi,
                t_horizon: cfg.t_max,
                all_agree: rec.all_agree,
                max_ratio: rec.max_ratio,
                proposed: rec.proposed,
                accepted: rec.accepted,
            })
        })
        .collect::<Result<_, Error>>()?;
    let agree = rows.iter().filter(|r| r.all_agree).count() as f64;
    let frac = if rows.is_empty() {
        f64::NAN
    } else {
        agree / rows.len() as f64
    };
    Ok(Report::new(cfg.clone(), rows).with("agreement_fraction", frac))
}

/// Fast deterministic correctness checks; any failing row makes the run
/// exit with the oracle-failure code.
pub fn run_oracle_suite(cfg: &ExperimentConfig) -> Result<Report<OracleRow>, Error> {
    let mut rows = Vec::new();
    let mut add = |check: &str, n: usize, value: f64, bound: f64| {
        rows.push(OracleRow {
            experiment: ExperimentKind::OracleSuite.as_str().to_string(),
            seed: cfg.seed,
            n,
            check: check.to_string(),
            value,
            bound,
            pass: value <= bound,
        });
    };

    // Round-trip between one-line notation and inversion vectors, n ≤ 7.
    let mut mismatches = 0u64;
    for n in 1..=7usize {
        let fact: u64 = (1..=n as u64).product();
        for rank in 0..fact {
            let ells = perm::InversionVector::from_lehmer_rank(rank, n);
            let sigma = ells.decode();
            if sigma.to_inversion_vector().as_slice() != ells.as_slice()
                || sigma.inversions() != ells.total()
            {
                mismatches += 1;
            }
        }
    }
    add("bijection_roundtrip_mismatches", 7, mismatches as f64, 0.0);

    // Jump-rate continuity across q = 1 and the i = 2 closed form.
    let mut cont = 0.0f64;
    for i in 2..=100u64 {
        for j in 0..i - 1 {
            let at_one = birth::rate_finite_at_one(i, j);
            cont = cont.max((birth::rate_finite(i, j, 1.0 - 1e-12) - at_one).abs());
            cont = cont.max((birth::rate_finite(i, j, 1.0 + 1e-12) - at_one).abs());
        }
    }
    add("rate_continuity_at_one", 100, cont, 1e-6);
    let mut closed = 0.0f64;
    for k in 0..=300 {
        let q = k as f64 * 0.01;
        closed = closed.max((birth::rate_finite(2, 0, q) - 1.0 / (1.0 + q)).abs());
    }
    add("rate_closed_form_i2", 2, closed, 1e-12);

    // Numerical ODE solution against the closed form.
    let mut ode = 0.0f64;
    for ix in 1..=5 {
        let x = ix as f64 / 5.0;
        for ia in 1..=4 {
            let a = ia as f64 / 5.0;
            let y0 = global::explicit_ode_solution(x, a, 0.0);
            for &(t, y) in &global::ode_solve(x, y0, (0.0, 3.0), 1e-3)? {
                ode = ode.max((y - global::explicit_ode_solution(x, a, t)).abs());
            }
        }
    }
    add("rk4_vs_closed_form", 0, ode, 1e-8);

    // Identities of the limit curves and the permuton density.
    let (mut fz, mut rev) = (0.0f64, 0.0f64);
    for ix in 1..=9 {
        let x = ix as f64 / 10.0;
        for ia in 1..=9 {
            let a = ia as f64 / 10.0;
            for it in 0..=10 {
                let t = -2.5 + 5.0 * it as f64 / 10.0;
                let z = global::z_curve(x, a, t);
                fz = fz.max((global::f_map(x, t, z) - global::explicit_ode_solution(x, a, t)).abs());
                rev = rev.max((1.0 - global::z_curve(x, 1.0 - a, -t) - z).abs());
            }
        }
    }
    add("height_map_identity", 0, fz, 1e-10);
    add("reversal_symmetry", 0, rev, 1e-12);
    let mut corner = 0.0f64;
    for &beta in &[-3.0f64, -1.0, 0.5, 2.0, 4.0] {
        let expect = beta * (beta.exp() - 1.0) / (beta.exp() + (-beta).exp() - 2.0);
        corner = corner.max((global::rho_density(beta, 1.0, 0.0) - expect).abs() / expect.abs());
    }
    add("density_corner_value", 0, corner, 1e-10);

    // Static sampler against the exact size-5 distribution.
    let pmf = perm::enumerate_mallows(5, 0.7)?;
    let samples = 1_000_000u64;
    let counts = (0..samples / SAMPLE_CHUNK)
        .into_par_iter()
        .fold(
            || vec![0u64; pmf.len()],
            |mut acc, chunk| {
                let mut r = rng::derive_rng(cfg.seed, &[rng::tag::SAMPLE, chunk]);
                for _ in 0..SAMPLE_CHUNK {
                    let s = perm::sample_mallows(&mut r, 5, 0.7);
                    acc[s.to_inversion_vector().lehmer_rank() as usize] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; pmf.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let emp: Vec<f64> = counts.iter().map(|&c| c as f64 / samples as f64).collect();
    add("sampler_tv_n5_q0.7", 5, stats::total_variation(&emp, &pmf), 0.01);

    let failures = rows.iter().filter(|r| !r.pass).count() as f64;
    Ok(Report::new(cfg.clone(), rows).with("failures", failures))
}
