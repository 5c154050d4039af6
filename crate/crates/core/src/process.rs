//! The n-component inversion process and its permutation-valued view.
//!
//! Component `i` runs an independent birth path with rates `p_i(j, q)`,
//! capped at state `i − 1`; the state vector at any clock value `q` is an
//! admissible inversion vector whose decode is Mallows(n, q)-distributed.

use rayon::prelude::*;

use crate::birth::{self, Dominator, JumpPath, RateSpec};
use crate::error::Error;
use crate::perm::{InversionVector, Permutation};
use crate::rng;

/// Paths of all n left-inversion components, simulated on `q ∈ [0, q_horizon]`.
#[derive(Clone, Debug)]
pub struct MallowsProcessPath {
    paths: Vec<JumpPath>,
    q_horizon: f64,
}

/// A sampled trajectory of one element in the rescaled clock:
/// `position(t) = σ(i)/n` at `q = e^{t/n}`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub element: usize,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
}

impl MallowsProcessPath {
    /// Simulate all components with streams derived from `(master, replica)`;
    /// bit-identical regardless of thread count.
    pub fn simulate(
        master: u64,
        replica: u64,
        n: usize,
        q_horizon: f64,
    ) -> Result<Self, Error> {
        let paths: Vec<JumpPath> = (1..=n)
            .into_par_iter()
            .map(|i| {
                let mut r =
                    rng::derive_rng(master, &[rng::tag::PROCESS, replica, i as u64]);
                birth::simulate_birth(
                    &mut r,
                    RateSpec::Finite { i: i as u64 },
                    q_horizon,
                    i as u64 - 1,
                    Dominator::default(),
                    birth::DEFAULT_EXPLOSION_CAP,
                )
            })
            .collect::<Result<_, _>>()?;
        Ok(MallowsProcessPath { paths, q_horizon })
    }

    pub fn n(&self) -> usize {
        self.paths.len()
    }

    pub fn q_horizon(&self) -> f64 {
        self.q_horizon
    }

    pub fn component(&self, i: usize) -> &JumpPath {
        &self.paths[i - 1]
    }

    /// Inversion vector at clock `q`.
    pub fn inversion_vector_at(&self, q: f64) -> Result<InversionVector, Error> {
        let ells: Vec<u32> = self
            .paths
            .iter()
            .map(|p| p.state_at(q).map(|s| s as u32))
            .collect::<Result<_, _>>()?;
        InversionVector::new(ells)
    }

    /// Permutation at clock `q`.
    pub fn permutation_at(&self, q: f64) -> Result<Permutation, Error> {
        Ok(self.inversion_vector_at(q)?.decode())
    }

    /// All jump events merged in time order as `(time, element)`.
    pub fn events(&self) -> Vec<(f64, usize)> {
        let mut ev: Vec<(f64, usize)> = Vec::new();
        for (idx, p) in self.paths.iter().enumerate() {
            ev.extend(p.jump_times().iter().map(|&t| (t, idx + 1)));
        }
        ev.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        ev
    }

    /// True iff no two components jump at the identical time, so total
    /// inversions rise by exactly 1 across every event. Returns the first
    /// offending time otherwise.
    pub fn check_unit_inv_increments(&self) -> Result<(), f64> {
        let ev = self.events();
        for w in ev.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(w[0].0);
            }
        }
        Ok(())
    }

    /// Sample `X_i(t) = σ(i)/n` at `q = e^{t/n}` over `t_grid` (any order).
    pub fn trajectory(&self, i: usize, t_grid: &[f64]) -> Result<Trajectory, Error> {
        let n = self.n();
        let mut order: Vec<usize> = (0..t_grid.len()).collect();
        order.sort_by(|&a, &b| t_grid[a].partial_cmp(&t_grid[b]).unwrap());
        let mut positions = vec![0.0; t_grid.len()];
        let mut replay = Replayer::new(self)?;
        for &k in &order {
            let q = (t_grid[k] / n as f64).exp();
            if q > self.q_horizon * (1.0 + 1e-12) {
                return Err(Error::HorizonExceeded {
                    query: q,
                    horizon: self.q_horizon,
                });
            }
            replay.advance_to(q.min(self.q_horizon));
            positions[k] = replay.current().apply(i) as f64 / n as f64;
        }
        Ok(Trajectory {
            element: i,
            times: t_grid.to_vec(),
            positions,
        })
    }
}

/// Incremental replay of the permutation along the merged event sequence.
///
/// When component `i` jumps (ℓ_i += 1), the permutation changes by swapping
/// the value at position `i` with the value at the position of the largest
/// `v′ < σ(i)` satisfying `σ⁻¹(v′) ≤ i`; all values strictly between them sit
/// at positions > i, so the decode of every other component is unchanged.
pub struct Replayer {
    events: Vec<(f64, usize)>,
    cursor: usize,
    sigma: Permutation,
}

impl Replayer {
    pub fn new(path: &MallowsProcessPath) -> Result<Self, Error> {
        Ok(Replayer {
            events: path.events(),
            cursor: 0,
            sigma: Permutation::identity(path.n()),
        })
    }

    /// Time and element of the next unprocessed event, if any.
    pub fn peek(&self) -> Option<(f64, usize)> {
        self.events.get(self.cursor).copied()
    }

    /// Apply all events with time ≤ q (monotone: q must not decrease).
    pub fn advance_to(&mut self, q: f64) {
        while let Some(&(t, i)) = self.events.get(self.cursor) {
            if t > q {
                break;
            }
            self.apply_jump(i);
            self.cursor += 1;
        }
    }

    /// Apply exactly the next event, returning `(time, element, partner)`.
    pub fn step(&mut self) -> Option<(f64, usize, usize)> {
        let (t, i) = *self.events.get(self.cursor)?;
        let partner = self.apply_jump(i);
        self.cursor += 1;
        Some((t, i, partner))
    }

    fn apply_jump(&mut self, i: usize) -> usize {
        let v = self.sigma.apply(i);
        debug_assert!(v > 1, "component {i} jumped past its state cap");
        let mut vp = v - 1;
        while self.sigma.position_of(vp) > i {
            vp -= 1;
        }
        let k = self.sigma.position_of(vp);
        self.sigma.swap_positions(i, k);
        k
    }

    pub fn current(&self) -> &Permutation {
        &self.sigma
    }
}
