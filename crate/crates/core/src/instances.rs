//! Deterministic generators for the experiment instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ClemoError, Result};
use crate::solvers::{CvrpInstance, KpInstance, SppInstance};

/// Value/weight correlation families of the knapsack benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KpType {
    Uncorrelated = 1,
    WeaklyCorrelated = 2,
    StronglyCorrelated = 3,
    InverseStronglyCorrelated = 4,
}

impl KpType {
    pub const ALL: [KpType; 4] = [
        KpType::Uncorrelated,
        KpType::WeaklyCorrelated,
        KpType::StronglyCorrelated,
        KpType::InverseStronglyCorrelated,
    ];

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(KpType::Uncorrelated),
            2 => Ok(KpType::WeaklyCorrelated),
            3 => Ok(KpType::StronglyCorrelated),
            4 => Ok(KpType::InverseStronglyCorrelated),
            _ => Err(ClemoError::Config(format!("unknown knapsack type {i}"))),
        }
    }

    pub fn index(self) -> u8 {
        self as u8
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpGenConfig {
    pub kind: KpType,
    pub items: usize,
    pub seed: u64,
    pub weight_lo: f64,
    pub weight_hi: f64,
    pub correlation: f64,
}

impl KpGenConfig {
    pub fn new(kind: KpType, seed: u64) -> Self {
        Self {
            kind,
            items: 25,
            seed,
            weight_lo: 0.02,
            weight_hi: 0.14,
            correlation: 0.02,
        }
    }

    pub fn with_items(mut self, items: usize) -> Self {
        self.items = items;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(0.0 < self.weight_lo && self.weight_lo < self.weight_hi) {
            return Err(ClemoError::Config("need 0 < weight_lo < weight_hi".into()));
        }
        if !(self.correlation > 0.0) || self.items == 0 {
            return Err(ClemoError::Config("need correlation > 0 and items ≥ 1".into()));
        }
        Ok(())
    }
}

/// Knapsack instance with capacity 1.
pub fn gen_kp(cfg: &KpGenConfig) -> Result<KpInstance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi, r) = (cfg.weight_lo, cfg.weight_hi, cfg.correlation);
    let mut values = Vec::with_capacity(cfg.items);
    let mut weights = Vec::with_capacity(cfg.items);
    for _ in 0..cfg.items {
        let (v, w) = match cfg.kind {
            KpType::Uncorrelated => {
                let w = rng.random_range(lo..hi);
                (rng.random_range(lo..hi), w)
            }
            KpType::WeaklyCorrelated => {
                let w = rng.random_range(lo..hi);
                let v: f64 = rng.random_range(w - r..w + r);
                (v.max(1e-9), w)
            }
            KpType::StronglyCorrelated => {
                let w = rng.random_range(lo..hi);
                (w + r, w)
            }
            KpType::InverseStronglyCorrelated => {
                let v = rng.random_range(lo..hi);
                (v, v + r)
            }
        };
        values.push(v);
        weights.push(w);
    }
    KpInstance::new(values, weights)
}

/// Six nodes, nine directed edges. Over θ ∈ [−1, 1] the optimal path is
/// s→c→d→t below θ = −0.5, s→b→t up to θ = 0.4, and s→a→t above, so the
/// optimal value is concave piecewise-linear with two breakpoints.
pub fn default_spp_instance() -> SppInstance {
    // s=0, a=1, b=2, c=3, d=4, t=5
    let edges = vec![
        (0, 1),
        (1, 5),
        (0, 2),
        (2, 5),
        (0, 3),
        (3, 4),
        (4, 5),
        (1, 2),
        (2, 4),
    ];
    let base = vec![1.8, 1.8, 1.5, 1.5, 1.0, 1.5, 1.5, 1.0, 1.0];
    let perturbation = vec![-0.25, -0.25, 0.5, 0.5, 1.0, 1.0, 1.0, 0.0, 0.0];
    SppInstance::new(6, edges, base, perturbation, 0, 5).expect("static instance is valid")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvrpGenConfig {
    pub clients: usize,
    pub vehicles: usize,
    pub capacity: f64,
    pub demand_lo: u32,
    pub demand_hi: u32,
    /// Side length of the square holding the clients; the depot sits in its centre.
    pub box_size: f64,
    pub seed: u64,
}

impl CvrpGenConfig {
    pub const MIN_MARGIN: f64 = 1.1;

    pub fn new(seed: u64) -> Self {
        Self {
            clients: 16,
            vehicles: 4,
            capacity: 25.0,
            demand_lo: 1,
            demand_hi: 9,
            box_size: 100.0,
            seed,
        }
    }

    /// Fleet capacity over expected total demand.
    pub fn margin(&self) -> f64 {
        let mean = 0.5 * (self.demand_lo + self.demand_hi) as f64;
        self.vehicles as f64 * self.capacity / (self.clients as f64 * mean)
    }
}

fn first_fit_decreasing(demands: &[f64], vehicles: usize, capacity: f64) -> bool {
    let mut sorted = demands.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut loads = vec![0.0; vehicles];
    sorted.iter().all(|&d| match loads.iter_mut().find(|l| **l + d <= capacity) {
        Some(l) => {
            *l += d;
            true
        }
        None => false,
    })
}

pub fn gen_cvrp(cfg: &CvrpGenConfig) -> Result<CvrpInstance> {
    if cfg.clients == 0 || cfg.vehicles == 0 || cfg.demand_lo == 0 || cfg.demand_lo > cfg.demand_hi {
        return Err(ClemoError::Config("invalid CVRP generator configuration".into()));
    }
    if cfg.margin() < CvrpGenConfig::MIN_MARGIN {
        return Err(ClemoError::Config(format!(
            "fleet margin {:.3} below {}",
            cfg.margin(),
            CvrpGenConfig::MIN_MARGIN
        )));
    }
    if cfg.demand_hi as f64 > cfg.capacity {
        return Err(ClemoError::Config("maximum demand exceeds capacity".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.clients;
    let half = 0.5 * cfg.box_size;
    let mut coords = vec![(half, half)];
    for _ in 0..n {
        coords.push((
            rng.random_range(0.0..cfg.box_size),
            rng.random_range(0.0..cfg.box_size),
        ));
    }
    let fleet = cfg.vehicles as f64 * cfg.capacity;
    let demands = loop {
        let d: Vec<f64> = (0..n)
            .map(|_| rng.random_range(cfg.demand_lo..=cfg.demand_hi) as f64)
            .collect();
        if d.iter().sum::<f64>() * CvrpGenConfig::MIN_MARGIN <= fleet
            && first_fit_decreasing(&d, cfg.vehicles, cfg.capacity)
        {
            break d;
        }
    };
    let nodes = n + 1;
    let mut costs = vec![0.0; nodes * nodes];
    for j in 0..nodes {
        for k in 0..nodes {
            let (dx, dy) = (coords[j].0 - coords[k].0, coords[j].1 - coords[k].1);
            costs[j * nodes + k] = (dx * dx + dy * dy).sqrt();
        }
    }
    let mut inst = CvrpInstance::new(cfg.vehicles, cfg.capacity, demands, costs)?;
    inst.coords = Some(coords);
    Ok(inst)
}
