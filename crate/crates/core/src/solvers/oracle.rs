//! Exhaustive reference solvers for desk-scale instances.

use crate::error::{ClemoError, Result};
use crate::problem::{dot, DecisionVector, ProblemInstance, SolverRecord};

use super::{CvrpInstance, SppInstance};

pub const MAX_SPP_NODES: usize = 8;
pub const MAX_KP_ITEMS: usize = 6;
pub const MAX_CVRP_CLIENTS: usize = 5;

pub fn brute_force_oracle(instance: &ProblemInstance, theta: &[f64]) -> Result<SolverRecord> {
    match instance {
        ProblemInstance::Spp(spp) => spp_oracle(spp, theta[0]),
        ProblemInstance::Kp(kp) => {
            let (v, w) = kp.unpack(theta);
            kp_oracle(v, w)
        }
        ProblemInstance::Cvrp(cvrp) => cvrp_oracle(cvrp, theta),
    }
}

/// All simple s–t paths as edge lists.
pub fn enumerate_paths(instance: &SppInstance) -> Vec<Vec<usize>> {
    fn dfs(
        inst: &SppInstance,
        node: usize,
        visited: &mut Vec<bool>,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if node == inst.target {
            out.push(path.clone());
            return;
        }
        for (e, &(a, b)) in inst.edges.iter().enumerate() {
            if a == node && !visited[b] {
                visited[b] = true;
                path.push(e);
                dfs(inst, b, visited, path, out);
                path.pop();
                visited[b] = false;
            }
        }
    }
    let mut visited = vec![false; instance.nodes];
    visited[instance.source] = true;
    let mut out = Vec::new();
    dfs(instance, instance.source, &mut visited, &mut Vec::new(), &mut out);
    out
}

pub fn spp_oracle(instance: &SppInstance, theta: f64) -> Result<SolverRecord> {
    if instance.nodes > MAX_SPP_NODES {
        return Err(ClemoError::OracleRefused(format!(
            "{} nodes > {MAX_SPP_NODES}",
            instance.nodes
        )));
    }
    let costs = instance.costs(theta);
    let best = enumerate_paths(instance)
        .into_iter()
        .map(|p| (p.iter().map(|&e| costs[e]).sum::<f64>(), p))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| ClemoError::Infeasible("no s–t path".into()))?;
    instance.path_record(&best.1, &costs)
}

/// Enumerates every vertex of `{wᵀx ≤ 1, 0 ≤ x ≤ 1}`: a 0/1 vector with
/// at most one coordinate set to make the capacity row tight.
pub fn kp_oracle(values: &[f64], weights: &[f64]) -> Result<SolverRecord> {
    let p = values.len();
    if p > MAX_KP_ITEMS {
        return Err(ClemoError::OracleRefused(format!("{p} items > {MAX_KP_ITEMS}")));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |x: Vec<f64>| {
        if dot(weights, &x) <= 1.0 + 1e-12 {
            let v = dot(values, &x);
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, x));
            }
        }
    };
    for mask in 0u32..(1 << p) {
        let x: Vec<f64> = (0..p).map(|j| ((mask >> j) & 1) as f64).collect();
        consider(x.clone());
        for j in 0..p {
            if weights[j] == 0.0 {
                continue;
            }
            let rest: f64 = (0..p).filter(|&k| k != j).map(|k| weights[k] * x[k]).sum();
            let t = (1.0 - rest) / weights[j];
            if (0.0..=1.0).contains(&t) {
                let mut y = x.clone();
                y[j] = t;
                consider(y);
            }
        }
    }
    let (objective_value, x) = best.expect("x = 0 is always feasible");
    Ok(SolverRecord {
        objective_value,
        decision: DecisionVector::new(x, vec![false; p])?,
        aux: vec![],
        routes: None,
    })
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Set partitions of `0..n` as block labels (restricted growth strings).
fn set_partitions(n: usize, max_blocks: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, n: usize, max_blocks: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        let used = cur.iter().copied().max().map_or(0, |m| m + 1);
        for b in 0..=used.min(max_blocks - 1) {
            cur.push(b);
            rec(i + 1, n, max_blocks, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, max_blocks, &mut Vec::new(), &mut out);
    out
}

pub fn cvrp_oracle(instance: &CvrpInstance, theta: &[f64]) -> Result<SolverRecord> {
    let n = instance.clients;
    if n > MAX_CVRP_CLIENTS {
        return Err(ClemoError::OracleRefused(format!(
            "{n} clients > {MAX_CVRP_CLIENTS}"
        )));
    }
    let (demands, costs) = instance.realize(theta)?;
    let nodes = n + 1;
    let route_cost = |r: &[usize]| {
        let mut t = costs[r[0]];
        for w in r.windows(2) {
            t += costs[w[0] * nodes + w[1]];
        }
        t + costs[r[r.len() - 1] * nodes]
    };

    let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
    for labels in set_partitions(n, instance.vehicles) {
        let blocks = labels.iter().max().map_or(0, |m| m + 1);
        let mut routes = Vec::with_capacity(blocks);
        let mut total = 0.0;
        let mut ok = true;
        for b in 0..blocks {
            let members: Vec<usize> = (0..n).filter(|&c| labels[c] == b).map(|c| c + 1).collect();
            let load: f64 = members.iter().map(|&c| demands[c - 1]).sum();
            if load > instance.capacity {
                ok = false;
                break;
            }
            let (cost, route) = permutations(&members)
                .into_iter()
                .map(|r| (route_cost(&r), r))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap();
            total += cost;
            routes.push(route);
        }
        if ok && best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, routes));
        }
    }
    let (_, routes) = best.ok_or_else(|| ClemoError::Infeasible("no feasible partition".into()))?;
    instance.routes_record(&routes, &demands, &costs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_counts_are_bell_numbers() {
        assert_eq!(set_partitions(4, 4).len(), 15);
        assert_eq!(set_partitions(5, 5).len(), 52);
        // Stirling numbers S(4,1) + S(4,2) = 1 + 7
        assert_eq!(set_partitions(4, 2).len(), 8);
    }

    #[test]
    fn kp_oracle_matches_hand_value() {
        let r = kp_oracle(&[2.0, 1.0], &[0.6, 0.8]).unwrap();
        assert!((r.objective_value - 2.5).abs() < 1e-12);
    }

    #[test]
    fn triangle_spp_oracle() {
        let inst = SppInstance::new(
            3,
            vec![(0, 1), (1, 2), (0, 2)],
            vec![1.0, 1.0, 3.0],
            vec![0.0, 0.0, -1.0],
            0,
            2,
        )
        .unwrap();
        assert_eq!(enumerate_paths(&inst).len(), 2);
        assert_eq!(spp_oracle(&inst, 0.0).unwrap().objective_value, 2.0);
        assert_eq!(spp_oracle(&inst, 1.5).unwrap().objective_value, 1.5);
    }

    #[test]
    fn oversized_instances_are_refused() {
        assert!(matches!(
            kp_oracle(&[1.0; 7], &[0.1; 7]),
            Err(ClemoError::OracleRefused(_))
        ));
    }
}
