//! Capacitated vehicle routing with the Miller–Tucker–Zemlin formulation.
//!
//! Node 0 is the depot, clients are `1..=n`. Decision variables are all arc
//! indicators `x_jk` for ordered pairs `j ≠ k`. θ stacks the client demands
//! followed by the client–depot arc costs.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, ClemoError, Result};
use crate::problem::{
    unit_box, AffineObjective, DecisionVector, LinearConstraint, ParamVector, Problem, Sense,
    SolverRecord,
};

pub const DEFAULT_BUDGET: usize = 1000;

const IMPROVEMENT_EPS: f64 = 1e-10;

/// How a perturbed depot cost `c₀_j` is written back into the cost matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepotArcMode {
    /// Both `(0, j)` and `(j, 0)` take the perturbed value.
    #[default]
    Symmetric,
    /// Only the client→depot arc `(j, 0)` is perturbed.
    ClientToDepot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvrpInstance {
    pub clients: usize,
    pub vehicles: usize,
    pub capacity: f64,
    pub demands: Vec<f64>,
    /// `(n+1) × (n+1)` row-major arc costs, diagonal ignored.
    pub costs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub depot_arc_mode: DepotArcMode,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

impl CvrpInstance {
    pub fn new(
        vehicles: usize,
        capacity: f64,
        demands: Vec<f64>,
        costs: Vec<f64>,
    ) -> Result<Self> {
        let inst = Self {
            clients: demands.len(),
            vehicles,
            capacity,
            demands,
            costs,
            coords: None,
            depot_arc_mode: DepotArcMode::Symmetric,
            budget: DEFAULT_BUDGET,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim("demands", self.clients, self.demands.len())?;
        let nodes = self.clients + 1;
        check_dim("cost matrix", nodes * nodes, self.costs.len())?;
        if self.clients == 0 || self.vehicles == 0 {
            return Err(ClemoError::Config("CVRP needs clients and vehicles".into()));
        }
        if !(self.capacity > 0.0) {
            return Err(ClemoError::Config("vehicle capacity must be positive".into()));
        }
        if self.demands.iter().chain(&self.costs).any(|v| !v.is_finite()) {
            return Err(ClemoError::Data("CVRP data must be finite".into()));
        }
        Ok(())
    }

    pub fn nodes(&self) -> usize {
        self.clients + 1
    }

    pub fn cost(&self, j: usize, k: usize) -> f64 {
        self.costs[j * self.nodes() + k]
    }

    /// Index of arc `(j, k)` in the decision vector.
    pub fn arc_index(&self, j: usize, k: usize) -> usize {
        debug_assert!(j != k);
        j * self.clients + if k < j { k } else { k - 1 }
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.nodes();
        (0..n).flat_map(move |j| (0..n).filter(move |&k| k != j).map(move |k| (j, k)))
    }

    /// Demands and cost matrix at θ.
    pub fn realize(&self, theta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.clients;
        check_dim("parameter vector", 2 * n, theta.len())?;
        let demands = theta[..n].to_vec();
        let mut costs = self.costs.clone();
        let nodes = self.nodes();
        for j in 1..=n {
            let c0 = theta[n + j - 1];
            costs[j * nodes] = c0;
            if self.depot_arc_mode == DepotArcMode::Symmetric {
                costs[j] = c0;
            }
        }
        Ok((demands, costs))
    }

    fn check_preconditions(&self, demands: &[f64]) -> Result<()> {
        if let Some(j) = demands.iter().position(|&d| !(d > 0.0)) {
            return Err(ClemoError::Precondition(format!(
                "client {} has non-positive demand",
                j + 1
            )));
        }
        if let Some(j) = demands.iter().position(|&d| d > self.capacity) {
            return Err(ClemoError::Infeasible(format!(
                "client {} demand {} exceeds capacity {}",
                j + 1,
                demands[j],
                self.capacity
            )));
        }
        let total: f64 = demands.iter().sum();
        if total > self.vehicles as f64 * self.capacity {
            return Err(ClemoError::Infeasible(format!(
                "total demand {total} exceeds fleet capacity"
            )));
        }
        Ok(())
    }

    /// Encodes a set of routes as a solver record at the given costs.
    pub fn routes_record(
        &self,
        routes: &[Vec<usize>],
        demands: &[f64],
        costs: &[f64],
    ) -> Result<SolverRecord> {
        let nodes = self.nodes();
        let p = self.clients * nodes;
        let mut x = vec![0.0; p];
        let mut u = vec![0.0; self.clients];
        let mut total = 0.0;
        for route in routes.iter().filter(|r| !r.is_empty()) {
            let mut prev = 0;
            let mut load = 0.0;
            for &c in route {
                x[self.arc_index(prev, c)] = 1.0;
                total += costs[prev * nodes + c];
                load += demands[c - 1];
                u[c - 1] = load;
                prev = c;
            }
            x[self.arc_index(prev, 0)] = 1.0;
            total += costs[prev * nodes];
        }
        Ok(SolverRecord {
            objective_value: total,
            decision: DecisionVector::new(x, vec![true; p])?,
            aux: u,
            routes: Some(routes.iter().filter(|r| !r.is_empty()).cloned().collect()),
        })
    }
}

struct RoutePlanner<'a> {
    nodes: usize,
    costs: &'a [f64],
    demands: &'a [f64],
    capacity: f64,
}

impl RoutePlanner<'_> {
    fn c(&self, j: usize, k: usize) -> f64 {
        self.costs[j * self.nodes + k]
    }

    fn route_cost(&self, route: &[usize]) -> f64 {
        if route.is_empty() {
            return 0.0;
        }
        let mut total = self.c(0, route[0]);
        for w in route.windows(2) {
            total += self.c(w[0], w[1]);
        }
        total + self.c(route[route.len() - 1], 0)
    }

    fn load(&self, route: &[usize]) -> f64 {
        route.iter().map(|&c| self.demands[c - 1]).sum()
    }

    fn savings(&self) -> Vec<Vec<usize>> {
        let n = self.nodes - 1;
        let mut routes: Vec<Vec<usize>> = (1..=n).map(|c| vec![c]).collect();
        let mut owner: Vec<usize> = (0..n).collect();
        let mut loads: Vec<f64> = (1..=n).map(|c| self.demands[c - 1]).collect();

        let mut pairs = Vec::with_capacity(n * n);
        for i in 1..=n {
            for j in 1..=n {
                if i != j {
                    pairs.push((self.c(i, 0) + self.c(0, j) - self.c(i, j), i, j));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        for (saving, i, j) in pairs {
            if saving <= 0.0 {
                break;
            }
            let (ri, rj) = (owner[i - 1], owner[j - 1]);
            if ri == rj || loads[ri] + loads[rj] > self.capacity {
                continue;
            }
            if routes[ri].last() != Some(&i) || routes[rj].first() != Some(&j) {
                continue;
            }
            let tail = std::mem::take(&mut routes[rj]);
            for &c in &tail {
                owner[c - 1] = ri;
            }
            routes[ri].extend(tail);
            loads[ri] += loads[rj];
            loads[rj] = 0.0;
        }
        routes.into_iter().filter(|r| !r.is_empty()).collect()
    }

    /// Merges routes pairwise (cheapest concatenation first) until at most
    /// `max_routes` remain or no merge fits.
    fn reduce_route_count(&self, routes: &mut Vec<Vec<usize>>, max_routes: usize) {
        while routes.len() > max_routes {
            let mut best: Option<(f64, usize, usize)> = None;
            for a in 0..routes.len() {
                for b in 0..routes.len() {
                    if a == b || self.load(&routes[a]) + self.load(&routes[b]) > self.capacity {
                        continue;
                    }
                    let merged: Vec<usize> = routes[a].iter().chain(&routes[b]).copied().collect();
                    let delta = self.route_cost(&merged)
                        - self.route_cost(&routes[a])
                        - self.route_cost(&routes[b]);
                    if best.is_none_or(|(d, _, _)| delta < d) {
                        best = Some((delta, a, b));
                    }
                }
            }
            let Some((_, a, b)) = best else { return };
            let tail = routes[b].clone();
            routes[a].extend(tail);
            routes.remove(b);
        }
    }

    /// First-fit decreasing into `bins` vehicles, each bin in nearest-neighbour order.
    fn bin_packing(&self, bins: usize) -> Option<Vec<Vec<usize>>> {
        let n = self.nodes - 1;
        let mut order: Vec<usize> = (1..=n).collect();
        order.sort_by(|&a, &b| self.demands[b - 1].total_cmp(&self.demands[a - 1]).then(a.cmp(&b)));
        let mut packed: Vec<Vec<usize>> = vec![Vec::new(); bins];
        let mut loads = vec![0.0; bins];
        for c in order {
            let slot = (0..bins).find(|&b| loads[b] + self.demands[c - 1] <= self.capacity)?;
            packed[slot].push(c);
            loads[slot] += self.demands[c - 1];
        }
        Some(
            packed
                .into_iter()
                .filter(|r| !r.is_empty())
                .map(|mut clients| {
                    let mut route = Vec::with_capacity(clients.len());
                    let mut at = 0;
                    while !clients.is_empty() {
                        let (pos, _) = clients
                            .iter()
                            .enumerate()
                            .min_by(|a, b| self.c(at, *a.1).total_cmp(&self.c(at, *b.1)))
                            .unwrap();
                        at = clients.remove(pos);
                        route.push(at);
                    }
                    route
                })
                .collect(),
        )
    }

    fn two_opt(&self, routes: &mut [Vec<usize>]) -> bool {
        for route in routes.iter_mut() {
            let len = route.len();
            if len < 2 {
                continue;
            }
            let base = self.route_cost(route);
            for i in 0..len - 1 {
                for j in i + 1..len {
                    route[i..=j].reverse();
                    if self.route_cost(route) < base - IMPROVEMENT_EPS {
                        return true;
                    }
                    route[i..=j].reverse();
                }
            }
        }
        false
    }

    fn relocate(&self, routes: &mut Vec<Vec<usize>>) -> bool {
        for a in 0..routes.len() {
            for pos in 0..routes[a].len() {
                let client = routes[a][pos];
                let demand = self.demands[client - 1];
                let mut source = routes[a].clone();
                source.remove(pos);
                let removal_gain = self.route_cost(&routes[a]) - self.route_cost(&source);
                for b in 0..routes.len() {
                    if a == b || self.load(&routes[b]) + demand > self.capacity {
                        continue;
                    }
                    let base_b = self.route_cost(&routes[b]);
                    for ins in 0..=routes[b].len() {
                        let mut target = routes[b].clone();
                        target.insert(ins, client);
                        let delta = self.route_cost(&target) - base_b - removal_gain;
                        if delta < -IMPROVEMENT_EPS {
                            routes[a] = source;
                            routes[b] = target;
                            routes.retain(|r| !r.is_empty());
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    fn local_search(&self, routes: &mut Vec<Vec<usize>>, budget: usize) {
        for _ in 0..budget {
            if !(self.two_opt(routes) || self.relocate(routes)) {
                break;
            }
        }
    }
}

/// Clarke–Wright savings followed by first-improvement 2-opt and relocate
/// moves; `budget` caps the number of improvement sweeps.
pub fn solve_cvrp(instance: &CvrpInstance, theta: &[f64], budget: usize) -> Result<SolverRecord> {
    let (demands, costs) = instance.realize(theta)?;
    instance.check_preconditions(&demands)?;
    let planner = RoutePlanner {
        nodes: instance.nodes(),
        costs: &costs,
        demands: &demands,
        capacity: instance.capacity,
    };

    let mut routes = planner.savings();
    planner.reduce_route_count(&mut routes, instance.vehicles);
    if routes.len() > instance.vehicles {
        routes = planner.bin_packing(instance.vehicles).ok_or_else(|| {
            ClemoError::Infeasible(format!(
                "could not pack clients into {} vehicles",
                instance.vehicles
            ))
        })?;
    }
    planner.local_search(&mut routes, budget);
    instance.routes_record(&routes, &demands, &costs)
}

impl Problem for CvrpInstance {
    fn kind(&self) -> &'static str {
        "cvrp"
    }

    fn num_vars(&self) -> usize {
        self.clients * self.nodes()
    }

    fn binary_mask(&self) -> Vec<bool> {
        vec![true; self.num_vars()]
    }

    fn sense(&self) -> Sense {
        Sense::Min
    }

    fn var_names(&self) -> Vec<String> {
        self.arcs().map(|(j, k)| format!("x_{j}_{k}")).collect()
    }

    fn nominal(&self) -> ParamVector {
        let n = self.clients;
        let mut values = self.demands.clone();
        values.extend((1..=n).map(|j| self.cost(j, 0)));
        let names = (1..=n)
            .map(|j| format!("d{j}"))
            .chain((1..=n).map(|j| format!("c0_{j}")))
            .collect();
        ParamVector { values, names }
    }

    fn num_params(&self) -> usize {
        2 * self.clients
    }

    /// Client→depot arcs.
    fn explained_vars(&self) -> Vec<usize> {
        (1..=self.clients).map(|j| self.arc_index(j, 0)).collect()
    }

    fn objective(&self, theta: &[f64]) -> Result<AffineObjective> {
        let (_, costs) = self.realize(theta)?;
        let nodes = self.nodes();
        Ok(AffineObjective {
            coeffs: self.arcs().map(|(j, k)| costs[j * nodes + k]).collect(),
            constant: 0.0,
        })
    }

    fn constraints(&self, theta: &[f64], aux: &[f64]) -> Result<Vec<LinearConstraint>> {
        let n = self.clients;
        check_dim("parameter vector", 2 * n, theta.len())?;
        check_dim("MTZ load variables", n, aux.len())?;
        let demands = &theta[..n];
        let big_m = self.capacity;
        let m = self.vehicles as f64;
        let mut rows = Vec::new();

        let from_depot: Vec<(usize, f64)> = (1..=n).map(|k| (self.arc_index(0, k), 1.0)).collect();
        let to_depot: Vec<(usize, f64)> = (1..=n).map(|j| (self.arc_index(j, 0), 1.0)).collect();
        rows.push(LinearConstraint::le(from_depot.clone(), m));
        rows.push(LinearConstraint::le(to_depot.clone(), m));
        rows.push(LinearConstraint::ge(from_depot, 1.0));
        rows.push(LinearConstraint::ge(to_depot, 1.0));

        for j in 1..=n {
            let out: Vec<(usize, f64)> = (0..=n)
                .filter(|&k| k != j)
                .map(|k| (self.arc_index(j, k), 1.0))
                .collect();
            rows.extend(LinearConstraint::eq(out, 1.0));
        }
        for k in 1..=n {
            let inc: Vec<(usize, f64)> = (0..=n)
                .filter(|&j| j != k)
                .map(|j| (self.arc_index(j, k), 1.0))
                .collect();
            rows.extend(LinearConstraint::eq(inc, 1.0));
        }
        // u_j − u_k + M x_jk ≤ M − d_k
        for j in 1..=n {
            for k in 1..=n {
                if j != k {
                    rows.push(LinearConstraint::le(
                        vec![(self.arc_index(j, k), big_m)],
                        big_m - demands[k - 1] - aux[j - 1] + aux[k - 1],
                    ));
                }
            }
        }
        // d_j ≤ u_j ≤ M: constant in x
        for j in 1..=n {
            rows.push(LinearConstraint::le(vec![], aux[j - 1] - demands[j - 1]));
            rows.push(LinearConstraint::le(vec![], big_m - aux[j - 1]));
        }
        rows.extend(unit_box(self.num_vars()));
        Ok(rows)
    }

    fn is_feasible_and_bounded(&self, theta: &[f64]) -> bool {
        match self.realize(theta) {
            Ok((demands, _)) => self.check_preconditions(&demands).is_ok(),
            Err(_) => false,
        }
    }

    fn solve(&self, theta: &[f64]) -> Result<SolverRecord> {
        solve_cvrp(self, theta, self.budget)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{constraint_violation, evaluate_objective};

    fn line_instance(demands: Vec<f64>, vehicles: usize, capacity: f64) -> CvrpInstance {
        // clients on a line at positions 1..=n, depot at 0
        let n = demands.len();
        let pos: Vec<f64> = (0..=n).map(|i| i as f64).collect();
        let mut costs = vec![0.0; (n + 1) * (n + 1)];
        for j in 0..=n {
            for k in 0..=n {
                costs[j * (n + 1) + k] = (pos[j] - pos[k]).abs();
            }
        }
        CvrpInstance::new(vehicles, capacity, demands, costs).unwrap()
    }

    #[test]
    fn arc_indexing_is_a_bijection() {
        let inst = line_instance(vec![1.0; 3], 1, 10.0);
        let idx: Vec<usize> = inst.arcs().map(|(j, k)| inst.arc_index(j, k)).collect();
        assert_eq!(idx, (0..inst.num_vars()).collect::<Vec<_>>());
    }

    #[test]
    fn single_client_round_trip() {
        let inst = line_instance(vec![1.0], 1, 5.0);
        let r = solve_cvrp(&inst, &inst.nominal().values, 10).unwrap();
        assert_eq!(r.objective_value, inst.cost(0, 1) + inst.cost(1, 0));
        assert_eq!(r.routes, Some(vec![vec![1]]));
    }

    #[test]
    fn two_clients_pick_cheaper_orientation() {
        let mut inst = line_instance(vec![1.0, 1.0], 1, 5.0);
        // make 0→2→1→0 cheaper than 0→1→2→0
        let nodes = inst.nodes();
        inst.costs[nodes + 2] = 5.0; // 1→2
        inst.costs[2 * nodes + 1] = 1.0; // 2→1
        let theta = inst.nominal().values;
        let r = solve_cvrp(&inst, &theta, 100).unwrap();
        let a = inst.cost(0, 1) + inst.cost(1, 2) + inst.cost(2, 0);
        let b = inst.cost(0, 2) + inst.cost(2, 1) + inst.cost(1, 0);
        assert_eq!(r.objective_value, a.min(b));
    }

    #[test]
    fn record_is_feasible_under_mtz() {
        let inst = line_instance(vec![2.0, 3.0, 1.0, 4.0], 2, 6.0);
        let theta = inst.nominal().values;
        let r = inst.solve(&theta).unwrap();
        let d = constraint_violation(&inst, &r.decision.values, &theta, &r.aux).unwrap();
        assert_eq!(d, 0.0);
        let f = evaluate_objective(&inst, &r.decision.values, &theta).unwrap();
        assert!((f - r.objective_value).abs() < 1e-9);
        assert!(r.routes.as_ref().unwrap().len() <= 2);
    }

    #[test]
    fn demand_above_capacity_is_infeasible() {
        let inst = line_instance(vec![2.0, 7.0], 2, 6.0);
        assert!(!inst.is_feasible_and_bounded(&inst.nominal().values));
        assert!(solve_cvrp(&inst, &inst.nominal().values, 10)
            .unwrap_err()
            .is_infeasible());
    }

    #[test]
    fn depot_costs_follow_theta() {
        let inst = line_instance(vec![1.0, 1.0], 1, 5.0);
        let mut theta = inst.nominal().values;
        theta[3] = 9.0; // c0 of client 2
        let (_, costs) = inst.realize(&theta).unwrap();
        assert_eq!(costs[2 * 3], 9.0);
        assert_eq!(costs[2], 9.0);

        let mut asym = inst.clone();
        asym.depot_arc_mode = DepotArcMode::ClientToDepot;
        let (_, costs) = asym.realize(&theta).unwrap();
        assert_eq!(costs[2 * 3], 9.0);
        assert_eq!(costs[2], 2.0);
    }

    #[test]
    fn explained_components_are_depot_arcs() {
        let inst = line_instance(vec![1.0; 3], 1, 5.0);
        let names = inst.var_names();
        let explained: Vec<&str> = inst
            .explained_vars()
            .into_iter()
            .map(|i| names[i].as_str())
            .collect();
        assert_eq!(explained, vec!["x_1_0", "x_2_0", "x_3_0"]);
    }
}
