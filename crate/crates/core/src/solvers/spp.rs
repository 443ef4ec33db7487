//! Parametric shortest path: edge costs `c + θ·c̃` on a directed graph.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, ClemoError, Result};
use crate::problem::{
    unit_box, AffineObjective, DecisionVector, LinearConstraint, ParamVector, Problem, Sense,
    SolverRecord,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SppInstance {
    pub nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub base_costs: Vec<f64>,
    pub perturbation: Vec<f64>,
    pub source: usize,
    pub target: usize,
    /// Present value of the scalar parameter.
    #[serde(default)]
    pub theta0: f64,
}

impl SppInstance {
    pub fn new(
        nodes: usize,
        edges: Vec<(usize, usize)>,
        base_costs: Vec<f64>,
        perturbation: Vec<f64>,
        source: usize,
        target: usize,
    ) -> Result<Self> {
        let inst = Self {
            nodes,
            edges,
            base_costs,
            perturbation,
            source,
            target,
            theta0: 0.0,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim("base costs", self.edges.len(), self.base_costs.len())?;
        check_dim("perturbation costs", self.edges.len(), self.perturbation.len())?;
        if self.source >= self.nodes || self.target >= self.nodes || self.source == self.target {
            return Err(ClemoError::Config("invalid source/target nodes".into()));
        }
        if self.edges.iter().any(|&(a, b)| a >= self.nodes || b >= self.nodes || a == b) {
            return Err(ClemoError::Config("edge endpoint out of range".into()));
        }
        if self.base_costs.iter().chain(&self.perturbation).any(|c| !c.is_finite()) {
            return Err(ClemoError::Data("edge costs must be finite".into()));
        }
        Ok(())
    }

    pub fn costs(&self, theta: f64) -> Vec<f64> {
        self.base_costs
            .iter()
            .zip(&self.perturbation)
            .map(|(c, ct)| c + theta * ct)
            .collect()
    }

    fn reachable(&self) -> bool {
        let mut seen = vec![false; self.nodes];
        let mut stack = vec![self.source];
        seen[self.source] = true;
        while let Some(u) = stack.pop() {
            for &(a, b) in &self.edges {
                if a == u && !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen[self.target]
    }

    pub fn path_record(&self, path_edges: &[usize], costs: &[f64]) -> Result<SolverRecord> {
        let mut x = vec![0.0; self.edges.len()];
        for &e in path_edges {
            x[e] = 1.0;
        }
        let objective_value = path_edges.iter().map(|&e| costs[e]).sum();
        Ok(SolverRecord {
            objective_value,
            decision: DecisionVector::new(x, vec![true; self.edges.len()])?,
            aux: vec![],
            routes: None,
        })
    }
}

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra's algorithm on `c + θ·c̃`. Among equal-cost predecessors the
/// lowest edge index wins.
pub fn solve_spp(instance: &SppInstance, theta: f64) -> Result<SolverRecord> {
    let costs = instance.costs(theta);
    if let Some(e) = costs.iter().position(|&c| c < 0.0) {
        return Err(ClemoError::Precondition(format!(
            "edge {e} has negative cost {} at θ = {theta}",
            costs[e]
        )));
    }

    let n = instance.nodes;
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &(a, _)) in instance.edges.iter().enumerate() {
        out_edges[a].push(e);
    }

    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[instance.source] = 0.0;
    heap.push(Entry {
        dist: 0.0,
        node: instance.source,
    });

    while let Some(Entry { dist: d, node: u }) = heap.pop() {
        if settled[u] || d > dist[u] {
            continue;
        }
        settled[u] = true;
        if u == instance.target {
            break;
        }
        for &e in &out_edges[u] {
            let v = instance.edges[e].1;
            if settled[v] {
                continue;
            }
            let nd = d + costs[e];
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = Some(e);
                heap.push(Entry { dist: nd, node: v });
            } else if nd == dist[v] && pred[v].is_some_and(|p| e < p) {
                pred[v] = Some(e);
            }
        }
    }

    if !dist[instance.target].is_finite() {
        return Err(ClemoError::Infeasible(format!(
            "target {} unreachable from {}",
            instance.target, instance.source
        )));
    }

    let mut path = Vec::new();
    let mut node = instance.target;
    while node != instance.source {
        let e = pred[node].expect("reached node has a predecessor");
        path.push(e);
        node = instance.edges[e].0;
    }
    path.reverse();
    instance.path_record(&path, &costs)
}

impl Problem for SppInstance {
    fn kind(&self) -> &'static str {
        "spp"
    }

    fn num_vars(&self) -> usize {
        self.edges.len()
    }

    fn binary_mask(&self) -> Vec<bool> {
        vec![true; self.edges.len()]
    }

    fn sense(&self) -> Sense {
        Sense::Min
    }

    fn var_names(&self) -> Vec<String> {
        self.edges.iter().map(|(a, b)| format!("x_{a}_{b}")).collect()
    }

    fn nominal(&self) -> ParamVector {
        ParamVector {
            values: vec![self.theta0],
            names: vec!["theta".into()],
        }
    }

    fn num_params(&self) -> usize {
        1
    }

    fn objective(&self, theta: &[f64]) -> Result<AffineObjective> {
        check_dim("parameter vector", 1, theta.len())?;
        Ok(AffineObjective {
            coeffs: self.costs(theta[0]),
            constant: 0.0,
        })
    }

    fn constraints(&self, theta: &[f64], _aux: &[f64]) -> Result<Vec<LinearConstraint>> {
        check_dim("parameter vector", 1, theta.len())?;
        let mut rows = Vec::with_capacity(2 * self.nodes + 2 * self.edges.len());
        for k in 0..self.nodes {
            let mut terms = Vec::new();
            for (e, &(a, b)) in self.edges.iter().enumerate() {
                if a == k {
                    terms.push((e, 1.0));
                } else if b == k {
                    terms.push((e, -1.0));
                }
            }
            let rhs = if k == self.source {
                1.0
            } else if k == self.target {
                -1.0
            } else {
                0.0
            };
            rows.extend(LinearConstraint::eq(terms, rhs));
        }
        rows.extend(unit_box(self.edges.len()));
        Ok(rows)
    }

    fn is_feasible_and_bounded(&self, theta: &[f64]) -> bool {
        theta.len() == 1 && self.costs(theta[0]).iter().all(|&c| c >= 0.0) && self.reachable()
    }

    fn solve(&self, theta: &[f64]) -> Result<SolverRecord> {
        check_dim("parameter vector", 1, theta.len())?;
        solve_spp(self, theta[0])
    }
}
