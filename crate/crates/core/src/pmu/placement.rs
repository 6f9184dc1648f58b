use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkModel;

/// Minimum-cost PMU placement instance on an undirected bus graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlacementProblem {
    pub bus_ids: Vec<u32>,
    /// Sorted neighbour indices (excluding the bus itself).
    pub neighbors: Vec<Vec<usize>>,
    pub costs: Vec<f64>,
    /// Indices of zero-injection buses.
    pub zero_injection: BTreeSet<usize>,
    pub use_zero_injection: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub nodes: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementSolution {
    pub placed: Vec<bool>,
    pub total_cost: f64,
    pub proven_optimal: bool,
    pub stats: SolverStats,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observability {
    pub observable: bool,
    /// Bus ids left unobserved.
    pub unobserved: Vec<u32>,
}

impl PlacementProblem {
    /// Unit-cost problem on the network's branch graph.
    pub fn from_network(model: &NetworkModel, use_zero_injection: bool) -> Self {
        let zero_injection = model
            .buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.zero_injection())
            .map(|(i, _)| i)
            .collect();
        PlacementProblem {
            bus_ids: model.buses.iter().map(|b| b.id).collect(),
            neighbors: model.adjacency(),
            costs: vec![1.0; model.n_buses()],
            zero_injection,
            use_zero_injection,
        }
    }

    /// Unit-cost problem on buses `1..=n` from an edge list of bus ids.
    pub fn from_edges(n: usize, edges: &[(u32, u32)], zero_injection: &[u32]) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            let (i, j) = (a as usize, b as usize);
            if i == 0 || j == 0 || i > n || j > n || i == j {
                return Err(Error::InvalidInput(format!("bad edge ({a}, {b}) for {n} buses")));
            }
            neighbors[i - 1].push(j - 1);
            neighbors[j - 1].push(i - 1);
        }
        for a in &mut neighbors {
            a.sort_unstable();
            a.dedup();
        }
        let p = PlacementProblem {
            bus_ids: (1..=n as u32).collect(),
            neighbors,
            costs: vec![1.0; n],
            zero_injection: zero_injection.iter().map(|&z| z as usize - 1).collect(),
            use_zero_injection: !zero_injection.is_empty(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.neighbors.len() != n || self.costs.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.neighbors.len().min(self.costs.len()),
            });
        }
        if let Some(c) = self.costs.iter().find(|c| !(**c > 0.0)) {
            return Err(Error::InvalidInput(format!("placement costs must be positive, got {c}")));
        }
        if self.zero_injection.iter().any(|&z| z >= n) {
            return Err(Error::InvalidInput("zero-injection index out of range".into()));
        }
        for (i, nb) in self.neighbors.iter().enumerate() {
            for &j in nb {
                if j >= n || j == i || !self.neighbors[j].contains(&i) {
                    return Err(Error::InvalidInput(format!(
                        "adjacency of bus {} is not symmetric",
                        self.bus_ids[i]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Binary incidence matrix `M` (row-major), unit diagonal.
    pub fn incidence(&self) -> Vec<Vec<u8>> {
        let n = self.n();
        let mut m = vec![vec![0u8; n]; n];
        for i in 0..n {
            m[i][i] = 1;
            for &j in &self.neighbors[i] {
                m[i][j] = 1;
            }
        }
        m
    }

    fn closed(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(i).chain(self.neighbors[i].iter().copied())
    }

    fn active_zi(&self) -> Vec<usize> {
        if self.use_zero_injection {
            self.zero_injection.iter().copied().collect()
        } else {
            Vec::new()
        }
    }

    pub fn placed_ids(&self, placed: &[bool]) -> Vec<u32> {
        placed
            .iter()
            .zip(&self.bus_ids)
            .filter(|(p, _)| **p)
            .map(|(_, id)| *id)
            .collect()
    }

    pub fn placement_from_ids(&self, ids: &[u32]) -> Result<Vec<bool>> {
        let mut placed = vec![false; self.n()];
        for id in ids {
            let i = self
                .bus_ids
                .iter()
                .position(|b| b == id)
                .ok_or_else(|| Error::InvalidInput(format!("unknown bus {id}")))?;
            placed[i] = true;
        }
        Ok(placed)
    }
}

/// Observed buses under direct PMU coverage plus, when enabled, the
/// zero-injection rule: a zero-injection bus whose closed neighbourhood has
/// exactly one unobserved member makes that member observed. Applied to a
/// fixpoint.
pub fn observed_set(problem: &PlacementProblem, placed: &[bool]) -> Vec<bool> {
    let n = problem.n();
    let mut seen = vec![false; n];
    for i in 0..n {
        if placed[i] {
            for j in problem.closed(i) {
                seen[j] = true;
            }
        }
    }
    let zi = problem.active_zi();
    loop {
        let mut changed = false;
        for &z in &zi {
            let mut missing = problem.closed(z).filter(|&j| !seen[j]);
            if let (Some(j), None) = (missing.next(), missing.next()) {
                seen[j] = true;
                changed = true;
            }
        }
        if !changed {
            return seen;
        }
    }
}

pub fn verify_observability(problem: &PlacementProblem, placed: &[bool]) -> Result<Observability> {
    if placed.len() != problem.n() {
        return Err(Error::Dimension {
            expected: problem.n(),
            got: placed.len(),
        });
    }
    let seen = observed_set(problem, placed);
    let unobserved: Vec<u32> = seen
        .iter()
        .zip(&problem.bus_ids)
        .filter(|(s, _)| !**s)
        .map(|(_, id)| *id)
        .collect();
    Ok(Observability {
        observable: unobserved.is_empty(),
        unobserved,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlacementOptions {
    /// Search nodes before giving up on optimality.
    pub node_budget: u64,
}

impl Default for PlacementOptions {
    fn default() -> Self {
        PlacementOptions {
            node_budget: 100_000_000,
        }
    }
}

/// Exact minimum-cost placement by depth-first branch-and-bound.
///
/// The search covers buses one at a time, choosing the uncovered bus with
/// the fewest options; a bus is covered by a PMU in its closed neighbourhood
/// or, with zero injection enabled, "excused" by an unused zero-injection bus
/// whose closed neighbourhood contains it. Every zero-injection bus infers
/// at most one bus, so this relaxation contains every feasible placement;
/// leaves are re-checked with [`observed_set`]. Branches are tried in
/// ascending bus order, and among equal-cost placements the first one found
/// is kept.
pub fn solve_placement(problem: &PlacementProblem, opts: &PlacementOptions) -> Result<PlacementSolution> {
    problem.validate()?;
    let start = Instant::now();
    let n = problem.n();
    if n == 0 {
        return Err(Error::InvalidInput("empty placement problem".into()));
    }
    let incumbent = greedy_placement(problem);
    let mut search = Search {
        p: problem,
        excusers: (0..n)
            .map(|i| {
                problem
                    .active_zi()
                    .into_iter()
                    .filter(|&z| z == i || problem.neighbors[z].contains(&i))
                    .collect()
            })
            .collect(),
        cover: vec![0; n],
        forbidden: vec![0; n],
        excused: vec![false; n],
        excused_by: vec![usize::MAX; n],
        zi: problem.active_zi(),
        integral: problem.costs.iter().all(|c| c.fract() == 0.0),
        zi_used: vec![false; n],
        placed: vec![false; n],
        cost: 0.0,
        best_cost: cost_of(problem, &incumbent),
        best: incumbent,
        nodes: 0,
        budget: opts.node_budget,
        exhausted: false,
    };
    // A site whose closed neighbourhood lies inside a no-dearer site's is
    // never needed: swapping it out only enlarges the directly observed set.
    for j in 0..n {
        let nj: BTreeSet<usize> = problem.closed(j).collect();
        let dominated = (0..n).any(|k| {
            if k == j || problem.costs[k] > problem.costs[j] {
                return false;
            }
            let nk: BTreeSet<usize> = problem.closed(k).collect();
            nj.is_subset(&nk) && (nj != nk || problem.costs[k] < problem.costs[j] || k < j)
        });
        if dominated {
            search.forbidden[j] += 1;
        }
    }
    search.dfs();
    let placed = search.best.clone();
    let check = observed_set(problem, &placed);
    if check.iter().any(|s| !s) {
        return Err(Error::Infeasible("no observable placement found".into()));
    }
    Ok(PlacementSolution {
        total_cost: cost_of(problem, &placed),
        placed,
        proven_optimal: !search.exhausted,
        stats: SolverStats {
            nodes: search.nodes,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}

fn cost_of(p: &PlacementProblem, placed: &[bool]) -> f64 {
    placed.iter().zip(&p.costs).filter(|(x, _)| **x).map(|(_, c)| c).sum()
}

/// Greedy cover (best newly-covered per cost), then drop redundant PMUs from
/// the highest bus index down while observability holds.
fn greedy_placement(p: &PlacementProblem) -> Vec<bool> {
    let n = p.n();
    let mut placed = vec![false; n];
    let mut seen = vec![false; n];
    while seen.iter().any(|s| !s) {
        let (best, _) = (0..n)
            .filter(|&i| !placed[i])
            .map(|i| (i, p.closed(i).filter(|&j| !seen[j]).count() as f64 / p.costs[i]))
            .fold((usize::MAX, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        placed[best] = true;
        for j in p.closed(best) {
            seen[j] = true;
        }
    }
    for i in (0..n).rev() {
        if placed[i] {
            placed[i] = false;
            if observed_set(p, &placed).iter().any(|s| !s) {
                placed[i] = true;
            }
        }
    }
    placed
}

struct Search<'a> {
    p: &'a PlacementProblem,
    /// Zero-injection buses able to excuse each bus.
    excusers: Vec<Vec<usize>>,
    zi: Vec<usize>,
    integral: bool,
    cover: Vec<u32>,
    /// Buses whose PMU was already explored by an earlier sibling branch.
    forbidden: Vec<u32>,
    excused: Vec<bool>,
    excused_by: Vec<usize>,
    zi_used: Vec<bool>,
    placed: Vec<bool>,
    cost: f64,
    best: Vec<bool>,
    best_cost: f64,
    nodes: u64,
    budget: u64,
    exhausted: bool,
}

impl Search<'_> {
    fn open(&self, i: usize) -> bool {
        self.cover[i] == 0 && !self.excused[i]
    }

    fn free_excusers(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.excusers[i].iter().copied().filter(|&z| !self.zi_used[z])
    }

    fn allowed(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.p.closed(i).filter(|&j| self.forbidden[j] == 0)
    }

    fn dfs(&mut self) {
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return;
        }
        let n = self.p.n();
        // Branching bus: fewest options, lowest index on ties.
        let mut pick: Option<(usize, usize)> = None;
        for i in 0..n {
            if !self.open(i) {
                continue;
            }
            let k = self.allowed(i).count() + self.free_excusers(i).count();
            if k == 0 {
                return;
            }
            if pick.is_none_or(|(_, best)| k < best) {
                pick = Some((i, k));
            }
        }
        let Some((i, _)) = pick else {
            if self.cost < self.best_cost && observed_set(self.p, &self.placed).iter().all(|s| *s) {
                self.best_cost = self.cost;
                self.best = self.placed.clone();
            }
            return;
        };
        if self.cost + self.lower_bound() >= self.best_cost - 1e-9 {
            return;
        }
        let mut candidates: Vec<usize> = self.allowed(i).collect();
        candidates.sort_unstable();
        // Each candidate stays forbidden for its later siblings, so every
        // placement is reached along one path only.
        let mut tried = 0;
        for &j in &candidates {
            if self.exhausted {
                break;
            }
            self.set_pmu(j, true);
            self.dfs();
            self.set_pmu(j, false);
            self.forbidden[j] += 1;
            tried += 1;
        }
        let excusers: Vec<usize> = self.free_excusers(i).collect();
        for z in excusers {
            if self.exhausted {
                break;
            }
            self.excused[i] = true;
            self.excused_by[i] = z;
            self.zi_used[z] = true;
            if !self.circular(i) {
                self.dfs();
            }
            self.excused[i] = false;
            self.zi_used[z] = false;
        }
        for &j in &candidates[..tried] {
            self.forbidden[j] -= 1;
        }
    }

    /// Whether the inference of excused bus `start` depends, through other
    /// excused buses, on itself. Excused buses can never be covered directly
    /// (all their candidates are forbidden by then), so such a cycle can
    /// never be resolved by propagation.
    fn circular(&self, start: usize) -> bool {
        let mut stack = vec![start];
        let mut seen = vec![false; self.p.n()];
        while let Some(k) = stack.pop() {
            for m in self.p.closed(self.excused_by[k]) {
                if m == k || !self.excused[m] {
                    continue;
                }
                if m == start {
                    return true;
                }
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        false
    }

    fn set_pmu(&mut self, j: usize, on: bool) {
        self.placed[j] = on;
        if on {
            self.cost += self.p.costs[j];
        } else {
            self.cost -= self.p.costs[j];
        }
        for k in std::iter::once(j).chain(self.p.neighbors[j].iter().copied()) {
            if on {
                self.cover[k] += 1;
            } else {
                self.cover[k] -= 1;
            }
        }
    }

    fn lower_bound(&self) -> f64 {
        let lb = self.packing_bound().max(self.dual_bound());
        if self.integral {
            (lb - 1e-9).ceil()
        } else {
            lb
        }
    }

    /// Open buses sorted so that those no free zero-injection bus can excuse
    /// come first, then by fewest candidates.
    fn open_order(&self) -> Vec<(usize, usize)> {
        let mut order: Vec<(usize, usize, usize)> = (0..self.p.n())
            .filter(|&i| self.open(i))
            .map(|i| (self.free_excusers(i).count(), self.allowed(i).count(), i))
            .collect();
        order.sort_unstable();
        order.into_iter().map(|(e, _, i)| (e, i)).collect()
    }

    fn min_allowed_cost(&self, i: usize) -> f64 {
        self.allowed(i).map(|j| self.p.costs[j]).fold(f64::INFINITY, f64::min)
    }

    /// Packing bound: open buses whose allowed candidates are pairwise
    /// disjoint each need their own PMU unless excused, and each
    /// zero-injection bus excuses at most one of them.
    fn packing_bound(&self) -> f64 {
        let n = self.p.n();
        let mut blocked = vec![false; n];
        let mut needs = 0.0;
        let mut excusable: Vec<(f64, usize)> = Vec::new();
        for (e, i) in self.open_order() {
            if self.allowed(i).any(|j| blocked[j]) {
                continue;
            }
            let c = self.min_allowed_cost(i);
            if e == 0 && c.is_infinite() {
                return f64::INFINITY;
            }
            for j in self.allowed(i).collect::<Vec<_>>() {
                blocked[j] = true;
            }
            if e > 0 {
                if c.is_finite() {
                    needs += c;
                    excusable.push((c, i));
                }
            } else {
                needs += c;
            }
        }
        if excusable.is_empty() {
            return needs;
        }
        let k = self.matching(&excusable.iter().map(|&(_, i)| i).collect::<Vec<_>>());
        excusable.sort_by(|a, b| b.0.total_cmp(&a.0));
        needs - excusable.iter().take(k).map(|x| x.0).sum::<f64>()
    }

    /// Greedy dual ascent on the covering LP over allowed candidates. Each
    /// free zero-injection bus can remove at most the largest dual value in
    /// its neighbourhood.
    fn dual_bound(&self) -> f64 {
        let n = self.p.n();
        let mut slack = self.p.costs.clone();
        let mut u = vec![0.0; n];
        for (e, i) in self.open_order() {
            let v = self.allowed(i).map(|j| slack[j]).fold(f64::INFINITY, f64::min);
            if v.is_infinite() {
                if e == 0 {
                    return f64::INFINITY;
                }
                continue;
            }
            u[i] = v;
            for j in self.allowed(i).collect::<Vec<_>>() {
                slack[j] -= v;
            }
        }
        let mut lb: f64 = u.iter().sum();
        for &z in &self.zi {
            if !self.zi_used[z] {
                lb -= self.p.closed(z).map(|i| u[i]).fold(0.0, f64::max);
            }
        }
        lb
    }

    /// Maximum matching between `buses` and free zero-injection buses.
    fn matching(&self, buses: &[usize]) -> usize {
        let mut owner: Vec<Option<usize>> = vec![None; self.p.n()];
        let mut size = 0;
        for b in 0..buses.len() {
            let mut visited = vec![false; self.p.n()];
            if self.augment(b, buses, &mut owner, &mut visited) {
                size += 1;
            }
        }
        size
    }

    fn augment(&self, b: usize, buses: &[usize], owner: &mut [Option<usize>], visited: &mut [bool]) -> bool {
        for z in self.free_excusers(buses[b]) {
            if visited[z] {
                continue;
            }
            visited[z] = true;
            if owner[z].is_none_or(|o| self.augment(o, buses, owner, visited)) {
                owner[z] = Some(b);
                return true;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_and_star() {
        let p = PlacementProblem::from_edges(3, &[(1, 2), (2, 3)], &[]).unwrap();
        let s = solve_placement(&p, &Default::default()).unwrap();
        assert_eq!(p.placed_ids(&s.placed), vec![2]);
        assert!(s.proven_optimal);

        let p = PlacementProblem::from_edges(5, &[(1, 2), (1, 3), (1, 4), (1, 5)], &[]).unwrap();
        let s = solve_placement(&p, &Default::default()).unwrap();
        assert_eq!(p.placed_ids(&s.placed), vec![1]);
    }

    #[test]
    fn empty_and_full_placements() {
        let p = PlacementProblem::from_edges(4, &[(1, 2), (2, 3), (3, 4)], &[]).unwrap();
        let none = verify_observability(&p, &[false; 4]).unwrap();
        assert!(!none.observable);
        assert_eq!(none.unobserved, vec![1, 2, 3, 4]);
        assert!(verify_observability(&p, &[true; 4]).unwrap().observable);
    }

    #[test]
    fn zero_injection_infers_one_bus() {
        // path 1-2-3-4 with bus 3 zero-injection: a PMU at 2 sees 1,2,3 and
        // bus 3's balance gives bus 4.
        let p = PlacementProblem::from_edges(4, &[(1, 2), (2, 3), (3, 4)], &[3]).unwrap();
        assert!(verify_observability(&p, &[false, true, false, false]).unwrap().observable);
        let s = solve_placement(&p, &Default::default()).unwrap();
        assert_eq!(s.total_cost, 1.0);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        // 6x6 grid: the packing bound is loose, so the root cannot close.
        let mut edges = Vec::new();
        for r in 0..6u32 {
            for c in 0..6u32 {
                let k = r * 6 + c + 1;
                if c < 5 {
                    edges.push((k, k + 1));
                }
                if r < 5 {
                    edges.push((k, k + 6));
                }
            }
        }
        let p = PlacementProblem::from_edges(36, &edges, &[]).unwrap();
        let s = solve_placement(&p, &PlacementOptions { node_budget: 3 }).unwrap();
        assert!(!s.proven_optimal);
        assert!(verify_observability(&p, &s.placed).unwrap().observable);
    }
}
