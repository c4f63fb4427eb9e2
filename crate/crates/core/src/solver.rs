//! Exact minimisation of an [`IlpInstance`].
//!
//! The instance is split into independent components first: two nodes share
//! a component when an edge between them has negative cost or is fixed to 1.
//! Edges across components are set to 0, which never loses optimality.
//! Each component is then solved by depth-first branch-and-bound with unit
//! propagation over the rows touching every newly fixed variable.

use std::collections::HashSet;
use std::ops::ControlFlow;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ilp::{Constraint, IlpInstance};

/// Largest instance [`brute_force`] accepts.
pub const BRUTE_FORCE_MAX_VARS: usize = 24;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Seconds; 0 disables the limit.
    pub time_limit: f64,
    /// Search nodes per component; 0 disables the limit.
    pub node_limit: u64,
    /// Violated rows reported by the final feasibility check.
    pub separation_batch: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_limit: 0.0,
            node_limit: 0,
            separation_batch: 512,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.time_limit.is_finite() && self.time_limit >= 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid time limit {}", self.time_limit)))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub values: Vec<bool>,
    pub objective: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes_explored: u64,
    /// Distinct rows that forced a value or raised a conflict.
    pub constraints_added: usize,
    pub components: usize,
    pub proven_optimal: bool,
    /// Seconds. Not serialised so that reports stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

/// Full feasibility check, including fixed values.
pub fn check(inst: &IlpInstance, values: &[bool]) -> bool {
    values.len() == inst.var_count()
        && inst.respects_fixed(values)
        && inst.violated_constraints(values, 1).is_empty()
}

const FREE: i8 = -1;

struct Search<'a> {
    inst: &'a IlpInstance,
    val: Vec<i8>,
    trail: Vec<usize>,
    fired: HashSet<Constraint>,
    /// Component of each variable; `usize::MAX` for cross-component edges.
    comp_of: Vec<usize>,
    current: usize,
    /// Cost of the component's variables set to 1.
    partial: f64,
    /// Sum of the component's free negative costs.
    neg_free: f64,
}

impl<'a> Search<'a> {
    fn value(&self, v: usize) -> Option<bool> {
        match self.val[v] {
            FREE => None,
            x => Some(x == 1),
        }
    }

    fn set(&mut self, v: usize, x: bool) {
        self.val[v] = x as i8;
        self.trail.push(v);
        if self.comp_of[v] == self.current {
            let c = self.inst.costs[v];
            if c < 0.0 {
                self.neg_free -= c;
            }
            if x {
                self.partial += c;
            }
        }
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().expect("trail above mark");
            if self.comp_of[v] == self.current {
                let c = self.inst.costs[v];
                if c < 0.0 {
                    self.neg_free += c;
                }
                if self.val[v] == 1 {
                    self.partial -= c;
                }
            }
            self.val[v] = FREE;
        }
    }

    /// Fix `v` and propagate. On conflict the caller undoes to its mark.
    fn assign(&mut self, v: usize, x: bool) -> bool {
        match self.value(v) {
            Some(y) => return y == x,
            None => self.set(v, x),
        }
        self.propagate(self.trail.len() - 1)
    }

    fn propagate(&mut self, mut head: usize) -> bool {
        let inst = self.inst;
        let mut forced: Vec<(usize, bool)> = Vec::new();
        while head < self.trail.len() {
            let var = self.trail[head];
            head += 1;
            let mut conflict = false;
            let _ = inst.for_each_constraint_touching(var, |row| {
                let mut min_act = 0i32;
                let mut free = 0;
                for (v, c) in row.terms() {
                    // Lower bound for +1 terms, upper bound for -1 terms.
                    match (self.val[v], c > 0) {
                        (1, true) => min_act += 1,
                        (0, false) | (_, true) => {}
                        (_, false) => min_act -= 1,
                    }
                    free += (self.val[v] == FREE) as usize;
                }
                let rhs = row.rhs as i32;
                if min_act > rhs {
                    self.fired.insert(*row);
                    conflict = true;
                    return ControlFlow::Break(());
                }
                if min_act == rhs && free > 0 {
                    self.fired.insert(*row);
                    for (v, c) in row.terms() {
                        if self.val[v] == FREE {
                            forced.push((v, c < 0));
                        }
                    }
                }
                ControlFlow::Continue(())
            });
            if conflict {
                return false;
            }
            for (v, x) in forced.drain(..) {
                match self.value(v) {
                    None => self.set(v, x),
                    Some(y) if y != x => return false,
                    Some(_) => {}
                }
            }
        }
        true
    }
}

struct ComponentSearch {
    vars: Vec<usize>,
    /// Negative-cost variables, most negative first.
    branch_order: Vec<usize>,
    best: f64,
    best_values: Vec<bool>,
    nodes: u64,
    node_limit: u64,
    deadline: Option<Instant>,
    aborted: bool,
}

impl ComponentSearch {
    fn exact_objective(&self, s: &Search<'_>) -> f64 {
        let mut total = 0.0;
        for &v in &self.vars {
            if s.val[v] == 1 {
                total += s.inst.costs[v];
            }
        }
        total
    }

    fn record(&mut self, s: &Search<'_>) {
        let obj = self.exact_objective(s);
        if obj < self.best {
            self.best = obj;
            self.best_values = self.vars.iter().map(|&v| s.val[v] == 1).collect();
        }
    }

    fn prunes(&self, bound: f64) -> bool {
        bound >= self.best - 1e-12 * self.best.abs().max(1.0)
    }

    /// Take every improving branch greedily.
    fn dive(&mut self, s: &mut Search<'_>) {
        let mark = s.trail.len();
        for i in 0..self.branch_order.len() {
            let v = self.branch_order[i];
            if s.value(v).is_some() {
                continue;
            }
            let before = s.partial;
            let step = s.trail.len();
            if s.assign(v, true) && s.partial < before {
                continue;
            }
            s.undo(step);
            let ok = s.assign(v, false);
            debug_assert!(ok, "fixing a free variable to 0 cannot conflict");
        }
        self.record(s);
        s.undo(mark);
    }

    fn dfs(&mut self, s: &mut Search<'_>) {
        if self.aborted {
            return;
        }
        if self.node_limit > 0 && self.nodes >= self.node_limit {
            self.aborted = true;
            return;
        }
        if self.nodes.is_multiple_of(256) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.aborted = true;
                    return;
                }
            }
        }
        self.nodes += 1;
        if self.prunes(s.partial + s.neg_free) {
            return;
        }
        let Some(v) = self.branch_order.iter().copied().find(|&v| s.val[v] == FREE) else {
            self.record(s);
            return;
        };
        for x in [true, false] {
            let mark = s.trail.len();
            if s.assign(v, x) {
                self.dfs(s);
            }
            s.undo(mark);
            if self.aborted {
                return;
            }
        }
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub fn solve(inst: &IlpInstance, cfg: &SolverConfig) -> Result<(Assignment, SolveStats)> {
    cfg.validate()?;
    let start = Instant::now();
    let deadline = (cfg.time_limit > 0.0)
        .then(|| start + std::time::Duration::from_secs_f64(cfg.time_limit));
    let total = inst.var_count();
    let n = inst.index.node_count();

    let mut parent: Vec<usize> = (0..n).collect();
    for v in n..total {
        let (a, b) = inst.edge_ends(v).expect("edge variable");
        if inst.costs[v] < 0.0 || inst.fixed.get(&v) == Some(&true) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut comp_id = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if comp_id[r] == usize::MAX {
            comp_id[r] = components.len();
            components.push(Vec::new());
        }
        comp_id[i] = comp_id[r];
    }
    let mut comp_of = vec![usize::MAX; total];
    for v in 0..total {
        let c = if v < n {
            comp_id[v]
        } else {
            let (a, b) = inst.edge_ends(v).expect("edge variable");
            if comp_id[a] == comp_id[b] {
                comp_id[a]
            } else {
                usize::MAX
            }
        };
        comp_of[v] = c;
        if c != usize::MAX {
            components[c].push(v);
        }
    }

    let mut s = Search {
        inst,
        val: vec![FREE; total],
        trail: Vec::new(),
        fired: HashSet::new(),
        comp_of,
        current: usize::MAX,
        partial: 0.0,
        neg_free: 0.0,
    };
    for (&v, &x) in &inst.fixed {
        if v >= total {
            return Err(Error::Validation(format!("fixed variable {v} out of range")));
        }
        if !s.assign(v, x) {
            return Err(Error::Infeasible);
        }
    }
    for v in n..total {
        if s.comp_of[v] == usize::MAX && !s.assign(v, false) {
            return Err(Error::Infeasible);
        }
    }

    let mut values = vec![false; total];
    let mut stats = SolveStats {
        components: components.len(),
        proven_optimal: true,
        ..SolveStats::default()
    };
    for (c, vars) in components.into_iter().enumerate() {
        s.current = c;
        s.partial = 0.0;
        s.neg_free = 0.0;
        for &v in &vars {
            let cost = inst.costs[v];
            match s.value(v) {
                None if cost < 0.0 => s.neg_free += cost,
                Some(true) => s.partial += cost,
                _ => {}
            }
        }
        let mut branch_order: Vec<usize> =
            vars.iter().copied().filter(|&v| inst.costs[v] < 0.0).collect();
        branch_order.sort_by(|&a, &b| inst.costs[a].total_cmp(&inst.costs[b]).then(a.cmp(&b)));
        let mut cs = ComponentSearch {
            vars,
            branch_order,
            best: f64::INFINITY,
            best_values: Vec::new(),
            nodes: 0,
            node_limit: cfg.node_limit,
            deadline,
            aborted: false,
        };
        cs.dive(&mut s);
        cs.dfs(&mut s);
        stats.nodes_explored += cs.nodes;
        if cs.aborted {
            stats.proven_optimal = false;
        }
        for (&v, &x) in cs.vars.iter().zip(&cs.best_values) {
            values[v] = x;
        }
    }
    for (v, x) in values.iter_mut().enumerate() {
        if let Some(y) = s.value(v) {
            if s.comp_of[v] == usize::MAX {
                *x = y;
            }
        }
    }
    stats.constraints_added = s.fired.len();

    let violated = inst.violated_constraints(&values, cfg.separation_batch.max(1));
    if !violated.is_empty() || !inst.respects_fixed(&values) {
        return Err(Error::Internal(format!(
            "solver produced an infeasible assignment ({} violated rows, first {:?})",
            violated.len(),
            violated.first().map(|c| c.kind)
        )));
    }
    let objective = inst.objective(&values);
    stats.wall_time = start.elapsed().as_secs_f64();
    Ok((Assignment { values, objective }, stats))
}

/// Exhaustive minimisation. Ties go to the lexicographically smallest vector
/// with variable 0 most significant. Also returns the number of feasible
/// assignments.
pub fn brute_force(inst: &IlpInstance) -> Result<(Assignment, u64)> {
    let total = inst.var_count();
    if total > BRUTE_FORCE_MAX_VARS {
        return Err(Error::TooLarge {
            vars: total,
            max: BRUTE_FORCE_MAX_VARS,
        });
    }
    // Each row is checked as soon as its last variable is set.
    let mut rows_at: Vec<Vec<Constraint>> = vec![Vec::new(); total];
    for c in inst.constraints() {
        let last = c.terms().map(|(v, _)| v).max().expect("non-empty row");
        rows_at[last].push(c);
    }
    let mut fixed = vec![None; total];
    for (&v, &x) in &inst.fixed {
        fixed[v] = Some(x);
    }
    let mut st = Brute {
        inst,
        rows_at,
        fixed,
        values: vec![false; total],
        best: None,
        count: 0,
    };
    st.walk(0);
    let best = st.best.ok_or(Error::Infeasible)?;
    Ok((best, st.count))
}

struct Brute<'a> {
    inst: &'a IlpInstance,
    rows_at: Vec<Vec<Constraint>>,
    fixed: Vec<Option<bool>>,
    values: Vec<bool>,
    best: Option<Assignment>,
    count: u64,
}

impl Brute<'_> {
    fn walk(&mut self, k: usize) {
        if k == self.values.len() {
            self.count += 1;
            let obj = self.inst.objective(&self.values);
            if self.best.as_ref().is_none_or(|b| obj < b.objective) {
                self.best = Some(Assignment {
                    values: self.values.clone(),
                    objective: obj,
                });
            }
            return;
        }
        for x in [false, true] {
            if self.fixed[k].is_some_and(|f| f != x) {
                continue;
            }
            self.values[k] = x;
            if self.rows_at[k].iter().all(|c| !c.is_violated(&self.values)) {
                self.walk(k + 1);
            }
        }
        self.values[k] = false;
    }
}
