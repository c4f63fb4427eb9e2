//! The binary program over node and edge indicators.
//!
//! Every row has the implication form `x_1 + .. + x_k - y <= k - 1`: when all
//! premises `x_i` are 1 the conclusion `y` must be 1. Rows are never stored;
//! they are enumerated from the graph structure, either all at once or only
//! those touching one variable.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{SpatialEdge, SpatioTemporalGraph, TemporalEdge};
use crate::model::{DetectionId, Frame};
use crate::potentials::PotentialTable;

/// Maps detections and edges to contiguous variable indices: nodes first, then
/// spatial edges, then temporal edges, each in graph order.
#[derive(Clone, Debug, Default)]
pub struct VarIndex {
    pub node_ids: Vec<DetectionId>,
    pub spatial: Vec<SpatialEdge>,
    pub temporal: Vec<TemporalEdge>,
    node_of: HashMap<DetectionId, usize>,
    spatial_of: HashMap<(DetectionId, DetectionId), usize>,
    temporal_of: HashMap<(DetectionId, DetectionId), usize>,
}

/// Variable kind with its graph identity.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarKey {
    Node(DetectionId),
    /// Spatial or temporal edge; endpoint order does not matter.
    Edge(DetectionId, DetectionId),
}

impl VarIndex {
    pub fn new(g: &SpatioTemporalGraph) -> Self {
        let node_ids: Vec<_> = g.nodes.iter().map(|d| d.id).collect();
        let n = node_ids.len();
        let ns = g.spatial_edges.len();
        let node_of = node_ids.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        let spatial_of = g
            .spatial_edges
            .iter()
            .enumerate()
            .map(|(i, e)| ((e.a, e.b), n + i))
            .collect();
        let temporal_of = g
            .temporal_edges
            .iter()
            .enumerate()
            .map(|(i, e)| ((e.a, e.b), n + ns + i))
            .collect();
        VarIndex {
            node_ids,
            spatial: g.spatial_edges.clone(),
            temporal: g.temporal_edges.clone(),
            node_of,
            spatial_of,
            temporal_of,
        }
    }

    pub fn total(&self) -> usize {
        self.node_ids.len() + self.spatial.len() + self.temporal.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn node_var(&self, id: DetectionId) -> Option<usize> {
        self.node_of.get(&id).copied()
    }

    pub fn spatial_var(&self, a: DetectionId, b: DetectionId) -> Option<usize> {
        self.spatial_of.get(&(a.min(b), a.max(b))).copied()
    }

    /// Temporal edges are stored from the earlier detection; either order works.
    pub fn temporal_var(&self, a: DetectionId, b: DetectionId) -> Option<usize> {
        self.temporal_of
            .get(&(a, b))
            .or_else(|| self.temporal_of.get(&(b, a)))
            .copied()
    }

    pub fn var(&self, key: VarKey) -> Option<usize> {
        match key {
            VarKey::Node(id) => self.node_var(id),
            VarKey::Edge(a, b) => self.spatial_var(a, b).or_else(|| self.temporal_var(a, b)),
        }
    }

    pub fn key(&self, var: usize) -> VarKey {
        let (n, ns) = (self.node_ids.len(), self.spatial.len());
        if var < n {
            VarKey::Node(self.node_ids[var])
        } else if var < n + ns {
            let e = self.spatial[var - n];
            VarKey::Edge(e.a, e.b)
        } else {
            let e = self.temporal[var - n - ns];
            VarKey::Edge(e.a, e.b)
        }
    }

    /// Name used in LP dumps: `v_<id>`, `s_<a>_<b>` or `t_<a>_<b>`.
    pub fn name(&self, var: usize) -> String {
        let (n, ns) = (self.node_ids.len(), self.spatial.len());
        if var < n {
            format!("v_{}", self.node_ids[var])
        } else if var < n + ns {
            let e = self.spatial[var - n];
            format!("s_{}_{}", e.a, e.b)
        } else {
            let e = self.temporal[var - n - ns];
            format!("t_{}_{}", e.a, e.b)
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    CoupleSpatial,
    CoupleTemporal,
    TransSpatial,
    TransTemporal,
    TransSt,
    ConsistSt,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 6] = [
        ConstraintKind::CoupleSpatial,
        ConstraintKind::CoupleTemporal,
        ConstraintKind::TransSpatial,
        ConstraintKind::TransTemporal,
        ConstraintKind::TransSt,
        ConstraintKind::ConsistSt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::CoupleSpatial => "couple_spatial",
            ConstraintKind::CoupleTemporal => "couple_temporal",
            ConstraintKind::TransSpatial => "trans_spatial",
            ConstraintKind::TransTemporal => "trans_temporal",
            ConstraintKind::TransSt => "trans_st",
            ConstraintKind::ConsistSt => "consist_st",
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which optional families take part. Coupling rows are always present.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Families {
    pub trans_spatial: bool,
    pub trans_temporal: bool,
    pub trans_st: bool,
    pub consist_st: bool,
}

impl Default for Families {
    fn default() -> Self {
        Families {
            trans_spatial: true,
            trans_temporal: true,
            trans_st: true,
            consist_st: true,
        }
    }
}

impl Families {
    pub fn enabled(&self, kind: ConstraintKind) -> bool {
        match kind {
            ConstraintKind::CoupleSpatial | ConstraintKind::CoupleTemporal => true,
            ConstraintKind::TransSpatial => self.trans_spatial,
            ConstraintKind::TransTemporal => self.trans_temporal,
            ConstraintKind::TransSt => self.trans_st,
            ConstraintKind::ConsistSt => self.consist_st,
        }
    }
}

/// `sum coef_i * x_i <= rhs` with unit coefficients, terms sorted by variable.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub kind: ConstraintKind,
    len: u8,
    vars: [u32; 4],
    coefs: [i8; 4],
    pub rhs: i8,
}

impl Constraint {
    /// `premises -> conclusion`.
    pub fn implication(kind: ConstraintKind, premises: &[u32], conclusion: u32) -> Self {
        debug_assert!(!premises.is_empty() && premises.len() <= 3);
        let mut terms = [(0u32, 0i8); 4];
        for (t, &p) in terms.iter_mut().zip(premises) {
            *t = (p, 1);
        }
        let len = premises.len() + 1;
        terms[premises.len()] = (conclusion, -1);
        terms[..len].sort_unstable_by_key(|t| t.0);
        let mut vars = [0; 4];
        let mut coefs = [0; 4];
        for (i, (v, c)) in terms[..len].iter().enumerate() {
            vars[i] = *v;
            coefs[i] = *c;
        }
        Constraint {
            kind,
            len: len as u8,
            vars,
            coefs,
            rhs: premises.len() as i8 - 1,
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, i8)> + '_ {
        (0..self.len as usize).map(|i| (self.vars[i] as usize, self.coefs[i]))
    }

    pub fn contains(&self, var: usize) -> bool {
        self.terms().any(|(v, _)| v == var)
    }

    pub fn activity(&self, values: &[bool]) -> i32 {
        self.terms()
            .map(|(v, c)| if values[v] { c as i32 } else { 0 })
            .sum()
    }

    pub fn is_violated(&self, values: &[bool]) -> bool {
        self.activity(values) > self.rhs as i32
    }
}

/// Structural lookups over node variable indices (graph positions).
#[derive(Clone, Debug, Default)]
struct Structure {
    frame_of: Vec<Frame>,
    /// Contiguous node ranges per frame, in frame order.
    frames: Vec<(Frame, u32, u32)>,
    spatial_ends: Vec<(u32, u32)>,
    temporal_ends: Vec<(u32, u32)>,
    spatial_lookup: HashMap<(u32, u32), u32>,
    temporal_lookup: HashMap<(u32, u32), u32>,
    /// Later temporal neighbours `(node, var)`, sorted by node.
    out_nbrs: Vec<Vec<(u32, u32)>>,
    /// Earlier temporal neighbours `(node, var)`, sorted by node.
    in_nbrs: Vec<Vec<(u32, u32)>>,
    /// Temporal variables per frame pair.
    frame_pairs: BTreeMap<(Frame, Frame), Vec<u32>>,
}

#[derive(Clone, Debug)]
pub struct IlpInstance {
    pub index: VarIndex,
    pub costs: Vec<f64>,
    /// Variables held at a value (batch stitching).
    pub fixed: BTreeMap<usize, bool>,
    pub families: Families,
    s: Structure,
}

impl IlpInstance {
    pub fn build(
        g: &SpatioTemporalGraph,
        pot: &PotentialTable,
        fixed: &BTreeMap<VarKey, bool>,
        families: Families,
    ) -> Result<Self> {
        let index = VarIndex::new(g);
        let costs = collect_costs(g, &index, pot)?;
        let mut fixed_vars = BTreeMap::new();
        for (&key, &value) in fixed {
            let v = index.var(key).ok_or_else(|| {
                Error::Validation(format!("fixed variable {key:?} is not part of the graph"))
            })?;
            fixed_vars.insert(v, value);
        }
        let s = structure(g, &index);
        Ok(IlpInstance {
            index,
            costs,
            fixed: fixed_vars,
            families,
            s,
        })
    }

    pub fn var_count(&self) -> usize {
        self.costs.len()
    }

    /// Cost-weighted sum of the selected variables, summed in index order.
    pub fn objective(&self, values: &[bool]) -> f64 {
        let mut total = 0.0;
        for (c, &x) in self.costs.iter().zip(values) {
            if x {
                total += c;
            }
        }
        total
    }

    pub fn is_node_var(&self, var: usize) -> bool {
        var < self.index.node_count()
    }

    /// Node variables at the two ends of an edge variable.
    pub fn edge_ends(&self, var: usize) -> Option<(usize, usize)> {
        let n = self.index.node_count();
        let ns = self.s.spatial_ends.len();
        let (a, b) = if var < n {
            return None;
        } else if var < n + ns {
            self.s.spatial_ends[var - n]
        } else {
            *self.s.temporal_ends.get(var - n - ns)?
        };
        Some((a as usize, b as usize))
    }

    pub fn respects_fixed(&self, values: &[bool]) -> bool {
        self.fixed.iter().all(|(&v, &x)| values[v] == x)
    }

    /// Visit every row, family by family.
    pub fn for_each_constraint<F>(&self, mut f: F) -> ControlFlow<()>
    where
        F: FnMut(&Constraint) -> ControlFlow<()>,
    {
        use ConstraintKind::*;
        let n = self.index.node_count() as u32;
        let ns = self.s.spatial_ends.len() as u32;
        for (i, &(a, b)) in self.s.spatial_ends.iter().enumerate() {
            coupling(CoupleSpatial, n + i as u32, a, b, &mut f)?;
        }
        for (i, &(a, b)) in self.s.temporal_ends.iter().enumerate() {
            coupling(CoupleTemporal, n + ns + i as u32, a, b, &mut f)?;
        }
        if self.families.trans_spatial {
            for &(_, lo, hi) in &self.s.frames {
                for i in lo..hi {
                    for j in i + 1..hi {
                        for k in j + 1..hi {
                            let (ij, jk, ik) = (self.sv(i, j), self.sv(j, k), self.sv(i, k));
                            triangle(TransSpatial, ij, jk, ik, &mut f)?;
                        }
                    }
                }
            }
        }
        if self.families.trans_temporal {
            for (i, &(a, b)) in self.s.temporal_ends.iter().enumerate() {
                let ab = n + ns + i as u32;
                for &(c, bc) in &self.s.out_nbrs[b as usize] {
                    if let Some(&ac) = self.s.temporal_lookup.get(&(a, c)) {
                        triangle(TransTemporal, ab, bc, ac, &mut f)?;
                    }
                }
            }
        }
        if self.families.trans_st {
            for d in 0..n as usize {
                for nbrs in [&self.s.out_nbrs[d], &self.s.in_nbrs[d]] {
                    for (i, &(x, dx)) in nbrs.iter().enumerate() {
                        for &(y, dy) in &nbrs[i + 1..] {
                            if self.s.frame_of[x as usize] == self.s.frame_of[y as usize] {
                                triangle(TransSt, dx, dy, self.sv(x, y), &mut f)?;
                            }
                        }
                    }
                }
            }
        }
        if self.families.consist_st {
            for edges in self.s.frame_pairs.values() {
                for (i, &e1) in edges.iter().enumerate() {
                    for &e2 in &edges[i + 1..] {
                        self.quad(e1, e2, &mut f)?;
                    }
                }
            }
        }
        ControlFlow::Continue(())
    }

    /// Visit every row containing `var`, with the same rows (and canonical
    /// forms) as [`Self::for_each_constraint`], in unspecified order.
    pub fn for_each_constraint_touching<F>(&self, var: usize, mut f: F) -> ControlFlow<()>
    where
        F: FnMut(&Constraint) -> ControlFlow<()>,
    {
        use ConstraintKind::*;
        let n = self.index.node_count();
        let ns = self.s.spatial_ends.len();
        let v = var as u32;
        if var < n {
            let (_, lo, hi) = self.frame_range(self.s.frame_of[var]);
            for o in lo..hi {
                if o != v {
                    f(&Constraint::implication(CoupleSpatial, &[self.sv(v, o)], v))?;
                }
            }
            for &(_, e) in self.s.out_nbrs[var].iter().chain(&self.s.in_nbrs[var]) {
                f(&Constraint::implication(CoupleTemporal, &[e], v))?;
            }
        } else if var < n + ns {
            let (a, b) = self.s.spatial_ends[var - n];
            coupling(CoupleSpatial, v, a, b, &mut f)?;
            if self.families.trans_spatial {
                let (_, lo, hi) = self.frame_range(self.s.frame_of[a as usize]);
                for c in lo..hi {
                    if c == a || c == b {
                        continue;
                    }
                    let mut t = [a, b, c];
                    t.sort_unstable();
                    let [i, j, k] = t;
                    triangle(TransSpatial, self.sv(i, j), self.sv(j, k), self.sv(i, k), &mut f)?;
                }
            }
            if self.families.trans_st {
                // Apex in a later frame, then in an earlier one.
                for &(c, ac) in &self.s.out_nbrs[a as usize] {
                    if let Some(&bc) = self.s.temporal_lookup.get(&(b, c)) {
                        triangle(TransSt, ac, bc, v, &mut f)?;
                    }
                }
                for &(c, ca) in &self.s.in_nbrs[a as usize] {
                    if let Some(&cb) = self.s.temporal_lookup.get(&(c, b)) {
                        triangle(TransSt, ca, cb, v, &mut f)?;
                    }
                }
            }
            if self.families.consist_st {
                for (na, nb) in [
                    (&self.s.out_nbrs[a as usize], &self.s.out_nbrs[b as usize]),
                    (&self.s.in_nbrs[a as usize], &self.s.in_nbrs[b as usize]),
                ] {
                    for &(x, ex) in na {
                        for &(y, ey) in nb {
                            if x != y
                                && self.s.frame_of[x as usize] == self.s.frame_of[y as usize]
                            {
                                self.quad(ex, ey, &mut f)?;
                            }
                        }
                    }
                }
            }
        } else {
            let (a, b) = self.s.temporal_ends[var - n - ns];
            coupling(CoupleTemporal, v, a, b, &mut f)?;
            let (fa, fb) = (self.s.frame_of[a as usize], self.s.frame_of[b as usize]);
            if self.families.trans_temporal {
                for &(c, bc) in &self.s.out_nbrs[b as usize] {
                    if let Some(&ac) = self.s.temporal_lookup.get(&(a, c)) {
                        triangle(TransTemporal, v, bc, ac, &mut f)?;
                    }
                }
                for &(c, ca) in &self.s.in_nbrs[a as usize] {
                    if let Some(&cb) = self.s.temporal_lookup.get(&(c, b)) {
                        triangle(TransTemporal, ca, v, cb, &mut f)?;
                    }
                }
                for &(c, ac) in &self.s.out_nbrs[a as usize] {
                    if self.s.frame_of[c as usize] < fb {
                        if let Some(&cb) = self.s.temporal_lookup.get(&(c, b)) {
                            triangle(TransTemporal, ac, cb, v, &mut f)?;
                        }
                    }
                }
            }
            if self.families.trans_st {
                for &(c, ac) in &self.s.out_nbrs[a as usize] {
                    if c != b && self.s.frame_of[c as usize] == fb {
                        triangle(TransSt, v, ac, self.sv(b, c), &mut f)?;
                    }
                }
                for &(c, cb) in &self.s.in_nbrs[b as usize] {
                    if c != a && self.s.frame_of[c as usize] == fa {
                        triangle(TransSt, v, cb, self.sv(a, c), &mut f)?;
                    }
                }
            }
            if self.families.consist_st {
                for &e in &self.s.frame_pairs[&(fa, fb)] {
                    if e != v {
                        self.quad(v, e, &mut f)?;
                    }
                }
            }
        }
        ControlFlow::Continue(())
    }

    pub fn constraints(&self) -> Vec<Constraint> {
        let mut out = Vec::new();
        let _ = self.for_each_constraint(|c| {
            out.push(*c);
            ControlFlow::Continue(())
        });
        out
    }

    pub fn constraints_touching(&self, var: usize) -> Vec<Constraint> {
        let mut out = Vec::new();
        let _ = self.for_each_constraint_touching(var, |c| {
            out.push(*c);
            ControlFlow::Continue(())
        });
        out
    }

    pub fn constraint_counts(&self) -> BTreeMap<ConstraintKind, usize> {
        let mut out: BTreeMap<_, _> = ConstraintKind::ALL
            .iter()
            .filter(|k| self.families.enabled(**k))
            .map(|&k| (k, 0))
            .collect();
        let _ = self.for_each_constraint(|c| {
            *out.entry(c.kind).or_default() += 1;
            ControlFlow::Continue(())
        });
        out
    }

    /// Up to `limit` violated rows, in enumeration order.
    pub fn violated_constraints(&self, values: &[bool], limit: usize) -> Vec<Constraint> {
        let mut out = Vec::new();
        if limit == 0 {
            return out;
        }
        let _ = self.for_each_constraint(|c| {
            if c.is_violated(values) {
                out.push(*c);
                if out.len() >= limit {
                    return ControlFlow::Break(());
                }
            }
            ControlFlow::Continue(())
        });
        out
    }

    /// Plain-text LP dump (CPLEX LP dialect).
    pub fn to_lp(&self) -> String {
        let mut out = String::from("\\ jointtrack instance\nMinimize\n obj:");
        if self.costs.is_empty() {
            out.push_str(" 0");
        }
        for (i, c) in self.costs.iter().enumerate() {
            let sign = if c.is_sign_negative() { '-' } else { '+' };
            let _ = write!(out, "\n   {sign} {} {}", c.abs(), self.index.name(i));
        }
        out.push_str("\nSubject To\n");
        let mut row = 0usize;
        let _ = self.for_each_constraint(|c| {
            let _ = write!(out, " {}_{row}:", c.kind);
            for (k, (v, coef)) in c.terms().enumerate() {
                let sign = match (k, coef < 0) {
                    (0, true) => "-",
                    (0, false) => "",
                    (_, true) => "- ",
                    (_, false) => "+ ",
                };
                let _ = write!(out, " {sign}{}", self.index.name(v));
            }
            let _ = writeln!(out, " <= {}", c.rhs);
            row += 1;
            ControlFlow::Continue(())
        });
        if !self.fixed.is_empty() {
            out.push_str("Bounds\n");
            for (&v, &x) in &self.fixed {
                let _ = writeln!(out, " {} = {}", self.index.name(v), x as u8);
            }
        }
        out.push_str("Binary\n");
        for i in 0..self.costs.len() {
            let _ = writeln!(out, " {}", self.index.name(i));
        }
        out.push_str("End\n");
        out
    }

    fn sv(&self, a: u32, b: u32) -> u32 {
        self.s.spatial_lookup[&(a.min(b), a.max(b))]
    }

    fn frame_range(&self, frame: Frame) -> (Frame, u32, u32) {
        let i = self
            .s
            .frames
            .binary_search_by_key(&frame, |r| r.0)
            .expect("frame of an existing node");
        self.s.frames[i]
    }

    /// The two consistency rows for temporal edges `e1`, `e2` between one frame
    /// pair, if their endpoints are distinct.
    fn quad<F>(&self, e1: u32, e2: u32, f: &mut F) -> ControlFlow<()>
    where
        F: FnMut(&Constraint) -> ControlFlow<()>,
    {
        let off = (self.index.node_count() + self.s.spatial_ends.len()) as u32;
        let (a, b) = self.s.temporal_ends[(e1 - off) as usize];
        let (c, d) = self.s.temporal_ends[(e2 - off) as usize];
        if a == c || b == d {
            return ControlFlow::Continue(());
        }
        let (early, late) = (self.sv(a, c), self.sv(b, d));
        f(&Constraint::implication(ConstraintKind::ConsistSt, &[e1, e2, early], late))?;
        f(&Constraint::implication(ConstraintKind::ConsistSt, &[e1, e2, late], early))
    }
}

fn coupling<F>(kind: ConstraintKind, e: u32, a: u32, b: u32, f: &mut F) -> ControlFlow<()>
where
    F: FnMut(&Constraint) -> ControlFlow<()>,
{
    f(&Constraint::implication(kind, &[e], a))?;
    f(&Constraint::implication(kind, &[e], b))
}

fn triangle<F>(kind: ConstraintKind, x: u32, y: u32, z: u32, f: &mut F) -> ControlFlow<()>
where
    F: FnMut(&Constraint) -> ControlFlow<()>,
{
    f(&Constraint::implication(kind, &[x, y], z))?;
    f(&Constraint::implication(kind, &[x, z], y))?;
    f(&Constraint::implication(kind, &[y, z], x))
}

fn collect_costs(g: &SpatioTemporalGraph, index: &VarIndex, pot: &PotentialTable) -> Result<Vec<f64>> {
    let mut missing = Vec::new();
    let mut costs = Vec::with_capacity(index.total());
    for d in &g.nodes {
        match pot.node_cost.get(&d.id) {
            Some(&c) => costs.push(c),
            None => missing.push(format!("node {}", d.id)),
        }
    }
    for e in &g.spatial_edges {
        match pot.spatial_cost.get(&(e.a, e.b)) {
            Some(&c) => costs.push(c),
            None => missing.push(format!("spatial edge {}-{}", e.a, e.b)),
        }
    }
    for e in &g.temporal_edges {
        match pot.temporal_cost.get(&(e.a, e.b)) {
            Some(&c) => costs.push(c),
            None => missing.push(format!("temporal edge {}-{}", e.a, e.b)),
        }
    }
    let extra = pot.node_cost.len() + pot.spatial_cost.len() + pot.temporal_cost.len()
        - costs.len();
    if !missing.is_empty() || extra != 0 {
        let mut msg = String::new();
        if !missing.is_empty() {
            let shown: Vec<_> = missing.iter().take(10).cloned().collect();
            let _ = write!(msg, "{} missing ({}", missing.len(), shown.join(", "));
            if missing.len() > shown.len() {
                msg.push_str(", ...");
            }
            msg.push(')');
        }
        if extra != 0 {
            if !msg.is_empty() {
                msg.push_str("; ");
            }
            let _ = write!(msg, "{extra} entries do not belong to the graph");
        }
        return Err(Error::PotentialMismatch(msg));
    }
    if let Some(c) = costs.iter().find(|c| !c.is_finite()) {
        return Err(Error::PotentialMismatch(format!("non-finite cost {c}")));
    }
    Ok(costs)
}

fn structure(g: &SpatioTemporalGraph, index: &VarIndex) -> Structure {
    let n = g.nodes.len();
    let ns = g.spatial_edges.len();
    let frame_of: Vec<Frame> = g.nodes.iter().map(|d| d.frame).collect();
    let mut frames: Vec<(Frame, u32, u32)> = Vec::new();
    for (i, &f) in frame_of.iter().enumerate() {
        match frames.last_mut() {
            Some(r) if r.0 == f => r.2 = i as u32 + 1,
            _ => frames.push((f, i as u32, i as u32 + 1)),
        }
    }
    let pos = |id: DetectionId| index.node_var(id).expect("edge endpoint is a node") as u32;
    let spatial_ends: Vec<(u32, u32)> = g.spatial_edges.iter().map(|e| (pos(e.a), pos(e.b))).collect();
    let temporal_ends: Vec<(u32, u32)> =
        g.temporal_edges.iter().map(|e| (pos(e.a), pos(e.b))).collect();
    let spatial_lookup = spatial_ends
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| ((a.min(b), a.max(b)), (n + i) as u32))
        .collect();
    let temporal_lookup = temporal_ends
        .iter()
        .enumerate()
        .map(|(i, &ab)| (ab, (n + ns + i) as u32))
        .collect();
    let mut out_nbrs = vec![Vec::new(); n];
    let mut in_nbrs = vec![Vec::new(); n];
    let mut frame_pairs: BTreeMap<(Frame, Frame), Vec<u32>> = BTreeMap::new();
    for (i, &(a, b)) in temporal_ends.iter().enumerate() {
        let var = (n + ns + i) as u32;
        out_nbrs[a as usize].push((b, var));
        in_nbrs[b as usize].push((a, var));
        frame_pairs
            .entry((frame_of[a as usize], frame_of[b as usize]))
            .or_default()
            .push(var);
    }
    // Node positions follow frame order, so sorting by node groups frames.
    for l in out_nbrs.iter_mut().chain(in_nbrs.iter_mut()) {
        l.sort_unstable();
    }
    Structure {
        frame_of,
        frames,
        spatial_ends,
        temporal_ends,
        spatial_lookup,
        temporal_lookup,
        out_nbrs,
        in_nbrs,
        frame_pairs,
    }
}
