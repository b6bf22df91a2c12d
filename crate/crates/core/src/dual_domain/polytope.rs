use std::sync::{Arc, OnceLock};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::dd::extreme_rays;
use crate::error::{Error, Result};
use crate::market::{EventTree, MarketScenario, NodeId};
use crate::numeric::lp::{LinearProgram, Relation};
use crate::numeric::qp::QuadraticProgram;

pub const TOL_MEMBERSHIP: f64 = 1e-9;
/// Vertex enumeration is attempted only up to this many paths.
pub const MAX_VERTEX_PATHS: usize = 64;
/// ... and gives up when the vertex count would exceed this.
pub const MAX_VERTEX_COUNT: usize = 50_000;

/// A point of the dual domain: one weight per path (terminal node).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualMeasure {
    pub q: Vec<f64>,
}

impl DualMeasure {
    pub fn new(q: Vec<f64>) -> Self {
        Self { q }
    }

    /// Q of the event `id`: total weight of the paths through it.
    pub fn mass(&self, tree: &EventTree, id: NodeId) -> f64 {
        self.q[tree.paths_below(id)].iter().sum()
    }

    /// ⟨Q, ξ⟩ for a path-indexed random variable.
    pub fn expect(&self, values: &[f64]) -> f64 {
        self.q.iter().zip(values).map(|(a, b)| a * b).sum()
    }

    /// The reference measure ℙ in path coordinates.
    pub fn reference(tree: &EventTree) -> Self {
        Self {
            q: tree.terminals().iter().map(|&t| tree.prob(t)).collect(),
        }
    }
}

/// Density process Y^Q: Q(node)/ℙ(node) at every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProcess {
    pub y: Vec<f64>,
}

impl DensityProcess {
    pub fn at(&self, id: NodeId) -> f64 {
        self.y[id]
    }
}

pub fn density_process(tree: &EventTree, q: &DualMeasure) -> DensityProcess {
    DensityProcess {
        y: (0..tree.num_nodes())
            .map(|n| q.mass(tree, n) / tree.prob(n))
            .collect(),
    }
}

/// One supermartingale inequality `coeffs · q ≤ 0`, i.e.
/// `g · E_Q[(S_{t+1} − S_t) 1_node] ≤ 0` for generator `g` at `node`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub node: NodeId,
    pub generator: usize,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LocalNode {
    node: NodeId,
    children: Vec<NodeId>,
    /// one row per generator: g·ΔS_c for each child c
    drift: Vec<Vec<f64>>,
}

/// `{q ≥ 0, Σq = 1, Aq ≤ 0}`: the closure of the supermartingale measures.
#[derive(Debug)]
pub struct SupermartingalePolytope {
    tree: EventTree,
    rows: Vec<ConstraintRow>,
    equalities: Vec<Vec<f64>>,
    inequalities: Vec<Vec<f64>>,
    local: Vec<LocalNode>,
    interior: OnceLock<Option<(DualMeasure, f64)>>,
    vertices: OnceLock<std::result::Result<Arc<Vec<DualMeasure>>, (usize, usize)>>,
}

impl Clone for SupermartingalePolytope {
    fn clone(&self) -> Self {
        Self {
            tree: self.tree.clone(),
            rows: self.rows.clone(),
            equalities: self.equalities.clone(),
            inequalities: self.inequalities.clone(),
            local: self.local.clone(),
            interior: OnceLock::new(),
            vertices: OnceLock::new(),
        }
    }
}

fn same_direction(a: &[f64], b: &[f64], sign: f64) -> bool {
    let scale = a.iter().chain(b).fold(0.0f64, |m, x| m.max(x.abs()));
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - sign * y).abs() <= 1e-12 * scale)
}

/// One row per (non-terminal node, cone generator) encoding
/// `g · E_Q[ΔS 1_node] ≤ 0`, linear in the path weights. A measure
/// satisfies all rows iff every nonnegative wealth process with holdings
/// in the cone is a Q-supermartingale.
pub fn supermartingale_constraints(s: &MarketScenario) -> SupermartingalePolytope {
    let tree = s.tree();
    let k = tree.num_paths();
    let mut rows = Vec::new();
    let mut local = Vec::new();
    let mut equalities = Vec::new();
    let mut inequalities = Vec::new();
    for id in tree.interior_nodes() {
        let children = tree.children(id).to_vec();
        let steps: Vec<Vec<f64>> = children.iter().map(|&c| s.price_step(c)).collect();
        let drift: Vec<Vec<f64>> = s
            .cone()
            .generators()
            .iter()
            .map(|g| {
                steps
                    .iter()
                    .map(|ds| g.iter().zip(ds).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        for (gi, d) in drift.iter().enumerate() {
            let mut coeffs = vec![0.0; k];
            for (ci, &c) in children.iter().enumerate() {
                for w in tree.paths_below(c) {
                    coeffs[w] = d[ci];
                }
            }
            rows.push(ConstraintRow {
                node: id,
                generator: gi,
                coeffs,
            });
        }
        // reduced system: drop zero rows and duplicates, merge opposite pairs
        let mut used = vec![false; drift.len()];
        for i in 0..drift.len() {
            if used[i] || drift[i].iter().all(|v| *v == 0.0) {
                continue;
            }
            used[i] = true;
            let mut is_eq = false;
            for j in i + 1..drift.len() {
                if used[j] {
                    continue;
                }
                if same_direction(&drift[i], &drift[j], 1.0) {
                    used[j] = true;
                } else if same_direction(&drift[i], &drift[j], -1.0) {
                    used[j] = true;
                    is_eq = true;
                }
            }
            let row = rows[rows.len() - drift.len() + i].coeffs.clone();
            if is_eq {
                equalities.push(row);
            } else {
                inequalities.push(row);
            }
        }
        local.push(LocalNode {
            node: id,
            children,
            drift,
        });
    }
    SupermartingalePolytope {
        tree: tree.clone(),
        rows,
        equalities,
        inequalities,
        local,
        interior: OnceLock::new(),
        vertices: OnceLock::new(),
    }
}

impl SupermartingalePolytope {
    pub fn dim(&self) -> usize {
        self.tree.num_paths()
    }

    pub fn tree(&self) -> &EventTree {
        &self.tree
    }

    /// All supermartingale rows, one per (node, generator), zero rows included.
    pub fn rows(&self) -> &[ConstraintRow] {
        &self.rows
    }

    /// Rows that hold with equality (a generator and its negative).
    pub fn equality_rows(&self) -> &[Vec<f64>] {
        &self.equalities
    }

    /// Remaining nonzero rows `a·q ≤ 0`.
    pub fn inequality_rows(&self) -> &[Vec<f64>] {
        &self.inequalities
    }

    /// Largest violation of any constraint at `q` (≤ 0 means feasible).
    pub fn max_violation(&self, q: &[f64]) -> f64 {
        let dot = |a: &[f64]| -> f64 { a.iter().zip(q).map(|(x, y)| x * y).sum() };
        let mut worst = (q.iter().sum::<f64>() - 1.0).abs();
        for &v in q {
            worst = worst.max(-v);
        }
        for r in &self.rows {
            worst = worst.max(dot(&r.coeffs));
        }
        worst
    }

    pub fn contains(&self, q: &[f64], tol: f64) -> bool {
        q.len() == self.dim() && self.max_violation(q) <= tol
    }

    /// Strictly positive member maximizing its smallest weight, with that
    /// weight; `None` when the polytope is empty.
    pub fn interior_point(&self) -> Option<(DualMeasure, f64)> {
        self.interior
            .get_or_init(|| {
                let k = self.dim();
                let mut cost = vec![0.0; k + 1];
                cost[k] = 1.0;
                let mut lp = LinearProgram::maximize(cost);
                lp.set_free(k);
                for w in 0..k {
                    let mut row = vec![0.0; k + 1];
                    row[w] = 1.0;
                    row[k] = -1.0;
                    lp.constrain(row, Relation::Ge, 0.0);
                }
                self.add_polytope_rows(&mut lp, k + 1);
                let sol = lp.solve().optimal()?;
                let t = sol.x[k];
                let mut q: Vec<f64> = sol.x[..k].iter().map(|v| v.max(0.0)).collect();
                let s: f64 = q.iter().sum();
                q.iter_mut().for_each(|v| *v /= s);
                Some((DualMeasure::new(q), t))
            })
            .clone()
    }

    fn add_polytope_rows(&self, lp: &mut LinearProgram, width: usize) {
        let k = self.dim();
        let pad = |r: &[f64]| -> Vec<f64> {
            let mut v = r.to_vec();
            v.resize(width, 0.0);
            v
        };
        let mut ones = vec![1.0; k];
        ones.resize(width, 0.0);
        lp.constrain(ones, Relation::Eq, 1.0);
        for r in &self.equalities {
            lp.constrain(pad(r), Relation::Eq, 0.0);
        }
        for r in &self.inequalities {
            lp.constrain(pad(r), Relation::Le, 0.0);
        }
    }

    /// max over the polytope of `c·q` by linear programming.
    pub fn lp_maximize(&self, c: &[f64]) -> Result<(f64, DualMeasure)> {
        let k = self.dim();
        let mut lp = LinearProgram::maximize(c.to_vec());
        self.add_polytope_rows(&mut lp, k);
        let sol = lp.solve().optimal().ok_or_else(|| {
            Error::Internal("linear maximization over an empty or unbounded dual domain".into())
        })?;
        Ok((sol.value, DualMeasure::new(sol.x)))
    }

    /// max over the polytope of `c·q`: scans the vertex list when it is
    /// available, otherwise solves an LP.
    pub fn maximize_linear(&self, c: &[f64]) -> Result<(f64, DualMeasure)> {
        match self.vertices() {
            Ok(vs) => {
                let (i, v) = vs.iter().enumerate().map(|(i, v)| (i, v.expect(c))).fold(
                    (usize::MAX, f64::NEG_INFINITY),
                    |a, b| if b.1 > a.1 { b } else { a },
                );
                if i == usize::MAX {
                    return Err(Error::Internal("dual domain has no vertices".into()));
                }
                Ok((v, vs[i].clone()))
            }
            Err(_) => self.lp_maximize(c),
        }
    }

    pub fn minimize_linear(&self, c: &[f64]) -> Result<(f64, DualMeasure)> {
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        let (v, q) = self.maximize_linear(&neg)?;
        Ok((-v, q))
    }

    /// Exact vertex list. A measure is extreme iff its one-step conditional
    /// law at every node it reaches is a vertex of that node's local
    /// polytope, so the list is assembled recursively from local
    /// double-description enumerations.
    pub fn vertices(&self) -> Result<Arc<Vec<DualMeasure>>> {
        if self.dim() > MAX_VERTEX_PATHS {
            return Err(Error::SizeGuard {
                what: "paths for vertex enumeration",
                actual: self.dim(),
                limit: MAX_VERTEX_PATHS,
            });
        }
        self.vertices
            .get_or_init(|| self.enumerate_vertices().map(Arc::new))
            .clone()
            .map_err(|(actual, limit)| Error::SizeGuard {
                what: "vertex count",
                actual,
                limit,
            })
    }

    fn local_vertices(&self, ln: &LocalNode) -> std::result::Result<Vec<Vec<f64>>, (usize, usize)> {
        let halfspaces: Vec<Vec<f64>> = ln
            .drift
            .iter()
            .map(|d| d.iter().map(|v| -v).collect())
            .collect();
        let mut rays = extreme_rays(ln.children.len(), &halfspaces, MAX_VERTEX_COUNT)
            .map_err(|e| (e.rays, e.limit))?;
        // the cut can create duplicates when rows repeat
        rays.sort_by(|a, b| a.partial_cmp(b).expect("finite rays"));
        rays.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-14));
        Ok(rays)
    }

    fn enumerate_vertices(&self) -> std::result::Result<Vec<DualMeasure>, (usize, usize)> {
        let tree = &self.tree;
        let mut local_verts: Vec<Option<Vec<Vec<f64>>>> = vec![None; tree.num_nodes()];
        for ln in &self.local {
            local_verts[ln.node] = Some(self.local_vertices(ln)?);
        }
        // counts bottom-up (saturating) before materializing anything
        let mut count = vec![1usize; tree.num_nodes()];
        let order: Vec<NodeId> = tree.forward_order().collect();
        for &id in order.iter().rev() {
            if let Some(lv) = &local_verts[id] {
                let children = tree.children(id);
                let mut total = 0usize;
                for pi in lv {
                    let mut prod = 1usize;
                    for (ci, &c) in children.iter().enumerate() {
                        if pi[ci] > 0.0 {
                            prod = prod.saturating_mul(count[c]);
                        }
                    }
                    total = total.saturating_add(prod);
                }
                count[id] = total;
            }
        }
        let root = tree.root();
        if count[root] > MAX_VERTEX_COUNT {
            return Err((count[root], MAX_VERTEX_COUNT));
        }
        let k = tree.num_paths();
        let mut out = Vec::with_capacity(count[root]);
        let mut buf = vec![0.0; k];
        self.expand(root, 1.0, &local_verts, &mut buf, &mut |q| {
            out.push(DualMeasure::new(q.to_vec()))
        });
        Ok(out)
    }

    /// Enumerates all extreme measures below `id` scaled by `mass`,
    /// writing into `buf` and calling `emit` for each completed vector.
    fn expand(
        &self,
        id: NodeId,
        mass: f64,
        local: &[Option<Vec<Vec<f64>>>],
        buf: &mut Vec<f64>,
        emit: &mut dyn FnMut(&[f64]),
    ) {
        // Iterate the cartesian product of choices over the active frontier.
        let tree = &self.tree;
        let mut frontier = vec![(id, mass)];
        self.expand_frontier(&mut frontier, 0, local, buf, emit, tree);
    }

    fn expand_frontier(
        &self,
        frontier: &mut Vec<(NodeId, f64)>,
        pos: usize,
        local: &[Option<Vec<Vec<f64>>>],
        buf: &mut Vec<f64>,
        emit: &mut dyn FnMut(&[f64]),
        tree: &EventTree,
    ) {
        if pos == frontier.len() {
            emit(buf);
            return;
        }
        let (id, mass) = frontier[pos];
        match &local[id] {
            None => {
                let w = tree.paths_below(id).start;
                buf[w] = mass;
                self.expand_frontier(frontier, pos + 1, local, buf, emit, tree);
                buf[w] = 0.0;
            }
            Some(lv) => {
                let children = tree.children(id).to_vec();
                for pi in lv {
                    let before = frontier.len();
                    for (ci, &c) in children.iter().enumerate() {
                        if pi[ci] > 0.0 {
                            frontier.push((c, mass * pi[ci]));
                        }
                    }
                    self.expand_frontier(frontier, pos + 1, local, buf, emit, tree);
                    frontier.truncate(before);
                }
            }
        }
    }

    /// Euclidean projection onto the polytope.
    pub fn project(&self, q_raw: &[f64]) -> Result<DualMeasure> {
        let k = self.dim();
        if q_raw.len() != k {
            return Err(Error::Dimension {
                context: "measure to project",
                expected: k,
                actual: q_raw.len(),
            });
        }
        let mut qp = QuadraticProgram::identity(-DVector::from_column_slice(q_raw));
        self.add_qp_rows(&mut qp);
        let sol = qp.solve().map_err(|e| {
            Error::Internal(format!("projection onto the dual domain failed: {e:?}"))
        })?;
        Ok(DualMeasure::new(sol.x.iter().map(|v| v.max(0.0)).collect()))
    }

    /// Adds `Σq = 1`, `q ≥ 0` and the supermartingale rows to a QP in `q`.
    pub(crate) fn add_qp_rows(&self, qp: &mut QuadraticProgram) {
        let k = self.dim();
        qp.equality(DVector::from_element(k, 1.0), 1.0);
        for r in &self.equalities {
            qp.equality(DVector::from_column_slice(r), 0.0);
        }
        for w in 0..k {
            let mut e = DVector::zeros(k);
            e[w] = 1.0;
            qp.inequality(e, 0.0);
        }
        for r in &self.inequalities {
            qp.inequality(-DVector::from_column_slice(r), 0.0);
        }
    }

    /// One-step feasible conditional laws at `node`: the generator drift
    /// rows `g·ΔS_c` for its children, in child order.
    pub fn local_drift(&self, node: NodeId) -> Option<(&[NodeId], &[Vec<f64>])> {
        self.local
            .iter()
            .find(|l| l.node == node)
            .map(|l| (l.children.as_slice(), l.drift.as_slice()))
    }
}
