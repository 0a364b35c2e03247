//! Sequenced association graphs: contemporaneity, precedence, validity,
//! CN-set partition, parent classification, and topological ordering.

use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SagError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("unknown node id `{0}`")]
    UnknownNode(String),
    #[error("self-loop at `{0}`")]
    SelfLoop(String),
    #[error("nodes `{0}` and `{1}` carry both a directed and an undirected edge")]
    DualEdge(String, String),
    #[error("node `{0}` has zero dimension")]
    ZeroDimension(String),
    #[error("graph violates sequencing: {0}")]
    Invalid(SagViolation),
    #[error("CN-set precedence contains a cycle involving `{0}`")]
    CnCycle(String),
}

/// First offending pair found by [`Sag::validate`], with the failing clause
/// combination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SagViolation {
    pub a: String,
    pub b: String,
    pub clause: ViolationClause,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationClause {
    /// A precedes B and B precedes A.
    MutualPrecedence,
    /// A precedes B and B is contemporaneous with A.
    PrecedesContemporaneous,
}

impl std::fmt::Display for SagViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.clause {
            ViolationClause::MutualPrecedence => {
                write!(f, "`{}` precedes `{}` and `{}` precedes `{}`", self.a, self.b, self.b, self.a)
            }
            ViolationClause::PrecedesContemporaneous => write!(
                f,
                "`{}` precedes `{}` and `{}` is contemporaneous with `{}`",
                self.a, self.b, self.b, self.a
            ),
        }
    }
}

/// Mixed directed/undirected graph over nodes carrying Hilbert-space
/// dimensions. Directed edges are timelike influence, undirected edges are
/// contemporaneous correlation.
#[derive(Debug, Clone)]
pub struct Sag {
    ids: Vec<String>,
    dims: Vec<usize>,
    index: BTreeMap<String, usize>,
    directed: BTreeSet<(usize, usize)>,
    undirected: BTreeSet<(usize, usize)>, // stored with smaller index first
}

impl Sag {
    /// Construct from node declarations and edge lists. Node order follows
    /// lexicographic id order internally, so all derived orderings are
    /// independent of declaration order.
    pub fn new(
        nodes: &[(String, usize)],
        directed: &[(String, String)],
        undirected: &[(String, String)],
    ) -> Result<Self, SagError> {
        let mut sorted: Vec<(String, usize)> = nodes.to_vec();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        let mut index = BTreeMap::new();
        for (k, (id, dim)) in sorted.iter().enumerate() {
            if index.insert(id.clone(), k).is_some() {
                return Err(SagError::DuplicateNode(id.clone()));
            }
            if *dim == 0 {
                return Err(SagError::ZeroDimension(id.clone()));
            }
        }
        let ids: Vec<String> = sorted.iter().map(|(id, _)| id.clone()).collect();
        let dims: Vec<usize> = sorted.iter().map(|(_, d)| *d).collect();
        let lookup = |id: &String| -> Result<usize, SagError> {
            index.get(id).copied().ok_or_else(|| SagError::UnknownNode(id.clone()))
        };
        let mut dset = BTreeSet::new();
        for (a, b) in directed {
            let (ia, ib) = (lookup(a)?, lookup(b)?);
            if ia == ib {
                return Err(SagError::SelfLoop(a.clone()));
            }
            dset.insert((ia, ib));
        }
        let mut uset = BTreeSet::new();
        for (a, b) in undirected {
            let (ia, ib) = (lookup(a)?, lookup(b)?);
            if ia == ib {
                return Err(SagError::SelfLoop(a.clone()));
            }
            uset.insert((ia.min(ib), ia.max(ib)));
        }
        for &(a, b) in &dset {
            if uset.contains(&(a.min(b), a.max(b))) {
                return Err(SagError::DualEdge(ids[a].clone(), ids[b].clone()));
            }
        }
        Ok(Self { ids, dims, index, directed: dset, undirected: uset })
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    /// Node ids in lexicographic order.
    pub fn node_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim_of(&self, id: &str) -> Result<usize, SagError> {
        Ok(self.dims[self.node_index(id)?])
    }

    pub fn node_index(&self, id: &str) -> Result<usize, SagError> {
        self.index.get(id).copied().ok_or_else(|| SagError::UnknownNode(id.to_string()))
    }

    pub fn id_of(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.directed.iter().map(|&(a, b)| (self.ids[a].as_str(), self.ids[b].as_str()))
    }

    pub fn undirected_edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.undirected.iter().map(|&(a, b)| (self.ids[a].as_str(), self.ids[b].as_str()))
    }

    pub fn has_directed_edge(&self, a: &str, b: &str) -> Result<bool, SagError> {
        Ok(self.directed.contains(&(self.node_index(a)?, self.node_index(b)?)))
    }

    pub fn has_undirected_edge(&self, a: &str, b: &str) -> Result<bool, SagError> {
        let (ia, ib) = (self.node_index(a)?, self.node_index(b)?);
        Ok(self.undirected.contains(&(ia.min(ib), ia.max(ib))))
    }

    /// Direct undirected neighbors of a node.
    pub fn undirected_neighbors(&self, id: &str) -> Result<Vec<String>, SagError> {
        let k = self.node_index(id)?;
        Ok(self
            .undirected
            .iter()
            .filter_map(|&(a, b)| {
                if a == k {
                    Some(self.ids[b].clone())
                } else if b == k {
                    Some(self.ids[a].clone())
                } else {
                    None
                }
            })
            .collect())
    }

    /// Contemporaneity: same connected component of the undirected subgraph.
    /// Every node is contemporaneous with itself.
    pub fn contemporaneous(&self, a: &str, b: &str) -> Result<bool, SagError> {
        let (ia, ib) = (self.node_index(a)?, self.node_index(b)?);
        Ok(self.undirected_components()[ia] == self.undirected_components()[ib])
    }

    fn undirected_components(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut comp: Vec<usize> = (0..n).collect();
        // Union-find without ranks; graphs are desk-scale.
        fn find(comp: &mut Vec<usize>, mut x: usize) -> usize {
            while comp[x] != x {
                comp[x] = comp[comp[x]];
                x = comp[x];
            }
            x
        }
        for &(a, b) in &self.undirected {
            let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            comp[hi] = lo;
        }
        (0..n).map(|x| find(&mut comp, x)).collect()
    }

    /// Precedence: a nonempty directed path from `a` to `b`.
    pub fn precedes(&self, a: &str, b: &str) -> Result<bool, SagError> {
        let (ia, ib) = (self.node_index(a)?, self.node_index(b)?);
        Ok(self.reachable(ia)[ib])
    }

    fn reachable(&self, from: usize) -> Vec<bool> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> =
            self.directed.iter().filter(|&&(a, _)| a == from).map(|&(_, b)| b).collect();
        while let Some(x) = stack.pop() {
            if !seen[x] {
                seen[x] = true;
                stack.extend(
                    self.directed.iter().filter(|&&(a, _)| a == x).map(|&(_, b)| b),
                );
            }
        }
        seen
    }

    /// Scan node pairs in deterministic order for sequencing violations.
    pub fn validate(&self) -> Result<(), SagViolation> {
        let comp = self.undirected_components();
        let reach: Vec<Vec<bool>> = (0..self.node_count()).map(|k| self.reachable(k)).collect();
        for a in 0..self.node_count() {
            for b in 0..self.node_count() {
                if a == b {
                    // A node contemporaneous with itself that precedes itself
                    // is a directed cycle through a; caught as a ≺ a.
                    if reach[a][a] {
                        return Err(SagViolation {
                            a: self.ids[a].clone(),
                            b: self.ids[a].clone(),
                            clause: ViolationClause::MutualPrecedence,
                        });
                    }
                    continue;
                }
                if reach[a][b] && reach[b][a] {
                    return Err(SagViolation {
                        a: self.ids[a].clone(),
                        b: self.ids[b].clone(),
                        clause: ViolationClause::MutualPrecedence,
                    });
                }
                if reach[a][b] && comp[a] == comp[b] {
                    return Err(SagViolation {
                        a: self.ids[a].clone(),
                        b: self.ids[b].clone(),
                        clause: ViolationClause::PrecedesContemporaneous,
                    });
                }
            }
        }
        Ok(())
    }

    /// Partition into CN-sets (maximal sets of mutually contemporaneous
    /// nodes), each classified root/child with its parents. Sets are ordered
    /// by smallest member id.
    pub fn cn_partition(&self) -> Result<Vec<CnSet>, SagError> {
        self.validate().map_err(SagError::Invalid)?;
        let comp = self.undirected_components();
        let mut groups: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for k in 0..self.node_count() {
            groups.entry(comp[k]).or_default().insert(self.ids[k].clone());
        }
        // BTreeMap keyed by component root = smallest member index, so the
        // iteration order is already by smallest member id.
        let mut sets = Vec::new();
        for members in groups.into_values() {
            let member_idx: BTreeSet<usize> =
                members.iter().map(|id| self.index[id]).collect();
            let influencing: BTreeSet<String> = self
                .directed
                .iter()
                .filter(|&&(_, b)| member_idx.contains(&b))
                .map(|&(a, _)| self.ids[a].clone())
                .collect();
            let kind = if influencing.is_empty() { CnKind::Root } else { CnKind::Child };
            // Non-influencing parents: contemporaneous with an influencing
            // parent, not themselves influencing.
            let mut noninfluencing = BTreeSet::new();
            for p in &influencing {
                let pc = comp[self.index[p]];
                for k in 0..self.node_count() {
                    if comp[k] == pc && !influencing.contains(&self.ids[k]) {
                        noninfluencing.insert(self.ids[k].clone());
                    }
                }
            }
            sets.push(CnSet {
                members,
                kind,
                influencing_parents: influencing,
                noninfluencing_parents: noninfluencing,
            });
        }
        Ok(sets)
    }

    /// Linear extension of the CN-set precedence order, with layering
    /// retained. Sets incomparable within a layer are ordered by smallest
    /// member id.
    pub fn cn_topological_order(&self) -> Result<CnOrdering, SagError> {
        let sets = self.cn_partition()?;
        let set_of: BTreeMap<&str, usize> = sets
            .iter()
            .enumerate()
            .flat_map(|(k, s)| s.members.iter().map(move |m| (m.as_str(), k)))
            .collect();
        let n = sets.len();
        let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut indeg = vec![0usize; n];
        for (a, b) in self.directed.iter() {
            let (sa, sb) = (set_of[self.ids[*a].as_str()], set_of[self.ids[*b].as_str()]);
            if sa != sb && succ[sa].insert(sb) {
                indeg[sb] += 1;
            }
        }
        let mut layers: Vec<Vec<usize>> = Vec::new();
        let mut linear = Vec::new();
        let mut ready: Vec<usize> = (0..n).filter(|&k| indeg[k] == 0).collect();
        while !ready.is_empty() {
            ready.sort_unstable(); // partition order = smallest-member order
            layers.push(ready.clone());
            let mut next = Vec::new();
            for &k in &ready {
                linear.push(k);
                for &s in &succ[k] {
                    indeg[s] -= 1;
                    if indeg[s] == 0 {
                        next.push(s);
                    }
                }
            }
            ready = next;
        }
        if linear.len() != n {
            let stuck = (0..n).find(|&k| indeg[k] > 0).unwrap();
            let id = sets[stuck].members.iter().next().unwrap().clone();
            return Err(SagError::CnCycle(id));
        }
        Ok(CnOrdering { sets, layers, linear })
    }

    /// Derive a new graph with some edges removed; node set unchanged.
    pub fn without_edges(
        &self,
        drop_directed: &[(String, String)],
        drop_undirected: &[(String, String)],
    ) -> Result<Sag, SagError> {
        let nodes: Vec<(String, usize)> =
            self.ids.iter().cloned().zip(self.dims.iter().copied()).collect();
        let dd: BTreeSet<(usize, usize)> = drop_directed
            .iter()
            .map(|(a, b)| Ok((self.node_index(a)?, self.node_index(b)?)))
            .collect::<Result<_, SagError>>()?;
        let du: BTreeSet<(usize, usize)> = drop_undirected
            .iter()
            .map(|(a, b)| {
                let (ia, ib) = (self.node_index(a)?, self.node_index(b)?);
                Ok((ia.min(ib), ia.max(ib)))
            })
            .collect::<Result<_, SagError>>()?;
        let directed: Vec<(String, String)> = self
            .directed
            .iter()
            .filter(|e| !dd.contains(e))
            .map(|&(a, b)| (self.ids[a].clone(), self.ids[b].clone()))
            .collect();
        let undirected: Vec<(String, String)> = self
            .undirected
            .iter()
            .filter(|e| !du.contains(e))
            .map(|&(a, b)| (self.ids[a].clone(), self.ids[b].clone()))
            .collect();
        Sag::new(&nodes, &directed, &undirected)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnKind {
    Root,
    Child,
}

/// A maximal set of mutually contemporaneous nodes together with its parent
/// classification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnSet {
    pub members: BTreeSet<String>,
    pub kind: CnKind,
    pub influencing_parents: BTreeSet<String>,
    pub noninfluencing_parents: BTreeSet<String>,
}

impl CnSet {
    /// All parents (influencing then non-influencing), in node-id order.
    pub fn parent_nodes(&self) -> Vec<String> {
        let mut all: BTreeSet<String> = self.influencing_parents.clone();
        all.extend(self.noninfluencing_parents.iter().cloned());
        all.into_iter().collect()
    }

    /// Members in node-id order.
    pub fn member_nodes(&self) -> Vec<String> {
        self.members.iter().cloned().collect()
    }
}

/// Result of [`Sag::cn_topological_order`].
#[derive(Debug, Clone)]
pub struct CnOrdering {
    /// The CN-partition, ordered by smallest member id.
    pub sets: Vec<CnSet>,
    /// Layers of mutually unordered sets (indices into `sets`).
    pub layers: Vec<Vec<usize>>,
    /// A linear extension of the precedence order (indices into `sets`).
    pub linear: Vec<usize>,
}
