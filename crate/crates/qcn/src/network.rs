//! Quantum causal networks: local distributions attached to CN-sets,
//! graph-respect validation, joint-state construction, and marginals.

use crate::linalg::{compose_groups, ComplexMatrix, DEFAULT_DIM_CAP, DEFAULT_TOL};
use crate::qop::QuantumOperation;
use crate::qstate::DensityOperator;
use crate::sag::{CnKind, CnOrdering, Sag};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("linear algebra: {0}")]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error("state: {0}")]
    State(#[from] crate::qstate::StateError),
    #[error("operation: {0}")]
    Op(#[from] crate::qop::OpError),
    #[error("graph: {0}")]
    Sag(#[from] crate::sag::SagError),
    #[error("CN-set `{0}` has no local distribution")]
    MissingLocal(String),
    #[error("local distribution members {0:?} do not match any CN-set")]
    UnmatchedLocal(Vec<String>),
    #[error("CN-set `{0}` has more than one local distribution")]
    DuplicateLocal(String),
    #[error("CN-set `{0}` is {1}, but its local distribution is not")]
    KindMismatch(String, &'static str),
    #[error("local distribution for `{0}` has no components")]
    EmptyComponents(String),
    #[error("root component {1} of `{0}` is not PSD")]
    RootComponentNotPsd(String, usize),
    #[error("root components of `{0}` sum to trace {1}, expected 1")]
    RootNotNormalized(String, f64),
    #[error("root component {1} of `{0}` is {2}x{2}, expected {3}x{3}")]
    RootShape(String, usize, usize, usize),
    #[error("child component {1} of `{0}` has wrong spaces (in {2}, out {3}; expected in {4}, out {5})")]
    ChildShape(String, usize, usize, usize, usize, usize),
    #[error("summed child operation of `{0}` is not trace-preserving")]
    ChildNotTracePreserving(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("joint dimension {0} exceeds cap {1}")]
    DimCapExceeded(usize, usize),
    #[error("total mixture weight {0} is (near-)zero")]
    ZeroTotalWeight(f64),
}

/// Components of a local distribution: positive operators for a root CN-set,
/// trace-reducing operations for a child CN-set. Exactly one component means
/// the distribution is deterministic.
#[derive(Debug, Clone)]
pub enum LocalComponents {
    Root(Vec<ComplexMatrix>),
    Child(Vec<QuantumOperation>),
}

/// The quantitative mechanism attached to one CN-set.
#[derive(Debug, Clone)]
pub struct LocalDistribution {
    pub members: BTreeSet<String>,
    pub components: LocalComponents,
}

impl LocalDistribution {
    pub fn root<S: Into<String>, I: IntoIterator<Item = S>>(
        members: I,
        components: Vec<ComplexMatrix>,
    ) -> Self {
        Self {
            members: members.into_iter().map(Into::into).collect(),
            components: LocalComponents::Root(components),
        }
    }

    pub fn child<S: Into<String>, I: IntoIterator<Item = S>>(
        members: I,
        components: Vec<QuantumOperation>,
    ) -> Self {
        Self {
            members: members.into_iter().map(Into::into).collect(),
            components: LocalComponents::Child(components),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match &self.components {
            LocalComponents::Root(cs) => cs.len() == 1,
            LocalComponents::Child(cs) => cs.len() == 1,
        }
    }

    pub fn component_count(&self) -> usize {
        match &self.components {
            LocalComponents::Root(cs) => cs.len(),
            LocalComponents::Child(cs) => cs.len(),
        }
    }
}

/// How thoroughly the graph-respect checks probe a network: the canonical
/// per-node basis plus `random_sets` seeded Haar-random bases.
#[derive(Debug, Clone)]
pub struct RespectsPolicy {
    pub random_sets: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for RespectsPolicy {
    fn default() -> Self {
        Self { random_sets: 8, seed: 7, tol: 1e-7 }
    }
}

/// Outcome of a respects check, with human-readable violation descriptions.
#[derive(Debug, Clone)]
pub struct RespectsReport {
    pub ok: bool,
    pub violations: Vec<String>,
}

/// A graph together with one respecting local distribution per CN-set.
#[derive(Debug, Clone)]
pub struct QuantumCausalNetwork {
    graph: Sag,
    ordering: CnOrdering,
    locals: Vec<LocalDistribution>, // aligned with ordering.sets
    tol: f64,
    post_selected: bool,
}

impl QuantumCausalNetwork {
    pub fn new(
        graph: Sag,
        locals: Vec<LocalDistribution>,
        tol: f64,
    ) -> Result<Self, NetworkError> {
        Self::with_options(graph, locals, tol, false)
    }

    /// Construct, optionally relaxing the normalization invariants: a
    /// post-selected network (produced by conditioning on a reduction
    /// outcome) carries sub-normalized locals whose total weight is divided
    /// out during joint construction.
    pub fn with_options(
        graph: Sag,
        locals: Vec<LocalDistribution>,
        tol: f64,
        post_selected: bool,
    ) -> Result<Self, NetworkError> {
        let ordering = graph.cn_topological_order()?;
        let mut aligned: Vec<Option<LocalDistribution>> = vec![None; ordering.sets.len()];
        for ld in locals {
            let pos = ordering.sets.iter().position(|s| s.members == ld.members);
            match pos {
                None => {
                    return Err(NetworkError::UnmatchedLocal(
                        ld.members.iter().cloned().collect(),
                    ))
                }
                Some(k) => {
                    if aligned[k].is_some() {
                        return Err(NetworkError::DuplicateLocal(set_label(&ordering, k)));
                    }
                    aligned[k] = Some(ld);
                }
            }
        }
        let locals: Vec<LocalDistribution> = aligned
            .into_iter()
            .enumerate()
            .map(|(k, ld)| ld.ok_or_else(|| NetworkError::MissingLocal(set_label(&ordering, k))))
            .collect::<Result<_, _>>()?;

        let q = Self { graph, ordering, locals, tol, post_selected };
        q.validate_structure()?;
        Ok(q)
    }

    fn validate_structure(&self) -> Result<(), NetworkError> {
        for (k, (set, ld)) in self.ordering.sets.iter().zip(&self.locals).enumerate() {
            let label = set_label(&self.ordering, k);
            let n: usize = self.set_dims(k).iter().product();
            match (&set.kind, &ld.components) {
                (CnKind::Root, LocalComponents::Root(cs)) => {
                    if cs.is_empty() {
                        return Err(NetworkError::EmptyComponents(label));
                    }
                    let mut sum = ComplexMatrix::zeros(n, n);
                    for (i, c) in cs.iter().enumerate() {
                        if c.rows() != n || c.cols() != n {
                            return Err(NetworkError::RootShape(label, i, c.rows(), n));
                        }
                        if !c.is_psd(self.tol.max(1e-9))? {
                            return Err(NetworkError::RootComponentNotPsd(label, i));
                        }
                        sum = sum.add(c)?;
                    }
                    let tr = sum.trace()?.re;
                    let ok = if self.post_selected {
                        tr > self.tol && tr <= 1.0 + 1e-7
                    } else {
                        (tr - 1.0).abs() <= 1e-7
                    };
                    if !ok {
                        return Err(NetworkError::RootNotNormalized(label, tr));
                    }
                }
                (CnKind::Child, LocalComponents::Child(cs)) => {
                    if cs.is_empty() {
                        return Err(NetworkError::EmptyComponents(label));
                    }
                    let in_dims = self.parent_dims(k);
                    let out_dims = self.set_dims(k);
                    for (i, op) in cs.iter().enumerate() {
                        if op.in_dims() != in_dims.as_slice() || op.out_dims() != out_dims.as_slice()
                        {
                            return Err(NetworkError::ChildShape(
                                label,
                                i,
                                op.in_dim(),
                                op.out_dim(),
                                in_dims.iter().product(),
                                out_dims.iter().product(),
                            ));
                        }
                    }
                    let agg = QuantumOperation::aggregate(cs)?;
                    if !self.post_selected && !agg.is_trace_preserving(1e-7)? {
                        return Err(NetworkError::ChildNotTracePreserving(label));
                    }
                }
                (CnKind::Root, _) => return Err(NetworkError::KindMismatch(label, "root")),
                (CnKind::Child, _) => return Err(NetworkError::KindMismatch(label, "child")),
            }
        }
        Ok(())
    }

    pub fn graph(&self) -> &Sag {
        &self.graph
    }

    pub fn ordering(&self) -> &CnOrdering {
        &self.ordering
    }

    /// Local distributions aligned with `ordering().sets`.
    pub fn locals(&self) -> &[LocalDistribution] {
        &self.locals
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn is_post_selected(&self) -> bool {
        self.post_selected
    }

    /// Member dimensions of CN-set `k`, in node-id order.
    pub fn set_dims(&self, k: usize) -> Vec<usize> {
        self.ordering.sets[k]
            .member_nodes()
            .iter()
            .map(|id| self.graph.dim_of(id).expect("member exists"))
            .collect()
    }

    /// Parent-node dimensions of CN-set `k`, in node-id order.
    pub fn parent_dims(&self, k: usize) -> Vec<usize> {
        self.ordering.sets[k]
            .parent_nodes()
            .iter()
            .map(|id| self.graph.dim_of(id).expect("parent exists"))
            .collect()
    }

    /// Index of the CN-set containing a node.
    pub fn set_of(&self, node: &str) -> Result<usize, NetworkError> {
        self.ordering
            .sets
            .iter()
            .position(|s| s.members.contains(node))
            .ok_or_else(|| NetworkError::UnknownNode(node.to_string()))
    }

    /// Indices (into `ordering().sets`) of the parent CN-sets of set `k`,
    /// in partition order.
    pub fn parent_set_indices(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self.ordering.sets[k]
            .parent_nodes()
            .iter()
            .map(|p| self.set_of(p).expect("parent exists"))
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }

    /// Real numbers needed to specify the local distribution of CN-set `k`:
    /// n²−1 for a root, n²(m²−1) for a child (n = member-space dimension,
    /// m = parent-space dimension).
    pub fn parameter_count(&self, k: usize) -> usize {
        let n: usize = self.set_dims(k).iter().product();
        match self.ordering.sets[k].kind {
            CnKind::Root => n * n - 1,
            CnKind::Child => {
                let m: usize = self.parent_dims(k).iter().product();
                n * n * (m * m - 1)
            }
        }
    }

    /// Run the graph-respect checks on every local distribution.
    pub fn check_respects(&self, policy: &RespectsPolicy) -> Result<RespectsReport, NetworkError> {
        let mut violations = Vec::new();
        for (k, (set, ld)) in self.ordering.sets.iter().zip(&self.locals).enumerate() {
            let members = set.member_nodes();
            let rep = match &ld.components {
                LocalComponents::Root(cs) => respects_root(&members, cs, &self.graph, policy)?,
                LocalComponents::Child(cs) => {
                    respects_child(&members, &set.parent_nodes(), cs, &self.graph, policy)?
                }
            };
            for v in rep.violations {
                violations.push(format!("CN-set `{}`: {v}", set_label(&self.ordering, k)));
            }
        }
        Ok(RespectsReport { ok: violations.is_empty(), violations })
    }

    /// Construct the undisturbed joint state with the default dimension cap.
    pub fn build_joint(&self) -> Result<JointState, NetworkError> {
        self.build_joint_capped(DEFAULT_DIM_CAP)
    }

    /// Propagate forward through the CN-sets in topological order, spectrally
    /// decomposing each set's operator and branching over the rank-1
    /// components, then assemble the joint operator from the branch tree.
    pub fn build_joint_capped(&self, cap: usize) -> Result<JointState, NetworkError> {
        let full_dims: Vec<usize> = self.graph.dims().to_vec();
        let total: usize = full_dims.iter().product();
        if total > cap {
            return Err(NetworkError::DimCapExceeded(total, cap));
        }
        let nsets = self.ordering.sets.len();

        struct Branch {
            weight: f64,
            factors: Vec<Option<ComplexMatrix>>,
            path: Vec<usize>,
        }
        let mut branches =
            vec![Branch { weight: 1.0, factors: vec![None; nsets], path: vec![usize::MAX; nsets] }];

        for &k in &self.ordering.linear {
            let mut next = Vec::new();
            match &self.locals[k].components {
                LocalComponents::Root(cs) => {
                    let n: usize = self.set_dims(k).iter().product();
                    let mut sigma = ComplexMatrix::zeros(n, n);
                    for c in cs {
                        sigma = sigma.add(c)?;
                    }
                    let sd = sigma.spectral_decompose(self.tol.max(DEFAULT_TOL))?;
                    for b in &branches {
                        for (j, (w, q)) in sd.weights.iter().zip(&sd.projectors).enumerate() {
                            let mut factors = b.factors.clone();
                            factors[k] = Some(q.clone());
                            let mut path = b.path.clone();
                            path[k] = j;
                            next.push(Branch { weight: b.weight * w, factors, path });
                        }
                    }
                }
                LocalComponents::Child(cs) => {
                    let agg = QuantumOperation::aggregate(cs)?;
                    let parent_ids = self.ordering.sets[k].parent_nodes();
                    let pdims = self.parent_dims(k);
                    // Slots of each parent CN-set's members within the
                    // concatenated parent space.
                    let pset_slots: Vec<(usize, Vec<usize>)> = self
                        .parent_set_indices(k)
                        .iter()
                        .map(|&m| {
                            let slots = self.ordering.sets[m]
                                .member_nodes()
                                .iter()
                                .map(|id| {
                                    parent_ids.iter().position(|p| p == id).expect("parent member")
                                })
                                .collect();
                            (m, slots)
                        })
                        .collect();
                    for b in &branches {
                        let groups: Vec<(Vec<usize>, &ComplexMatrix)> = pset_slots
                            .iter()
                            .map(|(m, slots)| {
                                (slots.clone(), b.factors[*m].as_ref().expect("topological order"))
                            })
                            .collect();
                        let input = compose_groups(&pdims, &groups)?;
                        let out = agg.apply_matrix(&input)?;
                        let sd = out.spectral_decompose(self.tol.max(DEFAULT_TOL))?;
                        for (j, (w, q)) in sd.weights.iter().zip(&sd.projectors).enumerate() {
                            let mut factors = b.factors.clone();
                            factors[k] = Some(q.clone());
                            let mut path = b.path.clone();
                            path[k] = j;
                            next.push(Branch { weight: b.weight * w, factors, path });
                        }
                    }
                }
            }
            next.retain(|b| b.weight > 1e-12);
            branches = next;
        }

        let total_weight: f64 = branches.iter().map(|b| b.weight).sum();
        if total_weight <= self.tol.max(DEFAULT_TOL) {
            return Err(NetworkError::ZeroTotalWeight(total_weight));
        }

        let mut op = ComplexMatrix::zeros(total, total);
        let mut mixture = Vec::new();
        let member_slots: Vec<Vec<usize>> = (0..nsets)
            .map(|k| {
                self.ordering.sets[k]
                    .member_nodes()
                    .iter()
                    .map(|id| self.graph.node_index(id).expect("member"))
                    .collect()
            })
            .collect();
        for b in branches {
            let factors: Vec<ComplexMatrix> =
                b.factors.into_iter().map(|f| f.expect("all sets processed")).collect();
            let groups: Vec<(Vec<usize>, &ComplexMatrix)> = member_slots
                .iter()
                .zip(&factors)
                .map(|(slots, f)| (slots.clone(), f))
                .collect();
            let comp = compose_groups(&full_dims, &groups)?;
            let w = b.weight / total_weight;
            op = op.add(&comp.scale_real(w))?;
            mixture.push(MixtureTerm { weight: w, path: b.path, factors });
        }

        let operator = DensityOperator::new(op, full_dims, 1e-7)?;
        let classical_model = self.classical_model(total_weight)?;
        Ok(JointState {
            operator,
            node_order: self.graph.node_ids().to_vec(),
            mixture,
            classical_model,
        })
    }

    /// The graphical model over local-component indices: enumerate index
    /// paths, carrying each CN-set's component value forward, with
    /// conditional weights from the trace rule.
    fn classical_model(&self, total_weight: f64) -> Result<ClassicalModel, NetworkError> {
        let nsets = self.ordering.sets.len();
        struct CPath {
            weight: f64,
            conditionals: Vec<f64>,
            indices: Vec<usize>,
            values: Vec<Option<ComplexMatrix>>, // unit-trace value per set
        }
        let mut paths = vec![CPath {
            weight: 1.0,
            conditionals: vec![1.0; nsets],
            indices: vec![usize::MAX; nsets],
            values: vec![None; nsets],
        }];
        for &k in &self.ordering.linear {
            let mut next = Vec::new();
            match &self.locals[k].components {
                LocalComponents::Root(cs) => {
                    for p in &paths {
                        for (i, c) in cs.iter().enumerate() {
                            let w = c.trace()?.re;
                            if w <= 1e-12 {
                                continue;
                            }
                            let mut q = clone_cpath(p);
                            q.weight *= w;
                            q.conditionals[k] = w;
                            q.indices[k] = i;
                            q.values[k] = Some(c.scale_real(1.0 / w));
                            next.push(q);
                        }
                    }
                }
                LocalComponents::Child(cs) => {
                    let parent_ids = self.ordering.sets[k].parent_nodes();
                    let pdims = self.parent_dims(k);
                    let pset_slots: Vec<(usize, Vec<usize>)> = self
                        .parent_set_indices(k)
                        .iter()
                        .map(|&m| {
                            let slots = self.ordering.sets[m]
                                .member_nodes()
                                .iter()
                                .map(|id| {
                                    parent_ids.iter().position(|x| x == id).expect("parent member")
                                })
                                .collect();
                            (m, slots)
                        })
                        .collect();
                    for p in &paths {
                        let groups: Vec<(Vec<usize>, &ComplexMatrix)> = pset_slots
                            .iter()
                            .map(|(m, slots)| {
                                (slots.clone(), p.values[*m].as_ref().expect("topological order"))
                            })
                            .collect();
                        let input = compose_groups(&pdims, &groups)?;
                        for (i, c) in cs.iter().enumerate() {
                            let out = c.apply_matrix(&input)?;
                            let w = out.trace()?.re;
                            if w <= 1e-12 {
                                continue;
                            }
                            let mut q = clone_cpath(p);
                            q.weight *= w;
                            q.conditionals[k] = w;
                            q.indices[k] = i;
                            q.values[k] = Some(out.scale_real(1.0 / w));
                            next.push(q);
                        }
                    }
                }
            }
            paths = next;
        }
        fn clone_cpath(p: &CPath) -> CPath {
            CPath {
                weight: p.weight,
                conditionals: p.conditionals.clone(),
                indices: p.indices.clone(),
                values: p.values.clone(),
            }
        }
        let sets = (0..nsets).map(|k| set_label(&self.ordering, k)).collect();
        let parents = (0..nsets).map(|k| self.parent_set_indices(k)).collect();
        let paths = paths
            .into_iter()
            .map(|p| ClassicalPath {
                indices: p.indices,
                weight: p.weight / total_weight,
                conditionals: p.conditionals,
            })
            .collect();
        Ok(ClassicalModel { sets, parents, paths })
    }

    /// Reduced density operator of the joint on the named nodes.
    pub fn marginal(
        &self,
        js: &JointState,
        nodes: &[String],
    ) -> Result<DensityOperator, NetworkError> {
        let keep: Vec<usize> = nodes
            .iter()
            .map(|id| self.graph.node_index(id).map_err(NetworkError::from))
            .collect::<Result<_, _>>()?;
        Ok(js.operator.reduced(&keep)?)
    }
}

/// Label a CN-set by its smallest member id.
pub fn set_label(ordering: &CnOrdering, k: usize) -> String {
    ordering.sets[k].members.iter().next().cloned().unwrap_or_default()
}

/// The undisturbed joint state: full-space operator, its rank-1 mixture with
/// per-CN-set branch paths, and the classical model over component indices.
#[derive(Debug, Clone)]
pub struct JointState {
    pub operator: DensityOperator,
    /// Node ids in factor order (lexicographic).
    pub node_order: Vec<String>,
    pub mixture: Vec<MixtureTerm>,
    pub classical_model: ClassicalModel,
}

/// One branch of the joint mixture: a weight, the spectral-branch index per
/// CN-set, and a rank-1 projector on each CN-set's space.
#[derive(Debug, Clone)]
pub struct MixtureTerm {
    pub weight: f64,
    pub path: Vec<usize>,
    pub factors: Vec<ComplexMatrix>,
}

/// The graphical model over local-component indices implied by a network.
#[derive(Debug, Clone)]
pub struct ClassicalModel {
    /// CN-set labels in partition order.
    pub sets: Vec<String>,
    /// Parent CN-set indices per set.
    pub parents: Vec<Vec<usize>>,
    pub paths: Vec<ClassicalPath>,
}

/// One component-index assignment with its weight and the per-set
/// conditional weights that produced it.
#[derive(Debug, Clone)]
pub struct ClassicalPath {
    pub indices: Vec<usize>,
    pub weight: f64,
    pub conditionals: Vec<f64>,
}

impl ClassicalModel {
    /// Check that each set's conditional weight table is a function of its
    /// own index and its parent sets' indices alone.
    pub fn factorizes(&self, tol: f64) -> bool {
        for k in 0..self.sets.len() {
            let mut table: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
            for p in &self.paths {
                let mut key: Vec<usize> = vec![p.indices[k]];
                key.extend(self.parents[k].iter().map(|&m| p.indices[m]));
                match table.get(&key) {
                    None => {
                        table.insert(key, p.conditionals[k]);
                    }
                    Some(&v) => {
                        if (v - p.conditionals[k]).abs() > tol {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

/// Per-node orthonormal-basis families used by the respects checks: the
/// computational basis, then `random_sets` seeded Haar-random bases.
fn basis_families(
    dims: &[usize],
    policy: &RespectsPolicy,
) -> Vec<Vec<Vec<ComplexMatrix>>> {
    use rand::SeedableRng;
    let mut families = Vec::with_capacity(1 + policy.random_sets);
    families.push(
        dims.iter()
            .map(|&d| {
                (0..d)
                    .map(|k| {
                        let mut diag = vec![0.0; d];
                        diag[k] = 1.0;
                        ComplexMatrix::diagonal(&diag)
                    })
                    .collect()
            })
            .collect(),
    );
    for f in 0..policy.random_sets {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(policy.seed.wrapping_add(f as u64));
        families.push(
            dims.iter()
                .map(|&d| {
                    let u = crate::linalg::haar_unitary(d, &mut rng);
                    (0..d)
                        .map(|k| {
                            let v: Vec<crate::linalg::C64> =
                                (0..d).map(|i| u.get(i, k)).collect();
                            ComplexMatrix::outer(&v)
                        })
                        .collect()
                })
                .collect(),
        );
    }
    families
}

/// Product projector for one per-node outcome assignment.
fn product_projector(bases: &[Vec<ComplexMatrix>], assignment: &[usize]) -> ComplexMatrix {
    let mut acc = bases[0][assignment[0]].clone();
    for (b, &x) in bases.iter().zip(assignment).skip(1) {
        acc = acc.tensor(&b[x]);
    }
    acc
}

/// Verify that each conditional distribution in `joint` (over mixed-radix
/// assignments `dims`) for slot `s` depends only on the context slots listed
/// in `relevant`. Returns a description of the first violation found.
fn conditional_dependence_violation(
    joint: &[f64],
    dims: &[usize],
    s: usize,
    relevant: &[usize],
    tol: f64,
) -> Option<String> {
    let total: usize = dims.iter().product();
    // context key (relevant slot values) → representative conditional
    let mut seen: BTreeMap<Vec<usize>, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
    let others: Vec<usize> = (0..dims.len()).filter(|&k| k != s).collect();
    let other_dims: Vec<usize> = others.iter().map(|&k| dims[k]).collect();
    let contexts: usize = other_dims.iter().product::<usize>().max(1);
    for c in 0..contexts {
        let cvals = crate::linalg::unindex(c, &other_dims);
        let mut full = vec![0usize; dims.len()];
        for (i, &k) in others.iter().enumerate() {
            full[k] = cvals[i];
        }
        let mut dist = Vec::with_capacity(dims[s]);
        let mut norm = 0.0;
        for x in 0..dims[s] {
            full[s] = x;
            let idx = crate::linalg::index(&full, dims);
            debug_assert!(idx < total);
            dist.push(joint[idx]);
            norm += joint[idx];
        }
        if norm <= 1e-12 {
            continue; // zero-probability conditioning event: undefined, skipped
        }
        for p in dist.iter_mut() {
            *p /= norm;
        }
        // `relevant` excludes slot s by construction.
        let key: Vec<usize> = relevant.iter().map(|&k| full[k]).collect();
        match seen.get(&key) {
            None => {
                seen.insert(key, (full.clone(), dist));
            }
            Some((prev_full, prev)) => {
                let diff =
                    dist.iter().zip(prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if diff > tol {
                    return Some(format!(
                        "conditional at slot {s} differs by {diff:.3e} between contexts {:?} and {:?}",
                        prev_full, full
                    ));
                }
            }
        }
    }
    None
}

/// Check that a root local distribution depends, node by node, only on each
/// node's undirected neighbors: under every tested per-node basis family, the
/// joint Born distribution of Σ Δ_i must make each node conditionally
/// independent of its non-neighbors.
pub fn respects_root(
    members: &[String],
    components: &[ComplexMatrix],
    g: &Sag,
    policy: &RespectsPolicy,
) -> Result<RespectsReport, NetworkError> {
    let mut members = members.to_vec();
    members.sort();
    let dims: Vec<usize> = members
        .iter()
        .map(|id| g.dim_of(id).map_err(NetworkError::from))
        .collect::<Result<_, _>>()?;
    let n: usize = dims.iter().product();
    let mut sigma = ComplexMatrix::zeros(n, n);
    for c in components {
        if c.rows() != n || c.cols() != n {
            return Err(NetworkError::RootShape(members.join(","), 0, c.rows(), n));
        }
        sigma = sigma.add(c)?;
    }
    let tr = sigma.trace()?.re;
    if tr <= 1e-12 {
        return Err(NetworkError::ZeroTotalWeight(tr));
    }
    let sigma = sigma.scale_real(1.0 / tr);

    // Relevant context per member: its direct undirected neighbors.
    let neighbor_slots: Vec<Vec<usize>> = members
        .iter()
        .map(|id| {
            let nb = g.undirected_neighbors(id).expect("member exists");
            members
                .iter()
                .enumerate()
                .filter(|(_, m)| nb.contains(m))
                .map(|(k, _)| k)
                .collect()
        })
        .collect();

    let mut violations = Vec::new();
    for (f, bases) in basis_families(&dims, policy).iter().enumerate() {
        let total: usize = dims.iter().product();
        let mut joint = Vec::with_capacity(total);
        for a in 0..total {
            let assignment = crate::linalg::unindex(a, &dims);
            let p = product_projector(bases, &assignment);
            joint.push(p.mul(&sigma)?.trace()?.re.max(0.0));
        }
        for (s, id) in members.iter().enumerate() {
            if let Some(v) =
                conditional_dependence_violation(&joint, &dims, s, &neighbor_slots[s], policy.tol)
            {
                violations.push(format!(
                    "node `{id}` depends on a non-neighbor (basis family {f}): {v}"
                ));
            }
        }
        if !violations.is_empty() {
            break; // first failing family is enough for the report
        }
    }
    Ok(RespectsReport { ok: violations.is_empty(), violations })
}

/// Check that a child local distribution makes each member depend only on its
/// undirected neighbors within the CN-set and on the input nodes that are its
/// parents in the graph.
pub fn respects_child(
    members: &[String],
    parents: &[String],
    components: &[QuantumOperation],
    g: &Sag,
    policy: &RespectsPolicy,
) -> Result<RespectsReport, NetworkError> {
    let mut members = members.to_vec();
    members.sort();
    let mut parents = parents.to_vec();
    parents.sort();
    let mdims: Vec<usize> = members
        .iter()
        .map(|id| g.dim_of(id).map_err(NetworkError::from))
        .collect::<Result<_, _>>()?;
    let pdims: Vec<usize> = parents
        .iter()
        .map(|id| g.dim_of(id).map_err(NetworkError::from))
        .collect::<Result<_, _>>()?;
    let agg = QuantumOperation::aggregate(components)?;

    // Context slots: members first, then parents, in one assignment vector.
    let all_dims: Vec<usize> = mdims.iter().chain(pdims.iter()).copied().collect();
    let relevant: Vec<Vec<usize>> = members
        .iter()
        .map(|id| {
            let nb = g.undirected_neighbors(id).expect("member exists");
            let mut slots: Vec<usize> = members
                .iter()
                .enumerate()
                .filter(|(_, m)| nb.contains(m))
                .map(|(k, _)| k)
                .collect();
            for (k, w) in parents.iter().enumerate() {
                if g.has_directed_edge(w, id).expect("nodes exist") {
                    slots.push(members.len() + k);
                }
            }
            slots
        })
        .collect();

    let mut violations = Vec::new();
    for (f, bases) in basis_families(&all_dims, policy).iter().enumerate() {
        let mbases = &bases[..members.len()];
        let pbases = &bases[members.len()..];
        let ptotal: usize = pdims.iter().product::<usize>().max(1);
        let mtotal: usize = mdims.iter().product();
        // joint over (member values, parent values); parent assignments are
        // weighted uniformly — only conditionals on full parent contexts are
        // inspected, so the input weighting is immaterial.
        let mut joint = vec![0.0f64; mtotal * ptotal];
        for w in 0..ptotal {
            let passign = crate::linalg::unindex(w, &pdims);
            let input = product_projector(pbases, &passign);
            let out = agg.apply_matrix(&input)?;
            let t = out.trace()?.re;
            if t <= 1e-12 {
                continue;
            }
            for x in 0..mtotal {
                let massign = crate::linalg::unindex(x, &mdims);
                let proj = product_projector(mbases, &massign);
                let p = proj.mul(&out)?.trace()?.re.max(0.0) / t;
                // full index in (members ++ parents) mixed radix
                let mut full = massign.clone();
                full.extend(&passign);
                joint[crate::linalg::index(&full, &all_dims)] = p / ptotal as f64;
            }
        }
        for (s, id) in members.iter().enumerate() {
            if let Some(v) =
                conditional_dependence_violation(&joint, &all_dims, s, &relevant[s], policy.tol)
            {
                violations.push(format!(
                    "node `{id}` depends on a non-neighbor or non-parent (basis family {f}): {v}"
                ));
            }
        }
        if !violations.is_empty() {
            break;
        }
    }
    Ok(RespectsReport { ok: violations.is_empty(), violations })
}
