//! Independent brute-force references: classical Bayesian-network
//! enumeration, conversion of computational-basis-diagonal networks to
//! classical form, and a naive path-enumeration joint construction. Used as
//! ground truth in tests; deliberately unoptimized and structurally
//! independent of the main pipeline.

use crate::linalg::{index, unindex, ComplexMatrix, LinalgError, C64};
use crate::network::{
    set_label, ClassicalModel, ClassicalPath, JointState, LocalComponents, MixtureTerm,
    NetworkError, QuantumCausalNetwork,
};
use crate::qstate::DensityOperator;
use thiserror::Error;

/// Largest classical outcome space the enumerators accept (six binary
/// variables).
pub const CLASSICAL_CAP: usize = 64;
/// Largest joint dimension the quantum brute force accepts (four qubits).
pub const QUANTUM_CAP: usize = 16;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("linear algebra: {0}")]
    Linalg(#[from] LinalgError),
    #[error("network: {0}")]
    Network(#[from] NetworkError),
    #[error("state: {0}")]
    State(#[from] crate::qstate::StateError),
    #[error("operation: {0}")]
    Op(#[from] crate::qop::OpError),
    #[error("outcome space {0} exceeds cap {1}")]
    CapExceeded(usize, usize),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("value {0} out of range for `{1}` (cardinality {2})")]
    ValueOutOfRange(usize, String, usize),
    #[error("CPT row {row} of `{var}` sums to {sum}, expected 1")]
    BadCptRow { var: String, row: usize, sum: f64 },
    #[error("negative entry in CPT of `{0}`")]
    NegativeProbability(String),
    #[error("variable graph has a directed cycle")]
    CyclicGraph,
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("CPT of `{var}` has {got} rows, expected {want}")]
    CptShape { var: String, got: usize, want: usize },
    #[error("local distribution at `{0}` is not diagonal in the computational basis")]
    NonDiagonal(String),
    #[error("post-selected networks have no classical counterpart")]
    PostSelected,
}

/// A classical causal Bayesian network: finite variables over a DAG, one
/// conditional probability table per variable.
#[derive(Debug, Clone)]
pub struct ClassicalBn {
    names: Vec<String>,
    cards: Vec<usize>,
    /// Parent indices per variable, in listed order (row indexing follows
    /// this order, mixed radix with the last parent fastest).
    parents: Vec<Vec<usize>>,
    /// cpts[v][parent_row][value]
    cpts: Vec<Vec<Vec<f64>>>,
}

impl ClassicalBn {
    pub fn new(
        names: Vec<String>,
        cards: Vec<usize>,
        parents: Vec<Vec<usize>>,
        cpts: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, OracleError> {
        assert_eq!(names.len(), cards.len());
        assert_eq!(names.len(), parents.len());
        assert_eq!(names.len(), cpts.len());
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(OracleError::DuplicateVariable(n.clone()));
            }
        }
        let bn = Self { names, cards, parents, cpts };
        bn.topological_order()?;
        for v in 0..bn.names.len() {
            let want: usize = bn.parents[v].iter().map(|&p| bn.cards[p]).product();
            if bn.cpts[v].len() != want {
                return Err(OracleError::CptShape {
                    var: bn.names[v].clone(),
                    got: bn.cpts[v].len(),
                    want,
                });
            }
            for (row, r) in bn.cpts[v].iter().enumerate() {
                if r.len() != bn.cards[v] {
                    return Err(OracleError::CptShape {
                        var: bn.names[v].clone(),
                        got: r.len(),
                        want: bn.cards[v],
                    });
                }
                if r.iter().any(|&x| x < -1e-12) {
                    return Err(OracleError::NegativeProbability(bn.names[v].clone()));
                }
                let sum: f64 = r.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(OracleError::BadCptRow {
                        var: bn.names[v].clone(),
                        row,
                        sum,
                    });
                }
            }
        }
        Ok(bn)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn parents_of(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn variable(&self, name: &str) -> Result<usize, OracleError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| OracleError::UnknownVariable(name.to_string()))
    }

    fn topological_order(&self) -> Result<Vec<usize>, OracleError> {
        let n = self.names.len();
        let mut indeg: Vec<usize> = (0..n).map(|v| self.parents[v].len()).collect();
        let mut order = Vec::with_capacity(n);
        let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        while let Some(v) = ready.pop() {
            order.push(v);
            for c in 0..n {
                if self.parents[c].contains(&v) {
                    indeg[c] -= 1;
                    if indeg[c] == 0 {
                        ready.push(c);
                    }
                }
            }
        }
        if order.len() != n {
            return Err(OracleError::CyclicGraph);
        }
        Ok(order)
    }

    fn parent_row(&self, v: usize, assignment: &[usize]) -> usize {
        let pdims: Vec<usize> = self.parents[v].iter().map(|&p| self.cards[p]).collect();
        let pdigits: Vec<usize> = self.parents[v].iter().map(|&p| assignment[p]).collect();
        index(&pdigits, &pdims)
    }

    /// Probability of one full assignment (product of CPT rows).
    pub fn probability(&self, assignment: &[usize]) -> f64 {
        (0..self.names.len())
            .map(|v| self.cpts[v][self.parent_row(v, assignment)][assignment[v]])
            .product()
    }
}

/// Exhaustive joint table over all assignments, indexed mixed-radix over the
/// variable cardinalities in listed order (last variable fastest).
pub fn enumerate_joint(bn: &ClassicalBn, cap: usize) -> Result<Vec<f64>, OracleError> {
    let total: usize = bn.cards.iter().product();
    if total > cap {
        return Err(OracleError::CapExceeded(total, cap));
    }
    Ok((0..total).map(|g| bn.probability(&unindex(g, &bn.cards))).collect())
}

/// Pearl surgery on a classical network: sever the variable's parents and
/// replace its CPT by a point mass on the value.
pub fn do_classical(
    bn: &ClassicalBn,
    variable: &str,
    value: usize,
) -> Result<ClassicalBn, OracleError> {
    let v = bn.variable(variable)?;
    if value >= bn.cards[v] {
        return Err(OracleError::ValueOutOfRange(value, variable.to_string(), bn.cards[v]));
    }
    let mut out = bn.clone();
    out.parents[v] = Vec::new();
    let mut row = vec![0.0; bn.cards[v]];
    row[value] = 1.0;
    out.cpts[v] = vec![row];
    Ok(out)
}

fn diagonal_of(m: &ComplexMatrix, label: &str) -> Result<Vec<f64>, OracleError> {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if i != j && m.get(i, j).norm() > 1e-9 {
                return Err(OracleError::NonDiagonal(label.to_string()));
            }
        }
    }
    Ok((0..m.rows()).map(|i| m.get(i, i).re).collect())
}

/// Convert a network whose local distributions are diagonal in the
/// computational basis into a classical network with one variable per
/// CN-set. Child channels are probed on every computational basis projector
/// of their input space; a channel that produces off-diagonal output is
/// rejected.
pub fn diagonal_to_cbn(q: &QuantumCausalNetwork) -> Result<ClassicalBn, OracleError> {
    if q.is_post_selected() {
        return Err(OracleError::PostSelected);
    }
    let ordering = q.ordering();
    let nsets = ordering.sets.len();
    let names: Vec<String> = (0..nsets).map(|k| set_label(ordering, k)).collect();
    let cards: Vec<usize> = (0..nsets).map(|k| q.set_dims(k).iter().product()).collect();
    let parents: Vec<Vec<usize>> = (0..nsets).map(|k| q.parent_set_indices(k)).collect();

    let mut cpts = Vec::with_capacity(nsets);
    for k in 0..nsets {
        let label = &names[k];
        match &q.locals()[k].components {
            LocalComponents::Root(cs) => {
                let n = cards[k];
                let mut row = vec![0.0; n];
                for c in cs {
                    let d = diagonal_of(c, label)?;
                    for (x, p) in d.iter().enumerate() {
                        row[x] += p;
                    }
                }
                cpts.push(vec![row]);
            }
            LocalComponents::Child(cs) => {
                // Variable outcome digits live in the set's member node
                // order; parent rows concatenate parent-set variables, each
                // of which indexes its own member space. The channel input
                // space orders individual parent nodes by id, so translate
                // digit by digit.
                let parent_ids = ordering.sets[k].parent_nodes();
                let pdims = q.parent_dims(k);
                let pcards: Vec<usize> = parents[k].iter().map(|&m| cards[m]).collect();
                let rows: usize = pcards.iter().product::<usize>().max(1);
                let mut table = Vec::with_capacity(rows);
                for r in 0..rows {
                    let pvals = unindex(r, &pcards);
                    let mut digits = vec![0usize; parent_ids.len()];
                    for (pi, &m) in parents[k].iter().enumerate() {
                        let mdims = q.set_dims(m);
                        let md = unindex(pvals[pi], &mdims);
                        for (s, id) in ordering.sets[m].member_nodes().iter().enumerate() {
                            let slot =
                                parent_ids.iter().position(|p| p == id).expect("parent member");
                            digits[slot] = md[s];
                        }
                    }
                    let b = index(&digits, &pdims);
                    let pdim: usize = pdims.iter().product();
                    let mut basis = ComplexMatrix::zeros(pdim, pdim);
                    basis.set(b, b, C64::ONE);
                    let mut row = vec![0.0; cards[k]];
                    for c in cs {
                        let out = c.apply_matrix(&basis)?;
                        let d = diagonal_of(&out, label)?;
                        for (x, p) in d.iter().enumerate() {
                            row[x] += p;
                        }
                    }
                    table.push(row);
                }
                cpts.push(table);
            }
        }
    }
    ClassicalBn::new(names, cards, parents, cpts)
}

/// Map a computational basis index of the joint operator (node-id-order
/// digits) to the corresponding assignment index of `diagonal_to_cbn`'s
/// variables (CN-set order, member-space outcomes).
pub fn cbn_index_for_basis(q: &QuantumCausalNetwork, basis_index: usize) -> usize {
    let dims = q.graph().dims();
    let digits = unindex(basis_index, dims);
    let ordering = q.ordering();
    let cards: Vec<usize> =
        (0..ordering.sets.len()).map(|k| q.set_dims(k).iter().product()).collect();
    let vals: Vec<usize> = (0..ordering.sets.len())
        .map(|k| {
            let mdims = q.set_dims(k);
            let md: Vec<usize> = ordering.sets[k]
                .member_nodes()
                .iter()
                .map(|id| digits[q.graph().node_index(id).expect("member")])
                .collect();
            index(&md, &mdims)
        })
        .collect();
    index(&vals, &cards)
}

/// Entry-by-entry tensor assembly of per-set factors into the global node
/// space — independent of the main pipeline's permutation routine.
fn naive_assemble(
    dims: &[usize],
    set_slots: &[Vec<usize>],
    factors: &[ComplexMatrix],
) -> ComplexMatrix {
    let total: usize = dims.iter().product();
    let mut m = ComplexMatrix::zeros(total, total);
    for gi in 0..total {
        let di = unindex(gi, dims);
        for gj in 0..total {
            let dj = unindex(gj, dims);
            let mut v = C64::ONE;
            for (slots, f) in set_slots.iter().zip(factors) {
                let kdims: Vec<usize> = slots.iter().map(|&s| dims[s]).collect();
                let ri: Vec<usize> = slots.iter().map(|&s| di[s]).collect();
                let rj: Vec<usize> = slots.iter().map(|&s| dj[s]).collect();
                v *= f.get(index(&ri, &kdims), index(&rj, &kdims));
            }
            m.set(gi, gj, v);
        }
    }
    m
}

/// Naive joint construction: depth-first enumeration of every mixture path,
/// spectral branch by spectral branch, assembling each term entrywise.
/// Matches the main pipeline's output on any in-cap network.
pub fn brute_force_joint(
    q: &QuantumCausalNetwork,
    cap: usize,
) -> Result<JointState, OracleError> {
    let dims: Vec<usize> = q.graph().dims().to_vec();
    let total: usize = dims.iter().product();
    if total > cap {
        return Err(OracleError::CapExceeded(total, cap));
    }
    let ordering = q.ordering();
    let nsets = ordering.sets.len();
    let set_slots: Vec<Vec<usize>> = (0..nsets)
        .map(|k| {
            ordering.sets[k]
                .member_nodes()
                .iter()
                .map(|id| q.graph().node_index(id).expect("member"))
                .collect()
        })
        .collect();

    // Depth-first over the topological order, carrying rank-1 projector
    // factors per completed set.
    struct Term {
        weight: f64,
        path: Vec<usize>,
        factors: Vec<ComplexMatrix>,
    }
    fn walk(
        q: &QuantumCausalNetwork,
        order: &[usize],
        pos: usize,
        weight: f64,
        path: &mut Vec<usize>,
        factors: &mut Vec<Option<ComplexMatrix>>,
        out: &mut Vec<Term>,
    ) -> Result<(), OracleError> {
        if pos == order.len() {
            out.push(Term {
                weight,
                path: path.clone(),
                factors: factors.iter().map(|f| f.clone().expect("complete")).collect(),
            });
            return Ok(());
        }
        let k = order[pos];
        let sigma = match &q.locals()[k].components {
            LocalComponents::Root(cs) => {
                let n: usize = q.set_dims(k).iter().product();
                let mut sigma = ComplexMatrix::zeros(n, n);
                for c in cs {
                    sigma = sigma.add(c)?;
                }
                sigma
            }
            LocalComponents::Child(cs) => {
                let parent_ids = q.ordering().sets[k].parent_nodes();
                let pdims = q.parent_dims(k);
                // Entrywise product-state input from the parent sets'
                // factors, permuted into node-id order.
                let pslots: Vec<Vec<usize>> = q
                    .parent_set_indices(k)
                    .iter()
                    .map(|&m| {
                        q.ordering().sets[m]
                            .member_nodes()
                            .iter()
                            .map(|id| parent_ids.iter().position(|p| p == id).expect("member"))
                            .collect()
                    })
                    .collect();
                let pfactors: Vec<ComplexMatrix> = q
                    .parent_set_indices(k)
                    .iter()
                    .map(|&m| factors[m].clone().expect("topological order"))
                    .collect();
                let input = naive_assemble(&pdims, &pslots, &pfactors);
                let mut out_m =
                    ComplexMatrix::zeros(q.set_dims(k).iter().product(), q.set_dims(k).iter().product());
                for c in cs {
                    for kr in c.kraus() {
                        out_m = out_m.add(&kr.mul(&input)?.mul(&kr.adjoint())?)?;
                    }
                }
                out_m
            }
        };
        for (j, (w, ket)) in sigma.hermitian_eigenpairs(1e-9)?.into_iter().enumerate() {
            let bw = weight * w;
            if bw <= 1e-12 {
                continue;
            }
            path.push(j);
            factors[k] = Some(ComplexMatrix::outer(&ket));
            walk(q, order, pos + 1, bw, path, factors, out)?;
            path.pop();
            factors[k] = None;
        }
        Ok(())
    }

    let mut terms = Vec::new();
    let mut path = Vec::new();
    let mut factors = vec![None; nsets];
    walk(q, &ordering.linear, 0, 1.0, &mut path, &mut factors, &mut terms)?;

    let total_weight: f64 = terms.iter().map(|t| t.weight).sum();
    let mut op = ComplexMatrix::zeros(total, total);
    let mut mixture = Vec::new();
    for t in terms {
        let w = t.weight / total_weight;
        let comp = naive_assemble(&dims, &set_slots, &t.factors);
        op = op.add(&comp.scale_real(w))?;
        // Path entries follow the topological order; re-spread into set
        // index order.
        let mut by_set = vec![usize::MAX; nsets];
        for (pos, &k) in ordering.linear.iter().enumerate() {
            by_set[k] = t.path[pos];
        }
        mixture.push(MixtureTerm { weight: w, path: by_set, factors: t.factors });
    }

    let classical_model = naive_classical_model(q, total_weight)?;
    Ok(JointState {
        operator: DensityOperator::new(op, dims, 1e-7)?,
        node_order: q.graph().node_ids().to_vec(),
        mixture,
        classical_model,
    })
}

/// Independent enumeration of the component-index model: one path per
/// choice of local component at every set, carrying unit-trace values.
fn naive_classical_model(
    q: &QuantumCausalNetwork,
    total_weight: f64,
) -> Result<ClassicalModel, OracleError> {
    let ordering = q.ordering();
    let nsets = ordering.sets.len();

    fn walk(
        q: &QuantumCausalNetwork,
        order: &[usize],
        pos: usize,
        weight: f64,
        indices: &mut Vec<usize>,
        conditionals: &mut Vec<f64>,
        values: &mut Vec<Option<ComplexMatrix>>,
        out: &mut Vec<ClassicalPath>,
    ) -> Result<(), OracleError> {
        if pos == order.len() {
            let mut by_set_i = vec![usize::MAX; values.len()];
            let mut by_set_c = vec![1.0; values.len()];
            for (p, &k) in order.iter().enumerate() {
                by_set_i[k] = indices[p];
                by_set_c[k] = conditionals[p];
            }
            out.push(ClassicalPath { indices: by_set_i, weight, conditionals: by_set_c });
            return Ok(());
        }
        let k = order[pos];
        let candidates: Vec<ComplexMatrix> = match &q.locals()[k].components {
            LocalComponents::Root(cs) => cs.clone(),
            LocalComponents::Child(cs) => {
                let parent_ids = q.ordering().sets[k].parent_nodes();
                let pdims = q.parent_dims(k);
                let pslots: Vec<Vec<usize>> = q
                    .parent_set_indices(k)
                    .iter()
                    .map(|&m| {
                        q.ordering().sets[m]
                            .member_nodes()
                            .iter()
                            .map(|id| parent_ids.iter().position(|p| p == id).expect("member"))
                            .collect()
                    })
                    .collect();
                let pfactors: Vec<ComplexMatrix> = q
                    .parent_set_indices(k)
                    .iter()
                    .map(|&m| values[m].clone().expect("topological order"))
                    .collect();
                let input = naive_assemble(&pdims, &pslots, &pfactors);
                cs.iter()
                    .map(|c| c.apply_matrix(&input).map_err(OracleError::from))
                    .collect::<Result<_, _>>()?
            }
        };
        for (i, c) in candidates.iter().enumerate() {
            let w = c.trace()?.re;
            if w <= 1e-12 {
                continue;
            }
            indices.push(i);
            conditionals.push(w);
            values[k] = Some(c.scale_real(1.0 / w));
            walk(q, order, pos + 1, weight * w, indices, conditionals, values, out)?;
            indices.pop();
            conditionals.pop();
            values[k] = None;
        }
        Ok(())
    }

    let mut paths = Vec::new();
    let mut indices = Vec::new();
    let mut conditionals = Vec::new();
    let mut values = vec![None; nsets];
    walk(q, &ordering.linear, 0, 1.0, &mut indices, &mut conditionals, &mut values, &mut paths)?;
    for p in &mut paths {
        p.weight /= total_weight;
    }
    Ok(ClassicalModel {
        sets: (0..nsets).map(|k| set_label(ordering, k)).collect(),
        parents: (0..nsets).map(|k| q.parent_set_indices(k)).collect(),
        paths,
    })
}
