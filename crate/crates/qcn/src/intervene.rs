//! Interventions on quantum causal networks: the reduction operator
//! (deterministic and general forms), local surgery, and ordered intervention
//! sequences with enumeration or seeded sampling.

use crate::linalg::{compose_groups, index, unindex, ComplexMatrix, C64};
use crate::network::{
    LocalComponents, LocalDistribution, NetworkError, QuantumCausalNetwork,
};
use crate::qop::QuantumOperation;
use crate::qstate::{DensityOperator, ProjectionSet};
use crate::sag::CnKind;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IntervError {
    #[error("linear algebra: {0}")]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error("state: {0}")]
    State(#[from] crate::qstate::StateError),
    #[error("operation: {0}")]
    Op(#[from] crate::qop::OpError),
    #[error("network: {0}")]
    Network(#[from] NetworkError),
    #[error("graph: {0}")]
    Sag(#[from] crate::sag::SagError),
    #[error("network is not deterministic (CN-set `{0}` has {1} components)")]
    NotDeterministic(String, usize),
    #[error("intervention at `{0}` is not a reduction")]
    NotReduction(String),
    #[error("intervention at `{0}` is not a surgery")]
    NotSurgery(String),
    #[error("projection set acts on dimension {0}, CN-set space has dimension {1}")]
    ProjectorDim(usize, usize),
    #[error("projector {0} is not identity-elsewhere with a rank-1 target factor")]
    ProjectorNotLocal(usize),
    #[error("value dimension {0} does not match target dimension {1}")]
    ValueDim(usize, usize),
    #[error("value has trace {0}, expected 1")]
    ValueNotNormalized(f64),
    #[error("outcome `{0}` has (near-)zero probability")]
    ZeroProbabilityOutcome(String),
    #[error("step {0}: {1}")]
    AtStep(usize, Box<IntervError>),
}

/// An intervention at a single target node.
#[derive(Debug, Clone)]
pub struct Intervention {
    pub target: String,
    pub kind: InterventionKind,
}

#[derive(Debug, Clone)]
pub enum InterventionKind {
    /// Projective reduction with identity-elsewhere projectors on the
    /// target's CN-set space.
    Reduction(ProjectionSet),
    /// Local surgery setting the target to a fixed state.
    Surgery(DensityOperator),
}

impl Intervention {
    pub fn reduction(target: impl Into<String>, projectors: ProjectionSet) -> Self {
        Self { target: target.into(), kind: InterventionKind::Reduction(projectors) }
    }

    pub fn surgery(target: impl Into<String>, value: DensityOperator) -> Self {
        Self { target: target.into(), kind: InterventionKind::Surgery(value) }
    }
}

/// One realizable outcome of a reduction: its probability and the
/// post-intervention network.
#[derive(Debug, Clone)]
pub struct InterventionOutcome {
    pub probability: f64,
    pub network: QuantumCausalNetwork,
    pub outcome_label: String,
}

/// Find an outcome by label, treating absence as conditioning on a
/// zero-probability event.
pub fn outcome_by_label<'a>(
    outcomes: &'a [InterventionOutcome],
    label: &str,
) -> Result<&'a InterventionOutcome, IntervError> {
    outcomes
        .iter()
        .find(|o| o.outcome_label == label)
        .ok_or_else(|| IntervError::ZeroProbabilityOutcome(label.to_string()))
}

/// Shared context for a reduction at one target node.
struct ReductionSite {
    set_index: usize,
    members: Vec<String>,
    mdims: Vec<usize>,
    t_slot: usize,
}

impl ReductionSite {
    fn new(q: &QuantumCausalNetwork, target: &str) -> Result<Self, IntervError> {
        let set_index = q.set_of(target)?;
        let members = q.ordering().sets[set_index].member_nodes();
        let mdims = q.set_dims(set_index);
        let t_slot = members.iter().position(|m| m == target).expect("target is a member");
        Ok(Self { set_index, members, mdims, t_slot })
    }

    fn space_dim(&self) -> usize {
        self.mdims.iter().product()
    }

    /// Each projector must factor as (identity on the other members) ⊗
    /// (rank-1 on the target).
    fn validate_projectors(&self, ps: &ProjectionSet) -> Result<(), IntervError> {
        let total = self.space_dim();
        if ps.space_dim() != total {
            return Err(IntervError::ProjectorDim(ps.space_dim(), total));
        }
        let other_dim = total / self.mdims[self.t_slot];
        for (i, p) in ps.projectors().iter().enumerate() {
            let pt = if self.members.len() == 1 {
                p.clone()
            } else {
                p.partial_trace(&self.mdims, &[self.t_slot])?
                    .scale_real(1.0 / other_dim as f64)
            };
            let rank1 = (pt.trace()?.re - 1.0).abs() <= 1e-8
                && pt.mul(&pt)?.max_abs_diff(&pt) <= 1e-8;
            if !rank1 {
                return Err(IntervError::ProjectorNotLocal(i));
            }
            if self.members.len() > 1 {
                let others: Vec<usize> =
                    (0..self.mdims.len()).filter(|&s| s != self.t_slot).collect();
                let ident = ComplexMatrix::identity(other_dim);
                let rebuilt = compose_groups(
                    &self.mdims,
                    &[(others, &ident), (vec![self.t_slot], &pt)],
                )?;
                if !rebuilt.approx_eq(p, 1e-8) {
                    return Err(IntervError::ProjectorNotLocal(i));
                }
            }
        }
        Ok(())
    }
}

fn as_reduction<'a>(iv: &'a Intervention) -> Result<&'a ProjectionSet, IntervError> {
    match &iv.kind {
        InterventionKind::Reduction(ps) => Ok(ps),
        _ => Err(IntervError::NotReduction(iv.target.clone())),
    }
}

/// A CN-set has multiple possible values if its own local distribution has
/// several components or any parent CN-set does, recursively.
fn multi_valued(q: &QuantumCausalNetwork, k: usize) -> bool {
    q.locals()[k].component_count() > 1
        || q.parent_set_indices(k).iter().any(|&m| multi_valued(q, m))
}

/// The unique (unit-trace) value of a single-valued CN-set, obtained by
/// forward propagation through its ancestors.
fn single_set_value(
    q: &QuantumCausalNetwork,
    k: usize,
) -> Result<ComplexMatrix, IntervError> {
    debug_assert!(!multi_valued(q, k));
    match &q.locals()[k].components {
        LocalComponents::Root(cs) => {
            let tr = cs[0].trace()?.re;
            Ok(cs[0].scale_real(1.0 / tr))
        }
        LocalComponents::Child(cs) => {
            let input = composed_parent_value(q, k)?;
            let out = cs[0].apply_matrix(&input)?;
            let tr = out.trace()?.re;
            Ok(out.scale_real(1.0 / tr))
        }
    }
}

/// Tensor the (single) values of a child's parent CN-sets into its input
/// space, permuted to node-id order.
fn composed_parent_value(
    q: &QuantumCausalNetwork,
    k: usize,
) -> Result<ComplexMatrix, IntervError> {
    let parent_ids = q.ordering().sets[k].parent_nodes();
    let pdims = q.parent_dims(k);
    let values: Vec<(Vec<usize>, ComplexMatrix)> = q
        .parent_set_indices(k)
        .iter()
        .map(|&m| {
            let slots: Vec<usize> = q.ordering().sets[m]
                .member_nodes()
                .iter()
                .map(|id| parent_ids.iter().position(|p| p == id).expect("parent member"))
                .collect();
            Ok((slots, single_set_value(q, m)?))
        })
        .collect::<Result<_, IntervError>>()?;
    let groups: Vec<(Vec<usize>, &ComplexMatrix)> =
        values.iter().map(|(s, v)| (s.clone(), v)).collect();
    Ok(compose_groups(&pdims, &groups)?)
}

/// Replace dropped input factors of child operations by fixed states: each
/// dropped group's state is spectrally decomposed and its eigenkets embedded
/// into the old input space, weighting the Kraus operators accordingly.
fn pin_inputs(
    ops: &[QuantumOperation],
    old_parents: &[String],
    new_parents: &[String],
    old_dims: &[usize],
    pinned: &[(Vec<String>, ComplexMatrix)],
    out_dims: Vec<usize>,
    tol: f64,
) -> Result<Vec<QuantumOperation>, IntervError> {
    let dropped: Vec<String> =
        old_parents.iter().filter(|p| !new_parents.contains(p)).cloned().collect();
    if dropped.is_empty() {
        return Ok(ops.to_vec());
    }
    let drop_dims: Vec<usize> = dropped
        .iter()
        .map(|d| {
            let s = old_parents.iter().position(|p| p == d).expect("dropped is old parent");
            old_dims[s]
        })
        .collect();
    // Joint pinned state on the dropped factors (id order), assembled from
    // the provided groups.
    let chi = {
        let groups: Vec<(Vec<usize>, &ComplexMatrix)> = pinned
            .iter()
            .map(|(ids, m)| {
                let slots: Vec<usize> = ids
                    .iter()
                    .map(|id| dropped.iter().position(|d| d == id).expect("pinned covers drop"))
                    .collect();
                (slots, m)
            })
            .collect();
        compose_groups(&drop_dims, &groups)?
    };
    let pairs: Vec<(f64, Vec<C64>)> = chi
        .hermitian_eigenpairs(1e-7)?
        .into_iter()
        .filter(|(w, _)| *w > 1e-12)
        .collect();

    let new_dims: Vec<usize> = new_parents
        .iter()
        .map(|p| {
            let s = old_parents.iter().position(|q| q == p).expect("kept is old parent");
            old_dims[s]
        })
        .collect();
    let old_dim: usize = old_dims.iter().product();
    let new_dim: usize = new_dims.iter().product::<usize>().max(1);
    let slot_kind: Vec<Result<usize, usize>> = old_parents
        .iter()
        .map(|p| match new_parents.iter().position(|q| q == p) {
            Some(s) => Ok(s),
            None => Err(dropped.iter().position(|d| d == p).expect("partition")),
        })
        .collect();

    let embeddings: Vec<ComplexMatrix> = pairs
        .iter()
        .map(|(w, ket)| {
            let mut e = ComplexMatrix::zeros(old_dim, new_dim);
            for oi in 0..old_dim {
                let od = unindex(oi, old_dims);
                let mut nd = vec![0usize; new_dims.len()];
                let mut dd = vec![0usize; drop_dims.len()];
                for (s, kind) in slot_kind.iter().enumerate() {
                    match kind {
                        Ok(ns) => nd[*ns] = od[s],
                        Err(ds) => dd[*ds] = od[s],
                    }
                }
                let amp = ket[index(&dd, &drop_dims)];
                e.set(oi, index(&nd, &new_dims), amp);
            }
            e.scale_real(w.sqrt())
        })
        .collect();

    ops.iter()
        .map(|op| {
            let mut kraus = Vec::with_capacity(op.kraus().len() * embeddings.len());
            for k in op.kraus() {
                for e in &embeddings {
                    kraus.push(k.mul(e)?);
                }
            }
            Ok(QuantumOperation::new(kraus, new_dims.clone(), out_dims.clone(), tol.max(1e-7))?)
        })
        .collect()
}

/// Core reduction for a single-valued target CN-set: all arcs entering the
/// set and all undirected arcs at the target are removed, and the set's
/// fragments become roots holding the projected, renormalized values.
fn rd_point(
    q: &QuantumCausalNetwork,
    target: &str,
    ps: &ProjectionSet,
) -> Result<Vec<InterventionOutcome>, IntervError> {
    let site = ReductionSite::new(q, target)?;
    site.validate_projectors(ps)?;
    let js = q.build_joint()?;
    let sigma = q.marginal(&js, &site.members)?;

    let drop_directed: Vec<(String, String)> = q
        .graph()
        .directed_edges()
        .filter(|(_, b)| site.members.iter().any(|m| m == b))
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    let drop_undirected: Vec<(String, String)> = q
        .graph()
        .undirected_edges()
        .filter(|(a, b)| *a == target || *b == target)
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    let g2 = q.graph().without_edges(&drop_directed, &drop_undirected)?;
    let ord2 = g2.cn_topological_order()?;
    let member_set: BTreeSet<String> = site.members.iter().cloned().collect();

    let mut outcomes = Vec::new();
    for (i, p) in ps.projectors().iter().enumerate() {
        let psp = p.mul(sigma.matrix())?.mul(p)?;
        let prob = psp.trace()?.re;
        if prob <= 1e-9 {
            continue;
        }
        let sigma_i = psp.scale_real(1.0 / prob);
        let node_value = |id: &str| -> Result<ComplexMatrix, IntervError> {
            let slot = site.members.iter().position(|m| m == id).expect("member");
            Ok(sigma_i.partial_trace(&site.mdims, &[slot])?)
        };

        let mut locals = Vec::new();
        for new_set in &ord2.sets {
            if new_set.members.is_subset(&member_set) {
                let slots: Vec<usize> = new_set
                    .member_nodes()
                    .iter()
                    .map(|id| site.members.iter().position(|m| m == id).expect("member"))
                    .collect();
                let value = sigma_i.partial_trace(&site.mdims, &slots)?;
                locals.push(LocalDistribution::root(new_set.member_nodes(), vec![value]));
            } else {
                let old_k = q.set_of(new_set.members.iter().next().expect("nonempty"))?;
                let old_set = &q.ordering().sets[old_k];
                match &q.locals()[old_k].components {
                    LocalComponents::Root(cs) => {
                        locals.push(LocalDistribution::root(old_set.member_nodes(), cs.clone()));
                    }
                    LocalComponents::Child(cs) => {
                        let old_parents = old_set.parent_nodes();
                        let new_parents = new_set.parent_nodes();
                        let ops = if old_parents == new_parents {
                            cs.clone()
                        } else {
                            let pinned: Vec<(Vec<String>, ComplexMatrix)> = old_parents
                                .iter()
                                .filter(|p| !new_parents.contains(p))
                                .map(|p| Ok((vec![p.clone()], node_value(p)?)))
                                .collect::<Result<_, IntervError>>()?;
                            pin_inputs(
                                cs,
                                &old_parents,
                                &new_parents,
                                &q.parent_dims(old_k),
                                &pinned,
                                q.set_dims(old_k),
                                q.tol(),
                            )?
                        };
                        locals.push(LocalDistribution::child(old_set.member_nodes(), ops));
                    }
                }
            }
        }
        let network = QuantumCausalNetwork::with_options(
            g2.clone(),
            locals,
            q.tol(),
            q.is_post_selected(),
        )?;
        outcomes.push(InterventionOutcome {
            probability: prob,
            network,
            outcome_label: ps.labels()[i].clone(),
        });
    }
    Ok(outcomes)
}

/// Reduction on a deterministic network: every local distribution must have
/// exactly one component.
pub fn rd_deterministic(
    q: &QuantumCausalNetwork,
    iv: &Intervention,
) -> Result<Vec<InterventionOutcome>, IntervError> {
    for (k, ld) in q.locals().iter().enumerate() {
        if ld.component_count() != 1 {
            return Err(IntervError::NotDeterministic(
                crate::network::set_label(q.ordering(), k),
                ld.component_count(),
            ));
        }
    }
    let ps = as_reduction(iv)?;
    rd_point(q, &iv.target, ps)
}

/// Reduction on a general network. Single-valued targets reduce like the
/// deterministic case; multi-valued targets keep their arcs from multi-valued
/// parents, and each outcome network carries the projected components
/// (post-selected), so rebuilding its joint performs the Bayes update over
/// upstream mixture components.
pub fn rd_general(
    q: &QuantumCausalNetwork,
    iv: &Intervention,
) -> Result<Vec<InterventionOutcome>, IntervError> {
    let ps = as_reduction(iv)?;
    let k0 = q.set_of(&iv.target)?;
    if !multi_valued(q, k0) {
        return rd_point(q, &iv.target, ps);
    }
    let site = ReductionSite::new(q, &iv.target)?;
    site.validate_projectors(ps)?;
    let js = q.build_joint()?;
    let sigma = q.marginal(&js, &site.members)?;

    // Rule 1: only arcs from single-valued parent CN-sets are severed; the
    // target keeps its undirected arcs (its CN-set is multi-valued).
    let drop_directed: Vec<(String, String)> = q
        .graph()
        .directed_edges()
        .filter(|(a, b)| {
            site.members.iter().any(|m| m == b)
                && !multi_valued(q, q.set_of(a).expect("edge endpoint"))
        })
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    let g2 = q.graph().without_edges(&drop_directed, &[])?;
    let ord2 = g2.cn_topological_order()?;
    let new_set = ord2
        .sets
        .iter()
        .find(|s| s.members == q.ordering().sets[k0].members)
        .expect("membership unchanged");
    let new_parents = new_set.parent_nodes();
    let old_parents = q.ordering().sets[k0].parent_nodes();

    let mut outcomes = Vec::new();
    for (i, p) in ps.projectors().iter().enumerate() {
        let prob = p.mul(sigma.matrix())?.mul(p)?.trace()?.re;
        if prob <= 1e-9 {
            continue;
        }
        let target_local = match &q.locals()[k0].components {
            LocalComponents::Root(cs) => {
                let comps: Vec<ComplexMatrix> = cs
                    .iter()
                    .map(|c| p.mul(c)?.mul(p).map_err(IntervError::from))
                    .collect::<Result<Vec<_>, _>>()?
                    .into_iter()
                    .filter(|c| c.trace().map(|t| t.re > 1e-12).unwrap_or(false))
                    .collect();
                LocalDistribution::root(site.members.clone(), comps)
            }
            LocalComponents::Child(cs) => {
                // Pin severed (single-valued) parent CN-sets to their unique
                // values.
                let pinned: Vec<(Vec<String>, ComplexMatrix)> = q
                    .parent_set_indices(k0)
                    .iter()
                    .filter(|&&m| !multi_valued(q, m))
                    .map(|&m| {
                        Ok((q.ordering().sets[m].member_nodes(), single_set_value(q, m)?))
                    })
                    .collect::<Result<_, IntervError>>()?;
                if new_parents.is_empty() {
                    // All parents severed: the set becomes a root whose
                    // components are the projected channel outputs on the
                    // pinned input.
                    let input = composed_parent_value(q, k0)?;
                    let comps: Vec<ComplexMatrix> = cs
                        .iter()
                        .map(|c| {
                            let out = c.apply_matrix(&input)?;
                            p.mul(&out)?.mul(p).map_err(IntervError::from)
                        })
                        .collect::<Result<Vec<_>, _>>()?
                        .into_iter()
                        .filter(|c| c.trace().map(|t| t.re > 1e-12).unwrap_or(false))
                        .collect();
                    LocalDistribution::root(site.members.clone(), comps)
                } else {
                    let kept = pin_inputs(
                        cs,
                        &old_parents,
                        &new_parents,
                        &q.parent_dims(k0),
                        &pinned,
                        q.set_dims(k0),
                        q.tol(),
                    )?;
                    let projected: Vec<QuantumOperation> = kept
                        .iter()
                        .map(|op| {
                            let kraus: Vec<ComplexMatrix> = op
                                .kraus()
                                .iter()
                                .map(|k| p.mul(k).map_err(IntervError::from))
                                .collect::<Result<_, _>>()?;
                            Ok(QuantumOperation::new(
                                kraus,
                                op.in_dims().to_vec(),
                                op.out_dims().to_vec(),
                                q.tol().max(1e-7),
                            )?)
                        })
                        .collect::<Result<_, IntervError>>()?;
                    LocalDistribution::child(site.members.clone(), projected)
                }
            }
        };

        // Rule 3: all other local distributions unchanged.
        let locals: Vec<LocalDistribution> = q
            .locals()
            .iter()
            .enumerate()
            .map(|(k, ld)| if k == k0 { target_local.clone() } else { ld.clone() })
            .collect();
        let network = QuantumCausalNetwork::with_options(g2.clone(), locals, q.tol(), true)?;
        outcomes.push(InterventionOutcome {
            probability: prob,
            network,
            outcome_label: ps.labels()[i].clone(),
        });
    }
    Ok(outcomes)
}

/// Kraus rows that decohere the target factor onto one eigenket and trace
/// out all member factors not kept, mapping the old member space onto the
/// kept fragment's space. One matrix per traced computational assignment.
fn split_member_kraus(
    mdims: &[usize],
    keep_slots: &[usize],
    t_slot: usize,
    ket: &[C64],
) -> Vec<ComplexMatrix> {
    let traced: Vec<usize> = (0..mdims.len())
        .filter(|s| !keep_slots.contains(s) && *s != t_slot)
        .collect();
    let tdims: Vec<usize> = traced.iter().map(|&s| mdims[s]).collect();
    let kdims: Vec<usize> = keep_slots.iter().map(|&s| mdims[s]).collect();
    let member_dim: usize = mdims.iter().product();
    let keep_dim: usize = kdims.iter().product();
    let tcount: usize = tdims.iter().product::<usize>().max(1);
    let mut out = Vec::with_capacity(tcount);
    for e in 0..tcount {
        let ed = unindex(e, &tdims);
        let mut b = ComplexMatrix::zeros(keep_dim, member_dim);
        for oi in 0..member_dim {
            let od = unindex(oi, mdims);
            if traced.iter().enumerate().any(|(x, &s)| od[s] != ed[x]) {
                continue;
            }
            let kd: Vec<usize> = keep_slots.iter().map(|&s| od[s]).collect();
            let amp = ket[od[t_slot]].conj();
            if amp != C64::ZERO {
                b.set(index(&kd, &kdims), oi, amp);
            }
        }
        out.push(b);
    }
    out
}

/// Local surgery: decohere the target in the eigenbasis of its undisturbed
/// reduced operator, sever its undirected arcs and incoming directed arcs,
/// and set it to the given value, leaving all other mechanisms in place.
pub fn do_set(
    q: &QuantumCausalNetwork,
    target: &str,
    value: &DensityOperator,
) -> Result<QuantumCausalNetwork, IntervError> {
    let site = ReductionSite::new(q, target)?;
    let tdim = site.mdims[site.t_slot];
    if value.dim() != tdim {
        return Err(IntervError::ValueDim(value.dim(), tdim));
    }
    if (value.trace_value() - 1.0).abs() > 1e-7 {
        return Err(IntervError::ValueNotNormalized(value.trace_value()));
    }
    let js = q.build_joint()?;
    let sigma_x = q.marginal(&js, &[target.to_string()])?;
    let basis = sigma_x.matrix().hermitian_eigenpairs(1e-7)?;

    let drop_directed: Vec<(String, String)> = q
        .graph()
        .directed_edges()
        .filter(|(_, b)| *b == target)
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    let drop_undirected: Vec<(String, String)> = q
        .graph()
        .undirected_edges()
        .filter(|(a, b)| *a == target || *b == target)
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    let g2 = q.graph().without_edges(&drop_directed, &drop_undirected)?;
    let ord2 = g2.cn_topological_order()?;
    let member_set: BTreeSet<String> = site.members.iter().cloned().collect();
    let k0 = site.set_index;
    let old_set0 = &q.ordering().sets[k0];

    // Undisturbed single-node marginal, used to pin severed inputs.
    let node_marginal = |id: &str| -> Result<ComplexMatrix, IntervError> {
        Ok(q.marginal(&js, &[id.to_string()])?.matrix().clone())
    };
    // Pinned value of a node for downstream channels: the surgery value for
    // the target, the undisturbed marginal otherwise (unchanged by the
    // surgery for entangled partners — no-signaling).
    let pin_value = |id: &str| -> Result<ComplexMatrix, IntervError> {
        if id == target {
            Ok(value.matrix().clone())
        } else {
            node_marginal(id)
        }
    };

    let mut locals = Vec::new();
    for new_set in &ord2.sets {
        if new_set.members.len() == 1 && new_set.members.contains(target) {
            locals.push(LocalDistribution::root(
                vec![target.to_string()],
                vec![value.matrix().clone()],
            ));
            continue;
        }
        if new_set.members.is_subset(&member_set) {
            // A fragment of the target's old CN-set, after the step-1
            // decoherence of the target.
            let keep_slots: Vec<usize> = new_set
                .member_nodes()
                .iter()
                .map(|id| site.members.iter().position(|m| m == id).expect("member"))
                .collect();
            match &q.locals()[k0].components {
                LocalComponents::Root(cs) => {
                    let mut comps = Vec::new();
                    for c in cs {
                        for (w, ket) in &basis {
                            if *w <= 1e-12 {
                                continue;
                            }
                            let proj = {
                                let pb = ComplexMatrix::outer(ket);
                                let others: Vec<usize> = (0..site.mdims.len())
                                    .filter(|&s| s != site.t_slot)
                                    .collect();
                                let od: usize =
                                    others.iter().map(|&s| site.mdims[s]).product();
                                let ident = ComplexMatrix::identity(od);
                                compose_groups(
                                    &site.mdims,
                                    &[(others, &ident), (vec![site.t_slot], &pb)],
                                )?
                            };
                            let pcp = proj.mul(c)?.mul(&proj)?;
                            if pcp.trace()?.re > 1e-12 {
                                comps.push(pcp.partial_trace(&site.mdims, &keep_slots)?);
                            }
                        }
                    }
                    locals.push(LocalDistribution::root(new_set.member_nodes(), comps));
                }
                LocalComponents::Child(cs) => {
                    let old_parents = old_set0.parent_nodes();
                    let new_parents = new_set.parent_nodes();
                    let pinned: Vec<(Vec<String>, ComplexMatrix)> = old_parents
                        .iter()
                        .filter(|p| !new_parents.contains(p))
                        .map(|p| Ok((vec![p.clone()], node_marginal(p)?)))
                        .collect::<Result<_, IntervError>>()?;
                    let kept = pin_inputs(
                        cs,
                        &old_parents,
                        &new_parents,
                        &q.parent_dims(k0),
                        &pinned,
                        q.set_dims(k0),
                        q.tol(),
                    )?;
                    let mut comps = Vec::new();
                    for op in &kept {
                        for (w, ket) in &basis {
                            if *w <= 1e-12 {
                                continue;
                            }
                            let rows =
                                split_member_kraus(&site.mdims, &keep_slots, site.t_slot, ket);
                            let mut kraus = Vec::new();
                            for k in op.kraus() {
                                for b in &rows {
                                    kraus.push(b.mul(k)?);
                                }
                            }
                            comps.push(QuantumOperation::new(
                                kraus,
                                op.in_dims().to_vec(),
                                new_set
                                    .member_nodes()
                                    .iter()
                                    .map(|id| g2.dim_of(id).expect("member"))
                                    .collect(),
                                q.tol().max(1e-7),
                            )?);
                        }
                    }
                    locals.push(LocalDistribution::child(new_set.member_nodes(), comps));
                }
            }
            continue;
        }
        // A CN-set untouched by the surgery; adapt its channel inputs if its
        // parent list shrank.
        let old_k = q.set_of(new_set.members.iter().next().expect("nonempty"))?;
        let old_set = &q.ordering().sets[old_k];
        match &q.locals()[old_k].components {
            LocalComponents::Root(cs) => {
                locals.push(LocalDistribution::root(old_set.member_nodes(), cs.clone()));
            }
            LocalComponents::Child(cs) => {
                let old_parents = old_set.parent_nodes();
                let new_parents = new_set.parent_nodes();
                let ops = if old_parents == new_parents {
                    cs.clone()
                } else {
                    let pinned: Vec<(Vec<String>, ComplexMatrix)> = old_parents
                        .iter()
                        .filter(|p| !new_parents.contains(p))
                        .map(|p| Ok((vec![p.clone()], pin_value(p)?)))
                        .collect::<Result<_, IntervError>>()?;
                    pin_inputs(
                        cs,
                        &old_parents,
                        &new_parents,
                        &q.parent_dims(old_k),
                        &pinned,
                        q.set_dims(old_k),
                        q.tol(),
                    )?
                };
                locals.push(LocalDistribution::child(old_set.member_nodes(), ops));
            }
        }
    }
    Ok(QuantumCausalNetwork::with_options(g2, locals, q.tol(), q.is_post_selected())?)
}

/// One node of an enumerated intervention outcome tree.
#[derive(Debug, Clone)]
pub struct OutcomeNode {
    pub label: String,
    /// Probability of this branch given its parent.
    pub probability: f64,
    /// Product of branch probabilities from the root.
    pub path_probability: f64,
    pub network: QuantumCausalNetwork,
    pub children: Vec<OutcomeNode>,
}

/// Full enumeration of an intervention sequence.
#[derive(Debug, Clone)]
pub struct SequenceTree {
    pub root: OutcomeNode,
    /// Number of branches dropped because their path probability fell below
    /// the pruning threshold.
    pub pruned_paths: usize,
}

const PATH_PRUNE: f64 = 1e-12;

fn at_step(step: usize) -> impl Fn(IntervError) -> IntervError {
    move |e| IntervError::AtStep(step, Box::new(e))
}

fn step_outcomes(
    net: &QuantumCausalNetwork,
    iv: &Intervention,
) -> Result<Vec<(String, f64, QuantumCausalNetwork)>, IntervError> {
    match &iv.kind {
        InterventionKind::Reduction(_) => Ok(rd_general(net, iv)?
            .into_iter()
            .map(|o| (o.outcome_label, o.probability, o.network))
            .collect()),
        InterventionKind::Surgery(v) => {
            let n2 = do_set(net, &iv.target, v)?;
            Ok(vec![(format!("do {}", iv.target), 1.0, n2)])
        }
    }
}

/// Apply interventions in order, expanding every outcome branch. Branches
/// with path probability below 1e−12 are pruned and counted.
pub fn enumerate_sequence(
    q: &QuantumCausalNetwork,
    ivs: &[Intervention],
) -> Result<SequenceTree, IntervError> {
    fn expand(
        net: &QuantumCausalNetwork,
        ivs: &[Intervention],
        step: usize,
        path_prob: f64,
        pruned: &mut usize,
    ) -> Result<Vec<OutcomeNode>, IntervError> {
        if step >= ivs.len() {
            return Ok(Vec::new());
        }
        let outcomes = step_outcomes(net, &ivs[step]).map_err(at_step(step))?;
        let mut nodes = Vec::new();
        for (label, prob, n2) in outcomes {
            let pp = path_prob * prob;
            if pp < PATH_PRUNE {
                *pruned += 1;
                continue;
            }
            let children = expand(&n2, ivs, step + 1, pp, pruned)?;
            nodes.push(OutcomeNode {
                label,
                probability: prob,
                path_probability: pp,
                network: n2,
                children,
            });
        }
        Ok(nodes)
    }
    let mut pruned = 0;
    let children = expand(q, ivs, 0, 1.0, &mut pruned)?;
    Ok(SequenceTree {
        root: OutcomeNode {
            label: "initial".to_string(),
            probability: 1.0,
            path_probability: 1.0,
            network: q.clone(),
            children,
        },
        pruned_paths: pruned,
    })
}

/// One sampled trajectory through an intervention sequence.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// (outcome label, conditional probability) per step.
    pub steps: Vec<(String, f64)>,
    pub network: QuantumCausalNetwork,
}

/// Apply interventions in order, drawing one outcome per reduction with the
/// seeded generator.
pub fn sample_sequence(
    q: &QuantumCausalNetwork,
    ivs: &[Intervention],
    seed: u64,
) -> Result<Trajectory, IntervError> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut net = q.clone();
    let mut steps = Vec::new();
    for (step, iv) in ivs.iter().enumerate() {
        let outcomes = step_outcomes(&net, iv).map_err(at_step(step))?;
        let total: f64 = outcomes.iter().map(|(_, p, _)| p).sum();
        let mut u: f64 = rng.random::<f64>() * total;
        let mut chosen = outcomes.len() - 1;
        for (i, (_, p, _)) in outcomes.iter().enumerate() {
            if u < *p {
                chosen = i;
                break;
            }
            u -= p;
        }
        let (label, prob, n2) = outcomes.into_iter().nth(chosen).expect("chosen in range");
        steps.push((label, prob));
        net = n2;
    }
    Ok(Trajectory { steps, network: net })
}

/// Convenience map over a tree's leaves: (labels along the path, path
/// probability, leaf network).
pub fn tree_leaves(tree: &SequenceTree) -> Vec<(Vec<String>, f64, &QuantumCausalNetwork)> {
    fn walk<'a>(
        node: &'a OutcomeNode,
        prefix: &mut Vec<String>,
        out: &mut Vec<(Vec<String>, f64, &'a QuantumCausalNetwork)>,
    ) {
        if node.children.is_empty() {
            out.push((prefix.clone(), node.path_probability, &node.network));
            return;
        }
        for c in &node.children {
            prefix.push(c.label.clone());
            walk(c, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    walk(&tree.root, &mut prefix, &mut out);
    out
}

/// Check that a CN-set's kind matches its local distribution in every
/// outcome network — used by tests; exported for the validation report.
pub fn kinds_consistent(q: &QuantumCausalNetwork) -> bool {
    q.ordering().sets.iter().zip(q.locals()).all(|(s, ld)| {
        matches!(
            (&s.kind, &ld.components),
            (CnKind::Root, LocalComponents::Root(_)) | (CnKind::Child, LocalComponents::Child(_))
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli_x;
    use crate::sag::Sag;

    fn sag(
        nodes: &[(&str, usize)],
        directed: &[(&str, &str)],
        undirected: &[(&str, &str)],
    ) -> Sag {
        Sag::new(
            &nodes.iter().map(|(a, d)| (a.to_string(), *d)).collect::<Vec<_>>(),
            &directed.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect::<Vec<_>>(),
            &undirected.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect::<Vec<_>>(),
        )
        .unwrap()
    }

    fn computational2() -> ProjectionSet {
        ProjectionSet::computational(2)
    }

    fn plusminus() -> ProjectionSet {
        let plus = ComplexMatrix::from_real(2, 2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        let minus = ComplexMatrix::from_real(2, 2, &[0.5, -0.5, -0.5, 0.5]).unwrap();
        ProjectionSet::new(vec![plus, minus], None, 1e-9).unwrap()
    }

    fn plus_state() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[0.5, 0.5, 0.5, 0.5]).unwrap()
    }

    fn bell_matrix() -> ComplexMatrix {
        let h = C64::new(0.5f64.sqrt(), 0.0);
        ComplexMatrix::outer(&[h, C64::ZERO, C64::ZERO, h])
    }

    fn single_root(state: ComplexMatrix) -> QuantumCausalNetwork {
        let g = sag(&[("X", 2)], &[], &[]);
        QuantumCausalNetwork::new(
            g,
            vec![LocalDistribution::root(["X"], vec![state])],
            1e-9,
        )
        .unwrap()
    }

    #[test]
    fn rd_root_plus_state() {
        let q = single_root(plus_state());
        let iv = Intervention::reduction("X", computational2());
        let outs = rd_deterministic(&q, &iv).unwrap();
        assert_eq!(outs.len(), 2);
        for (o, want) in outs.iter().zip([
            ComplexMatrix::diagonal(&[1.0, 0.0]),
            ComplexMatrix::diagonal(&[0.0, 1.0]),
        ]) {
            assert!((o.probability - 0.5).abs() < 1e-9);
            let js = o.network.build_joint().unwrap();
            assert!(js.operator.matrix().approx_eq(&want, 1e-9));
        }
        let total: f64 = outs.iter().map(|o| o.probability).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rd_chain_removes_arc() {
        let g = sag(&[("X", 2), ("Y", 2)], &[("X", "Y")], &[]);
        let locals = vec![
            LocalDistribution::root(["X"], vec![ComplexMatrix::diagonal(&[0.7, 0.3])]),
            LocalDistribution::child(
                ["Y"],
                vec![QuantumOperation::identity(vec![2])],
            ),
        ];
        let q = QuantumCausalNetwork::new(g, locals, 1e-9).unwrap();
        let iv = Intervention::reduction("Y", computational2());
        let outs = rd_deterministic(&q, &iv).unwrap();
        assert_eq!(outs.len(), 2);
        assert!((outs[0].probability - 0.7).abs() < 1e-9);
        assert!((outs[1].probability - 0.3).abs() < 1e-9);
        for o in &outs {
            assert!(!o.network.graph().has_directed_edge("X", "Y").unwrap());
            assert!(kinds_consistent(&o.network));
        }
        // Y collapses; X's marginal is untouched (forward-only propagation).
        let js = outs[0].network.build_joint().unwrap();
        let my = outs[0].network.marginal(&js, &["Y".to_string()]).unwrap();
        assert!(my.matrix().approx_eq(&ComplexMatrix::diagonal(&[1.0, 0.0]), 1e-9));
        let mx = outs[0].network.marginal(&js, &["X".to_string()]).unwrap();
        assert!(mx.matrix().approx_eq(&ComplexMatrix::diagonal(&[0.7, 0.3]), 1e-9));
    }

    #[test]
    fn rd_product_cn_set_leaves_partner() {
        // {X,Y} joined by an undirected arc, in a product state.
        let g = sag(&[("X", 2), ("Y", 2)], &[], &[("X", "Y")]);
        let prod = plus_state().tensor(&ComplexMatrix::diagonal(&[0.2, 0.8]));
        let q = QuantumCausalNetwork::new(
            g,
            vec![LocalDistribution::root(["X", "Y"], vec![prod])],
            1e-9,
        )
        .unwrap();
        let p0 = ComplexMatrix::diagonal(&[1.0, 0.0]).tensor(&ComplexMatrix::identity(2));
        let p1 = ComplexMatrix::diagonal(&[0.0, 1.0]).tensor(&ComplexMatrix::identity(2));
        let ps = ProjectionSet::new(vec![p0, p1], None, 1e-9).unwrap();
        let outs = rd_deterministic(&q, &Intervention::reduction("X", ps)).unwrap();
        assert_eq!(outs.len(), 2);
        for o in &outs {
            assert!(!o.network.graph().has_undirected_edge("X", "Y").unwrap());
            assert_eq!(o.network.ordering().sets.len(), 2);
            let js = o.network.build_joint().unwrap();
            let my = o.network.marginal(&js, &["Y".to_string()]).unwrap();
            assert!(my.matrix().approx_eq(&ComplexMatrix::diagonal(&[0.2, 0.8]), 1e-9));
        }
    }

    #[test]
    fn rd_rejects_nonlocal_projector() {
        let g = sag(&[("X", 2), ("Y", 2)], &[], &[("X", "Y")]);
        let q = QuantumCausalNetwork::new(
            g,
            vec![LocalDistribution::root(["X", "Y"], vec![bell_matrix()])],
            1e-9,
        )
        .unwrap();
        // Projectors onto the Bell basis are not identity-elsewhere.
        let h = C64::new(0.5f64.sqrt(), 0.0);
        let phi_p = ComplexMatrix::outer(&[h, C64::ZERO, C64::ZERO, h]);
        let phi_m = ComplexMatrix::outer(&[h, C64::ZERO, C64::ZERO, -h]);
        let psi_p = ComplexMatrix::outer(&[C64::ZERO, h, h, C64::ZERO]);
        let psi_m = ComplexMatrix::outer(&[C64::ZERO, h, -h, C64::ZERO]);
        let ps = ProjectionSet::new(vec![phi_p, phi_m, psi_p, psi_m], None, 1e-9).unwrap();
        let e = rd_deterministic(&q, &Intervention::reduction("X", ps));
        assert!(matches!(e, Err(IntervError::ProjectorNotLocal(_))));
    }

    #[test]
    fn rd_general_equals_deterministic_on_deterministic_net() {
        let g = sag(&[("X", 2), ("Y", 2)], &[("X", "Y")], &[]);
        let locals = vec![
            LocalDistribution::root(["X"], vec![ComplexMatrix::diagonal(&[0.7, 0.3])]),
            LocalDistribution::child(
                ["Y"],
                vec![QuantumOperation::from_unitary(pauli_x(), vec![2], 1e-9).unwrap()],
            ),
        ];
        let q = QuantumCausalNetwork::new(g, locals, 1e-9).unwrap();
        let iv = Intervention::reduction("Y", computational2());
        let a = rd_deterministic(&q, &iv).unwrap();
        let b = rd_general(&q, &iv).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x.probability - y.probability).abs() < 1e-12);
            assert_eq!(x.outcome_label, y.outcome_label);
            let jx = x.network.build_joint().unwrap();
            let jy = y.network.build_joint().unwrap();
            assert!(jx.operator.matrix().approx_eq(jy.operator.matrix(), 1e-12));
            // Graphs agree edge for edge.
            assert_eq!(
                x.network.graph().directed_edges().collect::<Vec<_>>(),
                y.network.graph().directed_edges().collect::<Vec<_>>()
            );
            assert_eq!(
                x.network.graph().undirected_edges().collect::<Vec<_>>(),
                y.network.graph().undirected_edges().collect::<Vec<_>>()
            );
        }
    }

    fn mixture_chain() -> QuantumCausalNetwork {
        // Root X with components 0.6|0⟩⟨0| and 0.4|+⟩⟨+|; child Y copies X's
        // basis value.
        let g = sag(&[("X", 2), ("Y", 2)], &[("X", "Y")], &[]);
        let copy = QuantumOperation::new(
            vec![
                ComplexMatrix::diagonal(&[1.0, 0.0]),
                ComplexMatrix::diagonal(&[0.0, 1.0]),
            ],
            vec![2],
            vec![2],
            1e-9,
        )
        .unwrap();
        let locals = vec![
            LocalDistribution::root(
                ["X"],
                vec![
                    ComplexMatrix::diagonal(&[1.0, 0.0]).scale_real(0.6),
                    plus_state().scale_real(0.4),
                ],
            ),
            LocalDistribution::child(["Y"], vec![copy]),
        ];
        QuantumCausalNetwork::new(g, locals, 1e-9).unwrap()
    }

    #[test]
    fn rd_general_backward_inference() {
        let q = mixture_chain();
        let iv = Intervention::reduction("Y", computational2());
        let outs = rd_general(&q, &iv).unwrap();
        // P(Y=1) = 0.6·0 + 0.4·0.5 = 0.2.
        let o1 = outcome_by_label(&outs, "o1").unwrap();
        assert!((o1.probability - 0.2).abs() < 1e-9);
        // The arc X → Y survives (X is multi-valued): backward inference.
        assert!(o1.network.graph().has_directed_edge("X", "Y").unwrap());
        assert!(o1.network.is_post_selected());
        // Rebuilding the joint performs the Bayes update: only X's second
        // component is consistent with observing Y = 1.
        let js = o1.network.build_joint().unwrap();
        let cm = &js.classical_model;
        let x_slot = cm.sets.iter().position(|s| s == "X").unwrap();
        let mut posterior = [0.0f64; 2];
        for p in &cm.paths {
            posterior[p.indices[x_slot]] += p.weight;
        }
        assert!(posterior[0].abs() < 1e-9);
        assert!((posterior[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rd_general_zero_weight_components_dropped() {
        let q = mixture_chain();
        let iv = Intervention::reduction("X", computational2());
        let outs = rd_general(&q, &iv).unwrap();
        // Outcome |1⟩ is consistent only with the |+⟩ component.
        let o1 = outcome_by_label(&outs, "o1").unwrap();
        match &o1.network.locals()[o1.network.set_of("X").unwrap()].components {
            LocalComponents::Root(cs) => assert_eq!(cs.len(), 1),
            _ => panic!("X stays a root"),
        }
    }

    #[test]
    fn do_bell_no_signaling() {
        let g = sag(&[("X", 2), ("Y", 2)], &[], &[("X", "Y")]);
        let q = QuantumCausalNetwork::new(
            g,
            vec![LocalDistribution::root(["X", "Y"], vec![bell_matrix()])],
            1e-9,
        )
        .unwrap();
        let ket0 = DensityOperator::basis(vec![2], 0).unwrap();
        let q2 = do_set(&q, "X", &ket0).unwrap();
        assert!(!q2.graph().has_undirected_edge("X", "Y").unwrap());
        let js = q2.build_joint().unwrap();
        let my = q2.marginal(&js, &["Y".to_string()]).unwrap();
        let half = ComplexMatrix::identity(2).scale_real(0.5);
        assert!(my.matrix().max_abs_diff(&half) <= 1e-9);
        let mx = q2.marginal(&js, &["X".to_string()]).unwrap();
        assert!(mx.matrix().approx_eq(ket0.matrix(), 1e-9));
    }

    #[test]
    fn do_point_root_is_identity_up_to_arcs() {
        let sigma = ComplexMatrix::diagonal(&[0.7, 0.3]);
        let q = single_root(sigma.clone());
        let v = DensityOperator::new(sigma.clone(), vec![2], 1e-9).unwrap();
        let q2 = do_set(&q, "X", &v).unwrap();
        let js = q2.build_joint().unwrap();
        assert!(js.operator.matrix().approx_eq(&sigma, 1e-9));
    }

    #[test]
    fn do_chain_severs_parent_and_propagates() {
        let g = sag(&[("W", 2), ("X", 2), ("Z", 2)], &[("W", "X"), ("X", "Z")], &[]);
        let flip = QuantumOperation::from_unitary(pauli_x(), vec![2], 1e-9).unwrap();
        let locals = vec![
            LocalDistribution::root(["W"], vec![ComplexMatrix::diagonal(&[0.9, 0.1])]),
            LocalDistribution::child(["X"], vec![QuantumOperation::identity(vec![2])]),
            LocalDistribution::child(["Z"], vec![flip.clone()]),
        ];
        let q = QuantumCausalNetwork::new(g, locals, 1e-9).unwrap();
        let xi = DensityOperator::basis(vec![2], 0).unwrap();
        let q2 = do_set(&q, "X", &xi).unwrap();
        assert!(!q2.graph().has_directed_edge("W", "X").unwrap());
        assert!(q2.graph().has_directed_edge("X", "Z").unwrap());
        let js = q2.build_joint().unwrap();
        let mz = q2.marginal(&js, &["Z".to_string()]).unwrap();
        let want = flip.apply_matrix(xi.matrix()).unwrap();
        assert!(mz.matrix().approx_eq(&want, 1e-9));
        // W is unaffected.
        let mw = q2.marginal(&js, &["W".to_string()]).unwrap();
        assert!(mw.matrix().approx_eq(&ComplexMatrix::diagonal(&[0.9, 0.1]), 1e-9));
    }

    #[test]
    fn do_ghz_no_signaling() {
        let g = sag(&[("A", 2), ("B", 2), ("C", 2)], &[], &[("A", "B"), ("B", "C")]);
        let h = C64::new(0.5f64.sqrt(), 0.0);
        let mut ket = vec![C64::ZERO; 8];
        ket[0] = h;
        ket[7] = h;
        let ghz = ComplexMatrix::outer(&ket);
        let q = QuantumCausalNetwork::new(
            g,
            vec![LocalDistribution::root(["A", "B", "C"], vec![ghz])],
            1e-9,
        )
        .unwrap();
        let js0 = q.build_joint().unwrap();
        let v = DensityOperator::pure(
            &[C64::new(0.6, 0.0), C64::new(0.0, 0.8)],
            vec![2],
        )
        .unwrap();
        let q2 = do_set(&q, "B", &v).unwrap();
        let js2 = q2.build_joint().unwrap();
        for n in ["A", "C"] {
            let before = q.marginal(&js0, &[n.to_string()]).unwrap();
            let after = q2.marginal(&js2, &[n.to_string()]).unwrap();
            assert!(
                before.matrix().max_abs_diff(after.matrix()) <= 1e-9,
                "signaling to {n}"
            );
        }
        // A and C end up in separate CN-sets with no arc between them, so
        // their joint is the product of the preserved marginals.
        let mac = q2
            .marginal(&js2, &["A".to_string(), "C".to_string()])
            .unwrap();
        let quarter = ComplexMatrix::identity(4).scale_real(0.25);
        assert!(mac.matrix().max_abs_diff(&quarter) <= 1e-9);
    }

    #[test]
    fn sequence_order_dependence() {
        let q = single_root(ComplexMatrix::diagonal(&[1.0, 0.0]));
        let comp_then_pm = [
            Intervention::reduction("X", computational2()),
            Intervention::reduction("X", plusminus()),
        ];
        let pm_then_comp = [
            Intervention::reduction("X", plusminus()),
            Intervention::reduction("X", computational2()),
        ];
        let t1 = enumerate_sequence(&q, &comp_then_pm).unwrap();
        let t2 = enumerate_sequence(&q, &pm_then_comp).unwrap();
        let l1 = tree_leaves(&t1);
        let l2 = tree_leaves(&t2);
        // Computational first: one deterministic branch, then a 0.5/0.5
        // split — two leaves. Reversed: four leaves of 0.25.
        assert_eq!(l1.len(), 2);
        assert!(l1.iter().all(|(_, p, _)| (p - 0.5).abs() < 1e-9));
        assert_eq!(l2.len(), 4);
        assert!(l2.iter().all(|(_, p, _)| (p - 0.25).abs() < 1e-9));
    }

    #[test]
    fn sequence_empty_is_identity() {
        let q = single_root(plus_state());
        let t = enumerate_sequence(&q, &[]).unwrap();
        assert!(t.root.children.is_empty());
        let js = t.root.network.build_joint().unwrap();
        assert!(js.operator.matrix().approx_eq(&plus_state(), 1e-12));
    }

    #[test]
    fn sequence_disjoint_reductions_commute() {
        let g = sag(&[("A", 2), ("B", 2)], &[], &[]);
        let locals = vec![
            LocalDistribution::root(["A"], vec![plus_state()]),
            LocalDistribution::root(["B"], vec![ComplexMatrix::diagonal(&[0.3, 0.7])]),
        ];
        let q = QuantumCausalNetwork::new(g, locals, 1e-9).unwrap();
        let ab = [
            Intervention::reduction("A", computational2()),
            Intervention::reduction("B", computational2()),
        ];
        let ba = [
            Intervention::reduction("B", computational2()),
            Intervention::reduction("A", computational2()),
        ];
        let t1 = enumerate_sequence(&q, &ab).unwrap();
        let t2 = enumerate_sequence(&q, &ba).unwrap();
        let mut l1: Vec<(f64, ComplexMatrix)> = tree_leaves(&t1)
            .into_iter()
            .map(|(_, p, n)| (p, n.build_joint().unwrap().operator.matrix().clone()))
            .collect();
        let mut l2: Vec<(f64, ComplexMatrix)> = tree_leaves(&t2)
            .into_iter()
            .map(|(_, p, n)| (p, n.build_joint().unwrap().operator.matrix().clone()))
            .collect();
        let key = |m: &ComplexMatrix| {
            (0..m.rows()).map(|i| (m.get(i, i).re * 10.0) as i64).collect::<Vec<_>>()
        };
        l1.sort_by_key(|(_, m)| key(m));
        l2.sort_by_key(|(_, m)| key(m));
        assert_eq!(l1.len(), l2.len());
        for ((p1, m1), (p2, m2)) in l1.iter().zip(&l2) {
            assert!((p1 - p2).abs() < 1e-9);
            assert!(m1.max_abs_diff(m2) <= 1e-9);
        }
    }

    #[test]
    fn sequence_sampling_deterministic_per_seed() {
        let q = single_root(plus_state());
        let ivs = [
            Intervention::reduction("X", computational2()),
            Intervention::reduction("X", plusminus()),
        ];
        let a = sample_sequence(&q, &ivs, 42).unwrap();
        let b = sample_sequence(&q, &ivs, 42).unwrap();
        assert_eq!(a.steps, b.steps);
        assert_eq!(a.steps.len(), 2);
    }

    #[test]
    fn reduction_probabilities_sum_to_one() {
        let q = mixture_chain();
        for target in ["X", "Y"] {
            let outs =
                rd_general(&q, &Intervention::reduction(target, computational2())).unwrap();
            let total: f64 = outs.iter().map(|o| o.probability).sum();
            assert!((total - 1.0).abs() < 1e-9, "target {target}: {total}");
        }
    }

    #[test]
    fn post_intervention_networks_respect_graph() {
        use crate::network::RespectsPolicy;
        let q = mixture_chain();
        let outs = rd_general(&q, &Intervention::reduction("Y", computational2())).unwrap();
        for o in &outs {
            let rep = o.network.check_respects(&RespectsPolicy::default()).unwrap();
            assert!(rep.ok, "{:?}", rep.violations);
        }
        let q2 = do_set(&q, "Y", &DensityOperator::basis(vec![2], 1).unwrap()).unwrap();
        let rep = q2.check_respects(&RespectsPolicy::default()).unwrap();
        assert!(rep.ok, "{:?}", rep.violations);
    }

    #[test]
    fn zero_probability_conditioning_detected() {
        let q = single_root(ComplexMatrix::diagonal(&[1.0, 0.0]));
        let outs =
            rd_deterministic(&q, &Intervention::reduction("X", computational2())).unwrap();
        assert_eq!(outs.len(), 1);
        assert!(matches!(
            outcome_by_label(&outs, "o1"),
            Err(IntervError::ZeroProbabilityOutcome(_))
        ));
    }
}
