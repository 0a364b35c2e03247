//! Text model format: parsing, semantic loading into a network, model
//! serialization, and deterministic result reports.

pub mod parse;
pub mod report;

pub use parse::{parse_model, ModelDocument, ParseError, Pos};

use crate::linalg::{compose_groups, ComplexMatrix, C64};
use crate::network::{LocalDistribution, QuantumCausalNetwork};
use crate::qstate::{DensityOperator, ProjectionSet};
use crate::sag::Sag;
use parse::EdgeKind;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("line {line}, column {col}: {message}")]
    Semantic { line: usize, col: usize, message: String },
}

fn sem(pos: Pos, message: impl Into<String>) -> ModelError {
    ModelError::Semantic { line: pos.line, col: pos.col, message: message.into() }
}

/// A loaded model: the network plus its named auxiliary objects.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub network: QuantumCausalNetwork,
    /// name → (target node, projection set on the node's CN-set space).
    pub projsets: BTreeMap<String, (String, ProjectionSet)>,
    /// name → (target node, state on the node's space).
    pub states: BTreeMap<String, (String, DensityOperator)>,
}

/// Build the network and named objects from a parsed document, attaching the
/// source position of the offending declaration to each failure.
pub fn load_qcn(doc: &ModelDocument, tol: f64) -> Result<LoadedModel, ModelError> {
    // Node table, with duplicate detection.
    let mut node_pos: BTreeMap<&str, Pos> = BTreeMap::new();
    for n in &doc.nodes {
        if node_pos.insert(&n.id, n.pos).is_some() {
            return Err(sem(n.pos, format!("duplicate node `{}`", n.id)));
        }
    }
    let check_node = |id: &str, pos: Pos| -> Result<(), ModelError> {
        if node_pos.contains_key(id) {
            Ok(())
        } else {
            Err(sem(pos, format!("unknown node `{id}`")))
        }
    };
    for e in &doc.edges {
        check_node(&e.a, e.pos)?;
        check_node(&e.b, e.pos)?;
        if e.a == e.b {
            return Err(sem(e.pos, format!("self-loop at `{}`", e.a)));
        }
    }

    let nodes: Vec<(String, usize)> =
        doc.nodes.iter().map(|n| (n.id.clone(), n.dim)).collect();
    let directed: Vec<(String, String)> = doc
        .edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Directed)
        .map(|e| (e.a.clone(), e.b.clone()))
        .collect();
    let undirected: Vec<(String, String)> = doc
        .edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Undirected)
        .map(|e| (e.a.clone(), e.b.clone()))
        .collect();
    let first_pos = doc
        .nodes
        .first()
        .map(|n| n.pos)
        .unwrap_or(Pos { line: 1, col: 1 });
    let graph = Sag::new(&nodes, &directed, &undirected)
        .map_err(|e| sem(first_pos, e.to_string()))?;
    let ordering = graph
        .cn_topological_order()
        .map_err(|e| sem(first_pos, e.to_string()))?;

    // Group component declarations by (sorted) member list.
    let mut locals_by_members: BTreeMap<Vec<String>, (Pos, LocalDistribution)> = BTreeMap::new();
    for r in &doc.roots {
        for m in &r.members {
            check_node(m, r.pos)?;
        }
        let mut key = r.members.clone();
        key.sort();
        key.dedup();
        let comp = r.matrix.scale_real(r.weight);
        match locals_by_members.get_mut(&key) {
            None => {
                locals_by_members.insert(
                    key.clone(),
                    (r.pos, LocalDistribution::root(key, vec![comp])),
                );
            }
            Some((_, ld)) => match &mut ld.components {
                crate::network::LocalComponents::Root(cs) => cs.push(comp),
                _ => {
                    return Err(sem(
                        r.pos,
                        "set already declared as a channel".to_string(),
                    ))
                }
            },
        }
    }
    for ch in &doc.channels {
        for m in ch.members.iter().chain(&ch.parents) {
            check_node(m, ch.pos)?;
        }
        let mut key = ch.members.clone();
        key.sort();
        key.dedup();
        // The declared parent list must match the set's parent nodes in id
        // order (the channel input factor order).
        let set = ordering
            .sets
            .iter()
            .find(|s| s.member_nodes() == key)
            .ok_or_else(|| {
                sem(ch.pos, format!("{{{}}} is not a CN-set of the graph", key.join(", ")))
            })?;
        let expected = set.parent_nodes();
        if ch.parents != expected {
            return Err(sem(
                ch.pos,
                format!(
                    "channel parents {{{}}} must be declared as {{{}}} (all parent CN-set members, in id order)",
                    ch.parents.join(", "),
                    expected.join(", ")
                ),
            ));
        }
        let in_dims: Vec<usize> = expected
            .iter()
            .map(|id| graph.dim_of(id).expect("checked"))
            .collect();
        let out_dims: Vec<usize> =
            key.iter().map(|id| graph.dim_of(id).expect("checked")).collect();
        let op = crate::qop::QuantumOperation::new(
            ch.kraus.clone(),
            in_dims,
            out_dims,
            tol.max(1e-7),
        )
        .map_err(|e| sem(ch.pos, e.to_string()))?;
        match locals_by_members.get_mut(&key) {
            None => {
                locals_by_members.insert(
                    key.clone(),
                    (ch.pos, LocalDistribution::child(key, vec![op])),
                );
            }
            Some((_, ld)) => match &mut ld.components {
                crate::network::LocalComponents::Child(cs) => cs.push(op),
                _ => {
                    return Err(sem(ch.pos, "set already declared as a root".to_string()))
                }
            },
        }
    }

    // Every CN-set needs a local distribution; point at the node line of a
    // missing set's smallest member.
    for s in &ordering.sets {
        let key = s.member_nodes();
        if !locals_by_members.contains_key(&key) {
            let pos = node_pos[key[0].as_str()];
            return Err(sem(
                pos,
                format!("CN-set {{{}}} has no root/channel declaration", key.join(", ")),
            ));
        }
    }
    for (key, (pos, _)) in &locals_by_members {
        if !ordering.sets.iter().any(|s| s.member_nodes() == *key) {
            return Err(sem(
                *pos,
                format!("{{{}}} is not a CN-set of the graph", key.join(", ")),
            ));
        }
    }

    let positions: BTreeMap<Vec<String>, Pos> =
        locals_by_members.iter().map(|(k, (p, _))| (k.clone(), *p)).collect();
    let locals: Vec<LocalDistribution> =
        locals_by_members.into_values().map(|(_, ld)| ld).collect();
    let network = QuantumCausalNetwork::new(graph, locals, tol).map_err(|e| {
        // Attach the declaration position of the set the error names, when
        // recognizable.
        let msg = e.to_string();
        let pos = positions
            .iter()
            .find(|(k, _)| msg.contains(&k[0]))
            .map(|(_, p)| *p)
            .unwrap_or(first_pos);
        sem(pos, msg)
    })?;

    let mut projsets = BTreeMap::new();
    for p in &doc.projsets {
        check_node(&p.node, p.pos)?;
        let k = network.set_of(&p.node).expect("checked");
        let mdims = network.set_dims(k);
        let members = network.ordering().sets[k].member_nodes();
        let t_slot = members.iter().position(|m| m == &p.node).expect("member");
        let node_dim = mdims[t_slot];
        let space: usize = mdims.iter().product();
        let mut mats = Vec::with_capacity(p.projectors.len());
        for m in &p.projectors {
            if m.rows() == space {
                mats.push(m.clone());
            } else if m.rows() == node_dim && members.len() > 1 {
                // Lift a single-node projector to the CN-set space with
                // identity on the co-members.
                let others: Vec<usize> =
                    (0..mdims.len()).filter(|&s| s != t_slot).collect();
                let od: usize = others.iter().map(|&s| mdims[s]).product();
                let ident = ComplexMatrix::identity(od);
                let lifted =
                    compose_groups(&mdims, &[(others, &ident), (vec![t_slot], m)])
                        .map_err(|e| sem(p.pos, e.to_string()))?;
                mats.push(lifted);
            } else {
                return Err(sem(
                    p.pos,
                    format!(
                        "projector dimension {} matches neither node `{}` ({}) nor its CN-set space ({})",
                        m.rows(),
                        p.node,
                        node_dim,
                        space
                    ),
                ));
            }
        }
        let ps = ProjectionSet::new(mats, None, tol.max(1e-7))
            .map_err(|e| sem(p.pos, e.to_string()))?;
        if projsets.insert(p.name.clone(), (p.node.clone(), ps)).is_some() {
            return Err(sem(p.pos, format!("duplicate projset `{}`", p.name)));
        }
    }

    let mut states = BTreeMap::new();
    for s in &doc.states {
        check_node(&s.node, s.pos)?;
        let dim = network.graph().dim_of(&s.node).expect("checked");
        if s.matrix.rows() != dim {
            return Err(sem(
                s.pos,
                format!(
                    "state dimension {} does not match node `{}` (dim {})",
                    s.matrix.rows(),
                    s.node,
                    dim
                ),
            ));
        }
        let dm = DensityOperator::new(s.matrix.clone(), vec![dim], tol.max(1e-7))
            .map_err(|e| sem(s.pos, e.to_string()))?;
        if states.insert(s.name.clone(), (s.node.clone(), dm)).is_some() {
            return Err(sem(s.pos, format!("duplicate state `{}`", s.name)));
        }
    }

    Ok(LoadedModel { network, projsets, states })
}

/// Shortest round-trip decimal form of a real number.
fn fmt_f64(x: f64) -> String {
    // Canonicalize -0.
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x}")
}

/// Complex entry in model syntax (`a`, `bi`, `a+bi`, `a-bi`).
pub fn fmt_model_complex(z: C64) -> String {
    if z.im == 0.0 {
        fmt_f64(z.re)
    } else if z.re == 0.0 {
        format!("{}i", fmt_f64(z.im))
    } else if z.im < 0.0 {
        format!("{}-{}i", fmt_f64(z.re), fmt_f64(-z.im))
    } else {
        format!("{}+{}i", fmt_f64(z.re), fmt_f64(z.im))
    }
}

fn fmt_matrix(m: &ComplexMatrix) -> String {
    let rows: Vec<String> = (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| fmt_model_complex(m.get(i, j)))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    format!("[{}]", rows.join(";"))
}

/// Serialize a network back into the model format. Re-parsing yields a
/// semantically identical network.
pub fn serialize_network(q: &QuantumCausalNetwork) -> String {
    let g = q.graph();
    let mut out = String::new();
    for id in g.node_ids() {
        out.push_str(&format!("node {} dim={}\n", id, g.dim_of(id).expect("own node")));
    }
    for (a, b) in g.directed_edges() {
        out.push_str(&format!("edge {a} -> {b}\n"));
    }
    for (a, b) in g.undirected_edges() {
        out.push_str(&format!("edge {a} -- {b}\n"));
    }
    for (k, ld) in q.locals().iter().enumerate() {
        let members = q.ordering().sets[k].member_nodes().join(", ");
        match &ld.components {
            crate::network::LocalComponents::Root(cs) => {
                for c in cs {
                    out.push_str(&format!(
                        "root {{{members}}} component matrix={}\n",
                        fmt_matrix(c)
                    ));
                }
            }
            crate::network::LocalComponents::Child(cs) => {
                let parents = q.ordering().sets[k].parent_nodes().join(", ");
                for op in cs {
                    let kraus: Vec<String> =
                        op.kraus().iter().map(fmt_matrix).collect();
                    out.push_str(&format!(
                        "channel {{{members}}} from {{{parents}}} component kraus={}\n",
                        kraus.join(",")
                    ));
                }
            }
        }
    }
    out
}
