//! Deterministic, machine-readable result reports: stable key order, complex
//! entries as `a+bi` with 12 significant digits, byte-identical across runs
//! for identical inputs and seeds.

use crate::intervene::{InterventionOutcome, OutcomeNode, SequenceTree, Trajectory};
use crate::linalg::{ComplexMatrix, C64};
use crate::network::{JointState, QuantumCausalNetwork, RespectsReport};
use crate::qstate::DensityOperator;
use crate::sag::CnKind;
use std::fmt::Write as _;

/// Round to 12 significant digits and print the shortest decimal that
/// round-trips the rounded value.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".to_string() } else { format!("{x}") };
    }
    let exp = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(11 - exp);
    let y = (x * scale).round() / scale;
    let y = if y == 0.0 { 0.0 } else { y };
    format!("{y}")
}

/// `a+bi` / `a-bi`, both parts at 12 significant digits, imaginary part
/// always present.
pub fn fmt_complex(z: C64) -> String {
    if z.im < 0.0 {
        format!("{}-{}i", sig12(z.re), sig12(-z.im))
    } else {
        format!("{}+{}i", sig12(z.re), sig12(z.im))
    }
}

fn push_matrix(out: &mut String, m: &ComplexMatrix) {
    let _ = writeln!(out, "matrix {}x{}", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| fmt_complex(m.get(i, j))).collect();
        let _ = writeln!(out, "row {}", row.join(" "));
    }
}

fn push_operator(out: &mut String, nodes: &[String], dm: &DensityOperator) {
    let _ = writeln!(out, "nodes {}", nodes.join(" "));
    push_matrix(out, dm.matrix());
}

/// Validation report: the CN-set structure plus any respects violations.
pub fn report_validation(q: &QuantumCausalNetwork, respects: &RespectsReport) -> String {
    let mut out = String::from("report validation\n");
    let _ = writeln!(out, "status {}", if respects.ok { "ok" } else { "fail" });
    let _ = writeln!(out, "cn-sets {}", q.ordering().sets.len());
    for (k, s) in q.ordering().sets.iter().enumerate() {
        let kind = match s.kind {
            CnKind::Root => "root",
            CnKind::Child => "child",
        };
        let parents = s.parent_nodes();
        let parents = if parents.is_empty() { "-".to_string() } else { parents.join(" ") };
        let _ = writeln!(
            out,
            "set {} kind {} members {} parents {} params {}",
            k,
            kind,
            s.member_nodes().join(" "),
            parents,
            q.parameter_count(k)
        );
    }
    for v in &respects.violations {
        let _ = writeln!(out, "violation {v}");
    }
    out.push_str("end\n");
    out
}

/// Joint-state report: node order and the full density operator.
pub fn report_joint(js: &JointState) -> String {
    let mut out = String::from("report joint\n");
    push_operator(&mut out, &js.node_order, &js.operator);
    let _ = writeln!(out, "mixture-terms {}", js.mixture.len());
    for t in &js.mixture {
        let path: Vec<String> = t.path.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "term weight {} path {}", sig12(t.weight), path.join(" "));
    }
    out.push_str("end\n");
    out
}

/// Marginal report for a node subset.
pub fn report_marginal(nodes: &[String], dm: &DensityOperator) -> String {
    let mut out = String::from("report marginal\n");
    push_operator(&mut out, nodes, dm);
    out.push_str("end\n");
    out
}

/// All outcomes of a single reduction, each with its post-intervention joint.
pub fn report_outcomes(
    target: &str,
    outcomes: &[InterventionOutcome],
) -> Result<String, crate::network::NetworkError> {
    let mut out = String::from("report reduce\n");
    let _ = writeln!(out, "target {target}");
    let _ = writeln!(out, "outcomes {}", outcomes.len());
    for o in outcomes {
        let _ = writeln!(out, "outcome {} probability {}", o.outcome_label, sig12(o.probability));
        let js = o.network.build_joint()?;
        push_operator(&mut out, &js.node_order, &js.operator);
    }
    out.push_str("end\n");
    Ok(out)
}

/// Post-surgery network report.
pub fn report_do(
    target: &str,
    q: &QuantumCausalNetwork,
) -> Result<String, crate::network::NetworkError> {
    let mut out = String::from("report do\n");
    let _ = writeln!(out, "target {target}");
    let js = q.build_joint()?;
    push_operator(&mut out, &js.node_order, &js.operator);
    out.push_str("end\n");
    Ok(out)
}

/// Enumerated sequence tree, depth-first with indentation.
pub fn report_tree(tree: &SequenceTree) -> String {
    fn walk(out: &mut String, node: &OutcomeNode, depth: usize) {
        let _ = writeln!(
            out,
            "{}branch {} probability {} path-probability {}",
            "  ".repeat(depth),
            node.label,
            sig12(node.probability),
            sig12(node.path_probability)
        );
        for c in &node.children {
            walk(out, c, depth + 1);
        }
    }
    let mut out = String::from("report sequence\n");
    let _ = writeln!(out, "pruned {}", tree.pruned_paths);
    walk(&mut out, &tree.root, 0);
    out.push_str("end\n");
    out
}

/// One sampled trajectory and its final joint.
pub fn report_trajectory(t: &Trajectory) -> Result<String, crate::network::NetworkError> {
    let mut out = String::from("report trajectory\n");
    for (i, (label, prob)) in t.steps.iter().enumerate() {
        let _ = writeln!(out, "step {} outcome {} probability {}", i, label, sig12(*prob));
    }
    let js = t.network.build_joint()?;
    push_operator(&mut out, &js.node_order, &js.operator);
    out.push_str("end\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig12_examples() {
        assert_eq!(sig12(0.5), "0.5");
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(-0.0), "0");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(0.1 + 0.2), "0.3");
        assert_eq!(sig12(1.0), "1");
        assert_eq!(sig12(-2.5e-5), "-0.000025");
    }

    #[test]
    fn complex_examples() {
        assert_eq!(fmt_complex(C64::new(0.5, 0.0)), "0.5+0i");
        assert_eq!(fmt_complex(C64::new(0.0, 0.0)), "0+0i");
        assert_eq!(fmt_complex(C64::new(1.0, -0.25)), "1-0.25i");
    }

    #[test]
    fn marginal_block_shape() {
        let dm = DensityOperator::maximally_mixed(vec![2]);
        let r = report_marginal(&["Y".to_string()], &dm);
        assert!(r.contains("matrix 2x2"));
        assert!(r.contains("row 0.5+0i 0+0i"));
        assert!(r.ends_with("end\n"));
    }
}
