use std::fmt::Write;

use super::{LwtScript, PlaceholderSource};

/// Renders the network of thoughts as a Graphviz digraph.
///
/// One node per named input (`in_<name>`, sorted) and per instruction (`n<k>`),
/// one edge per placeholder in reference order. Indexed edges carry the index
/// path as their label; full message passing edges are unlabeled.
pub fn to_dot(script: &LwtScript) -> String {
    let mut out = String::from("digraph lwt {\n    rankdir=TB;\n    node [shape=box];\n");
    for name in &script.named_inputs {
        let _ = writeln!(out, "    in_{name} [label=\"{name}\", shape=ellipse];");
    }
    for instr in &script.instructions {
        let _ = writeln!(out, "    n{0} [label=\"({0})\"];", instr.index);
    }
    for instr in &script.instructions {
        for placeholder in instr.refs() {
            let from = match &placeholder.source {
                PlaceholderSource::Numbered(k) => format!("n{k}"),
                PlaceholderSource::Named(name) => format!("in_{name}"),
            };
            if placeholder.is_full() {
                let _ = writeln!(out, "    {from} -> n{};", instr.index);
            } else {
                let _ = writeln!(out, "    {from} -> n{} [label=\"{}\"];", instr.index, placeholder.path_label());
            }
        }
    }
    out.push_str("}\n");
    out
}
