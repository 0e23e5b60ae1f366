use std::fmt::Write;

use super::ReactiveCircuit;

/// One line per node: `id kind children omega`.
///
/// Formula nodes are `f<i>`, their product gates `f<i>.p<j>`, and signal
/// literals `s:<name>` or `s:!<name>`.
pub fn dump(rc: &ReactiveCircuit) -> String {
    let lit = |l: &crate::grounder::Literal| {
        let name = &rc.variables()[l.var];
        if l.positive {
            format!("s:{name}")
        } else {
            format!("s:!{name}")
        }
    };
    let mut out = String::new();
    for (i, f) in rc.formulas().iter().enumerate() {
        let gates: Vec<String> = (0..f.products.len())
            .map(|j| format!("f{i}.p{j}"))
            .collect();
        let _ = writeln!(
            out,
            "f{i} formula depth={} [{}] omega={}",
            rc.depth_of(i),
            gates.join(" "),
            f.omega()
        );
        for (j, p) in f.products.iter().enumerate() {
            let mut children: Vec<String> = p.lits.iter().map(lit).collect();
            children.extend(p.mem.map(|m| format!("f{m}")));
            let _ = writeln!(
                out,
                "f{i}.p{j} times [{}] omega={}",
                children.join(" "),
                p.cost()
            );
        }
    }
    for (v, name) in rc.variables().iter().enumerate() {
        let parents: Vec<String> = rc.holders(v).iter().map(|h| format!("f{h}")).collect();
        let _ = writeln!(out, "s:{name} signal [{}] omega=0", parents.join(" "));
    }
    out
}
