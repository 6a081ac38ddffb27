use std::collections::BTreeMap;

use super::graph::Dag;
use super::{FlatGraph, FlatKind, FlatNode};

/// Makes concurrency explicit.
///
/// The precedence order (control plus data) is reduced to its transitive
/// reduction. Explicit gateways left with a single branch are spliced out.
/// Then a `fork#n` is inserted after every non-fork node with two or more
/// immediate successors and a `join#n` before every non-join node with two
/// or more immediate predecessors. Gateways are numbered in
/// topological-lexicographic order of the node they attach to. The
/// resulting control edges encode the whole precedence order, data
/// dependencies included.
pub fn synthesize_concurrency(flat: FlatGraph) -> FlatGraph {
    let mut dag = flat.precedence().transitive_reduction();
    let kind_of = |dag: &Dag, i: usize| flat.nodes[&dag.names[i]].kind;

    loop {
        let degenerate = (0..dag.len()).find(|&i| match kind_of(&dag, i) {
            FlatKind::Fork => dag.succ[i].len() < 2,
            FlatKind::Join => dag.pred[i].len() < 2,
            FlatKind::Action => false,
        });
        let Some(g) = degenerate else { break };
        let preds: Vec<usize> = dag.pred[g].iter().copied().collect();
        let succs: Vec<usize> = dag.succ[g].iter().copied().collect();
        let mut next = Dag::new(dag.names.iter().enumerate().filter(|(i, _)| *i != g).map(|(_, n)| n.clone()));
        for u in 0..dag.len() {
            for &v in &dag.succ[u] {
                if u != g && v != g {
                    next.add_edge(&dag.names[u], &dag.names[v]);
                }
            }
        }
        for &p in &preds {
            for &s in &succs {
                next.add_edge(&dag.names[p], &dag.names[s]);
            }
        }
        dag = next.transitive_reduction();
    }

    let order = dag.topo_lex().expect("precedence of a validated model is acyclic");
    let mut fork_after: BTreeMap<usize, String> = BTreeMap::new();
    let mut join_before: BTreeMap<usize, String> = BTreeMap::new();
    for &u in &order {
        let kind = kind_of(&dag, u);
        if kind != FlatKind::Fork && dag.succ[u].len() >= 2 {
            fork_after.insert(u, format!("fork#{}", fork_after.len() + 1));
        }
        if kind != FlatKind::Join && dag.pred[u].len() >= 2 {
            join_before.insert(u, format!("join#{}", join_before.len() + 1));
        }
    }

    let mut out = FlatGraph {
        name: flat.name.clone(),
        nodes: BTreeMap::new(),
        control: Default::default(),
        carriers: flat.carriers.clone(),
        flows: flat.flows.clone(),
    };
    for name in &dag.names {
        out.nodes.insert(name.clone(), flat.nodes[name].clone());
    }
    for (ids, kind) in [(&fork_after, FlatKind::Fork), (&join_before, FlatKind::Join)] {
        for id in ids.values() {
            out.nodes.insert(
                id.clone(),
                FlatNode { id: id.clone(), kind, implementation: None, pins: vec![], synthesized: true },
            );
        }
    }
    for (u, f) in &fork_after {
        out.control.insert((dag.names[*u].clone(), f.clone()));
    }
    for (v, j) in &join_before {
        out.control.insert((j.clone(), dag.names[*v].clone()));
    }
    for u in 0..dag.len() {
        for &v in &dag.succ[u] {
            let src = fork_after.get(&u).unwrap_or(&dag.names[u]).clone();
            let dst = join_before.get(&v).unwrap_or(&dag.names[v]).clone();
            out.control.insert((src, dst));
        }
    }
    out
}
