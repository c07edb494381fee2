//! Strongly connected components of a chain's transition graph.

use crate::dtmc::Dtmc;

/// Tarjan's algorithm, iterative. Components come out in reverse
/// topological order (sinks first).
pub fn strongly_connected_components(d: &Dtmc) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = d.n_states();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0;
    // (state, next successor offset)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut next)) = call.last_mut() {
            let succ = d.successors(v);
            if *next < succ.len() {
                let w = succ[*next].dst;
                *next += 1;
                if index[w] == UNVISITED {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps
}

/// Components with no edge leaving them.
pub fn bottom_sccs(d: &Dtmc) -> Vec<Vec<usize>> {
    let comps = strongly_connected_components(d);
    let mut comp_of = vec![0; d.n_states()];
    for (i, c) in comps.iter().enumerate() {
        for &s in c {
            comp_of[s] = i;
        }
    }
    comps
        .into_iter()
        .enumerate()
        .filter(|(i, c)| {
            c.iter()
                .all(|&s| d.successors(s).iter().all(|e| comp_of[e.dst] == *i))
        })
        .map(|(_, c)| c)
        .collect()
}
