//! Graph-based (qualitative) precomputations.

use super::{Dtmc, StateSet};

impl Dtmc {
    /// States that can reach `targets` along a path whose states before the
    /// target all lie in `within`.
    pub fn backward_reach(&self, within: &StateSet, targets: &StateSet) -> StateSet {
        let mut seen = targets.clone();
        let mut stack: Vec<usize> = targets.iter().collect();
        while let Some(t) = stack.pop() {
            for &(s, _) in self.predecessors(t) {
                if !seen.contains(s) && within.contains(s) {
                    seen.insert(s);
                    stack.push(s);
                }
            }
        }
        seen
    }

    /// States reachable from `sources` (including the sources).
    pub fn forward_reach(&self, sources: &StateSet) -> StateSet {
        let mut seen = sources.clone();
        let mut stack: Vec<usize> = sources.iter().collect();
        while let Some(s) = stack.pop() {
            for &(t, _) in self.successors(s) {
                if !seen.contains(t) {
                    seen.insert(t);
                    stack.push(t);
                }
            }
        }
        seen
    }

    /// Support of the initial distribution.
    pub fn initial_states(&self) -> StateSet {
        StateSet::from_fn(self.num_states(), |s| self.init()[s] > 0.0)
    }

    pub fn reachable_states(&self) -> StateSet {
        self.forward_reach(&self.initial_states())
    }

    /// States where `phi1 U phi2` holds with probability 0.
    pub fn prob0(&self, phi1: &StateSet, phi2: &StateSet) -> StateSet {
        self.backward_reach(phi1, phi2).complement()
    }

    /// States where `phi1 U phi2` holds with probability 1, given the
    /// probability-0 set `no`.
    pub fn prob1(&self, phi1: &StateSet, phi2: &StateSet, no: &StateSet) -> StateSet {
        self.backward_reach(&phi1.minus(phi2), no).complement()
    }

    /// Strongly connected components (Tarjan, iterative), in reverse
    /// topological order.
    pub fn sccs(&self) -> Vec<Vec<usize>> {
        const UNVISITED: usize = usize::MAX;
        let m = self.num_states();
        let mut index = vec![UNVISITED; m];
        let mut low = vec![0; m];
        let mut on_stack = vec![false; m];
        let mut stack = Vec::new();
        let mut components = Vec::new();
        let mut next_index = 0;
        // (state, position in its successor list)
        let mut call: Vec<(usize, usize)> = Vec::new();

        for root in 0..m {
            if index[root] != UNVISITED {
                continue;
            }
            call.push((root, 0));
            index[root] = next_index;
            low[root] = next_index;
            next_index += 1;
            stack.push(root);
            on_stack[root] = true;

            while let Some(&mut (v, ref mut pos)) = call.last_mut() {
                if let Some(&(w, _)) = self.successors(v).get(*pos) {
                    *pos += 1;
                    if index[w] == UNVISITED {
                        index[w] = next_index;
                        low[w] = next_index;
                        next_index += 1;
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
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    component.sort_unstable();
                    components.push(component);
                }
            }
        }
        components
    }

    /// Bottom SCCs: components with no transition leaving them. Sorted by
    /// smallest member.
    pub fn bsccs(&self) -> Vec<Vec<usize>> {
        let m = self.num_states();
        let mut out: Vec<Vec<usize>> = self
            .sccs()
            .into_iter()
            .filter(|c| {
                let members = StateSet::from_indices(m, c.iter().copied());
                c.iter()
                    .all(|&s| self.successors(s).iter().all(|&(t, _)| members.contains(t)))
            })
            .collect();
        out.sort_by_key(|c| c[0]);
        out
    }
}
