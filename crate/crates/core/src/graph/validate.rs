use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::{Graph, GraphError, PortRef};

/// Findings of graph validation, collected exhaustively.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub unbound_inputs: Vec<PortRef>,
    /// Each cycle as the instance ids along it; the first id closes the loop.
    pub cycles: Vec<Vec<String>>,
    pub unreachable_sinks: Vec<PortRef>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.unbound_inputs.is_empty()
            && self.cycles.is_empty()
            && self.unreachable_sinks.is_empty()
    }

    pub fn len(&self) -> usize {
        self.unbound_inputs.len() + self.cycles.len() + self.unreachable_sinks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_clean()
    }

    /// One line per finding.
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for p in &self.unbound_inputs {
            out.push(format!("UNBOUND_INPUT {p}"));
        }
        for c in &self.cycles {
            out.push(format!("CYCLE {} -> {}", c.join(" -> "), c[0]));
        }
        for s in &self.unreachable_sinks {
            out.push(format!("UNREACHABLE_SINK {s}"));
        }
        out
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.lines() {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}

impl Graph {
    fn instance_edges(&self) -> Vec<(&str, &str)> {
        let mut edges: Vec<(&str, &str)> = self
            .bindings
            .iter()
            .map(|b| (b.from.producer.instance.as_str(), b.to.instance.as_str()))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Check completeness, acyclicity and sink reachability. The graph is
    /// marked validated iff the report is clean.
    pub fn validate(&mut self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for inst in self.instances.values() {
            for p in &inst.inputs {
                let r = PortRef::new(&inst.id, &p.name);
                if !self.bindings.iter().any(|b| b.to == r) {
                    report.unbound_inputs.push(r);
                }
            }
        }

        let ids: Vec<&str> = self.instances.keys().map(String::as_str).collect();
        let edges = self.instance_edges();
        report.cycles = find_cycles(&ids, &edges);

        let mut reached: BTreeSet<&str> = self
            .instances
            .values()
            .filter(|i| i.is_data_layer())
            .map(|i| i.id.as_str())
            .collect();
        let mut queue: VecDeque<&str> = reached.iter().copied().collect();
        while let Some(n) = queue.pop_front() {
            for &(a, b) in &edges {
                if a == n && reached.insert(b) {
                    queue.push_back(b);
                }
            }
        }
        report.unreachable_sinks = self
            .sinks
            .iter()
            .filter(|s| !reached.contains(s.instance.as_str()))
            .cloned()
            .collect();

        self.validated = report.is_clean();
        report
    }

    /// Instance ids with every producer before its consumers; ready ties go
    /// to the lexicographically smallest id.
    pub fn topo_order(&self) -> Result<Vec<String>, GraphError> {
        if !self.validated {
            return Err(GraphError::NotValidated);
        }
        let ids: Vec<&str> = self.instances.keys().map(String::as_str).collect();
        Ok(kahn(&ids, &self.instance_edges())
            .expect("validated graphs are acyclic")
            .into_iter()
            .map(str::to_string)
            .collect())
    }
}

fn kahn<'a>(ids: &[&'a str], edges: &[(&'a str, &'a str)]) -> Option<Vec<&'a str>> {
    let mut indeg: HashMap<&str, usize> = ids.iter().map(|&i| (i, 0)).collect();
    for &(_, b) in edges {
        *indeg.get_mut(b)? += 1;
    }
    let mut ready: BTreeSet<&str> = ids.iter().copied().filter(|i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(ids.len());
    while let Some(n) = ready.pop_first() {
        order.push(n);
        for &(a, b) in edges {
            if a == n {
                let d = indeg.get_mut(b).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(b);
                }
            }
        }
    }
    (order.len() == ids.len()).then_some(order)
}

pub(crate) fn has_cycle(ids: &[&str], edges: &[(&str, &str)]) -> bool {
    kahn(ids, edges).is_none()
}

/// One representative cycle per non-trivial strongly connected component:
/// the shortest loop through its smallest id.
fn find_cycles(ids: &[&str], edges: &[(&str, &str)]) -> Vec<Vec<String>> {
    let mut g: DiGraph<&str, ()> = DiGraph::new();
    let idx: HashMap<&str, NodeIndex> = ids.iter().map(|&i| (i, g.add_node(i))).collect();
    for &(a, b) in edges {
        g.add_edge(idx[a], idx[b], ());
    }
    let mut cycles = Vec::new();
    for scc in tarjan_scc(&g) {
        let members: BTreeSet<&str> = scc.iter().map(|&n| g[n]).collect();
        let start = *members.first().unwrap();
        let self_loop = edges.contains(&(start, start));
        if members.len() == 1 && !self_loop {
            continue;
        }
        if self_loop {
            cycles.push(vec![start.to_string()]);
            continue;
        }
        // BFS inside the component back to `start`.
        let mut prev: HashMap<&str, &str> = HashMap::new();
        let mut queue = VecDeque::from([start]);
        'bfs: while let Some(n) = queue.pop_front() {
            let mut next: Vec<&str> = edges
                .iter()
                .filter(|&&(a, b)| a == n && members.contains(b))
                .map(|&(_, b)| b)
                .collect();
            next.sort_unstable();
            for b in next {
                if b == start {
                    prev.insert(start, n);
                    break 'bfs;
                }
                if !prev.contains_key(b) {
                    prev.insert(b, n);
                    queue.push_back(b);
                }
            }
        }
        let mut path = vec![];
        let mut cur = prev[start];
        while cur != start {
            path.push(cur.to_string());
            cur = prev[cur];
        }
        path.push(start.to_string());
        path.reverse();
        cycles.push(path);
    }
    cycles.sort();
    cycles
}
