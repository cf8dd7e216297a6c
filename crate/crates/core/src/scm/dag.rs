//! Causal DAGs over string-named nodes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeSet = BTreeSet<String>;

/// Builds a [`NodeSet`] from string slices.
pub fn node_set<S: AsRef<str>>(names: &[S]) -> NodeSet {
    names.iter().map(|s| s.as_ref().to_string()).collect()
}

/// A directed acyclic graph. Equality ignores declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalDag {
    nodes: NodeSet,
    edges: BTreeSet<(String, String)>,
}

impl CausalDag {
    pub fn new<N, P, C>(nodes: &[N], edges: &[(P, C)]) -> Result<Self>
    where
        N: AsRef<str>,
        P: AsRef<str>,
        C: AsRef<str>,
    {
        let mut node_set = NodeSet::new();
        for n in nodes {
            if !node_set.insert(n.as_ref().to_string()) {
                return Err(Error::DuplicateNode(n.as_ref().to_string()));
            }
        }
        let mut edge_set = BTreeSet::new();
        for (p, c) in edges {
            let (p, c) = (p.as_ref().to_string(), c.as_ref().to_string());
            for end in [&p, &c] {
                if !node_set.contains(end) {
                    return Err(Error::UnknownNode(end.clone()));
                }
            }
            if !edge_set.insert((p.clone(), c.clone())) {
                return Err(Error::DuplicateEdge(p, c));
            }
        }
        let dag = CausalDag {
            nodes: node_set,
            edges: edge_set,
        };
        dag.topological_order()?;
        Ok(dag)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(p, c)| (p.as_str(), c.as_str()))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, node: &str) -> bool {
        self.nodes.contains(node)
    }

    pub fn has_edge(&self, parent: &str, child: &str) -> bool {
        self.edges
            .contains(&(parent.to_string(), child.to_string()))
    }

    pub(crate) fn check_node(&self, node: &str) -> Result<()> {
        if self.contains(node) {
            Ok(())
        } else {
            Err(Error::UnknownNode(node.to_string()))
        }
    }

    pub(crate) fn check_set(&self, set: &NodeSet) -> Result<()> {
        set.iter().try_for_each(|n| self.check_node(n))
    }

    /// Parents in lexicographic order.
    pub fn parents(&self, node: &str) -> Vec<&str> {
        self.edges()
            .filter(|(_, c)| *c == node)
            .map(|(p, _)| p)
            .collect()
    }

    pub fn children(&self, node: &str) -> Vec<&str> {
        self.edges()
            .filter(|(p, _)| *p == node)
            .map(|(_, c)| c)
            .collect()
    }

    /// Returns a copy with one more edge, failing if it would close a cycle.
    pub fn with_edge(&self, parent: &str, child: &str) -> Result<Self> {
        let nodes: Vec<&str> = self.nodes().collect();
        let mut edges: Vec<(&str, &str)> = self.edges().collect();
        edges.push((parent, child));
        CausalDag::new(&nodes, &edges)
    }

    /// Returns a copy without `node` and its incident edges.
    pub fn without_node(&self, node: &str) -> Result<Self> {
        self.check_node(node)?;
        let nodes: Vec<&str> = self.nodes().filter(|n| *n != node).collect();
        let edges: Vec<(&str, &str)> = self
            .edges()
            .filter(|(p, c)| *p != node && *c != node)
            .collect();
        CausalDag::new(&nodes, &edges)
    }

    /// Nodes reachable from `start` along directed edges, excluding `start`.
    pub fn descendants(&self, start: &str) -> NodeSet {
        self.reach(start, |n| self.children(n))
    }

    /// Nodes with a directed path into `start`, excluding `start`.
    pub fn ancestors(&self, start: &str) -> NodeSet {
        self.reach(start, |n| self.parents(n))
    }

    fn reach<'a, F>(&'a self, start: &str, next: F) -> NodeSet
    where
        F: Fn(&str) -> Vec<&'a str>,
    {
        let mut seen = NodeSet::new();
        let mut queue: VecDeque<String> = VecDeque::from([start.to_string()]);
        while let Some(n) = queue.pop_front() {
            for m in next(&n) {
                if seen.insert(m.to_string()) {
                    queue.push_back(m.to_string());
                }
            }
        }
        seen
    }

    /// Kahn's algorithm; ties resolved lexicographically.
    pub fn topological_order(&self) -> Result<Vec<String>> {
        let mut indegree: BTreeMap<&str, usize> = self.nodes().map(|n| (n, 0)).collect();
        for (_, c) in self.edges() {
            *indegree.get_mut(c).expect("validated endpoint") += 1;
        }
        let mut ready: BTreeSet<&str> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(n, _)| *n)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_first() {
            order.push(n.to_string());
            for c in self.children(n) {
                let d = indegree.get_mut(c).expect("validated endpoint");
                *d -= 1;
                if *d == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() != self.nodes.len() {
            let stuck = indegree
                .iter()
                .find(|(_, d)| **d > 0)
                .map(|(n, _)| n.to_string())
                .unwrap_or_default();
            return Err(Error::Cycle(stuck));
        }
        Ok(order)
    }

    /// Graph surgery: drops every edge into `remove_incoming` and every edge
    /// out of `remove_outgoing`.
    pub fn mutilate(&self, remove_incoming: &NodeSet, remove_outgoing: &NodeSet) -> Result<Self> {
        self.check_set(remove_incoming)?;
        self.check_set(remove_outgoing)?;
        let edges = self
            .edges
            .iter()
            .filter(|(p, c)| !remove_incoming.contains(c) && !remove_outgoing.contains(p))
            .cloned()
            .collect();
        Ok(CausalDag {
            nodes: self.nodes.clone(),
            edges,
        })
    }

    /// Plain-text dump: one `parent -> child` line per edge in lexicographic
    /// order, then any isolated node on its own line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (p, c) in self.edges() {
            out.push_str(&format!("{p} -> {c}\n"));
        }
        for n in self.nodes() {
            if self.edges().all(|(p, c)| p != n && c != n) {
                out.push_str(n);
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut nodes = NodeSet::new();
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once("->") {
                Some((p, c)) => {
                    let (p, c) = (p.trim(), c.trim());
                    if p.is_empty() || c.is_empty() || c.contains(char::is_whitespace) {
                        return Err(Error::Parse {
                            line: i + 1,
                            message: format!("malformed edge `{line}`"),
                        });
                    }
                    nodes.insert(p.to_string());
                    nodes.insert(c.to_string());
                    edges.push((p.to_string(), c.to_string()));
                }
                None => {
                    nodes.insert(line.to_string());
                }
            }
        }
        let nodes: Vec<String> = nodes.into_iter().collect();
        CausalDag::new(&nodes, &edges)
    }
}

impl fmt::Display for CausalDag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// The FSED graph: E→T, E→C, T→C, T→S, C→S, S→Y, Q→Y.
pub fn fsed_graph() -> CausalDag {
    CausalDag::new(
        &["E", "T", "C", "S", "Y", "Q"],
        &[
            ("E", "T"),
            ("E", "C"),
            ("T", "C"),
            ("T", "S"),
            ("C", "S"),
            ("S", "Y"),
            ("Q", "Y"),
        ],
    )
    .expect("static graph is a DAG")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> CausalDag {
        CausalDag::new(&["X", "Z", "Y"], &[("X", "Z"), ("Z", "Y")]).unwrap()
    }

    #[test]
    fn fsed_graph_shape() {
        let g = fsed_graph();
        assert_eq!(g.node_count(), 6);
        assert_eq!(g.edge_count(), 7);
        assert_eq!(g.parents("Y"), vec!["Q", "S"]);
    }

    #[test]
    fn intervention_on_context_cuts_its_parents() {
        let g = fsed_graph();
        let cut = g.mutilate(&node_set(&["C"]), &NodeSet::new()).unwrap();
        assert!(cut.parents("C").is_empty());
        let expected = CausalDag::new(
            &["E", "T", "C", "S", "Y", "Q"],
            &[("E", "T"), ("T", "S"), ("C", "S"), ("S", "Y"), ("Q", "Y")],
        )
        .unwrap();
        assert_eq!(cut, expected);
        // input untouched
        assert_eq!(g.edge_count(), 7);
    }

    #[test]
    fn empty_mutilation_is_identity() {
        let g = fsed_graph();
        assert_eq!(g.mutilate(&NodeSet::new(), &NodeSet::new()).unwrap(), g);
    }

    #[test]
    fn remove_outgoing_on_chain() {
        let g = chain().mutilate(&NodeSet::new(), &node_set(&["Z"])).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![("X", "Z")]);
    }

    #[test]
    fn mutilate_unknown_node() {
        let err = chain().mutilate(&node_set(&["W"]), &NodeSet::new());
        assert_eq!(err, Err(Error::UnknownNode("W".into())));
    }

    #[test]
    fn rejects_cycles_and_duplicates() {
        assert!(matches!(
            CausalDag::new(&["A", "B"], &[("A", "B"), ("B", "A")]),
            Err(Error::Cycle(_))
        ));
        assert!(matches!(
            CausalDag::new(&["A", "B"], &[("A", "B"), ("A", "B")]),
            Err(Error::DuplicateEdge(..))
        ));
        assert!(matches!(
            CausalDag::new(&["A"], &[("A", "B")]),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn equality_ignores_declaration_order() {
        let a = CausalDag::new(&["A", "B", "C"], &[("A", "B"), ("B", "C")]).unwrap();
        let b = CausalDag::new(&["C", "A", "B"], &[("B", "C"), ("A", "B")]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn text_dump_round_trips() {
        let g = fsed_graph().with_edge("T", "Y").unwrap();
        let text = g.to_text();
        assert!(text.starts_with("C -> S\n"));
        assert_eq!(CausalDag::from_text(&text).unwrap(), g);

        let iso = CausalDag::new(&["A", "B", "Z"], &[("A", "B")]).unwrap();
        assert_eq!(iso.to_text(), "A -> B\nZ\n");
        assert_eq!(CausalDag::from_text(&iso.to_text()).unwrap(), iso);
    }

    #[test]
    fn ancestry() {
        let g = fsed_graph();
        assert_eq!(g.ancestors("S"), node_set(&["C", "E", "T"]));
        assert_eq!(g.descendants("T"), node_set(&["C", "S", "Y"]));
        assert_eq!(g.topological_order().unwrap()[0], "E");
    }
}
