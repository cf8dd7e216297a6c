//! Mechanical check of the five-step backdoor derivation on a DAG with
//! nodes E, T, C, S, Y, Q.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::dag::{node_set, CausalDag, NodeSet};
use super::dsep::{rule_condition_holds, rule_graph, DoRule};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    TotalProbability,
    ConditionalProbability,
    Rule1,
    Rule2,
    Rule3,
}

impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepRule::TotalProbability => "total-probability",
            StepRule::ConditionalProbability => "conditional-probability",
            StepRule::Rule1 => "rule1",
            StepRule::Rule2 => "rule2",
            StepRule::Rule3 => "rule3",
        })
    }
}

/// One d-separation side condition `Y ⫫ Z | T_do ∪ W` in a mutilated graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphCondition {
    pub rewrite: String,
    pub y: NodeSet,
    pub t_do: NodeSet,
    pub z: NodeSet,
    pub w: NodeSet,
    pub removed_incoming: NodeSet,
    pub removed_outgoing: NodeSet,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofStep {
    pub index: usize,
    pub rule: StepRule,
    pub conditions: Vec<GraphCondition>,
    pub verdict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofStepReport {
    pub steps: Vec<ProofStep>,
}

impl ProofStepReport {
    pub fn all_hold(&self) -> bool {
        self.steps.iter().all(|s| s.verdict)
    }

    pub fn verified_count(&self) -> usize {
        self.steps.iter().filter(|s| s.verdict).count()
    }
}

fn fmt_set(s: &NodeSet) -> String {
    if s.is_empty() {
        "∅".into()
    } else {
        s.iter().cloned().collect::<Vec<_>>().join(",")
    }
}

impl fmt::Display for ProofStepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            let mark = if step.verdict { "ok" } else { "FAIL" };
            writeln!(f, "step {} [{}] {}", step.index, step.rule, mark)?;
            for c in &step.conditions {
                writeln!(
                    f,
                    "    {}: {{{}}} ⫫ {{{}}} | {{{}}} in G[in-cut: {}; out-cut: {}] -> {}",
                    c.rewrite,
                    fmt_set(&c.y),
                    fmt_set(&c.z),
                    fmt_set(&c.t_do.union(&c.w).cloned().collect()),
                    fmt_set(&c.removed_incoming),
                    fmt_set(&c.removed_outgoing),
                    c.holds
                )?;
            }
        }
        write!(f, "{}/{} steps verified", self.verified_count(), self.steps.len())
    }
}

fn condition(dag: &CausalDag, rule: DoRule, rewrite: &str, y: &[&str], t_do: &[&str], z: &[&str], w: &[&str]) -> Result<GraphCondition> {
    let (y, t_do, z, w) = (node_set(y), node_set(t_do), node_set(z), node_set(w));
    let (_, removed_incoming, removed_outgoing) = rule_graph(dag, rule, &t_do, &z, &w)?;
    let holds = rule_condition_holds(dag, rule.id(), &y, &t_do, &z, &w)?;
    Ok(GraphCondition {
        rewrite: rewrite.to_string(),
        y,
        t_do,
        z,
        w,
        removed_incoming,
        removed_outgoing,
        holds,
    })
}

fn step(index: usize, rule: StepRule, conditions: Vec<GraphCondition>) -> ProofStep {
    let verdict = conditions.iter().all(|c| c.holds);
    ProofStep {
        index,
        rule,
        conditions,
        verdict,
    }
}

/// Checks every graphical condition the derivation of
/// `P(Y|do(C),e,q) = Σ_t Σ_s P(Y|s,q) P(s|C,t) P(t|e)` relies on.
pub fn verify_backdoor_proof(dag: &CausalDag) -> Result<ProofStepReport> {
    for n in ["E", "T", "C", "S", "Y", "Q"] {
        if !dag.contains(n) {
            return Err(Error::MissingNode(n.to_string()));
        }
    }
    let steps = vec![
        step(1, StepRule::TotalProbability, vec![]),
        step(2, StepRule::ConditionalProbability, vec![]),
        step(
            3,
            StepRule::Rule3,
            vec![
                condition(dag, DoRule::Three, "P(Y|do(C),e,t,s,q) = P(Y|e,t,s,q)", &["Y"], &[], &["C"], &["E", "T", "S", "Q"])?,
                condition(dag, DoRule::Three, "P(t|do(C),e,q) = P(t|e,q)", &["T"], &[], &["C"], &["E", "Q"])?,
            ],
        ),
        step(
            4,
            StepRule::Rule1,
            vec![
                condition(dag, DoRule::One, "P(Y|e,t,s,q) = P(Y|s,q)", &["Y"], &[], &["E", "T"], &["S", "Q"])?,
                condition(dag, DoRule::One, "P(s|do(C),e,t,q) = P(s|do(C),t)", &["S"], &["C"], &["E", "Q"], &["T"])?,
                condition(dag, DoRule::One, "P(t|e,q) = P(t|e)", &["T"], &[], &["Q"], &["E"])?,
            ],
        ),
        step(
            5,
            StepRule::Rule2,
            vec![condition(dag, DoRule::Two, "P(s|do(C),t) = P(s|C,t)", &["S"], &[], &["C"], &["T"])?],
        ),
    ];
    Ok(ProofStepReport { steps })
}
