//! Causal DAGs, d-separation, do-calculus conditions and exact inference on
//! discrete structural causal models.

mod dag;
mod discrete;
mod dsep;
mod proof;

pub use dag::{fsed_graph, node_set, CausalDag, NodeSet};
pub use discrete::{
    assignment, backdoor_estimate, ci_brute_force, interventional_distribution, random_dag, random_fsed_scm,
    random_row, random_scm, Assignment, Cpt, DiscreteScm, Joint,
};
pub use dsep::{d_separated, reachable, rule_condition_holds, rule_graph, DoRule};
pub use proof::{verify_backdoor_proof, GraphCondition, ProofStep, ProofStepReport, StepRule};
