use crate::span::Span;
use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

/// Identifies one case-split assumption. Unique within a solver run.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct AssumptionId(pub u64);

impl fmt::Display for AssumptionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// Why a constraint (or failure) holds: a DAG over user-visible origins and
/// case-split assumptions. Joins share subtrees, so constraint propagation
/// is O(1) per step; queries deduplicate via pointer identity.
#[derive(Clone)]
pub struct Justification(Arc<JustNode>);

enum JustNode {
    /// Introduced directly by elaborating user input.
    Asserted { span: Option<Span>, what: String },
    /// Introduced by picking one alternative of a case split.
    Assumption(AssumptionId),
    Join(Justification, Justification),
}

impl Justification {
    pub fn asserted(span: Option<Span>, what: impl Into<String>) -> Justification {
        Justification(Arc::new(JustNode::Asserted {
            span,
            what: what.into(),
        }))
    }

    pub fn assumption(id: AssumptionId) -> Justification {
        Justification(Arc::new(JustNode::Assumption(id)))
    }

    pub fn join(a: &Justification, b: &Justification) -> Justification {
        if Arc::ptr_eq(&a.0, &b.0) {
            return a.clone();
        }
        Justification(Arc::new(JustNode::Join(a.clone(), b.clone())))
    }

    /// Join with every element of `rest`.
    pub fn join_all<'a>(mut self, rest: impl IntoIterator<Item = &'a Justification>) -> Justification {
        for j in rest {
            self = Justification::join(&self, j);
        }
        self
    }

    /// Does this justification depend on the given case-split assumption?
    pub fn depends_on(&self, id: AssumptionId) -> bool {
        let mut seen: HashSet<*const JustNode> = HashSet::new();
        let mut stack = vec![self];
        while let Some(j) = stack.pop() {
            if !seen.insert(Arc::as_ptr(&j.0)) {
                continue;
            }
            match &*j.0 {
                JustNode::Asserted { .. } => {}
                JustNode::Assumption(a) => {
                    if *a == id {
                        return true;
                    }
                }
                JustNode::Join(l, r) => {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        false
    }

    /// Every assumption id reachable in the DAG, deduplicated and ordered.
    pub fn assumptions(&self) -> BTreeSet<AssumptionId> {
        let mut out = BTreeSet::new();
        let mut seen: HashSet<*const JustNode> = HashSet::new();
        let mut stack = vec![self];
        while let Some(j) = stack.pop() {
            if !seen.insert(Arc::as_ptr(&j.0)) {
                continue;
            }
            match &*j.0 {
                JustNode::Asserted { .. } => {}
                JustNode::Assumption(a) => {
                    out.insert(*a);
                }
                JustNode::Join(l, r) => {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        out
    }

    /// User-visible origins, in source order (then by message), deduplicated.
    pub fn origins(&self) -> Vec<(Option<Span>, String)> {
        let mut out: Vec<(Option<Span>, String)> = Vec::new();
        let mut seen: HashSet<*const JustNode> = HashSet::new();
        let mut stack = vec![self];
        while let Some(j) = stack.pop() {
            if !seen.insert(Arc::as_ptr(&j.0)) {
                continue;
            }
            match &*j.0 {
                JustNode::Asserted { span, what } => {
                    let entry = (*span, what.clone());
                    if !out.contains(&entry) {
                        out.push(entry);
                    }
                }
                JustNode::Assumption(_) => {}
                JustNode::Join(l, r) => {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        out.sort_by_key(|(span, what)| (span.map(|s| (s.lo, s.hi)), what.clone()));
        out
    }
}

// Debug shows the assumption set — that is what matters when reading
// solver traces.
impl fmt::Debug for Justification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.assumptions().iter().map(|a| a.to_string()).collect();
        write!(f, "just[{}]", ids.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depends_on_finds_assumptions_through_joins() {
        let a1 = AssumptionId(1);
        let a2 = AssumptionId(2);
        let j0 = Justification::asserted(None, "input");
        let j1 = Justification::join(&j0, &Justification::assumption(a1));
        let j2 = Justification::join(&j1, &j1); // shared subtree
        assert!(j2.depends_on(a1));
        assert!(!j2.depends_on(a2));
        assert_eq!(j2.assumptions().into_iter().collect::<Vec<_>>(), vec![a1]);
    }

    #[test]
    fn shared_dag_traversal_terminates() {
        // Build a deliberately wide shared DAG; without pointer dedup this
        // walk would be exponential.
        let mut j = Justification::asserted(None, "base");
        for _ in 0..64 {
            j = Justification::join(&j, &j);
        }
        assert!(!j.depends_on(AssumptionId(99)));
        assert_eq!(j.origins().len(), 1);
    }
}
