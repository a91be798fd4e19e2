use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

/// A directed edge between two lifecycle states.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub to: String,
}

impl Transition {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Transition { from: from.into(), to: to.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LifecycleError {
    #[error("lifecycle declares no states")]
    EmptyStates,
    #[error("state {0:?} declared more than once")]
    DuplicateState(String),
    #[error("initial state {0:?} is not a declared state")]
    MissingInitial(String),
    #[error("terminal state {0:?} is not a declared state")]
    UnknownTerminal(String),
    #[error("transition {from:?} -> {to:?} has an endpoint outside the declared states")]
    DanglingTransition { from: String, to: String },
    #[error("transition {from:?} -> {to:?} leaves terminal state {from:?}")]
    TerminalOutflow { from: String, to: String },
    #[error("state {0:?} is not reachable from the initial state")]
    UnreachableState(String),
}

/// Raw, unchecked lifecycle shape as it appears in model documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecycleSpec {
    pub name: String,
    pub states: Vec<String>,
    pub initial: String,
    #[serde(default)]
    pub terminal: Vec<String>,
    #[serde(default)]
    pub transitions: Vec<Transition>,
}

/// A validated state graph. Construction goes through [`LifecycleDef::define`],
/// so every value of this type satisfies the reachability and terminal rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LifecycleSpec", into = "LifecycleSpec")]
pub struct LifecycleDef {
    name: String,
    states: Vec<String>,
    initial: String,
    terminal: Vec<String>,
    transitions: Vec<Transition>,
}

impl LifecycleDef {
    pub fn define<S: Into<String>>(
        name: impl Into<String>,
        states: impl IntoIterator<Item = S>,
        initial: impl Into<String>,
        terminal: impl IntoIterator<Item = S>,
        transitions: impl IntoIterator<Item = (S, S)>,
    ) -> Result<Self, LifecycleError> {
        LifecycleDef::try_from(LifecycleSpec {
            name: name.into(),
            states: states.into_iter().map(Into::into).collect(),
            initial: initial.into(),
            terminal: terminal.into_iter().map(Into::into).collect(),
            transitions: transitions.into_iter().map(|(f, t)| Transition::new(f, t)).collect(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn initial(&self) -> &str {
        &self.initial
    }

    pub fn terminal(&self) -> &[String] {
        &self.terminal
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn has_state(&self, state: &str) -> bool {
        self.states.iter().any(|s| s == state)
    }

    pub fn is_terminal(&self, state: &str) -> bool {
        self.terminal.iter().any(|s| s == state)
    }

    pub fn allows(&self, from: &str, to: &str) -> bool {
        self.transitions.iter().any(|t| t.from == from && t.to == to)
    }

    pub fn successors<'a>(&'a self, state: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.transitions.iter().filter(move |t| t.from == state).map(|t| t.to.as_str())
    }

    /// True when some directed cycle passes through the initial state.
    pub fn cycles_through_initial(&self) -> bool {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<&str> = self.successors(&self.initial).collect();
        while let Some(state) = queue.pop_front() {
            if state == self.initial {
                return true;
            }
            if seen.insert(state) {
                queue.extend(self.successors(state));
            }
        }
        false
    }

    /// Copy of this lifecycle with every terminal marker removed.
    pub fn without_terminals(&self) -> LifecycleDef {
        LifecycleDef { terminal: Vec::new(), ..self.clone() }
    }
}

impl TryFrom<LifecycleSpec> for LifecycleDef {
    type Error = LifecycleError;

    fn try_from(spec: LifecycleSpec) -> Result<Self, Self::Error> {
        if spec.states.is_empty() {
            return Err(LifecycleError::EmptyStates);
        }
        let mut declared = BTreeSet::new();
        for state in &spec.states {
            if !declared.insert(state.as_str()) {
                return Err(LifecycleError::DuplicateState(state.clone()));
            }
        }
        if !declared.contains(spec.initial.as_str()) {
            return Err(LifecycleError::MissingInitial(spec.initial));
        }
        if let Some(t) = spec.terminal.iter().find(|t| !declared.contains(t.as_str())) {
            return Err(LifecycleError::UnknownTerminal(t.clone()));
        }
        for t in &spec.transitions {
            if !declared.contains(t.from.as_str()) || !declared.contains(t.to.as_str()) {
                return Err(LifecycleError::DanglingTransition { from: t.from.clone(), to: t.to.clone() });
            }
            if spec.terminal.contains(&t.from) {
                return Err(LifecycleError::TerminalOutflow { from: t.from.clone(), to: t.to.clone() });
            }
        }

        let mut reached = BTreeSet::from([spec.initial.as_str()]);
        let mut queue = VecDeque::from([spec.initial.as_str()]);
        while let Some(state) = queue.pop_front() {
            for t in spec.transitions.iter().filter(|t| t.from == state) {
                if reached.insert(t.to.as_str()) {
                    queue.push_back(t.to.as_str());
                }
            }
        }
        if let Some(s) = spec.states.iter().find(|s| !reached.contains(s.as_str())) {
            return Err(LifecycleError::UnreachableState(s.clone()));
        }

        let mut transitions = spec.transitions;
        let mut unique = BTreeSet::new();
        transitions.retain(|t| unique.insert(t.clone()));
        Ok(LifecycleDef {
            name: spec.name,
            states: spec.states,
            initial: spec.initial,
            terminal: spec.terminal,
            transitions,
        })
    }
}

impl From<LifecycleDef> for LifecycleSpec {
    fn from(def: LifecycleDef) -> Self {
        LifecycleSpec {
            name: def.name,
            states: def.states,
            initial: def.initial,
            terminal: def.terminal,
            transitions: def.transitions,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rfq() -> Result<LifecycleDef, LifecycleError> {
        LifecycleDef::define(
            "rfq_lifecycle",
            ["Draft", "Registered", "UnderAnalysis", "Won", "Lost", "Declined"],
            "Draft",
            ["Won", "Lost", "Declined"],
            [
                ("Draft", "Registered"),
                ("Registered", "UnderAnalysis"),
                ("UnderAnalysis", "Won"),
                ("UnderAnalysis", "Lost"),
                ("UnderAnalysis", "Declined"),
            ],
        )
    }

    #[test]
    fn single_state_lifecycle_is_valid() {
        let lc = LifecycleDef::define("one", ["A"], "A", ["A"], Vec::<(&str, &str)>::new()).unwrap();
        assert!(lc.is_terminal("A"));
        assert!(lc.transitions().is_empty());
    }

    #[test]
    fn unreachable_state_is_named() {
        let err = LifecycleDef::define("two", ["A", "B"], "A", [], Vec::<(&str, &str)>::new()).unwrap_err();
        assert_eq!(err, LifecycleError::UnreachableState("B".into()));
    }

    #[test]
    fn rfq_lifecycle_is_valid() {
        let lc = rfq().unwrap();
        assert!(lc.allows("UnderAnalysis", "Declined"));
        assert!(!lc.allows("Draft", "Won"));
        assert!(!lc.cycles_through_initial());
    }

    #[test]
    fn error_cases() {
        assert_eq!(
            LifecycleDef::define("e", Vec::<&str>::new(), "A", [], []).unwrap_err(),
            LifecycleError::EmptyStates
        );
        assert_eq!(
            LifecycleDef::define("e", ["A"], "Z", [], []).unwrap_err(),
            LifecycleError::MissingInitial("Z".into())
        );
        assert_eq!(
            LifecycleDef::define("e", ["A"], "A", [], [("A", "Q")]).unwrap_err(),
            LifecycleError::DanglingTransition { from: "A".into(), to: "Q".into() }
        );
        assert_eq!(
            LifecycleDef::define("e", ["A", "B"], "A", ["B"], [("A", "B"), ("B", "A")]).unwrap_err(),
            LifecycleError::TerminalOutflow { from: "B".into(), to: "A".into() }
        );
        assert_eq!(
            LifecycleDef::define("e", ["A", "A"], "A", [], []).unwrap_err(),
            LifecycleError::DuplicateState("A".into())
        );
        assert_eq!(
            LifecycleDef::define("e", ["A"], "A", ["X"], []).unwrap_err(),
            LifecycleError::UnknownTerminal("X".into())
        );
    }

    #[test]
    fn detects_cycle_through_initial() {
        let lc = LifecycleDef::define("c", ["Open", "Busy"], "Open", [], [("Open", "Busy"), ("Busy", "Open")]).unwrap();
        assert!(lc.cycles_through_initial());
        let lc = LifecycleDef::define(
            "c",
            ["Open", "Busy", "Idle"],
            "Open",
            [],
            [("Open", "Busy"), ("Busy", "Idle"), ("Idle", "Busy")],
        )
        .unwrap();
        assert!(!lc.cycles_through_initial());
    }

    #[test]
    fn json_round_trip_goes_through_validation() {
        let lc = rfq().unwrap();
        let json = serde_json::to_string(&lc).unwrap();
        assert_eq!(serde_json::from_str::<LifecycleDef>(&json).unwrap(), lc);
        let bad = r#"{"name":"x","states":["A","B"],"initial":"A"}"#;
        assert!(serde_json::from_str::<LifecycleDef>(bad).is_err());
    }

    fn reachable_by_search(lc: &LifecycleDef, target: &str) -> bool {
        let mut stack = vec![lc.initial().to_string()];
        let mut seen = BTreeSet::new();
        while let Some(s) = stack.pop() {
            if s == target {
                return true;
            }
            if seen.insert(s.clone()) {
                stack.extend(lc.successors(&s).map(str::to_string));
            }
        }
        false
    }

    proptest! {
        #[test]
        fn accepted_lifecycles_reach_every_state(
            n in 1usize..7,
            edges in proptest::collection::vec((0usize..7, 0usize..7), 0..14),
            terminal_mask in 0u8..128,
        ) {
            let states: Vec<String> = (0..n).map(|i| format!("S{i}")).collect();
            let edges: Vec<(String, String)> = edges
                .into_iter()
                .filter(|(a, b)| *a < n && *b < n)
                .map(|(a, b)| (states[a].clone(), states[b].clone()))
                .collect();
            let terminal: Vec<String> = (0..n)
                .filter(|i| terminal_mask & (1 << i) != 0)
                .map(|i| states[i].clone())
                .collect();
            if let Ok(lc) = LifecycleDef::define("p", states.clone(), "S0".to_string(), terminal.clone(), edges.clone()) {
                for s in &states {
                    prop_assert!(reachable_by_search(&lc, s));
                }
                for (from, _) in &edges {
                    prop_assert!(!terminal.contains(from));
                }
            }
        }
    }
}
