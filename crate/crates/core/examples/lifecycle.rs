// Defining a lifecycle and seeing what the checker rejects.

use plmflow::model::{LifecycleDef, LifecycleError};

fn main() {
    let offer = LifecycleDef::define(
        "offer_lifecycle",
        ["Created", "Assigned", "Realized", "Validated", "Sent"],
        "Created",
        ["Sent"],
        [("Created", "Assigned"), ("Assigned", "Realized"), ("Realized", "Validated"), ("Validated", "Sent")],
    )
    .expect("a linear lifecycle is valid");

    for state in offer.states() {
        let next: Vec<&str> = offer.successors(state).collect();
        println!("{state:>10} -> {}", if next.is_empty() { "(terminal)".to_string() } else { next.join(", ") });
    }
    assert!(offer.allows("Realized", "Validated"));
    assert!(!offer.allows("Created", "Sent"));

    // Sent has an outgoing edge although it is terminal.
    let err = LifecycleDef::define("bad", ["A", "B"], "A", ["B"], [("A", "B"), ("B", "A")]).unwrap_err();
    println!("rejected: {err}");
    assert!(matches!(err, LifecycleError::TerminalOutflow { .. }));

    // C can never be reached from A.
    let err = LifecycleDef::define("island", ["A", "B", "C"], "A", ["B"], [("A", "B")]).unwrap_err();
    println!("rejected: {err}");
    assert!(matches!(err, LifecycleError::UnreachableState(_)));
}
