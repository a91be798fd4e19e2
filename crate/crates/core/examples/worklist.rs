// Worklists follow entity states and the role/expertise gates.

use plmflow::case_study::*;
use plmflow::engine::{Attributes, Engine};
use plmflow::model::Actor;
use plmflow::Timestamp;
use serde_json::json;

fn main() {
    let mut engine = Engine::new();
    engine.publish_model(rfq_model()).unwrap();
    let t = |m: i64| Timestamp::from_millis(1_700_000_000_000 + m * 60_000);

    let mut ids = Vec::new();
    for (n, customer) in ["Aerodyn", "Cimarel"].into_iter().enumerate() {
        let a: Attributes = serde_json::from_value(
            json!({"rfq_number": format!("RFQ-{n}"), "customer": customer, "part_number": "P", "quantity": 1}),
        )
        .unwrap();
        ids.push(engine.instantiate("rfq", None, a, None, t(n as i64)).unwrap().instance.id);
    }
    let alice = engine.actor("alice");
    engine.perform_activity(&ids[0], REGISTRATION, &alice, Attributes::new(), t(10)).unwrap();

    for who in ["alice", "bob", "frank", "mallory"] {
        let items = engine.worklist(&engine.actor(who), t(60));
        println!("{who}: {} item(s)", items.len());
        for item in &items {
            println!("    {} {} (since {})", item.instance, item.activity, item.enabled_since);
        }
    }
    assert_eq!(engine.worklist(&engine.actor("bob"), t(60)).len(), 1);
    assert!(engine.worklist(&Actor::new("mallory"), t(60)).is_empty());
}
