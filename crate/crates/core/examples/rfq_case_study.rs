// One request for quotation from registration to the customer's decision,
// run in memory.

use plmflow::case_study::*;
use plmflow::engine::{Attributes, Engine};
use plmflow::time::MS_PER_HOUR;
use plmflow::Timestamp;
use serde_json::json;

fn attrs(v: serde_json::Value) -> Attributes {
    serde_json::from_value(v).unwrap()
}

fn main() {
    let mut engine = Engine::new();
    engine.publish_model(rfq_model()).unwrap();
    engine.install_indicators(rfq_indicators().defs().to_vec()).unwrap();

    let t0 = Timestamp::parse("2024-03-04T08:00:00Z").unwrap();
    let at = |h: i64| t0.plus_millis(h * MS_PER_HOUR);
    let view = engine
        .instantiate("rfq", None, attrs(json!({"rfq_number": "RFQ-7", "customer": "Aerodyn"})), Some("alice"), at(0))
        .unwrap();
    let id = view.instance.id;

    let steps: [(&str, &str, serde_json::Value); 7] = [
        (REGISTRATION, "alice", json!({"part_number": "PN-1", "quantity": 250})),
        (ANALYSIS, "bob", json!({"feasibility": "feasible with new tooling"})),
        (PM_AFFECTATION, "carol", json!({"project_manager": "dave"})),
        (REALIZATION, "dave", json!({"unit_price": 14.2, "lead_time_days": 30})),
        (VALIDATION, "erin", json!({})),
        (SENDING, "alice", json!({"sent_on": "2024-03-06"})),
        (CUSTOMER_DECISION, "alice", json!({"outcome": "won"})),
    ];
    for (i, (activity, who, params)) in steps.into_iter().enumerate() {
        let actor = engine.actor(who);
        engine.perform_activity(&id, activity, &actor, attrs(params), at(4 * (i as i64 + 1))).unwrap();
    }

    for e in engine.events() {
        println!(
            "{:>2} {} {:<19} {:<42} {} -> {}",
            e.seq,
            e.at,
            e.kind.as_str(),
            e.activity.as_deref().unwrap_or(""),
            e.from_state.as_deref().unwrap_or("-"),
            e.to_state.as_deref().unwrap_or("-"),
        );
    }
    let view = engine.instance_view(&id).unwrap();
    for entity in &view.entities {
        println!("{} {} is {}", entity.entity_type, entity.id, entity.state);
    }
    assert!(!view.instance.is_running());
}
