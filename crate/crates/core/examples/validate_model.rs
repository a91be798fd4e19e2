// Typology rules: re-classifying the RFQ process breaks it in predictable ways.

use plmflow::case_study::rfq_model;
use plmflow::model::{validate_process_model, Measurability, Rule, TimeAxis};

fn main() {
    let model = rfq_model();
    assert!(validate_process_model(&model).is_empty());
    println!("{} v{} as shipped: valid", model.name, model.version);

    // A cyclical process needs a lifecycle that returns to its initial state,
    // and a non-measurable one may not carry threshold objectives.
    let mut odd = model.clone();
    odd.typology.time = TimeAxis::Cyclical;
    odd.typology.measurability = Measurability::NotMeasurable;
    let report = validate_process_model(&odd);
    for v in &report {
        println!("  {v}");
    }
    let rules: Vec<Rule> = report.iter().map(|v| v.rule()).collect();
    assert!(rules.contains(&Rule::CyclicalNeedsCycle));
    assert!(rules.contains(&Rule::NotMeasurableForbidsThreshold));

    // An activity whose edge is not in the lifecycle.
    let mut shortcut = model;
    shortcut.activities[0].transition.from = "Registered".into();
    shortcut.activities[0].transition.to = plmflow::model::TransitionTarget::State("Won".into());
    for v in validate_process_model(&shortcut) {
        println!("  {v}");
        assert_eq!(v.rule(), Rule::LegalTransition);
    }
}
