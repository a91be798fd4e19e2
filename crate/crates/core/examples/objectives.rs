// Monotone objectives stay reached once reached; revisable ones follow the
// metric. Non-measurable objectives are attested by hand.

use plmflow::case_study::rfq_model;
use plmflow::engine::{Engine, EngineError};
use plmflow::model::{Continuity, Objective, ObjectiveKind};
use plmflow::{InstanceId, Timestamp};

fn main() {
    let model = rfq_model();
    for o in &model.objectives {
        println!("{:<24} {:?} {:?}", o.name, o.kind(), o.continuity);
    }

    let mut engine = Engine::new();
    engine.publish_model(model).unwrap();
    let at = Timestamp::from_millis(0);
    engine.instantiate("rfq", None, Default::default(), None, at).unwrap();
    let id = InstanceId::sequential(1);

    // Threshold objectives cannot be attested.
    let err = engine.attest_objective("win_rate_target", &id, &engine.actor("erin"), at).unwrap_err();
    println!("attest win_rate_target: {err}");
    assert!(matches!(err, EngineError::KindMismatch(_)));

    let status = engine.attest_objective("offer_compliance_review", &id, &engine.actor("erin"), at).unwrap();
    println!("offer_compliance_review reached: {}", status.reached);
    assert!(status.reached);

    // Without an installed win_rate indicator the metric is undefined, so the
    // threshold is not reached.
    let status = engine.evaluate_objective("win_rate_target", &id, at).unwrap();
    println!("win_rate_target reached: {}", status.reached);

    let monotone = Objective::attestation("signed_off", Continuity::Monotone);
    assert_eq!(monotone.kind(), ObjectiveKind::Attestation);
    println!(
        "settle(previous=true, monotone, now=false) = {}",
        plmflow::engine::ObjectiveStatus::settle(true, Continuity::Monotone, false)
    );
}
