// Stability governs what a new model version may do to running instances.

use plmflow::case_study::rfq_model;
use plmflow::engine::{Engine, EngineError};
use plmflow::model::Stability;
use plmflow::Timestamp;

fn main() {
    let at = Timestamp::from_millis(0);

    // Stable: no new version while an instance runs.
    let mut stable = rfq_model();
    stable.typology.stability = Stability::Stable;
    let mut engine = Engine::new();
    engine.publish_model(stable.clone()).unwrap();
    engine.instantiate("rfq", None, Default::default(), None, at).unwrap();
    let mut v2 = stable;
    v2.version = 2;
    let err = engine.publish_model(v2).unwrap_err();
    println!("stable: {err}");
    assert!(matches!(err, EngineError::FrozenModel(_)));

    // Evolutionary: the new version is published, running instances stay pinned.
    let mut engine = Engine::new();
    engine.publish_model(rfq_model()).unwrap();
    let pinned = engine.instantiate("rfq", None, Default::default(), None, at).unwrap().instance.id;
    let mut v2 = rfq_model();
    v2.version = 2;
    engine.publish_model(v2).unwrap();
    let fresh = engine.instantiate("rfq", None, Default::default(), None, at).unwrap().instance.id;
    println!(
        "evolutionary: {} on {}, {} on {}",
        pinned,
        engine.instance(&pinned).unwrap().model,
        fresh,
        engine.instance(&fresh).unwrap().model
    );
    let err = engine.migrate_instance(&pinned, 2, "carol", at).unwrap_err();
    assert!(matches!(err, EngineError::StabilityForbids(_)));

    // Unstable: running instances may move to the new version.
    let mut unstable = rfq_model();
    unstable.typology.stability = Stability::Unstable;
    let mut engine = Engine::new();
    engine.publish_model(unstable.clone()).unwrap();
    let id = engine.instantiate("rfq", None, Default::default(), None, at).unwrap().instance.id;
    let mut v2 = unstable;
    v2.version = 2;
    engine.publish_model(v2).unwrap();
    assert!(engine.instance_view(&id).unwrap().migratable);
    let view = engine.migrate_instance(&id, 2, "carol", at).unwrap();
    println!("unstable: {} migrated to {}", id, view.instance.model);
}
