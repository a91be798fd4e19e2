// The log is the source of truth: state is rebuilt by replay, optionally
// starting from a snapshot.

use std::path::Path;

use plmflow::scenario::run_scenario;
use plmflow::store::Workspace;
use plmflow::trace::{parse_ndjson, replay};

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let dir = tempfile::tempdir().unwrap();
    run_scenario(&fixtures.join("rfq_six.json"), dir.path()).unwrap();

    let live = Workspace::open(dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("events.ndjson")).unwrap();
    let events = parse_ndjson(&text).unwrap();
    let rebuilt = replay(live.engine().registry(), &events).unwrap();
    assert_eq!(&rebuilt, live.engine().state());
    println!("replayed {} events into {} instances", events.len(), rebuilt.instances.len());

    {
        let ws = Workspace::open_writer(dir.path()).unwrap();
        println!("snapshot written to {}", ws.snapshot().unwrap().display());
    }
    let reopened = Workspace::open(dir.path()).unwrap();
    assert_eq!(reopened.engine().state(), &rebuilt);
    println!("snapshot + tail replay matches full replay");

    // A torn final line is reported with its line number.
    let torn = &text[..text.len() - 1];
    match parse_ndjson(torn) {
        Err(e) => println!("torn log: {e}"),
        Ok(_) => unreachable!(),
    }
}
