// Runs the six-request fixture into a scratch workspace and prints the
// balanced scorecard and the drift list of the second fixture.

use std::path::Path;

use plmflow::indicators::RenderedValue;
use plmflow::scenario::run_scenario;
use plmflow::store::Workspace;
use plmflow::Timestamp;

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let dir = tempfile::tempdir().unwrap();

    let six = dir.path().join("six");
    run_scenario(&fixtures.join("rfq_six.json"), &six).unwrap();
    let ws = Workspace::open(&six).unwrap();
    let card = ws.engine().scorecard(Timestamp::parse("2024-04-01T00:00:00Z").unwrap());
    for section in &card.perspectives {
        println!("[{}]", section.perspective.as_str());
        for entry in &section.indicators {
            let shown = match &entry.value.value {
                RenderedValue::Text { text, .. } => text.clone(),
                RenderedValue::Status { flag: Some(f), value } => format!("{:?} ({})", f, value.unwrap_or_default()),
                other => other.numeric().map_or("n/a".into(), |v| v.to_string()),
            };
            println!("  {:<26} {}", entry.name, shown);
        }
    }
    print!("{}", card.to_csv());

    let running = dir.path().join("drift");
    run_scenario(&fixtures.join("rfq_drift.json"), &running).unwrap();
    let ws = Workspace::open(&running).unwrap();
    for report in ws.engine().drift(Timestamp::parse("2024-05-20T00:00:00Z").unwrap()) {
        println!("{} (> {} ms in {})", report.indicator, report.max_dwell_ms, report.state);
        for d in report.items {
            println!("  {} {}", d.instance, plmflow::time::format_duration(d.dwell_ms));
        }
    }
}
