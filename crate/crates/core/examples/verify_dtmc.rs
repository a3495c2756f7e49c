//! Reachability and expected reward on a small retry protocol.

use dynassure::model::MarkovModel;
use dynassure::verifier::{evaluate, Comparison, Property};

const MODEL: &str = r#"
kind = "dtmc"

[states]
names = ["send", "wait", "ok", "lost"]
initial = "send"

[states.labels]
delivered = ["ok"]
end = ["ok", "lost"]

[[transitions]]
from = "send"
to = "wait"
weight = 0.9

[[transitions]]
from = "send"
to = "lost"
weight = 0.1

[[transitions]]
from = "wait"
to = "ok"
weight = 0.8

[[transitions]]
from = "wait"
to = "send"
weight = 0.2

[[transitions]]
from = "ok"
to = "ok"
weight = 1.0

[[transitions]]
from = "lost"
to = "lost"
weight = 1.0

[rewards.steps.states]
send = 1.0
wait = 1.0
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = MarkovModel::from_toml(MODEL)?;
    let report = m.validate();
    assert!(report.is_valid(), "{report}");
    let props = [
        Property::ProbReach { bound: Comparison::Ge, threshold: 0.85, target: "delivered".into() },
        Property::ReachReward { reward: "steps".into(), bound: Comparison::Query, threshold: 0.0, target: "end".into() },
    ];
    for p in &props {
        let r = evaluate(&m, p)?;
        println!("{p}: {:.9} ({:?})", r.value, r.satisfied);
    }
    // P(delivered) = 0.72 / (1 - 0.18)
    println!("closed form: {:.9}", 0.72 / 0.82);
    Ok(())
}
