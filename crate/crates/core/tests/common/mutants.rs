//! Seeded faults in the shipped UUV controller network, each paired with the
//! properties it must break.

use dynassure::uuv::CONTROLLER_NETWORK;

pub struct Mutant {
    pub name: &'static str,
    pub network: String,
    pub kills: &'static [&'static str],
}

fn replace(text: &str, from: &str, to: &str) -> String {
    assert!(text.contains(from), "mutation anchor missing: {from}");
    text.replace(from, to)
}

fn drop_edge(text: &str, edge: &str) -> String {
    let block = format!("[[automata.edges]]\n{edge}\n\n");
    assert_eq!(text.matches(&block).count(), 1, "edge not unique: {edge}");
    text.replace(&block, "")
}

pub fn uuv_mutants() -> Vec<Mutant> {
    let base = CONTROLLER_NETWORK;
    let handoff = "from = \"PlanCreated\"\nto = \"Idle\"\nsync = \"startExecuting!\"";
    let speed_edge = "from = \"Execute\"\nto = \"Execute\"\nsync = \"changeSpeed!\"\nguard = \"x1 == newX1 && x2 == newX2 && x3 == newX3 && speed != newSpeed\"\nassign = [\"speed = newSpeed\"]";
    let no_speed = replace(
        &drop_edge(base, speed_edge),
        "\n\n[[automata.edges]]\nfrom = \"Idle\"\nto = \"Idle\"\nsync = \"changeSpeed?\"",
        "",
    );
    vec![
        Mutant {
            name: "failsafe keeps the speed",
            network: replace(base, "\"newSpeed = 0\"]", "\"newSpeed = speed\"]"),
            kills: &["R4"],
        },
        Mutant { name: "monitor never resets", network: drop_edge(base, "from = \"Finished\"\nto = \"Idle\""), kills: &["P1"] },
        Mutant {
            name: "planner may skip the executor",
            network: replace(base, handoff, &format!("{handoff}\n\n[[automata.edges]]\nfrom = \"PlanCreated\"\nto = \"Idle\"")),
            kills: &["P4"],
        },
        Mutant {
            name: "adapt without a configuration change",
            network: replace(
                base,
                "guard = \"feasible == 1 && (x1 != newX1 || x2 != newX2 || x3 != newX3 || speed != newSpeed)\"",
                "guard = \"feasible == 1\"",
            ),
            kills: &["P9"],
        },
        Mutant { name: "executor cannot change speed", network: no_speed, kills: &["P1", "P8"] },
        Mutant {
            name: "verifier never recovers from a timeout",
            network: drop_edge(base, "from = \"TimedOut\"\nto = \"Idle\""),
            kills: &["P1"],
        },
        Mutant {
            name: "failsafe branch unreachable",
            network: replace(
                base,
                "from = \"Analyse\"\nto = \"Failsafe\"\nguard = \"deadline_expired == 1\"",
                "from = \"Analyse\"\nto = \"Failsafe\"\nguard = \"deadline_expired == 2\"",
            ),
            kills: &["R4", "P6"],
        },
        Mutant {
            name: "shipped mutant fixture",
            network: include_str!("../../data/uuv_controller_mutant.toml").to_string(),
            kills: &["R4"],
        },
    ]
}
