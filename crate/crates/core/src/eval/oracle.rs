use rand::seq::SliceRandom;
use rand::Rng;

use super::synthetic::mixture_rule;
use crate::llm::ScriptedClient;
use crate::rng::rng_for;

fn distractor(rng: &mut impl Rng) -> String {
    let feature = if rng.gen_bool(0.5) {
        format!("Volume{}", rng.gen_range(1..=4))
    } else {
        format!("Concentration{}", rng.gen_range(1..=4))
    };
    let a: f64 = (rng.gen_range(1..10) as f64) / 10.0;
    match rng.gen_range(0..5) {
        0 => format!("{feature} > {a}"),
        1 => format!("{feature} <= {a}"),
        2 => format!("{feature} is greater than or equal to {a}"),
        3 => format!("{feature} (< {a})"),
        _ => {
            let b = (a + 0.3).min(1.0);
            format!("{feature} is within range of [{a}, {b:.1}]")
        }
    }
}

/// A rule-extraction answer for the solution-mix task: per class, the exact
/// mixture rule at a random position among nine random threshold rules.
pub fn solution_mix_oracle(seed: u64) -> String {
    let mut rng = rng_for(seed, &[0x0A]);
    let mut out = String::from("Step 1. The mixture's concentration decides the answer.\n\nStep 2.\n");
    for (class, op) in [("no", "<="), ("yes", ">")] {
        let mut rules: Vec<String> = (0..9).map(|_| distractor(&mut rng)).collect();
        rules.push(mixture_rule(op));
        rules.shuffle(&mut rng);
        out.push_str(&format!("\n10 different conditions for class \"{class}\":\n"));
        for r in rules {
            out.push_str(&format!("- {r}\n"));
        }
    }
    out
}

pub fn solution_mix_oracle_client() -> ScriptedClient {
    ScriptedClient::new(|_, seed| solution_mix_oracle(seed))
}
