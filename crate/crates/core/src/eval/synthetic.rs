use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{rng_for, TAG_SYNTH};
use crate::schema::{FeatureDesc, FeatureSchema, LabeledSet, Row, SchemaError, TaskSpec, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    SolutionMix,
    SequenceType,
}

impl SyntheticKind {
    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::SolutionMix => "solution_mix",
            SyntheticKind::SequenceType => "sequence_type",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.replace('-', "_").to_ascii_lowercase().as_str() {
            "solution_mix" => Some(SyntheticKind::SolutionMix),
            "sequence_type" => Some(SyntheticKind::SequenceType),
            _ => None,
        }
    }
}

pub const SOLUTION_MIX_QUESTION: &str = "Given the volumes and concentrations of four solutions, does the percent concentration of the mixed solution over 0.5? Yes or no?";
pub const SEQUENCE_TYPE_QUESTION: &str =
    "What is the type of following sequence? Arithmetic, geometric, fibonacci, or collatz?";
pub const SEQUENCE_CLASSES: [&str; 4] = ["arithmetic", "geometric", "fibonacci", "collatz"];

/// `(C1*V1 + ... + C4*V4) / (V1 + ... + V4)`, summed left to right.
pub fn mixture_concentration(volumes: &[f64; 4], concentrations: &[f64; 4]) -> f64 {
    let mut num = concentrations[0] * volumes[0];
    let mut den = volumes[0];
    for i in 1..4 {
        num += concentrations[i] * volumes[i];
        den += volumes[i];
    }
    num / den
}

/// The exact decision rule for the solution-mix label, in rule syntax.
pub fn mixture_rule(op: &str) -> String {
    let num = (1..=4)
        .map(|i| format!("Concentration{i} * Volume{i}"))
        .collect::<Vec<_>>()
        .join(" + ");
    let den = (1..=4).map(|i| format!("Volume{i}")).collect::<Vec<_>>().join(" + ");
    format!("({num}) / ({den}) {op} 0.5")
}

fn three_decimals(x: f64) -> f64 {
    format!("{x:.3}").parse().expect("formatted float parses")
}

fn solution_mix(n: usize, rng: &mut ChaCha8Rng) -> (FeatureSchema, TaskSpec, LabeledSet) {
    let mut features = Vec::new();
    for i in 1..=4 {
        features.push(FeatureDesc::numerical(
            format!("Volume{i}"),
            Some(&format!("volume of solution {i}")),
        ));
    }
    for i in 1..=4 {
        features.push(FeatureDesc::numerical(
            format!("Concentration{i}"),
            Some(&format!("concentration of solution {i}")),
        ));
    }
    let schema = FeatureSchema::new(features).expect("fixed schema is valid");
    let task = TaskSpec::new(SOLUTION_MIX_QUESTION, &["no", "yes"]).expect("fixed task is valid");
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v = [0.0; 4];
        let mut c = [0.0; 4];
        for x in &mut v {
            *x = three_decimals(1.0 - rng.gen::<f64>()).max(0.001);
        }
        for x in &mut c {
            *x = three_decimals(rng.gen::<f64>());
        }
        labels.push(usize::from(mixture_concentration(&v, &c) > 0.5));
        rows.push(Row::new(v.iter().chain(&c).map(|&x| Value::num(x)).collect()));
    }
    let data = LabeledSet::new(rows, labels, 2).expect("labels in range");
    (schema, task, data)
}

fn nonzero(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> i64 {
    loop {
        let x = rng.gen_range(lo..=hi);
        if x != 0 {
            return x;
        }
    }
}

fn collatz_step(x: i64) -> i64 {
    if x % 2 == 0 {
        x / 2
    } else {
        3 * x + 1
    }
}

fn sequence(class: usize, rng: &mut ChaCha8Rng) -> [i64; 5] {
    let mut s = [0i64; 5];
    match class {
        0 => {
            let a = nonzero(rng, -10, 10);
            let d = nonzero(rng, -10, 10);
            for (i, x) in s.iter_mut().enumerate() {
                *x = a + d * i as i64;
            }
        }
        1 => {
            let a = rng.gen_range(1..=9);
            let r: i64 = *[2, 3].choose(rng).expect("non-empty");
            for (i, x) in s.iter_mut().enumerate() {
                *x = a * r.pow(i as u32);
            }
        }
        2 => {
            s[0] = rng.gen_range(1..=20);
            s[1] = rng.gen_range(1..=20);
            for i in 2..5 {
                s[i] = s[i - 1] + s[i - 2];
            }
        }
        _ => {
            s[0] = rng.gen_range(3..=200);
            for i in 1..5 {
                s[i] = collatz_step(s[i - 1]);
            }
        }
    }
    s
}

/// Class sizes in 40:40:10:10 proportion; leftovers go to the earlier classes.
pub fn sequence_counts(n: usize) -> [usize; 4] {
    let shares = [4, 4, 1, 1];
    let mut counts = shares.map(|s| n * s / 10);
    let mut left = n - counts.iter().sum::<usize>();
    let mut i = 0;
    while left > 0 {
        counts[i % 4] += 1;
        left -= 1;
        i += 1;
    }
    counts
}

fn sequence_type(n: usize, rng: &mut ChaCha8Rng) -> (FeatureSchema, TaskSpec, LabeledSet) {
    let features = (1..=5)
        .map(|i| FeatureDesc::numerical(format!("num{i}"), Some(&format!("term {i} of the sequence"))))
        .collect();
    let schema = FeatureSchema::new(features).expect("fixed schema is valid");
    let task = TaskSpec::new(SEQUENCE_TYPE_QUESTION, &SEQUENCE_CLASSES).expect("fixed task is valid");
    let mut labels: Vec<usize> = sequence_counts(n)
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat(c).take(k))
        .collect();
    labels.shuffle(rng);
    let rows = labels
        .iter()
        .map(|&c| Row::new(sequence(c, rng).iter().map(|&x| Value::num(x as f64)).collect()))
        .collect();
    let data = LabeledSet::new(rows, labels, 4).expect("labels in range");
    (schema, task, data)
}

/// Draws `n` labelled rows of a synthetic task.
pub fn generate_synthetic(
    kind: SyntheticKind,
    n: usize,
    seed: u64,
) -> Result<(FeatureSchema, TaskSpec, LabeledSet), SchemaError> {
    if n < 20 {
        return Err(SchemaError::Invalid(format!(
            "synthetic datasets need at least 20 rows, asked for {n}"
        )));
    }
    let mut rng = rng_for(seed, &[TAG_SYNTH]);
    Ok(match kind {
        SyntheticKind::SolutionMix => solution_mix(n, &mut rng),
        SyntheticKind::SequenceType => sequence_type(n, &mut rng),
    })
}
