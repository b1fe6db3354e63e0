//! Fits the ensemble on the synthetic solution-mix task with a scripted
//! model that always proposes the true mixture rule among random ones.

use featling::eval::{run_experiment, solution_mix_oracle_client, DatasetRef, ExperimentConfig, SyntheticKind};

fn main() {
    let mut cfg = ExperimentConfig::new(DatasetRef::Synthetic {
        synthetic: SyntheticKind::SolutionMix,
        rows: 300,
        seed: 0,
    });
    cfg.shots = vec![4];
    cfg.repeats = 3;
    let client = solution_mix_oracle_client();
    let outcome = run_experiment(&cfg, &client).expect("experiment runs");
    for run in &outcome.runs {
        println!("repeat {}: AUC {:.4}", run.repeat, run.auc);
    }
    print!("{}", outcome.report.to_markdown());
}
