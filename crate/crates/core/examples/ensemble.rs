//! Fits a bagged ensemble on 32 solution-mix shots under a tight prompt
//! budget, then shows how each trial was bagged and the test AUC.

use featling::ensemble::{fit_ensemble, predict, EnsembleConfig};
use featling::eval::{auc_multiclass, generate_synthetic, solution_mix_oracle_client, SyntheticKind};
use featling::schema::{sample_k_shot, stratified_split};

fn main() {
    let (schema, task, data) = generate_synthetic(SyntheticKind::SolutionMix, 300, 0).expect("n >= 20");
    let (pool, test) = stratified_split(&data, 0.2, 0).expect("both classes");
    let shots = sample_k_shot(&pool, 32, 0).expect("enough rows");

    let cfg = EnsembleConfig {
        num_trials: 8,
        prompt_budget_tokens: 1100,
        ..Default::default()
    };
    let client = solution_mix_oracle_client();
    let model = fit_ensemble(&client, &schema, &task, &shots, &cfg).expect("some trial succeeds");
    for t in &model.trials {
        let ctx = &t.extracted.context;
        println!(
            "trial {}: {} of {} shots, {} of {} features, {} attempt(s)",
            t.extracted.trial,
            ctx.sample_subset.len(),
            shots.len(),
            ctx.feature_subset.len(),
            schema.len(),
            t.extracted.attempts.len(),
        );
    }

    let p = predict(&model, &schema, &test.rows).expect("shapes match");
    let auc = auc_multiclass(&p.probabilities, &test.labels, task.num_classes()).expect("both classes");
    println!("{} trials, {} failures, test AUC {auc:.4}", model.trials.len(), model.failures.len());
}
