//! Fits one trial model on hand-made rule indicators and compares it with
//! plain rule counting.

use featling::model::{predict_no_tuning, train_trial, TrainConfig};
use featling::ruledsl::FeatureMatrix;

fn main() {
    // class 0 rules: [informative, noisy]; class 1 rules: [informative, always on]
    let labels = vec![0, 0, 0, 0, 1, 1, 1, 1];
    let no: Vec<Vec<f64>> = labels.iter().enumerate().map(|(i, &y)| vec![(y == 0) as u8 as f64, (i % 2) as f64]).collect();
    let yes: Vec<Vec<f64>> = labels.iter().map(|&y| vec![(y == 1) as u8 as f64, 1.0]).collect();
    let matrices = vec![FeatureMatrix::from_values("no", no, 2), FeatureMatrix::from_values("yes", yes, 2)];
    let classes = vec!["no".to_string(), "yes".to_string()];

    let model = train_trial(&classes, &matrices, &labels, &TrainConfig::default()).expect("trains");
    println!("selected {} epochs", model.trained_epochs);
    println!("weights {:?}", model.weights);

    let tuned = model.predict(&matrices).expect("shapes match");
    let counted = predict_no_tuning(&matrices).expect("shapes match");
    for i in 0..labels.len() {
        println!("row {i} label {}: tuned {:.3}  counted {:.3}", labels[i], tuned[i][1], counted[i][1]);
    }
    println!("{}", serde_json::to_string_pretty(&model).expect("serializes"));
}
