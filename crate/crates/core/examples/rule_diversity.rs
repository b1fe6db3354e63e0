//! Measures how similar the rules of two trials are by optimally pairing
//! their indicator columns.

use featling::eval::{max_weight_assignment, rule_diversity};
use featling::ruledsl::FeatureMatrix;
use rand::{Rng, SeedableRng};

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let random = |rng: &mut rand_chacha::ChaCha8Rng| {
        let rows = (0..500).map(|_| (0..6).map(|_| rng.gen_range(0..2) as f64).collect()).collect();
        FeatureMatrix::from_values("trial", rows, 6)
    };
    let a = random(&mut rng);
    let b = random(&mut rng);
    let (same, _) = rule_diversity(&[a.clone(), a.clone()]).expect("two trials");
    let (indep, var) = rule_diversity(&[a, b]).expect("two trials");
    println!("identical trials: {same:.3}");
    println!("independent trials: {indep:.3} (variance {var:.2e})");

    let w = vec![vec![0.1, 0.9, 0.3], vec![0.8, 0.7, 0.2], vec![0.4, 0.6, 0.5]];
    println!("best pairing {:?}", max_weight_assignment(&w));
}
