//! Binary and macro one-vs-rest AUC on small examples.

use featling::eval::{auc_binary, auc_multiclass};

fn main() {
    let scores = [0.9, 0.8, 0.8, 0.4, 0.3, 0.1];
    let labels = [true, true, false, true, false, false];
    println!("binary AUC {:.4}", auc_binary(&scores, &labels).expect("both classes"));

    let probs = vec![
        vec![0.7, 0.2, 0.1],
        vec![0.2, 0.5, 0.3],
        vec![0.1, 0.3, 0.6],
        vec![0.4, 0.4, 0.2],
        vec![0.3, 0.3, 0.4],
    ];
    let y = [0, 1, 2, 1, 0];
    println!("macro AUC {:.4}", auc_multiclass(&probs, &y, 3).expect("several classes"));
}
