//! Loads a CSV with its metadata, splits it and draws a balanced k-shot
//! sample, then prints each shot the way prompts show it.

use std::path::Path;

use featling::schema::{load_dataset, sample_k_shot, serialize_example, stratified_split};

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/heart");
    let ds = load_dataset(&root.join("shots.csv"), &root.join("metadata.json")).expect("fixture loads");
    println!("{} rows, {} features, classes {:?}", ds.data.len(), ds.schema.len(), ds.task.classes);

    let (pool, test) = stratified_split(&ds.data, 0.5, 7).expect("two rows per class");
    println!("pool {} / test {}", pool.len(), test.len());

    let shots = sample_k_shot(&ds.data, 2, 7).expect("enough rows");
    for (row, &y) in shots.rows.iter().zip(&shots.labels) {
        println!("{}", serialize_example(row, Some(&ds.task.classes[y]), &ds.schema));
    }
}
