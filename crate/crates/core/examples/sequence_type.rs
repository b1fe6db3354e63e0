//! Generates the four-class sequence task and shows a few rows per class.

use featling::eval::{generate_synthetic, SyntheticKind};
use featling::schema::serialize_example;

fn main() {
    let (schema, task, data) = generate_synthetic(SyntheticKind::SequenceType, 100, 1).expect("n >= 20");
    println!("{}", task.question);
    println!("class counts {:?}", data.class_counts());
    for class in 0..task.num_classes() {
        for &i in data.indices_by_class()[class].iter().take(2) {
            println!("{}", serialize_example(&data.rows[i], Some(&task.classes[class]), &schema));
        }
    }
}
