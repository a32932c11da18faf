//! Regenerate the bundled example dataset: one draw of the three-covariate
//! design at n = 500 under a fixed seed. Run from the workspace root:
//!
//! ```text
//! cargo run -p medrobust --example make_example_data
//! ```
//!
//! The output is deterministic, so rerunning never changes the file.

use medrobust::data::{write_csv, CsvSchema};
use medrobust::rng::replicate_rng;
use medrobust::sim::generate_s3;

fn main() {
    let mut rng = replicate_rng(31_415, 0);
    let data = generate_s3(500, &mut rng);
    let schema = CsvSchema {
        y: "y".into(),
        e: "e".into(),
        m: "m".into(),
        x: vec!["x1".into(), "x2".into(), "x3".into()],
        outcome_kind: None,
        support_size: None,
    };
    let path = "data/example_s3_n500.csv";
    write_csv(path, &data, &schema).expect("write example dataset");
    println!("wrote {path}");
}
