use std::path::PathBuf;

use nalgebra::DMatrix;
use outabs::model::{self, mtx};
use outabs::{benchmarks, generate};
use proptest::prelude::*;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/motor")
}

#[test]
fn shipped_motor_manifest_matches_builtin() {
    let parsed = model::parse_problem(&data_dir().join("motor.json")).unwrap();
    let builtin = benchmarks::motor().unwrap();
    assert_eq!(model::problem_to_string(&parsed).unwrap(), model::problem_to_string(&builtin).unwrap());
}

#[test]
fn serialized_problem_reloads_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let p = generate::random_problem(&generate::GenOptions::new(5, 2, 2, 9)).unwrap();
    let path = dir.path().join("gen.json");
    let written = model::serialize_problem(&p, &path).unwrap();
    assert_eq!(written.len(), 4);
    assert!(written.iter().all(|f| f.exists()));
    let back = model::parse_problem(&path).unwrap();
    assert_eq!(back, p);
}

#[test]
fn missing_matrix_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = benchmarks::motor().unwrap();
    let path = dir.path().join("m.json");
    model::serialize_problem(&p, &path).unwrap();
    let gone = dir.path().join("m.mode2.B.mtx");
    std::fs::remove_file(&gone).unwrap();
    let err = model::parse_problem(&path).unwrap_err().to_string();
    assert!(err.contains("m.mode2.B.mtx"), "{err}");
}

fn matrix() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
        proptest::collection::vec(-1e6f64..1e6, r * c).prop_map(move |v| DMatrix::from_vec(r, c, v))
    })
}

proptest! {
    #[test]
    fn matrix_market_round_trips_exactly(m in matrix()) {
        let text = mtx::format_matrix_market(&m);
        let back = mtx::parse_matrix_market(&text, std::path::Path::new("x.mtx")).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn inline_manifest_round_trips(seed in 0u64..1000, n in 2usize..6) {
        let p = generate::random_problem(&generate::GenOptions::new(n, 1, 1, seed)).unwrap();
        let text = model::problem_to_string(&p).unwrap();
        let back = model::problem_from_str(&text, std::path::Path::new(".")).unwrap();
        prop_assert_eq!(back, p);
    }
}
