use serde_json::Value;
use wyner_web::{cluster_json, dataset_json, solve_json};

fn parse(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn dataset_reports_three_bits_without_noise() {
    let v = parse(&dataset_json(0.0, 2).unwrap());
    assert_eq!(v["x_card"], 16);
    assert!((v["views_mi"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    let joint = v["joint"].as_array().unwrap();
    assert_eq!(joint.len(), 256);
    let total: f64 = joint.iter().map(|m| m.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(dataset_json(0.6, 2).is_err());
}

#[test]
fn solve_then_cluster() {
    let v = parse(&solve_json("baseline", 20.0, 8, 3000, 1, 0.0, 2).unwrap());
    assert_eq!(v["solver"], "baseline");
    assert_eq!(v["latent_map"].as_array().unwrap().len(), 256);
    let plane = &v["plane"];
    let residual = plane["residual_cmi"].as_f64().unwrap();
    assert!((0.0..=3.0 + 1e-9).contains(&residual));
    let report = parse(&cluster_json(v["encoder"].as_str().unwrap(), 0.0, 2, 500, 3).unwrap());
    let acc = report["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn bad_inputs_are_errors() {
    assert!(solve_json("simplex", 1.0, 8, 10, 0, 0.0, 2).is_err());
    assert!(solve_json("admm", -1.0, 8, 10, 0, 0.0, 2).is_err());
    assert!(cluster_json("{}", 0.0, 2, 10, 0).is_err());
}
