use regvar_web::{detect_json, graph_json, simulate_csv};

#[test]
fn simulate_detect_graph_round() {
    let csv = simulate_csv(12, 40, 11, 3.0, 4).unwrap();
    assert!(csv.starts_with("day,slot,s000,"));
    assert_eq!(csv.lines().count(), 1 + 40 * 20);

    let curve: serde_json::Value = serde_json::from_str(&detect_json(&csv, 5, 0).unwrap()).unwrap();
    assert_eq!(curve["t"].as_array().unwrap().len(), 19);
    assert_eq!(curve["t_hat"], 11);

    let graph: serde_json::Value =
        serde_json::from_str(&graph_json(&csv, 0.1, 5).unwrap()).unwrap();
    let edges = graph["edges"].as_array().unwrap();
    assert!(!edges.is_empty());
    assert!(edges
        .iter()
        .all(|e| e["weight"].as_f64().unwrap().abs() >= 0.1));
    assert_eq!(graph["influence"].as_array().unwrap().len(), 12);
}

#[test]
fn errors_come_back_as_messages() {
    assert!(simulate_csv(1, 10, 11, 3.0, 0).is_err());
    assert!(detect_json("not,a,tensor\n", 5, 0).is_err());
    assert!(graph_json("", 0.0, 5).is_err());
}
