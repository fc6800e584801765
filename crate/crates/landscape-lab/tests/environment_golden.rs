use landscape_lab::environment::{gen_environment, EnvParams};

#[test]
fn exponential_seed42_matches_frozen_weights() {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/golden/exp_seed42_3x3_rate2.json"
    ))
    .unwrap();
    let gold: serde_json::Value = serde_json::from_str(&text).unwrap();
    let want: Vec<f64> = gold["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let env = gen_environment(
        &EnvParams::Exponential {
            n_levels: 3,
            n_cols: 3,
            rate: 2.0,
        },
        42,
    )
    .unwrap();
    let got: Vec<f64> = (0..3)
        .flat_map(|k| (0..3).map(move |x| (k, x)))
        .map(|(k, x)| env.weight(k, x))
        .collect();
    for (g, w) in got.iter().zip(&want) {
        assert_eq!(g.to_bits(), w.to_bits(), "{g} vs {w}");
    }
    // Exp(2): mean 1/2, sd of a 9-sample mean is 1/6
    let mean = got.iter().sum::<f64>() / 9.0;
    assert!((mean - 0.5).abs() < 3.0 / 6.0, "mean {mean}");
}
