use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn jetvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jetvar")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn constraints_of_q0_q2() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "a.jv", "lagrangian{kind:mechanics,n:1,k:2} L = q1_0 * q1_2\n");
    let out = jetvar(&["constraints", &f]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["chain"]["generations"], json!([["2*q1_2"], ["2*q1_3"]]));
    assert_eq!(v["chain"]["status"], "terminated-with-residual");
    assert_eq!(v["chain"]["constraints"][1]["parent"], 0);
    assert_eq!(v["chain"]["constraints"][1]["derivation"], "D_i of parent");
    assert_eq!(v["chain"]["constraints"][0]["derivation"], "EL");
    assert_eq!(v["chain"]["generation_count"], json!({"nominal": 2, "actual": 2, "matches": true}));
    assert_eq!(v["schema_version"], 1);
    assert!(v.get("timing").is_none());
}

#[test]
fn analyze_half_square() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "b.jv", "lagrangian { kind: mechanics, n: 1, k: 2 }\nL = 1/2*q1_2^2\n");
    let v = json_of(&jetvar(&["analyze", &f]));
    assert_eq!(v["projectability"]["label"], "none");
    assert_eq!(v["coefficients"]["momenta"], json!([["q1_4", "-q1_3", "q1_2"]]));
    assert!(v.get("chain").unwrap().is_null());
    let text = String::from_utf8(jetvar(&["analyze", &f, "--format", "text"]).stdout).unwrap();
    assert!(text.contains("projectability: none"));
}

#[test]
fn field_lagrangian_from_stdin_style_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "c.jv", "lagrangian { kind: field, m: 2, n: 1 }\n# mixed\nL = 1/2 * u1_[1,1]^2\n");
    let v = json_of(&jetvar(&["constraints", &f]));
    assert_eq!(v["coefficients"]["l0"], json!(["u1_[2,2]"]));
    assert_eq!(v["input"]["base_dim"], 2);
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "d.jv",
        "lagrangian { kind: field, m: 2, n: 1 }\nL = u1_[1,0]^2*u1_[0,2] + x1*u1_[0,0]*u1_[1,1]\n",
    );
    let a = jetvar(&["constraints", &f, "--seed", "5"]);
    let b = jetvar(&["constraints", &f, "--seed", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let g1 = jetvar(&["gravity-verify", "--d", "2", "--points", "5"]);
    let g2 = jetvar(&["gravity-verify", "--dim", "2", "--points", "5"]);
    assert_eq!(g1.stdout, g2.stdout);
}

#[test]
fn gravity_verify_two_dimensions() {
    let out = jetvar(&["gravity-verify", "--d", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    let checks = v["verification"]["checks"].as_array().unwrap();
    let vanishing = checks.iter().find(|c| c["name"] == "two-dimensional-vanishing").unwrap();
    assert_eq!(vanishing["passed"], true);
    assert_eq!(vanishing["points"], 20);
    assert!(vanishing["max_error"].as_f64().unwrap() <= 1e-9);
    assert_eq!(v["verification"]["seed"], 2024);
    assert_eq!(v["projectability"]["level"], 1);
}

#[test]
fn timing_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "e.jv", "lagrangian{kind:mechanics,n:1,k:2} L = q1_1^2\n");
    let v = json_of(&jetvar(&["constraints", &f, "--timing"]));
    assert!(v["timing"]["chain"].as_f64().is_some());
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("syntax.jv", "lagrangian { kind: mechanics, n: 1, k: 2 }\nL = q1_0 *\n", "line 3"),
        ("order.jv", "lagrangian { kind: mechanics, n: 1, k: 2 }\nL = q1_3\n", "exceeds"),
        ("unknown.jv", "lagrangian { kind: field, m: 2, n: 1 }\nL = q1_0\n", "unknown coordinate"),
    ];
    for (name, text, msg) in cases {
        let f = write(dir.path(), name, text);
        let out = jetvar(&["analyze", &f]);
        assert_eq!(out.status.code(), Some(1), "{name}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(msg), "{name}: {err}");
    }
    assert_eq!(jetvar(&["analyze", "/nonexistent/file.jv"]).status.code(), Some(1));
    assert_eq!(jetvar(&["fixtures-check"]).status.code(), Some(1));
    let f = write(dir.path(), "m.jv", "lagrangian{kind:mechanics,n:1,k:2} L = q1_1^2\n");
    assert_eq!(jetvar(&["gravity-verify", &f]).status.code(), Some(1));
}

#[test]
fn fixtures_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let record = |value: &str| {
        json!({
            "schema_version": 1,
            "generator": "hand derivation",
            "records": [
                {"quantity": "christoffel", "dimension": 2, "indices": [1, 1, 1],
                 "point": {"g00": "1", "g11": "3", "g11_[0,1]": "1/2"}, "value": value, "encoding": "rational"},
                {"quantity": "mech-chain", "indices": [2, 0], "value": "2*q1_3", "encoding": "expression",
                 "lagrangian": "lagrangian { kind: mechanics, n: 1, k: 2 } L = q1_0*q1_2"}
            ]
        })
        .to_string()
    };
    let good = write(dir.path(), "good.json", &record("1/12"));
    let out = jetvar(&["fixtures-check", "--fixtures", &good]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["verification"]["records"], 2);
    let bad = write(dir.path(), "bad.json", &record("1/13"));
    assert_eq!(jetvar(&["fixtures-check", "--fixtures", &bad]).status.code(), Some(2));
}
