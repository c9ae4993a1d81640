use dysonchain_cli::scenario::{CheckKind, MapKind};
use dysonchain_cli::{load_scenario, save_scenario, shipped, CliError, Scenario, SHIPPED};

fn problems(src: &str) -> Vec<String> {
    match Scenario::from_toml(src, "inline") {
        Err(CliError::Invalid { problems, .. }) => problems,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

const BASE: &str = r#"
name = "t"
[model]
kind = "linear"
omega = "1"
alpha = "0.2"
beta = "0.4"
"#;

#[test]
fn every_shipped_scenario_parses() {
    for (name, _) in SHIPPED {
        let sc = shipped(name).unwrap();
        assert_eq!(&sc.name, name);
    }
    assert!(matches!(shipped("nope"), Err(CliError::UnknownScenario(_))));
}

#[test]
fn minimal_scenario_takes_defaults() {
    let sc = shipped("minimal").unwrap();
    assert!(sc.checks.is_empty() && sc.maps.is_empty());
    assert_eq!((sc.fock.dim, sc.fock.tail_guard, sc.fock.pad), (40, 5, 0));
    assert_eq!((sc.grid.t0, sc.grid.t1, sc.grid.step), (0.0, 1.0, 1e-3));
    assert_eq!((sc.chain.k_min, sc.chain.k_max), (0, 0));
    assert!(sc.outputs.csv && !sc.outputs.matrices);
}

#[test]
fn scenarios_survive_a_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["linear_global_gauge", "swanson_local_gauge", "linear_driven"] {
        let sc = shipped(name).unwrap();
        let path = dir.path().join(format!("{name}.toml"));
        save_scenario(&sc, &path).unwrap();
        assert_eq!(load_scenario(&path).unwrap(), sc);
    }
    let sc = shipped("linear_global_gauge").unwrap();
    assert!(matches!(sc.map_at(0), Some(MapKind::GammaOde { .. })));
    assert!(sc.checks.contains(&CheckKind::GaugeGlobal));
}

#[test]
fn nonpositive_step_is_named() {
    let p = problems(&format!("{BASE}\n[grid]\nstep = 0.0\n"));
    assert_eq!(p.len(), 1);
    assert!(p[0].contains("grid.step"), "{p:?}");
}

#[test]
fn every_problem_is_reported() {
    let src = format!("{BASE}\n[chain]\nk_min = -1\nk_max = 1\nsample_stride = 0\n[fock]\ndim = 3\n");
    let p = problems(&src);
    assert!(p.iter().any(|s| s.contains("sample_stride")), "{p:?}");
    assert!(p.iter().any(|s| s.contains("-1 → 0")), "{p:?}");
    assert!(p.iter().any(|s| s.contains("0 → 1")), "{p:?}");
    assert!(p.len() >= 4, "{p:?}");
}

#[test]
fn maps_must_fit_the_model_and_level() {
    let src = format!("{BASE}\n[chain]\nk_min = -1\n[[maps]]\nlevel = -1\nkind = \"swanson_newton\"\nseed = {{ epsilon = -0.1, mu = 0.0 }}\n");
    let p = problems(&src);
    assert!(p.iter().any(|s| s.contains("swanson")), "{p:?}");

    let src = r#"name = "t"
checks = ["quadratures"]
[model]
kind = "swanson"
omega = "1"
alpha = "0.2"
beta = "0.3"
"#;
    let p = problems(src);
    assert!(p.iter().any(|s| s.contains("[evolution]")), "{p:?}");
    assert!(p.iter().any(|s| s.contains("linear model")), "{p:?}");
}

#[test]
fn parse_errors_name_the_origin() {
    match Scenario::from_toml("name = 3", "here.toml") {
        Err(e @ CliError::Parse { .. }) => assert!(e.to_string().starts_with("here.toml:")),
        other => panic!("{other:?}"),
    }
    let unknown = format!("{BASE}\nbogus = 1\n");
    assert!(matches!(Scenario::from_toml(&unknown, "x"), Err(CliError::Parse { .. })));
    let bad_expr = BASE.replace("\"0.2\"", "\"0.2 +\"");
    assert!(matches!(Scenario::from_toml(&bad_expr, "x"), Err(CliError::Parse { .. })));
}

#[test]
fn duplicate_checks_are_rejected() {
    let src = format!("checks = [\"gauge_global\", \"gauge_global\"]\n{BASE}");
    let p = problems(&src);
    assert!(p.iter().any(|s| s.contains("twice")), "{p:?}");
}
