use std::path::PathBuf;

use robust_mem::types::{ErrorPrior, Method};
use robust_mem::ObservedDataset;
use robust_mem_cli::config::{parse_json, read_config, RunConfig};
use robust_mem_cli::error::CliError;

fn linear_data() -> ObservedDataset {
    let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64 + (i % 3) as f64]).collect();
    robust_mem::validate_dataset(&rows).unwrap()
}

fn pointer(err: CliError) -> String {
    match err {
        CliError::Config { pointer, .. } => pointer,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn minimal_robust_tls_fills_defaults() {
    let cfg: RunConfig = parse_json(r#"{"method":"robust_tls","model":{"name":"linear"},"prior":{"kind":"gaussian"}}"#).unwrap();
    let req = cfg.to_request(linear_data()).unwrap();
    assert_eq!(req.method, Method::RobustTls);
    assert_eq!(req.dp.c, 1.0);
    assert_eq!(req.dp.truncation, 100);
    assert_eq!(req.dp.iterations, 500);
    assert_eq!(req.dp.seed, 0);
    assert_eq!(req.prior, ErrorPrior::gaussian(1.0));
}

#[test]
fn negative_concentration_points_at_dp_c() {
    let cfg: RunConfig = parse_json(r#"{"method":"robust_tls","model":{"name":"linear"},"prior":{"kind":"gaussian"},"dp":{"c":-1}}"#).unwrap();
    assert_eq!(pointer(cfg.to_request(linear_data()).unwrap_err()), "/dp/c");
}

#[test]
fn unknown_keys_are_rejected_with_their_path() {
    let err = parse_json::<RunConfig>(r#"{"method":"ols","model":{"name":"linear"},"colour":1}"#).unwrap_err();
    assert_eq!(pointer(err), "/colour");
    let err = parse_json::<RunConfig>(r#"{"method":"ols","model":{"name":"linear"},"dp":{"c":1,"K":3}}"#).unwrap_err();
    assert_eq!(pointer(err), "/dp/K");
}

#[test]
fn type_errors_point_at_the_field() {
    let err = parse_json::<RunConfig>(r#"{"method":"ols","model":{"name":"linear"},"dp":{"T":"many"}}"#).unwrap_err();
    assert_eq!(pointer(err), "/dp/T");
    let err = parse_json::<RunConfig>(r#"{"method":"ols","model":{"name":"linear"},"optimizer":{"max_iters":-3}}"#).unwrap_err();
    assert_eq!(pointer(err), "/optimizer/max_iters");
}

#[test]
fn method_model_mismatch_is_a_config_error() {
    let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 20.0, (i % 2) as f64]).collect();
    let data = robust_mem::validate_dataset(&rows).unwrap();
    let cfg: RunConfig = parse_json(r#"{"method":"robust_tls","model":{"name":"sigmoid"},"prior":{"kind":"gaussian"}}"#).unwrap();
    assert!(matches!(cfg.to_request(data).unwrap_err(), CliError::Config { .. }));
}

#[test]
fn mmd_requires_a_kernel_and_student_t_requires_df() {
    let cfg: RunConfig = parse_json(r#"{"method":"robust_mmd","model":{"name":"linear"},"prior":{"kind":"gaussian"}}"#).unwrap();
    assert_eq!(pointer(cfg.to_request(linear_data()).unwrap_err()), "/kernel");
    let cfg: RunConfig = parse_json(r#"{"method":"robust_tls","model":{"name":"linear"},"prior":{"kind":"student_t"}}"#).unwrap();
    assert_eq!(pointer(cfg.to_request(linear_data()).unwrap_err()), "/prior/df");
}

#[test]
fn mental_health_preset_parses_to_its_published_settings() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/mental_health.json");
    let cfg = read_config(&path).unwrap();
    assert_eq!(cfg.method, Method::RobustMmd);
    assert_eq!(cfg.dp.c, 50.0);
    assert_eq!(cfg.dp.t, 100);
    assert_eq!(cfg.dp.b, 200);
    assert_eq!(cfg.optimizer.learning_rate, 0.001);
    let k = cfg.kernel.unwrap();
    assert_eq!((k.l_x, k.l_y), (10.0, 10.0));
}

#[test]
fn shipped_presets_parse() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            read_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 4);
}

#[test]
fn band_grid_is_inclusive() {
    let cfg: RunConfig = parse_json(r#"{"method":"ols","model":{"name":"linear"},"band":{"grid_lo":0,"grid_hi":1,"points":5}}"#).unwrap();
    let band = cfg.band.unwrap();
    assert_eq!(band.level, 0.9);
    assert_eq!(band.grid(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
}
