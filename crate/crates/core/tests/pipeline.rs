mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use uplift_policy::pipeline::{self, RunConfig};
use uplift_policy::policy::{self, ConstraintSpec, Policy, RatioOptions};
use uplift_policy::uplift::UpliftEstimates;

const STEP_DATA: &str = r#"
[data.synth]
n = 2000
d = 2
k = 1
noise_sd = 0.3
[data.synth.outcome]
arms = [
  { family = "constant", value = 1.0 },
  { family = "piecewise", feature = 0, thresholds = [0.5], levels = [0.6, 2.0] },
]
"#;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

fn load(dir: &Path, body: &str) -> RunConfig {
    RunConfig::load(write_config(dir, body)).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uplift-policy"))
}

#[test]
fn simulate_is_deterministic_by_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), &format!("seed = 3\n{STEP_DATA}"));
    for out in ["a", "b"] {
        let status = bin()
            .args(["simulate", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(tmp.path().join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }
    for f in [pipeline::DATASET_FILE, pipeline::MANIFEST_FILE] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
        assert!(!a.contains(&b'\r'));
    }
    // a different seed changes the data
    let status = bin()
        .args(["simulate", "--seed", "4", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(tmp.path().join("c"))
        .status()
        .unwrap();
    assert!(status.success());
    assert_ne!(
        fs::read(tmp.path().join("a/dataset.csv")).unwrap(),
        fs::read(tmp.path().join("c/dataset.csv")).unwrap()
    );
}

#[test]
fn empty_population_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), &STEP_DATA.replace("n = 2000", "n = 0"));
    let out = bin().args(["simulate", "--config"]).arg(&cfg_path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n must be"));
}

#[test]
fn bad_config_and_missing_flags_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), "[data]\nnonsense = 1\n");
    assert_eq!(bin().args(["fit", "--config"]).arg(&cfg_path).status().unwrap().code(), Some(2));
    assert_eq!(bin().arg("fit").status().unwrap().code(), Some(2));
}

#[test]
fn manifest_feeds_true_values_into_evaluation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load(tmp.path(), STEP_DATA);
    pipeline::cmd_simulate(&cfg).unwrap();
    pipeline::cmd_fit(&cfg).unwrap();
    pipeline::cmd_optimize(&cfg, None).unwrap();
    let eval = pipeline::cmd_evaluate(&cfg, &[]).unwrap();
    let gt = eval.ground_truth.expect("manifest present");
    // proposed plus the default treat-none / treat-all baselines
    assert_eq!(gt.len(), 3);
    assert!(gt.iter().all(|r| r.true_value.is_finite()));
}

#[test]
fn zero_effect_auc_sits_inside_the_null_band() {
    let tmp = tempfile::tempdir().unwrap();
    let body = STEP_DATA.replace(
        r#"{ family = "piecewise", feature = 0, thresholds = [0.5], levels = [0.6, 2.0] }"#,
        r#"{ family = "constant", value = 1.0 }"#,
    );
    let cfg = load(tmp.path(), &format!("{body}\n[estimator]\nnull_permutations = 200\n"));
    pipeline::cmd_simulate(&cfg).unwrap();
    let report = pipeline::cmd_fit(&cfg).unwrap();
    let arm = &report.arms[0];
    assert!(
        (arm.auc - arm.null_band.mean).abs() < 3.0 * arm.null_band.sd,
        "auc {} null {:?}",
        arm.auc,
        arm.null_band
    );
}

#[test]
fn step_effect_auc_beats_random_ranking() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load(tmp.path(), STEP_DATA);
    pipeline::cmd_simulate(&cfg).unwrap();
    let report = pipeline::cmd_fit(&cfg).unwrap();
    assert_eq!(report.estimator, "t-learner");
    assert!(report.arms[0].auc > report.arms[0].random_ranking_auc);
    let curve = fs::read_to_string(cfg.out_dir.join(pipeline::CURVE_FILE)).unwrap();
    assert!(curve.starts_with("rank,fraction,value,undefined_flag\n"));
    assert_eq!(curve.lines().count(), report.n_eval + 1);
}

#[test]
fn covariate_subset_is_named_in_the_fit_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load(tmp.path(), &format!("{STEP_DATA}\n[estimator]\nfeatures = [\"x1\"]\n"));
    pipeline::cmd_simulate(&cfg).unwrap();
    let report = pipeline::cmd_fit(&cfg).unwrap();
    assert_eq!(report.covariates, vec!["x1".to_string()]);
    assert!(report.covariate_set.contains("x1"));
}

#[test]
fn x_learner_with_three_arms_is_unsupported() {
    let tmp = tempfile::tempdir().unwrap();
    let body = STEP_DATA.replace("k = 1", "k = 2").replace(
        "arms = [",
        "arms = [\n  { family = \"constant\", value = 0.0 },",
    );
    let cfg_path = write_config(tmp.path(), &format!("{body}\n[estimator]\nkind = \"x-learner\"\n"));
    assert!(bin().args(["simulate", "--config"]).arg(&cfg_path).status().unwrap().success());
    let out = bin().args(["fit", "--config"]).arg(&cfg_path).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unconstrained_targets_exactly_the_positive_uplift_customers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load(tmp.path(), STEP_DATA);
    pipeline::cmd_simulate(&cfg).unwrap();
    pipeline::cmd_fit(&cfg).unwrap();
    let art = pipeline::cmd_optimize(&cfg, None).unwrap();

    let (_, eval) = pipeline::load_split(&cfg).unwrap();
    let model = uplift_policy::uplift::CateModel::from_json(
        &fs::read_to_string(cfg.out_dir.join(pipeline::MODEL_FILE)).unwrap(),
    )
    .unwrap();
    let est = uplift_policy::uplift::predict_cate(&model, &eval).unwrap();
    let positive = est.rows().iter().filter(|r| r[0] > 0.0).count();
    assert_eq!(art.report.targeting_proportion, positive as f64 / eval.len() as f64);
}

#[test]
fn zero_budget_writes_an_all_control_policy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load(
        tmp.path(),
        &format!("{STEP_DATA}\n[optimize.constraint]\nkind = \"budget\"\ncaps = [0]\n"),
    );
    pipeline::cmd_simulate(&cfg).unwrap();
    pipeline::cmd_fit(&cfg).unwrap();
    let art = pipeline::cmd_optimize(&cfg, None).unwrap();
    assert_eq!(art.report.targeting_proportion, 0.0);
    let text = fs::read_to_string(cfg.out_dir.join(pipeline::POLICY_FILE)).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn two_bucket_ratio_instance_treats_both_buckets() {
    // Bucket 1 (τ̂ = 4): sales 102 control, 100 treated. Bucket 2 (τ̂ = -1):
    // sales 95 control, 100 treated. With a 1% floor against treat-all,
    // treating only bucket 1 loses too much sales, so both are treated.
    let n = 20;
    let t: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let sales: Vec<f64> = (0..n)
        .map(|i| match (i < 10, i % 2) {
            (true, 0) => 102.0,
            (false, 0) => 95.0,
            _ => 100.0,
        })
        .collect();
    let ds = common::dataset(vec![0.5, 0.5], &t, &vec![0.0; n], &[("sales", sales)]);
    let tau: Vec<f64> = (0..n).map(|i| if i < 10 { 4.0 } else { -1.0 }).collect();
    let est = UpliftEstimates::binary(ds.ids(), &tau).unwrap();
    let spec = ConstraintSpec::RatioFloor {
        aux: "sales".into(),
        epsilon: 0.01,
        reference_arm: 1,
    };
    let out = policy::optimize(&est, &ds, &vec![1.0; n], &spec, 2, &RatioOptions::default()).unwrap();
    assert!(out.policy.assignment().iter().all(|&a| a == 1));
    assert_eq!(out.report.objective, 30.0);
}

#[test]
fn treat_none_proposal_gives_a_zero_lift_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load(tmp.path(), STEP_DATA);
    pipeline::cmd_simulate(&cfg).unwrap();
    let (_, eval) = pipeline::load_split(&cfg).unwrap();
    let none = tmp.path().join("none.csv");
    Policy::constant(eval.ids(), 0, 2).save(&none).unwrap();
    let art = pipeline::cmd_evaluate(&cfg, &[none]).unwrap();
    let row = art
        .report
        .comparisons
        .iter()
        .find(|c| c.baseline == "Targeting no one")
        .unwrap();
    assert_eq!(row.lifts[0].ips.value, Some(0.0));
    assert_eq!(row.lifts[0].snips.value, Some(0.0));

    let table = fs::read_to_string(cfg.out_dir.join(pipeline::LIFT_TABLE_FILE)).unwrap();
    assert!(table.lines().next().unwrap().contains("targeting_proportion"));
    let values = fs::read_to_string(cfg.out_dir.join(pipeline::POLICY_VALUES_FILE)).unwrap();
    // proposed + two default baselines, each with a targeting proportion
    assert_eq!(values.lines().count(), 4);
    assert!(values.lines().skip(1).all(|l| l.split(',').nth(1).unwrap().parse::<f64>().is_ok()));
}

#[test]
fn ips_tracks_the_oracle_at_ten_thousand() {
    let tmp = tempfile::tempdir().unwrap();
    let body = STEP_DATA.replace("n = 2000", "n = 14286");
    let cfg = load(tmp.path(), &format!("seed = 9\n{body}"));
    pipeline::cmd_simulate(&cfg).unwrap();
    pipeline::cmd_fit(&cfg).unwrap();
    pipeline::cmd_optimize(&cfg, None).unwrap();
    let art = pipeline::cmd_evaluate(&cfg, &[]).unwrap();
    for row in art.ground_truth.unwrap() {
        let rel = (row.ips - row.true_value).abs() / row.true_value.abs();
        assert!(rel < 0.05, "{}: ips {} true {}", row.policy, row.ips, row.true_value);
    }
}

#[test]
fn misaligned_policy_names_the_ids_and_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), STEP_DATA);
    assert!(bin().args(["simulate", "--config"]).arg(&cfg_path).status().unwrap().success());
    let bogus = tmp.path().join("bogus.csv");
    fs::write(&bogus, "id,arm\nnobody,1\n").unwrap();
    let out = bin()
        .args(["evaluate", "--config"])
        .arg(&cfg_path)
        .arg("--policy")
        .arg(&bogus)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nobody"));
}

#[test]
fn infeasible_floor_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    // negative sales under the reference arm make the floor unattainable
    let body = format!(
        r#"{STEP_DATA}
[[data.synth.aux]]
name = "sales"
noise_sd = 0.0
arms = [{{ family = "constant", value = -5.0 }}, {{ family = "constant", value = -10.0 }}]
[optimize]
groups = 10
[optimize.constraint]
kind = "ratio_floor"
aux = "sales"
epsilon = 0.1
reference_arm = 1
"#
    );
    let cfg_path = write_config(tmp.path(), &body);
    assert!(bin().args(["simulate", "--config"]).arg(&cfg_path).status().unwrap().success());
    assert!(bin().args(["fit", "--config"]).arg(&cfg_path).status().unwrap().success());
    let out = bin().args(["optimize", "--config"]).arg(&cfg_path).output().unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn csv_source_runs_every_stage() {
    let tmp = tempfile::tempdir().unwrap();
    // simulate into one directory, then treat the CSV as external data
    let sim = load(tmp.path(), STEP_DATA);
    pipeline::cmd_simulate(&sim).unwrap();
    let data = tmp.path().join("external.csv");
    fs::copy(sim.out_dir.join(pipeline::DATASET_FILE), &data).unwrap();
    let body = "out_dir = \"csv-run\"\n[data]\npath = \"external.csv\"\n[data.schema]\nlabels = [\"control\", \"t1\"]\n";
    let cfg_path = write_config(tmp.path(), body);
    let out = bin().args(["run", "--config"]).arg(&cfg_path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(tmp.path().join("csv-run").join(pipeline::SUMMARY_FILE)).unwrap();
    assert!(summary.contains("Targeting no one"));
    assert!(!summary.contains("Ground truth"));
}
