mod common;

use std::fs;

use common::*;
use popbias::distfit::sample_pareto;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn ingest_toy_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("toy");
    fs::create_dir_all(&d).unwrap();
    fs::write(d.join("movies.dat"), "1::Heat (1995)::Action\n2::Matrix, The (1999)::Sci-Fi\n3::Fargo (1996)::Crime\n")
        .unwrap();
    fs::write(d.join("ratings.dat"), "1::1::5::10\n1::2::4::11\n2::2::3::12\n3::2::4::13\n").unwrap();
    let out = tmp.path().join("out");
    let o = popbias(&["ingest", d.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("movies:        3") && s.contains("interactions:  4"), "{s}");
    assert!(s.contains("most rated:    2 Matrix, The (3 ratings)"), "{s}");
    let index: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("catalog_index.json")).unwrap()).unwrap();
    assert_eq!(index["entries"][1]["normalized_title"], "matrix");
    assert_eq!(index["entries"][1]["popularity"], 3);
}

#[test]
fn ingest_missing_file_names_path() {
    let tmp = tempfile::tempdir().unwrap();
    let o = popbias(&["ingest", tmp.path().to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("movies.dat"), "{}", stderr(&o));
}

#[test]
fn ingest_max_item_matches_sort_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let d = synthetic_dir(tmp.path(), "syn", &small_config(3));
    let data = popbias::eval::Dataset::load(&d, popbias::catalog::ParseMode::Strict).unwrap();
    let mut counts: std::collections::BTreeMap<u64, u64> = Default::default();
    for r in &data.interactions {
        *counts.entry(r.item.0).or_default() += 1;
    }
    let mut v: Vec<(u64, u64)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let summary = popbias_cli::cmd_ingest(&d, &tmp.path().join("o"), popbias::catalog::ParseMode::Strict).unwrap();
    assert_eq!((summary.top_item.0, summary.top_item.2), v[0]);
}

#[test]
fn fit_scores_file() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs: Vec<f64> = sample_pareto(&mut rng, 0.68, 1.0, 20_000);
    let p = tmp.path().join("scores.txt");
    fs::write(&p, xs.iter().map(|x| format!("{x}\n")).collect::<String>()).unwrap();
    let o = popbias(&["fit", "--scores", p.to_str().unwrap(), "--x-min", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let alpha: f64 = stdout(&o).split_whitespace().next().unwrap().trim_start_matches("alpha=").parse().unwrap();
    assert!((alpha - 0.68).abs() < 0.034, "{alpha}");

    fs::write(&p, "4\n".repeat(20)).unwrap();
    let o = popbias(&["fit", "--scores", p.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unbounded"), "{}", stderr(&o));
}

#[test]
fn desiderata_filters() {
    let o = popbias(&["desiderata"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 6);
    let o = popbias(&["desiderata", "--metric", "pru"]);
    let header = stdout(&o).lines().next().unwrap().to_owned();
    assert_eq!(header.split_whitespace().collect::<Vec<_>>(), ["desideratum", "pru"]);
    let o = popbias(&["desiderata", "--metric", "popularity"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown metric"));
}

#[test]
fn evaluate_baselines_and_stub() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synthetic_dir(tmp.path(), "syn", &small_config(11));
    let out = tmp.path().join("base");
    let cfg = tmp.path().join("base.toml");
    fs::write(&cfg, eval_config(&data, &out, None)).unwrap();
    let o = popbias(&["evaluate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "{csv}");
    assert!(out.join("manifest.json").exists() && out.join("report.md").exists());

    let stub = tmp.path().join("stub");
    write_stub_default(&stub, &data, 10);
    let out2 = tmp.path().join("wok");
    let cfg2 = tmp.path().join("wok.toml");
    fs::write(&cfg2, eval_config(&data, &out2, Some(&stub))).unwrap();
    let o = popbias(&["evaluate", "--config", cfg2.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out2.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().last().unwrap().starts_with("WOK-stub,"));

    let c = popbias(&["correlate", out2.join("report.csv").to_str().unwrap()]);
    assert!(c.status.success(), "{}", stderr(&c));
    let m = stdout(&c);
    let rows: Vec<Vec<&str>> = m.lines().map(|l| l.split(',').collect()).collect();
    assert!(rows[0].contains(&"log_pop_diff"), "{m}");
    for (i, row) in rows.iter().enumerate().skip(1) {
        assert_eq!(row[i], "1.0000", "{m}");
    }
}

#[test]
fn wok_failure_drops_only_its_row() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synthetic_dir(tmp.path(), "syn", &small_config(12));
    let empty_stub = tmp.path().join("empty");
    fs::create_dir_all(&empty_stub).unwrap();
    let out = tmp.path().join("o");
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, eval_config(&data, &out, Some(&empty_stub))).unwrap();
    let o = popbias(&["evaluate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("failed: WOK-stub"));
    assert_eq!(fs::read_to_string(out.join("report.csv")).unwrap().lines().count(), 5);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["run"]["failures"][0]["recommender"], "WOK-stub");
}

#[test]
fn bad_config_and_short_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "unknown_key = 1\n").unwrap();
    let o = popbias(&["evaluate", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));

    let r = tmp.path().join("r.csv");
    fs::write(&r, "recommender,hr5,hr5_sem,hr10,hr10_sem,log_pop_diff,log_pop_diff_sem,unmatched,unmatched_sem\nA,0.1,0,0.1,0,1,0,0,0\nB,0.1,0,0.1,0,2,0,0,0\n").unwrap();
    let o = popbias(&["correlate", r.to_str().unwrap()]);
    assert!(!o.status.success());
}
