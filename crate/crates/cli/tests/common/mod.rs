#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use popbias::synthetic::{generate, write_movielens, SyntheticConfig};

pub fn small_config(seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        n_users: 300,
        n_items: 400,
        min_ratings: 15,
        mean_extra_ratings: 20.0,
        max_ratings: 150,
        seed,
        ..SyntheticConfig::default()
    }
}

/// Writes a synthetic MovieLens-format dataset under `root/name` and returns the directory.
pub fn synthetic_dir(root: &Path, name: &str, cfg: &SyntheticConfig) -> PathBuf {
    let dir = root.join(name);
    write_movielens(&generate(cfg), &dir).unwrap();
    dir
}

/// A stub fixture answering every prompt with the first `n` catalog titles.
pub fn write_stub_default(dir: &Path, data_dir: &Path, n: usize) {
    let data = popbias::eval::Dataset::load(data_dir, popbias::catalog::ParseMode::Strict).unwrap();
    let lines: Vec<String> = data
        .catalog
        .entries()
        .iter()
        .take(n)
        .enumerate()
        .map(|(i, e)| format!("{}. {} ({})", i + 1, e.display_title(), e.year))
        .collect();
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("default.txt"), format!("Here is your list:\n\n{}\n", lines.join("\n"))).unwrap();
}

pub fn popbias(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_popbias")).args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn eval_config(data: &Path, out: &Path, stub: Option<&Path>) -> String {
    let mut s = format!(
        r#"seed = 5
out = "{}"
[data]
dir = "{}"
[eval.folds]
fold_count = 2
users_per_fold = 40
"#,
        out.display(),
        data.display()
    );
    s.push_str("[[recommenders]]\nkind = \"random\"\n[[recommenders]]\nkind = \"top_pop\"\n[[recommenders]]\nkind = \"item_knn\"\n[[recommenders]]\nkind = \"user_knn\"\n");
    if let Some(dir) = stub {
        s.push_str(&format!(
            "[[recommenders]]\nkind = \"wok\"\n[provider]\ndialect = \"stub\"\nstub_dir = \"{}\"\n",
            dir.display()
        ));
    }
    s
}
