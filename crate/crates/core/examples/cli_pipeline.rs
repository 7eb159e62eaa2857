// Drives every command-line stage in-process on a synthetic world.

use wealthmap::pipeline::run;

pub fn run_example() -> wealthmap::Result<()> {
    let dir = std::env::temp_dir().join(format!("wealthmap-cli-{}", std::process::id()));
    let d = |name: &str| dir.join(name).display().to_string();
    let out = dir.display().to_string();
    let stage = |args: &[&str]| -> wealthmap::Result<()> {
        let mut argv = vec!["wealthmap", "--seed", "4", "--out", &out];
        argv.extend_from_slice(args);
        for path in run(argv)? {
            println!("wrote {}", path.display());
        }
        Ok(())
    };

    stage(&["synth", "--countries", "2", "--tiles", "225", "--clusters", "40"])?;
    stage(&[
        "ingest",
        "--features", &d("features.csv"),
        "--population", &d("population.csv"),
        "--clusters", &d("clusters.csv"),
        "--households", &d("households.csv"),
    ])?;
    stage(&["train", "--training", &d("training.csv"), "--features", &d("features.csv"), "--trees", "40"])?;
    stage(&["evaluate", "--training", &d("training.csv"), "--protocol", "basic_kfold", "--trees", "40"])?;
    stage(&["predict", "--model", &d("model.txt"), "--features", &d("features.csv"), "--population", &d("population.csv")])?;
    stage(&["aggregate", "--rwi", &d("rwi.csv"), "--admin", &d("admin_assignment.csv"), "--truth", &d("unit_truth.csv")])?;
    stage(&["awe", "--rwi", &d("rwi.csv"), "--country-stats", &d("country_stats.csv")])?;
    stage(&[
        "target",
        "--rwi", &d("rwi.csv"),
        "--population", &d("population.csv"),
        "--admin", &d("admin_assignment.csv"),
        "--clusters", &d("clusters.csv"),
        "--households", &d("households.csv"),
        "--eval-households", &d("target_households.csv"),
        "--scheme", "ml_tiles,knn_clusters:1",
    ])?;

    let report = std::fs::read_to_string(dir.join("targeting_report.csv")).map_err(|e| wealthmap::Error::io(&dir, e))?;
    print!("{report}");
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("cli pipeline example");
}
