#[allow(dead_code)]
mod tiles_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/tiles.rs"));
}

#[test]
fn tiles_example_runs() {
    tiles_example::run_example().expect("tiles example should run");
}

#[allow(dead_code)]
mod ingest_tables_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/ingest_tables.rs"));
}

#[test]
fn ingest_tables_example_runs() {
    ingest_tables_example::run_example().expect("ingest_tables example should run");
}

#[allow(dead_code)]
mod asset_index_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/asset_index.rs"));
}

#[test]
fn asset_index_example_runs() {
    asset_index_example::run_example().expect("asset_index example should run");
}

#[allow(dead_code)]
mod train_model_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/train_model.rs"));
}

#[test]
fn train_model_example_runs() {
    train_model_example::run_example().expect("train_model example should run");
}

#[allow(dead_code)]
mod cross_validation_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/cross_validation.rs"));
}

#[test]
fn cross_validation_example_runs() {
    cross_validation_example::run_example().expect("cross_validation example should run");
}

#[allow(dead_code)]
mod wealth_map_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/wealth_map.rs"));
}

#[test]
fn wealth_map_example_runs() {
    wealth_map_example::run_example().expect("wealth_map example should run");
}

#[allow(dead_code)]
mod absolute_wealth_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/absolute_wealth.rs"));
}

#[test]
fn absolute_wealth_example_runs() {
    absolute_wealth_example::run_example().expect("absolute_wealth example should run");
}

#[allow(dead_code)]
mod error_model_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/error_model.rs"));
}

#[test]
fn error_model_example_runs() {
    error_model_example::run_example().expect("error_model example should run");
}

#[allow(dead_code)]
mod targeting_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/targeting.rs"));
}

#[test]
fn targeting_example_runs() {
    targeting_example::run_example().expect("targeting example should run");
}

#[allow(dead_code)]
mod cli_pipeline_example {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/cli_pipeline.rs"));
}

#[test]
fn cli_pipeline_example_runs() {
    cli_pipeline_example::run_example().expect("cli_pipeline example should run");
}
