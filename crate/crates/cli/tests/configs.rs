use std::path::Path;

use ewlab_cli::config::Config;
use ewlab_cli::experiments::{prepare, ALL};

fn shipped(name: &str) -> Config {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    Config::from_path(&path).unwrap()
}

#[test]
fn default_file_matches_the_built_in_defaults() {
    assert_eq!(shipped("default.toml"), Config::default());
    assert_eq!(Config::from_toml("").unwrap(), Config::default());
}

#[test]
fn shipped_configs_validate_for_every_experiment() {
    for name in ["default.toml", "acceptance.toml"] {
        let cfg = shipped(name);
        for e in ALL {
            prepare(&cfg, e).unwrap_or_else(|err| panic!("{name} {e}: {err}"));
        }
    }
}
