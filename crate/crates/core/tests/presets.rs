//! Every shipped preset parses and builds all of its agents.

use std::path::Path;

use heavy_rl::harness::ExperimentConfig;

#[test]
fn shipped_presets_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let (cfg, base) = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let env = cfg.env.build(&base).unwrap();
            cfg.validate(&env).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 5);
}

#[test]
fn desk_presets_cover_the_compared_agents() {
    for name in ["doublechain-desk.toml", "sixarms-desk.toml"] {
        let (cfg, _) = ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)).unwrap();
        let labels: Vec<String> = cfg.agents.iter().map(|a| a.label()).collect();
        for expected in ["heavy_ucrl2", "heavy_q", "qlearning", "psrl", "ucrl2_valid"] {
            assert!(labels.iter().any(|l| l == expected), "{name} lacks {expected}");
        }
        assert_eq!(cfg.conf_scales, vec![0.01, 0.1, 1.0]);
        assert_eq!(cfg.seeds.len(), 10);
    }
}
