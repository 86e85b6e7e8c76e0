//! The bundled graph and configs stay loadable and in sync with their
//! generators.

use std::fs;
use std::path::Path;

use netsir::cli::ExperimentConfig;
use netsir::graph::{load_edge_list, synthetic_social};

fn root() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn social68_matches_generator() {
    let text = fs::read_to_string(root().join("data/social68.edgelist")).unwrap();
    let g = load_edge_list(&text).unwrap();
    assert_eq!(g, synthetic_social(68, 10.61, 7));
    assert_eq!(g.to_edge_list(), text);
}

#[test]
fn configs_parse_and_reference_existing_graphs() {
    let mut seen = 0;
    for entry in fs::read_dir(root().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let g = cfg.load_graph().unwrap();
        cfg.initially_infected.resolve(g.node_count()).unwrap();
        if cfg.beta_box.is_some() {
            cfg.cost_model(g.node_count()).unwrap();
        }
        if cfg.rates.is_some() {
            cfg.params(&g).unwrap();
        }
        seen += 1;
    }
    assert_eq!(seen, 4);
}
