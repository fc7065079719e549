use baitscore::model::{network_grad_check, tiny_config, Branch, VectorInput};
use baitscore::nn::primitive_checks;
use baitscore::Exec;

#[test]
fn primitives_match_central_differences() {
    for exec in [Exec::Sequential, Exec::Parallel] {
        for (name, r) in primitive_checks(exec).unwrap() {
            assert!(r.max_rel_error < 1e-4, "{name}: {r:?}");
        }
    }
}

#[test]
fn assembled_networks_match_central_differences() {
    let inputs = [vec![], vec![VectorInput::CuesTweet], vec![VectorInput::CuesTweet, VectorInput::Image]];
    for branch in [Branch::Cnn, Branch::Lstm] {
        for v in &inputs {
            let cfg = tiny_config(branch, v.clone());
            let r = network_grad_check(&cfg, 3, 7, Exec::Parallel).unwrap();
            assert!(r.max_rel_error < 1e-4, "{branch} {v:?}: {r:?}");
            assert!(r.checked > 100);
        }
    }
}

#[test]
fn fusion_only_network_matches_central_differences() {
    let mut cfg = tiny_config(Branch::Lstm, vec![VectorInput::CuesTweet, VectorInput::CuesArticle]);
    cfg.text_branch = false;
    let r = network_grad_check(&cfg, 4, 7, Exec::Sequential).unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}
