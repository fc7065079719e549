use baitscore::cues::CueLexicons;
use baitscore::model::{learnability_config, random_features, tiny_config, train, Branch, Network, TrainedModel};
use baitscore::nn::Graph;
use baitscore::synth::separable_corpus;
use baitscore::text::{clean, Vocabulary};
use baitscore::Exec;

fn run(branch: Branch, exec: Exec) -> TrainedModel {
    let ds = separable_corpus(16, 3);
    let lex = CueLexicons::bundled();
    let mut cfg = learnability_config(branch, true);
    cfg.epochs = 5;
    cfg.val_fraction = 0.25;
    let toks: Vec<Vec<String>> = ds.posts().iter().map(|p| clean(&p.tweet_text())).collect();
    let vocab = Vocabulary::fit(&toks, cfg.vocab_size).unwrap();
    train(Network::build(&cfg, None).unwrap(), &ds, &vocab, &lex, None, exec).unwrap()
}

#[test]
fn same_seed_same_parameters() {
    for branch in [Branch::Cnn, Branch::Lstm] {
        let a = run(branch, Exec::Parallel);
        let b = run(branch, Exec::Parallel);
        assert_eq!(a, b);
    }
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    for branch in [Branch::Cnn, Branch::Lstm] {
        assert_eq!(run(branch, Exec::Sequential), run(branch, Exec::Parallel));
    }
}

#[test]
fn full_batch_gradient_ignores_row_order() {
    for branch in [Branch::Cnn, Branch::Lstm] {
        let cfg = tiny_config(branch, vec![]);
        let net = Network::build(&cfg, None).unwrap();
        let feats = random_features(&cfg, 6, 1);
        let targets = [0.1, 0.9, 0.4, 0.0, 1.0, 0.6];
        let grads = |rows: &[usize]| {
            let t: Vec<f64> = rows.iter().map(|&r| targets[r]).collect();
            let mut g = Graph::new(net.params());
            let out = net.forward(&mut g, &feats, rows).unwrap();
            let loss = g.mse(out, &t).unwrap();
            g.backward(loss).unwrap()
        };
        let a = grads(&[0, 1, 2, 3, 4, 5]);
        let b = grads(&[5, 3, 1, 0, 4, 2]);
        for ((_, x), (_, y)) in a.iter().zip(b.iter()) {
            for (u, v) in x.data().iter().zip(y.data()) {
                assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0), "{u} vs {v}");
            }
        }
    }
}

#[test]
fn different_seeds_differ() {
    let mut cfg = tiny_config(Branch::Lstm, vec![]);
    let a = Network::build(&cfg, None).unwrap();
    cfg.seed = 1;
    let b = Network::build(&cfg, None).unwrap();
    assert_ne!(a.params(), b.params());
}
