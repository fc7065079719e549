use baitscore::media::{category_proportions, proportion_trend, CategoryMap, ImageVectorStore};
use baitscore::model::{learnability_config, train, Branch, ModelConfig, Network, VectorInput};
use baitscore::synth::{random_tags, separable_corpus, trend_fixture};
use baitscore::text::{clean, Vocabulary};
use baitscore::{cues::CueLexicons, media, Error, Exec};

#[test]
fn class_rows_are_distributions() {
    let cmap = CategoryMap::bundled();
    for seed in 0..20 {
        let (tags, classes) = random_tags(150, seed, &cmap);
        let t = category_proportions(&tags, &classes, &cmap, 0.5).unwrap();
        for row in t.rows.iter().filter(|r| !r.empty) {
            assert!((row.proportions.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn trend_fixture_shows_vehicle_down_food_up() {
    let cmap = CategoryMap::bundled();
    let (tags, scores) = trend_fixture(400, 3, &cmap);
    let t = proportion_trend(&tags, &scores, &cmap, 5, 0.5).unwrap();
    assert_eq!(t.bins.len(), 5);
    let vehicle = t.series("vehicle").unwrap();
    let food = t.series("food").unwrap();
    assert!(vehicle.windows(2).all(|w| w[1].1 < w[0].1), "{vehicle:?}");
    assert!(food.windows(2).all(|w| w[1].1 > w[0].1), "{food:?}");
    for b in &t.bins {
        assert!((b.row.proportions.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

fn image_config() -> ModelConfig {
    let mut cfg = learnability_config(Branch::Cnn, false);
    cfg.vector_inputs = vec![VectorInput::Image];
    cfg.image_dim = 32;
    cfg.epochs = 2;
    cfg
}

#[test]
fn image_vectors_feed_the_fusion_branch() {
    let ds = separable_corpus(8, 1);
    let ids: Vec<&str> = ds.posts().iter().map(|p| p.id.as_str()).collect();
    let store = media::synthetic_image_vectors(&ids[..8], 32, 0);
    let cfg = image_config();
    let toks: Vec<Vec<String>> = ds.posts().iter().map(|p| clean(&p.tweet_text())).collect();
    let vocab = Vocabulary::fit(&toks, cfg.vocab_size).unwrap();
    let lex = CueLexicons::bundled();
    let m = train(Network::build(&cfg, None).unwrap(), &ds, &vocab, &lex, Some(&store), Exec::Parallel).unwrap();
    let feats = m.featurize(&ds, &lex, Some(&store), Exec::Sequential).unwrap();
    assert_eq!(feats.vector(0), store.get(ids[0]).unwrap());
    assert!(feats.vector(15).iter().all(|&v| v == 0.0));

    let mut strict = cfg.clone();
    strict.missing_image = baitscore::model::MissingImage::Error;
    let err = train(Network::build(&strict, None).unwrap(), &ds, &vocab, &lex, Some(&store), Exec::Parallel);
    assert!(matches!(err, Err(Error::MissingImage(_))), "{err:?}");
}

#[test]
fn vector_files_round_trip() {
    let store = media::synthetic_image_vectors(&["a", "b"], 2048, 5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.jsonl");
    store.write(std::fs::File::create(&path).unwrap()).unwrap();
    assert_eq!(ImageVectorStore::load(&path, 2048).unwrap(), store);
    assert!(matches!(ImageVectorStore::load(&path, 2047), Err(Error::Dimension { .. })));
}
