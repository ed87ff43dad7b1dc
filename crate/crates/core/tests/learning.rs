use murre::adapt::{adapt_sentences, ModelTranslator, RuleTranslator};
use murre::corpus::{DialectManifest, ParallelExample};
use murre::eval::distance_from_standard;
use murre::model::{build_vocabulary, Model, ModelConfig};
use murre::synth::{generate_corpus, RewriteRuleSet, SentenceLength};
use murre::textcodec::FlagMode;
use murre::training::{make_training_pairs, train, TrainingConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vocabulary() -> Vec<String> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/vocabulary.txt");
    std::fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

fn random_sentence(rng: &mut ChaCha8Rng, words: &[String]) -> Vec<String> {
    (0..rng.gen_range(1..=6)).map(|_| words[rng.gen_range(0..words.len())].clone()).collect()
}

#[test]
fn identity_mapping_is_learned() {
    let words = vocabulary();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let examples: Vec<ParallelExample> = (0..1200)
        .map(|_| {
            let s = random_sentence(&mut rng, &words);
            ParallelExample::new("ID", s.clone(), s).unwrap()
        })
        .collect();
    let (train_set, valid_set) = examples.split_at(1000);
    let dialects = DialectManifest::from_examples(&examples);
    let vocab = build_vocabulary::<&str>(&examples, &[]).unwrap();
    let mut model = Model::<f32>::new(vocab, dialects, FlagMode::Plain, ModelConfig::desk(0), 1).unwrap();
    let pairs = make_training_pairs(train_set, FlagMode::Plain, None, &model.dialects).unwrap();
    let valid = make_training_pairs(valid_set, FlagMode::Plain, None, &model.dialects).unwrap();
    let mut config = TrainingConfig::desk();
    config.steps = 500;
    config.checkpoint_every = 100;
    let run = train(&mut model, &pairs, &valid, &config, None).unwrap();
    let best = run.best_valid_loss().unwrap();
    assert!(best < 0.05, "valid loss {best}: {:?}", run.valid_log);

    let sources: Vec<Vec<String>> = valid_set.iter().map(|e| e.source_words.clone()).collect();
    let (out, _) = adapt_sentences(&ModelTranslator::greedy(&model), &sources, None).unwrap();
    let exact = out.iter().zip(&sources).filter(|(a, b)| a == b).count();
    assert!(exact * 10 >= sources.len() * 9, "{exact}/{} copied exactly", sources.len());
}

#[test]
fn final_n_distance_matches_vocabulary_share() {
    // three of ten words end in n, so about 30% of running words change
    let vocabulary = ["talon", "kadun", "pidän", "talo", "katu", "pitää", "metsä", "joki", "vene", "kala"];
    let set = RewriteRuleSet::parse("n / _ # -> ∅\n", "FN").unwrap();
    let corpus = generate_corpus(&vocabulary, std::slice::from_ref(&set), 2000, SentenceLength { min: 2, max: 8 }, 7).unwrap();
    let standard: Vec<Vec<String>> = corpus.iter().map(|e| e.source_words.clone()).collect();
    let (adapted, _) = adapt_sentences(&RuleTranslator { rules: std::slice::from_ref(&set) }, &standard, Some("FN")).unwrap();
    let target: Vec<Vec<String>> = corpus.iter().map(|e| e.target_words.clone()).collect();
    assert_eq!(adapted, target);
    let report = distance_from_standard(&adapted, &standard).unwrap();
    let micro = report.micro_wer.unwrap();
    assert!((micro - 0.30).abs() < 0.03, "micro {micro}");
    assert_eq!(report.totals.insertions + report.totals.deletions, 0);
}
