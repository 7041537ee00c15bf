use once_cell::sync::Lazy;

use super::*;
use crate::corpus::synthetic::{generate_synthetic, SyntheticBundle, SyntheticStyleSpec};
use crate::corpus::{build_vocab, tokenize, SplitRatios, EOS_ID};

fn vocab_of(text: &str) -> Vocabulary {
    build_vocab([text], 1, 1000).unwrap()
}

fn seq(text: &str, vocab: &Vocabulary) -> TokenSequence {
    tokenize(text, vocab, 24).unwrap()
}

#[test]
fn single_token_sentence_vector_is_that_vector() {
    let vocab = vocab_of("alpha beta");
    let table = EmbeddingTable::hashed(7).resolve(&vocab);
    let s = seq("alpha", &vocab);
    let v = sentence_vector(&s, &table).unwrap();
    let direct = EmbeddingTable::hashed(7).vector("alpha").unwrap();
    assert_eq!(v, direct);
}

#[test]
fn opposite_vectors_average_to_zero() {
    // hand-built table: two tokens with v and -v
    let vocab = vocab_of("plus minus");
    let mut vectors = HashMap::new();
    let mut v = [0.0; EMBED_DIM];
    v[3] = 2.0;
    v[40] = -1.0;
    let mut neg = [0.0; EMBED_DIM];
    for (o, i) in neg.iter_mut().zip(v.iter()) {
        *o = -i;
    }
    vectors.insert("plus".to_string(), v);
    vectors.insert("minus".to_string(), neg);
    let table = EmbeddingTable::File { vectors }.resolve(&vocab);
    let s = seq("plus minus", &vocab);
    let mean = sentence_vector(&s, &table).unwrap();
    assert!(mean.iter().all(|x| *x == 0.0));
}

#[test]
fn three_token_mean_matches_brute_force() {
    let vocab = vocab_of("one two three");
    let table = EmbeddingTable::hashed(3);
    let resolved = table.resolve(&vocab);
    let s = seq("one two three", &vocab);
    let mean = sentence_vector(&s, &resolved).unwrap();
    // independent summation oracle
    let (a, b, c) = (
        table.vector("one").unwrap(),
        table.vector("two").unwrap(),
        table.vector("three").unwrap(),
    );
    for k in 0..EMBED_DIM {
        let brute = (a[k] + b[k] + c[k]) / 3.0;
        assert!((mean[k] - brute).abs() < 1e-12);
    }
}

#[test]
fn effectively_empty_sentence_is_an_error() {
    let vocab = vocab_of("word");
    let table = EmbeddingTable::hashed(1).resolve(&vocab);
    let eos_only = TokenSequence::new(vec![EOS_ID], vocab.len()).unwrap();
    assert!(matches!(
        sentence_vector(&eos_only, &table),
        Err(Error::EmptySentence)
    ));
}

#[test]
fn identical_sentences_preserve_exactly() {
    let vocab = vocab_of("good food bad taste");
    let table = EmbeddingTable::hashed(5).resolve(&vocab);
    let x = seq("good food", &vocab);
    let (score, degen) = content_preservation(&x, &x, &table).unwrap();
    assert_eq!(score, 1.0);
    assert!(!degen);
}

#[test]
fn orthogonal_means_score_zero() {
    let vocab = vocab_of("aa bb");
    let mut vectors = HashMap::new();
    let mut va = [0.0; EMBED_DIM];
    va[0] = 1.0;
    let mut vb = [0.0; EMBED_DIM];
    vb[1] = 1.0;
    vectors.insert("aa".to_string(), va);
    vectors.insert("bb".to_string(), vb);
    let table = EmbeddingTable::File { vectors }.resolve(&vocab);
    let (score, _) = content_preservation(&seq("aa", &vocab), &seq("bb", &vocab), &table).unwrap();
    assert!(score.abs() < 1e-15);
}

#[test]
fn toy_cosine_matches_hand_computed_value() {
    // fixed 3-word table, ("good food", "bad food"); the expected value
    // comes from the brute-force oracle below, frozen here.
    let vocab = vocab_of("good bad food");
    let mut vectors = HashMap::new();
    let mut vg = [0.0; EMBED_DIM];
    vg[0] = 1.0;
    vg[1] = 2.0;
    let mut vb = [0.0; EMBED_DIM];
    vb[0] = -1.0;
    vb[1] = 2.0;
    let mut vf = [0.0; EMBED_DIM];
    vf[2] = 4.0;
    vectors.insert("good".to_string(), vg);
    vectors.insert("bad".to_string(), vb);
    vectors.insert("food".to_string(), vf);
    let table = EmbeddingTable::File { vectors }.resolve(&vocab);
    let (score, _) = content_preservation(
        &seq("good food", &vocab),
        &seq("bad food", &vocab),
        &table,
    )
    .unwrap();
    // oracle: x = (vg+vf)/2 = [0.5, 1, 2], y = (vb+vf)/2 = [-0.5, 1, 2]
    // dot = -0.25 + 1 + 4 = 4.75; |x| = |y| = sqrt(0.25 + 1 + 4) = sqrt(5.25)
    let expected = 4.75 / 5.25;
    assert!((score - expected).abs() < 1e-12, "{score} vs {expected}");
}

#[test]
fn preservation_is_symmetric_and_order_invariant() {
    let vocab = vocab_of("one two three four five");
    let table = EmbeddingTable::hashed(11).resolve(&vocab);
    let x = seq("one two three", &vocab);
    let y = seq("three five one", &vocab);
    let (xy, _) = content_preservation(&x, &y, &table).unwrap();
    let (yx, _) = content_preservation(&y, &x, &table).unwrap();
    assert!((xy - yx).abs() < 1e-15);
    // token order inside a sentence cannot matter under mean pooling
    let y_shuffled = seq("five one three", &vocab);
    let (xy2, _) = content_preservation(&x, &y_shuffled, &table).unwrap();
    assert!((xy - xy2).abs() < 1e-15);
}

#[test]
fn hash_embeddings_are_a_pure_function() {
    let a = EmbeddingTable::hashed(9).vector("token").unwrap();
    let b = EmbeddingTable::hashed(9).vector("token").unwrap();
    let c = EmbeddingTable::hashed(10).vector("token").unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn embedding_file_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.txt");
    let mut line = String::from("word");
    for i in 0..EMBED_DIM {
        line.push_str(&format!(" {}", i as f64 * 0.5));
    }
    std::fs::write(&path, format!("{line}\n")).unwrap();
    let table = EmbeddingTable::load(&path).unwrap();
    let v = table.vector("word").unwrap();
    assert_eq!(v[2], 1.0);
    assert!(table.vector("missing").is_none());

    std::fs::write(&path, "short 1.0 2.0\n").unwrap();
    assert!(matches!(
        EmbeddingTable::load(&path),
        Err(Error::MalformedLine { line: 1, .. })
    ));
}

// ------------------------------------------------------- classifier tests

fn small_spec(marker_rate: f64) -> SyntheticStyleSpec {
    let mut spec = SyntheticStyleSpec::default_benchmark();
    spec.content_vocab = 60;
    spec.len_min = 4;
    spec.len_max = 8;
    spec.marker_rate = marker_rate;
    spec.bias_rate = 0.5;
    spec.seed = 21;
    spec
}

fn quick_cfg() -> EvalClassifierConfig {
    EvalClassifierConfig {
        d_embed: 10,
        d_hidden: 12,
        max_epochs: 5,
        seed: 6,
        ..EvalClassifierConfig::default()
    }
}

static TRAINED: Lazy<(SyntheticBundle, EvalClassifier, EvalClassifier)> = Lazy::new(|| {
    let bundle = generate_synthetic(&small_spec(1.0), 700, &SplitRatios::default(), 24).unwrap();
    let clf1 =
        train_eval_classifier(&bundle.corpus1, &quick_cfg(), &bundle.vocab, |_, _, _| {}).unwrap();
    let clf2 =
        train_eval_classifier(&bundle.corpus2, &quick_cfg(), &bundle.vocab, |_, _, _| {}).unwrap();
    (bundle, clf1, clf2)
});

#[test]
fn separable_corpus_reaches_high_heldout_accuracy() {
    let (bundle, clf1, _) = &*TRAINED;
    let test: Vec<(&TokenSequence, u8)> = bundle
        .corpus1
        .sentences
        .iter()
        .filter(|s| s.split == Split::Test)
        .map(|s| (&s.seq, s.class))
        .collect();
    let acc = clf1.accuracy(&test).unwrap();
    assert!(acc >= 0.95, "held-out accuracy {acc}");
}

#[test]
fn label_shuffled_data_stays_at_chance() {
    use rand::seq::SliceRandom;
    let mut bundle =
        generate_synthetic(&small_spec(1.0), 1200, &SplitRatios::default(), 24).unwrap();
    // shuffle the class labels within the corpus
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut labels: Vec<u8> = bundle.corpus1.sentences.iter().map(|s| s.class).collect();
    labels.shuffle(&mut rng);
    for (s, label) in bundle.corpus1.sentences.iter_mut().zip(labels) {
        s.class = label;
    }
    let mut cfg = quick_cfg();
    cfg.min_accuracy = 0.0;
    cfg.max_epochs = 3;
    let clf =
        train_eval_classifier(&bundle.corpus1, &cfg, &bundle.vocab, |_, _, _| {}).unwrap();
    let eval: Vec<(&TokenSequence, u8)> = bundle
        .corpus1
        .sentences
        .iter()
        .filter(|s| s.split != Split::Classifier)
        .map(|s| (&s.seq, s.class))
        .collect();
    let acc = clf.accuracy(&eval).unwrap();
    assert!((acc - 0.5).abs() <= 0.03, "accuracy {acc}");
}

#[test]
fn eval_classifier_gradients_match_central_differences() {
    let (bundle, _, _) = &*TRAINED;
    let mut cfg = quick_cfg();
    cfg.d_embed = 5;
    cfg.d_hidden = 4;
    let clf = EvalClassifier::init(&cfg, bundle.corpus1.attribute.clone(), &bundle.vocab).unwrap();
    let seq = &bundle.corpus1.sentences[0].seq;
    let mut grads = GradStore::zeros_like(&clf.params);
    clf.train_loss_and_grad(seq, 1, &mut grads).unwrap();
    let mut store = clf.params.clone();
    let report = crate::nn::gradcheck::grad_check(
        &mut store,
        &grads,
        |s| {
            let mut m = clf.clone();
            m.params = s.clone();
            let mut g = GradStore::zeros_like(&m.params);
            m.train_loss_and_grad(seq, 1, &mut g).unwrap()
        },
        crate::nn::gradcheck::DEFAULT_STEP,
        19,
    );
    assert!(report.max_error() < 1e-4, "worst {:?}", report.worst());
}

#[test]
fn strength_columns_sum_to_one_and_track_pure_sets() {
    let (bundle, clf1, clf2) = &*TRAINED;
    let class0: Vec<&TokenSequence> = bundle.corpus1.seqs(Split::Test, 0);
    for mode in [StrengthMode::MeanProb, StrengthMode::Fraction] {
        let m = style_strength(&class0, clf1, clf2, mode).unwrap();
        assert!((m.attr1[0] + m.attr1[1] - 1.0).abs() < 1e-6);
        assert!((m.attr2[0] + m.attr2[1] - 1.0).abs() < 1e-6);
        assert!(m.attr1[0] > 0.9, "class-0 set strength {:?}", m.attr1);
    }
}

#[test]
fn single_sentence_strength_equals_its_probabilities() {
    let (bundle, clf1, clf2) = &*TRAINED;
    let s = &bundle.corpus1.sentences[0].seq;
    let m = style_strength(&[s], clf1, clf2, StrengthMode::MeanProb).unwrap();
    let p1 = clf1.classify_prob(s).unwrap();
    let p2 = clf2.classify_prob(s).unwrap();
    assert_eq!(m.attr1, p1);
    assert_eq!(m.attr2, p2);
}

#[test]
fn eval_checkpoint_round_trip_is_bit_identical() {
    let (bundle, clf1, _) = &*TRAINED;
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("e.ckpt");
    let sidecar = dir.path().join("e.json");
    clf1.save(&ckpt, &sidecar).unwrap();
    let loaded = EvalClassifier::load(&ckpt, &sidecar).unwrap();
    assert_eq!(loaded.content_hash(), clf1.content_hash());
    for s in bundle.corpus1.sentences.iter().take(20) {
        assert_eq!(
            clf1.classify_prob(&s.seq).unwrap(),
            loaded.classify_prob(&s.seq).unwrap()
        );
    }
}

#[test]
fn identity_pairs_report_full_preservation() {
    let (bundle, clf1, clf2) = &*TRAINED;
    let pairs: Vec<(TokenSequence, TokenSequence)> = bundle
        .corpus1
        .seqs(Split::Test, 1)
        .into_iter()
        .map(|s| (s.clone(), s.clone()))
        .collect();
    let table = EmbeddingTable::hashed(1).resolve(&bundle.vocab);
    let report = build_report(
        "identity",
        "none",
        &pairs,
        &table,
        clf1,
        clf2,
        StrengthMode::MeanProb,
    )
    .unwrap();
    assert_eq!(report.content_preservation, 1.0);
    assert_eq!(report.degenerate_pairs, 0);
    // identity output strength equals the source-set strength
    let sources: Vec<&TokenSequence> = bundle.corpus1.seqs(Split::Test, 1);
    let src = style_strength(&sources, clf1, clf2, StrengthMode::MeanProb).unwrap();
    assert_eq!(report.strength.attr1, src.attr1);
}

#[test]
fn report_json_round_trips_bit_exactly() {
    let (bundle, clf1, clf2) = &*TRAINED;
    let pairs: Vec<(TokenSequence, TokenSequence)> = bundle
        .corpus1
        .seqs(Split::Test, 0)
        .into_iter()
        .map(|s| (s.clone(), s.clone()))
        .collect();
    let table = EmbeddingTable::hashed(2).resolve(&bundle.vocab);
    let report = build_report(
        "m",
        "c",
        &pairs,
        &table,
        clf1,
        clf2,
        StrengthMode::MeanProb,
    )
    .unwrap();
    let json = report.to_json().unwrap();
    let parsed = EvaluationReport::from_json(&json).unwrap();
    assert_eq!(parsed, report);
    assert_eq!(parsed.to_json().unwrap(), json);
}

#[test]
fn degenerate_outputs_flag_but_do_not_abort() {
    let (bundle, clf1, clf2) = &*TRAINED;
    let src = bundle.corpus1.sentences[0].seq.clone();
    let eos_only = TokenSequence::new(vec![EOS_ID], bundle.vocab.len()).unwrap();
    let ok = bundle.corpus1.sentences[1].seq.clone();
    let pairs = vec![(src.clone(), eos_only), (src, ok)];
    let table = EmbeddingTable::hashed(3).resolve(&bundle.vocab);
    let report = build_report(
        "m",
        "c",
        &pairs,
        &table,
        clf1,
        clf2,
        StrengthMode::MeanProb,
    )
    .unwrap();
    assert_eq!(report.degenerate_pairs, 1);
}

#[test]
fn renderer_reproduces_published_rows() {
    // fixture: the published conversion tables' numbers
    let attr1 = StyleAttribute::new("gender", "male", "female").unwrap();
    let attr2 = StyleAttribute::new("formality", "formal", "informal").unwrap();
    let mk = |model: &str, conversion: &str, cp: f64, row: [f64; 4]| EvaluationReport {
        model: model.into(),
        conversion: conversion.into(),
        content_preservation: cp,
        degenerate_pairs: 0,
        attribute1: attr1.clone(),
        attribute2: attr2.clone(),
        // row order is (Female, Male, Formal, Informal):
        // attr1 = [male, female], attr2 = [formal, informal]
        strength: StrengthMatrix {
            attr1: [row[1], row[0]],
            attr2: [row[2], row[3]],
        },
        strength_mode: StrengthMode::MeanProb,
        samples: 1000,
    };
    let reports = vec![
        mk("seq2seq", "Female to Male", 0.951, [0.592, 0.408, 0.165, 0.835]),
        mk("CAE", "Female to Male", 0.853, [0.527, 0.473, 0.164, 0.836]),
        mk("BST", "Female to Male", 0.908, [0.498, 0.502, 0.102, 0.898]),
        mk(
            "Sequential seq2seq",
            "Female to Male&Formal",
            0.937,
            [0.552, 0.448, 0.357, 0.643],
        ),
        mk(
            "Sequential CAE",
            "Female to Male&Formal",
            0.626,
            [0.377, 0.622, 0.130, 0.870],
        ),
        mk("STMS", "Female to Male&Formal", 0.866, [0.249, 0.751, 0.241, 0.758]),
    ];
    let text = render_text_tables(&reports);
    // column order matches the published tables
    let header_pos = text.find("Female").unwrap();
    assert!(text[header_pos..].starts_with("Female"));
    let male_pos = text.find("      Male").unwrap();
    let formal_pos = text.find("    Formal").unwrap();
    let informal_pos = text.find("  Informal").unwrap();
    assert!(header_pos < male_pos && male_pos < formal_pos && formal_pos < informal_pos);
    // spot rows
    assert!(text.contains("seq2seq"));
    assert!(text.contains("0.951"));
    let stms_line = text
        .lines()
        .filter(|l| l.starts_with("STMS"))
        .nth(1)
        .unwrap();
    assert!(
        stms_line.contains("0.249")
            && stms_line.contains("0.751")
            && stms_line.contains("0.241")
            && stms_line.contains("0.758"),
        "row: {stms_line}"
    );
}

#[test]
fn eval_classifier_never_sees_transfer_train_split() {
    // enforced by construction: training data comes only from the
    // classifier split; verify the splits partition the corpus
    let (bundle, _, _) = &*TRAINED;
    use std::collections::HashSet;
    let train: HashSet<&TokenSequence> = bundle
        .corpus1
        .sentences
        .iter()
        .filter(|s| s.split == Split::Train)
        .map(|s| &s.seq)
        .collect();
    let classifier_split: Vec<&TokenSequence> = bundle
        .corpus1
        .sentences
        .iter()
        .filter(|s| s.split == Split::Classifier)
        .map(|s| &s.seq)
        .collect();
    let leaked = classifier_split.iter().filter(|s| train.contains(*s)).count();
    // random content collisions are possible in principle; identical
    // split membership is not
    assert_eq!(
        bundle.corpus1.len(),
        bundle.corpus1.count(Split::Train, 0)
            + bundle.corpus1.count(Split::Train, 1)
            + bundle.corpus1.count(Split::Test, 0)
            + bundle.corpus1.count(Split::Test, 1)
            + bundle.corpus1.count(Split::Dev, 0)
            + bundle.corpus1.count(Split::Dev, 1)
            + bundle.corpus1.count(Split::Classifier, 0)
            + bundle.corpus1.count(Split::Classifier, 1),
    );
    assert_eq!(leaked, 0, "classifier split shares sentences with train");
}
