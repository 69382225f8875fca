use super::*;
use crate::corpus::{generate_synthetic_corpus, CorpusProfile};

fn feats(a: &str, b: &str) -> Vec<f64> {
    extract_adaptation_features(&tokenize(a), &tokenize(b)).values().to_vec()
}

fn col(name: &str) -> usize {
    feature_names().iter().position(|n| n == name).unwrap()
}

#[test]
fn registry_matches_extractor() {
    let names = feature_names();
    assert_eq!(feats("hi there", "hello").len(), names.len());
    assert_eq!(names[STEM_OVERLAP], "stem_overlap");
    assert_eq!(names[POS_BIGRAM_OVERLAP], "pos_bigram_overlap");
    assert_eq!(names[POLARITY_MATCH], "polarity_match");
    let unique: BTreeSet<&String> = names.iter().collect();
    assert_eq!(unique.len(), names.len());
}

#[test]
fn gini_oracles() {
    assert_eq!(gini_of_labels(&[true, true, true]), 0.0);
    assert_eq!(gini_of_labels(&[true, false]), 0.5);
    assert!((gini_of_labels(&[true, true, false, false, false]) - 0.48).abs() < 1e-12);
    assert_eq!(gini([0.0, 0.0]), 0.0);
}

#[test]
fn stemmer_and_tagger() {
    assert_eq!(stem("jumping"), "jump");
    assert_eq!(stem("clapped"), "clapp");
    assert_eq!(stem("colors"), "color");
    assert_eq!(stem("is"), "is");
    assert_eq!(stem("class"), "class");
    assert_eq!(tag("purple"), "JJ");
    assert_eq!(tag("giraffe"), "NN");
    assert_eq!(tag("quickly"), "RB");
    assert_eq!(tag("!"), "PUNCT");
    let w = |s: &str| tokenize(s).tokens;
    assert_eq!(polarity(&w("i am happy")), 1);
    assert_eq!(polarity(&w("i am not happy")), -1);
    assert_eq!(polarity(&w("the dog")), 0);
}

#[test]
fn identical_pair_is_maximal() {
    let s = "i really like the purple dinosaur";
    let f = feats(s, s);
    for name in ["stem_jaccard", "token_jaccard", "pos_jaccard", "pos_bigram_jaccard", "polarity_match", "length_ratio"] {
        assert_eq!(f[col(name)], 1.0, "{name}");
    }
    assert_eq!(f[col("stem_overlap")], 3.0);
    assert_eq!(f[col("token_overlap")], 6.0);
    assert_eq!(f[col("candidate_coverage")], 1.0);
}

#[test]
fn disjoint_neutral_pair() {
    let f = feats("the dog barks", "purple giraffes?");
    assert_eq!(f[col("stem_overlap")], 0.0);
    assert_eq!(f[col("token_overlap")], 0.0);
    assert_eq!(f[col("pos_bigram_overlap")], 0.0);
    assert_eq!(f[col("polarity_match")], 1.0);
    assert_eq!(f[col("context_neutral")], 1.0);
}

#[test]
fn overlap_count_example() {
    assert_eq!(feats("i like purple", "purple is nice!")[STEM_OVERLAP], 1.0);
    assert_eq!(feats("i like purple", "ok")[STEM_OVERLAP], 0.0);
}

#[test]
fn jaccard_families_are_symmetric() {
    let pairs = [("i love jumping", "jump with me"), ("what is your name", "my name is robo"), ("", "hello")];
    for (a, b) in pairs {
        let (x, y) = (feats(a, b), feats(b, a));
        for name in ["stem_jaccard", "token_jaccard", "pos_jaccard", "pos_bigram_jaccard", "stem_overlap", "polarity_match", "length_ratio"] {
            assert_eq!(x[col(name)], y[col(name)], "{name} on {a:?}/{b:?}");
        }
    }
}

#[test]
fn label_rule_extremes() {
    let rule = LabelRule::default();
    let s = "my cat loves purple balloons";
    let max = LabelRule::score(&feats(s, s));
    for theta in [0.5, 1.0, 2.0, max] {
        assert!(LabelRule { theta }.label(&feats(s, s)));
    }
    assert!(!rule.label(&feats(s, "okay then")));
    assert!(!LabelRule { theta: 0.1 }.label(&feats(s, "okay then")));
    // one shared stem, same polarity and a shared bigram adds the bonus
    assert_eq!(LabelRule::score(&feats("i see the red ball", "the red one")), 2.0);
}

#[test]
fn zero_positive_labeling_is_an_error() {
    let c = generate_synthetic_corpus(&CorpusProfile::default(), 3).unwrap();
    let err = auto_label_instances(&c.adaptation, LabelRule { theta: 1000.0 }).unwrap_err();
    assert!(matches!(err, AdaptError::Labeling(_)));
}

#[test]
fn tree_respects_limits_and_is_deterministic() {
    let c = generate_synthetic_corpus(&CorpusProfile::default(), 5).unwrap();
    let (inst, _) = auto_label_instances(&c.adaptation, LabelRule::default()).unwrap();
    let params = TreeParams {
        max_depth: 4,
        ..TreeParams::default()
    };
    let a = train_decision_tree(&inst, params).unwrap();
    let b = train_decision_tree(&inst, params).unwrap();
    assert_eq!(a, b);
    assert!(a.depth() <= 4);
    for i in &inst {
        assert!(a.path_length(&i.features) <= 4);
    }
    for n in &a.nodes {
        if let Node::Leaf { probs, samples } = n {
            assert!((probs[0] + probs[1] - 1.0).abs() < 1e-12);
            assert!(*samples >= params.min_samples_leaf);
        }
    }
}

#[test]
fn single_class_gives_one_leaf() {
    let x = vec![vec![0.0], vec![1.0], vec![2.0]];
    let t = DecisionTree::fit(&x, &[false; 3], TreeParams::default()).unwrap();
    assert_eq!(t.leaves(), 1);
    assert_eq!(t.predict_proba(&[5.0]), 0.0);
    assert!(DecisionTree::fit(&[], &[], TreeParams::default()).is_err());
}

#[test]
fn tree_learns_a_threshold() {
    let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 7) as f64, i as f64]).collect();
    let y: Vec<bool> = x.iter().map(|r| r[1] >= 30.0).collect();
    let t = DecisionTree::fit(&x, &y, TreeParams::default()).unwrap();
    assert!(x.iter().zip(&y).all(|(r, l)| t.predict(r) == *l));
    assert_eq!(t.depth(), 1);
}

#[test]
fn select_response_contract() {
    let c = generate_synthetic_corpus(&CorpusProfile::default(), 2).unwrap();
    let model = AdaptationModel::train(&c.adaptation, LabelRule::default(), TreeParams::default()).unwrap();
    assert!(matches!(select_response(&model.tree, "hi", &[]), Err(AdaptError::Argument(_))));
    let (best, scores) = select_response(&model.tree, "hi", &["whatever".to_string()]).unwrap();
    assert_eq!((best, scores.len()), (0, 1));
    // equal scores resolve to the first candidate
    let same = vec!["okay".to_string(), "okay".to_string()];
    assert_eq!(select_response(&model.tree, "i like cats", &same).unwrap().0, 0);
}

#[test]
fn echo_candidates_win() {
    let c = generate_synthetic_corpus(&CorpusProfile::default(), 11).unwrap();
    let model = AdaptationModel::train(&c.adaptation, LabelRule::default(), TreeParams::default()).unwrap();
    let probe = generate_synthetic_corpus(&CorpusProfile::default(), 12).unwrap();
    let mut hits = 0;
    let mut total = 0;
    for d in probe.adaptation.iter().take(100) {
        let ctx = tokenize(&d.context);
        let unrelated = |c: &&String| !LabelRule::default().label(extract_adaptation_features(&ctx, &tokenize(c)).values());
        let mut cands: Vec<String> = d.candidates.iter().filter(unrelated).cloned().collect();
        cands.insert(d.dialog % (cands.len() + 1), d.context.clone());
        let (best, _) = select_response(&model.tree, &d.context, &cands).unwrap();
        total += 1;
        hits += usize::from(cands[best] == d.context);
    }
    assert_eq!((hits, total), (100, 100));
}

#[test]
fn labels_are_learnable_with_target_ratio() {
    for seed in [1, 4] {
        let c = generate_synthetic_corpus(&CorpusProfile::default(), seed).unwrap();
        let (inst, counts) = auto_label_instances(&c.adaptation, LabelRule::default()).unwrap();
        let ratio = counts.ratio();
        assert!((8.0..=13.0).contains(&ratio), "seed {seed}: 1:{ratio:.2}");
        let folds = cross_validate(&inst, 5, TreeParams::default()).unwrap();
        let mean = folds.iter().sum::<f64>() / folds.len() as f64;
        assert!(mean >= 0.95, "seed {seed}: {folds:?}");
    }
}

#[test]
fn model_round_trip() {
    let c = generate_synthetic_corpus(&CorpusProfile::default(), 6).unwrap();
    let m = AdaptationModel::train(&c.adaptation, LabelRule::default(), TreeParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("adapt.json");
    m.save(&p).unwrap();
    assert_eq!(AdaptationModel::load(&p).unwrap(), m);
    std::fs::write(&p, "{").unwrap();
    assert!(matches!(AdaptationModel::load(&p), Err(AdaptError::Format(_))));
}


