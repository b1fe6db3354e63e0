mod common;

use featling::ensemble::aggregate;
use featling::eval::{auc_binary, rule_diversity};
use featling::model::{training_curve, TrainConfig, TrialModel};
use featling::prompt::{build_rule_prompt, PromptConfig, TrialContext};
use featling::ruledsl::{evaluate_rule, parse_rule, BinOp, CmpOp, Expr, FeatureMatrix, MissingStrategy, Rule};
use featling::schema::{
    sample_k_shot, serialize_example, stratified_split, FeatureDesc, FeatureSchema, LabeledSet, Row, Value,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

const NUMERIC: [&str; 3] = ["Age", "MaxHR", "Oldpeak"];
const CATS: [&str; 4] = ["ATA", "NAP", "ASY", "TA"];

fn schema() -> FeatureSchema {
    let mut f: Vec<FeatureDesc> = NUMERIC.iter().map(|n| FeatureDesc::numerical(*n, None)).collect();
    f.push(FeatureDesc::categorical("ChestPainType", None, &CATS));
    f.push(FeatureDesc::categorical("Sex", None, &["M", "F"]));
    FeatureSchema::new(f).unwrap()
}

fn number() -> impl Strategy<Value = f64> {
    prop_oneof![(0u32..300).prop_map(f64::from), (0u32..2000).prop_map(|x| f64::from(x) / 8.0)]
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        prop::sample::select(NUMERIC.to_vec()).prop_map(Expr::feature),
        number().prop_map(Expr::Const),
    ];
    leaf.prop_recursive(3, 8, 2, |inner| {
        (prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]), inner.clone(), inner)
            .prop_map(|(op, l, r)| Expr::binary(op, l, r))
    })
}

fn cmp_op() -> impl Strategy<Value = CmpOp> {
    prop::sample::select(vec![CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne])
}

fn atom() -> impl Strategy<Value = Rule> {
    prop_oneof![
        prop::sample::subsequence(CATS.to_vec(), 1..=3).prop_map(|v| Rule::cat_in("ChestPainType", &v)),
        (prop::sample::select(NUMERIC.to_vec()), number(), number())
            .prop_map(|(f, a, b)| Rule::range(f, a.min(b), a.max(b))),
        (prop::sample::select(NUMERIC.to_vec()), cmp_op(), expr())
            .prop_map(|(f, op, e)| Rule::cmp(Expr::feature(f), op, e)),
        (expr(), cmp_op(), number()).prop_map(|(e, op, c)| Rule::cmp(e, op, Expr::Const(c))),
    ]
}

fn rule() -> impl Strategy<Value = Rule> {
    atom().prop_recursive(2, 12, 3, |inner| {
        let non_and = inner.clone().prop_filter("nested and", |r| !matches!(r, Rule::And(_)));
        let non_or = inner.prop_filter("nested or", |r| !matches!(r, Rule::Or(_)));
        prop_oneof![
            prop::collection::vec(non_and, 2..4).prop_map(Rule::And),
            prop::collection::vec(non_or, 2..4).prop_map(Rule::Or),
        ]
    })
}

fn value(numeric: bool) -> impl Strategy<Value = Value> {
    let present = if numeric {
        (0u32..400).prop_map(|x| Value::num(f64::from(x) / 2.0)).boxed()
    } else {
        prop::sample::select(CATS.to_vec()).prop_map(Value::cat).boxed()
    };
    prop_oneof![4 => present, 1 => Just(Value::Missing)]
}

fn row() -> impl Strategy<Value = Row> {
    (value(true), value(true), value(true), value(false), prop::sample::select(vec!["M", "F"]))
        .prop_map(|(a, b, c, d, s)| Row::new(vec![a, b, c, d, Value::cat(s)]))
}

fn strategy() -> impl Strategy<Value = MissingStrategy> {
    prop::sample::select(vec![MissingStrategy::Zero, MissingStrategy::Half])
}

proptest! {
    #[test]
    fn printed_rules_parse_back(r in rule()) {
        let text = r.to_string();
        let parsed = parse_rule(&text, &schema());
        prop_assert_eq!(parsed.as_ref().ok(), Some(&r), "{}", text);
    }

    #[test]
    fn parser_is_total(text in "\\PC{0,80}") {
        let _ = parse_rule(&text, &schema());
    }

    #[test]
    fn parser_is_total_on_rule_like_text(
        text in "(- )?(Age|Sex|MaxHR|ChestPainType|Oldpeak|[a-z]+) (is in|>|<=|=|is within range of|\\(<) [\\[\\]0-9., A-Z()+*/-]{0,20}( (and|or) [A-Za-z ><=0-9()]{0,12})?"
    ) {
        let _ = parse_rule(&text, &schema());
    }

    #[test]
    fn and_is_min_and_or_is_max(a in rule(), b in rule(), r in row(), s in strategy()) {
        let sc = schema();
        let (ea, eb) = (evaluate_rule(&a, &r, &sc, s, None), evaluate_rule(&b, &r, &sc, s, None));
        let and = evaluate_rule(&Rule::And(vec![a.clone(), b.clone()]), &r, &sc, s, None);
        let or = evaluate_rule(&Rule::Or(vec![a, b]), &r, &sc, s, None);
        prop_assert_eq!(and, ea.min(eb));
        prop_assert_eq!(or, ea.max(eb));
    }

    #[test]
    fn complete_rows_give_binary_features(rule in rule(), vals in prop::collection::vec(0u32..400, 3), cat in 0usize..4) {
        let mut values: Vec<Value> = vals.iter().map(|&x| Value::num(f64::from(x) / 2.0)).collect();
        values.push(Value::cat(CATS[cat]));
        values.push(Value::cat("M"));
        let v = evaluate_rule(&rule, &Row::new(values), &schema(), MissingStrategy::Half, None);
        prop_assert!(v == 0.0 || v == 1.0);
    }

    #[test]
    fn larger_category_sets_never_score_lower(
        small in prop::sample::subsequence(CATS.to_vec(), 1..=3),
        extra in prop::sample::subsequence(CATS.to_vec(), 0..=4),
        r in row(),
        s in strategy(),
    ) {
        let mut big = small.clone();
        big.extend(extra.iter().filter(|c| !small.contains(c)));
        let sc = schema();
        let lo = evaluate_rule(&Rule::cat_in("ChestPainType", &small), &r, &sc, s, None);
        let hi = evaluate_rule(&Rule::cat_in("ChestPainType", &big), &r, &sc, s, None);
        prop_assert!(hi >= lo);
    }

    #[test]
    fn serialization_follows_the_grammar(r in row(), label in prop::option::of("[a-z]{1,8}")) {
        let sc = schema();
        let text = serialize_example(&r, label.as_deref(), &sc);
        let (body, answer) = match text.split_once("\nAnswer: ") {
            Some((b, a)) => (b, Some(a)),
            None => (text.as_str(), None),
        };
        prop_assert_eq!(answer, label.as_deref());
        let clauses: Vec<&str> = body.split(". ").collect();
        prop_assert_eq!(clauses.len(), sc.len());
        for (clause, f) in clauses.iter().zip(sc.features()) {
            let clause = clause.strip_suffix('.').unwrap_or(clause);
            let (name, v) = clause.split_once(" is ").unwrap();
            prop_assert_eq!(name, f.name.as_str());
            prop_assert!(!v.is_empty());
        }
        prop_assert!(body.ends_with('.'));
    }

    #[test]
    fn splits_and_samples_are_deterministic_and_balanced(
        labels in prop::collection::vec(0usize..3, 30..80),
        seed in any::<u64>(),
        k in 2usize..12,
    ) {
        let rows = labels.iter().map(|&y| Row::new(vec![Value::num(y as f64)])).collect();
        let mut labels = labels;
        labels[..3].copy_from_slice(&[0, 1, 2]);
        let full = LabeledSet::new(rows, labels, 3).unwrap();
        let (a, _) = stratified_split(&full, 0.2, seed).unwrap();
        let (b, _) = stratified_split(&full, 0.2, seed).unwrap();
        prop_assert_eq!(&a.labels, &b.labels);
        if let Ok(shots) = sample_k_shot(&full, k, seed) {
            prop_assert_eq!(shots.len(), k);
            prop_assert_eq!(&shots.rows, &sample_k_shot(&full, k, seed).unwrap().rows);
            let counts = shots.class_counts();
            prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn prompt_is_pure_and_grows_with_subsets(drop in 0usize..11, shown in 1usize..=4) {
        let ds = common::heart();
        let full = TrialContext::full(&ds.schema, ds.data.len());
        let cfg = PromptConfig::default();
        let build = |ctx: &TrialContext| build_rule_prompt(&ds.task, &ds.schema, &ds.data, ctx, &cfg).unwrap();
        let mut smaller = full.clone();
        smaller.feature_subset.remove(drop);
        smaller.sample_subset.truncate(shown);
        let p = build(&smaller);
        prop_assert_eq!(&p, &build(&smaller));
        prop_assert!(p.len() <= build(&full).len());
        for c in &ds.task.classes {
            prop_assert_eq!(p.matches(&format!("conditions for class \"{c}\":")).count(), 1);
        }
    }

    #[test]
    fn forward_is_normalized_and_monotone(
        weights in prop::collection::vec(prop::collection::vec(-3.0f64..5.0, 1..6), 2..5),
        bump in 0.01f64..3.0,
        seed in any::<u64>(),
    ) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<Vec<f64>> = weights.iter().map(|w| w.iter().map(|_| rng.gen_range(0.0..=1.0)).collect()).collect();
        let zs: Vec<&[f64]> = z.iter().map(Vec::as_slice).collect();
        let classes = (0..weights.len()).map(|c| c.to_string()).collect();
        let mut model = TrialModel { classes, weights, trained_epochs: 0, config: TrainConfig::default() };
        let p = model.forward(&zs).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().all(|&x| x >= 0.0));

        // an extra always-on rule with positive weight raises class 0's logit
        let mut z2 = z.clone();
        z2[0].push(1.0);
        model.weights[0].push(bump);
        let zs2: Vec<&[f64]> = z2.iter().map(Vec::as_slice).collect();
        let q = model.forward(&zs2).unwrap();
        prop_assert!(q[0] > p[0] || p[0] == 1.0);
    }

    #[test]
    fn auc_ignores_increasing_transforms(
        pairs in prop::collection::vec((0u32..50, any::<bool>()), 2..120),
    ) {
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let scores: Vec<f64> = pairs.iter().map(|p| f64::from(p.0) / 50.0).collect();
        let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let a = auc_binary(&scores, &labels).unwrap();
        prop_assert_eq!(a, auc_binary(&warped, &labels).unwrap());
        prop_assert_eq!(a + auc_binary(&scores, &flipped).unwrap(), 1.0);
    }

    #[test]
    fn aggregate_ignores_trial_order(
        trials in prop::collection::vec(prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 4), 1..8),
        shift in 0usize..8,
    ) {
        let mut rotated = trials.clone();
        rotated.rotate_left(shift % trials.len());
        rotated.reverse();
        prop_assert_eq!(aggregate(&trials).unwrap(), aggregate(&rotated).unwrap());
        let copies = vec![trials[0].clone(); trials.len()];
        prop_assert_eq!(aggregate(&copies).unwrap(), trials[0].clone());
    }

    #[test]
    fn diversity_lies_in_unit_interval(
        cells in prop::collection::vec(prop::collection::vec(prop::collection::vec(0u8..2, 4), 30), 2..5),
    ) {
        let trials: Vec<FeatureMatrix> = cells
            .iter()
            .map(|rows| FeatureMatrix::from_values("t", rows.iter().map(|r| r.iter().map(|&x| f64::from(x)).collect()).collect(), 4))
            .collect();
        let (mean, var) = rule_diversity(&trials).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&mean));
        prop_assert!(var >= 0.0);
    }
}

#[test]
fn training_loss_rarely_increases_on_separable_data() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    let cfg = TrainConfig::default();
    let runs = 100;
    let mut monotone = 0;
    for _ in 0..runs {
        let classes = rng.gen_range(2..4);
        let rules = rng.gen_range(1..6);
        let rows = rng.gen_range(4..16);
        let labels: Vec<usize> = (0..rows).map(|i| i % classes).collect();
        let matrices: Vec<FeatureMatrix> = (0..classes)
            .map(|c| {
                let values = labels
                    .iter()
                    .map(|&y| {
                        (0..rules)
                            .map(|j| if j == 0 { f64::from(u8::from(y == c)) } else { f64::from(rng.gen_range(0..2u8)) })
                            .collect()
                    })
                    .collect();
                FeatureMatrix::from_values(&c.to_string(), values, rules)
            })
            .collect();
        let curve = training_curve(&matrices, &labels, cfg.max_epochs, &cfg);
        if curve.windows(2).all(|w| w[1] <= w[0] + 1e-12) {
            monotone += 1;
        }
    }
    assert!(monotone * 100 >= runs * 95, "{monotone}/{runs} monotone");
}
