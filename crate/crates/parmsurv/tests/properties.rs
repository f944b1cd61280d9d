//! Cross-module properties: expression round-trips under the printer,
//! reference-group invariance of the maximized likelihood, and the
//! large-sample agreement of robust and regular variances under a correctly
//! specified model.

use parmsurv::data::{normalize_response, RawTable, ResponseMapping, Value};
use parmsurv::dist::{DistributionId, Family};
use parmsurv::expr::{self, BinOp, Expr, Func};
use parmsurv::fit::{fit_model, FitOptions};
use parmsurv::model::ModelSpec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..1000).prop_map(|n| Expr::Num(n as f64 / 10.0)),
        prop_oneof![
            Just("time".to_string()),
            Just("beta".to_string()),
            Just("alpha".to_string()),
            Just("mu".to_string()),
            Just("x_1".to_string()),
        ]
        .prop_map(Expr::Ident),
    ]
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 64, 4, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop_oneof![
                    Just(BinOp::Add),
                    Just(BinOp::Sub),
                    Just(BinOp::Mul),
                    Just(BinOp::Div),
                    Just(BinOp::Pow)
                ],
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, l, r)| Expr::Bin(op, Box::new(l), Box::new(r))),
            (
                prop_oneof![Just(Func::Exp), Just(Func::Log), Just(Func::Sqrt), Just(Func::Abs)],
                inner.clone()
            )
                .prop_map(|(f, a)| Expr::Call(f, vec![a])),
            (inner.clone(), inner)
                .prop_map(|(a, b)| Expr::Call(Func::Pow, vec![a, b])),
        ]
    })
}

proptest! {
    /// parse(pretty(tree)) reproduces the tree for everything the parser
    /// can construct.
    #[test]
    fn pretty_print_round_trips(tree in expr_strategy()) {
        let printed = expr::pretty(&tree);
        let reparsed = expr::parse(&printed)
            .unwrap_or_else(|e| panic!("'{printed}' failed to parse: {e}"));
        prop_assert_eq!(&reparsed, &tree, "printed form: {}", printed);
    }
}

fn table3_set() -> parmsurv::ObservationSet {
    let table = parmsurv::data::load_table(
        std::path::Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/table3.csv")),
        &["".to_string(), ".".to_string()],
    )
    .unwrap();
    normalize_response(
        &table,
        &ResponseMapping {
            t1: "time".to_string(),
            censor: Some("delta".to_string()),
            censval: "0".to_string(),
            ..Default::default()
        },
    )
    .unwrap()
}

/// Swapping the reference level permutes dummy coefficients but cannot move
/// the maximized log-likelihood.
#[test]
fn reference_group_change_leaves_loglik_invariant() {
    let set = table3_set();
    let fit_with = |reference: &str| {
        let spec = ModelSpec {
            family: Family::BuiltIn(DistributionId::Weibull),
            covars: vec!["age".to_string(), "sex".to_string()],
            refgrp: Some(vec![reference.to_string()]),
            ..Default::default()
        };
        fit_model(&spec, &set, &FitOptions::default()).unwrap()
    };
    let female_ref = fit_with("female");
    let male_ref = fit_with("male");
    assert!(female_ref.convergence.converged() && male_ref.convergence.converged());
    assert!(
        (female_ref.loglik - male_ref.loglik).abs() < 1e-6,
        "{} vs {}",
        female_ref.loglik,
        male_ref.loglik
    );
    // the dummy coefficient flips sign up to optimizer tolerance
    let coef = |fit: &parmsurv::FitResult, label: &str| {
        fit.rows.iter().find(|r| r.label == label).unwrap().estimate
    };
    let male_coef = coef(&female_ref, "sex_male");
    let female_coef = coef(&male_ref, "sex_female");
    assert!((male_coef + female_coef).abs() < 1e-4, "{male_coef} vs {female_coef}");
}

/// Under a correctly specified model the sandwich and regular variances
/// agree asymptotically; at n = 2000 their ratio stays inside [0.8, 1.25].
#[test]
fn sandwich_matches_regular_variance_when_model_is_correct() {
    let mut rng = ChaCha8Rng::seed_from_u64(12345);
    let n = 2000;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let t: f64 = -rng.gen::<f64>().ln() / 0.6;
        let c: f64 = -rng.gen::<f64>().ln() / 0.3;
        let observed = t.min(c).max(1e-12);
        rows.push(vec![
            Value::Num(observed),
            Value::Num(if t <= c { 1.0 } else { 0.0 }),
        ]);
    }
    let table = RawTable {
        columns: vec!["time".to_string(), "delta".to_string()],
        rows,
    };
    let set = normalize_response(
        &table,
        &ResponseMapping {
            t1: "time".to_string(),
            censor: Some("delta".to_string()),
            censval: "0".to_string(),
            ..Default::default()
        },
    )
    .unwrap();
    let fit_with = |robust: bool| {
        let spec = ModelSpec {
            family: Family::BuiltIn(DistributionId::Exp),
            robust,
            ..Default::default()
        };
        fit_model(&spec, &set, &FitOptions::default()).unwrap()
    };
    let regular = fit_with(false);
    let robust = fit_with(true);
    let v_reg = regular.cov_original.as_ref().unwrap()[(0, 0)];
    let v_rob = robust.cov_original.as_ref().unwrap()[(0, 0)];
    let ratio = v_rob / v_reg;
    assert!((0.8..=1.25).contains(&ratio), "variance ratio {ratio}");
}
