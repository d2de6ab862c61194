mod common;

use std::collections::BTreeMap;

use common::{assign, consistent_observations, id, random_boolean};
use counterfact::boolean::{self, Aggregate, BooleanEngine, Literal};
use counterfact::oracle::enumerate_boolean;
use counterfact::{Assignment, Error};
use proptest::prelude::*;

fn lit(v: &str, value: bool) -> Literal {
    Literal {
        variable: id(v),
        value,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn abduction_matches_enumeration(seed in any::<u64>(), roots in 1usize..=12, derived in 1usize..=6) {
        let m = random_boolean(seed, roots, derived, false);
        let obs = consistent_observations(seed ^ 11, &m);
        let res = boolean::abduce(&m, &obs).unwrap();
        let all = enumerate_boolean(&m, &obs, 20).unwrap();
        let least = all.iter().map(|(_, k)| *k).min().unwrap();
        let minimal: Vec<_> = all.iter().filter(|(_, k)| *k == least).map(|(w, _)| w.clone()).collect();
        prop_assert_eq!(res.abnormality_count, least);
        prop_assert_eq!(res.total_consistent, all.len());
        prop_assert_eq!(res.worlds, minimal);
    }

    #[test]
    fn abduction_is_deterministic(seed in any::<u64>(), roots in 1usize..=10) {
        let m = random_boolean(seed, roots, 4, true);
        let obs = consistent_observations(seed ^ 12, &m);
        prop_assert_eq!(boolean::abduce(&m, &obs).unwrap(), boolean::abduce(&m, &obs).unwrap());
    }

    #[test]
    fn intervention_only_touches_the_antecedent(seed in any::<u64>(), roots in 1usize..=6, derived in 1usize..=6) {
        let m = random_boolean(seed, roots, derived, false);
        let target = m.variables()[seed as usize % m.variables().len()].clone();
        let value = seed % 2 == 0;
        let a: Assignment = [(target.clone(), if value { 1.0 } else { 0.0 })].into_iter().collect();
        let pruned = boolean::intervene_bool(&m, &a).unwrap();
        prop_assert_eq!(pruned.equation(target.as_str()), Some(&counterfact::BoolExpr::Const(value)));
        for v in m.variables().iter().filter(|v| **v != target) {
            prop_assert_eq!(pruned.equation(v.as_str()), m.equation(v.as_str()));
            prop_assert_eq!(pruned.is_root(v.as_str()), m.is_root(v.as_str()));
        }
    }

    #[test]
    fn agreeing_antecedent_reproduces_evidence(seed in any::<u64>(), roots in 1usize..=8) {
        let m = random_boolean(seed, roots, 4, false);
        let obs = consistent_observations(seed ^ 13, &m);
        prop_assume!(!obs.is_empty());
        let (v, x) = obs.iter().next().map(|(k, v)| (k.clone(), *v)).unwrap();
        let action: Assignment = [(v.clone(), x)].into_iter().collect();
        let asked: Vec<Literal> = obs.iter().map(|(k, b)| Literal { variable: k.clone(), value: *b == 1.0 }).collect();
        let verdict = boolean::counterfactual_bool(&m, &obs, &action, &asked).unwrap();
        for (l, agg) in &verdict.aggregate {
            // forcing a variable to its observed value changes nothing
            prop_assert_eq!(*agg, Aggregate::AllTrue, "{:?}", l);
        }
    }
}

#[test]
fn firing_squad_layers() {
    let doc = counterfact::dsl::parse_model(
        &std::fs::read_to_string(common::fixture("fs.scm.txt")).unwrap(),
    )
    .unwrap();
    let counterfact::dsl::ModelBody::Boolean(m) = doc.body else {
        panic!("expected a boolean model")
    };
    let obs = assign(&[("c", 0.0), ("t", 1.0)]);
    let all = enumerate_boolean(&m, &obs, 20).unwrap();
    let mut layers: BTreeMap<usize, usize> = BTreeMap::new();
    for (_, k) in &all {
        *layers.entry(*k).or_default() += 1;
    }
    assert_eq!(layers[&1], 2);
    assert_eq!(*layers.keys().next().unwrap(), 1);
    let verdict =
        boolean::counterfactual_bool(&m, &obs, &assign(&[("b", 0.0)]), &[lit("t", true)]).unwrap();
    assert_eq!(
        verdict.aggregate,
        vec![(lit("t", true), Aggregate::Ambiguous)]
    );
}

#[test]
fn root_budget_is_enforced() {
    let m = random_boolean(7, 12, 2, false);
    assert!(matches!(
        BooleanEngine::new(10).abduce(&m, &Assignment::new()),
        Err(Error::TooManyRoots { roots: 12, max: 10 })
    ));
    assert!(BooleanEngine::new(12)
        .abduce(&m, &Assignment::new())
        .is_ok());
}

#[test]
fn weights_rank_but_do_not_prune() {
    let src = "\
boolean model ranked
var c b t ab_b1 ab_b2 ab_t1 ab_t2
root c ab_b1 ab_b2 ab_t1 ab_t2
abnormal ab_b1 ab_b2 ab_t1 ab_t2
eq b = (c | ab_b1) & !ab_b2
eq t = (b | c) & !ab_t1 | ab_t2
weight ab_b1 3
weight ab_t2 0.5
";
    let counterfact::dsl::ModelBody::Boolean(m) = counterfact::dsl::parse_model(src).unwrap().body
    else {
        panic!()
    };
    let res = boolean::abduce(&m, &assign(&[("c", 0.0), ("t", 1.0)])).unwrap();
    assert_eq!(res.worlds.len(), 2);
    let ranking = res.ranking.unwrap();
    // the itchy-trigger world (ab_b1) outranks the spontaneous-death world
    assert_eq!(res.worlds[ranking[0].0].get("ab_b1"), Some(true));
    assert_eq!(ranking[0].1, 3.0);
    assert_eq!(ranking[1].1, 0.5);
}
