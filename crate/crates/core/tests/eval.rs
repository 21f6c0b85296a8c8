use std::collections::BTreeSet;
use std::path::Path;

use middleware_core::agent::{AgentConfig, Scheme};
use middleware_core::eval::scripts::{db_gold_script, kb_error_feedback_script};
use middleware_core::eval::{
    execution_accuracy, kb_f1, run_db_suite, run_kb_suite, set_f1, validity_sql, GoldAnswer, SuiteOptions,
};
use middleware_core::fixtures;
use middleware_core::kb::KbAnswer;
use middleware_core::llm::{Backend, ScriptedBackend};
use proptest::prelude::*;
use rusqlite::Connection;
use serde_json::Value;

fn fixture_db() -> (tempfile::TempDir, Connection) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(fixtures::DB_FILE);
    fixtures::build_db(&path).unwrap();
    let conn = Connection::open(&path).unwrap();
    (dir, conn)
}

#[test]
fn gold_sql_matches_itself() {
    let (_dir, conn) = fixture_db();
    for task in fixtures::db_tasks() {
        assert!(validity_sql(&task.gold_sql, &conn), "{}", task.id);
        assert!(execution_accuracy(&task.gold_sql, &task.gold_sql, &conn), "{}", task.id);
    }
}

#[test]
fn execution_accuracy_examples() {
    let (_dir, conn) = fixture_db();
    let ex = |a: &str, b: &str| execution_accuracy(a, b, &conn);
    assert!(ex("SELECT 1", "SELECT 1.0"));
    assert!(ex("SELECT NULL", "SELECT NULL"));
    assert!(!ex("SELECT NULL", "SELECT 0"));
    assert!(!ex("SELECT '1'", "SELECT 1"));
    assert!(!ex("SELECT 1 UNION ALL SELECT 1", "SELECT 1"));
    assert!(ex(
        "SELECT product_id FROM products ORDER BY product_id DESC",
        "SELECT product_id FROM products ORDER BY product_id"
    ));
    assert!(!ex("SELECT product_id FROM products LIMIT 49", "SELECT product_id FROM products"));
    assert!(!ex("SELEC 1", "SELEC 1"));

    assert!(validity_sql("SELECT COUNT(*) FROM orders", &conn));
    assert!(!validity_sql("SELECT * FROM nowhere", &conn));
    assert!(!validity_sql("SELECT missing_column FROM orders", &conn));
    assert!(!validity_sql("", &conn));
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

#[test]
fn kb_answer_scoring() {
    let answer = |entities: &[&str], count: Option<u64>| KbAnswer {
        variable: "#3".into(),
        entities: entities.iter().map(|s| s.to_string()).collect(),
        count,
    };
    let gold = GoldAnswer::Entities {
        entities: vec!["a".into(), "b".into()],
    };
    assert_eq!(kb_f1(Some(&answer(&["a", "b"], None)), &gold), 1.0);
    assert!((kb_f1(Some(&answer(&["a", "c"], None)), &gold) - 0.5).abs() < 1e-12);
    assert_eq!(kb_f1(None, &gold), 0.0);
    let gold = GoldAnswer::Count { count: 2 };
    assert_eq!(kb_f1(Some(&answer(&["a", "b"], Some(2))), &gold), 1.0);
    assert_eq!(kb_f1(Some(&answer(&["a", "b"], None)), &gold), 0.0);
    assert_eq!(kb_f1(Some(&answer(&[], Some(3))), &gold), 0.0);
    assert_eq!(set_f1(&set(&[]), &set(&[])), 1.0);
}

const SQL_POOL: &[&str] = &[
    "SELECT 1",
    "SELECT 1.0",
    "SELECT NULL",
    "SELECT COUNT(*) FROM orders",
    "SELECT COUNT(order_id) FROM orders",
    "SELECT status FROM orders GROUP BY status",
    "SELECT DISTINCT status FROM orders",
    "SELECT name FROM products WHERE price > 100",
    "SELECT nothing FROM orders",
    "SELEC 1",
    "SELECT * FROM ghosts",
    "",
];

proptest! {
    #[test]
    fn ex_implies_va(a in 0..SQL_POOL.len(), b in 0..SQL_POOL.len()) {
        let (_dir, conn) = fixture_db();
        let (p, g) = (SQL_POOL[a], SQL_POOL[b]);
        if execution_accuracy(p, g, &conn) {
            prop_assert!(validity_sql(p, &conn));
            prop_assert!(validity_sql(g, &conn));
            prop_assert!(execution_accuracy(g, p, &conn));
        }
    }

    #[test]
    fn f1_agrees_with_overlap_formula(p in prop::collection::btree_set("[a-f]", 0..6), g in prop::collection::btree_set("[a-f]", 0..6)) {
        let f = set_f1(&p, &g);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(f, set_f1(&g, &p));
        let expected = if p.is_empty() && g.is_empty() {
            1.0
        } else {
            2.0 * p.intersection(&g).count() as f64 / (p.len() + g.len()) as f64
        };
        prop_assert!((f - expected).abs() < 1e-12);
    }

    #[test]
    fn adding_a_correct_entity_never_hurts(p in prop::collection::btree_set("[a-f]", 0..6), g in prop::collection::btree_set("[a-f]", 1..6)) {
        let before = set_f1(&p, &g);
        for extra in g.difference(&p) {
            let mut more = p.clone();
            more.insert(extra.clone());
            prop_assert!(set_f1(&more, &g) > before);
        }
        let mut wrong = p.clone();
        wrong.insert("z".into());
        prop_assert!(set_f1(&wrong, &g) <= before || p.is_empty());
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn close(a: &Value, b: f64) -> bool {
    (a.as_f64().unwrap() - b).abs() < 1e-9
}

#[test]
fn kb_report_recomputes_from_json_records() {
    let store = fixtures::kb_store();
    let tasks = fixtures::kb_tasks();
    // Every third task gets a truncated script so some episodes fail.
    let factory = |task: &middleware_core::eval::KbTask| -> Result<Box<dyn Backend>, _> {
        let mut script = kb_error_feedback_script(task).unwrap();
        if task.id.bytes().map(usize::from).sum::<usize>() % 3 == 0 {
            script.pop();
        }
        Ok(Box::new(ScriptedBackend::new(script)))
    };
    let run = run_kb_suite(store, &tasks, &factory, &SuiteOptions::default()).unwrap();
    let json: Value = serde_json::from_str(&run.report.to_json()).unwrap();
    assert_eq!(json["environment"], "kb");
    let records = json["records"].as_array().unwrap();
    assert_eq!(records.len(), tasks.len());
    let failed = records.iter().filter(|r| r["va"] == false).count();
    assert!(failed > 0 && failed < tasks.len());

    for (key, category) in [("counting", Some("Counting")), ("superlative", Some("Superlative")), ("none", Some("None")), ("overall", None)] {
        let chosen: Vec<&Value> = records.iter().filter(|r| category.is_none_or(|c| r["category"] == c)).collect();
        let f1: Vec<f64> = chosen.iter().map(|r| r["f1"].as_f64().unwrap()).collect();
        let va: Vec<f64> = chosen.iter().map(|r| if r["va"] == true { 1.0 } else { 0.0 }).collect();
        let cell = &json[key];
        assert_eq!(cell["n"].as_u64().unwrap() as usize, chosen.len(), "{key}");
        assert!(close(&cell["f1"], mean(&f1)), "{key}");
        assert!(close(&cell["va"], mean(&va)), "{key}");
    }
    let steps: Vec<f64> = records.iter().map(|r| r["steps"].as_f64().unwrap()).collect();
    assert!(close(&json["efficiency"]["mean_steps"], mean(&steps)));
    for r in records {
        if r["va"] == false {
            assert_eq!(r["f1"].as_f64().unwrap(), 0.0);
        }
    }
}

#[test]
fn db_report_recomputes_from_json_records() {
    let dir = tempfile::tempdir().unwrap();
    fixtures::build_db(dir.path().join(fixtures::DB_FILE)).unwrap();
    let tasks = fixtures::db_tasks();
    let root: &Path = dir.path();
    let factory = |task: &middleware_core::eval::DbTask| -> Result<Box<dyn Backend>, _> {
        let mut script = db_gold_script(task, &root.join(&task.db)).unwrap();
        if task.id.bytes().last().unwrap() % 2 == 0 {
            let last = script.len() - 1;
            script[last] = "Thought: done\nFinal Answer: SELECT name FROM products".into();
        }
        Ok(Box::new(ScriptedBackend::new(script)))
    };
    let options = SuiteOptions {
        config: AgentConfig {
            scheme: Scheme::ErrorFeedback,
            max_steps: 20,
            ..AgentConfig::default()
        },
        jobs: 2,
        ..SuiteOptions::default()
    };
    let run = run_db_suite(root, &tasks, &factory, &options).unwrap();
    let json: Value = serde_json::from_str(&run.report.to_json()).unwrap();
    let records = json["records"].as_array().unwrap();
    for (key, content) in [("content_n", Some(false)), ("content_y", Some(true)), ("overall", None)] {
        let chosen: Vec<&Value> = records
            .iter()
            .filter(|r| content.is_none_or(|c| r["requires_content"] == c))
            .collect();
        let ex: Vec<f64> = chosen.iter().map(|r| if r["ex"] == true { 1.0 } else { 0.0 }).collect();
        let va: Vec<f64> = chosen.iter().map(|r| if r["va"] == true { 1.0 } else { 0.0 }).collect();
        assert_eq!(json[key]["n"].as_u64().unwrap() as usize, chosen.len());
        assert!(close(&json[key]["ex"], mean(&ex)), "{key}");
        assert!(close(&json[key]["va"], mean(&va)), "{key}");
    }
    let conn = Connection::open(root.join(fixtures::DB_FILE)).unwrap();
    for (r, task) in records.iter().zip(&tasks) {
        assert_eq!(r["id"], task.id.as_str());
        let pred = r["pred_sql"].as_str().unwrap();
        assert_eq!(r["ex"] == true, execution_accuracy(pred, &task.gold_sql, &conn));
    }
    assert!(records.iter().any(|r| r["ex"] == false) && records.iter().any(|r| r["ex"] == true));
}
