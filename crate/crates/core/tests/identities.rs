use std::time::Instant;
use wigcorr::series::identity_report;
use wigcorr::wick::{ibp_suite, index_patterns, ten_term_suite};

#[test]
fn generating_function_identities_hold_to_high_order() {
    let report = identity_report(100, 50);
    for c in &report.checks {
        assert!(c.pass, "{} first fails at {:?}", c.name, c.first_failure);
        assert!(c.points > 0);
    }
}

#[test]
fn index_patterns_are_set_partitions() {
    assert_eq!(index_patterns(4, 4).len(), 15);
    assert_eq!(index_patterns(4, 3).len(), 14);
    assert_eq!(index_patterns(4, 2).len(), 8);
    assert_eq!(index_patterns(4, 1), vec![vec![1, 1, 1, 1]]);
}

#[test]
fn integration_by_parts_on_every_endpoint() {
    for n in 1..=3 {
        let t = Instant::now();
        for entry in ibp_suite(n, 5).unwrap() {
            assert!(entry.pass(), "{entry:?}");
            assert!(entry.cases > 0);
        }
        eprintln!("ibp n={n}: {:?}", t.elapsed());
    }
}

#[test]
fn ten_term_split_up_to_degree_eight() {
    for n in 2..=3 {
        let t = Instant::now();
        let entry = ten_term_suite(n, 8).unwrap();
        assert!(entry.pass(), "{:?}", &entry.failures[..entry.failures.len().min(3)]);
        eprintln!("ten-term n={n}: {} cases in {:?}", entry.cases, t.elapsed());
    }
}
