//! Retrieval metrics against category ground truth.
//!
//! Average precision is list-local: it is normalized by the number of
//! relevant items that appear in the ranked list, not by the size of the
//! relevant set in the whole database. Precision@K always divides by `K`,
//! so short result lists are penalized.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// `(1/R) Σ_p hits(p)/p` over positions `p` holding a relevant item, where
/// `R` is the number of relevant items in `ranked`. Zero when nothing
/// relevant was retrieved.
pub fn average_precision<S, F>(ranked: &[S], relevant: F) -> f64
where
    S: AsRef<str>,
    F: Fn(&str) -> bool,
{
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, id) in ranked.iter().enumerate() {
        if relevant(id.as_ref()) {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

/// Fraction of relevant items among the first `k`, divided by `k`.
pub fn precision_at_k<S, F>(ranked: &[S], relevant: F, k: usize) -> Result<f64>
where
    S: AsRef<str>,
    F: Fn(&str) -> bool,
{
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let found = ranked
        .iter()
        .take(k)
        .filter(|id| relevant(id.as_ref()))
        .count();
    Ok(found as f64 / k as f64)
}

/// Category labels for queries and videos. Labels are opaque strings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub queries: BTreeMap<String, String>,
    pub videos: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryMetrics {
    pub query_id: String,
    pub average_precision: f64,
    pub precision_at_k: f64,
    pub relevant_retrieved: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub map: f64,
    pub precision_at_k: f64,
    pub k: usize,
    pub per_query: Vec<QueryMetrics>,
}

impl MetricReport {
    /// Queries for which no relevant video was retrieved (AP recorded as 0).
    pub fn without_relevant(&self) -> impl Iterator<Item = &str> {
        self.per_query
            .iter()
            .filter(|q| q.relevant_retrieved == 0)
            .map(|q| q.query_id.as_str())
    }

    /// `key=value` summary lines.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ap_variant=list-local");
        let _ = writeln!(out, "queries={}", self.per_query.len());
        let _ = writeln!(out, "map={}", self.map);
        let _ = writeln!(out, "k={}", self.k);
        let _ = writeln!(out, "precision_at_k={}", self.precision_at_k);
        let missing: Vec<_> = self.without_relevant().collect();
        let _ = writeln!(out, "queries_without_relevant={}", missing.len());
        if !missing.is_empty() {
            let _ = writeln!(out, "warning=no relevant video retrieved for {}", missing.join(","));
        }
        out
    }

    /// Tab-separated per-query table with a header row.
    pub fn to_table(&self) -> String {
        let mut out = String::from("query_id\tap\tprecision_at_k\trelevant_retrieved\n");
        for q in &self.per_query {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                q.query_id, q.average_precision, q.precision_at_k, q.relevant_retrieved
            );
        }
        out
    }
}

/// Scores a run (query id → ranked video ids) against `truth`.
///
/// Every query in `truth.queries` must appear in the run, and every id in the
/// run must be known to `truth`.
pub fn evaluate(
    run: &BTreeMap<String, Vec<String>>,
    truth: &GroundTruth,
    k: usize,
) -> Result<MetricReport> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let mut unknown = BTreeSet::new();
    for (qid, ranked) in run {
        if !truth.queries.contains_key(qid) {
            unknown.insert(qid.clone());
        }
        for vid in ranked {
            if !truth.videos.contains_key(vid) {
                unknown.insert(vid.clone());
            }
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownIds(unknown.into_iter().collect()));
    }
    let missing: Vec<String> = truth
        .queries
        .keys()
        .filter(|q| !run.contains_key(*q))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingQueries(missing));
    }
    if run.is_empty() {
        return Err(Error::EmptyInput("run"));
    }

    let per_query: Vec<QueryMetrics> = run
        .iter()
        .map(|(qid, ranked)| {
            let category = &truth.queries[qid];
            let relevant = |vid: &str| &truth.videos[vid] == category;
            QueryMetrics {
                query_id: qid.clone(),
                average_precision: average_precision(ranked, relevant),
                precision_at_k: precision_at_k(ranked, relevant, k).expect("k checked"),
                relevant_retrieved: ranked.iter().filter(|v| relevant(v)).count(),
            }
        })
        .collect();
    let n = per_query.len() as f64;
    Ok(MetricReport {
        map: per_query.iter().map(|q| q.average_precision).sum::<f64>() / n,
        precision_at_k: per_query.iter().map(|q| q.precision_at_k).sum::<f64>() / n,
        k,
        per_query,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(pattern: &[u8]) -> Vec<String> {
        pattern
            .iter()
            .enumerate()
            .map(|(i, &r)| format!("{}{i}", if r == 1 { "r" } else { "n" }))
            .collect()
    }

    fn is_rel(id: &str) -> bool {
        id.starts_with('r')
    }

    #[test]
    fn average_precision_examples() {
        let ap = average_precision(&ids(&[1, 0, 1]), is_rel);
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(average_precision(&ids(&[1, 1, 1, 1]), is_rel), 1.0);
        assert_eq!(average_precision(&ids(&[0, 0, 0]), is_rel), 0.0);
        assert_eq!(average_precision::<String, _>(&[], is_rel), 0.0);
    }

    #[test]
    fn precision_examples() {
        assert_eq!(precision_at_k(&ids(&[1, 0, 1, 0]), is_rel, 2).unwrap(), 0.5);
        assert_eq!(precision_at_k::<String, _>(&[], is_rel, 500).unwrap(), 0.0);
        assert_eq!(precision_at_k(&ids(&[1, 1, 1]), is_rel, 5).unwrap(), 0.6);
        assert!(precision_at_k(&ids(&[1]), is_rel, 0).is_err());
    }

    fn truth() -> GroundTruth {
        let mut t = GroundTruth::default();
        for (q, c) in [("q1", "a"), ("q2", "b")] {
            t.queries.insert(q.into(), c.into());
        }
        for (v, c) in [("v1", "a"), ("v2", "b"), ("v3", "a")] {
            t.videos.insert(v.into(), c.into());
        }
        t
    }

    fn run(entries: &[(&str, &[&str])]) -> BTreeMap<String, Vec<String>> {
        entries
            .iter()
            .map(|(q, r)| (q.to_string(), r.iter().map(|s| s.to_string()).collect()))
            .collect()
    }

    #[test]
    fn evaluate_means_per_query_ap() {
        let t = truth();
        let r = run(&[("q1", &["v1", "v3", "v2"]), ("q2", &["v1", "v2", "v3"])]);
        let rep = evaluate(&r, &t, 2).unwrap();
        assert_eq!(rep.per_query[0].average_precision, 1.0);
        assert_eq!(rep.per_query[1].average_precision, 0.5);
        assert_eq!(rep.map, 0.75);
        assert_eq!(rep.precision_at_k, (1.0 + 0.5) / 2.0);
        assert!(rep.to_key_values().contains("map=0.75\n"));
        assert_eq!(rep.to_table().lines().count(), 3);
    }

    #[test]
    fn single_perfect_query() {
        let mut t = truth();
        t.queries.remove("q2");
        let rep = evaluate(&run(&[("q1", &["v3", "v1"])]), &t, 500).unwrap();
        assert_eq!(rep.map, 1.0);
    }

    #[test]
    fn no_relevant_is_flagged() {
        let mut t = truth();
        t.queries.remove("q1");
        let rep = evaluate(&run(&[("q2", &["v1", "v3"])]), &t, 1).unwrap();
        assert_eq!(rep.map, 0.0);
        assert_eq!(rep.without_relevant().collect::<Vec<_>>(), ["q2"]);
        assert!(rep.to_key_values().contains("warning="));
    }

    #[test]
    fn unknown_and_missing_ids_are_errors() {
        let t = truth();
        let err = evaluate(&run(&[("q1", &["v9"]), ("q2", &[]), ("qx", &[])]), &t, 1).unwrap_err();
        match err {
            Error::UnknownIds(ids) => assert_eq!(ids, ["qx", "v9"]),
            other => panic!("unexpected {other:?}"),
        }
        let err = evaluate(&run(&[("q1", &["v1"])]), &t, 1).unwrap_err();
        match err {
            Error::MissingQueries(ids) => assert_eq!(ids, ["q2"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn metrics_are_bounded(pattern in prop::collection::vec(0u8..2, 0..60), k in 1usize..80) {
            let r = ids(&pattern);
            let ap = average_precision(&r, is_rel);
            let p = precision_at_k(&r, is_rel, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&ap));
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn irrelevant_tail_does_not_change_ap(pattern in prop::collection::vec(0u8..2, 1..40), tail in 0usize..20) {
            let mut r = ids(&pattern);
            let before = average_precision(&r, is_rel);
            r.extend((0..tail).map(|i| format!("tail{i}")));
            prop_assert_eq!(average_precision(&r, is_rel), before);
        }

        #[test]
        fn relabeling_categories_is_invariant(perm in any::<u64>()) {
            let t = truth();
            let r = run(&[("q1", &["v2", "v1", "v3"]), ("q2", &["v3", "v2", "v1"])]);
            let mut relabeled = t.clone();
            let rename = |c: &String| format!("{c}-{perm}");
            for v in relabeled.queries.values_mut() { *v = rename(v); }
            for v in relabeled.videos.values_mut() { *v = rename(v); }
            prop_assert_eq!(evaluate(&r, &t, 2).unwrap(), evaluate(&r, &relabeled, 2).unwrap());
        }
    }
}
