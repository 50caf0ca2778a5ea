//! Report tables from directories of result documents: a solve-time ECDF per
//! search variant and a histogram of certified alpha upper bounds. Both are
//! plain CSV; plotting is out of scope.

use std::fs;
use std::io;
use std::path::Path;

use crate::adaptive::{AlphaSearchDocument, SearchStatus, Variant};

pub const VARIANT_ORDER: [Variant; 3] = [
    Variant::Multitree,
    Variant::ReuseTree,
    Variant::ReuseTreeCuts,
];

#[derive(Debug, Clone)]
pub struct ReportTables {
    /// time_s,multitree,reuse_tree,reuse_tree_cuts — cumulative count of
    /// converged searches finishing within time_s, one row per distinct time.
    pub ecdf_csv: String,
    /// alpha_hi,count — converged searches per certified upper bound.
    pub alpha_hist_csv: String,
}

/// Builds both tables from parsed search documents. Non-converged searches
/// contribute to neither table.
pub fn build_report(docs: &[AlphaSearchDocument]) -> ReportTables {
    let solved: Vec<&AlphaSearchDocument> = docs
        .iter()
        .filter(|d| d.status == SearchStatus::Converged)
        .collect();

    let mut times: Vec<f64> = solved.iter().map(|d| d.total_time_s).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let mut ecdf = String::from("time_s,multitree,reuse_tree,reuse_tree_cuts\n");
    for &t in &times {
        let counts: Vec<usize> = VARIANT_ORDER
            .iter()
            .map(|&v| {
                solved
                    .iter()
                    .filter(|d| d.variant == v && d.total_time_s <= t)
                    .count()
            })
            .collect();
        ecdf.push_str(&format!(
            "{:.6},{},{},{}\n",
            t, counts[0], counts[1], counts[2]
        ));
    }

    let mut alphas: Vec<f64> = solved.iter().filter_map(|d| d.alpha_hi).collect();
    alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut hist = String::from("alpha_hi,count\n");
    let mut idx = 0;
    while idx < alphas.len() {
        let a = alphas[idx];
        let mut end = idx;
        while end < alphas.len() && (alphas[end] - a).abs() <= 1e-12 {
            end += 1;
        }
        hist.push_str(&format!("{},{}\n", a, end - idx));
        idx = end;
    }

    ReportTables {
        ecdf_csv: ecdf,
        alpha_hist_csv: hist,
    }
}

/// Reads every `.json` file of `dir` that parses as a search document, in
/// lexicographic filename order; other files are skipped.
pub fn read_results_dir(dir: &Path) -> io::Result<Vec<AlphaSearchDocument>> {
    let mut names: Vec<std::path::PathBuf> = fs::read_dir(dir)?
        .collect::<io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    names.sort();
    let mut docs = Vec::new();
    for p in names {
        let text = fs::read_to_string(&p)?;
        if let Ok(doc) = serde_json::from_str::<AlphaSearchDocument>(&text) {
            docs.push(doc);
        }
    }
    Ok(docs)
}

pub fn report_dir(dir: &Path) -> io::Result<ReportTables> {
    Ok(build_report(&read_results_dir(dir)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(variant: Variant, status: SearchStatus, t: f64, hi: Option<f64>) -> AlphaSearchDocument {
        AlphaSearchDocument {
            status,
            variant,
            alpha_lo: 1.0,
            alpha_hi: hi,
            witness: None,
            heuristic_warning: false,
            total_nodes: 1,
            total_time_s: t,
            iterations: vec![],
            diagnostic: None,
        }
    }

    #[test]
    fn ecdf_counts_converged_only() {
        let docs = vec![
            doc(Variant::Multitree, SearchStatus::Converged, 1.0, Some(2.0)),
            doc(Variant::ReuseTree, SearchStatus::Converged, 0.5, Some(2.0)),
            doc(Variant::Multitree, SearchStatus::LimitHit, 9.0, None),
        ];
        let t = build_report(&docs);
        let lines: Vec<&str> = t.ecdf_csv.lines().collect();
        assert_eq!(lines[0], "time_s,multitree,reuse_tree,reuse_tree_cuts");
        assert_eq!(lines[1], "0.500000,0,1,0");
        assert_eq!(lines[2], "1.000000,1,1,0");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn histogram_groups_equal_alphas() {
        let docs = vec![
            doc(
                Variant::Multitree,
                SearchStatus::Converged,
                1.0,
                Some(2.03125),
            ),
            doc(
                Variant::ReuseTree,
                SearchStatus::Converged,
                1.0,
                Some(2.03125),
            ),
            doc(
                Variant::ReuseTreeCuts,
                SearchStatus::Converged,
                1.0,
                Some(1.0703125),
            ),
        ];
        let t = build_report(&docs);
        assert_eq!(t.alpha_hist_csv, "alpha_hi,count\n1.0703125,1\n2.03125,2\n");
    }

    #[test]
    fn empty_inputs_yield_headers() {
        let t = build_report(&[]);
        assert_eq!(t.ecdf_csv, "time_s,multitree,reuse_tree,reuse_tree_cuts\n");
        assert_eq!(t.alpha_hist_csv, "alpha_hi,count\n");
    }

    #[test]
    fn round_trips_through_a_directory() {
        let dir = tempfile::tempdir().unwrap();
        let d = doc(Variant::Multitree, SearchStatus::Converged, 2.0, Some(3.0));
        std::fs::write(
            dir.path().join("a.json"),
            serde_json::to_string_pretty(&d).unwrap(),
        )
        .unwrap();
        std::fs::write(dir.path().join("junk.txt"), "not json").unwrap();
        std::fs::write(dir.path().join("other.json"), "{}").unwrap();
        let t = report_dir(dir.path()).unwrap();
        assert!(t.ecdf_csv.contains("2.000000,1,0,0"));
        assert_eq!(t.alpha_hist_csv, "alpha_hi,count\n3,1\n");
    }
}
