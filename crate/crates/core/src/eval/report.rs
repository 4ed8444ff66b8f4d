use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalReport;
use crate::dedup::pipeline::RunReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "txt" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

/// JSON shape of a rendered report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub run: RunReport,
    pub eval: Option<EvalReport>,
}

pub fn report_render(run: &RunReport, eval: Option<&EvalReport>, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let doc = ReportDocument {
                run: run.clone(),
                eval: eval.cloned(),
            };
            serde_json::to_string_pretty(&doc).expect("report is serializable") + "\n"
        }
        ReportFormat::Text => render_text(run, eval),
    }
}

fn render_text(run: &RunReport, eval: Option<&EvalReport>) -> String {
    let mut s = String::new();
    let c = &run.counts;
    let _ = writeln!(s, "== Run ==");
    let _ = writeln!(s, "mode           {}", run.mode);
    let _ = writeln!(s, "index          {:?}", run.index_kind);
    let _ = writeln!(s, "k / theta      {} / {}", run.k, run.theta);
    let _ = writeln!(s, "rules          {}", run.n_rules);
    let _ = writeln!(s, "postings       {}", c.n_postings);
    let _ = writeln!(s, "unique texts   {}", c.n_groups);
    let _ = writeln!(s, "embedded       {} ({} empty)", c.n_embedded, c.n_zero_vectors);

    let _ = writeln!(s, "\n== Stage timings ==");
    for t in &run.timings {
        let _ = writeln!(s, "{:<14} {:>10.3} s", t.stage, t.seconds);
    }

    let cmp = &run.comparisons;
    let _ = writeln!(s, "\n== Comparisons ==");
    let _ = writeln!(s, "all pairs              {}", cmp.all_pairs);
    let _ = writeln!(s, "after exact grouping   {}", cmp.unique_pairs);
    let _ = writeln!(s, "index distance evals   {}", cmp.index_distance_evaluations);
    let _ = writeln!(s, "candidate pairs        {}", cmp.candidate_pairs);
    let _ = writeln!(s, "kept pairs             {}", cmp.kept_pairs);
    if cmp.unique_pairs > 0 {
        let _ = writeln!(
            s,
            "reduction vs brute     {:.2}%",
            100.0 * (1.0 - cmp.candidate_pairs as f64 / cmp.unique_pairs as f64)
        );
    }

    let t = &run.truncation;
    let _ = writeln!(s, "\n== Truncation (limit {} tokens) ==", t.max_tokens);
    let _ = writeln!(
        s,
        "truncated      {} of {} ({:.1}%)",
        t.n_truncated,
        t.n_total,
        100.0 * t.fraction_truncated
    );
    let _ = writeln!(s, "tokens lost    mean {:.1}, median {:.1}", t.mean_tokens_lost, t.median_tokens_lost);
    for b in t.histogram_over_limit.iter().filter(|b| b.count > 0) {
        let hi = b.hi.map_or("inf".to_string(), |h| h.to_string());
        let _ = writeln!(s, "  [{}, {})  {}", b.lo, hi, b.count);
    }

    let _ = writeln!(s, "\n== Saturation ==");
    let _ = writeln!(
        s,
        "{} records have all {} neighbours below {}",
        run.saturation.count, run.saturation.k, run.saturation.theta
    );

    let _ = writeln!(s, "\n== Threshold sweep ==");
    let _ = writeln!(s, "{:>6} {:>10} {:>9}", "theta", "kept", "fraction");
    for r in &run.sweep {
        let _ = writeln!(s, "{:>6.2} {:>10} {:>9.4}", r.theta, r.kept_count, r.kept_fraction);
    }

    let _ = writeln!(s, "\n== Labels ==");
    for (label, n) in &run.label_counts {
        let _ = writeln!(s, "{label:<10} {n}");
    }

    if let Some(e) = eval {
        let _ = writeln!(s, "\n== Evaluation ==");
        let _ = writeln!(
            s,
            "{:<10} {:>9} {:>9} {:>9} {:>7} {:>7} {:>7}",
            "class", "precision", "recall", "f1", "tp", "fp", "fn"
        );
        for (name, c) in [("FULL", &e.full), ("SEMANTIC", &e.semantic), ("TEMPORAL", &e.temporal)] {
            let _ = writeln!(
                s,
                "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>7} {:>7} {:>7}",
                name, c.precision, c.recall, c.f1, c.tp, c.fp, c.fn_
            );
        }
        let _ = writeln!(s, "macro F1   {:.4}", e.macro_f1);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Mode;
    use crate::dedup::pipeline::{ComparisonCounters, Counts, StageTiming};
    use crate::dedup::{saturation_report, threshold_sweep, DEFAULT_SWEEP};
    use crate::embed::TruncationReport;
    use crate::index::IndexKind;

    pub(crate) fn minimal() -> RunReport {
        RunReport {
            mode: Mode::TwoStep,
            k: 100,
            theta: 0.25,
            index_kind: IndexKind::Flat,
            n_rules: 0,
            counts: Counts {
                n_postings: 3,
                n_groups: 2,
                n_embedded: 2,
                n_zero_vectors: 0,
            },
            comparisons: ComparisonCounters {
                all_pairs: 3,
                unique_pairs: 1,
                index_distance_evaluations: 4,
                candidate_pairs: 1,
                kept_pairs: 0,
            },
            timings: vec![StageTiming {
                stage: "normalize".into(),
                seconds: 0.5,
            }],
            truncation: TruncationReport::from_token_counts([10, 500], 384),
            saturation: saturation_report(&[], 0.25, 100),
            sweep: threshold_sweep(&[], &DEFAULT_SWEEP).unwrap(),
            label_counts: [("FULL".to_string(), 1)].into_iter().collect(),
        }
    }

    #[test]
    fn text_has_all_sections() {
        let text = report_render(&minimal(), Some(&EvalReport::default()), ReportFormat::Text);
        for h in [
            "== Stage timings ==",
            "== Comparisons ==",
            "== Truncation",
            "== Saturation ==",
            "== Threshold sweep ==",
            "== Evaluation ==",
        ] {
            assert!(text.contains(h), "missing {h}");
        }
        let sweep = text.split("== Threshold sweep ==").nth(1).unwrap();
        let rows = sweep.lines().skip(2).take_while(|l| !l.is_empty()).count();
        assert_eq!(rows, 8);
    }

    #[test]
    fn json_round_trip() {
        let run = minimal();
        let eval = EvalReport::default();
        let json = report_render(&run, Some(&eval), ReportFormat::Json);
        let back: ReportDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back.run, run);
        assert_eq!(back.eval, Some(eval));
    }
}
