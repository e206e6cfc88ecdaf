use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::kbdata::RelationCategory;

/// Mean rank and hits@k (in percent) over `count` ranks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    pub mean_rank: f64,
    pub hits_at_k: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub raw: RankMetrics,
    pub filtered: RankMetrics,
}

/// Head and tail prediction restricted to relations of one category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub triples: usize,
    pub relations: usize,
    pub head: LinkMetrics,
    pub tail: LinkMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsampleStats {
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
}

/// Spread of link metrics over random test subsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSubsample {
    pub mean_rank_raw: SubsampleStats,
    pub mean_rank_filtered: SubsampleStats,
    pub hits_at_k_raw: SubsampleStats,
    pub hits_at_k_filtered: SubsampleStats,
    pub parts: usize,
    pub repeats: usize,
    pub seed: u64,
}

/// Label prediction metrics; `hits` is the percentage of labels ranked
/// within `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub mean_rank: f64,
    pub hits: f64,
    pub pct: usize,
    pub threshold: usize,
    pub count: usize,
}

/// Everything one evaluation run measured. Sections that were not computed
/// are `None` or empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub num_test: usize,
    pub link: Option<LinkMetrics>,
    pub per_category: BTreeMap<RelationCategory, CategoryMetrics>,
    pub link_subsample: Option<LinkSubsample>,
    pub auc_pr: Option<f64>,
    pub label: Option<LabelMetrics>,
}

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key}: {value}");
}

impl EvalReport {
    /// `key: value` lines, one metric per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        kv(&mut s, "num_test", self.num_test);
        if let Some(l) = &self.link {
            let k = self.k;
            kv(&mut s, "k", k);
            kv(&mut s, "mean_rank_raw", format!("{:.4}", l.raw.mean_rank));
            kv(
                &mut s,
                "mean_rank_filtered",
                format!("{:.4}", l.filtered.mean_rank),
            );
            kv(
                &mut s,
                &format!("hits_at_{k}_raw"),
                format!("{:.4}", l.raw.hits_at_k),
            );
            kv(
                &mut s,
                &format!("hits_at_{k}_filtered"),
                format!("{:.4}", l.filtered.hits_at_k),
            );
            if let Some(sub) = &self.link_subsample {
                kv(&mut s, "subsample_parts", sub.parts);
                kv(&mut s, "subsample_repeats", sub.repeats);
                kv(&mut s, "subsample_seed", sub.seed);
                for (name, st) in [
                    ("mean_rank_raw", sub.mean_rank_raw),
                    ("mean_rank_filtered", sub.mean_rank_filtered),
                    (&format!("hits_at_{k}_raw") as &str, sub.hits_at_k_raw),
                    (&format!("hits_at_{k}_filtered"), sub.hits_at_k_filtered),
                ] {
                    kv(
                        &mut s,
                        &format!("subsample_mean.{name}"),
                        format!("{:.4}", st.mean),
                    );
                    kv(
                        &mut s,
                        &format!("subsample_std.{name}"),
                        format!("{:.4}", st.std),
                    );
                }
            }
            for (cat, m) in &self.per_category {
                let p = format!("category.{cat}");
                kv(&mut s, &format!("{p}.relations"), m.relations);
                kv(&mut s, &format!("{p}.triples"), m.triples);
                for (side, lm) in [("head", m.head), ("tail", m.tail)] {
                    kv(
                        &mut s,
                        &format!("{p}.{side}.mean_rank_filtered"),
                        format!("{:.4}", lm.filtered.mean_rank),
                    );
                    kv(
                        &mut s,
                        &format!("{p}.{side}.hits_at_{k}_filtered"),
                        format!("{:.4}", lm.filtered.hits_at_k),
                    );
                }
            }
        }
        if let Some(a) = self.auc_pr {
            kv(&mut s, "auc_pr", format!("{a:.6}"));
        }
        if let Some(l) = &self.label {
            kv(&mut s, "label_mean_rank", format!("{:.4}", l.mean_rank));
            kv(
                &mut s,
                &format!("hits_at_{}pct", l.pct),
                format!("{:.4}", l.hits),
            );
            kv(&mut s, "label_threshold", l.threshold);
        }
        s
    }

    /// Filtered hits@k per category, one row per prediction side.
    pub fn category_table(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<16}", format!("hits@{} (filt.)", self.k));
        for cat in RelationCategory::ALL {
            let _ = write!(s, "{:>9}", cat.as_str());
        }
        s.push('\n');
        for (name, pick) in [
            (
                "predicting head",
                (|m: &CategoryMetrics| m.head) as fn(&CategoryMetrics) -> LinkMetrics,
            ),
            ("predicting tail", |m: &CategoryMetrics| m.tail),
        ] {
            let _ = write!(s, "{name:<16}");
            for cat in RelationCategory::ALL {
                match self.per_category.get(&cat) {
                    Some(m) => {
                        let _ = write!(s, "{:>9.1}", pick(m).filtered.hits_at_k);
                    }
                    None => {
                        let _ = write!(s, "{:>9}", "-");
                    }
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
