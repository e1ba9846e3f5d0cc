//! Statistics for listening-test score tables: means with Student-t
//! confidence intervals, Wilcoxon rank-sum tests and Kolmogorov-Smirnov
//! normality checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

/// Combined sample size at or below which the rank-sum p-value is exact.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {needed} scores, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("confidence must lie strictly between 0 and 1, got {0}")]
    Confidence(f64),
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
}

/// Mean and Student-t half width `t(n−1, (1+c)/2) · s / √n`.
pub fn mean_ci(scores: &[f64], confidence: f64) -> Result<MeanCi, StatsError> {
    if scores.len() < 2 {
        return Err(StatsError::TooFew {
            needed: 2,
            got: scores.len(),
        });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::Confidence(confidence));
    }
    check_finite(scores)?;
    let n = scores.len() as f64;
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("degrees of freedom are positive")
        .inverse_cdf((1.0 + confidence) / 2.0);
    Ok(MeanCi {
        mean: mean(scores),
        half_width: t * sample_sd(scores) / n.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumTest {
    /// Rank sum of the first sample (mid-ranks for ties).
    pub rank_sum: f64,
    pub p_value: f64,
    pub method: PMethod,
}

/// Doubled mid-ranks of the pooled sample, so tied ranks stay integral.
fn doubled_ranks(pooled: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0; pooled.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && pooled[order[end + 1]] == pooled[order[start]] {
            end += 1;
        }
        // Positions start..=end hold ranks start+1..=end+1; twice their mean.
        let doubled = (start + end + 2) as u64;
        for &k in &order[start..=end] {
            ranks[k] = doubled;
        }
        start = end + 1;
    }
    ranks
}

/// Two-sided Wilcoxon rank-sum test. Exact over all rank splits when the
/// combined size is at most [`EXACT_LIMIT`]; otherwise a normal
/// approximation with tie-corrected variance and continuity correction.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSumTest, StatsError> {
    for s in [a, b] {
        if s.is_empty() {
            return Err(StatsError::TooFew { needed: 1, got: 0 });
        }
        check_finite(s)?;
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = doubled_ranks(&pooled);
    let (m, n) = (a.len(), b.len());
    let total = m + n;
    let w2: u64 = ranks[..m].iter().sum();
    let e2 = (m * (total + 1)) as u64;
    let rank_sum = w2 as f64 / 2.0;
    if total <= EXACT_LIMIT {
        let observed = w2.abs_diff(e2);
        let max_sum: u64 = ranks.iter().sum();
        // ways[k][s]: subsets of size k with doubled rank sum s.
        let mut ways = vec![vec![0u64; max_sum as usize + 1]; m + 1];
        ways[0][0] = 1;
        for &r in &ranks {
            for k in (1..=m).rev() {
                for s in (r as usize..=max_sum as usize).rev() {
                    ways[k][s] += ways[k - 1][s - r as usize];
                }
            }
        }
        let all: u64 = ways[m].iter().sum();
        let extreme: u64 = ways[m]
            .iter()
            .enumerate()
            .filter(|&(s, _)| (s as u64).abs_diff(e2) >= observed)
            .map(|(_, &c)| c)
            .sum();
        return Ok(RankSumTest {
            rank_sum,
            p_value: extreme as f64 / all as f64,
            method: PMethod::Exact,
        });
    }
    let (mf, nf, nt) = (m as f64, n as f64, total as f64);
    let mut tie_term = 0.0;
    let mut sorted = ranks.clone();
    sorted.sort_unstable();
    for group in sorted.chunk_by(|x, y| x == y) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let variance = mf * nf / 12.0 * ((nt + 1.0) - tie_term / (nt * (nt - 1.0)));
    let p_value = if variance <= 0.0 {
        1.0
    } else {
        let dev = (rank_sum - mf * (nt + 1.0) / 2.0).abs();
        let z = (dev - 0.5).max(0.0) / variance.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * normal.sf(z)).min(1.0)
    };
    Ok(RankSumTest {
        rank_sum,
        p_value,
        method: PMethod::NormalApprox,
    })
}

/// Largest gap between the empirical CDF of `sample` and `cdf`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Survival function of the limiting Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        // The alternating series converges slowly here; use the dual form.
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let cdf: f64 = (1..=20)
            .map(|k| {
                let j = (2 * k - 1) as f64;
                (c * j * j).exp()
            })
            .sum::<f64>()
            * (2.0 * std::f64::consts::PI).sqrt()
            / lambda;
        1.0 - cdf
    } else {
        2.0 * (1..=100)
            .map(|k| {
                let k = k as f64;
                let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * k * k * lambda * lambda).exp()
            })
            .sum::<f64>()
    };
    p.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p_value: f64,
    /// The sample has zero variance, so the fitted distribution is a point
    /// mass and the test says nothing about normality.
    pub degenerate: bool,
}

/// KS distance to a Gaussian fitted by sample mean and standard deviation,
/// with an asymptotic p-value.
pub fn ks_normality(scores: &[f64]) -> Result<KsResult, StatsError> {
    if scores.is_empty() {
        return Err(StatsError::TooFew { needed: 1, got: 0 });
    }
    check_finite(scores)?;
    let sd = if scores.len() > 1 {
        sample_sd(scores)
    } else {
        0.0
    };
    if sd == 0.0 {
        // The empirical CDF of a constant sample is exactly the point-mass
        // CDF at its mean.
        return Ok(KsResult {
            d: 0.0,
            p_value: 1.0,
            degenerate: true,
        });
    }
    let normal = Normal::new(mean(scores), sd).expect("positive sd");
    let d = ks_statistic(scores, |x| normal.cdf(x));
    let p_value = kolmogorov_sf((scores.len() as f64).sqrt() * d);
    Ok(KsResult {
        d,
        p_value,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Baseline,
    Finetuned,
}

pub const QUESTIONS: [&str; 6] = ["Q1", "Q2", "Q3", "Q4", "Q5", "Q6"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub subject: String,
    pub system: System,
    pub question: String,
    pub score: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    /// Parses `subject,system,question,score` CSV with a header row.
    pub fn parse_csv(text: &str) -> Result<ScoreTable, StatsError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for record in reader.deserialize::<ScoreRow>() {
            let line = |e: &csv::Error| e.position().map_or(0, |p| p.line());
            let row = record.map_err(|e| StatsError::Csv {
                line: line(&e),
                message: e.to_string(),
            })?;
            let here = rows.len() as u64 + 2;
            if !(1..=5).contains(&row.score) {
                return Err(StatsError::Csv {
                    line: here,
                    message: format!("score {} is outside 1..5", row.score),
                });
            }
            if !QUESTIONS.contains(&row.question.as_str()) {
                return Err(StatsError::Csv {
                    line: here,
                    message: format!("unknown question {:?}", row.question),
                });
            }
            rows.push(row);
        }
        Ok(ScoreTable { rows })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    fn scores(&self, system: System, question: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.system == system && r.question == question)
            .map(|r| f64::from(r.score))
            .collect()
    }
}

/// A mean with its interval, or why it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell<T> {
    Value(T),
    Gap(String),
}

impl<T> Cell<T> {
    fn from_result<E: ToString>(r: Result<T, E>) -> Self {
        r.map_or_else(|e| Cell::Gap(e.to_string()), Cell::Value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionReport {
    pub question: String,
    pub n_baseline: usize,
    pub n_finetuned: usize,
    pub baseline: Cell<MeanCi>,
    pub finetuned: Cell<MeanCi>,
    pub rank_sum: Cell<RankSumTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub confidence: f64,
    pub questions: Vec<QuestionReport>,
    pub normality: BTreeMap<String, KsResult>,
}

/// Per-question means, intervals and cross-system rank-sum tests, plus a
/// normality check of each system's pooled scores.
pub fn analyze(table: &ScoreTable, confidence: f64) -> Report {
    let questions = QUESTIONS
        .iter()
        .map(|&q| {
            let base = table.scores(System::Baseline, q);
            let fine = table.scores(System::Finetuned, q);
            QuestionReport {
                question: q.into(),
                n_baseline: base.len(),
                n_finetuned: fine.len(),
                baseline: Cell::from_result(mean_ci(&base, confidence)),
                finetuned: Cell::from_result(mean_ci(&fine, confidence)),
                rank_sum: Cell::from_result(wilcoxon_rank_sum(&base, &fine)),
            }
        })
        .collect();
    let mut normality = BTreeMap::new();
    for (name, system) in [
        ("baseline", System::Baseline),
        ("finetuned", System::Finetuned),
    ] {
        let all: Vec<f64> = table
            .rows
            .iter()
            .filter(|r| r.system == system)
            .map(|r| f64::from(r.score))
            .collect();
        if let Ok(ks) = ks_normality(&all) {
            normality.insert(name.to_string(), ks);
        }
    }
    Report {
        confidence,
        questions,
        normality,
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Aligned plain-text table, one row per question.
    pub fn to_text(&self) -> String {
        let ci = |c: &Cell<MeanCi>| match c {
            Cell::Value(v) => format!("{:.2} ± {:.2}", v.mean, v.half_width),
            Cell::Gap(_) => "—".to_string(),
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<4} {:>4} {:>16} {:>4} {:>16} {:>8}  method",
            "q", "n_b", "baseline", "n_f", "finetuned", "p"
        );
        for q in &self.questions {
            let (p, method) = match &q.rank_sum {
                Cell::Value(t) => (
                    format!("{:.4}", t.p_value),
                    match t.method {
                        PMethod::Exact => "exact",
                        PMethod::NormalApprox => "normal",
                    },
                ),
                Cell::Gap(_) => ("—".to_string(), "—"),
            };
            let _ = writeln!(
                out,
                "{:<4} {:>4} {:>16} {:>4} {:>16} {:>8}  {}",
                q.question,
                q.n_baseline,
                ci(&q.baseline),
                q.n_finetuned,
                ci(&q.finetuned),
                p,
                method
            );
        }
        for (name, ks) in &self.normality {
            let _ = writeln!(
                out,
                "normality {name}: D = {:.4}, p = {:.4}{}",
                ks.d,
                ks.p_value,
                if ks.degenerate {
                    " (degenerate: zero variance)"
                } else {
                    ""
                }
            );
        }
        out
    }
}
