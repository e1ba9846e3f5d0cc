use statrs::distribution::{ContinuousCDF, Normal};
use sv2svt_core::stats::{
    analyze, ks_normality, mean_ci, wilcoxon_rank_sum, Cell, PMethod, ScoreRow, ScoreTable, System,
};
use sv2svt_oracles::rank_sum_p_enumerated;

/// Every non-decreasing list of scores 1..=5 with the given length.
fn multisets(len: usize) -> Vec<Vec<f64>> {
    fn go(len: usize, min: u8, prefix: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if prefix.len() == len {
            out.push(prefix.clone());
            return;
        }
        for s in min..=5 {
            prefix.push(f64::from(s));
            go(len, s, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(len, 1, &mut Vec::new(), &mut out);
    out
}

/// The rank-sum statistic depends only on the multiset of each group, so
/// covering every pair of multisets covers every pair of score lists.
#[test]
fn exact_rank_sum_agrees_with_enumeration_up_to_ten() {
    let tables: Vec<Vec<Vec<f64>>> = (0..=9).map(multisets).collect();
    let mut pairs = 0u64;
    for m in 1..=9 {
        for n in 1..=(10 - m) {
            for a in &tables[m] {
                for b in &tables[n] {
                    let t = wilcoxon_rank_sum(a, b).unwrap();
                    assert_eq!(t.method, PMethod::Exact);
                    let oracle = rank_sum_p_enumerated(a, b);
                    assert!((t.p_value - oracle).abs() < 1e-12, "{a:?} vs {b:?}");
                    assert!((0.0..=1.0).contains(&t.p_value));
                    pairs += 1;
                }
            }
        }
    }
    assert!(pairs > 100_000, "{pairs}");
}

#[test]
fn rank_sum_symmetries() {
    let a = [1.0, 2.0, 2.0, 5.0, 3.0];
    let b = [4.0, 4.0, 5.0, 1.0];
    assert_eq!(
        wilcoxon_rank_sum(&a, &b).unwrap().p_value,
        wilcoxon_rank_sum(&b, &a).unwrap().p_value
    );
    assert_eq!(wilcoxon_rank_sum(&a, &a).unwrap().p_value, 1.0);
    let big: Vec<f64> = (0..20).map(|i| f64::from(i % 5 + 1)).collect();
    let shifted: Vec<f64> = (0..20).map(|i| f64::from((i + 2) % 5 + 1)).collect();
    let t = wilcoxon_rank_sum(&big, &shifted).unwrap();
    assert_eq!(t.method, PMethod::NormalApprox);
    assert!((0.0..=1.0).contains(&t.p_value));
    assert!((t.p_value - wilcoxon_rank_sum(&shifted, &big).unwrap().p_value).abs() < 1e-12);
}

#[test]
fn interval_properties() {
    let ci = mean_ci(&[2.0, 2.0, 2.0], 0.95).unwrap();
    assert_eq!((ci.mean, ci.half_width), (2.0, 0.0));
    let xs = [1.0, 3.0, 4.0, 4.0, 5.0, 2.0];
    let flipped: Vec<f64> = xs.iter().map(|x| 6.0 - x).collect();
    let (p, q) = (
        mean_ci(&xs, 0.95).unwrap(),
        mean_ci(&flipped, 0.95).unwrap(),
    );
    assert!((q.mean - (6.0 - p.mean)).abs() < 1e-12);
    assert!((q.half_width - p.half_width).abs() < 1e-12);
    // Replicating a sample keeps its sum of squares proportional to n, so
    // s/√n falls as 1/√n up to the n−1 denominator.
    let se = |v: &[f64]| {
        let ci = mean_ci(v, 0.95).unwrap();
        let t = statrs::distribution::StudentsT::new(0.0, 1.0, v.len() as f64 - 1.0)
            .unwrap()
            .inverse_cdf(0.975);
        ci.half_width / t
    };
    let base: Vec<f64> = xs.repeat(10);
    let big: Vec<f64> = xs.repeat(40);
    let ratio = se(&base) / se(&big);
    let n1 = base.len() as f64;
    let n2 = big.len() as f64;
    let expected = ((n2 - 1.0) / (n1 - 1.0)).sqrt();
    assert!((expected - (n2 / n1).sqrt()).abs() < 0.02);
    assert!((ratio - expected).abs() < 1e-12, "{ratio} vs {expected}");
}

#[test]
fn gaussian_quantiles_pass_normality() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let xs: Vec<f64> = (1..=100)
        .map(|i| normal.inverse_cdf((i as f64 - 0.5) / 100.0))
        .collect();
    let k = ks_normality(&xs).unwrap();
    assert!(k.d < 0.05, "{}", k.d);
    assert!(!k.degenerate);
    assert!(k.p_value > 0.9 && k.p_value <= 1.0);
    assert!(ks_normality(&[4.0; 6]).unwrap().degenerate);
    let skewed = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 5.0];
    let k = ks_normality(&skewed).unwrap();
    assert!((0.0..=1.0).contains(&k.d) && (0.0..=1.0).contains(&k.p_value));
}

fn table(per_subject: &[(&str, System, &str, u8)]) -> ScoreTable {
    ScoreTable {
        rows: per_subject
            .iter()
            .map(|&(s, system, q, score)| ScoreRow {
                subject: s.into(),
                system,
                question: q.into(),
                score,
            })
            .collect(),
    }
}

#[test]
fn analysis_examples() {
    let mut rows = Vec::new();
    let subjects = ["a", "b", "c", "d", "e", "f"];
    for q in ["Q1", "Q2", "Q3", "Q4", "Q5", "Q6"] {
        for (i, s) in subjects.iter().enumerate() {
            let score = (i % 5 + 1) as u8;
            rows.push((*s, System::Baseline, q, score));
            rows.push((*s, System::Finetuned, q, score));
        }
    }
    let r = analyze(&table(&rows), 0.95);
    for q in &r.questions {
        let Cell::Value(t) = &q.rank_sum else {
            panic!("{q:?}")
        };
        assert_eq!(t.p_value, 1.0);
    }

    let mut rows = Vec::new();
    for s in subjects {
        rows.push((s, System::Baseline, "Q1", 2));
        rows.push((s, System::Finetuned, "Q1", 4));
    }
    let r = analyze(&table(&rows), 0.95);
    let q1 = &r.questions[0];
    let (Cell::Value(b), Cell::Value(f)) = (&q1.baseline, &q1.finetuned) else {
        panic!()
    };
    assert!(f.mean > b.mean);
    let Cell::Value(t) = &q1.rank_sum else {
        panic!()
    };
    let oracle = rank_sum_p_enumerated(&[2.0; 6], &[4.0; 6]);
    assert!((t.p_value - oracle).abs() < 1e-12);
    assert!(t.p_value < 0.01);

    let one = table(&[
        ("a", System::Baseline, "Q1", 3),
        ("a", System::Finetuned, "Q1", 4),
    ]);
    for q in analyze(&one, 0.95).questions {
        assert!(matches!(q.baseline, Cell::Gap(_)));
        assert!(matches!(q.finetuned, Cell::Gap(_)));
    }
}
