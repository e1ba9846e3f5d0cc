//! Slow, obviously-correct reference implementations. Each one restates a
//! rule directly from its definition, with no shared code, so tests can
//! compare the production kernel against it.

/// Syllable id of every phoneme position, found by handing each consonant
/// to the vowel at the smallest index distance (equal distance: the later
/// vowel). Returns `None` when there is no vowel.
pub fn nearest_vowel_syllables(is_vowel: &[bool]) -> Option<Vec<usize>> {
    let vowels: Vec<usize> = (0..is_vowel.len()).filter(|&i| is_vowel[i]).collect();
    if vowels.is_empty() {
        return None;
    }
    let owner = |i: usize| {
        let mut best = 0;
        for (k, &v) in vowels.iter().enumerate() {
            let d = i.abs_diff(v);
            let bd = i.abs_diff(vowels[best]);
            if d < bd || (d == bd && v > vowels[best]) {
                best = k;
            }
        }
        best
    };
    Some((0..is_vowel.len()).map(owner).collect())
}

/// Mora count by character class: every kana letter is one mora except the
/// small glide and small vowel letters, which lean on the letter before.
pub fn count_moras_by_class(kana: &str) -> usize {
    const LEANING: &str = "ゃゅょャュョぁぃぅぇぉァィゥェォゎヮ";
    kana.chars().filter(|c| !LEANING.contains(*c)).count()
}

/// Reference for the length-fit choice. Candidates are `(moras, score)` or
/// `None` when unreadable. Returns the winner and whether the overshoot
/// fallback was needed.
pub fn select_brute(candidates: &[Option<(usize, f64)>], target: usize) -> Option<(usize, bool)> {
    let readable: Vec<(usize, usize, f64)> = candidates
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|(m, s)| (i, m, s)))
        .collect();
    if readable.is_empty() {
        return None;
    }
    let under: Vec<_> = readable.iter().copied().filter(|c| c.1 <= target).collect();
    let (pool, fallback) = if under.is_empty() {
        (readable, true)
    } else {
        (under, false)
    };
    let distance = |m: usize| m.abs_diff(target);
    let mut best = pool[0];
    for &c in &pool[1..] {
        let better = distance(c.1) < distance(best.1)
            || (distance(c.1) == distance(best.1) && c.2 > best.2)
            || (distance(c.1) == distance(best.1) && c.2 == best.2 && c.0 < best.0);
        if better {
            best = c;
        }
    }
    Some((best.0, fallback))
}

/// Mid-rank of `x` within `pooled`.
fn mid_rank(pooled: &[f64], x: f64) -> f64 {
    let below = pooled.iter().filter(|&&y| y < x).count() as f64;
    let equal = pooled.iter().filter(|&&y| y == x).count() as f64;
    below + (equal + 1.0) / 2.0
}

/// Two-sided rank-sum p-value by listing every way to pick |a| of the
/// pooled positions as the first group.
pub fn rank_sum_p_enumerated(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    assert!(n <= 20, "enumeration oracle is for small samples");
    let ranks: Vec<f64> = pooled.iter().map(|&x| mid_rank(&pooled, x)).collect();
    let expected = a.len() as f64 * (n as f64 + 1.0) / 2.0;
    let observed = (ranks[..a.len()].iter().sum::<f64>() - expected).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let w: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ranks[i])
            .sum();
        total += 1;
        if (w - expected).abs() >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

/// One aligned phoneme: `(start_us, end_us, word, is_vowel)`.
pub type Aligned = (i64, i64, usize, bool);

/// Expected `(onset_us, duration_us)` of every note: each word's phonemes
/// are grouped by [`nearest_vowel_syllables`], and a note runs from the
/// start of its first phoneme to the end of its last. Words without a
/// vowel are skipped.
pub fn note_spans(aligned: &[Aligned]) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let mut words: Vec<usize> = aligned.iter().map(|p| p.2).collect();
    words.dedup();
    for w in words {
        let ph: Vec<&Aligned> = aligned.iter().filter(|p| p.2 == w).collect();
        let flags: Vec<bool> = ph.iter().map(|p| p.3).collect();
        let Some(ids) = nearest_vowel_syllables(&flags) else {
            continue;
        };
        for s in 0..=*ids.iter().max().unwrap() {
            let members: Vec<&&Aligned> = ph
                .iter()
                .zip(&ids)
                .filter(|(_, &id)| id == s)
                .map(|(p, _)| p)
                .collect();
            let onset = members.first().unwrap().0;
            let end = members.last().unwrap().1;
            out.push((onset, end - onset));
        }
    }
    out
}

/// Unrounded tick length of a span.
pub fn exact_ticks(duration_s: f64, tempo_bpm: f64, ticks_per_quarter: f64) -> f64 {
    duration_s * (tempo_bpm / 60.0) * ticks_per_quarter
}

/// Equal-tempered pitch from the definition of a semitone as a twelfth of
/// an octave: count how many semitone ratios separate `hz` from A4.
pub fn semitones_from_a4(hz: f64) -> f64 {
    hz.ln() / 2f64.powf(1.0 / 12.0).ln() - 440f64.ln() / 2f64.powf(1.0 / 12.0).ln()
}
