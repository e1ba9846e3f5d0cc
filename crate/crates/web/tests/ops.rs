use serde_json::{json, Value};
use sv2svt_web::ops;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn syllabify_marks_unknown_words() {
    let v = parse(ops::syllabify("Blueberry sky zzxqv").unwrap());
    assert_eq!(v[0]["syllables"], json!(["BLUW", "BEH", "RIY"]));
    assert_eq!(v[1]["syllables"], json!(["SKAY"]));
    assert_eq!(v[2]["syllables"], Value::Null);
    assert_eq!(parse(ops::syllabify("   ").unwrap()), json!([]));
}

#[test]
fn moras_follow_the_counting_rules() {
    for (text, count) in [
        ("きょう", 2),
        ("がっこう", 4),
        ("にほん", 3),
        ("コーヒー", 4),
        ("離", 1),
    ] {
        let v = parse(ops::moras(text).unwrap());
        assert_eq!(v["count"], count, "{text}");
        assert_eq!(v["moras"].as_array().unwrap().len(), count, "{text}");
    }
    let v = parse(ops::moras("青空").unwrap());
    assert_eq!(v["kana"], "あおぞら");
    assert_eq!(v["moras"][0]["kind"], "plain");
    assert!(ops::moras("今夜").is_err());
}

#[test]
fn fit_prefers_smallest_deficit_then_overshoot() {
    let v = parse(ops::fit("-0.3\t青い空\n-0.4\t青空\n-0.1\t空\n", 4).unwrap());
    assert_eq!(v["text"], "青空");
    assert_eq!(v["deficit"], 0);
    let v = parse(ops::fit("-0.1\tあおぞら\n-0.2\tあおいそら\n", 2).unwrap());
    assert_eq!(v["text"], "あおぞら");
    assert_eq!(v["fallback_used"], true);
}

#[test]
fn fit_rejects_malformed_input() {
    assert!(ops::fit("", 3).is_err());
    assert!(ops::fit("no tab here", 3).is_err());
    assert!(ops::fit("NaN\tそら", 3).is_err());
    assert!(ops::fit("0\tそら", 0).is_err());
}
