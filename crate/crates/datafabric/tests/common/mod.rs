//! Deterministic generators shared by the integration suites. Everything
//! is driven by a seeded ChaCha stream so failures replay exactly.
#![allow(dead_code)]

use datafabric::fabric::record::{register_record, RawRecord};
use datafabric::fabric::value::FieldValue;
use datafabric::{
    build_fabric, place_records, Compiler, ExtractionPolicy, Fabric, PlacementPolicy, Registry,
    Request, Topology,
};
use datafabric::dpu::Payload;
use datafabric::lang::parse_request;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_POOL: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "sensor", "log", "metric", "trace",
];

const NOTE_WORDS: &[&str] = &["calibration", "drift", "steady", "spike", "nominal", "fault"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A real value off a 0.5 grid, exact in f64 and never -0.0.
fn half_grid(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> f64 {
    let mut v = rng.gen_range(lo..=hi) as f64 * 0.5;
    if v == 0.0 {
        v = 0.0;
    }
    v
}

pub fn gen_raw_records(rng: &mut ChaCha8Rng, n: usize) -> Vec<RawRecord> {
    (0..n)
        .map(|i| {
            let tag_count = rng.gen_range(1..=3);
            let tags: Vec<String> = TAG_POOL
                .choose_multiple(rng, tag_count)
                .map(|t| t.to_string())
                .collect();
            let mut fields = std::collections::BTreeMap::new();
            let value = if rng.gen_bool(0.5) {
                FieldValue::Int(rng.gen_range(-1000..=1000))
            } else {
                FieldValue::Real(half_grid(rng, -2000, 2000))
            };
            fields.insert("value".to_string(), value);
            if rng.gen_bool(0.3) {
                fields.insert("score".to_string(), FieldValue::Int(rng.gen_range(0..=100)));
            }
            if rng.gen_bool(0.25) {
                let phrase = format!(
                    "{} {}",
                    NOTE_WORDS.choose(rng).unwrap(),
                    NOTE_WORDS.choose(rng).unwrap()
                );
                fields.insert("note".to_string(), FieldValue::Text(phrase));
            }
            RawRecord {
                id: format!("r{i}"),
                tags,
                fields,
            }
        })
        .collect()
}

pub fn to_jsonl(records: &[RawRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("raw record serializes"));
        out.push('\n');
    }
    out
}

pub fn registered(raw: &[RawRecord]) -> Vec<datafabric::Record> {
    raw.iter()
        .map(|r| register_record(r, ExtractionPolicy::ExplicitTags).expect("record registers"))
        .collect()
}

pub fn fabric_with(
    extents: &[usize],
    records: &[datafabric::Record],
    placement: PlacementPolicy,
    seed: u64,
) -> Fabric {
    let topology = Topology::new(extents).expect("valid extents");
    let mut fabric = build_fabric(topology, seed).expect("fabric builds");
    place_records(&mut fabric, records, placement).expect("placement succeeds");
    fabric
}

pub fn gen_placement(rng: &mut ChaCha8Rng) -> PlacementPolicy {
    match rng.gen_range(0..3) {
        0 => PlacementPolicy::RoundRobin,
        1 => PlacementPolicy::KeywordHash,
        _ => PlacementPolicy::Affinity { capacity: None },
    }
}

/// Random request source text covering both modes, every block, and all
/// comparator shapes. `with_text_conditions` also emits string-literal
/// equality tests against the `note` field.
pub fn gen_request_text(rng: &mut ChaCha8Rng, with_text_conditions: bool) -> String {
    let mode = if rng.gen_bool(0.5) { "ANY" } else { "ALL" };
    let kw_count = rng.gen_range(1..=2);
    let keywords: Vec<&str> = TAG_POOL
        .choose_multiple(rng, kw_count)
        .copied()
        .collect();
    let mut text = format!("MATCH {mode}({})", keywords.join(", "));

    let cond_count = rng.gen_range(0..=2);
    let mut conds = Vec::new();
    for _ in 0..cond_count {
        if with_text_conditions && rng.gen_bool(0.15) {
            let cmp = if rng.gen_bool(0.5) { "==" } else { "!=" };
            let phrase = format!(
                "{} {}",
                NOTE_WORDS.choose(rng).unwrap(),
                NOTE_WORDS.choose(rng).unwrap()
            );
            conds.push(format!("note {cmp} \"{phrase}\""));
        } else {
            let field = if rng.gen_bool(0.8) { "value" } else { "score" };
            let cmp = ["==", "!=", "<", "<=", ">", ">="]
                .choose(rng)
                .unwrap();
            let lit = if rng.gen_bool(0.6) {
                rng.gen_range(0..=500).to_string()
            } else {
                format!("{:?}", half_grid(rng, 0, 1000))
            };
            conds.push(format!("{field} {cmp} {lit}"));
        }
    }
    if !conds.is_empty() {
        text.push_str(" WHERE ");
        text.push_str(&conds.join(" AND "));
    }

    let op = match rng.gen_range(0..7) {
        0 => "search".to_string(),
        1 => "count".to_string(),
        2 => format!("sum({})", if rng.gen_bool(0.8) { "value" } else { "score" }),
        3 => format!("min({})", if rng.gen_bool(0.8) { "value" } else { "score" }),
        4 => format!("max({})", if rng.gen_bool(0.8) { "value" } else { "score" }),
        5 => format!("avg({})", if rng.gen_bool(0.8) { "value" } else { "score" }),
        _ => format!("scale(value, {})", rng.gen_range(2..=3)),
    };
    text.push_str(&format!(" APPLY {op};"));
    text
}

pub fn compile_text(text: &str, id: u64) -> Request {
    let ast = parse_request(text).expect("generated request parses");
    let mut compiler = Compiler::new(Registry::standard());
    let mut request = compiler.compile(&ast).expect("generated request compiles");
    request.request_id = id;
    request
}

/// Breaks a known-good script in one of four ways. The base must be a
/// single request without string literals or comments so every operator
/// is guaranteed to leave the text unparseable or uncompilable.
pub fn mutate(rng: &mut ChaCha8Rng, base: &str) -> (String, &'static str) {
    match rng.gen_range(0..4) {
        0 => {
            let at = rng.gen_range(0..=base.len());
            let mut s = String::with_capacity(base.len() + 1);
            s.push_str(&base[..at]);
            s.push('\u{1}');
            s.push_str(&base[at..]);
            (s, "control byte")
        }
        1 => {
            let spots: Vec<usize> = base
                .char_indices()
                .filter(|(_, c)| matches!(c, '(' | ')' | ',' | ';'))
                .map(|(i, _)| i)
                .collect();
            let at = *spots.choose(rng).expect("structural punctuation exists");
            let mut s = String::with_capacity(base.len());
            s.push_str(&base[..at]);
            s.push_str(&base[at + 1..]);
            (s, "dropped punctuation")
        }
        2 => {
            let words = ["MATCH", "ANY", "ALL", "WHERE", "APPLY", "AND",
                         "search", "count", "sum", "min", "max", "avg", "scale"];
            let present: Vec<&str> = words
                .iter()
                .copied()
                .filter(|w| find_word(base, w).is_some())
                .collect();
            let word = present.choose(rng).expect("structural word exists");
            let at = find_word(base, word).unwrap();
            let drop = rng.gen_range(0..word.len());
            let mut s = String::with_capacity(base.len());
            s.push_str(&base[..at]);
            s.push_str(&word[..drop]);
            s.push_str(&word[drop + 1..]);
            s.push_str(&base[at + word.len()..]);
            (s, "misspelled word")
        }
        _ => {
            let last_semi = base.rfind(';').expect("request ends with ';'");
            let cut = rng.gen_range(1..last_semi.max(2));
            (base[..cut].to_string(), "truncated")
        }
    }
}

/// First match of `word` at identifier boundaries.
fn find_word(text: &str, word: &str) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut from = 0;
    while let Some(rel) = text[from..].find(word) {
        let at = from + rel;
        let end = at + word.len();
        let left_ok = at == 0 || !bytes[at - 1].is_ascii_alphanumeric();
        let right_ok = end == bytes.len() || !bytes[end].is_ascii_alphanumeric();
        if left_ok && right_ok {
            return Some(at);
        }
        from = at + 1;
    }
    None
}

/// Integer and id payloads compare exactly; reals within a relative 1e-9.
pub fn payload_close(a: &Payload, b: &Payload) -> bool {
    match (a, b) {
        (Payload::Int(x), Payload::Int(y)) => x == y,
        (Payload::Ids(x), Payload::Ids(y)) => x == y,
        (Payload::Empty, Payload::Empty) => true,
        (Payload::Real(x), Payload::Real(y)) => real_close(*x, *y),
        (
            Payload::SumCount { sum: s1, count: c1 },
            Payload::SumCount { sum: s2, count: c2 },
        ) => c1 == c2 && real_close(*s1, *s2),
        _ => false,
    }
}

pub fn real_close(x: f64, y: f64) -> bool {
    x == y || (x - y).abs() <= 1e-9 * x.abs().max(y.abs())
}

pub fn gen_topology(rng: &mut ChaCha8Rng) -> Topology {
    loop {
        let dims = if rng.gen_bool(0.5) { 2 } else { 3 };
        let extents: Vec<usize> = (0..dims).map(|_| rng.gen_range(1..=4)).collect();
        let count: usize = extents.iter().product();
        if (2..=36).contains(&count) {
            return Topology::new(&extents).expect("valid extents");
        }
    }
}
