//! Deterministic synthetic corpus generator.
//!
//! Produces English-like sentences from a small template grammar, one per
//! line, lowercase ASCII plus space and period. The character vocabulary
//! stays under 30 symbols and the text carries plenty of local structure,
//! which is exactly what a char-level model needs to show a clear learning
//! curve in a few thousand steps. Used for tests, benchmarks and the bundled
//! sample corpus.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DETERMINERS: &[&str] = &["the", "a", "one", "every", "that"];
const ADJECTIVES: &[&str] = &[
    "quick", "lazy", "small", "bright", "old", "young", "quiet", "patient", "heavy", "pale",
];
const NOUNS: &[&str] = &[
    "fox", "dog", "bird", "river", "stone", "tree", "cloud", "fish", "path", "window", "garden",
    "winter", "morning", "letter",
];
const VERBS: &[&str] = &[
    "jumps over",
    "runs past",
    "rests beside",
    "flies above",
    "swims under",
    "waits near",
    "watches",
    "follows",
    "circles",
    "remembers",
];
const TAILS: &[&str] = &[
    "in the cold",
    "after the rain",
    "before dawn",
    "without a sound",
    "again and again",
    "all day long",
];

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let mut s = format!(
        "{} {} {} {} {} {}",
        pick(rng, DETERMINERS),
        pick(rng, ADJECTIVES),
        pick(rng, NOUNS),
        pick(rng, VERBS),
        pick(rng, DETERMINERS),
        pick(rng, NOUNS),
    );
    if rng.gen_bool(0.4) {
        s.push(' ');
        s.push_str(pick(rng, TAILS));
    }
    if rng.gen_bool(0.3) {
        s.push_str(" and ");
        s.push_str(pick(rng, VERBS));
        s.push(' ');
        s.push_str(pick(rng, DETERMINERS));
        s.push(' ');
        s.push_str(pick(rng, NOUNS));
    }
    s.push('.');
    s
}

/// Generates at least `target_bytes` of corpus text, deterministically from
/// the seed.
pub fn synthetic_corpus(seed: u64, target_bytes: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::with_capacity(target_bytes + 80);
    while out.len() < target_bytes {
        out.push_str(&sentence(&mut rng));
        out.push('\n');
    }
    out
}
