//! Synthetic corpora with planted, recoverable signal.
//!
//! Each record's stage is drawn first from [`LABEL_DISTRIBUTION`]; a noisy
//! latent progression `s = value(stage) + N(0, 0.1)` then drives two planted
//! signals:
//!
//! * **Marker tokens** ([`MARKER_TOKENS`]): each occurs `Poisson(0.5 + 10·s⁺)`
//!   times in the body, so their average frequency rises with the stage.
//! * **"No party" pattern**: with probability `0.75 − 0.65·s` (clamped to
//!   `[0.05, 0.95]`) the policy has no rapporteur in a party group (either no
//!   rapporteur at all, or rapporteurs with `party = None`). After encoding this
//!   is the `no_party` column, anti-correlated with the stage; the
//!   `seat_share` column carries the complementary signal.
//!
//! All other content is noise: filler words drawn from a Zipf-like
//! distribution over a pseudo-word vocabulary of `vocab_size` entries, a few
//! domain words ([`NOISE_DOMAIN_TOKENS`]) at stage-independent rates, stop
//! words, digits and punctuation, plus random dates, countries, spotlight tags
//! and procedure codes.

use rand::seq::IndexedRandom;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::{Corpus, PolicyRecord, Rapporteur, StageLabel};

/// Tokens whose frequency increases with the stage.
pub const MARKER_TOKENS: [&str; 3] = ["agreement", "trilogue", "ratification"];

/// Encoded metadata columns carrying planted signal.
pub const PLANTED_METADATA_FEATURES: [&str; 2] = ["no_party", "seat_share"];

/// Domain words present at stage-independent rates.
pub const NOISE_DOMAIN_TOKENS: [&str; 4] = ["commission", "europa", "environment", "regulation"];

/// Stage sampling weights (sum to 1).
pub const LABEL_DISTRIBUTION: [(StageLabel, f64); 6] = [
    (StageLabel::Withdrawn, 0.02),
    (StageLabel::Blocked, 0.03),
    (StageLabel::Announced, 0.15),
    (StageLabel::Tabled, 0.25),
    (StageLabel::CloseToAdoption, 0.15),
    (StageLabel::AdoptedCompleted, 0.40),
];

pub const MIN_RECORDS: usize = 20;
pub const MIN_VOCAB: usize = 50;

const SYLLABLES: [&str; 20] = [
    "bra", "dek", "fil", "gor", "hun", "jad", "kel", "lom", "mir", "nov", "pel", "quo", "rin", "tol", "tav", "ulk",
    "vek", "wor", "yel", "zin",
];

const COUNTRIES: [&str; 12] = [
    "France",
    "Germany",
    "Italy",
    "Spain",
    "Poland",
    "Netherlands",
    "Finland",
    "Czechia",
    "Sweden",
    "Belgium",
    "Austria",
    "Portugal",
];

const PARTIES: [(&str, f64); 7] = [
    ("EPP", 0.27),
    ("S&D", 0.21),
    ("Renew", 0.14),
    ("Greens/EFA", 0.10),
    ("ECR", 0.09),
    ("ID", 0.11),
    ("The Left", 0.06),
];

const SPOTLIGHTS: [&str; 3] = ["JD21", "JD22", "JD23"];
const PROCEDURES: [&str; 4] = ["COD", "CNS", "NLE", "APP"];
const STOPWORD_SPRINKLE: [&str; 8] = ["the", "of", "and", "to", "in", "for", "on", "with"];
const NUMERIC_NOISE: [&str; 4] = ["2030", "CO2", "EU's", "55%"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SynthError {
    #[error("n = {0} is below the minimum of {MIN_RECORDS}")]
    TooFewRecords(usize),
    #[error("vocab_size = {0} is below the minimum of {MIN_VOCAB}")]
    VocabTooSmall(usize),
}

/// Alphabetic pseudo-word for filler index `i` (at least two syllables).
pub fn filler_word(i: usize) -> String {
    let base = SYLLABLES.len();
    let mut digits = vec![i % base, (i / base) % base];
    let mut rest = i / (base * base);
    while rest > 0 {
        digits.push(rest % base);
        rest /= base;
    }
    digits.iter().rev().map(|&d| SYLLABLES[d]).collect()
}

fn draw_stage(rng: &mut ChaCha8Rng) -> StageLabel {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (stage, p) in LABEL_DISTRIBUTION {
        acc += p;
        if u < acc {
            return stage;
        }
    }
    StageLabel::AdoptedCompleted
}

fn sentence_case(words: &[String]) -> String {
    let mut out = String::new();
    for (k, chunk) in words.chunks(12).enumerate() {
        if k > 0 {
            out.push(' ');
        }
        let mut sentence = chunk.join(" ");
        if let Some(first) = sentence.get(0..1) {
            let upper = first.to_ascii_uppercase();
            sentence.replace_range(0..1, &upper);
        }
        out.push_str(&sentence);
        out.push('.');
    }
    out
}

/// Generate a reproducible corpus of `n` policies.
///
/// For `n >= 20` the first six records cover every stage once (positions are
/// shuffled), so every label is present.
pub fn generate_synthetic(seed: u64, n: usize, vocab_size: usize) -> Result<Corpus, SynthError> {
    if n < MIN_RECORDS {
        return Err(SynthError::TooFewRecords(n));
    }
    if vocab_size < MIN_VOCAB {
        return Err(SynthError::VocabTooSmall(vocab_size));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latent_noise = Normal::new(0.0, 0.1).expect("valid sd");

    let mut stages: Vec<StageLabel> = StageLabel::ALL.to_vec();
    while stages.len() < n {
        stages.push(draw_stage(&mut rng));
    }
    stages.shuffle(&mut rng);

    let vocab: Vec<String> = (0..vocab_size).map(filler_word).collect();
    let mut records = Vec::with_capacity(n);
    for (i, stage) in stages.into_iter().enumerate() {
        let s = stage.value() + latent_noise.sample(&mut rng);
        let s_pos = s.clamp(0.0, 1.2);

        let length = rng.random_range(60..140);
        let mut words: Vec<String> = (0..length)
            .map(|_| {
                let u: f64 = rng.random();
                vocab[((u * u) * vocab_size as f64) as usize % vocab_size].clone()
            })
            .collect();
        for marker in MARKER_TOKENS {
            let rate = 0.5 + 10.0 * s_pos;
            let count = Poisson::new(rate).expect("positive rate").sample(&mut rng) as usize;
            words.extend(std::iter::repeat_n(marker.to_string(), count));
        }
        for domain in NOISE_DOMAIN_TOKENS {
            let count = rng.random_range(0..4);
            words.extend(std::iter::repeat_n(domain.to_string(), count));
        }
        for _ in 0..rng.random_range(5..15) {
            words.push(STOPWORD_SPRINKLE.choose(&mut rng).unwrap().to_string());
        }
        for _ in 0..rng.random_range(0..4) {
            words.push(NUMERIC_NOISE.choose(&mut rng).unwrap().to_string());
        }
        words.shuffle(&mut rng);
        let body = sentence_case(&words);

        let p_no_party = (0.75 - 0.65 * s).clamp(0.05, 0.95);
        let no_party = rng.random_bool(p_no_party);
        let rapporteurs = if no_party && rng.random_bool(0.5) {
            Vec::new()
        } else {
            let count = rng.random_range(1..=2);
            (0..count)
                .map(|k| Rapporteur {
                    name: format!("Rapporteur {i}-{k}"),
                    country: COUNTRIES.choose(&mut rng).unwrap().to_string(),
                    party: if no_party {
                        None
                    } else {
                        PARTIES.choose_weighted(&mut rng, |p| p.1).ok().map(|p| p.0.to_string())
                    },
                })
                .collect()
        };

        let year = rng.random_range(2019..=2023);
        let spotlight = rng
            .random_bool(0.3)
            .then(|| SPOTLIGHTS.choose(&mut rng).unwrap().to_string());
        let procedure_type = rng
            .random_bool(0.85)
            .then(|| PROCEDURES.choose(&mut rng).unwrap().to_string());
        let procedure_year = procedure_type.as_ref().map(|_| year - rng.random_range(0..=2));
        records.push(PolicyRecord {
            id: format!("syn-{i:04}"),
            title: format!("Synthetic policy {i}"),
            body,
            stage,
            month: rng.random_range(1..=12),
            year,
            rapporteurs,
            spotlight,
            procedure_type,
            procedure_year,
            legislative: rng.random_bool(0.7),
            sidecar_scores: Default::default(),
        });
    }
    Ok(Corpus::new(records).expect("synthetic records are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn deterministic_bytes() {
        let a = generate_synthetic(7, 100, 200).unwrap().to_jsonl();
        let b = generate_synthetic(7, 100, 200).unwrap().to_jsonl();
        assert_eq!(a, b);
        assert_ne!(a, generate_synthetic(8, 100, 200).unwrap().to_jsonl());
    }

    #[test]
    fn minimum_corpus_has_all_labels() {
        let corpus = generate_synthetic(1, 20, 50).unwrap();
        assert_eq!(corpus.len(), 20);
        assert!(corpus.label_histogram().values().all(|&c| c >= 1));
    }

    #[test]
    fn rejects_small_parameters() {
        assert_eq!(
            generate_synthetic(1, 19, 100).unwrap_err(),
            SynthError::TooFewRecords(19)
        );
        assert_eq!(
            generate_synthetic(1, 50, 49).unwrap_err(),
            SynthError::VocabTooSmall(49)
        );
    }

    #[test]
    fn filler_words_are_distinct_and_alphabetic() {
        let words: Vec<String> = (0..1000).map(filler_word).collect();
        let unique: std::collections::HashSet<&String> = words.iter().collect();
        assert_eq!(unique.len(), words.len());
        assert!(words.iter().all(|w| w.bytes().all(|b| b.is_ascii_lowercase())));
        assert!(words.iter().all(|w| !w.ends_with('s')));
    }

    /// Independent count: lowercase the raw body, split on anything that is not
    /// a letter, and count exact marker matches.
    #[test]
    fn marker_frequency_rises_with_stage() {
        let corpus = generate_synthetic(7, 300, 200).unwrap();
        let mut per_value: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
        for r in corpus.records() {
            let lower = r.body.to_lowercase();
            let hits = lower
                .split(|c: char| !c.is_ascii_alphabetic())
                .filter(|w| MARKER_TOKENS.contains(w))
                .count();
            let e = per_value.entry((r.target() * 100.0) as u32).or_default();
            e.0 += hits as f64;
            e.1 += 1;
        }
        let means: Vec<f64> = per_value.values().map(|(s, c)| s / *c as f64).collect();
        assert_eq!(means.len(), 5);
        assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
    }
}
