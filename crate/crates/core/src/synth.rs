//! Synthetic labeled feedback with controllable class overlap, for tests and
//! desk-scale experiments when the real corpus is unavailable.
//!
//! Every document carries at least one topic word and one sentiment word.
//! With probability `separability` such a word comes from the document's own
//! class lexicon, otherwise from a uniformly chosen class (possibly its own).
//! Label counts are fixed by largest-remainder quotas, so the marginals match
//! the configured mix as closely as the corpus size allows.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    Annotations, Corpus, FeedbackRecord, Head, Label, SentimentLabel, TokenAnnotation, TopicLabel,
};
use crate::error::{Error, Result};

const TOPIC_WORDS: [&[&str]; 4] = [
    &["giảng_viên", "thầy", "cô", "giáo_viên", "cách_dạy", "trợ_giảng", "lời_giảng", "phương_pháp_giảng"],
    &["môn_học", "chương_trình", "giáo_trình", "tín_chỉ", "đề_cương", "học_phần", "bài_tập", "đồ_án"],
    &["phòng_học", "máy_chiếu", "máy_lạnh", "thư_viện", "ký_túc_xá", "bàn_ghế", "wifi", "phòng_máy"],
    &["học_phí", "lịch_thi", "thủ_tục", "câu_lạc_bộ", "xe_buýt", "căn_tin", "đoàn_hội", "giấy_tờ"],
];

const SENTIMENT_WORDS: [&[&str]; 3] = [
    &["tốt", "hay", "nhiệt_tình", "dễ_hiểu", "tận_tâm", "thú_vị", "hữu_ích", "hài_lòng"],
    &["tệ", "chán", "khó_hiểu", "kém", "quá_tải", "hỏng", "thiếu_sót", "ồn_ào"],
    &["bình_thường", "tạm", "tương_đối", "trung_bình", "vừa_phải", "không_rõ", "chưa_biết", "như_cũ"],
];

const FILLER_WORDS: [&str; 20] = [
    "rất", "và", "của", "em", "chúng_em", "thì", "là", "có", "được", "nhưng", "cũng", "này", "học",
    "lớp", "trường", "hơi", "khá", "nên", "cần", "mong",
];

/// Token-length ranges for the four length buckets.
const LENGTH_RANGES: [(usize, usize); 4] = [(2, 10), (11, 20), (21, 30), (31, 40)];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub size: usize,
    /// 1.0 keeps class words in their own class; 0.0 draws them uniformly.
    pub separability: f64,
    pub seed: u64,
    /// Positive, negative, neutral shares (normalized).
    pub sentiment_mix: [f64; 3],
    /// Lecturers, curriculums, facilities, others shares (normalized).
    pub topic_mix: [f64; 4],
    /// Shares of the 1-10, 11-20, 21-30 and >30 token buckets.
    pub length_mix: [f64; 4],
    /// Semester tags, assigned in equal quotas. Empty leaves records untagged.
    pub semesters: Vec<String>,
    /// Share of non-filler words among the optional positions.
    pub signal_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            size: 1000,
            separability: 1.0,
            seed: 42,
            sentiment_mix: [49.8, 45.8, 4.3],
            topic_mix: [71.7, 18.8, 4.4, 5.0],
            length_mix: [44.8, 37.7, 6.1, 11.7],
            semesters: vec!["2015-1".into(), "2015-2".into()],
            signal_rate: 0.3,
        }
    }
}

/// Splits `total` into integer counts proportional to `weights`, handing
/// leftover units to the largest fractional parts (ties → lower index).
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}

fn shuffled_quota<R: Rng>(rng: &mut R, total: usize, weights: &[f64]) -> Vec<usize> {
    let mut out: Vec<usize> = largest_remainder(total, weights)
        .into_iter()
        .enumerate()
        .flat_map(|(class, n)| std::iter::repeat_n(class, n))
        .collect();
    out.shuffle(rng);
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Topic,
    Sentiment,
    Filler,
}

fn pick_class<R: Rng>(rng: &mut R, own: usize, classes: usize, separability: f64) -> usize {
    if rng.random::<f64>() < separability {
        own
    } else {
        rng.random_range(0..classes)
    }
}

fn annotate(words: &[(String, Role)]) -> Vec<TokenAnnotation> {
    // The first sentiment word is the predicate; everything else attaches to it.
    let root = words.iter().position(|(_, r)| *r == Role::Sentiment).unwrap_or(0);
    words
        .iter()
        .enumerate()
        .map(|(i, (w, role))| {
            let (pos, deprel) = match role {
                Role::Topic => ("N", "nsubj"),
                Role::Sentiment => ("A", "amod"),
                Role::Filler => ("R", "advmod"),
            };
            TokenAnnotation {
                token: w.clone(),
                pos: pos.to_string(),
                head: if i == root { Head::Root } else { Head::Token(root) },
                deprel: if i == root { "root".to_string() } else { deprel.to_string() },
            }
        })
        .collect()
}

/// Generates a labeled, annotated corpus. Record ids are the zero-padded
/// 1-based line numbers the records get in a headerless TSV file.
pub fn generate(config: &SynthConfig) -> Result<Corpus> {
    if config.size < 10 {
        return Err(Error::invalid(format!("synthetic corpus size must be at least 10, got {}", config.size)));
    }
    if !(0.0..=1.0).contains(&config.separability) || !(0.0..=1.0).contains(&config.signal_rate) {
        return Err(Error::invalid("separability and signal rate must lie in [0, 1]"));
    }
    let mixes = config
        .sentiment_mix
        .iter()
        .chain(&config.topic_mix)
        .chain(&config.length_mix);
    if mixes.clone().any(|w| !(*w >= 0.0)) || config.sentiment_mix.iter().sum::<f64>() <= 0.0 {
        return Err(Error::invalid("label and length mixes must be non-negative with a positive total"));
    }
    if config.topic_mix.iter().sum::<f64>() <= 0.0 || config.length_mix.iter().sum::<f64>() <= 0.0 {
        return Err(Error::invalid("label and length mixes must be non-negative with a positive total"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.size;
    let sentiments = shuffled_quota(&mut rng, n, &config.sentiment_mix);
    let topics = shuffled_quota(&mut rng, n, &config.topic_mix);
    let buckets = shuffled_quota(&mut rng, n, &config.length_mix);
    let semesters: Vec<Option<String>> = if config.semesters.is_empty() {
        vec![None; n]
    } else {
        let equal = vec![1.0; config.semesters.len()];
        shuffled_quota(&mut rng, n, &equal)
            .into_iter()
            .map(|i| Some(config.semesters[i].clone()))
            .collect()
    };

    let mut records = Vec::with_capacity(n);
    let mut annotations = Annotations::new();
    for i in 0..n {
        let (sent, topic) = (sentiments[i], topics[i]);
        let (lo, hi) = LENGTH_RANGES[buckets[i]];
        let len = rng.random_range(lo..=hi);
        let mut roles = vec![Role::Topic, Role::Sentiment];
        for _ in 2..len {
            let u = rng.random::<f64>();
            roles.push(if u < config.signal_rate / 2.0 {
                Role::Topic
            } else if u < config.signal_rate {
                Role::Sentiment
            } else {
                Role::Filler
            });
        }
        roles.shuffle(&mut rng);
        let words: Vec<(String, Role)> = roles
            .into_iter()
            .map(|role| {
                let lexicon: &[&str] = match role {
                    Role::Topic => TOPIC_WORDS[pick_class(&mut rng, topic, 4, config.separability)],
                    Role::Sentiment => SENTIMENT_WORDS[pick_class(&mut rng, sent, 3, config.separability)],
                    Role::Filler => &FILLER_WORDS,
                };
                let word = lexicon[rng.random_range(0..lexicon.len())];
                (word.to_string(), role)
            })
            .collect();
        let id = format!("{:06}", i + 1);
        let text = words.iter().map(|(w, _)| w.as_str()).collect::<Vec<_>>().join(" ");
        annotations.insert(id.clone(), annotate(&words));
        records.push(FeedbackRecord {
            id,
            text,
            semester: semesters[i].clone(),
            sentiment: Some(SentimentLabel::from_code(sent).expect("class in range")),
            topic: Some(TopicLabel::from_code(topic).expect("class in range")),
        });
    }
    Corpus::new(records)?.with_annotations(annotations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{format_annotations, format_corpus, parse_annotations, parse_corpus, Task};
    use crate::preprocess::{preprocess_text, StopwordList};

    #[test]
    fn quotas_follow_largest_remainder() {
        assert_eq!(largest_remainder(20, &[49.8, 45.8, 4.3]), vec![10, 9, 1]);
        assert_eq!(largest_remainder(20, &[71.7, 18.8, 4.4, 5.0]), vec![14, 4, 1, 1]);
        assert_eq!(largest_remainder(7, &[1.0, 1.0]), vec![4, 3]);
        assert_eq!(largest_remainder(0, &[1.0, 2.0]), vec![0, 0]);
    }

    #[test]
    fn marginals_match_configuration() {
        let corpus = generate(&SynthConfig::default()).unwrap();
        let share = |task: Task, class: usize| {
            corpus.records().iter().filter(|r| task.label_of(r) == Some(class)).count() as f64 / 10.0
        };
        let sum = 99.9;
        for (c, want) in [49.8, 45.8, 4.3].into_iter().enumerate() {
            assert!((share(Task::Sentiment, c) - want * 100.0 / sum).abs() < 0.1);
        }
        for (c, want) in [71.7, 18.8, 4.4, 5.0].into_iter().enumerate() {
            assert!((share(Task::Topic, c) - want).abs() < 0.1);
        }
    }

    #[test]
    fn documents_survive_preprocessing_with_both_signals() {
        let corpus = generate(&SynthConfig { size: 200, ..Default::default() }).unwrap();
        let none = StopwordList::default();
        for r in corpus.records() {
            let tokens = preprocess_text(&r.text, &none);
            assert_eq!(tokens.len(), r.text.split(' ').count());
            let topic = Task::Topic.label_of(r).unwrap();
            let sent = Task::Sentiment.label_of(r).unwrap();
            assert!(tokens.iter().any(|t| TOPIC_WORDS[topic].contains(&t.as_str())));
            assert!(tokens.iter().any(|t| SENTIMENT_WORDS[sent].contains(&t.as_str())));
            assert_eq!(corpus.annotation(&r.id).unwrap().len(), tokens.len());
        }
    }

    #[test]
    fn lexicons_are_disjoint() {
        let mut all: Vec<&str> = TOPIC_WORDS.iter().chain(&SENTIMENT_WORDS).flat_map(|l| l.iter().copied()).collect();
        all.extend(FILLER_WORDS);
        let n = all.len();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), n);
    }

    #[test]
    fn deterministic_and_round_trips_through_files() {
        let cfg = SynthConfig { size: 50, separability: 0.5, ..Default::default() };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        let tsv = format_corpus(a.records()).unwrap();
        assert_eq!(tsv, format_corpus(b.records()).unwrap());
        let ann = format_annotations(a.annotations().unwrap());
        assert_eq!(ann, format_annotations(b.annotations().unwrap()));
        let back = parse_corpus(&tsv).unwrap().with_annotations(parse_annotations(&ann).unwrap()).unwrap();
        assert_eq!(back, a);
        let other = generate(&SynthConfig { seed: 7, ..cfg }).unwrap();
        assert_ne!(format_corpus(other.records()).unwrap(), tsv);
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(generate(&SynthConfig { size: 9, ..Default::default() }).is_err());
        assert!(generate(&SynthConfig { separability: 1.5, ..Default::default() }).is_err());
    }
}
