//! Labeled feedback corpora: TSV loading and saving, dependency-annotation
//! sidecars, seeded train/test splitting and length-bucket label statistics.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{self, StopwordList};

/// A closed label set with stable integer codes.
pub trait Label: Copy + Eq + fmt::Debug + 'static {
    const KIND: &'static str;
    const ALL: &'static [Self];

    fn code(self) -> usize;
    fn name(self) -> &'static str;

    fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    /// Case-insensitive parse of a label name.
    fn parse_label(token: &str) -> Result<Self> {
        let lower = token.trim().to_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.name() == lower)
            .ok_or_else(|| Error::UnknownLabel {
                kind: Self::KIND,
                token: token.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Positive,
    Negative,
    Neutral,
}

impl Label for SentimentLabel {
    const KIND: &'static str = "sentiment";
    const ALL: &'static [Self] = &[Self::Positive, Self::Negative, Self::Neutral];

    fn code(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        match self {
            Self::Positive => "positive",
            Self::Negative => "negative",
            Self::Neutral => "neutral",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopicLabel {
    Lecturers,
    Curriculums,
    Facilities,
    Others,
}

impl Label for TopicLabel {
    const KIND: &'static str = "topic";
    const ALL: &'static [Self] = &[
        Self::Lecturers,
        Self::Curriculums,
        Self::Facilities,
        Self::Others,
    ];

    fn code(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        match self {
            Self::Lecturers => "lecturers",
            Self::Curriculums => "curriculums",
            Self::Facilities => "facilities",
            Self::Others => "others",
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for TopicLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which label axis a classifier or statistic works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Sentiment,
    Topic,
}

impl Task {
    pub fn num_classes(self) -> usize {
        match self {
            Task::Sentiment => SentimentLabel::ALL.len(),
            Task::Topic => TopicLabel::ALL.len(),
        }
    }

    pub fn class_names(self) -> Vec<&'static str> {
        match self {
            Task::Sentiment => SentimentLabel::ALL.iter().map(|l| l.name()).collect(),
            Task::Topic => TopicLabel::ALL.iter().map(|l| l.name()).collect(),
        }
    }

    /// Gold class id of `record` on this axis, if labeled.
    pub fn label_of(self, record: &FeedbackRecord) -> Option<usize> {
        match self {
            Task::Sentiment => record.sentiment.map(Label::code),
            Task::Topic => record.topic.map(Label::code),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Sentiment => "sentiment",
            Task::Topic => "topic",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "sentiment" => Ok(Task::Sentiment),
            "topic" => Ok(Task::Topic),
            other => Err(Error::invalid(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub id: String,
    pub text: String,
    pub semester: Option<String>,
    pub sentiment: Option<SentimentLabel>,
    pub topic: Option<TopicLabel>,
}

impl FeedbackRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            semester: None,
            sentiment: None,
            topic: None,
        }
    }
}

/// Syntactic head of an annotated token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    Root,
    /// 0-based index into the same sentence.
    Token(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenAnnotation {
    pub token: String,
    pub pos: String,
    pub head: Head,
    pub deprel: String,
}

/// Per-record token annotations, keyed by record id, in file order.
pub type Annotations = IndexMap<String, Vec<TokenAnnotation>>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: Vec<FeedbackRecord>,
    annotations: Option<Annotations>,
}

impl Corpus {
    /// Validates id uniqueness and non-empty text.
    pub fn new(records: Vec<FeedbackRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if r.text.trim().is_empty() {
                return Err(Error::invalid(format!("record `{}` has empty text", r.id)));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::invalid(format!("duplicate record id `{}`", r.id)));
            }
        }
        Ok(Self {
            records,
            annotations: None,
        })
    }

    /// Attaches annotations; every key must name a record of this corpus.
    pub fn with_annotations(mut self, annotations: Annotations) -> Result<Self> {
        let ids: HashSet<&str> = self.records.iter().map(|r| r.id.as_str()).collect();
        let unknown: Vec<&str> = annotations
            .keys()
            .map(String::as_str)
            .filter(|k| !ids.contains(k))
            .collect();
        if !unknown.is_empty() {
            return Err(Error::invalid(format!(
                "annotations for unknown record ids: {}",
                unknown.join(", ")
            )));
        }
        self.annotations = Some(annotations);
        Ok(self)
    }

    pub fn records(&self) -> &[FeedbackRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn annotations(&self) -> Option<&Annotations> {
        self.annotations.as_ref()
    }

    pub fn annotation(&self, id: &str) -> Option<&[TokenAnnotation]> {
        self.annotations.as_ref()?.get(id).map(Vec::as_slice)
    }

    /// Subset by record position, carrying matching annotations along.
    fn subset(&self, indices: &[usize]) -> Corpus {
        let records: Vec<FeedbackRecord> =
            indices.iter().map(|&i| self.records[i].clone()).collect();
        let annotations = self.annotations.as_ref().map(|ann| {
            records
                .iter()
                .filter_map(|r| ann.get(&r.id).map(|a| (r.id.clone(), a.clone())))
                .collect()
        });
        Corpus {
            records,
            annotations,
        }
    }

    /// Keeps only records labeled on `task`.
    pub fn labeled_for(&self, task: Task) -> Corpus {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| task.label_of(&self.records[i]).is_some())
            .collect();
        self.subset(&idx)
    }
}

fn record_id(line_no: usize) -> String {
    format!("{line_no:06}")
}

fn optional_field(field: Option<&str>) -> Option<&str> {
    field.map(str::trim).filter(|f| !f.is_empty())
}

/// Parses corpus TSV text. Record ids are the zero-padded 1-based line numbers.
pub fn parse_corpus(content: &str) -> Result<Corpus> {
    let mut records = Vec::new();
    let mut first = true;
    for (i, raw) in content.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if std::mem::take(&mut first) && fields[0] == "text" {
            continue;
        }
        if fields.len() > 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 1 to 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let text = fields[0];
        if text.trim().is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty feedback text".into(),
            });
        }
        let label_err = |e: Error| match e {
            Error::UnknownLabel { kind, token } => Error::Parse {
                line: line_no,
                message: format!("unknown {kind} label `{token}`"),
            },
            other => other,
        };
        let sentiment = optional_field(fields.get(1).copied())
            .map(SentimentLabel::parse_label)
            .transpose()
            .map_err(label_err)?;
        let topic = optional_field(fields.get(2).copied())
            .map(TopicLabel::parse_label)
            .transpose()
            .map_err(label_err)?;
        let semester = optional_field(fields.get(3).copied()).map(str::to_string);
        records.push(FeedbackRecord {
            id: record_id(line_no),
            text: text.to_string(),
            semester,
            sentiment,
            topic,
        });
    }
    Corpus::new(records)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&content)
}

/// Serializes records as headerless TSV, so reloading assigns ids 1..=N.
pub fn format_corpus(records: &[FeedbackRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        if r.text.contains(['\t', '\n', '\r']) {
            return Err(Error::invalid(format!(
                "record `{}` text contains a tab or line break",
                r.id
            )));
        }
        let sentiment = r.sentiment.map(Label::name).unwrap_or("");
        let topic = r.topic.map(Label::name).unwrap_or("");
        let semester = r.semester.as_deref().unwrap_or("");
        out.push_str(&format!("{}\t{sentiment}\t{topic}\t{semester}\n", r.text));
    }
    Ok(out)
}

pub fn save_corpus(path: impl AsRef<Path>, records: &[FeedbackRecord]) -> Result<()> {
    let path = path.as_ref();
    let text = format_corpus(records)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses a CoNLL-like annotation file (see [`format_annotations`]).
pub fn parse_annotations(content: &str) -> Result<Annotations> {
    struct Pending {
        id: Option<String>,
        start_line: usize,
        rows: Vec<(usize, String, String, usize, String)>,
    }

    fn finish(block: Pending, out: &mut Annotations) -> Result<()> {
        let id = block.id.ok_or_else(|| Error::Parse {
            line: block.start_line,
            message: "annotation block without `# id = ...` line".into(),
        })?;
        let len = block.rows.len();
        let mut tokens = Vec::with_capacity(len);
        for (line, form, pos, head, deprel) in block.rows {
            let head = match head {
                0 => Head::Root,
                h if h <= len => Head::Token(h - 1),
                h => {
                    return Err(Error::Parse {
                        line,
                        message: format!("head {h} out of range for {len}-token sentence"),
                    })
                }
            };
            tokens.push(TokenAnnotation {
                token: form,
                pos,
                head,
                deprel,
            });
        }
        if out.insert(id.clone(), tokens).is_some() {
            return Err(Error::Parse {
                line: block.start_line,
                message: format!("duplicate annotation block for id `{id}`"),
            });
        }
        Ok(())
    }

    let mut out = Annotations::new();
    let mut block: Option<Pending> = None;
    for (i, raw) in content.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            if let Some(b) = block.take() {
                finish(b, &mut out)?;
            }
            continue;
        }
        let b = block.get_or_insert_with(|| Pending {
            id: None,
            start_line: line_no,
            rows: Vec::new(),
        });
        if let Some(comment) = line.strip_prefix('#') {
            if b.id.is_none() && b.rows.is_empty() {
                if let Some(value) = comment.trim().strip_prefix("id") {
                    if let Some(id) = value.trim_start().strip_prefix('=') {
                        b.id = Some(id.trim().to_string());
                    }
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 5 annotation columns, found {}", cols.len()),
            });
        }
        let number = |s: &str, what: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid {what} `{s}`"),
            })
        };
        let index = number(cols[0], "token index")?;
        if index != b.rows.len() + 1 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("token index {index} out of sequence"),
            });
        }
        let head = number(cols[3], "head index")?;
        b.rows.push((
            line_no,
            cols[1].to_string(),
            cols[2].to_string(),
            head,
            cols[4].to_string(),
        ));
    }
    if let Some(b) = block.take() {
        finish(b, &mut out)?;
    }
    Ok(out)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Annotations> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&content)
}

/// Blank-line-separated blocks: `# id = <id>`, then
/// `index<TAB>form<TAB>pos<TAB>head<TAB>deprel` with 1-based indices and head 0 for ROOT.
pub fn format_annotations(annotations: &Annotations) -> String {
    let mut out = String::new();
    for (id, tokens) in annotations {
        out.push_str(&format!("# id = {id}\n"));
        for (i, t) in tokens.iter().enumerate() {
            let head = match t.head {
                Head::Root => 0,
                Head::Token(h) => h + 1,
            };
            out.push_str(&format!(
                "{}\t{}\t{}\t{head}\t{}\n",
                i + 1,
                t.token,
                t.pos,
                t.deprel
            ));
        }
        out.push('\n');
    }
    out
}

pub fn save_annotations(path: impl AsRef<Path>, annotations: &Annotations) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(format_annotations(annotations).as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Seeded shuffle, then the first `floor(ratio * N)` records become the training set.
pub fn split_train_test(corpus: &Corpus, ratio: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio {ratio} not in (0, 1)")));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let cut = (ratio * corpus.len() as f64).floor() as usize;
    Ok((corpus.subset(&order[..cut]), corpus.subset(&order[cut..])))
}

/// Sentence-length buckets in tokens: [1,10], [11,20], [21,30], [31,∞).
pub const LENGTH_BUCKETS: [&str; 4] = ["1-10", "11-20", "21-30", ">30"];

/// Bucket index for a token count; empty documents land in the first bucket.
pub fn length_bucket(tokens: usize) -> usize {
    match tokens {
        0..=10 => 0,
        11..=20 => 1,
        21..=30 => 2,
        _ => 3,
    }
}

/// Percentage of the corpus in each (length bucket, label) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBucketStats {
    pub task: Task,
    pub labels: Vec<String>,
    pub buckets: Vec<String>,
    /// `cells[bucket][label]`, percent of all records.
    pub cells: Vec<Vec<f64>>,
    pub bucket_totals: Vec<f64>,
    pub label_totals: Vec<f64>,
    pub total: f64,
    pub records: usize,
}

impl LengthBucketStats {
    /// Plain-text table with one decimal, rows = buckets, last row = overall.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<8}", "");
        for l in &self.labels {
            out.push_str(&format!(" {l:>12}"));
        }
        out.push_str(&format!(" {:>12}\n", "overall"));
        for (b, name) in self.buckets.iter().enumerate() {
            out.push_str(&format!("{name:<8}"));
            for v in &self.cells[b] {
                out.push_str(&format!(" {v:>12.1}"));
            }
            out.push_str(&format!(" {:>12.1}\n", self.bucket_totals[b]));
        }
        out.push_str(&format!("{:<8}", "overall"));
        for v in &self.label_totals {
            out.push_str(&format!(" {v:>12.1}"));
        }
        out.push_str(&format!(" {:>12.1}\n", self.total));
        out
    }
}

/// Length is the token count after preprocessing with `stopwords`.
pub fn length_bucket_stats(
    corpus: &Corpus,
    task: Task,
    stopwords: &StopwordList,
) -> Result<LengthBucketStats> {
    let unlabeled: Vec<&str> = corpus
        .records()
        .iter()
        .filter(|r| task.label_of(r).is_none())
        .map(|r| r.id.as_str())
        .collect();
    if !unlabeled.is_empty() {
        return Err(Error::invalid(format!(
            "records without a {task} label: {}",
            unlabeled.join(", ")
        )));
    }
    if corpus.is_empty() {
        return Err(Error::invalid("cannot compute statistics of an empty corpus"));
    }
    let k = task.num_classes();
    let mut counts = vec![vec![0usize; k]; LENGTH_BUCKETS.len()];
    for r in corpus.records() {
        let len = preprocess::preprocess_text(&r.text, stopwords).len();
        let label = task.label_of(r).expect("checked above");
        counts[length_bucket(len)][label] += 1;
    }
    let n = corpus.len() as f64;
    let pct = |c: usize| 100.0 * c as f64 / n;
    let cells: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| row.iter().map(|&c| pct(c)).collect())
        .collect();
    let bucket_totals = counts.iter().map(|row| pct(row.iter().sum())).collect();
    let label_totals = (0..k)
        .map(|l| pct(counts.iter().map(|row| row[l]).sum()))
        .collect();
    Ok(LengthBucketStats {
        task,
        labels: task.class_names().into_iter().map(String::from).collect(),
        buckets: LENGTH_BUCKETS.iter().map(|s| s.to_string()).collect(),
        cells,
        bucket_totals,
        label_totals,
        total: 100.0,
        records: corpus.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_labeled_line() {
        let c = parse_corpus("giảng viên dạy hay\tpositive\tlecturers\n").unwrap();
        let r = &c.records()[0];
        assert_eq!(r.text, "giảng viên dạy hay");
        assert_eq!(r.sentiment, Some(SentimentLabel::Positive));
        assert_eq!(r.topic, Some(TopicLabel::Lecturers));
        assert_eq!(r.semester, None);
        assert_eq!(r.id, "000001");
    }

    #[test]
    fn labels_are_case_insensitive() {
        let c = parse_corpus("hay\tPOSITIVE\n").unwrap();
        assert_eq!(c.records()[0].sentiment, Some(SentimentLabel::Positive));
    }

    #[test]
    fn header_is_skipped_and_ids_follow_lines() {
        let c = parse_corpus("text\tsentiment\ttopic\tsemester\n\na\tnegative\t\t2015-1\nb\n")
            .unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.records()[0].id, "000003");
        assert_eq!(c.records()[0].semester.as_deref(), Some("2015-1"));
        assert_eq!(c.records()[0].topic, None);
        assert_eq!(c.records()[1].id, "000004");
    }

    #[test]
    fn unknown_label_names_token_and_line() {
        let err = parse_corpus("ok\tpositive\nbad\tgreat\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("great"), "{msg}");
    }

    #[test]
    fn too_many_fields_is_malformed() {
        let err = parse_corpus("a\tpositive\tothers\t2015-1\textra\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn whitespace_only_text_is_rejected() {
        assert!(parse_corpus("   \tpositive\n").is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let recs = vec![FeedbackRecord::new("a", "x"), FeedbackRecord::new("a", "y")];
        assert!(Corpus::new(recs).is_err());
    }

    #[test]
    fn annotation_block_maps_root_and_heads() {
        let ann = parse_annotations("# id = 000001\n1\tmáy\tN\t2\tnsubj\n2\thỏng\tV\t0\troot\n")
            .unwrap();
        let toks = &ann["000001"];
        assert_eq!(
            toks[0],
            TokenAnnotation {
                token: "máy".into(),
                pos: "N".into(),
                head: Head::Token(1),
                deprel: "nsubj".into()
            }
        );
        assert_eq!(toks[1].head, Head::Root);
        assert_eq!(toks[1].deprel, "root");
    }

    #[test]
    fn empty_annotation_file_is_empty_map() {
        assert!(parse_annotations("").unwrap().is_empty());
        assert!(parse_annotations("\n\n").unwrap().is_empty());
    }

    #[test]
    fn head_out_of_range_is_error() {
        let text = "# id = x\n1\ta\tN\t0\troot\n2\tb\tN\t5\tdep\n3\tc\tN\t1\tdep\n";
        let err = parse_annotations(text).unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");
    }

    #[test]
    fn extra_comments_are_ignored() {
        let text = "# id = a\n# text = máy hỏng\n1 máy N 2 nsubj\n2 hỏng V 0 root\n\n# id = b\n1 tốt A 0 root\n";
        let ann = parse_annotations(text).unwrap();
        assert_eq!(ann.len(), 2);
        assert_eq!(ann["b"].len(), 1);
        assert_eq!(parse_annotations(&format_annotations(&ann)).unwrap(), ann);
    }

    #[test]
    fn annotations_for_unknown_ids_rejected_on_attach() {
        let c = parse_corpus("a\n").unwrap();
        let ann = parse_annotations("# id = zzz\n1 a N 0 root\n").unwrap();
        assert!(c.with_annotations(ann).is_err());
    }

    #[test]
    fn split_sizes_follow_floor() {
        let recs = (0..5)
            .map(|i| FeedbackRecord::new(format!("{i}"), "x"))
            .collect();
        let c = Corpus::new(recs).unwrap();
        let (tr, te) = split_train_test(&c, 0.8, 7).unwrap();
        assert_eq!((tr.len(), te.len()), (4, 1));
        assert!(split_train_test(&c, 1.0, 7).is_err());
        assert!(split_train_test(&c, 0.0, 7).is_err());
    }

    #[test]
    fn paper_scale_split() {
        let recs = (0..16000)
            .map(|i| FeedbackRecord::new(format!("{i}"), "x"))
            .collect();
        let c = Corpus::new(recs).unwrap();
        let (tr, te) = split_train_test(&c, 0.8, 42).unwrap();
        assert_eq!((tr.len(), te.len()), (12800, 3200));
    }

    #[test]
    fn split_is_deterministic() {
        let recs = (0..50)
            .map(|i| FeedbackRecord::new(format!("{i}"), "x"))
            .collect();
        let c = Corpus::new(recs).unwrap();
        let a = split_train_test(&c, 0.8, 3).unwrap();
        let b = split_train_test(&c, 0.8, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_record_stats() {
        let c = parse_corpus("a b c d e\tpositive\n").unwrap();
        let s = length_bucket_stats(&c, Task::Sentiment, &StopwordList::default()).unwrap();
        assert_eq!(s.cells[0][0], 100.0);
        assert_eq!(s.label_totals, vec![100.0, 0.0, 0.0]);
    }

    #[test]
    fn stats_require_labels() {
        let c = parse_corpus("a\tpositive\nb\n").unwrap();
        let err = length_bucket_stats(&c, Task::Sentiment, &StopwordList::default()).unwrap_err();
        assert!(err.to_string().contains("000002"));
    }

    #[test]
    fn bucket_boundaries() {
        assert_eq!(length_bucket(1), 0);
        assert_eq!(length_bucket(10), 0);
        assert_eq!(length_bucket(11), 1);
        assert_eq!(length_bucket(20), 1);
        assert_eq!(length_bucket(21), 2);
        assert_eq!(length_bucket(30), 2);
        assert_eq!(length_bucket(31), 3);
    }

    fn arb_record() -> impl Strategy<Value = (String, Option<usize>, Option<usize>, Option<String>)> {
        (
            "[a-zA-Zàảãáạđêôơư_ ,.:)0-9]{0,30}[a-z]",
            proptest::option::of(0usize..3),
            proptest::option::of(0usize..4),
            proptest::option::of("20[0-9]{2}-[12]"),
        )
    }

    proptest! {
        #[test]
        fn split_partitions(n in 1usize..60, ratio in 0.01f64..0.99, seed in any::<u64>()) {
            let recs = (0..n).map(|i| FeedbackRecord::new(format!("{i}"), "x")).collect();
            let c = Corpus::new(recs).unwrap();
            let (tr, te) = split_train_test(&c, ratio, seed).unwrap();
            prop_assert_eq!(tr.len() + te.len(), n);
            let mut ids: Vec<&str> = tr.records().iter().chain(te.records()).map(|r| r.id.as_str()).collect();
            ids.sort();
            ids.dedup();
            prop_assert_eq!(ids.len(), n);
        }

        #[test]
        fn corpus_round_trips(rows in proptest::collection::vec(arb_record(), 1..20)) {
            let records: Vec<FeedbackRecord> = rows.into_iter().enumerate().map(|(i, (text, s, t, sem))| FeedbackRecord {
                id: record_id(i + 1),
                text,
                semester: sem,
                sentiment: s.and_then(SentimentLabel::from_code),
                topic: t.and_then(TopicLabel::from_code),
            }).collect();
            let text = format_corpus(&records).unwrap();
            let back = parse_corpus(&text).unwrap();
            prop_assert_eq!(back.records(), &records[..]);
        }

        #[test]
        fn stats_total_100(lens in proptest::collection::vec((1usize..45, 0usize..3), 1..40)) {
            let records: Vec<FeedbackRecord> = lens.iter().enumerate().map(|(i, &(len, s))| {
                let mut r = FeedbackRecord::new(format!("{i}"), vec!["từ"; len].join(" "));
                r.sentiment = SentimentLabel::from_code(s);
                r
            }).collect();
            let c = Corpus::new(records).unwrap();
            let s = length_bucket_stats(&c, Task::Sentiment, &StopwordList::default()).unwrap();
            let sum: f64 = s.cells.iter().flatten().sum();
            prop_assert!((sum - 100.0).abs() <= 0.1);
            prop_assert!(s.cells.iter().flatten().all(|&v| v >= 0.0));
        }
    }
}
