//! Batch classification of a feedback file and the per-semester report built
//! from it: distributions per semester, trends across semesters, and JSON /
//! CSV / SVG output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label, SentimentLabel, Task, TopicLabel};
use crate::error::{Error, Result};
use crate::pipeline::TrainedModel;
use crate::scalar::Scalar;
use crate::synth::largest_remainder;

pub const REPORT_VERSION: u32 = 1;
pub const UNKNOWN_SEMESTER: &str = "unknown";

/// A record with both predicted labels; gold labels are kept apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub id: String,
    pub text: String,
    pub semester: Option<String>,
    pub sentiment: SentimentLabel,
    pub topic: TopicLabel,
    pub gold_sentiment: Option<SentimentLabel>,
    pub gold_topic: Option<TopicLabel>,
    /// Empty after preprocessing; both labels are fallbacks.
    pub flagged: bool,
}

/// Classifies every record with a sentiment and a topic model.
pub fn analyze_batch<F: Scalar>(
    corpus: &Corpus,
    sentiment_model: &TrainedModel<F>,
    topic_model: &TrainedModel<F>,
) -> Result<Vec<LabeledRecord>> {
    sentiment_model.expect_task(Task::Sentiment)?;
    topic_model.expect_task(Task::Topic)?;
    corpus
        .records()
        .iter()
        .map(|r| {
            let s = sentiment_model.predict_record(corpus, r)?;
            let t = topic_model.predict_record(corpus, r)?;
            Ok(LabeledRecord {
                id: r.id.clone(),
                text: r.text.clone(),
                semester: r.semester.clone(),
                sentiment: SentimentLabel::from_code(s.class).expect("model class in range"),
                topic: TopicLabel::from_code(t.class).expect("model class in range"),
                gold_sentiment: r.sentiment,
                gold_topic: r.topic,
                flagged: s.flagged || t.flagged,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub labels: Vec<String>,
    pub counts: Vec<usize>,
    /// One decimal; sums to exactly 100.0 when there are records.
    pub percentages: Vec<f64>,
}

impl Distribution {
    pub fn from_counts(labels: Vec<String>, counts: Vec<usize>) -> Self {
        let total: usize = counts.iter().sum();
        let percentages = if total == 0 {
            vec![0.0; counts.len()]
        } else {
            let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            largest_remainder(1000, &weights)
                .into_iter()
                .map(|tenths| tenths as f64 / 10.0)
                .collect()
        };
        Self {
            labels,
            counts,
            percentages,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemesterSnapshot {
    pub semester: String,
    pub records: usize,
    pub sentiment: Distribution,
    pub topic: Distribution,
    /// `joint[topic][sentiment]` counts.
    pub joint: Vec<Vec<usize>>,
}

impl SemesterSnapshot {
    pub fn distribution(&self, axis: Task) -> &Distribution {
        match axis {
            Task::Sentiment => &self.sentiment,
            Task::Topic => &self.topic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub axis: Task,
    pub semesters: Vec<String>,
    pub labels: Vec<String>,
    /// `values[label][semester]`, percent.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub sentiment_model: String,
    pub topic_model: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub version: u32,
    pub metadata: ReportMetadata,
    pub records: usize,
    pub snapshots: Vec<SemesterSnapshot>,
    pub sentiment_trend: TrendSeries,
    pub topic_trend: TrendSeries,
    /// Ids of records that were empty after preprocessing, sorted.
    pub flagged: Vec<String>,
}

impl ReportBundle {
    pub fn trend(&self, axis: Task) -> &TrendSeries {
        match axis {
            Task::Sentiment => &self.sentiment_trend,
            Task::Topic => &self.topic_trend,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

fn names(axis: Task) -> Vec<String> {
    axis.class_names().into_iter().map(String::from).collect()
}

/// Groups by semester (missing tag → `"unknown"`), semesters in lexicographic order.
pub fn build_report(records: &[LabeledRecord], metadata: ReportMetadata) -> ReportBundle {
    let ns = SentimentLabel::ALL.len();
    let nt = TopicLabel::ALL.len();
    let mut joint: BTreeMap<String, Vec<Vec<usize>>> = BTreeMap::new();
    for r in records {
        let sem = r.semester.clone().unwrap_or_else(|| UNKNOWN_SEMESTER.to_string());
        joint.entry(sem).or_insert_with(|| vec![vec![0; ns]; nt])[r.topic.code()][r.sentiment.code()] += 1;
    }
    let snapshots: Vec<SemesterSnapshot> = joint
        .into_iter()
        .map(|(semester, joint)| {
            let topic_counts: Vec<usize> = joint.iter().map(|row| row.iter().sum()).collect();
            let sentiment_counts: Vec<usize> = (0..ns).map(|s| joint.iter().map(|row| row[s]).sum()).collect();
            SemesterSnapshot {
                semester,
                records: topic_counts.iter().sum(),
                sentiment: Distribution::from_counts(names(Task::Sentiment), sentiment_counts),
                topic: Distribution::from_counts(names(Task::Topic), topic_counts),
                joint,
            }
        })
        .collect();
    let trend = |axis: Task| {
        let labels = names(axis);
        TrendSeries {
            axis,
            semesters: snapshots.iter().map(|s| s.semester.clone()).collect(),
            values: (0..labels.len())
                .map(|l| snapshots.iter().map(|s| s.distribution(axis).percentages[l]).collect())
                .collect(),
            labels,
        }
    };
    let mut flagged: Vec<String> = records.iter().filter(|r| r.flagged).map(|r| r.id.clone()).collect();
    flagged.sort();
    ReportBundle {
        version: REPORT_VERSION,
        metadata,
        records: records.len(),
        sentiment_trend: trend(Task::Sentiment),
        topic_trend: trend(Task::Topic),
        snapshots,
        flagged,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Svg,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "svg" => Ok(Self::Svg),
            other => Err(Error::invalid(format!("unknown report format `{other}`"))),
        }
    }
}

/// Replaces anything outside `[A-Za-z0-9_-]` so a semester tag is a safe file-name part.
pub fn file_stem(tag: &str) -> String {
    let s: String = tag
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "_".to_string()
    } else {
        s
    }
}

fn write(path: &Path, content: &[u8]) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::invalid(format!("csv: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))
}

/// Writes the requested formats into `dir` (created if missing) and returns the files written.
pub fn emit(bundle: &ReportBundle, formats: &[OutputFormat], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, content: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        write(&path, &content)?;
        written.push(path);
        Ok(())
    };
    for format in formats {
        match format {
            OutputFormat::Json => put("report.json".into(), bundle.to_json()?.into_bytes())?,
            OutputFormat::Csv => {
                for snap in &bundle.snapshots {
                    for axis in [Task::Sentiment, Task::Topic] {
                        let d = snap.distribution(axis);
                        let rows = (0..d.labels.len()).map(|i| {
                            vec![d.labels[i].clone(), d.counts[i].to_string(), format!("{:.1}", d.percentages[i])]
                        });
                        let name = format!("snapshot_{}_{axis}.csv", file_stem(&snap.semester));
                        put(name, csv_bytes(&["label", "count", "percent"], rows)?)?;
                    }
                }
                for axis in [Task::Sentiment, Task::Topic] {
                    let t = bundle.trend(axis);
                    let rows = t.semesters.iter().enumerate().flat_map(|(s, sem)| {
                        t.labels
                            .iter()
                            .enumerate()
                            .map(move |(l, label)| vec![sem.clone(), label.clone(), format!("{:.1}", t.values[l][s])])
                    });
                    put(format!("trend_{axis}.csv"), csv_bytes(&["semester", "label", "percent"], rows)?)?;
                }
            }
            OutputFormat::Svg => {
                for snap in &bundle.snapshots {
                    for axis in [Task::Sentiment, Task::Topic] {
                        let title = format!("{axis}: {}", snap.semester);
                        let svg = pie_svg(&title, snap.distribution(axis));
                        put(format!("pie_{}_{axis}.svg", file_stem(&snap.semester)), svg.into_bytes())?;
                    }
                }
                for axis in [Task::Sentiment, Task::Topic] {
                    let svg = trend_svg(&format!("{axis} trend"), bundle.trend(axis));
                    put(format!("trend_{axis}.svg"), svg.into_bytes())?;
                }
            }
        }
    }
    Ok(written)
}

const PALETTE: [&str; 4] = ["#4e79a7", "#e15759", "#f28e2b", "#76b7b2"];

pub fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn svg_open(width: u32, height: u32, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n<title>{t}</title>\n<text x=\"10\" y=\"20\" font-size=\"14\">{t}</text>\n",
        t = xml_escape(title)
    )
}

/// Static pie chart with a legend.
pub fn pie_svg(title: &str, dist: &Distribution) -> String {
    let (cx, cy, r) = (130.0_f64, 160.0_f64, 100.0_f64);
    let mut svg = svg_open(420, 290, title);
    let total = dist.total();
    if total == 0 {
        let _ = writeln!(svg, "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"{r}\" fill=\"#dddddd\"/>");
    }
    let mut start = 0.0_f64;
    for (i, &count) in dist.counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        if count == total {
            let _ = writeln!(svg, "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"{r}\" fill=\"{color}\"/>");
            continue;
        }
        let sweep = count as f64 / total as f64 * std::f64::consts::TAU;
        let point = |a: f64| (cx + r * a.sin(), cy - r * a.cos());
        let (x0, y0) = point(start);
        let (x1, y1) = point(start + sweep);
        let large = u8::from(sweep > std::f64::consts::PI);
        let _ = writeln!(
            svg,
            "<path d=\"M {cx:.2} {cy:.2} L {x0:.2} {y0:.2} A {r} {r} 0 {large} 1 {x1:.2} {y1:.2} Z\" fill=\"{color}\"/>"
        );
        start += sweep;
    }
    for (i, label) in dist.labels.iter().enumerate() {
        let y = 70 + 22 * i;
        let _ = writeln!(
            svg,
            "<rect x=\"260\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n<text x=\"278\" y=\"{}\">{} {:.1}%</text>",
            y - 10,
            PALETTE[i % PALETTE.len()],
            y,
            xml_escape(label),
            dist.percentages[i]
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Static line chart: one polyline per label, y axis 0–100 %.
pub fn trend_svg(title: &str, trend: &TrendSeries) -> String {
    let (left, top, width, height) = (50.0_f64, 40.0_f64, 420.0_f64, 220.0_f64);
    let mut svg = svg_open(640, 320, title);
    let _ = writeln!(
        svg,
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{left}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>",
        b = top + height,
        r = left + width
    );
    for pct in [0, 25, 50, 75, 100] {
        let y = top + height * (1.0 - pct as f64 / 100.0);
        let _ = writeln!(svg, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{pct}</text>", left - 5.0, y + 4.0);
    }
    let n = trend.semesters.len();
    let x_of = |s: usize| {
        if n <= 1 {
            left + width / 2.0
        } else {
            left + width * s as f64 / (n - 1) as f64
        }
    };
    for (s, sem) in trend.semesters.iter().enumerate() {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            x_of(s),
            top + height + 18.0,
            xml_escape(sem)
        );
    }
    for (l, label) in trend.labels.iter().enumerate() {
        let color = PALETTE[l % PALETTE.len()];
        let points: Vec<String> = trend.values[l]
            .iter()
            .enumerate()
            .map(|(s, v)| format!("{:.1},{:.1}", x_of(s), top + height * (1.0 - v / 100.0)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            points.join(" ")
        );
        for p in &points {
            let (x, y) = p.split_once(',').expect("formatted pair");
            let _ = writeln!(svg, "<circle cx=\"{x}\" cy=\"{y}\" r=\"3\" fill=\"{color}\"/>");
        }
        let y = top + 10.0 + 22.0 * l as f64;
        let _ = writeln!(
            svg,
            "<rect x=\"500\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n<text x=\"518\" y=\"{:.1}\">{}</text>",
            y - 10.0,
            y,
            xml_escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, sem: Option<&str>, s: SentimentLabel, t: TopicLabel) -> LabeledRecord {
        LabeledRecord {
            id: id.into(),
            text: "x".into(),
            semester: sem.map(String::from),
            sentiment: s,
            topic: t,
            gold_sentiment: None,
            gold_topic: None,
            flagged: false,
        }
    }

    use SentimentLabel::*;
    use TopicLabel::*;

    #[test]
    fn single_semester_pie() {
        let rs = [
            rec("1", Some("2015-1"), Positive, Lecturers),
            rec("2", Some("2015-1"), Positive, Lecturers),
            rec("3", Some("2015-1"), Negative, Facilities),
            rec("4", Some("2015-1"), Neutral, Others),
        ];
        let b = build_report(&rs, ReportMetadata::default());
        assert_eq!(b.snapshots.len(), 1);
        assert_eq!(b.snapshots[0].sentiment.percentages, vec![50.0, 25.0, 25.0]);
        assert_eq!(b.snapshots[0].topic.counts, vec![2, 0, 1, 1]);
        let joint: usize = b.snapshots[0].joint.iter().flatten().sum();
        assert_eq!(joint, 4);
    }

    #[test]
    fn trend_follows_semesters_in_order() {
        let mut rs = Vec::new();
        for (i, s) in [Positive, Positive, Positive, Negative, Negative].into_iter().enumerate() {
            rs.push(rec(&format!("b{i}"), Some("2016-1"), if i < 3 { s } else { Negative }, Lecturers));
        }
        for (i, s) in [Positive, Positive, Negative, Negative, Negative].into_iter().enumerate() {
            rs.push(rec(&format!("a{i}"), Some("2015-2"), s, Lecturers));
        }
        rs.push(rec("u", None, Neutral, Others));
        let b = build_report(&rs, ReportMetadata::default());
        assert_eq!(b.sentiment_trend.semesters, ["2015-2", "2016-1", "unknown"]);
        assert_eq!(b.sentiment_trend.values[0], vec![40.0, 60.0, 0.0]);
    }

    #[test]
    fn percentages_use_largest_remainder() {
        let d = Distribution::from_counts(vec!["a".into(), "b".into(), "c".into()], vec![1, 1, 1]);
        assert_eq!(d.percentages, vec![33.4, 33.3, 33.3]);
    }

    #[test]
    fn emitted_files_follow_naming_and_parse() {
        let rs = [
            rec("1", Some("2015-1"), Positive, Lecturers),
            rec("2", Some("2015/2 <b>"), Negative, Curriculums),
        ];
        let b = build_report(&rs, ReportMetadata::default());
        let dir = tempfile::tempdir().unwrap();
        let files = emit(&b, &[OutputFormat::Json, OutputFormat::Csv, OutputFormat::Svg], dir.path()).unwrap();
        let mut names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        names.sort();
        let mut want = vec![
            "report.json".to_string(),
            "trend_sentiment.csv".into(),
            "trend_topic.csv".into(),
            "trend_sentiment.svg".into(),
            "trend_topic.svg".into(),
        ];
        for sem in ["2015-1", "2015_2__b_"] {
            for axis in ["sentiment", "topic"] {
                want.push(format!("snapshot_{sem}_{axis}.csv"));
                want.push(format!("pie_{sem}_{axis}.svg"));
            }
        }
        want.sort();
        assert_eq!(names, want);
        for f in &files {
            let content = std::fs::read_to_string(f).unwrap();
            if f.extension().unwrap() == "svg" {
                roxmltree::Document::parse(&content).unwrap();
            }
        }
        let json = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        assert_eq!(ReportBundle::from_json(&json).unwrap(), b);
        let trend = std::fs::read_to_string(dir.path().join("trend_topic.csv")).unwrap();
        assert_eq!(trend.lines().count(), 1 + 2 * 4);
    }

    fn arb_records() -> impl Strategy<Value = Vec<LabeledRecord>> {
        prop::collection::vec((0usize..3, 0usize..3, 0usize..4), 1..60).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (sem, s, t))| {
                    let tag = ["2015-1", "2015-2", "2016-1"][sem];
                    rec(
                        &i.to_string(),
                        Some(tag),
                        SentimentLabel::from_code(s).unwrap(),
                        TopicLabel::from_code(t).unwrap(),
                    )
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn distributions_sum_to_hundred(rs in arb_records()) {
            let b = build_report(&rs, ReportMetadata::default());
            let total: usize = b.snapshots.iter().map(|s| s.records).sum();
            prop_assert_eq!(total, rs.len());
            for s in &b.snapshots {
                for d in [&s.sentiment, &s.topic] {
                    let sum: f64 = d.percentages.iter().sum();
                    prop_assert!((sum - 100.0).abs() <= 0.1 + 1e-9);
                    prop_assert_eq!(d.total(), s.records);
                }
                prop_assert_eq!(s.joint.iter().flatten().sum::<usize>(), s.records);
            }
        }

        #[test]
        fn record_order_does_not_matter(rs in arb_records(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = rs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(
                build_report(&rs, ReportMetadata::default()),
                build_report(&shuffled, ReportMetadata::default())
            );
        }
    }
}
