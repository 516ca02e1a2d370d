//! CSV boundary formats: score tables, dataset manifests and feature files.
//!
//! Score table header: `sample_id,true_label,<class_1>,...,<class_K>`.
//! Manifest header: `sample_id,path,label`.
//! Feature file header: `sample_id,label,f0,...,f<d-1>`.
//! Split file header: `sample_id,partition` with partition `train` or `test`.
//!
//! All files are UTF-8 with LF line endings. Probabilities are written with
//! 12 significant digits and features in shortest round-trip form, so written
//! files are byte-stable.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::SplitAssignment;
use crate::learner::FeatureSet;
use crate::preprocess::Partition;
use crate::types::{LabelSpace, ProbVector, ScoreRow, ScoreTable};

const SAMPLE_ID: &str = "sample_id";
const TRUE_LABEL: &str = "true_label";

/// Format `x` with `digits` significant digits, trimming trailing zeros.
///
/// Plain decimal notation is used unless the magnitude is below 1e-5 or at
/// least 1e15, where scientific notation keeps the output short.
pub fn format_significant(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-5..15).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        return format!("{mantissa}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_fraction(&format!("{x:.decimals$}")).to_string()
}

/// Shortest text that parses back to exactly `x`.
pub fn format_shortest(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::Format {
        line: 0,
        message: format!("not UTF-8: {e}"),
    })
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Format {
        line,
        message: e.to_string(),
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(writer: csv::Writer<Vec<u8>>) -> String {
    let bytes = writer.into_inner().expect("in-memory writer");
    String::from_utf8(bytes).expect("csv output is UTF-8")
}

fn parse_f64(field: &str, line: u64, what: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Format {
        line,
        message: format!("{what} {field:?} is not a number"),
    })
}

/// A parsed score table plus ingestion diagnostics.
#[derive(Debug, Clone)]
pub struct ParsedScores {
    pub table: ScoreTable,
    /// Rows whose sums were repaired under the ingestion tolerance.
    pub renormalized_rows: usize,
}

/// Parse score-table CSV text. `model_id` names the producing model.
pub fn parse_score_table(text: &str, model_id: &str) -> Result<ParsedScores> {
    let mut reader = csv_reader(text);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.len() < 3 || &header[0] != SAMPLE_ID || &header[1] != TRUE_LABEL {
        return Err(Error::Format {
            line: 1,
            message: format!("expected header `{SAMPLE_ID},{TRUE_LABEL},<classes...>`"),
        });
    }
    let label_space = LabelSpace::new(header.iter().skip(2)).map_err(|e| Error::Format {
        line: 1,
        message: e.to_string(),
    })?;
    let k = label_space.len();
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    let mut renormalized_rows = 0;
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let sample_id = record[0].to_string();
        if sample_id.is_empty() {
            return Err(Error::Validation(format!("line {line}: empty sample_id")));
        }
        if !seen.insert(sample_id.clone()) {
            return Err(Error::Validation(format!("line {line}: duplicate sample_id {sample_id:?}")));
        }
        let true_label = match &record[1] {
            "" => None,
            name => Some(
                label_space
                    .index_of(name)
                    .ok_or_else(|| Error::Validation(format!("line {line}: unknown label {name:?}")))?,
            ),
        };
        let mut scores = Vec::with_capacity(k);
        for field in record.iter().skip(2) {
            scores.push(parse_f64(field, line, "probability")?);
        }
        let (probs, renorm) = ProbVector::ingest(scores).map_err(|e| match e {
            Error::Validation(m) | Error::NonFinite(m) => Error::Validation(format!("line {line}: {m}")),
            other => other,
        })?;
        renormalized_rows += usize::from(renorm);
        rows.push(ScoreRow {
            sample_id,
            probs,
            true_label,
        });
    }
    let table = ScoreTable::new(label_space, model_id, rows)?;
    Ok(ParsedScores {
        table,
        renormalized_rows,
    })
}

/// Read a score table; the model id is the file stem.
pub fn read_score_table(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let model_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_score_table(&text, &model_id).map(|p| p.table)
}

pub fn score_table_to_string(table: &ScoreTable) -> String {
    let mut w = csv_writer();
    let mut header = vec![SAMPLE_ID.to_string(), TRUE_LABEL.to_string()];
    header.extend(table.label_space().classes().iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for row in table.rows() {
        let mut rec = Vec::with_capacity(header.len());
        rec.push(row.sample_id.clone());
        rec.push(
            row.true_label
                .map(|l| table.label_space().name(l).to_string())
                .unwrap_or_default(),
        );
        rec.extend(row.probs.as_slice().iter().map(|&p| format_significant(p, 12)));
        w.write_record(&rec).expect("in-memory write");
    }
    finish(w)
}

pub fn write_score_table(table: &ScoreTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, score_table_to_string(table)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub path: String,
    /// Index into the manifest's label space.
    pub label: usize,
}

/// List of labeled image files making up a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    label_space: LabelSpace,
    entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(label_space: LabelSpace, entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if e.sample_id.is_empty() {
                return Err(Error::Validation("empty sample_id".into()));
            }
            if !seen.insert(e.sample_id.as_str()) {
                return Err(Error::Validation(format!("duplicate sample_id {:?}", e.sample_id)));
            }
            if e.path.is_empty() {
                return Err(Error::Validation(format!("empty path for {:?}", e.sample_id)));
            }
            if e.label >= label_space.len() {
                return Err(Error::Validation(format!("label index out of range for {:?}", e.sample_id)));
            }
        }
        Ok(Self { label_space, entries })
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Samples per class, in label-space order.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.label_space.len()];
        for e in &self.entries {
            counts[e.label] += 1;
        }
        counts
    }

    /// Samples per class keyed by class name.
    pub fn class_count_map(&self) -> BTreeMap<String, usize> {
        self.label_space
            .classes()
            .iter()
            .cloned()
            .zip(self.class_counts())
            .collect()
    }
}

/// Parse manifest CSV text. Without a label space, classes are taken in
/// order of first appearance.
pub fn parse_manifest(text: &str, label_space: Option<&LabelSpace>) -> Result<DatasetManifest> {
    let mut reader = csv_reader(text);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.iter().collect::<Vec<_>>() != ["sample_id", "path", "label"] {
        return Err(Error::Format {
            line: 1,
            message: "expected header `sample_id,path,label`".into(),
        });
    }
    let mut raw = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        raw.push((line, record[0].to_string(), record[1].to_string(), record[2].to_string()));
    }
    let label_space = match label_space {
        Some(ls) => ls.clone(),
        None => {
            let mut order: Vec<String> = Vec::new();
            for (_, _, _, label) in &raw {
                if !order.contains(label) {
                    order.push(label.clone());
                }
            }
            LabelSpace::new(order)?
        }
    };
    let mut entries = Vec::with_capacity(raw.len());
    for (line, sample_id, path, label) in raw {
        let label = label_space
            .index_of(&label)
            .ok_or_else(|| Error::Validation(format!("line {line}: label {label:?} not in label space")))?;
        entries.push(ManifestEntry { sample_id, path, label });
    }
    DatasetManifest::new(label_space, entries)
}

pub fn read_manifest(path: impl AsRef<Path>, label_space: Option<&LabelSpace>) -> Result<DatasetManifest> {
    parse_manifest(&read_text(path.as_ref())?, label_space)
}

pub fn manifest_to_string(manifest: &DatasetManifest) -> String {
    let mut w = csv_writer();
    w.write_record(["sample_id", "path", "label"]).expect("in-memory write");
    for e in manifest.entries() {
        w.write_record([e.sample_id.as_str(), e.path.as_str(), manifest.label_space().name(e.label)])
            .expect("in-memory write");
    }
    finish(w)
}

/// Training ids first, then test ids, each in manifest order.
pub fn split_to_string(split: &SplitAssignment) -> String {
    let mut w = csv_writer();
    w.write_record([SAMPLE_ID, "partition"]).expect("in-memory write");
    for id in &split.train_ids {
        w.write_record([id.as_str(), "train"]).expect("in-memory write");
    }
    for id in &split.test_ids {
        w.write_record([id.as_str(), "test"]).expect("in-memory write");
    }
    finish(w)
}

/// Parse a split file into `(sample_id, partition)` pairs in file order.
pub fn parse_split(text: &str) -> Result<Vec<(String, Partition)>> {
    let mut reader = csv_reader(text);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.iter().collect::<Vec<_>>() != [SAMPLE_ID, "partition"] {
        return Err(Error::Format {
            line: 1,
            message: "expected header `sample_id,partition`".into(),
        });
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let partition = match &record[1] {
            "train" => Partition::Train,
            "test" => Partition::Test,
            other => {
                return Err(Error::Format {
                    line,
                    message: format!("partition {other:?} is neither train nor test"),
                })
            }
        };
        let id = record[0].to_string();
        if id.is_empty() || !seen.insert(id.clone()) {
            return Err(Error::Validation(format!("line {line}: empty or duplicate sample_id {id:?}")));
        }
        out.push((id, partition));
    }
    Ok(out)
}

pub fn read_split(path: impl AsRef<Path>) -> Result<Vec<(String, Partition)>> {
    parse_split(&read_text(path.as_ref())?)
}

/// Parse a feature file. Labels may be empty; without a label space, classes
/// are taken in order of first appearance.
pub fn parse_features(text: &str, label_space: Option<&LabelSpace>) -> Result<FeatureSet> {
    let mut reader = csv_reader(text);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.len() < 3 || &header[0] != SAMPLE_ID || &header[1] != "label" {
        return Err(Error::Format {
            line: 1,
            message: "expected header `sample_id,label,f0,...`".into(),
        });
    }
    let mut ids = Vec::new();
    let mut names = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        ids.push(record[0].to_string());
        names.push((line, record[1].to_string()));
        let mut x = Vec::with_capacity(header.len() - 2);
        for field in record.iter().skip(2) {
            let v = parse_f64(field, line, "feature")?;
            if !v.is_finite() {
                return Err(Error::Validation(format!("line {line}: non-finite feature")));
            }
            x.push(v);
        }
        rows.push(x);
    }
    let label_space = match label_space {
        Some(ls) => ls.clone(),
        None => {
            let mut order: Vec<String> = Vec::new();
            for (_, n) in &names {
                if !n.is_empty() && !order.contains(n) {
                    order.push(n.clone());
                }
            }
            LabelSpace::new(order)?
        }
    };
    let labels = names
        .into_iter()
        .map(|(line, n)| {
            if n.is_empty() {
                Ok(None)
            } else {
                label_space
                    .index_of(&n)
                    .map(Some)
                    .ok_or_else(|| Error::Validation(format!("line {line}: label {n:?} not in label space")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureSet::new(label_space, ids, rows, labels)
}

pub fn read_features(path: impl AsRef<Path>, label_space: Option<&LabelSpace>) -> Result<FeatureSet> {
    parse_features(&read_text(path.as_ref())?, label_space)
}

pub fn features_to_string(set: &FeatureSet) -> String {
    let mut w = csv_writer();
    let mut header = vec![SAMPLE_ID.to_string(), "label".to_string()];
    header.extend((0..set.dim()).map(|i| format!("f{i}")));
    w.write_record(&header).expect("in-memory write");
    for i in 0..set.len() {
        let mut rec = vec![
            set.ids()[i].clone(),
            set.labels()[i]
                .map(|l| set.label_space().name(l).to_string())
                .unwrap_or_default(),
        ];
        rec.extend(set.rows()[i].iter().map(|&v| format_shortest(v)));
        w.write_record(&rec).expect("in-memory write");
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(0.5, 12), "0.5");
        assert_eq!(format_significant(1.0, 12), "1");
        assert_eq!(format_significant(0.0, 12), "0");
        assert_eq!(format_significant(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(format_significant(2.0 / 3.0, 12), "0.666666666667");
        assert_eq!(format_significant(0.00012345678901234, 12), "0.000123456789012");
        assert_eq!(format_significant(1.5e-7, 12), "1.5e-7");
        assert_eq!(format_significant(123.456, 12), "123.456");
    }

    #[test]
    fn reads_binary_table() {
        let text = "sample_id,true_label,no,yes\na,no,0.9,0.1\nb,yes,0.25,0.75\n";
        let parsed = parse_score_table(text, "m").unwrap();
        assert_eq!(parsed.table.len(), 2);
        assert_eq!(parsed.renormalized_rows, 0);
        assert_eq!(parsed.table.rows()[1].true_label, Some(1));
    }

    #[test]
    fn repairs_small_drift() {
        let text = "sample_id,true_label,no,yes\na,,0.5004,0.5\n";
        let parsed = parse_score_table(text, "m").unwrap();
        assert_eq!(parsed.renormalized_rows, 1);
        let s: f64 = parsed.table.rows()[0].probs.as_slice().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_rows() {
        let neg = "sample_id,true_label,no,yes\na,,-0.1,1.1\n";
        assert!(matches!(parse_score_table(neg, "m"), Err(Error::Validation(_))));
        let unknown = "sample_id,true_label,no,yes\na,maybe,0.5,0.5\n";
        assert!(matches!(parse_score_table(unknown, "m"), Err(Error::Validation(_))));
        let dup = "sample_id,true_label,no,yes\na,,0.5,0.5\na,,0.5,0.5\n";
        assert!(matches!(parse_score_table(dup, "m"), Err(Error::Validation(_))));
        let arity = "sample_id,true_label,no,yes\na,,0.5\n";
        assert!(matches!(parse_score_table(arity, "m"), Err(Error::Format { .. })));
        let header = "id,label,no,yes\na,,0.5,0.5\n";
        assert!(matches!(parse_score_table(header, "m"), Err(Error::Format { .. })));
        let nan = "sample_id,true_label,no,yes\na,,NaN,0.5\n";
        assert!(parse_score_table(nan, "m").is_err());
        let far = "sample_id,true_label,no,yes\na,,0.6,0.5\n";
        assert!(matches!(parse_score_table(far, "m"), Err(Error::Validation(_))));
    }

    #[test]
    fn empty_table_writes_header_only() {
        let t = ScoreTable::new(LabelSpace::binary_detection(), "m", vec![]).unwrap();
        assert_eq!(score_table_to_string(&t), "sample_id,true_label,no,yes\n");
        let back = parse_score_table(&score_table_to_string(&t), "m").unwrap().table;
        assert!(back.is_empty());
    }

    #[test]
    fn missing_label_survives_round_trip() {
        let text = "sample_id,true_label,no,yes\na,,0.9,0.1\n";
        let t = parse_score_table(text, "m").unwrap().table;
        assert_eq!(score_table_to_string(&t), text);
    }

    fn manifest_text(counts: &[(&str, usize)]) -> String {
        let mut s = String::from("sample_id,path,label\n");
        for (class, n) in counts {
            for i in 0..*n {
                s.push_str(&format!("{class}_{i},{class}/{i}.png,{class}\n"));
            }
        }
        s
    }

    #[test]
    fn dataset_shaped_manifests() {
        let ls = LabelSpace::binary_detection();
        let m = parse_manifest(&manifest_text(&[("no", 98), ("yes", 155)]), Some(&ls)).unwrap();
        assert_eq!(m.len(), 253);
        assert_eq!(m.class_counts(), vec![98, 155]);

        let ls = LabelSpace::tumor_types();
        let text = manifest_text(&[("glioma", 926), ("meningioma", 937), ("pituitary", 901), ("no_tumor", 500)]);
        let m = parse_manifest(&text, Some(&ls)).unwrap();
        assert_eq!(m.len(), 926 + 937 + 901 + 500);
        assert_eq!(m.class_count_map()["meningioma"], 937);
        assert_eq!(m.class_counts().iter().sum::<usize>(), m.len());
    }

    #[test]
    fn manifest_rejects_unknown_label() {
        let ls = LabelSpace::tumor_types();
        let text = "sample_id,path,label\nx,x.png,cyst\n";
        assert!(matches!(parse_manifest(text, Some(&ls)), Err(Error::Validation(_))));
        let bad_header = "id,path,label\nx,x.png,glioma\n";
        assert!(matches!(parse_manifest(bad_header, Some(&ls)), Err(Error::Format { .. })));
        let no_path = "sample_id,path,label\nx,,glioma\n";
        assert!(parse_manifest(no_path, Some(&ls)).is_err());
    }

    #[test]
    fn manifest_round_trip_and_inference() {
        let text = "sample_id,path,label\na,a.png,yes\nb,b.png,no\nc,\"c,1.png\",yes\n";
        let m = parse_manifest(text, None).unwrap();
        assert_eq!(m.label_space().classes(), &["yes", "no"]);
        assert_eq!(manifest_to_string(&m), text);
    }

    #[test]
    fn features_round_trip() {
        let text = "sample_id,label,f0,f1\na,x,0.1,0.2\nb,,1,-3.5\n";
        let set = parse_features(text, None).unwrap();
        assert_eq!(set.dim(), 2);
        assert_eq!(set.labels(), &[Some(0), None]);
        assert_eq!(features_to_string(&set), text);
    }

    proptest! {
        #[test]
        fn shortest_form_is_exact(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            prop_assert_eq!(format_shortest(x).parse::<f64>().unwrap(), x);
        }

        #[test]
        fn score_table_round_trip(
            rows in prop::collection::vec((prop::collection::vec(0.0f64..1.0, 3), prop::option::of(0usize..3)), 0..20)
        ) {
            let ls = LabelSpace::new(["a", "b", "c"]).unwrap();
            let rows: Vec<ScoreRow> = rows
                .into_iter()
                .enumerate()
                .filter_map(|(i, (raw, label))| {
                    crate::types::renormalize(&raw).ok().map(|probs| ScoreRow {
                        sample_id: format!("s{i}"),
                        probs,
                        true_label: label,
                    })
                })
                .collect();
            let table = ScoreTable::new(ls, "m", rows).unwrap();
            let text = score_table_to_string(&table);
            let back = parse_score_table(&text, "m").unwrap().table;
            prop_assert_eq!(back.len(), table.len());
            for (a, b) in table.rows().iter().zip(back.rows()) {
                prop_assert_eq!(&a.sample_id, &b.sample_id);
                prop_assert_eq!(a.true_label, b.true_label);
                for (x, y) in a.probs.as_slice().iter().zip(b.probs.as_slice()) {
                    prop_assert_eq!(format_significant(*x, 12), format_significant(*y, 12));
                }
            }
            // a second write is byte-identical
            prop_assert_eq!(score_table_to_string(&back), text);
        }

        #[test]
        fn format_significant_parses_back_within_precision(x in 0.0f64..1.0) {
            let y: f64 = format_significant(x, 12).parse().unwrap();
            prop_assert!((x - y).abs() <= 1e-11 * x);
        }
    }
}
