//! Labeled classification datasets with train/validation/test splits.
//!
//! A dataset on disk is a manifest (see [`crate::kv`]) next to one
//! tab-separated file per split, `<name>.<split>.tsv`, each with a header row.
//!
//! Manifest keys:
//!
//! | key | meaning |
//! |---|---|
//! | `name` | dataset identifier, also the split file prefix |
//! | `labels` | comma-separated label set, in order |
//! | `verbalizer.<label>` | word(s) the model should generate for `<label>` (default: lowercased label) |
//! | `fields` | comma-separated text columns, in order |
//! | `label_column` | label column (default `label`) |
//! | `id_column` | optional id column; ids must be `0..n` in file order |
//! | `instruction` | prompt preamble |
//! | `demo_format` / `query_format` | prompt templates, see [`crate::prompt`] |
//! | `files.<split>` | override for a split file path |
//! | `embeddings.<split>` | optional dense vector file for the split |

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::vectorize::tokenize;

/// Separator used when a multi-field example is flattened for vectorization.
pub const FIELD_SEPARATOR: &str = " [SEP] ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "dev" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidConfig(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: usize,
    pub fields: Vec<String>,
    pub label: String,
    pub split: Split,
}

impl Example {
    pub fn text(&self) -> String {
        join_fields(self, FIELD_SEPARATOR)
    }
}

/// Concatenates the example's segments in order with `sep` between them.
pub fn join_fields(example: &Example, sep: &str) -> String {
    example.fields.join(sep)
}

/// Column layout and task metadata parsed from a manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetFormat {
    pub name: String,
    pub label_set: Vec<String>,
    pub verbalizer: Vec<String>,
    pub field_columns: Vec<String>,
    pub label_column: String,
    pub id_column: Option<String>,
    pub instruction: String,
    pub demo_format: String,
    pub query_format: Option<String>,
}

impl DatasetFormat {
    pub fn from_manifest(kv: &KeyValues) -> Result<Self> {
        let required = |key: &str| {
            kv.get(key)
                .map(str::to_string)
                .ok_or_else(|| Error::Manifest(format!("missing key `{key}`")))
        };
        let name = required("name")?;
        let label_set = split_list(&required("labels")?);
        let field_columns = split_list(&required("fields")?);
        let verbalizer = label_set
            .iter()
            .map(|l| {
                kv.get(&format!("verbalizer.{l}"))
                    .map(str::to_string)
                    .unwrap_or_else(|| l.to_lowercase())
            })
            .collect();
        for (key, _) in kv.with_prefix("verbalizer.") {
            if !label_set.iter().any(|l| l == key) {
                return Err(Error::Manifest(format!("verbalizer for undeclared label {key:?}")));
            }
        }
        let demo_format = match kv.get("demo_format") {
            Some(f) => f.to_string(),
            None => default_demo_format(&field_columns),
        };
        let format = DatasetFormat {
            name,
            label_set,
            verbalizer,
            field_columns,
            label_column: kv.get("label_column").unwrap_or("label").to_string(),
            id_column: kv.get("id_column").map(str::to_string),
            instruction: kv.get("instruction").unwrap_or_default().to_string(),
            demo_format,
            query_format: kv.get("query_format").map(str::to_string),
        };
        format.validate()?;
        Ok(format)
    }

    fn validate(&self) -> Result<()> {
        let distinct = |items: &[String]| items.iter().collect::<HashSet<_>>().len() == items.len();
        if self.label_set.len() < 2 || !distinct(&self.label_set) {
            return Err(Error::Manifest("label set needs at least two distinct labels".into()));
        }
        if self.field_columns.is_empty() || !distinct(&self.field_columns) {
            return Err(Error::Manifest("fields must be non-empty and distinct".into()));
        }
        let normalized: Vec<String> = self.verbalizer.iter().map(|v| tokenize(v).join(" ")).collect();
        if normalized.iter().any(String::is_empty) || !distinct(&normalized) {
            return Err(Error::Manifest(
                "verbalizer must map labels to distinct non-empty words".into(),
            ));
        }
        Ok(())
    }

    pub fn to_manifest(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("name", &self.name);
        kv.set("labels", self.label_set.join(","));
        for (label, word) in self.label_set.iter().zip(&self.verbalizer) {
            kv.set(format!("verbalizer.{label}"), word);
        }
        kv.set("fields", self.field_columns.join(","));
        kv.set("label_column", &self.label_column);
        if let Some(id) = &self.id_column {
            kv.set("id_column", id);
        }
        kv.set("instruction", &self.instruction);
        kv.set("demo_format", &self.demo_format);
        if let Some(q) = &self.query_format {
            kv.set("query_format", q);
        }
        kv
    }
}

fn default_demo_format(fields: &[String]) -> String {
    let mut out = String::new();
    for f in fields {
        out.push_str(&format!("{f}: {{{f}}}\n"));
    }
    out.push_str("label: {label}");
    out
}

fn split_list(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// An immutable, fully validated dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub label_set: Vec<String>,
    /// Verbalized form of `label_set[i]`.
    pub verbalizer: Vec<String>,
    pub field_names: Vec<String>,
    pub instruction: String,
    pub demo_format: String,
    pub query_format: Option<String>,
    pub train: Vec<Example>,
    pub validation: Vec<Example>,
    pub test: Vec<Example>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[Example] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.label_set.iter().position(|l| l == label)
    }

    pub fn verbalize(&self, label: &str) -> Option<&str> {
        self.label_index(label).map(|i| self.verbalizer[i].as_str())
    }

    pub fn format(&self) -> DatasetFormat {
        DatasetFormat {
            name: self.name.clone(),
            label_set: self.label_set.clone(),
            verbalizer: self.verbalizer.clone(),
            field_columns: self.field_names.clone(),
            label_column: "label".into(),
            id_column: Some("id".into()),
            instruction: self.instruction.clone(),
            demo_format: self.demo_format.clone(),
            query_format: self.query_format.clone(),
        }
    }

    /// Most frequent training label; ties go to the earlier label in `label_set`.
    pub fn majority_label(&self) -> &str {
        let mut counts = vec![0usize; self.label_set.len()];
        for e in &self.train {
            if let Some(i) = self.label_index(&e.label) {
                counts[i] += 1;
            }
        }
        let best = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        &self.label_set[best]
    }
}

/// A manifest file together with the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub path: PathBuf,
    pub kv: KeyValues,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(Manifest {
            path: path.to_path_buf(),
            kv: KeyValues::read(path)?,
        })
    }

    pub fn dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }

    fn resolve(&self, raw: &str) -> PathBuf {
        let p = Path::new(raw);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir().join(p)
        }
    }

    pub fn split_path(&self, name: &str, split: Split) -> PathBuf {
        match self.kv.get(&format!("files.{split}")) {
            Some(raw) => self.resolve(raw),
            None => self.dir().join(format!("{name}.{split}.tsv")),
        }
    }

    pub fn embeddings_path(&self, split: Split) -> Option<PathBuf> {
        self.kv.get(&format!("embeddings.{split}")).map(|raw| self.resolve(raw))
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let format = DatasetFormat::from_manifest(&self.kv)?;
        let paths = Split::ALL.map(|s| self.split_path(&format.name, s));
        load_splits(&paths, &format)
    }
}

/// Loads the dataset whose manifest is at `manifest_path`.
pub fn load_manifest(manifest_path: &Path) -> Result<(Dataset, Manifest)> {
    let manifest = Manifest::read(manifest_path)?;
    let dataset = manifest.load_dataset()?;
    Ok((dataset, manifest))
}

/// Loads `<dir>/<name>.<split>.tsv` for every split using `format`.
pub fn load_dataset(dir: &Path, format: &DatasetFormat) -> Result<Dataset> {
    let paths = Split::ALL.map(|s| dir.join(format!("{}.{s}.tsv", format.name)));
    load_splits(&paths, format)
}

fn load_splits(paths: &[PathBuf; 3], format: &DatasetFormat) -> Result<Dataset> {
    let train = read_split(&paths[0], Split::Train, format)?;
    let validation = read_split(&paths[1], Split::Validation, format)?;
    let test = read_split(&paths[2], Split::Test, format)?;

    let mut seen: HashSet<&[String]> = HashSet::new();
    for split in [&train, &validation, &test] {
        let mine: HashSet<&[String]> = split.iter().map(|e| e.fields.as_slice()).collect();
        if let Some(dup) = mine.iter().find(|f| seen.contains(*f)) {
            return Err(Error::InvalidDataset(format!(
                "example {dup:?} appears in more than one split"
            )));
        }
        seen.extend(mine);
    }

    Ok(Dataset {
        name: format.name.clone(),
        label_set: format.label_set.clone(),
        verbalizer: format.verbalizer.clone(),
        field_names: format.field_columns.clone(),
        instruction: format.instruction.clone(),
        demo_format: format.demo_format.clone(),
        query_format: format.query_format.clone(),
        train,
        validation,
        test,
    })
}

fn read_split(path: &Path, split: Split, format: &DatasetFormat) -> Result<Vec<Example>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("missing column {name:?}"),
        })
    };
    let field_cols = format
        .field_columns
        .iter()
        .map(|f| column(f))
        .collect::<Result<Vec<_>>>()?;
    let label_col = column(&format.label_column)?;
    let id_col = match &format.id_column {
        Some(name) => Some(column(name)?),
        None => None,
    };

    let mut examples = Vec::new();
    let mut seen_ids = HashSet::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let label = record.get(label_col).unwrap_or_default().to_string();
        if !format.label_set.contains(&label) {
            return Err(Error::UnknownLabel {
                label,
                split: split.to_string(),
                row,
            });
        }
        if let Some(col) = id_col {
            let raw = record.get(col).unwrap_or_default();
            let id: usize = raw.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: row + 2,
                message: format!("id {raw:?} is not a non-negative integer"),
            })?;
            if !seen_ids.insert(id) {
                return Err(Error::DuplicateId {
                    id,
                    split: split.to_string(),
                });
            }
            if id != row {
                return Err(Error::InvalidDataset(format!(
                    "{split} ids must be contiguous from 0 in file order; row {row} has id {id}"
                )));
            }
        }
        let fields = field_cols
            .iter()
            .map(|&c| record.get(c).unwrap_or_default().to_string())
            .collect();
        examples.push(Example {
            id: row,
            fields,
            label,
            split,
        });
    }
    if examples.is_empty() {
        return Err(Error::EmptySplit(split.to_string()));
    }
    Ok(examples)
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: err.to_string(),
    }
}

/// Writes `dataset` as a manifest plus three split files into `dir` and
/// returns the manifest path. Field text must not contain tabs or newlines.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let format = dataset.format();
    for split in Split::ALL {
        let path = dir.join(format!("{}.{split}.tsv", dataset.name));
        let mut out = String::from("id");
        for f in &dataset.field_names {
            out.push('\t');
            out.push_str(f);
        }
        out.push_str("\tlabel\n");
        for e in dataset.split(split) {
            out.push_str(&e.id.to_string());
            for text in &e.fields {
                if text.contains(['\t', '\n', '\r']) {
                    return Err(Error::InvalidDataset(format!(
                        "example {} in {split} contains a tab or newline",
                        e.id
                    )));
                }
                out.push('\t');
                out.push_str(text);
            }
            out.push('\t');
            out.push_str(&e.label);
            out.push('\n');
        }
        std::fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    }
    let manifest_path = dir.join(format!("{}.manifest", dataset.name));
    std::fs::write(&manifest_path, format.to_manifest().render()).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        std::fs::write(dir.join(name), body).unwrap();
    }

    fn sst_manifest(dir: &Path) -> PathBuf {
        write(
            dir,
            "sst.manifest",
            "name = sst\nlabels = pos,neg\nverbalizer.pos = positive\nverbalizer.neg = negative\nfields = sentence\n",
        );
        dir.join("sst.manifest")
    }

    #[test]
    fn loads_well_formed_tsv() {
        let dir = tempfile::tempdir().unwrap();
        let m = sst_manifest(dir.path());
        write(
            dir.path(),
            "sst.train.tsv",
            "sentence\tlabel\na\tpos\nb\tneg\nc\tpos\nd\tneg\n",
        );
        write(dir.path(), "sst.validation.tsv", "sentence\tlabel\ne\tpos\n");
        write(dir.path(), "sst.test.tsv", "sentence\tlabel\nf\tneg\n");
        let (ds, _) = load_manifest(&m).unwrap();
        assert_eq!(ds.train.len(), 4);
        assert_eq!(ds.train.iter().map(|e| e.id).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert_eq!(ds.verbalize("neg"), Some("negative"));
    }

    #[test]
    fn unknown_label_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = sst_manifest(dir.path());
        write(dir.path(), "sst.train.tsv", "sentence\tlabel\na\tpos\nb\tmeh\nc\tneg\n");
        write(dir.path(), "sst.validation.tsv", "sentence\tlabel\ne\tpos\n");
        write(dir.path(), "sst.test.tsv", "sentence\tlabel\nf\tneg\n");
        let err = load_manifest(&m).unwrap_err();
        assert!(
            matches!(err, Error::UnknownLabel { ref label, .. } if label == "meh"),
            "{err}"
        );
    }

    #[test]
    fn labels_are_case_sensitive() {
        let dir = tempfile::tempdir().unwrap();
        let m = sst_manifest(dir.path());
        write(dir.path(), "sst.train.tsv", "sentence\tlabel\na\tPos\n");
        write(dir.path(), "sst.validation.tsv", "sentence\tlabel\ne\tpos\n");
        write(dir.path(), "sst.test.tsv", "sentence\tlabel\nf\tneg\n");
        assert!(matches!(load_manifest(&m), Err(Error::UnknownLabel { .. })));
    }

    #[test]
    fn missing_file_and_empty_split() {
        let dir = tempfile::tempdir().unwrap();
        let m = sst_manifest(dir.path());
        write(dir.path(), "sst.train.tsv", "sentence\tlabel\na\tpos\n");
        write(dir.path(), "sst.validation.tsv", "sentence\tlabel\nb\tneg\n");
        assert!(matches!(load_manifest(&m), Err(Error::MissingFile(_))));
        write(dir.path(), "sst.validation.tsv", "sentence\tlabel\n");
        write(dir.path(), "sst.test.tsv", "sentence\tlabel\nf\tneg\n");
        assert!(matches!(load_manifest(&m), Err(Error::EmptySplit(s)) if s == "validation"));
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "d.manifest",
            "name = d\nlabels = a,b\nfields = text\nid_column = idx\n",
        );
        write(dir.path(), "d.train.tsv", "idx\ttext\tlabel\n0\tx\ta\n0\ty\tb\n");
        write(dir.path(), "d.validation.tsv", "idx\ttext\tlabel\n0\tz\ta\n");
        write(dir.path(), "d.test.tsv", "idx\ttext\tlabel\n0\tw\tb\n");
        let err = load_manifest(&dir.path().join("d.manifest")).unwrap_err();
        assert!(matches!(err, Error::DuplicateId { id: 0, .. }), "{err}");
    }

    #[test]
    fn two_text_columns_give_two_segments() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "rte.manifest",
            "name = rte\nlabels = entailment,not_entailment\nverbalizer.not_entailment = no\nverbalizer.entailment = yes\nfields = premise,hypothesis\n",
        );
        write(
            dir.path(),
            "rte.train.tsv",
            "premise\thypothesis\tlabel\na premise\ta hypothesis\tentailment\n",
        );
        write(
            dir.path(),
            "rte.validation.tsv",
            "premise\thypothesis\tlabel\np\th\tnot_entailment\n",
        );
        write(
            dir.path(),
            "rte.test.tsv",
            "premise\thypothesis\tlabel\nq\t\tentailment\n",
        );
        let (ds, _) = load_manifest(&dir.path().join("rte.manifest")).unwrap();
        assert_eq!(ds.train[0].fields.len(), 2);
        assert_eq!(ds.train[0].text(), "a premise [SEP] a hypothesis");
        assert_eq!(ds.test[0].fields, vec!["q".to_string(), String::new()]);
    }

    #[test]
    fn overlapping_splits_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = sst_manifest(dir.path());
        write(dir.path(), "sst.train.tsv", "sentence\tlabel\na\tpos\n");
        write(dir.path(), "sst.validation.tsv", "sentence\tlabel\na\tpos\n");
        write(dir.path(), "sst.test.tsv", "sentence\tlabel\nf\tneg\n");
        assert!(matches!(load_manifest(&m), Err(Error::InvalidDataset(_))));
    }

    #[test]
    fn verbalizer_must_be_injective() {
        let kv = KeyValues::parse(
            "name = x\nlabels = a,b\nverbalizer.a = same\nverbalizer.b = Same\nfields = t\n",
            Path::new("m"),
        )
        .unwrap();
        assert!(DatasetFormat::from_manifest(&kv).is_err());
    }

    #[test]
    fn join_fields_cases() {
        let ex = |fields: &[&str]| Example {
            id: 0,
            fields: fields.iter().map(|s| s.to_string()).collect(),
            label: "a".into(),
            split: Split::Train,
        };
        assert_eq!(
            join_fields(&ex(&["a premise", "a hypothesis"]), " [SEP] "),
            "a premise [SEP] a hypothesis"
        );
        assert_eq!(join_fields(&ex(&["hello"]), " | "), "hello");
        assert_eq!(join_fields(&ex(&["", ""]), " "), " ");
    }
}
