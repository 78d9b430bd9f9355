use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Descriptor of one mixed sample as persisted in the corpus metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixRecord {
    pub file_name: String,
    pub fold_id: u32,
    /// Class ids present in the mixture.
    pub labels: Vec<usize>,
    pub component_files: Vec<String>,
}

/// One source segment in a pool listing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentRecord {
    pub segment_name: String,
    pub slice_start_s: f64,
    pub slice_end_s: f64,
    pub class_id: usize,
    pub class_name: String,
    pub fold_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetadataSchema {
    /// `file_name,fold_id,labels,component_files`
    Mix,
    /// Segment listings: `segment_name, class_id, fold_id` plus optional
    /// `class_name`, `slice_start_s`, `slice_end_s`.
    Segment,
    /// UrbanSound8K: `slice_file_name, classID, fold` plus optional
    /// `class`, `start`, `end`.
    UrbanSound8k,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaRow {
    pub file_name: String,
    pub fold_id: u32,
    pub class_ids: Vec<usize>,
    pub class_name: Option<String>,
    pub component_files: Vec<String>,
    pub slice_start_s: Option<f64>,
    pub slice_end_s: Option<f64>,
}

impl MetaRow {
    pub fn label_vector(&self, num_classes: usize) -> Vec<u8> {
        let mut v = vec![0u8; num_classes];
        for &c in &self.class_ids {
            v[c] = 1;
        }
        v
    }

    pub fn to_record(&self) -> MixRecord {
        MixRecord {
            file_name: self.file_name.clone(),
            fold_id: self.fold_id,
            labels: self.class_ids.clone(),
            component_files: self.component_files.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetadataTable {
    pub schema: MetadataSchema,
    pub num_classes: usize,
    pub rows: Vec<MetaRow>,
}

/// Counts reported for a dataset listing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub schema: MetadataSchema,
    pub num_rows: usize,
    pub num_classes: usize,
    pub per_class: BTreeMap<usize, usize>,
    pub folds: BTreeSet<u32>,
    pub class_names: BTreeMap<usize, String>,
}

impl MetadataTable {
    pub fn label_matrix(&self) -> Vec<Vec<u8>> {
        self.rows
            .iter()
            .map(|r| r.label_vector(self.num_classes))
            .collect()
    }

    /// Names carried by single-label rows, keyed by class id.
    pub fn class_names(&self) -> BTreeMap<usize, String> {
        let mut names = BTreeMap::new();
        for r in &self.rows {
            if let (Some(name), [c]) = (&r.class_name, r.class_ids.as_slice()) {
                names.entry(*c).or_insert_with(|| name.clone());
            }
        }
        names
    }

    pub fn summary(&self) -> DatasetSummary {
        let mut per_class = BTreeMap::new();
        for r in &self.rows {
            for &c in &r.class_ids {
                *per_class.entry(c).or_insert(0) += 1;
            }
        }
        DatasetSummary {
            schema: self.schema,
            num_rows: self.rows.len(),
            num_classes: per_class.len(),
            per_class,
            folds: self.rows.iter().map(|r| r.fold_id).collect(),
            class_names: self.class_names(),
        }
    }
}

fn join_ids(ids: &[usize]) -> String {
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("|")
}

fn create_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// Writes the mix metadata CSV. Labels are stored as sorted,
/// `|`-separated class ids; component files are `|`-separated.
pub fn write_metadata(records: &[MixRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if records.is_empty() {
        return Err(Error::EmptyInput("no mixed samples to describe"));
    }
    let mut w = create_writer(path)?;
    w.write_record(["file_name", "fold_id", "labels", "component_files"])?;
    for r in records {
        w.write_record([
            r.file_name.as_str(),
            &r.fold_id.to_string(),
            &join_ids(&r.labels),
            &r.component_files.join("|"),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a pool listing in the segment schema.
pub fn write_segment_metadata(records: &[SegmentRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if records.is_empty() {
        return Err(Error::EmptyInput("no segments to describe"));
    }
    let mut w = create_writer(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

struct Columns {
    schema: MetadataSchema,
    name: usize,
    fold: usize,
    labels: usize,
    components: Option<usize>,
    class_name: Option<usize>,
    start: Option<usize>,
    end: Option<usize>,
}

fn detect(header: &csv::StringRecord) -> Result<Columns> {
    let find = |aliases: &[&str]| {
        header
            .iter()
            .position(|h| aliases.iter().any(|a| h.trim().eq_ignore_ascii_case(a)))
    };
    let describe = || header.iter().collect::<Vec<_>>().join(",");

    if let (Some(name), Some(fold), Some(labels), Some(components)) = (
        find(&["file_name"]),
        find(&["fold_id"]),
        find(&["labels"]),
        find(&["component_files"]),
    ) {
        return Ok(Columns {
            schema: MetadataSchema::Mix,
            name,
            fold,
            labels,
            components: Some(components),
            class_name: None,
            start: None,
            end: None,
        });
    }
    if let (Some(name), Some(labels), Some(fold)) = (
        find(&["slice_file_name"]),
        find(&["classID"]),
        find(&["fold"]),
    ) {
        return Ok(Columns {
            schema: MetadataSchema::UrbanSound8k,
            name,
            fold,
            labels,
            components: None,
            class_name: find(&["class"]),
            start: find(&["start"]),
            end: find(&["end"]),
        });
    }
    if let (Some(name), Some(labels), Some(fold)) = (
        find(&["segment_name", "file_name", "slice_file_name"]),
        find(&["class_id", "classID"]),
        find(&["fold_id", "folder_id", "fold"]),
    ) {
        return Ok(Columns {
            schema: MetadataSchema::Segment,
            name,
            fold,
            labels,
            components: None,
            class_name: find(&["class_name", "class"]),
            start: find(&["slice_start_s", "start", "slice_start"]),
            end: find(&["slice_end_s", "end", "slice_end"]),
        });
    }
    Err(Error::UnknownSchema(describe()))
}

/// Parses a metadata CSV in any recognized schema.
///
/// With `num_classes` given, class ids at or above it are rejected;
/// otherwise the label space is inferred as `max id + 1`.
pub fn read_metadata(path: impl AsRef<Path>, num_classes: Option<usize>) -> Result<MetadataTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(file);
    let header = reader.headers()?.clone();
    let cols = detect(&header)?;

    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        // 1-based data row numbering, header excluded.
        let row = i + 1;
        let rec = rec.map_err(|e| Error::BadRow {
            row,
            reason: e.to_string(),
        })?;
        let bad = |reason: String| Error::BadRow { row, reason };
        let field = |idx: usize| rec.get(idx).unwrap_or("").trim();

        let file_name = field(cols.name).to_string();
        if file_name.is_empty() {
            return Err(bad("empty file name".into()));
        }
        let fold_id: u32 = field(cols.fold)
            .parse()
            .map_err(|_| bad(format!("fold '{}' is not an integer", field(cols.fold))))?;
        let label_text = field(cols.labels);
        let mut class_ids = if cols.schema == MetadataSchema::Mix && label_text.is_empty() {
            Vec::new()
        } else {
            label_text
                .split('|')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| bad(format!("label '{t}' is not a class id")))
                })
                .collect::<Result<Vec<_>>>()?
        };
        class_ids.sort_unstable();
        class_ids.dedup();
        if let Some(limit) = num_classes {
            if let Some(&c) = class_ids.iter().find(|&&c| c >= limit) {
                return Err(bad(format!("class id {c} outside label space of {limit}")));
            }
        }
        let parse_opt = |idx: Option<usize>| -> Result<Option<f64>> {
            match idx.map(field) {
                None | Some("") => Ok(None),
                Some(t) => t
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| bad(format!("'{t}' is not a number"))),
            }
        };
        rows.push(MetaRow {
            file_name,
            fold_id,
            class_ids,
            class_name: cols
                .class_name
                .map(field)
                .filter(|s| !s.is_empty())
                .map(str::to_string),
            component_files: cols
                .components
                .map(field)
                .filter(|s| !s.is_empty())
                .map(|s| s.split('|').map(str::to_string).collect())
                .unwrap_or_default(),
            slice_start_s: parse_opt(cols.start)?,
            slice_end_s: parse_opt(cols.end)?,
        });
    }

    let num_classes = num_classes.unwrap_or_else(|| {
        rows.iter()
            .flat_map(|r| r.class_ids.iter())
            .max()
            .map_or(0, |m| m + 1)
    });
    Ok(MetadataTable {
        schema: cols.schema,
        num_classes,
        rows,
    })
}
