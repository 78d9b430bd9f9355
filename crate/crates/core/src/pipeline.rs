//! Corpus-level glue shared by the command line, the C interface and the
//! end-to-end tests: pool discovery, mixture rendering, batch feature
//! extraction and model-input preparation.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio_io::{load_segment, save_wav, AudioSegment};
use crate::error::{Error, Result};
use crate::features::{
    export_png, read_features, resize_bilinear, write_features, FeatureConfig, FeatureKind,
    FeatureMatrix, FeatureStats,
};
use crate::matrix::Matrix;
use crate::mixer::{
    build_mix_plan, fold_dir, mix_file_name, mix_segments, read_metadata, write_metadata,
    MetadataTable, MixRecord, MixSpec, SegmentRef,
};
use crate::model::{ModelConfig, ModelParams};
use crate::trainer::{Dataset, TrainConfig};

/// Class-name list written next to generated metadata.
pub const CLASSES_FILE: &str = "classes.json";
/// Pool listing looked up inside a pool directory.
pub const POOL_LISTING: &str = "segments.csv";
pub const METADATA_FILE: &str = "metadata.csv";
pub const FEATURE_EXT: &str = "smfx";

/// Model architecture as written in a config file; the class count comes
/// from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub input_height: usize,
    pub input_width: usize,
    pub conv_channels: Vec<usize>,
    pub kernel_size: usize,
    pub fc_hidden: usize,
    pub weight_init_seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = ModelConfig::full_size(1);
        Self {
            input_height: p.input_height,
            input_width: p.input_width,
            conv_channels: p.conv_channels,
            kernel_size: p.kernel_size,
            fc_hidden: p.fc_hidden,
            weight_init_seed: p.weight_init_seed,
        }
    }
}

impl ModelSection {
    pub fn to_config(&self, num_classes: usize) -> ModelConfig {
        ModelConfig {
            input_channels: 1,
            input_height: self.input_height,
            input_width: self.input_width,
            conv_channels: self.conv_channels.clone(),
            kernel_size: self.kernel_size,
            fc_hidden: self.fc_hidden,
            num_classes,
            weight_init_seed: self.weight_init_seed,
        }
    }
}

/// The JSON training configuration: `{"model": {...}, "train": {...}}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.train.validate()?;
        cfg.model.to_config(1).validate()?;
        Ok(cfg)
    }
}

/// How raw feature matrices become model inputs. Stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    pub feature: FeatureConfig,
    pub input_height: usize,
    pub input_width: usize,
    /// Fit on the training split only.
    pub stats: FeatureStats,
    pub class_names: Vec<String>,
    pub threshold: f64,
}

impl Preprocess {
    /// Resizes to the model input and applies the stored standardization.
    pub fn prepare(&self, fm: &FeatureMatrix) -> Result<Vec<f64>> {
        if fm.kind != self.feature.kind {
            return Err(Error::FeatureFile(format!(
                "model expects {:?} features, got {:?}",
                self.feature.kind, fm.kind
            )));
        }
        let mut x = resize_bilinear(fm, self.input_height, self.input_width)?
            .values
            .into_vec();
        self.stats.apply(&mut x);
        Ok(x)
    }

    /// Raw audio to model input.
    pub fn prepare_segment(&self, seg: &AudioSegment) -> Result<Vec<f64>> {
        let fm = self.feature.extractor()?.extract(seg)?;
        self.prepare(&fm)
    }

    pub fn to_extra(&self) -> serde_json::Value {
        serde_json::json!({ "preprocess": self })
    }

    pub fn from_extra(extra: &serde_json::Value) -> Result<Self> {
        let block = extra
            .get("preprocess")
            .ok_or_else(|| Error::Checkpoint("checkpoint has no preprocessing block".into()))?;
        serde_json::from_value(block.clone())
            .map_err(|e| Error::Checkpoint(format!("bad preprocessing block: {e}")))
    }
}

/// A loaded checkpoint together with its preprocessing.
pub struct Predictor {
    pub params: ModelParams,
    pub preprocess: Preprocess,
}

impl Predictor {
    pub fn load(path: &Path) -> Result<Self> {
        let (params, extra) = crate::model::load_checkpoint(path, None)?;
        let preprocess = Preprocess::from_extra(&extra)?;
        if preprocess.class_names.len() != params.config().num_classes {
            return Err(Error::NameCountMismatch {
                expected: params.config().num_classes,
                got: preprocess.class_names.len(),
            });
        }
        Ok(Self { params, preprocess })
    }

    pub fn num_classes(&self) -> usize {
        self.params.config().num_classes
    }

    /// Per-class probabilities for one 4 s segment.
    pub fn predict_segment(&self, seg: &AudioSegment) -> Result<Vec<f64>> {
        let x = self.preprocess.prepare_segment(seg)?;
        Ok(crate::model::predict_proba(&self.params, &x, 1)?.into_vec())
    }

    pub fn predict_wav(&self, path: &Path) -> Result<Vec<f64>> {
        self.predict_segment(&load_segment(path)?)
    }
}

pub fn write_class_names(dir: &Path, names: &[String]) -> Result<()> {
    let path = dir.join(CLASSES_FILE);
    std::fs::write(&path, serde_json::to_vec_pretty(names)?).map_err(|e| Error::io(&path, e))
}

/// Class names for a metadata file: the sibling `classes.json` if present,
/// else names carried by the table, else `class_<id>`.
pub fn class_names_for(meta_path: &Path, table: &MetadataTable) -> Result<Vec<String>> {
    let sibling = meta_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(CLASSES_FILE);
    if sibling.exists() {
        let text = std::fs::read_to_string(&sibling).map_err(|e| Error::io(&sibling, e))?;
        let names: Vec<String> = serde_json::from_str(&text)?;
        if names.len() < table.num_classes {
            return Err(Error::NameCountMismatch {
                expected: table.num_classes,
                got: names.len(),
            });
        }
        return Ok(names);
    }
    let known = table.class_names();
    Ok((0..table.num_classes)
        .map(|c| known.get(&c).cloned().unwrap_or_else(|| format!("class_{c}")))
        .collect())
}

/// Reads metadata, sizing the label space from `classes.json` when present.
pub fn read_corpus_metadata(meta_path: &Path) -> Result<(MetadataTable, Vec<String>)> {
    let sibling = meta_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(CLASSES_FILE);
    let declared = if sibling.exists() {
        let text = std::fs::read_to_string(&sibling).map_err(|e| Error::io(&sibling, e))?;
        Some(serde_json::from_str::<Vec<String>>(&text)?.len())
    } else {
        None
    };
    let table = read_metadata(meta_path, declared)?;
    let names = class_names_for(meta_path, &table)?;
    Ok((table, names))
}

/// A source pool: segment files relative to `root` with class ids.
#[derive(Debug, Clone)]
pub struct Pool {
    pub root: PathBuf,
    pub segments: Vec<SegmentRef>,
    pub class_names: Vec<String>,
}

/// Finds the pool in `dir`: a `segments.csv` (segment or UrbanSound8K
/// schema), otherwise one sub-directory of WAV files per class, classes
/// numbered in sorted directory order.
pub fn discover_pool(dir: &Path) -> Result<Pool> {
    let listing = dir.join(POOL_LISTING);
    if listing.exists() {
        let table = read_metadata(&listing, None)?;
        let class_names = class_names_for(&listing, &table)?;
        let segments = table
            .rows
            .iter()
            .map(|r| {
                let direct = dir.join(&r.file_name);
                let in_fold = Path::new(&fold_dir(r.fold_id)).join(&r.file_name);
                let file_name = if !direct.exists() && dir.join(&in_fold).exists() {
                    in_fold.to_string_lossy().into_owned()
                } else {
                    r.file_name.clone()
                };
                SegmentRef {
                    class_id: r.class_ids[0],
                    file_name,
                }
            })
            .collect();
        return Ok(Pool {
            root: dir.to_path_buf(),
            segments,
            class_names,
        });
    }
    let mut class_dirs: Vec<PathBuf> = read_dir_sorted(dir)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    class_dirs.retain(|d| {
        read_dir_sorted(d)
            .map(|v| v.iter().any(|p| is_wav(p)))
            .unwrap_or(false)
    });
    if class_dirs.is_empty() {
        return Err(Error::InsufficientPool(format!(
            "{} has neither {POOL_LISTING} nor class directories of WAV files",
            dir.display()
        )));
    }
    let mut segments = Vec::new();
    let mut class_names = Vec::new();
    for (class_id, d) in class_dirs.iter().enumerate() {
        let name = d.file_name().unwrap().to_string_lossy().into_owned();
        for f in read_dir_sorted(d)?.into_iter().filter(|p| is_wav(p)) {
            segments.push(SegmentRef {
                class_id,
                file_name: format!("{name}/{}", f.file_name().unwrap().to_string_lossy()),
            });
        }
        class_names.push(name);
    }
    Ok(Pool {
        root: dir.to_path_buf(),
        segments,
        class_names,
    })
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    out.sort();
    Ok(out)
}

fn is_wav(p: &Path) -> bool {
    p.is_file()
        && p
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// All WAV files under `dir`, as sorted paths relative to it.
pub fn find_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for p in read_dir_sorted(&d)? {
            if p.is_dir() {
                stack.push(p);
            } else if is_wav(&p) {
                out.push(p.strip_prefix(dir).expect("walked from dir").to_path_buf());
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Plans and renders a mixed corpus into `out`: `fold<k>/mix_<i>.wav`,
/// `metadata.csv` and `classes.json`. Mixtures render in parallel; the
/// output depends only on the pool and `spec`.
pub fn render_mixes(pool: &Pool, spec: &MixSpec, out: &Path) -> Result<Vec<MixRecord>> {
    let plan = build_mix_plan(spec, &pool.segments)?;
    for fold in 1..=spec.num_folds {
        let d = out.join(fold_dir(fold));
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let records: Vec<MixRecord> = plan
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let components = entry
                .components
                .iter()
                .map(|&k| {
                    let r = &pool.segments[k];
                    let name = pool.class_names.get(r.class_id).cloned().unwrap_or_default();
                    Ok(load_segment(&pool.root.join(&r.file_name))?
                        .with_label(r.class_id, name)
                        .with_source(r.file_name.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            let mixed = mix_segments(&components, spec.class_count)?
                .with_placement(entry.fold_id, mix_file_name(i));
            save_wav(
                &mixed.to_segment(),
                out.join(fold_dir(entry.fold_id)).join(&mixed.file_name),
            )?;
            Ok(mixed.record())
        })
        .collect::<Result<_>>()?;
    write_metadata(&records, out.join(METADATA_FILE))?;
    write_class_names(out, &pool.class_names)?;
    Ok(records)
}

/// Extracts features for every WAV under `input`, mirroring its layout in
/// `out` with `.smfx` files (and `.png` renderings when asked).
pub fn featurize_dir(input: &Path, out: &Path, cfg: &FeatureConfig, png: bool) -> Result<usize> {
    let wavs = find_wavs(input)?;
    if wavs.is_empty() {
        return Err(Error::EmptyInput("no WAV files found"));
    }
    let extractor = cfg.extractor()?;
    wavs.par_iter().try_for_each(|rel| -> Result<()> {
        let seg = load_segment(&input.join(rel))?;
        let fm = extractor.extract(&seg)?;
        let dst = out.join(rel).with_extension(FEATURE_EXT);
        if let Some(parent) = dst.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        write_features(&fm, &dst)?;
        if png {
            export_png(&fm, dst.with_extension("png"))?;
        }
        Ok(())
    })?;
    for extra in [METADATA_FILE, CLASSES_FILE] {
        let src = input.join(extra);
        if src.exists() && input != out {
            std::fs::copy(&src, out.join(extra)).map_err(|e| Error::io(&src, e))?;
        }
    }
    Ok(wavs.len())
}

/// The feature file for a metadata row, trying `<name>.smfx` and
/// `fold<k>/<name>.smfx` under `dir`.
pub fn locate_features(dir: &Path, file_name: &str, fold_id: u32) -> Result<PathBuf> {
    let rel = Path::new(file_name).with_extension(FEATURE_EXT);
    let candidates = [dir.join(&rel), dir.join(fold_dir(fold_id)).join(&rel)];
    candidates
        .iter()
        .find(|p| p.exists())
        .cloned()
        .ok_or_else(|| Error::FeatureFile(format!("no features for {file_name} under {}", dir.display())))
}

/// Resized feature maps and label vectors for every metadata row.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub kind: FeatureKind,
    pub inputs: Vec<Matrix<f64>>,
    pub labels: Matrix<u8>,
    pub class_names: Vec<String>,
}

pub fn load_corpus(features_dir: &Path, table: &MetadataTable, class_names: Vec<String>, height: usize, width: usize) -> Result<Corpus> {
    if table.rows.is_empty() {
        return Err(Error::EmptyInput("metadata has no rows"));
    }
    let loaded: Vec<(FeatureKind, Matrix<f64>)> = table
        .rows
        .par_iter()
        .map(|r| {
            let fm = read_features(locate_features(features_dir, &r.file_name, r.fold_id)?)?;
            Ok((fm.kind, resize_bilinear(&fm, height, width)?.values))
        })
        .collect::<Result<_>>()?;
    let kind = loaded[0].0;
    if loaded.iter().any(|(k, _)| *k != kind) {
        return Err(Error::FeatureFile("feature directory mixes log-Mel and MFCC files".into()));
    }
    let l = table.num_classes;
    let labels = Matrix::from_vec(
        table.rows.len(),
        l,
        table.rows.iter().flat_map(|r| r.label_vector(l)).collect(),
    );
    Ok(Corpus {
        kind,
        inputs: loaded.into_iter().map(|(_, m)| m).collect(),
        labels,
        class_names,
    })
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Standardization statistics over the listed items.
    pub fn fit_stats(&self, idx: &[usize]) -> Result<FeatureStats> {
        FeatureStats::fit(idx.iter().map(|&i| &self.inputs[i]))
    }

    /// Every item standardized with `stats`, ready for training.
    pub fn to_dataset(&self, stats: &FeatureStats) -> Result<Dataset> {
        let sample_len = self.inputs.first().map_or(0, |m| m.as_slice().len());
        let mut x = Vec::with_capacity(sample_len * self.len());
        for m in &self.inputs {
            x.extend_from_slice(m.as_slice());
        }
        stats.apply(&mut x);
        Dataset::new(x, sample_len, self.labels.clone())
    }
}
