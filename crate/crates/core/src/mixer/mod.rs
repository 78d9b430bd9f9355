//! Mixed-audio corpus generation.
//!
//! A corpus is described by a [`MixSpec`]; [`build_mix_plan`] turns it into
//! a deterministic list of component selections and fold assignments, and
//! [`mix_segments`] renders one entry. Audio is only touched during
//! rendering, so pools far larger than memory can be planned up front.

mod metadata;

pub use metadata::{
    read_metadata, write_metadata, write_segment_metadata, DatasetSummary, MetaRow,
    MetadataSchema, MetadataTable, MixRecord, SegmentRecord,
};

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioSegment;
use crate::error::{Error, Result};

/// Mixtures whose peak exceeds this level are scaled down to it.
pub const PEAK_LIMIT: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixMode {
    Fixed { components: usize },
    Variable { min: usize, max: usize },
}

impl MixMode {
    pub const FIXED3: MixMode = MixMode::Fixed { components: 3 };
    pub const VARIABLE_1_TO_4: MixMode = MixMode::Variable { min: 1, max: 4 };

    fn bounds(self) -> (usize, usize) {
        match self {
            MixMode::Fixed { components } => (components, components),
            MixMode::Variable { min, max } => (min, max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub mode: MixMode,
    pub total_samples: usize,
    pub num_folds: u32,
    pub rng_seed: u64,
    pub class_count: usize,
}

impl MixSpec {
    pub fn validate(&self) -> Result<()> {
        let (min, max) = self.mode.bounds();
        if min < 1 || min > max || max > self.class_count {
            return Err(Error::InvalidConfig(format!(
                "component bounds {min}..={max} invalid for {} classes",
                self.class_count
            )));
        }
        if self.total_samples == 0 {
            return Err(Error::InvalidConfig("total_samples must be positive".into()));
        }
        if self.num_folds == 0 {
            return Err(Error::InvalidConfig("num_folds must be at least 1".into()));
        }
        Ok(())
    }
}

/// A pool entry as seen by the planner: a class and a stable name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentRef {
    pub class_id: usize,
    pub file_name: String,
}

/// One planned mixture: pool indices (ascending) and a 1-based fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanEntry {
    pub components: Vec<usize>,
    pub fold_id: u32,
}

/// Draws the component selection and fold of every mixture.
///
/// Each entry picks its component count (fixed, or uniform in the variable
/// range), then that many distinct classes, then one pool segment per
/// class, all uniformly. The result depends only on `spec` and the pool
/// order.
pub fn build_mix_plan(spec: &MixSpec, pool: &[SegmentRef]) -> Result<Vec<PlanEntry>> {
    spec.validate()?;
    if pool.is_empty() {
        return Err(Error::InsufficientPool("pool is empty".into()));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, seg) in pool.iter().enumerate() {
        if seg.class_id >= spec.class_count {
            return Err(Error::LabelOutOfRange {
                class_id: seg.class_id,
                num_classes: spec.class_count,
            });
        }
        by_class.entry(seg.class_id).or_default().push(i);
    }
    let (min, max) = spec.mode.bounds();
    if by_class.len() < max {
        return Err(Error::InsufficientPool(format!(
            "pool covers {} classes but mixes need up to {max} distinct classes",
            by_class.len()
        )));
    }
    let classes: Vec<usize> = by_class.keys().copied().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let plan = (0..spec.total_samples)
        .map(|_| {
            let n = rng.gen_range(min..=max);
            let mut components: Vec<usize> = classes
                .choose_multiple(&mut rng, n)
                .map(|c| {
                    let members = &by_class[c];
                    members[rng.gen_range(0..members.len())]
                })
                .collect();
            components.sort_unstable();
            let fold_id = rng.gen_range(1..=spec.num_folds);
            PlanEntry {
                components,
                fold_id,
            }
        })
        .collect();
    Ok(plan)
}

/// A rendered mixture with its multilabel ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSample {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub labels: Vec<u8>,
    pub fold_id: u32,
    pub component_files: Vec<String>,
    pub file_name: String,
}

impl MixedSample {
    pub fn with_placement(mut self, fold_id: u32, file_name: impl Into<String>) -> Self {
        self.fold_id = fold_id;
        self.file_name = file_name.into();
        self
    }

    pub fn class_ids(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == 1)
            .map(|(c, _)| c)
            .collect()
    }

    pub fn record(&self) -> MixRecord {
        MixRecord {
            file_name: self.file_name.clone(),
            fold_id: self.fold_id,
            labels: self.class_ids(),
            component_files: self.component_files.clone(),
        }
    }

    pub fn to_segment(&self) -> AudioSegment {
        AudioSegment::from_samples(self.samples.clone(), self.sample_rate)
            .with_source(self.file_name.clone())
    }
}

fn component_order(a: &AudioSegment, b: &AudioSegment) -> Ordering {
    a.class_id
        .cmp(&b.class_id)
        .then_with(|| a.source_file.cmp(&b.source_file))
        .then_with(|| a.slice_start_s.total_cmp(&b.slice_start_s))
        .then_with(|| {
            a.samples
                .iter()
                .zip(&b.samples)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Sample-wise mean of `components`, scaled down to [`PEAK_LIMIT`] when
/// the mean peaks above it. Labels are the union of component classes.
///
/// Components are summed in a canonical order, so any permutation of the
/// input produces bit-identical output. The returned sample carries fold 1
/// and an empty file name; see [`MixedSample::with_placement`].
pub fn mix_segments(components: &[AudioSegment], num_classes: usize) -> Result<MixedSample> {
    let first = components
        .first()
        .ok_or(Error::EmptyInput("mix needs at least one component"))?;
    for c in components {
        if c.sample_rate != first.sample_rate {
            return Err(Error::RateMismatch {
                expected: first.sample_rate,
                got: c.sample_rate,
            });
        }
        if c.samples.len() != first.samples.len() {
            return Err(Error::LengthMismatch {
                expected: first.samples.len(),
                got: c.samples.len(),
            });
        }
        if c.class_id >= num_classes {
            return Err(Error::LabelOutOfRange {
                class_id: c.class_id,
                num_classes,
            });
        }
    }

    let mut ordered: Vec<&AudioSegment> = components.iter().collect();
    ordered.sort_by(|a, b| component_order(a, b));

    let mut samples = vec![0.0; first.samples.len()];
    for c in &ordered {
        for (acc, &s) in samples.iter_mut().zip(&c.samples) {
            *acc += s;
        }
    }
    let n = ordered.len() as f64;
    samples.iter_mut().for_each(|s| *s /= n);

    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > PEAK_LIMIT {
        let gain = PEAK_LIMIT / peak;
        samples.iter_mut().for_each(|s| *s *= gain);
    }

    let mut labels = vec![0u8; num_classes];
    for c in &ordered {
        labels[c.class_id] = 1;
    }
    Ok(MixedSample {
        samples,
        sample_rate: first.sample_rate,
        labels,
        fold_id: 1,
        component_files: ordered.iter().map(|c| c.source_file.clone()).collect(),
        file_name: String::new(),
    })
}

/// `mix_{index:05}.wav`
pub fn mix_file_name(index: usize) -> String {
    format!("mix_{index:05}.wav")
}

/// Directory, relative to the corpus root, holding a fold's files.
pub fn fold_dir(fold_id: u32) -> String {
    format!("fold{fold_id}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pool(classes: usize, per_class: usize) -> Vec<SegmentRef> {
        (0..classes)
            .flat_map(|c| {
                (0..per_class).map(move |i| SegmentRef {
                    class_id: c,
                    file_name: format!("c{c}_{i}.wav"),
                })
            })
            .collect()
    }

    fn spec(mode: MixMode, total: usize) -> MixSpec {
        MixSpec {
            mode,
            total_samples: total,
            num_folds: 10,
            rng_seed: 42,
            class_count: 21,
        }
    }

    fn seg(class_id: usize, samples: Vec<f64>) -> AudioSegment {
        AudioSegment::from_samples(samples, 1000)
            .with_label(class_id, format!("class{class_id}"))
            .with_source(format!("src{class_id}.wav"))
    }

    #[test]
    fn eight_thousand_entries_spread_uniformly_over_ten_folds() {
        let pool = pool(21, 20);
        let plan = build_mix_plan(&spec(MixMode::VARIABLE_1_TO_4, 8000), &pool).unwrap();
        assert_eq!(plan.len(), 8000);
        let mut counts = [0usize; 10];
        for e in &plan {
            assert!((1..=10).contains(&e.fold_id));
            counts[e.fold_id as usize - 1] += 1;
        }
        let expected = 800.0;
        let chi2: f64 = counts
            .iter()
            .map(|&o| (o as f64 - expected).powi(2) / expected)
            .sum();
        // Upper 0.001 quantile of chi-square with 9 degrees of freedom.
        assert!(chi2 < 27.877, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn fixed_mode_always_draws_three_distinct_classes() {
        let pool = pool(21, 5);
        let plan = build_mix_plan(&spec(MixMode::FIXED3, 500), &pool).unwrap();
        for e in &plan {
            assert_eq!(e.components.len(), 3);
            let mut classes: Vec<usize> = e.components.iter().map(|&i| pool[i].class_id).collect();
            classes.sort();
            classes.dedup();
            assert_eq!(classes.len(), 3);
        }
    }

    #[test]
    fn variable_mode_covers_whole_range() {
        let pool = pool(21, 5);
        let plan = build_mix_plan(&spec(MixMode::VARIABLE_1_TO_4, 2000), &pool).unwrap();
        let mut seen = [0usize; 5];
        for e in &plan {
            seen[e.components.len()] += 1;
        }
        assert_eq!(seen[0], 0);
        assert!(seen[1..].iter().all(|&n| n > 400), "{seen:?}");
    }

    #[test]
    fn same_seed_same_plan() {
        let pool = pool(21, 5);
        let s = spec(MixMode::VARIABLE_1_TO_4, 300);
        assert_eq!(build_mix_plan(&s, &pool).unwrap(), build_mix_plan(&s, &pool).unwrap());
        let other = MixSpec { rng_seed: 43, ..s.clone() };
        assert_ne!(build_mix_plan(&s, &pool).unwrap(), build_mix_plan(&other, &pool).unwrap());
    }

    #[test]
    fn too_few_classes_is_insufficient_pool() {
        let s = MixSpec {
            class_count: 4,
            ..spec(MixMode::VARIABLE_1_TO_4, 10)
        };
        let err = build_mix_plan(&s, &pool(3, 4)).unwrap_err();
        assert!(matches!(err, Error::InsufficientPool(_)));
        assert!(matches!(
            build_mix_plan(&s, &[]).unwrap_err(),
            Error::InsufficientPool(_)
        ));
    }

    #[test]
    fn single_component_passes_through() {
        let x = vec![0.1, -0.5, 0.3, 0.0];
        let m = mix_segments(&[seg(4, x.clone())], 6).unwrap();
        assert_eq!(m.samples, x);
        assert_eq!(m.labels, vec![0, 0, 0, 0, 1, 0]);
    }

    #[test]
    fn single_loud_component_is_scaled_to_peak_limit() {
        let x = vec![0.2, -1.0, 0.5];
        let m = mix_segments(&[seg(0, x.clone())], 1).unwrap();
        for (a, b) in m.samples.iter().zip(&x) {
            assert!((a - b * 0.9).abs() < 1e-15);
        }
    }

    #[test]
    fn opposite_components_cancel_but_keep_label() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.1).sin() * 0.7).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let m = mix_segments(&[seg(2, x), seg(2, neg)], 3).unwrap();
        assert!(m.samples.iter().all(|&s| s == 0.0));
        assert_eq!(m.labels, vec![0, 0, 1]);
    }

    #[test]
    fn three_tones_show_three_dominant_bins() {
        // 1 s at 1 kHz: DFT bin k sits at k Hz.
        let n = 1000;
        let tone = |f: f64| -> Vec<f64> {
            (0..n)
                .map(|i| (2.0 * PI * f * i as f64 / n as f64).sin())
                .collect()
        };
        let m = mix_segments(&[seg(0, tone(50.0)), seg(1, tone(120.0)), seg(2, tone(310.0))], 3)
            .unwrap();
        let mags: Vec<f64> = (0..n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, &s) in m.samples.iter().enumerate() {
                    let a = -2.0 * PI * (k * i) as f64 / n as f64;
                    re += s * a.cos();
                    im += s * a.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect();
        let mut idx: Vec<usize> = (0..mags.len()).collect();
        idx.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]));
        let mut top: Vec<usize> = idx[..3].to_vec();
        top.sort();
        assert_eq!(top, vec![50, 120, 310]);
        assert!(mags[idx[3]] < 1e-6 * mags[idx[2]]);
    }

    #[test]
    fn mismatched_components_are_rejected() {
        let a = seg(0, vec![0.0; 4]);
        let b = seg(1, vec![0.0; 5]);
        assert!(matches!(
            mix_segments(&[a.clone(), b], 2),
            Err(Error::LengthMismatch { .. })
        ));
        let mut c = seg(1, vec![0.0; 4]);
        c.sample_rate = 2000;
        assert!(matches!(mix_segments(&[a, c], 2), Err(Error::RateMismatch { .. })));
        assert!(matches!(mix_segments(&[], 2), Err(Error::EmptyInput(_))));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn component() -> impl Strategy<Value = AudioSegment> {
            (0usize..6, proptest::collection::vec(-1.0f64..1.0, 32))
                .prop_map(|(c, s)| seg(c, s))
        }

        proptest! {
            #[test]
            fn mixing_is_order_independent(
                comps in proptest::collection::vec(component(), 1..5),
                seed in any::<u64>(),
            ) {
                let mut shuffled = comps.clone();
                shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let a = mix_segments(&comps, 6).unwrap();
                let b = mix_segments(&shuffled, 6).unwrap();
                prop_assert_eq!(a.samples, b.samples);
                prop_assert_eq!(a.labels, b.labels);
            }

            #[test]
            fn labels_are_the_component_union_and_peak_is_bounded(
                comps in proptest::collection::vec(component(), 1..5),
            ) {
                let m = mix_segments(&comps, 6).unwrap();
                for c in 0..6 {
                    let present = comps.iter().any(|s| s.class_id == c);
                    prop_assert_eq!(m.labels[c] == 1, present);
                }
                let distinct: std::collections::BTreeSet<usize> =
                    comps.iter().map(|s| s.class_id).collect();
                prop_assert_eq!(m.labels.iter().map(|&l| l as usize).sum::<usize>(), distinct.len());
                prop_assert!(m.samples.iter().all(|s| s.abs() <= PEAK_LIMIT + 1e-12));
            }
        }
    }
}
