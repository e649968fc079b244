//! Labeled window collections with provenance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{
    centered_start, extract_annotated, segment_stream, Annotation, GestureClass, Recording, Window,
    MAX_SHIFT,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Synthetic,
    Augmented,
    Ingested,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Stable identifier, unique within a dataset.
    pub id: u64,
    pub origin: Origin,
    /// Parent window id for augmented windows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Augmentation that produced the window, e.g. `shift:+9`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<String>,
}

/// A window together with where it came from.
///
/// `context`, when present, is the stretch of the parent stream around the
/// window: a recording holding exactly one annotation that covers the window
/// itself. Temporal shifting crops from it.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub window: Window,
    pub provenance: Provenance,
    pub context: Option<Recording>,
}

impl Entry {
    pub fn label(&self) -> GestureClass {
        self.window.label().expect("dataset windows are labeled")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    entries: Vec<Entry>,
    seed: Option<u64>,
}

impl Dataset {
    /// Validates that all windows share length and rate and carry a
    /// ground-truth label, and that ids are unique.
    pub fn new(entries: Vec<Entry>, seed: Option<u64>) -> Result<Self> {
        if let Some(first) = entries.first() {
            let (len, rate) = (first.window.len(), first.window.rate_hz());
            let mut ids = std::collections::HashSet::new();
            for (i, e) in entries.iter().enumerate() {
                if e.window.len() != len || e.window.rate_hz() != rate {
                    return Err(Error::InvalidInput(format!(
                        "window {i} has {} samples @ {} Hz, expected {len} @ {rate} Hz",
                        e.window.len(),
                        e.window.rate_hz()
                    )));
                }
                match e.window.label() {
                    Some(c) if c.is_gesture() => {}
                    other => {
                        return Err(Error::InvalidInput(format!(
                            "window {i} has non ground-truth label {other:?}"
                        )))
                    }
                }
                if !ids.insert(e.provenance.id) {
                    return Err(Error::InvalidInput(format!(
                        "duplicate window id {}",
                        e.provenance.id
                    )));
                }
            }
        }
        Ok(Self { entries, seed })
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Entry> {
        self.entries
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn windows(&self) -> impl Iterator<Item = &Window> {
        self.entries.iter().map(|e| &e.window)
    }

    pub fn labels(&self) -> Vec<GestureClass> {
        self.entries.iter().map(Entry::label).collect()
    }

    pub fn window_len(&self) -> Option<usize> {
        self.entries.first().map(|e| e.window.len())
    }

    pub fn class_counts(&self) -> BTreeMap<GestureClass, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.entries {
            *counts.entry(e.label()).or_insert(0) += 1;
        }
        counts
    }

    /// The entries at `indices`, in that order, with the same seed.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let entries = indices
            .iter()
            .map(|&i| {
                self.entries.get(i).cloned().ok_or_else(|| {
                    Error::InvalidInput(format!("index {i} out of {} entries", self.len()))
                })
            })
            .collect::<Result<_>>()?;
        Self::new(entries, self.seed)
    }

    pub fn next_id(&self) -> u64 {
        self.entries
            .iter()
            .map(|e| e.provenance.id + 1)
            .max()
            .unwrap_or(0)
    }
}

/// How `ingest_recording` cuts a recording into windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IngestMode {
    /// One centered window per annotation, kept with its context so it can
    /// be shifted later.
    Annotated,
    /// Sliding windows every `stride` samples, auto-labeled by overlap.
    Stream { stride: usize },
}

/// Windows of one recording as an ingested dataset.
pub fn ingest_recording(
    recording: &Recording,
    window_len: usize,
    mode: IngestMode,
    user: Option<u32>,
) -> Result<Dataset> {
    let provenance = |id: usize| Provenance {
        id: id as u64,
        origin: Origin::Ingested,
        source: None,
        user,
        seed: None,
        op: None,
    };
    let entries = match mode {
        IngestMode::Annotated => {
            let windows = extract_annotated(recording, window_len)?;
            recording
                .annotations()
                .iter()
                .zip(windows)
                .enumerate()
                .map(|(i, (a, window))| {
                    let start = centered_start(a, window_len) as usize;
                    let lo = a.start.min(start - MAX_SHIFT);
                    let hi = a.end.max(start + window_len + MAX_SHIFT);
                    let context = Recording::new(
                        recording.samples()[lo..hi].to_vec(),
                        vec![Annotation::new(a.start - lo, a.end - lo, a.class)],
                    )?;
                    Ok(Entry {
                        window,
                        provenance: provenance(i),
                        context: Some(context),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        IngestMode::Stream { stride } => segment_stream(recording, window_len, stride)?
            .into_iter()
            .enumerate()
            .map(|(i, window)| Entry {
                window,
                provenance: provenance(i),
                context: None,
            })
            .collect(),
    };
    Dataset::new(entries, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::temporal_shift;
    use crate::signal::Sample;

    fn recording() -> Recording {
        let samples = (0..400)
            .map(|t| Sample::new(t, (t as f64 * 0.3).sin(), 0.1, 1.0))
            .collect();
        Recording::new(
            samples,
            vec![
                Annotation::new(40, 140, GestureClass::O),
                Annotation::new(200, 290, GestureClass::X),
            ],
        )
        .unwrap()
    }

    #[test]
    fn annotated_entries_carry_shiftable_context() {
        let rec = recording();
        let ds = ingest_recording(&rec, 100, IngestMode::Annotated, Some(3)).unwrap();
        assert_eq!(ds.labels(), [GestureClass::O, GestureClass::X]);
        for e in ds.entries() {
            let ctx = e.context.as_ref().unwrap();
            let a = ctx.annotations()[0];
            let s = temporal_shift(ctx, &a, MAX_SHIFT as isize, 100).unwrap();
            let back = temporal_shift(ctx, &a, -(MAX_SHIFT as isize), 100).unwrap();
            assert_eq!(s.samples()[0].t, e.window.samples()[0].t + MAX_SHIFT as u64);
            assert_eq!(
                back.samples()[0].t + MAX_SHIFT as u64,
                e.window.samples()[0].t
            );
            assert_eq!(e.provenance.origin, Origin::Ingested);
            assert_eq!(e.provenance.user, Some(3));
        }
    }

    #[test]
    fn stream_mode_counts_and_labels() {
        let rec = recording();
        let ds = ingest_recording(&rec, 100, IngestMode::Stream { stride: 25 }, None).unwrap();
        assert_eq!(ds.len(), (400 - 100) / 25 + 1);
        assert!(ds.entries().iter().all(|e| e.context.is_none()));
        assert_eq!(ds.entries()[0].label(), GestureClass::Random);
        assert!(ds.labels().contains(&GestureClass::O));
    }

    #[test]
    fn subset_keeps_order_and_rejects_bad_index() {
        let rec = recording();
        let ds = ingest_recording(&rec, 100, IngestMode::Stream { stride: 25 }, None).unwrap();
        let s = ds.subset(&[3, 1]).unwrap();
        assert_eq!(s.entries()[0], ds.entries()[3]);
        assert!(ds.subset(&[99]).is_err());
    }
}
