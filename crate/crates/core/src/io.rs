//! File formats.
//!
//! * Recording CSV: `t,ax,ay,az[,label]`, one row per sample. Labels are
//!   `O`, `X`, `RANDOM` or empty for rest; each run of equal non-empty labels
//!   is one annotation. Annotations may instead come from a JSON sidecar
//!   holding a list of `{start, end, class}`.
//! * Dataset CSV: `window,part,t,ax,ay,az,label`. `part` is `w` for window
//!   samples and `c` for the optional context stream around the window; on
//!   context rows the label marks the annotated span. The provenance sidecar
//!   holds the dataset seed, the sampling rate and one record per window.
//! * Feature CSV: `window,label,<feature columns>`.
//!
//! Floats are written in shortest round-trip form, so a write followed by a
//! read gives back bit-identical values.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Entry, Provenance};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::signal::{Annotation, GestureClass, Recording, Sample, Window, DEFAULT_RATE_HZ};

fn label_str(c: Option<GestureClass>) -> &'static str {
    c.map_or("", GestureClass::as_str)
}

fn parse_label(s: &str) -> Result<Option<GestureClass>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        Ok(Some(s.parse()?))
    }
}

fn parse<T: std::str::FromStr>(s: &str, what: &str, row: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("row {row}: bad {what} {s:?}")))
}

fn check_header(r: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = r.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Format(format!(
            "expected header {:?}, got {:?}",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

/// Per-sample labels from annotations.
fn sample_labels(n: usize, annotations: &[Annotation]) -> Vec<Option<GestureClass>> {
    let mut labels = vec![None; n];
    for a in annotations {
        for l in &mut labels[a.start..a.end.min(n)] {
            *l = Some(a.class);
        }
    }
    labels
}

/// Annotations from runs of equal per-sample labels.
fn runs_to_annotations(labels: &[Option<GestureClass>]) -> Vec<Annotation> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let Some(c) = labels[i] else {
            i += 1;
            continue;
        };
        let start = i;
        while i < labels.len() && labels[i] == Some(c) {
            i += 1;
        }
        out.push(Annotation::new(start, i, c));
    }
    out
}

fn write_samples<W: Write>(
    w: &mut csv::Writer<W>,
    prefix: &[String],
    samples: &[Sample],
    labels: &[Option<GestureClass>],
) -> Result<()> {
    for (s, l) in samples.iter().zip(labels) {
        let mut rec: Vec<String> = prefix.to_vec();
        rec.extend([
            s.t.to_string(),
            s.ax.to_string(),
            s.ay.to_string(),
            s.az.to_string(),
            label_str(*l).to_owned(),
        ]);
        w.write_record(&rec)?;
    }
    Ok(())
}

pub fn write_recording_csv<W: Write>(out: W, rec: &Recording) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "ax", "ay", "az", "label"])?;
    let labels = sample_labels(rec.len(), rec.annotations());
    write_samples(&mut w, &[], rec.samples(), &labels)?;
    w.flush()?;
    Ok(())
}

/// Reads a recording. Annotations come from the label column when present,
/// otherwise from `sidecar`; passing both is an error.
pub fn read_recording_csv<R: Read>(input: R, sidecar: Option<&str>) -> Result<Recording> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = r.headers()?.clone();
    let labeled = header.len() == 5;
    if labeled {
        check_header(&header, &["t", "ax", "ay", "az", "label"])?;
    } else {
        check_header(&header, &["t", "ax", "ay", "az"])?;
    }
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let n = i + 2;
        if row.len() < 4 || row.len() > 5 {
            return Err(Error::Format(format!("row {n}: expected 4 or 5 fields")));
        }
        samples.push(Sample::new(
            parse(&row[0], "t", n)?,
            parse(&row[1], "ax", n)?,
            parse(&row[2], "ay", n)?,
            parse(&row[3], "az", n)?,
        ));
        labels.push(if labeled {
            parse_label(row.get(4).unwrap_or(""))?
        } else {
            None
        });
    }
    let from_column = runs_to_annotations(&labels);
    let annotations = match sidecar {
        Some(_) if !from_column.is_empty() => {
            return Err(Error::Format(
                "annotations given both in the label column and a sidecar".into(),
            ));
        }
        Some(json) => serde_json::from_str::<Vec<Annotation>>(json)?,
        None => from_column,
    };
    Recording::new(samples, annotations)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: Option<u64>,
    pub rate_hz: f64,
    pub windows: Vec<Provenance>,
}

pub const DATASET_HEADER: [&str; 7] = ["window", "part", "t", "ax", "ay", "az", "label"];

/// Writes the dataset CSV and returns the provenance sidecar.
pub fn write_dataset_csv<W: Write>(out: W, ds: &Dataset) -> Result<DatasetMeta> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DATASET_HEADER)?;
    for e in ds.entries() {
        let id = e.provenance.id.to_string();
        let wl = vec![e.window.label(); e.window.len()];
        write_samples(&mut w, &[id.clone(), "w".into()], e.window.samples(), &wl)?;
        if let Some(ctx) = &e.context {
            let cl = sample_labels(ctx.len(), ctx.annotations());
            write_samples(&mut w, &[id, "c".into()], ctx.samples(), &cl)?;
        }
    }
    w.flush()?;
    Ok(DatasetMeta {
        seed: ds.seed(),
        rate_hz: ds
            .entries()
            .first()
            .map_or(DEFAULT_RATE_HZ, |e| e.window.rate_hz()),
        windows: ds.entries().iter().map(|e| e.provenance.clone()).collect(),
    })
}

#[derive(Default)]
struct Parts {
    window: Vec<Sample>,
    label: Option<GestureClass>,
    context: Vec<Sample>,
    context_labels: Vec<Option<GestureClass>>,
}

pub fn read_dataset_csv<R: Read>(input: R, meta: &DatasetMeta) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(input);
    check_header(r.headers()?, &DATASET_HEADER)?;
    let mut parts: std::collections::HashMap<u64, Parts> = std::collections::HashMap::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let n = i + 2;
        if row.len() != DATASET_HEADER.len() {
            return Err(Error::Format(format!("row {n}: expected 7 fields")));
        }
        let id: u64 = parse(&row[0], "window id", n)?;
        let s = Sample::new(
            parse(&row[2], "t", n)?,
            parse(&row[3], "ax", n)?,
            parse(&row[4], "ay", n)?,
            parse(&row[5], "az", n)?,
        );
        let label = parse_label(&row[6])?;
        let p = parts.entry(id).or_default();
        match row[1].trim() {
            "w" => {
                p.window.push(s);
                p.label = label;
            }
            "c" => {
                p.context.push(s);
                p.context_labels.push(label);
            }
            other => return Err(Error::Format(format!("row {n}: unknown part {other:?}"))),
        }
    }
    let mut entries = Vec::with_capacity(meta.windows.len());
    for prov in &meta.windows {
        let p = parts.remove(&prov.id).ok_or_else(|| {
            Error::Format(format!(
                "window {} listed in provenance but not in CSV",
                prov.id
            ))
        })?;
        let window = Window::new(p.window, meta.rate_hz, p.label)?;
        let context = if p.context.is_empty() {
            None
        } else {
            Some(Recording::new(
                p.context,
                runs_to_annotations(&p.context_labels),
            )?)
        };
        entries.push(Entry {
            window,
            provenance: prov.clone(),
            context,
        });
    }
    if let Some(id) = parts.keys().min() {
        return Err(Error::Format(format!(
            "window {id} in CSV has no provenance record"
        )));
    }
    Dataset::new(entries, meta.seed)
}

pub fn write_feature_csv<W: Write>(
    out: W,
    names: &[String],
    ids: &[u64],
    labels: &[Option<GestureClass>],
    rows: &[FeatureVector],
) -> Result<()> {
    if ids.len() != rows.len() || labels.len() != rows.len() {
        return Err(Error::InvalidInput(
            "ids, labels and rows differ in length".into(),
        ));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["window".to_owned(), "label".to_owned()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for ((id, l), r) in ids.iter().zip(labels).zip(rows) {
        if r.len() != names.len() {
            return Err(Error::Shape {
                expected: names.len(),
                got: r.len(),
            });
        }
        let mut rec = vec![id.to_string(), label_str(*l).to_owned()];
        rec.extend(r.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub ids: Vec<u64>,
    pub labels: Vec<Option<GestureClass>>,
    pub rows: Vec<FeatureVector>,
}

pub fn read_feature_csv<R: Read>(input: R) -> Result<FeatureTable> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.len() < 3 || &header[0] != "window" || &header[1] != "label" {
        return Err(Error::Format(
            "feature CSV header must start with window,label".into(),
        ));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();
    let mut t = FeatureTable {
        names,
        ids: Vec::new(),
        labels: Vec::new(),
        rows: Vec::new(),
    };
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let n = i + 2;
        if row.len() != header.len() {
            return Err(Error::Format(format!("row {n}: wrong field count")));
        }
        t.ids.push(parse(&row[0], "window id", n)?);
        t.labels.push(parse_label(&row[1])?);
        t.rows.push(
            row.iter()
                .skip(2)
                .map(|v| parse(v, "feature value", n))
                .collect::<Result<_>>()?,
        );
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_dataset, SynthParams};

    fn recording() -> Recording {
        let samples: Vec<Sample> = (0..40)
            .map(|t| Sample::new(t, t as f64 * 0.1, -0.25, 1.0 / 3.0))
            .collect();
        Recording::new(
            samples,
            vec![
                Annotation::new(5, 12, GestureClass::O),
                Annotation::new(12, 20, GestureClass::X),
            ],
        )
        .unwrap()
    }

    #[test]
    fn recording_round_trip() {
        let rec = recording();
        let mut buf = Vec::new();
        write_recording_csv(&mut buf, &rec).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,ax,ay,az,label\n"));
        let back = read_recording_csv(buf.as_slice(), None).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn recording_sidecar_and_unlabeled() {
        let csv = "t,ax,ay,az\n0,0,0,1\n1,0.5,0,1\n2,0,0,1\n";
        let r = read_recording_csv(csv.as_bytes(), None).unwrap();
        assert!(r.annotations().is_empty());
        let side = r#"[{"start":1,"end":3,"class":"X"}]"#;
        let r = read_recording_csv(csv.as_bytes(), Some(side)).unwrap();
        assert_eq!(r.annotations(), [Annotation::new(1, 3, GestureClass::X)]);
        let labeled = "t,ax,ay,az,label\n0,0,0,1,O\n1,0,0,1,\n";
        assert!(read_recording_csv(labeled.as_bytes(), Some(side)).is_err());
        assert!(read_recording_csv("a,b\n1,2\n".as_bytes(), None).is_err());
        assert!(read_recording_csv("t,ax,ay,az\n0,zz,0,1\n".as_bytes(), None).is_err());
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let ds = synth_dataset(2, 2, &SynthParams::default().with_seed(3)).unwrap();
        assert!(ds.entries().iter().any(|e| e.context.is_some()));
        let mut buf = Vec::new();
        let meta = write_dataset_csv(&mut buf, &ds).unwrap();
        let json = serde_json::to_string(&meta).unwrap();
        let meta2: DatasetMeta = serde_json::from_str(&json).unwrap();
        let back = read_dataset_csv(buf.as_slice(), &meta2).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn feature_round_trip() {
        let names = vec!["Mean[X]".to_owned(), "Kurtosis[Y]".to_owned()];
        let rows = vec![vec![0.1, -1e-300], vec![f64::MAX, 1.0 / 7.0]];
        let labels = vec![Some(GestureClass::O), None];
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &names, &[4, 9], &labels, &rows).unwrap();
        let t = read_feature_csv(buf.as_slice()).unwrap();
        assert_eq!(t.names, names);
        assert_eq!(t.ids, [4, 9]);
        assert_eq!(t.labels, labels);
        assert_eq!(t.rows, rows);
    }
}
