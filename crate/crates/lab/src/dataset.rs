//! Dataset files: CSV with a versioned first line carrying (N, C, dim,
//! split), then one row per sample with its features, annotated label,
//! hidden status and hidden true class.
//!
//! ```text
//! # olnl-dataset v1 n=3 classes=2 dim=2 split=train
//! x0,x1,label,status,true_class
//! 0.25,-1.5,0,clean,0
//! ```

use std::path::Path;

use olnl_core::{LabeledDataset, NoiseStatus, Sample, Split};

use crate::error::{LabError, Result};
use crate::fsio;

pub const MAGIC: &str = "olnl-dataset";
pub const VERSION: u32 = 1;

fn status_name(s: NoiseStatus) -> &'static str {
    match s {
        NoiseStatus::Clean => "clean",
        NoiseStatus::ClosedNoise => "closed-noise",
        NoiseStatus::OpenNoise => "open-noise",
    }
}

fn parse_status(s: &str) -> Option<NoiseStatus> {
    match s {
        "clean" => Some(NoiseStatus::Clean),
        "closed-noise" => Some(NoiseStatus::ClosedNoise),
        "open-noise" => Some(NoiseStatus::OpenNoise),
        _ => None,
    }
}

fn split_name(s: Split) -> &'static str {
    match s {
        Split::Train => "train",
        Split::Test => "test",
    }
}

pub fn encode(d: &LabeledDataset) -> Result<Vec<u8>> {
    let mut out = format!(
        "# {MAGIC} v{VERSION} n={} classes={} dim={} split={}\n",
        d.len(),
        d.classes,
        d.dim,
        split_name(d.split)
    )
    .into_bytes();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..d.dim).map(|i| format!("x{i}")).collect();
    header.extend(["label", "status", "true_class"].map(String::from));
    let bad = |e: csv::Error| LabError::Invalid(format!("cannot encode dataset: {e}"));
    w.write_record(&header).map_err(bad)?;
    for s in &d.samples {
        // `{}` prints the shortest decimal that parses back to the same bits
        let mut row: Vec<String> = s.features.iter().map(|x| format!("{x}")).collect();
        row.push(s.label.to_string());
        row.push(status_name(s.status).to_string());
        row.push(s.true_class.to_string());
        w.write_record(&row).map_err(bad)?;
    }
    out.extend(w.into_inner().map_err(|e| LabError::Invalid(e.to_string()))?);
    Ok(out)
}

pub fn write(path: &Path, d: &LabeledDataset) -> Result<()> {
    d.validate()?;
    fsio::write_atomic(path, &encode(d)?)
}

struct Header {
    n: usize,
    classes: usize,
    dim: usize,
    split: Split,
}

fn parse_header(line: &str, path: &Path) -> Result<Header> {
    let bad = |m: &str| LabError::format(path, m);
    let mut words = line.strip_prefix('#').ok_or_else(|| bad("missing dataset header line"))?.split_whitespace();
    if words.next() != Some(MAGIC) {
        return Err(bad("not an olnl dataset file"));
    }
    match words.next() {
        Some(v) if v == format!("v{VERSION}") => {}
        Some(v) => return Err(bad(&format!("unsupported dataset version {v}"))),
        None => return Err(bad("missing dataset version")),
    }
    let (mut n, mut classes, mut dim, mut split) = (None, None, None, None);
    for w in words {
        let (k, v) = w.split_once('=').ok_or_else(|| bad(&format!("bad header field `{w}`")))?;
        let num = || v.parse::<usize>().map_err(|_| bad(&format!("bad value for {k}: `{v}`")));
        match k {
            "n" => n = Some(num()?),
            "classes" => classes = Some(num()?),
            "dim" => dim = Some(num()?),
            "split" => {
                split = Some(match v {
                    "train" => Split::Train,
                    "test" => Split::Test,
                    _ => return Err(bad(&format!("unknown split `{v}`"))),
                })
            }
            _ => return Err(bad(&format!("unknown header field `{k}`"))),
        }
    }
    match (n, classes, dim, split) {
        (Some(n), Some(classes), Some(dim), Some(split)) => Ok(Header { n, classes, dim, split }),
        _ => Err(bad("header needs n, classes, dim and split")),
    }
}

pub fn decode(text: &str, path: &Path) -> Result<LabeledDataset> {
    let (first, rest) = text.split_once('\n').ok_or_else(|| LabError::format(path, "empty dataset file"))?;
    let h = parse_header(first.trim_end(), path)?;
    let mut r = csv::Reader::from_reader(rest.as_bytes());
    let cols = r.headers().map_err(|e| LabError::format(path, e))?.len();
    if cols != h.dim + 3 {
        return Err(LabError::format(path, format!("expected {} columns, found {cols}", h.dim + 3)));
    }
    let mut samples = Vec::with_capacity(h.n);
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| LabError::format(path, e))?;
        let row = i + 1;
        let bad = |what: &str| LabError::format(path, format!("row {row}: bad {what}"));
        let features = (0..h.dim)
            .map(|j| rec[j].parse::<f64>().map_err(|_| bad("feature")))
            .collect::<Result<Vec<f64>>>()?;
        let label = rec[h.dim].parse().map_err(|_| bad("label"))?;
        let status = parse_status(&rec[h.dim + 1]).ok_or_else(|| bad("status"))?;
        let true_class = rec[h.dim + 2].parse().map_err(|_| bad("true class"))?;
        samples.push(Sample { features, label, true_class, status });
    }
    if samples.len() != h.n {
        return Err(LabError::format(path, format!("header says {} samples, found {}", h.n, samples.len())));
    }
    let d = LabeledDataset { classes: h.classes, dim: h.dim, split: h.split, samples };
    d.validate().map_err(|e| LabError::format(path, e))?;
    Ok(d)
}

pub fn read(path: &Path) -> Result<LabeledDataset> {
    decode(&fsio::read_to_string(path)?, path)
}
