//! Datasets: seeded Gaussian blobs, label-first CSV and IDX ingestion.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{EstError, Result};
use crate::tensor::Tensor;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Labelled samples, each an `n_tokens x d_model` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n_tokens: usize,
    pub d_model: usize,
    pub n_classes: usize,
    pub inputs: Vec<Tensor>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        n_tokens: usize,
        d_model: usize,
        n_classes: usize,
        inputs: Vec<Tensor>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if inputs.is_empty() {
            return Err(EstError::Input(
                "dataset must hold at least one sample".into(),
            ));
        }
        if inputs.len() != labels.len() {
            return Err(EstError::Input(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(bad) = inputs.iter().find(|x| x.shape() != [n_tokens, d_model]) {
            return Err(EstError::Dimension {
                op: "Dataset",
                left: bad.shape().to_vec(),
                right: vec![n_tokens, d_model],
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(EstError::Input(format!(
                "label {l} outside [0, {n_classes})"
            )));
        }
        Ok(Self {
            n_tokens,
            d_model,
            n_classes,
            inputs,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Seeded subset of at most `n` samples, kept in original order.
    pub fn subsample(&self, n: usize, seed: u64) -> Dataset {
        if n >= self.len() {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        idx.truncate(n);
        idx.sort_unstable();
        Dataset {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            ..*self
        }
    }
}

/// Spacing between class means, in units of the per-sample noise std.
pub const CLASS_SEPARATION: f64 = 6.0;
const TOKEN_JITTER: f64 = 0.25;
const MEANS_SEED: u64 = 0x5eed_0fc1_a55e_5000;

/// Class means depend only on `(n_classes, d_model)`, so train and test sets
/// drawn with different seeds share one distribution.
pub fn class_means(n_classes: usize, d_model: usize) -> Vec<Vec<f64>> {
    let scale = CLASS_SEPARATION / std::f64::consts::SQRT_2;
    if n_classes <= d_model {
        return (0..n_classes)
            .map(|c| {
                let mut m = vec![0.0; d_model];
                m[c] = scale;
                m
            })
            .collect();
    }
    // More classes than axes: random directions, rejecting any mean closer
    // than 4 sigma to an earlier one.
    let mut rng = ChaCha8Rng::seed_from_u64(MEANS_SEED);
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(n_classes);
    let mut tries = 0;
    while means.len() < n_classes {
        let cand: Vec<f64> = (0..d_model)
            .map(|_| CLASS_SEPARATION * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let far = means.iter().all(|m| {
            m.iter()
                .zip(&cand)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                >= 4.0
        });
        tries += 1;
        if far || tries > 10_000 {
            means.push(cand);
        }
    }
    means
}

/// Gaussian class blobs: each sample draws one point around its class mean
/// (unit std) and broadcasts it over the tokens with small per-token jitter.
/// Samples come out class-interleaved.
pub fn gen_synthetic(
    n_per_class: usize,
    n_classes: usize,
    n_tokens: usize,
    d_model: usize,
    seed: u64,
) -> Result<Dataset> {
    if n_per_class == 0 || n_classes == 0 || n_tokens == 0 || d_model == 0 {
        return Err(EstError::Config(
            "gen_synthetic counts must all be >= 1".into(),
        ));
    }
    let means = class_means(n_classes, d_model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, TOKEN_JITTER).expect("positive std");
    let mut inputs = Vec::with_capacity(n_per_class * n_classes);
    let mut labels = Vec::with_capacity(n_per_class * n_classes);
    for _ in 0..n_per_class {
        for (c, mean) in means.iter().enumerate() {
            let center: Vec<f64> = mean
                .iter()
                .map(|m| m + Distribution::<f64>::sample(&StandardNormal, &mut rng))
                .collect();
            let mut values = Vec::with_capacity(n_tokens * d_model);
            for _ in 0..n_tokens {
                values.extend(center.iter().map(|&v| v + jitter.sample(&mut rng)));
            }
            inputs.push(Tensor::new(vec![n_tokens, d_model], values)?);
            labels.push(c);
        }
    }
    Dataset::new(n_tokens, d_model, n_classes, inputs, labels)
}

/// One row per sample: label, then the `n_tokens * d_model` values row-major.
/// Values use the shortest exact decimal form, so reading back is lossless.
pub fn write_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    let mut record = Vec::with_capacity(1 + data.n_tokens * data.d_model);
    for (x, &label) in data.inputs.iter().zip(&data.labels) {
        record.clear();
        record.push(label.to_string());
        record.extend(x.values().iter().map(|v| v.to_string()));
        w.write_record(&record).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> EstError {
    EstError::Io(std::io::Error::other(e))
}

/// Reads a label-first CSV. `n_classes` defaults to `max label + 1`.
pub fn load_csv(
    path: &Path,
    n_tokens: usize,
    d_model: usize,
    n_classes: Option<usize>,
) -> Result<Dataset> {
    let file = File::open(path)?;
    read_csv(BufReader::new(file), path, n_tokens, d_model, n_classes)
}

pub fn read_csv<R: Read>(
    reader: R,
    path: &Path,
    n_tokens: usize,
    d_model: usize,
    n_classes: Option<usize>,
) -> Result<Dataset> {
    let parse_err = |line: u64, msg: String| EstError::Parse {
        path: path.to_path_buf(),
        location: format!("line {line}"),
        msg,
    };
    let width = n_tokens * d_model;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width + 1 {
            return Err(parse_err(
                line,
                format!(
                    "expected {} fields (label + {width} values), found {}",
                    width + 1,
                    rec.len()
                ),
            ));
        }
        let label: usize = rec[0]
            .parse()
            .map_err(|e| parse_err(line, format!("bad label {:?}: {e}", &rec[0])))?;
        let values = rec
            .iter()
            .skip(1)
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("bad value {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        inputs.push(Tensor::new(vec![n_tokens, d_model], values)?);
        labels.push(label);
    }
    if inputs.is_empty() {
        return Err(parse_err(0, "no samples".into()));
    }
    let n_classes = n_classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    Dataset::new(n_tokens, d_model, n_classes, inputs, labels).map_err(|e| match e {
        EstError::Input(msg) => parse_err(0, msg),
        other => other,
    })
}

fn read_u32_be(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| EstError::Parse {
            path: path.to_path_buf(),
            location: format!("offset {offset}"),
            msg: "truncated header".into(),
        })
}

/// IDX image/label pair. Pixels are scaled to `[0, 1]`, and each image is
/// cut into `n_tokens` consecutive row blocks of `rows * cols / n_tokens`
/// pixels.
pub fn load_idx(image_path: &Path, label_path: &Path, n_tokens: usize) -> Result<Dataset> {
    let images = std::fs::read(image_path)?;
    let labels = std::fs::read(label_path)?;
    parse_idx(&images, image_path, &labels, label_path, n_tokens)
}

pub fn parse_idx(
    images: &[u8],
    image_path: &Path,
    labels: &[u8],
    label_path: &Path,
    n_tokens: usize,
) -> Result<Dataset> {
    let err = |path: &Path, offset: usize, msg: String| EstError::Parse {
        path: path.to_path_buf(),
        location: format!("offset {offset}"),
        msg,
    };
    let magic = read_u32_be(images, 0, image_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(err(image_path, 0, format!("bad image magic {magic:#010x}")));
    }
    let magic = read_u32_be(labels, 0, label_path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(err(label_path, 0, format!("bad label magic {magic:#010x}")));
    }
    let count = read_u32_be(images, 4, image_path)? as usize;
    let rows = read_u32_be(images, 8, image_path)? as usize;
    let cols = read_u32_be(images, 12, image_path)? as usize;
    let n_labels = read_u32_be(labels, 4, label_path)? as usize;
    if count != n_labels {
        return Err(err(
            label_path,
            4,
            format!("{n_labels} labels for {count} images"),
        ));
    }
    let pixels = rows * cols;
    if n_tokens == 0 || pixels == 0 || !pixels.is_multiple_of(n_tokens) {
        return Err(EstError::Config(format!(
            "{rows}x{cols} images cannot be split into {n_tokens} equal tokens"
        )));
    }
    let body = &images[16..];
    if body.len() < count * pixels {
        return Err(err(
            image_path,
            16 + body.len(),
            "truncated pixel data".into(),
        ));
    }
    let label_body = &labels[8..];
    if label_body.len() < count {
        return Err(err(
            label_path,
            8 + label_body.len(),
            "truncated label data".into(),
        ));
    }
    let d_model = pixels / n_tokens;
    let inputs = body
        .chunks_exact(pixels)
        .take(count)
        .map(|img| {
            Tensor::new(
                vec![n_tokens, d_model],
                img.iter().map(|&p| f64::from(p) / 255.0).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = label_body[..count].iter().map(|&l| l as usize).collect();
    let n_classes = labels.iter().max().map_or(1, |m| m + 1);
    Dataset::new(n_tokens, d_model, n_classes, inputs, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn p() -> PathBuf {
        PathBuf::from("mem.csv")
    }

    #[test]
    fn minimal_dataset() {
        let d = gen_synthetic(1, 1, 2, 3, 0).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.labels, vec![0]);
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(gen_synthetic(0, 1, 1, 1, 0).is_err());
        assert!(gen_synthetic(1, 1, 0, 1, 0).is_err());
    }

    #[test]
    fn deterministic_bytes() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&gen_synthetic(5, 3, 4, 8, 42).unwrap(), &mut a).unwrap();
        write_csv(&gen_synthetic(5, 3, 4, 8, 42).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let mut c = Vec::new();
        write_csv(&gen_synthetic(5, 3, 4, 8, 43).unwrap(), &mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn nearest_mean_classifier_separates_blobs() {
        // Oracle: class centroids estimated from a training draw, then
        // nearest-centroid classification of token-pooled test inputs.
        for (classes, dm) in [(3, 8), (5, 3)] {
            let train = gen_synthetic(200, classes, 4, dm, 1).unwrap();
            let test = gen_synthetic(200, classes, 4, dm, 2).unwrap();
            let pool = |x: &Tensor| x.mean_rows().unwrap().into_values();
            let mut centroids = vec![vec![0.0; dm]; classes];
            let mut counts = vec![0usize; classes];
            for (x, &l) in train.inputs.iter().zip(&train.labels) {
                for (c, v) in centroids[l].iter_mut().zip(pool(x)) {
                    *c += v;
                }
                counts[l] += 1;
            }
            for (c, n) in centroids.iter_mut().zip(&counts) {
                c.iter_mut().for_each(|v| *v /= *n as f64);
            }
            let correct = test
                .inputs
                .iter()
                .zip(&test.labels)
                .filter(|(x, &l)| {
                    let px = pool(x);
                    let dist =
                        |c: &Vec<f64>| c.iter().zip(&px).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                    let best = (0..classes)
                        .min_by(|&a, &b| dist(&centroids[a]).total_cmp(&dist(&centroids[b])))
                        .unwrap();
                    best == l
                })
                .count();
            let acc = correct as f64 / test.len() as f64;
            assert!(acc >= 0.99, "{classes} classes in {dm}d: {acc}");
        }
    }

    #[test]
    fn csv_direct_read() {
        let d = read_csv("2,0.5,0.5\n".as_bytes(), &p(), 1, 2, None).unwrap();
        assert_eq!(d.labels, vec![2]);
        assert_eq!(d.inputs[0].values(), &[0.5, 0.5]);
        assert_eq!(d.n_classes, 3);
    }

    #[test]
    fn csv_errors_carry_line() {
        let err = read_csv("0,1,2\n1,3\n".as_bytes(), &p(), 1, 2, None).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = read_csv("0,1,x\n".as_bytes(), &p(), 1, 2, None).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = read_csv("3,1,1\n".as_bytes(), &p(), 1, 2, Some(2)).unwrap_err();
        assert!(matches!(err, EstError::Parse { .. }));
    }

    #[test]
    fn csv_round_trip() {
        let d = gen_synthetic(10, 3, 4, 8, 7).unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &p(), 4, 8, Some(3)).unwrap();
        assert_eq!(back.labels, d.labels);
        for (a, b) in back.inputs.iter().zip(&d.inputs) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() <= 1e-9);
            }
        }
    }

    fn idx_files(magic_img: u32, magic_lbl: u32) -> (Vec<u8>, Vec<u8>) {
        let mut img = Vec::new();
        for v in [magic_img, 2, 2, 2] {
            img.extend(v.to_be_bytes());
        }
        img.extend([0u8, 255, 51, 102, 255, 255, 0, 0]);
        let mut lbl = Vec::new();
        for v in [magic_lbl, 2] {
            lbl.extend(v.to_be_bytes());
        }
        lbl.extend([7u8, 1]);
        (img, lbl)
    }

    #[test]
    fn idx_parses_and_scales() {
        let (img, lbl) = idx_files(IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC);
        let d = parse_idx(&img, &p(), &lbl, &p(), 2).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.labels, vec![7, 1]);
        assert_eq!(d.n_classes, 8);
        assert_eq!(d.inputs[0].shape(), &[2, 2]);
        assert_eq!(d.inputs[0].values(), &[0.0, 1.0, 0.2, 0.4]);
    }

    #[test]
    fn idx_wrong_magic_rejected() {
        let (img, lbl) = idx_files(IDX_LABELS_MAGIC, IDX_LABELS_MAGIC);
        assert!(parse_idx(&img, &p(), &lbl, &p(), 2).is_err());
        let (img, lbl) = idx_files(IDX_IMAGES_MAGIC, IDX_IMAGES_MAGIC);
        assert!(parse_idx(&img, &p(), &lbl, &p(), 2).is_err());
        let (img, lbl) = idx_files(0x0000_0802, IDX_LABELS_MAGIC);
        assert!(parse_idx(&img, &p(), &lbl, &p(), 2).is_err());
    }

    #[test]
    fn idx_truncated_rejected() {
        let (mut img, lbl) = idx_files(IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC);
        img.truncate(20);
        let err = parse_idx(&img, &p(), &lbl, &p(), 2).unwrap_err();
        assert!(err.to_string().contains("offset"), "{err}");
    }
}
