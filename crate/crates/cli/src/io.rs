//! Tensors as JSON, parameter files, CSV datasets and JSONL metrics.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use paralens::learner::Example;
use paralens::{Port, Rig, Shape, Tensor};

use crate::config::RigName;

/// Row-major data; Z2 entries are written as 0 and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorJson {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl TensorJson {
    pub fn from_tensor(t: &Tensor) -> TensorJson {
        let data = match (t.reals(), t.bits()) {
            (Some(r), _) => r.to_vec(),
            (_, Some(b)) => b.iter().map(|&x| f64::from(u8::from(x))).collect(),
            _ => unreachable!("a tensor is real or boolean"),
        };
        TensorJson {
            shape: t.shape().dims().to_vec(),
            data,
        }
    }

    pub fn to_tensor(&self, rig: Rig) -> Result<Tensor> {
        let shape = Shape::new(self.shape.clone());
        Ok(match rig {
            Rig::Real => Tensor::from_reals(shape, self.data.clone())?,
            Rig::Z2 => Tensor::from_bits(
                shape,
                self.data.iter().map(|&v| bit(v)).collect::<Result<_>>()?,
            )?,
        })
    }
}

fn bit(v: f64) -> Result<bool> {
    match v {
        0.0 => Ok(false),
        1.0 => Ok(true),
        _ => bail!("Z2 value must be 0 or 1, got {v}"),
    }
}

pub fn tensors_from_json(ts: &[TensorJson], port: &Port, what: &str) -> Result<Vec<Tensor>> {
    let out = ts
        .iter()
        .map(|t| t.to_tensor(port.rig()))
        .collect::<Result<Vec<_>>>()?;
    port.check(&out, what)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub rig: RigName,
    pub params: Vec<TensorJson>,
}

pub fn write_params(path: &Path, rig: RigName, params: &[Tensor]) -> Result<()> {
    let file = ParamsFile {
        rig,
        params: params.iter().map(TensorJson::from_tensor).collect(),
    };
    write_json(path, &file)
}

pub fn read_params(path: &Path, port: &Port) -> Result<Vec<Tensor>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading parameters {}", path.display()))?;
    let file: ParamsFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if Rig::from(file.rig) != port.rig() {
        bail!(
            "{}: parameters are over {}, the model over {}",
            path.display(),
            Rig::from(file.rig),
            port.rig()
        );
    }
    tensors_from_json(&file.params, port, "parameters").with_context(|| path.display().to_string())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// One JSON object per line.
pub struct Jsonl(BufWriter<File>);

impl Jsonl {
    pub fn create(path: &Path) -> Result<Jsonl> {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Jsonl(BufWriter::new(f)))
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.0, record)?;
        self.0.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        Ok(self.0.flush()?)
    }
}

/// Reads a CSV with a header: `x_*` columns form the input vector and
/// `y_*` columns the label vector, each in column order. Other columns
/// are an error.
pub fn read_dataset(path: &Path, rig: Rig) -> Result<Vec<Example>> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("reading dataset {}", path.display()))?;
    let header = rdr.headers()?.clone();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, h) in header.iter().enumerate() {
        let h = h.trim();
        if h.starts_with("x_") {
            xs.push(i);
        } else if h.starts_with("y_") {
            ys.push(i);
        } else {
            bail!("{}: column `{h}` is neither x_ nor y_", path.display());
        }
    }
    if xs.is_empty() || ys.is_empty() {
        bail!("{}: need at least one x_ and one y_ column", path.display());
    }
    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: row {}", path.display(), r + 1))?;
        let field = |c: usize| -> Result<f64> {
            let s = rec.get(c).unwrap_or("").trim();
            let v: f64 = s.parse().map_err(|_| {
                anyhow!(
                    "{}: row {}, column `{}`: not a number: `{s}`",
                    path.display(),
                    r + 1,
                    &header[c]
                )
            })?;
            if rig == Rig::Z2 {
                bit(v).with_context(|| {
                    format!("{}: row {}, column `{}`", path.display(), r + 1, &header[c])
                })?;
            }
            Ok(v)
        };
        let vector = |cols: &[usize]| -> Result<Tensor> {
            let v = cols.iter().map(|&c| field(c)).collect::<Result<Vec<_>>>()?;
            TensorJson {
                shape: vec![v.len()],
                data: v,
            }
            .to_tensor(rig)
        };
        out.push(Example {
            input: vec![vector(&xs)?],
            label: vec![vector(&ys)?],
        });
    }
    if out.is_empty() {
        bail!("{}: dataset has no rows", path.display());
    }
    Ok(out)
}
