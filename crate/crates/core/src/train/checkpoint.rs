//! Checkpoint layout: one JSON header line, `\n`, then every tensor's values
//! as little-endian f64 in header order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LoraConfig, ParamSet, TinyLM, TrainError};

pub const CHECKPOINT_FORMAT: &str = "tinylm-f64le-v1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    vocab_size: usize,
    hidden: usize,
    lora: Option<LoraConfig>,
    tensors: Vec<TensorHeader>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorHeader {
    name: String,
    shape: [usize; 2],
}

fn bad(detail: impl Into<String>) -> TrainError {
    TrainError::Format {
        what: "checkpoint",
        detail: detail.into(),
    }
}

pub fn write_checkpoint<W: Write>(model: &TinyLM, mut out: W) -> Result<(), TrainError> {
    let header = Header {
        format: CHECKPOINT_FORMAT.to_owned(),
        vocab_size: model.vocab_size,
        hidden: model.hidden,
        lora: model.lora_config(),
        tensors: model
            .params
            .tensors
            .iter()
            .map(|t| TensorHeader {
                name: t.name.clone(),
                shape: [t.shape.0, t.shape.1],
            })
            .collect(),
    };
    let json = serde_json::to_string(&header).map_err(|e| bad(e.to_string()))?;
    out.write_all(json.as_bytes())?;
    out.write_all(b"\n")?;
    for x in model.params.values() {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<TinyLM, TrainError> {
    let mut input = BufReader::new(input);
    let mut line = Vec::new();
    input.read_until(b'\n', &mut line)?;
    if line.pop() != Some(b'\n') {
        return Err(bad("missing header line"));
    }
    let header: Header = serde_json::from_slice(&line).map_err(|e| bad(e.to_string()))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(bad(format!("unsupported format {:?}", header.format)));
    }
    let mut params = template(&header)?;
    for (t, h) in params.tensors.iter().zip(&header.tensors) {
        if t.name != h.name || [t.shape.0, t.shape.1] != h.shape {
            return Err(bad(format!("unexpected tensor {} {:?}", h.name, h.shape)));
        }
    }
    let mut buf = [0u8; 8];
    for x in params.values_mut() {
        input
            .read_exact(&mut buf)
            .map_err(|_| bad("truncated tensor data"))?;
        *x = f64::from_le_bytes(buf);
    }
    if input.read(&mut buf)? != 0 {
        return Err(bad("trailing bytes after tensor data"));
    }
    TinyLM::from_params(header.vocab_size, header.hidden, params, header.lora)
}

// Layout implied by the header's model dimensions.
fn template(h: &Header) -> Result<ParamSet, TrainError> {
    let mut m = TinyLM::uniform(h.vocab_size, h.hidden);
    if let Some(cfg) = h.lora {
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        m.attach_lora(cfg, &mut rng)?;
    }
    if m.params.tensors.len() != h.tensors.len() {
        return Err(bad(format!(
            "expected {} tensors, header lists {}",
            m.params.tensors.len(),
            h.tensors.len()
        )));
    }
    Ok(m.params)
}

pub fn save_checkpoint(model: &TinyLM, path: &Path) -> Result<(), TrainError> {
    write_checkpoint(model, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint(path: &Path) -> Result<TinyLM, TrainError> {
    read_checkpoint(File::open(path)?)
}
