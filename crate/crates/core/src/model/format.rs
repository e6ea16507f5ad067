//! `CSGN` weight files.
//!
//! Little-endian layout:
//!
//! ```text
//! "CSGN" | version u16 | header_len u32 | header (UTF-8 key=value lines)
//!        | records { name_len u16 | name | rank u8 | extents u32×rank | f32×n }
//!        | CRC32 of every byte between the magic and the checksum
//! ```
//!
//! Records appear in [`Params::named_tensors`] order.

use std::path::Path;

use super::{build_model, ModelConfig, ModelState, Normalizer};
use crate::error::{Error, Result};
use crate::kv::{join, KeyValues};
use crate::tensor::Tensor;

pub const CSGN_MAGIC: &[u8; 4] = b"CSGN";
pub const CSGN_VERSION: u16 = 1;

const NORM_MEAN: &str = "norm_mean";
const NORM_STD: &str = "norm_std";

fn header_text(m: &ModelState<f32>) -> Result<String> {
    let mut kv = KeyValues::new();
    for (k, v) in &m.meta {
        kv.set(k, v);
    }
    let mut reserved = KeyValues::new();
    m.config.write_kv(&mut reserved);
    reserved.set(NORM_MEAN, join(&m.normalizer.mean));
    reserved.set(NORM_STD, join(&m.normalizer.std));
    for (k, v) in reserved.iter() {
        if kv.contains(k) {
            return Err(Error::Config(format!("metadata key {k} is reserved")));
        }
        kv.set(k, v);
    }
    let mut text = String::new();
    for (k, v) in kv.iter() {
        if k.contains(['=', '\n']) || v.contains('\n') || k.starts_with('#') {
            return Err(Error::Config(format!("header entry {k:?} cannot be encoded")));
        }
        text.push_str(k);
        text.push('=');
        text.push_str(v);
        text.push('\n');
    }
    Ok(text)
}

pub fn model_to_bytes(m: &ModelState<f32>) -> Result<Vec<u8>> {
    m.normalizer.validate(m.config.input_channels)?;
    let header = header_text(m)?;
    let mut out = Vec::with_capacity(16 + header.len() + 4 * m.params.param_count() + 1024);
    out.extend_from_slice(CSGN_MAGIC);
    out.extend_from_slice(&CSGN_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for (name, t) in m.params.named_tensors() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out[4..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn save_model(m: &ModelState<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = model_to_bytes(m)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelState<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(
                self.pos,
                format!("truncated while reading {what}"),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<ModelState<f32>> {
    if bytes.len() < 4 || &bytes[..4] != CSGN_MAGIC {
        return Err(Error::format(0, "missing CSGN magic"));
    }
    if bytes.len() < 6 {
        return Err(Error::format(4, "truncated before version"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CSGN_VERSION {
        return Err(Error::Version {
            offset: 4,
            found: version.into(),
            supported: CSGN_VERSION.into(),
        });
    }
    if bytes.len() < 4 + 2 + 4 + 4 {
        return Err(Error::format(bytes.len(), "truncated before header"));
    }
    let body_end = bytes.len() - 4;
    let stored = u32::from_le_bytes(bytes[body_end..].try_into().unwrap());
    let actual = crc32fast::hash(&bytes[4..body_end]);
    if stored != actual {
        return Err(Error::integrity(
            body_end,
            format!("CRC mismatch: stored {stored:08x}, computed {actual:08x}"),
        ));
    }

    let mut r = Reader {
        buf: &bytes[..body_end],
        pos: 6,
    };
    let header_len = r.u32("header length")? as usize;
    let header_at = r.pos;
    let header = std::str::from_utf8(r.take(header_len, "header")?)
        .map_err(|e| Error::format(header_at + e.valid_up_to(), "header is not UTF-8"))?;
    let at_header = |e: Error| Error::format(header_at, e.to_string());
    let mut kv = KeyValues::parse(header).map_err(at_header)?;
    let config = ModelConfig::take_from_kv(&mut kv).map_err(at_header)?;
    let mean = kv.take_list::<f32>(NORM_MEAN).map_err(at_header)?;
    let std = kv.take_list::<f32>(NORM_STD).map_err(at_header)?;
    let normalizer = match (mean, std) {
        (Some(mean), Some(std)) => Normalizer { mean, std },
        _ => return Err(Error::format(header_at, "header lacks normalization statistics")),
    };
    normalizer
        .validate(config.input_channels)
        .map_err(at_header)?;

    let mut model = build_model::<f32>(&config).map_err(at_header)?;
    model.normalizer = normalizer;
    model.meta = kv.into_map();

    let expected: Vec<(String, Vec<usize>)> = model
        .params
        .named_tensors()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    for ((name, shape), slot) in expected.iter().zip(model.params.tensors_mut()) {
        let at = r.pos;
        let name_len = r.u16("record name length")? as usize;
        let got = r.take(name_len, "record name")?;
        if got != name.as_bytes() {
            return Err(Error::format(
                at,
                format!("expected record {name}, found {:?}", String::from_utf8_lossy(got)),
            ));
        }
        let rank = r.u8("record rank")? as usize;
        let mut extents = Vec::with_capacity(rank);
        for _ in 0..rank {
            extents.push(r.u32("record extent")? as usize);
        }
        if &extents != shape {
            return Err(Error::format(
                at,
                format!("record {name} has shape {extents:?}, config implies {shape:?}"),
            ));
        }
        let n: usize = shape.iter().product();
        let payload = r.take(4 * n, "record payload")?;
        let values: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        *slot = Tensor::new(shape.clone(), values)?;
    }
    if r.pos != body_end {
        return Err(Error::format(r.pos, "unexpected bytes after the last record"));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConvBlockConfig;

    fn small() -> ModelState<f32> {
        let cfg = ModelConfig {
            input_channels: 3,
            window_len: 6,
            conv_blocks: vec![ConvBlockConfig::new(4, 3, 1, 1)],
            gru_hidden: 5,
            dense_hidden: 4,
            num_classes: 3,
            seed: 11,
        };
        let mut m = build_model(&cfg).unwrap();
        m.normalizer = Normalizer {
            mean: vec![0.1, -2.5, 1e-7],
            std: vec![1.0 / 3.0, 2.0, 1e-6],
        };
        m.meta.insert("window_stride".into(), "10".into());
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = small();
        let bytes = model_to_bytes(&m).unwrap();
        let back = model_from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(model_to_bytes(&back).unwrap(), bytes);
    }

    #[test]
    fn payload_corruption_is_a_crc_error() {
        let mut bytes = model_to_bytes(&small()).unwrap();
        let n = bytes.len();
        bytes[n - 20] ^= 0x01;
        assert!(matches!(model_from_bytes(&bytes), Err(Error::Integrity { .. })));
    }

    #[test]
    fn newer_version_is_refused() {
        let mut bytes = model_to_bytes(&small()).unwrap();
        bytes[4] = 2;
        match model_from_bytes(&bytes) {
            Err(Error::Version { found: 2, offset: 4, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_truncation() {
        let bytes = model_to_bytes(&small()).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(model_from_bytes(&bad), Err(Error::Format { offset: 0, .. })));
        for cut in [0, 3, 5, 9, 40, bytes.len() - 1] {
            assert!(model_from_bytes(&bytes[..cut]).is_err(), "cut {cut}");
        }
    }

    #[test]
    fn file_size_is_four_bytes_per_parameter_plus_framing() {
        let m = small();
        let bytes = model_to_bytes(&m).unwrap();
        let framing = bytes.len() - 4 * m.params.param_count();
        assert!(framing < 1024, "{framing}");
    }
}
