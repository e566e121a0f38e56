//! ITNT checkpoint format: magic, version, config, vocabulary, inventory,
//! named f32 tensors, and a trailing SHA-256 of the payload.

use super::{TagInventory, TaggerConfig, TaggerModel, Vocab};
use crate::{Error, Result};
use ndarray::Array2;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 4] = b"ITNT";
const VERSION: u16 = 1;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Format("truncated checkpoint".into()));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Format("bad UTF-8 in checkpoint".into()))
    }
}

impl TaggerModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut payload = Vec::new();
        payload.extend_from_slice(MAGIC);
        payload.extend_from_slice(&VERSION.to_le_bytes());

        let c = &self.config;
        for v in [
            c.num_blocks,
            c.model_dim,
            c.num_heads,
            c.ffn_dim,
            c.chunk_size,
            c.max_position,
            c.max_history_chunks,
        ] {
            put_u32(&mut payload, v as u32);
        }
        payload.extend_from_slice(&c.dropout.to_le_bytes());

        put_u32(&mut payload, self.vocab.len() as u32);
        for i in 0..self.vocab.len() {
            put_str(&mut payload, &self.vocab.items()[i]);
        }
        put_u32(&mut payload, self.inventory.len() as u32);
        for t in self.inventory.tags() {
            put_str(&mut payload, t);
        }

        let tensors = self.params.tensors();
        put_u32(&mut payload, tensors.len() as u32);
        for (name, t) in tensors {
            put_str(&mut payload, &name);
            put_u32(&mut payload, t.nrows() as u32);
            put_u32(&mut payload, t.ncols() as u32);
            for &v in t.iter() {
                payload.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }

        let digest = Sha256::digest(&payload);
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&payload).map_err(|e| Error::io(path, e))?;
        file.write_all(&digest).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TaggerModel> {
        let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if raw.len() < 32 + 6 {
            return Err(Error::Format("truncated checkpoint".into()));
        }
        let (payload, digest) = raw.split_at(raw.len() - 32);
        if Sha256::digest(payload).as_slice() != digest {
            return Err(Error::Checksum);
        }
        let mut r = Reader {
            data: payload,
            pos: 0,
        };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not an ITNT checkpoint".into()));
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let num_blocks = r.u32()? as usize;
        let model_dim = r.u32()? as usize;
        let num_heads = r.u32()? as usize;
        let ffn_dim = r.u32()? as usize;
        let chunk_size = r.u32()? as usize;
        let max_position = r.u32()? as usize;
        let max_history_chunks = r.u32()? as usize;
        let dropout = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
        let config = TaggerConfig {
            num_blocks,
            model_dim,
            num_heads,
            ffn_dim,
            chunk_size,
            dropout,
            max_position,
            max_history_chunks,
        };
        config.validate()?;

        let vn = r.u32()? as usize;
        let mut items = Vec::with_capacity(vn);
        for _ in 0..vn {
            items.push(r.string()?);
        }
        if items.first().map(|s| s.as_str()) != Some(super::UNK_TOKEN) {
            return Err(Error::Format("vocabulary missing <unk> at 0".into()));
        }
        let vocab = Vocab::from_items(items);

        let tn = r.u32()? as usize;
        let mut tags = Vec::with_capacity(tn);
        for _ in 0..tn {
            tags.push(r.string()?);
        }
        if tags.first().map(|s| s.as_str()) != Some(crate::datagen::BLANK_TAG) {
            return Err(Error::Format("inventory missing blank at 0".into()));
        }
        let inventory = TagInventory::from_tags(tags);

        let mut model = TaggerModel::init(config, vocab, inventory, 0)?;
        let count = r.u32()? as usize;
        let expected = model.params.tensors().len();
        if count != expected {
            return Err(Error::Format(format!(
                "checkpoint has {count} tensors, model needs {expected}"
            )));
        }
        for (name, t) in model.params.tensors_mut() {
            let fname = r.string()?;
            if fname != name {
                return Err(Error::Format(format!(
                    "tensor order mismatch: `{fname}` vs `{name}`"
                )));
            }
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            if (rows, cols) != (t.nrows(), t.ncols()) {
                return Err(Error::Format(format!(
                    "tensor `{name}` shape {rows}x{cols} incompatible with config"
                )));
            }
            let mut data = Array2::zeros((rows, cols));
            for v in data.iter_mut() {
                *v = r.f32()? as f64;
            }
            *t = data;
        }
        if r.pos != payload.len() {
            return Err(Error::Format("trailing bytes in checkpoint".into()));
        }
        Ok(model)
    }
}

impl Vocab {
    pub(crate) fn items(&self) -> &[String] {
        &self.items
    }
}
