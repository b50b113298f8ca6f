//! Binary checkpoints: `MAGRCKPT`, a `u32` version, a `u32` tensor count,
//! then per tensor a length-prefixed UTF-8 name, a `u32` rank, `u64` dims and
//! the fp64 payload. All integers and floats are little-endian.
//!
//! A `key = value` config snapshot is written next to the binary file with
//! the extra extension `.cfg`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{MagrecConfig, MagrecModel, VocabSizes};
use crate::autograd::Tensor;
use crate::config::KeyValues;
use crate::dataset::Vocab;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MAGRCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_tensors<W: Write>(mut w: W, tensors: &[(&str, &Tensor)]) -> std::io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

fn read_exact<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    read_exact::<4, R>(r).map(u32::from_le_bytes)
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>> {
    if &read_exact::<8, R>(&mut r)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|e| Error::Checkpoint(format!("truncated name: {e}")))?;
        let name = String::from_utf8(name).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let rank = read_u32(&mut r)? as usize;
        let shape = (0..rank)
            .map(|_| read_exact::<8, R>(&mut r).map(|b| u64::from_le_bytes(b) as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| read_exact::<8, R>(&mut r).map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}

pub fn config_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".cfg");
    PathBuf::from(p)
}

fn ids_tensor<T: Copy + Into<u64>>(ids: &[T]) -> Tensor {
    Tensor::vector(ids.iter().map(|&i| i.into() as f64).collect())
}

fn tensor_ids(t: &Tensor) -> Vec<u64> {
    t.data().iter().map(|&v| v as u64).collect()
}

impl MagrecModel {
    /// Parameters, running statistics and vocabulary as one tensor list.
    pub fn checkpoint_bytes(&self, vocab: &Vocab) -> Vec<u8> {
        let items = ids_tensor(&vocab.items);
        let users = ids_tensor(&vocab.users);
        let domains = ids_tensor(&vocab.domains);
        let mut tensors: Vec<(&str, &Tensor)> = self.store.iter().map(|(_, n, t)| (n, t)).collect();
        tensors.push(("vocab.items", &items));
        tensors.push(("vocab.users", &users));
        tensors.push(("vocab.domains", &domains));
        let mut buf = Vec::new();
        write_tensors(&mut buf, &tensors).expect("writing to memory");
        buf
    }

    pub fn config_snapshot(&self, seed: u64) -> String {
        let mut kv = KeyValues::default();
        self.config.write_kv(&mut kv);
        kv.set("seed", seed);
        kv.render()
    }

    pub fn save(&self, path: &Path, vocab: &Vocab, seed: u64) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.checkpoint_bytes(vocab)).map_err(|e| Error::io(path, e))?;
        let cfg = config_path(path);
        fs::write(&cfg, self.config_snapshot(seed)).map_err(|e| Error::io(&cfg, e))
    }

    /// Restores a model and its vocabulary from [`MagrecModel::save`] output.
    pub fn load(path: &Path) -> Result<(Self, Vocab)> {
        let cfg_file = config_path(path);
        let text = fs::read_to_string(&cfg_file).map_err(|e| Error::io(&cfg_file, e))?;
        let kv = KeyValues::parse(&text)?;
        let mut config = MagrecConfig::default();
        config.read_kv(&kv)?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let tensors = read_tensors(bytes.as_slice())?;
        let find = |name: &str| {
            tensors
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))
        };
        let vocab = Vocab::new(
            tensor_ids(find("vocab.items")?),
            tensor_ids(find("vocab.users")?),
            tensor_ids(find("vocab.domains")?).into_iter().map(|d| d as u32).collect(),
        );
        let (items, users, domains) = vocab.sizes();
        let mut model = MagrecModel::new(config, VocabSizes { items, users, domains }, 0)?;
        let ids: Vec<_> = model.store.ids().collect();
        for id in ids {
            let name = model.store.name(id).to_string();
            let src = find(&name)?;
            let dst = model.store.get_mut(id);
            if src.shape() != dst.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` has shape {:?}, model expects {:?}",
                    src.shape(),
                    dst.shape()
                )));
            }
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok((model, vocab))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensors_round_trip() {
        let a = Tensor::from_rows(&[vec![1.5, -2.0], vec![0.0, 1e-300]]).unwrap();
        let b = Tensor::vector(vec![f64::MAX]);
        let mut buf = Vec::new();
        write_tensors(&mut buf, &[("a", &a), ("bee", &b)]).unwrap();
        assert_eq!(&buf[..8], b"MAGRCKPT");
        assert_eq!(buf[8..12], 1u32.to_le_bytes());
        let back = read_tensors(buf.as_slice()).unwrap();
        assert_eq!(back[0].0, "a");
        assert_eq!(back[0].1.data(), a.data());
        assert_eq!(back[1].1.shape(), [1]);
        assert_eq!(back[1].1.data(), b.data());
    }

    #[test]
    fn corrupt_input_is_rejected() {
        assert!(matches!(read_tensors(&b"NOTACKPT"[..]), Err(Error::Checkpoint(_))));
        let mut buf = Vec::new();
        write_tensors(&mut buf, &[("a", &Tensor::vector(vec![1.0, 2.0]))]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_tensors(buf.as_slice()), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn model_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let vocab = Vocab::new(vec![3, 9], vec![1, 2, 4], vec![0, 1]);
        let (items, users, domains) = vocab.sizes();
        let model = MagrecModel::new(MagrecConfig::tiny(), VocabSizes { items, users, domains }, 5).unwrap();
        model.save(&path, &vocab, 5).unwrap();
        let (back, vocab_back) = MagrecModel::load(&path).unwrap();
        assert_eq!(vocab_back, vocab);
        assert_eq!(back.config, model.config);
        assert_eq!(back.checkpoint_bytes(&vocab), model.checkpoint_bytes(&vocab));
    }
}
