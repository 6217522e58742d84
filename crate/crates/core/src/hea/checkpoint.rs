use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::corpus::Criterion;
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::training::TrainConfig;

const MAGIC: &[u8; 4] = b"ADCK";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: TrainConfig,
    pub criterion: Criterion,
    pub best_epoch: usize,
    pub val_f1_macro: f64,
    pub seed: u64,
}

/// Serializes parameters as binary32. Values are rounded on the way out, so
/// quantize the store first if reloaded predictions must match exactly.
pub fn write_checkpoint(header: &CheckpointHeader, params: &ModelParams) -> Result<Vec<u8>> {
    if header.config.model != params.config {
        return Err(Error::InvalidConfig("checkpoint header and parameters disagree on the model".into()));
    }
    let json = serde_json::to_vec(header)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&u32_len(json.len())?.to_le_bytes());
    out.extend_from_slice(&json);
    for (_, p) in params.store.iter() {
        out.extend_from_slice(&u32_len(p.name.len())?.to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        let shape = p.value.shape();
        out.extend_from_slice(&u32_len(shape.len())?.to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&u32_len(d)?.to_le_bytes());
        }
        for &v in p.value.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

fn u32_len(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Malformed(format!("length {n} exceeds u32")))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Malformed(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<(CheckpointHeader, ModelParams)> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4).map_err(|_| Error::BadMagic("checkpoint shorter than magic".into()))?;
    if magic != MAGIC {
        return Err(Error::BadMagic(format!("expected ADCK, found {:?}", String::from_utf8_lossy(magic))));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let header_len = r.u32()? as usize;
    let header: CheckpointHeader = serde_json::from_slice(r.take(header_len)?)?;
    header.config.validate()?;
    let mut values = Vec::new();
    while !r.done() {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Malformed("parameter name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| Ok(r.u32()? as usize)).collect::<Result<Vec<_>>>()?;
        let count = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let count = count.ok_or_else(|| Error::Malformed(format!("{name}: shape overflow")))?;
        let raw = r.take(count.checked_mul(4).ok_or_else(|| Error::Malformed(format!("{name}: shape overflow")))?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect();
        values.push((name, Tensor::from_vec(shape, data)?));
    }
    let params = ModelParams::from_values(&header.config.model, values)?;
    Ok((header, params))
}

/// Best-epoch snapshot of one trained model.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ModelParams,
}

impl Checkpoint {
    /// Rounds the parameters to binary32 so the snapshot survives a save/load
    /// cycle unchanged.
    pub fn new(header: CheckpointHeader, mut params: ModelParams) -> Self {
        params.store.quantize_f32();
        Checkpoint { header, params }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        write_checkpoint(&self.header, &self.params)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, params) = read_checkpoint(bytes)?;
        Ok(Checkpoint { header, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hea::{forward, AttentionMode, Join, Variant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn checkpoint(variant: Variant) -> Checkpoint {
        let mut config = TrainConfig::default();
        config.model.variant = variant;
        config.model.embedding_dim = 5;
        config.model.sent_hidden = 3;
        config.model.doc_hidden = 4;
        config.model.doc_join = Join::Sum;
        config.model.attention = AttentionMode::Additive;
        let params = ModelParams::init(&config.model, 11).unwrap();
        let header = CheckpointHeader {
            config,
            criterion: Criterion::Q9,
            best_epoch: 7,
            val_f1_macro: 0.8125,
            seed: 11,
        };
        Checkpoint::new(header, params)
    }

    #[test]
    fn byte_exact_round_trip() {
        for variant in [Variant::Hea, Variant::He] {
            let ck = checkpoint(variant);
            let bytes = ck.to_bytes().unwrap();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back, ck);
            assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }

    #[test]
    fn reloaded_predictions_are_identical() {
        let ck = checkpoint(Variant::Hea);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q9.ckpt");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let doc: Vec<Tensor> = [4, 1, 6]
            .iter()
            .map(|&n| Tensor::from_vec(vec![n, 5], (0..n * 5).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
            .collect();
        assert_eq!(forward(&ck.params, &doc).unwrap(), forward(&back.params, &doc).unwrap());
    }

    #[test]
    fn layout_starts_with_header() {
        let ck = checkpoint(Variant::He);
        let bytes = ck.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"ADCK");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[12..12 + n]).unwrap();
        assert_eq!(header["criterion"], "q9");
        assert_eq!(header["best_epoch"], 7);
        let floats: usize = ck.params.store.iter().map(|(_, p)| p.value.len()).sum();
        let records: usize = ck
            .params
            .store
            .iter()
            .map(|(_, p)| 4 + p.name.len() + 4 + 4 * p.value.rank())
            .sum();
        assert_eq!(bytes.len(), 12 + n + records + 4 * floats);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = checkpoint(Variant::Hea).to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::BadMagic(_))));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::VersionUnsupported(2))));
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        for cut in (0..bytes.len()).step_by(97) {
            assert!(Checkpoint::from_bytes(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn parameter_set_must_match_config() {
        let ck = checkpoint(Variant::Hea);
        let mut other = ck.clone();
        other.header.config.model.variant = Variant::He;
        other.header.config.model.attention = AttentionMode::ScaledDot;
        // Header says mean pooling, records still carry attention weights.
        let mut bytes = Vec::new();
        let json = serde_json::to_vec(&other.header).unwrap();
        bytes.extend_from_slice(b"ADCK");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&(json.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&json);
        let orig = ck.to_bytes().unwrap();
        let orig_len = u32::from_le_bytes(orig[8..12].try_into().unwrap()) as usize;
        bytes.extend_from_slice(&orig[12 + orig_len..]);
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::ShapeMismatch(_))));
    }
}
