//! Checkpoint files: a versioned header (magic, architecture, parameter
//! count) followed by the raw little-endian `f32` parameters.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ConvNetConfig, TinyConvNet};

const MAGIC: &[u8; 4] = b"TCN1";
const VERSION: u32 = 1;

/// Writes a network to `path`.
pub fn save_checkpoint(net: &TinyConvNet, path: &Path) -> Result<()> {
    let cfg = net.config();
    let mut file = fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&VERSION.to_le_bytes())?;
    for field in [
        cfg.in_channels,
        cfg.height,
        cfg.width,
        cfg.conv1_channels,
        cfg.conv2_channels,
        cfg.num_classes,
    ] {
        file.write_all(&(field as u32).to_le_bytes())?;
    }
    file.write_all(&(net.params().len() as u64).to_le_bytes())?;
    for p in net.params() {
        file.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a network back; validates magic, version, and parameter count.
pub fn load_checkpoint(path: &Path) -> Result<TinyConvNet> {
    let mut file = fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    let fail = |offset: usize, message: String| Error::Format {
        path: path.display().to_string(),
        offset: offset as u64,
        message,
    };

    let need = |offset: usize, len: usize| -> Result<&[u8]> {
        bytes
            .get(offset..offset + len)
            .ok_or_else(|| fail(bytes.len(), format!("truncated: need byte {}", offset + len)))
    };

    if need(0, 4)? != MAGIC {
        return Err(fail(0, format!("bad magic {:?}, expected {MAGIC:?}", &bytes.get(0..4))));
    }
    let version = u32::from_le_bytes(need(4, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(fail(4, format!("unsupported version {version}")));
    }
    let field = |i: usize| -> Result<usize> {
        Ok(u32::from_le_bytes(need(8 + i * 4, 4)?.try_into().unwrap()) as usize)
    };
    let cfg = ConvNetConfig {
        in_channels: field(0)?,
        height: field(1)?,
        width: field(2)?,
        conv1_channels: field(3)?,
        conv2_channels: field(4)?,
        num_classes: field(5)?,
    };
    let declared = u64::from_le_bytes(need(32, 8)?.try_into().unwrap()) as usize;
    if declared != cfg.param_count() {
        return Err(fail(
            32,
            format!(
                "parameter count {declared} does not match architecture ({} expected)",
                cfg.param_count()
            ),
        ));
    }
    let raw = need(40, declared * 4)?;
    let params = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    TinyConvNet::from_params(cfg, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn cfg() -> ConvNetConfig {
        ConvNetConfig {
            in_channels: 1,
            height: 8,
            width: 8,
            conv1_channels: 2,
            conv2_channels: 3,
            num_classes: 4,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let net = TinyConvNet::new(cfg(), &mut RngStream::from_seed(1).rng()).unwrap();
        save_checkpoint(&net, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.config(), net.config());
        for (a, b) in back.params().iter().zip(net.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let net = TinyConvNet::new(cfg(), &mut RngStream::from_seed(1).rng()).unwrap();
        save_checkpoint(&net, &path).unwrap();

        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::Format { offset: 0, .. })
        ));

        bytes[0] = b'T';
        let cut = bytes.len() - 7;
        fs::write(&path, &bytes[..cut]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));
    }
}
