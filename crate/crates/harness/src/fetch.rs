//! Download of the MNIST IDX files into the dataset cache directory.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use neurolife::dataio::maybe_gunzip;

use crate::error::{HarnessError, Result};
use crate::experiment::sha256_hex;

pub const DEFAULT_MIRROR: &str = "https://storage.googleapis.com/cvdf-datasets/mnist/";

/// File names and SHA-256 digests of the uncompressed files.
pub const MNIST_FILES: [(&str, &str); 4] = [
    (
        "train-images-idx3-ubyte",
        "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db",
    ),
    (
        "train-labels-idx1-ubyte",
        "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5",
    ),
    (
        "t10k-images-idx3-ubyte",
        "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7",
    ),
    (
        "t10k-labels-idx1-ubyte",
        "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2",
    ),
];

const MAX_DOWNLOAD: u64 = 64 << 20;

fn verified(path: &Path, digest: &str) -> bool {
    fs::read(path).map(|b| sha256_hex(&b) == digest).unwrap_or(false)
}

/// Fetches `<mirror><name>.gz` for every missing or corrupt file, verifies
/// the uncompressed digest and stores the plain IDX file in `dir`.
/// Returns the paths written.
pub fn fetch_mnist(dir: &Path, mirror: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut written = Vec::new();
    for (name, digest) in MNIST_FILES {
        let path = dir.join(name);
        if verified(&path, digest) {
            continue;
        }
        let url = format!("{}/{name}.gz", mirror.trim_end_matches('/'));
        let response = ureq::get(&url)
            .call()
            .map_err(|e| HarnessError::Io(format!("download {url}: {e}")))?;
        let mut compressed = Vec::new();
        response
            .into_reader()
            .take(MAX_DOWNLOAD)
            .read_to_end(&mut compressed)
            .map_err(|e| HarnessError::Io(format!("download {url}: {e}")))?;
        let bytes = maybe_gunzip(compressed).map_err(|e| HarnessError::Io(format!("{url}: {e}")))?;
        let got = sha256_hex(&bytes);
        if got != digest {
            return Err(HarnessError::Io(format!(
                "{url}: checksum {got} does not match {digest}"
            )));
        }
        let tmp = dir.join(format!("{name}.part"));
        fs::write(&tmp, &bytes).map_err(|e| HarnessError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_check_rejects_other_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f");
        fs::write(&p, b"abc").unwrap();
        assert!(verified(
            &p,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        ));
        assert!(!verified(&p, MNIST_FILES[0].1));
        assert!(!verified(&dir.path().join("missing"), MNIST_FILES[0].1));
    }

    #[test]
    fn unreachable_mirror_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = fetch_mnist(dir.path(), "http://127.0.0.1:9/").unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
