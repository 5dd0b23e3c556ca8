//! Dataset downloader with pinned checksums.
//!
//! Three source layouts are understood:
//! - a mirror directory serving `<file>.gz` for each IDX file,
//! - a zip archive holding gzip members (EMNIST),
//! - a `.tgz` tarball (e.g. an npm package) containing the raw IDX files,
//!   verified against the pinned raw checksums.
//!
//! `file://` URLs are read from the local filesystem.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};
use std::time::Duration;

use md5::{Digest, Md5};
use serde::Deserialize;

use super::{DatasetError, DatasetName, FILE_NAMES};

const PINNED: &str = include_str!("checksums.toml");

#[derive(Debug, Clone, Deserialize)]
pub struct Manifest {
    pub datasets: BTreeMap<String, DatasetEntry>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DatasetEntry {
    pub mirror: String,
    #[serde(default)]
    pub archive: Option<ArchiveEntry>,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ArchiveEntry {
    pub name: String,
    pub md5: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FileEntry {
    pub name: String,
    #[serde(default)]
    pub gz_md5: Option<String>,
    #[serde(default)]
    pub raw_md5: Option<String>,
    #[serde(default)]
    pub member: Option<String>,
}

impl Manifest {
    /// The manifest shipped with the crate.
    pub fn pinned() -> Self {
        Self::from_toml(PINNED).expect("shipped checksum manifest is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self, DatasetError> {
        let m: Manifest = toml::from_str(text).map_err(|e| DatasetError::Manifest(e.to_string()))?;
        for (name, entry) in &m.datasets {
            for want in FILE_NAMES {
                if !entry.files.iter().any(|f| f.name == want) {
                    return Err(DatasetError::Manifest(format!("{name}: no entry for {want}")));
                }
            }
        }
        Ok(m)
    }

    pub fn entry(&self, name: DatasetName) -> Result<&DatasetEntry, DatasetError> {
        self.datasets.get(name.as_str()).ok_or_else(|| DatasetError::Manifest(format!("no entry for {name}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchReport {
    pub files: Vec<PathBuf>,
    /// False when every file was already present and verified.
    pub downloaded: bool,
}

pub struct Fetcher {
    manifest: Manifest,
    timeout: Duration,
}

impl Default for Fetcher {
    fn default() -> Self {
        Self::new(Manifest::pinned())
    }
}

impl Fetcher {
    pub fn new(manifest: Manifest) -> Self {
        Self { manifest, timeout: Duration::from_secs(300) }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Download `name` into `<root>/<name>/`. `mirror` overrides the pinned
    /// mirror; a URL ending in `.tgz` is treated as a tarball of raw files.
    pub fn fetch(&self, name: DatasetName, root: &Path, mirror: Option<&str>) -> Result<FetchReport, DatasetError> {
        let entry = self.manifest.entry(name)?;
        let dir = root.join(name.as_str());
        let targets: Vec<PathBuf> = FILE_NAMES.iter().map(|f| dir.join(f)).collect();
        if self.already_present(entry, &dir)? {
            return Ok(FetchReport { files: targets, downloaded: false });
        }
        let mirror = mirror.unwrap_or(&entry.mirror);
        let contents = if mirror.ends_with(".tgz") || mirror.ends_with(".tar.gz") {
            self.fetch_tarball(entry, mirror)?
        } else if let Some(archive) = &entry.archive {
            self.fetch_zip(entry, archive, mirror)?
        } else {
            self.fetch_gz_mirror(entry, mirror)?
        };
        fs::create_dir_all(&dir)?;
        for (file, bytes) in contents {
            let dest = dir.join(&file);
            let part = dir.join(format!("{file}.part"));
            fs::write(&part, bytes)?;
            fs::rename(&part, &dest)?;
        }
        Ok(FetchReport { files: targets, downloaded: true })
    }

    fn already_present(&self, entry: &DatasetEntry, dir: &Path) -> Result<bool, DatasetError> {
        for f in &entry.files {
            let path = dir.join(&f.name);
            if !path.exists() {
                return Ok(false);
            }
            if let Some(expected) = &f.raw_md5 {
                if &md5_hex(&fs::read(&path)?) != expected {
                    log::warn!("{} does not match its pinned checksum; fetching again", path.display());
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn fetch_gz_mirror(&self, entry: &DatasetEntry, mirror: &str) -> Result<Vec<(String, Vec<u8>)>, DatasetError> {
        let mut out = Vec::new();
        for f in &entry.files {
            let gz_name = format!("{}.gz", f.name);
            let gz = self.get(&join_url(mirror, &gz_name))?;
            if let Some(expected) = &f.gz_md5 {
                verify(&gz_name, expected, &gz)?;
            }
            let raw = gunzip(&gz, &gz_name)?;
            if let Some(expected) = &f.raw_md5 {
                verify(&f.name, expected, &raw)?;
            }
            out.push((f.name.clone(), raw));
        }
        Ok(out)
    }

    fn fetch_zip(
        &self,
        entry: &DatasetEntry,
        archive: &ArchiveEntry,
        mirror: &str,
    ) -> Result<Vec<(String, Vec<u8>)>, DatasetError> {
        let bytes = self.get(&join_url(mirror, &archive.name))?;
        verify(&archive.name, &archive.md5, &bytes)?;
        let mut zip = zip::ZipArchive::new(Cursor::new(bytes))
            .map_err(|e| DatasetError::Invalid(format!("{}: {e}", archive.name)))?;
        let mut out = Vec::new();
        for f in &entry.files {
            let member = f.member.as_deref().unwrap_or(&f.name);
            let mut data = Vec::new();
            zip.by_name(member)
                .map_err(|e| DatasetError::Invalid(format!("{}: {member}: {e}", archive.name)))?
                .read_to_end(&mut data)?;
            let raw = if member.ends_with(".gz") { gunzip(&data, member)? } else { data };
            if let Some(expected) = &f.raw_md5 {
                verify(&f.name, expected, &raw)?;
            }
            out.push((f.name.clone(), raw));
        }
        Ok(out)
    }

    fn fetch_tarball(&self, entry: &DatasetEntry, url: &str) -> Result<Vec<(String, Vec<u8>)>, DatasetError> {
        let tgz = self.get(url)?;
        let mut found: BTreeMap<String, Vec<u8>> = BTreeMap::new();
        let mut tar = tar::Archive::new(flate2::read::GzDecoder::new(Cursor::new(tgz)));
        for item in tar.entries()? {
            let mut item = item?;
            let path = item.path()?.into_owned();
            let Some(base) = path.file_name().map(|b| b.to_string_lossy().into_owned()) else {
                continue;
            };
            let raw_name = base.strip_suffix(".gz").unwrap_or(&base).to_string();
            if entry.files.iter().any(|f| f.name == raw_name) {
                let mut data = Vec::new();
                item.read_to_end(&mut data)?;
                let data = if base.ends_with(".gz") { gunzip(&data, &base)? } else { data };
                found.insert(raw_name, data);
            }
        }
        let mut out = Vec::new();
        for f in &entry.files {
            let raw = found.remove(&f.name).ok_or_else(|| DatasetError::DownloadFailed {
                url: url.into(),
                reason: format!("no {} inside", f.name),
            })?;
            let expected = f
                .raw_md5
                .as_ref()
                .ok_or_else(|| DatasetError::Manifest(format!("{}: tarball sources need a pinned raw_md5", f.name)))?;
            verify(&f.name, expected, &raw)?;
            out.push((f.name.clone(), raw));
        }
        Ok(out)
    }

    fn get(&self, url: &str) -> Result<Vec<u8>, DatasetError> {
        let fail = |reason: String| DatasetError::DownloadFailed { url: url.to_string(), reason };
        if let Some(path) = url.strip_prefix("file://") {
            return fs::read(path).map_err(|e| fail(e.to_string()));
        }
        log::info!("downloading {url}");
        let client =
            reqwest::blocking::Client::builder().timeout(self.timeout).build().map_err(|e| fail(e.to_string()))?;
        let resp = client.get(url).send().map_err(|e| fail(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(fail(format!("HTTP {}", resp.status())));
        }
        Ok(resp.bytes().map_err(|e| fail(e.to_string()))?.to_vec())
    }
}

/// Fetch with the pinned manifest.
pub fn fetch_dataset(name: DatasetName, root: &Path, mirror: Option<&str>) -> Result<FetchReport, DatasetError> {
    Fetcher::default().fetch(name, root, mirror)
}

fn join_url(base: &str, file: &str) -> String {
    if base.ends_with('/') {
        format!("{base}{file}")
    } else {
        format!("{base}/{file}")
    }
}

fn md5_hex(bytes: &[u8]) -> String {
    Md5::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn verify(file: &str, expected: &str, bytes: &[u8]) -> Result<(), DatasetError> {
    let actual = md5_hex(bytes);
    if actual.eq_ignore_ascii_case(expected) {
        Ok(())
    } else {
        Err(DatasetError::ChecksumMismatch { file: file.into(), expected: expected.into(), actual })
    }
}

fn gunzip(bytes: &[u8], name: &str) -> Result<Vec<u8>, DatasetError> {
    let mut out = Vec::new();
    flate2::read::GzDecoder::new(bytes)
        .read_to_end(&mut out)
        .map_err(|e| DatasetError::Invalid(format!("{name}: {e}")))?;
    Ok(out)
}
