//! Best-effort fetcher for the public NYC per-ZCTA data files.
//!
//! Files are downloaded fully into memory and schema-checked before
//! anything touches disk, so a network failure or a drifted upstream schema
//! never leaves partial files behind. Written files are byte-for-byte what
//! the server sent; a `manifest.json` records URL, retrieval time, and
//! SHA-256 of each file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Upstream data source for [`fetch_public_data`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// NYC Health per-MODZCTA case/test/death totals and vaccination
    /// coverage, published on GitHub.
    Nyc,
}

impl Source {
    fn name(self) -> &'static str {
        match self {
            Source::Nyc => "nyc",
        }
    }

    fn files(self) -> Vec<RemoteFile> {
        match self {
            Source::Nyc => vec![
                RemoteFile {
                    name: "data-by-modzcta.csv",
                    url: "https://raw.githubusercontent.com/nychealth/coronavirus-data/master/totals/data-by-modzcta.csv"
                        .into(),
                    required_columns: &["MODIFIED_ZCTA"],
                },
                RemoteFile {
                    name: "coverage-by-modzcta-allages.csv",
                    url: "https://raw.githubusercontent.com/nychealth/covid-vaccine-data/main/doses/coverage-by-modzcta-allages.csv"
                        .into(),
                    required_columns: &["MODZCTA"],
                },
            ],
        }
    }
}

/// One file to download and the columns its header must still carry.
struct RemoteFile {
    name: &'static str,
    url: String,
    required_columns: &'static [&'static str],
}

/// A file written by [`fetch_public_data`].
#[derive(Debug, Clone, PartialEq)]
pub struct FetchedFile {
    pub name: String,
    pub url: String,
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    source: &'a str,
    fetched_at: String,
    files: Vec<ManifestEntry<'a>>,
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    name: &'a str,
    url: &'a str,
    sha256: &'a str,
    bytes: usize,
}

/// Download the source's files verbatim into `out_dir` and write a
/// `manifest.json` next to them. Returns one entry per data file.
pub fn fetch_public_data(source: Source, out_dir: &Path) -> Result<Vec<FetchedFile>> {
    fetch_files(&source.files(), source.name(), out_dir)
}

fn fetch_files(
    files: &[RemoteFile],
    source_name: &str,
    out_dir: &Path,
) -> Result<Vec<FetchedFile>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    // Prove the directory is writable before touching the network.
    let probe = out_dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    let _ = fs::remove_file(&probe);

    // Everything lands in memory first; disk is only touched once all
    // files have arrived and passed their schema check.
    let mut payloads: Vec<Vec<u8>> = Vec::with_capacity(files.len());
    for file in files {
        log::info!("fetching {}", file.url);
        let bytes = http_get(&file.url)?;
        check_schema(file, &bytes)?;
        payloads.push(bytes);
    }

    let mut fetched = Vec::with_capacity(files.len());
    for (file, bytes) in files.iter().zip(&payloads) {
        let path = out_dir.join(file.name);
        write_atomic(&path, bytes)?;
        fetched.push(FetchedFile {
            name: file.name.to_owned(),
            url: file.url.clone(),
            path,
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len(),
        });
    }

    let manifest = Manifest {
        source: source_name,
        fetched_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        files: fetched
            .iter()
            .map(|f| ManifestEntry {
                name: &f.name,
                url: &f.url,
                sha256: &f.sha256,
                bytes: f.bytes,
            })
            .collect(),
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)?;
    write_atomic(&out_dir.join("manifest.json"), manifest_json.as_bytes())?;
    Ok(fetched)
}

/// Write via a `.part` sibling and rename, so a crash mid-write never
/// leaves a truncated file under the final name.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let part = path.with_extension("part");
    fs::write(&part, bytes).map_err(|e| Error::io(&part, e))?;
    fs::rename(&part, path).map_err(|e| {
        let _ = fs::remove_file(&part);
        Error::io(path, e)
    })
}

fn http_get(url: &str) -> Result<Vec<u8>> {
    let network = |e: String| Error::Network { url: url.to_owned(), reason: e };
    let mut response = ureq::get(url).call().map_err(|e| network(e.to_string()))?;
    response.body_mut().read_to_vec().map_err(|e| network(e.to_string()))
}

/// Check that the CSV header still carries the columns we depend on
/// (case-insensitive); upstream renames surface as `SourceSchemaChanged`.
fn check_schema(file: &RemoteFile, bytes: &[u8]) -> Result<()> {
    let text = String::from_utf8_lossy(bytes);
    let header = text.lines().next().unwrap_or("").trim_start_matches('\u{feff}');
    let columns: Vec<String> =
        header.split(',').map(|c| c.trim().trim_matches('"').to_ascii_uppercase()).collect();
    let missing: Vec<String> = file
        .required_columns
        .iter()
        .filter(|c| !columns.contains(&c.to_ascii_uppercase()))
        .map(|c| c.to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::SourceSchemaChanged { file: file.name.to_owned(), missing })
    }
}
