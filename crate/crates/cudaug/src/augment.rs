//! Batch augmentation of a directory of PNG files.
//!
//! Files are sorted by name; file `i` uses the stream seeded with
//! `derive_seed(master, [SAMPLE, i])`, so outputs do not depend on the
//! worker count or scheduling. A strength of 0 copies the input bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cudaug_core::compose::apply_strength_logged;
use cudaug_core::rng::{self, domain};
use cudaug_core::{apply_strength_ordered, sample_sequence, op_catalog, ApplyOrder, OpSequence, RasterImage, MAX_STRENGTH};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{decode_png, encode_png};
use crate::error::{Error, Result};
use crate::formats::LabelRow;

/// How each file's strength is chosen.
#[derive(Debug, Clone)]
pub enum StrengthSource {
    Fixed(u32),
    /// Per-class levels plus a file-name to class map.
    PerClass { levels: Vec<u32>, labels: BTreeMap<String, usize> },
}

impl StrengthSource {
    pub fn per_class(levels: Vec<u32>, labels: &[LabelRow]) -> Self {
        let labels = labels.iter().map(|r| (r.sample.clone(), r.class_id)).collect();
        StrengthSource::PerClass { levels, labels }
    }

    fn lookup(&self, name: &str) -> std::result::Result<(Option<usize>, u32), String> {
        match self {
            StrengthSource::Fixed(s) => Ok((None, *s)),
            StrengthSource::PerClass { levels, labels } => {
                let &c = labels.get(name).ok_or_else(|| "no label for file".to_string())?;
                let &s = levels.get(c).ok_or_else(|| format!("class {c} has no level"))?;
                Ok((Some(c), s))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct AugmentJob {
    pub input: PathBuf,
    pub output: PathBuf,
    pub strength: StrengthSource,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

/// One processed file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub class_id: Option<usize>,
    pub strength: u32,
    pub seed: u64,
    /// `file,s,k_1,...,k_s` with zero-based catalog ordinals.
    pub sequence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentManifest {
    pub master_seed: u64,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// PNG files directly inside `dir`, sorted by file name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn file_seed(master: u64, index: usize) -> u64 {
    rng::derive_seed(master, &[domain::SAMPLE, index as u64])
}

/// Augment one encoded image. Strength 0 returns the input bytes unchanged.
pub fn augment_png(bytes: &[u8], strength: u32, seed: u64) -> std::result::Result<(Vec<u8>, OpSequence), String> {
    if strength > MAX_STRENGTH {
        return Err(format!("strength {strength} above {MAX_STRENGTH}"));
    }
    if strength == 0 {
        return Ok((bytes.to_vec(), OpSequence::from_kinds(0, &[]).map_err(|e| e.to_string())?));
    }
    let img = decode_png(bytes)?;
    let (out, seq) = apply_strength_logged(&img, strength, &mut rng::stream(seed)).map_err(|e| e.to_string())?;
    Ok((encode_png(&out), seq))
}

/// Re-apply a manifest entry to a decoded image through the library.
pub fn replay(img: &RasterImage, entry: &ManifestEntry) -> cudaug_core::Result<RasterImage> {
    let (_, logged) = OpSequence::parse_log_line(&entry.sequence)?;
    let mut r = rng::stream(entry.seed);
    let drawn = sample_sequence(entry.strength, op_catalog(), &mut r)?;
    if drawn != logged {
        return Err(cudaug_core::Error::InvalidParameter(format!(
            "{}: logged sequence does not match seed {}",
            entry.file, entry.seed
        )));
    }
    apply_strength_ordered(img, &logged, ApplyOrder::AsDrawn, &mut r)
}

/// Run a batch job. Every readable file is written even if others fail; the
/// manifest covers the successful files and is written to the output
/// directory.
pub fn run(job: &AugmentJob) -> Result<AugmentManifest> {
    let files = list_pngs(&job.input)?;
    fs::create_dir_all(&job.output).map_err(|e| Error::io(&job.output, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(job.threads)
        .build()
        .map_err(|e| Error::Data(format!("thread pool: {e}")))?;

    let results: Vec<std::result::Result<ManifestEntry, (PathBuf, String)>> = pool.install(|| {
        files
            .par_iter()
            .enumerate()
            .map(|(index, path)| process_one(job, index, path).map_err(|msg| (path.clone(), msg)))
            .collect()
    });

    let mut entries = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(e) => entries.push(e),
            Err(f) => {
                log::error!("{}: {}", f.0.display(), f.1);
                failures.push(f);
            }
        }
    }
    let manifest = AugmentManifest { master_seed: job.seed, files: entries };
    let manifest_path = job.output.join(MANIFEST_NAME);
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;
    if failures.is_empty() {
        Ok(manifest)
    } else {
        Err(Error::Batch { total: files.len(), failures })
    }
}

fn process_one(job: &AugmentJob, index: usize, path: &Path) -> std::result::Result<ManifestEntry, String> {
    let name = path.file_name().and_then(|n| n.to_str()).ok_or("file name is not UTF-8")?.to_string();
    let (class_id, strength) = job.strength.lookup(&name)?;
    let bytes = fs::read(path).map_err(|e| e.to_string())?;
    let seed = file_seed(job.seed, index);
    let (out, seq) = augment_png(&bytes, strength, seed)?;
    fs::write(job.output.join(&name), out).map_err(|e| e.to_string())?;
    log::debug!("{name}: s={strength}");
    Ok(ManifestEntry { file: name.clone(), index, class_id, strength, seed, sequence: seq.log_line(&name) })
}
