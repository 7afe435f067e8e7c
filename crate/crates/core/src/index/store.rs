//! On-disk layout: `manifest.json`, then per kind a little-endian f32 blob
//! `<kind>.vec` and a JSON payload list `<kind>.payloads.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IndexError, IndexKind, IndexSet, Payload, VectorIndex};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    dim: usize,
    indices: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    kind: IndexKind,
    count: usize,
    vectors: String,
    payloads: String,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> IndexError + '_ {
    move |source| IndexError::Io { path: path.display().to_string(), source }
}

impl IndexSet {
    pub fn save(&self, dir: &Path) -> Result<(), IndexError> {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut manifest = Manifest { format_version: FORMAT_VERSION, dim: self.dim, indices: Vec::new() };
        for (kind, idx) in &self.indices {
            let vec_name = format!("{kind}.vec");
            let payload_name = format!("{kind}.payloads.json");
            let mut bytes = Vec::with_capacity(idx.vectors.len() * 4);
            for x in &idx.vectors {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            let vec_path = dir.join(&vec_name);
            std::fs::write(&vec_path, bytes).map_err(io(&vec_path))?;
            let payload_path = dir.join(&payload_name);
            let json = serde_json::to_vec_pretty(&idx.payloads).map_err(|e| IndexError::Corrupt(e.to_string()))?;
            std::fs::write(&payload_path, json).map_err(io(&payload_path))?;
            manifest.indices.push(ManifestEntry { kind: *kind, count: idx.len(), vectors: vec_name, payloads: payload_name });
        }
        let path = dir.join("manifest.json");
        let json = serde_json::to_vec_pretty(&manifest).map_err(|e| IndexError::Corrupt(e.to_string()))?;
        std::fs::write(&path, json).map_err(io(&path))
    }

    pub fn load(dir: &Path) -> Result<IndexSet, IndexError> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(io(&path))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| IndexError::Corrupt(format!("{}: {e}", path.display())))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(IndexError::Corrupt(format!("unsupported format version {}", manifest.format_version)));
        }
        let mut set = IndexSet::empty(manifest.dim);
        for entry in manifest.indices {
            let vec_path = dir.join(&entry.vectors);
            let bytes = std::fs::read(&vec_path).map_err(io(&vec_path))?;
            if bytes.len() != entry.count * manifest.dim * 4 {
                return Err(IndexError::Corrupt(format!(
                    "{} holds {} bytes, expected {}",
                    entry.vectors,
                    bytes.len(),
                    entry.count * manifest.dim * 4
                )));
            }
            let payload_path = dir.join(&entry.payloads);
            let ptext = std::fs::read_to_string(&payload_path).map_err(io(&payload_path))?;
            let payloads: Vec<Payload> =
                serde_json::from_str(&ptext).map_err(|e| IndexError::Corrupt(format!("{}: {e}", entry.payloads)))?;
            if payloads.len() != entry.count {
                return Err(IndexError::Corrupt(format!("{} count mismatch", entry.payloads)));
            }
            let vectors = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            set.insert(entry.kind, VectorIndex { dim: manifest.dim, vectors, payloads })?;
        }
        Ok(set)
    }
}
