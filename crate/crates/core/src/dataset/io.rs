//! `.opds` directory container. See `docs/opds-format.md` for the byte layout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DatasetError, Layout, OperatorDataset, Provenance};
use crate::grf::{GrfConfig, InputFunctionSet};

pub const FORMAT: &str = "opds";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobInfo {
    pub file: String,
    pub n_values: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub layout: Layout,
    pub n_functions: usize,
    pub n_sensors: usize,
    pub n_queries: usize,
    pub query_dim: usize,
    pub n_query_lists: usize,
    pub sensors: Vec<f64>,
    pub grf: GrfConfig,
    pub grf_seed: u64,
    pub provenance: Provenance,
    pub u: BlobInfo,
    pub p: BlobInfo,
    pub s: BlobInfo,
    /// Label supplied by the writer, e.g. the hash of the generating config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn to_bytes<'a>(values: impl Iterator<Item = &'a f64>) -> Vec<u8> {
    values.flat_map(|v| v.to_le_bytes()).collect()
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))?;
    f.sync_all().map_err(io_err(path))
}

/// Write `d` to the directory `path`, replacing any previous contents.
/// The container is assembled in a sibling temporary directory and moved
/// into place with a rename.
pub fn save_dataset(d: &OperatorDataset, path: &Path) -> Result<Manifest, DatasetError> {
    save_dataset_tagged(d, path, None)
}

/// [`save_dataset`] with a label stored in the manifest.
pub fn save_dataset_tagged(
    d: &OperatorDataset,
    path: &Path,
    tag: Option<&str>,
) -> Result<Manifest, DatasetError> {
    d.validate()?;
    let u = to_bytes(d.inputs.values.iter());
    let p = to_bytes(d.points.iter().flat_map(|m| m.iter()));
    let s = to_bytes(d.targets.iter());
    let blob = |file: &str, bytes: &[u8]| BlobInfo {
        file: file.to_string(),
        n_values: bytes.len() / 8,
        sha256: digest(bytes),
    };
    let manifest = Manifest {
        format: FORMAT.to_string(),
        version: FORMAT_VERSION,
        layout: d.layout,
        n_functions: d.n_functions(),
        n_sensors: d.inputs.sensors.len(),
        n_queries: d.n_queries(),
        query_dim: d.query_dim(),
        n_query_lists: d.points.len(),
        sensors: d.inputs.sensors.clone(),
        grf: d.inputs.config.clone(),
        grf_seed: d.inputs.seed,
        provenance: d.provenance.clone(),
        u: blob("u.f64", &u),
        p: blob("p.f64", &p),
        s: blob("s.f64", &s),
        tag: tag.map(str::to_string),
    };

    let tmp = temp_sibling(path);
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
    }
    fs::create_dir_all(&tmp).map_err(io_err(&tmp))?;
    write_file(&tmp.join("u.f64"), &u)?;
    write_file(&tmp.join("p.f64"), &p)?;
    write_file(&tmp.join("s.f64"), &s)?;
    let json =
        serde_json::to_vec_pretty(&manifest).map_err(|e| DatasetError::Manifest(e.to_string()))?;
    write_file(&tmp.join("manifest.json"), &json)?;
    if path.exists() {
        fs::remove_dir_all(path).map_err(io_err(path))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(manifest)
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

pub fn read_manifest(path: &Path) -> Result<Manifest, DatasetError> {
    let file = path.join("manifest.json");
    let bytes = fs::read(&file).map_err(io_err(&file))?;
    let m: Manifest =
        serde_json::from_slice(&bytes).map_err(|e| DatasetError::Manifest(e.to_string()))?;
    if m.format != FORMAT || m.version != FORMAT_VERSION {
        return Err(DatasetError::Manifest(format!(
            "unsupported format {} v{}",
            m.format, m.version
        )));
    }
    Ok(m)
}

fn read_blob(
    dir: &Path,
    info: &BlobInfo,
    expected_values: usize,
) -> Result<Vec<f64>, DatasetError> {
    if info.n_values != expected_values {
        return Err(DatasetError::Manifest(format!(
            "blob {} declares {} values, counts imply {expected_values}",
            info.file, info.n_values
        )));
    }
    let file = dir.join(&info.file);
    let bytes = fs::read(&file).map_err(io_err(&file))?;
    if bytes.len() != expected_values * 8 {
        return Err(DatasetError::Truncated {
            blob: info.file.clone(),
            expected: expected_values * 8,
            actual: bytes.len(),
        });
    }
    if digest(&bytes) != info.sha256 {
        return Err(DatasetError::Checksum {
            blob: info.file.clone(),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn load_dataset(path: &Path) -> Result<OperatorDataset, DatasetError> {
    let m = read_manifest(path)?;
    let expected_lists = match m.layout {
        Layout::Aligned => 1,
        Layout::Unaligned => m.n_functions,
    };
    if m.n_query_lists != expected_lists
        || m.sensors.len() != m.n_sensors
        || m.query_dim != m.provenance.problem.query_dim()
    {
        return Err(DatasetError::Manifest(
            "counts inconsistent with layout".into(),
        ));
    }
    let u = read_blob(path, &m.u, m.n_functions * m.n_sensors)?;
    let per_list = m.n_queries * m.query_dim;
    let p = read_blob(path, &m.p, m.n_query_lists * per_list)?;
    let s = read_blob(path, &m.s, m.n_functions * m.n_queries)?;

    let shape = |e: ndarray::ShapeError| DatasetError::Manifest(e.to_string());
    let points = if per_list == 0 {
        vec![Array2::zeros((m.n_queries, m.query_dim)); m.n_query_lists]
    } else {
        p.chunks_exact(per_list)
            .map(|c| Array2::from_shape_vec((m.n_queries, m.query_dim), c.to_vec()))
            .collect::<Result<_, _>>()
            .map_err(shape)?
    };
    let d = OperatorDataset {
        inputs: InputFunctionSet {
            values: Array2::from_shape_vec((m.n_functions, m.n_sensors), u).map_err(shape)?,
            sensors: m.sensors,
            config: m.grf,
            seed: m.grf_seed,
        },
        layout: m.layout,
        points,
        targets: Array2::from_shape_vec((m.n_functions, m.n_queries), s).map_err(shape)?,
        provenance: m.provenance,
    };
    d.validate()?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::build_ode_dataset;

    #[test]
    fn round_trip_is_bit_identical() {
        let (train, _) = build_ode_dataset(4, 1, 30, 12).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.opds");
        let m = save_dataset(&train, &path).unwrap();
        assert_eq!(m.s.n_values, 4 * 30);
        let back = load_dataset(&path).unwrap();
        assert_eq!(back, train);
        // Saving again over an existing container succeeds.
        save_dataset(&train, &path).unwrap();
    }

    #[test]
    fn truncation_and_checksum_errors() {
        let (train, _) = build_ode_dataset(2, 1, 10, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.opds");
        save_dataset(&train, &path).unwrap();
        let s = path.join("s.f64");
        let mut bytes = fs::read(&s).unwrap();
        bytes[3] ^= 1;
        fs::write(&s, &bytes).unwrap();
        assert!(matches!(
            load_dataset(&path),
            Err(DatasetError::Checksum { .. })
        ));
        fs::write(&s, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(
            load_dataset(&path),
            Err(DatasetError::Truncated { .. })
        ));
        fs::write(path.join("manifest.json"), b"{\"format\": 1").unwrap();
        assert!(matches!(
            load_dataset(&path),
            Err(DatasetError::Manifest(_))
        ));
    }
}
