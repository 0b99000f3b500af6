//! Single-array `.npy` containers.
//!
//! Predictions are little-endian float32 `(C, H, W)`, labels are uint8 or
//! little-endian uint16 `(H, W)`, entropy maps are float32 `(1, H, W)`. All
//! arrays are C-contiguous. Any other dtype, rank or order is rejected rather
//! than converted.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use npyz::{DType, NpyFile, Order, WriterBuilder};

use crate::error::{Error, Result};
use crate::maps::{LabelMap, ProbabilityMap};
use crate::uncertainty::UncertaintyMap;

fn open(path: &Path) -> Result<NpyFile<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let npy = NpyFile::new(BufReader::with_capacity(1 << 20, file))
        .map_err(|e| Error::load(path, format!("not a readable .npy file: {e}")))?;
    if npy.order() != Order::C {
        return Err(Error::load(
            path,
            "Fortran-ordered arrays are not supported",
        ));
    }
    Ok(npy)
}

fn type_string(npy: &NpyFile<BufReader<File>>) -> String {
    match npy.dtype() {
        DType::Plain(ts) => ts.to_string(),
        other => format!("{other:?}"),
    }
}

fn dims(path: &Path, shape: &[u64], rank: usize, what: &str) -> Result<Vec<usize>> {
    if shape.len() != rank {
        return Err(Error::load(
            path,
            format!("{what} must have rank {rank}, found shape {shape:?}"),
        ));
    }
    Ok(shape.iter().map(|&d| d as usize).collect())
}

/// Loads a `(C, H, W)` float32 softmax array.
pub fn load_probability_map(
    path: &Path,
    num_classes: usize,
    renormalize: bool,
) -> Result<ProbabilityMap> {
    let npy = open(path)?;
    let dtype = type_string(&npy);
    if dtype != "<f4" {
        return Err(Error::load(
            path,
            format!("prediction dtype must be little-endian float32 ('<f4'), found '{dtype}'"),
        ));
    }
    let shape = dims(path, npy.shape(), 3, "prediction")?;
    if shape[0] != num_classes {
        return Err(Error::load(
            path,
            format!(
                "prediction has {} classes, manifest declares {num_classes}",
                shape[0]
            ),
        ));
    }
    let values: Vec<f32> = npy
        .into_vec()
        .map_err(|e| Error::load(path, format!("truncated or unreadable data: {e}")))?;
    let built = if renormalize {
        ProbabilityMap::renormalized(values, shape[0], shape[1], shape[2])
    } else {
        ProbabilityMap::new(values, shape[0], shape[1], shape[2])
    };
    built.map_err(|e| Error::load(path, e.to_string()))
}

/// Loads a `(H, W)` uint8/uint16 class-index array.
pub fn load_label_map(path: &Path, num_classes: usize, ignore_index: u16) -> Result<LabelMap> {
    let npy = open(path)?;
    let dtype = type_string(&npy);
    let shape = dims(path, npy.shape(), 2, "label map")?;
    let read_err =
        |e: std::io::Error| Error::load(path, format!("truncated or unreadable data: {e}"));
    let labels: Vec<u16> = match dtype.as_str() {
        "|u1" => npy
            .into_vec::<u8>()
            .map_err(read_err)?
            .into_iter()
            .map(u16::from)
            .collect(),
        "<u2" => npy.into_vec::<u16>().map_err(read_err)?,
        _ => {
            return Err(Error::load(
                path,
                format!("label dtype must be uint8 ('|u1') or little-endian uint16 ('<u2'), found '{dtype}'"),
            ))
        }
    };
    let map = LabelMap::new(labels, shape[0], shape[1], ignore_index)
        .map_err(|e| Error::load(path, e.to_string()))?;
    map.validate(num_classes)
        .map_err(|e| Error::load(path, e.to_string()))?;
    Ok(map)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(|f| BufWriter::with_capacity(1 << 20, f))
        .map_err(|e| Error::io(path, e))
}

fn little_f4() -> DType {
    DType::Plain("<f4".parse().expect("valid type string"))
}

pub fn write_probability_map(path: &Path, map: &ProbabilityMap) -> Result<()> {
    let shape = [
        map.num_classes() as u64,
        map.height() as u64,
        map.width() as u64,
    ];
    write_f32(path, &shape, map.values().iter().copied())
}

/// Writes uint8 when every value (and the ignore index) fits, uint16 otherwise.
pub fn write_label_map(path: &Path, labels: &LabelMap) -> Result<()> {
    let shape = [labels.height() as u64, labels.width() as u64];
    let io_err = |e| Error::io(path, e);
    let mut out = create(path)?;
    let narrow = labels.ignore_index() <= u8::MAX as u16
        && labels.labels().iter().all(|&l| l <= u8::MAX as u16);
    if narrow {
        let mut w = npyz::WriteOptions::new()
            .default_dtype()
            .shape(&shape)
            .writer(&mut out)
            .begin_nd()
            .map_err(io_err)?;
        w.extend(labels.labels().iter().map(|&l| l as u8))
            .map_err(io_err)?;
        w.finish().map_err(io_err)?;
    } else {
        let mut w = npyz::WriteOptions::new()
            .dtype(DType::Plain("<u2".parse().expect("valid type string")))
            .shape(&shape)
            .writer(&mut out)
            .begin_nd()
            .map_err(io_err)?;
        w.extend(labels.labels().iter().copied()).map_err(io_err)?;
        w.finish().map_err(io_err)?;
    }
    Ok(())
}

/// Writes entropies as a single-channel float32 `(1, H, W)` array.
pub fn write_entropy_map(path: &Path, umap: &UncertaintyMap) -> Result<()> {
    let shape = [1, umap.height() as u64, umap.width() as u64];
    write_f32(path, &shape, umap.values().iter().map(|&h| h as f32))
}

pub fn load_entropy_map(path: &Path) -> Result<UncertaintyMap> {
    let npy = open(path)?;
    let dtype = type_string(&npy);
    if dtype != "<f4" {
        return Err(Error::load(
            path,
            format!("entropy dtype must be '<f4', found '{dtype}'"),
        ));
    }
    let shape = dims(path, npy.shape(), 3, "entropy map")?;
    if shape[0] != 1 {
        return Err(Error::load(path, "entropy map must have a single channel"));
    }
    let values: Vec<f32> = npy
        .into_vec()
        .map_err(|e| Error::load(path, format!("truncated or unreadable data: {e}")))?;
    UncertaintyMap::new(
        values.into_iter().map(f64::from).collect(),
        shape[1],
        shape[2],
    )
}

fn write_f32(path: &Path, shape: &[u64], values: impl Iterator<Item = f32>) -> Result<()> {
    let io_err = |e| Error::io(path, e);
    let mut out = create(path)?;
    let mut w = npyz::WriteOptions::new()
        .dtype(little_f4())
        .shape(shape)
        .writer(&mut out)
        .begin_nd()
        .map_err(io_err)?;
    w.extend(values).map_err(io_err)?;
    w.finish().map_err(io_err)?;
    Ok(())
}
