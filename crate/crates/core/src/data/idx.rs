//! IDX container used by MNIST: big-endian u32 magic and dimensions
//! followed by unsigned bytes.

use std::fs;
use std::io::{Cursor, Write};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};

use super::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_header(path: &Path, bytes: &[u8], magic: u32, dims: usize) -> Result<Vec<usize>> {
    let mut cur = Cursor::new(bytes);
    let truncated = |what: &str| Error::Truncated {
        path: path.to_path_buf(),
        detail: format!("missing {what}"),
    };
    let found = cur
        .read_u32::<BigEndian>()
        .map_err(|_| truncated("magic number"))?;
    if found != magic {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: magic,
            found,
        });
    }
    (0..dims)
        .map(|i| {
            cur.read_u32::<BigEndian>()
                .map(|v| v as usize)
                .map_err(|_| truncated(&format!("dimension {i}")))
        })
        .collect()
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn payload<'a>(
    path: &Path,
    bytes: &'a [u8],
    header_len: usize,
    expected: usize,
) -> Result<&'a [u8]> {
    let body = &bytes[header_len..];
    if body.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            detail: format!("expected {expected} data bytes, found {}", body.len()),
        });
    }
    Ok(&body[..expected])
}

/// Loads an image/label IDX pair. Pixels are scaled by 1/255; the class
/// count is one more than the largest label.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();

    let image_bytes = read_file(images_path)?;
    let dims = read_header(images_path, &image_bytes, IDX_IMAGES_MAGIC, 3)?;
    let (n_images, rows, cols) = (dims[0], dims[1], dims[2]);
    let d = rows * cols;
    let pixels = payload(images_path, &image_bytes, 16, n_images * d)?;

    let label_bytes = read_file(labels_path)?;
    let dims = read_header(labels_path, &label_bytes, IDX_LABELS_MAGIC, 1)?;
    let n_labels = dims[0];
    if n_labels != n_images {
        return Err(Error::CountMismatch {
            images: n_images,
            labels: n_labels,
        });
    }
    let raw_labels = payload(labels_path, &label_bytes, 8, n_labels)?;

    let features: Vec<f64> = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels: Vec<usize> = raw_labels.iter().map(|&l| usize::from(l)).collect();
    let class_count = labels.iter().copied().max().map_or(1, |m| m + 1);
    Dataset::new(Matrix::new(n_images, d, features)?, labels, class_count)
}

/// Writes `data` as an IDX pair with `rows × cols` images. Features are
/// quantized to the nearest multiple of 1/255.
pub fn write_idx(
    data: &Dataset,
    rows: usize,
    cols: usize,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    if rows * cols != data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{rows}x{cols} images need {} features, dataset has {}",
            rows * cols,
            data.dim()
        )));
    }
    if data.class_count() > 256 {
        return Err(Error::InvalidArgument("IDX labels are single bytes".into()));
    }
    let n = data.len();
    let mut img = Vec::with_capacity(16 + n * data.dim());
    let header = |buf: &mut Vec<u8>, magic: u32, dims: &[usize]| {
        buf.write_u32::<BigEndian>(magic).expect("vec write");
        for &dim in dims {
            buf.write_u32::<BigEndian>(dim as u32).expect("vec write");
        }
    };
    header(&mut img, IDX_IMAGES_MAGIC, &[n, rows, cols]);
    img.extend(
        data.features()
            .as_slice()
            .iter()
            .map(|v| (v * 255.0).round() as u8),
    );
    let mut lbl = Vec::with_capacity(8 + n);
    header(&mut lbl, IDX_LABELS_MAGIC, &[n]);
    lbl.extend(data.labels().iter().map(|&l| l as u8));

    for (path, bytes) in [(images_path, img), (labels_path, lbl)] {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, bytes).unwrap();
        p
    }

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut v = magic.to_be_bytes().to_vec();
        for d in dims {
            v.extend_from_slice(&d.to_be_bytes());
        }
        v
    }

    #[test]
    fn loads_and_scales() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = header(IDX_IMAGES_MAGIC, &[2, 1, 2]);
        img.extend_from_slice(&[0, 255, 51, 102]);
        let mut lbl = header(IDX_LABELS_MAGIC, &[2]);
        lbl.extend_from_slice(&[3, 1]);
        let d = load_idx(
            write_raw(dir.path(), "i", &img),
            write_raw(dir.path(), "l", &lbl),
        )
        .unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dim(), 2);
        assert_eq!(d.class_count(), 4);
        assert_eq!(d.features().row(0), &[0.0, 1.0]);
        assert_eq!(d.features().row(1), &[0.2, 0.4]);
        assert_eq!(d.labels(), &[3, 1]);
    }

    #[test]
    fn distinct_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = header(0x0000_0801, &[1, 1, 1]);
        img.push(0);
        let mut lbl = header(IDX_LABELS_MAGIC, &[1]);
        lbl.push(0);
        let l = write_raw(dir.path(), "l", &lbl);
        let err = load_idx(write_raw(dir.path(), "bad", &img), &l).unwrap_err();
        assert!(matches!(err, Error::BadMagic { found: 0x801, .. }));
        assert!(err.to_string().contains("bad magic"));

        let mut img = header(IDX_IMAGES_MAGIC, &[2, 2, 2]);
        img.extend_from_slice(&[1, 2, 3]);
        let err = load_idx(write_raw(dir.path(), "short", &img), &l).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. }));

        let err = load_idx(write_raw(dir.path(), "hdr", &[0, 0, 8]), &l).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. }));

        let mut img = header(IDX_IMAGES_MAGIC, &[2, 1, 1]);
        img.extend_from_slice(&[1, 2]);
        let err = load_idx(write_raw(dir.path(), "two", &img), &l).unwrap_err();
        assert!(matches!(
            err,
            Error::CountMismatch {
                images: 2,
                labels: 1
            }
        ));

        let err = load_idx(dir.path().join("missing"), &l).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
