//! Little-endian binary artifacts: raw images, descriptor sets, PCA and GMM models,
//! encoded vectors.
//!
//! Every file starts with an 8-byte ASCII magic. Identifiers are stored as a `u16` byte
//! length followed by UTF-8.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::colorgrid::RasterImage;
use crate::descriptor::{DescriptorSet, StreamKind};
use crate::encoding::{EncodedImage, GmmModel};
use crate::error::{Error, Result};
use crate::reduction::PcaModel;

pub const IMAGE_MAGIC: &[u8; 8] = b"LCCDIMG1";
pub const DESCRIPTOR_MAGIC: &[u8; 8] = b"LCCDDSC1";
pub const PCA_MAGIC: &[u8; 8] = b"LCCDPCA1";
pub const GMM_MAGIC: &[u8; 8] = b"LCCDGMM1";
pub const ENCODING_MAGIC: &[u8; 8] = b"LCCDENC1";

/// Refuse to allocate more values than this for a single record of a corrupt file.
const MAX_RECORD_VALUES: usize = 1 << 30;

fn read_magic(r: &mut impl Read, magic: &[u8; 8], format: &'static str) -> Result<()> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|e| eof(e, format))?;
    if &buf != magic {
        return Err(Error::format(format, "bad magic"));
    }
    Ok(())
}

fn eof(e: std::io::Error, format: &'static str) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::format(format, "truncated")
    } else {
        Error::Io(e)
    }
}

fn read_u32(r: &mut impl Read, format: &'static str) -> Result<usize> {
    Ok(r.read_u32::<LE>().map_err(|e| eof(e, format))? as usize)
}

fn write_u32(w: &mut impl Write, v: usize, what: &str) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::input(format!("{what} {v} does not fit in u32")))?;
    w.write_u32::<LE>(v)?;
    Ok(())
}

fn checked_len(parts: &[usize], format: &'static str) -> Result<usize> {
    parts
        .iter()
        .try_fold(1usize, |a, &b| a.checked_mul(b))
        .filter(|&n| n <= MAX_RECORD_VALUES)
        .ok_or_else(|| Error::format(format, "declared size is implausibly large"))
}

fn write_id(w: &mut impl Write, id: &str) -> Result<()> {
    let len = u16::try_from(id.len()).map_err(|_| Error::input(format!("image id too long: {} bytes", id.len())))?;
    w.write_u16::<LE>(len)?;
    w.write_all(id.as_bytes())?;
    Ok(())
}

fn read_id(r: &mut impl Read, format: &'static str) -> Result<String> {
    let len = r.read_u16::<LE>().map_err(|e| eof(e, format))? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(|e| eof(e, format))?;
    String::from_utf8(buf).map_err(|_| Error::format(format, "image id is not UTF-8"))
}

fn read_f64s(r: &mut impl Read, n: usize, format: &'static str) -> Result<Vec<f64>> {
    let mut v = vec![0.0; n];
    r.read_f64_into::<LE>(&mut v).map_err(|e| eof(e, format))?;
    Ok(v)
}

fn write_f64s(w: &mut impl Write, v: &[f64]) -> Result<()> {
    for &x in v {
        w.write_f64::<LE>(x)?;
    }
    Ok(())
}

fn read_f32s(r: &mut impl Read, n: usize, format: &'static str) -> Result<Vec<f32>> {
    let mut v = vec![0.0; n];
    r.read_f32_into::<LE>(&mut v).map_err(|e| eof(e, format))?;
    Ok(v)
}

fn write_f32s(w: &mut impl Write, v: impl IntoIterator<Item = f32>) -> Result<()> {
    for x in v {
        w.write_f32::<LE>(x)?;
    }
    Ok(())
}

/// Reads `LCCDIMG1`: u32 width, u32 height, u8 channels (must be 3), then planar samples
/// (all R, then all G, then all B), each plane row-major.
pub fn read_raw_image(r: &mut impl Read) -> Result<RasterImage> {
    const F: &str = "LCCDIMG1";
    read_magic(r, IMAGE_MAGIC, F)?;
    let w = read_u32(r, F)?;
    let h = read_u32(r, F)?;
    let channels = r.read_u8().map_err(|e| eof(e, F))?;
    if channels != 3 {
        return Err(Error::format(F, format!("expected 3 channels, found {channels}")));
    }
    let n = checked_len(&[w, h], F)?;
    let mut planar = vec![0u8; n * 3];
    r.read_exact(&mut planar).map_err(|e| eof(e, F))?;
    let mut data = vec![0u8; n * 3];
    for i in 0..n {
        for c in 0..3 {
            data[i * 3 + c] = planar[c * n + i];
        }
    }
    RasterImage::new(w, h, data)
}

pub fn write_raw_image(w: &mut impl Write, img: &RasterImage) -> Result<()> {
    w.write_all(IMAGE_MAGIC)?;
    write_u32(w, img.width(), "width")?;
    write_u32(w, img.height(), "height")?;
    w.write_u8(3)?;
    for c in 0..3 {
        let plane: Vec<u8> = img.data().iter().skip(c).step_by(3).copied().collect();
        w.write_all(&plane)?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed part of an `LCCDDSC1` file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DescriptorHeader {
    pub stream: StreamKind,
    pub dim: usize,
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub count: usize,
}

impl DescriptorHeader {
    pub fn values_per_image(&self) -> usize {
        self.dim * self.patch_rows * self.patch_cols
    }
}

/// Streams descriptor sets into an `LCCDDSC1` file; the image count is patched in by
/// [`DescriptorWriter::finish`].
pub struct DescriptorWriter<W: Write + Seek> {
    inner: W,
    header: DescriptorHeader,
    count_offset: u64,
}

impl<W: Write + Seek> DescriptorWriter<W> {
    pub fn new(mut inner: W, stream: StreamKind, dim: usize, patch_rows: usize, patch_cols: usize) -> Result<Self> {
        let start = inner.stream_position()?;
        inner.write_all(DESCRIPTOR_MAGIC)?;
        inner.write_u8(stream.id())?;
        write_u32(&mut inner, dim, "descriptor dim")?;
        write_u32(&mut inner, patch_rows, "patch rows")?;
        write_u32(&mut inner, patch_cols, "patch cols")?;
        inner.write_u32::<LE>(0)?;
        Ok(DescriptorWriter {
            inner,
            header: DescriptorHeader {
                stream,
                dim,
                patch_rows,
                patch_cols,
                count: 0,
            },
            count_offset: start + 8 + 1 + 12,
        })
    }

    pub fn header(&self) -> DescriptorHeader {
        self.header
    }

    pub fn write(&mut self, set: &DescriptorSet) -> Result<()> {
        let h = &self.header;
        if set.stream != h.stream
            || set.dim != h.dim
            || set.patch_rows != h.patch_rows
            || set.patch_cols != h.patch_cols
        {
            return Err(Error::input(format!(
                "descriptor set {:?} ({} {}x{}x{}) does not match file ({} {}x{}x{})",
                set.image_id,
                set.stream.name(),
                set.dim,
                set.patch_rows,
                set.patch_cols,
                h.stream.name(),
                h.dim,
                h.patch_rows,
                h.patch_cols
            )));
        }
        write_id(&mut self.inner, &set.image_id)?;
        write_f32s(&mut self.inner, set.values.iter().copied())?;
        self.header.count += 1;
        Ok(())
    }

    /// Writes the final image count and returns the underlying writer.
    pub fn finish(mut self) -> Result<W> {
        let end = self.inner.stream_position()?;
        self.inner.seek(SeekFrom::Start(self.count_offset))?;
        write_u32(&mut self.inner, self.header.count, "image count")?;
        self.inner.seek(SeekFrom::Start(end))?;
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Iterates the descriptor sets of an `LCCDDSC1` stream.
pub struct DescriptorReader<R: Read> {
    inner: R,
    header: DescriptorHeader,
    remaining: usize,
}

impl<R: Read> DescriptorReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        const F: &str = "LCCDDSC1";
        read_magic(&mut inner, DESCRIPTOR_MAGIC, F)?;
        let id = inner.read_u8().map_err(|e| eof(e, F))?;
        let stream = StreamKind::from_id(id).ok_or_else(|| Error::format(F, format!("unknown stream id {id}")))?;
        let dim = read_u32(&mut inner, F)?;
        let patch_rows = read_u32(&mut inner, F)?;
        let patch_cols = read_u32(&mut inner, F)?;
        let count = read_u32(&mut inner, F)?;
        let header = DescriptorHeader {
            stream,
            dim,
            patch_rows,
            patch_cols,
            count,
        };
        checked_len(&[dim, patch_rows, patch_cols], F)?;
        Ok(DescriptorReader {
            inner,
            header,
            remaining: count,
        })
    }

    pub fn header(&self) -> DescriptorHeader {
        self.header
    }

    fn read_one(&mut self) -> Result<DescriptorSet> {
        const F: &str = "LCCDDSC1";
        let id = read_id(&mut self.inner, F)?;
        let values = read_f32s(&mut self.inner, self.header.values_per_image(), F)?;
        let h = self.header;
        DescriptorSet::new(id, h.stream, h.dim, h.patch_rows, h.patch_cols, values)
    }
}

impl<R: Read> Iterator for DescriptorReader<R> {
    type Item = Result<DescriptorSet>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let item = self.read_one();
        if item.is_err() {
            self.remaining = 0;
        }
        Some(item)
    }
}

pub fn open_descriptors(path: impl AsRef<Path>) -> Result<DescriptorReader<BufReader<File>>> {
    DescriptorReader::new(BufReader::new(File::open(path)?))
}

/// Writes a complete descriptor file from in-memory sets (all of the same shape).
pub fn write_descriptor_file(path: impl AsRef<Path>, header: DescriptorHeader, sets: &[DescriptorSet]) -> Result<()> {
    let mut w = DescriptorWriter::new(
        BufWriter::new(File::create(path)?),
        header.stream,
        header.dim,
        header.patch_rows,
        header.patch_cols,
    )?;
    for s in sets {
        w.write(s)?;
    }
    w.finish()?;
    Ok(())
}

/// `LCCDPCA1`: u32 D, u32 K, D f64 mean, K x D f64 components (row per component).
pub fn write_pca(w: &mut impl Write, model: &PcaModel) -> Result<()> {
    w.write_all(PCA_MAGIC)?;
    write_u32(w, model.input_dim(), "PCA input dim")?;
    write_u32(w, model.output_dim(), "PCA output dim")?;
    write_f64s(w, model.mean())?;
    write_f64s(w, model.components())?;
    w.flush()?;
    Ok(())
}

pub fn read_pca(r: &mut impl Read) -> Result<PcaModel> {
    const F: &str = "LCCDPCA1";
    read_magic(r, PCA_MAGIC, F)?;
    let d = read_u32(r, F)?;
    let k = read_u32(r, F)?;
    let n = checked_len(&[d, k], F)?;
    let mean = read_f64s(r, d, F)?;
    let components = read_f64s(r, n, F)?;
    PcaModel::from_parts(mean, components, k).map_err(|e| Error::format(F, e.to_string()))
}

/// `LCCDGMM1`: u32 K, u32 dim, K f64 weights, K x dim f64 means, K x dim f64 variances.
pub fn write_gmm(w: &mut impl Write, model: &GmmModel) -> Result<()> {
    w.write_all(GMM_MAGIC)?;
    write_u32(w, model.components(), "GMM components")?;
    write_u32(w, model.dim(), "GMM dim")?;
    write_f64s(w, model.weights())?;
    write_f64s(w, model.means())?;
    write_f64s(w, model.variances())?;
    w.flush()?;
    Ok(())
}

pub fn read_gmm(r: &mut impl Read) -> Result<GmmModel> {
    const F: &str = "LCCDGMM1";
    read_magic(r, GMM_MAGIC, F)?;
    let k = read_u32(r, F)?;
    let dim = read_u32(r, F)?;
    let n = checked_len(&[k, dim], F)?;
    let weights = read_f64s(r, k, F)?;
    let means = read_f64s(r, n, F)?;
    let variances = read_f64s(r, n, F)?;
    GmmModel::from_parts(dim, weights, means, variances).map_err(|e| Error::format(F, e.to_string()))
}

/// `LCCDENC1`: u32 dim, u32 count, then per image an id and `dim` f32 values.
pub fn write_encodings(w: &mut impl Write, dim: usize, items: &[EncodedImage]) -> Result<()> {
    w.write_all(ENCODING_MAGIC)?;
    write_u32(w, dim, "encoding dim")?;
    write_u32(w, items.len(), "encoding count")?;
    for it in items {
        if it.vector.len() != dim {
            return Err(Error::input(format!(
                "encoding of {:?} has dim {}, expected {dim}",
                it.image_id,
                it.vector.len()
            )));
        }
        write_id(w, &it.image_id)?;
        write_f32s(w, it.vector.iter().map(|&v| v as f32))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_encodings(r: &mut impl Read) -> Result<(usize, Vec<EncodedImage>)> {
    const F: &str = "LCCDENC1";
    read_magic(r, ENCODING_MAGIC, F)?;
    let dim = read_u32(r, F)?;
    let count = read_u32(r, F)?;
    checked_len(&[dim], F)?;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let image_id = read_id(r, F)?;
        let vector = read_f32s(r, dim, F)?.into_iter().map(f64::from).collect();
        out.push(EncodedImage { image_id, vector });
    }
    Ok((dim, out))
}

pub fn save_pca(path: impl AsRef<Path>, model: &PcaModel) -> Result<()> {
    write_pca(&mut BufWriter::new(File::create(path)?), model)
}

pub fn load_pca(path: impl AsRef<Path>) -> Result<PcaModel> {
    read_pca(&mut BufReader::new(File::open(path)?))
}

pub fn save_gmm(path: impl AsRef<Path>, model: &GmmModel) -> Result<()> {
    write_gmm(&mut BufWriter::new(File::create(path)?), model)
}

pub fn load_gmm(path: impl AsRef<Path>) -> Result<GmmModel> {
    read_gmm(&mut BufReader::new(File::open(path)?))
}

pub fn save_encodings(path: impl AsRef<Path>, dim: usize, items: &[EncodedImage]) -> Result<()> {
    write_encodings(&mut BufWriter::new(File::create(path)?), dim, items)
}

pub fn load_encodings(path: impl AsRef<Path>) -> Result<(usize, Vec<EncodedImage>)> {
    read_encodings(&mut BufReader::new(File::open(path)?))
}
