//! Binary grid files and 8-bit PNG conversion.
//!
//! Grid layout: 4-byte magic, `u32` LE height, width and channel count, then
//! `H * W * C` little-endian `f32` values in row-major HWC order.

use std::io::Write;
use std::path::Path;

use hytex_tensor::{Shape, Tensor};
use image::{GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::Image;

pub const UV_MAGIC: &[u8; 4] = b"UVW1";
pub const FLOW_MAGIC: &[u8; 4] = b"FLW1";
pub const CONF_MAGIC: &[u8; 4] = b"CNF1";

/// Little-endian reader over a byte slice that reports truncation as a format error.
pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    pub fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Cursor { bytes, pos: 0, path }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format(self.path, format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let m = self.take(4)?;
        if m != expected {
            return Err(Error::format(
                self.path,
                format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(m), String::from_utf8_lossy(expected)),
            ));
        }
        Ok(())
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let len = n.checked_mul(4).ok_or_else(|| Error::format(self.path, "size overflow"))?;
        Ok(self.take(len)?.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect())
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(self.path, format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f32>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Write the tensor to `path`, creating parent directories.
pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// Serialize a `1 x C x H x W` tensor in grid format.
pub fn encode_grid(magic: &[u8; 4], t: &Tensor<f32>) -> Vec<u8> {
    let s = t.shape();
    assert_eq!(s.n, 1, "grid files hold a single image");
    let mut out = Vec::with_capacity(16 + 4 * s.numel());
    out.extend_from_slice(magic);
    for d in [s.h, s.w, s.c] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for y in 0..s.h {
        for x in 0..s.w {
            put_f32s(&mut out, (0..s.c).map(|c| t.at(0, c, y, x)));
        }
    }
    out
}

pub fn decode_grid(magic: &[u8; 4], bytes: &[u8], path: &Path) -> Result<Tensor<f32>> {
    let mut cur = Cursor::new(bytes, path);
    cur.magic(magic)?;
    let (h, w, c) = (cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize);
    let n = h.checked_mul(w).and_then(|v| v.checked_mul(c)).ok_or_else(|| Error::format(path, "size overflow"))?;
    let vals = cur.f32s(n)?;
    cur.finish()?;
    Ok(Tensor::from_fn(Shape::new(1, c, h, w), |_, ch, y, x| vals[(y * w + x) * c + ch]))
}

pub fn write_grid(path: &Path, magic: &[u8; 4], t: &Tensor<f32>) -> Result<()> {
    write_bytes(path, &encode_grid(magic, t))
}

pub fn read_grid(path: &Path, magic: &[u8; 4]) -> Result<Tensor<f32>> {
    decode_grid(magic, &std::fs::read(path)?, path)
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Quantize an RGB image (`1 x 3 x H x W`, values clamped to `[0, 1]`).
pub fn to_rgb8(img: &Image) -> RgbImage {
    let s = img.shape();
    RgbImage::from_fn(s.w as u32, s.h as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        image::Rgb([to_u8(img.at(0, 0, y, x)), to_u8(img.at(0, 1, y, x)), to_u8(img.at(0, 2, y, x))])
    })
}

pub fn from_rgb8(img: &RgbImage) -> Image {
    let (w, h) = img.dimensions();
    Tensor::from_fn(Shape::new(1, 3, h as usize, w as usize), |_, c, y, x| {
        img.get_pixel(x as u32, y as u32)[c] as f32 / 255.0
    })
}

pub fn save_png(path: &Path, img: &Image) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    to_rgb8(img).save(path)?;
    Ok(())
}

pub fn load_png(path: &Path) -> Result<Image> {
    let img = image::open(path).map_err(|e| Error::format(path, e.to_string()))?;
    Ok(from_rgb8(&img.to_rgb8()))
}

pub fn save_gray_png(path: &Path, values: &[u8], h: usize, w: usize) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let img = GrayImage::from_raw(w as u32, h as u32, values.to_vec())
        .ok_or_else(|| Error::shape("gray png", format!("{} values for {h}x{w}", values.len())))?;
    img.save(path)?;
    Ok(())
}

pub fn load_gray_png(path: &Path) -> Result<(Vec<u8>, usize, usize)> {
    let img = image::open(path).map_err(|e| Error::format(path, e.to_string()))?.to_luma8();
    let (w, h) = img.dimensions();
    Ok((img.into_raw(), h as usize, w as usize))
}

/// Write `frames` as a lossless animated PNG (8-bit RGB) at `fps` frames per second.
pub fn save_apng(path: &Path, frames: &[Image], fps: u16) -> Result<()> {
    let first = frames.first().ok_or_else(|| Error::Argument("a video needs at least one frame".into()))?;
    let s = first.shape();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let png_err = |e: png::EncodingError| Error::format(path, e.to_string());
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut enc = png::Encoder::new(file, s.w as u32, s.h as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_animated(frames.len() as u32, 0).map_err(png_err)?;
    enc.set_frame_delay(1, fps.max(1)).map_err(png_err)?;
    let mut writer = enc.write_header().map_err(png_err)?;
    for (k, f) in frames.iter().enumerate() {
        if f.shape() != s {
            return Err(Error::shape("save_apng", format!("frame {k} is {}, first frame is {s}", f.shape())));
        }
        writer.write_image_data(to_rgb8(f).as_raw()).map_err(png_err)?;
    }
    writer.finish().map_err(png_err)?;
    Ok(())
}

/// Decode every frame of an animated PNG written by [`save_apng`].
pub fn load_apng(path: &Path) -> Result<Vec<Image>> {
    let fmt = |e: png::DecodingError| Error::format(path, e.to_string());
    let dec = png::Decoder::new(std::io::BufReader::new(std::fs::File::open(path)?));
    let mut reader = dec.read_info().map_err(fmt)?;
    let info = reader.info();
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format(path, "expected 8-bit RGB"));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let count = info.animation_control.map_or(1, |a| a.num_frames as usize);
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| Error::format(path, "image too large"))?];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        reader.next_frame(&mut buf).map_err(fmt)?;
        out.push(Tensor::from_fn(Shape::new(1, 3, h, w), |_, c, y, x| buf[(y * w + x) * 3 + c] as f32 / 255.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn grid_round_trip_is_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let t = Tensor::<f32>::uniform(Shape::new(1, 2, 5, 7), -3.0, 3.0, &mut rng);
        let bytes = encode_grid(FLOW_MAGIC, &t);
        assert_eq!(bytes.len(), 16 + 4 * 70);
        assert_eq!(&bytes[..4], b"FLW1");
        // channels interleaved per pixel
        assert_eq!(f32::from_le_bytes(bytes[20..24].try_into().unwrap()), t.at(0, 1, 0, 0));
        assert_eq!(decode_grid(FLOW_MAGIC, &bytes, Path::new("x")).unwrap(), t);
    }

    #[test]
    fn grid_rejects_bad_magic_and_truncation() {
        let t = Tensor::<f32>::ones(Shape::new(1, 1, 2, 2));
        let bytes = encode_grid(CONF_MAGIC, &t);
        assert!(matches!(decode_grid(UV_MAGIC, &bytes, Path::new("x")), Err(Error::Format { .. })));
        assert!(matches!(decode_grid(CONF_MAGIC, &bytes[..bytes.len() - 1], Path::new("x")), Err(Error::Format { .. })));
        assert!(matches!(decode_grid(CONF_MAGIC, &bytes[..6], Path::new("x")), Err(Error::Format { .. })));
    }

    #[test]
    fn png_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let img = Tensor::from_fn(Shape::new(1, 3, 4, 6), |_, c, y, x| ((c + y * 6 + x) % 11) as f32 / 10.0);
        let p = dir.path().join("a.png");
        save_png(&p, &img).unwrap();
        let back = load_png(&p).unwrap();
        assert_eq!(back.shape(), img.shape());
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn apng_round_trip_is_lossless_after_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<Image> =
            (0..3).map(|k| Tensor::from_fn(Shape::new(1, 3, 4, 5), |_, c, y, x| ((k + c + y * 5 + x) % 7) as f32 / 6.0)).collect();
        let p = dir.path().join("v.apng");
        save_apng(&p, &frames, 10).unwrap();
        let back = load_apng(&p).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in back.iter().zip(&frames) {
            assert_eq!(to_rgb8(a), to_rgb8(b));
        }
    }
}
