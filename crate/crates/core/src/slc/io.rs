//! SLC1 container and 8-bit exports.
//!
//! SLC1 layout, little-endian: `b"SLC1"`, `u32 rows`, `u32 cols`, then
//! `rows·cols` interleaved `f32` pairs `(re, im)`, row-major.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use super::{RealImage, SlcImage};
use crate::error::{Error, Result};

pub const SLC1_MAGIC: &[u8; 4] = b"SLC1";
const HEADER_LEN: usize = 12;

/// Serializes an image; values are narrowed to `f32`.
pub fn encode_slc(g: &SlcImage) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + g.as_slice().len() * 8);
    out.extend_from_slice(SLC1_MAGIC);
    let size = u32::try_from(g.size()).map_err(|_| Error::Size(format!("{} too large", g.size())))?;
    out.extend_from_slice(&size.to_le_bytes());
    out.extend_from_slice(&size.to_le_bytes());
    for z in g.as_slice() {
        let (re, im) = (z.re as f32, z.im as f32);
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::NonFinite("SLC1 payload (f32 overflow)"));
        }
        out.extend_from_slice(&re.to_le_bytes());
        out.extend_from_slice(&im.to_le_bytes());
    }
    Ok(out)
}

/// Parses an SLC1 buffer. Rejects bad magic, short or overlong payloads,
/// non-square shapes and non-finite samples.
pub fn decode_slc(bytes: &[u8]) -> Result<SlcImage> {
    if bytes.len() < 4 || &bytes[..4] != SLC1_MAGIC {
        return Err(Error::Format("missing SLC1 magic".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let payload = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Format(format!("header size {rows}x{cols} overflows")))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() < payload {
        return Err(Error::Truncated {
            expected: HEADER_LEN + payload,
            found: bytes.len(),
        });
    }
    if body.len() > payload {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            body.len() - payload
        )));
    }
    if rows != cols {
        return Err(Error::Shape {
            expected: "square image".into(),
            actual: format!("{rows}x{cols}"),
        });
    }
    let data = body
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..].try_into().unwrap());
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    SlcImage::from_vec(rows, data)
}

pub fn write_slc(g: &SlcImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_slc(g)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_slc(path: impl AsRef<Path>) -> Result<SlcImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_slc(&bytes)
}

fn to_u8(img: &RealImage) -> Vec<u8> {
    img.as_slice()
        .iter()
        .map(|v| (255.0 * v.clamp(0.0, 1.0)).round() as u8)
        .collect()
}

/// Binary PGM (P5) of a `[0, 1]` image, `round(255·v)` per pixel.
pub fn encode_pgm(img: &RealImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.size(), img.size()).into_bytes();
    out.extend(to_u8(img));
    out
}

pub fn write_pgm(img: &RealImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_pgm(img)).map_err(|e| Error::io(path, e))
}

pub fn write_png(img: &RealImage, path: impl AsRef<Path>) -> Result<()> {
    let size = img.size() as u32;
    let buf = image::GrayImage::from_raw(size, size, to_u8(img))
        .expect("buffer length matches image size");
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::Rng;
    use proptest::prelude::*;

    fn f32_image(size: usize, seed: u64) -> SlcImage {
        let mut rng = Rng::new(seed);
        let data = (0..size * size)
            .map(|_| Complex64::new(rng.gaussian() as f32 as f64, rng.gaussian() as f32 as f64))
            .collect();
        SlcImage::from_vec(size, data).unwrap()
    }

    #[test]
    fn write_then_read_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.slc");
        let g = f32_image(16, 11);
        write_slc(&g, &path).unwrap();
        let back = read_slc(&path).unwrap();
        assert_eq!(back, g);
        assert_eq!(fs::read(&path).unwrap(), encode_slc(&back).unwrap());
    }

    #[test]
    fn header_layout() {
        let g = SlcImage::from_vec(1, vec![Complex64::new(1.0, -2.0)]).unwrap();
        let bytes = encode_slc(&g).unwrap();
        assert_eq!(&bytes[..4], b"SLC1");
        assert_eq!(&bytes[4..12], &[1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[16..20], &(-2.0f32).to_le_bytes());
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_slc(&f32_image(8, 1)).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_slc(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = b"SLC1".to_vec();
        bytes.extend_from_slice(&256u32.to_le_bytes());
        bytes.extend_from_slice(&256u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 1000]);
        assert!(matches!(decode_slc(&bytes), Err(Error::Truncated { .. })));
        assert!(matches!(decode_slc(b"SLC1\x01\x00"), Err(Error::Truncated { .. })));
    }

    #[test]
    fn non_finite_payload() {
        let mut bytes = encode_slc(&f32_image(8, 2)).unwrap();
        bytes[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_slc(&bytes), Err(Error::NonFinite(_))));
        let huge = SlcImage::from_vec(1, vec![Complex64::new(1e300, 0.0)]).unwrap();
        assert!(matches!(encode_slc(&huge), Err(Error::NonFinite(_))));
    }

    #[test]
    fn non_square_and_trailing_bytes() {
        let mut bytes = b"SLC1".to_vec();
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 16]);
        assert!(matches!(decode_slc(&bytes), Err(Error::Shape { .. })));
        let mut bytes = encode_slc(&f32_image(8, 3)).unwrap();
        bytes.push(0);
        assert!(matches!(decode_slc(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn pgm_quantization() {
        let img = RealImage::from_vec(2, vec![0.0, 0.5, 1.0, 0.2]).unwrap();
        let pgm = encode_pgm(&img);
        assert!(pgm.starts_with(b"P5\n2 2\n255\n"));
        assert_eq!(&pgm[pgm.len() - 4..], &[0, 128, 255, 51]);
    }

    #[test]
    fn png_export_round_trips_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = RealImage::from_vec(2, vec![0.0, 0.5, 1.0, 0.2]).unwrap();
        write_png(&img, &path).unwrap();
        let back = image::open(&path).unwrap().into_luma8();
        assert_eq!(back.into_raw(), vec![0, 128, 255, 51]);
    }

    proptest! {
        #[test]
        fn decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
            let _ = decode_slc(&bytes);
        }

        #[test]
        fn encode_decode_round_trip(size in 1usize..6, seed in any::<u64>()) {
            let g = f32_image(size, seed);
            prop_assert_eq!(decode_slc(&encode_slc(&g).unwrap()).unwrap(), g);
        }
    }
}
