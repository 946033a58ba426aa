//! Image and buffer file formats: 8-bit PNG and binary PPM (P6) with the
//! `v <-> v/255` byte mapping (round half up on write), plus an exact `f32`
//! dump for perturbation buffers.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

/// Maps a unit-range sample to a byte, rounding half up.
#[inline]
pub fn unit_to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Maps a byte back to the unit range.
#[inline]
pub fn byte_to_unit(b: u8) -> f32 {
    b as f32 / 255.0
}

/// Writes a 1-channel (grayscale) or 3-channel (RGB) image as 8-bit PNG.
pub fn write_png(img: &ImageTensor, path: &Path) -> Result<()> {
    let (c, h, w) = img.shape();
    let mut bytes = Vec::with_capacity(c * h * w);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                bytes.push(unit_to_byte(img.get(ch, y, x)));
            }
        }
    }
    let err = |e: image::ImageError| Error::Argument(format!("png encode: {e}"));
    match c {
        1 => image::GrayImage::from_raw(w as u32, h as u32, bytes)
            .expect("sized buffer")
            .save(path)
            .map_err(err),
        3 => image::RgbImage::from_raw(w as u32, h as u32, bytes)
            .expect("sized buffer")
            .save(path)
            .map_err(err),
        _ => Err(Error::Argument(format!(
            "png supports 1 or 3 channels, got {c}"
        ))),
    }
}

/// Reads an 8-bit PNG into a 1- or 3-channel image of unit-range samples.
pub fn read_png(path: &Path) -> Result<ImageTensor> {
    let dynamic = image::ImageReader::open(path)?
        .decode()
        .map_err(|e| Error::Format {
            path: path.display().to_string(),
            offset: 0,
            message: format!("png decode: {e}"),
        })?;
    let (img, channels) = match dynamic {
        image::DynamicImage::ImageLuma8(g) => {
            let (w, h) = (g.width() as usize, g.height() as usize);
            let mut out = ImageTensor::zeros(1, h, w);
            for (x, y, p) in g.enumerate_pixels() {
                out.set(0, y as usize, x as usize, byte_to_unit(p.0[0]));
            }
            (out, 1)
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = (rgb.width() as usize, rgb.height() as usize);
            let mut out = ImageTensor::zeros(3, h, w);
            for (x, y, p) in rgb.enumerate_pixels() {
                for c in 0..3 {
                    out.set(c, y as usize, x as usize, byte_to_unit(p.0[c]));
                }
            }
            (out, 3)
        }
    };
    let _ = channels;
    Ok(img)
}

/// Writes a 3-channel image as binary PPM (P6, maxval 255).
pub fn write_ppm(img: &ImageTensor, path: &Path) -> Result<()> {
    let (c, h, w) = img.shape();
    if c != 3 {
        return Err(Error::Argument(format!("ppm requires 3 channels, got {c}")));
    }
    let mut file = fs::File::create(path)?;
    write!(file, "P6\n{w} {h}\n255\n")?;
    let mut bytes = Vec::with_capacity(3 * h * w);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..3 {
                bytes.push(unit_to_byte(img.get(ch, y, x)));
            }
        }
    }
    file.write_all(&bytes)?;
    Ok(())
}

/// Reads a binary PPM (P6, maxval 255) into a 3-channel image.
pub fn read_ppm(path: &Path) -> Result<ImageTensor> {
    let bytes = fs::read(path)?;
    let fail = |offset: usize, message: &str| Error::Format {
        path: path.display().to_string(),
        offset: offset as u64,
        message: message.to_string(),
    };
    let mut pos = 0usize;
    let token = |pos: &mut usize| -> Result<String> {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(fail(start, "unexpected end of header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    if token(&mut pos)? != "P6" {
        return Err(fail(0, "expected P6 magic"));
    }
    let parse = |s: String, at: usize| {
        s.parse::<usize>()
            .map_err(|_| fail(at, "expected an integer"))
    };
    let w = parse(token(&mut pos)?, pos)?;
    let h = parse(token(&mut pos)?, pos)?;
    let maxval = parse(token(&mut pos)?, pos)?;
    if maxval != 255 {
        return Err(fail(pos, "only maxval 255 is supported"));
    }
    pos += 1; // single whitespace byte after maxval
    let needed = 3 * w * h;
    if bytes.len() < pos + needed {
        return Err(fail(bytes.len(), "truncated pixel data"));
    }
    let mut out = ImageTensor::zeros(3, h, w);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                out.set(c, y, x, byte_to_unit(bytes[pos + (y * w + x) * 3 + c]));
            }
        }
    }
    Ok(out)
}

/// Dumps a perturbation buffer exactly: three little-endian `u32` dimensions
/// (channels, height, width) followed by the raw little-endian `f32` samples.
pub fn write_delta(img: &ImageTensor, path: &Path) -> Result<()> {
    let mut file = fs::File::create(path)?;
    let (c, h, w) = img.shape();
    for dim in [c as u32, h as u32, w as u32] {
        file.write_all(&dim.to_le_bytes())?;
    }
    for v in img.data() {
        file.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads back a perturbation dump bit-exactly.
pub fn read_delta(path: &Path) -> Result<ImageTensor> {
    let mut file = fs::File::open(path)?;
    let mut header = [0u8; 12];
    file.read_exact(&mut header).map_err(|_| Error::Format {
        path: path.display().to_string(),
        offset: 0,
        message: "truncated dimension header".into(),
    })?;
    let dim = |i: usize| u32::from_le_bytes(header[i * 4..i * 4 + 4].try_into().unwrap()) as usize;
    let (c, h, w) = (dim(0), dim(1), dim(2));
    let mut raw = Vec::new();
    file.read_to_end(&mut raw)?;
    if raw.len() != c * h * w * 4 {
        return Err(Error::Format {
            path: path.display().to_string(),
            offset: 12 + raw.len() as u64,
            message: format!("expected {} sample bytes, got {}", c * h * w * 4, raw.len()),
        });
    }
    let data = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    ImageTensor::from_vec(c, h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_mapping_rounds_half_up() {
        assert_eq!(unit_to_byte(0.0), 0);
        assert_eq!(unit_to_byte(1.0), 255);
        assert_eq!(unit_to_byte(127.5 / 255.0), 128);
        assert_eq!(unit_to_byte(126.4 / 255.0), 126);
        for b in 0..=255u8 {
            assert_eq!(unit_to_byte(byte_to_unit(b)), b);
        }
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let data: Vec<f32> = (0..3 * 4 * 5).map(|i| byte_to_unit((i * 7 % 256) as u8)).collect();
        let img = ImageTensor::from_vec(3, 4, 5, data).unwrap();
        write_png(&img, &path).unwrap();
        let back = read_png(&path).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn grayscale_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gray.png");
        let data: Vec<f32> = (0..16 * 16).map(|i| byte_to_unit((i % 256) as u8)).collect();
        let img = ImageTensor::from_vec(1, 16, 16, data).unwrap();
        write_png(&img, &path).unwrap();
        assert_eq!(read_png(&path).unwrap(), img);
    }

    #[test]
    fn ppm_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.ppm");
        let data: Vec<f32> = (0..3 * 3 * 7).map(|i| byte_to_unit((i * 11 % 256) as u8)).collect();
        let img = ImageTensor::from_vec(3, 3, 7, data).unwrap();
        write_ppm(&img, &path).unwrap();
        assert_eq!(read_ppm(&path).unwrap(), img);

        let gray = ImageTensor::zeros(1, 2, 2);
        assert!(matches!(write_ppm(&gray, &path), Err(Error::Argument(_))));

        let bad = dir.path().join("bad.ppm");
        fs::write(&bad, b"P5\n2 2\n255\n....").unwrap();
        assert!(matches!(read_ppm(&bad), Err(Error::Format { .. })));
    }

    #[test]
    fn delta_dump_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("delta.bin");
        let data = vec![0.123f32, -0.0627, f32::MIN_POSITIVE, -1.5e-7, 0.0, -0.0];
        let img = ImageTensor::from_vec(1, 2, 3, data.clone()).unwrap();
        write_delta(&img, &path).unwrap();
        let back = read_delta(&path).unwrap();
        assert_eq!(back.shape(), (1, 2, 3));
        for (a, b) in back.data().iter().zip(&data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
