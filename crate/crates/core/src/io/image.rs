use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use log::warn;
use png::{BitDepth, ColorType};

use crate::error::{Error, Result};
use crate::renderer::Image;

fn format_err(e: impl std::fmt::Display) -> Error {
    Error::Format(e.to_string())
}

/// Reads an 8-bit RGB or RGBA PNG. Alpha becomes the mask; RGB images get a
/// mask of ones.
pub fn read_png(path: &Path) -> Result<Image> {
    let decoder = png::Decoder::new(BufReader::new(File::open(path)?));
    let mut reader = decoder.read_info().map_err(format_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("PNG too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(format_err)?;
    if info.bit_depth != BitDepth::Eight {
        return Err(Error::Format(format!(
            "{}: unsupported bit depth {:?}, expected 8",
            path.display(),
            info.bit_depth
        )));
    }
    let channels = match info.color_type {
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        other => {
            return Err(Error::Format(format!(
                "{}: unsupported color type {other:?}, expected RGB or RGBA",
                path.display()
            )))
        }
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let mut image = Image::new(w, h);
    let mask = image.mask.as_mut().expect("new images carry a mask");
    for y in 0..h {
        let row = &buf[y * info.line_size..];
        for x in 0..w {
            let px = &row[x * channels..(x + 1) * channels];
            let j = y * w + x;
            image.rgb[j] = [0, 1, 2].map(|c| f64::from(px[c]) / 255.0);
            mask[j] = if channels == 4 { f64::from(px[3]) / 255.0 } else { 1.0 };
        }
    }
    Ok(image)
}

fn quantize(x: f64, clipped: &mut usize) -> u8 {
    if !(0.0..=1.0).contains(&x) {
        *clipped += 1;
    }
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes an 8-bit PNG, RGBA when the image has a mask. Values outside
/// `[0, 1]` are clamped with a warning.
pub fn write_png(path: &Path, image: &Image) -> Result<()> {
    let w = u32::try_from(image.width).map_err(format_err)?;
    let h = u32::try_from(image.height).map_err(format_err)?;
    let mut clipped = 0;
    let mut data = Vec::with_capacity(image.pixel_count() * 4);
    for j in 0..image.pixel_count() {
        for c in 0..3 {
            data.push(quantize(image.rgb[j][c], &mut clipped));
        }
        if let Some(mask) = &image.mask {
            data.push(quantize(mask[j], &mut clipped));
        }
    }
    if clipped > 0 {
        warn!("{}: clamped {clipped} out-of-range values to [0, 1]", path.display());
    }
    let mut encoder = png::Encoder::new(BufWriter::new(File::create(path)?), w, h);
    encoder.set_color(if image.mask.is_some() { ColorType::Rgba } else { ColorType::Rgb });
    encoder.set_depth(BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(format_err)?;
    writer.write_image_data(&data).map_err(format_err)?;
    writer.finish().map_err(format_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_png(path: &Path, color: ColorType, depth: BitDepth, data: &[u8], w: u32, h: u32) {
        let mut e = png::Encoder::new(BufWriter::new(File::create(path).unwrap()), w, h);
        e.set_color(color);
        e.set_depth(depth);
        e.write_header().unwrap().write_image_data(data).unwrap();
    }

    #[test]
    fn rgba_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.png");
        let data: Vec<u8> = (0..5 * 3 * 4).map(|i| (i * 37 % 256) as u8).collect();
        raw_png(&a, ColorType::Rgba, BitDepth::Eight, &data, 5, 3);
        let img = read_png(&a).unwrap();
        let b = dir.path().join("b.png");
        write_png(&b, &img).unwrap();
        assert_eq!(read_png(&b).unwrap(), img);
        let mut decoder = png::Decoder::new(BufReader::new(File::open(&b).unwrap())).read_info().unwrap();
        let mut buf = vec![0; decoder.output_buffer_size().unwrap()];
        decoder.next_frame(&mut buf).unwrap();
        assert_eq!(buf, data);
    }

    #[test]
    fn rgb_gets_full_mask() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgb.png");
        raw_png(&p, ColorType::Rgb, BitDepth::Eight, &[255, 0, 128, 1, 2, 3], 2, 1);
        let img = read_png(&p).unwrap();
        assert_eq!(img.mask, Some(vec![1.0, 1.0]));
        assert_eq!(img.rgb[0], [1.0, 0.0, 128.0 / 255.0]);
    }

    #[test]
    fn out_of_range_values_are_clamped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        let mut img = Image::new(2, 1);
        img.rgb = vec![[1.5, -0.2, 0.5], [0.0, 1.0, 0.25]];
        write_png(&p, &img).unwrap();
        let back = read_png(&p).unwrap();
        assert_eq!(back.rgb[0][0], 1.0);
        assert_eq!(back.rgb[0][1], 0.0);
    }

    #[test]
    fn sixteen_bit_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.png");
        raw_png(&p, ColorType::Rgb, BitDepth::Sixteen, &[0; 12], 2, 1);
        assert!(matches!(read_png(&p), Err(Error::Format(_))));
        let g = dir.path().join("g.png");
        raw_png(&g, ColorType::Grayscale, BitDepth::Eight, &[0; 2], 2, 1);
        assert!(matches!(read_png(&g), Err(Error::Format(_))));
    }
}
