use std::fs;
use std::io::Cursor;
use std::path::Path;

use super::RgbImage;
use crate::error::{Error, Result};

const PNG_SIGNATURE: &[u8; 8] = b"\x89PNG\r\n\x1a\n";

/// Reads an 8-bit PNG (RGB, RGBA, gray or gray+alpha; alpha dropped) or a binary P6 PPM.
pub fn read_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let bytes = fs::read(path.as_ref())?;
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(&bytes)
    } else if bytes.starts_with(b"P6") {
        decode_ppm(&bytes)
    } else {
        Err(Error::UnsupportedFormat(format!("{}: not a PNG or P6 PPM file", path.as_ref().display())))
    }
}

/// Writes PNG or P6 PPM depending on the file extension. Channels are quantized
/// to 8 bits rounding half up.
pub fn write_image(path: impl AsRef<Path>, image: &RgbImage) -> Result<()> {
    let path = path.as_ref();
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let bytes = match ext.as_deref() {
        Some("png") => encode_png(image)?,
        Some("ppm") => encode_ppm(image),
        _ => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: output extension must be .png or .ppm",
                path.display()
            )))
        }
    };
    fs::write(path, bytes)?;
    Ok(())
}

fn png_error(e: png::DecodingError) -> Error {
    match e {
        png::DecodingError::IoError(io) => Error::Io(io),
        other => Error::UnsupportedFormat(format!("png decode failed: {other}")),
    }
}

fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let mut reader = png::Decoder::new(Cursor::new(bytes)).read_info().map_err(png_error)?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    if depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat(format!("png bit depth {depth:?} (only 8-bit is supported)")));
    }
    let channels = match color {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Indexed => {
            return Err(Error::UnsupportedFormat("indexed-color png".into()));
        }
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::UnsupportedFormat("png image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(png_error)?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let stride = frame.line_size;

    let mut rgb = Vec::with_capacity(w * h * 3);
    for row in buf.chunks(stride).take(h) {
        for px in row[..w * channels].chunks_exact(channels) {
            match channels {
                1 | 2 => rgb.extend_from_slice(&[px[0], px[0], px[0]]),
                _ => rgb.extend_from_slice(&px[..3]),
            }
        }
    }
    RgbImage::from_bytes(h, w, &rgb)
}

fn encode_png(image: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.width() as u32, image.height() as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::UnsupportedFormat(format!("png encode failed: {e}")))?;
        writer
            .write_image_data(&image.to_bytes())
            .map_err(|e| Error::UnsupportedFormat(format!("png encode failed: {e}")))?;
    }
    Ok(out)
}

fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.to_bytes());
    out
}

fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let bad = |what: &str| Error::UnsupportedFormat(format!("ppm header: {what}"));
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("expected a decimal number"))?;
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!("ppm maxval {maxval} (only 255 is supported)")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("missing separator before pixel data"));
    }
    let data = &bytes[pos + 1..];
    if w == 0 || h == 0 || data.len() < w * h * 3 {
        return Err(bad("pixel data shorter than width*height*3"));
    }
    RgbImage::from_bytes(h, w, &data[..w * h * 3])
}
