use std::io::{Cursor, Write};
use std::path::Path;

use glam::DVec2;
use png::{BitDepth, ColorType, Transformations};

use super::{uv_to_raster, AssetError};

/// Row-major RGBA8 raster. Alpha 0 marks an empty texel or a background pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextureImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl TextureImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, AssetError> {
        if width == 0 || height == 0 {
            return Err(AssetError::InvalidImage("zero-sized image".into()));
        }
        if pixels.len() != width as usize * height as usize * 4 {
            return Err(AssetError::InvalidImage(format!(
                "{}x{} RGBA needs {} bytes, got {}",
                width,
                height,
                width as usize * height as usize * 4,
                pixels.len()
            )));
        }
        Ok(TextureImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, rgba: [u8; 4]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let pixels = rgba
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 4)
            .collect();
        TextureImage {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        [
            self.pixels[i],
            self.pixels[i + 1],
            self.pixels[i + 2],
            self.pixels[i + 3],
        ]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgba: [u8; 4]) {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        self.pixels[i..i + 4].copy_from_slice(&rgba);
    }

    /// Bilinear lookup with repeat wrapping. Texels are weighted by their
    /// alpha so empty gutter texels do not darken chart borders; the result
    /// is in 0–255 units.
    pub fn sample_bilinear(&self, uv: DVec2) -> [f64; 4] {
        let p = uv_to_raster(uv, self.width, self.height) - DVec2::splat(0.5);
        let x0 = p.x.floor();
        let y0 = p.y.floor();
        let fx = p.x - x0;
        let fy = p.y - y0;
        let (w, h) = (self.width as i64, self.height as i64);
        let mut rgb = [0.0f64; 3];
        let mut alpha = 0.0;
        let mut weight_sum = 0.0;
        for (dx, dy, wgt) in [
            (0, 0, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ] {
            let x = (x0 as i64 + dx).rem_euclid(w) as u32;
            let y = (y0 as i64 + dy).rem_euclid(h) as u32;
            let px = self.pixel(x, y);
            let a = px[3] as f64 / 255.0;
            alpha += wgt * px[3] as f64;
            let aw = wgt * a;
            weight_sum += aw;
            for c in 0..3 {
                rgb[c] += aw * px[c] as f64;
            }
        }
        if weight_sum > 0.0 {
            [
                rgb[0] / weight_sum,
                rgb[1] / weight_sum,
                rgb[2] / weight_sum,
                alpha,
            ]
        } else {
            [0.0, 0.0, 0.0, 0.0]
        }
    }
}

/// Single-channel 8-bit raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Nearest-texel lookup with repeat wrapping.
    pub fn sample_nearest(&self, uv: DVec2) -> u8 {
        let p = uv_to_raster(uv, self.width, self.height);
        let x = (p.x.floor() as i64).rem_euclid(self.width as i64) as u32;
        let y = (p.y.floor() as i64).rem_euclid(self.height as i64) as u32;
        self.get(x, y)
    }
}

fn encode(
    width: u32,
    height: u32,
    color: ColorType,
    depth: BitDepth,
    palette: Option<Vec<u8>>,
    data: &[u8],
) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width, height);
        encoder.set_color(color);
        encoder.set_depth(depth);
        if let Some(p) = palette {
            encoder.set_palette(p);
        }
        let mut writer = encoder
            .write_header()
            .expect("png header for in-memory buffer");
        writer
            .write_image_data(data)
            .expect("png data length matches header");
    }
    out
}

pub fn encode_rgba_png(image: &TextureImage) -> Vec<u8> {
    encode(
        image.width,
        image.height,
        ColorType::Rgba,
        BitDepth::Eight,
        None,
        &image.pixels,
    )
}

pub fn encode_gray_png(width: u32, height: u32, data: &[u8]) -> Vec<u8> {
    assert_eq!(data.len(), width as usize * height as usize);
    encode(
        width,
        height,
        ColorType::Grayscale,
        BitDepth::Eight,
        None,
        data,
    )
}

pub fn encode_gray16_png(width: u32, height: u32, data: &[u16]) -> Vec<u8> {
    assert_eq!(data.len(), width as usize * height as usize);
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_be_bytes()).collect();
    encode(
        width,
        height,
        ColorType::Grayscale,
        BitDepth::Sixteen,
        None,
        &bytes,
    )
}

/// Indexed PNG whose raw pixel values are `indices`; `palette` supplies the
/// colors viewers show. Missing palette entries are filled with black.
pub fn encode_indexed_png(width: u32, height: u32, indices: &[u8], palette: &[[u8; 3]]) -> Vec<u8> {
    assert_eq!(indices.len(), width as usize * height as usize);
    let mut table = Vec::with_capacity(256 * 3);
    for i in 0..256 {
        table.extend_from_slice(&palette.get(i).copied().unwrap_or([0, 0, 0]));
    }
    encode(
        width,
        height,
        ColorType::Indexed,
        BitDepth::Eight,
        Some(table),
        indices,
    )
}

fn decode_err(e: png::DecodingError) -> AssetError {
    AssetError::Decode(e.to_string())
}

/// Decode any 8-bit (or 16-bit, stripped) PNG into RGBA. Grayscale expands
/// to `R = G = B = gray`, missing alpha becomes 255.
pub fn decode_texture(bytes: &[u8]) -> Result<TextureImage, AssetError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(decode_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| AssetError::Decode("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(decode_err)?;
    buf.truncate(info.buffer_size());
    let n = info.width as usize * info.height as usize;
    let mut rgba = Vec::with_capacity(n * 4);
    match info.color_type {
        ColorType::Rgba => rgba = buf,
        ColorType::Rgb => {
            for px in buf.chunks_exact(3) {
                rgba.extend_from_slice(&[px[0], px[1], px[2], 255]);
            }
        }
        ColorType::Grayscale => {
            for &g in &buf {
                rgba.extend_from_slice(&[g, g, g, 255]);
            }
        }
        ColorType::GrayscaleAlpha => {
            for px in buf.chunks_exact(2) {
                rgba.extend_from_slice(&[px[0], px[0], px[0], px[1]]);
            }
        }
        ColorType::Indexed => {
            return Err(AssetError::Decode("palette was not expanded".into()));
        }
    }
    TextureImage::new(info.width, info.height, rgba)
}

/// Decode a label raster: an 8-bit single-channel PNG, either grayscale or
/// indexed. Indexed files yield their raw palette indices.
pub fn decode_label_png(bytes: &[u8]) -> Result<(u32, u32, Vec<u8>), AssetError> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(decode_err)?;
    let (color, depth) = reader.output_color_type();
    if depth != BitDepth::Eight || !matches!(color, ColorType::Grayscale | ColorType::Indexed) {
        return Err(AssetError::InvalidImage(format!(
            "label maps must be 8-bit grayscale or indexed, got {color:?} at {depth:?}"
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| AssetError::Decode("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(decode_err)?;
    buf.truncate(info.buffer_size());
    Ok((info.width, info.height, buf))
}

pub fn load_texture(path: &Path) -> Result<TextureImage, AssetError> {
    let bytes = std::fs::read(path).map_err(|e| AssetError::io(path, e))?;
    decode_texture(&bytes)
}

pub fn write_image(image: &TextureImage, path: &Path) -> Result<(), AssetError> {
    write_atomic(path, &encode_rgba_png(image))
}

/// Write through a temporary sibling file and rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), AssetError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| AssetError::io(dir, e))?;
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{}.{}.tmp", file_name, std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        AssetError::io(path, e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgba_round_trip_is_exact() {
        let pixels: Vec<u8> = (0u8..16).map(|v| v.wrapping_mul(37)).collect();
        let img = TextureImage::new(2, 2, pixels.clone()).unwrap();
        let back = decode_texture(&encode_rgba_png(&img)).unwrap();
        assert_eq!(back.pixels(), &pixels[..]);
    }

    #[test]
    fn file_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        let mut img = TextureImage::filled(5, 3, [10, 20, 30, 0]);
        img.set_pixel(4, 2, [1, 2, 3, 4]);
        write_image(&img, &path).unwrap();
        let once = load_texture(&path).unwrap();
        write_image(&once, &path).unwrap();
        let twice = load_texture(&path).unwrap();
        assert_eq!(img, once);
        assert_eq!(once, twice);
    }

    #[test]
    fn grayscale_expands_to_opaque_rgba() {
        let bytes = encode_gray_png(2, 1, &[7, 200]);
        let img = decode_texture(&bytes).unwrap();
        assert_eq!(img.pixels(), &[7, 7, 7, 255, 200, 200, 200, 255]);
    }

    #[test]
    fn truncated_file_is_decode_error() {
        let bytes = encode_rgba_png(&TextureImage::filled(8, 8, [1, 2, 3, 255]));
        let err = decode_texture(&bytes[..bytes.len() / 2]).unwrap_err();
        assert!(matches!(err, AssetError::Decode(_)));
        assert!(matches!(
            decode_texture(b"not a png"),
            Err(AssetError::Decode(_))
        ));
    }

    #[test]
    fn indexed_labels_decode_to_raw_indices() {
        let palette = [[255, 0, 0], [0, 255, 0]];
        let bytes = encode_indexed_png(3, 1, &[0, 1, 255], &palette);
        let (w, h, values) = decode_label_png(&bytes).unwrap();
        assert_eq!((w, h), (3, 1));
        assert_eq!(values, vec![0, 1, 255]);
        // The same file shows its palette colors when read as a texture.
        let tex = decode_texture(&bytes).unwrap();
        assert_eq!(tex.pixel(1, 0), [0, 255, 0, 255]);
    }

    #[test]
    fn rgba_is_not_a_label_map() {
        let bytes = encode_rgba_png(&TextureImage::filled(2, 2, [0, 0, 0, 255]));
        assert!(matches!(
            decode_label_png(&bytes),
            Err(AssetError::InvalidImage(_))
        ));
    }

    #[test]
    fn bilinear_ignores_transparent_neighbours() {
        let mut img = TextureImage::filled(2, 1, [0, 0, 0, 0]);
        img.set_pixel(0, 0, [200, 100, 50, 255]);
        let s = img.sample_bilinear(DVec2::new(0.5, 0.5));
        assert!((s[0] - 200.0).abs() < 1e-9 && (s[1] - 100.0).abs() < 1e-9);
        assert!((s[3] - 127.5).abs() < 1e-9);
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.bin");
        write_atomic(&path, b"abc").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"abc");
        let names: Vec<_> = std::fs::read_dir(path.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 1);
    }
}
