//! Minimal in-memory raster with binary PGM/PPM persistence.
//!
//! Pixels are `f64` in `[0, 1]`, row-major, 1 (gray) or 3 (RGB) channels.
//! Files use maxval 255, so a write quantizes to 8 bits; reading back what
//! was written is exact at that resolution.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions must be nonzero, got {width}x{height}")]
    ZeroDimension { width: usize, height: usize },
    #[error("channel count must be 1 or 3, got {0}")]
    BadChannelCount(usize),
    #[error("pixel buffer holds {got} values, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("pixel values must be finite and within [0, 1]")]
    PixelOutOfRange,
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> ImageError {
    ImageError::Io { path: path.display().to_string(), source }
}

fn format_err(path: &Path, msg: impl Into<String>) -> ImageError {
    ImageError::Format { path: path.display().to_string(), msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::ZeroDimension { width, height });
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::BadChannelCount(channels));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(ImageError::BufferSize { expected, got: data.len() });
        }
        if !data.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) {
            return Err(ImageError::PixelOutOfRange);
        }
        Ok(Image { width, height, channels, data })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Result<Self, ImageError> {
        Image::new(width, height, channels, vec![0.0; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Panics if out of bounds; bounds are the caller's responsibility here.
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// Bilinear sample at real coordinates on the integer pixel grid.
    /// Neighborhoods reaching outside the image read zero, so content fades
    /// to black at the border instead of clamping.
    pub fn sample_bilinear(&self, x: f64, y: f64, c: usize) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let xi = x0 as i64;
        let yi = y0 as i64;
        let at = |px: i64, py: i64| -> f64 {
            if px < 0 || py < 0 || px >= self.width as i64 || py >= self.height as i64 {
                0.0
            } else {
                self.data[(py as usize * self.width + px as usize) * self.channels + c]
            }
        };
        let v00 = at(xi, yi);
        let v10 = at(xi + 1, yi);
        let v01 = at(xi, yi + 1);
        let v11 = at(xi + 1, yi + 1);
        v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy + v11 * fx * fy
    }

    pub fn flip_horizontal(&self) -> Image {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    out.data[(y * self.width + x) * self.channels + c] =
                        self.data[(y * self.width + (self.width - 1 - x)) * self.channels + c];
                }
            }
        }
        out
    }

    /// Writes binary PGM (P5) for 1 channel or PPM (P6) for 3, maxval 255.
    pub fn write_pnm(&self, path: &Path) -> Result<(), ImageError> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut header = String::new();
        let _ = write!(header, "{}\n{} {}\n255\n", magic, self.width, self.height);
        let mut bytes = Vec::with_capacity(header.len() + self.data.len());
        bytes.extend_from_slice(header.as_bytes());
        bytes.extend(self.data.iter().map(|v| (v * 255.0).round() as u8));
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
        }
        fs::write(path, bytes).map_err(|e| io_err(path, e))
    }

    pub fn read_pnm(path: &Path) -> Result<Image, ImageError> {
        let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
        let mut pos = 0usize;
        let mut next_token = || -> Result<String, ImageError> {
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(format_err(path, "truncated header"));
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        let magic = next_token()?;
        let channels = match magic.as_str() {
            "P5" => 1,
            "P6" => 3,
            other => return Err(format_err(path, format!("unsupported magic {other:?}"))),
        };
        let width: usize = next_token()?.parse().map_err(|_| format_err(path, "bad width"))?;
        let height: usize = next_token()?.parse().map_err(|_| format_err(path, "bad height"))?;
        let maxval: usize = next_token()?.parse().map_err(|_| format_err(path, "bad maxval"))?;
        if maxval != 255 {
            return Err(format_err(path, format!("unsupported maxval {maxval}, expected 255")));
        }
        pos += 1; // single whitespace byte after maxval
        let expected = width * height * channels;
        let payload = bytes.get(pos..pos + expected).ok_or_else(|| format_err(path, "truncated pixel data"))?;
        let data: Vec<f64> = payload.iter().map(|&b| b as f64 / 255.0).collect();
        Image::new(width, height, channels, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(width: usize, height: usize) -> Image {
        let data: Vec<f64> = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x + y) as f64 / (width + height) as f64))
            .collect();
        Image::new(width, height, 1, data).unwrap()
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert!(matches!(Image::new(0, 4, 1, vec![]), Err(ImageError::ZeroDimension { .. })));
        assert!(matches!(Image::new(2, 2, 2, vec![0.0; 8]), Err(ImageError::BadChannelCount(2))));
        assert!(matches!(Image::new(2, 2, 1, vec![0.0; 3]), Err(ImageError::BufferSize { expected: 4, got: 3 })));
        assert!(matches!(Image::new(2, 2, 1, vec![0.0, 0.5, 1.0, 1.5]), Err(ImageError::PixelOutOfRange)));
    }

    #[test]
    fn bilinear_on_grid_points_is_exact() {
        let img = gradient(8, 6);
        for y in 0..6 {
            for x in 0..8 {
                assert_eq!(img.sample_bilinear(x as f64, y as f64, 0), img.get(x, y, 0));
            }
        }
    }

    #[test]
    fn bilinear_midpoint_averages_neighbors() {
        let img = Image::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
        assert!((img.sample_bilinear(0.5, 0.0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bilinear_outside_is_zero() {
        let img = gradient(4, 4);
        assert_eq!(img.sample_bilinear(-2.0, 1.0, 0), 0.0);
        assert_eq!(img.sample_bilinear(1.0, 7.5, 0), 0.0);
    }

    #[test]
    fn flip_horizontal_is_involution() {
        let img = gradient(5, 3);
        assert_eq!(img.flip_horizontal().flip_horizontal(), img);
        assert_eq!(img.flip_horizontal().get(0, 0, 0), img.get(4, 0, 0));
    }

    #[test]
    fn pnm_round_trip_is_exact_at_8_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.pgm");
        let img = Image::new(3, 2, 1, vec![0.0, 51.0 / 255.0, 0.5, 128.0 / 255.0, 1.0, 17.0 / 255.0]).unwrap();
        img.write_pnm(&path).unwrap();
        let back = Image::read_pnm(&path).unwrap();
        assert_eq!(back.width(), 3);
        assert_eq!(back.height(), 2);
        assert_eq!(back.get(1, 0, 0), 51.0 / 255.0);
        // 0.5 quantizes to round(127.5) = 128
        assert_eq!(back.get(2, 0, 0), 128.0 / 255.0);
        let rgb = Image::new(2, 2, 3, vec![0.2; 12]).unwrap();
        let rgb_path = dir.path().join("c.ppm");
        rgb.write_pnm(&rgb_path).unwrap();
        assert_eq!(Image::read_pnm(&rgb_path).unwrap().channels(), 3);
    }

    #[test]
    fn read_rejects_foreign_maxval() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        fs::write(&path, b"P5\n2 1\n65535\n\x00\x00\x00\x00").unwrap();
        assert!(matches!(Image::read_pnm(&path), Err(ImageError::Format { .. })));
    }
}
