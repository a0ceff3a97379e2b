//! Planar floating-point images and the handful of pixel primitives shared
//! by every degradation stage.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageReader, RgbImage};

use crate::error::{Error, Result};

/// BT.601 luma weights.
pub const LUMA_WEIGHTS_F64: [f64; 3] = [0.299, 0.587, 0.114];

/// A planar image with nominal range `[0, 1]`.
///
/// Pixel `(y, x)` of channel `c` lives at `data[(c * height + y) * width + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        check_dims(height, width, channels)?;
        Ok(Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        })
    }

    /// Wraps planar data, rejecting wrong lengths and non-finite values.
    pub fn from_planar(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(height, width, channels)?;
        if data.len() != height * width * channels {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {}x{}x{}",
                data.len(),
                height,
                width,
                channels
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!("non-finite value at index {pos}")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an image by evaluating `f(channel, y, x)` everywhere.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut img = Self::zeros(height, width, channels)?;
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    let v = f(c, y, x);
                    img.set(c, y, x, v);
                }
            }
        }
        if img.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite value produced".into()));
        }
        Ok(img)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub(crate) fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        let idx = (c * self.height + y) * self.width + x;
        self.data[idx] = v;
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.pixel_count();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn min_value(&self) -> f32 {
        self.data.iter().copied().fold(f32::INFINITY, f32::min)
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    pub fn require_channels(&self, expected: usize) -> Result<()> {
        if self.channels != expected {
            return Err(Error::ChannelMismatch {
                expected,
                actual: self.channels,
            });
        }
        Ok(())
    }

    pub fn require_same_dims(&self, other: &Image) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    /// Replicates a single-channel image into three identical channels.
    pub fn gray_to_rgb(&self) -> Result<Image> {
        self.require_channels(1)?;
        let mut data = Vec::with_capacity(self.data.len() * 3);
        for _ in 0..3 {
            data.extend_from_slice(&self.data);
        }
        Ok(Image {
            height: self.height,
            width: self.width,
            channels: 3,
            data,
        })
    }

    /// Copies the window `[y, y + height) x [x, x + width)`.
    pub fn crop(&self, y: usize, x: usize, height: usize, width: usize) -> Result<Image> {
        if height == 0 || width == 0 || y + height > self.height || x + width > self.width {
            return Err(Error::InvalidParameter(format!(
                "crop ({y}, {x}, {height}, {width}) outside {}x{} image",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(height * width * self.channels);
        for c in 0..self.channels {
            for row in y..y + height {
                let start = (c * self.height + row) * self.width + x;
                data.extend_from_slice(&self.data[start..start + width]);
            }
        }
        Ok(Image {
            height,
            width,
            channels: self.channels,
            data,
        })
    }

    /// Reflect-pads (mirror without edge repeat) on the bottom and right.
    pub fn pad_reflect(&self, bottom: usize, right: usize) -> Result<Image> {
        if (bottom > 0 && bottom >= self.height) || (right > 0 && right >= self.width) {
            return Err(Error::InvalidParameter(format!(
                "reflect padding ({bottom}, {right}) too large for {}x{} image",
                self.height, self.width
            )));
        }
        let (h, w) = (self.height + bottom, self.width + right);
        let mut out = Image::zeros(h, w, self.channels)?;
        for c in 0..self.channels {
            for y in 0..h {
                let sy = reflect_index(y as isize, self.height);
                for x in 0..w {
                    let sx = reflect_index(x as isize, self.width);
                    out.set(c, y, x, self.get(c, sy, sx));
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn map_in_place(&mut self, f: impl Fn(f32) -> f32) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }
}

fn check_dims(height: usize, width: usize, channels: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidImage(format!("empty image {height}x{width}")));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::InvalidImage(format!(
            "unsupported channel count {channels}"
        )));
    }
    Ok(())
}

/// Mirror index without repeating the edge sample (`-1 -> 1`, `n -> n-2`).
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}

#[inline]
pub fn clamp01(v: f32) -> f32 {
    v.clamp(0.0, 1.0)
}

/// Clamps every value into `[0, 1]`.
pub fn clip01(img: &Image) -> Image {
    let mut out = img.clone();
    out.map_in_place(clamp01);
    out
}

/// BT.601 luma of a three-channel image.
pub fn rgb_to_gray(img: &Image) -> Result<Image> {
    img.require_channels(3)?;
    let n = img.pixel_count();
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let data = (0..n)
        .map(|i| {
            // f64 accumulation rounds back to the exact input for gray pixels.
            let [wr, wg, wb] = LUMA_WEIGHTS_F64;
            (wr * f64::from(r[i]) + wg * f64::from(g[i]) + wb * f64::from(b[i])) as f32
        })
        .collect();
    Ok(Image {
        height: img.height,
        width: img.width,
        channels: 1,
        data,
    })
}

/// Snaps every value onto the 8-bit grid `k / 255` used by [`save_png`].
pub fn quantize_u8(img: &Image) -> Image {
    let mut out = img.clone();
    out.map_in_place(|v| f32::from(to_u8(v)) / 255.0);
    out
}

#[inline]
fn to_u8(v: f32) -> u8 {
    // round-half-up after clamping; 0.5 -> 127.5 -> 128
    (f64::from(clamp01(v)) * 255.0 + 0.5).floor() as u8
}

/// Loads an 8-bit grayscale or RGB PNG. An alpha channel is discarded.
pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
    if reader.format() != Some(image::ImageFormat::Png) {
        return Err(Error::UnsupportedPng {
            path: path.to_path_buf(),
            reason: "not a PNG file".into(),
        });
    }
    let decoded = reader.decode().map_err(|source| Error::Codec {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let unsupported = |what: &str| Error::UnsupportedPng {
        path: path.to_path_buf(),
        reason: what.to_string(),
    };
    match decoded {
        DynamicImage::ImageLuma8(buf) => {
            let data = buf.into_raw().into_iter().map(|k| f32::from(k) / 255.0).collect();
            Image::from_planar(h, w, 1, data)
        }
        DynamicImage::ImageLumaA8(buf) => {
            let data = buf.pixels().map(|p| f32::from(p.0[0]) / 255.0).collect();
            Image::from_planar(h, w, 1, data)
        }
        DynamicImage::ImageRgb8(buf) => interleaved_to_planar(h, w, 3, buf.as_raw()),
        DynamicImage::ImageRgba8(buf) => interleaved_to_planar(h, w, 4, buf.as_raw()),
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => Err(unsupported("16-bit samples")),
        _ => Err(unsupported("unsupported color type")),
    }
}

fn interleaved_to_planar(h: usize, w: usize, stride: usize, raw: &[u8]) -> Result<Image> {
    let n = h * w;
    let mut data = vec![0.0f32; n * 3];
    for (i, px) in raw.chunks_exact(stride).enumerate() {
        for c in 0..3 {
            data[c * n + i] = f32::from(px[c]) / 255.0;
        }
    }
    Image::from_planar(h, w, 3, data)
}

/// Writes an 8-bit PNG (gray or RGB), clamping and rounding half-up.
pub fn save_png(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = (img.height as u32, img.width as u32);
    let n = img.pixel_count();
    let result = if img.channels == 1 {
        let raw: Vec<u8> = img.data.iter().map(|&v| to_u8(v)).collect();
        GrayImage::from_raw(w, h, raw)
            .expect("buffer length matches dimensions")
            .save_with_format(path, image::ImageFormat::Png)
    } else {
        let mut raw = Vec::with_capacity(n * 3);
        for i in 0..n {
            for c in 0..3 {
                raw.push(to_u8(img.data[c * n + i]));
            }
        }
        RgbImage::from_raw(w, h, raw)
            .expect("buffer length matches dimensions")
            .save_with_format(path, image::ImageFormat::Png)
    };
    result.map_err(|source| match source {
        image::ImageError::IoError(source) => Error::Write {
            path: path.to_path_buf(),
            source,
        },
        source => Error::Codec {
            path: path.to_path_buf(),
            source,
        },
    })
}
