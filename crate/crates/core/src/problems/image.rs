//! Grayscale images: bilinear sampling, synthetic discs and PGM I/O.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("image must be non-empty".into()));
        }
        crate::error::check_len(width * height, data.len())?;
        Ok(Self { width, height, data })
    }

    /// Builds an image from `f(col, row)`, evaluated in row-major order.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(col, row));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

/// Partial derivatives in pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelGradient {
    pub dx: f64,
    pub dy: f64,
}

/// Clamps a coordinate onto `[0, n-1]` and returns the left node, the
/// fractional offset and whether the coordinate was inside.
#[inline]
fn locate(t: f64, n: usize) -> (usize, f64, bool) {
    if n == 1 {
        return (0, 0.0, false);
    }
    let max = (n - 1) as f64;
    if t <= 0.0 {
        return (0, 0.0, t == 0.0);
    }
    if t >= max {
        return (n - 2, 1.0, t == max);
    }
    let i = (t.floor() as usize).min(n - 2);
    (i, t - i as f64, true)
}

/// Samples the bilinear interpolant at `points` given in pixel coordinates
/// (pixel `(col, row)` sits at `(col, row)`). Returns values and exact
/// partials; outside the image the value is clamped to the border and the
/// outward derivative is zero.
pub fn interp_bilinear(img: &ImageBuffer, points: &[(f64, f64)]) -> (Vec<f64>, Vec<PixelGradient>) {
    let mut values = Vec::with_capacity(points.len());
    let mut grads = Vec::with_capacity(points.len());
    for &(x, y) in points {
        let (v, g) = sample(img, x, y);
        values.push(v);
        grads.push(g);
    }
    (values, grads)
}

#[inline]
pub(crate) fn sample(img: &ImageBuffer, x: f64, y: f64) -> (f64, PixelGradient) {
    let (w, h) = (img.width, img.height);
    let (i, fx, in_x) = locate(x, w);
    let (j, fy, in_y) = locate(y, h);
    let i1 = if w > 1 { i + 1 } else { i };
    let j1 = if h > 1 { j + 1 } else { j };
    let v00 = img.get(i, j);
    let v10 = img.get(i1, j);
    let v01 = img.get(i, j1);
    let v11 = img.get(i1, j1);
    let value = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11);
    let dx = if in_x { (1.0 - fy) * (v10 - v00) + fy * (v11 - v01) } else { 0.0 };
    let dy = if in_y { (1.0 - fx) * (v01 - v00) + fx * (v11 - v10) } else { 0.0 };
    (value, PixelGradient { dx, dy })
}

/// Reference and template discs with error-function edges.
///
/// The reference disc of radius `radius_a` is centred in a `size x size`
/// image; the template disc has radius `radius_b` and is shifted by
/// `offset` pixels.
pub fn make_disc_pair(
    size: usize,
    radius_a: f64,
    radius_b: f64,
    offset: (f64, f64),
) -> Result<(ImageBuffer, ImageBuffer)> {
    let half = size as f64 / 2.0;
    if size < 2 || !(radius_a > 0.0 && radius_a < half) || !(radius_b > 0.0 && radius_b < half) {
        return Err(Error::InvalidParameter(format!(
            "disc radii must lie in (0, {half}) for size {size}"
        )));
    }
    let c = (size as f64 - 1.0) / 2.0;
    let disc = |cx: f64, cy: f64, r: f64| {
        move |col: usize, row: usize| {
            let d = ((col as f64 - cx).powi(2) + (row as f64 - cy).powi(2)).sqrt();
            (0.5 * (1.0 + libm::erf(r - d))).clamp(0.0, 1.0)
        }
    };
    let reference = ImageBuffer::from_fn(size, size, disc(c, c, radius_a))?;
    let template = ImageBuffer::from_fn(size, size, disc(c + offset.0, c + offset.1, radius_b))?;
    Ok((reference, template))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { offset: self.pos, message: message.into() }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if self.pos >= self.bytes.len() {
                self.err(format!("unexpected end of file while reading {what}"))
            } else {
                self.err(format!("expected {what}, found byte 0x{:02x}", self.bytes[self.pos]))
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse { offset: start, message: format!("{what} out of range") })
    }
}

/// Parses a binary (P5) or ASCII (P2) PGM with `maxval <= 65535`.
pub fn parse_pgm(bytes: &[u8]) -> Result<ImageBuffer> {
    let mut cur = Cursor { bytes, pos: 0 };
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(cur.err("missing P2/P5 magic number")),
    };
    cur.pos = 2;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(cur.err("zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(cur.err(format!("maxval {maxval} outside 1..=65535")));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| cur.err("image dimensions overflow"))?;
    let scale = 1.0 / maxval as f64;
    let mut data = Vec::with_capacity(count);

    if binary {
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(cur.err("expected a single whitespace byte before the raster")),
        }
        let bps = if maxval > 255 { 2 } else { 1 };
        let need = count * bps;
        let have = bytes.len() - cur.pos;
        if have < need {
            return Err(Error::Parse {
                offset: bytes.len(),
                message: format!("truncated payload: missing {} bytes", need - have),
            });
        }
        let raster = &bytes[cur.pos..cur.pos + need];
        for (k, chunk) in raster.chunks_exact(bps).enumerate() {
            let v = if bps == 2 { u16::from_be_bytes([chunk[0], chunk[1]]) as usize } else { chunk[0] as usize };
            if v > maxval {
                return Err(Error::Parse { offset: cur.pos + k * bps, message: format!("sample {v} exceeds maxval {maxval}") });
            }
            data.push(v as f64 * scale);
        }
    } else {
        for k in 0..count {
            cur.skip_space_and_comments();
            if cur.pos >= bytes.len() {
                return Err(cur.err(format!("truncated payload: missing {} samples", count - k)));
            }
            let at = cur.pos;
            let v = cur.number("sample")?;
            if v > maxval {
                return Err(Error::Parse { offset: at, message: format!("sample {v} exceeds maxval {maxval}") });
            }
            data.push(v as f64 * scale);
        }
    }
    ImageBuffer::new(width, height, data)
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    parse_pgm(&std::fs::read(path)?)
}

/// Writes an 8-bit binary PGM, clamping intensities to `[0, 1]`.
pub fn write_pgm(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<()> {
    let mut out = Vec::with_capacity(img.data.len() + 32);
    write!(out, "P5\n{} {}\n255\n", img.width, img.height)?;
    out.extend(img.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ramp() -> ImageBuffer {
        ImageBuffer::from_fn(4, 3, |c, r| (c * c) as f64 * 0.05 + r as f64 * 0.1).unwrap()
    }

    #[test]
    fn pixel_centres_are_exact() {
        let img = ramp();
        let (v, g) = interp_bilinear(&img, &[(1.0, 1.0), (3.0, 2.0)]);
        assert!((v[0] - img.get(1, 1)).abs() < 1e-15);
        assert!((v[1] - img.get(3, 2)).abs() < 1e-15);
        // forward neighbour difference, backward at the last column/row
        assert!((g[0].dx - (img.get(2, 1) - img.get(1, 1))).abs() < 1e-15);
        assert!((g[0].dy - (img.get(1, 2) - img.get(1, 1))).abs() < 1e-15);
        assert!((g[1].dx - (img.get(3, 2) - img.get(2, 2))).abs() < 1e-15);
    }

    #[test]
    fn constant_image() {
        let img = ImageBuffer::from_fn(5, 5, |_, _| 0.3).unwrap();
        let (v, g) = interp_bilinear(&img, &[(0.3, 2.7), (-4.0, 9.0), (4.0, 0.0)]);
        for (vi, gi) in v.iter().zip(&g) {
            assert!((vi - 0.3).abs() < 1e-15);
            assert_eq!((gi.dx, gi.dy), (0.0, 0.0));
        }
    }

    #[test]
    fn outside_clamps_with_zero_outward_derivative() {
        let img = ramp();
        let (v, g) = interp_bilinear(&img, &[(-2.0, 1.5), (7.0, 0.5)]);
        let (edge, _) = interp_bilinear(&img, &[(0.0, 1.5), (3.0, 0.5)]);
        assert!((v[0] - edge[0]).abs() < 1e-15);
        assert!((v[1] - edge[1]).abs() < 1e-15);
        assert_eq!(g[0].dx, 0.0);
        assert_eq!(g[1].dx, 0.0);
        assert!(g[0].dy != 0.0);
    }

    #[test]
    fn partials_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let img = ImageBuffer::from_fn(8, 8, |_, _| rng.gen::<f64>()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let h = 1e-6;
        for _ in 0..50 {
            let (x, y): (f64, f64) = (rng.gen_range(0.05..6.95), rng.gen_range(0.05..6.95));
            // keep clear of the cell edges where the interpolant has kinks
            if (x - x.round()).abs() < 1e-3 || (y - y.round()).abs() < 1e-3 {
                continue;
            }
            let (_, g) = interp_bilinear(&img, &[(x, y)]);
            let (f, _) = interp_bilinear(&img, &[(x + h, y), (x - h, y), (x, y + h), (x, y - h)]);
            let fdx = (f[0] - f[1]) / (2.0 * h);
            let fdy = (f[2] - f[3]) / (2.0 * h);
            assert!((fdx - g[0].dx).abs() <= 1e-5 * g[0].dx.abs().max(1e-3));
            assert!((fdy - g[0].dy).abs() <= 1e-5 * g[0].dy.abs().max(1e-3));
        }
    }

    #[test]
    fn discs() {
        let (r, t) = make_disc_pair(32, 8.0, 8.0, (0.0, 0.0)).unwrap();
        assert_eq!(r, t);
        let (r, t) = make_disc_pair(32, 8.0, 6.0, (2.0, -1.0)).unwrap();
        assert!(r.data().iter().chain(t.data()).all(|v| (0.0..=1.0).contains(v)));
        assert!(r.data().iter().zip(t.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() > 0.0);
        assert!(make_disc_pair(16, 8.0, 4.0, (0.0, 0.0)).is_err());
    }

    #[test]
    fn pgm_ascii_and_binary_agree() {
        let ascii = b"P2\n# comment\n2 2\n255\n0 255\n255 0\n";
        let img = parse_pgm(ascii).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0, 1.0, 0.0]);
        let mut bin = b"P5 2 2 255\n".to_vec();
        bin.extend([0u8, 255, 255, 0]);
        assert_eq!(parse_pgm(&bin).unwrap(), img);
    }

    #[test]
    fn pgm_sixteen_bit() {
        let mut bin = b"P5\n2 1\n65535\n".to_vec();
        bin.extend([0xff, 0xff, 0x80, 0x00]);
        let img = parse_pgm(&bin).unwrap();
        assert_eq!(img.data()[0], 1.0);
        assert!((img.data()[1] - 32768.0 / 65535.0).abs() < 1e-15);
    }

    #[test]
    fn pgm_errors() {
        let mut bin = b"P5 2 2 255\n".to_vec();
        bin.extend([0u8, 255]);
        match parse_pgm(&bin) {
            Err(Error::Parse { message, offset }) => {
                assert!(message.contains("missing 2 bytes"), "{message}");
                assert_eq!(offset, bin.len());
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_pgm(b"P6 1 1 255\n\0"), Err(Error::Parse { offset: 0, .. })));
        assert!(matches!(parse_pgm(b"P2 2 x"), Err(Error::Parse { offset: 5, .. })));
        assert!(parse_pgm(b"P2 1 1 0\n0").is_err());
        assert!(parse_pgm(b"P2 2 1 10\n3").unwrap_err().to_string().contains("missing 1 samples"));
        assert!(parse_pgm(b"P2 1 1 10\n11").is_err());
    }

    #[test]
    fn pgm_roundtrip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let img = ImageBuffer::new(3, 2, vec![0.0, 1.0, 0.2, 0.4, 0.6, 1.0]).unwrap();
        write_pgm(&path, &img).unwrap();
        let back = load_pgm(&path).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
        assert!(matches!(load_pgm(dir.path().join("missing.pgm")), Err(Error::Io(_))));
    }
}
