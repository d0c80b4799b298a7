//! Raster containers and the color-segmentation detection pipeline.
//!
//! Detection runs four stages on an RGB frame: red-minus-luma difference,
//! median filtering, thresholding, and connected-component (blob) analysis.
//! The largest blob is taken to be the object.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("data length {got} does not match {width}x{height} ({expected} expected)")]
    DataLength {
        width: usize,
        height: usize,
        expected: usize,
        got: usize,
    },
    #[error("gray value {value} at index {index} outside [0,1]")]
    GrayRange { index: usize, value: f64 },
}

/// An RGB frame, 8 bits per channel, row-major `[r, g, b, r, g, b, ...]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyImage { width, height });
        }
        let expected = width * height * 3;
        if data.len() != expected {
            return Err(ImagingError::DataLength {
                width,
                height,
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// A frame filled with a single color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, ImagingError> {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn rgb(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_rgb(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// A single-channel image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyImage { width, height });
        }
        if data.len() != width * height {
            return Err(ImagingError::DataLength {
                width,
                height,
                expected: width * height,
                got: data.len(),
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(ImagingError::GrayRange { index, value });
        }
        Ok(Self {
            width,
            height,
            data,
        })
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

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// A boolean mask, row-major. `true` marks foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyImage { width, height });
        }
        if data.len() != width * height {
            return Err(ImagingError::DataLength {
                width,
                height,
                expected: width * height,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }
}

/// Axis-aligned pixel rectangle: `x, y` is the top-left corner (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    /// Center of the box in pixel coordinates. For a box spanning columns
    /// `x..x+w`, the center column is `x + (w-1)/2` (pixel centers, not edges).
    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + (self.w as f64 - 1.0) / 2.0,
            self.y as f64 + (self.h as f64 - 1.0) / 2.0,
        )
    }

    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x as f64
            && px <= (self.x + self.w - 1) as f64
            && py >= self.y as f64
            && py <= (self.y + self.h - 1) as f64
    }
}

/// A connected component of foreground pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    /// Number of member pixels.
    pub area: usize,
    /// Tight bounding box of the member pixels.
    pub bbox: BoundingBox,
    /// Arithmetic mean of member pixel coordinates.
    pub centroid: (f64, f64),
}

/// Result of `detect_object`: the largest blob's extent and both center
/// conventions (pixel-mass centroid and bounding-box center).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub centroid: (f64, f64),
    pub bbox_center: (f64, f64),
}

/// Red layer minus grayscale, clamped to `[0, 1]`.
///
/// Grayscale uses the standard luma weights 0.299/0.587/0.114, so a pure
/// red pixel maps to `1 - 0.299` and any gray pixel maps to 0.
pub fn red_difference(frame: &Frame) -> GrayImage {
    let out: Vec<f64> = frame
        .data
        .chunks_exact(3)
        .map(|px| {
            let r = px[0] as f64;
            let g = px[1] as f64;
            let b = px[2] as f64;
            let luma = 0.299 * r + 0.587 * g + 0.114 * b;
            ((r - luma) / 255.0).clamp(0.0, 1.0)
        })
        .collect();
    GrayImage {
        width: frame.width,
        height: frame.height,
        data: out,
    }
}

/// Median filter with a `(2*radius+1)^2` kernel and edge replication.
pub fn median_filter(img: &GrayImage, radius: usize) -> GrayImage {
    assert!(radius >= 1, "median filter radius must be >= 1");
    if radius == 1 && img.width >= 3 && img.height >= 3 {
        return median_filter_3x3(img);
    }
    let (w, h) = (img.width, img.height);
    let k = 2 * radius + 1;
    let mut window = vec![0.0f64; k * k];
    let mut out = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut n = 0;
            for dy in 0..k {
                // replicate edges by clamping the source coordinate
                let sy = (y + dy).saturating_sub(radius).min(h - 1);
                for dx in 0..k {
                    let sx = (x + dx).saturating_sub(radius).min(w - 1);
                    window[n] = img.data[sy * w + sx];
                    n += 1;
                }
            }
            let mid = n / 2;
            window[..n].select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
            out[y * w + x] = window[mid];
        }
    }
    GrayImage {
        width: w,
        height: h,
        data: out,
    }
}

/// Specialized 3x3 path: the kernel dominates the tracking pipeline cost,
/// so the interior uses a fixed median-of-9 exchange network.
fn median_filter_3x3(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width, img.height);
    let src = &img.data;
    let mut out = vec![0.0f64; w * h];

    #[inline(always)]
    fn median9(mut v: [f64; 9]) -> f64 {
        // Exchange network that leaves the median in v[4]. min/max compile
        // branch-free, which matters: noisy neighborhoods make an ordering
        // branch unpredictable.
        #[inline(always)]
        fn sort2(v: &mut [f64; 9], a: usize, b: usize) {
            let (lo, hi) = (v[a].min(v[b]), v[a].max(v[b]));
            v[a] = lo;
            v[b] = hi;
        }
        sort2(&mut v, 1, 2);
        sort2(&mut v, 4, 5);
        sort2(&mut v, 7, 8);
        sort2(&mut v, 0, 1);
        sort2(&mut v, 3, 4);
        sort2(&mut v, 6, 7);
        sort2(&mut v, 1, 2);
        sort2(&mut v, 4, 5);
        sort2(&mut v, 7, 8);
        sort2(&mut v, 0, 3);
        sort2(&mut v, 5, 8);
        sort2(&mut v, 4, 7);
        sort2(&mut v, 3, 6);
        sort2(&mut v, 1, 4);
        sort2(&mut v, 2, 5);
        sort2(&mut v, 4, 7);
        sort2(&mut v, 4, 2);
        sort2(&mut v, 6, 4);
        sort2(&mut v, 4, 2);
        v[4]
    }

    // Interior rows: no coordinate clamping needed.
    for y in 1..h - 1 {
        let up = &src[(y - 1) * w..y * w];
        let mid = &src[y * w..(y + 1) * w];
        let dn = &src[(y + 1) * w..(y + 2) * w];
        let out_row = &mut out[y * w..(y + 1) * w];
        for x in 1..w - 1 {
            let vals = [
                up[x - 1],
                up[x],
                up[x + 1],
                mid[x - 1],
                mid[x],
                mid[x + 1],
                dn[x - 1],
                dn[x],
                dn[x + 1],
            ];
            out_row[x] = median9(vals);
        }
    }
    // Border pixels with replicated neighbors.
    let mut border = |x: usize, y: usize| {
        let mut vals = [0.0f64; 9];
        let mut n = 0;
        for dy in -1i64..=1 {
            let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
            for dx in -1i64..=1 {
                let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                vals[n] = src[sy * w + sx];
                n += 1;
            }
        }
        out[y * w + x] = median9(vals);
    };
    for x in 0..w {
        border(x, 0);
        border(x, h - 1);
    }
    for y in 1..h - 1 {
        border(0, y);
        border(w - 1, y);
    }
    GrayImage {
        width: w,
        height: h,
        data: out,
    }
}

/// Mark pixels strictly above the threshold.
pub fn threshold(img: &GrayImage, t: f64) -> BinaryImage {
    debug_assert!((0.0..=1.0).contains(&t), "threshold must be in [0,1]");
    BinaryImage {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&v| v > t).collect(),
    }
}

/// Label maximal 8-connected components of foreground pixels.
///
/// Two-pass union-find labeling; blobs are listed in row-major order of
/// their first-scanned pixel.
pub fn connected_components(img: &BinaryImage) -> Vec<Blob> {
    let (w, h) = (img.width, img.height);
    let mut labels = vec![0u32; w * h];
    // parent[0] is the background sentinel and never unioned.
    let mut parent: Vec<u32> = vec![0];

    fn find(parent: &mut [u32], mut i: u32) -> u32 {
        while parent[i as usize] != i {
            parent[i as usize] = parent[parent[i as usize] as usize];
            i = parent[i as usize];
        }
        i
    }

    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            if !img.data[idx] {
                continue;
            }
            // neighbors already scanned: W, NW, N, NE
            let mut adj = [0u32; 4];
            let mut n_adj = 0;
            if x > 0 && img.data[idx - 1] {
                adj[n_adj] = labels[idx - 1];
                n_adj += 1;
            }
            if y > 0 {
                let up = idx - w;
                if x > 0 && img.data[up - 1] {
                    adj[n_adj] = labels[up - 1];
                    n_adj += 1;
                }
                if img.data[up] {
                    adj[n_adj] = labels[up];
                    n_adj += 1;
                }
                if x + 1 < w && img.data[up + 1] {
                    adj[n_adj] = labels[up + 1];
                    n_adj += 1;
                }
            }
            if n_adj == 0 {
                let label = parent.len() as u32;
                parent.push(label);
                labels[idx] = label;
            } else {
                let mut min = adj[0];
                for &a in &adj[1..n_adj] {
                    min = min.min(a);
                }
                labels[idx] = min;
                for &a in &adj[..n_adj] {
                    let ra = find(&mut parent, a);
                    let rm = find(&mut parent, min);
                    if ra != rm {
                        let (lo, hi) = if ra < rm { (ra, rm) } else { (rm, ra) };
                        parent[hi as usize] = lo;
                    }
                }
            }
        }
    }

    struct Acc {
        area: usize,
        min_x: usize,
        min_y: usize,
        max_x: usize,
        max_y: usize,
        sum_x: f64,
        sum_y: f64,
    }
    let mut order: Vec<u32> = Vec::new();
    let mut accs: Vec<Option<Acc>> = vec![];
    accs.resize_with(parent.len(), || None);

    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            if !img.data[idx] {
                continue;
            }
            let root = find(&mut parent, labels[idx]) as usize;
            let acc = accs[root].get_or_insert_with(|| {
                order.push(root as u32);
                Acc {
                    area: 0,
                    min_x: x,
                    min_y: y,
                    max_x: x,
                    max_y: y,
                    sum_x: 0.0,
                    sum_y: 0.0,
                }
            });
            acc.area += 1;
            acc.min_x = acc.min_x.min(x);
            acc.min_y = acc.min_y.min(y);
            acc.max_x = acc.max_x.max(x);
            acc.max_y = acc.max_y.max(y);
            acc.sum_x += x as f64;
            acc.sum_y += y as f64;
        }
    }

    order
        .iter()
        .map(|&root| {
            let acc = accs[root as usize].as_ref().unwrap();
            Blob {
                area: acc.area,
                bbox: BoundingBox {
                    x: acc.min_x,
                    y: acc.min_y,
                    w: acc.max_x - acc.min_x + 1,
                    h: acc.max_y - acc.min_y + 1,
                },
                centroid: (acc.sum_x / acc.area as f64, acc.sum_y / acc.area as f64),
            }
        })
        .collect()
}

/// Foreground mask of the detection pipeline:
/// `threshold(median_filter(red_difference(frame), radius), t)`.
///
/// For the 3x3 kernel this is computed as a majority vote — the median of a
/// window exceeds `t` exactly when at least five of its nine values do — so
/// the hot path needs no float sorting and no intermediate images. The
/// per-pixel red difference is evaluated with the very same expression as
/// `red_difference`, keeping the fused result bit-identical to the composed
/// stages (pinned by a property test).
fn segment_mask(frame: &Frame, t: f64, radius: usize) -> BinaryImage {
    if radius != 1 {
        return threshold(&median_filter(&red_difference(frame), radius), t);
    }
    let (w, h) = (frame.width, frame.height);
    let above: Vec<u8> = frame
        .data
        .chunks_exact(3)
        .map(|px| {
            let r = px[0] as f64;
            let g = px[1] as f64;
            let b = px[2] as f64;
            let luma = 0.299 * r + 0.587 * g + 0.114 * b;
            u8::from(((r - luma) / 255.0).clamp(0.0, 1.0) > t)
        })
        .collect();

    // horizontal window counts, replicating edge columns
    let mut row_counts = vec![0u8; w * h];
    for y in 0..h {
        let row = &above[y * w..(y + 1) * w];
        let out = &mut row_counts[y * w..(y + 1) * w];
        if w == 1 {
            out[0] = 3 * row[0];
            continue;
        }
        out[0] = 2 * row[0] + row[1];
        for x in 1..w - 1 {
            out[x] = row[x - 1] + row[x] + row[x + 1];
        }
        out[w - 1] = row[w - 2] + 2 * row[w - 1];
    }

    // vertical accumulation and the majority decision
    let mut data = vec![false; w * h];
    for y in 0..h {
        let mid = &row_counts[y * w..(y + 1) * w];
        let up = &row_counts[y.saturating_sub(1) * w..y.saturating_sub(1) * w + w];
        let dn_y = (y + 1).min(h - 1);
        let dn = &row_counts[dn_y * w..dn_y * w + w];
        let out = &mut data[y * w..(y + 1) * w];
        for x in 0..w {
            out[x] = up[x] + mid[x] + dn[x] >= 5;
        }
    }
    BinaryImage {
        width: w,
        height: h,
        data,
    }
}

/// Run the full detection pipeline and return the largest blob, if any.
///
/// Ties on area break toward the smallest `(y, x)` bounding-box corner.
pub fn detect_object(frame: &Frame, t: f64, radius: usize) -> Option<Detection> {
    let binary = segment_mask(frame, t, radius);
    let blobs = connected_components(&binary);
    blobs
        .into_iter()
        .max_by(|a, b| {
            a.area
                .cmp(&b.area)
                // larger area wins; on ties the smaller (y, x) corner wins
                .then(b.bbox.y.cmp(&a.bbox.y))
                .then(b.bbox.x.cmp(&a.bbox.x))
        })
        .map(|blob| Detection {
            bbox: blob.bbox,
            centroid: blob.centroid,
            bbox_center: blob.bbox.center(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(w: usize, h: usize, data: Vec<f64>) -> GrayImage {
        GrayImage::new(w, h, data).unwrap()
    }

    fn binary(w: usize, h: usize, data: Vec<bool>) -> BinaryImage {
        BinaryImage::new(w, h, data).unwrap()
    }

    /// Independent brute-force median for cross-checking the filter.
    fn median_oracle(img: &GrayImage, radius: usize) -> Vec<f64> {
        let (w, h) = (img.width(), img.height());
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let mut vals = Vec::new();
                for dy in -(radius as i64)..=radius as i64 {
                    for dx in -(radius as i64)..=radius as i64 {
                        let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                        let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                        vals.push(img.get(sx, sy));
                    }
                }
                vals.sort_by(|a, b| a.total_cmp(b));
                out.push(vals[vals.len() / 2]);
            }
        }
        out
    }

    /// Independent BFS flood-fill used as the blob-labeling oracle.
    fn flood_fill_oracle(img: &BinaryImage) -> Vec<Blob> {
        let (w, h) = (img.width(), img.height());
        let mut seen = vec![false; w * h];
        let mut blobs = Vec::new();
        for sy in 0..h {
            for sx in 0..w {
                if !img.get(sx, sy) || seen[sy * w + sx] {
                    continue;
                }
                let mut queue = vec![(sx, sy)];
                seen[sy * w + sx] = true;
                let mut members = Vec::new();
                while let Some((x, y)) = queue.pop() {
                    members.push((x, y));
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let nx = x as i64 + dx;
                            let ny = y as i64 + dy;
                            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                                continue;
                            }
                            let (nx, ny) = (nx as usize, ny as usize);
                            if img.get(nx, ny) && !seen[ny * w + nx] {
                                seen[ny * w + nx] = true;
                                queue.push((nx, ny));
                            }
                        }
                    }
                }
                let min_x = members.iter().map(|m| m.0).min().unwrap();
                let max_x = members.iter().map(|m| m.0).max().unwrap();
                let min_y = members.iter().map(|m| m.1).min().unwrap();
                let max_y = members.iter().map(|m| m.1).max().unwrap();
                let area = members.len();
                let sum_x: usize = members.iter().map(|m| m.0).sum();
                let sum_y: usize = members.iter().map(|m| m.1).sum();
                blobs.push(Blob {
                    area,
                    bbox: BoundingBox {
                        x: min_x,
                        y: min_y,
                        w: max_x - min_x + 1,
                        h: max_y - min_y + 1,
                    },
                    centroid: (sum_x as f64 / area as f64, sum_y as f64 / area as f64),
                });
            }
        }
        blobs
    }

    fn sort_blobs(mut blobs: Vec<Blob>) -> Vec<Blob> {
        blobs.sort_by(|a, b| {
            (a.bbox.y, a.bbox.x, a.area)
                .partial_cmp(&(b.bbox.y, b.bbox.x, b.area))
                .unwrap()
        });
        blobs
    }

    fn frame_with_rect(
        w: usize,
        h: usize,
        bg: [u8; 3],
        fg: [u8; 3],
        rect: (usize, usize, usize, usize),
    ) -> Frame {
        let mut f = Frame::filled(w, h, bg).unwrap();
        let (rx, ry, rw, rh) = rect;
        for y in ry..ry + rh {
            for x in rx..rx + rw {
                f.set_rgb(x, y, fg);
            }
        }
        f
    }

    #[test]
    fn red_difference_pure_red() {
        let f = Frame::filled(2, 2, [255, 0, 0]).unwrap();
        let g = red_difference(&f);
        for &v in g.data() {
            assert!((v - 0.701).abs() < 1e-12, "got {v}");
        }
    }

    #[test]
    fn red_difference_white_and_green() {
        let white = Frame::filled(1, 1, [255, 255, 255]).unwrap();
        assert!(red_difference(&white).get(0, 0).abs() < 1e-12);
        let green = Frame::filled(1, 1, [0, 255, 0]).unwrap();
        assert_eq!(red_difference(&green).get(0, 0), 0.0);
    }

    #[test]
    fn median_constant_is_identity() {
        let img = gray(5, 4, vec![0.3; 20]);
        assert_eq!(median_filter(&img, 1).data(), img.data());
        assert_eq!(median_filter(&img, 2).data(), img.data());
    }

    #[test]
    fn median_removes_single_outlier() {
        let mut data = vec![0.0; 9];
        data[4] = 1.0;
        let img = gray(3, 3, data);
        let out = median_filter(&img, 1);
        assert!(out.data().iter().all(|&v| v == 0.0));
        assert_eq!(out.data(), &median_oracle(&img, 1)[..]);
    }

    #[test]
    fn median_degenerate_1x1() {
        let img = gray(1, 1, vec![0.42]);
        assert_eq!(median_filter(&img, 1).get(0, 0), 0.42);
    }

    #[test]
    fn threshold_is_strict() {
        let img = gray(3, 1, vec![0.701, 0.25, 0.0]);
        let b = threshold(&img, 0.25);
        assert_eq!(b.data(), &[true, false, false]);
    }

    #[test]
    fn threshold_all_zero() {
        let img = gray(2, 2, vec![0.0; 4]);
        assert!(threshold(&img, 0.25).data().iter().all(|&v| !v));
    }

    #[test]
    fn components_single_pixel() {
        let mut data = vec![false; 8 * 8];
        data[5 * 8 + 3] = true;
        let blobs = connected_components(&binary(8, 8, data));
        assert_eq!(blobs.len(), 1);
        assert_eq!(blobs[0].area, 1);
        assert_eq!(
            blobs[0].bbox,
            BoundingBox {
                x: 3,
                y: 5,
                w: 1,
                h: 1
            }
        );
        assert_eq!(blobs[0].centroid, (3.0, 5.0));
    }

    #[test]
    fn components_diagonal_pixels_are_one_blob() {
        let mut data = vec![false; 4 * 4];
        data[0] = true;
        data[4 + 1] = true;
        let blobs = connected_components(&binary(4, 4, data));
        assert_eq!(blobs.len(), 1);
        assert_eq!(blobs[0].area, 2);
    }

    #[test]
    fn components_solid_square() {
        let mut data = vec![false; 6 * 6];
        for y in 0..4 {
            for x in 0..4 {
                data[y * 6 + x] = true;
            }
        }
        let blobs = connected_components(&binary(6, 6, data));
        assert_eq!(blobs.len(), 1);
        assert_eq!(blobs[0].area, 16);
        assert_eq!(blobs[0].centroid, (1.5, 1.5));
    }

    #[test]
    fn detect_single_red_square() {
        let f = frame_with_rect(64, 48, [90, 90, 90], [220, 20, 20], (10, 12, 10, 10));
        let det = detect_object(&f, 0.25, 1).unwrap();
        assert_eq!(
            det.bbox,
            BoundingBox {
                x: 10,
                y: 12,
                w: 10,
                h: 10
            }
        );
        let (cx, cy) = det.centroid;
        assert!((cx - 14.5).abs() < 0.5 && (cy - 16.5).abs() < 0.5);
        assert_eq!(det.bbox_center, (14.5, 16.5));
    }

    #[test]
    fn detect_nothing_on_black() {
        let f = Frame::filled(32, 32, [0, 0, 0]).unwrap();
        assert!(detect_object(&f, 0.25, 1).is_none());
    }

    #[test]
    fn detect_prefers_larger_blob() {
        let mut f = frame_with_rect(64, 64, [80, 80, 80], [220, 20, 20], (5, 5, 10, 10));
        for y in 40..44 {
            for x in 40..44 {
                f.set_rgb(x, y, [220, 20, 20]);
            }
        }
        let det = detect_object(&f, 0.25, 1).unwrap();
        assert_eq!(det.bbox.x, 5);
        assert_eq!(det.bbox.w, 10);
    }

    #[test]
    fn detect_tie_breaks_on_topmost_leftmost() {
        // Two 4x4 squares of equal area; the one with smaller (y, x) wins.
        let mut f = Frame::filled(40, 40, [0, 0, 0]).unwrap();
        for (ox, oy) in [(25usize, 25usize), (5, 5)] {
            for y in oy..oy + 4 {
                for x in ox..ox + 4 {
                    f.set_rgb(x, y, [255, 0, 0]);
                }
            }
        }
        let det = detect_object(&f, 0.25, 1).unwrap();
        assert_eq!((det.bbox.x, det.bbox.y), (5, 5));
    }

    #[test]
    fn frame_rejects_bad_length() {
        assert!(Frame::new(2, 2, vec![0; 11]).is_err());
        assert!(Frame::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn gray_rejects_out_of_range() {
        assert!(GrayImage::new(2, 1, vec![0.5, 1.5]).is_err());
        assert!(GrayImage::new(2, 1, vec![-0.1, 0.5]).is_err());
    }

    proptest! {
        #[test]
        fn red_difference_stays_in_unit_range(
            w in 1usize..12, h in 1usize..12,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<u8> = (0..w * h * 3).map(|_| rng.gen()).collect();
            let f = Frame::new(w, h, data).unwrap();
            let g = red_difference(&f);
            prop_assert!(g.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn median_output_drawn_from_input_values(
            w in 1usize..10, h in 1usize..10,
            radius in 1usize..3,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // few distinct values so membership is meaningful
            let data: Vec<f64> = (0..w * h).map(|_| [0.0, 0.25, 0.5, 1.0][rng.gen_range(0..4)]).collect();
            let img = gray(w, h, data.clone());
            let out = median_filter(&img, radius);
            prop_assert!(out.data().iter().all(|v| data.contains(v)));
            prop_assert_eq!(out.data(), &median_oracle(&img, radius)[..]);
        }

        #[test]
        fn threshold_zero_marks_positive_pixels(
            w in 1usize..8, h in 1usize..8,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..w * h).map(|_| [0.0, 0.1, 0.9][rng.gen_range(0..3)]).collect();
            let img = gray(w, h, data.clone());
            let at_zero = threshold(&img, 0.0);
            for (i, &v) in data.iter().enumerate() {
                prop_assert_eq!(at_zero.data()[i], v > 0.0);
            }
            prop_assert!(threshold(&img, 1.0).data().iter().all(|&v| !v));
        }

        #[test]
        fn fused_mask_matches_composed_pipeline(
            w in 1usize..14, h in 1usize..14,
            t in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<u8> = (0..w * h * 3).map(|_| rng.gen()).collect();
            let f = Frame::new(w, h, data).unwrap();
            let fused = segment_mask(&f, t, 1);
            let composed = threshold(&median_filter(&red_difference(&f), 1), t);
            prop_assert_eq!(fused, composed);
        }

        #[test]
        fn components_match_flood_fill_oracle(
            w in 1usize..=16, h in 1usize..=16,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(0.4)).collect();
            let img = binary(w, h, data.clone());
            let got = sort_blobs(connected_components(&img));
            let want = sort_blobs(flood_fill_oracle(&img));
            prop_assert_eq!(&got, &want);

            // areas partition the foreground
            let true_count = data.iter().filter(|&&v| v).count();
            let area_sum: usize = got.iter().map(|b| b.area).sum();
            prop_assert_eq!(area_sum, true_count);
            for b in &got {
                prop_assert!(b.bbox.contains(b.centroid.0, b.centroid.1));
                prop_assert!(b.area <= b.bbox.w * b.bbox.h);
            }
        }
    }
}
