//! Volume I/O, normalization, patch extraction, and train/val/test
//! splitting.

mod npy;
mod synth;

pub use npy::{load_npy, save_npy, NpyArray};
pub use synth::{dominant_frequency, synth_volume, SynthConfig};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Array2D;
use crate::tensor::Tensor4;

/// 3D seismic volume in `(inline, crossline, time)` order, time fastest.
#[derive(Clone, Debug)]
pub struct SeismicVolume {
    data: Vec<f64>,
    n_inline: usize,
    n_crossline: usize,
    n_time: usize,
    /// Seconds per time sample.
    pub dt: f64,
    /// Meters between adjacent traces.
    pub dx: f64,
    /// Free-text description of where the volume came from.
    pub provenance: String,
}

impl SeismicVolume {
    pub fn new(
        data: Vec<f64>,
        dims: (usize, usize, usize),
        dt: f64,
        dx: f64,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let (n_inline, n_crossline, n_time) = dims;
        if n_inline == 0 || n_crossline == 0 || n_time == 0 {
            return Err(Error::Shape(format!("volume dims must be >= 1, got {dims:?}")));
        }
        if data.len() != n_inline * n_crossline * n_time {
            return Err(Error::Shape(format!(
                "volume data length {} does not match dims {dims:?}",
                data.len()
            )));
        }
        if !(dt > 0.0) || !(dx > 0.0) {
            return Err(Error::Config(format!("volume sampling must be positive: dt={dt} dx={dx}")));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("volume contains NaN or infinity".into()));
        }
        Ok(SeismicVolume {
            data,
            n_inline,
            n_crossline,
            n_time,
            dt,
            dx,
            provenance: provenance.into(),
        })
    }

    pub fn from_npy(path: &Path, dt: f64, dx: f64) -> Result<Self> {
        let arr = load_npy(path)?;
        if arr.shape.len() != 3 {
            return Err(Error::Format(format!(
                "{}: expected a 3D volume, got shape {:?}",
                path.display(),
                arr.shape
            )));
        }
        SeismicVolume::new(
            arr.data,
            (arr.shape[0], arr.shape[1], arr.shape[2]),
            dt,
            dx,
            format!("loaded from {}", path.display()),
        )
    }

    pub fn save_npy(&self, path: &Path) -> Result<()> {
        save_npy(path, &[self.n_inline, self.n_crossline, self.n_time], &self.data)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_inline, self.n_crossline, self.n_time)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn trace(&self, il: usize, xl: usize) -> &[f64] {
        let start = (il * self.n_crossline + xl) * self.n_time;
        &self.data[start..start + self.n_time]
    }

    pub fn trace_mut(&mut self, il: usize, xl: usize) -> &mut [f64] {
        let start = (il * self.n_crossline + xl) * self.n_time;
        &mut self.data[start..start + self.n_time]
    }

    /// `(crossline, time)` section at a fixed inline.
    pub fn inline_section(&self, il: usize) -> Array2D {
        Array2D::from_fn(self.n_crossline, self.n_time, |xl, t| self.trace(il, xl)[t])
    }

    /// `(inline, time)` section at a fixed crossline.
    pub fn crossline_section(&self, xl: usize) -> Array2D {
        Array2D::from_fn(self.n_inline, self.n_time, |il, t| self.trace(il, xl)[t])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Divides by the global maximum absolute value, mapping the volume
/// into `[-1, 1]` while preserving zero and polarity. Returns the scale
/// so callers can invert.
pub fn normalize(volume: &SeismicVolume) -> Result<(SeismicVolume, f64)> {
    let scale = volume.max_abs();
    if scale == 0.0 {
        return Err(Error::Numeric("cannot normalize an all-zero volume".into()));
    }
    let mut out = volume.clone();
    for v in out.data_mut() {
        *v /= scale;
    }
    Ok((out, scale))
}

/// Multiplies the normalization back.
pub fn denormalize(volume: &SeismicVolume, scale: f64) -> SeismicVolume {
    let mut out = volume.clone();
    for v in out.data_mut() {
        *v *= scale;
    }
    out
}

/// Which family of 2D slices a patch was cut from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SliceAxis {
    Inline,
    Crossline,
}

/// Where one patch sits in the volume: `row`/`col` index the slice's
/// `(lateral, time)` plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchOrigin {
    pub axis: SliceAxis,
    pub slice: usize,
    pub row: usize,
    pub col: usize,
}

/// Square patches plus their provenance. `im` carries the quadrature
/// when the patches were cut from an analytic volume.
#[derive(Clone, Debug)]
pub struct PatchSet {
    /// `(count, 1, size, size)`.
    pub re: Tensor4,
    /// Same shape as `re` when present.
    pub im: Option<Tensor4>,
    pub origins: Vec<PatchOrigin>,
    pub size: usize,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn is_complex(&self) -> bool {
        self.im.is_some()
    }

    /// New set holding the listed patches, in the given order.
    pub fn subset(&self, indices: &[usize]) -> PatchSet {
        let s = self.size;
        let gather = |src: &Tensor4| {
            let mut out = Tensor4::zeros((indices.len(), 1, s, s));
            for (dst, &i) in indices.iter().enumerate() {
                out.plane_mut(dst, 0).copy_from_slice(src.plane(i, 0));
            }
            out
        };
        PatchSet {
            re: gather(&self.re),
            im: self.im.as_ref().map(gather),
            origins: indices.iter().map(|&i| self.origins[i]).collect(),
            size: s,
        }
    }

    /// Writes origin records as CSV: `patch_id,axis,slice,row,col`.
    pub fn origins_csv(&self) -> String {
        let mut out = String::from("patch_id,axis,slice,row,col\n");
        for (i, o) in self.origins.iter().enumerate() {
            let axis = match o.axis {
                SliceAxis::Inline => "inline",
                SliceAxis::Crossline => "crossline",
            };
            out.push_str(&format!("{i},{axis},{},{},{}\n", o.slice, o.row, o.col));
        }
        out
    }
}

/// Grid positions covering `[0, dim)` with the given stride; the last
/// window is anchored at the edge when the stride leaves a remainder.
fn grid_positions(dim: usize, size: usize, stride: usize) -> Vec<usize> {
    if dim < size {
        return Vec::new();
    }
    let mut v = Vec::new();
    let mut p = 0;
    while p + size <= dim {
        v.push(p);
        p += stride;
    }
    let last = dim - size;
    if *v.last().unwrap() != last {
        v.push(last);
    }
    v
}

/// Patch origins over every inline and crossline slice.
pub fn patch_origins(
    dims: (usize, usize, usize),
    size: usize,
    stride: usize,
) -> Result<Vec<PatchOrigin>> {
    if size == 0 || stride == 0 {
        return Err(Error::Config("patch size and stride must be positive".into()));
    }
    let (n_il, n_xl, n_t) = dims;
    let cols = grid_positions(n_t, size, stride);
    let mut origins = Vec::new();
    for il in 0..n_il {
        for &row in &grid_positions(n_xl, size, stride) {
            for &col in &cols {
                origins.push(PatchOrigin { axis: SliceAxis::Inline, slice: il, row, col });
            }
        }
    }
    for xl in 0..n_xl {
        for &row in &grid_positions(n_il, size, stride) {
            for &col in &cols {
                origins.push(PatchOrigin { axis: SliceAxis::Crossline, slice: xl, row, col });
            }
        }
    }
    if origins.is_empty() {
        return Err(Error::Shape(format!(
            "no {size}x{size} patches fit a volume of dims {dims:?}"
        )));
    }
    Ok(origins)
}

fn gather(volume: &SeismicVolume, origins: &[PatchOrigin], size: usize) -> Tensor4 {
    let mut out = Tensor4::zeros((origins.len(), 1, size, size));
    for (pi, o) in origins.iter().enumerate() {
        let plane = out.plane_mut(pi, 0);
        for r in 0..size {
            let trace = match o.axis {
                SliceAxis::Inline => volume.trace(o.slice, o.row + r),
                SliceAxis::Crossline => volume.trace(o.row + r, o.slice),
            };
            plane[r * size..(r + 1) * size].copy_from_slice(&trace[o.col..o.col + size]);
        }
    }
    out
}

/// Cuts `size`x`size` patches from every inline and crossline slice on
/// a `stride`-spaced grid, edge windows anchored at the boundary.
pub fn extract_patches(volume: &SeismicVolume, size: usize, stride: usize) -> Result<PatchSet> {
    let origins = patch_origins(volume.dims(), size, stride)?;
    let re = gather(volume, &origins, size);
    Ok(PatchSet { re, im: None, origins, size })
}

/// Like [`extract_patches`] but cutting matched (re, im) pairs from an
/// analytic volume; both components share the same origins.
pub fn extract_patches_complex(
    re_volume: &SeismicVolume,
    im_volume: &SeismicVolume,
    size: usize,
    stride: usize,
) -> Result<PatchSet> {
    if re_volume.dims() != im_volume.dims() {
        return Err(Error::Shape(format!(
            "analytic volume components differ: {:?} vs {:?}",
            re_volume.dims(),
            im_volume.dims()
        )));
    }
    let origins = patch_origins(re_volume.dims(), size, stride)?;
    let re = gather(re_volume, &origins, size);
    let im = gather(im_volume, &origins, size);
    Ok(PatchSet { re, im: Some(im), origins, size })
}

/// Train/val/test fractions plus the seed used to shuffle patch order.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 0.8, val: 0.1, test: 0.1, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("split fraction {name}={v} out of [0,1]")));
            }
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SplitPatches {
    pub train: PatchSet,
    pub val: PatchSet,
    pub test: PatchSet,
}

/// Splits patches by slice membership: within each axis, the slice
/// index range is divided into contiguous train / val / test blocks, so
/// test patches come from held-out slices and never share a slice with
/// training patches. The seed only shuffles patch order inside each
/// split.
pub fn split_patches(set: &PatchSet, spec: &SplitSpec) -> Result<SplitPatches> {
    spec.validate()?;
    let mut per_axis: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for o in &set.origins {
        let bucket = match o.axis {
            SliceAxis::Inline => &mut per_axis[0],
            SliceAxis::Crossline => &mut per_axis[1],
        };
        if !bucket.contains(&o.slice) {
            bucket.push(o.slice);
        }
    }
    for bucket in &mut per_axis {
        bucket.sort_unstable();
    }
    // contiguous slice-index ranges per axis
    let boundaries = |n: usize| {
        let a = (spec.train * n as f64).floor() as usize;
        let b = ((spec.train + spec.val) * n as f64).floor() as usize;
        (a, b.max(a))
    };
    let membership = |o: &PatchOrigin| -> usize {
        let (axis_idx, slices) = match o.axis {
            SliceAxis::Inline => (0, &per_axis[0]),
            SliceAxis::Crossline => (1, &per_axis[1]),
        };
        let _ = axis_idx;
        let pos = slices.binary_search(&o.slice).unwrap();
        let (a, b) = boundaries(slices.len());
        if pos < a {
            0
        } else if pos < b {
            1
        } else {
            2
        }
    };
    let mut indices: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (i, o) in set.origins.iter().enumerate() {
        indices[membership(o)].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for bucket in &mut indices {
        bucket.shuffle(&mut rng);
    }
    Ok(SplitPatches {
        train: set.subset(&indices[0]),
        val: set.subset(&indices[1]),
        test: set.subset(&indices[2]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_volume(dims: (usize, usize, usize)) -> SeismicVolume {
        let (il, xl, t) = dims;
        let data = (0..il * xl * t).map(|i| (i as f64 * 0.37).sin()).collect();
        SeismicVolume::new(data, dims, 0.004, 25.0, "toy").unwrap()
    }

    #[test]
    fn normalize_scales_by_max_abs_and_roundtrips() {
        let mut vol = toy_volume((1, 4, 16));
        vol.data_mut()[3] = -4.0;
        let (normed, scale) = normalize(&vol).unwrap();
        assert_eq!(scale, 4.0);
        assert!(normed.max_abs() <= 1.0);
        assert_eq!(normed.data()[3], -1.0);
        let back = denormalize(&normed, scale);
        for (a, b) in back.data().iter().zip(vol.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_identity_when_already_normalized() {
        let mut vol = toy_volume((1, 2, 8));
        vol.data_mut()[5] = 1.0;
        let (normed, scale) = normalize(&vol).unwrap();
        assert_eq!(scale, 1.0);
        assert_eq!(normed.data(), vol.data());
    }

    #[test]
    fn normalize_rejects_all_zero() {
        let vol = SeismicVolume::new(vec![0.0; 8], (1, 2, 4), 0.004, 25.0, "z").unwrap();
        assert!(normalize(&vol).is_err());
    }

    #[test]
    fn single_patch_volume() {
        let vol = toy_volume((1, 64, 64));
        let set = extract_patches(&vol, 64, 64).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.origins[0].axis, SliceAxis::Inline);
    }

    #[test]
    fn edge_anchor_gives_two_overlapping_patches() {
        let vol = toy_volume((1, 64, 96));
        let set = extract_patches(&vol, 64, 64).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.origins[0].col, 0);
        assert_eq!(set.origins[1].col, 32);
    }

    #[test]
    fn oversized_patch_rejected() {
        let vol = toy_volume((1, 32, 32));
        assert!(extract_patches(&vol, 64, 64).is_err());
    }

    #[test]
    fn reassembly_from_origins_reproduces_singly_covered_cells() {
        let vol = toy_volume((2, 20, 24));
        let size = 8;
        let set = extract_patches(&vol, size, 5).unwrap();
        let (n_il, n_xl, n_t) = vol.dims();
        let mut acc = vec![0.0; n_il * n_xl * n_t];
        let mut count = vec![0u32; n_il * n_xl * n_t];
        for (pi, o) in set.origins.iter().enumerate() {
            let plane = set.re.plane(pi, 0);
            for r in 0..size {
                for c in 0..size {
                    let (il, xl) = match o.axis {
                        SliceAxis::Inline => (o.slice, o.row + r),
                        SliceAxis::Crossline => (o.row + r, o.slice),
                    };
                    let t = o.col + c;
                    let idx = (il * n_xl + xl) * n_t + t;
                    acc[idx] += plane[r * size + c];
                    count[idx] += 1;
                }
            }
        }
        let mut singles = 0;
        for (idx, &cnt) in count.iter().enumerate() {
            if cnt == 1 {
                assert!((acc[idx] - vol.data()[idx]).abs() < 1e-15);
                singles += 1;
            } else if cnt > 1 {
                assert!((acc[idx] / cnt as f64 - vol.data()[idx]).abs() < 1e-12);
            }
        }
        assert!(singles > 0, "expected some singly covered cells");
    }

    #[test]
    fn split_is_deterministic_and_leak_free() {
        let vol = toy_volume((12, 16, 16));
        let set = extract_patches(&vol, 8, 8).unwrap();
        let spec = SplitSpec { train: 0.6, val: 0.2, test: 0.2, seed: 7 };
        let a = split_patches(&set, &spec).unwrap();
        let b = split_patches(&set, &spec).unwrap();
        assert_eq!(a.train.origins, b.train.origins);
        assert_eq!(a.val.origins, b.val.origins);
        assert_eq!(a.test.origins, b.test.origins);
        assert_eq!(a.train.len() + a.val.len() + a.test.len(), set.len());

        for axis in [SliceAxis::Inline, SliceAxis::Crossline] {
            let train_slices: Vec<usize> = a
                .train
                .origins
                .iter()
                .filter(|o| o.axis == axis)
                .map(|o| o.slice)
                .collect();
            for o in a.test.origins.iter().filter(|o| o.axis == axis) {
                assert!(
                    !train_slices.contains(&o.slice),
                    "slice {} leaked into both train and test",
                    o.slice
                );
            }
        }
    }

    #[test]
    fn invalid_split_fractions_rejected() {
        let spec = SplitSpec { train: 0.9, val: 0.2, test: 0.2, seed: 0 };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn origins_csv_has_one_row_per_patch() {
        let vol = toy_volume((1, 64, 64));
        let set = extract_patches(&vol, 64, 64).unwrap();
        let csv = set.origins_csv();
        assert_eq!(csv.lines().count(), 1 + set.len());
        assert!(csv.starts_with("patch_id,axis,slice,row,col"));
    }
}
