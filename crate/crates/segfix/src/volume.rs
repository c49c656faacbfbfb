//! Dense 3D volumes, window geometry, and object masks.
//!
//! Volumes are stored z-major, then y, then x (`index = (z * ny + y) * nx + x`)
//! and serialized little-endian with a JSON sidecar describing shape, element
//! kind, and voxel size. Label 0 is background everywhere in this crate.

use std::collections::BTreeSet;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A voxel coordinate. Signed so that window arithmetic near borders is exact.
pub type Point3 = [i64; 3];

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("shape dimensions must all be >= 1, got {0}x{1}x{2}")]
    EmptyShape(usize, usize, usize),
    #[error("voxel size components must be > 0")]
    BadVoxelSize,
    #[error("data length {got} does not match shape ({expected} voxels)")]
    DataLength { got: usize, expected: usize },
    #[error("window dimensions must be odd, got {0}x{1}x{2}")]
    EvenWindow(usize, usize, usize),
    #[error("valid-mode window at {center:?} of shape {shape:?} does not fit in volume {volume:?}")]
    WindowOutOfBounds {
        center: Point3,
        shape: [usize; 3],
        volume: [usize; 3],
    },
    #[error("label 0 is background, not an object")]
    BackgroundLabel,
    #[error("box min must be <= max componentwise: {min:?} vs {max:?}")]
    InvalidBox { min: Point3, max: Point3 },
    #[error("file holds {got} bytes but sidecar declares {expected}")]
    SizeMismatch { got: usize, expected: usize },
    #[error("unsupported bytes_per_element {0} for kind {1}")]
    UnsupportedWidth(usize, String),
    #[error("unknown volume kind {0:?}")]
    UnknownKind(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("sidecar parse error on {path}: {source}")]
    Sidecar {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Voxel counts per axis. All dimensions are at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape3 {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Shape3 {
    pub fn new(x: usize, y: usize, z: usize) -> Result<Self, VolumeError> {
        if x == 0 || y == 0 || z == 0 {
            return Err(VolumeError::EmptyShape(x, y, z));
        }
        Ok(Shape3 { x, y, z })
    }

    pub fn len(&self) -> usize {
        self.x * self.y * self.z
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear index, z-major then y then x.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.y + y) * self.x + x
    }

    #[inline]
    pub fn contains(&self, p: Point3) -> bool {
        p[0] >= 0
            && p[1] >= 0
            && p[2] >= 0
            && (p[0] as usize) < self.x
            && (p[1] as usize) < self.y
            && (p[2] as usize) < self.z
    }

    #[inline]
    pub fn index_point(&self, p: Point3) -> usize {
        debug_assert!(self.contains(p));
        self.index(p[0] as usize, p[1] as usize, p[2] as usize)
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_odd(&self) -> bool {
        self.x % 2 == 1 && self.y % 2 == 1 && self.z % 2 == 1
    }

    /// Half extent per axis (`floor(dim / 2)`), the window radius for odd shapes.
    pub fn radius(&self) -> [i64; 3] {
        [
            (self.x / 2) as i64,
            (self.y / 2) as i64,
            (self.z / 2) as i64,
        ]
    }

    /// The full extent of the volume as a box anchored at the origin.
    pub fn bounds(&self) -> Box3 {
        Box3 {
            min: [0, 0, 0],
            max: [self.x as i64, self.y as i64, self.z as i64],
        }
    }

    /// Iterate all coordinates in index order.
    pub fn iter(&self) -> impl Iterator<Item = Point3> + '_ {
        let (nx, ny, nz) = (self.x, self.y, self.z);
        (0..nz).flat_map(move |z| {
            (0..ny).flat_map(move |y| (0..nx).map(move |x| [x as i64, y as i64, z as i64]))
        })
    }
}

/// Physical voxel extents in nanometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelSize {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl VoxelSize {
    pub fn new(dx: f64, dy: f64, dz: f64) -> Result<Self, VolumeError> {
        if dx <= 0.0 || dy <= 0.0 || dz <= 0.0 {
            return Err(VolumeError::BadVoxelSize);
        }
        Ok(VoxelSize { dx, dy, dz })
    }
}

impl Default for VoxelSize {
    fn default() -> Self {
        VoxelSize {
            dx: 3.6,
            dy: 3.6,
            dz: 40.0,
        }
    }
}

/// Axis-aligned box in voxel coordinates, inclusive min, exclusive max.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Box3 {
    pub min: Point3,
    pub max: Point3,
}

impl Box3 {
    pub fn new(min: Point3, max: Point3) -> Result<Self, VolumeError> {
        if min.iter().zip(&max).any(|(a, b)| a > b) {
            return Err(VolumeError::InvalidBox { min, max });
        }
        Ok(Box3 { min, max })
    }

    /// The box of the given shape centered at `center`. Requires odd dims so
    /// the center is unambiguous.
    pub fn window_at(center: Point3, shape: Shape3) -> Result<Self, VolumeError> {
        if !shape.is_odd() {
            return Err(VolumeError::EvenWindow(shape.x, shape.y, shape.z));
        }
        let r = shape.radius();
        Ok(Box3 {
            min: [center[0] - r[0], center[1] - r[1], center[2] - r[2]],
            max: [
                center[0] + r[0] + 1,
                center[1] + r[1] + 1,
                center[2] + r[2] + 1,
            ],
        })
    }

    pub fn extents(&self) -> [usize; 3] {
        [
            (self.max[0] - self.min[0]) as usize,
            (self.max[1] - self.min[1]) as usize,
            (self.max[2] - self.min[2]) as usize,
        ]
    }

    pub fn len(&self) -> usize {
        let e = self.extents();
        e[0] * e[1] * e[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn contains(&self, p: Point3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] < self.max[a])
    }

    pub fn intersect(&self, other: &Box3) -> Option<Box3> {
        let mut min = [0i64; 3];
        let mut max = [0i64; 3];
        for a in 0..3 {
            min[a] = self.min[a].max(other.min[a]);
            max[a] = self.max[a].min(other.max[a]);
            if min[a] >= max[a] {
                return None;
            }
        }
        Some(Box3 { min, max })
    }

    pub fn union(&self, other: &Box3) -> Box3 {
        let mut min = [0i64; 3];
        let mut max = [0i64; 3];
        for a in 0..3 {
            min[a] = self.min[a].min(other.min[a]);
            max[a] = self.max[a].max(other.max[a]);
        }
        Box3 { min, max }
    }

    pub fn dilate(&self, r: [i64; 3]) -> Box3 {
        Box3 {
            min: [self.min[0] - r[0], self.min[1] - r[1], self.min[2] - r[2]],
            max: [self.max[0] + r[0], self.max[1] + r[1], self.max[2] + r[2]],
        }
    }

    /// Local linear index of a point inside the box, same axis order as Shape3.
    #[inline]
    pub fn local_index(&self, p: Point3) -> usize {
        debug_assert!(self.contains(p));
        let e = self.extents();
        let lx = (p[0] - self.min[0]) as usize;
        let ly = (p[1] - self.min[1]) as usize;
        let lz = (p[2] - self.min[2]) as usize;
        (lz * e[1] + ly) * e[0] + lx
    }

    /// Iterate contained points in local index order.
    pub fn iter(&self) -> impl Iterator<Item = Point3> + '_ {
        let b = *self;
        (b.min[2]..b.max[2]).flat_map(move |z| {
            (b.min[1]..b.max[1]).flat_map(move |y| (b.min[0]..b.max[0]).map(move |x| [x, y, z]))
        })
    }
}

/// How to treat windows that would extend past the volume border.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    /// The full window must lie inside the volume.
    Valid,
    /// The window is intersected with the volume.
    Clipped,
}

/// Resolve a window of `shape` centered at `center` against a volume of
/// `volume` dims according to `mode`.
pub fn window_box(
    volume: Shape3,
    center: Point3,
    shape: Shape3,
    mode: WindowMode,
) -> Result<Box3, VolumeError> {
    let full = Box3::window_at(center, shape)?;
    match mode {
        WindowMode::Valid => {
            let bounds = volume.bounds();
            if full
                .min
                .iter()
                .zip(&bounds.min)
                .any(|(a, b)| a < b)
                || full.max.iter().zip(&bounds.max).any(|(a, b)| a > b)
            {
                return Err(VolumeError::WindowOutOfBounds {
                    center,
                    shape: shape.dims(),
                    volume: volume.dims(),
                });
            }
            Ok(full)
        }
        WindowMode::Clipped => full
            .intersect(&volume.bounds())
            .ok_or(VolumeError::WindowOutOfBounds {
                center,
                shape: shape.dims(),
                volume: volume.dims(),
            }),
    }
}

/// Dense grid of non-negative integer labels; 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    pub shape: Shape3,
    pub voxel_size: VoxelSize,
    data: Vec<u32>,
}

impl LabelVolume {
    pub fn new(shape: Shape3, data: Vec<u32>, voxel_size: VoxelSize) -> Result<Self, VolumeError> {
        if data.len() != shape.len() {
            return Err(VolumeError::DataLength {
                got: data.len(),
                expected: shape.len(),
            });
        }
        Ok(LabelVolume {
            shape,
            voxel_size,
            data,
        })
    }

    pub fn zeros(shape: Shape3, voxel_size: VoxelSize) -> Self {
        LabelVolume {
            shape,
            voxel_size,
            data: vec![0; shape.len()],
        }
    }

    #[inline]
    pub fn get(&self, p: Point3) -> u32 {
        self.data[self.shape.index_point(p)]
    }

    #[inline]
    pub fn set(&mut self, p: Point3, v: u32) {
        let i = self.shape.index_point(p);
        self.data[i] = v;
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u32] {
        &mut self.data
    }

    /// Distinct nonzero labels present in the volume.
    pub fn labels(&self) -> BTreeSet<u32> {
        self.data.iter().copied().filter(|&l| l != 0).collect()
    }

    /// Binary mask of the voxels carrying `label`. Background (0) is rejected.
    pub fn object_mask(&self, label: u32) -> Result<ObjectMask, VolumeError> {
        if label == 0 {
            return Err(VolumeError::BackgroundLabel);
        }
        Ok(ObjectMask {
            shape: self.shape,
            data: self.data.iter().map(|&l| l == label).collect(),
        })
    }

    /// Extract the window of `shape` centered at `center` as a box plus data.
    pub fn window_view(
        &self,
        center: Point3,
        shape: Shape3,
        mode: WindowMode,
    ) -> Result<(Box3, Vec<u32>), VolumeError> {
        let b = window_box(self.shape, center, shape, mode)?;
        let mut out = Vec::with_capacity(b.len());
        for p in b.iter() {
            out.push(self.get(p));
        }
        Ok((b, out))
    }

    /// Crop to a box, which must lie inside the volume.
    pub fn crop(&self, b: &Box3) -> LabelVolume {
        let e = b.extents();
        let shape = Shape3::new(e[0], e[1], e[2]).expect("non-empty crop box");
        let data = b.iter().map(|p| self.get(p)).collect();
        LabelVolume {
            shape,
            voxel_size: self.voxel_size,
            data,
        }
    }
}

/// Scalar intensity volume paired with label volumes of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVolume {
    pub shape: Shape3,
    pub voxel_size: VoxelSize,
    data: Vec<f32>,
}

impl RawVolume {
    pub fn new(shape: Shape3, data: Vec<f32>, voxel_size: VoxelSize) -> Result<Self, VolumeError> {
        if data.len() != shape.len() {
            return Err(VolumeError::DataLength {
                got: data.len(),
                expected: shape.len(),
            });
        }
        Ok(RawVolume {
            shape,
            voxel_size,
            data,
        })
    }

    #[inline]
    pub fn get(&self, p: Point3) -> f32 {
        self.data[self.shape.index_point(p)]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn crop(&self, b: &Box3) -> RawVolume {
        let e = b.extents();
        let shape = Shape3::new(e[0], e[1], e[2]).expect("non-empty crop box");
        let data = b.iter().map(|p| self.get(p)).collect();
        RawVolume {
            shape,
            voxel_size: self.voxel_size,
            data,
        }
    }
}

/// Binary per-voxel mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectMask {
    pub shape: Shape3,
    data: Vec<bool>,
}

impl ObjectMask {
    pub fn new(shape: Shape3, data: Vec<bool>) -> Result<Self, VolumeError> {
        if data.len() != shape.len() {
            return Err(VolumeError::DataLength {
                got: data.len(),
                expected: shape.len(),
            });
        }
        Ok(ObjectMask { shape, data })
    }

    pub fn zeros(shape: Shape3) -> Self {
        ObjectMask {
            shape,
            data: vec![false; shape.len()],
        }
    }

    #[inline]
    pub fn get(&self, p: Point3) -> bool {
        self.data[self.shape.index_point(p)]
    }

    #[inline]
    pub fn set(&mut self, p: Point3, v: bool) {
        let i = self.shape.index_point(p);
        self.data[i] = v;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Either kind of on-disk volume.
#[derive(Debug, Clone, PartialEq)]
pub enum Volume {
    Label(LabelVolume),
    Raw(RawVolume),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub dims: [usize; 3],
    pub kind: String,
    pub bytes_per_element: usize,
    pub voxel_size_nm: [f64; 3],
}

fn io_err(path: &Path, source: std::io::Error) -> VolumeError {
    VolumeError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Read a raw volume file described by its JSON sidecar.
///
/// Label volumes may be stored with 1, 2 or 4 bytes per element; raw volumes
/// are 4-byte little-endian floats.
pub fn read_volume(path: &Path, sidecar: &Path) -> Result<Volume, VolumeError> {
    let text = fs::read_to_string(sidecar).map_err(|e| io_err(sidecar, e))?;
    let sc: Sidecar = serde_json::from_str(&text).map_err(|e| VolumeError::Sidecar {
        path: sidecar.display().to_string(),
        source: e,
    })?;
    let shape = Shape3::new(sc.dims[0], sc.dims[1], sc.dims[2])?;
    let voxel_size = VoxelSize::new(sc.voxel_size_nm[0], sc.voxel_size_nm[1], sc.voxel_size_nm[2])?;
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(path, e))?;
    let expected = shape.len() * sc.bytes_per_element;
    if bytes.len() != expected {
        return Err(VolumeError::SizeMismatch {
            got: bytes.len(),
            expected,
        });
    }
    match sc.kind.as_str() {
        "label" => {
            let data: Vec<u32> = match sc.bytes_per_element {
                1 => bytes.iter().map(|&b| b as u32).collect(),
                2 => bytes
                    .chunks_exact(2)
                    .map(|c| u16::from_le_bytes([c[0], c[1]]) as u32)
                    .collect(),
                4 => bytes
                    .chunks_exact(4)
                    .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
                w => return Err(VolumeError::UnsupportedWidth(w, sc.kind)),
            };
            Ok(Volume::Label(LabelVolume::new(shape, data, voxel_size)?))
        }
        "raw" => {
            if sc.bytes_per_element != 4 {
                return Err(VolumeError::UnsupportedWidth(sc.bytes_per_element, sc.kind));
            }
            let data: Vec<f32> = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            Ok(Volume::Raw(RawVolume::new(shape, data, voxel_size)?))
        }
        k => Err(VolumeError::UnknownKind(k.to_string())),
    }
}

/// Write a volume plus its sidecar so that `read_volume` inverts it bit-exactly.
///
/// The sidecar goes to `sidecar`; labels are written as 4-byte little-endian.
pub fn write_volume(volume: &Volume, path: &Path, sidecar: &Path) -> Result<(), VolumeError> {
    let (shape, voxel_size, kind, bytes): (Shape3, VoxelSize, &str, Vec<u8>) = match volume {
        Volume::Label(v) => (
            v.shape,
            v.voxel_size,
            "label",
            v.data.iter().flat_map(|l| l.to_le_bytes()).collect(),
        ),
        Volume::Raw(v) => (
            v.shape,
            v.voxel_size,
            "raw",
            v.data.iter().flat_map(|f| f.to_le_bytes()).collect(),
        ),
    };
    let sc = Sidecar {
        dims: shape.dims(),
        kind: kind.to_string(),
        bytes_per_element: 4,
        voxel_size_nm: [voxel_size.dx, voxel_size.dy, voxel_size.dz],
    };
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| io_err(path, e))?;
    let text = serde_json::to_string_pretty(&sc).expect("sidecar serialization");
    fs::write(sidecar, text).map_err(|e| io_err(sidecar, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vol_4x4x1(labels: &[u32]) -> LabelVolume {
        LabelVolume::new(
            Shape3::new(4, 4, 1).unwrap(),
            labels.to_vec(),
            VoxelSize::default(),
        )
        .unwrap()
    }

    #[test]
    fn shape_rejects_zero_dims() {
        assert!(Shape3::new(0, 4, 4).is_err());
        assert!(Shape3::new(4, 4, 0).is_err());
    }

    #[test]
    fn read_write_round_trip_small() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.raw");
        let sc = dir.path().join("v.raw.json");
        let v = vol_4x4x1(&(0..16u32).collect::<Vec<_>>());
        write_volume(&Volume::Label(v.clone()), &path, &sc).unwrap();
        match read_volume(&path, &sc).unwrap() {
            Volume::Label(r) => assert_eq!(r, v),
            _ => panic!("expected label volume"),
        }
    }

    #[test]
    fn read_rejects_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.raw");
        let sc = dir.path().join("v.raw.json");
        fs::write(
            &sc,
            r#"{"dims":[4,4,1],"kind":"label","bytes_per_element":1,"voxel_size_nm":[3.6,3.6,40.0]}"#,
        )
        .unwrap();
        fs::write(&path, vec![0u8; 15]).unwrap();
        assert!(matches!(
            read_volume(&path, &sc),
            Err(VolumeError::SizeMismatch { got: 15, expected: 16 })
        ));
    }

    #[test]
    fn read_one_byte_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.raw");
        let sc = dir.path().join("v.raw.json");
        fs::write(
            &sc,
            r#"{"dims":[4,4,1],"kind":"label","bytes_per_element":1,"voxel_size_nm":[3.6,3.6,40.0]}"#,
        )
        .unwrap();
        fs::write(&path, (0..16u8).collect::<Vec<_>>()).unwrap();
        match read_volume(&path, &sc).unwrap() {
            Volume::Label(v) => {
                assert_eq!(v.shape.dims(), [4, 4, 1]);
                assert_eq!(v.get([3, 3, 0]), 15);
            }
            _ => panic!("expected label volume"),
        }
    }

    #[test]
    fn round_trip_random_32_cubed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.raw");
        let sc = dir.path().join("v.raw.json");
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let shape = Shape3::new(32, 32, 32).unwrap();
        let data: Vec<u32> = (0..shape.len()).map(|_| rng.gen_range(0..50)).collect();
        let v = LabelVolume::new(shape, data, VoxelSize::default()).unwrap();
        write_volume(&Volume::Label(v.clone()), &path, &sc).unwrap();
        match read_volume(&path, &sc).unwrap() {
            Volume::Label(r) => assert_eq!(r, v),
            _ => panic!("expected label volume"),
        }
    }

    #[test]
    fn object_mask_selects_exact_label() {
        let v = vol_4x4x1(&[1, 1, 2, 2, 1, 1, 2, 2, 1, 1, 2, 2, 1, 1, 2, 2]);
        let m = v.object_mask(1).unwrap();
        for p in v.shape.iter() {
            assert_eq!(m.get(p), v.get(p) == 1);
        }
        assert_eq!(v.object_mask(7).unwrap().count(), 0);
        assert!(matches!(v.object_mask(0), Err(VolumeError::BackgroundLabel)));
    }

    #[test]
    fn object_mask_popcount_matches_histogram() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = Shape3::new(16, 16, 16).unwrap();
        let data: Vec<u32> = (0..shape.len()).map(|_| rng.gen_range(0..6)).collect();
        let v = LabelVolume::new(shape, data, VoxelSize::default()).unwrap();
        for label in 1..6u32 {
            let hist = v.data().iter().filter(|&&l| l == label).count();
            assert_eq!(v.object_mask(label).unwrap().count(), hist);
        }
    }

    #[test]
    fn object_masks_partition_foreground() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shape = Shape3::new(12, 12, 4).unwrap();
        let data: Vec<u32> = (0..shape.len()).map(|_| rng.gen_range(0..4)).collect();
        let v = LabelVolume::new(shape, data, VoxelSize::default()).unwrap();
        let masks: Vec<ObjectMask> = v.labels().iter().map(|&l| v.object_mask(l).unwrap()).collect();
        for p in shape.iter() {
            let hits = masks.iter().filter(|m| m.get(p)).count();
            assert_eq!(hits, usize::from(v.get(p) != 0));
        }
    }

    #[test]
    fn window_view_valid() {
        let v = vol_4x4x1(&(0..16u32).collect::<Vec<_>>());
        let shape = Shape3::new(3, 3, 1).unwrap();
        let (b, data) = v.window_view([1, 1, 0], shape, WindowMode::Valid).unwrap();
        assert_eq!(b, Box3::new([0, 0, 0], [3, 3, 1]).unwrap());
        assert_eq!(data, vec![0, 1, 2, 4, 5, 6, 8, 9, 10]);
    }

    #[test]
    fn window_view_valid_out_of_bounds() {
        let v = vol_4x4x1(&(0..16u32).collect::<Vec<_>>());
        let shape = Shape3::new(3, 3, 1).unwrap();
        assert!(matches!(
            v.window_view([0, 0, 0], shape, WindowMode::Valid),
            Err(VolumeError::WindowOutOfBounds { .. })
        ));
    }

    #[test]
    fn window_view_clipped_at_corner() {
        let v = vol_4x4x1(&(0..16u32).collect::<Vec<_>>());
        let shape = Shape3::new(3, 3, 1).unwrap();
        let (b, _) = v.window_view([0, 0, 0], shape, WindowMode::Clipped).unwrap();
        assert_eq!(b, Box3::new([0, 0, 0], [2, 2, 1]).unwrap());
    }

    #[test]
    fn even_window_rejected() {
        let v = vol_4x4x1(&(0..16u32).collect::<Vec<_>>());
        let shape = Shape3 { x: 2, y: 3, z: 1 };
        assert!(matches!(
            v.window_view([1, 1, 0], shape, WindowMode::Valid),
            Err(VolumeError::EvenWindow(2, 3, 1))
        ));
    }

    #[test]
    fn valid_windows_have_requested_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = LabelVolume::zeros(Shape3::new(9, 9, 5).unwrap(), VoxelSize::default());
        let shape = Shape3::new(3, 5, 3).unwrap();
        for _ in 0..100 {
            let c = [
                rng.gen_range(0..9) as i64,
                rng.gen_range(0..9) as i64,
                rng.gen_range(0..5) as i64,
            ];
            if let Ok((b, _)) = v.window_view(c, shape, WindowMode::Valid) {
                assert_eq!(b.extents(), shape.dims());
            }
        }
    }
}
