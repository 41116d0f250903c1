//! C ABI over `cropland_apt`.
//!
//! Conventions:
//! - every fallible function returns an [`AptStatus`]; on failure a message
//!   is available from [`apt_last_error`] on the same thread;
//! - objects are opaque handles created by `apt_*_read`/`apt_*_make`/... and
//!   released with the matching `apt_*_free` (null is accepted there);
//! - masks cross the boundary as row-major `uint8_t` buffers of
//!   `width * height` bytes holding 0 or 1;
//! - undefined metrics are reported as NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use cropland_apt::backend::{oracle_decode, run_iterative, OracleBackend};
use cropland_apt::geo::{read_raster, write_raster, GeoRaster, GeoTransform};
use cropland_apt::mask::{binarize, Mask};
use cropland_apt::metrics::{compute_metrics, confusion, ConfusionMatrix};
use cropland_apt::pipeline::{self, BackendKind, Overrides, RunConfig};
use cropland_apt::prelabel::{make_prelabel, ClassMap, PreLabel};
use cropland_apt::prompts::{
    flip_labels, sample_prompts, write_plan, AbsentClassPolicy, Label, PromptPlan, PromptPoint, SamplerConfig,
};
use cropland_apt::{BackendError, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AptStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument is out of range or inconsistent (sizes, indices, UTF-8).
    InvalidArgument = 2,
    Io = 3,
    /// Unreadable or unsupported raster or prompt file.
    Format = 4,
    /// Invalid run configuration.
    Config = 5,
    /// Singular geotransform, CRS mismatch or mismatched grids.
    Geometry = 6,
    /// No valid pre-label pixels, absent class or empty prompt set.
    NoData = 7,
    Backend = 8,
    /// A Rust panic was caught; the library state is unchanged.
    Internal = 9,
}

fn status_of(e: &Error) -> AptStatus {
    match e {
        Error::Io { .. } | Error::Report(_) => AptStatus::Io,
        Error::Tiff(_)
        | Error::UnsupportedEncoding(_)
        | Error::MissingGeoreference { .. }
        | Error::InvalidRaster(_)
        | Error::PromptFile(_) => AptStatus::Format,
        Error::Config(_) | Error::Backend(BackendError::Config(_)) => AptStatus::Config,
        Error::SingularTransform | Error::CrsMismatch { .. } | Error::DimensionMismatch(_) => AptStatus::Geometry,
        Error::NoCoverage | Error::AbsentClass(_) | Error::NoPoints | Error::EmptyPlan | Error::EmptyInput => {
            AptStatus::NoData
        }
        Error::Backend(_) => AptStatus::Backend,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Fail(AptStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(AptStatus::NullArgument, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(AptStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AptStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            AptStatus::Internal
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn buf<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn buf_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn mask_arg(p: *const u8, width: usize, height: usize, what: &str) -> Result<Mask, Fail> {
    let data = buf(p, width * height, what)?;
    Mask::new(width, height, data.iter().map(|v| (*v != 0) as u8).collect()).map_err(Fail::from)
}

fn give<T>(value: T, dst: &mut *mut T) {
    *dst = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread, or null. Owned by the
/// library and valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn apt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

// --- geotransform ----------------------------------------------------------

/// Affine pixel-to-world map in GDAL coefficient order; pixel `(col, row)`
/// has its center at `col + 0.5`, `row + 0.5` in corner coordinates.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AptGeoTransform {
    pub origin_x: f64,
    pub pixel_w: f64,
    pub shear_x: f64,
    pub origin_y: f64,
    pub shear_y: f64,
    pub pixel_h: f64,
}

impl From<AptGeoTransform> for GeoTransform {
    fn from(g: AptGeoTransform) -> Self {
        GeoTransform::from_gdal([g.origin_x, g.pixel_w, g.shear_x, g.origin_y, g.shear_y, g.pixel_h])
    }
}

impl From<GeoTransform> for AptGeoTransform {
    fn from(g: GeoTransform) -> Self {
        let [origin_x, pixel_w, shear_x, origin_y, shear_y, pixel_h] = g.to_gdal();
        Self { origin_x, pixel_w, shear_x, origin_y, shear_y, pixel_h }
    }
}

/// World coordinate of the center of pixel `(col, row)`.
///
/// # Safety
/// `gt`, `x` and `y` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn apt_pixel_to_world(
    gt: *const AptGeoTransform,
    col: f64,
    row: f64,
    x: *mut f64,
    y: *mut f64,
) -> AptStatus {
    guard(|| {
        let g: GeoTransform = (*obj(gt, "gt")?).into();
        let (wx, wy) = g.pixel_to_world(col, row);
        *out(x, "x")? = wx;
        *out(y, "y")? = wy;
        Ok(())
    })
}

/// Fractional pixel coordinates of a world point; pixel centers map to whole
/// numbers.
///
/// # Safety
/// `gt`, `col` and `row` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn apt_world_to_pixel(
    gt: *const AptGeoTransform,
    x: f64,
    y: f64,
    col: *mut f64,
    row: *mut f64,
) -> AptStatus {
    guard(|| {
        let g: GeoTransform = (*obj(gt, "gt")?).into();
        let (c, r) = g.world_to_pixel(x, y)?;
        *out(col, "col")? = c;
        *out(row, "row")? = r;
        Ok(())
    })
}

// --- rasters ---------------------------------------------------------------

/// Georeferenced multi-band raster.
pub struct AptRaster(GeoRaster);

/// Reads a GeoTIFF.
///
/// # Safety
/// `path` must be a NUL-terminated string and `raster` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apt_raster_read(path: *const c_char, raster: *mut *mut AptRaster) -> AptStatus {
    guard(|| {
        let dst = out(raster, "raster")?;
        *dst = ptr::null_mut();
        let r = read_raster(path_arg(path, "path")?)?;
        give(AptRaster(r), dst);
        Ok(())
    })
}

/// Writes a GeoTIFF.
///
/// # Safety
/// `raster` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn apt_raster_write(raster: *const AptRaster, path: *const c_char) -> AptStatus {
    guard(|| {
        write_raster(path_arg(path, "path")?, &obj(raster, "raster")?.0)?;
        Ok(())
    })
}

/// Shape, geotransform and EPSG code of a raster; any output may be null.
///
/// # Safety
/// `raster` must be a live handle; non-null outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn apt_raster_info(
    raster: *const AptRaster,
    width: *mut usize,
    height: *mut usize,
    bands: *mut usize,
    gt: *mut AptGeoTransform,
    epsg: *mut u32,
) -> AptStatus {
    guard(|| {
        let r = &obj(raster, "raster")?.0;
        if let Some(w) = width.as_mut() {
            *w = r.width();
        }
        if let Some(h) = height.as_mut() {
            *h = r.height();
        }
        if let Some(b) = bands.as_mut() {
            *b = r.bands();
        }
        if let Some(g) = gt.as_mut() {
            *g = r.geotransform().into();
        }
        if let Some(e) = epsg.as_mut() {
            *e = r.crs().code();
        }
        Ok(())
    })
}

/// Copies band `band` into `dst` (`width * height` values, row-major).
///
/// # Safety
/// `raster` must be a live handle and `dst` point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn apt_raster_band(
    raster: *const AptRaster,
    band: usize,
    dst: *mut f64,
    len: usize,
) -> AptStatus {
    guard(|| {
        let r = &obj(raster, "raster")?.0;
        if band >= r.bands() {
            return Err(invalid(format!("band {band} out of range; raster has {}", r.bands())));
        }
        if len != r.width() * r.height() {
            return Err(invalid(format!("buffer holds {len} values, band has {}", r.width() * r.height())));
        }
        buf_mut(dst, len, "dst")?.copy_from_slice(r.band(band));
        Ok(())
    })
}

/// # Safety
/// `raster` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn apt_raster_free(raster: *mut AptRaster) {
    if !raster.is_null() {
        drop(Box::from_raw(raster));
    }
}

// --- pre-labels ------------------------------------------------------------

/// Binary cropland pre-label on an image grid.
pub struct AptPrelabel(PreLabel);

/// Windows `glc` onto the grid of `image` and marks cropland codes. With
/// `n_codes == 0` the WorldCover cropland class is used.
///
/// # Safety
/// `image` and `glc` must be live handles, `codes` must point to `n_codes`
/// values and `prelabel` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apt_prelabel_make(
    image: *const AptRaster,
    glc: *const AptRaster,
    codes: *const i64,
    n_codes: usize,
    prelabel: *mut *mut AptPrelabel,
) -> AptStatus {
    guard(|| {
        let dst = out(prelabel, "prelabel")?;
        *dst = ptr::null_mut();
        let codes = buf(codes, n_codes, "codes")?;
        let map = if codes.is_empty() {
            ClassMap::default()
        } else {
            ClassMap::new(codes.iter().copied())?
        };
        let pl = make_prelabel(&obj(image, "image")?.0, &obj(glc, "glc")?.0, &map)?;
        give(AptPrelabel(pl), dst);
        Ok(())
    })
}

/// Fraction of valid pixels and the cropland / non-cropland shares among
/// them (NaN without valid pixels). Any output may be null.
///
/// # Safety
/// `prelabel` must be a live handle; non-null outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn apt_prelabel_stats(
    prelabel: *const AptPrelabel,
    coverage: *mut f64,
    p_crop: *mut f64,
    p_noncrop: *mut f64,
) -> AptStatus {
    guard(|| {
        let pl = &obj(prelabel, "prelabel")?.0;
        if let Some(c) = coverage.as_mut() {
            *c = pl.coverage;
        }
        if let Some(p) = p_crop.as_mut() {
            *p = pl.p_crop.unwrap_or(f64::NAN);
        }
        if let Some(p) = p_noncrop.as_mut() {
            *p = pl.p_noncrop.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Copies the cropland mask and the validity mask; either may be null.
///
/// # Safety
/// `prelabel` must be a live handle; non-null buffers must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn apt_prelabel_masks(
    prelabel: *const AptPrelabel,
    cropland: *mut u8,
    valid: *mut u8,
    len: usize,
) -> AptStatus {
    guard(|| {
        let pl = &obj(prelabel, "prelabel")?.0;
        if len != pl.mask.len() {
            return Err(invalid(format!("buffer holds {len} bytes, pre-label has {}", pl.mask.len())));
        }
        if !cropland.is_null() {
            buf_mut(cropland, len, "cropland")?.copy_from_slice(pl.mask.data());
        }
        if !valid.is_null() {
            buf_mut(valid, len, "valid")?.copy_from_slice(pl.valid.data());
        }
        Ok(())
    })
}

/// # Safety
/// `prelabel` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn apt_prelabel_free(prelabel: *mut AptPrelabel) {
    if !prelabel.is_null() {
        drop(Box::from_raw(prelabel));
    }
}

// --- prompts ---------------------------------------------------------------

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AptSamplerConfig {
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_batches: usize,
    pub seed: u64,
    /// Erosion radius applied to each class before sampling.
    pub edge_margin: usize,
    /// Classes with fewer pixels count as absent.
    pub min_class_pixels: usize,
    /// Non-zero: an absent class is an error instead of a warning.
    pub absent_class_is_error: u8,
}

impl From<AptSamplerConfig> for SamplerConfig {
    fn from(c: AptSamplerConfig) -> Self {
        SamplerConfig {
            n_pos: c.n_pos,
            n_neg: c.n_neg,
            n_batches: c.n_batches,
            seed: c.seed,
            edge_margin: c.edge_margin,
            min_class_pixels: c.min_class_pixels,
            absent_class_policy: if c.absent_class_is_error != 0 {
                AbsentClassPolicy::Error
            } else {
                AbsentClassPolicy::SkipClass
            },
        }
    }
}

/// Default sampler settings: 30 positive and 30 negative points in 3 batches.
#[no_mangle]
pub extern "C" fn apt_sampler_config_default() -> AptSamplerConfig {
    let d = SamplerConfig::default();
    AptSamplerConfig {
        n_pos: d.n_pos,
        n_neg: d.n_neg,
        n_batches: d.n_batches,
        seed: d.seed,
        edge_margin: d.edge_margin,
        min_class_pixels: d.min_class_pixels,
        absent_class_is_error: (d.absent_class_policy == AbsentClassPolicy::Error) as u8,
    }
}

/// One prompt point; `label` is 1 for cropland, 0 for non-cropland.
/// `index` is the sampling ordinal, used to break distance ties.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AptPromptPoint {
    pub col: u32,
    pub row: u32,
    pub label: u8,
    pub index: u32,
}

impl From<PromptPoint> for AptPromptPoint {
    fn from(p: PromptPoint) -> Self {
        Self { col: p.col, row: p.row, label: p.label.is_positive() as u8, index: p.index }
    }
}

impl From<AptPromptPoint> for PromptPoint {
    fn from(p: AptPromptPoint) -> Self {
        PromptPoint {
            col: p.col,
            row: p.row,
            label: if p.label != 0 { Label::Positive } else { Label::Negative },
            index: p.index,
        }
    }
}

/// Batched prompt set for one tile, tied to the pre-label it was drawn from.
pub struct AptPlan {
    plan: PromptPlan,
    grid: cropland_apt::geo::GridSpec,
}

/// Draws balanced stratified prompts. Deterministic in `(prelabel, config)`.
///
/// # Safety
/// `prelabel` must be a live handle and `config`, `plan` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn apt_sample_prompts(
    prelabel: *const AptPrelabel,
    config: *const AptSamplerConfig,
    plan: *mut *mut AptPlan,
) -> AptStatus {
    guard(|| {
        let dst = out(plan, "plan")?;
        *dst = ptr::null_mut();
        let pl = &obj(prelabel, "prelabel")?.0;
        let p = sample_prompts(pl, &(*obj(config, "config")?).into())?;
        give(AptPlan { plan: p, grid: pl.grid }, dst);
        Ok(())
    })
}

/// Copy of `plan` with exactly `round(p * n)` labels inverted, chosen by
/// `seed`.
///
/// # Safety
/// `plan` must be a live handle and `flipped` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apt_plan_flip(
    plan: *const AptPlan,
    p: f64,
    seed: u64,
    flipped: *mut *mut AptPlan,
) -> AptStatus {
    guard(|| {
        let dst = out(flipped, "flipped")?;
        *dst = ptr::null_mut();
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("flip probability {p} outside [0, 1]")));
        }
        let src = obj(plan, "plan")?;
        give(AptPlan { plan: flip_labels(&src.plan, p, seed), grid: src.grid }, dst);
        Ok(())
    })
}

/// Number of batches and total points; either output may be null.
///
/// # Safety
/// `plan` must be a live handle; non-null outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn apt_plan_size(plan: *const AptPlan, n_batches: *mut usize, n_points: *mut usize) -> AptStatus {
    guard(|| {
        let p = &obj(plan, "plan")?.plan;
        if let Some(b) = n_batches.as_mut() {
            *b = p.batches.len();
        }
        if let Some(n) = n_points.as_mut() {
            *n = p.len();
        }
        Ok(())
    })
}

/// Copies batch `batch` into `dst`. With `dst` null only `count` is set.
///
/// # Safety
/// `plan` must be a live handle, `count` a valid pointer and a non-null
/// `dst` must hold `cap` points.
#[no_mangle]
pub unsafe extern "C" fn apt_plan_batch(
    plan: *const AptPlan,
    batch: usize,
    dst: *mut AptPromptPoint,
    cap: usize,
    count: *mut usize,
) -> AptStatus {
    guard(|| {
        let p = &obj(plan, "plan")?.plan;
        let b = p
            .batches
            .get(batch)
            .ok_or_else(|| invalid(format!("batch {batch} out of range; plan has {}", p.batches.len())))?;
        *out(count, "count")? = b.len();
        if dst.is_null() {
            return Ok(());
        }
        if cap < b.len() {
            return Err(invalid(format!("buffer holds {cap} points, batch has {}", b.len())));
        }
        for (d, s) in buf_mut(dst, b.len(), "dst")?.iter_mut().zip(b) {
            *d = (*s).into();
        }
        Ok(())
    })
}

/// Writes the plan as a GeoJSON FeatureCollection in the pre-label's CRS.
///
/// # Safety
/// `plan` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn apt_plan_write_geojson(plan: *const AptPlan, path: *const c_char) -> AptStatus {
    guard(|| {
        let p = obj(plan, "plan")?;
        write_plan(path_arg(path, "path")?, &p.plan, &p.grid.geotransform, p.grid.crs)?;
        Ok(())
    })
}

/// # Safety
/// `plan` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn apt_plan_free(plan: *mut AptPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

// --- oracle backend --------------------------------------------------------

/// Nearest-prompt mask for a free point list: each pixel takes the label of
/// the closest point, ties going to the smaller index.
///
/// # Safety
/// `points` must hold `n_points` entries and `mask` `width * height` bytes.
#[no_mangle]
pub unsafe extern "C" fn apt_oracle_decode(
    width: usize,
    height: usize,
    points: *const AptPromptPoint,
    n_points: usize,
    mask: *mut u8,
) -> AptStatus {
    guard(|| {
        let pts: Vec<PromptPoint> = buf(points, n_points, "points")?.iter().map(|p| (*p).into()).collect();
        if let Some(p) = pts.iter().find(|p| p.col as usize >= width || p.row as usize >= height) {
            return Err(invalid(format!("point ({}, {}) outside {width}x{height}", p.col, p.row)));
        }
        let m = binarize(&oracle_decode(width, height, &pts)?, 0.0);
        buf_mut(mask, width * height, "mask")?.copy_from_slice(m.data());
        Ok(())
    })
}

/// Runs the oracle backend over all batches of `plan` on the plan's grid.
///
/// # Safety
/// `plan` must be a live handle and `mask` hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn apt_oracle_predict(plan: *const AptPlan, mask: *mut u8, len: usize) -> AptStatus {
    guard(|| {
        let p = obj(plan, "plan")?;
        let dst = buf_mut(mask, len, "mask")?;
        if len != p.grid.len() {
            return Err(invalid(format!("buffer holds {len} bytes, grid has {}", p.grid.len())));
        }
        // the oracle encodes only the grid shape
        let image = GeoRaster::filled(p.grid, 0.0, cropland_apt::geo::SampleType::U8, None)?;
        let m = binarize(&run_iterative(&OracleBackend, &image, &p.plan)?, 0.0);
        dst.copy_from_slice(m.data());
        Ok(())
    })
}

// --- metrics ---------------------------------------------------------------

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AptConfusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

/// Overall accuracy, per-class IoU, their mean, and cropland F1; NaN where
/// undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AptMetrics {
    pub oa: f64,
    pub iou_crop: f64,
    pub iou_noncrop: f64,
    pub miou: f64,
    pub f1: f64,
}

/// Confusion counts of `pred` against `gt`; pixels set in `ignore` (may be
/// null) are excluded.
///
/// # Safety
/// `pred`, `gt` and a non-null `ignore` must hold `width * height` bytes;
/// `cm` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apt_confusion(
    pred: *const u8,
    gt: *const u8,
    ignore: *const u8,
    width: usize,
    height: usize,
    cm: *mut AptConfusion,
) -> AptStatus {
    guard(|| {
        let p = mask_arg(pred, width, height, "pred")?;
        let g = mask_arg(gt, width, height, "gt")?;
        let i = if ignore.is_null() { None } else { Some(mask_arg(ignore, width, height, "ignore")?) };
        let c = confusion(&p, &g, i.as_ref())?;
        *out(cm, "cm")? = AptConfusion { tp: c.tp, fp: c.fp, fn_: c.fn_, tn: c.tn };
        Ok(())
    })
}

/// # Safety
/// `cm` and `metrics` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn apt_compute_metrics(cm: *const AptConfusion, metrics: *mut AptMetrics) -> AptStatus {
    guard(|| {
        let c = obj(cm, "cm")?;
        let m = compute_metrics(ConfusionMatrix::new(c.tp, c.fp, c.fn_, c.tn));
        let v = |x: Option<f64>| x.unwrap_or(f64::NAN);
        *out(metrics, "metrics")? = AptMetrics {
            oa: v(m.oa),
            iou_crop: v(m.iou_crop),
            iou_noncrop: v(m.iou_noncrop),
            miou: v(m.miou),
            f1: v(m.f1),
        };
        Ok(())
    })
}

// --- pipeline --------------------------------------------------------------

/// Tile counts and aggregate (pixel-pooled) metrics of a pipeline run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AptRunSummary {
    pub tiles: usize,
    pub completed: usize,
    pub skipped: usize,
    pub failed: usize,
    pub cm: AptConfusion,
    pub metrics: AptMetrics,
}

/// Runs every stage for the TOML configuration at `config_path` with the
/// oracle backend, writing all artifacts to its output directory. `workers`
/// of 0 keeps the configured value.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; a non-null `summary` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apt_pipeline_run(
    config_path: *const c_char,
    seed: u64,
    workers: usize,
    summary: *mut AptRunSummary,
) -> AptStatus {
    guard(|| {
        let overrides = Overrides {
            seed: Some(seed),
            backend: Some(BackendKind::Oracle),
            workers: (workers > 0).then_some(workers),
        };
        let cfg = RunConfig::load(path_arg(config_path, "config_path")?, &overrides)?;
        let s = pipeline::run(cfg)?;
        if let Some(dst) = summary.as_mut() {
            let (cm, m) = match &s.aggregate {
                Some(a) => (a.micro.cm, Some(&a.micro)),
                None => (ConfusionMatrix::default(), None),
            };
            let v = |f: fn(&cropland_apt::metrics::MetricsReport) -> Option<f64>| m.and_then(f).unwrap_or(f64::NAN);
            *dst = AptRunSummary {
                tiles: s.tiles,
                completed: s.completed,
                skipped: s.skipped,
                failed: s.failed,
                cm: AptConfusion { tp: cm.tp, fp: cm.fp, fn_: cm.fn_, tn: cm.tn },
                metrics: AptMetrics {
                    oa: v(|r| r.oa),
                    iou_crop: v(|r| r.iou_crop),
                    iou_noncrop: v(|r| r.iou_noncrop),
                    miou: v(|r| r.miou),
                    f1: v(|r| r.f1),
                },
            };
        }
        Ok(())
    })
}
