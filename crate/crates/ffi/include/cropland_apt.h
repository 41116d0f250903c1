#ifndef CROPLAND_APT_H
#define CROPLAND_APT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum {
  APT_STATUS_OK = 0,
  // A required pointer argument was null.
  APT_STATUS_NULL_ARGUMENT = 1,
  // An argument is out of range or inconsistent (sizes, indices, UTF-8).
  APT_STATUS_INVALID_ARGUMENT = 2,
  APT_STATUS_IO = 3,
  // Unreadable or unsupported raster or prompt file.
  APT_STATUS_FORMAT = 4,
  // Invalid run configuration.
  APT_STATUS_CONFIG = 5,
  // Singular geotransform, CRS mismatch or mismatched grids.
  APT_STATUS_GEOMETRY = 6,
  // No valid pre-label pixels, absent class or empty prompt set.
  APT_STATUS_NO_DATA = 7,
  APT_STATUS_BACKEND = 8,
  // A Rust panic was caught; the library state is unchanged.
  APT_STATUS_INTERNAL = 9,
} AptStatus;

// Batched prompt set for one tile, tied to the pre-label it was drawn from.
typedef struct AptPlan AptPlan;

// Binary cropland pre-label on an image grid.
typedef struct AptPrelabel AptPrelabel;

// Georeferenced multi-band raster.
typedef struct AptRaster AptRaster;

// Affine pixel-to-world map in GDAL coefficient order; pixel `(col, row)`
// has its center at `col + 0.5`, `row + 0.5` in corner coordinates.
typedef struct {
  double origin_x;
  double pixel_w;
  double shear_x;
  double origin_y;
  double shear_y;
  double pixel_h;
} AptGeoTransform;

typedef struct {
  size_t n_pos;
  size_t n_neg;
  size_t n_batches;
  uint64_t seed;
  // Erosion radius applied to each class before sampling.
  size_t edge_margin;
  // Classes with fewer pixels count as absent.
  size_t min_class_pixels;
  // Non-zero: an absent class is an error instead of a warning.
  uint8_t absent_class_is_error;
} AptSamplerConfig;

// One prompt point; `label` is 1 for cropland, 0 for non-cropland.
// `index` is the sampling ordinal, used to break distance ties.
typedef struct {
  uint32_t col;
  uint32_t row;
  uint8_t label;
  uint32_t index;
} AptPromptPoint;

typedef struct {
  uint64_t tp;
  uint64_t fp;
  uint64_t fn_;
  uint64_t tn;
} AptConfusion;

// Overall accuracy, per-class IoU, their mean, and cropland F1; NaN where
// undefined.
typedef struct {
  double oa;
  double iou_crop;
  double iou_noncrop;
  double miou;
  double f1;
} AptMetrics;

// Tile counts and aggregate (pixel-pooled) metrics of a pipeline run.
typedef struct {
  size_t tiles;
  size_t completed;
  size_t skipped;
  size_t failed;
  AptConfusion cm;
  AptMetrics metrics;
} AptRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Owned by the
// library and valid until the next failing call on this thread.
const char *apt_last_error(void);

// World coordinate of the center of pixel `(col, row)`.
//
// # Safety
// `gt`, `x` and `y` must be valid pointers.
AptStatus apt_pixel_to_world(const AptGeoTransform *gt,
                             double col,
                             double row,
                             double *x,
                             double *y);

// Fractional pixel coordinates of a world point; pixel centers map to whole
// numbers.
//
// # Safety
// `gt`, `col` and `row` must be valid pointers.
AptStatus apt_world_to_pixel(const AptGeoTransform *gt,
                             double x,
                             double y,
                             double *col,
                             double *row);

// Reads a GeoTIFF.
//
// # Safety
// `path` must be a NUL-terminated string and `raster` a valid pointer.
AptStatus apt_raster_read(const char *path, AptRaster **raster);

// Writes a GeoTIFF.
//
// # Safety
// `raster` must be a live handle and `path` a NUL-terminated string.
AptStatus apt_raster_write(const AptRaster *raster, const char *path);

// Shape, geotransform and EPSG code of a raster; any output may be null.
//
// # Safety
// `raster` must be a live handle; non-null outputs must be valid pointers.
AptStatus apt_raster_info(const AptRaster *raster,
                          size_t *width,
                          size_t *height,
                          size_t *bands,
                          AptGeoTransform *gt,
                          uint32_t *epsg);

// Copies band `band` into `dst` (`width * height` values, row-major).
//
// # Safety
// `raster` must be a live handle and `dst` point to `len` doubles.
AptStatus apt_raster_band(const AptRaster *raster, size_t band, double *dst, size_t len);

// # Safety
// `raster` must be null or a handle not yet freed.
void apt_raster_free(AptRaster *raster);

// Windows `glc` onto the grid of `image` and marks cropland codes. With
// `n_codes == 0` the WorldCover cropland class is used.
//
// # Safety
// `image` and `glc` must be live handles, `codes` must point to `n_codes`
// values and `prelabel` must be a valid pointer.
AptStatus apt_prelabel_make(const AptRaster *image,
                            const AptRaster *glc,
                            const int64_t *codes,
                            size_t n_codes,
                            AptPrelabel **prelabel);

// Fraction of valid pixels and the cropland / non-cropland shares among
// them (NaN without valid pixels). Any output may be null.
//
// # Safety
// `prelabel` must be a live handle; non-null outputs must be valid pointers.
AptStatus apt_prelabel_stats(const AptPrelabel *prelabel,
                             double *coverage,
                             double *p_crop,
                             double *p_noncrop);

// Copies the cropland mask and the validity mask; either may be null.
//
// # Safety
// `prelabel` must be a live handle; non-null buffers must hold `len` bytes.
AptStatus apt_prelabel_masks(const AptPrelabel *prelabel,
                             uint8_t *cropland,
                             uint8_t *valid,
                             size_t len);

// # Safety
// `prelabel` must be null or a handle not yet freed.
void apt_prelabel_free(AptPrelabel *prelabel);

// Default sampler settings: 30 positive and 30 negative points in 3 batches.
AptSamplerConfig apt_sampler_config_default(void);

// Draws balanced stratified prompts. Deterministic in `(prelabel, config)`.
//
// # Safety
// `prelabel` must be a live handle and `config`, `plan` valid pointers.
AptStatus apt_sample_prompts(const AptPrelabel *prelabel,
                             const AptSamplerConfig *config,
                             AptPlan **plan);

// Copy of `plan` with exactly `round(p * n)` labels inverted, chosen by
// `seed`.
//
// # Safety
// `plan` must be a live handle and `flipped` a valid pointer.
AptStatus apt_plan_flip(const AptPlan *plan, double p, uint64_t seed, AptPlan **flipped);

// Number of batches and total points; either output may be null.
//
// # Safety
// `plan` must be a live handle; non-null outputs must be valid pointers.
AptStatus apt_plan_size(const AptPlan *plan, size_t *n_batches, size_t *n_points);

// Copies batch `batch` into `dst`. With `dst` null only `count` is set.
//
// # Safety
// `plan` must be a live handle, `count` a valid pointer and a non-null
// `dst` must hold `cap` points.
AptStatus apt_plan_batch(const AptPlan *plan,
                         size_t batch,
                         AptPromptPoint *dst,
                         size_t cap,
                         size_t *count);

// Writes the plan as a GeoJSON FeatureCollection in the pre-label's CRS.
//
// # Safety
// `plan` must be a live handle and `path` a NUL-terminated string.
AptStatus apt_plan_write_geojson(const AptPlan *plan, const char *path);

// # Safety
// `plan` must be null or a handle not yet freed.
void apt_plan_free(AptPlan *plan);

// Nearest-prompt mask for a free point list: each pixel takes the label of
// the closest point, ties going to the smaller index.
//
// # Safety
// `points` must hold `n_points` entries and `mask` `width * height` bytes.
AptStatus apt_oracle_decode(size_t width,
                            size_t height,
                            const AptPromptPoint *points,
                            size_t n_points,
                            uint8_t *mask);

// Runs the oracle backend over all batches of `plan` on the plan's grid.
//
// # Safety
// `plan` must be a live handle and `mask` hold `len` bytes.
AptStatus apt_oracle_predict(const AptPlan *plan, uint8_t *mask, size_t len);

// Confusion counts of `pred` against `gt`; pixels set in `ignore` (may be
// null) are excluded.
//
// # Safety
// `pred`, `gt` and a non-null `ignore` must hold `width * height` bytes;
// `cm` must be a valid pointer.
AptStatus apt_confusion(const uint8_t *pred,
                        const uint8_t *gt,
                        const uint8_t *ignore,
                        size_t width,
                        size_t height,
                        AptConfusion *cm);

// # Safety
// `cm` and `metrics` must be valid pointers.
AptStatus apt_compute_metrics(const AptConfusion *cm, AptMetrics *metrics);

// Runs every stage for the TOML configuration at `config_path` with the
// oracle backend, writing all artifacts to its output directory. `workers`
// of 0 keeps the configured value.
//
// # Safety
// `config_path` must be a NUL-terminated string; a non-null `summary` must
// be a valid pointer.
AptStatus apt_pipeline_run(const char *config_path,
                           uint64_t seed,
                           size_t workers,
                           AptRunSummary *summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CROPLAND_APT_H */
