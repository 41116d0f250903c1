//! Minimal GeoTIFF support: single-image, strip-based, chunky layout.
//!
//! Georeferencing comes from ModelPixelScale + ModelTiepoint or from
//! ModelTransformation; the CRS from the GeoKey directory. Nodata uses the
//! GDAL_NODATA ASCII tag.

use std::fs::File;
use std::io::{BufReader, BufWriter, Seek, Write};
use std::path::Path;

use tiff::decoder::{Decoder, DecodingResult, Limits};
use tiff::encoder::{DirectoryEncoder, TiffEncoder, TiffKind};
use tiff::tags::Tag;
use tiff::TiffError;

use super::raster::{CrsId, GeoRaster, GridSpec, SampleType};
use super::transform::GeoTransform;
use crate::error::{Error, Result};

const MODEL_PIXEL_SCALE: u16 = 33550;
const MODEL_TIEPOINT: u16 = 33922;
const MODEL_TRANSFORMATION: u16 = 34264;
const GEO_KEY_DIRECTORY: u16 = 34735;
const GDAL_NODATA: u16 = 42113;

const GT_MODEL_TYPE_KEY: u16 = 1024;
const GT_RASTER_TYPE_KEY: u16 = 1025;
const GEOGRAPHIC_TYPE_KEY: u16 = 2048;
const PROJECTED_CS_TYPE_KEY: u16 = 3072;
const USER_DEFINED: u16 = 32767;

const MODEL_PROJECTED: u16 = 1;
const MODEL_GEOGRAPHIC: u16 = 2;
const RASTER_PIXEL_IS_AREA: u16 = 1;
const RASTER_PIXEL_IS_POINT: u16 = 2;

fn tiff_err(path: &Path, e: TiffError) -> Error {
    match e {
        TiffError::IoError(source) => Error::io(path, source),
        TiffError::UnsupportedError(u) => Error::UnsupportedEncoding(format!("{}: {u}", path.display())),
        other => Error::Tiff(format!("{}: {other}", path.display())),
    }
}

fn is_geographic(code: u32) -> bool {
    (4000..5000).contains(&code)
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<GeoRaster> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = Decoder::new(BufReader::new(file))
        .map_err(|e| tiff_err(path, e))?
        .with_limits(Limits::unlimited());

    let (width, height) = dec.dimensions().map_err(|e| tiff_err(path, e))?;
    let bands: usize = dec
        .find_tag_unsigned::<u16>(Tag::SamplesPerPixel)
        .map_err(|e| tiff_err(path, e))?
        .unwrap_or(1) as usize;
    let planar = dec
        .find_tag_unsigned::<u16>(Tag::PlanarConfiguration)
        .map_err(|e| tiff_err(path, e))?
        .unwrap_or(1);
    if planar != 1 && bands > 1 {
        return Err(Error::UnsupportedEncoding(format!(
            "{}: planar (band-separate) layout",
            path.display()
        )));
    }

    let geotransform = read_geotransform(&mut dec, path)?;
    let crs = read_crs(&mut dec, path)?;
    let nodata = read_nodata(&mut dec, path)?;

    let (interleaved, sample_type): (Vec<f64>, SampleType) =
        match dec.read_image().map_err(|e| tiff_err(path, e))? {
            DecodingResult::U8(v) => (v.into_iter().map(f64::from).collect(), SampleType::U8),
            DecodingResult::U16(v) => (v.into_iter().map(f64::from).collect(), SampleType::U16),
            DecodingResult::I16(v) => (v.into_iter().map(f64::from).collect(), SampleType::I16),
            DecodingResult::U32(v) => (v.into_iter().map(f64::from).collect(), SampleType::U32),
            DecodingResult::I32(v) => (v.into_iter().map(f64::from).collect(), SampleType::I32),
            DecodingResult::F32(v) => (v.into_iter().map(f64::from).collect(), SampleType::F32),
            DecodingResult::F64(v) => (v, SampleType::F64),
            _ => {
                return Err(Error::UnsupportedEncoding(format!(
                    "{}: sample format is not one of u8/u16/i16/u32/i32/f32/f64",
                    path.display()
                )))
            }
        };

    let n = width as usize * height as usize;
    if interleaved.len() < n * bands {
        return Err(Error::Tiff(format!(
            "{}: decoded {} samples, expected {}",
            path.display(),
            interleaved.len(),
            n * bands
        )));
    }
    let mut data = vec![0.0; n * bands];
    for (px, chunk) in interleaved.chunks_exact(bands).take(n).enumerate() {
        for (b, v) in chunk.iter().enumerate() {
            data[b * n + px] = *v;
        }
    }

    let grid = GridSpec::new(width as usize, height as usize, geotransform, crs)?;
    GeoRaster::new(grid, bands, data, sample_type, nodata)
}

fn read_geotransform<R: std::io::Read + Seek>(dec: &mut Decoder<R>, path: &Path) -> Result<GeoTransform> {
    let missing = |what: &str| Error::MissingGeoreference {
        path: path.to_path_buf(),
        what: what.to_string(),
    };
    let find_f64s = |dec: &mut Decoder<R>, tag: u16| -> Result<Option<Vec<f64>>> {
        match dec.find_tag(Tag::Unknown(tag)).map_err(|e| tiff_err(path, e))? {
            Some(v) => Ok(Some(v.into_f64_vec().map_err(|e| tiff_err(path, e))?)),
            None => Ok(None),
        }
    };

    let mut gt = if let Some(m) = find_f64s(dec, MODEL_TRANSFORMATION)? {
        if m.len() < 16 {
            return Err(missing("ModelTransformation has fewer than 16 values"));
        }
        GeoTransform::from_gdal([m[3], m[0], m[1], m[7], m[4], m[5]])
    } else {
        let scale = find_f64s(dec, MODEL_PIXEL_SCALE)?.ok_or_else(|| missing("no ModelPixelScale"))?;
        let tie = find_f64s(dec, MODEL_TIEPOINT)?.ok_or_else(|| missing("no ModelTiepoint"))?;
        if scale.len() < 2 || tie.len() < 6 {
            return Err(missing("truncated ModelPixelScale/ModelTiepoint"));
        }
        let (sx, sy) = (scale[0], scale[1]);
        let (i, j, x, y) = (tie[0], tie[1], tie[3], tie[4]);
        GeoTransform::from_gdal([x - i * sx, sx, 0.0, y + j * sy, 0.0, -sy])
    };

    // PixelIsPoint ties refer to pixel centers; shift to the corner origin.
    let keys = read_geokeys(dec, path)?;
    if geokey(&keys, GT_RASTER_TYPE_KEY) == Some(RASTER_PIXEL_IS_POINT) {
        gt.origin_x -= 0.5 * (gt.pixel_w + gt.shear_x);
        gt.origin_y -= 0.5 * (gt.shear_y + gt.pixel_h);
    }

    if !gt.is_invertible() {
        return Err(Error::SingularTransform);
    }
    Ok(gt)
}

fn read_geokeys<R: std::io::Read + Seek>(dec: &mut Decoder<R>, path: &Path) -> Result<Option<Vec<u16>>> {
    match dec.find_tag(Tag::Unknown(GEO_KEY_DIRECTORY)).map_err(|e| tiff_err(path, e))? {
        Some(v) => {
            let raw = v.into_u16_vec().map_err(|e| tiff_err(path, e))?;
            Ok(Some(raw))
        }
        None => Ok(None),
    }
}

/// Looks up a directly stored (location 0) key value.
fn geokey(keys: &Option<Vec<u16>>, id: u16) -> Option<u16> {
    let keys = keys.as_ref()?;
    if keys.len() < 4 {
        return None;
    }
    let n = keys[3] as usize;
    keys[4..]
        .chunks_exact(4)
        .take(n)
        .find(|k| k[0] == id && k[1] == 0)
        .map(|k| k[3])
}

fn read_crs<R: std::io::Read + Seek>(dec: &mut Decoder<R>, path: &Path) -> Result<CrsId> {
    let keys = read_geokeys(dec, path)?;
    let missing = |what: &str| Error::MissingGeoreference {
        path: path.to_path_buf(),
        what: what.to_string(),
    };
    if keys.is_none() {
        return Err(missing("no GeoKeyDirectory"));
    }
    let code = geokey(&keys, PROJECTED_CS_TYPE_KEY)
        .or_else(|| geokey(&keys, GEOGRAPHIC_TYPE_KEY))
        .ok_or_else(|| missing("no projected or geographic CRS key"))?;
    if code == USER_DEFINED {
        return Err(missing("user-defined CRS is not supported"));
    }
    CrsId::new(code as u32)
}

fn read_nodata<R: std::io::Read + Seek>(dec: &mut Decoder<R>, path: &Path) -> Result<Option<f64>> {
    match dec.find_tag(Tag::Unknown(GDAL_NODATA)).map_err(|e| tiff_err(path, e))? {
        Some(v) => {
            let s = v.into_string().map_err(|e| tiff_err(path, e))?;
            let s = s.trim_matches(char::from(0)).trim();
            let parsed = match s.to_ascii_lowercase().as_str() {
                "nan" => f64::NAN,
                other => other
                    .parse::<f64>()
                    .map_err(|_| Error::Tiff(format!("{}: bad GDAL_NODATA value {s:?}", path.display())))?,
            };
            Ok(Some(parsed))
        }
        None => Ok(None),
    }
}

pub fn write_raster(path: impl AsRef<Path>, raster: &GeoRaster) -> Result<()> {
    let path = path.as_ref();
    if raster.crs().code() > u16::MAX as u32 {
        return Err(Error::UnsupportedEncoding(format!(
            "{} cannot be stored as a GeoKey short",
            raster.crs()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode(&mut w, raster).map_err(|e| tiff_err(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn encode<W: Write + Seek>(w: W, raster: &GeoRaster) -> std::result::Result<(), TiffError> {
    let mut enc = TiffEncoder::new(w)?;
    let mut dir = enc.image_directory()?;
    let bands = raster.bands();
    let st = raster.sample_type();
    let (width, height) = (raster.width() as u32, raster.height() as u32);

    dir.write_tag(Tag::ImageWidth, width)?;
    dir.write_tag(Tag::ImageLength, height)?;
    dir.write_tag(Tag::BitsPerSample, vec![st.bits(); bands].as_slice())?;
    dir.write_tag(Tag::Compression, 1u16)?;
    let rgb = bands == 3;
    dir.write_tag(Tag::PhotometricInterpretation, if rgb { 2u16 } else { 1u16 })?;
    dir.write_tag(Tag::SamplesPerPixel, bands as u16)?;
    let format: u16 = match st {
        SampleType::U8 | SampleType::U16 | SampleType::U32 => 1,
        SampleType::I16 | SampleType::I32 => 2,
        SampleType::F32 | SampleType::F64 => 3,
    };
    dir.write_tag(Tag::SampleFormat, vec![format; bands].as_slice())?;
    dir.write_tag(Tag::PlanarConfiguration, 1u16)?;
    dir.write_tag(Tag::RowsPerStrip, height)?;
    if !rgb && bands > 1 {
        dir.write_tag(Tag::ExtraSamples, vec![0u16; bands - 1].as_slice())?;
    }
    write_geo_tags(&mut dir, raster)?;

    let n = raster.grid().len();
    let data = raster.data();
    let interleaved = (0..n).flat_map(|px| (0..bands).map(move |b| data[b * n + px]));
    let (offset, nbytes) = match st {
        SampleType::U8 => write_samples(&mut dir, &interleaved.map(|v| v as u8).collect::<Vec<_>>())?,
        SampleType::U16 => write_samples(&mut dir, &interleaved.map(|v| v as u16).collect::<Vec<_>>())?,
        SampleType::I16 => write_samples(&mut dir, &interleaved.map(|v| v as i16).collect::<Vec<_>>())?,
        SampleType::U32 => write_samples(&mut dir, &interleaved.map(|v| v as u32).collect::<Vec<_>>())?,
        SampleType::I32 => write_samples(&mut dir, &interleaved.map(|v| v as i32).collect::<Vec<_>>())?,
        SampleType::F32 => write_samples(&mut dir, &interleaved.map(|v| v as f32).collect::<Vec<_>>())?,
        SampleType::F64 => write_samples(&mut dir, &interleaved.collect::<Vec<_>>())?,
    };
    let offset = u32::try_from(offset).map_err(|_| TiffError::IntSizeError)?;
    dir.write_tag(Tag::StripOffsets, offset)?;
    dir.write_tag(Tag::StripByteCounts, nbytes)?;
    dir.finish()
}

fn write_samples<W: Write + Seek, K: TiffKind, T>(
    dir: &mut DirectoryEncoder<'_, W, K>,
    samples: &[T],
) -> std::result::Result<(u64, u32), TiffError>
where
    [T]: tiff::encoder::TiffValue,
{
    let nbytes = std::mem::size_of_val(samples);
    let nbytes = u32::try_from(nbytes).map_err(|_| TiffError::IntSizeError)?;
    let offset = dir.write_data(samples)?;
    Ok((offset, nbytes))
}

fn write_geo_tags<W: Write + Seek, K: TiffKind>(
    dir: &mut DirectoryEncoder<'_, W, K>,
    raster: &GeoRaster,
) -> std::result::Result<(), TiffError> {
    let gt = raster.geotransform();
    if gt.shear_x == 0.0 && gt.shear_y == 0.0 && gt.pixel_w > 0.0 && gt.pixel_h < 0.0 {
        dir.write_tag(Tag::Unknown(MODEL_PIXEL_SCALE), &[gt.pixel_w, -gt.pixel_h, 0.0][..])?;
        dir.write_tag(
            Tag::Unknown(MODEL_TIEPOINT),
            &[0.0, 0.0, 0.0, gt.origin_x, gt.origin_y, 0.0][..],
        )?;
    } else {
        let m = [
            gt.pixel_w, gt.shear_x, 0.0, gt.origin_x, //
            gt.shear_y, gt.pixel_h, 0.0, gt.origin_y, //
            0.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        ];
        dir.write_tag(Tag::Unknown(MODEL_TRANSFORMATION), &m[..])?;
    }

    let code = raster.crs().code();
    let code16 = u16::try_from(code).map_err(|_| TiffError::IntSizeError)?;
    let (model, crs_key) = if is_geographic(code) {
        (MODEL_GEOGRAPHIC, GEOGRAPHIC_TYPE_KEY)
    } else {
        (MODEL_PROJECTED, PROJECTED_CS_TYPE_KEY)
    };
    let keys: [u16; 16] = [
        1, 1, 0, 3, //
        GT_MODEL_TYPE_KEY, 0, 1, model, //
        GT_RASTER_TYPE_KEY, 0, 1, RASTER_PIXEL_IS_AREA, //
        crs_key, 0, 1, code16,
    ];
    dir.write_tag(Tag::Unknown(GEO_KEY_DIRECTORY), &keys[..])?;

    if let Some(nd) = raster.nodata() {
        let s = if nd.is_nan() { "nan".to_string() } else { format!("{nd}") };
        dir.write_tag(Tag::Unknown(GDAL_NODATA), s.as_str())?;
    }
    Ok(())
}
