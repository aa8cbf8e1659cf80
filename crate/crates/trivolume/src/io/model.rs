//! JSON model files for volumes and boundary surface sets.
//!
//! All reals are written in scientific notation with 17 significant digits,
//! so parse -> serialize -> parse is value-exact.

use crate::algebra::Vec3;
use crate::spline::{
    BSplineSurface, BSplineVolume, ControlGrid3, FaceLabel, Grid2, KnotVector, SplineError,
};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed JSON: {0}")]
    MalformedJson(#[from] serde_json::Error),
    #[error("unsupported format version {found} (this build reads version {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("non-monotone knot vector in direction {direction}: {detail}")]
    NonMonotoneKnots { direction: String, detail: String },
    #[error("invalid knot vector in direction {direction}: {detail}")]
    InvalidKnots { direction: String, detail: String },
    #[error("missing face {0}")]
    MissingFace(FaceLabel),
    #[error("duplicate face {0}")]
    DuplicateFace(FaceLabel),
    #[error("surface_set must contain exactly 6 faces, found {0}")]
    WrongFaceCount(usize),
    #[error("rational (weighted) splines are not supported")]
    RationalUnsupported,
    #[error("control point count {found} does not match dims {dims:?}")]
    PointCountMismatch { dims: Vec<usize>, found: usize },
    #[error("non-finite control point at index {0}")]
    NonFinitePoint(usize),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolumeData {
    pub degrees: [usize; 3],
    pub knots: [Vec<f64>; 3],
    pub dims: [usize; 3],
    /// Lexicographic, first index fastest.
    pub points: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaceData {
    pub label: FaceLabel,
    pub degrees: [usize; 2],
    pub knots: [Vec<f64>; 2],
    pub dims: [usize; 2],
    /// Row-major, first index fastest.
    pub points: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelPayload {
    Volume { volume: VolumeData },
    SurfaceSet { faces: Vec<FaceData> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    #[serde(flatten)]
    pub payload: ModelPayload,
}

fn validate_knots(direction: &str, degree: usize, knots: &[f64]) -> Result<KnotVector, ModelError> {
    for w in knots.windows(2) {
        if !(w[0] <= w[1]) {
            return Err(ModelError::NonMonotoneKnots {
                direction: direction.to_string(),
                detail: format!("{} > {}", w[0], w[1]),
            });
        }
    }
    KnotVector::new(degree, knots.to_vec()).map_err(|e| ModelError::InvalidKnots {
        direction: direction.to_string(),
        detail: e.to_string(),
    })
}

fn to_vec3s(points: &[[f64; 3]]) -> Result<Vec<Vec3>, ModelError> {
    if let Some(bad) = points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(ModelError::NonFinitePoint(bad));
    }
    Ok(points.iter().map(|p| Vec3::from_array(*p)).collect())
}

impl VolumeData {
    pub fn to_volume(&self) -> Result<BSplineVolume, ModelError> {
        if self.weights.is_some() {
            return Err(ModelError::RationalUnsupported);
        }
        let expected: usize = self.dims.iter().product();
        if self.points.len() != expected {
            return Err(ModelError::PointCountMismatch {
                dims: self.dims.to_vec(),
                found: self.points.len(),
            });
        }
        let names = ["u", "v", "w"];
        let kvs: Vec<KnotVector> = (0..3)
            .map(|a| validate_knots(names[a], self.degrees[a], &self.knots[a]))
            .collect::<Result<_, _>>()?;
        let grid = ControlGrid3::new(self.dims, to_vec3s(&self.points)?)?;
        let [u, v, w]: [KnotVector; 3] = kvs.try_into().unwrap();
        Ok(BSplineVolume::new(u, v, w, grid)?)
    }

    pub fn from_volume(vol: &BSplineVolume) -> Self {
        VolumeData {
            degrees: vol.degrees(),
            knots: [
                vol.knots(0).knots().to_vec(),
                vol.knots(1).knots().to_vec(),
                vol.knots(2).knots().to_vec(),
            ],
            dims: vol.grid().dims(),
            points: vol.grid().points().iter().map(|p| p.to_array()).collect(),
            weights: None,
        }
    }
}

impl FaceData {
    pub fn to_surface(&self) -> Result<BSplineSurface, ModelError> {
        if self.weights.is_some() {
            return Err(ModelError::RationalUnsupported);
        }
        let expected = self.dims[0] * self.dims[1];
        if self.points.len() != expected {
            return Err(ModelError::PointCountMismatch {
                dims: self.dims.to_vec(),
                found: self.points.len(),
            });
        }
        let dir_a = format!("{}:a", self.label);
        let dir_b = format!("{}:b", self.label);
        let ka = validate_knots(&dir_a, self.degrees[0], &self.knots[0])?;
        let kb = validate_knots(&dir_b, self.degrees[1], &self.knots[1])?;
        let grid = Grid2::new(self.dims, to_vec3s(&self.points)?)?;
        Ok(BSplineSurface::new(self.label, ka, kb, grid)?)
    }

    pub fn from_surface(s: &BSplineSurface) -> Self {
        FaceData {
            label: s.label,
            degrees: [s.knots_a.degree(), s.knots_b.degree()],
            knots: [s.knots_a.knots().to_vec(), s.knots_b.knots().to_vec()],
            dims: s.grid.dims(),
            points: s.grid.points().iter().map(|p| p.to_array()).collect(),
            weights: None,
        }
    }
}

impl ModelFile {
    pub fn volume(vol: &BSplineVolume) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            payload: ModelPayload::Volume { volume: VolumeData::from_volume(vol) },
        }
    }

    pub fn surface_set(faces: &[BSplineSurface]) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            payload: ModelPayload::SurfaceSet {
                faces: faces.iter().map(FaceData::from_surface).collect(),
            },
        }
    }

    pub fn to_volume(&self) -> Result<BSplineVolume, ModelError> {
        match &self.payload {
            ModelPayload::Volume { volume } => volume.to_volume(),
            ModelPayload::SurfaceSet { .. } => Err(ModelError::InvalidKnots {
                direction: "n/a".into(),
                detail: "expected a volume model, found a surface_set".into(),
            }),
        }
    }

    pub fn to_faces(&self) -> Result<Vec<BSplineSurface>, ModelError> {
        match &self.payload {
            ModelPayload::SurfaceSet { faces } => {
                if faces.len() != 6 {
                    return Err(ModelError::WrongFaceCount(faces.len()));
                }
                let mut seen = [false; 6];
                for f in faces {
                    let slot =
                        FaceLabel::ALL.iter().position(|&l| l == f.label).unwrap();
                    if seen[slot] {
                        return Err(ModelError::DuplicateFace(f.label));
                    }
                    seen[slot] = true;
                }
                for (slot, &present) in seen.iter().enumerate() {
                    if !present {
                        return Err(ModelError::MissingFace(FaceLabel::ALL[slot]));
                    }
                }
                faces.iter().map(FaceData::to_surface).collect()
            }
            ModelPayload::Volume { .. } => Err(ModelError::InvalidKnots {
                direction: "n/a".into(),
                detail: "expected a surface_set model, found a volume".into(),
            }),
        }
    }
}

/// serde_json formatter printing every float with 17 significant digits.
struct SciFloatFormatter;

impl serde_json::ser::Formatter for SciFloatFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize a model with full-precision reals.
pub fn model_to_string(model: &ModelFile) -> Result<String, ModelError> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFloatFormatter);
    model.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

pub fn parse_model_str(text: &str) -> Result<ModelFile, ModelError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as u32;
    if version != FORMAT_VERSION {
        return Err(ModelError::UnsupportedVersion { found: version });
    }
    Ok(serde_json::from_value(value)?)
}

pub fn parse_model(path: &Path) -> Result<ModelFile, ModelError> {
    let text = std::fs::read_to_string(path)?;
    parse_model_str(&text)
}

pub fn write_model(path: &Path, model: &ModelFile) -> Result<(), ModelError> {
    std::fs::write(path, model_to_string(model)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn identity_volume_roundtrip() {
        let vol = fixtures::unit_cube(3, 6);
        let model = ModelFile::volume(&vol);
        let text = model_to_string(&model).unwrap();
        let parsed = parse_model_str(&text).unwrap();
        let back = parsed.to_volume().unwrap();
        let p = Vec3::splat(0.5);
        assert!((back.eval(p).unwrap() - p).norm() < 1e-14);
    }

    #[test]
    fn roundtrip_is_bitwise_exact() {
        let vol = fixtures::perturbed_cube(3, 6, 0.07, 2026);
        let model = ModelFile::volume(&vol);
        let text = model_to_string(&model).unwrap();
        let back = parse_model_str(&text).unwrap().to_volume().unwrap();
        for (a, b) in vol.grid().points().iter().zip(back.grid().points()) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
            assert_eq!(a.z.to_bits(), b.z.to_bits());
        }
        for axis in 0..3 {
            for (a, b) in vol.knots(axis).knots().iter().zip(back.knots(axis).knots()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        // serialization itself is stable
        let text2 = model_to_string(&ModelFile::volume(&back)).unwrap();
        assert_eq!(text, text2);
    }

    #[test]
    fn surface_set_roundtrip_and_validation() {
        let vol = fixtures::twisted_cube(3, 6, 25.0);
        let faces = fixtures::faces_of(&vol);
        let model = ModelFile::surface_set(&faces);
        let text = model_to_string(&model).unwrap();
        let parsed = parse_model_str(&text).unwrap();
        let back = parsed.to_faces().unwrap();
        assert_eq!(back.len(), 6);

        // duplicate face
        let mut bad = match &model.payload {
            ModelPayload::SurfaceSet { faces } => faces.clone(),
            _ => unreachable!(),
        };
        bad[1] = bad[0].clone();
        let m = ModelFile {
            format_version: FORMAT_VERSION,
            payload: ModelPayload::SurfaceSet { faces: bad },
        };
        assert!(matches!(m.to_faces(), Err(ModelError::DuplicateFace(_))));
    }

    #[test]
    fn decreasing_knot_names_direction() {
        let vol = fixtures::unit_cube(2, 4);
        let mut data = VolumeData::from_volume(&vol);
        data.knots[1][3] = 0.9;
        data.knots[1][4] = 0.1; // decreasing in v
        let err = data.to_volume().unwrap_err();
        match err {
            ModelError::NonMonotoneKnots { direction, .. } => assert_eq!(direction, "v"),
            other => panic!("expected NonMonotoneKnots, got {other}"),
        }
    }

    #[test]
    fn weighted_input_rejected() {
        let vol = fixtures::unit_cube(2, 4);
        let mut data = VolumeData::from_volume(&vol);
        data.weights = Some(vec![1.0; data.points.len()]);
        assert!(matches!(
            data.to_volume(),
            Err(ModelError::RationalUnsupported)
        ));
    }

    #[test]
    fn version_mismatch_rejected() {
        let vol = fixtures::unit_cube(2, 4);
        let mut text = model_to_string(&ModelFile::volume(&vol)).unwrap();
        text = text.replace("\"format_version\":1", "\"format_version\":99");
        assert!(matches!(
            parse_model_str(&text),
            Err(ModelError::UnsupportedVersion { found: 99 })
        ));
    }

    #[test]
    fn malformed_json_rejected() {
        assert!(matches!(
            parse_model_str("{ not json"),
            Err(ModelError::MalformedJson(_))
        ));
    }

    #[test]
    fn point_count_mismatch_rejected() {
        let vol = fixtures::unit_cube(2, 4);
        let mut data = VolumeData::from_volume(&vol);
        data.points.pop();
        assert!(matches!(
            data.to_volume(),
            Err(ModelError::PointCountMismatch { .. })
        ));
    }
}
