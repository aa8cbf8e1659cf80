//! Legacy ASCII VTK structured-grid export for visualization.

use crate::algebra::Vec3;
use crate::quality::{condition_number, domain_volume, orthogonality};
use crate::spline::{BSplineVolume, SplineError};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VtkField {
    DetJ,
    Kappa,
    Orth,
    Dvol,
}

impl VtkField {
    pub fn name(self) -> &'static str {
        match self {
            VtkField::DetJ => "detJ",
            VtkField::Kappa => "kappa",
            VtkField::Orth => "orth",
            VtkField::Dvol => "dvol",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "detj" => Some(VtkField::DetJ),
            "kappa" => Some(VtkField::Kappa),
            "orth" => Some(VtkField::Orth),
            "dvol" => Some(VtkField::Dvol),
            _ => None,
        }
    }
}

fn clamp_finite(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-1e300, 1e300)
    }
}

/// Render the volume on a uniform parameter lattice as an ASCII legacy VTK
/// structured grid with the requested point scalars. Output bytes are a
/// pure function of the inputs.
pub fn vtk_string(
    vol: &BSplineVolume,
    resolution: [usize; 3],
    fields: &[VtkField],
) -> Result<String, SplineError> {
    assert!(
        resolution.iter().all(|&r| r >= 2),
        "resolution must be at least 2 per direction"
    );
    let [r0, r1, r2] = resolution;
    let n = r0 * r1 * r2;
    let mut points = Vec::with_capacity(n);
    let mut jacobians = Vec::with_capacity(n);
    for k in 0..r2 {
        for j in 0..r1 {
            for i in 0..r0 {
                let p = Vec3::new(
                    i as f64 / (r0 - 1) as f64,
                    j as f64 / (r1 - 1) as f64,
                    k as f64 / (r2 - 1) as f64,
                );
                points.push(vol.eval(p)?);
                jacobians.push(vol.jacobian(p)?);
            }
        }
    }
    let omega = if fields.contains(&VtkField::Dvol) {
        domain_volume(vol)
    } else {
        1.0
    };

    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("trivolume structured grid\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET STRUCTURED_GRID\n");
    let _ = writeln!(out, "DIMENSIONS {r0} {r1} {r2}");
    let _ = writeln!(out, "POINTS {n} double");
    for p in &points {
        let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z);
    }
    if !fields.is_empty() {
        let _ = writeln!(out, "POINT_DATA {n}");
        for field in fields {
            let _ = writeln!(out, "SCALARS {} double 1", field.name());
            out.push_str("LOOKUP_TABLE default\n");
            for jac in &jacobians {
                let v = match field {
                    VtkField::DetJ => jac.det(),
                    VtkField::Kappa => condition_number(jac),
                    VtkField::Orth => {
                        orthogonality(jac.col(0), jac.col(1), jac.col(2)).unwrap_or(0.0)
                    }
                    VtkField::Dvol => jac.det() / omega,
                };
                let _ = writeln!(out, "{:.17e}", clamp_finite(v));
            }
        }
    }
    Ok(out)
}

pub fn export_vtk(
    vol: &BSplineVolume,
    resolution: [usize; 3],
    fields: &[VtkField],
    path: &Path,
) -> Result<(), std::io::Error> {
    let text = vtk_string(vol, resolution, fields)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
    std::fs::write(path, text)
}
