//! Parametric shape families in canonical orientation (+y up, front +z).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::mesh::Mesh;
use crate::error::{Error, Result};
use crate::rng::Rng;

const SEGMENTS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    Box,
    Cylinder,
    Ellipsoid,
    /// Top plus four legs.
    Table4,
    /// Seat, back and four legs.
    Chair5,
    /// Base, pole and a conical shade.
    Lampoid,
}

impl ShapeFamily {
    pub const ALL: [ShapeFamily; 6] = [
        ShapeFamily::Box,
        ShapeFamily::Cylinder,
        ShapeFamily::Ellipsoid,
        ShapeFamily::Table4,
        ShapeFamily::Chair5,
        ShapeFamily::Lampoid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeFamily::Box => "box",
            ShapeFamily::Cylinder => "cylinder",
            ShapeFamily::Ellipsoid => "ellipsoid",
            ShapeFamily::Table4 => "table4",
            ShapeFamily::Chair5 => "chair5",
            ShapeFamily::Lampoid => "lampoid",
        }
    }

    /// `(name, min, max)` for every parameter.
    pub fn parameter_ranges(self) -> &'static [(&'static str, f64, f64)] {
        match self {
            ShapeFamily::Box => &[("depth", 0.4, 1.4), ("height", 0.4, 1.4), ("width", 0.4, 1.4)],
            ShapeFamily::Cylinder => &[("height", 0.5, 1.5), ("radius", 0.2, 0.6)],
            ShapeFamily::Ellipsoid => &[("rx", 0.3, 1.0), ("ry", 0.3, 1.0), ("rz", 0.3, 1.0)],
            ShapeFamily::Table4 => &[
                ("height", 0.5, 0.9),
                ("leg_thickness", 0.05, 0.12),
                ("top_depth", 0.6, 1.0),
                ("top_thickness", 0.04, 0.1),
                ("top_width", 0.8, 1.4),
            ],
            ShapeFamily::Chair5 => &[
                ("back_height", 0.35, 0.7),
                ("back_thickness", 0.04, 0.08),
                ("leg_thickness", 0.04, 0.08),
                ("seat_depth", 0.4, 0.6),
                ("seat_height", 0.35, 0.55),
                ("seat_thickness", 0.04, 0.08),
                ("seat_width", 0.45, 0.65),
            ],
            ShapeFamily::Lampoid => &[
                ("base_radius", 0.15, 0.3),
                ("pole_height", 0.6, 1.2),
                ("pole_radius", 0.02, 0.05),
                ("shade_bottom_radius", 0.2, 0.4),
                ("shade_height", 0.15, 0.35),
                ("shade_top_radius", 0.08, 0.2),
            ],
        }
    }
}

impl fmt::Display for ShapeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidShape(format!("unknown family '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeParams {
    pub family: ShapeFamily,
    pub values: BTreeMap<String, f64>,
}

impl ShapeParams {
    /// Uniform draw of every parameter within its range.
    pub fn sample(family: ShapeFamily, rng: &mut Rng) -> Self {
        let values = family
            .parameter_ranges()
            .iter()
            .map(|&(name, lo, hi)| (name.to_string(), rng.uniform_range(lo, hi)))
            .collect();
        Self { family, values }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = self.family.parameter_ranges();
        for &(name, lo, hi) in ranges {
            let v = *self.values.get(name).ok_or_else(|| {
                Error::InvalidShape(format!("{}: missing parameter '{name}'", self.family))
            })?;
            if !(v.is_finite() && v >= lo && v <= hi) {
                return Err(Error::InvalidShape(format!(
                    "{}: {name} = {v} outside [{lo}, {hi}]",
                    self.family
                )));
            }
        }
        if let Some(extra) = self
            .values
            .keys()
            .find(|k| !ranges.iter().any(|(n, _, _)| n == k))
        {
            return Err(Error::InvalidShape(format!(
                "{}: unknown parameter '{extra}'",
                self.family
            )));
        }
        Ok(())
    }

    fn get(&self, name: &str) -> f64 {
        self.values[name]
    }

    pub fn mesh(&self) -> Result<Mesh> {
        self.validate()?;
        let p = |n: &str| self.get(n);
        let mesh = match self.family {
            ShapeFamily::Box => Mesh::cuboid(
                [0.0, 0.0, 0.0],
                [p("width") / 2.0, p("height") / 2.0, p("depth") / 2.0],
            ),
            ShapeFamily::Cylinder => {
                Mesh::cylinder((0.0, 0.0), -p("height") / 2.0, p("height"), p("radius"), SEGMENTS)
            }
            ShapeFamily::Ellipsoid => {
                Mesh::ellipsoid([0.0; 3], [p("rx"), p("ry"), p("rz")], 12, SEGMENTS)
            }
            ShapeFamily::Table4 => {
                let (w, d, h) = (p("top_width"), p("top_depth"), p("height"));
                let (tt, lt) = (p("top_thickness"), p("leg_thickness"));
                let mut m = Mesh::cuboid([0.0, h - tt / 2.0, 0.0], [w / 2.0, tt / 2.0, d / 2.0]);
                let leg_h = h - tt;
                for (sx, sz) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                    m.append(Mesh::cuboid(
                        [sx * (w / 2.0 - lt), leg_h / 2.0, sz * (d / 2.0 - lt)],
                        [lt / 2.0, leg_h / 2.0, lt / 2.0],
                    ));
                }
                m
            }
            ShapeFamily::Chair5 => {
                let (w, d, sh) = (p("seat_width"), p("seat_depth"), p("seat_height"));
                let (st, bh, bt, lt) = (
                    p("seat_thickness"),
                    p("back_height"),
                    p("back_thickness"),
                    p("leg_thickness"),
                );
                let mut m = Mesh::cuboid([0.0, sh - st / 2.0, 0.0], [w / 2.0, st / 2.0, d / 2.0]);
                m.append(Mesh::cuboid(
                    [0.0, sh + bh / 2.0, -d / 2.0 + bt / 2.0],
                    [w / 2.0, bh / 2.0, bt / 2.0],
                ));
                let leg_h = sh - st;
                for (sx, sz) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                    m.append(Mesh::cuboid(
                        [sx * (w / 2.0 - lt / 2.0), leg_h / 2.0, sz * (d / 2.0 - lt / 2.0)],
                        [lt / 2.0, leg_h / 2.0, lt / 2.0],
                    ));
                }
                m
            }
            ShapeFamily::Lampoid => {
                let base_h = 0.04;
                let mut m = Mesh::cylinder((0.0, 0.0), 0.0, base_h, p("base_radius"), SEGMENTS);
                let pole_h = p("pole_height");
                m.append(Mesh::cylinder((0.0, 0.0), base_h, pole_h, p("pole_radius"), 12));
                let sh = p("shade_height");
                m.append(Mesh::frustum(
                    (0.0, 0.0),
                    base_h + pole_h - sh * 0.5,
                    sh,
                    p("shade_bottom_radius"),
                    p("shade_top_radius"),
                    SEGMENTS,
                ));
                m
            }
        };
        Ok(mesh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_params_validate_and_build() {
        let mut rng = Rng::new(0);
        for fam in ShapeFamily::ALL {
            for _ in 0..5 {
                let p = ShapeParams::sample(fam, &mut rng);
                p.validate().unwrap();
                assert!(!p.mesh().unwrap().is_empty());
            }
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = ShapeParams::sample(ShapeFamily::Chair5, &mut Rng::new(1));
        p.values.insert("seat_width".into(), 5.0);
        assert!(matches!(p.mesh(), Err(Error::InvalidShape(_))));
        let mut q = ShapeParams::sample(ShapeFamily::Box, &mut Rng::new(1));
        q.values.remove("width");
        assert!(q.validate().is_err());
        let mut r = ShapeParams::sample(ShapeFamily::Box, &mut Rng::new(1));
        r.values.insert("color".into(), 1.0);
        assert!(r.validate().is_err());
    }

    #[test]
    fn family_names_roundtrip() {
        for fam in ShapeFamily::ALL {
            assert_eq!(fam.name().parse::<ShapeFamily>().unwrap(), fam);
        }
        assert!("sofa".parse::<ShapeFamily>().is_err());
    }

    #[test]
    fn chair_stands_on_floor() {
        let p = ShapeParams::sample(ShapeFamily::Chair5, &mut Rng::new(2));
        let (lo, hi) = p.mesh().unwrap().bounds();
        assert!(lo[1].abs() < 1e-12);
        assert!((hi[1] - (p.values["seat_height"] + p.values["back_height"])).abs() < 1e-12);
    }
}
