use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A leg or torso segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    pub mass: f64,
    pub length: f64,
    /// Distance of the CoM from the proximal joint (hip side for legs, hip for
    /// the torso).
    pub com: f64,
    /// Rotational inertia about the CoM.
    pub inertia: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootParams {
    pub mass: f64,
    /// CoM relative to the ankle in the foot frame (x forward, y up).
    pub com: [f64; 2],
    pub inertia: f64,
}

/// Parameters of the planar six-link biped: two three-segment legs (shank,
/// thigh, foot) and a torso.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BipedModel {
    pub name: String,
    pub gravity: f64,
    /// Height of the ankle above the sole.
    pub ankle_height: f64,
    /// Sole extent in front of the ankle.
    pub sole_fore: f64,
    /// Sole extent behind the ankle.
    pub sole_aft: f64,
    pub foot: FootParams,
    pub shank: LinkParams,
    pub thigh: LinkParams,
    pub torso: LinkParams,
}

const NAO_LIKE: &str = include_str!("../../models/nao_like.toml");

impl BipedModel {
    /// The bundled Nao-class model, about 5 kg.
    pub fn nao_like() -> Self {
        Self::from_toml(NAO_LIKE).expect("bundled model is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let m: BipedModel = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |field: &'static str, v: f64| {
            if !v.is_finite() {
                Err(Error::NonFinite { field, value: v })
            } else if v <= 0.0 {
                Err(Error::NonPositive { field, value: v })
            } else {
                Ok(())
            }
        };
        pos("gravity", self.gravity)?;
        pos("ankle_height", self.ankle_height)?;
        pos("sole_fore", self.sole_fore)?;
        pos("sole_aft", self.sole_aft)?;
        pos("foot.mass", self.foot.mass)?;
        pos("foot.inertia", self.foot.inertia)?;
        for (name, l) in [("shank", &self.shank), ("thigh", &self.thigh), ("torso", &self.torso)] {
            pos(name, l.mass)?;
            pos(name, l.length)?;
            pos(name, l.inertia)?;
            if !(l.com >= 0.0 && l.com <= l.length) {
                return Err(Error::Config(format!(
                    "{name}.com = {} must lie within the link length {}",
                    l.com, l.length
                )));
            }
        }
        if !self.foot.com.iter().all(|c| c.is_finite()) {
            return Err(Error::Config("foot.com must be finite".into()));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        2.0 * (self.foot.mass + self.shank.mass + self.thigh.mass) + self.torso.mass
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_model() {
        let m = BipedModel::nao_like();
        assert!((m.total_mass() - 5.0).abs() < 1e-12);
        assert_eq!(m.sole_fore + m.sole_aft, 0.04);
        let back = BipedModel::from_toml(&m.to_toml()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_bad_models() {
        let text = NAO_LIKE.replace("mass = 0.4", "mass = 0.0");
        assert!(BipedModel::from_toml(&text).is_err());
        let text = NAO_LIKE.replace("com = 0.05", "com = 0.5");
        assert!(BipedModel::from_toml(&text).is_err());
        let text = format!("{NAO_LIKE}\nextra = 1\n");
        assert!(BipedModel::from_toml(&text).is_err());
    }
}
