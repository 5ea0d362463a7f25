//! Ferromagnet parameter records and the built-in database.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permeability (T m / A).
pub const MU0: f64 = 4.0 * std::f64::consts::PI * 1e-7;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.0546e-34;
/// Elementary charge (C).
pub const E_CHARGE: f64 = 1.602e-19;
/// Landau-Lifshitz gyromagnetic ratio (m / (A s)).
pub const GAMMA_LL: f64 = 2.211e5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub name: String,
    /// Saturation magnetization (A/m).
    #[serde(rename = "Ms")]
    pub ms: f64,
    /// Exchange stiffness (J/m).
    #[serde(rename = "A")]
    pub a: f64,
    /// Spin polarization.
    #[serde(rename = "P")]
    pub p: f64,
    /// Gilbert damping.
    pub alpha: f64,
}

impl Material {
    pub fn new(name: impl Into<String>, ms: f64, a: f64, p: f64, alpha: f64) -> Result<Self> {
        let m = Material {
            name: name.into(),
            ms,
            a,
            p,
            alpha,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::invalid(format!(
                "material `{}`: {what} (Ms={}, A={}, P={}, alpha={})",
                self.name, self.ms, self.a, self.p, self.alpha
            )))
        };
        if self.name.trim().is_empty() {
            return bad("empty name");
        }
        if !(self.ms > 0.0 && self.ms.is_finite()) {
            return bad("Ms must be positive");
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return bad("A must be positive");
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return bad("P must lie in (0, 1]");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        Ok(())
    }
}

pub fn cobalt() -> Material {
    Material {
        name: "Co".into(),
        ms: 1400e3,
        a: 30e-12,
        p: 0.40,
        alpha: 0.010,
    }
}

/// Co2MnSi. Exchange stiffness kept at the tabulated 2.35e-12 J/m.
pub fn cms() -> Material {
    Material {
        name: "CMS".into(),
        ms: 800e3,
        a: 2.35e-12,
        p: 0.56,
        alpha: 0.008,
    }
}

/// Co2FeAl0.5Si0.5.
pub fn cfas() -> Material {
    Material {
        name: "CFAS".into(),
        ms: 900e3,
        a: 2.0e-11,
        p: 0.76,
        alpha: 0.010,
    }
}

pub fn builtin() -> [Material; 3] {
    [cobalt(), cms(), cfas()]
}

/// Name-keyed lookup over the built-ins plus user-registered records.
/// Lookups are case-insensitive; built-ins cannot be replaced.
#[derive(Debug, Clone)]
pub struct MaterialRegistry {
    entries: BTreeMap<String, Material>,
    order: Vec<String>,
}

impl Default for MaterialRegistry {
    fn default() -> Self {
        let mut reg = MaterialRegistry {
            entries: BTreeMap::new(),
            order: Vec::new(),
        };
        for m in builtin() {
            reg.insert(m);
        }
        reg
    }
}

impl MaterialRegistry {
    fn insert(&mut self, m: Material) {
        self.order.push(m.name.clone());
        self.entries.insert(m.name.to_ascii_lowercase(), m);
    }

    pub fn register(&mut self, m: Material) -> Result<()> {
        m.validate()?;
        let key = m.name.to_ascii_lowercase();
        if builtin().iter().any(|b| b.name.to_ascii_lowercase() == key) {
            return Err(Error::invalid(format!("cannot redefine built-in material `{}`", m.name)));
        }
        match self.entries.get_mut(&key) {
            Some(slot) => *slot = m,
            None => self.insert(m),
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Material> {
        self.entries
            .get(&name.to_ascii_lowercase())
            .cloned()
            .ok_or_else(|| Error::MaterialNotFound {
                name: name.to_string(),
                available: self.names(),
            })
    }

    /// Names in registration order, built-ins first.
    pub fn names(&self) -> Vec<String> {
        self.order.clone()
    }
}

/// Looks up a built-in material by (case-insensitive) name.
pub fn get_material(name: &str) -> Result<Material> {
    MaterialRegistry::default().get(name)
}

/// `sqrt(2A / (mu0 Ms^2))`.
pub fn exchange_length(mat: &Material) -> f64 {
    (2.0 * mat.a / (MU0 * mat.ms * mat.ms)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_records() {
        let co = get_material("Co").unwrap();
        assert_eq!((co.ms, co.a, co.p, co.alpha), (1400e3, 30e-12, 0.40, 0.010));
        let cms = get_material("cms").unwrap();
        assert_eq!((cms.ms, cms.a, cms.p, cms.alpha), (800e3, 2.35e-12, 0.56, 0.008));
        let cfas = get_material("CFAS").unwrap();
        assert_eq!((cfas.ms, cfas.a, cfas.p, cfas.alpha), (900e3, 2.0e-11, 0.76, 0.010));
        for m in builtin() {
            m.validate().unwrap();
        }
    }

    #[test]
    fn unknown_name_lists_available() {
        let err = get_material("XYZ").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Co, CMS, CFAS"), "{msg}");
    }

    #[test]
    fn exchange_lengths() {
        // sqrt(2 * 2.35e-12 / (4 pi 1e-7 * 6.4e11)) = 2.417e-9
        let l = exchange_length(&cms());
        assert!((l - 2.4174e-9).abs() < 1e-12, "{l}");
        // sqrt(6e-11 / (4 pi 1e-7 * 1.96e12)) = 4.9356e-9
        let l = exchange_length(&cobalt());
        assert!((l - 4.9356e-9).abs() < 1e-12, "{l}");
    }

    #[test]
    fn quadrupled_stiffness_doubles_length() {
        let base = cfas();
        let mut stiff = base.clone();
        stiff.a *= 4.0;
        assert_eq!(exchange_length(&stiff), 2.0 * exchange_length(&base));
    }

    #[test]
    fn custom_material_round_trip() {
        let mut reg = MaterialRegistry::default();
        let py = Material::new("Py", 860e3, 13e-12, 0.35, 0.02).unwrap();
        reg.register(py.clone()).unwrap();
        assert_eq!(reg.get("PY").unwrap(), py);
        assert_eq!(reg.names(), vec!["Co", "CMS", "CFAS", "Py"]);
    }

    #[test]
    fn builtins_are_immutable() {
        let mut reg = MaterialRegistry::default();
        let fake = Material::new("co", 1.0, 1.0, 0.5, 0.5).unwrap();
        assert!(reg.register(fake).is_err());
    }

    #[test]
    fn invalid_records_rejected() {
        assert!(Material::new("bad", 800e3, 1e-11, 0.0, 0.01).is_err());
        assert!(Material::new("bad", 800e3, 1e-11, 0.5, 1.0).is_err());
        assert!(Material::new("bad", -1.0, 1e-11, 0.5, 0.1).is_err());
    }
}
