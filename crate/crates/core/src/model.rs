//! Model primitives, derived rates and values, assumption checks, and the
//! conversions from economic settings to flow utilities.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative tolerance under which two rates are treated as equal.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Detectability of shirking at an inspection.
///
/// `Perfect` stands for an infinite rate: any positive amount of shirking is
/// caught with certainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detectability {
    Finite(f64),
    Perfect,
}

impl Detectability {
    pub fn is_perfect(self) -> bool {
        matches!(self, Detectability::Perfect)
    }

    /// Rate as a float, `+inf` when perfect.
    pub fn rate(self) -> f64 {
        match self {
            Detectability::Finite(d) => d,
            Detectability::Perfect => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Detectability::Finite(d) => Some(d),
            Detectability::Perfect => None,
        }
    }

    /// `exp(-delta * s)` with the perfect case read as an indicator of `s == 0`.
    pub fn survival(self, s: f64) -> f64 {
        match self {
            Detectability::Finite(d) => (-d * s).exp(),
            Detectability::Perfect => {
                if s > 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

impl Serialize for Detectability {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Detectability::Finite(d) => s.serialize_f64(*d),
            Detectability::Perfect => s.serialize_str("perfect"),
        }
    }
}

impl<'de> Deserialize<'de> for Detectability {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Detectability;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or the string \"perfect\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
                Ok(Detectability::Finite(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                Ok(Detectability::Finite(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                Ok(Detectability::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                if v.eq_ignore_ascii_case("perfect") {
                    Ok(Detectability::Perfect)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        de.deserialize_any(V)
    }
}

/// The primitives of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Breakthrough rate per unit of work.
    pub lambda_g: f64,
    /// Breakdown rate per unit of shirking.
    pub lambda_b: f64,
    pub r: f64,
    pub delta: Detectability,
    /// Rate at which evidence of past shirking disappears while working.
    #[serde(default)]
    pub rho: f64,
    /// Flow utility while shirking.
    pub u0: f64,
    /// Flow utility while working.
    pub u1: f64,
}

impl ModelParams {
    /// Builds parameters from the effective rates `lambda0 = lambda_b + r`,
    /// `lambda1 = lambda_g + r` and the stationary values `U0`, `U1`.
    #[allow(non_snake_case)]
    pub fn from_values(
        lambda0: f64,
        lambda1: f64,
        U0: f64,
        U1: f64,
        r: f64,
        delta: Detectability,
        rho: f64,
    ) -> Result<Self> {
        let p = ModelParams {
            lambda_g: lambda1 - r,
            lambda_b: lambda0 - r,
            r,
            delta,
            rho,
            u0: U0 * lambda0,
            u1: U1 * lambda1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParams(format!("{what} = {v}")));
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad("r must be positive; r", self.r);
        }
        if !(self.u0 > 0.0 && self.u0.is_finite()) {
            return bad("u0 must be positive; u0", self.u0);
        }
        if !(self.u1 > 0.0 && self.u1.is_finite()) {
            return bad("u1 must be positive; u1", self.u1);
        }
        for (name, v) in [
            ("lambda_g", self.lambda_g),
            ("lambda_b", self.lambda_b),
            ("rho", self.rho),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be non-negative; {name}"), v);
            }
        }
        if let Detectability::Finite(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return bad("delta must be positive; delta", d);
            }
        }
        Ok(())
    }

    pub fn with_lambda_b(mut self, lambda_b: f64) -> Self {
        self.lambda_b = lambda_b;
        self
    }

    pub fn with_delta(mut self, delta: Detectability) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }
}

/// Quantities every formula works with.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub lambda0: f64,
    pub lambda1: f64,
    /// Value of shirking forever without inspections.
    pub U0: f64,
    /// Value of working forever.
    pub U1: f64,
    pub mu: f64,
    pub lambda_ratio: f64,
}

impl DerivedParams {
    #[allow(non_snake_case)]
    pub fn from_values(lambda0: f64, lambda1: f64, U0: f64, U1: f64) -> Self {
        DerivedParams {
            lambda0,
            lambda1,
            U0,
            U1,
            mu: (U0 - U1) / U0,
            lambda_ratio: lambda1 / lambda0,
        }
    }

    /// Rate of project end under action `a` (0 shirk, 1 work).
    pub fn lambda(&self, a: u8) -> f64 {
        if a == 1 {
            self.lambda1
        } else {
            self.lambda0
        }
    }

    /// Stationary value of always taking action `a`.
    pub fn value(&self, a: u8) -> f64 {
        if a == 1 {
            self.U1
        } else {
            self.U0
        }
    }

    pub fn rates_degenerate(&self) -> bool {
        (self.lambda1 - self.lambda0).abs() <= DEGENERACY_TOL * self.lambda0.max(self.lambda1)
    }
}

pub fn derive(params: &ModelParams) -> Result<DerivedParams> {
    params.validate()?;
    let lambda0 = params.lambda_b + params.r;
    let lambda1 = params.lambda_g + params.r;
    Ok(DerivedParams::from_values(
        lambda0,
        lambda1,
        params.u0 / lambda0,
        params.u1 / lambda1,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionMargins {
    /// `U0 - U1`.
    pub a1: f64,
    /// `delta - lambda0 (U0 - U1) / U1`; infinite under perfect detection.
    #[serde(with = "crate::serde_ext::ext_f64")]
    pub a2a: f64,
    /// `delta - lambda1 - (lambda_g - lambda_b)`; infinite under perfect detection.
    #[serde(with = "crate::serde_ext::ext_f64")]
    pub a2b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub a1_holds: bool,
    pub a2a_holds: bool,
    pub a2b_holds: bool,
    pub margins: AssumptionMargins,
}

pub fn check_assumptions(params: &ModelParams) -> AssumptionReport {
    let lambda0 = params.lambda_b + params.r;
    let lambda1 = params.lambda_g + params.r;
    let big_u0 = params.u0 / lambda0;
    let big_u1 = params.u1 / lambda1;
    let a1 = big_u0 - big_u1;
    let (a2a, a2b) = match params.delta {
        Detectability::Perfect => (f64::INFINITY, f64::INFINITY),
        Detectability::Finite(d) => (
            d - lambda0 * (big_u0 - big_u1) / big_u1,
            d - (lambda1 + (params.lambda_g - params.lambda_b)),
        ),
    };
    AssumptionReport {
        a1_holds: a1 > 0.0,
        a2a_holds: a2a > 0.0,
        a2b_holds: a2b > 0.0,
        margins: AssumptionMargins { a1, a2a, a2b },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Working shortens the project less than shirking does: `lambda_g > lambda_b`.
    Innovation,
    /// Shirking ends the project faster: `lambda_b > lambda_g`.
    Maintenance,
    Neutral,
}

pub fn classify_regime(params: &ModelParams) -> Regime {
    let lambda0 = params.lambda_b + params.r;
    let lambda1 = params.lambda_g + params.r;
    let diff = params.lambda_g - params.lambda_b;
    if diff.abs() <= DEGENERACY_TOL * lambda0.max(lambda1) {
        Regime::Neutral
    } else if diff > 0.0 {
        Regime::Innovation
    } else {
        Regime::Maintenance
    }
}

/// Economic settings that pin down the flow utilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Microfoundation {
    /// Wage `w`, private effort cost `c`, reward `big_r` on breakthrough.
    Employment { w: f64, c: f64, big_r: f64 },
    /// Funding flow `phi`, penalty `big_c` on breakdown, reward `big_r` on breakthrough.
    Investment { phi: f64, big_c: f64, big_r: f64 },
    /// Background arrivals at rates `ubar_g`, `ubar_b` folded into the discount rate.
    Baseline { ubar_g: f64, ubar_b: f64 },
}

/// Applies a microfoundation to `base`, replacing the fields it determines.
pub fn microfound(spec: &Microfoundation, base: &ModelParams) -> Result<ModelParams> {
    let mut p = *base;
    match *spec {
        Microfoundation::Employment { w, c, big_r } => {
            p.u0 = w;
            p.u1 = w - c + base.lambda_g * big_r;
        }
        Microfoundation::Investment { phi, big_c, big_r } => {
            p.u0 = phi - base.lambda_b * big_c;
            p.u1 = base.lambda_g * big_r;
        }
        Microfoundation::Baseline { ubar_g, ubar_b } => {
            if !(ubar_g >= 0.0 && ubar_b >= 0.0) {
                return Err(Error::InvalidParams(format!(
                    "baseline rates must be non-negative, got {ubar_g}, {ubar_b}"
                )));
            }
            p.r = base.r + ubar_g + ubar_b;
        }
    }
    if p.u0 <= 0.0 || p.u1 <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "flow utilities must be positive, got u0 = {}, u1 = {}",
            p.u0, p.u1
        )));
    }
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maintenance() -> ModelParams {
        ModelParams {
            lambda_g: 0.5,
            lambda_b: 1.5,
            r: 0.5,
            delta: Detectability::Finite(5.0),
            rho: 0.0,
            u0: 4.0,
            u1: 1.25,
        }
    }

    #[test]
    fn derive_maintenance_values() {
        let d = derive(&maintenance()).unwrap();
        assert_eq!(d.lambda0, 2.0);
        assert_eq!(d.lambda1, 1.0);
        assert_eq!(d.U0, 2.0);
        assert_eq!(d.U1, 1.25);
    }

    #[test]
    fn derive_innovation_values() {
        let p = ModelParams {
            lambda_g: 1.5,
            lambda_b: 0.5,
            r: 0.5,
            delta: Detectability::Perfect,
            rho: 0.0,
            u0: 2.0,
            u1: 2.5,
        };
        let d = derive(&p).unwrap();
        assert_eq!((d.U0, d.U1), (2.0, 1.25));
        assert_eq!(d.mu, 0.375);
        assert_eq!(d.lambda_ratio, 2.0);
    }

    #[test]
    fn derive_symmetric_identity() {
        let p = ModelParams {
            lambda_g: 0.0,
            lambda_b: 0.0,
            r: 0.7,
            delta: Detectability::Perfect,
            rho: 0.0,
            u0: 0.7,
            u1: 0.7,
        };
        let d = derive(&p).unwrap();
        assert_eq!((d.U0, d.U1), (1.0, 1.0));
    }

    #[test]
    fn derive_rejects_bad_params() {
        let mut p = maintenance();
        p.r = 0.0;
        assert!(matches!(derive(&p), Err(Error::InvalidParams(_))));
        let mut p = maintenance();
        p.u1 = -1.0;
        assert!(matches!(derive(&p), Err(Error::InvalidParams(_))));
        let p = maintenance().with_delta(Detectability::Finite(0.0));
        assert!(matches!(derive(&p), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn assumption_margins_maintenance() {
        let rep = check_assumptions(&maintenance());
        assert!((rep.margins.a2a - 3.8).abs() < 1e-12);
        assert!((rep.margins.a2b - 5.0).abs() < 1e-12);
        assert!(rep.a1_holds && rep.a2a_holds && rep.a2b_holds);
    }

    #[test]
    fn assumptions_perfect_and_boundary() {
        let rep = check_assumptions(&maintenance().with_delta(Detectability::Perfect));
        assert!(rep.a2a_holds && rep.a2b_holds);
        // U0 = U1 = 1.25
        let p = ModelParams {
            u0: 2.5,
            ..maintenance()
        };
        let rep = check_assumptions(&p);
        assert_eq!(rep.margins.a1, 0.0);
        assert!(!rep.a1_holds);
    }

    #[test]
    fn regime_labels() {
        let mut p = maintenance();
        assert_eq!(classify_regime(&p), Regime::Maintenance);
        p.lambda_g = 1.5;
        p.lambda_b = 0.5;
        assert_eq!(classify_regime(&p), Regime::Innovation);
        p.lambda_b = 1.5;
        assert_eq!(classify_regime(&p), Regime::Neutral);
    }

    #[test]
    fn microfoundations() {
        let base = ModelParams {
            lambda_g: 0.75,
            ..maintenance()
        };
        let p = microfound(
            &Microfoundation::Employment {
                w: 1.0,
                c: 0.5,
                big_r: 1.0,
            },
            &base,
        )
        .unwrap();
        assert_eq!((p.u0, p.u1), (1.0, 1.25));

        let err = microfound(
            &Microfoundation::Investment {
                phi: 2.0,
                big_c: 0.0,
                big_r: 0.0,
            },
            &base,
        );
        assert!(matches!(err, Err(Error::InvalidParams(_))));

        let p = microfound(
            &Microfoundation::Baseline {
                ubar_g: 0.1,
                ubar_b: 0.2,
            },
            &maintenance(),
        )
        .unwrap();
        assert!((p.r - 0.8).abs() < 1e-15);
        assert_eq!(p.u0, 4.0);
    }

    #[test]
    fn params_json_roundtrip() {
        let json = r#"{"lambda_g":0.5,"lambda_b":1.5,"r":0.5,"delta":"perfect","u0":4,"u1":1.25}"#;
        let p: ModelParams = serde_json::from_str(json).unwrap();
        assert_eq!(p.delta, Detectability::Perfect);
        assert_eq!(p.rho, 0.0);
        let back: ModelParams = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"lambda_g":0.5,"lambda_b":1.5,"r":0.5,"delta":5,"u0":4,"u1":1.25,"x":1}"#;
        assert!(serde_json::from_str::<ModelParams>(bad).is_err());
    }
}
