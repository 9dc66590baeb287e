//! The nineteen two-dimensional benchmark objective functions, normalized.
//!
//! Every function is evaluated on [-1, 1] x [-1, 1]: the point is affinely
//! mapped onto the function's standard domain and the known global minimum
//! value is subtracted, so the normalized objective `g` is non-negative and
//! zero at the minimizer. Fitness is `1 / max(g, 1e-20)`, turning the
//! minimization into a strictly positive maximization problem.
//!
//! Domains follow the standard benchmark definitions. Minimizers and minimum
//! values are stored to full f64 precision (refined numerically from the
//! published values, and expressed in normalized coordinates chosen so the
//! float64 round trip through the domain mapping stays exact).

use crate::error::{Error, Result};
use std::f64::consts::{E, PI};

/// Lower bound of the normalized domain, per axis.
pub const DOMAIN_LO: f64 = -1.0;
/// Upper bound of the normalized domain, per axis.
pub const DOMAIN_HI: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectiveId {
    Ackley,
    Beale,
    Levy13,
    Rastrigin,
    Rosenbrock,
    GoldsteinPrice,
    Bukin6,
    Matyas,
    CrossInTray,
    Eggholder,
    Holder,
    McCormick,
    Schaffer2,
    Schaffer4,
    StyblinskiTang,
    Sphere,
    Himmelblau,
    Booth,
    ThreeHumpCamel,
}

impl ObjectiveId {
    pub const ALL: [ObjectiveId; 19] = [
        ObjectiveId::Ackley,
        ObjectiveId::Beale,
        ObjectiveId::Levy13,
        ObjectiveId::Rastrigin,
        ObjectiveId::Rosenbrock,
        ObjectiveId::GoldsteinPrice,
        ObjectiveId::Bukin6,
        ObjectiveId::Matyas,
        ObjectiveId::CrossInTray,
        ObjectiveId::Eggholder,
        ObjectiveId::Holder,
        ObjectiveId::McCormick,
        ObjectiveId::Schaffer2,
        ObjectiveId::Schaffer4,
        ObjectiveId::StyblinskiTang,
        ObjectiveId::Sphere,
        ObjectiveId::Himmelblau,
        ObjectiveId::Booth,
        ObjectiveId::ThreeHumpCamel,
    ];

    /// The sixteen training functions.
    pub const TRAIN: [ObjectiveId; 16] = [
        ObjectiveId::Rastrigin,
        ObjectiveId::Rosenbrock,
        ObjectiveId::GoldsteinPrice,
        ObjectiveId::Bukin6,
        ObjectiveId::Matyas,
        ObjectiveId::CrossInTray,
        ObjectiveId::Eggholder,
        ObjectiveId::Holder,
        ObjectiveId::McCormick,
        ObjectiveId::Schaffer2,
        ObjectiveId::Schaffer4,
        ObjectiveId::StyblinskiTang,
        ObjectiveId::Sphere,
        ObjectiveId::Himmelblau,
        ObjectiveId::Booth,
        ObjectiveId::ThreeHumpCamel,
    ];

    /// The three validation functions.
    pub const VALIDATION: [ObjectiveId; 3] =
        [ObjectiveId::Ackley, ObjectiveId::Beale, ObjectiveId::Levy13];

    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectiveId::Ackley => "ackley",
            ObjectiveId::Beale => "beale",
            ObjectiveId::Levy13 => "levy13",
            ObjectiveId::Rastrigin => "rastrigin",
            ObjectiveId::Rosenbrock => "rosenbrock",
            ObjectiveId::GoldsteinPrice => "goldstein-price",
            ObjectiveId::Bukin6 => "bukin6",
            ObjectiveId::Matyas => "matyas",
            ObjectiveId::CrossInTray => "cross-in-tray",
            ObjectiveId::Eggholder => "eggholder",
            ObjectiveId::Holder => "holder",
            ObjectiveId::McCormick => "mccormick",
            ObjectiveId::Schaffer2 => "schaffer2",
            ObjectiveId::Schaffer4 => "schaffer4",
            ObjectiveId::StyblinskiTang => "styblinski-tang",
            ObjectiveId::Sphere => "sphere",
            ObjectiveId::Himmelblau => "himmelblau",
            ObjectiveId::Booth => "booth",
            ObjectiveId::ThreeHumpCamel => "three-hump-camel",
        }
    }
}

impl std::str::FromStr for ObjectiveId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ObjectiveId::ALL
            .iter()
            .find(|id| id.as_str() == s)
            .copied()
            .ok_or_else(|| Error::parse(format!("unknown objective function `{s}`")))
    }
}

/// A normalized objective instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ObjectiveFunction {
    pub id: ObjectiveId,
}

impl ObjectiveFunction {
    pub fn new(id: ObjectiveId) -> Self {
        ObjectiveFunction { id }
    }

    pub fn spec(&self) -> &'static FunctionSpec {
        spec_for(self.id)
    }

    /// The normalized global minimizer (g == 0 there, up to 1e-12).
    pub fn minimizer(&self) -> [f64; 2] {
        self.spec().minimizer
    }
}

#[derive(Debug, Clone)]
pub struct FunctionSpec {
    pub id: ObjectiveId,
    /// Standard domain per axis: `[(lo1, hi1), (lo2, hi2)]`.
    pub domain: [(f64, f64); 2],
    /// Global minimizer in normalized coordinates.
    pub minimizer: [f64; 2],
    /// Global minimum value on the standard domain.
    pub min_value: f64,
}

static SPECS: [FunctionSpec; 19] = [
    FunctionSpec {
        id: ObjectiveId::Ackley,
        domain: [(-32.768, 32.768), (-32.768, 32.768)],
        minimizer: [0.0, 0.0],
        min_value: 0.0,
    },
    FunctionSpec {
        id: ObjectiveId::Beale,
        domain: [(-4.5, 4.5), (-4.5, 4.5)],
        minimizer: [0.6666666666666667, 0.11111111111111116],
        min_value: 0.0,
    },
    FunctionSpec {
        id: ObjectiveId::Levy13,
        domain: [(-10.0, 10.0), (-10.0, 10.0)],
        minimizer: [0.10000000000000009, 0.10000000000000009],
        min_value: 0.0,
    },
    FunctionSpec {
        id: ObjectiveId::Rastrigin,
        domain: [(-5.12, 5.12), (-5.12, 5.12)],
        minimizer: [0.0, 0.0],
        min_value: 0.0,
    },
    FunctionSpec {
        id: ObjectiveId::Rosenbrock,
        domain: [(-5.0, 10.0), (-5.0, 10.0)],
        minimizer: [-0.19999999999999996, -0.19999999999999996],
        min_value: 0.0,
    },
    FunctionSpec {
        id: ObjectiveId::GoldsteinPrice,
        domain: [(-2.0, 2.0), (-2.0, 2.0)],
        minimizer: [0.0, -0.5],
        min_value: 3.0,
    },
    FunctionSpec {
        id: ObjectiveId::Bukin6,
        domain: [(-15.0, -5.0), (-3.0, 3.0)],
        minimizer: [0.0, 0.33333333333333326],
        min_value: 0.0,
    },
    FunctionSpec {
        id: ObjectiveId::Matyas,
        domain: [(-10.0, 10.0), (-10.0, 10.0)],
        minimizer: [0.0, 0.0],
        min_value: 0.0,
    },
    FunctionSpec {
        id: ObjectiveId::CrossInTray,
        domain: [(-10.0, 10.0), (-10.0, 10.0)],
        minimizer: [0.13494066171539099, 0.13494066171539063],
        min_value: -2.062611870822737,
    },
    FunctionSpec {
        id: ObjectiveId::Eggholder,
        domain: [(-512.0, 512.0), (-512.0, 512.0)],
        minimizer: [1.0, 0.7895152443628083],
        min_value: -959.6406627208509,
    },
    FunctionSpec {
        id: ObjectiveId::Holder,
        domain: [(-10.0, 10.0), (-10.0, 10.0)],
        minimizer: [0.8055023475736562, 0.9664590019241275],
        min_value: -19.208502567886732,
    },
    FunctionSpec {
        id: ObjectiveId::McCormick,
        domain: [(-1.5, 4.0), (-3.0, 4.0)],
        minimizer: [-0.6535263822533083, -0.5849135860561708],
        min_value: -1.9132229549810364,
    },
    FunctionSpec {
        id: ObjectiveId::Schaffer2,
        domain: [(-100.0, 100.0), (-100.0, 100.0)],
        minimizer: [0.0, 0.0],
        min_value: 0.0,
    },
    FunctionSpec {
        id: ObjectiveId::Schaffer4,
        domain: [(-100.0, 100.0), (-100.0, 100.0)],
        minimizer: [0.0, 0.012531318314637385],
        min_value: 0.29257863203598056,
    },
    FunctionSpec {
        id: ObjectiveId::StyblinskiTang,
        domain: [(-5.0, 5.0), (-5.0, 5.0)],
        minimizer: [-0.5807068055542354, -0.5807068055542354],
        min_value: -78.33233140754282,
    },
    FunctionSpec {
        id: ObjectiveId::Sphere,
        domain: [(-5.12, 5.12), (-5.12, 5.12)],
        minimizer: [0.0, 0.0],
        min_value: 0.0,
    },
    FunctionSpec {
        id: ObjectiveId::Himmelblau,
        domain: [(-5.0, 5.0), (-5.0, 5.0)],
        minimizer: [0.6000000000000001, 0.3999999999999999],
        min_value: 0.0,
    },
    FunctionSpec {
        id: ObjectiveId::Booth,
        domain: [(-10.0, 10.0), (-10.0, 10.0)],
        minimizer: [0.10000000000000009, 0.30000000000000004],
        min_value: 0.0,
    },
    FunctionSpec {
        id: ObjectiveId::ThreeHumpCamel,
        domain: [(-5.0, 5.0), (-5.0, 5.0)],
        minimizer: [0.0, 0.0],
        min_value: 0.0,
    },
];

fn spec_for(id: ObjectiveId) -> &'static FunctionSpec {
    SPECS.iter().find(|s| s.id == id).unwrap()
}

fn to_domain(x: f64, lo: f64, hi: f64) -> f64 {
    lo + 0.5 * (x + 1.0) * (hi - lo)
}

fn raw_eval(id: ObjectiveId, x: f64, y: f64) -> f64 {
    match id {
        ObjectiveId::Ackley => {
            let s = 0.5 * (x * x + y * y);
            let c = 0.5 * ((2.0 * PI * x).cos() + (2.0 * PI * y).cos());
            -20.0 * (-0.2 * s.sqrt()).exp() - c.exp() + 20.0 + E
        }
        ObjectiveId::Beale => {
            let a = 1.5 - x + x * y;
            let b = 2.25 - x + x * y * y;
            let c = 2.625 - x + x * y * y * y;
            a * a + b * b + c * c
        }
        ObjectiveId::Levy13 => {
            let s3x = (3.0 * PI * x).sin();
            let s3y = (3.0 * PI * y).sin();
            let s2y = (2.0 * PI * y).sin();
            s3x * s3x
                + (x - 1.0) * (x - 1.0) * (1.0 + s3y * s3y)
                + (y - 1.0) * (y - 1.0) * (1.0 + s2y * s2y)
        }
        ObjectiveId::Rastrigin => {
            20.0 + (x * x - 10.0 * (2.0 * PI * x).cos()) + (y * y - 10.0 * (2.0 * PI * y).cos())
        }
        ObjectiveId::Rosenbrock => {
            let a = 1.0 - x;
            let b = y - x * x;
            a * a + 100.0 * b * b
        }
        ObjectiveId::GoldsteinPrice => {
            let t1 = x + y + 1.0;
            let p1 = 19.0 - 14.0 * x + 3.0 * x * x - 14.0 * y + 6.0 * x * y + 3.0 * y * y;
            let t2 = 2.0 * x - 3.0 * y;
            let p2 = 18.0 - 32.0 * x + 12.0 * x * x + 48.0 * y - 36.0 * x * y + 27.0 * y * y;
            (1.0 + t1 * t1 * p1) * (30.0 + t2 * t2 * p2)
        }
        ObjectiveId::Bukin6 => {
            100.0 * (y - 0.01 * x * x).abs().sqrt() + 0.01 * (x + 10.0).abs()
        }
        ObjectiveId::Matyas => 0.26 * (x * x + y * y) - 0.48 * x * y,
        ObjectiveId::CrossInTray => {
            let inner = (100.0 - (x * x + y * y).sqrt() / PI).abs();
            let t = (x.sin() * y.sin() * inner.exp()).abs() + 1.0;
            -0.0001 * t.powf(0.1)
        }
        ObjectiveId::Eggholder => {
            let a = y + 47.0;
            -a * (x / 2.0 + a).abs().sqrt().sin() - x * (x - a).abs().sqrt().sin()
        }
        ObjectiveId::Holder => {
            let inner = (1.0 - (x * x + y * y).sqrt() / PI).abs();
            -(x.sin() * y.cos() * inner.exp()).abs()
        }
        ObjectiveId::McCormick => (x + y).sin() + (x - y) * (x - y) - 1.5 * x + 2.5 * y + 1.0,
        ObjectiveId::Schaffer2 => {
            let d = x * x - y * y;
            let s = d.sin();
            let den = 1.0 + 0.001 * (x * x + y * y);
            0.5 + (s * s - 0.5) / (den * den)
        }
        ObjectiveId::Schaffer4 => {
            let d = (x * x - y * y).abs();
            let c = d.sin().cos();
            let den = 1.0 + 0.001 * (x * x + y * y);
            0.5 + (c * c - 0.5) / (den * den)
        }
        ObjectiveId::StyblinskiTang => {
            let tx = x * x * x * x - 16.0 * x * x + 5.0 * x;
            let ty = y * y * y * y - 16.0 * y * y + 5.0 * y;
            0.5 * (tx + ty)
        }
        ObjectiveId::Sphere => x * x + y * y,
        ObjectiveId::Himmelblau => {
            let a = x * x + y - 11.0;
            let b = x + y * y - 7.0;
            a * a + b * b
        }
        ObjectiveId::Booth => {
            let a = x + 2.0 * y - 7.0;
            let b = 2.0 * x + y - 5.0;
            a * a + b * b
        }
        ObjectiveId::ThreeHumpCamel => {
            2.0 * x * x - 1.05 * x * x * x * x + x * x * x * x * x * x / 6.0 + x * y + y * y
        }
    }
}

/// Normalized objective value `g(x) >= 0` at a point in [-1, 1]^2.
pub fn eval_objective(f: &ObjectiveFunction, x: &[f64; 2]) -> Result<f64> {
    for &xi in x {
        if !(DOMAIN_LO..=DOMAIN_HI).contains(&xi) {
            return Err(Error::invalid(format!(
                "point {xi} outside the normalized domain [-1, 1]"
            )));
        }
    }
    let spec = f.spec();
    let u = to_domain(x[0], spec.domain[0].0, spec.domain[0].1);
    let v = to_domain(x[1], spec.domain[1].0, spec.domain[1].1);
    Ok(raw_eval(f.id, u, v) - spec.min_value)
}

/// Fitness of a normalized objective value: `1 / max(g, 1e-20)`.
pub fn continuous_fitness(g_value: f64) -> Result<f64> {
    if g_value.is_nan() {
        return Err(Error::invalid("objective value is NaN"));
    }
    Ok(1.0 / g_value.max(1e-20))
}
