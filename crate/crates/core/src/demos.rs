//! Built-in example problems.
//!
//! | name            | operator                               | b | certified |
//! |-----------------|----------------------------------------|---|-----------|
//! | `kannan-affine` | `T x = 1 - x` on the line              | 1 | yes       |
//! | `lebesgue`      | `T f = g - 3 f`, `g = 1`, 4 atoms of mass 1/4 | 3 | yes |
//! | `vip-ball`      | `P_C(x - 2 S x)`, `S x = ((1,0) + x) / 2`, `C` the unit disc | 0 | yes |
//! | `cosine`        | `T x = cos x` on the line              | 0 | no        |

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::operators::Operator;
use crate::space::{Vector, WeightedSpace};
use crate::vip::{vip_operator, ConvexSet, VipProblem};

/// Number of atoms of the discretized measure used by `lebesgue`.
pub const LEBESGUE_ATOMS: usize = 4;

/// Step size of the `vip-ball` problem.
pub const VIP_BALL_GAMMA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Demo {
    KannanAffine,
    Lebesgue,
    VipBall,
    Cosine,
}

impl Demo {
    pub const ALL: [Demo; 4] = [Demo::KannanAffine, Demo::Lebesgue, Demo::VipBall, Demo::Cosine];

    pub fn name(self) -> &'static str {
        match self {
            Demo::KannanAffine => "kannan-affine",
            Demo::Lebesgue => "lebesgue",
            Demo::VipBall => "vip-ball",
            Demo::Cosine => "cosine",
        }
    }

    pub fn space(self) -> WeightedSpace {
        match self {
            Demo::KannanAffine | Demo::Cosine => WeightedSpace::euclidean(1),
            Demo::Lebesgue => WeightedSpace::uniform_measure(LEBESGUE_ATOMS, 1.0),
            Demo::VipBall => WeightedSpace::euclidean(2),
        }
        .expect("demo spaces are valid")
    }

    pub fn dim(self) -> usize {
        self.space().dim()
    }

    /// Enrichment parameter the demo is solved with.
    pub fn b(self) -> f64 {
        match self {
            Demo::KannanAffine => 1.0,
            Demo::Lebesgue => 3.0,
            Demo::VipBall | Demo::Cosine => 0.0,
        }
    }

    /// Interpolation exponent of the demo's parameter triple.
    pub fn alpha(self) -> f64 {
        0.5
    }

    /// Contraction constant used for error bounds; `None` for uncertified
    /// demos.
    pub fn a(self) -> Option<f64> {
        self.certified().then_some(0.5)
    }

    pub fn certified(self) -> bool {
        !matches!(self, Demo::Cosine)
    }

    pub fn x0(self) -> Vector {
        match self {
            Demo::KannanAffine => Vector::new(vec![0.5]),
            Demo::Cosine => Vector::new(vec![1.0]),
            d => Vector::zeros(d.dim()),
        }
    }

    /// Box from which multistart points for the periodic-point check are drawn.
    pub fn start_box(self) -> (Vector, Vector) {
        let dim = self.dim();
        match self {
            Demo::Cosine => (Vector::new(vec![0.0]), Vector::new(vec![std::f64::consts::PI])),
            _ => (Vector::constant(dim, -10.0), Vector::constant(dim, 10.0)),
        }
    }

    pub fn vip_problem(self) -> Option<VipProblem> {
        match self {
            Demo::VipBall => {
                let g = VIP_BALL_GAMMA;
                let s = Operator::affine(self.space(), vec![vec![1.0 / g, 0.0], vec![0.0, 1.0 / g]], Vector::new(vec![1.0 / g, 0.0]))
                    .expect("well formed");
                Some(VipProblem::new(s, g, ConvexSet::unit_ball(2)).expect("well formed"))
            }
            _ => None,
        }
    }

    pub fn operator(self) -> Operator {
        let space = self.space();
        let dim = space.dim();
        let diag = |v: f64| (0..dim).map(|i| (0..dim).map(|j| if i == j { v } else { 0.0 }).collect()).collect();
        match self {
            Demo::KannanAffine => Operator::affine(space, diag(-1.0), Vector::new(vec![1.0])),
            Demo::Lebesgue => Operator::affine(space, diag(-3.0), Vector::constant(dim, 1.0)),
            Demo::VipBall => vip_operator(&self.vip_problem().expect("vip demo")),
            Demo::Cosine => Ok(Operator::custom(space, "cos", |x| vec![x[0].cos()])),
        }
        .expect("demo operators are well formed")
    }
}

impl fmt::Display for Demo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Demo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Demo::ALL.into_iter().find(|d| d.name() == s).ok_or_else(|| {
            let names: Vec<_> = Demo::ALL.iter().map(|d| d.name()).collect();
            Error::param(format!("unknown demo `{s}` (expected one of {})", names.join(", ")))
        })
    }
}
