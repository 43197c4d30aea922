//! Domain descriptions: unions of balls and axis-aligned rectangles.
//!
//! A [`DomainSpec`] is an open, bounded union of primitives. Its signed
//! distance `φ(x) = min over primitives` is a membership function only:
//! `φ(x) < 0` iff `x` is interior to the union. `|φ|` underestimates the
//! distance to the union's boundary wherever a primitive boundary is swallowed
//! by the union (the tube-bulb junction of the dumbbell), so the grid distance
//! field is never derived from it; see `grid::GridDomain`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Extent {
    pub fn union(self, other: Extent) -> Extent {
        Extent {
            xmin: self.xmin.min(other.xmin),
            xmax: self.xmax.max(other.xmax),
            ymin: self.ymin.min(other.ymin),
            ymax: self.ymax.max(other.ymax),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.xmin && x <= self.xmax && y >= self.ymin && y <= self.ymax
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }
}

/// A single solid: open ball or open axis-aligned rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    Ball {
        center: [f64; 2],
        radius: f64,
    },
    Rect {
        xmin: f64,
        xmax: f64,
        ymin: f64,
        ymax: f64,
    },
}

impl Primitive {
    pub fn ball(cx: f64, cy: f64, radius: f64) -> Primitive {
        Primitive::Ball {
            center: [cx, cy],
            radius,
        }
    }

    pub fn rect(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Primitive {
        Primitive::Rect {
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Primitive::Ball { radius, center } => {
                if !(radius > 0.0) || !radius.is_finite() {
                    return Err(Error::invalid("radius", format!("must be > 0, got {radius}")));
                }
                if !center[0].is_finite() || !center[1].is_finite() {
                    return Err(Error::invalid("center", "must be finite"));
                }
            }
            Primitive::Rect {
                xmin,
                xmax,
                ymin,
                ymax,
            } => {
                if !(xmin < xmax) || !(ymin < ymax) {
                    return Err(Error::invalid(
                        "rect",
                        format!("needs xmin<xmax and ymin<ymax, got [{xmin},{xmax}]x[{ymin},{ymax}]"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Signed distance to this primitive; negative strictly inside.
    pub fn signed_distance(&self, x: f64, y: f64) -> f64 {
        match *self {
            Primitive::Ball { center, radius } => {
                let dx = x - center[0];
                let dy = y - center[1];
                (dx * dx + dy * dy).sqrt() - radius
            }
            Primitive::Rect {
                xmin,
                xmax,
                ymin,
                ymax,
            } => {
                let dx = (xmin - x).max(x - xmax);
                let dy = (ymin - y).max(y - ymax);
                if dx <= 0.0 && dy <= 0.0 {
                    dx.max(dy)
                } else {
                    let px = dx.max(0.0);
                    let py = dy.max(0.0);
                    (px * px + py * py).sqrt()
                }
            }
        }
    }

    pub fn bbox(&self) -> Extent {
        match *self {
            Primitive::Ball { center, radius } => Extent {
                xmin: center[0] - radius,
                xmax: center[0] + radius,
                ymin: center[1] - radius,
                ymax: center[1] + radius,
            },
            Primitive::Rect {
                xmin,
                xmax,
                ymin,
                ymax,
            } => Extent {
                xmin,
                xmax,
                ymin,
                ymax,
            },
        }
    }
}

/// An open bounded domain given as a union of primitives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub name: String,
    pub primitives: Vec<Primitive>,
}

impl DomainSpec {
    pub fn new(name: impl Into<String>, primitives: Vec<Primitive>) -> Result<DomainSpec> {
        if primitives.is_empty() {
            return Err(Error::invalid("primitives", "must be nonempty"));
        }
        for p in &primitives {
            p.validate()?;
        }
        Ok(DomainSpec {
            name: name.into(),
            primitives,
        })
    }

    /// Membership function: min over primitive signed distances.
    pub fn signed_distance(&self, x: f64, y: f64) -> f64 {
        let mut m = f64::INFINITY;
        for p in &self.primitives {
            m = m.min(p.signed_distance(x, y));
        }
        m
    }

    /// True iff the point is interior to the union.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.signed_distance(x, y) < 0.0
    }

    pub fn bbox(&self) -> Extent {
        let mut it = self.primitives.iter();
        let first = it.next().expect("nonempty by construction").bbox();
        it.fold(first, |acc, p| acc.union(p.bbox()))
    }

    /// Dumbbell `B_{1-ε}((-5,0)) ∪ (-5,5)×(-δ,δ) ∪ B_1((5,0))`.
    /// `epsilon = 0` gives the symmetric dumbbell.
    pub fn dumbbell(delta: f64, epsilon: f64) -> Result<DomainSpec> {
        check_delta(delta)?;
        check_epsilon(epsilon)?;
        DomainSpec::new(
            if epsilon == 0.0 {
                format!("dumbbell(delta={delta})")
            } else {
                format!("dumbbell(delta={delta},epsilon={epsilon})")
            },
            vec![
                Primitive::ball(-5.0, 0.0, 1.0 - epsilon),
                Primitive::rect(-5.0, 5.0, -delta, delta),
                Primitive::ball(5.0, 0.0, 1.0),
            ],
        )
    }

    /// Left half of the dumbbell: `B_{1-ε}((-5,0)) ∪ (-5,4)×(-δ,δ)`.
    pub fn half_dumbbell(delta: f64, epsilon: f64) -> Result<DomainSpec> {
        check_delta(delta)?;
        check_epsilon(epsilon)?;
        DomainSpec::new(
            format!("half-dumbbell(delta={delta},epsilon={epsilon})"),
            vec![
                Primitive::ball(-5.0, 0.0, 1.0 - epsilon),
                Primitive::rect(-5.0, 4.0, -delta, delta),
            ],
        )
    }

    /// Two disjoint balls of radii 1 and 1-ε at (±5, 0).
    pub fn disjoint_balls(epsilon: f64) -> Result<DomainSpec> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid(
                "epsilon",
                format!("must lie in (0,1), got {epsilon}"),
            ));
        }
        DomainSpec::new(
            format!("disjoint-balls(epsilon={epsilon})"),
            vec![
                Primitive::ball(-5.0, 0.0, 1.0 - epsilon),
                Primitive::ball(5.0, 0.0, 1.0),
            ],
        )
    }

    /// Stadium control domain: `B_1((-1,0)) ∪ (-1,1)×(-1,1) ∪ B_1((1,0))`.
    pub fn stadium() -> DomainSpec {
        DomainSpec::new(
            "stadium",
            vec![
                Primitive::ball(-1.0, 0.0, 1.0),
                Primitive::rect(-1.0, 1.0, -1.0, 1.0),
                Primitive::ball(1.0, 0.0, 1.0),
            ],
        )
        .expect("valid by construction")
    }

    /// Ball of given radius centered at the origin.
    pub fn ball(radius: f64) -> Result<DomainSpec> {
        DomainSpec::new(format!("ball(r={radius})"), vec![Primitive::ball(0.0, 0.0, radius)])
    }

    /// Unit square (0,1)².
    pub fn unit_square() -> DomainSpec {
        DomainSpec::new("unit-square", vec![Primitive::rect(0.0, 1.0, 0.0, 1.0)])
            .expect("valid by construction")
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "delta",
            format!("must lie in (0,1), got {delta}"),
        ))
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if (0.0..1.0).contains(&epsilon) {
        Ok(())
    } else {
        Err(Error::invalid(
            "epsilon",
            format!("must lie in [0,1), got {epsilon}"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dumbbell_layout() {
        let d0 = DomainSpec::dumbbell(0.1, 0.0).unwrap();
        assert_eq!(d0.primitives.len(), 3);
        assert_eq!(d0.primitives[0], Primitive::ball(-5.0, 0.0, 1.0));
        assert_eq!(d0.primitives[2], Primitive::ball(5.0, 0.0, 1.0));

        let de = DomainSpec::dumbbell(0.1, 0.2).unwrap();
        assert_eq!(de.primitives[0], Primitive::ball(-5.0, 0.0, 0.8));
        assert_eq!(de.primitives[2], Primitive::ball(5.0, 0.0, 1.0));
    }

    #[test]
    fn dumbbell_rejects_degenerate_parameters() {
        assert!(DomainSpec::dumbbell(0.1, 1.0).is_err());
        assert!(DomainSpec::dumbbell(0.0, 0.0).is_err());
        assert!(DomainSpec::dumbbell(1.0, 0.0).is_err());
        assert!(DomainSpec::dumbbell(0.1, -0.1).is_err());
    }

    #[test]
    fn contains_examples() {
        let d0 = DomainSpec::dumbbell(0.1, 0.0).unwrap();
        assert!(d0.contains(5.0, 0.0));
        assert!(d0.contains(0.0, 0.05));
        assert!(!d0.contains(0.0, 0.2));
        // bulb surface is not interior (open set)
        assert!(!d0.contains(6.0, 0.0));
        assert!(d0.contains(5.9, 0.0));
    }

    #[test]
    fn rect_signed_distance() {
        let r = Primitive::rect(-1.0, 1.0, -0.5, 0.5);
        assert!(r.signed_distance(0.0, 0.0) < 0.0);
        assert_eq!(r.signed_distance(0.0, 0.5), 0.0);
        assert!((r.signed_distance(2.0, 0.0) - 1.0).abs() < 1e-15);
        // outside corner: Euclidean distance
        let d = r.signed_distance(2.0, 1.5);
        assert!((d - (2.0f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn union_membership_is_min() {
        let spec = DomainSpec::disjoint_balls(0.2).unwrap();
        assert!(spec.contains(5.0, 0.0));
        assert!(spec.contains(-5.0, 0.0));
        assert!(!spec.contains(0.0, 0.0));
        let b = spec.bbox();
        assert_eq!(b.xmin, -5.8);
        assert_eq!(b.xmax, 6.0);
    }

    #[test]
    fn mirror_symmetry_is_exact_in_fp() {
        // The symmetric dumbbell's membership function must be bitwise
        // mirror-symmetric; grid equivariance depends on it.
        let d0 = DomainSpec::dumbbell(0.05, 0.0).unwrap();
        for &(x, y) in &[(0.3, 0.01), (4.9921875, 0.0078125), (1.0e-3, 0.049), (5.5, 0.25)] {
            let a = d0.signed_distance(x, y);
            let b = d0.signed_distance(-x, y);
            assert_eq!(a.to_bits(), b.to_bits(), "asymmetric at ({x},{y})");
        }
    }
}
