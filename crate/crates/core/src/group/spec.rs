use std::fmt;
use std::str::FromStr;

use super::GroupError;

/// A compact matrix Lie group built from SO(2) and SO(3) factors.
///
/// Products are realized block-diagonally in GL(n). `Torus(t)` behaves
/// exactly like a `Product` of `t` copies of `So2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GroupSpec {
    So2,
    So3,
    Torus(usize),
    Product(Vec<GroupSpec>),
}

/// Atomic factor of a (possibly product) group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Factor {
    So2,
    So3,
}

impl Factor {
    pub const fn block_dim(self) -> usize {
        match self {
            Factor::So2 => 2,
            Factor::So3 => 3,
        }
    }

    pub const fn algebra_dim(self) -> usize {
        match self {
            Factor::So2 => 1,
            Factor::So3 => 3,
        }
    }

    /// Angle for SO(2); unit axis followed by angle for SO(3).
    pub const fn param_dim(self) -> usize {
        match self {
            Factor::So2 => 1,
            Factor::So3 => 4,
        }
    }
}

/// Where a factor lives inside the flattened matrix, algebra and params.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FactorSlot {
    pub factor: Factor,
    /// First row/column of the diagonal block.
    pub block: usize,
    pub algebra: usize,
    pub param: usize,
}

impl GroupSpec {
    pub fn factors(&self) -> Vec<Factor> {
        let mut out = Vec::new();
        self.push_factors(&mut out);
        out
    }

    fn push_factors(&self, out: &mut Vec<Factor>) {
        match self {
            GroupSpec::So2 => out.push(Factor::So2),
            GroupSpec::So3 => out.push(Factor::So3),
            GroupSpec::Torus(t) => out.extend(std::iter::repeat_n(Factor::So2, *t)),
            GroupSpec::Product(parts) => parts.iter().for_each(|p| p.push_factors(out)),
        }
    }

    pub fn slots(&self) -> Vec<FactorSlot> {
        let mut slots = Vec::new();
        let (mut block, mut algebra, mut param) = (0, 0, 0);
        for factor in self.factors() {
            slots.push(FactorSlot {
                factor,
                block,
                algebra,
                param,
            });
            block += factor.block_dim();
            algebra += factor.algebra_dim();
            param += factor.param_dim();
        }
        slots
    }

    /// Dimension n of the realization in GL(n).
    pub fn matrix_dim(&self) -> usize {
        self.factors().iter().map(|f| f.block_dim()).sum()
    }

    pub fn algebra_dim(&self) -> usize {
        self.factors().iter().map(|f| f.algebra_dim()).sum()
    }

    pub fn param_dim(&self) -> usize {
        self.factors().iter().map(|f| f.param_dim()).sum()
    }

    /// Number of SO(2) factors when the group is a torus SO(2)^T.
    pub fn torus_rank(&self) -> Option<usize> {
        let factors = self.factors();
        (!factors.is_empty() && factors.iter().all(|f| *f == Factor::So2)).then_some(factors.len())
    }

    /// Structural equality up to the Torus/Product spelling.
    pub fn same_group(&self, other: &GroupSpec) -> bool {
        self == other || self.factors() == other.factors()
    }

    pub(crate) fn check_same(&self, other: &GroupSpec) -> Result<(), GroupError> {
        if self.same_group(other) {
            Ok(())
        } else {
            Err(GroupError::SpecMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }

    pub(crate) fn validate(&self) -> Result<(), GroupError> {
        match self {
            GroupSpec::Torus(0) => Err(GroupError::EmptyGroup),
            GroupSpec::Product(parts) if parts.is_empty() => Err(GroupError::EmptyGroup),
            GroupSpec::Product(parts) => parts.iter().try_for_each(|p| p.validate()),
            _ => Ok(()),
        }
    }
}

/// Tags: `so2`, `so3`, `torus<T>`, `prod(<tag>,<tag>,...)`.
impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::So2 => f.write_str("so2"),
            GroupSpec::So3 => f.write_str("so3"),
            GroupSpec::Torus(t) => write!(f, "torus{t}"),
            GroupSpec::Product(parts) => {
                f.write_str("prod(")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for GroupSpec {
    type Err = GroupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GroupError::BadTag(s.to_string());
        let s = s.trim();
        let spec = match s {
            "so2" => GroupSpec::So2,
            "so3" => GroupSpec::So3,
            _ if s.starts_with("torus") => GroupSpec::Torus(s[5..].parse().map_err(|_| bad())?),
            _ if s.starts_with("prod(") && s.ends_with(')') => {
                let inner = &s[5..s.len() - 1];
                let mut parts = Vec::new();
                let (mut depth, mut start) = (0usize, 0usize);
                for (i, c) in inner.char_indices() {
                    match c {
                        '(' => depth += 1,
                        ')' => depth = depth.checked_sub(1).ok_or_else(bad)?,
                        ',' if depth == 0 => {
                            parts.push(inner[start..i].parse()?);
                            start = i + 1;
                        }
                        _ => {}
                    }
                }
                parts.push(inner[start..].parse()?);
                GroupSpec::Product(parts)
            }
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(GroupSpec::So2.matrix_dim(), 2);
        assert_eq!(GroupSpec::So3.matrix_dim(), 3);
        assert_eq!(GroupSpec::Torus(3).matrix_dim(), 6);
        assert_eq!(GroupSpec::Torus(3).algebra_dim(), 3);
        let p = GroupSpec::Product(vec![GroupSpec::So3, GroupSpec::So2]);
        assert_eq!(p.matrix_dim(), 5);
        assert_eq!(p.algebra_dim(), 4);
        assert_eq!(p.param_dim(), 5);
        assert_eq!(p.slots()[1].block, 3);
    }

    #[test]
    fn torus_is_product_of_circles() {
        let t = GroupSpec::Torus(2);
        let p = GroupSpec::Product(vec![GroupSpec::So2, GroupSpec::So2]);
        assert!(t.same_group(&p));
        assert_eq!(t.slots(), p.slots());
        assert!(!t.same_group(&GroupSpec::So2));
    }

    #[test]
    fn tags_round_trip() {
        for tag in ["so2", "so3", "torus2", "prod(so3,torus2,prod(so2,so3))"] {
            let spec: GroupSpec = tag.parse().unwrap();
            assert_eq!(spec.to_string(), tag);
        }
        assert!("torus0".parse::<GroupSpec>().is_err());
        assert!("se3".parse::<GroupSpec>().is_err());
    }
}
