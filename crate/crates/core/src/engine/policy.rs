use std::fmt;
use std::str::FromStr;

/// Connectivity pattern of a link.
///
/// Section neurons are laid out class-major: neuron `j` of a section with
/// `M * D` neurons belongs to microcolumn `j / D` and class `j % D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Policy {
    /// Every pre to every post.
    Full,
    /// Identity for equal sizes; otherwise pre and post are matched by class.
    Aligned,
    /// Every pair, except self-connections when a section links to itself.
    AllToAllSections,
    /// Pre class `c` to every post whose class differs from `c`.
    Exclusive,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Full => "all-to-all",
            Policy::Aligned => "aligned",
            Policy::AllToAllSections => "all-to-all-sections",
            Policy::Exclusive => "exclusive",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "all-to-all" | "full" => Ok(Policy::Full),
            "aligned" => Ok(Policy::Aligned),
            "all-to-all-sections" => Ok(Policy::AllToAllSections),
            "exclusive" => Ok(Policy::Exclusive),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{policy} link cannot connect {from_size} to {to_size} neurons with class dimension {class_dim}")]
pub struct PolicyError {
    pub policy: Policy,
    pub from_size: usize,
    pub to_size: usize,
    pub class_dim: usize,
}

/// Whether `(pre, post)` belongs to the policy's connection set.
pub fn connects(policy: Policy, pre: usize, post: usize, class_dim: usize, same_section: bool) -> bool {
    match policy {
        Policy::Full => true,
        Policy::AllToAllSections => !(same_section && pre == post),
        Policy::Aligned => pre % class_dim == post % class_dim,
        Policy::Exclusive => pre % class_dim != post % class_dim,
    }
}

/// Expands a policy into `(pre, post)` pairs, pre-major.
///
/// `same_section` marks a link from a section onto itself.
pub fn resolve_policy(
    policy: Policy,
    from_size: usize,
    to_size: usize,
    class_dim: usize,
    same_section: bool,
) -> Result<Vec<(u32, u32)>, PolicyError> {
    let err = || PolicyError { policy, from_size, to_size, class_dim };
    let pairs = |pred: &dyn Fn(usize, usize) -> bool| -> Vec<(u32, u32)> {
        (0..from_size)
            .flat_map(|i| (0..to_size).filter(move |&j| pred(i, j)).map(move |j| (i as u32, j as u32)))
            .collect()
    };
    match policy {
        Policy::Full => Ok(pairs(&|_, _| true)),
        Policy::AllToAllSections => Ok(pairs(&|i, j| !(same_section && i == j))),
        Policy::Aligned => {
            if from_size == to_size {
                Ok((0..from_size as u32).map(|i| (i, i)).collect())
            } else if class_dim > 0
                && (to_size == class_dim && from_size.is_multiple_of(class_dim)
                    || from_size == class_dim && to_size.is_multiple_of(class_dim))
            {
                Ok(pairs(&|i, j| i % class_dim == j % class_dim))
            } else {
                Err(err())
            }
        }
        Policy::Exclusive => {
            if class_dim == 0 || !from_size.is_multiple_of(class_dim) || !to_size.is_multiple_of(class_dim) {
                return Err(err());
            }
            Ok(pairs(&|i, j| i % class_dim != j % class_dim))
        }
    }
}
