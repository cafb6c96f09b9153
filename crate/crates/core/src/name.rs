use std::fmt;
use std::sync::Arc;

/// Hierarchical identifier: `nat.rec` is the two-segment name `["nat", "rec"]`.
///
/// Cheap to clone and compare; segments are shared behind an `Arc`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name(Arc<Vec<String>>);

impl Name {
    pub fn atom(s: impl Into<String>) -> Name {
        Name(Arc::new(vec![s.into()]))
    }

    /// Parse a dotted name: `from_dotted("nat.rec")`.
    pub fn from_dotted(s: &str) -> Name {
        Name(Arc::new(s.split('.').map(|p| p.to_string()).collect()))
    }

    /// `self` extended with one more segment: `nat.child("rec")` is `nat.rec`.
    pub fn child(&self, seg: impl Into<String>) -> Name {
        let mut v = (*self.0).clone();
        v.push(seg.into());
        Name(Arc::new(v))
    }

    /// `ns.join(other)` prefixes every segment of `other` with `ns`.
    pub fn join(&self, other: &Name) -> Name {
        let mut v = (*self.0).clone();
        v.extend(other.0.iter().cloned());
        Name(Arc::new(v))
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    /// The name with `prefix` removed, if `self` starts with it.
    pub fn strip_prefix(&self, prefix: &Name) -> Option<Name> {
        let p = prefix.segments();
        if self.0.len() > p.len() && self.0[..p.len()] == *p {
            Name::try_from_segments(self.0[p.len()..].to_vec())
        } else {
            None
        }
    }

    fn try_from_segments(v: Vec<String>) -> Option<Name> {
        if v.is_empty() {
            None
        } else {
            Some(Name(Arc::new(v)))
        }
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.join("."))
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Name {
        Name::from_dotted(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_roundtrip() {
        let n = Name::from_dotted("nat.rec");
        assert_eq!(n.to_string(), "nat.rec");
        assert_eq!(n.segments().len(), 2);
        assert_eq!(Name::atom("nat").child("rec"), n);
    }

    #[test]
    fn strip_prefix_works() {
        let full = Name::from_dotted("list.append");
        let ns = Name::atom("list");
        assert_eq!(full.strip_prefix(&ns).unwrap(), Name::atom("append"));
        assert!(ns.strip_prefix(&full).is_none());
        assert!(full.strip_prefix(&full).is_none());
    }
}
