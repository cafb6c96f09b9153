use crate::name::Name;
use std::fmt;
use std::sync::Arc;

/// Universe level metavariable id. Rendered `?u3`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct LevelMetaId(pub u64);

impl fmt::Display for LevelMetaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?u{}", self.0)
    }
}

/// Universe level expressions. No `imax`: pi-formation instead collapses to
/// zero when the codomain sort is literally zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Level {
    Zero,
    Succ(Arc<Level>),
    Max(Arc<Level>, Arc<Level>),
    Param(Name),
    Meta(LevelMetaId),
}

/// A normalized level is `max` over atoms, each shifted by a constant offset.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum LevelAtom {
    Zero,
    Param(Name),
    Meta(LevelMetaId),
}

impl Level {
    pub fn succ(l: Level) -> Level {
        Level::Succ(Arc::new(l))
    }

    pub fn max(a: Level, b: Level) -> Level {
        Level::Max(Arc::new(a), Arc::new(b))
    }

    pub fn of_nat(n: u32) -> Level {
        let mut l = Level::Zero;
        for _ in 0..n {
            l = Level::succ(l);
        }
        l
    }

    /// Adds `k` to every atom's offset.
    pub fn shifted(self, k: u32) -> Level {
        let mut l = self;
        for _ in 0..k {
            l = Level::succ(l);
        }
        l
    }

    /// Decompose into `(atom, offset)` pairs whose pointwise max is the level.
    fn atoms_into(&self, shift: u32, out: &mut Vec<(LevelAtom, u32)>) {
        match self {
            Level::Zero => out.push((LevelAtom::Zero, shift)),
            Level::Succ(l) => l.atoms_into(shift + 1, out),
            Level::Max(a, b) => {
                a.atoms_into(shift, out);
                b.atoms_into(shift, out);
            }
            Level::Param(n) => out.push((LevelAtom::Param(n.clone()), shift)),
            Level::Meta(m) => out.push((LevelAtom::Meta(*m), shift)),
        }
    }

    pub fn atoms(&self) -> Vec<(LevelAtom, u32)> {
        let mut raw = Vec::new();
        self.atoms_into(0, &mut raw);
        // Keep the largest offset per atom.
        raw.sort();
        raw.dedup_by(|later, earlier| {
            // After sorting, equal atoms are adjacent with ascending offsets.
            later.0 == earlier.0 && {
                earlier.1 = earlier.1.max(later.1);
                true
            }
        });
        // `zero + k` is dominated by any atom with offset >= k.
        let max_other = raw
            .iter()
            .filter(|(a, _)| *a != LevelAtom::Zero)
            .map(|(_, k)| *k)
            .max();
        if let Some(mo) = max_other {
            raw.retain(|(a, k)| *a != LevelAtom::Zero || *k > mo);
        }
        raw
    }

    fn from_atoms(atoms: &[(LevelAtom, u32)]) -> Level {
        assert!(!atoms.is_empty());
        let one = |(a, k): &(LevelAtom, u32)| -> Level {
            let base = match a {
                LevelAtom::Zero => Level::Zero,
                LevelAtom::Param(n) => Level::Param(n.clone()),
                LevelAtom::Meta(m) => Level::Meta(*m),
            };
            base.shifted(*k)
        };
        let mut it = atoms.iter().rev();
        let mut acc = one(it.next().unwrap());
        for a in it {
            acc = Level::max(one(a), acc);
        }
        acc
    }

    /// Canonical form: `max` flattened, operands sorted and deduplicated,
    /// `succ` distributed onto atoms. Idempotent.
    pub fn normalize(&self) -> Level {
        Level::from_atoms(&self.atoms())
    }

    /// Definitional equality of levels (no cumulativity: plain equality).
    pub fn defeq(&self, other: &Level) -> bool {
        self.atoms() == other.atoms()
    }

    /// Sound approximation of `self ≤ other` for all atom valuations: every
    /// atom on the left must be dominated on the right. Used for universe
    /// admissibility checks; `false` may mean "unknown".
    pub fn le(&self, other: &Level) -> bool {
        let ra = other.atoms();
        self.atoms().iter().all(|(a, k)| match a {
            LevelAtom::Zero => ra.iter().any(|(_, k2)| k2 >= k),
            _ => ra.iter().any(|(a2, k2)| a2 == a && k2 >= k),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.atoms() == [(LevelAtom::Zero, 0)]
    }

    pub fn has_meta(&self) -> bool {
        match self {
            Level::Zero | Level::Param(_) => false,
            Level::Meta(_) => true,
            Level::Succ(l) => l.has_meta(),
            Level::Max(a, b) => a.has_meta() || b.has_meta(),
        }
    }

    pub fn collect_metas(&self, out: &mut Vec<LevelMetaId>) {
        match self {
            Level::Zero | Level::Param(_) => {}
            Level::Meta(m) => {
                if !out.contains(m) {
                    out.push(*m);
                }
            }
            Level::Succ(l) => l.collect_metas(out),
            Level::Max(a, b) => {
                a.collect_metas(out);
                b.collect_metas(out);
            }
        }
    }

    pub fn occurs_meta(&self, id: LevelMetaId) -> bool {
        match self {
            Level::Zero | Level::Param(_) => false,
            Level::Meta(m) => *m == id,
            Level::Succ(l) => l.occurs_meta(id),
            Level::Max(a, b) => a.occurs_meta(id) || b.occurs_meta(id),
        }
    }

    pub fn subst_meta(&self, id: LevelMetaId, repl: &Level) -> Level {
        match self {
            Level::Zero | Level::Param(_) => self.clone(),
            Level::Meta(m) if *m == id => repl.clone(),
            Level::Meta(_) => self.clone(),
            Level::Succ(l) => Level::succ(l.subst_meta(id, repl)),
            Level::Max(a, b) => Level::max(a.subst_meta(id, repl), b.subst_meta(id, repl)),
        }
    }

    pub fn subst_params(&self, map: &[(Name, Level)]) -> Level {
        match self {
            Level::Zero | Level::Meta(_) => self.clone(),
            Level::Param(n) => map
                .iter()
                .find(|(p, _)| p == n)
                .map(|(_, l)| l.clone())
                .unwrap_or_else(|| self.clone()),
            Level::Succ(l) => Level::succ(l.subst_params(map)),
            Level::Max(a, b) => Level::max(a.subst_params(map), b.subst_params(map)),
        }
    }

    /// As a numeral, if the level is a ground natural number.
    pub fn to_nat(&self) -> Option<u32> {
        match self.atoms().as_slice() {
            [(LevelAtom::Zero, k)] => Some(*k),
            _ => None,
        }
    }
}

/// Outcome of trying to decide `lhs ≐ rhs` on levels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LevelEq {
    True,
    False,
    /// Solvable right now by the pattern assignment `meta := level`.
    Assign(LevelMetaId, Level),
    /// Metas present in a non-pattern position; not decidable yet.
    Stuck,
}

/// Decide a level equation as far as the pattern fragment allows.
pub fn solve_level_eq(lhs: &Level, rhs: &Level) -> LevelEq {
    let a = lhs.atoms();
    let b = rhs.atoms();
    if a == b {
        return LevelEq::True;
    }
    if let Some(r) = try_pattern(&a, rhs, &b) {
        return r;
    }
    if let Some(r) = try_pattern(&b, lhs, &a) {
        return r;
    }
    if !lhs.has_meta() && !rhs.has_meta() {
        return LevelEq::False;
    }
    LevelEq::Stuck
}

/// `?u + k ≐ other`: assign when every atom of `other` can absorb `-k`.
fn try_pattern(
    side: &[(LevelAtom, u32)],
    other: &Level,
    other_atoms: &[(LevelAtom, u32)],
) -> Option<LevelEq> {
    let (m, k) = match side {
        [(LevelAtom::Meta(m), k)] => (*m, *k),
        _ => return None,
    };
    if other.occurs_meta(m) {
        return None;
    }
    if other_atoms.iter().any(|(_, off)| *off < k) {
        return None;
    }
    let lowered: Vec<(LevelAtom, u32)> = other_atoms
        .iter()
        .map(|(a, off)| (a.clone(), off - k))
        .collect();
    Some(LevelEq::Assign(m, Level::from_atoms(&lowered)))
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = self.to_nat() {
            return write!(f, "{n}");
        }
        match self {
            Level::Zero => write!(f, "0"),
            Level::Succ(l) => {
                // Collapse ground prefixes: p+2 rather than succ (succ p).
                let mut k = 1u32;
                let mut base = l;
                while let Level::Succ(inner) = &**base {
                    k += 1;
                    base = inner;
                }
                write!(f, "{base}+{k}")
            }
            Level::Max(a, b) => write!(f, "(max {a} {b})"),
            Level::Param(n) => write!(f, "{n}"),
            Level::Meta(m) => write!(f, "{m}"),
        }
    }
}

impl fmt::Debug for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Level {
        Level::Param(Name::atom(s))
    }

    #[test]
    fn normalize_flattens_sorts_dedups() {
        let l = Level::max(Level::max(p("b"), p("a")), Level::max(p("a"), Level::Zero));
        let n = l.normalize();
        assert_eq!(n, Level::max(p("a"), p("b")));
        assert_eq!(n.normalize(), n, "normalization is idempotent");
    }

    #[test]
    fn succ_distributes_over_max() {
        let l = Level::succ(Level::max(p("a"), p("b")));
        assert_eq!(
            l.normalize(),
            Level::max(Level::succ(p("a")), Level::succ(p("b")))
        );
    }

    #[test]
    fn zero_atom_dominated() {
        // max(a, 0) = a, but max(a, 1) keeps both (a may be 0).
        assert_eq!(Level::max(p("a"), Level::Zero).normalize(), p("a"));
        let kept = Level::max(p("a"), Level::of_nat(1)).normalize();
        assert_eq!(kept, Level::max(Level::of_nat(1), p("a")), "zero atoms sort first");
        assert!(kept.defeq(&Level::max(p("a"), Level::of_nat(1))));
    }

    #[test]
    fn same_atom_keeps_larger_offset() {
        let l = Level::max(Level::succ(Level::succ(p("a"))), p("a"));
        assert_eq!(l.normalize(), Level::succ(Level::succ(p("a"))));
    }

    #[test]
    fn level_eq_solving() {
        let u = LevelMetaId(7);
        assert_eq!(
            solve_level_eq(&Level::Meta(u), &Level::of_nat(2)),
            LevelEq::Assign(u, Level::of_nat(2))
        );
        // ?u + 1 ≐ p + 3  =>  ?u := p + 2
        assert_eq!(
            solve_level_eq(&Level::succ(Level::Meta(u)), &p("p").shifted(3)),
            LevelEq::Assign(u, p("p").shifted(2))
        );
        // ?u + 1 ≐ p is not a pattern (p may be 0).
        assert_eq!(
            solve_level_eq(&Level::succ(Level::Meta(u)), &p("p")),
            LevelEq::Stuck
        );
        assert_eq!(
            solve_level_eq(&Level::of_nat(1), &Level::of_nat(2)),
            LevelEq::False
        );
        assert_eq!(
            solve_level_eq(&Level::Meta(u), &Level::max(Level::Meta(u), p("a"))),
            LevelEq::Stuck,
            "occurs check blocks the assignment"
        );
    }

    #[test]
    fn display_forms() {
        assert_eq!(Level::of_nat(3).to_string(), "3");
        assert_eq!(Level::succ(p("a")).to_string(), "a+1");
    }
}
