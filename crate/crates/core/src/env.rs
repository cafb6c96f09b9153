use crate::level::Level;
use crate::name::Name;
use crate::term::{Term, TermData};
use std::sync::Arc;

/// Unfolding discipline for definitions.
///
/// - reducible: unfolded eagerly everywhere, including class-instance
///   resolution's restricted mode.
/// - semireducible (the default): unfolded by whnf/defeq and by the
///   depth-directed and meta-free paths of constraint simplification, but
///   not in reducible-only mode.
/// - irreducible: never unfolded during unification; only full conversion
///   checking (kernel mode) may unfold it.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ReducibilityHint {
    Reducible,
    Semireducible,
    Irreducible,
}

/// Transparency mode for whnf/conversion.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Transparency {
    /// Unfold reducible and semireducible definitions.
    Default,
    /// Unfold only reducible definitions (class-instance resolution).
    ReducibleOnly,
    /// Unfold everything (kernel checking); hints are ignored.
    All,
}

impl Transparency {
    pub fn permits(self, hint: ReducibilityHint) -> bool {
        match self {
            Transparency::All => true,
            Transparency::Default => hint != ReducibilityHint::Irreducible,
            Transparency::ReducibleOnly => hint == ReducibilityHint::Reducible,
        }
    }
}

/// One ι-rule: `rec params motive minors indices (ctor cparams fields) extra…`
/// rewrites to `rhs params motive minors fields extra…`. The stored `rhs` is
/// closed and λ-abstracted over exactly params ++ [motive] ++ minors ++ fields.
#[derive(Clone, Debug)]
pub struct IotaRule {
    pub ctor: Name,
    pub num_fields: u32,
    pub rhs: Term,
}

#[derive(Clone, Debug)]
pub struct RecursorInfo {
    pub inductive: Name,
    pub num_params: u32,
    pub num_minors: u32,
    pub num_indices: u32,
    pub rules: Vec<IotaRule>,
}

impl RecursorInfo {
    /// Argument index of the major premise in a full application spine.
    pub fn major_pos(&self) -> usize {
        (self.num_params + 1 + self.num_minors + self.num_indices) as usize
    }
}

#[derive(Clone, Debug)]
pub enum DeclKind {
    Definition {
        value: Term,
        hint: ReducibilityHint,
        /// Definitional height: 1 + max depth of constants in the value.
        depth: u32,
    },
    Axiom,
    Inductive {
        num_params: u32,
        num_indices: u32,
        constructors: Vec<Name>,
    },
    Constructor {
        inductive: Name,
        num_params: u32,
        num_fields: u32,
    },
    Recursor(RecursorInfo),
}

#[derive(Clone, Debug)]
pub struct Declaration {
    pub name: Name,
    pub univ_params: Vec<Name>,
    /// Closed, metavariable-free type.
    pub ty: Term,
    pub kind: DeclKind,
}

impl Declaration {
    pub fn is_definition(&self) -> bool {
        matches!(self.kind, DeclKind::Definition { .. })
    }

    pub fn hint(&self) -> ReducibilityHint {
        match &self.kind {
            DeclKind::Definition { hint, .. } => *hint,
            _ => ReducibilityHint::Semireducible,
        }
    }

    /// Type instantiated at the given universe level arguments.
    pub fn ty_at(&self, levels: &[Level]) -> Term {
        if self.univ_params.is_empty() {
            return self.ty.clone();
        }
        let map: Vec<(Name, Level)> = self
            .univ_params
            .iter()
            .cloned()
            .zip(levels.iter().cloned())
            .collect();
        self.ty.instantiate_level_params(&map)
    }

    pub fn value_at(&self, levels: &[Level]) -> Option<Term> {
        match &self.kind {
            DeclKind::Definition { value, .. } => {
                if self.univ_params.is_empty() {
                    Some(value.clone())
                } else {
                    let map: Vec<(Name, Level)> = self
                        .univ_params
                        .iter()
                        .cloned()
                        .zip(levels.iter().cloned())
                        .collect();
                    Some(value.instantiate_level_params(&map))
                }
            }
            _ => None,
        }
    }
}

/// Committed declarations plus the attribute tables the elaborator consults.
/// An immutable value: `Clone` is O(1) (structurally shared maps), so
/// sessions keep the last good environment by value.
#[derive(Clone, Default)]
pub struct Environment {
    decls: im::HashMap<Name, Arc<Declaration>>,
    classes: im::HashSet<Name>,
    /// class name -> instance declaration names, registration order.
    instances: im::HashMap<Name, im::Vector<Name>>,
    /// source head constant -> coercion declaration names, registration order.
    coercions_from: im::HashMap<Name, im::Vector<Name>>,
    /// target head constant -> coercion declaration names.
    coercions_to: im::HashMap<Name, im::Vector<Name>>,
    /// short name -> full declaration names (overload candidates), in
    /// `open` order.
    aliases: im::HashMap<Name, im::Vector<Name>>,
    /// structure projection definitions (simp treats their heads specially).
    projections: im::HashSet<Name>,
}

impl Environment {
    pub fn new() -> Environment {
        Environment::default()
    }

    pub fn get(&self, name: &Name) -> Option<&Arc<Declaration>> {
        self.decls.get(name)
    }

    pub fn contains(&self, name: &Name) -> bool {
        self.decls.contains_key(name)
    }

    /// Insert a declaration that has already been kernel-checked.
    pub fn insert(&mut self, decl: Declaration) {
        self.decls.insert(decl.name.clone(), Arc::new(decl));
    }

    /// Definitional depth of a constant: 0 for anything but a definition.
    pub fn depth_of(&self, name: &Name) -> u32 {
        match self.get(name).map(|d| &d.kind) {
            Some(DeclKind::Definition { depth, .. }) => *depth,
            _ => 0,
        }
    }

    /// Depth a new definition with this value would get.
    pub fn depth_for_value(&self, value: &Term) -> u32 {
        let mut max = 0;
        collect_const_depths(self, value, &mut max);
        1 + max
    }

    pub fn is_recursor(&self, name: &Name) -> bool {
        matches!(self.get(name).map(|d| &d.kind), Some(DeclKind::Recursor(_)))
    }

    pub fn recursor_info(&self, name: &Name) -> Option<RecursorInfo> {
        match self.get(name).map(|d| &d.kind) {
            Some(DeclKind::Recursor(info)) => Some(info.clone()),
            _ => None,
        }
    }

    pub fn constructor_info(&self, name: &Name) -> Option<(Name, u32, u32)> {
        match self.get(name).map(|d| &d.kind) {
            Some(DeclKind::Constructor {
                inductive,
                num_params,
                num_fields,
            }) => Some((inductive.clone(), *num_params, *num_fields)),
            _ => None,
        }
    }

    pub fn set_hint(&mut self, name: &Name, hint: ReducibilityHint) -> bool {
        if let Some(decl) = self.decls.get(name) {
            let mut d = (**decl).clone();
            if let DeclKind::Definition { hint: h, .. } = &mut d.kind {
                *h = hint;
                self.decls.insert(name.clone(), Arc::new(d));
                return true;
            }
        }
        false
    }

    pub fn mark_class(&mut self, name: Name) {
        self.classes.insert(name);
    }

    pub fn is_class(&self, name: &Name) -> bool {
        self.classes.contains(name)
    }

    pub fn add_instance(&mut self, class: Name, instance: Name) {
        self.instances.entry(class).or_default().push_back(instance);
    }

    pub fn instances_for(&self, class: &Name) -> Vec<Name> {
        self.instances
            .get(class)
            .map(|v| v.iter().cloned().collect())
            .unwrap_or_default()
    }

    pub fn add_coercion(&mut self, source_head: Name, target_head: Name, decl: Name) {
        self.coercions_from
            .entry(source_head)
            .or_default()
            .push_back(decl.clone());
        self.coercions_to.entry(target_head).or_default().push_back(decl);
    }

    pub fn coercions_from(&self, source_head: &Name) -> Vec<Name> {
        self.coercions_from
            .get(source_head)
            .map(|v| v.iter().cloned().collect())
            .unwrap_or_default()
    }

    pub fn coercions_to(&self, target_head: &Name) -> Vec<Name> {
        self.coercions_to
            .get(target_head)
            .map(|v| v.iter().cloned().collect())
            .unwrap_or_default()
    }

    pub fn add_alias(&mut self, short: Name, full: Name) {
        let entry = self.aliases.entry(short).or_default();
        if !entry.contains(&full) {
            entry.push_back(full);
        }
    }

    pub fn alias_candidates(&self, short: &Name) -> Vec<Name> {
        self.aliases
            .get(short)
            .map(|v| v.iter().cloned().collect())
            .unwrap_or_default()
    }

    pub fn mark_projection(&mut self, name: Name) {
        self.projections.insert(name);
    }

    pub fn is_projection(&self, name: &Name) -> bool {
        self.projections.contains(name)
    }

    pub fn decl_names(&self) -> impl Iterator<Item = &Name> {
        self.decls.keys()
    }
}

fn collect_const_depths(env: &Environment, t: &Term, max: &mut u32) {
    match t.data() {
        TermData::Const(n, _) => *max = (*max).max(env.depth_of(n)),
        TermData::App(f, a) => {
            collect_const_depths(env, f, max);
            collect_const_depths(env, a, max);
        }
        TermData::Lambda(_, d, b) | TermData::Pi(_, d, b) => {
            collect_const_depths(env, d, max);
            collect_const_depths(env, b, max);
        }
        TermData::FreeVar(_, ty) | TermData::Meta(_, ty) => collect_const_depths(env, ty, max),
        _ => {}
    }
}
