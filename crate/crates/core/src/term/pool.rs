use std::collections::HashMap;
use std::sync::Arc;

use super::{FunDef, FunKind, Function, Sort, Term, Var};

/// Deterministic fresh-name supply: one monotone counter per name stem.
///
/// Names have the shape `stem@k`. Surface identifiers cannot contain `@`, so a
/// fresh name never collides with a program symbol, and the counter guarantees
/// it never collides with an earlier fresh name.
#[derive(Debug, Default, Clone)]
pub struct SymbolPool {
    counters: HashMap<String, u64>,
}

impl SymbolPool {
    pub fn new() -> Self {
        Self::default()
    }

    fn next_name(&mut self, stem: &str) -> String {
        let stem = stem.split('@').next().unwrap_or(stem);
        let counter = self.counters.entry(stem.to_string()).or_insert(0);
        let name = format!("{stem}@{counter}");
        *counter += 1;
        name
    }

    /// A fresh symbolic constant (or value map, when `sort` is a value-map sort).
    pub fn fresh(&mut self, stem: &str, sort: Sort) -> Var {
        Var::new(self.next_name(stem), sort)
    }

    pub fn fresh_term(&mut self, stem: &str, sort: Sort) -> Term {
        self.fresh(stem, sort).term()
    }

    /// A fresh uninterpreted function symbol, e.g. an inverse function.
    pub fn fresh_function(&mut self, stem: &str, params: Vec<Sort>, result: Sort) -> Arc<Function> {
        Function::uninterpreted(self.next_name(stem), params, result, FunKind::Fresh)
    }

    /// A fresh macro `stem@k(params) := body`, rendered as `define-fun`.
    pub fn define(&mut self, stem: &str, params: Vec<Var>, body: Term) -> Arc<Function> {
        Arc::new(Function {
            name: self.next_name(stem).into(),
            params: params.iter().map(|p| p.sort.clone()).collect(),
            result: body.sort().clone(),
            kind: FunKind::Fresh,
            def: Some(FunDef { params, body }),
        })
    }

    /// Number of names handed out for `stem` so far.
    pub fn count(&self, stem: &str) -> u64 {
        self.counters.get(stem).copied().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_counts_per_stem() {
        let mut pool = SymbolPool::new();
        assert_eq!(&*pool.fresh("y", Sort::Int).name, "y@0");
        assert_eq!(&*pool.fresh("y", Sort::Int).name, "y@1");
        assert_eq!(&*pool.fresh("x", Sort::Int).name, "x@0");
    }

    #[test]
    fn fresh_value_map_has_value_map_sort() {
        let mut pool = SymbolPool::new();
        let vm = pool.fresh("fvf", Sort::value_map("val", Sort::Int));
        assert_eq!(&*vm.name, "fvf@0");
        assert_eq!(vm.sort, Sort::value_map("val", Sort::Int));
    }

    #[test]
    fn fresh_inverse_function() {
        let mut pool = SymbolPool::new();
        let inv = pool.fresh_function("inv", vec![Sort::Ref], Sort::Int);
        assert_eq!(&*inv.name, "inv@0");
        assert_eq!(inv.params, vec![Sort::Ref]);
        assert_eq!(inv.result, Sort::Int);
    }

    #[test]
    fn restemming_a_fresh_name_does_not_nest() {
        let mut pool = SymbolPool::new();
        let a = pool.fresh("left@3", Sort::Int);
        assert_eq!(&*a.name, "left@0");
    }

    #[test]
    fn same_call_sequence_same_names() {
        let run = || {
            let mut pool = SymbolPool::new();
            (0..5)
                .map(|i| pool.fresh(if i % 2 == 0 { "a" } else { "b" }, Sort::Int).name)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
