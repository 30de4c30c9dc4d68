use std::collections::{BTreeSet, VecDeque};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::constraints::StructuralConstraints;
use crate::graph::{EdgeMark, Pag};

use EdgeMark::{Arrow, Circle, Tail};

/// An orientation that contradicted a constraint-imposed mark. The edge is
/// dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintConflict {
    pub u: String,
    pub v: String,
    pub rule: String,
}

pub(crate) struct Orienter<'a> {
    pub pag: &'a mut Pag,
    /// `(a, b)`: the mark at `b` on `a *-* b` comes from the constraints.
    locked: BTreeSet<(usize, usize)>,
    pub conflicts: Vec<ConstraintConflict>,
}

impl<'a> Orienter<'a> {
    pub fn new(pag: &'a mut Pag) -> Self {
        Orienter { pag, locked: BTreeSet::new(), conflicts: Vec::new() }
    }

    fn mark(&self, a: usize, b: usize) -> Option<EdgeMark> {
        self.pag.mark_at(a, b)
    }

    fn is(&self, a: usize, b: usize, m: EdgeMark) -> bool {
        self.pag.mark_at(a, b) == Some(m)
    }

    /// `a -> b`
    fn directed(&self, a: usize, b: usize) -> bool {
        self.is(b, a, Tail) && self.is(a, b, Arrow)
    }

    /// Sets the mark at `b` on `a *-* b`. Returns whether the graph changed.
    fn set(&mut self, a: usize, b: usize, m: EdgeMark, rule: &str) -> bool {
        match self.mark(a, b) {
            None => false,
            Some(cur) if cur == m => false,
            Some(Circle) => {
                self.pag.set_mark_at(a, b, m);
                true
            }
            Some(_) if self.locked.contains(&(a, b)) || self.locked.contains(&(b, a)) => {
                let (u, v) = (self.pag.name(a).to_string(), self.pag.name(b).to_string());
                warn!("{rule} contradicts a structural constraint on {u} - {v}; dropping the edge");
                self.conflicts.push(ConstraintConflict { u, v, rule: rule.into() });
                self.pag.remove_edge(a, b);
                true
            }
            Some(cur) => {
                debug!("{rule}: keeping {cur:?} at {b} on {a} - {b}");
                false
            }
        }
    }

    pub fn reset_circles(&mut self) {
        for (a, b, _, _) in self.pag.edges() {
            self.pag.set_mark_at(a, b, Circle);
            self.pag.set_mark_at(b, a, Circle);
        }
        self.locked.clear();
    }

    /// Orients unshielded colliders `a *-> b <-* c` where `b` is outside the
    /// separating set of `(a, c)`.
    pub fn orient_colliders(&mut self) {
        for b in 0..self.pag.n() {
            let nb = self.pag.neighbors(b);
            for (i, &a) in nb.iter().enumerate() {
                for &c in &nb[i + 1..] {
                    if self.pag.adjacent(a, c) {
                        continue;
                    }
                    let in_sepset = self.pag.sepset(a, c).is_some_and(|s| s.contains(&b));
                    if !in_sepset && self.pag.adjacent(a, b) && self.pag.adjacent(c, b) {
                        self.set(a, b, Arrow, "collider");
                        self.set(c, b, Arrow, "collider");
                    }
                }
            }
        }
    }

    /// Places an arrowhead at `u` on every edge `u *-* v` whose direction
    /// `u -> v` is forbidden, so `u` can never become an ancestor of `v`.
    pub fn apply_constraints(&mut self, sc: &StructuralConstraints) {
        for (a, b, _, _) in self.pag.edges() {
            for (u, v) in [(a, b), (b, a)] {
                if sc.direction_forbidden(u, v) {
                    self.set(v, u, Arrow, "constraint");
                    if self.pag.adjacent(u, v) {
                        self.locked.insert((v, u));
                    }
                }
            }
        }
    }

    /// Applies the orientation rules until nothing changes.
    pub fn apply_rules(&mut self) {
        loop {
            let mut changed = false;
            changed |= self.rule1();
            changed |= self.rule2();
            changed |= self.rule3();
            changed |= self.rule4();
            changed |= self.rule8();
            changed |= self.rule9();
            changed |= self.rule10();
            if !changed {
                break;
            }
        }
    }

    /// `a *-> b o-* c`, `a`, `c` non-adjacent: `b -> c`.
    fn rule1(&mut self) -> bool {
        let mut changed = false;
        for b in 0..self.pag.n() {
            for a in self.pag.neighbors(b) {
                for c in self.pag.neighbors(b) {
                    if c == a || self.pag.adjacent(a, c) {
                        continue;
                    }
                    if self.is(a, b, Arrow) && self.is(c, b, Circle) {
                        changed |= self.set(c, b, Tail, "R1");
                        changed |= self.set(b, c, Arrow, "R1");
                    }
                }
            }
        }
        changed
    }

    /// `a -> b *-> c` or `a *-> b -> c`, with `a *-o c`: `a *-> c`.
    fn rule2(&mut self) -> bool {
        let mut changed = false;
        for (x, y, _, _) in self.pag.edges() {
            for (a, c) in [(x, y), (y, x)] {
                if !self.is(a, c, Circle) {
                    continue;
                }
                let via = self.pag.neighbors(a).into_iter().any(|b| {
                    b != c
                        && self.pag.adjacent(b, c)
                        && ((self.directed(a, b) && self.is(b, c, Arrow)) || (self.is(a, b, Arrow) && self.directed(b, c)))
                });
                if via {
                    changed |= self.set(a, c, Arrow, "R2");
                }
            }
        }
        changed
    }

    /// `a *-> b <-* c`, `a *-o d o-* c`, `a`, `c` non-adjacent, `d *-o b`:
    /// `d *-> b`.
    fn rule3(&mut self) -> bool {
        let mut changed = false;
        for b in 0..self.pag.n() {
            let nb = self.pag.neighbors(b);
            for &d in &nb {
                if !self.is(d, b, Circle) {
                    continue;
                }
                let fires = nb.iter().enumerate().any(|(i, &a)| {
                    nb[i + 1..].iter().any(|&c| {
                        a != d
                            && c != d
                            && !self.pag.adjacent(a, c)
                            && self.is(a, b, Arrow)
                            && self.is(c, b, Arrow)
                            && self.is(a, d, Circle)
                            && self.is(c, d, Circle)
                    })
                });
                if fires {
                    changed |= self.set(d, b, Arrow, "R3");
                }
            }
        }
        changed
    }

    /// Discriminating paths `<d, ..., a, b, c>` for `b` with `b o-* c`.
    fn rule4(&mut self) -> bool {
        let mut changed = false;
        for c in 0..self.pag.n() {
            for b in self.pag.neighbors(c) {
                if !self.is(c, b, Circle) {
                    continue;
                }
                for a in self.pag.neighbors(b) {
                    if a == c || !self.directed(a, c) || !self.is(b, a, Arrow) {
                        continue;
                    }
                    let Some(d) = self.discriminating_start(a, b, c) else { continue };
                    let in_sepset = self.pag.sepset(d, c).is_some_and(|s| s.contains(&b));
                    if in_sepset {
                        changed |= self.set(c, b, Tail, "R4");
                        changed |= self.set(b, c, Arrow, "R4");
                    } else {
                        changed |= self.set(b, a, Arrow, "R4");
                        changed |= self.set(a, b, Arrow, "R4");
                        changed |= self.set(c, b, Arrow, "R4");
                        changed |= self.set(b, c, Arrow, "R4");
                    }
                    if !self.is(c, b, Circle) {
                        break;
                    }
                }
            }
        }
        changed
    }

    /// Breadth-first search backwards from `a` for the far end `d` of a
    /// discriminating path: every vertex between `d` and `b` is a collider on
    /// the path and a parent of `c`, and `d` is not adjacent to `c`.
    fn discriminating_start(&self, a: usize, b: usize, c: usize) -> Option<usize> {
        let n = self.pag.n();
        let mut visited = vec![false; n];
        visited[a] = true;
        visited[b] = true;
        visited[c] = true;
        let mut queue = VecDeque::from([a]);
        while let Some(w) = queue.pop_front() {
            for d in self.pag.neighbors(w) {
                if visited[d] || !self.is(d, w, Arrow) {
                    continue;
                }
                if !self.pag.adjacent(d, c) {
                    return Some(d);
                }
                if self.directed(d, c) && self.is(w, d, Arrow) {
                    visited[d] = true;
                    queue.push_back(d);
                }
            }
        }
        None
    }

    /// `a o-> c`
    fn circle_arrow(&self, a: usize, c: usize) -> bool {
        self.is(c, a, Circle) && self.is(a, c, Arrow)
    }

    /// Edge `x *-* y` could be oriented `x -> y`.
    fn potentially_directed(&self, x: usize, y: usize) -> bool {
        self.pag.adjacent(x, y) && !self.is(y, x, Arrow) && !self.is(x, y, Tail)
    }

    /// Whether an uncovered potentially directed path continues from
    /// `prev -> cur` to `target`.
    fn upd_path(&self, prev: usize, cur: usize, target: usize, visited: &mut Vec<bool>) -> bool {
        for next in self.pag.neighbors(cur) {
            if visited[next] || self.pag.adjacent(prev, next) || !self.potentially_directed(cur, next) {
                continue;
            }
            if next == target {
                return true;
            }
            visited[next] = true;
            let found = self.upd_path(cur, next, target, visited);
            visited[next] = false;
            if found {
                return true;
            }
        }
        false
    }

    /// `a o-> c` with `a -> b -> c` or `a -o b -> c`: `a -> c`.
    fn rule8(&mut self) -> bool {
        let mut changed = false;
        for (x, y, _, _) in self.pag.edges() {
            for (a, c) in [(x, y), (y, x)] {
                if !self.circle_arrow(a, c) {
                    continue;
                }
                let via = self.pag.neighbors(a).into_iter().any(|b| {
                    b != c && self.is(b, a, Tail) && !self.is(a, b, Tail) && self.directed(b, c)
                });
                if via {
                    changed |= self.set(c, a, Tail, "R8");
                }
            }
        }
        changed
    }

    /// `a o-> c` with an uncovered potentially directed path `<a, b, ..., c>`
    /// where `b` and `c` are non-adjacent: `a -> c`.
    fn rule9(&mut self) -> bool {
        let mut changed = false;
        for (x, y, _, _) in self.pag.edges() {
            for (a, c) in [(x, y), (y, x)] {
                if !self.circle_arrow(a, c) {
                    continue;
                }
                let fires = self.pag.neighbors(a).into_iter().any(|b| {
                    if b == c || self.pag.adjacent(b, c) || !self.potentially_directed(a, b) {
                        return false;
                    }
                    let mut visited = vec![false; self.pag.n()];
                    visited[a] = true;
                    visited[b] = true;
                    self.upd_path(a, b, c, &mut visited)
                });
                if fires {
                    changed |= self.set(c, a, Tail, "R9");
                }
            }
        }
        changed
    }

    /// First vertices after `a` of uncovered potentially directed paths from
    /// `a` to `target` that avoid `c`.
    fn path_heads(&self, a: usize, target: usize, c: usize) -> Vec<usize> {
        self.pag
            .neighbors(a)
            .into_iter()
            .filter(|&mu| {
                if mu == c || !self.potentially_directed(a, mu) {
                    return false;
                }
                if mu == target {
                    return true;
                }
                let mut visited = vec![false; self.pag.n()];
                visited[a] = true;
                visited[mu] = true;
                visited[c] = true;
                self.upd_path(a, mu, target, &mut visited)
            })
            .collect()
    }

    /// `a o-> c`, `b -> c <- d`, uncovered potentially directed paths from
    /// `a` to `b` and to `d` whose second vertices differ and are
    /// non-adjacent: `a -> c`.
    fn rule10(&mut self) -> bool {
        let mut changed = false;
        for (x, y, _, _) in self.pag.edges() {
            for (a, c) in [(x, y), (y, x)] {
                if !self.circle_arrow(a, c) {
                    continue;
                }
                let parents: Vec<usize> =
                    self.pag.neighbors(c).into_iter().filter(|&p| p != a && self.directed(p, c)).collect();
                let mut fires = false;
                'outer: for (i, &b) in parents.iter().enumerate() {
                    for &d in &parents[i + 1..] {
                        let heads_b = self.path_heads(a, b, c);
                        let heads_d = self.path_heads(a, d, c);
                        for &mu in &heads_b {
                            for &omega in &heads_d {
                                if mu != omega && !self.pag.adjacent(mu, omega) {
                                    fires = true;
                                    break 'outer;
                                }
                            }
                        }
                    }
                }
                if fires {
                    changed |= self.set(c, a, Tail, "R10");
                }
            }
        }
        changed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Kind, Role, VariableMeta};

    fn pag(n: usize) -> Pag {
        Pag::empty((0..n).map(|i| VariableMeta::new(format!("v{i}"), Role::NonManipulableMetric, Kind::Continuous)).collect())
    }

    #[test]
    fn collider_then_rule1_propagates() {
        // a o-o b o-o c, c o-o d ; sepset(a, c) = {} ; sepset(b, d) = {c}
        let mut p = pag(4);
        p.add_edge(0, 1, Circle, Circle);
        p.add_edge(2, 1, Circle, Circle);
        p.add_edge(2, 3, Circle, Circle);
        p.set_sepset(0, 2, vec![]);
        p.set_sepset(1, 3, vec![2]);
        p.set_sepset(0, 3, vec![]);
        let mut o = Orienter::new(&mut p);
        o.orient_colliders();
        o.apply_rules();
        assert_eq!(p.mark_at(0, 1), Some(Arrow));
        assert_eq!(p.mark_at(2, 1), Some(Arrow));
        // b <-* c o-o d: c is not a collider with d, R1 needs an arrow into c
        assert_eq!(p.mark_at(2, 3), Some(Circle));
    }

    #[test]
    fn rule1_orients_away_from_collider() {
        // a *-> b o-o c, a and c non-adjacent
        let mut p = pag(3);
        p.add_edge(0, 1, Circle, Arrow);
        p.add_edge(1, 2, Circle, Circle);
        let mut o = Orienter::new(&mut p);
        o.apply_rules();
        assert_eq!(p.mark_at(2, 1), Some(Tail));
        assert_eq!(p.mark_at(1, 2), Some(Arrow));
    }

    #[test]
    fn rule2_adds_arrowhead() {
        // a -> b o-> c ... a o-o c  with b *-> c : a *-> c
        let mut p = pag(3);
        p.add_edge(0, 1, Tail, Arrow);
        p.add_edge(1, 2, Circle, Arrow);
        p.add_edge(0, 2, Circle, Circle);
        let mut o = Orienter::new(&mut p);
        o.rule2();
        assert_eq!(p.mark_at(0, 2), Some(Arrow));
    }

    #[test]
    fn rule4_collider_branch() {
        // d *-> a <-> b, a -> c, d not adjacent to c, b o-o c, b not in sepset(d, c)
        let mut p = pag(4);
        let (d, a, b, c) = (0, 1, 2, 3);
        p.add_edge(d, a, Circle, Arrow);
        p.add_edge(a, b, Arrow, Arrow);
        p.add_edge(a, c, Tail, Arrow);
        p.add_edge(b, c, Circle, Circle);
        p.set_sepset(d, c, vec![a]);
        p.set_sepset(d, b, vec![]);
        let mut o = Orienter::new(&mut p);
        assert!(o.rule4());
        assert_eq!(p.mark_at(c, b), Some(Arrow));
        assert_eq!(p.mark_at(b, c), Some(Arrow));
    }

    #[test]
    fn rule4_non_collider_branch() {
        let mut p = pag(4);
        let (d, a, b, c) = (0, 1, 2, 3);
        p.add_edge(d, a, Circle, Arrow);
        p.add_edge(a, b, Arrow, Arrow);
        p.add_edge(a, c, Tail, Arrow);
        p.add_edge(b, c, Circle, Circle);
        p.set_sepset(d, c, vec![a, b]);
        let mut o = Orienter::new(&mut p);
        assert!(o.rule4());
        assert_eq!(p.mark_at(c, b), Some(Tail));
        assert_eq!(p.mark_at(b, c), Some(Arrow));
    }

    #[test]
    fn rule8_and_rule9_add_tails() {
        // a -> b -> c, a o-> c : a -> c
        let mut p = pag(3);
        p.add_edge(0, 1, Tail, Arrow);
        p.add_edge(1, 2, Tail, Arrow);
        p.add_edge(0, 2, Circle, Arrow);
        let mut o = Orienter::new(&mut p);
        assert!(o.rule8());
        assert_eq!(p.mark_at(2, 0), Some(Tail));

        // a o-> c, a o-o b o-o e o-> c with b, c and a, e non-adjacent
        let mut p = pag(4);
        let (a, b, e, c) = (0, 1, 2, 3);
        p.add_edge(a, c, Circle, Arrow);
        p.add_edge(a, b, Circle, Circle);
        p.add_edge(b, e, Circle, Circle);
        p.add_edge(e, c, Circle, Arrow);
        let mut o = Orienter::new(&mut p);
        assert!(o.rule9());
        assert_eq!(p.mark_at(c, a), Some(Tail));
    }

    #[test]
    fn rule10_two_parent_paths() {
        // a o-> c, b -> c <- d, a o-o b, a o-o d, b and d non-adjacent
        let mut p = pag(4);
        let (a, b, d, c) = (0, 1, 2, 3);
        p.add_edge(a, c, Circle, Arrow);
        p.add_edge(b, c, Tail, Arrow);
        p.add_edge(d, c, Tail, Arrow);
        p.add_edge(a, b, Circle, Circle);
        p.add_edge(a, d, Circle, Circle);
        let mut o = Orienter::new(&mut p);
        assert!(o.rule10());
        assert_eq!(p.mark_at(c, a), Some(Tail));
    }

    #[test]
    fn constraint_marks_put_arrowheads_at_forbidden_sources() {
        use crate::discovery::build_constraints;
        let vars = vec![
            VariableMeta::new("o", Role::ManipulableOption, Kind::Discrete),
            VariableMeta::new("m", Role::NonManipulableMetric, Kind::Continuous),
            VariableMeta::new("y", Role::PerformanceObjective, Kind::Continuous),
        ];
        let sc = build_constraints(&vars);
        let mut p = Pag::empty(vars);
        p.add_edge(0, 1, Circle, Circle);
        p.add_edge(1, 2, Circle, Circle);
        let mut o = Orienter::new(&mut p);
        o.apply_constraints(&sc);
        assert_eq!(p.mark_at(1, 0), Some(Circle));
        assert_eq!(p.mark_at(0, 1), Some(Arrow));
        assert_eq!(p.mark_at(1, 2), Some(Arrow));
        assert_eq!(p.mark_at(2, 1), Some(Circle));
    }
}
