//! Word-problem deciders: structured fast paths plus the parallel search
//! over relator consequences and finite permutation quotients.
//!
//! The two generic searches run as independent tasks; the first verified
//! witness wins. Budgets are counted in enumeration steps, so verdicts are
//! reproducible. `Exhausted` is a value, not an error: for groups that are
//! not residually finite a nontrivial word may be undetectable and we
//! report exhaustion rather than guess.

use std::collections::{BinaryHeap, HashSet};
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presentation::{free_ball, NormalForm, Presentation, StructureClass, Word};

/// A generator-to-permutation assignment satisfying all relators.
/// Permutations are image arrays on `{0..degree-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationQuotient {
    pub degree: usize,
    pub perms: Vec<Vec<usize>>,
}

impl PermutationQuotient {
    pub fn identity(degree: usize, alphabet_len: usize) -> Self {
        PermutationQuotient {
            degree,
            perms: vec![(0..degree).collect(); alphabet_len],
        }
    }

    /// Image of a word, as an image array. Composition is by function
    /// application: the first letter acts last.
    pub fn evaluate(&self, w: &Word) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.degree).collect();
        for &l in w.letters().iter().rev() {
            let i = l.unsigned_abs() as usize - 1;
            let p = &self.perms[i];
            if l > 0 {
                out = out.iter().map(|&x| p[x]).collect();
            } else {
                let mut inv = vec![0usize; self.degree];
                for (a, &b) in p.iter().enumerate() {
                    inv[b] = a;
                }
                out = out.iter().map(|&x| inv[x]).collect();
            }
        }
        out
    }

    pub fn maps_to_identity(&self, w: &Word) -> bool {
        self.evaluate(w).iter().enumerate().all(|(i, &x)| i == x)
    }

    pub fn satisfies_relators(&self, p: &Presentation) -> bool {
        self.perms.len() == p.alphabet_len()
            && self.perms.iter().all(|perm| is_permutation(perm, self.degree))
            && p.relators().iter().all(|r| self.maps_to_identity(r))
    }
}

fn is_permutation(p: &[usize], degree: usize) -> bool {
    if p.len() != degree {
        return false;
    }
    let mut seen = vec![false; degree];
    for &x in p {
        if x >= degree || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

/// One factor `g r^{±1} g^{-1}` of a consequence expression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsequenceFactor {
    pub conjugator: Word,
    pub relator_index: usize,
    pub inverted: bool,
}

/// A product of conjugated relators; the checkable `Trivial` witness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ConsequenceWitness {
    pub factors: Vec<ConsequenceFactor>,
}

impl ConsequenceWitness {
    /// Re-evaluates the product under free multiplication.
    pub fn expand(&self, p: &Presentation) -> Result<Word> {
        let mut acc = Word::identity();
        for f in &self.factors {
            let r = p
                .relators()
                .get(f.relator_index)
                .ok_or_else(|| Error::Invalid("relator index out of range".into()))?;
            let r = if f.inverted { r.inverse() } else { r.clone() };
            acc = acc.mul(&r.conjugate_by(&f.conjugator));
        }
        Ok(acc)
    }
}

/// Why a word is known nontrivial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NontrivialWitness {
    /// Free group: the reduced word is nonempty.
    FreeReduced,
    /// Free abelian: a nonzero exponent vector.
    AbelianExponents(Vec<i64>),
    /// Product of frees: a nontrivial component in the given block.
    BlockComponent { block: usize },
    /// A finite quotient separating the word from the identity.
    Quotient(PermutationQuotient),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrivialWitness {
    /// Explicit product of conjugated relators equal to the word.
    Consequence(ConsequenceWitness),
    /// Structured classes: the canonical normal form is the identity.
    NormalFormIdentity { class: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub budget: u64,
    pub consequence_steps: u64,
    pub quotient_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Trivial { witness: TrivialWitness },
    Nontrivial { witness: NontrivialWitness },
    Exhausted { report: BudgetReport },
}

/// All elements of the normal closure expressible as a product of at most
/// `depth` conjugated relators with conjugators in the ball of radius
/// `depth`, freely reduced and deduplicated, in breadth-first order.
pub fn enumerate_consequences(
    p: &Presentation,
    depth: usize,
    limit: usize,
) -> Result<Vec<Word>> {
    let conjugates = conjugate_edges(p, depth, limit)?;
    let mut seen: HashSet<Word> = HashSet::new();
    let mut out = Vec::new();
    let mut layer = vec![Word::identity()];
    seen.insert(Word::identity());
    out.push(Word::identity());
    for _ in 0..depth {
        let mut next = Vec::new();
        for w in &layer {
            for (c, _) in &conjugates {
                if out.len() >= limit {
                    return Err(Error::ResourceLimit {
                        what: "consequence enumeration".into(),
                        limit,
                    });
                }
                let prod = w.mul(c);
                if seen.insert(prod.clone()) {
                    out.push(prod.clone());
                    next.push(prod);
                }
            }
        }
        layer = next;
    }
    Ok(out)
}

/// The conjugated-relator alphabet `g r^{±1} g^{-1}`, conjugators taken
/// from the ball of the given radius, deduplicated and in deterministic
/// (conjugator-shortlex, relator, sign) order.
fn conjugate_edges(
    p: &Presentation,
    radius: usize,
    cap: usize,
) -> Result<Vec<(Word, ConsequenceFactor)>> {
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    for g in free_ball(p.alphabet_len(), radius, cap)? {
        for (ri, r) in p.relators().iter().enumerate() {
            for inverted in [false, true] {
                let base = if inverted { r.inverse() } else { r.clone() };
                let c = base.conjugate_by(&g);
                if c.is_identity() || !seen.insert(c.clone()) {
                    continue;
                }
                edges.push((
                    c,
                    ConsequenceFactor { conjugator: g.clone(), relator_index: ri, inverted },
                ));
            }
        }
    }
    Ok(edges)
}

/// All permutation quotients of degree `<= max_degree`, in lexicographic
/// order of `(degree, tuple)`.
pub fn enumerate_finite_quotients(
    p: &Presentation,
    max_degree: usize,
    limit: usize,
) -> Result<Vec<PermutationQuotient>> {
    let mut out = Vec::new();
    let mut steps = 0u64;
    let exceeded = quotient_search(p, max_degree, u64::MAX, &mut steps, &AtomicBool::new(false), |q| {
        out.push(q.clone());
        if out.len() >= limit {
            return SearchFlow::Stop;
        }
        SearchFlow::Continue
    });
    if exceeded == SearchOutcome::Stopped && out.len() >= limit {
        return Err(Error::ResourceLimit { what: "quotient enumeration".into(), limit });
    }
    Ok(out)
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum SearchFlow {
    Continue,
    Stop,
}

#[derive(PartialEq, Eq, Clone, Copy, Debug)]
enum SearchOutcome {
    Finished,
    Stopped,
    BudgetExhausted,
}

/// Depth-first enumeration of relator-respecting permutation tuples, with
/// pruning by partial relator evaluation after each generator is fixed.
fn quotient_search(
    p: &Presentation,
    max_degree: usize,
    budget: u64,
    steps: &mut u64,
    stop: &AtomicBool,
    mut visit: impl FnMut(&PermutationQuotient) -> SearchFlow,
) -> SearchOutcome {
    let a = p.alphabet_len();
    // relators checkable once generators 0..=k are all assigned
    let mut relators_by_max: Vec<Vec<&Word>> = vec![Vec::new(); a.max(1)];
    for r in p.relators() {
        let max = r.max_index().saturating_sub(1);
        relators_by_max[max].push(r);
    }
    for degree in 1..=max_degree {
        let perms = all_permutations(degree);
        let mut assigned: Vec<Vec<usize>> = Vec::with_capacity(a);
        // explicit DFS over generator index with lexicographic perm choice
        let mut choice = vec![0usize; a];
        let mut level = 0usize;
        loop {
            if stop.load(AtomicOrdering::Relaxed) {
                return SearchOutcome::Stopped;
            }
            if *steps >= budget {
                return SearchOutcome::BudgetExhausted;
            }
            if choice[level] >= perms.len() {
                // backtrack
                if level == 0 {
                    break;
                }
                choice[level] = 0;
                level -= 1;
                assigned.pop();
                choice[level] += 1;
                continue;
            }
            *steps += 1;
            assigned.push(perms[choice[level]].clone());
            let partial = PermutationQuotient { degree, perms: assigned.clone() };
            let ok = relators_by_max[level]
                .iter()
                .all(|r| partial.maps_to_identity(r));
            if !ok {
                assigned.pop();
                choice[level] += 1;
                continue;
            }
            if level + 1 == a {
                if visit(&partial) == SearchFlow::Stop {
                    return SearchOutcome::Stopped;
                }
                assigned.pop();
                choice[level] += 1;
            } else {
                level += 1;
            }
        }
    }
    SearchOutcome::Finished
}

/// All permutations of `{0..m-1}` in lexicographic order of image arrays.
fn all_permutations(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(m);
    let mut used = vec![false; m];
    fn rec(m: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for x in 0..m {
            if !used[x] {
                used[x] = true;
                cur.push(x);
                rec(m, cur, used, out);
                cur.pop();
                used[x] = false;
            }
        }
    }
    rec(m, &mut cur, &mut used, &mut out);
    out
}

/// Uniform-cost search for `w` in the normal closure. Edge cost of a
/// conjugated relator is `1 + |conjugator|`, so cheap expressions are
/// explored first; growth order is (cost, insertion) and therefore
/// deterministic.
fn consequence_search(
    p: &Presentation,
    w: &Word,
    budget: u64,
    steps: &mut u64,
    stop: &AtomicBool,
) -> Option<ConsequenceWitness> {
    if p.relators().is_empty() {
        return w.is_identity().then(ConsequenceWitness::default);
    }
    // conjugator radius is bounded by the budget anyway; 8 covers anything
    // reachable at desk scale
    let max_radius = 8usize;
    let edges = match conjugate_edges(p, max_radius, 200_000) {
        Ok(e) => e,
        Err(_) => conjugate_edges(p, 3, 200_000).ok()?,
    };

    #[derive(PartialEq, Eq)]
    struct Node {
        cost: u64,
        seq: u64,
        word: Word,
        path: Vec<usize>, // edge indices
    }
    impl Ord for Node {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            // BinaryHeap is a max-heap; invert for min-cost, tie on seq
            other.cost.cmp(&self.cost).then(other.seq.cmp(&self.seq))
        }
    }
    impl PartialOrd for Node {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    let mut heap = BinaryHeap::new();
    let mut seen: HashSet<Word> = HashSet::new();
    let mut seq = 0u64;
    heap.push(Node { cost: 0, seq, word: Word::identity(), path: Vec::new() });
    while let Some(node) = heap.pop() {
        if stop.load(AtomicOrdering::Relaxed) {
            return None;
        }
        if !seen.insert(node.word.clone()) {
            continue;
        }
        if node.word == *w {
            let factors = node
                .path
                .iter()
                .map(|&e| edges[e].1.clone())
                .collect();
            return Some(ConsequenceWitness { factors });
        }
        for (ei, (c, f)) in edges.iter().enumerate() {
            *steps += 1;
            if *steps >= budget {
                return None;
            }
            let next = node.word.mul(c);
            if seen.contains(&next) {
                continue;
            }
            // mild length pruning keeps the frontier focused around w
            if next.len() > w.len() + 2 * (f.conjugator.len() + c.len()) + 8 {
                continue;
            }
            seq += 1;
            let mut path = node.path.clone();
            path.push(ei);
            heap.push(Node { cost: node.cost + 1 + f.conjugator.len() as u64, seq, word: next, path });
        }
    }
    None
}

/// Decides triviality of `w` in the presented group.
///
/// Structured classes are decided by their normal forms. For
/// `GenericPresented` the consequence search and the quotient search run
/// concurrently, each with `budget` enumeration steps; the first verified
/// witness wins.
pub fn decide_word(w: &Word, p: &Presentation, budget: u64) -> Result<Verdict> {
    match p.class() {
        StructureClass::Free => Ok(if w.is_identity() {
            Verdict::Trivial { witness: TrivialWitness::Consequence(ConsequenceWitness::default()) }
        } else {
            Verdict::Nontrivial { witness: NontrivialWitness::FreeReduced }
        }),
        StructureClass::FreeAbelian => {
            let nf = p.normal_form(w)?;
            if nf.is_identity() {
                Ok(Verdict::Trivial {
                    witness: TrivialWitness::NormalFormIdentity { class: p.class().to_string() },
                })
            } else {
                let NormalForm::Abelian(exps) = nf else { unreachable!() };
                Ok(Verdict::Nontrivial { witness: NontrivialWitness::AbelianExponents(exps) })
            }
        }
        StructureClass::ProductOfFrees(_) => {
            let nf = p.normal_form(w)?;
            if nf.is_identity() {
                Ok(Verdict::Trivial {
                    witness: TrivialWitness::NormalFormIdentity { class: p.class().to_string() },
                })
            } else {
                let NormalForm::Blocks(ws) = nf else { unreachable!() };
                let block = ws.iter().position(|b| !b.is_identity()).unwrap();
                Ok(Verdict::Nontrivial { witness: NontrivialWitness::BlockComponent { block } })
            }
        }
        StructureClass::GenericPresented => Ok(decide_generic(w, p, budget)),
    }
}

fn decide_generic(w: &Word, p: &Presentation, budget: u64) -> Verdict {
    let stop = Arc::new(AtomicBool::new(false));
    let (trivial, cons_steps, quotient, quot_steps) = std::thread::scope(|scope| {
        let stop_a = stop.clone();
        let cons = scope.spawn(move || {
            let mut steps = 0u64;
            let found = consequence_search(p, w, budget, &mut steps, &stop_a);
            if found.is_some() {
                stop_a.store(true, AtomicOrdering::Relaxed);
            }
            (found, steps)
        });
        let stop_b = stop.clone();
        let quot = scope.spawn(move || {
            let mut steps = 0u64;
            let mut found: Option<PermutationQuotient> = None;
            // degrees escalate inside the shared budget
            quotient_search(p, 8, budget, &mut steps, &stop_b, |q| {
                if !q.maps_to_identity(w) {
                    found = Some(q.clone());
                    return SearchFlow::Stop;
                }
                SearchFlow::Continue
            });
            if found.is_some() {
                stop_b.store(true, AtomicOrdering::Relaxed);
            }
            (found, steps)
        });
        let (t, cs) = cons.join().expect("consequence search panicked");
        let (q, qs) = quot.join().expect("quotient search panicked");
        (t, cs, q, qs)
    });

    // re-verify witnesses before returning
    if let Some(witness) = trivial {
        if witness.expand(p).map(|u| u == *w).unwrap_or(false) {
            return Verdict::Trivial { witness: TrivialWitness::Consequence(witness) };
        }
    }
    if let Some(q) = quotient {
        if q.satisfies_relators(p) && !q.maps_to_identity(w) {
            return Verdict::Nontrivial { witness: NontrivialWitness::Quotient(q) };
        }
    }
    Verdict::Exhausted {
        report: BudgetReport {
            budget,
            consequence_steps: cons_steps,
            quotient_steps: quot_steps,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn z2_generic() -> Presentation {
        Presentation::parse("generators: x y\nrelators: x*y*x^-1*y^-1\nclass: generic").unwrap()
    }

    #[test]
    fn consequences_contain_relator_and_conjugates() {
        let p = z2_generic();
        let r = p.relators()[0].clone();
        let depth1 = enumerate_consequences(&p, 1, 100_000).unwrap();
        assert!(depth1.contains(&r));

        let x = p.parse_word("x").unwrap();
        let conj = r.conjugate_by(&x);
        let depth2 = enumerate_consequences(&p, 2, 100_000).unwrap();
        assert!(depth2.contains(&conj));

        let free = Presentation::free(&["x", "y"]);
        assert_eq!(
            enumerate_consequences(&free, 3, 100_000).unwrap(),
            vec![Word::identity()]
        );
    }

    #[test]
    fn quotients_of_order_two_relator() {
        let p = Presentation::parse("generators: x\nrelators: x^2\nclass: generic").unwrap();
        let qs = enumerate_finite_quotients(&p, 2, 10_000).unwrap();
        assert!(qs.contains(&PermutationQuotient { degree: 2, perms: vec![vec![1, 0]] }));
        for q in &qs {
            assert!(q.satisfies_relators(&p));
        }
    }

    #[test]
    fn quotients_of_free_group_unconstrained() {
        let p = Presentation::parse("generators: x y\nrelators:\nclass: generic").unwrap();
        let qs = enumerate_finite_quotients(&p, 2, 10_000).unwrap();
        let degree2: Vec<_> = qs.iter().filter(|q| q.degree == 2).collect();
        assert_eq!(degree2.len(), 4);
    }

    #[test]
    fn commuting_quotients_commute() {
        let p = z2_generic();
        let qs = enumerate_finite_quotients(&p, 3, 100_000).unwrap();
        assert!(!qs.is_empty());
        for q in &qs {
            let x = &q.perms[0];
            let y = &q.perms[1];
            let xy: Vec<usize> = (0..q.degree).map(|i| x[y[i]]).collect();
            let yx: Vec<usize> = (0..q.degree).map(|i| y[x[i]]).collect();
            assert_eq!(xy, yx);
        }
    }

    #[test]
    fn decide_commutator_is_trivial_with_relator_witness() {
        let p = z2_generic();
        let w = p.parse_word("x*y*x^-1*y^-1").unwrap();
        match decide_word(&w, &p, 100_000).unwrap() {
            Verdict::Trivial { witness: TrivialWitness::Consequence(c) } => {
                assert_eq!(c.expand(&p).unwrap(), w);
                assert_eq!(c.factors.len(), 1);
            }
            other => panic!("expected trivial, got {other:?}"),
        }
    }

    #[test]
    fn decide_generator_is_nontrivial_via_quotient() {
        let p = z2_generic();
        let w = p.parse_word("x").unwrap();
        match decide_word(&w, &p, 100_000).unwrap() {
            Verdict::Nontrivial { witness: NontrivialWitness::Quotient(q) } => {
                assert!(q.satisfies_relators(&p));
                assert!(!q.maps_to_identity(&w));
            }
            other => panic!("expected nontrivial, got {other:?}"),
        }
    }

    #[test]
    fn decide_free_and_structured_fast_paths() {
        let free = Presentation::free(&["x", "y"]);
        let w = free.parse_word("x*y*x^-1*y^-1").unwrap();
        assert!(matches!(
            decide_word(&w, &free, 10).unwrap(),
            Verdict::Nontrivial { witness: NontrivialWitness::FreeReduced }
        ));

        let prod = Presentation::product_of_frees(&[&["x", "y"], &["z", "w"]]);
        let w = prod.parse_word("x*z*x^-1*z^-1").unwrap();
        assert!(matches!(
            decide_word(&w, &prod, 10).unwrap(),
            Verdict::Trivial { .. }
        ));
        let v = prod.parse_word("x*z*y*z^-1").unwrap();
        assert!(matches!(
            decide_word(&v, &prod, 10).unwrap(),
            Verdict::Nontrivial { .. }
        ));
    }

    #[test]
    fn generic_path_agrees_with_abelian_decider() {
        let abelian = Presentation::free_abelian(&["x", "y"]);
        let generic = abelian.as_generic();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let len = rng.gen_range(0..=8usize);
            let raw: Vec<i32> = (0..len)
                .map(|_| {
                    let i = rng.gen_range(1..=2i32);
                    if rng.gen_bool(0.5) {
                        i
                    } else {
                        -i
                    }
                })
                .collect();
            let w = Word::reduce(&raw, 2).unwrap();
            let fast = decide_word(&w, &abelian, 10).unwrap();
            let slow = decide_word(&w, &generic, 3_000_000).unwrap();
            match (&fast, &slow) {
                (Verdict::Trivial { .. }, Verdict::Trivial { .. }) => {}
                (Verdict::Nontrivial { .. }, Verdict::Nontrivial { .. }) => {}
                other => panic!("disagreement on {w:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn witnesses_serialize_to_json() {
        let p = z2_generic();
        let w = p.parse_word("x").unwrap();
        let v = decide_word(&w, &p, 100_000).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: Verdict = serde_json::from_str(&json).unwrap();
        assert_eq!(v, back);
    }
}
