//! Maximum spanning arborescence decoding with a single-root constraint.
//!
//! The search follows Chu-Liu/Edmonds: every node greedily picks its best
//! incoming arc, cycles are contracted into a single node with incoming arcs
//! rescored relative to the arc they would replace, and the contraction is
//! expanded again once the reduced problem is solved. The single-root
//! constraint is handled by re-solving with exactly one permitted root arc
//! whenever the unconstrained optimum has several.

use thiserror::Error;

use crate::conllu::validate_heads;
use crate::scalar::Scalar;

/// Largest sentence `brute_force_mst` enumerates.
pub const BRUTE_FORCE_LIMIT: usize = 8;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("brute-force search supports at most {limit} tokens, got {n}")]
    SizeLimitExceeded { n: usize, limit: usize },
}

/// Head scores for a sentence of `n` tokens: `score(h, d)` rates attaching
/// dependent `d` in `1..=n` to head `h` in `0..=n`, `h != d`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArcScores<T> {
    n: usize,
    // (n + 1) x (n + 1), row = head, column = dependent
    data: Vec<T>,
}

impl<T: Scalar> ArcScores<T> {
    /// All in-domain scores zero.
    pub fn zeros(n: usize) -> Self {
        ArcScores {
            n,
            data: vec![T::zero(); (n + 1) * (n + 1)],
        }
    }

    /// Builds a table from `f(h, d)` evaluated on the domain.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut scores = Self::zeros(n);
        for h in 0..=n {
            for d in 1..=n {
                if h != d {
                    scores.set(h, d, f(h, d));
                }
            }
        }
        scores
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Score of the arc `h -> d`; self arcs are `-inf`.
    pub fn score(&self, h: usize, d: usize) -> T {
        debug_assert!(d >= 1 && d <= self.n && h <= self.n);
        if h == d {
            T::neg_infinity()
        } else {
            self.data[h * (self.n + 1) + d]
        }
    }

    pub fn set(&mut self, h: usize, d: usize, value: T) {
        assert!(d >= 1 && d <= self.n && h <= self.n && h != d);
        self.data[h * (self.n + 1) + d] = value;
    }

    /// Sum of `score(heads[d-1], d)`.
    pub fn tree_score(&self, heads: &[usize]) -> T {
        heads
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &h)| acc + self.score(h, i + 1))
    }
}

#[derive(Clone, Copy, Debug)]
struct Edge<T> {
    from: usize,
    to: usize,
    weight: T,
    // index into the edge list one level up (or into the original arcs)
    origin: usize,
}

/// Maximum spanning arborescence rooted at node 0 over `nodes` nodes.
/// Returns indices into `edges` of the selected arcs, one per non-root node.
fn chu_liu_edmonds<T: Scalar>(nodes: usize, edges: &[Edge<T>]) -> Vec<usize> {
    let mut best_in: Vec<Option<usize>> = vec![None; nodes];
    for (i, e) in edges.iter().enumerate() {
        if e.to == 0 || e.from == e.to {
            continue;
        }
        match best_in[e.to] {
            Some(j) if edges[j].weight >= e.weight => {}
            _ => best_in[e.to] = Some(i),
        }
    }

    let cycle = find_cycle(nodes, edges, &best_in);
    let cycle = match cycle {
        None => return best_in.iter().flatten().copied().collect(),
        Some(c) => c,
    };

    let mut in_cycle = vec![false; nodes];
    for &v in &cycle {
        in_cycle[v] = true;
    }

    // Renumber: nodes outside the cycle keep their relative order, the
    // contracted cycle becomes the last node.
    let mut new_id = vec![0; nodes];
    let mut next = 0;
    for v in 0..nodes {
        if !in_cycle[v] {
            new_id[v] = next;
            next += 1;
        }
    }
    let cycle_node = next;
    for &v in &cycle {
        new_id[v] = cycle_node;
    }

    let mut contracted = Vec::with_capacity(edges.len());
    for (i, e) in edges.iter().enumerate() {
        let (fin, tin) = (in_cycle[e.from], in_cycle[e.to]);
        if fin && tin {
            continue;
        }
        let weight = if tin {
            let replaced = best_in[e.to].expect("cycle nodes have an incoming arc");
            e.weight - edges[replaced].weight
        } else {
            e.weight
        };
        contracted.push(Edge {
            from: new_id[e.from],
            to: new_id[e.to],
            weight,
            origin: i,
        });
    }

    let chosen = chu_liu_edmonds(cycle_node + 1, &contracted);

    let mut result: Vec<usize> = Vec::with_capacity(nodes);
    let mut entered = None;
    for c in chosen {
        let orig = contracted[c].origin;
        if in_cycle[edges[orig].to] {
            entered = Some(edges[orig].to);
        }
        result.push(orig);
    }
    let entered = entered.expect("contracted node receives exactly one arc");
    for &v in &cycle {
        if v != entered {
            result.push(best_in[v].expect("cycle nodes have an incoming arc"));
        }
    }
    result
}

fn find_cycle<T>(nodes: usize, edges: &[Edge<T>], best_in: &[Option<usize>]) -> Option<Vec<usize>> {
    let mut state = vec![0u8; nodes];
    for start in 0..nodes {
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            match best_in[v] {
                Some(e) => v = edges[e].from,
                None => break,
            }
        }
        if state[v] == 1 && best_in[v].is_some() {
            let pos = path.iter().position(|&p| p == v)?;
            return Some(path[pos..].to_vec());
        }
        for p in path {
            state[p] = 2;
        }
    }
    None
}

/// Unconstrained (possibly multi-rooted) optimum, with root arcs limited to
/// `root_child` when given.
fn solve<T: Scalar>(scores: &ArcScores<T>, root_child: Option<usize>) -> Vec<usize> {
    let n = scores.n();
    let mut edges = Vec::with_capacity(n * n);
    for h in 0..=n {
        for d in 1..=n {
            if h == d || (h == 0 && root_child.is_some_and(|r| r != d)) {
                continue;
            }
            edges.push(Edge {
                from: h,
                to: d,
                weight: scores.score(h, d),
                origin: edges.len(),
            });
        }
    }
    let mut heads = vec![0; n];
    for e in chu_liu_edmonds(n + 1, &edges) {
        heads[edges[e].to - 1] = edges[e].from;
    }
    heads
}

/// Highest-scoring tree in which exactly one token attaches to the root.
///
/// Ties are resolved deterministically but not in any documented order.
pub fn decode_mst<T: Scalar>(scores: &ArcScores<T>) -> Vec<usize> {
    let n = scores.n();
    if n == 0 {
        return Vec::new();
    }
    let free = solve(scores, None);
    if free.iter().filter(|&&h| h == 0).count() == 1 {
        return free;
    }

    let mut best: Option<(T, Vec<usize>)> = None;
    for r in 1..=n {
        let heads = solve(scores, Some(r));
        let total = scores.tree_score(&heads);
        if best.as_ref().is_none_or(|(b, _)| total > *b) {
            best = Some((total, heads));
        }
    }
    best.map(|(_, h)| h).unwrap_or_default()
}

/// Exhaustive search over all single-rooted trees, returning the best one
/// and, among equally good trees, the lexicographically smallest head
/// vector.
pub fn brute_force_mst<T: Scalar>(scores: &ArcScores<T>) -> Result<Vec<usize>, DecodeError> {
    let n = scores.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(DecodeError::SizeLimitExceeded {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut heads = vec![0; n];
    let mut best: Option<(T, Vec<usize>)> = None;
    enumerate(scores, &mut heads, 0, &mut best);
    Ok(best.map(|(_, h)| h).unwrap_or_default())
}

// Head vectors are visited in lexicographic order; prefixes that already
// contain two roots or a cycle are skipped since no completion is a tree.
fn enumerate<T: Scalar>(scores: &ArcScores<T>, heads: &mut Vec<usize>, pos: usize, best: &mut Option<(T, Vec<usize>)>) {
    let n = heads.len();
    if pos == n {
        if validate_heads(heads).is_ok() {
            let total = scores.tree_score(heads);
            if best.as_ref().is_none_or(|(b, _)| total > *b) {
                *best = Some((total, heads.clone()));
            }
        }
        return;
    }
    for h in 0..=n {
        if h == pos + 1 {
            continue;
        }
        heads[pos] = h;
        if prefix_is_viable(heads, pos + 1) {
            enumerate(scores, heads, pos + 1, best);
        }
    }
}

fn prefix_is_viable(heads: &[usize], assigned: usize) -> bool {
    if heads[..assigned].iter().filter(|&&h| h == 0).count() > 1 {
        return false;
    }
    let d = assigned;
    let mut v = heads[d - 1];
    let mut steps = 0;
    while v != 0 && v <= assigned && steps <= assigned {
        if v == d {
            return false;
        }
        v = heads[v - 1];
        steps += 1;
    }
    true
}
