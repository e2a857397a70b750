//! Graph families and the chains built on them: cycles, tori, hypercubes,
//! complete graphs, tree balls, Cayley graphs, and the wreath-product
//! (lamplighter) chains.
//!
//! The lamplighter walk compounds its three sub-steps (randomize the
//! departure lamp, move one lazy step on the base graph, randomize the
//! arrival lamp) into a single transition row. The group-generator walk on
//! the lamplighter *group* (move or switch one lamp) is a different object
//! and lives in `groups`.

use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

use crate::chain::FiniteChain;
use crate::error::{MixError, Result};

/// Undirected graph as per-vertex neighbor lists.
#[derive(Debug, Clone)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
}

impl Graph {
    /// Build from an edge list; validates indices and symmetrizes.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(MixError::Construction(format!(
                    "edge ({u},{v}) out of range for {n} vertices"
                )));
            }
            if u == v {
                return Err(MixError::Construction(format!("self loop at {u}")));
            }
            adj[u].push(v as u32);
            adj[v].push(u as u32);
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Graph { adj })
    }

    pub fn n_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].iter().map(|&u| u as usize)
    }

    pub fn is_regular(&self) -> bool {
        let d = self.degree(0);
        (0..self.n_vertices()).all(|v| self.degree(v) == d)
    }

    pub fn is_connected(&self) -> bool {
        if self.n_vertices() == 0 {
            return false;
        }
        self.distances_from(0).iter().all(|&d| d != u32::MAX)
    }

    /// BFS distances from `v` (`u32::MAX` marks unreachable vertices).
    pub fn distances_from(&self, v: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n_vertices()];
        let mut queue = VecDeque::new();
        dist[v] = 0;
        queue.push_back(v);
        while let Some(u) = queue.pop_front() {
            for w in self.neighbors(u) {
                if dist[w] == u32::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn diameter(&self) -> Result<u32> {
        let mut diam = 0;
        for v in 0..self.n_vertices() {
            for d in self.distances_from(v) {
                if d == u32::MAX {
                    return Err(MixError::Construction("disconnected graph".into()));
                }
                diam = diam.max(d);
            }
        }
        Ok(diam)
    }

    /// Edge-list text form: one `u v` pair per line, 0-based, `u < v`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for u in 0..self.n_vertices() {
            for v in self.neighbors(u) {
                if u < v {
                    out.push_str(&format!("{u} {v}\n"));
                }
            }
        }
        out
    }

    /// Parse the edge-list text form.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut n = 0usize;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let u: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| MixError::Construction(format!("bad edge line: {line}")))?;
            let v: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| MixError::Construction(format!("bad edge line: {line}")))?;
            n = n.max(u + 1).max(v + 1);
            edges.push((u, v));
        }
        Graph::from_edges(n, &edges)
    }
}

/// Cycle on `n >= 3` vertices.
pub fn cycle(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(MixError::Construction(format!(
            "cycle needs n >= 3, got {n}"
        )));
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    Graph::from_edges(n, &edges)
}

/// Complete graph on `n >= 2` vertices.
pub fn complete(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(MixError::Construction("complete graph needs n >= 2".into()));
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            edges.push((u, v));
        }
    }
    Graph::from_edges(n, &edges)
}

/// `d`-dimensional torus `Z_n^d` with `n >= 3`. Vertex labels are
/// lexicographic in the coordinates, least-significant coordinate first:
/// vertex id `= sum_i c_i n^i`.
pub fn torus(n: usize, d: usize) -> Result<Graph> {
    if n < 3 || d < 1 {
        return Err(MixError::Construction(format!(
            "torus needs n >= 3 and d >= 1, got ({n},{d})"
        )));
    }
    let total = n
        .checked_pow(d as u32)
        .ok_or_else(|| MixError::SizeCap("torus size overflow".into()))?;
    let mut edges = Vec::new();
    for v in 0..total {
        let mut coords = Vec::with_capacity(d);
        let mut rest = v;
        for _ in 0..d {
            coords.push(rest % n);
            rest /= n;
        }
        let mut base = 1usize;
        for i in 0..d {
            let mut up = coords.clone();
            up[i] = (coords[i] + 1) % n;
            let u: usize = up
                .iter()
                .enumerate()
                .map(|(j, &c)| c * n.pow(j as u32))
                .sum();
            edges.push((v, u));
            base *= n;
        }
        let _ = base;
    }
    Graph::from_edges(total, &edges)
}

/// Hypercube `{0,1}^d`; vertex id is the little-endian bit pattern.
pub fn hypercube(d: usize) -> Result<Graph> {
    if d < 1 {
        return Err(MixError::Construction("hypercube needs d >= 1".into()));
    }
    if d > 24 {
        return Err(MixError::SizeCap(format!(
            "hypercube dimension {d} too large"
        )));
    }
    let total = 1usize << d;
    let mut edges = Vec::new();
    for v in 0..total {
        for i in 0..d {
            let u = v ^ (1 << i);
            if v < u {
                edges.push((v, u));
            }
        }
    }
    Graph::from_edges(total, &edges)
}

/// Ball of the given radius in the infinite `d`-regular tree, truncated.
/// The root is vertex 0; level `r >= 1` holds `d (d-1)^(r-1)` vertices in
/// breadth-first order.
pub fn dary_tree_ball(d: usize, radius: usize) -> Result<Graph> {
    if d < 2 {
        return Err(MixError::Construction("tree needs degree >= 2".into()));
    }
    let mut edges = Vec::new();
    let mut level: Vec<usize> = vec![0];
    let mut next_id = 1usize;
    for r in 0..radius {
        let children_per = if r == 0 { d } else { d - 1 };
        let mut next_level = Vec::new();
        for &v in &level {
            for _ in 0..children_per {
                edges.push((v, next_id));
                next_level.push(next_id);
                next_id += 1;
                if next_id > 4_000_000 {
                    return Err(MixError::SizeCap("tree ball too large".into()));
                }
            }
        }
        level = next_level;
    }
    Graph::from_edges(next_id, &edges)
}

/// Lazy simple random walk on a connected graph:
/// `P(x,x) = 1/2`, `P(x,y) = 1/(2 deg(x))` for neighbors.
/// Stationary measure is proportional to the degrees.
///
/// ```
/// use mixlab::graphs::{cycle, lazy_srw};
///
/// let walk = lazy_srw(&cycle(4).unwrap()).unwrap();
/// assert_eq!(walk.prob(0, 0), 0.5);
/// assert_eq!(walk.prob(0, 1), 0.25);
/// ```
pub fn lazy_srw(g: &Graph) -> Result<FiniteChain> {
    srw_impl(g, true)
}

/// Non-lazy simple random walk: uniform step to a neighbor.
pub fn srw(g: &Graph) -> Result<FiniteChain> {
    srw_impl(g, false)
}

fn srw_impl(g: &Graph, lazy: bool) -> Result<FiniteChain> {
    if !g.is_connected() {
        return Err(MixError::Construction(
            "random walk needs a connected graph".into(),
        ));
    }
    let n = g.n_vertices();
    let mut rows = Vec::with_capacity(n);
    for x in 0..n {
        let deg = g.degree(x) as f64;
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(g.degree(x) + 1);
        if lazy {
            row.push((x, 0.5));
            for y in g.neighbors(x) {
                row.push((y, 0.5 / deg));
            }
        } else {
            for y in g.neighbors(x) {
                row.push((y, 1.0 / deg));
            }
        }
        rows.push(row);
    }
    let total_degree: f64 = (0..n).map(|x| g.degree(x) as f64).sum();
    let pi: Vec<f64> = (0..n).map(|x| g.degree(x) as f64 / total_degree).collect();
    FiniteChain::from_sparse_rows(n, rows)?.with_stationary(pi)
}

/// Random walk on `{0..n}` with absorbing endpoints; non-lazy inside unless
/// `lazy` is set. The classical gambler's ruin chain.
pub fn gamblers_ruin_chain(n: usize, lazy: bool) -> Result<FiniteChain> {
    if n < 2 {
        return Err(MixError::Construction("gambler's ruin needs n >= 2".into()));
    }
    let mut rows = Vec::with_capacity(n + 1);
    rows.push(vec![(0, 1.0)]);
    for k in 1..n {
        if lazy {
            rows.push(vec![(k - 1, 0.25), (k, 0.5), (k + 1, 0.25)]);
        } else {
            rows.push(vec![(k - 1, 0.5), (k + 1, 0.5)]);
        }
    }
    rows.push(vec![(n, 1.0)]);
    FiniteChain::from_sparse_rows(n + 1, rows)
}

/// Scope of a Cayley-graph enumeration.
#[derive(Debug, Clone, Copy)]
pub enum CayleyScope {
    /// Enumerate the whole group (must be finite and below the cap).
    Full { cap: usize },
    /// Enumerate the ball of the given radius around the identity.
    Ball { radius: usize, cap: usize },
}

/// Cayley graph of a group presented by a symmetric generating set and a
/// composition callback. Returns the graph together with the enumerated
/// elements (index `i` of the graph is `elements[i]`; the identity is 0).
///
/// Generating-set symmetry is verified on the enumerated portion: every
/// edge must be seen from both endpoints.
pub fn cayley_graph<E, F>(
    identity: E,
    generators: &[E],
    compose: F,
    scope: CayleyScope,
) -> Result<(Graph, Vec<E>)>
where
    E: Clone + Eq + Hash,
    F: Fn(&E, &E) -> E,
{
    if generators.is_empty() {
        return Err(MixError::Construction("empty generating set".into()));
    }
    let (radius, cap) = match scope {
        CayleyScope::Full { cap } => (usize::MAX, cap),
        CayleyScope::Ball { radius, cap } => (radius, cap),
    };
    let mut index: HashMap<E, usize> = HashMap::new();
    let mut elements = vec![identity.clone()];
    let mut dist = vec![0usize];
    index.insert(identity, 0);
    let mut queue = VecDeque::new();
    queue.push_back(0usize);
    let mut directed_edges: Vec<(usize, usize)> = Vec::new();
    while let Some(i) = queue.pop_front() {
        if dist[i] >= radius {
            continue;
        }
        let e = elements[i].clone();
        for s in generators {
            let f = compose(&e, s);
            let j = match index.get(&f) {
                Some(&j) => j,
                None => {
                    let j = elements.len();
                    if j >= cap {
                        return Err(MixError::SizeCap(format!(
                            "cayley enumeration exceeded cap {cap}"
                        )));
                    }
                    index.insert(f.clone(), j);
                    elements.push(f);
                    dist.push(dist[i] + 1);
                    queue.push_back(j);
                    j
                }
            };
            if i != j {
                directed_edges.push((i, j));
            }
        }
    }
    // Symmetry check: x ~ xs must be seen in both directions whenever both
    // endpoints sit strictly inside the enumerated radius.
    let mut seen: std::collections::HashSet<(usize, usize)> =
        directed_edges.iter().copied().collect();
    if radius == usize::MAX {
        for &(i, j) in &directed_edges {
            if !seen.contains(&(j, i)) {
                return Err(MixError::Construction(
                    "generating set is not symmetric".into(),
                ));
            }
        }
    } else {
        for &(i, j) in &directed_edges {
            if dist[i] < radius && dist[j] < radius && !seen.contains(&(j, i)) {
                return Err(MixError::Construction(
                    "generating set is not symmetric".into(),
                ));
            }
        }
    }
    seen.clear();
    let n = elements.len();
    let graph = Graph::from_edges(n, &directed_edges)?;
    Ok((graph, elements))
}

/// Encode a lamp configuration plus marker position as a state id:
/// the lamp vector is read as a little-endian integer in base `h`, then the
/// marker index is appended (`id = lamps * n + marker`).
pub fn encode_lamp_state(lamps: &[usize], marker: usize, h: usize, n: usize) -> usize {
    debug_assert_eq!(lamps.len(), n);
    let mut acc = 0usize;
    for &l in lamps.iter().rev() {
        debug_assert!(l < h);
        acc = acc * h + l;
    }
    acc * n + marker
}

/// Inverse of `encode_lamp_state`.
pub fn decode_lamp_state(id: usize, h: usize, n: usize) -> (Vec<usize>, usize) {
    let marker = id % n;
    let mut rest = id / n;
    let mut lamps = Vec::with_capacity(n);
    for _ in 0..n {
        lamps.push(rest % h);
        rest /= h;
    }
    (lamps, marker)
}

/// Default cap on wreath-product state spaces.
pub const WREATH_STATE_CAP: usize = 1 << 20;

/// The 0-1 lamplighter chain on `Z_2 wr G`: one step picks `y` adjacent to
/// `x` by the lazy walk on `G`, then updates the lamps at `x` and at `y`
/// independently to uniform random values.
///
/// States are encoded by `encode_lamp_state` with `h = 2`. The stationary
/// measure is the verified product `pi_G(x) * 2^(-|G|)` and the chain is
/// reversible.
pub fn lamplighter_chain(g: &Graph) -> Result<FiniteChain> {
    let uniform2 = FiniteChain::from_dense_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]])?;
    generalized_lamplighter_chain(g, &uniform2)
}

/// The generalized lamplighter chain on `H wr G`: refresh the machine at
/// the departure site by one step of the lamp chain, move one lazy step on
/// the base graph, refresh the machine at the arrival site. When the lazy
/// move stays put the two refreshes compound on the same machine.
///
/// The lamp chain must be lazy, ergodic and reversible. The stationary
/// measure is the verified product `(pi_H)^{tensor |G|} x pi_G`.
pub fn generalized_lamplighter_chain(g: &Graph, lamp: &FiniteChain) -> Result<FiniteChain> {
    if !g.is_connected() {
        return Err(MixError::Construction(
            "base graph must be connected".into(),
        ));
    }
    let h = lamp.n_states();
    let pi_h = lamp
        .stationary()
        .map_err(|_| MixError::Construction("lamp chain has no stationary measure".into()))?
        .to_vec();
    if !lamp.is_reversible() {
        return Err(MixError::Construction(
            "lamp chain must be reversible".into(),
        ));
    }
    for x in 0..h {
        if lamp.prob(x, x) < 0.5 - 1e-12 {
            return Err(MixError::Construction("lamp chain must be lazy".into()));
        }
    }
    if pi_h.iter().any(|p| *p <= 0.0) {
        return Err(MixError::Construction("lamp chain must be ergodic".into()));
    }

    let n = g.n_vertices();
    let mut states = 1usize;
    for _ in 0..n {
        states = states
            .checked_mul(h)
            .ok_or_else(|| MixError::SizeCap("wreath state space overflows".into()))?;
        if states > WREATH_STATE_CAP {
            return Err(MixError::SizeCap(format!(
                "wreath state space exceeds cap {WREATH_STATE_CAP}"
            )));
        }
    }
    states = states
        .checked_mul(n)
        .filter(|&s| s <= WREATH_STATE_CAP)
        .ok_or_else(|| {
            MixError::SizeCap(format!("wreath state space exceeds cap {WREATH_STATE_CAP}"))
        })?;

    let base = lazy_srw(g)?;
    let pi_g = base.stationary()?.to_vec();

    // Two-step lamp kernel for the stay-put case.
    let mut lamp2 = vec![vec![0.0; h]; h];
    for a in 0..h {
        for (b, p1) in lamp.matrix().row(a) {
            for (c, p2) in lamp.matrix().row(b) {
                lamp2[a][c] += p1 * p2;
            }
        }
    }

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); states];
    let h_pows: Vec<usize> = (0..n)
        .scan(1usize, |acc, _| {
            let v = *acc;
            *acc *= h;
            Some(v)
        })
        .collect();

    for id in 0..states {
        let (lamps, x) = decode_lamp_state(id, h, n);
        let row = &mut rows[id];
        for (y, p_move) in base.matrix().row(x) {
            if y == x {
                for (c, &p) in lamp2[lamps[x]].iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let delta = (c as i64 - lamps[x] as i64) * h_pows[x] as i64 * n as i64;
                    let target = (id as i64 + delta) as usize;
                    row.push((target, p_move * p));
                }
            } else {
                for (b, p1) in lamp.matrix().row(lamps[x]) {
                    for (c, p2) in lamp.matrix().row(lamps[y]) {
                        let delta_x = (b as i64 - lamps[x] as i64) * h_pows[x] as i64;
                        let delta_y = (c as i64 - lamps[y] as i64) * h_pows[y] as i64;
                        let target = ((id / n) as i64 + delta_x + delta_y) as usize * n + y;
                        row.push((target, p_move * p1 * p2));
                    }
                }
            }
        }
    }

    // Product-form stationary measure.
    let mut pi = vec![0.0; states];
    for (id, p) in pi.iter_mut().enumerate() {
        let (lamps, x) = decode_lamp_state(id, h, n);
        let mut acc = pi_g[x];
        for &l in &lamps {
            acc *= pi_h[l];
        }
        *p = acc;
    }

    let chain = FiniteChain::from_sparse_rows(states, rows)?.with_stationary(pi)?;
    if !chain.is_reversible() {
        return Err(MixError::Construction(
            "wreath chain failed the reversibility check".into(),
        ));
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_and_friends_shapes() {
        let c3 = cycle(3).unwrap();
        assert_eq!(c3.n_vertices(), 3);
        assert!(c3.is_regular());
        assert_eq!(c3.degree(0), 2);
        assert!(cycle(2).is_err());

        let t = torus(3, 2).unwrap();
        assert_eq!(t.n_vertices(), 9);
        assert!(t.is_regular());
        assert_eq!(t.degree(0), 4);

        let h = hypercube(3).unwrap();
        assert_eq!(h.n_vertices(), 8);
        assert_eq!(h.degree(5), 3);

        let k5 = complete(5).unwrap();
        assert_eq!(k5.degree(2), 4);

        // d-regular tree ball: 1 + 3 * (2^r - 1) vertices for d = 3.
        let ball = dary_tree_ball(3, 4).unwrap();
        assert_eq!(ball.n_vertices(), 46);
        assert_eq!(ball.degree(0), 3);
    }

    #[test]
    fn lazy_srw_on_cycle_rows() {
        let c4 = cycle(4).unwrap();
        let p = lazy_srw(&c4).unwrap();
        assert!((p.prob(0, 0) - 0.5).abs() < 1e-15);
        assert!((p.prob(0, 1) - 0.25).abs() < 1e-15);
        assert!((p.prob(0, 3) - 0.25).abs() < 1e-15);
        assert_eq!(p.prob(0, 2), 0.0);
        assert!(p.is_reversible());
    }

    #[test]
    fn lazy_srw_on_k2_is_flat() {
        let k2 = complete(2).unwrap();
        let p = lazy_srw(&k2).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                assert!((p.prob(x, y) - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lazy_srw_on_h3_uniform_stationary() {
        let h3 = hypercube(3).unwrap();
        let p = lazy_srw(&h3).unwrap();
        let pi = p.stationary().unwrap();
        for v in pi {
            assert!((v - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn srw_rejects_disconnected() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(lazy_srw(&g).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let t = torus(3, 2).unwrap();
        let text = t.to_edge_list();
        let back = Graph::from_edge_list(&text).unwrap();
        assert_eq!(back.n_vertices(), t.n_vertices());
        for v in 0..t.n_vertices() {
            let a: Vec<usize> = t.neighbors(v).collect();
            let b: Vec<usize> = back.neighbors(v).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn cayley_zn_is_cycle() {
        let (g, _) = cayley_graph(
            0i64,
            &[1, -1],
            |a, b| (a + b).rem_euclid(7),
            CayleyScope::Full { cap: 100 },
        )
        .unwrap();
        assert_eq!(g.n_vertices(), 7);
        assert!(g.is_regular());
        assert_eq!(g.degree(0), 2);
        assert_eq!(g.diameter().unwrap(), 3);
    }

    #[test]
    fn cayley_z2d_is_hypercube() {
        let gens: Vec<u32> = (0..4).map(|i| 1u32 << i).collect();
        let (g, elements) =
            cayley_graph(0u32, &gens, |a, b| a ^ b, CayleyScope::Full { cap: 100 }).unwrap();
        assert_eq!(g.n_vertices(), 16);
        let reference = hypercube(4).unwrap();
        // Canonical relabeling: element bits are exactly the hypercube ids.
        for (i, &e) in elements.iter().enumerate() {
            let mine: Vec<u32> = g.neighbors(i).map(|j| elements[j]).collect();
            let mut mine_sorted = mine.clone();
            mine_sorted.sort_unstable();
            let mut expect: Vec<u32> = reference.neighbors(e as usize).map(|x| x as u32).collect();
            expect.sort_unstable();
            assert_eq!(mine_sorted, expect);
        }
    }

    #[test]
    fn cayley_z3_squared_is_torus() {
        let gens = vec![(1i64, 0i64), (-1, 0), (0, 1), (0, -1)];
        let (g, elements) = cayley_graph(
            (0i64, 0i64),
            &gens,
            |a, b| ((a.0 + b.0).rem_euclid(3), (a.1 + b.1).rem_euclid(3)),
            CayleyScope::Full { cap: 100 },
        )
        .unwrap();
        assert_eq!(g.n_vertices(), 9);
        let reference = torus(3, 2).unwrap();
        // Relabel (a, b) -> a + 3 b (coordinate order of the torus builder).
        for (i, e) in elements.iter().enumerate() {
            let id = (e.0 + 3 * e.1) as usize;
            let mut mine: Vec<usize> = g
                .neighbors(i)
                .map(|j| (elements[j].0 + 3 * elements[j].1) as usize)
                .collect();
            mine.sort_unstable();
            let mut expect: Vec<usize> = reference.neighbors(id).collect();
            expect.sort_unstable();
            assert_eq!(mine, expect);
        }
    }

    #[test]
    fn cayley_rejects_asymmetric_generators() {
        let r = cayley_graph(
            0i64,
            &[1],
            |a, b| (a + b).rem_euclid(5),
            CayleyScope::Full { cap: 100 },
        );
        assert!(r.is_err());
    }

    #[test]
    fn lamp_state_codec_round_trip() {
        for h in [2usize, 3] {
            let n = 4;
            let total = h.pow(n as u32) * n;
            for id in 0..total {
                let (lamps, marker) = decode_lamp_state(id, h, n);
                assert_eq!(encode_lamp_state(&lamps, marker, h, n), id);
            }
        }
    }

    #[test]
    fn lamplighter_k2_matches_hand_built_kernel() {
        let k2 = complete(2).unwrap();
        let chain = lamplighter_chain(&k2).unwrap();
        assert_eq!(chain.n_states(), 8);
        // Hand enumeration from ((f0,f1), x=0): stay (p 1/2) randomizes f0,
        // move (p 1/2) randomizes both lamps.
        // id = (f0 + 2 f1) * 2 + x.
        for f0 in 0..2usize {
            for f1 in 0..2usize {
                let id = (f0 + 2 * f1) * 2;
                for g0 in 0..2usize {
                    for g1 in 0..2usize {
                        for y in 0..2usize {
                            let target = (g0 + 2 * g1) * 2 + y;
                            let expect = if y == 0 {
                                if g1 == f1 {
                                    0.25
                                } else {
                                    0.0
                                }
                            } else {
                                0.125
                            };
                            assert!(
                                (chain.prob(id, target) - expect).abs() < 1e-14,
                                "({f0}{f1},0) -> ({g0}{g1},{y})"
                            );
                        }
                    }
                }
            }
        }
        // pi = pi_G(x) * 2^{-|G|} and the chain is reversible.
        let pi = chain.stationary().unwrap();
        for p in pi {
            assert!((p - 1.0 / 8.0).abs() < 1e-12);
        }
        assert!(chain.is_reversible());
    }

    #[test]
    fn lamplighter_state_count() {
        for n in 3..=6 {
            let g = cycle(n).unwrap();
            let chain = lamplighter_chain(&g).unwrap();
            assert_eq!(chain.n_states(), (1 << n) * n);
        }
    }

    #[test]
    fn generalized_lamplighter_product_measure() {
        // H = lazy walk on C_3, G = K_2: 18 states, pi = pi_H^2 x pi_G.
        let lamp = lazy_srw(&cycle(3).unwrap()).unwrap();
        let k2 = complete(2).unwrap();
        let chain = generalized_lamplighter_chain(&k2, &lamp).unwrap();
        assert_eq!(chain.n_states(), 18);
        let pi = chain.stationary().unwrap();
        for p in pi {
            assert!((p - 1.0 / 18.0).abs() < 1e-12);
        }
        assert!(chain.is_reversible());
    }

    #[test]
    fn generalized_lamplighter_matches_substep_simulation() {
        // Independent oracle: sample the three sub-steps (refresh the
        // departure machine, lazy base move, refresh the arrival machine)
        // directly and compare the empirical row with the built kernel.
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        let lamp = lazy_srw(&cycle(3).unwrap()).unwrap();
        let k2 = complete(2).unwrap();
        let base = lazy_srw(&k2).unwrap();
        let chain = generalized_lamplighter_chain(&k2, &lamp).unwrap();
        let start = encode_lamp_state(&[1, 2], 0, 3, 2);
        let runs = 400_000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(271);
        let mut counts = vec![0u64; 18];
        for _ in 0..runs {
            let (mut lamps, x) = decode_lamp_state(start, 3, 2);
            lamps[x] = lamp.sample_step(lamps[x], &mut rng);
            let y = base.sample_step(x, &mut rng);
            lamps[y] = lamp.sample_step(lamps[y], &mut rng);
            counts[encode_lamp_state(&lamps, y, 3, 2)] += 1;
        }
        let expected: Vec<f64> = (0..18).map(|j| chain.prob(start, j)).collect();
        let p = crate::coupling::chi_square_p_value(&counts, &expected).unwrap();
        assert!(p > 1e-3, "kernel row rejected by simulation: p = {p}");
    }

    #[test]
    fn generalized_lamplighter_rejects_bad_lamps() {
        let k2 = complete(2).unwrap();
        // Non-reversible 3-state rotation (also non-lazy).
        let rot = FiniteChain::from_dense_rows(vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        assert!(generalized_lamplighter_chain(&k2, &rot).is_err());
        // Reversible but not lazy.
        let nonlazy = srw(&cycle(4).unwrap()).unwrap();
        assert!(generalized_lamplighter_chain(&k2, &nonlazy).is_err());
    }

    #[test]
    fn z2_lamp_chain_specializes_generalized() {
        let g = cycle(3).unwrap();
        let a = lamplighter_chain(&g).unwrap();
        let uniform2 = FiniteChain::from_dense_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let b = generalized_lamplighter_chain(&g, &uniform2).unwrap();
        assert_eq!(a.n_states(), b.n_states());
        for x in 0..a.n_states() {
            for y in 0..a.n_states() {
                assert!((a.prob(x, y) - b.prob(x, y)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lamplighter_cap_rejects_large_bases() {
        let g = cycle(25).unwrap();
        assert!(matches!(
            lamplighter_chain(&g),
            Err(crate::error::MixError::SizeCap(_))
        ));
    }

    #[test]
    fn gamblers_ruin_shape() {
        let c = gamblers_ruin_chain(4, false).unwrap();
        assert_eq!(c.n_states(), 5);
        assert_eq!(c.prob(0, 0), 1.0);
        assert_eq!(c.prob(4, 4), 1.0);
        assert!((c.prob(2, 1) - 0.5).abs() < 1e-15);
    }
}
