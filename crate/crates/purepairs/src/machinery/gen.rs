//! Deterministic instance generators shared by tests, examples, and the
//! campaign runner.  Every generator is a pure function of its parameters.

use crate::blockade::Blockade;
use crate::graph::{mix, Graph};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn block_starts(sizes: &[usize]) -> Vec<usize> {
    let mut starts = vec![0usize];
    for s in sizes {
        starts.push(starts.last().unwrap() + s);
    }
    starts
}

fn blockade_over(sizes: &[usize]) -> Blockade {
    let starts = block_starts(sizes);
    Blockade::from_vertex_sets(
        (0..sizes.len()).map(|i| (starts[i]..starts[i + 1]).collect()).collect(),
    )
}

/// Complete between blocks, empty inside.
pub fn complete_between(sizes: &[usize]) -> (Graph, Blockade) {
    let starts = block_starts(sizes);
    let n = *starts.last().unwrap();
    let mut g = Graph::new(n);
    for i in 0..sizes.len() {
        for j in i + 1..sizes.len() {
            for u in starts[i]..starts[i + 1] {
                for w in starts[j]..starts[j + 1] {
                    g.add_edge(u, w);
                }
            }
        }
    }
    (g, blockade_over(sizes))
}

/// Complete between blocks except one seeded perfect matching per pair, so
/// every vertex misses exactly one vertex in each other block.  Such a
/// blockade has no anticomplete pair larger than a single vertex each way.
pub fn dense_matched_blocks(sizes: &[usize], seed: u64) -> (Graph, Blockade) {
    let starts = block_starts(sizes);
    let n = *starts.last().unwrap();
    let mut g = Graph::new(n);
    for i in 0..sizes.len() {
        for j in i + 1..sizes.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, ((i as u64) << 20) | j as u64));
            let mut partner: Vec<usize> = (0..sizes[j]).collect();
            partner.shuffle(&mut rng);
            for u in 0..sizes[i] {
                for w in 0..sizes[j] {
                    if partner[u % sizes[j]] != w {
                        g.add_edge(starts[i] + u, starts[j] + w);
                    }
                }
            }
        }
    }
    (g, blockade_over(sizes))
}

/// Sparse cross structure: between every pair of blocks, the union of `d`
/// seeded perfect matchings.  Cross degrees are at most `d` in both
/// directions, so the linkage is at most `d / w`.
pub fn regular_cross_blocks(k: usize, w: usize, d: usize, seed: u64) -> (Graph, Blockade) {
    let sizes = vec![w; k];
    let starts = block_starts(&sizes);
    let mut g = Graph::new(k * w);
    for i in 0..k {
        for j in i + 1..k {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, ((i as u64) << 20) | j as u64));
            for _ in 0..d {
                let mut partner: Vec<usize> = (0..w).collect();
                partner.shuffle(&mut rng);
                for u in 0..w {
                    g.add_edge(starts[i] + u, starts[j] + partner[u]);
                }
            }
        }
    }
    (g, blockade_over(&sizes))
}

/// Ten blocks of width 120 with a planted grading and return path.  Vertex 0
/// is the designed apex: it sees nine vertices of block 1 (the base), eight
/// of block 2, and nine of each block from 3 up.  The three smallest base
/// vertices grade blocks 3, 4, 5 in that order through disjoint quota slices
/// sized so the selection thresholds trip one block per witness; the three
/// graded slices are pairwise complete, and a single connector vertex in
/// block 6 reaches one vertex of the block-5 slice.  Every other cross
/// neighbourhood is topped up to width/4 vertices chosen away from the
/// planted roles, so the contraction stage absorbs nothing while the planted
/// sets ride its floors with equality.  The seed decides only which vertices
/// play which role.
pub fn planted_bilevel_instance(seed: u64) -> (Graph, Blockade) {
    const W: usize = 120;
    const K: usize = 10;
    const FILL: usize = W / 4;
    let sizes = vec![W; K];
    let starts = block_starts(&sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x00b1_1e7e));
    let mut g = Graph::new(K * W);

    // one shuffled deck per block hands out disjoint role sets; the apex is
    // pinned to vertex 0 so the apex scan reaches it before its attempt cap
    let mut deck: Vec<std::vec::IntoIter<usize>> = (0..K)
        .map(|p| {
            let mut d: Vec<usize> = (starts[p]..starts[p + 1]).collect();
            d.shuffle(&mut rng);
            d.into_iter()
        })
        .collect();
    let mut take = |p: usize, k: usize| -> Vec<usize> { deck[p].by_ref().take(k).collect() };

    let u = 0usize;
    let mut base = take(1, 9);
    base.sort_unstable();
    let (y1, y2, y3) = (base[0], base[1], base[2]);
    let second = take(2, 8);
    let mut fan: Vec<Vec<usize>> = vec![Vec::new(); K];
    for p in 3..K {
        fan[p] = take(p, 9);
    }
    let x0 = fan[6][0];
    // quota slices q*3/q*4/q*5 for the graded blocks; col2/col3 give the
    // second and third witness their eight vertices in blocks 6..9
    let q13 = take(3, 7);
    let q23 = take(3, 8);
    let q33 = take(3, 8);
    let q14 = take(4, 3);
    let q24 = take(4, 7);
    let q34 = take(4, 8);
    let q15 = take(5, 3);
    let q25 = take(5, 4);
    let q35 = take(5, 8);
    let mut col2: Vec<Vec<usize>> = vec![Vec::new(); K];
    let mut col3: Vec<Vec<usize>> = vec![Vec::new(); K];
    for p in 6..K {
        col2[p] = take(p, 8);
        col3[p] = take(p, 8);
    }

    // apex fans
    for &z in base.iter().chain(&second) {
        g.add_edge(u, z);
    }
    for p in 3..K {
        for &z in &fan[p] {
            g.add_edge(u, z);
        }
    }
    // each witness sees exactly eight vertices of every block from 3 up,
    // split between its quota slice and part of the apex fan; the split
    // keeps the graded slices clear of the fans
    for &z in q13.iter().chain(&fan[3][..1]) {
        g.add_edge(y1, z);
    }
    for &z in q14.iter().chain(&fan[4][..5]) {
        g.add_edge(y1, z);
    }
    for &z in q15.iter().chain(&fan[5][..5]) {
        g.add_edge(y1, z);
    }
    for &z in &fan[6][1..9] {
        g.add_edge(y1, z);
    }
    for p in 7..K {
        for &z in &fan[p][..8] {
            g.add_edge(y1, z);
        }
    }
    for &z in &q23 {
        g.add_edge(y2, z);
    }
    for &z in q24.iter().chain(&fan[4][5..6]) {
        g.add_edge(y2, z);
    }
    for &z in q25.iter().chain(&fan[5][5..9]) {
        g.add_edge(y2, z);
    }
    for &z in q33.iter().chain(&q34).chain(&q35) {
        g.add_edge(y3, z);
    }
    for p in 6..K {
        for &z in &col2[p] {
            g.add_edge(y2, z);
        }
        for &z in &col3[p] {
            g.add_edge(y3, z);
        }
    }
    // the graded slices are pairwise complete so the return levelling climbs
    // block 5 -> block 4 and concentrates on block 3
    for &f in &q13 {
        for &z in q24.iter().chain(&q35) {
            g.add_edge(f, z);
        }
    }
    for &f in &q24 {
        for &z in &q35 {
            g.add_edge(f, z);
        }
    }
    // the connector's single foothold in the graded family
    g.add_edge(x0, q35[0]);

    // role vertices never receive fill, so every planted neighbourhood into
    // them stays exact
    let mut reserved = vec![false; K * W];
    for &z in [u].iter().chain(&base).chain(&second) {
        reserved[z] = true;
    }
    for p in 3..K {
        for &z in &fan[p] {
            reserved[z] = true;
        }
    }
    for qs in [&q13, &q23, &q33, &q14, &q24, &q34, &q15, &q25, &q35] {
        for &z in qs {
            reserved[z] = true;
        }
    }
    for p in 6..K {
        for &z in col2[p].iter().chain(&col3[p]) {
            reserved[z] = true;
        }
    }

    // top up the remaining cross neighbourhoods to FILL; the apex keeps all
    // of its rows exact, the witnesses their rows into blocks 3 and up
    for p in 0..K {
        for q in 0..K {
            if p == q {
                continue;
            }
            for v in starts[p]..starts[p + 1] {
                if v == u || ((v == y1 || v == y2 || v == y3) && q >= 3) {
                    continue;
                }
                let have = (starts[q]..starts[q + 1]).filter(|&z| g.has_edge(v, z)).count();
                if have >= FILL {
                    continue;
                }
                let pool: Vec<usize> = (starts[q]..starts[q + 1])
                    .filter(|&z| !reserved[z] && !g.has_edge(v, z))
                    .collect();
                for &z in pool.choose_multiple(&mut rng, FILL - have) {
                    g.add_edge(v, z);
                }
            }
        }
    }
    (g, blockade_over(&sizes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matched_blocks_have_one_missing_partner_each() {
        let (g, b) = dense_matched_blocks(&[6, 6, 6], 3);
        assert!(b.validate(&g).is_ok());
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                for &u in b.vertices(i) {
                    let deg = b.vertices(j).iter().filter(|&&w| g.has_edge(u, w)).count();
                    assert_eq!(deg, 5, "vertex {u} toward block {j}");
                }
            }
        }
    }

    #[test]
    fn regular_cross_degree_bounds() {
        let (g, b) = regular_cross_blocks(4, 32, 5, 11);
        assert!(b.validate(&g).is_ok());
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    continue;
                }
                for &u in b.vertices(i) {
                    let deg = b.vertices(j).iter().filter(|&&w| g.has_edge(u, w)).count();
                    assert!((1..=5).contains(&deg));
                }
            }
        }
        let linkage = b.metrics(&g).unwrap().linkage;
        assert!(linkage <= crate::exact::rat(5, 32));
    }

    #[test]
    fn planted_instance_keeps_every_cross_row_at_the_floor() {
        let (g1, b) = planted_bilevel_instance(5);
        let (g2, _) = planted_bilevel_instance(5);
        assert_eq!(g1.fingerprint(), g2.fingerprint());
        assert!(b.validate(&g1).is_ok());
        // eight is the contraction floor for a singleton at rate 1/24
        for p in 0..10 {
            for q in 0..10 {
                if p == q {
                    continue;
                }
                for &v in b.vertices(p) {
                    let deg = b.vertices(q).iter().filter(|&&z| g1.has_edge(v, z)).count();
                    assert!(deg >= 8, "vertex {v} toward block {q}: {deg}");
                }
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let (g1, _) = regular_cross_blocks(3, 16, 3, 7);
        let (g2, _) = regular_cross_blocks(3, 16, 3, 7);
        assert_eq!(g1.fingerprint(), g2.fingerprint());
        let (h1, _) = dense_matched_blocks(&[8, 8], 5);
        let (h2, _) = dense_matched_blocks(&[8, 8], 5);
        assert_eq!(h1.fingerprint(), h2.fingerprint());
    }
}
