//! Maximum-weight matching on general graphs.
//!
//! Primal-dual blossom algorithm in the formulation of Galil (1986), in the
//! well-known structure of Joris van Rantwijk's reference implementation.
//! Weights are integers so every dual update is exact; `O(n^3)` time.

const NONE: isize = -1;

/// Undirected edge `(u, v, weight)`; vertices are `0..n`.
pub type Edge = (usize, usize, i64);

/// Returns `mate`, where `mate[v]` is the partner of `v` if matched.
///
/// Only edges with positive weight can help a maximum-weight matching, so
/// callers may drop the rest. Parallel edges and self-loops are not allowed.
pub fn max_weight_matching(n: usize, edges: &[Edge]) -> Vec<Option<usize>> {
    if edges.is_empty() || n == 0 {
        return vec![None; n];
    }
    let mut solver = Solver::new(n, edges);
    solver.run();
    solver
        .mate
        .iter()
        .map(|&p| (p >= 0).then(|| solver.endpoint[p as usize] as usize))
        .collect()
}

struct Solver {
    nvertex: isize,
    edges: Vec<(isize, isize, i64)>,
    endpoint: Vec<isize>,
    neighbend: Vec<Vec<isize>>,
    mate: Vec<isize>,
    label: Vec<i32>,
    labelend: Vec<isize>,
    inblossom: Vec<isize>,
    blossomparent: Vec<isize>,
    blossomchilds: Vec<Vec<isize>>,
    blossombase: Vec<isize>,
    blossomendps: Vec<Vec<isize>>,
    bestedge: Vec<isize>,
    blossombestedges: Vec<Option<Vec<isize>>>,
    unusedblossoms: Vec<isize>,
    dualvar: Vec<i64>,
    allowedge: Vec<bool>,
    queue: Vec<isize>,
}

impl Solver {
    fn new(n: usize, edges: &[Edge]) -> Self {
        let nv = n as isize;
        let edges: Vec<(isize, isize, i64)> = edges
            .iter()
            .map(|&(i, j, w)| {
                assert!(i != j && i < n && j < n, "invalid edge ({i}, {j})");
                (i as isize, j as isize, w)
            })
            .collect();
        let maxweight = edges.iter().map(|e| e.2).max().unwrap_or(0).max(0);
        let mut endpoint = Vec::with_capacity(2 * edges.len());
        let mut neighbend = vec![Vec::new(); n];
        for (k, &(i, j, _)) in edges.iter().enumerate() {
            endpoint.push(i);
            endpoint.push(j);
            neighbend[i as usize].push(2 * k as isize + 1);
            neighbend[j as usize].push(2 * k as isize);
        }
        let nedge = edges.len();
        let mut dualvar = vec![maxweight; n];
        dualvar.extend(std::iter::repeat_n(0, n));
        Self {
            nvertex: nv,
            edges,
            endpoint,
            neighbend,
            mate: vec![NONE; n],
            label: vec![0; 2 * n],
            labelend: vec![NONE; 2 * n],
            inblossom: (0..nv).collect(),
            blossomparent: vec![NONE; 2 * n],
            blossomchilds: vec![Vec::new(); 2 * n],
            blossombase: (0..nv).chain(std::iter::repeat_n(NONE, n)).collect(),
            blossomendps: vec![Vec::new(); 2 * n],
            bestedge: vec![NONE; 2 * n],
            blossombestedges: vec![None; 2 * n],
            unusedblossoms: (nv..2 * nv).collect(),
            dualvar,
            allowedge: vec![false; nedge],
            queue: Vec::new(),
        }
    }

    #[inline]
    fn slack(&self, k: isize) -> i64 {
        let (i, j, w) = self.edges[k as usize];
        self.dualvar[i as usize] + self.dualvar[j as usize] - 2 * w
    }

    fn leaves(&self, b: isize) -> Vec<isize> {
        let mut out = Vec::new();
        self.collect_leaves(b, &mut out);
        out
    }

    fn collect_leaves(&self, b: isize, out: &mut Vec<isize>) {
        if b < self.nvertex {
            out.push(b);
        } else {
            for &t in &self.blossomchilds[b as usize] {
                self.collect_leaves(t, out);
            }
        }
    }

    fn assign_label(&mut self, w: isize, t: i32, p: isize) {
        let b = self.inblossom[w as usize];
        debug_assert!(self.label[w as usize] == 0 && self.label[b as usize] == 0);
        self.label[w as usize] = t;
        self.label[b as usize] = t;
        self.labelend[w as usize] = p;
        self.labelend[b as usize] = p;
        self.bestedge[w as usize] = NONE;
        self.bestedge[b as usize] = NONE;
        if t == 1 {
            let leaves = self.leaves(b);
            self.queue.extend(leaves);
        } else if t == 2 {
            let base = self.blossombase[b as usize];
            let mb = self.mate[base as usize];
            debug_assert!(mb >= 0);
            self.assign_label(self.endpoint[mb as usize], 1, mb ^ 1);
        }
    }

    /// Traces back from `v` and `w` to find a new blossom base, or `NONE`
    /// when the two paths reach distinct roots (an augmenting path).
    fn scan_blossom(&mut self, mut v: isize, mut w: isize) -> isize {
        let mut path = Vec::new();
        let mut base = NONE;
        while v != NONE || w != NONE {
            let mut b = self.inblossom[v as usize];
            if self.label[b as usize] & 4 != 0 {
                base = self.blossombase[b as usize];
                break;
            }
            debug_assert_eq!(self.label[b as usize], 1);
            path.push(b);
            self.label[b as usize] = 5;
            if self.labelend[b as usize] == NONE {
                v = NONE;
            } else {
                v = self.endpoint[self.labelend[b as usize] as usize];
                b = self.inblossom[v as usize];
                debug_assert_eq!(self.label[b as usize], 2);
                v = self.endpoint[self.labelend[b as usize] as usize];
            }
            if w != NONE {
                std::mem::swap(&mut v, &mut w);
            }
        }
        for b in path {
            self.label[b as usize] = 1;
        }
        base
    }

    fn add_blossom(&mut self, base: isize, k: isize) {
        let (mut v, mut w, _) = self.edges[k as usize];
        let bb = self.inblossom[base as usize];
        let mut bv = self.inblossom[v as usize];
        let mut bw = self.inblossom[w as usize];
        let b = self.unusedblossoms.pop().expect("blossom pool exhausted");
        let bu = b as usize;
        self.blossombase[bu] = base;
        self.blossomparent[bu] = NONE;
        self.blossomparent[bb as usize] = b;
        let mut path = Vec::new();
        let mut endps = Vec::new();
        while bv != bb {
            self.blossomparent[bv as usize] = b;
            path.push(bv);
            endps.push(self.labelend[bv as usize]);
            v = self.endpoint[self.labelend[bv as usize] as usize];
            bv = self.inblossom[v as usize];
        }
        path.push(bb);
        path.reverse();
        endps.reverse();
        endps.push(2 * k);
        while bw != bb {
            self.blossomparent[bw as usize] = b;
            path.push(bw);
            endps.push(self.labelend[bw as usize] ^ 1);
            w = self.endpoint[self.labelend[bw as usize] as usize];
            bw = self.inblossom[w as usize];
        }
        debug_assert_eq!(self.label[bb as usize], 1);
        self.label[bu] = 1;
        self.labelend[bu] = self.labelend[bb as usize];
        self.dualvar[bu] = 0;
        self.blossomchilds[bu] = path.clone();
        self.blossomendps[bu] = endps;
        for leaf in self.leaves(b) {
            if self.label[self.inblossom[leaf as usize] as usize] == 2 {
                self.queue.push(leaf);
            }
            self.inblossom[leaf as usize] = b;
        }
        let nv2 = 2 * self.nvertex as usize;
        let mut bestedgeto = vec![NONE; nv2];
        for &sub in &path {
            let lists: Vec<Vec<isize>> = match self.blossombestedges[sub as usize].take() {
                Some(list) => vec![list],
                None => self
                    .leaves(sub)
                    .into_iter()
                    .map(|leaf| {
                        self.neighbend[leaf as usize]
                            .iter()
                            .map(|p| p / 2)
                            .collect()
                    })
                    .collect(),
            };
            for list in lists {
                for kk in list {
                    let (mut i, mut j, _) = self.edges[kk as usize];
                    if self.inblossom[j as usize] == b {
                        std::mem::swap(&mut i, &mut j);
                    }
                    let _ = i;
                    let bj = self.inblossom[j as usize];
                    if bj != b
                        && self.label[bj as usize] == 1
                        && (bestedgeto[bj as usize] == NONE
                            || self.slack(kk) < self.slack(bestedgeto[bj as usize]))
                    {
                        bestedgeto[bj as usize] = kk;
                    }
                }
            }
            self.bestedge[sub as usize] = NONE;
        }
        let best: Vec<isize> = bestedgeto.into_iter().filter(|&kk| kk != NONE).collect();
        let mut chosen = NONE;
        for &kk in &best {
            if chosen == NONE || self.slack(kk) < self.slack(chosen) {
                chosen = kk;
            }
        }
        self.blossombestedges[bu] = Some(best);
        self.bestedge[bu] = chosen;
    }

    fn expand_blossom(&mut self, b: isize, endstage: bool) {
        let bu = b as usize;
        let childs = self.blossomchilds[bu].clone();
        for &s in &childs {
            self.blossomparent[s as usize] = NONE;
            if s < self.nvertex {
                self.inblossom[s as usize] = s;
            } else if endstage && self.dualvar[s as usize] == 0 {
                self.expand_blossom(s, endstage);
            } else {
                for leaf in self.leaves(s) {
                    self.inblossom[leaf as usize] = s;
                }
            }
        }
        if !endstage && self.label[bu] == 2 {
            let len = childs.len() as isize;
            let at = |j: isize| j.rem_euclid(len) as usize;
            let endps = self.blossomendps[bu].clone();
            let entrychild =
                self.inblossom[self.endpoint[(self.labelend[bu] ^ 1) as usize] as usize];
            let mut j = childs.iter().position(|&c| c == entrychild).unwrap() as isize;
            let (jstep, endptrick) = if j & 1 == 1 {
                j -= len;
                (1isize, 0isize)
            } else {
                (-1, 1)
            };
            let mut p = self.labelend[bu];
            while j != 0 {
                let q = self.endpoint[(p ^ 1) as usize];
                self.label[q as usize] = 0;
                let r = self.endpoint[(endps[at(j - endptrick)] ^ endptrick ^ 1) as usize];
                self.label[r as usize] = 0;
                self.assign_label(q, 2, p);
                self.allowedge[(endps[at(j - endptrick)] / 2) as usize] = true;
                j += jstep;
                p = endps[at(j - endptrick)] ^ endptrick;
                self.allowedge[(p / 2) as usize] = true;
                j += jstep;
            }
            let bv = childs[at(j)];
            let q = self.endpoint[(p ^ 1) as usize];
            self.label[q as usize] = 2;
            self.label[bv as usize] = 2;
            self.labelend[q as usize] = p;
            self.labelend[bv as usize] = p;
            self.bestedge[bv as usize] = NONE;
            j += jstep;
            while childs[at(j)] != entrychild {
                let bv = childs[at(j)];
                if self.label[bv as usize] == 1 {
                    j += jstep;
                    continue;
                }
                let leaves = self.leaves(bv);
                if let Some(&v) = leaves.iter().find(|&&v| self.label[v as usize] != 0) {
                    debug_assert_eq!(self.label[v as usize], 2);
                    self.label[v as usize] = 0;
                    let mb = self.mate[self.blossombase[bv as usize] as usize];
                    self.label[self.endpoint[mb as usize] as usize] = 0;
                    let le = self.labelend[v as usize];
                    self.assign_label(v, 2, le);
                }
                j += jstep;
            }
        }
        self.label[bu] = -1;
        self.labelend[bu] = NONE;
        self.blossomchilds[bu].clear();
        self.blossomendps[bu].clear();
        self.blossombase[bu] = NONE;
        self.blossombestedges[bu] = None;
        self.bestedge[bu] = NONE;
        self.unusedblossoms.push(b);
    }

    /// Swaps matched and unmatched edges inside blossom `b` so that `v`
    /// becomes its base.
    fn augment_blossom(&mut self, b: isize, v: isize) {
        let bu = b as usize;
        let mut t = v;
        while self.blossomparent[t as usize] != b {
            t = self.blossomparent[t as usize];
        }
        if t >= self.nvertex {
            self.augment_blossom(t, v);
        }
        let childs = self.blossomchilds[bu].clone();
        let endps = self.blossomendps[bu].clone();
        let len = childs.len() as isize;
        let at = |j: isize| j.rem_euclid(len) as usize;
        let i = childs.iter().position(|&c| c == t).unwrap();
        let mut j = i as isize;
        let (jstep, endptrick) = if j & 1 == 1 {
            j -= len;
            (1isize, 0isize)
        } else {
            (-1, 1)
        };
        while j != 0 {
            j += jstep;
            let t = childs[at(j)];
            let p = endps[at(j - endptrick)] ^ endptrick;
            if t >= self.nvertex {
                self.augment_blossom(t, self.endpoint[p as usize]);
            }
            j += jstep;
            let t = childs[at(j)];
            if t >= self.nvertex {
                self.augment_blossom(t, self.endpoint[(p ^ 1) as usize]);
            }
            self.mate[self.endpoint[p as usize] as usize] = p ^ 1;
            self.mate[self.endpoint[(p ^ 1) as usize] as usize] = p;
        }
        self.blossomchilds[bu].rotate_left(i);
        self.blossomendps[bu].rotate_left(i);
        self.blossombase[bu] = self.blossombase[self.blossomchilds[bu][0] as usize];
        debug_assert_eq!(self.blossombase[bu], v);
    }

    fn augment_matching(&mut self, k: isize) {
        let (v, w, _) = self.edges[k as usize];
        for (mut s, mut p) in [(v, 2 * k + 1), (w, 2 * k)] {
            loop {
                let bs = self.inblossom[s as usize];
                debug_assert_eq!(self.label[bs as usize], 1);
                if bs >= self.nvertex {
                    self.augment_blossom(bs, s);
                }
                self.mate[s as usize] = p;
                if self.labelend[bs as usize] == NONE {
                    break;
                }
                let t = self.endpoint[self.labelend[bs as usize] as usize];
                let bt = self.inblossom[t as usize];
                debug_assert_eq!(self.label[bt as usize], 2);
                let le = self.labelend[bt as usize];
                s = self.endpoint[le as usize];
                let j = self.endpoint[(le ^ 1) as usize];
                if bt >= self.nvertex {
                    self.augment_blossom(bt, j);
                }
                self.mate[j as usize] = le;
                p = le ^ 1;
            }
        }
    }

    fn run(&mut self) {
        let nv = self.nvertex as usize;
        for _ in 0..nv {
            self.label.fill(0);
            self.bestedge.fill(NONE);
            for slot in &mut self.blossombestedges[nv..] {
                *slot = None;
            }
            self.allowedge.fill(false);
            self.queue.clear();
            for v in 0..nv {
                if self.mate[v] == NONE && self.label[self.inblossom[v] as usize] == 0 {
                    self.assign_label(v as isize, 1, NONE);
                }
            }
            let mut augmented = false;
            loop {
                while !augmented {
                    let Some(v) = self.queue.pop() else { break };
                    debug_assert_eq!(self.label[self.inblossom[v as usize] as usize], 1);
                    let neighbours = self.neighbend[v as usize].clone();
                    for p in neighbours {
                        let k = p / 2;
                        let w = self.endpoint[p as usize];
                        if self.inblossom[v as usize] == self.inblossom[w as usize] {
                            continue;
                        }
                        let mut kslack = 0;
                        if !self.allowedge[k as usize] {
                            kslack = self.slack(k);
                            if kslack <= 0 {
                                self.allowedge[k as usize] = true;
                            }
                        }
                        let bw = self.inblossom[w as usize];
                        if self.allowedge[k as usize] {
                            if self.label[bw as usize] == 0 {
                                self.assign_label(w, 2, p ^ 1);
                            } else if self.label[bw as usize] == 1 {
                                let base = self.scan_blossom(v, w);
                                if base >= 0 {
                                    self.add_blossom(base, k);
                                } else {
                                    self.augment_matching(k);
                                    augmented = true;
                                    break;
                                }
                            } else if self.label[w as usize] == 0 {
                                self.label[w as usize] = 2;
                                self.labelend[w as usize] = p ^ 1;
                            }
                        } else if self.label[bw as usize] == 1 {
                            let b = self.inblossom[v as usize] as usize;
                            if self.bestedge[b] == NONE || kslack < self.slack(self.bestedge[b]) {
                                self.bestedge[b] = k;
                            }
                        } else if self.label[w as usize] == 0
                            && (self.bestedge[w as usize] == NONE
                                || kslack < self.slack(self.bestedge[w as usize]))
                        {
                            self.bestedge[w as usize] = k;
                        }
                    }
                }
                if augmented {
                    break;
                }

                // No augmenting path under the current duals: pick the
                // largest dual step that keeps every slack non-negative.
                let mut deltatype = 1;
                let mut delta = *self.dualvar[..nv].iter().min().unwrap();
                let mut deltaedge = NONE;
                let mut deltablossom = NONE;
                for v in 0..nv {
                    if self.label[self.inblossom[v] as usize] == 0 && self.bestedge[v] != NONE {
                        let d = self.slack(self.bestedge[v]);
                        if d < delta {
                            delta = d;
                            deltatype = 2;
                            deltaedge = self.bestedge[v];
                        }
                    }
                }
                for b in 0..2 * nv {
                    if self.blossomparent[b] == NONE && self.label[b] == 1 && self.bestedge[b] != NONE
                    {
                        let kslack = self.slack(self.bestedge[b]);
                        debug_assert_eq!(kslack % 2, 0);
                        let d = kslack / 2;
                        if d < delta {
                            delta = d;
                            deltatype = 3;
                            deltaedge = self.bestedge[b];
                        }
                    }
                }
                for b in nv..2 * nv {
                    if self.blossombase[b] >= 0
                        && self.blossomparent[b] == NONE
                        && self.label[b] == 2
                        && self.dualvar[b] < delta
                    {
                        delta = self.dualvar[b];
                        deltatype = 4;
                        deltablossom = b as isize;
                    }
                }
                for v in 0..nv {
                    match self.label[self.inblossom[v] as usize] {
                        1 => self.dualvar[v] -= delta,
                        2 => self.dualvar[v] += delta,
                        _ => {}
                    }
                }
                for b in nv..2 * nv {
                    if self.blossombase[b] >= 0 && self.blossomparent[b] == NONE {
                        match self.label[b] {
                            1 => self.dualvar[b] += delta,
                            2 => self.dualvar[b] -= delta,
                            _ => {}
                        }
                    }
                }
                match deltatype {
                    1 => break,
                    2 => {
                        self.allowedge[deltaedge as usize] = true;
                        let (mut i, mut j, _) = self.edges[deltaedge as usize];
                        if self.label[self.inblossom[i as usize] as usize] == 0 {
                            std::mem::swap(&mut i, &mut j);
                        }
                        let _ = j;
                        self.queue.push(i);
                    }
                    3 => {
                        self.allowedge[deltaedge as usize] = true;
                        let (i, _, _) = self.edges[deltaedge as usize];
                        self.queue.push(i);
                    }
                    _ => self.expand_blossom(deltablossom, false),
                }
            }
            if !augmented {
                break;
            }
            for b in nv..2 * nv {
                if self.blossomparent[b] == NONE
                    && self.blossombase[b] >= 0
                    && self.label[b] == 1
                    && self.dualvar[b] == 0
                {
                    self.expand_blossom(b as isize, true);
                }
            }
        }
    }
}
