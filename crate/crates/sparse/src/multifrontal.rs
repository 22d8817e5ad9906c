//! Supernodal multifrontal LU.
//!
//! The symbolic phase works on the pattern of `A + A^T` under a fill-reducing
//! order: elimination tree, postorder, column structures and relaxed
//! supernodes. It depends only on the pattern, so one analysis serves every
//! matrix that shares it.
//!
//! The numeric phase assembles one dense frontal matrix per supernode, adds
//! the children's update blocks, and eliminates the supernode's columns with
//! a blocked right-looking LU. Row pivoting is confined to the fully summed
//! rows of each front. When no such row passes the threshold test against
//! the whole front column the factorization reports it instead of delaying
//! the pivot, and the caller falls back to a left-looking factorization.

use crate::csr::CsrMatrix;
use crate::error::{LinalgError, Result};
use crate::ordering::{is_permutation, ColumnOrdering};

const NONE: usize = usize::MAX;
/// Panel width of the dense front factorization.
const PANEL: usize = 32;

/// Pattern-only analysis shared by every matrix with the same structure.
#[derive(Debug, Clone)]
pub struct LuSymbolic {
    n: usize,
    /// `order[k]` is the original row and column placed at position k.
    order: Vec<usize>,
    /// Supernode s owns positions `sn_ptr[s]..sn_ptr[s + 1]`.
    sn_ptr: Vec<usize>,
    /// Sorted positions of each front: the supernode's columns, then the
    /// rows below it.
    fronts: Vec<Vec<usize>>,
    n_children: Vec<usize>,
    /// `(index into A's values, offset in the front)` per supernode.
    assembly: Vec<Vec<(usize, usize)>>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl LuSymbolic {
    pub fn analyze(a: &CsrMatrix, ordering: &ColumnOrdering) -> Result<Self> {
        let n = a.dim();
        let order0 = ordering.compute(a);
        if !is_permutation(&order0, n) {
            return Err(LinalgError::InvalidStructure(
                "column ordering is not a permutation".into(),
            ));
        }
        let g = a.symmetric_graph();
        let mut inv0 = vec![0; n];
        for (k, &v) in order0.iter().enumerate() {
            inv0[v] = k;
        }
        let parent0 = etree(n, |k, out: &mut Vec<usize>| {
            out.extend(g.neighbors(order0[k]).iter().map(|&w| inv0[w]))
        });
        let post = postorder(&parent0);
        let order: Vec<usize> = post.iter().map(|&p| order0[p]).collect();
        let mut inv = vec![0; n];
        for (k, &v) in order.iter().enumerate() {
            inv[v] = k;
        }
        let mut inv_post = vec![0; n];
        for (k, &p) in post.iter().enumerate() {
            inv_post[p] = k;
        }
        let parent: Vec<usize> = post
            .iter()
            .map(|&p| match parent0[p] {
                NONE => NONE,
                q => inv_post[q],
            })
            .collect();

        // Children lists in ascending order.
        let mut child_ptr = vec![0usize; n + 1];
        for &p in &parent {
            if p != NONE {
                child_ptr[p + 1] += 1;
            }
        }
        for j in 0..n {
            child_ptr[j + 1] += child_ptr[j];
        }
        let mut children = vec![0usize; child_ptr[n]];
        let mut fill = child_ptr.clone();
        for (c, &p) in parent.iter().enumerate() {
            if p != NONE {
                children[fill[p]] = c;
                fill[p] += 1;
            }
        }

        // Column structures, relaxed supernodes and their fronts in one sweep.
        let mut structs: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut counts = vec![0usize; n];
        let mut mark = vec![NONE; n];
        let mut sn_ptr = vec![0usize];
        let mut fronts: Vec<Vec<usize>> = Vec::new();
        let mut sn_start = 0usize;
        let mut sum_counts = 0usize;
        for j in 0..n {
            let mut s = Vec::new();
            mark[j] = j;
            for &w in g.neighbors(order[j]) {
                let i = inv[w];
                if i > j && mark[i] != j {
                    mark[i] = j;
                    s.push(i);
                }
            }
            for &c in &children[child_ptr[j]..child_ptr[j + 1]] {
                for &i in &structs[c] {
                    if mark[i] != j {
                        mark[i] = j;
                        s.push(i);
                    }
                }
            }
            s.sort_unstable();
            counts[j] = s.len();
            structs[j] = s;

            if j > 0 {
                // A chain step that adds no explicit zeros is always taken.
                let merge = parent[j - 1] == j
                    && (counts[j - 1] == counts[j] + 1 || {
                    let k = (j - sn_start + 1) as f64;
                    let cj = counts[j] as f64;
                    let total = k * (k + 1.0) / 2.0 + k * cj;
                    let zeros = k * (k - 1.0) / 2.0 + k * cj - (sum_counts + counts[j]) as f64;
                    relaxed_merge(j - sn_start + 1, zeros / total)
                });
                if merge {
                    structs[j - 1] = Vec::new();
                } else {
                    fronts.push(front_of(sn_start, j - 1, &structs[j - 1]));
                    sn_ptr.push(j);
                    sn_start = j;
                    sum_counts = 0;
                }
            }
            sum_counts += counts[j];
            // Children other than j - 1 closed their supernodes already.
            for &c in &children[child_ptr[j]..child_ptr[j + 1]] {
                if c + 1 != j {
                    structs[c] = Vec::new();
                }
            }
        }
        if n > 0 {
            fronts.push(front_of(sn_start, n - 1, &structs[n - 1]));
            sn_ptr.push(n);
        }
        drop(structs);

        let nsn = fronts.len();
        let mut sn_of = vec![0usize; n];
        for s in 0..nsn {
            for p in sn_ptr[s]..sn_ptr[s + 1] {
                sn_of[p] = s;
            }
        }
        let mut n_children = vec![0usize; nsn];
        for s in 0..nsn {
            let last = sn_ptr[s + 1] - 1;
            if parent[last] != NONE {
                n_children[sn_of[parent[last]]] += 1;
            }
        }

        let mut assembly: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nsn];
        let (rp, ci) = (a.row_ptr(), a.col_idx());
        for r in 0..n {
            let bi = inv[r];
            for p in rp[r]..rp[r + 1] {
                let bj = inv[ci[p]];
                let s = sn_of[bi.min(bj)];
                let front = &fronts[s];
                let li = front.binary_search(&bi).map_err(|_| missing())?;
                let lj = front.binary_search(&bj).map_err(|_| missing())?;
                assembly[s].push((p, li * front.len() + lj));
            }
        }

        Ok(Self {
            n,
            order,
            sn_ptr,
            fronts,
            n_children,
            assembly,
            row_ptr: rp.to_vec(),
            col_idx: ci.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Elimination order after postordering.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn supernode_count(&self) -> usize {
        self.fronts.len()
    }

    /// Largest frontal matrix dimension.
    pub fn max_front(&self) -> usize {
        self.fronts.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Floating-point operations of the numeric factorization, counting the
    /// dense partial LU of every front.
    pub fn factor_flops(&self) -> f64 {
        let mut total = 0.0;
        for (s, front) in self.fronts.iter().enumerate() {
            let m = front.len() as f64;
            let k = (self.sn_ptr[s + 1] - self.sn_ptr[s]) as f64;
            // sum over i < k of (m - i - 1) divisions and 2 (m - i - 1)^2 updates
            for i in 0..k as usize {
                let r = m - i as f64 - 1.0;
                total += r + 2.0 * r * r;
            }
        }
        total
    }

    /// True when `a` has exactly the pattern this analysis was built from.
    pub fn matches(&self, a: &CsrMatrix) -> bool {
        a.dim() == self.n && a.row_ptr() == self.row_ptr && a.col_idx() == self.col_idx
    }
}

fn missing() -> LinalgError {
    LinalgError::InvalidStructure("entry outside its front".into())
}

fn relaxed_merge(cols: usize, zero_fraction: f64) -> bool {
    match cols {
        0..=4 => true,
        5..=16 => zero_fraction < 0.8,
        17..=48 => zero_fraction < 0.1,
        _ => zero_fraction < 0.05,
    }
}

fn front_of(first: usize, last: usize, tail: &[usize]) -> Vec<usize> {
    let mut f: Vec<usize> = (first..=last).collect();
    f.extend_from_slice(tail);
    f
}

/// Elimination tree of a structurally symmetric pattern. `adj(k, out)`
/// appends the neighbours of position k.
fn etree(n: usize, mut adj: impl FnMut(usize, &mut Vec<usize>)) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    let mut nbrs = Vec::new();
    for k in 0..n {
        nbrs.clear();
        adj(k, &mut nbrs);
        for &i in &nbrs {
            if i >= k {
                continue;
            }
            let mut r = i;
            while ancestor[r] != NONE && ancestor[r] != k {
                let next = ancestor[r];
                ancestor[r] = k;
                r = next;
            }
            if ancestor[r] == NONE {
                ancestor[r] = k;
                parent[r] = k;
            }
        }
    }
    parent
}

/// `post[k]` is the vertex visited k-th in a depth-first postorder.
fn postorder(parent: &[usize]) -> Vec<usize> {
    let n = parent.len();
    let mut head = vec![NONE; n];
    let mut next = vec![NONE; n];
    // Reverse insertion keeps children in ascending order.
    for j in (0..n).rev() {
        if parent[j] != NONE {
            next[j] = head[parent[j]];
            head[parent[j]] = j;
        }
    }
    let mut post = Vec::with_capacity(n);
    let mut stack = Vec::new();
    for root in 0..n {
        if parent[root] != NONE {
            continue;
        }
        stack.push(root);
        while let Some(&v) = stack.last() {
            let c = head[v];
            if c == NONE {
                stack.pop();
                post.push(v);
            } else {
                head[v] = next[c];
                stack.push(c);
            }
        }
    }
    post
}

#[derive(Debug, Clone)]
struct SupernodeFactor {
    /// Row ids of the front after pivoting: pivot rows first.
    rows: Vec<usize>,
    /// Front columns `0..k` for all rows, row-major `m x k`. Holds the unit
    /// lower `L11` and `L21` below the diagonal and `U11` on and above it.
    panel: Vec<f64>,
    /// `U12`, row-major `k x (m - k)`.
    u12: Vec<f64>,
}

/// Why the numeric phase stopped.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum FrontFailure {
    /// The best fully summed pivot fails the threshold test at this position.
    NeedsDelay(usize),
    Error(LinalgError),
}

impl From<LinalgError> for FrontFailure {
    fn from(e: LinalgError) -> Self {
        FrontFailure::Error(e)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SupernodalLu {
    sym: std::sync::Arc<LuSymbolic>,
    factors: Vec<SupernodeFactor>,
}

impl SupernodalLu {
    pub(crate) fn factor(
        a: &CsrMatrix,
        sym: &std::sync::Arc<LuSymbolic>,
        tol: f64,
    ) -> std::result::Result<Self, FrontFailure> {
        if !sym.matches(a) {
            return Err(LinalgError::InvalidStructure(
                "matrix pattern differs from its analysis".into(),
            )
            .into());
        }
        let n = sym.n;
        let vals = a.values();
        let mut pos = vec![NONE; n];
        let mut stack: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut factors = Vec::with_capacity(sym.fronts.len());
        let mut local = Vec::new();
        for s in 0..sym.fronts.len() {
            let idx = &sym.fronts[s];
            let m = idx.len();
            let first = sym.sn_ptr[s];
            let k = sym.sn_ptr[s + 1] - first;
            let mut f = vec![0.0; m * m];
            for &(p, off) in &sym.assembly[s] {
                f[off] += vals[p];
            }
            for (t, &g) in idx.iter().enumerate() {
                pos[g] = t;
            }
            for _ in 0..sym.n_children[s] {
                let (child, block) = stack.pop().expect("child update present");
                let cidx = &sym.fronts[child][sym.sn_ptr[child + 1] - sym.sn_ptr[child]..];
                let mc = cidx.len();
                local.clear();
                local.extend(cidx.iter().map(|&g| pos[g]));
                for (a_row, &ra) in local.iter().enumerate() {
                    let src = &block[a_row * mc..(a_row + 1) * mc];
                    let dst = &mut f[ra * m..(ra + 1) * m];
                    for (&lb, &v) in local.iter().zip(src) {
                        dst[lb] += v;
                    }
                }
            }
            let mut perm: Vec<usize> = (0..k).collect();
            factor_front(&mut f, m, k, tol, &mut perm)
                .map_err(|c| FrontFailure::NeedsDelay(first + c))?;

            let mut rows: Vec<usize> = perm.iter().map(|&r| idx[r]).collect();
            rows.extend_from_slice(&idx[k..]);
            let mut panel = Vec::with_capacity(m * k);
            for r in 0..m {
                panel.extend_from_slice(&f[r * m..r * m + k]);
            }
            let mut u12 = Vec::with_capacity(k * (m - k));
            for r in 0..k {
                u12.extend_from_slice(&f[r * m + k..(r + 1) * m]);
            }
            if m > k {
                let mc = m - k;
                let mut block = Vec::with_capacity(mc * mc);
                for r in k..m {
                    block.extend_from_slice(&f[r * m + k..(r + 1) * m]);
                }
                stack.push((s, block));
            }
            factors.push(SupernodeFactor { rows, panel, u12 });
        }
        Ok(Self {
            sym: sym.clone(),
            factors,
        })
    }

    pub(crate) fn factor_nnz(&self) -> usize {
        self.factors
            .iter()
            .map(|f| f.panel.len() + f.u12.len())
            .sum()
    }

    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let sym = &*self.sym;
        let n = sym.n;
        let mut w: Vec<f64> = sym.order.iter().map(|&r| b[r]).collect();
        let mut y = vec![0.0; n];
        let mut z = Vec::new();
        for (s, fac) in self.factors.iter().enumerate() {
            let first = sym.sn_ptr[s];
            let k = sym.sn_ptr[s + 1] - first;
            let m = fac.rows.len();
            z.clear();
            z.extend(fac.rows.iter().map(|&r| w[r]));
            for c in 0..k {
                let zc = z[c];
                if zc != 0.0 {
                    for r in c + 1..m {
                        z[r] -= fac.panel[r * k + c] * zc;
                    }
                }
                y[first + c] = zc;
            }
            for r in k..m {
                w[fac.rows[r]] = z[r];
            }
        }
        let x = &mut y;
        for (s, fac) in self.factors.iter().enumerate().rev() {
            let first = sym.sn_ptr[s];
            let k = sym.sn_ptr[s + 1] - first;
            let tail = &sym.fronts[s][k..];
            let mt = tail.len();
            z.clear();
            z.extend(tail.iter().map(|&g| x[g]));
            for c in (0..k).rev() {
                let mut sum = x[first + c];
                let urow = &fac.panel[c * k..(c + 1) * k];
                for t in c + 1..k {
                    sum -= urow[t] * x[first + t];
                }
                let u12 = &fac.u12[c * mt..(c + 1) * mt];
                for (u, v) in u12.iter().zip(&z) {
                    sum -= u * v;
                }
                x[first + c] = sum / urow[c];
            }
        }
        for (k, &c) in sym.order.iter().enumerate() {
            b[c] = x[k];
        }
    }
}

/// Eliminates the first `k` columns of the row-major `m x m` front `f`,
/// leaving the Schur complement in the trailing block. Returns the local
/// column whose pivot would have to be delayed.
fn factor_front(
    f: &mut [f64],
    m: usize,
    k: usize,
    tol: f64,
    perm: &mut [usize],
) -> std::result::Result<(), usize> {
    let mut jb = 0;
    while jb < k {
        let je = (jb + PANEL).min(k);
        for c in jb..je {
            let mut best = c;
            let mut bmax = f[c * m + c].abs();
            for r in c + 1..k {
                let v = f[r * m + c].abs();
                if v > bmax {
                    bmax = v;
                    best = r;
                }
            }
            let mut cmax = bmax;
            for r in k..m {
                cmax = cmax.max(f[r * m + c].abs());
            }
            if !(cmax > 0.0) || !cmax.is_finite() || bmax < tol * cmax {
                return Err(c);
            }
            if f[c * m + c].abs() >= tol * cmax {
                best = c;
            }
            if best != c {
                let (top, bottom) = f.split_at_mut(best * m);
                top[c * m..(c + 1) * m].swap_with_slice(&mut bottom[..m]);
                perm.swap(c, best);
            }
            let piv = f[c * m + c];
            let (head, rest) = f.split_at_mut((c + 1) * m);
            let urow = &head[c * m + c + 1..c * m + je];
            for row in rest.chunks_exact_mut(m) {
                let l = row[c] / piv;
                row[c] = l;
                if l != 0.0 {
                    for (x, &u) in row[c + 1..je].iter_mut().zip(urow) {
                        *x -= l * u;
                    }
                }
            }
        }
        if je < m {
            // U block row: L11^{-1} applied to columns je..m of rows jb..je.
            for c in jb..je {
                let (head, rest) = f.split_at_mut((c + 1) * m);
                let src = &head[c * m + je..(c + 1) * m];
                for row in rest.chunks_exact_mut(m).take(je - c - 1) {
                    let l = row[c];
                    if l != 0.0 {
                        for (x, &u) in row[je..].iter_mut().zip(src) {
                            *x -= l * u;
                        }
                    }
                }
            }
            let rows = m - je;
            let depth = je - jb;
            let ptr = f.as_mut_ptr();
            // SAFETY: the three blocks are disjoint regions of `f`:
            // A = rows je.., cols jb..je; B = rows jb..je, cols je..;
            // C = rows je.., cols je.. . Column ranges of A and C do not
            // overlap and row ranges of B and C do not overlap.
            unsafe {
                matrixmultiply::dgemm(
                    rows,
                    depth,
                    rows,
                    -1.0,
                    ptr.add(je * m + jb),
                    m as isize,
                    1,
                    ptr.add(jb * m + je),
                    m as isize,
                    1,
                    1.0,
                    ptr.add(je * m + je),
                    m as isize,
                    1,
                );
            }
        }
        jb = je;
    }
    Ok(())
}
