use ndarray::{Array1, Array2, Array3};

use crate::kbdata::Triple;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Independent partial sums let the compiler vectorize.
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// `x^T diag(d) y`
pub(crate) fn diag_form(x: &[f64], d: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(d).zip(y).map(|((a, b), c)| a * b * c).sum()
}

/// `m y` for a row-major square `m`.
#[inline]
pub(crate) fn mat_vec(m: &[f64], y: &[f64], out: &mut [f64]) {
    let d = y.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(d)) {
        *o = dot(row, y);
    }
}

/// `m^T x` for a row-major square `m`.
#[inline]
pub(crate) fn mat_t_vec(m: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (xi, row) in x.iter().zip(m.chunks_exact(d)) {
        for (o, r) in out.iter_mut().zip(row) {
            *o += xi * r;
        }
    }
}

/// `x^T m y`
#[inline]
pub(crate) fn bilinear(x: &[f64], m: &[f64], y: &[f64]) -> f64 {
    let d = y.len();
    x.iter()
        .zip(m.chunks_exact(d))
        .map(|(xi, row)| xi * dot(row, y))
        .sum()
}

#[inline]
pub(crate) fn row(a: &Array2<f64>, i: usize) -> &[f64] {
    let d = a.ncols();
    &a.as_slice().expect("row-major parameters")[i * d..(i + 1) * d]
}

#[inline]
pub(crate) fn row_mut(a: &mut Array2<f64>, i: usize) -> &mut [f64] {
    let d = a.ncols();
    &mut a.as_slice_mut().expect("row-major parameters")[i * d..(i + 1) * d]
}

#[inline]
pub(crate) fn matrix(a: &Array3<f64>, l: usize) -> &[f64] {
    let s = a.shape()[1] * a.shape()[2];
    &a.as_slice().expect("row-major parameters")[l * s..(l + 1) * s]
}

#[inline]
pub(crate) fn matrix_mut(a: &mut Array3<f64>, l: usize) -> &mut [f64] {
    let s = a.shape()[1] * a.shape()[2];
    &mut a.as_slice_mut().expect("row-major parameters")[l * s..(l + 1) * s]
}

/// Parameters of the 2-way term
/// `<r1_l, e_h> + <r2_l, e_t> + e_h^T D e_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BigramParams {
    /// `E x d1` entity embeddings.
    pub entities: Array2<f64>,
    /// `L x d1` relation vectors paired with the head.
    pub rel_head: Array2<f64>,
    /// `L x d1` relation vectors paired with the tail.
    pub rel_tail: Array2<f64>,
    /// Diagonal of the shared head/tail interaction matrix.
    pub diag: Array1<f64>,
}

impl BigramParams {
    pub fn zeros(num_entities: usize, num_relations: usize, dim: usize) -> Self {
        BigramParams {
            entities: Array2::zeros((num_entities, dim)),
            rel_head: Array2::zeros((num_relations, dim)),
            rel_tail: Array2::zeros((num_relations, dim)),
            diag: Array1::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.entities.ncols()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.nrows()
    }

    pub fn num_relations(&self) -> usize {
        self.rel_head.nrows()
    }

    /// The three sub-scores: head-label, label-tail and head-tail.
    #[inline]
    pub fn terms(&self, t: Triple) -> [f64; 3] {
        let eh = row(&self.entities, t.head);
        let et = row(&self.entities, t.tail);
        [
            dot(row(&self.rel_head, t.label), eh),
            dot(row(&self.rel_tail, t.label), et),
            diag_form(eh, self.diag.as_slice().expect("contiguous"), et),
        ]
    }

    #[inline]
    pub fn score(&self, t: Triple) -> f64 {
        let [a, b, c] = self.terms(t);
        a + b + c
    }
}

/// Parameters of the 3-way term `e_h^T R_l e_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigramParams {
    /// `E x d2` entity embeddings, distinct from the bigram ones.
    pub entities: Array2<f64>,
    /// `L x d2 x d2` relation matrices.
    pub relations: Array3<f64>,
}

impl TrigramParams {
    pub fn zeros(num_entities: usize, num_relations: usize, dim: usize) -> Self {
        TrigramParams {
            entities: Array2::zeros((num_entities, dim)),
            relations: Array3::zeros((num_relations, dim, dim)),
        }
    }

    pub fn dim(&self) -> usize {
        self.entities.ncols()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.nrows()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.shape()[0]
    }

    #[inline]
    pub fn score(&self, t: Triple) -> f64 {
        bilinear(
            row(&self.entities, t.head),
            matrix(&self.relations, t.label),
            row(&self.entities, t.tail),
        )
    }
}

/// Translation baseline: score is `-||e_h + r_l - e_t||_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransEParams {
    pub entities: Array2<f64>,
    pub relations: Array2<f64>,
}

impl TransEParams {
    pub fn zeros(num_entities: usize, num_relations: usize, dim: usize) -> Self {
        TransEParams {
            entities: Array2::zeros((num_entities, dim)),
            relations: Array2::zeros((num_relations, dim)),
        }
    }

    pub fn dim(&self) -> usize {
        self.entities.ncols()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.nrows()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.nrows()
    }

    #[inline]
    pub(crate) fn residual(&self, t: Triple, out: &mut [f64]) {
        let eh = row(&self.entities, t.head);
        let r = row(&self.relations, t.label);
        let et = row(&self.entities, t.tail);
        for (((o, a), b), c) in out.iter_mut().zip(eh).zip(r).zip(et) {
            *o = a + b - c;
        }
    }

    #[inline]
    pub fn score(&self, t: Triple) -> f64 {
        let eh = row(&self.entities, t.head);
        let r = row(&self.relations, t.label);
        let et = row(&self.entities, t.tail);
        let sq: f64 = eh
            .iter()
            .zip(r)
            .zip(et)
            .map(|((a, b), c)| {
                let v = a + b - c;
                v * v
            })
            .sum();
        -sq.sqrt()
    }
}

/// Both terms over one entity table (requires `d1 == d2`).
#[derive(Debug, Clone, PartialEq)]
pub struct SharedParams {
    pub entities: Array2<f64>,
    pub rel_head: Array2<f64>,
    pub rel_tail: Array2<f64>,
    pub diag: Array1<f64>,
    pub relations: Array3<f64>,
}

impl SharedParams {
    pub fn zeros(num_entities: usize, num_relations: usize, dim: usize) -> Self {
        SharedParams {
            entities: Array2::zeros((num_entities, dim)),
            rel_head: Array2::zeros((num_relations, dim)),
            rel_tail: Array2::zeros((num_relations, dim)),
            diag: Array1::zeros(dim),
            relations: Array3::zeros((num_relations, dim, dim)),
        }
    }

    pub fn dim(&self) -> usize {
        self.entities.ncols()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.nrows()
    }

    pub fn num_relations(&self) -> usize {
        self.rel_head.nrows()
    }

    #[inline]
    pub fn bigram_score(&self, t: Triple) -> f64 {
        let eh = row(&self.entities, t.head);
        let et = row(&self.entities, t.tail);
        dot(row(&self.rel_head, t.label), eh)
            + dot(row(&self.rel_tail, t.label), et)
            + diag_form(eh, self.diag.as_slice().expect("contiguous"), et)
    }

    #[inline]
    pub fn trigram_score(&self, t: Triple) -> f64 {
        bilinear(
            row(&self.entities, t.head),
            matrix(&self.relations, t.label),
            row(&self.entities, t.tail),
        )
    }

    #[inline]
    pub fn score(&self, t: Triple) -> f64 {
        self.bigram_score(t) + self.trigram_score(t)
    }
}

/// Per-relation weights of the linear combination and their penalty budget.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationWeights {
    /// `L x 4`; row `l` weights the head-label, label-tail, head-tail and
    /// 3-way sub-scores of relation `l`.
    pub delta: Array2<f64>,
    /// Non-negative penalty allocation, summing to `alpha`.
    pub sigma: Array1<f64>,
    pub alpha: f64,
}

impl CombinationWeights {
    /// All-ones weights with a uniform `sigma`.
    pub fn ones(num_relations: usize, alpha: f64) -> Self {
        CombinationWeights {
            delta: Array2::ones((num_relations, 4)),
            sigma: Array1::from_elem(num_relations, alpha / num_relations.max(1) as f64),
            alpha,
        }
    }

    pub fn num_relations(&self) -> usize {
        self.delta.nrows()
    }

    #[inline]
    pub fn row(&self, label: usize) -> [f64; 4] {
        let r = row(&self.delta, label);
        [r[0], r[1], r[2], r[3]]
    }
}
