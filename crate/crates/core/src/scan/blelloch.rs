use super::{combine, DiagonalAffineSeq, States};
use crate::scalar::Scalar;

struct BlockMut<'a, T> {
    ar: &'a mut [T],
    ai: &'a mut [T],
    br: &'a mut [T],
    bi: &'a mut [T],
}

impl<T: Scalar> BlockMut<'_, T> {
    #[inline]
    fn get(&self, i: usize) -> (T, T, T, T) {
        (self.ar[i], self.ai[i], self.br[i], self.bi[i])
    }

    #[inline]
    fn set(&mut self, i: usize, e: (T, T, T, T)) {
        self.ar[i] = e.0;
        self.ai[i] = e.1;
        self.br[i] = e.2;
        self.bi[i] = e.3;
    }
}

struct Elems<T> {
    ar: Vec<T>,
    ai: Vec<T>,
    br: Vec<T>,
    bi: Vec<T>,
}

/// Runs `f` on every disjoint block of `block` scalars. The combine tree is
/// fixed by the block layout, so the result does not depend on `workers`.
fn for_each_block<T: Scalar>(
    e: &mut Elems<T>,
    block: usize,
    workers: usize,
    f: impl Fn(BlockMut<'_, T>) + Sync,
) {
    let blocks: Vec<BlockMut<'_, T>> = e
        .ar
        .chunks_mut(block)
        .zip(e.ai.chunks_mut(block))
        .zip(e.br.chunks_mut(block).zip(e.bi.chunks_mut(block)))
        .map(|((ar, ai), (br, bi))| BlockMut { ar, ai, br, bi })
        .collect();
    if workers <= 1 || blocks.len() <= 1 {
        blocks.into_iter().for_each(f);
        return;
    }
    let per = blocks.len().div_ceil(workers);
    let f = &f;
    std::thread::scope(|s| {
        let mut rest = blocks.into_iter();
        loop {
            let group: Vec<_> = rest.by_ref().take(per).collect();
            if group.is_empty() {
                break;
            }
            s.spawn(move || group.into_iter().for_each(f));
        }
    });
}

/// Exclusive prefix of the affine elements: entry `k` is the composition of
/// steps `0..k` (identity for `k = 0`).
///
/// The sequence is padded to a power of two with identity maps `(1, 0)`,
/// reduced by an up-sweep, then the root is reset to the identity and pushed
/// back down: a left child inherits its parent's prefix, a right child gets
/// the parent's prefix followed by its left sibling's total.
pub fn blelloch_prescan<T: Scalar>(seq: &DiagonalAffineSeq<T>, workers: usize) -> DiagonalAffineSeq<T> {
    let (s, d) = (seq.steps(), seq.dim());
    if s == 0 {
        return seq.clone();
    }
    let p = s.next_power_of_two();
    let pad = (p - s) * d;
    let extend = |v: &[T], fill: T| {
        let mut out = v.to_vec();
        out.resize(v.len() + pad, fill);
        out
    };
    let mut e = Elems {
        ar: extend(&seq.a_re, T::one()),
        ai: extend(&seq.a_im, T::zero()),
        br: extend(&seq.b_re, T::zero()),
        bi: extend(&seq.b_im, T::zero()),
    };

    let mut len = 2;
    while len <= p {
        let (left, right) = ((len / 2 - 1) * d, (len - 1) * d);
        for_each_block(&mut e, len * d, workers, |mut blk| {
            for j in 0..d {
                let sum = combine(blk.get(left + j), blk.get(right + j));
                blk.set(right + j, sum);
            }
        });
        len *= 2;
    }

    let root = (p - 1) * d;
    for j in 0..d {
        e.ar[root + j] = T::one();
        e.ai[root + j] = T::zero();
        e.br[root + j] = T::zero();
        e.bi[root + j] = T::zero();
    }

    let mut len = p;
    while len >= 2 {
        let (left, right) = ((len / 2 - 1) * d, (len - 1) * d);
        for_each_block(&mut e, len * d, workers, |mut blk| {
            for j in 0..d {
                let left_total = blk.get(left + j);
                let parent = blk.get(right + j);
                blk.set(left + j, parent);
                blk.set(right + j, combine(parent, left_total));
            }
        });
        len /= 2;
    }

    let n = s * d;
    e.ar.truncate(n);
    e.ai.truncate(n);
    e.br.truncate(n);
    e.bi.truncate(n);
    DiagonalAffineSeq::complex(s, d, e.ar, e.ai, e.br, e.bi)
        .expect("prescan preserves shape")
        .with_initial(seq.h0_re.clone(), seq.h0_im.clone())
        .expect("initial state shape unchanged")
}

/// Inclusive states via the associative scan; matches [`super::sequential_recurrence`].
pub fn blelloch_scan<T: Scalar>(seq: &DiagonalAffineSeq<T>, workers: usize) -> States<T> {
    let (s, d) = (seq.steps(), seq.dim());
    let pre = blelloch_prescan(seq, workers);
    let mut re = vec![T::zero(); s * d];
    let mut im = vec![T::zero(); s * d];
    for k in 0..s {
        for j in 0..d {
            let i = k * d + j;
            let (ar, ai, br, bi) = combine(
                (pre.a_re[i], pre.a_im[i], pre.b_re[i], pre.b_im[i]),
                (seq.a_re[i], seq.a_im[i], seq.b_re[i], seq.b_im[i]),
            );
            let (hr, hi) = (seq.h0_re[j], seq.h0_im[j]);
            re[i] = ar * hr - ai * hi + br;
            im[i] = ar * hi + ai * hr + bi;
        }
    }
    States {
        steps: s,
        dim: d,
        re,
        im,
    }
}
