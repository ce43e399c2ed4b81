use super::{DiagonalAffineSeq, States};
use crate::dsp::FftPlan;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// States of a time-invariant recurrence as `h = K ∗ b` with `K = (1, a, a², …)`.
///
/// Inputs and kernel are zero-padded to at least `2S` so the circular
/// convolution computed by the FFT equals the linear one. A non-zero initial
/// state contributes `a^{k+1} h₀` to step `k`.
pub fn conv_recurrence<T: Scalar>(seq: &DiagonalAffineSeq<T>) -> Result<States<T>> {
    if !seq.is_time_invariant() {
        return Err(Error::arg(
            "convolutional evaluation needs coefficients that do not change over time",
        ));
    }
    let (s, d) = (seq.steps(), seq.dim());
    let mut re = vec![T::zero(); s * d];
    let mut im = vec![T::zero(); s * d];
    if s == 0 {
        return Ok(States { steps: 0, dim: d, re, im });
    }
    let n = (2 * s).next_power_of_two();
    let plan = FftPlan::new(n)?;
    for j in 0..d {
        let (ar, ai) = (seq.a_re[j], seq.a_im[j]);
        // kernel a^m for m = 0..=s (the extra power serves the initial state)
        let mut kr = vec![T::zero(); n];
        let mut ki = vec![T::zero(); n];
        let (mut pr, mut pi) = (T::one(), T::zero());
        let mut powers = Vec::with_capacity(s + 1);
        for m in 0..=s {
            powers.push((pr, pi));
            if m < s {
                kr[m] = pr;
                ki[m] = pi;
            }
            let nr = pr * ar - pi * ai;
            pi = pr * ai + pi * ar;
            pr = nr;
        }
        let mut xr = vec![T::zero(); n];
        let mut xi = vec![T::zero(); n];
        for k in 0..s {
            xr[k] = seq.b_re[k * d + j];
            xi[k] = seq.b_im[k * d + j];
        }
        plan.forward_in_place(&mut kr, &mut ki);
        plan.forward_in_place(&mut xr, &mut xi);
        for m in 0..n {
            let r = kr[m] * xr[m] - ki[m] * xi[m];
            let i = kr[m] * xi[m] + ki[m] * xr[m];
            xr[m] = r;
            xi[m] = i;
        }
        plan.inverse_in_place(&mut xr, &mut xi);
        let (hr, hi) = (seq.h0_re[j], seq.h0_im[j]);
        for k in 0..s {
            let (pr, pi) = powers[k + 1];
            re[k * d + j] = xr[k] + pr * hr - pi * hi;
            im[k * d + j] = xi[k] + pr * hi + pi * hr;
        }
    }
    Ok(States { steps: s, dim: d, re, im })
}
