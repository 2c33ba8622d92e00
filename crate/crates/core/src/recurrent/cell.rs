//! A single LSTM layer: gate parameters, one forward step and its adjoint.
//!
//! ```text
//! f_t  = σ(W_f x_t + U_f h_{t-1} + b_f)
//! i_t  = σ(W_i x_t + U_i h_{t-1} + b_i)
//! C̃_t  = tanh(W_c x_t + U_c h_{t-1} + b_c)
//! C_t  = i_t ⊙ C̃_t + f_t ⊙ C_{t-1}
//! o_t  = σ(W_o x_t + U_o h_{t-1} + V_o C_t + b_o)
//! h_t  = o_t ⊙ tanh(C_t)
//! ```

use ndarray::{Array1, Array2, ArrayView1, ArrayViewMutD};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Input weights `w` (H×D), recurrent weights `u` (H×H) and bias `b` (H) of one gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct GateParams<F> {
    pub w: Array2<F>,
    pub u: Array2<F>,
    pub b: Array1<F>,
}

impl<F: Scalar> GateParams<F> {
    fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            w: Array2::zeros((hidden, input)),
            u: Array2::zeros((hidden, hidden)),
            b: Array1::zeros(hidden),
        }
    }

    /// Pre-activation `W x + U h + b`.
    fn affine(&self, x: &ArrayView1<'_, F>, h: &ArrayView1<'_, F>) -> Array1<F> {
        let mut a = self.w.dot(x);
        a += &self.u.dot(h);
        a += &self.b;
        a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LstmParams<F> {
    pub input_size: usize,
    pub hidden_size: usize,
    pub forget: GateParams<F>,
    pub input: GateParams<F>,
    pub candidate: GateParams<F>,
    pub output: GateParams<F>,
    /// Output-gate peephole `V_o` (H×H) reading the new cell state.
    pub peephole: Array2<F>,
    pub use_peephole: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<F> {
    pub h: Array1<F>,
    pub c: Array1<F>,
}

impl<F: Scalar> LstmState<F> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: Array1::zeros(hidden),
            c: Array1::zeros(hidden),
        }
    }
}

/// Activations of one step, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct StepCache<F> {
    pub x: Array1<F>,
    pub h_prev: Array1<F>,
    pub c_prev: Array1<F>,
    pub f: Array1<F>,
    pub i: Array1<F>,
    pub g: Array1<F>,
    pub o: Array1<F>,
    pub c: Array1<F>,
    pub tanh_c: Array1<F>,
    pub h: Array1<F>,
}

fn sigmoid<F: Scalar>(a: Array1<F>) -> Array1<F> {
    a.mapv_into(Scalar::sigmoid)
}

/// `m += a ⊗ b`
fn add_outer<F: Scalar>(m: &mut Array2<F>, a: &Array1<F>, b: &Array1<F>) {
    for (mut row, &ai) in m.rows_mut().into_iter().zip(a) {
        if ai != F::zero() {
            row.scaled_add(ai, b);
        }
    }
}

impl<F: Scalar> LstmParams<F> {
    pub fn zeros(input_size: usize, hidden_size: usize, use_peephole: bool) -> Self {
        Self {
            input_size,
            hidden_size,
            forget: GateParams::zeros(hidden_size, input_size),
            input: GateParams::zeros(hidden_size, input_size),
            candidate: GateParams::zeros(hidden_size, input_size),
            output: GateParams::zeros(hidden_size, input_size),
            peephole: Array2::zeros((hidden_size, hidden_size)),
            use_peephole,
        }
    }

    /// Every weight uniform in `[-scale, scale]`; the peephole stays zero when disabled.
    pub fn random<R: Rng>(
        input_size: usize,
        hidden_size: usize,
        use_peephole: bool,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(input_size, hidden_size, use_peephole);
        for mut t in p.tensors_mut() {
            t.mapv_inplace(|_| F::of(rng.random_range(-scale..=scale)));
        }
        p
    }

    /// Mutable views of every trainable tensor in a fixed order.
    pub fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, F>> {
        let mut out = Vec::with_capacity(13);
        for gate in [
            &mut self.forget,
            &mut self.input,
            &mut self.candidate,
            &mut self.output,
        ] {
            out.push(gate.w.view_mut().into_dyn());
            out.push(gate.u.view_mut().into_dyn());
            out.push(gate.b.view_mut().into_dyn());
        }
        if self.use_peephole {
            out.push(self.peephole.view_mut().into_dyn());
        }
        out
    }

    pub fn tensor_names(&self) -> Vec<&'static str> {
        let mut names = vec![
            "W_f", "U_f", "b_f", "W_i", "U_i", "b_i", "W_c", "U_c", "b_c", "W_o", "U_o", "b_o",
        ];
        if self.use_peephole {
            names.push("V_o");
        }
        names
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_size, self.hidden_size, self.use_peephole)
    }

    fn check_input(&self, x: &ArrayView1<'_, F>, prev: &LstmState<F>) -> Result<()> {
        if x.len() != self.input_size {
            return Err(Error::Dimension {
                context: "lstm input",
                expected: self.input_size,
                actual: x.len(),
            });
        }
        for (what, v) in [("lstm hidden state", &prev.h), ("lstm cell state", &prev.c)] {
            if v.len() != self.hidden_size {
                return Err(Error::Dimension {
                    context: what,
                    expected: self.hidden_size,
                    actual: v.len(),
                });
            }
        }
        Ok(())
    }

    pub(crate) fn step_cached(&self, x: ArrayView1<'_, F>, prev: &LstmState<F>) -> StepCache<F> {
        let h_prev = prev.h.view();
        let f = sigmoid(self.forget.affine(&x, &h_prev));
        let i = sigmoid(self.input.affine(&x, &h_prev));
        let g = self.candidate.affine(&x, &h_prev).mapv_into(F::tanh);
        let c = &i * &g + &f * &prev.c;
        let mut a_o = self.output.affine(&x, &h_prev);
        if self.use_peephole {
            a_o += &self.peephole.dot(&c);
        }
        let o = sigmoid(a_o);
        let tanh_c = c.mapv(F::tanh);
        let h = &o * &tanh_c;
        StepCache {
            x: x.to_owned(),
            h_prev: prev.h.clone(),
            c_prev: prev.c.clone(),
            f,
            i,
            g,
            o,
            c,
            tanh_c,
            h,
        }
    }

    /// Backpropagates one step. `dh` is the total gradient reaching `h_t`,
    /// `dc_next` the gradient flowing into `C_t` from step t+1. Parameter
    /// gradients accumulate into `grads`; returns `(dx, dh_prev, dc_prev)`.
    pub(crate) fn step_backward(
        &self,
        cache: &StepCache<F>,
        dh: &Array1<F>,
        dc_next: &Array1<F>,
        grads: &mut LstmParams<F>,
    ) -> (Array1<F>, Array1<F>, Array1<F>) {
        let one = F::one();
        let d_o = dh * &cache.tanh_c;
        let da_o = &d_o * &cache.o.mapv(|o| o * (one - o));
        let mut dc = dc_next + &(dh * &cache.o * &cache.tanh_c.mapv(|t| one - t * t));
        if self.use_peephole {
            dc += &self.peephole.t().dot(&da_o);
            add_outer(&mut grads.peephole, &da_o, &cache.c);
        }
        let da_i = &dc * &cache.g * &cache.i.mapv(|i| i * (one - i));
        let da_g = &dc * &cache.i * &cache.g.mapv(|g| one - g * g);
        let da_f = &dc * &cache.c_prev * &cache.f.mapv(|f| f * (one - f));
        let dc_prev = &dc * &cache.f;

        let mut dx = Array1::zeros(self.input_size);
        let mut dh_prev = Array1::zeros(self.hidden_size);
        for (gate, grad, da) in [
            (&self.forget, &mut grads.forget, &da_f),
            (&self.input, &mut grads.input, &da_i),
            (&self.candidate, &mut grads.candidate, &da_g),
            (&self.output, &mut grads.output, &da_o),
        ] {
            add_outer(&mut grad.w, da, &cache.x);
            add_outer(&mut grad.u, da, &cache.h_prev);
            grad.b += da;
            dx += &gate.w.t().dot(da);
            dh_prev += &gate.u.t().dot(da);
        }
        (dx, dh_prev, dc_prev)
    }
}

/// One LSTM step from `prev` on input `x`.
pub fn lstm_step<F: Scalar>(
    params: &LstmParams<F>,
    x: ArrayView1<'_, F>,
    prev: &LstmState<F>,
) -> Result<LstmState<F>> {
    params.check_input(&x, prev)?;
    let cache = params.step_cached(x, prev);
    Ok(LstmState {
        h: cache.h,
        c: cache.c,
    })
}
