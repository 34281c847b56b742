use std::collections::VecDeque;

use super::TransferFunction;

/// Delay-line state of a direct-form-I difference equation
/// `sum den[i] y[k-i] = sum num[i] x[k-i]` with `den[0] == 1`.
///
/// Coefficients live with the caller so one state can be driven by a
/// borrowed configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    inputs: VecDeque<f64>,
    outputs: VecDeque<f64>,
}

impl FilterState {
    pub fn new(tf: &TransferFunction) -> Self {
        Self::with_orders(tf.num().len(), tf.den().len())
    }

    pub fn with_orders(num_len: usize, den_len: usize) -> Self {
        Self {
            inputs: VecDeque::from(vec![0.0; num_len.max(1)]),
            outputs: VecDeque::from(vec![0.0; den_len.saturating_sub(1)]),
        }
    }

    pub fn step(&mut self, num: &[f64], den: &[f64], x: f64) -> f64 {
        self.inputs.pop_back();
        self.inputs.push_front(x);
        let mut y = 0.0;
        for (b, u) in num.iter().zip(self.inputs.iter()) {
            y += b * u;
        }
        for (a, v) in den.iter().skip(1).zip(self.outputs.iter()) {
            y -= a * v;
        }
        if !self.outputs.is_empty() {
            self.outputs.pop_back();
            self.outputs.push_front(y);
        }
        y
    }

    pub fn is_finite(&self) -> bool {
        self.inputs
            .iter()
            .chain(self.outputs.iter())
            .all(|v| v.is_finite())
    }
}
